"""
Evolution engines for states described with real clocks.

Three engines compute the state conditioned on a clock reading T:

- ``effective_density``: the t-average of unitarily evolved states weighted
  by the clock density (adaptive quadrature).
- ``integrate_master``: the modified Schroedinger equation
  d rho/dT = -i[H, rho] - sigma(T) [H, [H, rho]], integrated numerically.
- ``closed_form`` / ``spread_solution``: the exact energy-basis solution
  rho_nm(T) = rho_nm(0) exp(-i w_nm T) exp(-w_nm^2 b(T)).

The closed form is normative; the other two engines must converge to it.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate

from .clocks import ClockModel, NgVanDamClock
from .errors import (
    DomainError,
    IntegratorError,
    QuadratureError,
    StiffSystemError,
    StructuralError,
)
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    Projector,
    commutator,
    evolve_unitary,
    expectation,
    purity,
)

logger = logging.getLogger("montevideo_sim.evolution")

QUADRATURE_TOL = 1e-8
PURITY_TOL = 1e-10
TRACE_DRIFT_TOL = 1e-10
MASTER_RTOL = 1e-10
MASTER_ATOL = 1e-12
DEFAULT_T0 = 1e-3


class EvolutionMethod(Enum):
    """Engine that produced an EvolutionResult."""

    QUADRATURE = "quadrature"
    MASTER_EQUATION = "master"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """States on a grid of clock readings."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]
    method: EvolutionMethod

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        times.setflags(write=False)
        if times.ndim != 1 or len(times) != len(self.states):
            raise StructuralError(
                f"{len(self.states)} states do not match a grid of shape {times.shape}"
            )
        for T, rho in zip(times, self.states):
            p = purity(rho)
            if p > 1.0 + PURITY_TOL:
                raise IntegratorError(f"purity {p!r} exceeds 1 at T={T}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))

    def __len__(self) -> int:
        return len(self.states)

    def element(self, n: int, m: int) -> np.ndarray:
        """Series of one matrix element across the grid."""
        return np.array([rho.entries[n, m] for rho in self.states])


def _check_grid(T_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(T_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise StructuralError("time grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise StructuralError("time grid must be strictly increasing")
    return grid


def _eigenbasis(
    H: HermitianOperator, rho: DensityMatrix
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if H.dim != rho.dim:
        raise StructuralError(f"Hamiltonian dim {H.dim} does not match state dim {rho.dim}")
    energies, vectors = H.spectrum
    rho_tilde = vectors.conj().T @ rho.entries @ vectors
    bohr = energies[:, None] - energies[None, :]
    return rho_tilde, bohr, vectors


def _to_state(vectors: np.ndarray, rho_tilde: np.ndarray) -> DensityMatrix:
    return DensityMatrix.from_array(vectors @ rho_tilde @ vectors.conj().T, hermitize=True)


def spread_solution(
    H: HermitianOperator, rho0: DensityMatrix, clock: ClockModel, T: float
) -> DensityMatrix:
    """Energy-basis solution for any clock kind.

    Each element picks up exp(-i w_nm T - w_nm^2 b(T)). Degenerate pairs
    (w_nm = 0) are left untouched.
    """
    b = clock.spread(T).b
    rho_tilde, bohr, vectors = _eigenbasis(H, rho0)
    return _to_state(vectors, rho_tilde * np.exp(-1j * bohr * T - bohr**2 * b))


def closed_form(
    H: HermitianOperator,
    rho0: DensityMatrix,
    T_P: float,
    T: float,
    *,
    prefactor: float = 1.0,
) -> DensityMatrix:
    """Closed-form solution for the Ng-Van Dam clock.

    Args:
        H: Hamiltonian
        rho0: State at reading T = 0
        T_P: Planck time (> 0)
        T: Clock reading (> 0)
        prefactor: Constant c in b(T) = c T_P^(4/3) T^(2/3)

    Returns:
        The damped state at reading T
    """
    return spread_solution(H, rho0, NgVanDamClock(T_P, prefactor), T)


def effective_density(
    H_s: HermitianOperator, rho_s: DensityMatrix, clock: ClockModel, T: float
) -> DensityMatrix:
    """Average of U(t) rho U(t)^dagger over the clock density P_t(T).

    The integral is carried out in the energy eigenbasis with adaptive
    Gauss-Kronrod quadrature over T +/- 8 standard deviations. The weight
    integral is computed alongside and used to normalize the result.

    Raises:
        QuadratureError: If the refinement error estimate exceeds 1e-8
    """
    if clock.is_sharp(T):
        return evolve_unitary(H_s, rho_s, T)

    rho_tilde, bohr, vectors = _eigenbasis(H_s, rho_s)
    size = rho_tilde.size
    low, high = clock.window(T)

    def integrand(t: float) -> np.ndarray:
        weight = float(clock.density(t, T))
        rotated = (rho_tilde * np.exp(-1j * bohr * t)).ravel() * weight
        return np.concatenate([rotated.real, rotated.imag, [weight]])

    values, error, info = integrate.quad_vec(
        integrand, low, high, epsabs=1e-12, epsrel=1e-10, norm="max", full_output=True
    )
    logger.debug(
        f"effective_density T={T}: {info.intervals.shape[0]} intervals, error={error:.3e}"
    )
    if not info.success or error > QUADRATURE_TOL:
        logger.warning(f"Quadrature did not converge at T={T}: error={error:.3e}")
        raise QuadratureError(
            f"clock quadrature error {error:.3e} exceeds {QUADRATURE_TOL} at T={T}"
            f" ({info.message})"
        )
    averaged = (values[:size] + 1j * values[size : 2 * size]).reshape(rho_tilde.shape)
    weight = values[-1]
    return DensityMatrix.from_array(
        vectors @ (averaged / weight) @ vectors.conj().T, hermitize=True, renormalize=True
    )


def effective_probability(projector: Projector, rho_eff: DensityMatrix) -> float:
    """Tr(P rho_eff) / Tr(rho_eff)."""
    return expectation(projector, rho_eff) / float(np.trace(rho_eff.entries).real)


def _bridge(
    H: HermitianOperator,
    rho: DensityMatrix,
    clock: ClockModel,
    start: float,
    stop: float,
) -> DensityMatrix:
    """Exact propagation of the master equation from reading start to stop."""
    if stop == start:
        return rho
    if isinstance(clock, NgVanDamClock) and start <= 0.0:
        b_start = 0.0
    else:
        b_start = clock.spread(start).b
    b_stop = clock.spread(stop).b
    rho_tilde, bohr, vectors = _eigenbasis(H, rho)
    factor = np.exp(-1j * bohr * (stop - start) - bohr**2 * (b_stop - b_start))
    return _to_state(vectors, rho_tilde * factor)


def integrate_master(
    H: HermitianOperator,
    rho0: DensityMatrix,
    clock: ClockModel,
    T_grid: Sequence[float],
    *,
    origin: float = 0.0,
) -> EvolutionResult:
    """Integrate d rho/dT = -i[H, rho] - sigma(T)[H, [H, rho]] over a reading grid.

    ``rho0`` is the state at reading ``origin``. The segment from ``origin``
    to the first grid point is bridged with the exact solution (sigma
    diverges at T = 0 for the Ng-Van Dam clock); the rest of the grid is
    integrated with DOP853.

    Raises:
        StiffSystemError: If the step size underflows
        IntegratorError: If the integrator fails or the trace drifts
    """
    grid = _check_grid(T_grid)
    if grid[0] < origin:
        raise StructuralError(f"grid starts at {grid[0]} before the origin {origin}")
    if isinstance(clock, NgVanDamClock) and grid[0] <= 0:
        raise DomainError(f"Ng-Van Dam evolution needs a grid starting at T0 > 0, got {grid[0]}")

    start = _bridge(H, rho0, clock, origin, float(grid[0]))
    dim = H.dim
    h = H.entries
    trace0 = complex(np.trace(start.entries))

    def rhs(T: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(dim, dim)
        single = commutator(h, rho)
        sigma = clock.spread(T).sigma
        if sigma == 0.0:
            return (-1j * single).ravel()
        return (-1j * single - sigma * commutator(h, single)).ravel()

    if grid.size == 1:
        return EvolutionResult(grid, (start,), EvolutionMethod.MASTER_EQUATION)

    solution = integrate.solve_ivp(
        rhs,
        (float(grid[0]), float(grid[-1])),
        start.entries.astype(np.complex128).ravel(),
        method="DOP853",
        t_eval=grid,
        rtol=MASTER_RTOL,
        atol=MASTER_ATOL,
    )
    logger.debug(
        f"integrate_master: status={solution.status}, nfev={solution.nfev}, "
        f"points={grid.size}"
    )
    if not solution.success:
        if "step size" in solution.message.lower():
            raise StiffSystemError(f"master equation step size underflow: {solution.message}")
        raise IntegratorError(f"master equation integration failed: {solution.message}")

    states = []
    for index, T in enumerate(solution.t):
        rho = solution.y[:, index].reshape(dim, dim)
        drift = abs(complex(np.trace(rho)) - trace0)
        if drift > TRACE_DRIFT_TOL:
            raise IntegratorError(f"trace drifted by {drift:.3e} at T={T}")
        try:
            states.append(DensityMatrix.from_array(rho, hermitize=True, trace_tol=TRACE_DRIFT_TOL))
        except StructuralError as exc:
            raise IntegratorError(f"invalid state at T={T}: {exc}") from exc
    return EvolutionResult(grid, tuple(states), EvolutionMethod.MASTER_EQUATION)


def evolve_closed_form(
    H: HermitianOperator, rho0: DensityMatrix, clock: ClockModel, T_grid: Sequence[float]
) -> EvolutionResult:
    """Energy-basis solution evaluated on a grid."""
    grid = _check_grid(T_grid)
    states = tuple(spread_solution(H, rho0, clock, float(T)) for T in grid)
    return EvolutionResult(grid, states, EvolutionMethod.CLOSED_FORM)


def evolve_effective(
    H: HermitianOperator, rho0: DensityMatrix, clock: ClockModel, T_grid: Sequence[float]
) -> EvolutionResult:
    """Effective density matrix evaluated on a grid."""
    grid = _check_grid(T_grid)
    states = tuple(effective_density(H, rho0, clock, float(T)) for T in grid)
    return EvolutionResult(grid, states, EvolutionMethod.QUADRATURE)


def purity_series(result: EvolutionResult) -> np.ndarray:
    return np.array([purity(rho) for rho in result.states])


def max_deviation(first: EvolutionResult, second: EvolutionResult) -> np.ndarray:
    """Per-grid-point max elementwise deviation between two results."""
    if first.times.shape != second.times.shape or not np.allclose(
        first.times, second.times, rtol=0.0, atol=1e-15
    ):
        raise StructuralError("results are defined on different grids")
    return np.array(
        [
            float(np.max(np.abs(a.entries - b.entries)))
            for a, b in zip(first.states, second.states)
        ]
    )


def coherence_lifetime(omega: float, T_P: float, prefactor: float = 1.0) -> float:
    """Reading at which a coherence of Bohr frequency omega has decayed by 1/e.

    Solves omega^2 c T_P^(4/3) T^(2/3) = 1.
    """
    if omega == 0:
        return math.inf
    if not T_P > 0 or not prefactor > 0:
        raise DomainError("coherence lifetime needs T_P > 0 and prefactor > 0")
    return prefactor ** (-1.5) * abs(omega) ** (-3) * T_P ** (-2)
