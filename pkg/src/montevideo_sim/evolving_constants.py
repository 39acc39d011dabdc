"""
Evolving constants of the motion and conditional probabilities.

The first half of this module treats the parameterized relativistic particle
classically: phase-space points (q0, q, p0, p) subject to the constraint
phi = p0^2 - p^2 - m^2, its Dirac observables p and X, the evolving constant
Q(t), and a finite-difference Poisson-bracket verifier.

The second half discretizes two free particles on periodic grids, uses one
of them as a clock and evaluates the conditional probability

    P(O in [O0 - D1, O0 + D1] | T in [T0 - D2, T0 + D2])
        = int dt Tr(P_O P_T rho(t)) / int dt Tr(P_T rho(t))

with the t-integrals over a finite window whose convergence is checked by
doubling it.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .errors import (
    CapacityError,
    ClockNeverReadsError,
    DomainError,
    NumericalError,
    StructuralError,
    WindowConvergenceError,
)
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    Projector,
    StateVector,
    evolve_state,
    tensor,
)

logger = logging.getLogger("montevideo_sim.evolving_constants")

ON_SHELL_TOL = 1e-9
FD_STEP = 1e-6
WINDOW_TOL = 1e-6
DENOMINATOR_FLOOR = 1e-14
PROBABILITY_SLACK = 1e-9
MAX_MODEL_DIM = 2**14

PhaseFunction = Callable[["PhaseSpacePoint"], float]


@dataclass(frozen=True)
class PhaseSpacePoint:
    """Point (q0, q, p0, p) of the extended phase space of a particle of mass m."""

    q0: float
    q: float
    p0: float
    p: float
    m: float

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise DomainError(f"mass must be > 0, got {self.m}")

    @classmethod
    def on_shell_point(
        cls, q0: float, q: float, p: float, m: float, *, branch: int = -1
    ) -> "PhaseSpacePoint":
        """Point on the constraint surface, p0 = branch * sqrt(p^2 + m^2)."""
        if branch not in (-1, 1):
            raise DomainError(f"branch must be +1 or -1, got {branch}")
        return cls(q0, q, branch * math.hypot(p, m), p, m)

    @property
    def energy(self) -> float:
        """sqrt(p^2 + m^2)."""
        return math.hypot(self.p, self.m)

    @property
    def constraint(self) -> float:
        return constraint(self)

    @property
    def on_shell(self) -> bool:
        return abs(self.constraint) <= ON_SHELL_TOL

    def coordinates(self) -> np.ndarray:
        return np.array([self.q0, self.q, self.p0, self.p], dtype=float)

    def with_coordinates(self, values: np.ndarray) -> "PhaseSpacePoint":
        q0, q, p0, p = (float(v) for v in values)
        return PhaseSpacePoint(q0, q, p0, p, self.m)


def constraint(pt: PhaseSpacePoint) -> float:
    """phi = p0^2 - p^2 - m^2."""
    return pt.p0**2 - pt.p**2 - pt.m**2


def dirac_observables(pt: PhaseSpacePoint) -> tuple[float, float]:
    """Return the Dirac observables (p, X) with X = q - p q0 / sqrt(p^2 + m^2)."""
    return pt.p, pt.q - pt.p * pt.q0 / pt.energy


def evolving_constant_Q(pt: PhaseSpacePoint, t: float) -> float:
    """Q(t) = X + p t / sqrt(p^2 + m^2); equals q when t = q0."""
    p, X = dirac_observables(pt)
    return X + p * t / pt.energy


def _gradient(f: PhaseFunction, pt: PhaseSpacePoint) -> np.ndarray:
    """Centered differences with step 1e-6 * max(1, |x|) per coordinate."""
    x = pt.coordinates()
    grad = np.empty(4)
    for i in range(4):
        h = FD_STEP * max(1.0, abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(pt.with_coordinates(up)) - f(pt.with_coordinates(down))) / (up[i] - down[i])
    return grad


def poisson_bracket(f: PhaseFunction, g: PhaseFunction, pt: PhaseSpacePoint) -> float:
    """{f, g} = sum over pairs (q0, p0), (q, p) of df/dp dg/dq - df/dq dg/dp.

    With this ordering {q, phi} = 2p.
    """
    df, dg = _gradient(f, pt), _gradient(g, pt)
    # coordinates are ordered (q0, q, p0, p)
    return float(df[2] * dg[0] + df[3] * dg[1] - df[0] * dg[2] - df[1] * dg[3])


def poisson_bracket_check(f: PhaseFunction, pt: PhaseSpacePoint) -> float:
    """Numerical {f, phi}; vanishes for Dirac observables."""
    return poisson_bracket(f, constraint, pt)


def hamiltonian_flow(
    pt: PhaseSpacePoint, generator: PhaseFunction, s: float
) -> PhaseSpacePoint:
    """Flow dx/ds = {x, generator} for parameter length s."""
    if s == 0:
        return pt

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        grad = _gradient(generator, pt.with_coordinates(y))
        # {q_i, g} = -dg/dp_i, {p_i, g} = dg/dq_i
        return np.array([-grad[2], -grad[3], grad[0], grad[1]])

    solution = integrate.solve_ivp(
        rhs, (0.0, s), pt.coordinates(), method="RK45", rtol=1e-11, atol=1e-12
    )
    if not solution.success:
        raise NumericalError(f"constraint flow failed: {solution.message}")
    return pt.with_coordinates(solution.y[:, -1])


def constraint_flow(pt: PhaseSpacePoint, s: float) -> PhaseSpacePoint:
    """Gauge flow generated by the constraint phi."""
    return hamiltonian_flow(pt, constraint, s)


# Discretized quantum model


@dataclass(frozen=True)
class PeriodicGrid:
    """n equally spaced points on a ring of circumference ``length``."""

    n: int
    length: float

    def __post_init__(self) -> None:
        if self.n < 2 or not self.length > 0:
            raise StructuralError(f"invalid grid n={self.n}, length={self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def positions(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.spacing

    @property
    def momenta(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def fourier_matrix(self) -> np.ndarray:
        """Unitary DFT in the ordering of ``momenta``."""
        return np.fft.fft(np.eye(self.n), axis=0, norm="ortho")

    def displacement(self, x: np.ndarray, center: float) -> np.ndarray:
        """Minimum-image displacement x - center on the ring."""
        d = x - center
        return d - self.length * np.round(d / self.length)


@dataclass(frozen=True)
class FreeParticle:
    """Free particle on a periodic grid: H = v p + p^2 / 2m (spectral).

    ``drift`` is the velocity of a boosted frame; an infinite mass gives a
    particle with no kinetic term.
    """

    grid: PeriodicGrid
    mass: float
    drift: float = 0.0

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise DomainError(f"mass must be > 0, got {self.mass}")

    @property
    def dim(self) -> int:
        return self.grid.n

    def dispersion(self) -> np.ndarray:
        k = self.grid.momenta
        kinetic = np.zeros_like(k) if math.isinf(self.mass) else k**2 / (2.0 * self.mass)
        return kinetic + self.drift * k

    @cached_property
    def hamiltonian(self) -> HermitianOperator:
        F = self.grid.fourier_matrix()
        return HermitianOperator.from_array(
            F.conj().T @ np.diag(self.dispersion()) @ F, hermitize=True
        )

    def position_projector(self, low: float, high: float) -> Projector:
        """Projector on grid points in the closed interval [low, high]."""
        x = self.grid.positions
        return Projector(np.diag(((x >= low) & (x <= high)).astype(np.complex128)))


def gaussian_packet(
    grid: PeriodicGrid, center: float, width: float, momentum: float = 0.0
) -> StateVector:
    """Gaussian wave packet with position standard deviation ``width``."""
    if not width > 0:
        raise DomainError(f"packet width must be > 0, got {width}")
    d = grid.displacement(grid.positions, center)
    amplitudes = np.exp(-(d**2) / (4.0 * width**2) + 1j * momentum * grid.positions)
    return StateVector.from_amplitudes(amplitudes)


@dataclass(frozen=True)
class TwoParticleModel:
    """System particle (left factor) and clock particle (right factor)."""

    system: FreeParticle
    clock: FreeParticle

    def __post_init__(self) -> None:
        if self.dim > MAX_MODEL_DIM:
            raise CapacityError(
                f"two-particle model of dim {self.dim} exceeds the limit {MAX_MODEL_DIM}"
            )

    @property
    def dims(self) -> tuple[int, int]:
        return self.system.dim, self.clock.dim

    @property
    def dim(self) -> int:
        return self.system.dim * self.clock.dim

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Energies and eigenvectors of H_s + H_c from the factor spectra."""
        e_s, v_s = self.system.hamiltonian.spectrum
        e_c, v_c = self.clock.hamiltonian.spectrum
        return (e_s[:, None] + e_c[None, :]).ravel(), np.kron(v_s, v_c)

    def product_state(self, psi_system: StateVector, psi_clock: StateVector) -> DensityMatrix:
        return DensityMatrix.from_state(tensor(psi_system, psi_clock))

    def system_projector(self, low: float, high: float) -> np.ndarray:
        return np.kron(
            self.system.position_projector(low, high).entries, np.eye(self.clock.dim)
        )

    def clock_projector(self, low: float, high: float) -> np.ndarray:
        return np.kron(
            np.eye(self.system.dim), self.clock.position_projector(low, high).entries
        )


@dataclass(frozen=True)
class ConditionalQuery:
    """Ranges of the observable O and the clock reading T."""

    O_center: float
    O_halfwidth: float
    T_center: float
    T_halfwidth: float
    t_window: float = field(default=10.0)

    def __post_init__(self) -> None:
        if not self.O_halfwidth > 0 or not self.T_halfwidth > 0:
            raise DomainError("interval halfwidths must be strictly positive")
        if not self.t_window > 0:
            raise DomainError(f"t_window must be > 0, got {self.t_window}")

    @property
    def O_interval(self) -> tuple[float, float]:
        return self.O_center - self.O_halfwidth, self.O_center + self.O_halfwidth

    @property
    def T_interval(self) -> tuple[float, float]:
        return self.T_center - self.T_halfwidth, self.T_center + self.T_halfwidth


def _window_kernel(bohr: np.ndarray, half_window: float) -> np.ndarray:
    """int_{-tau}^{tau} exp(-i w t) dt = 2 tau sinc(w tau / pi)."""
    return 2.0 * half_window * np.sinc(bohr * half_window / np.pi)


def _integrated_state(
    energies: np.ndarray, vectors: np.ndarray, rho: np.ndarray, half_window: float
) -> np.ndarray:
    """int_{-tau}^{tau} U(t) rho U(t)^dagger dt, exact in the energy basis."""
    rho_tilde = vectors.conj().T @ rho @ vectors
    bohr = energies[:, None] - energies[None, :]
    return vectors @ (rho_tilde * _window_kernel(bohr, half_window)) @ vectors.conj().T


def windowed_trace(
    A: Union[Projector, HermitianOperator, np.ndarray],
    H: HermitianOperator,
    rho: DensityMatrix,
    half_window: float,
) -> float:
    """int_{-tau}^{tau} Tr(A rho(t)) dt with rho(t) evolved by H."""
    energies, vectors = H.spectrum
    matrix = A if isinstance(A, np.ndarray) else A.entries
    integrated = _integrated_state(energies, vectors, rho.entries, half_window)
    return float(np.einsum("ij,ji->", matrix, integrated).real)


def _as_density(rho: Union[DensityMatrix, StateVector]) -> DensityMatrix:
    return DensityMatrix.from_state(rho) if isinstance(rho, StateVector) else rho


def _ratio(
    model: TwoParticleModel, numerator: np.ndarray, reading: np.ndarray, rho: np.ndarray, tau: float
) -> float:
    energies, vectors = model.spectrum
    integrated = _integrated_state(energies, vectors, rho, tau)
    denominator = float(np.einsum("ij,ji->", reading, integrated).real)
    if denominator < DENOMINATOR_FLOOR:
        raise ClockNeverReadsError(
            f"clock never reads the requested interval (weight {denominator:.3e})"
        )
    return float(np.einsum("ij,ji->", numerator, integrated).real) / denominator


def conditional_probability(
    model: TwoParticleModel,
    query: ConditionalQuery,
    rho: Union[DensityMatrix, StateVector],
) -> float:
    """Probability that O lies in its interval given the clock reads in its interval.

    The t-integrals run over [-t_window, t_window] and are recomputed on the
    doubled window; the doubled-window value is returned.

    Raises:
        ClockNeverReadsError: If the clock weight is below 1e-14
        WindowConvergenceError: If doubling the window changes the result by more than 1e-6
    """
    state = _as_density(rho)
    if state.dim != model.dim:
        raise StructuralError(f"state dim {state.dim} does not match model dim {model.dim}")
    reading = model.clock_projector(*query.T_interval)
    numerator = model.system_projector(*query.O_interval) @ reading

    coarse = _ratio(model, numerator, reading, state.entries, query.t_window)
    fine = _ratio(model, numerator, reading, state.entries, 2.0 * query.t_window)
    change = abs(fine - coarse)
    logger.debug(f"conditional_probability: window change {change:.3e}")
    if change > WINDOW_TOL:
        raise WindowConvergenceError(
            f"doubling t_window={query.t_window} changed the probability by {change:.3e}"
        )
    if not -PROBABILITY_SLACK <= fine <= 1.0 + PROBABILITY_SLACK:
        raise NumericalError(f"conditional probability {fine!r} outside [0, 1]")
    if fine < 0.0 or fine > 1.0:
        logger.warning(f"Clamping conditional probability {fine!r} to [0, 1]")
    return min(max(fine, 0.0), 1.0)


def _position_weights(
    model: TwoParticleModel, integrated: np.ndarray, reading: np.ndarray
) -> np.ndarray:
    n_s, n_c = model.dims
    blocks = integrated.reshape(n_s, n_c, n_s, n_c)
    diagonal = np.einsum("acac->ac", blocks).real
    return diagonal @ reading


def conditional_distribution(
    model: TwoParticleModel,
    query: ConditionalQuery,
    rho: Union[DensityMatrix, StateVector],
) -> np.ndarray:
    """Conditional probability of every system grid point given the clock interval.

    Uses the T-range and window of ``query``; the O-range is ignored.
    """
    state = _as_density(rho)
    low, high = query.T_interval
    x = model.clock.grid.positions
    reading = ((x >= low) & (x <= high)).astype(float)
    energies, vectors = model.spectrum

    results = []
    for tau in (query.t_window, 2.0 * query.t_window):
        weights = _position_weights(
            model, _integrated_state(energies, vectors, state.entries, tau), reading
        )
        total = float(weights.sum())
        if total < DENOMINATOR_FLOOR:
            raise ClockNeverReadsError(
                f"clock never reads the requested interval (weight {total:.3e})"
            )
        results.append(weights / total)
    change = float(np.max(np.abs(results[1] - results[0])))
    if change > WINDOW_TOL:
        raise WindowConvergenceError(
            f"doubling t_window={query.t_window} changed the distribution by {change:.3e}"
        )
    return np.clip(results[1], 0.0, 1.0)


def born_distribution(model: TwoParticleModel, psi_system: StateVector, t: float) -> np.ndarray:
    """Position distribution of the system alone after ordinary evolution for time t."""
    evolved = evolve_state(model.system.hamiltonian, psi_system, t)
    return np.abs(evolved.amplitudes) ** 2


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise StructuralError(f"distributions have shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q)))
