"""
Spin coupled to a bath of N spins through sigma_z sigma_z^k interactions.

With the self-Hamiltonians set to zero the evolved state keeps a product form
and the coherence of the central spin is governed by

    z(t) = prod_k [cos(2 g_k t) + i (|alpha_k|^2 - |beta_k|^2) sin(2 g_k t)].

Basis convention: index 0 is spin up (sigma_z = +1); the central spin is the
leftmost tensor factor, followed by the bath spins in order.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from .clocks import ClockModel
from .errors import CapacityError, DomainError, QuadratureError, StructuralError
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    StateVector,
    check_capacity,
    partial_trace,
    tensor_all,
)

logger = logging.getLogger("montevideo_sim.zurek")

NORMALIZATION_TOL = 1e-12
MAX_STATE_SPINS = 22
DEFAULT_REVIVAL_THRESHOLD = 0.9


class CouplingProfile(Enum):
    """Coupling distributions for generated baths."""

    CONSTANT = "constant"
    LINEAR = "linear"
    UNIFORM = "uniform"


def _frozen(values: Union[Sequence[complex], np.ndarray], dtype: type) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpinBathConfig:
    """Couplings and initial amplitudes of the spin-bath model."""

    couplings: np.ndarray
    a: complex
    b: complex
    alpha: np.ndarray
    beta: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        couplings = _frozen(self.couplings, float)
        alpha = _frozen(self.alpha, complex)
        beta = _frozen(self.beta, complex)
        if couplings.size < 1:
            raise StructuralError("the bath needs at least one spin")
        if alpha.shape != couplings.shape or beta.shape != couplings.shape:
            raise StructuralError(
                f"{couplings.size} couplings but {alpha.size} alpha / {beta.size} beta amplitudes"
            )
        system_norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(system_norm - 1.0) > NORMALIZATION_TOL:
            raise StructuralError(f"normalization violated: |a|^2 + |b|^2 = {system_norm!r}")
        bath_norm = np.abs(alpha) ** 2 + np.abs(beta) ** 2
        worst = int(np.argmax(np.abs(bath_norm - 1.0)))
        if abs(bath_norm[worst] - 1.0) > NORMALIZATION_TOL:
            raise StructuralError(
                f"normalization violated: |alpha_{worst}|^2 + |beta_{worst}|^2"
                f" = {bath_norm[worst]!r}"
            )
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    @property
    def N(self) -> int:
        return int(self.couplings.size)

    @property
    def polarization(self) -> np.ndarray:
        """|alpha_k|^2 - |beta_k|^2."""
        return np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2

    @classmethod
    def random(
        cls,
        N: int,
        seed: int,
        couplings: Union[CouplingProfile, str] = CouplingProfile.UNIFORM,
        *,
        g0: float = 1.0,
        g_min: float = 0.5,
        g_max: float = 1.5,
    ) -> "SpinBathConfig":
        """Seeded configuration with uniform |amplitude|^2 and uniform phases.

        Draw order on the PCG64 stream: system weight, system phase, bath
        weights (N), bath phases (2N), then couplings for the uniform profile.
        """
        if N < 1:
            raise StructuralError(f"the bath needs at least one spin, got N={N}")
        rng = np.random.default_rng(seed)
        weight = rng.uniform()
        phase = rng.uniform(0.0, 2.0 * np.pi)
        a = math.sqrt(weight)
        b = math.sqrt(1.0 - weight) * np.exp(1j * phase)
        weights = rng.uniform(size=N)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, N))
        alpha = np.sqrt(weights) * np.exp(1j * phases[0])
        beta = np.sqrt(1.0 - weights) * np.exp(1j * phases[1])
        g = coupling_profile(N, couplings, g0=g0, g_min=g_min, g_max=g_max, rng=rng)
        return cls(g, a, b, alpha, beta, seed=seed)

    @classmethod
    def balanced(cls, couplings: Sequence[float]) -> "SpinBathConfig":
        """All amplitudes equal to 1/sqrt(2)."""
        n = len(couplings)
        s = 1.0 / math.sqrt(2.0)
        return cls(np.asarray(couplings, dtype=float), s, s, np.full(n, s), np.full(n, s))


def coupling_profile(
    N: int,
    profile: Union[CouplingProfile, str],
    *,
    g0: float = 1.0,
    g_min: float = 0.5,
    g_max: float = 1.5,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Couplings g_k for k = 1..N: constant g0, linear k * g0 or uniform in [g_min, g_max]."""
    profile = CouplingProfile(profile)
    if profile is CouplingProfile.CONSTANT:
        return np.full(N, g0, dtype=float)
    if profile is CouplingProfile.LINEAR:
        return g0 * np.arange(1, N + 1, dtype=float)
    if rng is None:
        raise DomainError("uniform couplings need a seeded generator")
    return rng.uniform(g_min, g_max, size=N)


@dataclass(frozen=True, eq=False)
class CoherenceTrace:
    """z(t) on a time grid."""

    times: np.ndarray
    z_values: np.ndarray

    def __post_init__(self) -> None:
        times = _frozen(self.times, float)
        values = _frozen(self.z_values, complex)
        if times.shape != values.shape:
            raise StructuralError("times and z_values must have the same length")
        if np.any(np.abs(values) > 1.0 + 1e-12):
            raise StructuralError("coherence factor exceeds 1 in modulus")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "z_values", values)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.z_values)


def _coherence_factors(cfg: SpinBathConfig, t: np.ndarray) -> np.ndarray:
    angles = 2.0 * np.outer(t, cfg.couplings)
    return np.cos(angles) + 1j * cfg.polarization * np.sin(angles)


def coherence_z(cfg: SpinBathConfig, t: float) -> complex:
    """Product formula for the coherence factor z(t)."""
    z = 1.0 + 0.0j
    for factor in _coherence_factors(cfg, np.array([float(t)]))[0]:
        z *= factor
    return complex(z)


def coherence_trace(cfg: SpinBathConfig, times: Sequence[float]) -> CoherenceTrace:
    grid = np.asarray(times, dtype=float)
    factors = _coherence_factors(cfg, grid)
    z = np.ones(grid.size, dtype=complex)
    for k in range(cfg.N):
        z = z * factors[:, k]
    return CoherenceTrace(grid, z)


def _check_state_capacity(N: int) -> None:
    if N > MAX_STATE_SPINS:
        raise CapacityError(
            f"state vector for N={N} bath spins exceeds the limit N <= {MAX_STATE_SPINS}"
        )


def _bath_branch(cfg: SpinBathConfig, phase_sign: float, t: float) -> np.ndarray:
    """tensor_k (alpha_k e^{i s g_k t}|up> + beta_k e^{-i s g_k t}|down>)."""
    branch = np.ones(1, dtype=complex)
    for g, alpha, beta in zip(cfg.couplings, cfg.alpha, cfg.beta):
        phase = np.exp(1j * phase_sign * g * t)
        branch = np.kron(branch, np.array([alpha * phase, beta / phase]))
    return branch


def initial_state(cfg: SpinBathConfig) -> StateVector:
    """(a|up> + b|down>) tensor_k (alpha_k|up> + beta_k|down>)."""
    _check_state_capacity(cfg.N)
    factors = [StateVector(np.array([cfg.a, cfg.b]))] + [
        StateVector(np.array([al, be])) for al, be in zip(cfg.alpha, cfg.beta)
    ]
    return tensor_all(factors)


def evolved_state(cfg: SpinBathConfig, t: float) -> StateVector:
    """Exact evolved state in product form.

    a|up> tensor_k (alpha_k e^{i g_k t}|up> + beta_k e^{-i g_k t}|down>)
    + b|down> tensor_k (alpha_k e^{-i g_k t}|up> + beta_k e^{i g_k t}|down>)
    """
    _check_state_capacity(cfg.N)
    up = cfg.a * _bath_branch(cfg, 1.0, t)
    down = cfg.b * _bath_branch(cfg, -1.0, t)
    return StateVector.from_amplitudes(np.concatenate([up, down]))


def _bath_sums(cfg: SpinBathConfig) -> np.ndarray:
    """sum_k g_k s_k for every bath configuration (s_k = +1 for up)."""
    sums = np.zeros(1)
    for g in cfg.couplings:
        sums = (sums[:, None] + g * np.array([1.0, -1.0])[None, :]).ravel()
    return sums


def _bath_weights(cfg: SpinBathConfig) -> np.ndarray:
    weights = np.ones(1)
    for alpha, beta in zip(cfg.alpha, cfg.beta):
        weights = np.kron(weights, np.array([abs(alpha) ** 2, abs(beta) ** 2]))
    return weights


def interaction_energies(cfg: SpinBathConfig) -> np.ndarray:
    """Diagonal of H_int = -sum_k g_k sigma_z tensor sigma_z^k in the product basis."""
    _check_state_capacity(cfg.N)
    sums = _bath_sums(cfg)
    return np.concatenate([-sums, sums])


def interaction_hamiltonian(cfg: SpinBathConfig) -> HermitianOperator:
    """Dense interaction Hamiltonian (brute-force oracle)."""
    dim = 2 ** (cfg.N + 1)
    check_capacity(dim, operator=True)
    return HermitianOperator(np.diag(interaction_energies(cfg)).astype(np.complex128))


def reduced_density(cfg: SpinBathConfig, t: float) -> DensityMatrix:
    """[[|a|^2, z a b*], [z* a* b, |b|^2]]."""
    z = coherence_z(cfg, t)
    a, b = cfg.a, cfg.b
    off = z * a * b.conjugate()
    return DensityMatrix(
        np.array([[abs(a) ** 2, off], [off.conjugate(), abs(b) ** 2]], dtype=complex)
    )


def brute_force_reduced_density(cfg: SpinBathConfig, t: float) -> DensityMatrix:
    """Reduced state from exp(-i H_int t) applied to the full initial state and a partial trace."""
    psi0 = initial_state(cfg)
    phases = np.exp(-1j * interaction_energies(cfg) * t)
    psi_t = StateVector.from_amplitudes(phases * psi0.amplitudes)
    return partial_trace(psi_t, keep=[0], dims=[2] * (cfg.N + 1))


@dataclass(frozen=True)
class Revival:
    """A local maximum of |z(t)|."""

    time: float
    magnitude: float


@dataclass(frozen=True)
class RevivalStatistics:
    count: int
    mean_spacing: Optional[float]
    highest: Optional[Revival]


def max_revival_step(cfg: SpinBathConfig) -> float:
    """Largest scan step that resolves the fastest factor, pi / (20 max g)."""
    g_max = float(np.max(np.abs(cfg.couplings)))
    return math.inf if g_max == 0 else math.pi / (20.0 * g_max)


def revival_search(
    cfg: SpinBathConfig,
    t_max: float,
    resolution: float,
    threshold: float = DEFAULT_REVIVAL_THRESHOLD,
) -> list[Revival]:
    """Local maxima of |z(t)| on (0, t_max) with |z| >= threshold.

    Candidates come from a grid scan; each strict grid maximum is refined by
    golden-section search inside the bracket formed by its neighbours.
    """
    if resolution <= 0 or resolution > max_revival_step(cfg):
        raise DomainError(
            f"resolution {resolution} does not resolve the fastest factor "
            f"(step must be <= {max_revival_step(cfg):.6g})"
        )
    count = int(math.ceil(t_max / resolution)) + 1
    grid = np.linspace(0.0, t_max, count)
    magnitudes = coherence_trace(cfg, grid).magnitudes

    def objective(t: float) -> float:
        return -abs(coherence_z(cfg, t))

    revivals: list[Revival] = []
    for i in range(1, count - 1):
        if not (magnitudes[i] >= magnitudes[i - 1] and magnitudes[i] > magnitudes[i + 1]):
            continue
        time, magnitude = float(grid[i]), float(magnitudes[i])
        bracket = (grid[i - 1], grid[i], grid[i + 1])
        left, middle, right = (objective(t) for t in bracket)
        if middle < left and middle < right:
            refined = optimize.minimize_scalar(
                objective,
                bracket=bracket,
                method="golden",
                options={"xtol": 1e-10},
            )
            candidate = abs(coherence_z(cfg, float(refined.x)))
            if candidate >= magnitude:
                time, magnitude = float(refined.x), candidate
        if magnitude < threshold:
            continue
        if revivals and time - revivals[-1].time < resolution:
            if magnitude > revivals[-1].magnitude:
                revivals[-1] = Revival(time, magnitude)
            continue
        revivals.append(Revival(time, magnitude))
    logger.debug(f"revival_search: {len(revivals)} revivals above {threshold} up to t={t_max}")
    return revivals


def revival_statistics(revivals: Sequence[Revival]) -> RevivalStatistics:
    if not revivals:
        return RevivalStatistics(0, None, None)
    times = np.array([r.time for r in revivals])
    spacing = float(np.mean(np.diff(times))) if len(revivals) > 1 else None
    highest = max(revivals, key=lambda r: r.magnitude)
    return RevivalStatistics(len(revivals), spacing, highest)


def clock_corrected_coherence(cfg: SpinBathConfig, clock: ClockModel, T: float) -> complex:
    """Coherence factor of the central spin under real-clock evolution.

    The interaction Hamiltonian is diagonal in the product basis; a bath
    configuration e contributes the Bohr frequency w_e = -2 sum_k g_k s_k with
    weight prod_k |c_k|^2, so

        z_eff(T) = sum_e w_e exp(-i w_e T - w_e^2 b(T)).
    """
    _check_state_capacity(cfg.N)
    b = clock.spread(T).b
    omega = -2.0 * _bath_sums(cfg)
    weights = _bath_weights(cfg)
    return complex(np.sum(weights * np.exp(-1j * omega * T - omega**2 * b)))


def clock_averaged_coherence(cfg: SpinBathConfig, clock: ClockModel, T: float) -> complex:
    """Quadrature of z(t) against the clock density P_t(T)."""
    if clock.is_sharp(T):
        return coherence_z(cfg, T)
    low, high = clock.window(T)

    def integrand(t: float) -> np.ndarray:
        weight = float(clock.density(t, T))
        z = coherence_z(cfg, t) * weight
        return np.array([z.real, z.imag, weight])

    values, error = integrate.quad_vec(integrand, low, high, epsabs=1e-13, epsrel=1e-11)
    if error > 1e-9:
        raise QuadratureError(f"coherence quadrature error {error:.3e} at T={T}")
    return complex(values[0], values[1]) / values[2]


def windowed_suprema(
    cfg: SpinBathConfig,
    clock: ClockModel,
    centers: Sequence[float],
    half_width: float,
    samples: int = 201,
) -> np.ndarray:
    """sup |z_eff| over [c - half_width, c + half_width] for every window center c."""
    suprema = []
    for center in centers:
        grid = np.linspace(center - half_width, center + half_width, samples)
        values = [abs(clock_corrected_coherence(cfg, clock, float(T))) for T in grid if T > 0]
        suprema.append(max(values))
    return np.array(suprema)
