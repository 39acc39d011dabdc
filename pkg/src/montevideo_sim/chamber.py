"""
Central spin crossing a chamber while environment spins fly through it.

The k-th environment spin couples to the central spin through

    H_k = gamma1 B S_z + gamma2 B S_z^k + f_k (S . S^k)

with S = sigma / 2. The global observable M = sigma_x tensor_k sigma_x^k
(eigenvalues +/-1) vanishes on collapsed states but not under unitary
evolution; real clocks damp its expectation value.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .hilbert import (
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    HermitianOperator,
    StateVector,
    check_capacity,
    embed,
    evolve_state,
    expectation,
    spin_half,
    tensor_all,
)
from .zurek import NORMALIZATION_TOL

logger = logging.getLogger("montevideo_sim.chamber")

DEFAULT_RATIO_THRESHOLD = 0.1
MAX_DENSE_SPINS = 12


def _frozen(values: Sequence[complex], dtype: type) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ChamberConfig:
    """Parameters of the chamber experiment in natural units (hbar = 1 by default)."""

    N: int
    B: float
    gamma1: float
    gamma2: float
    couplings: np.ndarray
    tau: float
    T_total: float
    m_env: float
    d: float
    mu: float
    a: complex
    b: complex
    alpha: np.ndarray
    beta: np.ndarray
    T_P: float = 0.0
    hbar: float = 1.0
    seed: Optional[int] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.N < 1:
            raise StructuralError(f"chamber needs N >= 1 environment spins, got {self.N}")
        couplings = _frozen(self.couplings, float)
        if couplings.size == 1 and self.N > 1:
            couplings = _frozen(np.full(self.N, couplings[0]), float)
        alpha = _frozen(self.alpha, complex)
        beta = _frozen(self.beta, complex)
        for name, array in (("couplings", couplings), ("alpha", alpha), ("beta", beta)):
            if array.size != self.N:
                raise StructuralError(f"{name} has {array.size} entries, expected N={self.N}")
        for name in ("tau", "T_total", "m_env", "d", "mu", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be strictly positive, got {value}")
        for name in ("B", "gamma1", "gamma2"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.T_P >= 0:
            raise DomainError(f"T_P must be >= 0, got {self.T_P}")
        system_norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(system_norm - 1.0) > NORMALIZATION_TOL:
            raise StructuralError(f"normalization violated: |a|^2 + |b|^2 = {system_norm!r}")
        bath_norm = np.abs(alpha) ** 2 + np.abs(beta) ** 2
        if np.any(np.abs(bath_norm - 1.0) > NORMALIZATION_TOL):
            raise StructuralError("normalization violated: |alpha_k|^2 + |beta_k|^2 != 1")
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    @property
    def delta_gamma(self) -> float:
        return self.gamma1 - self.gamma2

    @property
    def omega(self) -> float:
        """Omega = B (gamma1 - gamma2), signed."""
        return self.B * self.delta_gamma

    @property
    def theta(self) -> float:
        """theta = (3/2) T_P^(4/3) tau^(2/3)."""
        return 1.5 * self.T_P ** (4.0 / 3.0) * self.tau ** (2.0 / 3.0)

    def bracket_factors(self) -> np.ndarray:
        """alpha_k beta_k* + alpha_k* beta_k = 2 Re(alpha_k beta_k*)."""
        return 2.0 * (self.alpha * self.beta.conj()).real

    def with_amplitudes(self, seed: int) -> "ChamberConfig":
        """Copy with seeded amplitudes drawn as for SpinBathConfig.random."""
        rng = np.random.default_rng(seed)
        weight = rng.uniform()
        phase = rng.uniform(0.0, 2.0 * np.pi)
        weights = rng.uniform(size=self.N)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, self.N))
        return replace(
            self,
            a=math.sqrt(weight),
            b=math.sqrt(1.0 - weight) * np.exp(1j * phase),
            alpha=np.sqrt(weights) * np.exp(1j * phases[0]),
            beta=np.sqrt(1.0 - weights) * np.exp(1j * phases[1]),
            seed=seed,
        )


def _check_index(cfg: ChamberConfig, k: int) -> None:
    if not 0 <= k < cfg.N:
        raise StructuralError(f"spin index {k} out of range for N={cfg.N}")


def omega_k(cfg: ChamberConfig, k: int) -> float:
    """Omega_k = sqrt(4 f_k^2 + B^2 (gamma1 - gamma2)^2)."""
    _check_index(cfg, k)
    return math.sqrt(4.0 * cfg.couplings[k] ** 2 + cfg.omega**2)


def build_hamiltonian(cfg: ChamberConfig, k: int) -> HermitianOperator:
    """4x4 Hamiltonian of the central spin (left factor) and environment spin k."""
    _check_index(cfg, k)
    sx, sy, sz = spin_half()
    identity = np.eye(2)
    zeeman = cfg.gamma1 * cfg.B * np.kron(sz, identity) + cfg.gamma2 * cfg.B * np.kron(identity, sz)
    heisenberg = np.kron(sx, sx) + np.kron(sy, sy) + np.kron(sz, sz)
    return HermitianOperator.from_array(zeeman + cfg.couplings[k] * heisenberg, hermitize=True)


def _dims(cfg: ChamberConfig) -> list[int]:
    if cfg.N > MAX_DENSE_SPINS:
        check_capacity(2 ** (cfg.N + 1), operator=True)
    return [2] * (cfg.N + 1)


def despagnat_M(cfg: ChamberConfig) -> HermitianOperator:
    """M = sigma_x tensor_k sigma_x^k; Hermitian with M^2 = I."""
    _dims(cfg)
    return tensor_all([HermitianOperator(PAULI_X)] * (cfg.N + 1))


def initial_state(cfg: ChamberConfig) -> StateVector:
    _dims(cfg)
    factors = [StateVector(np.array([cfg.a, cfg.b]))] + [
        StateVector(np.array([al, be])) for al, be in zip(cfg.alpha, cfg.beta)
    ]
    return tensor_all(factors)


def expectation_M_unitary(cfg: ChamberConfig) -> float:
    """a b* prod_k c_k e^{-2i Omega_k tau} + a* b prod_k c_k e^{2i Omega_k tau}."""
    omegas = np.array([omega_k(cfg, k) for k in range(cfg.N)])
    factors = cfg.bracket_factors()
    first = cfg.a * cfg.b.conjugate() * np.prod(factors * np.exp(-2j * omegas * cfg.tau))
    second = cfg.a.conjugate() * cfg.b * np.prod(factors * np.exp(2j * omegas * cfg.tau))
    total = complex(first + second)
    if abs(total.imag) > 1e-10:
        raise StructuralError(f"unitary expectation has imaginary part {total.imag:.3e}")
    return total.real


def phase_generator(cfg: ChamberConfig) -> HermitianOperator:
    """(sum_k Omega_k) sigma_z on the central spin, identity on the environment."""
    dims = _dims(cfg)
    total = sum(omega_k(cfg, k) for k in range(cfg.N))
    return HermitianOperator(total * embed(PAULI_Z, 0, dims))


def expectation_M_oracle(cfg: ChamberConfig) -> float:
    """<M> after evolving the initial state for tau under phase_generator."""
    psi = evolve_state(phase_generator(cfg), initial_state(cfg), cfg.tau)
    return expectation(despagnat_M(cfg), psi)


def collapsed_state(cfg: ChamberConfig) -> DensityMatrix:
    """Evolved state after a z-measurement of the central spin (Lueders rule)."""
    psi = evolve_state(phase_generator(cfg), initial_state(cfg), cfg.tau).amplitudes
    half = psi.size // 2
    up = np.concatenate([psi[:half], np.zeros(half)])
    down = np.concatenate([np.zeros(half), psi[half:]])
    return DensityMatrix(np.outer(up, up.conj()) + np.outer(down, down.conj()), check_psd=False)


def expectation_M_collapsed(cfg: ChamberConfig) -> float:
    """<M> on the collapsed state (zero)."""
    return expectation(despagnat_M(cfg), collapsed_state(cfg))


@dataclass(frozen=True)
class CorrectedTerms:
    """The two terms of the clock-corrected <M> and their natural-log magnitudes."""

    first: complex
    second: complex
    log_first: float
    log_second: float

    @property
    def total(self) -> complex:
        return self.first + self.second


def _log_brackets(ab: np.ndarray, log_u: float, log_d: float) -> tuple[float, float]:
    """Sum of log|ab e^log_u + ab* e^log_d| and of the bracket phases.

    The larger exponent is factored out so neither weight overflows or
    underflows before the magnitudes are combined.
    """
    top = max(log_u, log_d)
    scaled = ab * math.exp(log_u - top) + ab.conj() * math.exp(log_d - top)
    with np.errstate(divide="ignore"):
        log_abs = float(np.sum(np.log(np.abs(scaled)))) + top * ab.size
    return log_abs, float(np.sum(np.angle(scaled)))


def corrected_terms(cfg: ChamberConfig) -> CorrectedTerms:
    """Terms of the clock-corrected expectation value.

    first  = a b* e^{-2iN Omega T} D prod_k [alpha_k beta_k* x + alpha_k* beta_k]
    second = b a* e^{+2iN Omega T} D prod_k [alpha_k beta_k* + alpha_k* beta_k x]

    with D = e^{-4N Omega^2 theta}, x = e^{-16 B^2 gamma1 gamma2 theta},
    Omega = B (gamma1 - gamma2) and T the experiment duration. Each spin's
    share of D is folded into its bracket: the x-weighted part then carries
    e^{-4 B^2 (gamma1 + gamma2)^2 theta}, so no factor exceeds one even when
    gamma1 gamma2 < 0.
    """
    theta = cfg.theta
    log_d = -4.0 * cfg.omega**2 * theta
    log_u = -4.0 * cfg.B**2 * (cfg.gamma1 + cfg.gamma2) ** 2 * theta
    phase = 2.0 * cfg.N * cfg.omega * cfg.T_total
    ab = cfg.alpha * cfg.beta.conj()

    prefactor_first = cfg.a * cfg.b.conjugate()
    prefactor_second = cfg.b * cfg.a.conjugate()
    log_first, angle_first = _log_brackets(ab, log_u, log_d)
    log_second, angle_second = _log_brackets(ab, log_d, log_u)
    log_first += math.log(abs(prefactor_first)) if prefactor_first else -math.inf
    log_second += math.log(abs(prefactor_second)) if prefactor_second else -math.inf
    angle_first += float(np.angle(prefactor_first)) - phase
    angle_second += float(np.angle(prefactor_second)) + phase

    first = math.exp(log_first) * np.exp(1j * angle_first)
    second = math.exp(log_second) * np.exp(1j * angle_second)
    return CorrectedTerms(complex(first), complex(second), log_first, log_second)


def expectation_M_corrected(cfg: ChamberConfig) -> float:
    """Clock-corrected <M>; the two terms are complex conjugates, so the sum is real."""
    total = corrected_terms(cfg).total
    if abs(total.imag) > 1e-10 * max(1.0, abs(total.real)):
        raise StructuralError(f"corrected expectation has imaginary part {total.imag:.3e}")
    return total.real


def dipolar_coupling(cfg: ChamberConfig) -> float:
    """f = mu gamma1 gamma2 / (hbar d^3)."""
    return cfg.mu * cfg.gamma1 * cfg.gamma2 / (cfg.hbar * cfg.d**3)


def damping_exponent(cfg: ChamberConfig) -> float:
    """K = 6 N B^2 (gamma1 - gamma2)^2 T_P^(4/3) tau^(2/3)."""
    return 6.0 * cfg.N * cfg.omega**2 * cfg.T_P ** (4.0 / 3.0) * cfg.tau ** (2.0 / 3.0)


@dataclass(frozen=True)
class FeasibilityCondition:
    """One feasibility inequality; margin >= 1 when it holds."""

    name: str
    satisfied: Optional[bool]
    lhs: float
    rhs: float
    margin: Optional[float]


@dataclass(frozen=True)
class FeasibilityReport:
    cond_a: FeasibilityCondition
    cond_b: FeasibilityCondition
    cond_c: FeasibilityCondition
    cond_d: FeasibilityCondition

    @property
    def conditions(self) -> tuple[FeasibilityCondition, ...]:
        return (self.cond_a, self.cond_b, self.cond_c, self.cond_d)


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return math.inf if numerator > 0 else math.nan
    return numerator / denominator


def feasibility(
    cfg: ChamberConfig,
    ratio_threshold: float = DEFAULT_RATIO_THRESHOLD,
    aperture: Optional[float] = None,
) -> FeasibilityReport:
    """Evaluate the four feasibility conditions.

    a) 1 < f tau with f the dipolar coupling
    b) dispersion sqrt(hbar T / m) below the detector aperture (if given)
    c) max_k |f_k| / |B (gamma1 - gamma2)| at most ``ratio_threshold``
    d) damping estimate exp(-K) below 1
    """
    f_tau = dipolar_coupling(cfg) * cfg.tau
    cond_a = FeasibilityCondition("a", f_tau > 1.0, f_tau, 1.0, f_tau)

    dispersion = math.sqrt(cfg.hbar * cfg.T_total / cfg.m_env)
    if aperture is None:
        cond_b = FeasibilityCondition("b", None, dispersion, math.nan, None)
    else:
        cond_b = FeasibilityCondition(
            "b", dispersion < aperture, dispersion, aperture, _ratio(aperture, dispersion)
        )

    ratio = _ratio(float(np.max(np.abs(cfg.couplings))), abs(cfg.omega))
    cond_c = FeasibilityCondition(
        "c", ratio <= ratio_threshold, ratio, ratio_threshold, _ratio(ratio_threshold, ratio)
    )

    K = damping_exponent(cfg)
    signal = math.exp(-K)
    cond_d = FeasibilityCondition("d", signal < 1.0, signal, 1.0, math.exp(K))
    return FeasibilityReport(cond_a, cond_b, cond_c, cond_d)
