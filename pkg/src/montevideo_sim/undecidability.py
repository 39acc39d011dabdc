"""
When does the unitary signal fall below the fundamental noise floor?

The clock-damped signal e^{-K} of the global observable is compared with
the error (l_P / R)^{2N} + <E> induced by the angular resolution limit. All
magnitudes are kept as natural logarithms since both sides underflow double
precision at realistic scales.
"""

import logging
import math
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import constants, optimize

from .chamber import ChamberConfig, damping_exponent
from .errors import DomainError, NumericalError

logger = logging.getLogger("montevideo_sim.undecidability")

LN10 = math.log(10.0)
MAX_CROSSOVER_N = 2**62


@dataclass(frozen=True)
class LogMagnitude:
    """A positive magnitude stored as its natural logarithm."""

    ln: float

    @property
    def value(self) -> float:
        """Linear value (may underflow to 0.0)."""
        return math.exp(self.ln) if self.ln < 709.0 else math.inf

    @property
    def log10(self) -> float:
        return self.ln / LN10

    def __lt__(self, other: "LogMagnitude") -> bool:
        return self.ln < other.ln


@dataclass(frozen=True, eq=False)
class UndecidabilityInput:
    """Chamber parameters plus the Planck length and apparatus radius (same units)."""

    chamber: ChamberConfig
    l_P: float
    R: float
    log_error_term: float = -math.inf

    def __post_init__(self) -> None:
        if not (self.l_P > 0 and self.R > self.l_P):
            raise DomainError(f"need R > l_P > 0, got l_P={self.l_P}, R={self.R}")

    @property
    def log_delta_theta(self) -> float:
        """ln(l_P / R), from the exact decimal ratio."""
        return float(_decimal_ratio(self.l_P, self.R).ln())


@dataclass(frozen=True)
class Crossover:
    """First integer N with signal < noise, and the continuous root if bracketed."""

    first_integer: int
    root: Optional[float]


@dataclass(frozen=True)
class ThresholdEstimate:
    """Threshold environment size.

    ``derived`` solves kappa N^5 = 2 N ln(R / l_P) with the strong K bound
    taken as an equality (an estimate). ``literal`` evaluates the printed
    closed expression with T read as the Planck time.
    """

    derived: float
    literal: float
    kappa: float
    crossover: Crossover
    estimate: bool = True


@dataclass(frozen=True)
class UndecidabilityReport:
    K: float
    signal: LogMagnitude
    delta_theta: float
    noise_floor: LogMagnitude
    N: int
    threshold: Optional[ThresholdEstimate]
    undecidable: bool


@dataclass(frozen=True)
class VerdictRow:
    N: int
    log_signal: float
    log_noise: float
    undecidable: bool


def _decimal_ratio(numerator: float, denominator: float) -> Decimal:
    return Decimal(repr(numerator)) / Decimal(repr(denominator))


def damping_exponent_K(cfg: ChamberConfig) -> float:
    """K = 6 N B^2 (gamma1 - gamma2)^2 T_P^(4/3) tau^(2/3)."""
    return damping_exponent(cfg)


def angular_bound(inp: UndecidabilityInput) -> float:
    """Delta theta = l_P / R, rounded once from the exact decimal quotient."""
    return float(_decimal_ratio(inp.l_P, inp.R))


def log_noise(log_delta_theta: float, N: int, log_error_term: float = -math.inf) -> float:
    """ln((Delta theta)^{2N} + <E>)."""
    return float(np.logaddexp(2.0 * N * log_delta_theta, log_error_term))


def noise_floor(inp: UndecidabilityInput, N: int) -> LogMagnitude:
    """(Delta theta)^{2N} plus the optional error term, in log space."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return LogMagnitude(log_noise(inp.log_delta_theta, N, inp.log_error_term))


def log_kappa(cfg: ChamberConfig) -> float:
    """ln of T_P^(4/3) hbar^(20/3) / (m^4 (gamma1 gamma2)^(8/3) mu^(8/3)).

    The strong bound reads K >> kappa N^5.
    """
    product = cfg.gamma1 * cfg.gamma2
    if not (cfg.T_P > 0 and product > 0):
        raise DomainError("the strong K bound needs T_P > 0 and gamma1 gamma2 > 0")
    return (
        (4.0 / 3.0) * math.log(cfg.T_P)
        + (20.0 / 3.0) * math.log(cfg.hbar)
        - 4.0 * math.log(cfg.m_env)
        - (8.0 / 3.0) * math.log(product)
        - (8.0 / 3.0) * math.log(cfg.mu)
    )


def crossover(
    log_signal: Callable[[float], float],
    log_noise_fn: Callable[[float], float],
    *,
    n_max: int = MAX_CROSSOVER_N,
) -> Crossover:
    """Smallest integer N >= 1 with log_signal(N) < log_noise(N).

    Assumes the gap log_signal - log_noise changes sign once. The integer is
    found by exponential search and bisection; the continuous root by brentq
    on the bracketing unit interval.
    """

    def gap(n: float) -> float:
        return log_signal(n) - log_noise_fn(n)

    if gap(1) < 0:
        return Crossover(1, None)
    low, high = 1, 2
    while gap(high) >= 0:
        low, high = high, high * 2
        if high > n_max:
            raise NumericalError(f"no crossover below N={n_max}")
    while high - low > 1:
        middle = (low + high) // 2
        if gap(middle) < 0:
            high = middle
        else:
            low = middle
    root = optimize.brentq(gap, float(low), float(high), xtol=1e-14, rtol=1e-14)
    logger.debug(f"crossover: first integer {high}, root {root!r}")
    return Crossover(high, float(root))


def threshold_N(inp: UndecidabilityInput) -> ThresholdEstimate:
    """Threshold environment size beyond which collapse is undecidable."""
    cfg = inp.chamber
    ln_kappa = log_kappa(cfg)
    ln_ratio = -inp.log_delta_theta
    derived = math.exp((math.log(2.0) + math.log(ln_ratio) - ln_kappa) / 4.0)

    product = cfg.gamma1 * cfg.gamma2
    ln_inner = (
        math.log(2.0)
        + math.log(ln_ratio)
        + (2.0 / 3.0) * (math.log(cfg.m_env) + 4.0 * math.log(product))
        + (8.0 / 3.0) * math.log(cfg.mu)
        - (4.0 / 3.0) * math.log(cfg.T_P)
        - (20.0 / 3.0) * math.log(cfg.hbar)
    )
    literal = math.exp(ln_inner / 4.0 + math.log(cfg.m_env) + 2.0 * math.log(product))

    kappa = math.exp(ln_kappa)
    solved = crossover(
        lambda n: -math.exp(ln_kappa + 5.0 * math.log(n)),
        lambda n: log_noise(inp.log_delta_theta, n, inp.log_error_term),
    )
    return ThresholdEstimate(derived, literal, kappa, solved)


def report(inp: UndecidabilityInput) -> UndecidabilityReport:
    """K, signal, Delta theta, noise floor, threshold and verdict for one chamber."""
    cfg = inp.chamber
    K = damping_exponent_K(cfg)
    signal = LogMagnitude(-K)
    noise = noise_floor(inp, cfg.N)
    try:
        threshold: Optional[ThresholdEstimate] = threshold_N(inp)
    except (DomainError, NumericalError) as exc:
        logger.info(f"Threshold not available: {exc}")
        threshold = None
    return UndecidabilityReport(
        K=K,
        signal=signal,
        delta_theta=angular_bound(inp),
        noise_floor=noise,
        N=cfg.N,
        threshold=threshold,
        undecidable=signal.ln < noise.ln,
    )


def verdict_ladder(
    inp: UndecidabilityInput, Ns: Sequence[int], *, k_model: str = "strong_bound"
) -> list[VerdictRow]:
    """Verdict for each N, with K from the strong bound (kappa N^5) or the explicit formula."""
    if k_model not in ("strong_bound", "explicit"):
        raise DomainError(f"unknown K model {k_model!r}")
    cfg = inp.chamber
    per_spin_K = damping_exponent_K(cfg) / cfg.N
    ln_kappa = log_kappa(cfg) if k_model == "strong_bound" else 0.0
    rows = []
    for n in Ns:
        K = math.exp(ln_kappa + 5.0 * math.log(n)) if k_model == "strong_bound" else per_spin_K * n
        ln_noise = noise_floor(inp, n).ln
        rows.append(VerdictRow(int(n), -K, ln_noise, -K < ln_noise))
    return rows


def planck_units() -> dict[str, float]:
    """SI Planck length and time with the constants used."""
    hbar, G, c = constants.hbar, constants.G, constants.c
    l_P = math.sqrt(hbar * G / c**3)
    return {"hbar": hbar, "G": G, "c": c, "mu_0": constants.mu_0, "l_P": l_P, "T_P": l_P / c}


def to_natural_units(cfg: ChamberConfig) -> ChamberConfig:
    """Convert an SI chamber to natural units (hbar = 1).

    Energies become frequencies: gamma -> gamma / hbar, mu -> mu hbar,
    m -> m / hbar. B, d, tau, T and f_k (already angular frequencies) keep
    their values.
    """
    hbar = cfg.hbar
    return replace(
        cfg,
        gamma1=cfg.gamma1 / hbar,
        gamma2=cfg.gamma2 / hbar,
        mu=cfg.mu * hbar,
        m_env=cfg.m_env / hbar,
        hbar=1.0,
    )
