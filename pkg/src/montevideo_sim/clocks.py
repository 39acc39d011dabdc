"""Real-clock models: the reading distribution P_t(T), its spread b(T) and rate sigma(T)."""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Dict, Union

import numpy as np
from scipy import integrate

from .errors import DomainError
from .hilbert import DensityMatrix, HermitianOperator, Projector, expectation, evolve_unitary

logger = logging.getLogger("montevideo_sim.clocks")

# Quadrature windows extend this many standard deviations around the reading.
WINDOW_SIGMAS = 8.0


class ClockKind(Enum):
    """Supported clock kinds."""

    IDEAL = "ideal"
    GAUSSIAN = "gaussian"
    NG_VAN_DAM = "ng_van_dam"


class DiracDelta:
    """Marker returned by ``density`` when P_t(T) is an exact delta at t = T."""

    _instance: ClassVar["DiracDelta | None"] = None

    def __new__(cls) -> "DiracDelta":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIRAC_DELTA"

    def __reduce__(self) -> str:
        return "DIRAC_DELTA"


DIRAC_DELTA = DiracDelta()


@dataclass(frozen=True)
class ClockSpread:
    """Second-moment coefficient b(T) and its derivative sigma(T) = db/dT."""

    b: float
    sigma: float

    def __post_init__(self) -> None:
        if self.b < 0:
            raise DomainError(f"clock spread b must be non-negative, got {self.b}")


class ClockModel(ABC):
    """Abstract base class for real clocks.

    A clock is described by the probability density P_t(T) of the unobservable
    parameter t given the reading T. Only the second moment enters the
    dynamics; the density is realized as a Gaussian of variance 2 b(T).
    """

    kind: ClassVar[ClockKind]

    @abstractmethod
    def spread(self, T: float) -> ClockSpread:
        """Return b(T) and sigma(T) at reading T.

        Raises:
            DomainError: If T lies outside the clock's domain
        """

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """Parameters of the clock, for report echo."""

    def std(self, T: float) -> float:
        """Standard deviation sqrt(2 b(T)) of the reading distribution."""
        return math.sqrt(2.0 * self.spread(T).b)

    def is_sharp(self, T: float) -> bool:
        """True when P_t(T) degenerates to a delta at reading T."""
        return self.spread(T).b == 0.0

    def density(self, t: float, T: float) -> Union[float, DiracDelta]:
        """Probability density of the parameter t given reading T.

        Returns DIRAC_DELTA when the distribution is an exact delta; callers
        integrate that case analytically.
        """
        b = self.spread(T).b
        if b == 0.0:
            return DIRAC_DELTA
        variance = 2.0 * b
        return math.exp(-((t - T) ** 2) / (2.0 * variance)) / math.sqrt(
            2.0 * math.pi * variance
        )

    def window(self, T: float, sigmas: float = WINDOW_SIGMAS) -> tuple[float, float]:
        """Integration window [T - k std, T + k std]."""
        width = sigmas * self.std(T)
        return T - width, T + width

    def normalization(self, T: float) -> float:
        """Numerical integral of the density over t (1 for a valid clock)."""
        if self.is_sharp(T):
            return 1.0
        low, high = self.window(T, sigmas=12.0)
        value, _ = integrate.quad(lambda t: float(self.density(t, T)), low, high, epsabs=1e-13)
        return value

    @staticmethod
    def from_kind(kind: Union[ClockKind, str], **params: float) -> "ClockModel":
        """Build a clock from its kind and keyword parameters."""
        kind = ClockKind(kind)
        if kind is ClockKind.IDEAL:
            return IdealClock()
        if kind is ClockKind.GAUSSIAN:
            return GaussianClock(width=params.get("width", 0.0))
        return NgVanDamClock(
            planck_time=params["planck_time"], prefactor=params.get("prefactor", 1.0)
        )


@dataclass(frozen=True)
class IdealClock(ClockModel):
    """A perfect classical clock: P_t(T) = delta(t - T)."""

    kind: ClassVar[ClockKind] = ClockKind.IDEAL

    def spread(self, T: float) -> ClockSpread:
        return ClockSpread(0.0, 0.0)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind.value}


@dataclass(frozen=True)
class GaussianClock(ClockModel):
    """Gaussian reading distribution of fixed width s (b = s^2 / 2)."""

    width: float
    kind: ClassVar[ClockKind] = ClockKind.GAUSSIAN

    def __post_init__(self) -> None:
        if not math.isfinite(self.width) or self.width < 0:
            raise DomainError(f"Gaussian clock width must be >= 0, got {self.width}")

    def spread(self, T: float) -> ClockSpread:
        return ClockSpread(0.5 * self.width**2, 0.0)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "width": self.width}


@dataclass(frozen=True)
class NgVanDamClock(ClockModel):
    """Best physical clock limited by quantum gravity.

    b(T) = c T_P^(4/3) T^(2/3), defined for T > 0.
    """

    planck_time: float
    prefactor: float = 1.0
    kind: ClassVar[ClockKind] = ClockKind.NG_VAN_DAM

    def __post_init__(self) -> None:
        if not self.planck_time > 0:
            raise DomainError(f"Planck time must be > 0, got {self.planck_time}")
        if not self.prefactor > 0:
            raise DomainError(f"clock prefactor must be > 0, got {self.prefactor}")

    @property
    def scale(self) -> float:
        """c T_P^(4/3)."""
        return self.prefactor * self.planck_time ** (4.0 / 3.0)

    def spread(self, T: float) -> ClockSpread:
        if not T > 0:
            raise DomainError(f"Ng-Van Dam clock is defined for T > 0, got T={T}")
        return ClockSpread(
            self.scale * T ** (2.0 / 3.0), (2.0 / 3.0) * self.scale * T ** (-1.0 / 3.0)
        )

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "planck_time": self.planck_time,
            "prefactor": self.prefactor,
        }


def clock_density_from_subsystem(
    H_clock: HermitianOperator,
    rho_clock: DensityMatrix,
    reading: Projector,
    t: Union[float, np.ndarray],
    half_window: float,
) -> Union[float, np.ndarray]:
    """P_t(T) computed from a quantum clock instead of a smooth model.

    The density is Tr(P_T rho(t)) normalized by its integral over
    [-half_window, half_window], where P_T projects on the clock readings of
    interest and rho(t) is the clock state evolved by H_clock.
    """
    from .evolving_constants import windowed_trace

    norm = windowed_trace(reading, H_clock, rho_clock, half_window)
    if norm <= 0:
        raise DomainError("the clock never shows the requested reading inside the window")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    values = np.array(
        [expectation(reading, evolve_unitary(H_clock, rho_clock, float(s))) for s in times]
    )
    logger.debug(f"Clock density sampled at {times.size} points, norm={norm:.6e}")
    result = values / norm
    return float(result[0]) if np.ndim(t) == 0 else result
