"""
Configuration for montevideo-sim runs.

Experiment files are JSON documents validated by pydantic models that reject
unknown keys. Runtime settings (output directory, worker count, log level)
come from the environment and can be overridden on the command line.
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .chamber import ChamberConfig
from .clocks import ClockModel, GaussianClock, IdealClock, NgVanDamClock
from .errors import ConfigError, StructuralError
from .hilbert import DensityMatrix, HermitianOperator
from .undecidability import planck_units, to_natural_units
from .zurek import NORMALIZATION_TOL, CouplingProfile, SpinBathConfig, coupling_profile

logger = logging.getLogger(__name__)

ComplexValue = Union[float, Tuple[float, float]]


def to_complex(value: ComplexValue) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


def to_complex_matrix(rows: List[List[ComplexValue]]) -> np.ndarray:
    return np.array([[to_complex(v) for v in row] for row in rows], dtype=np.complex128)


def _check_normalized(weight: float, label: str) -> None:
    if abs(weight - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"normalization violated: {label} = {weight!r}, expected 1")


def _checked(name: str, kind: type, rows: List[List[ComplexValue]]) -> None:
    """Construct ``kind`` from ``rows`` so load-time checks match run time."""
    try:
        kind(to_complex_matrix(rows))
    except StructuralError as exc:
        raise ValueError(f"{name}: {exc.message}") from exc


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


class ClockSpec(StrictModel):
    kind: Annotated[
        Literal["ideal", "gaussian", "ng_van_dam"], Field(description="Clock model")
    ] = "ng_van_dam"
    width: Annotated[float, Field(ge=0, description="Gaussian width s")] = 0.0
    planck_time: Annotated[Optional[float], Field(gt=0, description="Planck time T_P")] = None
    prefactor: Annotated[float, Field(gt=0, description="Constant c in b(T)")] = 1.0

    @model_validator(mode="after")
    def planck_time_for_ng_van_dam(self) -> "ClockSpec":
        if self.kind == "ng_van_dam" and self.planck_time is None:
            raise ValueError("ng_van_dam clock requires planck_time")
        return self

    def build(self) -> ClockModel:
        if self.kind == "ideal":
            return IdealClock()
        if self.kind == "gaussian":
            return GaussianClock(self.width)
        return NgVanDamClock(float(self.planck_time), self.prefactor)


class GridSpec(StrictModel):
    """Explicit values, or ``from``/``to``/``count`` with linear or log spacing."""

    values: Optional[List[float]] = None
    start: Annotated[Optional[float], Field(alias="from")] = None
    stop: Annotated[Optional[float], Field(alias="to")] = None
    count: Annotated[Optional[int], Field(ge=2)] = None
    scale: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def well_formed(self) -> "GridSpec":
        ranged = (self.start, self.stop, self.count)
        if self.values is not None:
            if any(v is not None for v in ranged):
                raise ValueError("give either values or from/to/count, not both")
            if len(self.values) < 1:
                raise ValueError("grid values must not be empty")
        elif any(v is None for v in ranged):
            raise ValueError("grid needs values or all of from, to and count")
        elif self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("log scale requires positive endpoints")
        points = self.points()
        if np.any(np.diff(points) <= 0):
            raise ValueError("grid must be strictly increasing")
        return self

    def points(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


class EvolveSpec(StrictModel):
    hamiltonian: Annotated[List[List[ComplexValue]], Field(description="Hermitian matrix")]
    rho0: Optional[List[List[ComplexValue]]] = None
    psi0: Optional[List[ComplexValue]] = None
    clock: ClockSpec
    method: Literal["master", "closed_form", "quadrature", "compare"] = "compare"
    origin: float = 0.0

    @model_validator(mode="after")
    def one_initial_state(self) -> "EvolveSpec":
        if (self.rho0 is None) == (self.psi0 is None):
            raise ValueError("provide exactly one of rho0 or psi0")
        dim = len(self.hamiltonian)
        if any(len(row) != dim for row in self.hamiltonian):
            raise ValueError("hamiltonian must be square")
        _checked("hamiltonian", HermitianOperator, self.hamiltonian)
        if self.psi0 is not None:
            if len(self.psi0) != dim:
                raise ValueError("psi0 dimension does not match the hamiltonian")
            weight = float(np.sum(np.abs([to_complex(v) for v in self.psi0]) ** 2))
            _check_normalized(weight, "|psi0|^2")
        else:
            if len(self.rho0) != dim or any(len(row) != dim for row in self.rho0):
                raise ValueError(f"rho0 must be {dim}x{dim} to match the hamiltonian")
            _checked("rho0", DensityMatrix, self.rho0)
        return self


class AmplitudeSpec(StrictModel):
    """Optional explicit amplitudes; all four are given or none."""

    N: Annotated[int, Field(ge=1)]
    a: Optional[ComplexValue] = None
    b: Optional[ComplexValue] = None
    alpha: Optional[List[ComplexValue]] = None
    beta: Optional[List[ComplexValue]] = None

    @model_validator(mode="after")
    def amplitudes_consistent(self) -> "AmplitudeSpec":
        couplings = getattr(self, "couplings", None)
        if isinstance(couplings, list) and len(couplings) != self.N:
            raise ValueError(f"couplings has {len(couplings)} entries, expected N={self.N}")
        given = [v is not None for v in (self.a, self.b, self.alpha, self.beta)]
        if any(given) and not all(given):
            raise ValueError("give all of a, b, alpha, beta or none of them")
        if all(given):
            weight = abs(to_complex(self.a)) ** 2 + abs(to_complex(self.b)) ** 2
            _check_normalized(weight, "|a|^2 + |b|^2")
            if len(self.alpha) != self.N or len(self.beta) != self.N:
                raise ValueError("alpha and beta need N entries")
            for k, (al, be) in enumerate(zip(self.alpha, self.beta)):
                _check_normalized(
                    abs(to_complex(al)) ** 2 + abs(to_complex(be)) ** 2,
                    f"|alpha_{k}|^2 + |beta_{k}|^2",
                )
        return self


class BathSpec(AmplitudeSpec):
    couplings: Union[Literal["constant", "linear", "uniform"], List[float]] = "uniform"
    g0: float = 1.0
    g_min: float = 0.5
    g_max: float = 1.5

    @property
    def stochastic(self) -> bool:
        return self.a is None or self.couplings == "uniform"

    def build(self, seed: Optional[int]) -> SpinBathConfig:
        if self.a is None:
            random_cfg = SpinBathConfig.random(
                self.N,
                seed,
                couplings=self.couplings if isinstance(self.couplings, str) else "constant",
                g0=self.g0,
                g_min=self.g_min,
                g_max=self.g_max,
            )
            if isinstance(self.couplings, str):
                return random_cfg
            return SpinBathConfig(
                np.asarray(self.couplings), random_cfg.a, random_cfg.b,
                random_cfg.alpha, random_cfg.beta, seed=seed,
            )
        if isinstance(self.couplings, list):
            g = np.asarray(self.couplings, dtype=float)
        else:
            rng = np.random.default_rng(seed) if seed is not None else None
            g = coupling_profile(
                self.N, CouplingProfile(self.couplings), g0=self.g0,
                g_min=self.g_min, g_max=self.g_max, rng=rng,
            )
        return SpinBathConfig(
            g,
            to_complex(self.a),
            to_complex(self.b),
            np.array([to_complex(v) for v in self.alpha]),
            np.array([to_complex(v) for v in self.beta]),
            seed=seed,
        )


class ZurekSpec(StrictModel):
    bath: BathSpec
    clock: Optional[ClockSpec] = None
    revival_threshold: Annotated[float, Field(gt=0, le=1)] = 0.9
    resolution: Annotated[Optional[float], Field(gt=0)] = None


class ChamberSpec(AmplitudeSpec):
    B: float
    gamma1: float
    gamma2: float
    couplings: Union[float, List[float]] = 0.0
    tau: Annotated[float, Field(gt=0)]
    T_total: Annotated[float, Field(gt=0)]
    m_env: Annotated[float, Field(gt=0)]
    d: Annotated[float, Field(gt=0)]
    mu: Annotated[float, Field(gt=0)]
    T_P: Annotated[Optional[float], Field(ge=0)] = None
    hbar: Annotated[Optional[float], Field(gt=0)] = None
    ratio_threshold: Annotated[float, Field(gt=0)] = 0.1
    aperture: Annotated[Optional[float], Field(gt=0)] = None

    @property
    def stochastic(self) -> bool:
        return self.a is None

    def build(self, seed: Optional[int], units: str = "natural") -> ChamberConfig:
        si = planck_units() if units == "SI" else None
        T_P = self.T_P
        if T_P is None:
            T_P = si["T_P"] if si else 0.0
        hbar = self.hbar
        if hbar is None:
            hbar = si["hbar"] if si else 1.0
        couplings = np.broadcast_to(np.asarray(self.couplings, dtype=float), (self.N,))
        if self.a is None:
            # replaced by seeded amplitudes below
            s = 1.0 / math.sqrt(2.0)
            a, b, alpha, beta = s, s, np.full(self.N, s), np.full(self.N, s)
        else:
            a, b = to_complex(self.a), to_complex(self.b)
            alpha = [to_complex(v) for v in self.alpha]
            beta = [to_complex(v) for v in self.beta]
        cfg = ChamberConfig(
            N=self.N,
            B=self.B,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            couplings=couplings,
            tau=self.tau,
            T_total=self.T_total,
            m_env=self.m_env,
            d=self.d,
            mu=self.mu,
            a=a,
            b=b,
            alpha=alpha,
            beta=beta,
            T_P=T_P,
            hbar=hbar,
            seed=seed,
        )
        if self.a is None:
            cfg = cfg.with_amplitudes(seed)
        return to_natural_units(cfg) if units == "SI" else cfg


class UndecideSpec(StrictModel):
    chamber: ChamberSpec
    l_P: Annotated[Optional[float], Field(gt=0)] = None
    R: Annotated[float, Field(gt=0)]
    log_error_term: Optional[float] = None
    ladder: Optional[List[Annotated[int, Field(ge=1)]]] = None


class QuerySpec(StrictModel):
    O_center: float = 0.0
    O_halfwidth: Annotated[float, Field(gt=0)] = 2.0
    T_center: float = 0.0
    T_halfwidth: Annotated[float, Field(gt=0)] = 0.5
    t_window: Annotated[float, Field(gt=0)] = 10.0


class ConditionalSpec(StrictModel):
    grid_points: Annotated[int, Field(ge=2)] = 16
    length: Annotated[float, Field(gt=0)] = 16.0
    system_mass: Annotated[float, Field(gt=0)] = 4.0
    system_width: Annotated[float, Field(gt=0)] = 1.5
    system_center: float = 0.0
    system_momentum: float = 0.0
    clock_masses: Annotated[List[Annotated[float, Field(gt=0)]], Field(min_length=1)] = [30.0]
    clock_width: Annotated[float, Field(gt=0)] = 0.85
    clock_center: float = 0.0
    clock_velocity: float = 0.52
    query: QuerySpec = QuerySpec()
    born_time: float = 0.0


class OutputSpec(StrictModel):
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    svg_path: Optional[str] = None


class SweepSpec(GridSpec):
    """A grid of values for one dotted parameter of a base configuration."""

    parameter: Annotated[str, Field(description="Dotted path into the base config")]
    base: Dict[str, Any]

    @model_validator(mode="after")
    def base_is_runnable(self) -> "SweepSpec":
        if self.base.get("experiment") in (None, "sweep"):
            raise ValueError("sweep base must name a non-sweep experiment")
        return self

    def values_to_run(self) -> List[Union[int, float]]:
        """Grid points, with integral values as ints (for fields such as N)."""
        return [int(v) if float(v).is_integer() else float(v) for v in self.points()]


class ExperimentConfig(StrictModel):
    experiment: Literal["evolve", "zurek", "chamber", "undecide", "conditional", "sweep"]
    units: Literal["natural", "SI"] = "natural"
    seed: Optional[int] = None
    grid: Optional[GridSpec] = None
    output: OutputSpec = OutputSpec()
    evolve: Optional[EvolveSpec] = None
    zurek: Optional[ZurekSpec] = None
    chamber: Optional[ChamberSpec] = None
    undecide: Optional[UndecideSpec] = None
    conditional: Optional[ConditionalSpec] = None
    sweep: Optional[SweepSpec] = None

    @model_validator(mode="after")
    def section_present(self) -> "ExperimentConfig":
        if getattr(self, self.experiment) is None:
            raise ValueError(f"experiment {self.experiment!r} needs a {self.experiment!r} section")
        if self.experiment in ("evolve", "zurek") and self.grid is None:
            raise ValueError(f"experiment {self.experiment!r} needs a grid")
        if self.stochastic and self.seed is None:
            raise ValueError("seed is required when amplitudes or couplings are generated randomly")
        return self

    @property
    def stochastic(self) -> bool:
        if self.experiment == "zurek":
            return self.zurek.bath.stochastic
        if self.experiment == "chamber":
            return self.chamber.stochastic
        if self.experiment == "undecide":
            return self.undecide.chamber.stochastic
        return False

    def echo(self) -> Dict[str, Any]:
        """JSON-compatible dump used in reports."""
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error["loc"]) or "<root>"
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def validate_config(data: Dict[str, Any], *, seed: Optional[int] = None) -> ExperimentConfig:
    """Validate a parsed document; ``seed`` overrides the document's seed."""
    if seed is not None and isinstance(data, dict):
        data = {**data, "seed": seed}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_validation_error(exc)}") from exc


def load_config(path: Union[str, Path], *, seed: Optional[int] = None) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises:
        ConfigError: On unreadable files, JSON syntax errors (with line and
            column) and validation errors naming the violated invariant
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"JSON syntax error in {path}: {exc.msg}", line=exc.lineno, column=exc.colno
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    config = validate_config(data, seed=seed)
    logger.info(f"Loaded {config.experiment} configuration from {path}")
    return config


def set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> Dict[str, Any]:
    """Copy of ``data`` with the value at a dotted path replaced."""
    keys = dotted.split(".")
    result = json.loads(json.dumps(data))
    node = result
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError(f"sweep parameter {dotted!r} does not name a config field")
        node = node[key]
    node[keys[-1]] = value
    return result


@dataclass
class RuntimeSettings:
    """Process-level settings taken from the environment."""

    out_dir: Path = Path(".")
    workers: int = 1
    log_level: str = "INFO"

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"unknown log level {self.log_level!r}")
        self.log_level = self.log_level.upper()
        self.out_dir = Path(self.out_dir)

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Create settings from MONTEVIDEO_SIM_* environment variables."""
        workers = os.environ.get("MONTEVIDEO_SIM_WORKERS", "1")
        try:
            worker_count = int(workers)
        except ValueError as exc:
            raise ConfigError(
                f"MONTEVIDEO_SIM_WORKERS must be an integer, got {workers!r}"
            ) from exc
        return cls(
            out_dir=Path(os.environ.get("MONTEVIDEO_SIM_OUT_DIR", ".")),
            workers=worker_count,
            log_level=os.environ.get("MONTEVIDEO_SIM_LOG_LEVEL", "INFO"),
        )
