"""
Experiment registry and runners for montevideo-sim.

Each experiment maps a validated configuration to an ExperimentOutput. Runs
are deterministic for a fixed configuration; the only varying data (wall
clock) goes into the report's metadata block.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .chamber import (
    corrected_terms,
    damping_exponent,
    dipolar_coupling,
    expectation_M_collapsed,
    expectation_M_corrected,
    expectation_M_oracle,
    expectation_M_unitary,
    feasibility,
    omega_k,
)
from .config import ExperimentConfig, set_dotted, to_complex, to_complex_matrix, validate_config
from .errors import ConfigError, MontevideoError, UsageError
from .evolution import (
    evolve_closed_form,
    evolve_effective,
    integrate_master,
    max_deviation,
    purity_series,
)
from .evolving_constants import (
    ConditionalQuery,
    FreeParticle,
    PeriodicGrid,
    TwoParticleModel,
    born_distribution,
    conditional_distribution,
    conditional_probability,
    gaussian_packet,
    total_variation,
)
from .hilbert import DensityMatrix, HermitianOperator, StateVector
from .plotting import emit_svg
from .undecidability import UndecidabilityInput, planck_units, report, verdict_ladder
from .utility import (
    ExperimentOutput,
    build_report,
    format_csv,
    format_json,
    format_number,
    rows_from_columns,
    write_text,
)
from .zurek import (
    clock_corrected_coherence,
    coherence_trace,
    max_revival_step,
    revival_search,
    revival_statistics,
)

logger = logging.getLogger("montevideo_sim.experiments")

MAX_ELEMENT_COLUMNS_DIM = 4
MAX_REPORTED_ORACLE_SPINS = 8


@dataclass(frozen=True)
class RunContext:
    workers: int = 1


Runner = Callable[[ExperimentConfig, RunContext], ExperimentOutput]


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    runner: Runner


class ExperimentRegistry:
    """Named experiments, registered with the ``experiment`` decorator."""

    def __init__(self) -> None:
        self._experiments: Dict[str, Experiment] = {}

    def experiment(self, name: str, description: str) -> Callable[[Runner], Runner]:
        def decorator(runner: Runner) -> Runner:
            if name in self._experiments:
                raise UsageError(f"experiment {name!r} registered twice")
            self._experiments[name] = Experiment(name, description, runner)
            return runner

        return decorator

    def names(self) -> List[str]:
        return list(self._experiments)

    def get(self, name: str) -> Experiment:
        try:
            return self._experiments[name]
        except KeyError:
            raise UsageError(f"unknown experiment {name!r}") from None

    def run(
        self, config: ExperimentConfig, context: Optional[RunContext] = None
    ) -> ExperimentOutput:
        experiment = self.get(config.experiment)
        logger.debug(f"Running experiment {experiment.name}")
        try:
            return experiment.runner(config, context or RunContext())
        except MontevideoError as exc:
            if exc.context is None:
                exc.context = experiment.name
            raise


def _density_from_spec(spec: Any) -> DensityMatrix:
    if spec.psi0 is not None:
        return DensityMatrix.from_state(StateVector(np.array([to_complex(v) for v in spec.psi0])))
    return DensityMatrix(to_complex_matrix(spec.rho0))


def _element_columns(states: tuple, dim: int) -> Dict[str, List[float]]:
    columns: Dict[str, List[float]] = {}
    if dim > MAX_ELEMENT_COLUMNS_DIM:
        return columns
    for n in range(dim):
        for m in range(n, dim):
            values = [rho.entries[n, m] for rho in states]
            columns[f"rho_{n}{m}_re"] = [float(v.real) for v in values]
            if m != n:
                columns[f"rho_{n}{m}_im"] = [float(v.imag) for v in values]
    return columns


def _l1_coherence(states: tuple) -> List[float]:
    return [
        float(np.sum(np.abs(rho.entries)) - np.sum(np.abs(np.diag(rho.entries))))
        for rho in states
    ]


def _flat_scalars(summary: Dict[str, Any], prefix: str = "") -> Dict[str, float]:
    flat: Dict[str, float] = {}
    for key in sorted(summary):
        value = summary[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flat_scalars(value, f"{name}."))
        elif isinstance(value, bool):
            flat[name] = float(value)
        elif isinstance(value, (int, float, np.integer, np.floating)):
            flat[name] = float(value)
    return flat


def schedule_sweep(config: ExperimentConfig) -> List[ExperimentConfig]:
    """The validated configurations of a sweep, in sweep order."""
    spec = config.sweep
    if spec is None:
        raise UsageError("schedule_sweep needs a sweep configuration")
    base = dict(spec.base)
    if config.seed is not None and "seed" not in base:
        base["seed"] = config.seed
    base.setdefault("units", config.units)
    scheduled = []
    for value in spec.values_to_run():
        point = set_dotted(base, spec.parameter, value)
        try:
            scheduled.append(validate_config(point))
        except ConfigError as exc:
            raise ConfigError(f"sweep point {spec.parameter}={value!r}: {exc.message}") from exc
    logger.info(f"Scheduled {len(scheduled)} runs over {spec.parameter}")
    return scheduled


def _run_sweep_point(payload: Dict[str, Any]) -> Dict[str, float]:
    config = validate_config(payload)
    return _flat_scalars(default_registry().run(config).summary)


def register_experiments(registry: ExperimentRegistry) -> None:
    """Register the built-in experiments."""

    @registry.experiment(
        name="evolve",
        description="Real-clock evolution of a density matrix over a grid of clock readings",
    )
    def evolve(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        spec = config.evolve
        H = HermitianOperator(to_complex_matrix(spec.hamiltonian))
        rho0 = _density_from_spec(spec)
        clock = spec.clock.build()
        grid = config.grid.points()

        if spec.method in ("master", "compare"):
            primary = integrate_master(H, rho0, clock, grid, origin=spec.origin)
        elif spec.method == "closed_form":
            primary = evolve_closed_form(H, rho0, clock, grid)
        else:
            primary = evolve_effective(H, rho0, clock, grid)

        columns: Dict[str, List[Any]] = {"T": [float(T) for T in primary.times]}
        columns.update(_element_columns(primary.states, H.dim))
        columns["purity"] = [float(p) for p in purity_series(primary)]
        columns["l1_coherence"] = _l1_coherence(primary.states)
        summary: Dict[str, Any] = {
            "method": spec.method,
            "dim": H.dim,
            "clock": clock.describe(),
            "final_purity": columns["purity"][-1],
        }
        if spec.method == "compare":
            reference = evolve_closed_form(H, rho0, clock, grid)
            deviation = max_deviation(primary, reference)
            columns["max_deviation"] = [float(d) for d in deviation]
            summary["max_deviation"] = float(np.max(deviation))

        plot = {"purity": "purity", "l1 coherence": "l1_coherence"}
        return ExperimentOutput(
            columns=list(columns),
            rows=rows_from_columns(*columns.values()),
            summary=summary,
            plot=plot,
            x_label="clock reading T",
            log_x=bool(grid[0] > 0 and grid[-1] / grid[0] > 100),
        )

    @registry.experiment(
        name="zurek",
        description="Coherence factor of the spin-bath model, revivals and clock correction",
    )
    def zurek(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        spec = config.zurek
        cfg = spec.bath.build(config.seed)
        times = config.grid.points()
        trace = coherence_trace(cfg, times)
        z = trace.z_values
        columns: Dict[str, List[Any]] = {
            "t": [float(t) for t in times],
            "z_re": [float(v.real) for v in z],
            "z_im": [float(v.imag) for v in z],
            "z_abs": [float(v) for v in trace.magnitudes],
        }
        plot = {"|z(t)|": "z_abs"}
        summary: Dict[str, Any] = {"N": cfg.N, "seed": config.seed}
        if spec.clock is not None:
            clock = spec.clock.build()
            columns["z_eff_abs"] = [
                abs(clock_corrected_coherence(cfg, clock, float(t))) if t > 0 else abs(complex(v))
                for t, v in zip(times, z)
            ]
            plot["|z_eff(T)|"] = "z_eff_abs"
            summary["clock"] = clock.describe()

        t_max = float(times[-1])
        if t_max > 0:
            resolution = spec.resolution or max_revival_step(cfg)
            revivals = revival_search(cfg, t_max, min(resolution, t_max), spec.revival_threshold)
            stats = revival_statistics(revivals)
            summary["revivals"] = {
                "count": stats.count,
                "mean_spacing": stats.mean_spacing,
                "highest_time": stats.highest.time if stats.highest else None,
                "highest_magnitude": stats.highest.magnitude if stats.highest else None,
                "times": [r.time for r in revivals],
                "threshold": spec.revival_threshold,
            }
        return ExperimentOutput(
            columns=list(columns),
            rows=rows_from_columns(*columns.values()),
            summary=summary,
            plot=plot,
            x_label="t",
        )

    @registry.experiment(
        name="chamber",
        description="d'Espagnat observable in the spin chamber with and without clock damping",
    )
    def chamber(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        spec = config.chamber
        cfg = spec.build(config.seed, config.units)
        ks = list(range(cfg.N))
        brackets = cfg.bracket_factors()
        columns: Dict[str, List[Any]] = {
            "k": [k + 1 for k in ks],
            "f_k": [float(cfg.couplings[k]) for k in ks],
            "omega_k": [omega_k(cfg, k) for k in ks],
            "bracket": [float(v) for v in brackets],
        }
        terms = corrected_terms(cfg)
        report_ = feasibility(cfg, spec.ratio_threshold, spec.aperture)
        summary: Dict[str, Any] = {
            "N": cfg.N,
            "omega": cfg.omega,
            "theta": cfg.theta,
            "K": damping_exponent(cfg),
            "dipolar_coupling": dipolar_coupling(cfg),
            "expectation_M_unitary": expectation_M_unitary(cfg),
            "expectation_M_corrected": expectation_M_corrected(cfg),
            "log_first_term": terms.log_first,
            "log_second_term": terms.log_second,
            "feasibility": {
                c.name: {
                    "satisfied": c.satisfied,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "margin": c.margin,
                }
                for c in report_.conditions
            },
        }
        if cfg.N <= MAX_REPORTED_ORACLE_SPINS:
            summary["expectation_M_oracle"] = expectation_M_oracle(cfg)
            summary["expectation_M_collapsed"] = expectation_M_collapsed(cfg)
        if config.units == "SI":
            summary["constants"] = planck_units()
        return ExperimentOutput(
            columns=list(columns),
            rows=rows_from_columns(*columns.values()),
            summary=summary,
            plot={"omega_k": "omega_k", "bracket": "bracket"},
            x_label="k",
        )

    @registry.experiment(
        name="undecide",
        description="Signal e^-K against the angular noise floor and the threshold size",
    )
    def undecide(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        spec = config.undecide
        cfg = spec.chamber.build(config.seed, config.units)
        l_P = spec.l_P
        if l_P is None:
            if config.units != "SI":
                raise ConfigError("undecide.l_P is required in natural units")
            l_P = planck_units()["l_P"]
        inp = UndecidabilityInput(
            cfg,
            l_P,
            spec.R,
            spec.log_error_term if spec.log_error_term is not None else -math.inf,
        )
        result = report(inp)
        ladder = spec.ladder or list(range(1, cfg.N + 1))
        rows = verdict_ladder(inp, ladder, k_model="explicit")
        columns: Dict[str, List[Any]] = {
            "N": [row.N for row in rows],
            "log10_signal": [row.log_signal / math.log(10.0) for row in rows],
            "log10_noise": [row.log_noise / math.log(10.0) for row in rows],
            "undecidable": [row.undecidable for row in rows],
        }
        threshold = None
        if result.threshold is not None:
            t = result.threshold
            threshold = {
                "derived": t.derived,
                "literal": t.literal,
                "kappa": t.kappa,
                "crossover_first_integer": t.crossover.first_integer,
                "crossover_root": t.crossover.root,
                "estimate": t.estimate,
            }
        summary: Dict[str, Any] = {
            "N": result.N,
            "K": result.K,
            "log10_signal": result.signal.log10,
            "delta_theta": result.delta_theta,
            "log10_noise_floor": result.noise_floor.log10,
            "undecidable": result.undecidable,
            "threshold": threshold,
        }
        if config.units == "SI":
            summary["constants"] = planck_units()
        return ExperimentOutput(
            columns=list(columns),
            rows=rows_from_columns(*columns.values()),
            summary=summary,
            plot={"log10 signal": "log10_signal", "log10 noise": "log10_noise"},
            x_label="N",
        )

    @registry.experiment(
        name="conditional",
        description="Conditional position distribution of a particle read by a quantum clock",
    )
    def conditional(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        spec = config.conditional
        grid = PeriodicGrid(spec.grid_points, spec.length)
        system = FreeParticle(grid, spec.system_mass)
        psi_s = gaussian_packet(grid, spec.system_center, spec.system_width, spec.system_momentum)
        psi_c = gaussian_packet(grid, spec.clock_center, spec.clock_width)
        query = ConditionalQuery(**spec.query.model_dump())

        born = born_distribution(TwoParticleModel(system, system), psi_s, spec.born_time)
        columns: Dict[str, List[Any]] = {
            "x": [float(x) for x in grid.positions],
            "born": [float(p) for p in born],
        }
        plot = {"Born": "born"}
        distances: Dict[str, float] = {}
        probabilities: Dict[str, float] = {}
        for mass in spec.clock_masses:
            model = TwoParticleModel(system, FreeParticle(grid, mass, drift=spec.clock_velocity))
            rho = model.product_state(psi_s, psi_c)
            distribution = conditional_distribution(model, query, rho)
            label = format_number(float(mass))
            columns[f"conditional_{label}"] = [float(p) for p in distribution]
            plot[f"clock mass {label}"] = f"conditional_{label}"
            distances[label] = total_variation(distribution, born)
            probabilities[label] = conditional_probability(model, query, rho)
        summary = {
            "total_variation": distances,
            "probability_O": probabilities,
            "O_interval": list(query.O_interval),
            "T_interval": list(query.T_interval),
        }
        return ExperimentOutput(
            columns=list(columns),
            rows=rows_from_columns(*columns.values()),
            summary=summary,
            plot=plot,
            x_label="x",
        )

    @registry.experiment(
        name="sweep",
        description="Run another experiment over a grid of one parameter",
    )
    def sweep(config: ExperimentConfig, context: RunContext) -> ExperimentOutput:
        scheduled = schedule_sweep(config)
        payloads = [c.model_dump(mode="json", by_alias=True, exclude_none=True) for c in scheduled]
        if context.workers > 1:
            with ProcessPoolExecutor(max_workers=context.workers) as executor:
                results = list(executor.map(_run_sweep_point, payloads))
        else:
            results = [_run_sweep_point(p) for p in payloads]

        keys: List[str] = []
        for result in results:
            keys.extend(key for key in result if key not in keys)
        parameter = config.sweep.parameter
        values = config.sweep.values_to_run()
        rows = [
            [value] + [result.get(key) for key in keys]
            for value, result in zip(values, results)
        ]
        plot = {keys[0]: keys[0]} if keys else {}
        return ExperimentOutput(
            columns=[parameter] + keys,
            rows=rows,
            summary={
                "runs": len(results),
                "parameter": parameter,
                "experiment": scheduled[0].experiment,
            },
            plot=plot,
            x_label=parameter,
            log_x=config.sweep.scale == "log",
        )


_DEFAULT_REGISTRY: Optional[ExperimentRegistry] = None


def default_registry() -> ExperimentRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        registry = ExperimentRegistry()
        register_experiments(registry)
        _DEFAULT_REGISTRY = registry
    return _DEFAULT_REGISTRY


@dataclass
class RunArtifacts:
    output: ExperimentOutput
    report: Dict[str, Any]
    paths: Dict[str, Path] = field(default_factory=dict)


def run(
    config: ExperimentConfig,
    *,
    out_dir: Path = Path("."),
    svg: bool = False,
    workers: int = 1,
    registry: Optional[ExperimentRegistry] = None,
) -> RunArtifacts:
    """Run an experiment and write its CSV, JSON and (optionally) SVG artifacts."""
    registry = registry or default_registry()
    started = datetime.now(timezone.utc)
    clock_start = time.perf_counter()
    output = registry.run(config, RunContext(workers=workers))
    elapsed = time.perf_counter() - clock_start

    metadata = {
        "started_at": started.isoformat(),
        "wall_clock_seconds": elapsed,
        "workers": workers,
    }
    report_ = build_report(config.experiment, config.echo(), output, metadata=metadata)
    csv_metadata = {
        "experiment": config.experiment,
        "schema": report_["schema"],
        "seed": config.seed,
        "version": __version__,
    }

    out_dir = Path(out_dir)
    paths = {
        "csv": write_text(
            out_dir / (config.output.csv_path or f"{config.experiment}.csv"),
            format_csv(output, csv_metadata),
        ),
        "json": write_text(
            out_dir / (config.output.json_path or f"{config.experiment}.json"),
            format_json(report_),
        ),
    }
    if svg or config.output.svg_path:
        if not output.plot:
            raise UsageError(f"experiment {config.experiment!r} produced nothing to plot")
        document = emit_svg(
            output.column(output.columns[0]),
            {label: output.column(name) for label, name in output.plot.items()},
            x_label=output.x_label or output.columns[0],
            y_label=output.y_label,
            title=config.experiment,
            log_x=output.log_x,
        )
        paths["svg"] = write_text(
            out_dir / (config.output.svg_path or f"{config.experiment}.svg"), document
        )
    logger.info(f"Experiment {config.experiment} finished in {elapsed:.3f} s")
    return RunArtifacts(output, report_, paths)
