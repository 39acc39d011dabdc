"""Tests for experiment configuration loading and validation."""

import json

import numpy as np
import pytest

from montevideo_sim.clocks import GaussianClock, NgVanDamClock
from montevideo_sim.config import (
    ClockSpec,
    GridSpec,
    RuntimeSettings,
    load_config,
    set_dotted,
    to_complex,
    validate_config,
)
from montevideo_sim.errors import ConfigError
from montevideo_sim.experiments import schedule_sweep

pytestmark = pytest.mark.unit


def evolve_document(**evolve_overrides):
    evolve = {
        "hamiltonian": [[1.0, 0.0], [0.0, -1.0]],
        "psi0": [0.6, 0.8],
        "clock": {"kind": "gaussian", "width": 0.1},
    }
    evolve.update(evolve_overrides)
    return {"experiment": "evolve", "grid": {"values": [0.5, 1.0, 2.0]}, "evolve": evolve}


def chamber_document():
    return {
        "experiment": "chamber",
        "chamber": {
            "N": 3,
            "B": 2.0,
            "gamma1": 1.5,
            "gamma2": 0.5,
            "couplings": 0.05,
            "tau": 0.8,
            "T_total": 0.8,
            "m_env": 1.0,
            "d": 1.0,
            "mu": 1.0,
        },
    }


class TestValidation:
    """Schema validation of experiment documents."""

    def test_minimal_evolve_config(self):
        config = validate_config(evolve_document())
        assert config.experiment == "evolve"
        assert config.units == "natural"
        assert config.evolve.method == "compare"
        np.testing.assert_array_equal(config.grid.points(), [0.5, 1.0, 2.0])

    def test_unnormalized_state(self):
        with pytest.raises(ConfigError, match="normalization violated"):
            validate_config(evolve_document(psi0=[1.0, 1.0]))

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigError, match="evolve.colour"):
            validate_config(evolve_document(colour="blue"))

    def test_exactly_one_initial_state(self):
        with pytest.raises(ConfigError, match="exactly one of rho0 or psi0"):
            validate_config(evolve_document(rho0=[[1.0, 0.0], [0.0, 0.0]]))

    def test_non_hermitian_hamiltonian(self):
        with pytest.raises(ConfigError, match="hamiltonian: HermitianOperator is not Hermitian"):
            validate_config(evolve_document(hamiltonian=[[1.0, 2.0], [0.0, -1.0]]))

    @pytest.mark.parametrize(
        "rho0, message",
        [
            ([[0.7, 0.0], [0.0, 0.7]], "trace"),
            ([[0.5, 0.3], [0.1, 0.5]], "not Hermitian"),
            ([[1.2, 0.0], [0.0, -0.2]], "positive semidefinite"),
            ([[1.0, 0.0, 0.0]], "2x2"),
        ],
    )
    def test_invalid_rho0(self, rho0, message):
        document = evolve_document(rho0=rho0)
        del document["evolve"]["psi0"]
        with pytest.raises(ConfigError, match=message) as excinfo:
            validate_config(document)
        assert "evolve" in str(excinfo.value)

    def test_valid_rho0(self):
        document = evolve_document(rho0=[[0.5, [0.0, 0.5]], [[0.0, -0.5], 0.5]])
        del document["evolve"]["psi0"]
        assert validate_config(document).evolve.rho0 is not None

    def test_invalid_state_is_rejected_when_loading(self, tmp_path):
        document = evolve_document(rho0=[[0.7, 0.0], [0.0, 0.7]])
        del document["evolve"]["psi0"]
        path = tmp_path / "evolve.json"
        path.write_text(json.dumps(document))
        with pytest.raises(ConfigError) as excinfo:
            load_config(path)
        assert excinfo.value.exit_code == 2

    def test_complex_entries(self):
        config = validate_config(evolve_document(psi0=[[0.6, 0.0], [0.0, 0.8]]))
        assert to_complex(config.evolve.psi0[1]) == 0.8j

    def test_missing_section(self):
        with pytest.raises(ConfigError, match="needs a 'zurek' section"):
            validate_config({"experiment": "zurek", "grid": {"values": [1.0]}})

    def test_evolve_needs_grid(self):
        document = evolve_document()
        del document["grid"]
        with pytest.raises(ConfigError, match="needs a grid"):
            validate_config(document)

    def test_seed_required_for_random_amplitudes(self):
        with pytest.raises(ConfigError, match="seed is required"):
            validate_config(chamber_document())

    def test_seed_override(self):
        config = validate_config(chamber_document(), seed=17)
        assert config.seed == 17
        cfg = config.chamber.build(config.seed)
        assert cfg.seed == 17
        assert abs(cfg.a) ** 2 + abs(cfg.b) ** 2 == pytest.approx(1.0)

    def test_si_chamber_is_converted(self):
        document = chamber_document()
        document["units"] = "SI"
        config = validate_config(document, seed=1)
        cfg = config.chamber.build(config.seed, config.units)
        assert cfg.hbar == 1.0
        assert cfg.gamma1 > 1e30
        assert cfg.T_P == pytest.approx(5.391247e-44, rel=1e-4)

    def test_echo_uses_aliases(self):
        document = evolve_document()
        document["grid"] = {"from": 0.1, "to": 1.0, "count": 4}
        echo = validate_config(document).echo()
        assert echo["grid"]["from"] == 0.1
        assert "start" not in echo["grid"]
        json.dumps(echo)


class TestClockSpec:
    def test_build(self):
        assert ClockSpec(kind="gaussian", width=0.5).build() == GaussianClock(0.5)
        assert ClockSpec(planck_time=0.1).build() == NgVanDamClock(0.1)

    def test_ng_van_dam_needs_planck_time(self):
        with pytest.raises(ValueError, match="planck_time"):
            ClockSpec(kind="ng_van_dam")


class TestGridSpec:
    """Clock-reading grids."""

    def test_log_scale(self):
        grid = GridSpec.model_validate({"from": 1.0, "to": 100.0, "count": 3, "scale": "log"})
        np.testing.assert_allclose(grid.points(), [1.0, 10.0, 100.0])

    def test_values_and_range_are_exclusive(self):
        with pytest.raises(ValueError, match="not both"):
            GridSpec.model_validate({"values": [1.0], "from": 0.0, "to": 1.0, "count": 2})

    def test_strictly_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            GridSpec(values=[1.0, 1.0])

    def test_log_scale_needs_positive_endpoints(self):
        with pytest.raises(ValueError, match="positive endpoints"):
            GridSpec.model_validate({"from": 0.0, "to": 1.0, "count": 3, "scale": "log"})


class TestSweep:
    """Parameter sweeps over a base configuration."""

    def sweep_document(self, **sweep):
        document = {
            "experiment": "sweep",
            "seed": 5,
            "sweep": {"parameter": "chamber.N", "base": chamber_document()},
        }
        document["sweep"].update(sweep)
        return document

    def test_integer_sweep_schedules_every_point(self):
        config = validate_config(self.sweep_document(**{"from": 2, "to": 12, "count": 11}))
        scheduled = schedule_sweep(config)
        assert len(scheduled) == 11
        assert [c.chamber.N for c in scheduled] == list(range(2, 13))
        assert all(c.seed == 5 for c in scheduled)

    def test_invalid_point_names_the_value(self):
        config = validate_config(self.sweep_document(values=[0, 2]))
        with pytest.raises(ConfigError, match="chamber.N=0"):
            schedule_sweep(config)

    def test_base_must_be_another_experiment(self):
        with pytest.raises(ConfigError, match="non-sweep"):
            validate_config(self.sweep_document(values=[1], base={"experiment": "sweep"}))

    def test_set_dotted(self):
        data = {"chamber": {"N": 2}, "seed": 1}
        updated = set_dotted(data, "chamber.N", 7)
        assert updated["chamber"]["N"] == 7
        assert data["chamber"]["N"] == 2

    def test_set_dotted_unknown_path(self):
        with pytest.raises(ConfigError, match="does not name"):
            set_dotted({"chamber": {"N": 2}}, "bath.N", 3)


class TestLoadConfig:
    """Reading experiment files from disk."""

    def test_round_trip(self, tmp_path):
        path = tmp_path / "evolve.json"
        path.write_text(json.dumps(evolve_document()))
        assert load_config(path).experiment == "evolve"

    def test_syntax_error_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "experiment": "evolve",\n  oops\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            load_config(path)
        assert excinfo.value.line == 3
        assert excinfo.value.column == 3
        assert "line 3, column 3" in str(excinfo.value)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")


class TestRuntimeSettings:
    """Environment-driven runtime settings."""

    def test_defaults(self, monkeypatch):
        for suffix in ("OUT_DIR", "WORKERS", "LOG_LEVEL"):
            monkeypatch.delenv(f"MONTEVIDEO_SIM_{suffix}", raising=False)
        settings = RuntimeSettings.from_env()
        assert settings.workers == 1
        assert settings.log_level == "INFO"

    def test_from_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv("MONTEVIDEO_SIM_OUT_DIR", str(tmp_path))
        monkeypatch.setenv("MONTEVIDEO_SIM_WORKERS", "3")
        monkeypatch.setenv("MONTEVIDEO_SIM_LOG_LEVEL", "debug")
        settings = RuntimeSettings.from_env()
        assert settings.out_dir == tmp_path
        assert settings.workers == 3
        assert settings.log_level == "DEBUG"

    def test_invalid_workers(self, monkeypatch):
        monkeypatch.setenv("MONTEVIDEO_SIM_WORKERS", "many")
        with pytest.raises(ConfigError, match="integer"):
            RuntimeSettings.from_env()
        with pytest.raises(ConfigError):
            RuntimeSettings(workers=0)
