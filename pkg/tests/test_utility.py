"""Tests for the artifact formatters."""

import json
import math

import numpy as np
import pytest

from montevideo_sim import __version__
from montevideo_sim.errors import UsageError
from montevideo_sim.utility import (
    REPORT_SCHEMA,
    ExperimentOutput,
    build_report,
    deterministic_payload,
    format_csv,
    format_json,
    format_number,
    rows_from_columns,
    sanitize,
    write_text,
)

pytestmark = pytest.mark.unit


class TestFormatNumber:
    def test_floats_round_trip(self):
        for value in (0.1, 1e-62, -2.5e300, 1 / 3):
            assert float(format_number(value)) == value

    def test_special_values(self):
        assert format_number(math.nan) == "nan"
        assert format_number(-math.inf) == "-inf"
        assert format_number(True) == "true"
        assert format_number(None) == ""
        assert format_number(np.int64(7)) == "7"


class TestCsv:
    """CSV series with metadata comments."""

    def setup_method(self):
        self.output = ExperimentOutput(
            columns=["T", "purity"], rows=rows_from_columns([0.5, 1.0], [1.0, 0.75])
        )

    def test_layout(self):
        text = format_csv(self.output, {"seed": 3, "experiment": "evolve"})
        assert text == "# experiment: evolve\n# seed: 3\nT,purity\n0.5,1.0\n1.0,0.75\n"

    def test_metadata_must_be_single_line(self):
        with pytest.raises(UsageError):
            format_csv(self.output, {"note": "two\nlines"})

    def test_ragged_rows(self):
        with pytest.raises(UsageError):
            ExperimentOutput(columns=["a", "b"], rows=[[1.0]])
        with pytest.raises(UsageError):
            rows_from_columns([1.0], [1.0, 2.0])

    def test_column(self):
        np.testing.assert_array_equal(self.output.column("purity"), [1.0, 0.75])


class TestReport:
    """Versioned JSON reports."""

    def test_report_fields(self):
        output = ExperimentOutput(columns=["N"], rows=[[1]], summary={"delta_theta": 1e-62})
        report = build_report(
            "undecide", {"experiment": "undecide"}, output, metadata={"workers": 1}
        )
        assert report["schema"] == REPORT_SCHEMA
        assert report["version"] == __version__
        assert report["summary"]["delta_theta"] == 1e-62
        assert deterministic_payload(report).keys() == report.keys() - {"metadata"}

    def test_sanitize(self):
        cleaned = sanitize({"z": 1 + 2j, "k": np.float64(math.inf), "v": np.arange(2), 3: True})
        assert cleaned == {"z": [1.0, 2.0], "k": "inf", "v": [0, 1], "3": True}

    def test_json_is_sorted_and_strict(self):
        text = format_json({"b": 1, "a": [0.1]})
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [0.1], "b": 1}
        with pytest.raises(ValueError):
            format_json({"x": math.nan})

    def test_write_text_creates_directories(self, tmp_path):
        path = write_text(tmp_path / "nested" / "out.csv", "a\n")
        assert path.read_text() == "a\n"
