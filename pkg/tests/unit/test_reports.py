"""
Unit tests for report files
"""
import json
import shutil
import tempfile
from pathlib import Path

import numpy as np

from margin_paths.reports import HEADER_KEYS, ReportWriter, format_cell, read_csv

PROVENANCE = {
    "experiment": "margin_gap",
    "dataset": "symmetric_pair",
    "predictor": '[{"family": "linear"}]',
    "norm": "L2",
    "seed": "0",
    "config_hash": "abc123",
    "solver_fingerprint": "def456",
}


class TestFormatCell:
    """Test cell formatting"""

    def test_floats_round_trip_exactly(self):
        value = 1.0 / 3.0
        assert float(format_cell(value)) == value
        assert format_cell(np.float64(0.1)) == "0.1"

    def test_special_values(self):
        assert format_cell(float("nan")) == "nan"
        assert format_cell(True) == "true"
        assert format_cell(np.bool_(False)) == "false"
        assert format_cell(np.int64(4)) == "4"
        assert format_cell("ok") == "ok"


class TestReportWriter:
    """Test atomic CSV/JSON/text output"""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.writer = ReportWriter(self.temp_dir / "out", PROVENANCE)

    def teardown_method(self):
        shutil.rmtree(self.temp_dir)

    def test_csv_header_and_rows(self):
        path = self.writer.write_csv("results.csv", ["rho", "ok"], [[1.0, True], [2.5, False]])
        meta, header, rows = read_csv(path)
        assert list(meta) == list(HEADER_KEYS)
        assert meta["experiment"] == "margin_gap"
        assert meta["tool"].startswith("margin-paths ")
        assert header == ["rho", "ok"]
        assert rows == [["1.0", "true"], ["2.5", "false"]]

    def test_no_temp_files_left(self):
        self.writer.write_csv("results.csv", ["a"], [[1]])
        self.writer.write_text("summary.txt", "done")
        names = sorted(p.name for p in (self.temp_dir / "out").iterdir())
        assert names == ["results.csv", "summary.txt"]

    def test_json_handles_numpy(self):
        path = self.writer.write_json(
            "summary.json", {"theta": np.array([0.5, 1.0]), "passed": np.bool_(True), "inf": np.inf}
        )
        payload = json.loads(path.read_text())
        assert payload == {"theta": [0.5, 1.0], "passed": True, "inf": "inf"}

    def test_same_input_same_bytes(self):
        rows = [[0.1 + 0.2, float("nan")]]
        first = self.writer.write_csv("a.csv", ["x", "y"], rows).read_bytes()
        second = self.writer.write_csv("b.csv", ["x", "y"], rows).read_bytes()
        assert first == second

    def test_text_gets_trailing_newline(self):
        path = self.writer.write_text("summary.txt", "overall: PASS")
        assert path.read_text() == "overall: PASS\n"
        assert path in self.writer.written
