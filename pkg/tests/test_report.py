"""Tests for spdo.report — convergence tables and log-log data."""
from __future__ import annotations

import math

from spdo.analysis import ConvergenceRow, eoc
from spdo.report import emit_report, loglog_path

ROWS = eoc([(20, 0.65140, 0.120349381), (30, 0.51210, 0.054895875)])


class TestCsvReport:
    def test_header_and_rows(self, tmp_path):
        path = emit_report(ROWS, tmp_path / "galerkin.csv", s=-0.5)
        lines = path.read_text().splitlines()
        assert lines[0] == "N,h_X,H^-0.5-norm,EOC"
        assert lines[1] == "20,0.6514,0.120349381,"
        N, h, err, rate = lines[2].split(",")
        assert (int(N), float(h), float(err)) == (30, 0.5121, 0.054895875)
        assert float(rate) == ROWS[1].eoc

    def test_missing_n_left_blank(self, tmp_path):
        path = emit_report([ConvergenceRow(None, 0.5, 0.1)], tmp_path / "r.csv", s=0.0)
        assert path.read_text().splitlines()[1].startswith(",0.5,")


class TestMarkdownReport:
    def test_table_and_expected_order(self, tmp_path):
        path = emit_report(ROWS, tmp_path / "galerkin.md", "markdown", s=-0.5, predicted=3.5, global_rate=3.262)
        text = path.read_text()
        assert "| N | h_X | H^-0.5-norm | EOC |" in text
        assert "| 20 | 0.65140 | 0.120349381 |  |" in text
        assert "| 30 | 0.51210 | 0.054895875 | 3.262 |" in text
        assert "Expected order of convergence : 3.5" in text
        assert "Least-squares order over the ladder : 3.262" in text


class TestLoglog:
    def test_companion_file(self, tmp_path):
        path = emit_report(ROWS, tmp_path / "out" / "study.csv")
        data = loglog_path(path)
        assert data.name == "study.loglog.dat"
        lines = data.read_text().splitlines()
        assert lines[0].startswith("#")
        x, y = map(float, lines[1].split())
        assert x == math.log(0.65140)
        assert y == math.log(0.120349381)

    def test_identical_inputs_identical_files(self, tmp_path):
        a = emit_report(ROWS, tmp_path / "a.csv").read_bytes()
        b = emit_report(ROWS, tmp_path / "b.csv").read_bytes()
        assert a == b
