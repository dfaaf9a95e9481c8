import argparse
import json

import pandas as pd
import pytest
from unittest.mock import MagicMock, patch

from src.app import ResourceApp
from src.errors import DimensionMismatch, InputError, UnknownLabel
from src.handlers.measure_handlers import parse_dims, resolve_state
from src.handlers.sweep_handlers import SweepHandlers, kappa_grid, parse_step
from src.handlers.verify_handlers import VerifyHandlers
from src.managers import bounds
from src.managers.resource_sets import named_state
from src.utils.linalg import DensityMatrix
from src.utils.state_io import CheckRow, save_state


# ========== FIXTURES ==========

@pytest.fixture
def app(registry):
    """Приложение с общим реестром множеств"""
    return ResourceApp(registry)


def run(app, *argv):
    args = app.parse(list(argv))
    return args.handler(args)


# ========== MEASURE ==========

class TestMeasureHandlers:

    def test_strange_dmin(self, app):
        result = run(app, "measure", "--state", "strange", "--set", "stab3", "--measure", "dmin")
        assert result.exit_code == 0
        assert result.lines == ["1.000000000"]
        assert result.report.inputs["dims"] == [3]
        assert "witness_state" not in result.report.results[0]

    def test_witness_in_report(self, app):
        result = run(app, "measure", "--state", "strange", "--set", "stab3", "--measure", "dmax", "--witness")
        entry = result.report.results[0]
        assert "witness_state" in entry
        assert entry["status"] == "Finite"
        assert "dual_gap" in result.report.diagnostics

    def test_alias(self, app):
        """dmins_aff - синоним dmin_aff"""
        result = run(app, "measure", "--state", "strange", "--set", "stab3", "--measure", "dmins_aff")
        assert result.report.inputs["measure"] == "dmin_aff"
        assert result.lines == ["0.000000000"]

    def test_state_from_file(self, app, tmp_path):
        path = tmp_path / "plus.json"
        save_state(named_state("plus"), path)
        result = run(app, "measure", "--state", str(path), "--measure", "dmin")
        assert result.lines == ["0.000000000"]

    def test_gfid(self, app):
        result = run(app, "measure", "--state", "zero", "--measure", "gfid", "--k", "4")
        entry = result.report.results[0]
        assert entry["value"] == pytest.approx(0.25, abs=1e-8)
        assert entry["gap"] < 1e-6

    def test_stabnorm(self, app):
        result = run(app, "measure", "--state", "hoggar", "--measure", "stabnorm")
        assert result.lines == ["2.750000000"]

    def test_stabnorm_needs_qubits(self, app):
        with pytest.raises(DimensionMismatch):
            run(app, "measure", "--state", "strange", "--measure", "stabnorm")

    def test_unknown_state(self, app):
        with pytest.raises(UnknownLabel):
            run(app, "measure", "--state", "nonexistent", "--measure", "dmin")

    def test_resolve_state_json_path(self, tmp_path):
        path = tmp_path / "mixed.json"
        save_state(DensityMatrix.maximally_mixed((2,)), path)
        assert resolve_state(str(path)).dims == (2,)

    @pytest.mark.parametrize("text,expected", [("2", (2,)), ("2,2,2", (2, 2, 2)), ("3, 3", (3, 3))])
    def test_parse_dims(self, text, expected):
        assert parse_dims(text) == expected

    @pytest.mark.parametrize("text", ["", "a,b", "0", "2,-1"])
    def test_parse_dims_invalid(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_dims(text)


# ========== EXPORT ==========

class TestExport:

    def test_export_state(self, app, tmp_path):
        out = tmp_path / "strange.json"
        result = run(app, "export", "state", "strange", "--out", str(out))
        assert result.lines == [str(out)]
        assert json.loads(out.read_text(encoding="utf-8"))["dims"] == [3]

    def test_export_set(self, app, tmp_path):
        out = tmp_path / "stab.json"
        result = run(app, "export", "set", "stab", "--dims", "2", "--out", str(out))
        assert result.report.results[0] == {"vertices": 6}
        assert len(json.loads(out.read_text(encoding="utf-8"))) == 6

    def test_export_cone_rejected(self, app, tmp_path):
        with pytest.raises(InputError):
            run(app, "export", "set", "ppt", "--dims", "2,2", "--out", str(tmp_path / "ppt.json"))

    def test_export_ensemble(self, app, tmp_path):
        out = tmp_path / "face.json"
        result = run(app, "export", "ensemble", "face", "--out", str(out))
        assert result.report.results[0] == {"unitaries": 3}

    def test_export_unknown_ensemble(self, app, tmp_path):
        with pytest.raises(UnknownLabel):
            run(app, "export", "ensemble", "clifford", "--out", str(tmp_path / "x.json"))


# ========== SWEEP ==========

class TestSweepHandlers:

    def test_bounds_sweep(self, app, tmp_path):
        """Шаг 0.1: 55 строк с eps1 + eps2 < 1"""
        out = tmp_path / "bounds.csv"
        result = run(app, "sweep", "bounds", "--step", "0.1", "--out", str(out))
        frame = pd.read_csv(out)
        assert len(frame) == 55
        assert list(frame.columns) == ["eps1", "eps2", "log_f", "log_thm5", "region"]
        assert (frame["log_thm5"] <= frame["log_f"] + 1e-12).all()
        assert result.lines == [f"55 {out}"]

    def test_rows_follow_grid_order(self):
        """Порядок строк совпадает с порядком сетки при любом числе потоков"""
        handlers = SweepHandlers(workers=4)
        grid = list(bounds.bound_grid(0.25))
        rows = handlers._map_ordered(handlers.bounds_row, grid, "test", progress=False)
        assert [(r["eps1"], r["eps2"]) for r in rows] == [(e.eps1, e.eps2) for e in grid]

    def test_isotropic_sweep(self, app, tmp_path):
        out = tmp_path / "iso.csv"
        result = run(app, "sweep", "isotropic", "--step", "0.5", "--family", "strange", "--out", str(out))
        frame = pd.read_csv(out)
        assert frame["kappa"].tolist() == [0.0, 0.5, 1.0]
        assert result.report.diagnostics["max_delta"] < 1e-4

    def test_missing_directory(self, app, tmp_path):
        with pytest.raises(FileNotFoundError):
            run(app, "sweep", "bounds", "--out", str(tmp_path / "missing" / "out.csv"))

    @pytest.mark.parametrize("text", ["0", "-0.1", "0.75", "abc"])
    def test_parse_step_invalid(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_step(text)

    def test_kappa_grid(self):
        assert kappa_grid(0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]


# ========== VERIFY ==========

class TestVerifyHandlers:

    def test_exit_code_on_failure(self, registry):
        """Проваленная проверка даёт код 1"""
        handlers = VerifyHandlers(registry)
        failing = [CheckRow(suite="props", name="x", passed=False, detail="boom")]
        with patch.object(handlers, "run_suite", MagicMock(return_value=failing)):
            result = handlers.cmd_verify(argparse.Namespace(suite="props", progress=False))
        assert result.exit_code == 1
        assert result.report.diagnostics == {"checks": 1, "failed": 1}

    def test_all_runs_every_suite(self, registry):
        handlers = VerifyHandlers(registry)
        passing = [CheckRow(suite="s", name="ok", passed=True)]
        with patch.object(handlers, "run_suite", MagicMock(return_value=passing)) as mock_run:
            result = handlers.cmd_verify(argparse.Namespace(suite="all", progress=False))
        assert mock_run.call_count == 4
        assert result.exit_code == 0

    def test_check_error_becomes_failed_row(self, registry):
        """Исключение внутри проверки превращается в строку FAIL"""
        handlers = VerifyHandlers(registry)
        broken = MagicMock(side_effect=DimensionMismatch("boom"))
        with patch.dict(handlers._suites, {"bounds": lambda: [("broken", broken)]}):
            rows = handlers.run_suite("bounds")
        assert len(rows) == 1
        assert not rows[0].passed

    @pytest.mark.slow
    def test_bounds_suite_passes(self, registry):
        rows = VerifyHandlers(registry).run_suite("bounds")
        assert rows
        assert all(row.passed for row in rows), [row.name for row in rows if not row.passed]
