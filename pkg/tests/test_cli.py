import subprocess
import sys
import time

import numpy as np
import pytest

from spherefv.cli import main
from spherefv.grid import read_grid
from spherefv.study import CSV_HEADER, StudyConfig, StudyRow, format_csv, run_study
from spherefv.metrics import ErrorReport


def _rows(text):
    lines = text.strip().splitlines()
    assert lines[0] == CSV_HEADER
    return [ln.split(",") for ln in lines[1:]]


class TestGridCommand:
    def test_level2_nopt(self, tmp_path, capsys):
        out = tmp_path / "g.txt"
        assert main(["grid", "--level", "2", "--kind", "nopt", "--out", str(out)]) == 0
        assert read_grid(out).n_vertices == 162
        assert capsys.readouterr().out.startswith("N=162 F=320 h=")

    def test_scvt_level0_equals_nopt(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        main(["grid", "--level", "0", "--kind", "nopt", "--out", str(a)])
        main(["grid", "--level", "0", "--kind", "scvt", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_round_trip_through_input(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        main(["grid", "--level", "3", "--out", str(a)])
        assert main(["grid", "--input", str(a), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_scvt_from_input(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        main(["grid", "--level", "2", "--out", str(a)])
        assert main(["grid", "--input", str(a), "--kind", "scvt", "--scvt-max-iter", "50",
                     "--out", str(b)]) == 0
        assert not np.array_equal(read_grid(a).vertices, read_grid(b).vertices)


class TestSolveCommand:
    def test_constant_problem_zero_errors(self, capsys):
        assert main(["solve", "--level", "3", "--problem", "constant"]) == 0
        row = _rows(capsys.readouterr().out)[0]
        assert row[:2] == ["3", "642"]
        assert all(float(v) < 1e-9 for v in row[3::2])

    def test_level0_fast(self, capsys):
        start = time.perf_counter()
        assert main(["solve", "--level", "0"]) == 0
        assert time.perf_counter() - start < 1.0
        assert len(_rows(capsys.readouterr().out)) == 1

    def test_h1_decreases(self, capsys):
        main(["solve", "--level", "3"])
        e3 = float(_rows(capsys.readouterr().out)[0][5])
        main(["solve", "--level", "4"])
        e4 = float(_rows(capsys.readouterr().out)[0][5])
        assert np.isfinite(e4) and e4 < e3

    def test_field_dump_and_grid_file(self, tmp_path, capsys):
        g, f = tmp_path / "g.txt", tmp_path / "u.csv"
        main(["grid", "--level", "2", "--out", str(g)])
        assert main(["solve", "--grid", str(g), "--jacobi", "--out", str(f)]) == 0
        lines = f.read_text().splitlines()
        assert lines[0] == "i,x1,x2,x3,u_h,u_exact" and len(lines) == 163


class TestStudyCommand:
    def test_csv_layout(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["study", "--levels", "0..2", "--out", str(out)]) == 0
        rows = _rows(out.read_text(encoding="utf-8"))
        assert [r[1] for r in rows] == ["12", "42", "162"]
        assert all(v == "" for v in rows[0][4::2])
        assert all(v != "" for v in rows[1][4::2])
        hs = [float(r[2]) for r in rows]
        assert all(0.85 <= 2 * b / a <= 1.15 for a, b in zip(hs, hs[1:]))

    def test_stdout_when_no_out(self, capsys):
        assert main(["study", "--levels", "1..1", "--problem", "constant"]) == 0
        assert capsys.readouterr().out.startswith(CSV_HEADER)

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["study", "--levels", "0..3", "--out", str(a)])
        main(["study", "--levels", "0..3", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestExitCodes:
    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["study", "--bogus"])
        assert info.value.code == 2

    def test_bad_levels_syntax(self):
        with pytest.raises(SystemExit) as info:
            main(["study", "--levels", "3-4"])
        assert info.value.code == 2

    @pytest.mark.parametrize("argv", [
        ["study", "--levels", "4..2"],
        ["study", "--levels", "0..9"],
        ["solve", "--level", "-1"],
        ["solve"],
        ["grid", "--level", "12", "--out", "x"],
        ["solve", "--level", "1", "--cg-tol", "2"],
        ["solve", "--level", "1", "--quad-depth", "-1"],
    ])
    def test_config_errors(self, argv, capsys):
        assert main(argv) == 2
        assert "error [config]" in capsys.readouterr().err

    def test_numeric_failure(self, capsys):
        assert main(["solve", "--level", "4", "--cg-max-iter", "2"]) == 3
        assert "error [solver]" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["solve", "--grid", str(tmp_path / "none.txt")]) == 4
        assert "error [io]" in capsys.readouterr().err

    def test_malformed_file(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("SVDGRID 1 0 12 20\nv 1 0 0\n")
        assert main(["grid", "--input", str(p), "--out", str(tmp_path / "o.txt")]) == 4

    def test_unwritable_output(self, tmp_path):
        assert main(["grid", "--level", "0", "--out", str(tmp_path / "no" / "dir.txt")]) == 4


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "spherefv.cli", "solve", "--level", "1", "-v"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == CSV_HEADER
    assert "cg:" in out.stderr


class TestStudyApi:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            StudyConfig(grid_kind="cubed")
        with pytest.raises(ValueError):
            StudyConfig(problem="nothing")
        with pytest.raises(ValueError):
            StudyConfig(scvt_tol=0.0)

    def test_row_format(self):
        row = StudyRow(2, 162, 0.1887105308123, ErrorReport(1e-3, 2e-2, 3e-3, 4e-2))
        assert row.csv() == "2,162,0.1887105308,0.001,,0.02,,0.003,,0.04,"

    def test_run_study_rates(self):
        rows = run_study(StudyConfig(level_min=2, level_max=4))
        assert [r.level for r in rows] == [2, 3, 4]
        assert rows[0].errors.cr_L2 is None
        assert rows[-1].errors.cr_L2 > 1.8
        assert format_csv(rows).count("\n") == 4
