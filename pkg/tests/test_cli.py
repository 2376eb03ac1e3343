import numpy as np
import pytest

from src.plaplab.calculus.fields import read_field, write_field
from src.plaplab.cli import build_parser, build_run_config, main
from src.plaplab.exceptions import UsageError
from src.plaplab.space.parser import read_space


def run_cli(*args):
    return main([str(a) for a in args])


def test_solve_dirichlet_path_is_linear(tmp_path):
    code = run_cli("solve", "--space", "path:9", "--kind", "poisson-dirichlet", "--p", "1.5",
                   "--boundary", "0,8", "--boundary-values", "0,1", "--out", tmp_path)
    assert code == 0
    u = read_field(tmp_path / "solution.txt", 9)
    assert np.allclose(u, np.linspace(0.0, 1.0, 9), atol=1e-9)
    assert (tmp_path / "manifest.txt").exists()


def test_exponent_below_one_is_usage_error(tmp_path, capsys):
    code = run_cli("solve", "--space", "path:3", "--kind", "poisson-neumann", "--p", "0.5", "--out", tmp_path)
    assert code == 2
    assert "(1, inf)" in capsys.readouterr().err


def test_missing_space_is_usage_error(tmp_path):
    assert run_cli("curvature", "--out", tmp_path) == 2


def test_both_space_sources_rejected(tmp_path):
    args = build_parser().parse_args(["curvature", "--space", "path:3", "--space-file", "x.txt", "--out",
                                      str(tmp_path)])
    with pytest.raises(UsageError):
        build_run_config(args)


def test_fixedpoint_method_needs_neumann(tmp_path):
    code = run_cli("solve", "--space", "path:3", "--kind", "poisson-dirichlet", "--boundary", "0",
                   "--method", "fixedpoint", "--out", tmp_path)
    assert code == 2


def test_solve_both_methods_writes_crosscheck(tmp_path):
    f = np.array([1.0, -0.5, 0.0, -0.5])
    write_field(tmp_path / "f.txt", f)
    out = tmp_path / "run"
    code = run_cli("solve", "--space", "cycle:4", "--kind", "poisson-neumann", "--p", "1.8",
                   "--f-file", tmp_path / "f.txt", "--method", "both", "--out", out)
    assert code == 0
    for name in ("solution-variational.txt", "solution-fixedpoint.txt", "trace.tsv", "crosscheck.txt"):
        assert (out / name).exists()
    a = read_field(out / "solution-variational.txt", 4)
    b = read_field(out / "solution-fixedpoint.txt", 4)
    assert np.allclose(a, b, atol=1e-6)
    crosscheck = dict(line.split(" = ", 1) for line in (out / "crosscheck.txt").read_text(encoding="utf-8").splitlines())
    for key in ("outer_iterations", "inner_fallbacks", "newton_corrections", "slow_steps"):
        assert int(crosscheck[key]) >= 0
    header = (out / "trace.tsv").read_text(encoding="utf-8").splitlines()[0].split("\t")
    assert "inner" in header and "step" in header


def test_solver_failure_writes_diagnostics(tmp_path):
    code = run_cli("solve", "--space", "grid:3x3", "--kind", "poisson-dirichlet", "--p", "3",
                   "--boundary", "0,8", "--boundary-values", "0,1", "--max-iter", "1", "--out", tmp_path)
    assert code == 1
    text = (tmp_path / "errors.txt").read_text(encoding="utf-8")
    assert "ConvergenceError" in text
    assert (tmp_path / "best_iterate.txt").exists()


def test_verify_bochner_auto_curvature(tmp_path):
    code = run_cli("verify", "bochner", "--space", "grid:4x4", "--K", "auto", "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "curvature.tsv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "vertex\tK"
    assert len(rows) == 17
    assert (tmp_path / "reports.txt").read_text(encoding="utf-8").startswith("name=bochner\t")


def test_verify_harnack_needs_field(tmp_path):
    assert run_cli("verify", "harnack", "--space", "path:5", "--out", tmp_path) == 2


def test_verify_harnack_constant_field(tmp_path):
    write_field(tmp_path / "u.txt", np.ones(7))
    code = run_cli("verify", "harnack", "--space", "path:7", "--field", tmp_path / "u.txt", "--vertex", "3",
                   "--out", tmp_path / "run")
    assert code == 0
    record = (tmp_path / "run" / "reports.txt").read_text(encoding="utf-8")
    fields = dict(item.split("=", 1) for item in record.strip().split("\t"))
    assert fields["name"] == "harnack-sub"
    assert float(fields["constant"]) == pytest.approx(1.0)


def test_verify_poincare_writes_table(tmp_path):
    assert run_cli("verify", "poincare", "--space", "path:3", "--out", tmp_path) == 0
    rows = dict(line.split(" = ", 1) for line in (tmp_path / "poincare.txt").read_text(encoding="utf-8").splitlines())
    assert float(rows["constant"]) == pytest.approx(1.0, abs=1e-8)


def test_verify_holder_accepts_refinement_levels(tmp_path):
    for n in (9, 17, 33):
        write_field(tmp_path / f"u{n}.txt", np.linspace(0.0, 1.0, n))
    code = run_cli("verify", "holder", "--space", "path:33", "--field", tmp_path / "u33.txt",
                   "--level", "path:9", tmp_path / "u9.txt", "--level", "path:17", tmp_path / "u17.txt",
                   "--out", tmp_path / "run")
    assert code == 0
    rows = dict(line.split(" = ", 1) for line in (tmp_path / "run" / "holder.txt").read_text(encoding="utf-8").splitlines())
    assert rows["levels"] == "3"
    assert len(rows["level_exponents"].split(",")) == 3
    assert float(rows["alpha"]) == pytest.approx(1.0, abs=0.05)


def test_verify_holder_level_field_must_exist(tmp_path):
    write_field(tmp_path / "u.txt", np.linspace(0.0, 1.0, 9))
    code = run_cli("verify", "holder", "--space", "path:9", "--field", tmp_path / "u.txt",
                   "--level", "path:5", tmp_path / "missing.txt", "--out", tmp_path / "run")
    assert code == 2


def test_reruns_are_byte_identical(tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run_cli("eigen", "--space", "random:12:3", "--p", "1.7", "--out", out) == 0
        outputs.append(((out / "eigenfield.txt").read_bytes(), (out / "eigen.txt").read_bytes()))
    assert outputs[0] == outputs[1]


def test_space_generate_and_convert(tmp_path):
    assert run_cli("space", "generate", "--space", "horn:6:2", "--out", tmp_path) == 0
    target = tmp_path / "copy.txt"
    assert run_cli("space", "convert", "--space-file", tmp_path / "space.txt", "--to", target,
                   "--out", tmp_path / "convert") == 0
    assert target.read_text(encoding="utf-8") == (tmp_path / "space.txt").read_text(encoding="utf-8")
    assert read_space(target).n == 6


def test_sweep_table(tmp_path):
    code = run_cli("sweep", "--spaces", "path:5,cycle:5", "--ps", "1.5,2.5", "--eps0s", "1",
                   "--threads", "2", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "sweep.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t")[:4] == ["space", "p", "eps0", "method"]
    assert len(lines) == 1 + 2 * 2 * 2
    assert lines[1:] == sorted(lines[1:], key=lambda l: (l.split("\t")[0], float(l.split("\t")[1]),
                                                        l.split("\t")[3]))


def test_sweep_unknown_method(tmp_path):
    assert run_cli("sweep", "--spaces", "path:5", "--methods", "magic", "--out", tmp_path) == 2
