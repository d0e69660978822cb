import numpy as np
import pytest

from periodic_fsi import cli
from periodic_fsi.errors import DivergenceFailure, SolverFailure
from periodic_fsi.grid import dump_field, load_field

TINY = ["--override", "discretization.nx=8", "--override", "discretization.nz=4",
        "--override", "discretization.n_t=8"]


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out), *TINY])
    return code, out


def manifest_body(path):
    lines = (path / "manifest.txt").read_text().splitlines()
    keep, skip = [], False
    for line in lines:
        if line.startswith("created"):
            continue
        if line.startswith("["):
            skip = line == "[timing]"
        if not skip:
            keep.append(line)
    return keep


def test_stokes_writes_fields(tmp_path):
    code, out = run(tmp_path, "stokes")
    assert code == 0
    for name in ("stokes_u1.csv", "stokes_u2.csv", "stokes_p.csv", "manifest.txt", "report.txt"):
        assert (out / name).exists()
    p = load_field(out / "stokes_p.csv")
    assert p.values.shape == (8, 4) and np.isfinite(p.values).all()


def test_eigs_all_in_left_half_plane(tmp_path):
    code, out = run(tmp_path, "eigs")
    assert code == 0
    rows = (out / "eigenvalues.csv").read_text().splitlines()
    assert len(rows) > 1
    assert rows[0] == "re,im,ritz_residual,energy_residual"
    re = [float(r.split(",")[0]) for r in rows[1:]]
    assert max(re) < 0


def test_periodic_linear_dumps_trajectory(tmp_path):
    code, out = run(tmp_path, "periodic-linear")
    assert code == 0
    eta = sorted((out / "fields").glob("t*_eta.csv"))
    assert len(eta) == 8
    text = (out / "manifest.txt").read_text()
    assert "status = ok" in text and "defect = " in text


def test_solve_and_manifest_determinism(tmp_path):
    code1, out1 = run(tmp_path, "solve", name="a")
    code2, out2 = run(tmp_path, "solve", name="b")
    assert code1 == code2 == 0
    assert manifest_body(out1) == manifest_body(out2)
    for f in sorted((out1 / "fields").glob("*.csv")):
        assert (out2 / "fields" / f.name).read_bytes() == f.read_bytes()
    assert (out1 / "picard.csv").read_text() == (out2 / "picard.csv").read_text()


def test_dump_round_trip_from_cli(tmp_path):
    code, out = run(tmp_path, "periodic-linear")
    f = load_field(out / "fields" / "t0003_u1.csv")
    again = tmp_path / "again.csv"
    dump_field(f, again)
    assert again.read_bytes() == (out / "fields" / "t0003_u1.csv").read_bytes()


def test_zero_forcing_solve(tmp_path):
    code, out = run(tmp_path, "solve", "--override", "forcing.omega2_amplitude=0",
                    "--override", "forcing.omega1_amplitude=0")
    assert code == 0
    text = (out / "manifest.txt").read_text()
    assert "iterations = 1" in text


def test_ball_violation_exit_code(tmp_path, capsys):
    code, out = run(tmp_path, "solve", "--override", "forcing.omega2_amplitude=50")
    assert code == 5
    assert "failure_class: ball-violation" in capsys.readouterr().err
    text = (out / "manifest.txt").read_text()
    assert "status = failed" in text and "[failure]" in text


def test_invalid_config_exit_code(tmp_path, capsys):
    code, out = run(tmp_path, "stokes", "--override", "fluid.nu=-1",
                    "--override", "beam.gamma=-2")
    assert code == 2
    err = capsys.readouterr().err
    assert "invalid-config" in err
    assert len((out / "validation.txt").read_text().strip().splitlines()) >= 2


@pytest.mark.parametrize("override", ["nosuch.key=1", "fluid.nosuch=1", "fluid.nu=abc", "novalue"])
def test_bad_overrides_rejected(tmp_path, override):
    code, _ = run(tmp_path, "stokes", "--override", override)
    assert code == 2


def test_config_file(tmp_path):
    ini = tmp_path / "case.ini"
    ini.write_text("[fluid]\nnu = 0.2   ; viscosity\n\n[discretization]\nnx = 10\nnz = 5\n")
    out = tmp_path / "cfg"
    assert cli.main(["stokes", "--config", str(ini), "--out", str(out)]) == 0
    text = (out / "manifest.txt").read_text()
    assert "nu = 0.2" in text and "nx = 10" in text


@pytest.mark.parametrize("exc, code", [(DivergenceFailure("no"), 4), (SolverFailure("no"), 3)])
def test_solver_failures_map_to_exit_codes(tmp_path, monkeypatch, exc, code):
    def boom(*a, **k):
        raise exc
    monkeypatch.setattr(cli, "solve_periodic_fsi", boom)
    got, out = run(tmp_path, "solve")
    assert got == code
    assert exc.failure_class in (out / "manifest.txt").read_text()


def test_sweep_amplitude(tmp_path):
    code, out = run(tmp_path, "sweep", "--override", "sweep.values=1e-4,2e-4")
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("omega2_amplitude") and len(rows) == 3


def test_sweep_gamma(tmp_path):
    code, out = run(tmp_path, "sweep", "--override", "sweep.parameter=gamma",
                    "--override", "sweep.values=0.5,1.0")
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[1]) < 0 for r in rows)


def test_verify_passes(tmp_path):
    out = tmp_path / "verify"
    code = cli.main(["verify", "--out", str(out), "--override", "discretization.nx=16",
                     "--override", "discretization.nz=8", "--override", "discretization.n_t=16"])
    assert code == 0
    assert "FAIL" not in (out / "report.txt").read_text()
