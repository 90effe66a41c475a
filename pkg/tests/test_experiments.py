import json
import math

import numpy as np
import pytest

from vtne.cli import main
from vtne.errors import CheckpointError, ConfigError
from vtne.experiments import (
    CSV_HEADER,
    RunConfig,
    calls_to_reach,
    emit_csv,
    gradient_call_savings,
    load_checkpoint,
    mean_trajectory,
    read_checkpoint,
    read_csv,
    reference_for,
    relative_error,
    run_vtne,
    run_warmstart_comparison,
    save_checkpoint,
)
from vtne.optimizers import TrajectoryPoint

E_2SITE = 1 - math.sqrt(5)


@pytest.fixture(scope="module")
def two_site_record():
    return run_vtne(RunConfig(nx=2, ny=1, layers=3, chi_b=4, chi_a=(2, 4)))


def traj(energies, calls=None):
    calls = calls or list(range(1, len(energies) + 1))
    return [TrajectoryPoint(k, e, 0.1, c, 0.0) for k, (e, c) in enumerate(zip(energies, calls))]


# -- config --------------------------------------------------------------------


@pytest.mark.parametrize(
    "data,field",
    [
        ({"nx": 0}, "nx"),
        ({"layers": 0}, "layers"),
        ({"nx": 3, "ny": 3}, "layers"),
        ({"chi_b": 0}, "chi_b"),
        ({"chi_a": [4, -1]}, "chi_a"),
        ({"mode": "lukewarm"}, "mode"),
        ({"seeds": []}, "seeds"),
        ({"u": "two"}, "u"),
        ({"colour": 1}, "colour"),
        ({"optimizer": {"ftol": -1}}, "optimizer"),
        ({"optimizer": {"speed": 1}}, "optimizer"),
    ],
)
def test_config_errors_name_the_field(data, field):
    with pytest.raises(ConfigError, match=field):
        RunConfig.from_dict(data)


def test_config_json_errors_report_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        RunConfig.from_json('{"nx": 2,\n "ny": }')


def test_config_round_trip():
    cfg = RunConfig(nx=4, ny=2, chi_b=32, chi_a=(64, 256), seeds=(1, 2))
    back = RunConfig.from_json(json.dumps(cfg.to_dict()))
    assert back == cfg
    assert cfg.n_layers == 10
    assert RunConfig(nx=4, ny=2).eval_caps == (256,)
    assert RunConfig(nx=12, ny=1).eval_caps == (512,)


def test_relative_error_is_signed():
    assert relative_error(-0.9, -1.0) == pytest.approx(0.1)
    assert relative_error(-1.1, -1.0) == pytest.approx(-0.1)
    assert relative_error(1.0, None) is None


# -- run -----------------------------------------------------------------------


def test_run_vtne_two_site(two_site_record):
    r = two_site_record
    assert r.energy_chi_b == pytest.approx(E_2SITE, abs=1e-6)
    assert r.reference_energy == pytest.approx(E_2SITE, abs=1e-12)
    assert abs(r.energy_chi_a[4] - r.energy_chi_b) < 1e-9
    assert r.exact_energy == pytest.approx(r.energy_chi_b, abs=1e-9)
    assert r.infidelity < 1e-5
    assert r.label == "chi4"
    calls = [p.n_gradient_calls for p in r.trajectory]
    assert calls == sorted(calls) and calls[-1] == r.n_gradient_calls


def test_run_vtne_is_reproducible(two_site_record):
    again = run_vtne(RunConfig(nx=2, ny=1, layers=3, chi_b=4, chi_a=(2, 4)))
    assert np.array_equal(again.theta, two_site_record.theta)
    assert [p.energy for p in again.trajectory] == [p.energy for p in two_site_record.trajectory]


def test_run_vtne_requires_bfgs():
    with pytest.raises(ConfigError):
        run_vtne(RunConfig.from_dict({"layers": 1, "optimizer": {"kind": "adam"}}))


def test_no_reference_above_sixteen_qubits():
    assert reference_for(RunConfig(nx=12, ny=1).lattice).energy is None
    assert reference_for(RunConfig(nx=12, ny=1).lattice, -5.0).energy == -5.0


# -- comparison helpers ----------------------------------------------------------


def test_savings_arithmetic():
    cold = traj([0.0, -1.0, -2.0, -3.0])
    warm = traj([-2.5, -3.5, -4.0, -4.0])
    assert calls_to_reach(warm, -3.0) == 2
    assert gradient_call_savings(cold, warm, at_step=3) == 2
    assert gradient_call_savings(cold, traj([0, 0, 0, 0]), at_step=3) == -math.inf
    with pytest.raises(ValueError):
        gradient_call_savings(cold, warm, at_step=9)


def test_mean_trajectory():
    class R:
        def __init__(self, t):
            self.trajectory = t

    m = mean_trajectory([R(traj([0.0, -2.0])), R(traj([-1.0, -4.0]))])
    assert [p.energy for p in m] == [-0.5, -3.0]
    with pytest.raises(ValueError):
        mean_trajectory([R(traj([0.0])), R(traj([0.0, 1.0]))])


def test_warmstart_comparison_small():
    cfg = RunConfig(nx=2, ny=1, layers=3, chi_b=4)
    warm = run_vtne(cfg).theta
    recs = run_warmstart_comparison(cfg, {"chi4": warm}, n_seeds=2, n_steps=5, direct_caps=(4,))
    labels = [r.label for r in recs]
    assert labels.count("cold") == 2 and labels.count("direct4") == 2 and labels.count("chi4") == 1
    for r in recs:
        assert len(r.trajectory) == 6
    w = next(r for r in recs if r.label == "chi4")
    assert w.trajectory[0].energy == pytest.approx(E_2SITE, abs=1e-6)
    with pytest.raises(ConfigError):
        run_warmstart_comparison(cfg, {"bad": np.zeros(3)}, n_seeds=1, n_steps=1)
    with pytest.raises(ConfigError):
        run_warmstart_comparison(RunConfig(nx=12, ny=1), {}, n_seeds=1, n_steps=1)


# -- files -----------------------------------------------------------------------


def test_csv_format(tmp_path, two_site_record):
    path = emit_csv(two_site_record.trajectory, tmp_path / "r.csv", E_2SITE)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == len(two_site_record.trajectory) + 1
    back = read_csv(path)
    assert [p.energy for p in back] == [p.energy for p in two_site_record.trajectory]


def test_checkpoint_round_trip_is_bitwise(tmp_path, two_site_record):
    path = save_checkpoint(two_site_record, tmp_path / "ck.json")
    circuit, params = load_checkpoint(path)
    assert params.tobytes() == np.asarray(two_site_record.theta, dtype=float).tobytes()
    assert circuit.structure_hash() == two_site_record.circuit_hash
    assert set(json.loads(path.read_text())) == {"lattice", "layers", "chi_b", "seed", "params", "energy", "circuit_hash"}


def test_checkpoint_hash_mismatch(tmp_path, two_site_record):
    path = save_checkpoint(two_site_record, tmp_path / "ck.json")
    with pytest.raises(CheckpointError, match="hash"):
        load_checkpoint(path, RunConfig(nx=2, ny=1, layers=4))
    data = json.loads(path.read_text())
    data["circuit_hash"] = "0" * 64
    path.write_text(json.dumps(data))
    with pytest.raises(CheckpointError, match="hash"):
        load_checkpoint(path)


def test_malformed_checkpoint_reports_byte_offset(tmp_path):
    path = tmp_path / "bad.json"
    text = '{"lattice": "é", "layers": ]'
    path.write_text(text, encoding="utf-8")
    with pytest.raises(CheckpointError) as info:
        read_checkpoint(path)
    # the stray bracket sits after a two-byte character
    assert info.value.offset == text.index("]") + 1


def test_checkpoint_missing_field(tmp_path):
    path = tmp_path / "partial.json"
    path.write_text('{"layers": 1}')
    with pytest.raises(CheckpointError, match="missing"):
        read_checkpoint(path)


# -- CLI -------------------------------------------------------------------------


def test_cli_run_and_eval(tmp_path, capsys):
    out, ck = tmp_path / "run.csv", tmp_path / "ck.json"
    args = ["run", "--nx", "2", "--ny", "1", "--layers", "3", "--chi-b", "4", "--out", str(out), "--checkpoint", str(ck)]
    assert main(args) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["energy_chi_b"] == pytest.approx(E_2SITE, abs=1e-6)
    assert out.exists() and ck.exists() and out.with_suffix(".json").exists()
    assert main(["eval", "--checkpoint", str(ck), "--chi-a", "2", "4"]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["energy_chi_a"]["4"] == pytest.approx(summary["energy_chi_b"], abs=1e-9)


def test_cli_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nx": 2, "ny": 1, "layers": 1, "chi_b": 4}))
    assert main(["run", "--config", str(cfg), "--layers", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["energy_chi_b"] == pytest.approx(E_2SITE, abs=1e-6)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--nx", "3", "--ny", "3"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["eval"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_numerical_error_exit_code(monkeypatch):
    import vtne.cli as cli
    from vtne.errors import NumericalIntegrityError

    def boom(*a, **k):
        raise NumericalIntegrityError("nan")

    monkeypatch.setattr(cli, "run_vtne", boom)
    assert main(["run", "--layers", "1"]) == 3


def test_cli_bound(tmp_path, capsys):
    out = tmp_path / "bound.csv"
    assert main(["bound", "--chi", "2", "64", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "chi,delta,cnot_bound,qsd_cnots"
    assert rows[2].startswith("64,1,5697.333333333333")
    assert rows[2].endswith(",7660")
