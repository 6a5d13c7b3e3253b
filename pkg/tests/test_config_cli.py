import json
import os

import pytest
import yaml

from plslab import cli
from plslab.config import DEFAULTS, config_hash, dump_config, load_config, resolve
from plslab.errors import ConfigError, ConvergenceError
from plslab.records import ExperimentRecord, atomic_write, load_record, run_dir, save_record, strip_columns

WAVE_SMALL = {
    "grid": {"d": 1, "L": 6.283185307179586, "N": 64},
    "s": 2.0,
    "damping": None,
    "dt": 0.05,
    "horizon": 5.0,
    "stride": 5,
    "data": {"width": 1.0},
}


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


# ------------------------------------------------------------------ config


def test_missing_required_key_names_its_path():
    with pytest.raises(ConfigError) as info:
        resolve("pls_sweep", {"grid": {"d": 2}, "delta": 0.1, "R_list": [4]})
    assert info.value.path == "grid.N"


def test_unknown_key_is_rejected_with_path():
    with pytest.raises(ConfigError, match="unknown key") as info:
        resolve("wave", {**WAVE_SMALL, "data": {"widht": 1.0}})
    assert info.value.path == "data.widht"


def test_config_round_trips_through_yaml():
    cfg = resolve("wave", WAVE_SMALL)
    again = load_config("wave", text=dump_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_every_command_has_defaults():
    assert set(DEFAULTS) == {"gcc", "flatness", "pls_sweep", "wave", "resolvent", "suite"}
    with pytest.raises(ConfigError):
        resolve("plot", {})


def test_hash_depends_on_content_only():
    a = resolve("wave", WAVE_SMALL)
    b = resolve("wave", dict(reversed(list(WAVE_SMALL.items()))))
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(resolve("wave", {**WAVE_SMALL, "dt": 0.025}))


# --------------------------------------------------------------------- cli


def test_cli_missing_grid_n_exits_2(tmp_path, capsys):
    doc = yaml.safe_load((cli.resources.files("plslab") / "configs" / "pls_sweep.yaml").read_text())
    del doc["grid"]["N"]
    path = _write(tmp_path, "bad.yaml", doc)
    code, _, err = _run(["pls-sweep", "--config", path, "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    assert "grid.N" in err


def test_cli_unknown_config_file(tmp_path, capsys):
    code, _, err = _run(["wave", "--config", str(tmp_path / "nope.yaml")], capsys)
    assert code == 2 and "nope.yaml" in err


def test_bundled_sweep_is_bounded(tmp_path, capsys):
    out = tmp_path / "results"
    code, stdout, _ = _run(["pls-sweep", "--config", "pls_sweep", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(stdout.strip().splitlines()[-1])
    assert doc["verdict"]["bounded"] is True
    folder = out / os.path.basename(doc["dir"])
    rows = (folder / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("R,beta,delta,lambda_min,C,mask_size,method,residual,seconds")
    assert len(rows) == 1 + 4
    record = json.loads((folder / "record.json").read_text())
    assert record["config"]["grid"]["N"] == 256
    assert len(record["config_hash"]) == 64
    assert record["version"].startswith("v")
    assert (folder / "plot.gp").exists()


def test_wave_without_damping_is_conserved(tmp_path, capsys):
    path = _write(tmp_path, "w.yaml", WAVE_SMALL)
    code, stdout, _ = _run(["wave", "--config", path, "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    assert json.loads(stdout)["verdict"] == {"conserved": True, "monotone": True}


def test_bundled_conservation_config(tmp_path, capsys):
    code, stdout, _ = _run(
        ["wave", "--config", "wave_conservation", "--horizon", "0.2", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    assert json.loads(stdout)["verdict"]["conserved"] is True


def test_wave_snapshots_are_written(tmp_path):
    cfg = resolve("wave", {**WAVE_SMALL, "snapshots": {"count": 3, "downsample": 2}})
    rec = cli.run_command("wave", cfg, tmp_path, echo=lambda *_: None)
    snaps = sorted((run_dir(tmp_path, "wave", cfg) / "snapshots").glob("*.bin"))
    assert 3 <= len(snaps) <= 4
    assert rec.results["max_relative_drift"] <= 1e-12


def test_flag_overrides_file(tmp_path, capsys):
    path = _write(tmp_path, "w.yaml", WAVE_SMALL)
    args = cli.build_parser().parse_args(["wave", "--config", path, "--dt", "0.1", "--seed", "4"])
    command, cfg = cli.resolve_args(args)
    assert command == "wave" and cfg["dt"] == 0.1 and cfg["seed"] == 4


def test_cache_hit_and_force(tmp_path):
    cfg = resolve("wave", WAVE_SMALL)
    lines = []
    first = cli.run_command("wave", cfg, tmp_path, echo=lines.append)
    assert not first.cached and lines == []
    second = cli.run_command("wave", cfg, tmp_path, echo=lines.append)
    assert second.cached and lines[0].startswith("cached: ")
    # the cached record carries the same results and tables
    assert second.results == json.loads(json.dumps(first.results))
    assert second.tables == first.tables
    third = cli.run_command("wave", cfg, tmp_path, force=True, echo=lines.append)
    assert not third.cached and len(lines) == 1


def test_nonconvergence_exits_1(tmp_path, capsys, monkeypatch):
    def boom(cfg):
        raise ConvergenceError("stalled", estimate=0.5, residual=1e-3, iterations=7)

    monkeypatch.setitem(cli.RUNNERS, "pls_sweep", boom)
    code, _, err = _run(["pls-sweep", "--config", "pls_sweep", "--out", str(tmp_path)], capsys)
    assert code == 1 and "stalled" in err


def test_unresolved_bump_is_a_config_error(tmp_path, capsys):
    doc = {**WAVE_SMALL, "data": {"width": 0.1}}
    code, _, err = _run(["wave", "--config", _write(tmp_path, "w.yaml", doc), "--out", str(tmp_path)], capsys)
    assert code == 2 and "data.width" in err


def test_bad_damping_is_a_config_error(tmp_path, capsys):
    doc = {**WAVE_SMALL, "damping": {"type": "ball", "center": [1.0], "radius": 0.5}}
    code, _, err = _run(["wave", "--config", _write(tmp_path, "w.yaml", doc), "--out", str(tmp_path)], capsys)
    assert code == 2 and "damping" in err


def test_resolvent_grid_spacing_error(tmp_path, capsys):
    doc = {
        "grid": {"d": 2, "L": 6.283185307179586, "N": 16},
        "s": 2.0,
        "set": {"type": "full"},
        "lambda_max": 4.0,
        "lambdas": [0.0, 4.0],
    }
    code, _, err = _run(["resolvent", "--config", _write(tmp_path, "r.yaml", doc), "--out", str(tmp_path)], capsys)
    assert code == 2 and "lambdas" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["gcc", "--config", "gcc", "--budget", "32"],
        ["resolvent", "--config", "resolvent", "--N", "32", "--lambda-max", "10"],
        ["flatness", "--points", None, "--codim", "1"],
    ],
)
def test_other_subcommands_run(tmp_path, capsys, argv):
    argv = list(argv)
    if None in argv:
        argv[argv.index(None)] = _write(tmp_path, "p.yaml", [[0, 0], [1, 0], [0, 1], [1, 1]])
    code, stdout, _ = _run([*argv, "--out", str(tmp_path / "o")], capsys)
    assert code == 0, stdout
    folder = tmp_path / "o" / os.path.basename(json.loads(stdout)["dir"])
    record = json.loads((folder / "record.json").read_text())
    if argv[0] == "flatness":
        assert record["results"]["flatness"] == 0.5


# ----------------------------------------------------------------- records


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "a" / "b.txt"
    atomic_write(target, "hello")
    atomic_write(target, b"bytes")
    assert target.read_bytes() == b"bytes"
    assert sorted(p.name for p in target.parent.iterdir()) == ["b.txt"]


def test_incomplete_directory_is_not_a_cache_hit(tmp_path):
    cfg = resolve("wave", WAVE_SMALL)
    rec = ExperimentRecord("wave", cfg, tables={"energy.csv": "t,energy\n"})
    d = save_record(rec, tmp_path)
    (d / "energy.csv").unlink()
    assert load_record(tmp_path, "wave", cfg) is None
    (d / "record.json").unlink()
    assert load_record(tmp_path, "wave", cfg) is None


def test_strip_columns():
    assert strip_columns("a,seconds,b\n1,0.3,2\n") == "a,b\n1,2\n"
    assert strip_columns("") == ""


def test_identical_runs_give_identical_bodies(tmp_path):
    cfg = resolve("pls_sweep", {**yaml.safe_load((cli.resources.files("plslab") / "configs" / "pls_sweep.yaml").read_text()), "R_list": [8.0, 16.0]})
    a = cli.run_command("pls_sweep", cfg, tmp_path / "a", echo=lambda *_: None)
    b = cli.run_command("pls_sweep", cfg, tmp_path / "b", echo=lambda *_: None)
    assert strip_columns(a.tables["sweep.csv"]) == strip_columns(b.tables["sweep.csv"])
    assert a.to_dict(timing=False) == b.to_dict(timing=False)
