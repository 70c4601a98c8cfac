import csv
import json

import pytest
import yaml

from droplet_inverse import cli
from droplet_inverse.config import ConfigError, ExperimentConfig

SMALL = {
    "spectra": {"a_list": [0.125]},
    "forward": {"N": 6, "a_list": [0.125], "P_list": [4.0], "n_pairs": 2},
    "converge": {"N": 6, "a_list": [0.25, 0.125], "n_pairs": 2},
    "linearize": {"N": 6, "P_list": [4.0, 8.0]},
}


def _write_cfg(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_positive_detuning_rejected():
    with pytest.raises(ConfigError, match="must be negative"):
        ExperimentConfig.from_dict({"experiment": "spectra", "c_n0": 1.0})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"experiment": "spectra", "typo": 1})


@pytest.mark.parametrize(
    "bad",
    [{"experiment": "nope"}, {"experiment": "spectra", "h": 1.0}, {"experiment": "spectra", "N": 1},
     {"experiment": "spectra", "a_list": [0.0]}, {"experiment": "spectra", "mode": "x"},
     {"experiment": "spectra", "medium": {"kind": "weird"}}, {}],
)
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_digest_stable_and_sensitive():
    a = ExperimentConfig.from_dict({"experiment": "spectra"})
    b = ExperimentConfig.from_dict({"experiment": "spectra"})
    c = ExperimentConfig.from_dict({"experiment": "spectra", "h": 0.5})
    assert a.digest() == b.digest() != c.digest()


def test_yaml_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "linearize", "P_list": [4.0, 8.0]})
    again = ExperimentConfig.from_yaml(_write_cfg(tmp_path, cfg.to_dict()))
    assert again.digest() == cfg.digest()


def test_format_value():
    assert cli.format_value(True) == "true"
    assert cli.format_value(3) == "3"
    assert cli.format_value(0.1 + 0.2) == "0.3"


def test_empty_table_is_header_only(tmp_path):
    p = cli.write_table(tmp_path / "t.csv", [], "abc", ["a", "quantity", "value"])
    assert p.read_bytes() == b"a,quantity,value,config_hash\r\n"


def test_plotdata_sorted_long_format(tmp_path):
    rows = [{"a": 0.5, "quantity": "z", "value": 1.0}, {"a": 0.25, "quantity": "y", "value": 2.0},
            {"a": 0.25, "quantity": "b", "value": 3.0}]
    out = _read_csv(cli.emit_plotdata(rows, tmp_path / "p.csv", "a", "h1"))
    assert out[0] == ["a", "quantity", "value", "config_hash"]
    assert [r[:2] for r in out[1:]] == [["0.25", "b"], ["0.25", "y"], ["0.5", "z"]]
    assert all(r[3] == "h1" for r in out[1:])


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_cli_runs_and_is_deterministic(tmp_path, exp):
    cfg = _write_cfg(tmp_path, {"experiment": exp, **SMALL[exp]})
    outs = []
    for run in ("r1", "r2"):
        assert cli.main([exp, "--config", str(cfg), "--out", str(tmp_path / run), "--no-cache"]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / run).glob("*")) if p.is_file()})
    assert outs[0] == outs[1]
    manifest = json.loads(outs[0][f"{exp}_manifest.json"])
    h = manifest["config_hash"]
    assert manifest["status"] == "ok" and set(manifest["files"]) <= set(outs[0])
    for name in manifest["files"]:
        if name.endswith(".csv"):
            rows = _read_csv(tmp_path / "r1" / name)
            assert rows[0][-1] == "config_hash"
            assert all(r[-1] == h for r in rows[1:])


def test_converge_without_droplets_is_zero(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "converge", "droplets": False, **SMALL["converge"]})
    cli.run(cfg, tmp_path, use_cache=False)
    rows = _read_csv(tmp_path / "converge_converge.csv")
    diffs = [float(r[2]) for r in rows[1:] if r[1].endswith("lambdaD_minus_lambda0")]
    assert diffs and all(d == 0.0 for d in diffs)


def test_cache_reused(tmp_path):
    cfg = _write_cfg(tmp_path, {"experiment": "spectra", **SMALL["spectra"]})
    assert cli.main(["spectra", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert list((tmp_path / "o" / "cache").glob("spectrum-*.npz"))


def test_exit_code_config_error(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"experiment": "spectra", "c_n0": 1.0})
    assert cli.main(["spectra", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "negative" in capsys.readouterr().err


def test_exit_code_mismatch_and_missing(tmp_path):
    cfg = _write_cfg(tmp_path, {"experiment": "linearize"})
    assert cli.main(["spectra", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert cli.main(["spectra", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["spectra", "--threads", "0", "--out", str(tmp_path)]) == 2


def test_exit_code_solver_failure(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("diverged")

    monkeypatch.setitem(cli.RUNNERS, "spectra", boom)
    assert cli.main(["spectra", "--out", str(tmp_path)]) == 1
    assert "diverged" in capsys.readouterr().err


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = _write_cfg(tmp_path, {"experiment": "spectra", **SMALL["spectra"]})
    assert cli.main(["spectra", "--config", str(cfg), "--no-cache"]) == 0
    assert (tmp_path / "env" / "spectra_manifest.json").exists()


def test_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)


@pytest.mark.slow
def test_reconstruct_cli(tmp_path):
    cfg = _write_cfg(tmp_path, {"experiment": "reconstruct", "L": 1, "P_list": [2.0, 4.0]})
    assert cli.main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path), "--threads", "2"]) == 0
    summary = json.loads((tmp_path / "reconstruct_summary.json").read_text())
    assert summary["error_slope"] < 0
    assert (tmp_path / "reconstruct_coefficients.json").exists()
    assert len(_read_csv(tmp_path / "reconstruct_slice_P4.csv")) == 1 + 17 * 17
