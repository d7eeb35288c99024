import csv
import json

import pytest

from ceeat.cli import ConfigError, SCHEMAS, main, validate_config


def test_defaults_fill_every_key():
    for kind, schema in SCHEMAS.items():
        cfg = validate_config(f"[experiment]\nkind = {kind}\n")
        assert set(cfg.params) == set(schema)
        assert cfg.seed == 0 and cfg.workers == 1


def test_negative_correlation_time_is_a_range_error():
    text = "[experiment]\nkind = noise-sweep\n[params]\ntau_c = -1\n"
    with pytest.raises(ConfigError, match="range-error: tau_c"):
        validate_config(text)


def test_unknown_key_names_line_and_valid_keys():
    text = "[experiment]\nkind = anharmonic\n[params]\nfoo = 3\n"
    with pytest.raises(ConfigError) as exc:
        validate_config(text)
    msg = str(exc.value)
    assert msg.startswith("parse-error")
    assert "'foo'" in msg and "line 4" in msg and "u_grid" in msg


def test_output_directory_from_environment(monkeypatch):
    monkeypatch.setenv("CEEAT_OUT", "/tmp/somewhere")
    assert validate_config("", "table1").out_dir == "/tmp/somewhere"


def test_exit_code_for_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[params]\nn_sites = 0\n")
    assert main(["ladder", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "range-error" in capsys.readouterr().err


def test_example_run_and_manifest(tmp_path):
    out = tmp_path / "ex"
    assert main(["example4site", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "example4site.csv").open()))[1:]
    assert [float(r[1]) for r in rows[1:]] == [4.0, 6.0, 0.0]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert set(manifest["checksums"]) == {"example4site.csv"}
    assert manifest["config"]["kind"] == "example4site"


def test_ladder_run(tmp_path):
    cfg = tmp_path / "l.ini"
    cfg.write_text("[params]\nn_sites = 4\nn_steps = 200\n")
    assert main(["ladder", "--config", str(cfg), "--out", str(tmp_path / "l")]) == 0
    assert len(list((tmp_path / "l").glob("ladder_spin_N4_m0_*.csv"))) == 4


def _noise_config(tmp_path):
    cfg = tmp_path / "n.ini"
    cfg.write_text(
        "[params]\nv_grid = 0, 10\nnoise_grid = 0.5, 5\nn_traj = 6\nt_final = 0.3\n"
    )
    return cfg


def _data_files(out):
    return {p.name: p.read_bytes() for p in out.iterdir() if p.name != "run_manifest.json"}


def test_outputs_are_identical_across_reruns_and_workers(tmp_path):
    cfg = _noise_config(tmp_path)
    runs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        assert main(["noise-sweep", "--config", str(cfg), "--seed", "9",
                     "--workers", workers, "--out", str(out)]) == 0
        runs.append(_data_files(out))
    assert runs[0] == runs[1] == runs[2]
    assert set(runs[0]) == {"noise_sweep.csv", "noise_sweep.json"}


def test_seed_changes_noise_output(tmp_path):
    cfg = _noise_config(tmp_path)
    main(["noise-sweep", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "x")])
    main(["noise-sweep", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "y")])
    assert _data_files(tmp_path / "x") != _data_files(tmp_path / "y")
