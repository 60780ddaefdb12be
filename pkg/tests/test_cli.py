import json
import os
from pathlib import Path

import pytest

from bgkness.cli import ConfigError, load_config, main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[params]
alpha = 0.05
kappa = 1.0

[tau]
kind = "cosine"
tau0 = 5.0
amplitude = 0.5

[grid]
nx = 16
nv = 32
"""


def write_cfg(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def read_records(out_dir):
    with open(os.path.join(out_dir, "records.ndjson")) as fh:
        return [json.loads(line) for line in fh]


def test_shipped_configs_are_valid():
    for name in ("regime.toml", "equilibrium.toml"):
        cfg = load_config(str(CONFIG_DIR / name))
        assert cfg["gap"]["method"] == "dense"  # defaults filled in
    cfg = load_config(str(CONFIG_DIR / "regime.toml"))
    assert cfg["params"]["alpha"] == 0.05
    assert cfg["tau"]["kind"] == "cosine"


def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[fixed_point]\ntoll = 1e-10\n")
    assert main(["ness", "--config", path, "--out", str(tmp_path / "o")]) == 3
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[solver]\nx = 1\n")
    assert main(["ness", "--config", path, "--out", str(tmp_path / "o")]) == 3


def test_bad_type_rejected(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[gap]\nmethod = 7\n")
    assert main(["ness", "--config", path, "--out", str(tmp_path / "o")]) == 3


def test_missing_config_exits_3(tmp_path):
    missing = str(tmp_path / "nope.toml")
    assert main(["ness", "--config", missing, "--out", str(tmp_path / "o")]) == 3


def test_nonconvergence_exits_2(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[fixed_point]\nmax_iter = 2\n")
    assert main(["ness", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_bad_gap_method_exits_3(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[gap]\nmethod = \"qr\"\n")
    assert main(["gap", "--config", path, "--out", str(tmp_path / "o")]) == 3


def test_ness_outputs(tmp_path):
    path = write_cfg(tmp_path, SMALL)
    out = str(tmp_path / "out")
    assert main(["ness", "--config", path, "--out", out]) == 0
    for name in ("records.ndjson", "meta.json", "profiles.csv"):
        assert os.path.exists(os.path.join(out, name))
    recs = read_records(out)
    kinds = [r["kind"] for r in recs]
    assert kinds[-1] == "manifest"
    assert "ness" in kinds
    ness = next(r for r in recs if r["kind"] == "ness")
    assert ness["grid"]["vmax"] > 0.0  # sentinel resolved before writing
    assert len(ness["config_hash"]) == 12
    manifest = recs[-1]
    assert "profiles.csv" in manifest["files"]


def test_records_byte_deterministic(tmp_path):
    path = write_cfg(tmp_path, SMALL)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["ness", "--config", path, "--out", out1]) == 0
    assert main(["ness", "--config", path, "--out", out2]) == 0
    for name in ("records.ndjson", "profiles.csv"):
        b1 = Path(out1, name).read_bytes()
        b2 = Path(out2, name).read_bytes()
        assert b1 == b2


SIM = SMALL + """
[sim]
n_particles = 2000
t_end = 0.5
observe_dt = 0.25
cells = 8
"""


def test_seed_flag_beats_env(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, SIM)
    out = str(tmp_path / "s1")
    monkeypatch.setenv("BGKNESS_SEED", "777")
    assert main(["simulate", "--config", path, "--out", out,
                 "--seed", "4242"]) == 0
    rec = next(r for r in read_records(out) if r["kind"] == "simulate")
    assert rec["seed"] == 4242


def test_seed_env_beats_config(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, SIM)
    out = str(tmp_path / "s2")
    monkeypatch.setenv("BGKNESS_SEED", "777")
    assert main(["simulate", "--config", path, "--out", out]) == 0
    rec = next(r for r in read_records(out) if r["kind"] == "simulate")
    assert rec["seed"] == 777
    assert os.path.exists(os.path.join(out, "moments.csv"))


def test_bad_seed_env_exits_3(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, SIM)
    monkeypatch.setenv("BGKNESS_SEED", "not-a-number")
    assert main(["simulate", "--config", path,
                 "--out", str(tmp_path / "s3")]) == 3


def test_out_env_fallback(tmp_path, monkeypatch):
    path = write_cfg(tmp_path, SMALL)
    out = str(tmp_path / "env_out")
    monkeypatch.setenv("BGKNESS_OUT", out)
    assert main(["ness", "--config", path]) == 0
    assert os.path.exists(os.path.join(out, "records.ndjson"))


GAP_EVOLVE = SMALL + """
[gap]
method = "evolve"
eps_entropy = 0.25
t_end = 4.0
dt = 0.01
sample_every = 10
"""


def test_gap_evolve_writes_decay(tmp_path):
    path = write_cfg(tmp_path, GAP_EVOLVE)
    out = str(tmp_path / "gap")
    assert main(["gap", "--config", path, "--out", out]) == 0
    decay = Path(out, "decay.csv").read_text().splitlines()
    assert decay[0] == "t,norm"
    assert len(decay) > 10
    rec = next(r for r in read_records(out) if r["kind"] == "gap")
    assert rec["method"] == "evolve"
    assert rec["eps_entropy"] == 0.25
    assert "entropy_scan" not in rec
    assert rec["decay_rate"] > 0.0


def test_lipschitz_cmd(tmp_path):
    path = write_cfg(tmp_path, SMALL + "\n[lipschitz]\nn_pairs = 3\n")
    out = str(tmp_path / "lip")
    assert main(["lipschitz", "--config", path, "--out", out]) == 0
    rec = next(r for r in read_records(out) if r["kind"] == "lipschitz")
    assert rec["max_ratio"] < 1.0
    assert os.path.exists(os.path.join(out, "lipschitz.csv"))
