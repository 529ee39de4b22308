import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skuqubo import cli
from skuqubo.cli import ConfigError, RunConfig, decode_rle, encode_rle, main, parse_config_text, resolve_config
from skuqubo.qubo_builder import hamiltonian, instance_from_features, Weights
from skuqubo.data_pipeline import read_features
from skuqubo.quantum_kernel import read_similarity_csv
from skuqubo.solvers.exhaustive import state_bits

TINY = """
# eight SKUs, two periods, three slack bits
sample = 8
periods = 2
slack_bits = 3
sku_target = 4
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.conf"
    path.write_text(TINY)
    return path


def run(*args):
    return main([str(a) for a in args])


@given(st.lists(st.integers(0, 1), max_size=200))
def test_rle_roundtrip(bits):
    text = encode_rle(bits)
    assert decode_rle(text).tolist() == bits


def test_rle_format():
    assert encode_rle([0] * 12 + [1] * 3) == "0*12,1*3"
    with pytest.raises(ValueError):
        decode_rle("2*3")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.conf"
    path.write_text("seed = 3  # trailing comment\nw_top5 = auto\nuse_pca = false\nreads=10\n")
    cfg = resolve_config(str(path), {"reads": "20"})
    assert (cfg.seed, cfg.reads, cfg.use_pca, cfg.w_top5) == (3, 20, False, None)
    assert cfg.weights == Weights()
    with pytest.raises(ConfigError):
        parse_config_text("colour = red")
    with pytest.raises(ConfigError):
        parse_config_text("seed: 3")
    with pytest.raises(ConfigError):
        resolve_config(None, {"solver": "magic"})


def test_header_round_trips_as_config():
    cfg = RunConfig(seed=4, w_top5=None, sweeps=30, variants="Full,NoTop5")
    text = "\n".join(cfg.header("x")[1:])
    assert resolve_config(None, {}).__class__(**parse_config_text(text)) == RunConfig(**{**cfg.__dict__, "out_dir": "out"})


def test_generate_exit_codes(tmp_path):
    assert run("generate", "--skus", 50, "--out-dir", tmp_path) == 2
    assert run("generate", "--reads", "many", "--out-dir", tmp_path) == 2
    assert run("generate", "--no-such-flag") == 2
    assert run("generate", "--out-dir", tmp_path) == 0
    rows = [ln for ln in (tmp_path / "catalog.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 501


def test_generate_is_byte_identical(tmp_path):
    assert run("generate", "--skus", 500, "--seed", 7, "--out-dir", tmp_path / "a") == 0
    assert run("--seed", 7, "generate", "--skus", 500, "--out-dir", tmp_path / "b") == 0
    assert (tmp_path / "a/catalog.csv").read_bytes() == (tmp_path / "b/catalog.csv").read_bytes()


def test_stage_exit_codes(tmp_path, tiny):
    assert run("features", "--out-dir", tmp_path) == 3
    assert run("pipeline", "--config", tiny, "--out-dir", tmp_path, "--solver", "exact") == 0
    (tmp_path / "similarity_quantum.csv").write_text("not,a,matrix\n")
    assert run("build", "--config", tiny, "--out-dir", tmp_path) == 4
    assert run("build", "--config", tiny, "--out-dir", tmp_path, "--w-capacity", "-1") == 2
    (tmp_path / "qubo.txt").write_text("garbage\n")
    assert run("solve", "--config", tiny, "--out-dir", tmp_path) == 5
    assert run("ablate", "--config", tiny, "--out-dir", tmp_path, "--solver", "ga") == 2


def test_pipeline_tiny_matches_brute_force(tmp_path, tiny):
    out = tmp_path / "o"
    assert run("pipeline", "--config", tiny, "--out-dir", out, "--solver", "exact") == 0
    for name in ("features.csv", "similarity_quantum.csv", "qubo.txt", "solution.json", "kpi.json",
                 "utilization.csv"):
        assert (out / name).exists(), name
    kpi = json.loads((out / "kpi.json").read_text())
    assert kpi["detail"]["capacity_violations"] == 0
    sol = json.loads((out / "solution.json").read_text())
    # oracle: enumerate the term-by-term objective independently of the QUBO file
    inst = instance_from_features(read_features(out / "features.csv"), read_similarity_csv(out / "similarity_quantum.csv"),
                                  periods=2, slack_bits=3, sku_target=4)
    h = hamiltonian(inst, state_bits(np.arange(2**22), 22))
    assert sol["best_energy_or_fitness"] == pytest.approx(h.min(), rel=1e-9)
    best = decode_rle(sol["best_bits"])
    assert hamiltonian(inst, best)[0] == pytest.approx(h.min(), rel=1e-9)


def test_sa_reads_and_similarity_switch(tmp_path, tiny):
    assert run("pipeline", "--config", tiny, "--out-dir", tmp_path, "--solver", "sa", "--reads", 500) == 0
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert len(sol["per_read_energies"]) == 500
    assert {"solver", "seed", "config", "best_energy_or_fitness", "best_bits", "per_read_energies"} <= set(sol)
    assert run("kernel", "--config", tiny, "--out-dir", tmp_path, "--similarity", "cosine") == 0
    q = np.loadtxt(tmp_path / "similarity_quantum.csv", delimiter=",", comments="#")
    c = np.loadtxt(tmp_path / "similarity_cosine.csv", delimiter=",", comments="#")
    assert q.shape == c.shape and not np.allclose(q, c)


@pytest.mark.parametrize("solver", ["pso", "ga", "aco", "sqa"])
def test_other_solvers(tmp_path, tiny, solver):
    assert run("pipeline", "--config", tiny, "--out-dir", tmp_path, "--solver", solver, "--reads", 20,
               "--iterations", 10) == 0
    kpi = json.loads((tmp_path / "kpi.json").read_text())
    assert kpi["solver"] == solver and kpi["detail"]["top5_present_all_periods"]


def test_ablate_rows(tmp_path, tiny):
    assert run("ablate", "--config", tiny, "--out-dir", tmp_path, "--variants", "Full,NoCapacity",
               "--repeats", 5, "--reads", 5) == 0
    rows = [ln for ln in (tmp_path / "ablation_summary.csv").read_text().splitlines() if not ln.startswith("#")]
    assert [r.split(",")[0] for r in rows[1:]] == ["Full", "NoCapacity"]
    assert run("ablate", "--config", tiny, "--out-dir", tmp_path, "--repeats", 2, "--reads", 3) == 0
    rows = [ln for ln in (tmp_path / "ablation_summary.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 1 + len(cli.VARIANTS)


def test_artifacts_embed_config(tmp_path, tiny):
    assert run("pipeline", "--config", tiny, "--out-dir", tmp_path, "--reads", 5) == 0
    for name in ("catalog.csv", "features.csv", "similarity_quantum.csv", "qubo.txt", "utilization.csv"):
        head = Path(tmp_path / name).read_text().splitlines()[:3]
        assert head[0].startswith("# skuqubo ") and head[1].startswith("# ") and " = " in head[1], name
    for name in ("solution.json", "kpi.json"):
        assert json.loads((tmp_path / name).read_text())["config"]["periods"] == 2
