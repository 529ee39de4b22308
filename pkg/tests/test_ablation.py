import json

import numpy as np
import pytest
from conftest import random_instance

from skuqubo.ablation import VARIANTS, run_ablation, write_cells_json, write_summary_csv
from skuqubo.solvers import AnnealConfig
from skuqubo.solvers.anneal import solve_sa


@pytest.fixture
def inst():
    return random_instance(3, n=6, periods=2, slack_bits=3)


def test_variant_table_is_complete():
    assert list(VARIANTS) == ["Full", "NoCapacity", "NoSimilarity", "NoMarginWeight", "NoLegacyInvRisk",
                              "NoSkuLimit", "NoTop5", "NoPCA"]


def test_each_variant_zeroes_its_terms(inst):
    seen = []

    def spy(model, config):
        seen.append(model)
        return solve_sa(model, config)

    summary = run_ablation(inst, np.zeros(6), variants=["Full", "NoCapacity"], repeats=2,
                           anneal=AnnealConfig(num_reads=4), solve=spy)
    assert summary.variants == ["Full", "NoCapacity"]
    assert len(summary.cells) == 4 and all(c.error is None for c in summary.cells)
    assert [c.seed for c in summary.cells] == [0, 1, 0, 1]
    n = inst.n_skus
    # calls run variant-major: Full r0, Full r1, NoCapacity r0, ...
    assert np.isin(seen[0].cols % inst.block, range(n, inst.block)).any()
    assert not np.isin(seen[2].cols % inst.block, range(n, inst.block)).any()


def test_summary_statistics_use_sample_std(inst):
    summary = run_ablation(inst, np.zeros(6), variants=["Full"], repeats=3, anneal=AnnealConfig(num_reads=3))
    profits = [c.report.net_profit for c in summary.cells]
    assert summary.mean["Full"]["total_profit"] == pytest.approx(np.mean(profits))
    assert summary.std["Full"]["total_profit"] == pytest.approx(np.std(profits, ddof=1))


def test_failed_cells_are_recorded(inst):
    calls = []

    def flaky(model, config):
        calls.append(config.seed)
        if config.seed == 1:
            raise RuntimeError("boom")
        return solve_sa(model, config)

    summary = run_ablation(inst, np.zeros(6), variants=["Full"], repeats=3, anneal=AnnealConfig(num_reads=2),
                           solve=flaky)
    errors = [c for c in summary.cells if c.error]
    assert len(errors) == 1 and "boom" in errors[0].error
    assert not np.isnan(summary.mean["Full"]["total_profit"])


def test_argument_checks(inst):
    with pytest.raises(ValueError):
        run_ablation(inst, np.zeros(6), repeats=1)
    with pytest.raises(ValueError):
        run_ablation(inst, np.zeros(6), variants=["Bogus"])
    with pytest.raises(ValueError):
        run_ablation(inst, np.zeros(6), variants=["NoPCA"])


def test_nopca_uses_supplied_similarity(inst):
    alt = np.eye(6)
    summary = run_ablation(inst, np.zeros(6), variants=["NoPCA"], repeats=2, anneal=AnnealConfig(num_reads=2),
                           no_pca_similarity=alt)
    # zero off-diagonal similarity makes every redundancy term vanish
    assert all(c.report.redundancy_score == 0.0 for c in summary.cells)


def test_writers(tmp_path, inst):
    summary = run_ablation(inst, np.zeros(6), variants=["Full", "NoTop5"], repeats=2,
                           anneal=AnnealConfig(num_reads=2))
    write_summary_csv(summary, tmp_path / "s.csv", ["seed = 0"])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# seed = 0"
    assert lines[1].startswith("Experiment,total_profit_mean,total_profit_std")
    assert [ln.split(",")[0] for ln in lines[2:]] == ["Full", "NoTop5"]
    write_cells_json(summary, tmp_path / "c.json", {"config": {"seed": 0}})
    data = json.loads((tmp_path / "c.json").read_text())
    assert len(data["cells"]) == 4 and data["config"] == {"seed": 0}
