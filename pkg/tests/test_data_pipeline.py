import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skuqubo.data_pipeline import (
    CATALOG_COLUMNS,
    RowError,
    SchemaError,
    SkuRecord,
    SynthesisSpec,
    engineer_features,
    generate_base_catalog,
    ingest_catalog,
    minmax_normalize,
    pca_input_matrix,
    pca_reduce,
    read_embedding,
    read_features,
    synthesize_catalog,
    unit_cost_ratio,
    write_catalog,
    write_embedding,
    write_features,
    zscore_normalize,
)


def rec(sku, **kw):
    base = dict(
        sku_id=sku, category="skincare", price=20.0, manufacturing_cost=5.0, shipping_cost=2.0, other_cost=1.0,
        units_sold=100, production_volume=200, inventory_level=50, lead_time=10, defect_rate=0.01,
        inspection="pass",
    )
    base.update(kw)
    return SkuRecord(**base)


HEADER = ",".join(CATALOG_COLUMNS)


def test_features_hand_computed():
    records = [
        rec("A", price=20.0, units_sold=100, production_volume=200, inventory_level=50, lead_time=10),
        rec("B", price=30.0, units_sold=300, production_volume=150, inventory_level=30, lead_time=20,
            inspection="fail", defect_rate=0.04),
        rec("C", price=8.0, units_sold=50, production_volume=50, inventory_level=100, lead_time=30),
        rec("D", price=12.0, units_sold=10, production_volume=20, inventory_level=5, lead_time=5),
    ]
    f = {x.sku_id: x for x in engineer_features(records)}
    assert f["A"].total_cost == 8.0
    assert f["A"].unit_margin == 12.0
    assert f["C"].unit_margin == 0.0
    assert f["B"].utilization == 2.0 and f["B"].overload == 1
    assert f["A"].overload == 0
    assert f["A"].inventory_risk == pytest.approx((50 - 100) / 100)
    assert f["C"].inventory_risk == pytest.approx(1.0)
    # 75th percentile of [10, 20, 30, 5] is 22.5 -> only C is flagged
    assert [f[k].lead_time_risk for k in "ABCD"] == [0, 0, 1, 0]
    assert f["B"].defect_risk == 0.04 and f["A"].defect_risk == 0.0
    # inventory risks: A -0.5, B -0.9, C 1.0, D -0.5
    inv = np.array([-0.5, -0.9, 1.0, -0.5])
    norm_inv = (inv + 0.9) / 1.9
    raw = (norm_inv + np.array([0, 1, 0, 0]) + np.array([0, 0, 1, 0])) / 3
    expected = (raw - raw.min()) / (raw.max() - raw.min())
    np.testing.assert_allclose([f[k].unified_risk for k in "ABCD"], expected, atol=1e-12)
    assert f["B"].norm_defect_risk == 1.0


def test_zero_sales_rows_are_excluded():
    feats = engineer_features([rec("A"), rec("Z", units_sold=0)])
    assert [x.sku_id for x in feats] == ["A"]
    with pytest.raises(ValueError):
        engineer_features([rec("Z", units_sold=0)])


def test_ingest_drops_incomplete_rows(tmp_path):
    path = tmp_path / "c.csv"
    good = "S1,skincare,10,2,1,1,5,10,3,4,0.01,Pass"
    missing = "S2,haircare,10,,1,1,5,10,3,4,0.01,pass"
    path.write_text(f"# comment\n{HEADER}\n{good}\n{missing}\n{good.replace('S1', 'S3')}\n")
    res = ingest_catalog(path)
    assert [r.sku_id for r in res.records] == ["S1", "S3"]
    assert res.dropped == 1
    assert res.records[0].inspection == "pass"


def test_ingest_schema_and_row_errors(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("sku,category\nS1,skincare\n")
    with pytest.raises(SchemaError):
        ingest_catalog(bad_header)
    bad_row = tmp_path / "r.csv"
    bad_row.write_text(f"{HEADER}\nS1,skincare,10,2,1,1,5,10,3,4,0.01,pass\nS2,skincare,ten,2,1,1,5,10,3,4,0.01,pass\n")
    with pytest.raises(RowError) as info:
        ingest_catalog(bad_row)
    assert info.value.line == 3


def test_catalog_roundtrip(tmp_path):
    records = generate_base_catalog(20, seed=3)
    path = tmp_path / "c.csv"
    write_catalog(records, path, ["seed = 3"])
    assert path.read_text().startswith("# seed = 3\n")
    assert ingest_catalog(path).records == records


def test_features_roundtrip(tmp_path):
    feats = engineer_features(generate_base_catalog(30, seed=1))
    path = tmp_path / "f.csv"
    write_features(feats, path)
    assert read_features(path) == feats


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e6, 1e6)))
def test_minmax_range(x):
    y = minmax_normalize(x)
    assert np.all((y >= 0) & (y <= 1))
    if np.ptp(x) > 0:
        assert y[np.argmin(x)] == 0.0 and y[np.argmax(x)] == 1.0
    else:
        assert np.all(y == 0)


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)))
def test_zscore_moments(x):
    z = zscore_normalize(x)
    if x.std() > 1e-6 * max(1.0, np.abs(x).max()):
        assert abs(z.mean()) < 1e-9
        assert z.std() == pytest.approx(1.0, rel=1e-9)


def test_constant_columns_map_to_zero():
    assert np.all(zscore_normalize([4.0, 4.0]) == 0)
    assert np.all(minmax_normalize([4.0, 4.0]) == 0)


def test_unit_cost_ratio_definitions():
    f = engineer_features([rec("A")])[0]
    assert unit_cost_ratio(f) == pytest.approx(12.0 / 8.0)
    assert unit_cost_ratio(f, "price_over_cost") == pytest.approx(20.0 / 8.0)
    with pytest.raises(ValueError):
        unit_cost_ratio(f, "bogus")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pca_matches_svd(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(30, 5)) @ rng.normal(size=(5, 5))
    emb = pca_reduce(x, 3)
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    np.testing.assert_allclose(emb.explained_variance, s[:3] ** 2 / 30, rtol=1e-8)
    # same subspace, deterministic sign: largest-magnitude loading positive
    for k in range(3):
        v = vt[k] * np.sign(vt[k][np.argmax(np.abs(vt[k]))])
        np.testing.assert_allclose(emb.components[k], v, atol=1e-6)
    np.testing.assert_allclose(emb.values, centered @ emb.components.T, atol=1e-9)


def test_pca_full_rank_preserves_distances():
    x = np.random.default_rng(0).normal(size=(12, 5))
    emb = pca_reduce(x, 5)
    d0 = np.linalg.norm(x[:, None] - x[None], axis=-1)
    d1 = np.linalg.norm(emb.values[:, None] - emb.values[None], axis=-1)
    np.testing.assert_allclose(d0, d1, atol=1e-10)


def test_pca_rejects_bad_dims():
    with pytest.raises(ValueError):
        pca_reduce(np.zeros((10, 3)), 4)
    with pytest.raises(ValueError):
        pca_reduce(np.zeros((2, 5)), 3)


def test_embedding_roundtrip(tmp_path):
    x = np.random.default_rng(1).normal(size=(6, 5))
    write_embedding(x, tmp_path / "e.csv", ["h"])
    np.testing.assert_array_equal(read_embedding(tmp_path / "e.csv"), x)


def test_pca_input_matrix_is_zscored():
    z = pca_input_matrix(engineer_features(generate_base_catalog(50, seed=2)))
    assert z.shape == (50, 5)
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-12)


def test_base_catalog_ranges():
    cat = generate_base_catalog(100, seed=0)
    assert len({r.sku_id for r in cat}) == 100
    assert Counter(r.category for r in cat) == {"skincare": 38, "haircare": 32, "cosmetics": 30}
    assert all(1 <= r.lead_time <= 30 and 1 <= r.inventory_level <= 100 for r in cat)
    assert all(0.0002 <= r.defect_rate <= 0.0494 for r in cat)


def test_synthesis_counts_and_determinism():
    base = generate_base_catalog(100, seed=4)
    spec = SynthesisSpec(target_count=500, seed=4)
    a = synthesize_catalog(base, spec)
    assert a == synthesize_catalog(base, spec)
    assert len(a) == 500 and a[:100] == base
    assert len({r.sku_id for r in a}) == 500
    counts = Counter(r.category for r in a)
    assert counts == {"skincare": 190, "haircare": 160, "cosmetics": 150}
    assert a != synthesize_catalog(base, SynthesisSpec(target_count=500, seed=5))


def test_synthesis_jitter_stays_in_range():
    base = generate_base_catalog(100, seed=0)
    out = synthesize_catalog(base, SynthesisSpec(target_count=400, seed=0, jitter_sigma=0.5))
    assert all(1 <= r.lead_time <= 30 and 0.0002 <= r.defect_rate <= 0.0494 for r in out)
    assert all(r.units_sold >= 1 and r.production_volume >= 1 for r in out)
    assert all(type(r.price) is float for r in out)


def test_synthesis_rejects_target_below_base():
    with pytest.raises(ValueError):
        synthesize_catalog(generate_base_catalog(100), SynthesisSpec(target_count=50))


def test_synthesis_spec_validation():
    with pytest.raises(ValueError):
        SynthesisSpec(category_mix=(("skincare", 0.5), ("haircare", 0.4)))
    with pytest.raises(ValueError):
        SynthesisSpec(category_mix=(("shoes", 1.0),))
    assert math.isclose(sum(w for _, w in SynthesisSpec().category_mix), 1.0)
