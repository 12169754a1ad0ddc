import bisect
import math
from collections import Counter

import numpy as np
import pytest

from conftest import MI_TOP10
from diseasefocus.categories import default_category_table
from diseasefocus.errors import ConstantFeatureWarning, ParseError, SingleClassInput
from diseasefocus.mutinfo import (
    FeatureMatrix,
    equal_frequency_bins,
    load_region_overrides,
    mutual_information,
    names_df_score,
    rank_features,
    read_feature_csv,
    region_of_feature,
)

CATS = default_category_table()


def oracle_mi(x, y, bins):
    """Plug-in MI in bits from Counter histograms; bins from counts of strictly smaller values."""
    xs = sorted(x)
    n = len(x)
    b = [bins * bisect.bisect_left(xs, v) // n for v in x]
    joint = Counter(zip(b, y))
    cb, cy = Counter(b), Counter(y)
    return sum(c / n * math.log2((c / n) / ((cb[i] / n) * (cy[j] / n))) for (i, j), c in joint.items())


def test_matches_counter_oracle(rng):
    for bins in (2, 5, 10):
        x = rng.normal(size=500)
        x[::7] = 0.0  # ties
        y = (x + rng.normal(size=500) > 0).astype(int)
        assert mutual_information(x, y, bins) == pytest.approx(oracle_mi(list(x), list(y), bins), abs=1e-12)


def test_bins_equal_frequency():
    b = equal_frequency_bins(np.arange(100.0), 10)
    assert np.array_equal(np.bincount(b), [10] * 10)


def test_ties_share_a_bin():
    b = equal_frequency_bins(np.array([1.0, 1.0, 1.0, 2.0, 3.0, 4.0]), 3)
    assert b[0] == b[1] == b[2]


def test_independent_feature_small():
    rng = np.random.default_rng(11)
    x = rng.normal(size=10_000)
    y = rng.integers(0, 2, size=10_000)
    assert mutual_information(x, y, 10) < 0.02


def test_feature_equals_label_one_bit():
    y = np.array([0, 1] * 500)
    assert abs(mutual_information(y.astype(float), y, 10) - 1.0) <= 1e-9


def test_constant_feature():
    with pytest.warns(ConstantFeatureWarning):
        assert mutual_information(np.ones(10), np.array([0, 1] * 5)) == 0.0


def test_preconditions():
    with pytest.raises(SingleClassInput):
        mutual_information(np.arange(4.0), np.zeros(4))
    with pytest.raises(ValueError):
        mutual_information(np.arange(4.0), np.array([0, 1, 0, 1]), bins=1)


def test_bounds(rng):
    for _ in range(20):
        n = int(rng.integers(5, 200))
        y = rng.integers(0, 2, size=n)
        y[:2] = [0, 1]
        x = rng.normal(size=n) + y * rng.uniform(0, 3)
        p = y.mean()
        h = -(p * math.log2(p) + (1 - p) * math.log2(1 - p))
        mi = mutual_information(x, y, int(rng.integers(2, 12)))
        assert 0.0 <= mi <= h


def test_monotone_transform_invariance(rng):
    x = rng.uniform(0.1, 5, size=400)
    y = (x + rng.normal(size=400) > 2.5).astype(int)
    base = mutual_information(x, y)
    for f in (np.log, np.exp, lambda v: v**3 + 1):
        assert mutual_information(f(x), y) == base


def test_permutation_null():
    rng = np.random.default_rng(5)
    n = 10_000
    y = rng.integers(0, 2, size=n)
    x = y + rng.normal(size=n)
    assert mutual_information(x, y) > 0.1
    vals = [mutual_information(x, rng.permutation(y)) for _ in range(20)]
    assert np.mean(vals) < 0.02


def test_region_of_feature():
    assert region_of_feature("Left-Hippocampus_Volume_mm3") == "Left-Hippocampus"
    assert region_of_feature("Left-Lateral-Ventricle_normStdDev") == "Left-Lateral-Ventricle"
    assert region_of_feature("Left-Amygdala_NVoxels") == "Left-Amygdala"
    assert region_of_feature("EstimatedTotalIntraCranialVol") == "EstimatedTotalIntraCranialVol"
    assert region_of_feature("eTIV", {"eTIV": "Brain"}) == "Brain"


def test_published_feature_names_score_two():
    assert names_df_score(MI_TOP10, CATS) == 2.0


def test_dependent_features_rank_first():
    rng = np.random.default_rng(9)
    n = 2000
    y = rng.integers(0, 2, size=n)
    cols, names = [], []
    for j in range(12):
        names.append(f"noise{j:02d}_Volume_mm3")
        cols.append(rng.normal(size=n))
    for name, strength in (("Left-Hippocampus_Volume_mm3", 2.0), ("Left-Amygdala_NVoxels", 1.5),
                           ("ctx-lh-entorhinal_normMean", 1.0)):
        names.append(name)
        cols.append(strength * y + rng.normal(size=n))
    m = FeatureMatrix(tuple(names), np.column_stack(cols), y)
    r = rank_features(m, CATS, k=3)
    assert {f.name for f in r.features} == set(names[-3:])
    assert r.df_score == 2.0
    assert [f.rank for f in r.features] == [1, 2, 3]
    assert all(a.mi_bits >= b.mi_bits for a, b in zip(r.features, r.features[1:]))


def test_rank_k_zero_is_error(rng):
    m = FeatureMatrix(("a",), rng.normal(size=(4, 1)), np.array([0, 1, 0, 1]))
    with pytest.raises(ValueError):
        rank_features(m, CATS, k=0)


def test_constant_column_recorded_not_fatal(rng):
    y = np.array([0, 1] * 10)
    m = FeatureMatrix(("const", "x"), np.column_stack([np.ones(20), y + rng.normal(size=20) * 0.1]), y)
    r = rank_features(m, CATS, k=2)
    assert "const" in r.failures
    assert r.features[-1].name == "const" and r.features[-1].mi_bits == 0.0


def test_name_tie_break():
    y = np.array([0, 1] * 10)
    x = y.astype(float)
    m = FeatureMatrix(("b", "a"), np.column_stack([x, x]), y)
    assert [f.name for f in rank_features(m, CATS, k=2).features] == ["a", "b"]


def test_read_feature_csv(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("subject_id,Left-Hippocampus_Volume_mm3,label\ns1,3.5,1\ns2,4.0,0\n")
    m = read_feature_csv(p)
    assert m.names == ("Left-Hippocampus_Volume_mm3",)
    assert m.rows.tolist() == [[3.5], [4.0]]
    assert m.labels.tolist() == [1, 0]


@pytest.mark.parametrize(
    "text,line",
    [
        ("a,b\n1,2\n", 1),
        ("a,label\n1,0\n2\n", 3),
        ("a,label\n1,0\nx,1\n", 3),
        ("a,label\n1,0\n2,yes\n", 3),
        ("a,label\n1,0\ninf,1\n", 3),
    ],
)
def test_read_feature_csv_errors(tmp_path, text, line):
    p = tmp_path / "f.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as err:
        read_feature_csv(p)
    assert err.value.line == line


def test_region_overrides(tmp_path):
    p = tmp_path / "o.tsv"
    p.write_text("# feature\tregion\neTIV\tBrain\n")
    assert load_region_overrides(p) == {"eTIV": "Brain"}
