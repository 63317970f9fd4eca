import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vscreen.errors import ConfigError
from vscreen.ml import build_features, default_recipe, load_recipe, save_recipe
from vscreen.ml.features import FeatureDef, FeatureRecipe


def slog(x):
    return math.copysign(math.log1p(abs(x)), x)


# Hand-derived values for the three-ligand fixture (rows A, B, C).
# Oriented scores: autodock 9/7/8, diffdock 0.5/1.0/missing (imputed 0.5).
# Percentiles (rank-1)/2 per scorer, order ad, dd, gad, gdd, nad, ndd:
#   A: 0, .5, 0, .5, .5, 1   B: 1, 0, 1, 1, 1, 0   C: .5, 1, .5, 0, 0, .5
# CC-Medium/autodock keeps A (1.25), C (1.75); B excluded -> A 0, C .5, B 1.
# CC-Medium/diffdock keeps C; excluded B (2.0) then A (2.25) -> C 0, B .5, A 1.
# Global keeps A and C, tied at 14/8, id breaks the tie -> A 0, C .5, B 1.
EXPECTED = {
    "score_autodock": (9.0, 7.0, 8.0),
    "score_diffdock": (0.5, 1.0, 0.5),
    "score_gnina_ad": (0.8, 0.2, 0.5),
    "score_gnina_dd": (0.4, 0.05, 0.7),
    "score_nmdn_ad": (100.0, -1000.0, 200.0),
    "score_nmdn_dd": (-900.0, 500.0, -100.0),
    "pct_autodock": (0.0, 1.0, 0.5),
    "pct_diffdock": (0.5, 0.0, 1.0),
    "pct_gnina_ad": (0.0, 1.0, 0.5),
    "pct_gnina_dd": (0.5, 1.0, 0.0),
    "pct_nmdn_ad": (0.5, 1.0, 0.0),
    "pct_nmdn_dd": (1.0, 0.0, 0.5),
    "cc_medium_pct_autodock": (0.0, 1.0, 0.5),
    "cc_medium_pct_diffdock": (1.0, 0.5, 0.0),
    "cc_medium_pct_global": (0.0, 1.0, 0.5),
    "pct_mean": (5 / 12, 2 / 3, 5 / 12),
    "pct_std": (math.sqrt(17) / 12, math.sqrt(2) / 3, math.sqrt(17) / 12),
    "slog_autodock": (math.log(10), math.log(8), math.log(9)),
    "slog_diffdock": (math.log(1.5), math.log(2.0), math.log(1.5)),
    "slog_gnina_ad": (math.log(1.8), math.log(1.2), math.log(1.5)),
    "slog_gnina_dd": (math.log(1.4), math.log(1.05), math.log(1.7)),
    "slog_nmdn_ad": (math.log(101), -math.log(1001), math.log(201)),
    "slog_nmdn_dd": (-math.log(901), math.log(501), -math.log(101)),
    "sq_autodock": (81.0, 49.0, 64.0),
    "sq_diffdock": (0.25, 1.0, 0.25),
    "sq_gnina_ad": (0.64, 0.04, 0.25),
    "sq_gnina_dd": (0.16, 0.0025, 0.49),
    "sq_nmdn_ad": (1e4, 1e6, 4e4),
    "sq_nmdn_dd": (810000.0, 250000.0, 1e4),
    "prod_gnina_ad_gnina_dd": (0.32, 0.01, 0.35),
    "prod_gnina_ad_nmdn_ad": (80.0, -200.0, 100.0),
    "prod_gnina_ad_nmdn_dd": (-720.0, 100.0, -50.0),
    "prod_gnina_dd_nmdn_ad": (40.0, -50.0, 140.0),
    "prod_gnina_dd_nmdn_dd": (-360.0, 25.0, -70.0),
    "prod_nmdn_ad_nmdn_dd": (-90000.0, -500000.0, -20000.0),
    "pctdiff_gnina": (-0.5, 0.0, 0.5),
    "pctdiff_nmdn": (-0.5, 1.0, -0.5),
    "pctdiff_baseline": (-0.5, 1.0, -0.5),
    "pct_min": (0.0, 0.0, 0.0),
    "pct_max": (1.0, 1.0, 1.0),
    "pct_median": (0.5, 1.0, 0.5),
    "pct_range": (1.0, 1.0, 1.0),
}


def test_default_recipe_shape():
    r = default_recipe()
    assert r.n_primary == 17 and r.n_total == 42
    assert len(set(r.names)) == 42
    assert set(r.names) == set(EXPECTED)


def test_hand_computed_table(tiny_oriented):
    fm = build_features(tiny_oriented)
    assert fm.names == default_recipe().names
    assert fm.values.shape == (3, 42)
    for j, name in enumerate(fm.names):
        np.testing.assert_allclose(fm.values[:, j], EXPECTED[name], rtol=0, atol=1e-9, err_msg=name)
    assert fm.missing_counts.tolist() == [0, 0, 1]


def test_requires_oriented(tiny):
    with pytest.raises(ConfigError):
        build_features(tiny)


def test_recipe_round_trip_and_subset(tmp_path, tiny_oriented):
    p = tmp_path / "recipe.yaml"
    save_recipe(default_recipe(), p)
    assert load_recipe(p) == default_recipe()
    small = FeatureRecipe((FeatureDef("g", "score", ("gnina_ad",)),
                           FeatureDef("gp", "pct", ("gnina_ad",))), 2)
    fm = build_features(tiny_oriented, recipe=small)
    np.testing.assert_array_equal(fm.values, [[0.8, 0.0], [0.2, 1.0], [0.5, 0.5]])


def test_bad_recipe(tmp_path, tiny_oriented):
    bad = FeatureRecipe((FeatureDef("v", "score", ("vina",)),), 1)
    with pytest.raises(ConfigError):
        build_features(tiny_oriented, recipe=bad)
    with pytest.raises(ConfigError):
        FeatureRecipe((FeatureDef("x", "cube", ("gnina_ad",)),), 1)
    p = tmp_path / "r.yaml"
    p.write_text("version: 99\nn_primary: 0\nfeatures: []\n")
    with pytest.raises(ConfigError):
        load_recipe(p)


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_features_finite_and_row_local(seed):
    from vscreen import SyntheticSpec, generate_synthetic, orient_scores

    ds = orient_scores(generate_synthetic(SyntheticSpec(3, 27, {"gnina_ad": 1.0},
                                                        missing_rate=0.2, seed=seed)))
    fm = build_features(ds)
    assert np.isfinite(fm.values).all()
    pct = fm.values[:, 6:12]
    assert ((pct >= 0) & (pct <= 1)).all()
    np.testing.assert_allclose(fm.values[:, 15], pct.mean(axis=1), atol=1e-12)
