import math
import pickle
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vscreen import (
    DEFAULT_SCORERS,
    ScorerSpec,
    ScreenDataset,
    load_score_table,
    load_score_tables,
    load_scorer_specs,
    orient_scores,
    subsample_inactives,
    validate_dataset,
    write_score_table,
)
from vscreen.data import is_oriented, round_half_up, save_scorer_specs
from vscreen.errors import ConfigError, DataError, ParseError, SchemaError, ValidationError
from vscreen.rng import Stream

HEADER = "target_id,ligand_id,label,autodock,diffdock,gnina_ad,gnina_dd,nmdn_ad,nmdn_dd\n"


def _write(tmp_path, body, name="scores.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


def test_round_trip_preserves_bits(tmp_path, small_synth):
    p = tmp_path / "s.csv"
    write_score_table([small_synth], p)
    back = load_score_table(p, DEFAULT_SCORERS)
    assert back.ligand_ids == small_synth.ligand_ids
    np.testing.assert_array_equal(back.labels, small_synth.labels)
    for sid in small_synth.scores:
        a, b = small_synth.scores[sid], back.scores[sid]
        assert np.array_equal(np.isnan(a), np.isnan(b))
        assert np.array_equal(a[~np.isnan(a)], b[~np.isnan(b)])


def test_multi_target_tables_sorted(tmp_path):
    p = _write(tmp_path, "T2,x,1,-7,1,0.2,0.2,1,1\nT1,y,0,-6,0,0.1,0.1,0,0\nT2,z,0,-5,0,,0.1,0,0\n")
    tables = load_score_tables(p, DEFAULT_SCORERS)
    assert list(tables) == ["T1", "T2"]
    assert tables["T2"].ligand_ids == ("x", "z")
    assert math.isnan(tables["T2"].scores["gnina_ad"][1])
    with pytest.raises(DataError):
        load_score_table(p, DEFAULT_SCORERS)
    assert load_score_table(p, DEFAULT_SCORERS, "T1").n_total == 1


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_score_tables(tmp_path / "nope.csv", DEFAULT_SCORERS)


def test_missing_column(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("target_id,ligand_id,label,autodock\nT,a,1,-5\n")
    with pytest.raises(SchemaError, match="diffdock"):
        load_score_tables(p, DEFAULT_SCORERS)


@pytest.mark.parametrize("cell", ["abc", "inf", "nan"])
def test_bad_cell_cites_row(tmp_path, cell):
    p = _write(tmp_path, f"T,a,1,-7,1,0.2,0.2,1,1\nT,b,0,{cell},1,0.2,0.2,1,1\n")
    with pytest.raises(ParseError, match="row 3"):
        load_score_tables(p, DEFAULT_SCORERS)


def test_duplicate_ligand_and_empty_row(tmp_path):
    p = _write(tmp_path, "T,a,1,-7,1,0.2,0.2,1,1\nT,a,0,-7,1,0.2,0.2,1,1\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_score_tables(p, DEFAULT_SCORERS)
    p = _write(tmp_path, "T,a,1,,,,,,\n")
    with pytest.raises(ValidationError, match="no scores"):
        load_score_tables(p, DEFAULT_SCORERS)


def test_bad_label(tmp_path):
    p = _write(tmp_path, "T,a,2,-7,1,0.2,0.2,1,1\n")
    with pytest.raises(ParseError):
        load_score_tables(p, DEFAULT_SCORERS)


def test_scorer_spec_file(tmp_path):
    p = tmp_path / "scorers.yaml"
    save_scorer_specs(DEFAULT_SCORERS, p)
    key = lambda specs: [(s.scorer_id, s.direction, s.pathway, s.source_column) for s in specs]
    assert key(load_scorer_specs(p)) == key(DEFAULT_SCORERS)
    p.write_text("scorers:\n  - {scorer_id: vina, column: vina_kcal, direction: lower}\n")
    (spec,) = load_scorer_specs(p)
    assert spec.source_column == "vina_kcal" and spec.pathway.value == "shared"
    p.write_text("scorers:\n  - {scorer_id: vina, direction: sideways}\n")
    with pytest.raises(ConfigError):
        load_scorer_specs(p)
    with pytest.raises(ConfigError):
        load_scorer_specs(tmp_path / "absent.yaml")


def test_orient_negates_lower_better(tiny):
    o = orient_scores(tiny)
    assert is_oriented(o) and not is_oriented(tiny)
    np.testing.assert_array_equal(o.scores["autodock"], [9.0, 7.0, 8.0])
    np.testing.assert_array_equal(o.scores["nmdn_dd"], tiny.scores["nmdn_dd"])
    again = orient_scores(o)
    np.testing.assert_array_equal(again.scores["autodock"], o.scores["autodock"])


def test_dataset_invariants():
    with pytest.raises(ValidationError):
        ScreenDataset("T", ["a", "a"], [1, 0], {"s": [1, 2]}, [ScorerSpec("s", "higher")])
    with pytest.raises(ValidationError):
        ScreenDataset("T", ["a"], [3], {"s": [1]}, [ScorerSpec("s", "higher")])
    with pytest.raises(ValidationError):
        ScreenDataset("T", ["a", "b"], [1, 0], {"s": [1]}, [ScorerSpec("s", "higher")])


def test_dataset_is_read_only_and_picklable(tiny):
    with pytest.raises(ValueError):
        tiny.scores["autodock"][0] = 1.0
    back = pickle.loads(pickle.dumps(tiny))
    assert back.ligand_ids == tiny.ligand_ids
    assert np.array_equal(back.scores["gnina_ad"], tiny.scores["gnina_ad"])


def test_validation_report(tiny):
    rep = validate_dataset(tiny)
    assert rep.ok and rep.missing["diffdock"] == 1
    no_act = ScreenDataset("T", ["a", "b"], [0, 0], {"s": [1, 2]}, [ScorerSpec("s", "higher")])
    assert any("no actives" in v for v in validate_dataset(no_act).violations)
    all_act = ScreenDataset("T", ["a"], [1], {"s": [1]}, [ScorerSpec("s", "higher")])
    assert any("no inactives" in v for v in validate_dataset(all_act).violations)


def test_subsample_keeps_actives_and_count(small_synth):
    sub = subsample_inactives(small_synth, 0.25, seed=9)
    assert sub.n_actives == small_synth.n_actives
    assert sub.n_total - sub.n_actives == round_half_up(0.25 * 480)
    pos = [small_synth.ligand_ids.index(x) for x in sub.ligand_ids]
    assert pos == sorted(pos)
    assert subsample_inactives(small_synth, 0.25, seed=9).ligand_ids == sub.ligand_ids
    assert subsample_inactives(small_synth, 0.25, seed=10).ligand_ids != sub.ligand_ids


@given(st.floats(0.01, 1.0), st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_subsample_property(small_synth, fraction, seed):
    sub = subsample_inactives(small_synth, fraction, seed)
    assert sub.n_actives == 20
    assert sub.n_total - 20 == round_half_up(fraction * 480)


def _splitmix_word(key, k):
    m = (1 << 64) - 1
    z = (key + k * 0x9E3779B97F4A7C15) & m
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & m
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & m
    return z ^ (z >> 31)


def test_stream_matches_reference_formula():
    s = Stream(42, "lbl")
    words = s.bits(5).tolist()
    assert words == [_splitmix_word(s.key, k) for k in range(1, 6)]
    key = _splitmix_word(_splitmix_word(42, 0) ^ zlib.crc32(b"lbl"), 0)
    assert key == s.key
    u = Stream(42, "lbl").uniform(5)
    assert np.array_equal(u, np.array([w >> 11 for w in words], dtype=np.float64) * 2.0**-53)


def test_stream_children_independent_of_parent_use():
    a = Stream(1)
    a.uniform(10)
    assert np.array_equal(a.spawn("x").uniform(4), Stream(1).spawn("x").uniform(4))
    assert not np.array_equal(Stream(1).spawn("x").uniform(4), Stream(1).spawn("y").uniform(4))
