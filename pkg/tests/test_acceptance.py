"""Acceptance criteria, one test each.

Every test records a PASS or FAIL line through the ``criterion`` fixture;
the lines are repeated in a section at the end of the pytest run.
"""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from test_features import EXPECTED
from test_network import max_grad_rel_error
from vscreen import (
    ConsensusSpec,
    FilterSpec,
    RankedLibrary,
    SyntheticSpec,
    bedroc,
    builtin_consensus,
    consensus_rank,
    enrichment_factor,
    generate_synthetic,
    orient_scores,
    random_baseline,
    roc_auc,
)
from vscreen.cli import comparison_rows, main
from vscreen.metrics import bedroc_random, confusion_metrics
from vscreen.ml import (
    DEEP,
    WNN,
    apply_scaler,
    build_features,
    default_recipe,
    fit_scaler,
    predict,
    split_dataset,
    train_mlp,
)
from vscreen.oracles import oracle_auc, oracle_bedroc, oracle_ef
from vscreen.ranking import RankTable, consensus_spec_to_dict
from vscreen.rng import Stream


def _lib(labels, n_total=None, n_actives=None):
    labels = np.asarray(labels, dtype=np.int8)
    return RankedLibrary(tuple(map(str, range(labels.size))), labels,
                         n_total or labels.size, n_actives if n_actives is not None else int(labels.sum()))


def test_c01_ef_top_window(criterion):
    t0 = time.perf_counter()
    labels = np.zeros(10_000, dtype=np.int8)
    labels[np.arange(0, 100, 10)] = 1           # 10 actives inside the top-100 window
    labels[100 + np.arange(490) * 20] = 1       # the other 490 further down
    ef = enrichment_factor(_lib(labels), 1.0)
    dt = time.perf_counter() - t0
    criterion(1, "EF1% = 2.0 with 10 actives in the top 100", abs(ef - 2.0) <= 1e-12 and dt < 1.0,
              f"EF1%={ef!r}, {dt * 1e3:.1f} ms")


def test_c02_weighted_rank_average(criterion):
    t0 = time.perf_counter()
    ids = ("lig",)
    tables = {"gnina_ad": RankTable("T", "gnina_ad", ids, np.array([15])),
              "autodock": RankTable("T", "autodock", ids, np.array([76])),
              "nmdn_ad": RankTable("T", "nmdn_ad", ids, np.array([939]))}
    members = ("autodock", "gnina_ad", "nmdn_ad")
    flat = ConsensusSpec("flat", FilterSpec("none"), {m: 1.0 for m in members}, members)
    heavy = ConsensusSpec("gnina x2", FilterSpec("none"),
                          {"autodock": 1.0, "gnina_ad": 2.0, "nmdn_ad": 1.0}, members)
    a = consensus_rank(tables, flat, ids, {"lig": 1}).average_ranks["lig"]
    b = consensus_rank(tables, heavy, ids, {"lig": 1}).average_ranks["lig"]
    dt = time.perf_counter() - t0
    ok = abs(a - 343.33) <= 0.01 and abs(b - 261.25) <= 1e-9 and dt < 1.0
    criterion(2, "weighted rank average 343.33 / 261.25", ok, f"{a:.4f}, {b!r}, {dt * 1e3:.1f} ms")


def test_c03_builtin_scheme_config(criterion):
    expected = {
        "cc-medium": (-800.0, 0.1, (2, 1, 1)),
        "uc-strong": (900.0, 0.6, (1, 1, 1)),
        "cc-weak": (-4000.0, 0.0, (2, 1, 1)),
    }
    found = {}
    ok = True
    for scheme, (nmdn_min, gnina_min, pattern) in expected.items():
        for pathway, suffix, base in (("autodock", "ad", "autodock"), ("diffdock", "dd", "diffdock")):
            doc = consensus_spec_to_dict(builtin_consensus(scheme, pathway))
            mins = {f["scorer"]: f["min"] for f in doc["filters"]}
            w = {e["scorer"]: e["w"] for e in doc["weights"]}
            got = (mins, (w[f"gnina_{suffix}"], w[base], w[f"nmdn_{suffix}"]))
            ok &= mins == {f"nmdn_{suffix}": nmdn_min, f"gnina_{suffix}": gnina_min}
            ok &= got[1] == tuple(float(p) for p in pattern) and len(w) == 3
            found[scheme] = got
    detail = "; ".join(f"{k}: nmdn>={v[0][next(s for s in v[0] if s.startswith('nmdn'))]:g} "
                       f"gnina>={v[0][next(s for s in v[0] if s.startswith('gnina'))]:g} "
                       f"w(gnina-base-nmdn)={'-'.join(f'{x:g}' for x in v[1])}"
                       for k, v in found.items())
    criterion(3, "builtin scheme thresholds and weights", ok, detail)


def test_c04_metric_oracles(criterion):
    t0 = time.perf_counter()
    master = np.random.default_rng(20240531)
    worst = {"ef": 0.0, "auc": 0.0, "bedroc": 0.0}
    n_instances = 1000
    for _ in range(n_instances):
        N = int(master.integers(2, 2001))
        n = int(master.integers(1, min(N - 1, 40) + 1))
        labels = np.zeros(N, dtype=np.int8)
        labels[master.choice(N, n, replace=False)] = 1
        # coarse integer scores produce plenty of ties
        levels = int(master.integers(2, 50))
        scores = master.integers(0, levels, N).astype(float) + labels * master.uniform(0, 5)
        if master.uniform() < 0.2:
            scores[master.uniform(size=N) < 0.05] = np.nan
        lib = RankedLibrary.from_scores(scores, labels)
        for x in (0.5, 1.0, 5.0, float(master.uniform(0.1, 100))):
            worst["ef"] = max(worst["ef"], abs(enrichment_factor(lib, x) - oracle_ef(lib.labels, x)))
        # truncated list standing in for a filtered ranking
        keep = int(master.integers(1, N + 1))
        part = RankedLibrary(lib.ligand_ids[:keep], lib.labels[:keep], N, n)
        worst["ef"] = max(worst["ef"], abs(enrichment_factor(part, 1.0)
                                           - oracle_ef(part.labels, 1.0, N, n)))
        clean = np.where(np.isnan(scores), -np.inf, scores)
        worst["auc"] = max(worst["auc"], abs(roc_auc(scores, labels) - oracle_auc(clean.tolist(), labels)))
        alpha = float(master.choice([20.0, master.uniform(0.5, 80)]))
        ranks = (np.flatnonzero(lib.labels == 1) + 1).tolist()
        worst["bedroc"] = max(worst["bedroc"], abs(bedroc(lib, alpha) - oracle_bedroc(ranks, N, alpha)))
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and dt < 60
    detail = f"{n_instances} instances, max |diff| " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    criterion(4, "EF/AUC/BEDROC agree with oracles", ok, f"{detail}, {dt:.1f} s")


def test_c05_bedroc_limits(criterion):
    t0 = time.perf_counter()
    N, n, alpha = 1000, 10, 20.0
    perfect = np.zeros(N, dtype=np.int8)
    perfect[:n] = 1
    best = bedroc(_lib(perfect), alpha)
    worst = bedroc(_lib(perfect[::-1].copy()), alpha)
    values = [bedroc(_lib(perfect[Stream(seed, "bedroc-limits").permutation(N)]), alpha)
              for seed in range(1000)]
    mean = float(np.mean(values))
    expect = bedroc_random(N, n, alpha)
    dt = time.perf_counter() - t0
    ok = best >= 0.99 and worst <= 0.01 and abs(mean - expect) <= 0.02 and dt < 30
    criterion(5, "BEDROC perfect/inverted/random limits", ok,
              f"perfect={best:.4f}, inverted={worst:.2e}, random mean={mean:.4f} "
              f"vs {expect:.4f}, {dt:.1f} s")


def test_c06_random_enrichment(criterion):
    mean, sd = random_baseline(5000, 50, 1.0, 1000, seed=0)
    criterion(6, "random-ranking EF1% mean in [0.85, 1.15]", 0.85 <= mean <= 1.15,
              f"mean={mean:.4f}, sd={sd:.3f}")


def test_c07_classical_regime(criterion):
    m = confusion_metrics(2, 98, 98, 9802)
    exact = {
        "accuracy": Fraction(2 + 9802, 10_000),
        "precision": Fraction(2, 100),
        "recall": Fraction(2, 100),
        "balanced_accuracy": (Fraction(2, 100) + Fraction(9802, 9900)) / 2,
    }
    ok = all(abs(getattr(m, k) - float(v)) <= 1e-12 for k, v in exact.items())
    shown = (round(100 * m.accuracy, 2), round(100 * m.precision, 2), round(100 * m.recall, 2),
             round(100 * m.balanced_accuracy, 3))
    ok &= shown == (98.04, 2.0, 2.0, 50.505)
    criterion(7, "TP=2/FP=98/FN=98/TN=9802 classical metrics", ok,
              f"acc={shown[0]}%, prec={shown[1]}%, rec={shown[2]}%, bal={shown[3]}%")


def test_c08_feature_recipe(criterion, tiny):
    recipe = default_recipe()
    fm = build_features(orient_scores(tiny), recipe=recipe)
    diffs = [float(np.max(np.abs(fm.values[:, fm.names.index(k)] - np.asarray(v))))
             for k, v in EXPECTED.items()]
    n_primary = recipe.n_primary
    ok = (n_primary == 17 and fm.values.shape == (3, 42) and set(fm.names) == set(EXPECTED)
          and max(diffs) <= 1e-9)
    criterion(8, "17 primary / 42 total features, 3-ligand table", ok,
              f"{n_primary} primary, {fm.values.shape[1]} total, max |diff|={max(diffs):.1e}")


def test_c09_gradient_check(criterion):
    errs = {name: max_grad_rel_error(cfg, n_in=42, batch=6, per_param=6)
            for name, cfg in (("WNN", WNN), ("DEEP", DEEP))}
    criterion(9, "analytic vs finite-difference gradients", max(errs.values()) < 1e-4,
              ", ".join(f"{k} max rel err={v:.1e}" for k, v in errs.items()))


def _best_single_feature_ef1(values, labels):
    best, name = 0.0, ""
    for j in range(values.shape[1]):
        for sign in (1.0, -1.0):
            ef = enrichment_factor(RankedLibrary.from_scores(sign * values[:, j], labels), 1.0)
            if ef > best:
                best, name = ef, j
    return best, name


@pytest.mark.slow
def test_c10_wnn_beats_best_feature(criterion):
    results = []
    ok = True
    for seed in (0, 1, 2):
        spec = SyntheticSpec(200, 19_800, {"gnina_ad": 3.0, "nmdn_dd": 3.0}, seed=seed,
                             complementary=True)
        ds = orient_scores(generate_synthetic(spec))
        t0 = time.perf_counter()
        fm = build_features(ds)
        tr, va = split_dataset(ds, 0.75, seed)
        sc = fit_scaler(fm.values[tr])
        model = train_mlp(apply_scaler(fm.values[tr], sc), fm.labels[tr], WNN.replace(seed=seed),
                          apply_scaler(fm.values[va], sc), fm.labels[va], scaler=sc)
        dt = time.perf_counter() - t0
        y = fm.labels[va]
        ef_model = enrichment_factor(RankedLibrary.from_scores(predict(model, fm.values[va]), y), 1.0)
        ef_feat, j = _best_single_feature_ef1(fm.values[va], y)
        ratio = ef_model / ef_feat
        ok &= ratio >= 1.2 and dt <= 300
        results.append(f"seed {seed}: WNN {ef_model:.2f} vs {fm.names[j]} {ef_feat:.2f} "
                       f"= {ratio:.2f}x in {dt:.0f} s")
    criterion(10, "WNN EF1% >= 1.2x best single feature", ok, "; ".join(results))


SYNTH_SPEC = """\
n_actives: 12
n_inactives: 588
seed: 5
missing_rate: 0.03
signal_strength: {gnina_ad: 2.0, nmdn_dd: 2.0}
complementary: true
targets: [{}, {}, {}]
"""


def _run_pipeline(run: Path) -> dict[str, bytes]:
    run.mkdir()
    (run / "synth.yaml").write_text(SYNTH_SPEC)
    scores = str(run / "scores.csv")
    steps = [
        ["synth", "--spec", str(run / "synth.yaml")],
        ["consensus", "--input", scores],
        ["metrics", "--input", scores],
        ["train", "--input", scores, "--max-epochs", "6"],
        ["report"],
    ]
    for argv in steps:
        assert main(argv + ["--out", str(run), "--seed", "11"]) == 0, argv
    return {str(p.relative_to(run)): p.read_bytes() for p in sorted(run.rglob("*")) if p.is_file()}


def test_c11_end_to_end_determinism(criterion, tmp_path):
    a = _run_pipeline(tmp_path / "run_a")
    b = _run_pipeline(tmp_path / "run_b")
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    criterion(11, "seeded pipeline output is byte-identical", not differing and len(a) > 20,
              f"{len(a)} files compared" + (f", differing: {differing[:5]}" if differing else ""))


def test_c12_delta_arithmetic(criterion):
    rows = comparison_rows([{"model": "WNN", "ef1": 4.49}], "AutoDock-GNINA", 2.14)
    d = rows[0]["delta_pct"]
    ok = abs(d - 109.8) <= 0.1 and rows[0]["delta_vs_baseline"] == "+109.8%"
    ok &= rows[-1]["delta_vs_baseline"] == "Ref."
    criterion(12, "comparison delta from (4.49, 2.14)", ok,
              f"delta={d:.4f} pp, shown {rows[0]['delta_vs_baseline']}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
