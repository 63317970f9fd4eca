"""Command-line entry point: ``vscreen <command> [options]``.

Exit codes: 0 success, 1 internal error, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import re
import statistics
import sys
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import __version__
from .data import (
    DEFAULT_SCORERS,
    ScreenDataset,
    load_score_tables,
    load_scorer_specs,
    orient_scores,
    save_scorer_specs,
    subsample_inactives,
    validate_dataset,
    write_score_table,
)
from .errors import ConfigError, DataError, VScreenError
from .metrics import TOP1_PERCENT, RankedLibrary, ScoreThreshold, enrichment_factor
from .pipeline import consensus_methods, evaluate_target, parallel_map
from .ranking import load_consensus_spec, save_consensus_spec, write_ranking
from .reporting import (
    PER_TARGET_COLUMNS,
    aligned_table,
    ef1_pivot,
    ef_column,
    per_target_row,
    read_csv,
    summarize,
    summary_text,
    write_csv,
    write_manifest,
    write_summaries,
)
from .synth import generate_synthetic, load_synthetic_specs

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

_PATH_FIELDS = ("input", "scorers", "specs", "recipe", "external_results", "synth_spec")


@dataclass
class RunConfig:
    """Resolved settings for one command: defaults, then config file, then flags."""

    input: str | None = None
    scorers: str | None = None
    out: str = "vscreen_out"
    seed: int = 0
    jobs: int = 1
    subsample: float | None = None
    schemes: list[str] = field(default_factory=lambda: ["all"])
    pathway: str = "all"
    specs: list[str] = field(default_factory=list)
    alpha: float = 20.0
    ef: list[float] = field(default_factory=lambda: [1.0, 10.0])
    policy: str = "top1"
    model: str = "wnn"
    recipe: str | None = None
    max_epochs: int | None = None
    train_fraction: float = 0.75
    threshold: float = 0.5
    baseline_scorer: str = "gnina_ad"
    baseline_ef1: float | None = None
    external_results: str | None = None
    synth_spec: str | None = None

    def validate(self, command: str) -> None:
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if any(not (0 < x <= 100) for x in self.ef):
            raise ConfigError(f"EF percentages must be in (0, 100], got {self.ef}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.subsample is not None and not (0 < self.subsample <= 1):
            raise ConfigError("subsample fraction must be in (0, 1]")
        if self.pathway not in ("all", "both", "autodock", "diffdock"):
            raise ConfigError(f"pathway must be autodock, diffdock or all, got {self.pathway!r}")
        parse_policy(self.policy)
        if command in ("ingest", "consensus", "metrics", "train"):
            if not self.input:
                raise ConfigError(f"{command} needs an input score table (--input)")
            if not Path(self.input).is_file():
                raise DataError(f"input file not found: {self.input}")
        if command == "synth" and not self.synth_spec:
            raise ConfigError("synth needs a spec file (--spec)")
        for name in ("scorers", "recipe", "external_results", "synth_spec"):
            p = getattr(self, name)
            if p and command != "report" and not Path(p).is_file():
                raise ConfigError(f"{name} file not found: {p}")
        for p in self.specs:
            if not Path(p).is_file():
                raise ConfigError(f"consensus spec file not found: {p}")

    def manifest_view(self) -> dict:
        """Settings as recorded in manifests: file names only, no output directory."""
        d = dataclasses.asdict(self)
        d.pop("out")
        for k in _PATH_FIELDS:
            v = d[k]
            if isinstance(v, list):
                d[k] = [Path(p).name for p in v]
            elif v:
                d[k] = Path(v).name
        return d


def parse_policy(text: str):
    t = str(text).strip().lower()
    if t in ("top1", "top1%", "top-1%"):
        return TOP1_PERCENT
    if t.startswith("threshold:"):
        t = t.split(":", 1)[1]
    try:
        return ScoreThreshold(float(t))
    except ValueError:
        raise ConfigError(f"policy must be 'top1' or 'threshold:<value>', got {text!r}") from None


def load_config_file(path: str) -> dict:
    p = Path(path)
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: expected a mapping of settings")
    doc = {str(k).replace("-", "_"): v for k, v in doc.items()}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{p}: unknown setting(s) {unknown}")
    # relative paths in a config file are relative to that file
    for k in _PATH_FIELDS + ("out",):
        if k not in doc or doc[k] is None:
            continue
        if isinstance(doc[k], list):
            doc[k] = [str(p.parent / v) for v in doc[k]]
        else:
            doc[k] = str(p.parent / doc[k])
    return doc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if isinstance(values.get("schemes"), str):
        values["schemes"] = [values["schemes"]]
    if isinstance(values.get("specs"), str):
        values["specs"] = [values["specs"]]
    if "ef" in values:
        values["ef"] = _floats(values["ef"])
    try:
        cfg = RunConfig(**values)
        cfg.seed = int(cfg.seed)
        cfg.jobs = int(cfg.jobs)
        cfg.alpha = float(cfg.alpha)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad setting: {exc}") from None
    return cfg


def _floats(value) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    parts = value.split(",") if isinstance(value, str) else value
    try:
        return [float(x) for x in parts]
    except (TypeError, ValueError):
        raise ConfigError(f"expected numbers, got {value!r}") from None


# ---------------------------------------------------------------------------
# Shared steps
# ---------------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _specs(cfg: RunConfig):
    return load_scorer_specs(cfg.scorers) if cfg.scorers else DEFAULT_SCORERS


def _load(cfg: RunConfig) -> list[ScreenDataset]:
    tables = load_score_tables(cfg.input, _specs(cfg))
    if not tables:
        raise DataError(f"{cfg.input}: no records")
    return list(tables.values())


def _inputs(cfg: RunConfig) -> list[str]:
    files = [cfg.input, cfg.scorers, cfg.recipe, cfg.external_results, cfg.synth_spec, *cfg.specs]
    return [f for f in files if f]


def _methods(cfg: RunConfig):
    custom = [load_consensus_spec(p) for p in cfg.specs]
    return consensus_methods(cfg.schemes, cfg.pathway, custom)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-").lower()


def _method_file(method) -> str:
    return f"{_slug(method.scheme)}_{method.pathway}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    specs = load_synthetic_specs(cfg.synth_spec)
    datasets = [generate_synthetic(s) for s in specs]
    write_score_table(datasets, out / "scores.csv")
    save_scorer_specs(datasets[0].scorer_specs, out / "scorers.yaml")
    rows = [{"target_id": d.target_id, "n_total": d.n_total, "n_actives": d.n_actives,
             "seed": s.seed} for d, s in zip(datasets, specs)]
    print(aligned_table(("target_id", "n_total", "n_actives", "seed"), rows), end="")
    write_manifest(out, "synth", cfg.manifest_view(), _inputs(cfg), cfg.seed)
    return EXIT_OK


def cmd_ingest(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    datasets = _load(cfg)
    if cfg.subsample is not None:
        datasets = [subsample_inactives(d, cfg.subsample, cfg.seed) for d in datasets]
        write_score_table(datasets, out / "scores.csv")
        save_scorer_specs(datasets[0].scorer_specs, out / "scorers.yaml")
    sids = list(datasets[0].scores)
    rows = []
    bad = 0
    for d in datasets:
        rep = validate_dataset(d)
        row = {"target_id": d.target_id, "n_total": rep.n_total, "n_actives": rep.n_actives,
               "n_inactives": rep.n_inactives, "violations": "; ".join(rep.violations)}
        row.update({f"missing_{s}": rep.missing.get(s) for s in sids})
        rows.append(row)
        for v in rep.violations:
            print(f"{d.target_id}: {v}", file=sys.stderr)
            bad += 1
    cols = ("target_id", "n_total", "n_actives", "n_inactives",
            *(f"missing_{s}" for s in sids), "violations")
    write_csv(out / "validation.csv", cols, rows)
    print(aligned_table(cols[:-1], rows), end="")
    write_manifest(out, "ingest", cfg.manifest_view(), _inputs(cfg), cfg.seed)
    return EXIT_DATA if bad else EXIT_OK


def cmd_consensus(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    datasets = _load(cfg)
    methods = _methods(cfg)
    job = partial(evaluate_target, consensus=methods, include_single=False, with_metrics=False)
    results = parallel_map(job, datasets, cfg.jobs)

    spec_dir = out / "specs"
    spec_dir.mkdir(exist_ok=True)
    for m in methods:
        save_consensus_spec(m.consensus, spec_dir / f"{_method_file(m)}.yaml")

    rows = []
    for res in results:
        tdir = out / "rankings" / _slug(res.target_id)
        tdir.mkdir(parents=True, exist_ok=True)
        for m, cr in res.rankings:
            write_ranking(cr, res.labels, tdir / f"{_method_file(m)}.csv")
            rows.append({"target_id": res.target_id, "pathway": m.pathway, "scheme": m.scheme,
                         "n_total": res.n_total, "n_retained": len(cr.retained),
                         "n_excluded": len(cr.excluded),
                         "actives_remaining_pct": cr.actives_remaining_pct})
    cols = ("target_id", "pathway", "scheme", "n_total", "n_retained", "n_excluded",
            "actives_remaining_pct")
    write_csv(out / "actives_remaining.csv", cols, rows)
    print(aligned_table(cols, rows), end="")
    write_manifest(out, "consensus", cfg.manifest_view(), _inputs(cfg), cfg.seed)
    return EXIT_OK


def cmd_metrics(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    datasets = _load(cfg)
    methods = _methods(cfg)
    job = partial(evaluate_target, consensus=methods, alpha=cfg.alpha, ef_pcts=cfg.ef,
                  policy=parse_policy(cfg.policy))
    results = parallel_map(job, datasets, cfg.jobs)

    rows = [per_target_row(r.target_id, r.n_total, r.n_actives, m.pathway, m.scheme, rep)
            for r in results for m, rep in r.rows]
    ef_cols = [ef_column(x) for x in sorted({1.0, 10.0, *cfg.ef})]
    extra = [c for c in ef_cols if c not in PER_TARGET_COLUMNS]
    cols = PER_TARGET_COLUMNS[:7] + tuple(extra) + PER_TARGET_COLUMNS[7:]
    write_csv(out / "per_target_metrics.csv", cols, rows)
    summaries = summarize(rows)
    write_summaries(out, summaries)
    meta = {"alpha": cfg.alpha, "ef_percentages": sorted({1.0, 10.0, *cfg.ef}),
            "threshold_policy": str(parse_policy(cfg.policy)),
            "success_rule": "EF1% > 1", "n_targets": len(results)}
    (out / "metrics_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    print(summary_text(summaries), end="")
    write_manifest(out, "metrics", cfg.manifest_view(), _inputs(cfg), cfg.seed)
    return EXIT_OK


def _featurize(ds: ScreenDataset, recipe, train_fraction: float, seed: int, baseline: str):
    from .ml import build_features, feature_inputs, split_dataset

    ds = orient_scores(ds)
    if baseline not in ds.scores:
        raise ConfigError(f"baseline scorer {baseline!r} not in the score table")
    tables, cons = feature_inputs(ds)
    fm = build_features(ds, tables, cons, recipe)
    tr, va = split_dataset(ds, train_fraction, seed)
    lib = RankedLibrary.from_scores(ds.scores[baseline][va], ds.labels[va],
                                    [ds.ligand_ids[i] for i in va])
    return fm, tr, va, enrichment_factor(lib, 1.0)


def _display_name(config) -> str:
    arch = "-".join(str(w) for w in config.widths)
    return f"{config.name.upper()} ({arch})"


def comparison_rows(model_rows: Sequence[dict], baseline_name: str, baseline_ef1: float) -> list[dict]:
    """Models sorted by EF1% (best first) with their change over the baseline; baseline last."""
    from .ml import delta_pct, format_delta

    ranked = sorted(model_rows, key=lambda r: -r["ef1"])
    out = []
    for i, r in enumerate(ranked, start=1):
        d = delta_pct(r["ef1"], baseline_ef1)
        out.append({"rank": i, "model": r["model"], "ef1": r["ef1"],
                    "delta_vs_baseline": format_delta(d), "delta_pct": d if math.isfinite(d) else None})
    out.append({"rank": len(ranked) + 1, "model": f"{baseline_name} (Baseline)",
                "ef1": baseline_ef1, "delta_vs_baseline": "Ref.", "delta_pct": None})
    return out


COMPARISON_COLUMNS = ("rank", "model", "ef1", "delta_vs_baseline", "delta_pct")


def cmd_train(cfg: RunConfig) -> int:
    from .ml import default_recipe, evaluate_model, fit_scaler, load_recipe, preset
    from .ml.features import save_recipe
    from .ml.scaling import apply_scaler
    from .ml.training import save_model, train_mlp, write_training_log

    out = _out_dir(cfg)
    datasets = _load(cfg)
    recipe = load_recipe(cfg.recipe) if cfg.recipe else default_recipe()
    overrides = {"seed": cfg.seed}
    if cfg.max_epochs is not None:
        overrides["max_epochs"] = int(cfg.max_epochs)
    net = preset(cfg.model, **overrides)

    job = partial(_featurize, recipe=recipe, train_fraction=cfg.train_fraction,
                  seed=cfg.seed, baseline=cfg.baseline_scorer)
    parts = parallel_map(job, datasets, cfg.jobs)

    X_tr = np.vstack([fm.values[tr] for fm, tr, _, _ in parts])
    y_tr = np.concatenate([fm.labels[tr] for fm, tr, _, _ in parts])
    X_va = np.vstack([fm.values[va] for fm, _, va, _ in parts])
    y_va = np.concatenate([fm.labels[va] for fm, _, va, _ in parts])
    groups = np.concatenate([np.full(va.size, i) for i, (_, _, va, _) in enumerate(parts)])
    scaler = fit_scaler(X_tr)
    model = train_mlp(apply_scaler(X_tr, scaler), y_tr, net, apply_scaler(X_va, scaler), y_va,
                      val_groups=groups if len(parts) > 1 else None,
                      scaler=scaler, recipe=recipe)

    val_rows = []
    for fm, _, va, base in parts:
        ev = evaluate_model(model, fm.rows(va), baseline_ef1=base, threshold=cfg.threshold,
                            alpha=cfg.alpha)
        row = {"target_id": fm.target_id, "n_val": int(va.size),
               "n_val_actives": int(fm.labels[va].sum()),
               "ef1": ev.report.ef1, "ef10": ev.report.ef10, "roc_auc": ev.report.roc_auc,
               "bedroc": ev.report.bedroc, "baseline_ef1": base,
               "threshold": cfg.threshold, "f1_threshold": ev.f1_threshold}
        for suffix, c in (("top1", ev.report.classical), ("t", ev.at_threshold),
                          ("f1opt", ev.at_f1_threshold)):
            for k in ("accuracy", "precision", "recall", "f1", "balanced_accuracy", "mcc"):
                row[f"{k}_{suffix}"] = getattr(c, k)
        val_rows.append(row)
    val_cols = tuple(val_rows[0])
    write_csv(out / "validation_metrics.csv", val_cols, val_rows)

    model_ef1 = statistics.median(r["ef1"] for r in val_rows)
    baseline_ef1 = (cfg.baseline_ef1 if cfg.baseline_ef1 is not None
                    else statistics.median(r["baseline_ef1"] for r in val_rows))
    models = [{"model": _display_name(net), "ef1": model_ef1}]
    if cfg.external_results:
        models += _external_results(cfg.external_results)
    comp = comparison_rows(models, cfg.baseline_scorer, baseline_ef1)
    write_csv(out / "comparison.csv", COMPARISON_COLUMNS, comp)

    save_model(model, out / "model.npz")
    write_training_log(model, out / "training_log.csv")
    save_recipe(recipe, out / "recipe.yaml")
    print(aligned_table(COMPARISON_COLUMNS[:4], comp,
                        f"Validation EF1% (median over {len(val_rows)} targets)"), end="")
    write_manifest(out, "train", {**cfg.manifest_view(), "net": net.to_dict()},
                   _inputs(cfg), cfg.seed)
    return EXIT_OK


def _external_results(path: str) -> list[dict]:
    rows = read_csv(path)
    try:
        return [{"model": str(r["model"]), "ef1": float(r["ef1"])} for r in rows]
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{path}: external results need 'model' and numeric 'ef1' columns") from None


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if not out.is_dir():
        raise DataError(f"run directory not found: {out}")
    parts = []
    summary_cols = ("pathway", "scheme", "ef1", "ef10", "roc_auc", "bedroc",
                    "actives_remaining_pct", "success_times")
    for stat in ("median", "mean"):
        p = out / f"summary_{stat}.csv"
        if p.is_file():
            parts.append(aligned_table(summary_cols, read_csv(p), f"{stat.capitalize()} across targets"))
    per_target = out / "per_target_metrics.csv"
    if per_target.is_file():
        rows = read_csv(per_target)
        pivot, cols = ef1_pivot(rows)
        parts.append(aligned_table(cols, pivot, "EF1% by target"))
        write_csv(out / "ef1_by_target.csv", cols, pivot[:-2])
    comp = out / "comparison.csv"
    if comp.is_file():
        parts.append(aligned_table(COMPARISON_COLUMNS[:4], read_csv(comp), "Re-ranker comparison"))
    if not parts:
        raise DataError(f"{out}: no metrics, summary or comparison files to report")
    text = "\n".join(parts)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "consensus": cmd_consensus,
    "metrics": cmd_metrics,
    "train": cmd_train,
    "synth": cmd_synth,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="YAML settings file")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--jobs", type=int, default=default, help="worker processes")


def _input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="score table (CSV)")
    p.add_argument("--scorers", help="scorer spec file (YAML)")


def _consensus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", dest="schemes", action="append",
                   help="cc-medium, uc-strong, cc-weak, global or all (repeatable)")
    p.add_argument("--pathway", choices=("autodock", "diffdock", "all"))
    p.add_argument("--spec", dest="specs", action="append", help="custom consensus spec (YAML)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vscreen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate score tables, optionally subsample inactives")
    _input_flags(p)
    p.add_argument("--subsample", type=float, help="fraction of inactives to keep")

    p = sub.add_parser("consensus", help="write filtered consensus rankings")
    _input_flags(p)
    _consensus_flags(p)

    p = sub.add_parser("metrics", help="per-target metrics and summaries")
    _input_flags(p)
    _consensus_flags(p)
    p.add_argument("--alpha", type=float, help="BEDROC alpha (default 20)")
    p.add_argument("--ef", help="comma-separated EF percentages (1 and 10 always included)")
    p.add_argument("--policy", help="'top1' or 'threshold:<score>'")

    p = sub.add_parser("train", help="train an MLP re-ranker and compare to a baseline")
    _input_flags(p)
    p.add_argument("--model", choices=("wnn", "deep"))
    p.add_argument("--recipe", help="feature recipe (YAML)")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--threshold", type=float, help="decision threshold on model score")
    p.add_argument("--alpha", type=float)
    p.add_argument("--baseline-scorer")
    p.add_argument("--baseline-ef1", type=float, help="fixed baseline EF1%% instead of measuring it")
    p.add_argument("--external-results", help="CSV of other models: model,ef1")

    p = sub.add_parser("synth", help="generate a synthetic score table")
    p.add_argument("--spec", dest="synth_spec", help="synthetic spec (YAML)")

    sub.add_parser("report", help="render text report for a run directory")

    for sp in sub.choices.values():
        _global_flags(sp, suppress=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        cfg.validate(args.command)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"vscreen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"vscreen: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VScreenError as exc:
        print(f"vscreen: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"vscreen: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
