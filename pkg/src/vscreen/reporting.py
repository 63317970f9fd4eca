"""Delimited report files, aligned text tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .metrics import SUMMARY_METRICS, MetricsReport, SummaryReport, aggregate
from .rng import GENERATOR_VERSION

PER_TARGET_COLUMNS = (
    "target_id", "pathway", "scheme", "n_total", "n_actives", "ef1", "ef10", "roc_auc",
    "bedroc", "alpha", "actives_remaining_pct", "accuracy", "precision", "recall",
    "specificity", "f1", "balanced_accuracy", "mcc", "tp", "fp", "fn", "tn", "threshold_policy",
)
SUMMARY_COLUMNS = ("pathway", "scheme", "ef1", "ef10", "roc_auc", "bedroc",
                   "actives_remaining_pct", "success_times", "n_targets")
_EXTRA_SUMMARY = ("accuracy", "precision", "recall", "f1", "balanced_accuracy", "mcc")

HEADINGS = {
    "ef1": "EF1%", "ef10": "EF10%", "roc_auc": "ROC-AUC", "bedroc": "BEDROC",
    "actives_remaining_pct": "Actives remaining", "success_times": "Success times",
    "n_targets": "Targets", "pathway": "Pathway", "scheme": "Scheme",
    "balanced_accuracy": "Bal. acc.",
}


def fmt(value) -> str:
    """Cell text for delimited files: shortest round-trip repr, blank for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def read_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def per_target_row(target_id: str, n_total: int, n_actives: int, pathway: str, scheme: str,
                   report: MetricsReport) -> dict:
    c = report.classical
    row = {
        "target_id": target_id, "pathway": pathway, "scheme": scheme,
        "n_total": n_total, "n_actives": n_actives,
        "roc_auc": report.roc_auc, "bedroc": report.bedroc, "alpha": report.alpha,
        "actives_remaining_pct": report.actives_remaining_pct,
        "accuracy": c.accuracy, "precision": c.precision, "recall": c.recall,
        "specificity": c.specificity, "f1": c.f1, "balanced_accuracy": c.balanced_accuracy,
        "mcc": c.mcc, "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
        "threshold_policy": str(c.threshold_policy),
    }
    for x, v in report.ef.items():
        row[ef_column(x)] = v
    return row


def ef_column(x: float) -> str:
    return f"ef{x:g}".replace(".", "_")


def summarize(rows: Sequence[Mapping]) -> list[SummaryReport]:
    """Group per-target rows by (pathway, scheme), keeping first-seen order."""
    groups: dict[tuple[str, str], dict[str, Mapping]] = {}
    for r in rows:
        groups.setdefault((r["pathway"], r["scheme"]), {})[r["target_id"]] = r
    return [aggregate(g, scheme, pathway) for (pathway, scheme), g in groups.items()]


def summary_rows(summaries: Sequence[SummaryReport], statistic: str) -> list[dict]:
    out = []
    for s in summaries:
        values = s.median if statistic == "median" else s.mean
        row = {"pathway": s.pathway, "scheme": s.scheme, "success_times": s.success_times,
               "n_targets": s.n_targets}
        row.update({k: values.get(k) for k in SUMMARY_METRICS})
        out.append(row)
    return out


def _cell(value, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def aligned_table(columns: Sequence[str], rows: Sequence[Mapping], title: str = "") -> str:
    head = [HEADINGS.get(c, c) for c in columns]
    body = [[_cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(h)] + [len(b[i]) for b in body]) for i, h in enumerate(head)]
    buf = io.StringIO()
    if title:
        buf.write(title + "\n")
    buf.write("  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip() + "\n")
    buf.write("  ".join("-" * w for w in widths) + "\n")
    for b in body:
        buf.write("  ".join(v.ljust(w) for v, w in zip(b, widths)).rstrip() + "\n")
    return buf.getvalue()


def summary_text(summaries: Sequence[SummaryReport]) -> str:
    cols = SUMMARY_COLUMNS[:-1] + _EXTRA_SUMMARY
    med = aligned_table(cols, summary_rows(summaries, "median"), "Median across targets")
    mean = aligned_table(cols, summary_rows(summaries, "mean"), "Mean across targets")
    return med + "\n" + mean


def write_summaries(out: Path, summaries: Sequence[SummaryReport]) -> None:
    cols = SUMMARY_COLUMNS + _EXTRA_SUMMARY
    write_csv(out / "summary_median.csv", cols, summary_rows(summaries, "median"))
    write_csv(out / "summary_mean.csv", cols, summary_rows(summaries, "mean"))


def method_label(pathway: str, scheme: str) -> str:
    return f"{pathway}:{scheme}"


def ef1_pivot(rows: Sequence[Mapping], methods: Sequence[str] | None = None) -> tuple[list[dict], list[str]]:
    """Per-target EF1% table with success and best-method counts as footer rows."""
    table: dict[str, dict] = defaultdict(dict)
    seen: list[str] = []
    for r in rows:
        label = method_label(r["pathway"], r["scheme"])
        if label not in seen:
            seen.append(label)
        table[str(r["target_id"])][label] = r["ef1"]
    methods = [m for m in (methods or seen) if m in seen]
    out = []
    success = {m: 0 for m in methods}
    best = {m: 0 for m in methods}
    for target in sorted(table):
        vals = table[target]
        row = {"target_id": target}
        present = [vals[m] for m in methods if m in vals]
        top = max(present) if present else None
        for m in methods:
            v = vals.get(m)
            row[m] = v
            if v is not None:
                success[m] += v > 1.0
                best[m] += v == top
        out.append(row)
    out.append({"target_id": "success (EF1% > 1)", **success})
    out.append({"target_id": "best method", **best})
    return out, ["target_id"] + methods


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, config: Mapping, inputs: Iterable[str | Path],
                   seed: int | None) -> Path:
    from . import __version__

    manifest = {
        "command": command,
        "version": __version__,
        "rng": GENERATOR_VERSION,
        "seed": seed,
        "config": config,
        # keyed by file name so relocating a run leaves the manifest unchanged
        "inputs": {Path(p).name: file_digest(p) for p in inputs},
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path
