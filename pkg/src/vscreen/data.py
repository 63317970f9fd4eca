"""Score tables: loading, orientation, subsampling and validation.

A :class:`ScreenDataset` holds one target's library column-wise: ligand ids,
binary labels and one float64 array per scorer, with ``NaN`` marking a
missing score (the scorer failed on that ligand).  Datasets are immutable.
"""

from __future__ import annotations

import csv
import enum
from collections import Counter
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    ArgumentError,
    ConfigError,
    DataError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .rng import Stream

REQUIRED_COLUMNS = ("target_id", "ligand_id", "label")


class Direction(str, enum.Enum):
    HIGHER = "higher"
    LOWER = "lower"


class Pathway(str, enum.Enum):
    AUTODOCK = "autodock"
    DIFFDOCK = "diffdock"
    SHARED = "shared"


@dataclass(frozen=True)
class ScorerSpec:
    """Identity and direction convention of one scoring method.

    ``column`` is the header name in score tables; it defaults to
    ``scorer_id``.
    """

    scorer_id: str
    direction: Direction
    pathway: Pathway = Pathway.SHARED
    column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "pathway", Pathway(self.pathway))

    @property
    def source_column(self) -> str:
        return self.column or self.scorer_id


# Canonical ids for the two docking pathways and their rescorers.
DEFAULT_SCORERS: tuple[ScorerSpec, ...] = (
    ScorerSpec("autodock", Direction.LOWER, Pathway.AUTODOCK),
    ScorerSpec("diffdock", Direction.HIGHER, Pathway.DIFFDOCK),
    ScorerSpec("gnina_ad", Direction.HIGHER, Pathway.AUTODOCK),
    ScorerSpec("gnina_dd", Direction.HIGHER, Pathway.DIFFDOCK),
    ScorerSpec("nmdn_ad", Direction.HIGHER, Pathway.AUTODOCK),
    ScorerSpec("nmdn_dd", Direction.HIGHER, Pathway.DIFFDOCK),
)


@dataclass(frozen=True)
class ScoreRecord:
    target_id: str
    ligand_id: str
    label: int
    scores: Mapping[str, float | None]


class ScreenDataset:
    """One target's labeled library with per-scorer scores.

    Parameters
    ----------
    target_id : str
    ligand_ids : sequence of str
        Unique within the target; record order is preserved.
    labels : sequence of int
        1 = active, 0 = inactive.
    scores : mapping of scorer id to float sequence
        ``NaN`` (or ``None``) marks a missing score.
    scorer_specs : sequence of ScorerSpec
    """

    def __init__(
        self,
        target_id: str,
        ligand_ids: Sequence[str],
        labels: Sequence[int],
        scores: Mapping[str, Sequence[float | None]],
        scorer_specs: Iterable[ScorerSpec],
    ):
        self.target_id = str(target_id)
        self.ligand_ids: tuple[str, ...] = tuple(str(x) for x in ligand_ids)
        lab = np.asarray(labels)
        if lab.size and not np.isin(lab, (0, 1)).all():
            raise ValidationError(f"{self.target_id}: labels must be 0 or 1")
        self.labels = lab.astype(np.int8)
        self.labels.flags.writeable = False
        n = len(self.ligand_ids)
        if self.labels.shape != (n,):
            raise ValidationError("labels and ligand_ids differ in length")

        cols = {}
        for sid, values in scores.items():
            arr = np.array(
                [np.nan if v is None else v for v in values], dtype=np.float64
            )
            if arr.shape != (n,):
                raise ValidationError(f"score column {sid!r} has wrong length")
            arr.flags.writeable = False
            cols[sid] = arr
        self.scores: Mapping[str, np.ndarray] = MappingProxyType(cols)

        specs = tuple(scorer_specs)
        ids = [s.scorer_id for s in specs]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate scorer ids in specs: {ids}")
        self.scorer_specs: tuple[ScorerSpec, ...] = specs

        if len(set(self.ligand_ids)) != n:
            dup = next(x for x, c in Counter(self.ligand_ids).items() if c > 1)
            raise ValidationError(
                f"{self.target_id}: duplicate ligand_id {dup!r}"
            )

    @property
    def n_total(self) -> int:
        return len(self.ligand_ids)

    @property
    def n_actives(self) -> int:
        return int(self.labels.sum())

    @property
    def scorer_ids(self) -> tuple[str, ...]:
        return tuple(self.scores)

    def spec(self, scorer_id: str) -> ScorerSpec:
        for s in self.scorer_specs:
            if s.scorer_id == scorer_id:
                return s
        raise ConfigError(f"no ScorerSpec for scorer {scorer_id!r}")

    @property
    def records(self) -> list[ScoreRecord]:
        out = []
        for i, lid in enumerate(self.ligand_ids):
            sc = {}
            for sid, arr in self.scores.items():
                v = arr[i]
                sc[sid] = None if math.isnan(v) else float(v)
            out.append(ScoreRecord(self.target_id, lid, int(self.labels[i]), sc))
        return out

    def subset(self, indices: Sequence[int]) -> "ScreenDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return ScreenDataset(
            self.target_id,
            [self.ligand_ids[i] for i in idx],
            self.labels[idx],
            {sid: arr[idx] for sid, arr in self.scores.items()},
            self.scorer_specs,
        )

    def __len__(self) -> int:
        return self.n_total

    def __reduce__(self):
        # the read-only score mapping does not pickle; rebuild from plain parts
        return (ScreenDataset, (self.target_id, self.ligand_ids, self.labels,
                                dict(self.scores), self.scorer_specs))

    def __repr__(self) -> str:
        return (
            f"ScreenDataset({self.target_id!r}, n_total={self.n_total}, "
            f"n_actives={self.n_actives}, scorers={list(self.scores)})"
        )


# ---------------------------------------------------------------------------
# Scorer spec files
# ---------------------------------------------------------------------------


def load_scorer_specs(path: str | Path) -> tuple[ScorerSpec, ...]:
    """Read a scorer spec file (YAML or JSON).

    Expected layout::

        scorers:
          - {scorer_id: autodock, column: ad_energy, direction: lower, pathway: autodock}
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"scorer spec file not found: {path}") from None
    entries = doc.get("scorers") if isinstance(doc, dict) else doc
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: expected a 'scorers' list")
    specs = []
    for e in entries:
        try:
            specs.append(
                ScorerSpec(
                    scorer_id=str(e["scorer_id"]),
                    direction=e["direction"],
                    pathway=e.get("pathway", "shared"),
                    column=e.get("column"),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: bad scorer entry {e!r}: {exc}") from None
    ids = [s.scorer_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate scorer_id")
    return tuple(specs)


def scorer_specs_to_dict(specs: Iterable[ScorerSpec]) -> dict:
    return {
        "scorers": [
            {
                "scorer_id": s.scorer_id,
                "column": s.source_column,
                "direction": s.direction.value,
                "pathway": s.pathway.value,
            }
            for s in specs
        ]
    }


def save_scorer_specs(specs: Iterable[ScorerSpec], path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scorer_specs_to_dict(specs), sort_keys=False),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Score tables
# ---------------------------------------------------------------------------


def _parse_score(text: str, column: str, line: int) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {line}: non-numeric value {text!r} in column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"row {line}: non-finite value {text!r} in column {column!r}")
    return value


def _parse_label(text: str, line: int) -> int:
    t = text.strip()
    if t in ("0", "1"):
        return int(t)
    raise ParseError(f"row {line}: label must be 0 or 1, got {text!r}")


def load_score_tables(
    path: str | Path, specs: Iterable[ScorerSpec]
) -> dict[str, ScreenDataset]:
    """Load a score table holding one or more targets.

    Returns datasets keyed by target id, in sorted target order.  Record
    order within a target follows the file.
    """
    specs = tuple(specs)
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        for col in REQUIRED_COLUMNS + tuple(s.source_column for s in specs):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        pos = {h: i for i, h in enumerate(header)}
        per_target: dict[str, dict] = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {line}: expected {len(header)} cells, got {len(row)}"
                )
            tid = row[pos["target_id"]].strip()
            lid = row[pos["ligand_id"]].strip()
            bucket = per_target.setdefault(
                tid,
                {"ids": [], "labels": [], "scores": {s.scorer_id: [] for s in specs}, "seen": set()},
            )
            if lid in bucket["seen"]:
                raise ValidationError(f"row {line}: duplicate ligand_id {lid!r} in target {tid!r}")
            bucket["seen"].add(lid)
            bucket["ids"].append(lid)
            bucket["labels"].append(_parse_label(row[pos["label"]], line))
            present = 0
            for s in specs:
                v = _parse_score(row[pos[s.source_column]], s.source_column, line)
                present += not math.isnan(v)
                bucket["scores"][s.scorer_id].append(v)
            if specs and not present:
                raise ValidationError(f"row {line}: ligand {lid!r} has no scores")
    return {
        tid: ScreenDataset(tid, b["ids"], b["labels"], b["scores"], specs)
        for tid, b in sorted(per_target.items())
    }


def load_score_table(
    path: str | Path, specs: Iterable[ScorerSpec], target_id: str | None = None
) -> ScreenDataset:
    """Load a single-target score table (or one target of a multi-target file)."""
    tables = load_score_tables(path, specs)
    if target_id is not None:
        if target_id not in tables:
            raise DataError(f"{path}: target {target_id!r} not present")
        return tables[target_id]
    if len(tables) != 1:
        raise DataError(
            f"{path}: holds {len(tables)} targets; pass target_id or use load_score_tables"
        )
    return next(iter(tables.values()))


def format_score(value: float) -> str:
    """Shortest decimal text that parses back to the identical double."""
    return "" if math.isnan(value) else repr(float(value))


def write_score_table(datasets: Iterable[ScreenDataset], path: str | Path) -> None:
    """Write datasets in the standard score-table format."""
    datasets = list(datasets)
    specs = datasets[0].scorer_specs if datasets else ()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(REQUIRED_COLUMNS) + [s.source_column for s in specs])
        for ds in datasets:
            cols = [ds.scores[s.scorer_id] for s in specs]
            for i, lid in enumerate(ds.ligand_ids):
                w.writerow(
                    [ds.target_id, lid, int(ds.labels[i])]
                    + [format_score(c[i]) for c in cols]
                )


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def orient_scores(ds: ScreenDataset) -> ScreenDataset:
    """Re-express every score so that larger is better.

    LowerBetter scores are negated and their spec flipped to HigherBetter, so
    calling this twice is a no-op.
    """
    specs_by_id = {s.scorer_id: s for s in ds.scorer_specs}
    missing = [sid for sid in ds.scores if sid not in specs_by_id]
    if missing:
        raise ConfigError(f"no ScorerSpec for scorer(s) {missing}")
    scores = {}
    specs = []
    for s in ds.scorer_specs:
        if s.direction is Direction.LOWER:
            if s.scorer_id in ds.scores:
                scores[s.scorer_id] = -ds.scores[s.scorer_id]
            specs.append(replace(s, direction=Direction.HIGHER))
        else:
            if s.scorer_id in ds.scores:
                scores[s.scorer_id] = ds.scores[s.scorer_id]
            specs.append(s)
    return ScreenDataset(ds.target_id, ds.ligand_ids, ds.labels, scores, specs)


def is_oriented(ds: ScreenDataset) -> bool:
    return all(s.direction is Direction.HIGHER for s in ds.scorer_specs)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def subsample_inactives(ds: ScreenDataset, fraction: float, seed: int) -> ScreenDataset:
    """Keep every active and ``round(fraction * n_inactives)`` inactives.

    The retained inactives are a seeded uniform draw without replacement;
    file order is preserved in the output.
    """
    if not (0.0 < fraction <= 1.0):
        raise ArgumentError(f"fraction must be in (0, 1], got {fraction}")
    inactive = np.flatnonzero(ds.labels == 0)
    k = round_half_up(fraction * inactive.size)
    if k == inactive.size:
        return ds
    order = Stream(seed, f"subsample:{ds.target_id}").permutation(inactive.size)
    keep = np.sort(np.concatenate([np.flatnonzero(ds.labels == 1), inactive[order[:k]]]))
    return ds.subset(keep)


@dataclass
class ValidationReport:
    target_id: str
    n_total: int
    n_actives: int
    n_inactives: int
    missing: dict[str, int] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(ds: ScreenDataset) -> ValidationReport:
    """Report missing-value counts and invariant violations without raising."""
    n_act = ds.n_actives
    report = ValidationReport(ds.target_id, ds.n_total, n_act, ds.n_total - n_act)
    known = {s.scorer_id for s in ds.scorer_specs}
    for sid, arr in ds.scores.items():
        report.missing[sid] = int(np.isnan(arr).sum())
        if sid not in known:
            report.violations.append(f"scorer {sid!r} has no ScorerSpec")
        if ds.n_total and report.missing[sid] == ds.n_total:
            report.violations.append(f"scorer {sid!r}: every score missing")
    if ds.n_total == 0:
        report.violations.append("empty dataset")
    if n_act == 0:
        report.violations.append("no actives: enrichment undefined")
    if ds.n_total and n_act == ds.n_total:
        report.violations.append("no inactives: classification metrics undefined")
    return report
