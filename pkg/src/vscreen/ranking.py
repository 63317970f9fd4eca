"""Per-scorer ranks, score filters and weighted rank consensus.

Ranks are always assigned on the full library; filters only decide which
ligands appear in a consensus output list.  Every tie is broken by ascending
ligand id.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .data import Direction, ScreenDataset
from .errors import ArgumentError, ConfigError


@dataclass(frozen=True)
class RankTable:
    """Ranks (1 = best) of one scorer over a whole library.

    ``array[i]`` is the rank of ``ligand_ids[i]``.
    """

    target_id: str
    scorer_id: str
    ligand_ids: tuple[str, ...]
    array: np.ndarray

    @property
    def n_ranked(self) -> int:
        return len(self.ligand_ids)

    @cached_property
    def ranks(self) -> dict[str, int]:
        return dict(zip(self.ligand_ids, self.array.tolist()))


def _order(ligand_ids: Sequence[str], values: np.ndarray) -> np.ndarray:
    """Indices sorted by descending value, NaN last, ties by ligand id."""
    missing = np.isnan(values)
    key = np.where(missing, 0.0, -values)
    return np.lexsort((np.asarray(ligand_ids, dtype=str), key, missing))


def assign_ranks(ds: ScreenDataset, scorer_id: str) -> RankTable:
    if scorer_id not in ds.scores:
        raise ConfigError(f"unknown scorer {scorer_id!r} for target {ds.target_id!r}")
    if ds.spec(scorer_id).direction is not Direction.HIGHER:
        raise ConfigError(f"scorer {scorer_id!r} is not oriented; call orient_scores first")
    order = _order(ds.ligand_ids, ds.scores[scorer_id])
    ranks = np.empty(ds.n_total, dtype=np.int64)
    ranks[order] = np.arange(1, ds.n_total + 1)
    ranks.flags.writeable = False
    return RankTable(ds.target_id, scorer_id, ds.ligand_ids, ranks)


def rank_all(ds: ScreenDataset) -> dict[str, RankTable]:
    return {sid: assign_ranks(ds, sid) for sid in ds.scores}


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterSpec:
    """Minimum-score thresholds on the oriented scale.

    ``groups`` is a disjunction of conjunctions: a ligand passes when, for at
    least one group, every thresholded score is present and at least the
    threshold.  Almost every filter has a single group; the cross-pathway
    global scheme uses one group per pathway.  No groups means no filtering.
    """

    name: str
    groups: tuple[Mapping[str, float], ...] = ()

    @classmethod
    def from_thresholds(cls, name: str, thresholds: Mapping[str, float]) -> "FilterSpec":
        return cls(name, (dict(thresholds),) if thresholds else ())

    @property
    def thresholds(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for g in self.groups:
            out.update(g)
        return out

    @property
    def is_empty(self) -> bool:
        return not any(self.groups)


@dataclass(frozen=True)
class FilterResult:
    retained: frozenset[str]
    mask: np.ndarray
    pass_counts: dict[str, int]


def apply_filter(ds: ScreenDataset, spec: FilterSpec) -> FilterResult:
    """Evaluate a filter; also counts how many ligands pass each predicate."""
    for sid in spec.thresholds:
        if sid not in ds.scores:
            raise ConfigError(f"filter {spec.name!r} thresholds unknown scorer {sid!r}")
    if spec.is_empty:
        mask = np.ones(ds.n_total, dtype=bool)
        return FilterResult(frozenset(ds.ligand_ids), mask, {})
    mask = np.zeros(ds.n_total, dtype=bool)
    counts: dict[str, int] = {}
    for group in spec.groups:
        gmask = np.ones(ds.n_total, dtype=bool)
        for sid, threshold in group.items():
            vals = ds.scores[sid]
            # NaN >= t is False, so a missing score fails the predicate
            ok = vals >= threshold
            counts[f"{sid}>={threshold:g}"] = int(ok.sum())
            gmask &= ok
        mask |= gmask
    retained = frozenset(lid for lid, m in zip(ds.ligand_ids, mask) if m)
    return FilterResult(retained, mask, counts)


# ---------------------------------------------------------------------------
# Consensus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsensusSpec:
    name: str
    filter: FilterSpec
    weights: Mapping[str, float]
    members: tuple[str, ...]

    def __post_init__(self):
        if set(self.weights) != set(self.members):
            raise ConfigError(
                f"{self.name}: weights {sorted(self.weights)} must cover exactly "
                f"the members {list(self.members)}"
            )
        if any(not (w >= 0) or math.isinf(w) for w in self.weights.values()):
            raise ConfigError(f"{self.name}: weights must be finite and non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ConfigError(f"{self.name}: at least one weight must be positive")


@dataclass(frozen=True)
class ConsensusRanking:
    """Weighted-average-rank ordering of the ligands that pass a filter.

    ``average_ranks`` holds the weighted average for every ligand of the
    library, including excluded ones, so a complete ordering can be rebuilt.
    """

    target_id: str
    spec_name: str
    retained: tuple[tuple[str, float], ...]
    excluded: frozenset[str]
    actives_remaining_pct: float
    average_ranks: Mapping[str, float] = field(repr=False)

    def full_order(self) -> list[str]:
        """Retained ligands in rank order, then excluded ones by average rank."""
        tail = sorted(self.excluded, key=lambda lid: (self.average_ranks[lid], lid))
        return [lid for lid, _ in self.retained] + tail


def consensus_rank(
    tables: Mapping[str, RankTable] | Iterable[RankTable],
    spec: ConsensusSpec,
    retained: Iterable[str],
    labels: Mapping[str, int],
) -> ConsensusRanking:
    """Weighted mean of full-library ranks, listed for the retained ligands.

    average_rank_i = sum_s W_s * rank_{s,i} / sum_s W_s
    """
    if not isinstance(tables, Mapping):
        tables = {t.scorer_id: t for t in tables}
    missing = [m for m in spec.members if m not in tables]
    if missing:
        raise ConfigError(f"{spec.name}: no rank table for member(s) {missing}")
    ref = tables[spec.members[0]]
    for m in spec.members[1:]:
        if tables[m].ligand_ids != ref.ligand_ids:
            raise ConfigError(f"{spec.name}: rank tables cover different libraries")

    total_w = math.fsum(spec.weights[m] for m in spec.members)
    acc = np.zeros(ref.n_ranked)
    for m in spec.members:
        acc += spec.weights[m] * tables[m].array
    avg = acc / total_w

    keep = set(retained)
    ids = ref.ligand_ids
    avg_map = dict(zip(ids, avg.tolist()))
    kept = sorted((lid for lid in ids if lid in keep), key=lambda lid: (avg_map[lid], lid))
    excluded = frozenset(lid for lid in ids if lid not in keep)

    n_act = sum(1 for lid in ids if labels[lid] == 1)
    kept_act = sum(1 for lid in kept if labels[lid] == 1)
    pct = 100.0 * kept_act / n_act if n_act else math.nan
    return ConsensusRanking(
        ref.target_id,
        spec.name,
        tuple((lid, avg_map[lid]) for lid in kept),
        excluded,
        pct,
        avg_map,
    )


def run_consensus(ds: ScreenDataset, spec: ConsensusSpec,
                  tables: Mapping[str, RankTable] | None = None) -> ConsensusRanking:
    """Filter, rank and combine in one call on an oriented dataset."""
    if tables is None:
        tables = {m: assign_ranks(ds, m) for m in spec.members}
    result = apply_filter(ds, spec.filter)
    labels = dict(zip(ds.ligand_ids, ds.labels.tolist()))
    return consensus_rank(tables, spec, result.retained, labels)


# ---------------------------------------------------------------------------
# Built-in schemes
# ---------------------------------------------------------------------------

SCHEMES = ("cc-medium", "uc-strong", "cc-weak", "global")

_PATHWAY_MEMBERS = {
    "autodock": {"baseline": "autodock", "gnina": "gnina_ad", "nmdn": "nmdn_ad"},
    "diffdock": {"baseline": "diffdock", "gnina": "gnina_dd", "nmdn": "nmdn_dd"},
}

# (nmdn minimum, gnina minimum, gnina weight)
_SCHEME_SETTINGS = {
    "cc-medium": (-800.0, 0.1, 2.0),
    "uc-strong": (900.0, 0.6, 1.0),
    "cc-weak": (-4000.0, 0.0, 2.0),
}

_DISPLAY = {"cc-medium": "CC-Medium", "uc-strong": "UC-Strong", "cc-weak": "CC-Weak", "global": "Global"}


def builtin_consensus(name: str, pathway: str = "both") -> ConsensusSpec:
    """Return one of the four named filter+weight schemes.

    ``pathway`` is ``"autodock"`` or ``"diffdock"`` for the single-pathway
    schemes and ``"both"`` for Global.
    """
    key = name.strip().lower().replace("_", "-")
    pathway = str(getattr(pathway, "value", pathway)).lower()
    if key not in SCHEMES:
        raise ArgumentError(f"unknown consensus scheme {name!r}; choose from {SCHEMES}")

    if key == "global":
        if pathway != "both":
            raise ArgumentError("the Global scheme spans both pathways; use pathway='both'")
        nmdn_min, gnina_min, gnina_w = _SCHEME_SETTINGS["cc-medium"]
        groups = []
        weights = {}
        for p in ("autodock", "diffdock"):
            m = _PATHWAY_MEMBERS[p]
            groups.append({m["nmdn"]: nmdn_min, m["gnina"]: gnina_min})
        members = ("autodock", "diffdock", "gnina_ad", "gnina_dd", "nmdn_ad", "nmdn_dd")
        weights = {"autodock": 1.0, "diffdock": 1.0, "gnina_ad": gnina_w,
                   "gnina_dd": gnina_w, "nmdn_ad": 1.0, "nmdn_dd": 1.0}
        return ConsensusSpec("Global", FilterSpec("Global", tuple(groups)), weights, members)

    if pathway not in _PATHWAY_MEMBERS:
        raise ArgumentError(f"{name} needs pathway 'autodock' or 'diffdock', got {pathway!r}")
    nmdn_min, gnina_min, gnina_w = _SCHEME_SETTINGS[key]
    m = _PATHWAY_MEMBERS[pathway]
    label = f"{_DISPLAY[key]}/{pathway}"
    filt = FilterSpec.from_thresholds(label, {m["nmdn"]: nmdn_min, m["gnina"]: gnina_min})
    members = (m["baseline"], m["gnina"], m["nmdn"])
    weights = {m["baseline"]: 1.0, m["gnina"]: gnina_w, m["nmdn"]: 1.0}
    return ConsensusSpec(label, filt, weights, members)


def scheme_pathways(name: str) -> tuple[str, ...]:
    return ("both",) if name.lower() == "global" else ("autodock", "diffdock")


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def consensus_spec_to_dict(spec: ConsensusSpec) -> dict:
    grouped = len(spec.filter.groups) > 1
    filters = []
    for gi, group in enumerate(spec.filter.groups):
        for sid, t in group.items():
            entry = {"scorer": sid, "min": float(t)}
            if grouped:
                entry["group"] = gi
            filters.append(entry)
    return {
        "name": spec.name,
        "filters": filters,
        "weights": [{"scorer": m, "w": float(spec.weights[m])} for m in spec.members],
    }


def consensus_spec_from_dict(doc: Mapping) -> ConsensusSpec:
    try:
        name = str(doc["name"])
        groups: dict[int, dict[str, float]] = {}
        for f in doc.get("filters") or []:
            groups.setdefault(int(f.get("group", 0)), {})[str(f["scorer"])] = float(f["min"])
        weights = {str(w["scorer"]): float(w["w"]) for w in doc["weights"]}
        members = tuple(str(w["scorer"]) for w in doc["weights"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad consensus spec: {exc!r}") from None
    filt = FilterSpec(name, tuple(groups[k] for k in sorted(groups)))
    return ConsensusSpec(name, filt, weights, members)


def load_consensus_spec(path: str | Path) -> ConsensusSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"consensus spec file not found: {path}") from None
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{path}: expected a mapping")
    return consensus_spec_from_dict(doc)


def save_consensus_spec(spec: ConsensusSpec, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(consensus_spec_to_dict(spec), sort_keys=False), encoding="utf-8"
    )


def write_ranking(ranking: ConsensusRanking, labels: Mapping[str, int], path: str | Path) -> None:
    """Ranking file: retained ligands by rank, then excluded ones."""
    retained_ids = {lid for lid, _ in ranking.retained}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ligand_id", "average_rank", "label", "retained"])
        for lid in ranking.full_order():
            w.writerow([lid, repr(ranking.average_ranks[lid]), labels[lid],
                        int(lid in retained_ids)])
