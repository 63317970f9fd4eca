"""Per-target evaluation of single scorers and consensus schemes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

from .data import ScreenDataset, orient_scores
from .metrics import (
    TOP1_PERCENT,
    MetricsReport,
    RankedLibrary,
    ScoreThreshold,
    Top1Percent,
    evaluate_ranking,
)
from .ranking import (
    SCHEMES,
    ConsensusRanking,
    ConsensusSpec,
    builtin_consensus,
    rank_all,
    run_consensus,
    scheme_pathways,
)

# display name of each canonical scorer within its pathway
SCORER_LABELS = {
    "autodock": "autodock",
    "diffdock": "diffdock",
    "gnina_ad": "gnina",
    "gnina_dd": "gnina",
    "nmdn_ad": "nmdn",
    "nmdn_dd": "nmdn",
}

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Method:
    """One row family of the summary tables: a pathway plus a scheme."""

    pathway: str
    scheme: str
    scorer: str | None = None
    consensus: ConsensusSpec | None = None


def resolve_schemes(names: Iterable[str]) -> list[str]:
    out: list[str] = []
    for n in names:
        for part in str(n).split(","):
            key = part.strip().lower()
            if not key:
                continue
            for k in SCHEMES if key == "all" else (key,):
                if k not in out:
                    out.append(k)
    return out


def consensus_methods(schemes: Sequence[str], pathway: str = "all",
                      custom: Sequence[ConsensusSpec] = ()) -> list[Method]:
    """Built-in schemes expanded over their applicable pathways, plus custom specs.

    ``pathway`` is ``autodock``, ``diffdock`` or ``all``/``both``; Global is
    only included for the latter.
    """
    wanted = {"autodock", "diffdock", "both"} if pathway in ("all", "both") else {pathway}
    methods = []
    for name in resolve_schemes(schemes):
        for p in scheme_pathways(name):
            if p not in wanted:
                continue
            spec = builtin_consensus(name, p)
            methods.append(Method("global" if p == "both" else p, name, consensus=spec))
    for spec in custom:
        methods.append(Method("custom", spec.name, consensus=spec))
    return methods


def single_methods(ds: ScreenDataset) -> list[Method]:
    return [Method(s.pathway.value, SCORER_LABELS.get(s.scorer_id, s.scorer_id), scorer=s.scorer_id)
            for s in ds.scorer_specs if s.scorer_id in ds.scores]


def _applicable(m: Method, ds: ScreenDataset) -> bool:
    if m.scorer is not None:
        return m.scorer in ds.scores
    return all(s in ds.scores for s in m.consensus.members) and all(
        s in ds.scores for s in m.consensus.filter.thresholds)


@dataclass(frozen=True)
class TargetResult:
    target_id: str
    n_total: int
    n_actives: int
    rows: tuple[tuple[Method, MetricsReport], ...]
    rankings: tuple[tuple[Method, ConsensusRanking], ...]
    labels: dict


def evaluate_target(
    ds: ScreenDataset,
    consensus: Sequence[Method],
    *,
    alpha: float = 20.0,
    ef_pcts: Sequence[float] = (1.0, 10.0),
    policy: Top1Percent | ScoreThreshold = TOP1_PERCENT,
    include_single: bool = True,
    with_metrics: bool = True,
) -> TargetResult:
    """Rank one target every way requested and score each ranking."""
    ds = orient_scores(ds)
    tables = rank_all(ds)
    rows = []
    rankings = []
    if include_single:
        for m in single_methods(ds):
            if with_metrics:
                lib = RankedLibrary.from_rank_table(tables[m.scorer], ds)
                rows.append((m, evaluate_ranking(lib, alpha=alpha, ef_pcts=ef_pcts, policy=policy)))
    for m in consensus:
        if not _applicable(m, ds):
            continue
        cr = run_consensus(ds, m.consensus, tables)
        rankings.append((m, cr))
        if with_metrics:
            lib = RankedLibrary.from_consensus(cr, ds)
            rows.append((m, evaluate_ranking(lib, alpha=alpha, ef_pcts=ef_pcts, policy=policy,
                                             actives_remaining_pct=cr.actives_remaining_pct)))
    labels = dict(zip(ds.ligand_ids, ds.labels.tolist()))
    return TargetResult(ds.target_id, ds.n_total, ds.n_actives, tuple(rows), tuple(rankings), labels)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """Map preserving input order; a process pool is used when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
