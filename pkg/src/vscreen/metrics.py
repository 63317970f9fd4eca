"""Early-enrichment and classification metrics for ranked libraries."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import ScreenDataset
from .errors import ArgumentError, UndefinedMetricError, UnsupportedInputError
from .ranking import ConsensusRanking, RankTable


@dataclass(frozen=True)
class RankedLibrary:
    """A best-first list of the ligands still in play after filtering.

    ``n_total_library`` (N) and ``n_actives_total`` (n) describe the original
    library, so metrics on a filtered list are still normalized against it.
    ``scores`` is optional and only needed by score-threshold policies.
    """

    ligand_ids: tuple[str, ...]
    labels: np.ndarray
    n_total_library: int
    n_actives_total: int
    scores: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        object.__setattr__(self, "labels", labels)
        if len(self.ligand_ids) != labels.size:
            raise ArgumentError("ligand_ids and labels differ in length")
        if labels.size > self.n_total_library:
            raise ArgumentError("retained_count exceeds n_total_library")
        if self.n_total_library < 1:
            raise ArgumentError("empty library")
        if int(labels.sum()) > self.n_actives_total:
            raise ArgumentError("more actives retained than exist in the library")

    @property
    def retained_count(self) -> int:
        return int(self.labels.size)

    @property
    def is_complete(self) -> bool:
        return self.retained_count == self.n_total_library

    @classmethod
    def from_scores(cls, scores, labels, ligand_ids: Sequence[str] | None = None) -> "RankedLibrary":
        """Rank a full library by oriented score (higher first, NaN last).

        Ties go to the smaller ligand id, or the earlier position when ids
        are not given.
        """
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
        missing = np.isnan(scores)
        key = np.where(missing, 0.0, -scores)
        tiebreak = np.arange(scores.size) if ligand_ids is None else np.asarray(ligand_ids, dtype=str)
        order = np.lexsort((tiebreak, key, missing))
        ids = tuple(str(i) for i in order) if ligand_ids is None else tuple(ligand_ids[i] for i in order)
        return cls(ids, labels[order], scores.size, int(labels.sum()), scores[order])

    @classmethod
    def from_rank_table(cls, table: RankTable, ds: ScreenDataset) -> "RankedLibrary":
        order = np.argsort(table.array, kind="stable")
        pos = {lid: i for i, lid in enumerate(ds.ligand_ids)}
        idx = np.array([pos[table.ligand_ids[i]] for i in order], dtype=np.intp)
        scores = ds.scores[table.scorer_id][idx]
        return cls(tuple(ds.ligand_ids[i] for i in idx), ds.labels[idx],
                   ds.n_total, ds.n_actives, scores)

    @classmethod
    def from_consensus(cls, ranking: ConsensusRanking, ds: ScreenDataset) -> "RankedLibrary":
        pos = {lid: i for i, lid in enumerate(ds.ligand_ids)}
        ids = tuple(lid for lid, _ in ranking.retained)
        labels = np.array([ds.labels[pos[lid]] for lid in ids], dtype=np.int8)
        # lower average rank is better; negate so higher = better
        scores = -np.array([r for _, r in ranking.retained], dtype=np.float64)
        return cls(ids, labels, ds.n_total, ds.n_actives, scores)


def _require_actives(lib: RankedLibrary) -> None:
    if lib.n_actives_total < 1:
        raise UndefinedMetricError("no actives in library: enrichment undefined")


def ef_window(n_total: int, x_pct: float) -> int:
    return max(1, math.floor(n_total * x_pct / 100.0))


def enrichment_factor(lib: RankedLibrary, x_pct: float) -> float:
    """EF@x%: active rate in the top-x% window over the library active rate.

    The window size is ``max(1, floor(N * x / 100))`` on the full library.
    If filtering left fewer ligands than that, only those are inspected but
    the window size stays the denominator.
    """
    if not (0.0 < x_pct <= 100.0):
        raise ArgumentError(f"x_pct must be in (0, 100], got {x_pct}")
    _require_actives(lib)
    n_total, n_act = lib.n_total_library, lib.n_actives_total
    w = ef_window(n_total, x_pct)
    hits = int(lib.labels[: min(w, lib.retained_count)].sum())
    return (hits * n_total) / (w * n_act)


def bedroc(lib: RankedLibrary, alpha: float = 20.0) -> float:
    """Boltzmann-enhanced discrimination of ROC, clamped to [0, 1].

    RIE divides the exponential sum over active ranks by its expectation
    under a uniformly random ranking, so RIE_min and RIE_max are exactly the
    worst- and best-case values.
    """
    if not (alpha > 0):
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    _require_actives(lib)
    if not lib.is_complete:
        raise UnsupportedInputError("BEDROC needs a complete ranking of the library")
    n_total, n = lib.n_total_library, lib.n_actives_total
    if n == n_total:
        raise UndefinedMetricError("BEDROC undefined when every ligand is active")
    ra = n / n_total
    positions = np.flatnonzero(lib.labels == 1) + 1
    num = math.fsum(np.exp(-alpha * positions / n_total).tolist())
    random_sum = ra * -math.expm1(-alpha) / math.expm1(alpha / n_total)
    rie = num / random_sum
    rie_min = math.expm1(alpha * ra) / (ra * math.expm1(alpha))
    rie_max = math.expm1(-alpha * ra) / (ra * math.expm1(-alpha))
    value = (rie - rie_min) / (rie_max - rie_min)
    return min(1.0, max(0.0, value))


def bedroc_random(n_total: int, n_actives: int, alpha: float = 20.0) -> float:
    """BEDROC of a ranking whose RIE equals its random expectation (RIE = 1)."""
    ra = n_actives / n_total
    rie_min = math.expm1(alpha * ra) / (ra * math.expm1(alpha))
    rie_max = math.expm1(-alpha * ra) / (ra * math.expm1(-alpha))
    return (1.0 - rie_min) / (rie_max - rie_min)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with tie-averaged ranks; NaN scores rank lowest."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = int((labels == 1).sum())
    m = int((labels == 0).sum())
    if n == 0 or m == 0:
        raise UndefinedMetricError("ROC-AUC needs at least one active and one inactive")
    ranks = rankdata(np.where(np.isnan(scores), -np.inf, scores), method="average")
    r_act = math.fsum(ranks[labels == 1].tolist())
    return (r_act - n * (n + 1) / 2.0) / (n * m)


# ---------------------------------------------------------------------------
# Classical confusion-matrix metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Top1Percent:
    """Predict the first max(1, floor(N/100)) ranked ligands as active."""

    def __str__(self) -> str:
        return "top1%"


@dataclass(frozen=True)
class ScoreThreshold:
    """Predict retained ligands with score >= value as active."""

    value: float

    def __str__(self) -> str:
        return f"score>={self.value:g}"


TOP1_PERCENT = Top1Percent()


@dataclass(frozen=True)
class ClassicalMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    balanced_accuracy: float
    mcc: float
    threshold_policy: Top1Percent | ScoreThreshold = TOP1_PERCENT

    @property
    def sensitivity(self) -> float:
        return self.recall


def confusion_metrics(tp: int, fp: int, fn: int, tn: int,
                      policy: Top1Percent | ScoreThreshold = TOP1_PERCENT) -> ClassicalMetrics:
    """Metrics from a confusion matrix; F1 and MCC are 0 when degenerate."""
    total = tp + fp + fn + tn
    pos, neg = tp + fn, fp + tn
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("classical metrics need both actives and inactives")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / pos
    specificity = tn / neg
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    denom = (tp + fp) * pos * neg * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return ClassicalMetrics(
        tp, fp, fn, tn,
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        balanced_accuracy=(recall + specificity) / 2,
        mcc=mcc,
        threshold_policy=policy,
    )


def classical_metrics(lib: RankedLibrary,
                      policy: Top1Percent | ScoreThreshold = TOP1_PERCENT) -> ClassicalMetrics:
    """Confusion-matrix metrics over the full library.

    Ligands removed by a filter count as predicted negatives.
    """
    n_total, n_act = lib.n_total_library, lib.n_actives_total
    if n_act < 1 or n_act == n_total:
        raise UndefinedMetricError("classical metrics need both actives and inactives")
    if isinstance(policy, ScoreThreshold):
        if lib.scores is None:
            raise ArgumentError("score-threshold policy needs scores in the ranked library")
        predicted = lib.labels[lib.scores >= policy.value]
    else:
        predicted = lib.labels[: min(ef_window(n_total, 1.0), lib.retained_count)]
    tp = int(predicted.sum())
    fp = int(predicted.size - tp)
    fn = n_act - tp
    tn = (n_total - n_act) - fp
    return confusion_metrics(tp, fp, fn, tn, policy)


# ---------------------------------------------------------------------------
# Reports and aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    ef: Mapping[float, float]
    bedroc: float | None
    alpha: float
    roc_auc: float | None
    actives_remaining_pct: float | None
    classical: ClassicalMetrics

    @property
    def ef1(self) -> float:
        return self.ef[1.0]

    @property
    def ef10(self) -> float:
        return self.ef[10.0]


def evaluate_ranking(
    lib: RankedLibrary,
    *,
    alpha: float = 20.0,
    ef_pcts: Iterable[float] = (1.0, 10.0),
    policy: Top1Percent | ScoreThreshold = TOP1_PERCENT,
    actives_remaining_pct: float | None = None,
    auc_scores=None,
) -> MetricsReport:
    """Full report for one ranking.

    BEDROC and ROC-AUC are only computed when the ranking covers the whole
    library; ``auc_scores`` are the library-order scores for ROC-AUC (the
    ranked scores are used when omitted).
    """
    pcts = sorted({1.0, 10.0, *map(float, ef_pcts)})
    ef = {x: enrichment_factor(lib, x) for x in pcts}
    bd = auc = None
    if lib.is_complete:
        bd = bedroc(lib, alpha)
        if auc_scores is not None:
            auc = roc_auc(auc_scores[0], auc_scores[1])
        elif lib.scores is not None:
            auc = roc_auc(lib.scores, lib.labels)
    return MetricsReport(ef, bd, float(alpha), auc, actives_remaining_pct,
                         classical_metrics(lib, policy))


SUMMARY_METRICS = ("ef1", "ef10", "roc_auc", "bedroc", "actives_remaining_pct",
                   "accuracy", "precision", "recall", "f1", "balanced_accuracy", "mcc")


def report_values(report: MetricsReport) -> dict[str, float | None]:
    c = report.classical
    return {
        "ef1": report.ef1,
        "ef10": report.ef10,
        "roc_auc": report.roc_auc,
        "bedroc": report.bedroc,
        "actives_remaining_pct": report.actives_remaining_pct,
        "accuracy": c.accuracy,
        "precision": c.precision,
        "recall": c.recall,
        "f1": c.f1,
        "balanced_accuracy": c.balanced_accuracy,
        "mcc": c.mcc,
    }


@dataclass
class SummaryReport:
    """Median and mean of each metric across targets for one method."""

    pathway: str
    scheme: str
    n_targets: int
    median: dict[str, float | None] = field(default_factory=dict)
    mean: dict[str, float | None] = field(default_factory=dict)
    success_times: int = 0


def _mean(values: list[float]) -> float:
    # fsum then divide can land one ulp outside [min, max]
    return min(max(statistics.fmean(values), min(values)), max(values))


def aggregate(reports: Mapping[str, MetricsReport] | Mapping[str, Mapping[str, float | None]],
              scheme: str, pathway: str = "") -> SummaryReport:
    """Summarize per-target reports; success = EF1% > 1."""
    if not reports:
        raise ArgumentError("aggregate needs at least one target report")
    rows = [r if isinstance(r, Mapping) else report_values(r) for r in reports.values()]
    out = SummaryReport(pathway, scheme, len(rows))
    for key in SUMMARY_METRICS:
        vals = [float(r[key]) for r in rows if r.get(key) is not None and not math.isnan(r[key])]
        out.median[key] = statistics.median(vals) if vals else None
        out.mean[key] = _mean(vals) if vals else None
    out.success_times = sum(1 for r in rows if r["ef1"] > 1.0)
    return out
