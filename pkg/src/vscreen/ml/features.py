"""Feature recipes and the default 17 + 25 column feature matrix.

Feature kinds and their operands:

==================  =========================  ====================================
kind                operands                   value
==================  =========================  ====================================
score               scorer                     oriented score (missing -> worst)
pct                 scorer                     (rank - 1) / (N - 1), missing -> 1
consensus_pct       consensus key              position in consensus order, scaled
pct_mean/std/...    scorers                    statistic over the listed pct values
slog                scorer                     sign(s) * log(1 + |s|)
square              scorer                     s ** 2
product             scorer, scorer             s_a * s_b
pct_diff            scorer, scorer             pct_a - pct_b
==================  =========================  ====================================

``pct_std`` is the population standard deviation; ``pct_median`` of an even
count is the midpoint.  All statistics use the imputed values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from ..data import ScreenDataset, is_oriented
from ..errors import ConfigError
from ..ranking import ConsensusRanking, RankTable, builtin_consensus, rank_all, run_consensus

RECIPE_VERSION = 1

SCORERS = ("autodock", "diffdock", "gnina_ad", "gnina_dd", "nmdn_ad", "nmdn_dd")
RESCORERS = ("gnina_ad", "gnina_dd", "nmdn_ad", "nmdn_dd")
CONSENSUS_KEYS = ("autodock", "diffdock", "global")

_PER_SCORER = {"score", "pct", "slog", "square"}
_PAIRWISE = {"product", "pct_diff"}
_PCT_STATS = {"pct_mean", "pct_std", "pct_min", "pct_max", "pct_median", "pct_range"}
KINDS = _PER_SCORER | _PAIRWISE | _PCT_STATS | {"consensus_pct"}


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    operands: tuple[str, ...]


@dataclass(frozen=True)
class FeatureRecipe:
    features: tuple[FeatureDef, ...]
    n_primary: int
    version: int = RECIPE_VERSION

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        for f in self.features:
            if f.kind not in KINDS:
                raise ConfigError(f"feature {f.name!r}: unknown kind {f.kind!r}")
            arity = 1 if f.kind in _PER_SCORER | {"consensus_pct"} else 2 if f.kind in _PAIRWISE else None
            if arity is not None and len(f.operands) != arity:
                raise ConfigError(f"feature {f.name!r}: {f.kind} takes {arity} operand(s)")
            if f.kind in _PCT_STATS and not f.operands:
                raise ConfigError(f"feature {f.name!r}: needs at least one scorer")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def n_total(self) -> int:
        return len(self.features)

    def scorers(self) -> set[str]:
        return {op for f in self.features if f.kind != "consensus_pct" for op in f.operands}


def default_recipe() -> FeatureRecipe:
    f = []
    f += [FeatureDef(f"score_{s}", "score", (s,)) for s in SCORERS]
    f += [FeatureDef(f"pct_{s}", "pct", (s,)) for s in SCORERS]
    f += [FeatureDef(f"cc_medium_pct_{k}", "consensus_pct", (k,)) for k in CONSENSUS_KEYS]
    f += [FeatureDef("pct_mean", "pct_mean", SCORERS), FeatureDef("pct_std", "pct_std", SCORERS)]
    n_primary = len(f)
    f += [FeatureDef(f"slog_{s}", "slog", (s,)) for s in SCORERS]
    f += [FeatureDef(f"sq_{s}", "square", (s,)) for s in SCORERS]
    f += [FeatureDef(f"prod_{a}_{b}", "product", (a, b)) for a, b in itertools.combinations(RESCORERS, 2)]
    f += [
        FeatureDef("pctdiff_gnina", "pct_diff", ("gnina_ad", "gnina_dd")),
        FeatureDef("pctdiff_nmdn", "pct_diff", ("nmdn_ad", "nmdn_dd")),
        FeatureDef("pctdiff_baseline", "pct_diff", ("autodock", "diffdock")),
    ]
    f += [FeatureDef(f"pct_{stat}", f"pct_{stat}", SCORERS) for stat in ("min", "max", "median", "range")]
    return FeatureRecipe(tuple(f), n_primary)


def recipe_to_dict(recipe: FeatureRecipe) -> dict:
    return {
        "version": recipe.version,
        "n_primary": recipe.n_primary,
        "features": [{"name": f.name, "kind": f.kind, "operands": list(f.operands)}
                     for f in recipe.features],
    }


def recipe_from_dict(doc: Mapping) -> FeatureRecipe:
    try:
        if int(doc.get("version", RECIPE_VERSION)) != RECIPE_VERSION:
            raise ConfigError(f"unsupported recipe version {doc.get('version')!r}")
        feats = tuple(FeatureDef(str(e["name"]), str(e["kind"]), tuple(map(str, e["operands"])))
                      for e in doc["features"])
        return FeatureRecipe(feats, int(doc.get("n_primary", len(feats))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad feature recipe: {exc!r}") from None


def load_recipe(path: str | Path) -> FeatureRecipe:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"recipe file not found: {path}") from None
    return recipe_from_dict(doc)


def save_recipe(recipe: FeatureRecipe, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(recipe_to_dict(recipe), sort_keys=False), encoding="utf-8")


@dataclass
class FeatureMatrix:
    values: np.ndarray
    names: tuple[str, ...]
    ligand_ids: tuple[str, ...]
    labels: np.ndarray
    target_id: str = ""
    missing_counts: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.intp)
        return FeatureMatrix(self.values[idx], self.names,
                             tuple(self.ligand_ids[i] for i in idx), self.labels[idx],
                             self.target_id,
                             None if self.missing_counts is None else self.missing_counts[idx])


def feature_inputs(ds: ScreenDataset) -> tuple[dict[str, RankTable], dict[str, ConsensusRanking]]:
    """Rank tables for every scorer and the three CC-Medium consensus rankings."""
    tables = rank_all(ds)
    cons = {}
    for key in CONSENSUS_KEYS:
        spec = builtin_consensus("global", "both") if key == "global" else builtin_consensus("cc-medium", key)
        if all(m in ds.scores for m in spec.members):
            cons[key] = run_consensus(ds, spec, tables)
    return tables, cons


def build_features(
    ds: ScreenDataset,
    rank_tables: Mapping[str, RankTable] | None = None,
    consensus: Mapping[str, ConsensusRanking] | None = None,
    recipe: FeatureRecipe | None = None,
) -> FeatureMatrix:
    """Evaluate a recipe on an oriented dataset, one row per ligand."""
    recipe = recipe or default_recipe()
    if not is_oriented(ds):
        raise ConfigError("build_features needs an oriented dataset")
    if rank_tables is None or consensus is None:
        t, c = feature_inputs(ds)
        rank_tables = rank_tables if rank_tables is not None else t
        consensus = consensus if consensus is not None else c
    unknown = sorted(s for s in recipe.scorers() if s not in ds.scores or s not in rank_tables)
    if unknown:
        raise ConfigError(f"recipe references unavailable scorer(s) {unknown}")

    n = ds.n_total
    denom = max(n - 1, 1)
    raw: dict[str, np.ndarray] = {}
    pct: dict[str, np.ndarray] = {}
    missing_counts = np.zeros(n, dtype=np.int64)
    for s in sorted(recipe.scorers()):
        vals = ds.scores[s]
        miss = np.isnan(vals)
        missing_counts += miss
        worst = float(np.nanmin(vals)) if (~miss).any() else 0.0
        raw[s] = np.where(miss, worst, vals)
        p = (rank_tables[s].array - 1) / denom
        pct[s] = np.where(miss, 1.0, p)

    cons_pct: dict[str, np.ndarray] = {}
    pos = {lid: i for i, lid in enumerate(ds.ligand_ids)}
    for f in recipe.features:
        if f.kind == "consensus_pct":
            key = f.operands[0]
            if key not in consensus:
                raise ConfigError(f"feature {f.name!r}: no consensus ranking {key!r}")
            if key not in cons_pct:
                arr = np.empty(n)
                for k, lid in enumerate(consensus[key].full_order()):
                    arr[pos[lid]] = k / denom
                cons_pct[key] = arr

    cols = []
    for f in recipe.features:
        ops = f.operands
        if f.kind == "score":
            col = raw[ops[0]]
        elif f.kind == "pct":
            col = pct[ops[0]]
        elif f.kind == "consensus_pct":
            col = cons_pct[ops[0]]
        elif f.kind == "slog":
            col = np.sign(raw[ops[0]]) * np.log1p(np.abs(raw[ops[0]]))
        elif f.kind == "square":
            col = raw[ops[0]] ** 2
        elif f.kind == "product":
            col = raw[ops[0]] * raw[ops[1]]
        elif f.kind == "pct_diff":
            col = pct[ops[0]] - pct[ops[1]]
        else:
            stack = np.column_stack([pct[s] for s in ops])
            col = {
                "pct_mean": lambda m: m.mean(axis=1),
                "pct_std": lambda m: m.std(axis=1),
                "pct_min": lambda m: m.min(axis=1),
                "pct_max": lambda m: m.max(axis=1),
                "pct_median": lambda m: np.median(m, axis=1),
                "pct_range": lambda m: m.max(axis=1) - m.min(axis=1),
            }[f.kind](stack)
        cols.append(np.asarray(col, dtype=np.float64))

    values = np.column_stack(cols) if cols else np.empty((n, 0))
    return FeatureMatrix(values, recipe.names, ds.ligand_ids, ds.labels.copy(),
                         ds.target_id, missing_counts)
