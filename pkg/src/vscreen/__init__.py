"""Post-processing of multi-engine docking score tables.

Loads per-target score tables, builds filtered weighted rank-consensus
rankings, scores rankings with early-enrichment and classification metrics,
and trains MLP re-rankers on engineered score features.
"""

from .data import (
    DEFAULT_SCORERS,
    Direction,
    Pathway,
    ScoreRecord,
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
from .metrics import (
    RankedLibrary,
    ScoreThreshold,
    Top1Percent,
    aggregate,
    bedroc,
    classical_metrics,
    enrichment_factor,
    evaluate_ranking,
    roc_auc,
)
from .ranking import (
    ConsensusSpec,
    FilterSpec,
    apply_filter,
    assign_ranks,
    builtin_consensus,
    consensus_rank,
    run_consensus,
)
from .synth import SyntheticSpec, generate_synthetic, random_baseline

__version__ = "0.1.0"
