"""Supervised re-ranking: features, robust scaling and MLP training."""

from .features import (
    FeatureDef,
    FeatureMatrix,
    FeatureRecipe,
    build_features,
    default_recipe,
    feature_inputs,
    load_recipe,
    save_recipe,
)
from .network import DEEP, WNN, NetConfig, preset
from .scaling import ScalerParams, apply_scaler, fit_scaler
from .training import (
    ModelEvaluation,
    TrainedModel,
    delta_pct,
    evaluate_model,
    format_delta,
    load_model,
    predict,
    save_model,
    split_dataset,
    train_mlp,
)

__all__ = [
    "DEEP", "WNN", "FeatureDef", "FeatureMatrix", "FeatureRecipe", "ModelEvaluation",
    "NetConfig", "ScalerParams", "TrainedModel", "apply_scaler", "build_features",
    "default_recipe", "delta_pct", "evaluate_model", "feature_inputs", "fit_scaler",
    "format_delta", "load_model", "load_recipe", "predict", "preset", "save_model",
    "save_recipe", "split_dataset", "train_mlp",
]
