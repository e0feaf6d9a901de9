"""Classifiers, metrics and Shapley attribution."""
from .gbdt import PRESETS, GbdtConfig, GbdtModel, Tree, train_gbdt
from .logistic import LogisticModel, sigmoid, train_logistic
from .metrics import Metrics, evaluate, log_loss, roc_auc, roc_points
from .shapley import Attribution, background_sample, global_importance, shapley_attribution

FORMAT_VERSION = 1


def predict_proba(model, X):
    return model.predict_proba(X)


def model_to_dict(model) -> dict:
    return {"format_version": FORMAT_VERSION, **model.to_dict()}


def model_from_dict(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
    kinds = {"logistic": LogisticModel, "gbdt": GbdtModel}
    return kinds[d["kind"]].from_dict(d)


__all__ = [
    "PRESETS", "GbdtConfig", "GbdtModel", "Tree", "train_gbdt",
    "LogisticModel", "sigmoid", "train_logistic",
    "Metrics", "evaluate", "log_loss", "roc_auc", "roc_points",
    "Attribution", "background_sample", "global_importance", "shapley_attribution",
    "predict_proba", "model_to_dict", "model_from_dict", "FORMAT_VERSION",
]
