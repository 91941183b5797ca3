"""Survival models, metrics, hazard-to-binary translation and attributions."""

from .attributions import SurvivalAttribution, permutation_importance_ci, survival_attributions, survival_shapley
from .cox import CoxElasticNet, fit_cox_en, partial_log_likelihood
from .metrics import BrierResult, brier_scores, concordance_index, cumulative_dynamic_auc, integrated_brier
from .nonparametric import (
    HazardCurve,
    SurvivalData,
    censoring_survival,
    eval_survivor,
    kaplan_meier,
    nelson_aalen,
    step_interpolate,
    survival_target,
)
from .rsf import RandomSurvivalForest, fit_rsf
from .translate import (
    ClassMedianCurves,
    TranslationResult,
    chf_to_binary,
    class_median_curves,
    horizon_labels,
    translation_grid,
)


def curves_long_form(chf, grid, row_ids=None):
    """Rows of (row_id, time, chf) for CSV export."""
    row_ids = range(len(chf)) if row_ids is None else row_ids
    return [(rid, float(t), float(v)) for rid, row in zip(row_ids, chf) for t, v in zip(grid, row)]

__all__ = [
    "BrierResult",
    "ClassMedianCurves",
    "CoxElasticNet",
    "HazardCurve",
    "RandomSurvivalForest",
    "SurvivalAttribution",
    "SurvivalData",
    "TranslationResult",
    "brier_scores",
    "censoring_survival",
    "chf_to_binary",
    "class_median_curves",
    "concordance_index",
    "cumulative_dynamic_auc",
    "curves_long_form",
    "eval_survivor",
    "fit_cox_en",
    "fit_rsf",
    "horizon_labels",
    "integrated_brier",
    "kaplan_meier",
    "nelson_aalen",
    "partial_log_likelihood",
    "permutation_importance_ci",
    "step_interpolate",
    "survival_attributions",
    "survival_shapley",
    "survival_target",
    "translation_grid",
]
