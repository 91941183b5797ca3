"""Attribution engines, importance summaries and attribution clustering."""

from .clusters import ClusterResult, kmeans, shap_clusters, silhouette
from .importance import (
    ImportanceTable,
    PairInteractions,
    PermutationImportance,
    SignificanceResult,
    correct_only_importance,
    pair_interactions,
    permutation_importance,
    shap_significance,
    unify_importance,
)
from .shap import ShapMatrix, explain_model, expected_value, linear_shap, mc_shapley, tree_shap, tree_shap_single

__all__ = [
    "ClusterResult",
    "ImportanceTable",
    "PairInteractions",
    "PermutationImportance",
    "ShapMatrix",
    "SignificanceResult",
    "correct_only_importance",
    "expected_value",
    "explain_model",
    "kmeans",
    "linear_shap",
    "mc_shapley",
    "pair_interactions",
    "permutation_importance",
    "shap_clusters",
    "shap_significance",
    "silhouette",
    "tree_shap",
    "tree_shap_single",
    "unify_importance",
]
