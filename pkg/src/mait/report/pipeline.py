"""End-to-end pipeline: configuration in, ReportBundle (and files on disk) out."""

import csv
import json
import os
import shutil
import time
from contextlib import contextmanager

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from .._utils import derive_rng, derive_seed, resolve_threads
from ..data import (
    BINARY_OUTCOME,
    CONTINUOUS,
    IDENTIFIER,
    OUTCOME_KINDS,
    _detect_delimiter,
    composite_key,
    load_table,
    stratified_split,
    validate_table,
)
from ..eval import (
    SplitConformalClassifier,
    compute_metrics,
    cross_validate,
    coverage,
    isotonic_calibrate,
    net_benefit_curve,
    random_search,
    select_best,
    uncertainty_filter,
)
from ..eval.dca import default_grid
from ..eval.metrics import METRIC_NAMES
from ..exceptions import ConfigError, DataError, MaitError
from ..explain import (
    correct_only_importance,
    explain_model,
    pair_interactions,
    permutation_importance,
    shap_clusters,
    shap_significance,
    unify_importance,
)
from ..feature_select import mrmr_rank
from ..models.zoo import DEFAULTS, ModelSpec, class_weights, fit_classifier, fit_regressor, predict_proba, predict_value
from ..models.serialize import dump_model
from ..preprocess import (
    apply_knn_impute,
    apply_one_hot,
    apply_rare_merge,
    apply_robust_scale,
    fit_knn_impute,
    fit_one_hot,
    fit_rare_merge,
    fit_robust_scale,
    LabelPropagation,
    random_oversample,
)
from ..quality import IsolationForest, association_report, quality_profile
from ..survival import (
    CoxElasticNet,
    RandomSurvivalForest,
    chf_to_binary,
    concordance_index,
    cumulative_dynamic_auc,
    horizon_labels,
    integrated_brier,
    nelson_aalen,
    permutation_importance_ci,
    step_interpolate,
    survival_shapley,
    translation_grid,
)
from . import figures
from .artifacts import ReportBundle, Section
from .render import render_report

FORMAT_VERSION = "1"
# settings that may differ between otherwise identical runs; kept out of CSVs
RUNTIME_KEYS = ("run.threads", "run.out")


class StageError(Exception):
    """A pipeline stage failed; ``cause`` keeps the original exception."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self):
        if isinstance(self.cause, ConfigError):
            return 2
        if isinstance(self.cause, DataError):
            return 3
        return 4


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - every failure gets tagged with its stage
        raise StageError(name, exc) from exc


# -- data ------------------------------------------------------------------------------


def _read_header(path):
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\r\n")
    return next(csv.reader([first], delimiter=_detect_delimiter(first)))


def load_configured_table(cfg, path):
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    specs = cfg.column_specs(_read_header(path))
    t = load_table(path, specs, tuple(cfg["data"]["sentinels"]))
    violations = validate_table(t, require_outcome=not cfg["preprocess"]["label_propagation"])
    if cfg["preprocess"]["label_propagation"]:
        # only the binary outcome may be missing (it gets propagated)
        violations += [
            v for v in validate_table(t, require_outcome=True)
            if v.code == "MISSING_OUTCOME" and t.spec(v.column).kind != BINARY_OUTCOME
        ]
    if violations:
        shown = "; ".join(f"{v.code} {v.column or ''} row {v.row}: {v.message}" for v in violations[:10])
        raise DataError(f"{len(violations)} data violation(s): {shown}")
    return t


def _feature_table(t):
    drop = [s.name for s in t.specs if s.kind in OUTCOME_KINDS or s.kind == IDENTIFIER]
    return t.drop(drop)


def _strata(cfg, t):
    cols = list(cfg["run"]["strata"])
    if not cols:
        if "classify" in cfg.modes:
            cols = [cfg["classify"]["outcome"]]
        elif "survival" in cfg.modes:
            cols = [cfg["survival"]["event"]]
        else:
            cols = [cfg["regression"]["outcome"]]
    return cols, composite_key(t, cols)


def development_split(cfg, table):
    """Seeded stratified train/test split of the development table.

    Returns ``(strata_columns, plan, train_table, test_table)``.
    """
    strata_cols, tokens = _strata(cfg, table)
    plan = stratified_split(table, tokens, cfg["run"]["test_fraction"], derive_seed(cfg.seed, "split"))
    return strata_cols, plan, table.take(plan.train_indices), table.take(plan.test_indices)


class Preprocessor:
    """Rare-merge, one-hot, kNN imputation and robust scaling fit on the training split."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.states = []

    def fit(self, t, provenance):
        p = self.cfg["preprocess"]
        f = _feature_table(t)
        self.rare = fit_rare_merge(f, p["rare_min_fraction"], provenance)
        f = apply_rare_merge(self.rare, f)
        self.onehot = fit_one_hot(f, provenance)
        f = apply_one_hot(self.onehot, f)
        self.knn = fit_knn_impute(f, p["knn_k"], provenance)
        f = apply_knn_impute(self.knn, f)
        self.states = [("rare_merge", self.rare), ("one_hot", self.onehot), ("knn_impute", self.knn)]
        if p["scale"]:
            self.scale = fit_robust_scale(f, provenance)
            self.states.append(("robust_scale", self.scale))
        self.feature_names = f.columns_of_kind(CONTINUOUS)
        return self

    def transform(self, t):
        f = apply_knn_impute(self.knn, apply_one_hot(self.onehot, apply_rare_merge(self.rare, _feature_table(t))))
        if self.cfg["preprocess"]["scale"]:
            f = apply_robust_scale(self.scale, f)
        return f.matrix(self.feature_names)


# -- helpers -----------------------------------------------------------------------


def _metric_row(label, m):
    return [label] + [getattr(m, k) for k in METRIC_NAMES] + [m.tp, m.fp, m.tn, m.fn, m.threshold, ";".join(m.flags)]


METRIC_HEADER = ["set"] + list(METRIC_NAMES) + ["tp", "fp", "tn", "fn", "threshold", "flags"]


def _row_weights(y, balanced):
    return class_weights(y).sample_weights(y) if balanced else np.ones(len(y))


def _subsample(n, k, seed, key):
    if n <= k:
        return np.arange(n)
    return np.sort(derive_rng(seed, key).choice(n, k, replace=False))


def _json(d):
    return json.dumps({k: (v.item() if hasattr(v, "item") else v) for k, v in sorted(d.items())}, sort_keys=True)


# -- stages ---------------------------------------------------------------------------


def _quality_section(cfg, t, outcome, seed, threads):
    q = cfg["quality"]
    sec = Section("quality", "Data quality")
    prof = quality_profile(t, rare_min_fraction=q["rare_min_fraction"])
    sec.table(
        "quality_columns",
        ["column", "kind", "missing_fraction", "near_constant", "rare_categories"],
        [
            [s.name, s.kind, prof.per_column_missing_fraction[s.name], s.name in prof.near_constant_columns,
             "|".join(prof.rare_categories.get(s.name, []))]
            for s in t.specs
        ],
        "Per-column missingness, near-constant flags and rare categories (development data)",
    )
    rows_missing = prof.per_row_missing_fraction
    sec.table(
        "quality_rows",
        ["rows", "rows_with_missing", "max_row_missing_fraction", "mean_row_missing_fraction"],
        [[t.row_count, int(np.sum(rows_missing > 0)), float(rows_missing.max(initial=0.0)), float(rows_missing.mean()) if len(rows_missing) else 0.0]],
        "Row-level missingness summary",
    )
    assoc = None
    if outcome is not None:
        assoc = association_report(t, outcome, q["n_bootstrap"], 0.95, q["mi_bins"], derive_seed(seed, "assoc"), threads)
    return sec, assoc


def _association_section(assoc):
    sec = Section("associations", "Correlations and outcome associations")
    if assoc is None:
        return sec
    names = assoc.spearman_names
    sec.table(
        "spearman_matrix",
        ["feature"] + names,
        [[n] + list(row) for n, row in zip(names, assoc.spearman)],
        "Pairwise Spearman correlation (pairwise-complete rows)",
        in_html=len(names) <= 12,
    )
    sec.figure("spearman_heatmap", figures.heatmap_figure(names, assoc.spearman), "Spearman correlation heatmap")
    rows = []
    for name, mi in assoc.mutual_information.items():
        pb = assoc.point_biserial.get(name)
        rows.append([
            name,
            None if pb is None else pb.estimate, None if pb is None else pb.lower, None if pb is None else pb.upper,
            mi.estimate, mi.lower, mi.upper,
        ])
    sec.table(
        "outcome_associations",
        ["feature", "point_biserial", "pb_lower95", "pb_upper95", "mutual_information_nats", "mi_lower95", "mi_upper95"],
        rows,
        f"Feature-outcome associations with {assoc.n_bootstrap}-resample bootstrap 95% intervals",
    )
    return sec


def _classify(cfg, bundle, train_t, test_t, pre, x_train, x_test, names, seed, threads):
    c = cfg["classify"]
    outcome = c["outcome"]
    y_train = train_t.column(outcome).copy()
    y_test = test_t.column(outcome).copy()

    prep = bundle.section("preprocess")
    if np.isnan(y_train).any():
        with stage("label_propagation"):
            if not cfg["preprocess"]["label_propagation"]:
                raise DataError("missing outcome labels in training data")
            lp = LabelPropagation().fit(x_train, y_train)
            filled = np.isnan(y_train)
            prep.table(
                "label_propagation",
                ["row", "propagated_label", "confidence"],
                [[int(i), int(lp.labels_[i]), float(lp.confidence_[i])] for i in np.flatnonzero(filled)],
                f"Labels propagated to {int(filled.sum())} unlabeled training rows ({lp.n_iter_} iterations)",
            )
            y_train = lp.labels_.astype(float)
    keep_test = ~np.isnan(y_test)
    x_test, y_test = x_test[keep_test], y_test[keep_test]
    y_train = y_train.astype(int)
    y_test = y_test.astype(int)

    sel_names = list(names)
    if cfg["feature_selection"]["enabled"]:
        with stage("feature_selection"):
            fs = cfg["feature_selection"]
            rank = mrmr_rank(x_train, y_train, min(fs["k"], x_train.shape[1]), names, fs["bins"])
            sec = Section("feature_selection", "Feature selection (mRMR)")
            sec.table(
                "mrmr_ranking",
                ["step", "feature", "relevance_mi", "redundancy", "score"],
                [[i + 1, n, r, d, s] for i, (n, r, d, s) in enumerate(zip(rank.names, rank.relevance, rank.redundancy, rank.score))],
                "Greedy mRMR order (mutual information difference)",
            )
            bundle.sections.append(sec)
            x_train = x_train[:, rank.indices]
            x_test = x_test[:, rank.indices]
            sel_names = list(rank.names)

    with stage("cross_validation"):
        cv = cross_validate(
            c["candidates"], x_train, y_train, k=c["k_folds"], n_iter=c["n_search_iter"],
            seed=derive_seed(seed, "cv"), tuning_enabled=c["tuning"], inner_k=c["inner_k"],
            objective=c["objective"], threshold_tuning=c["threshold_tuning"],
            oversample=c["oversampling"], n_threads=threads, feature_names=sel_names,
            class_weighting=c["class_weighting"],
        )
        winner = select_best(cv)
    sec = Section("cv", "Cross-validation")
    summary = []
    for alg in cv.candidates:
        r = cv.results[alg]
        summary.append([alg] + [v for k in METRIC_NAMES for v in (r.metric_mean(k), r.metric_std(k))] + [r.grand_average, alg == winner])
    sec.table(
        "cv_summary",
        ["algorithm"] + [f"{k}_{s}" for k in METRIC_NAMES for s in ("mean", "sd")] + ["grand_average", "selected"],
        summary,
        f"{c['k_folds']}-fold CV (mean, sd); grand average = mean of (MCC + AUC + PR-AUC)/3",
    )
    fold_rows, pred_rows = [], []
    for alg in cv.candidates:
        for rec in cv.results[alg].folds:
            fold_rows.append([alg, rec.fold] + _metric_row("", rec.metrics)[1:] + [_json(rec.params)])
            pred_rows += [[alg, rec.fold, int(i), int(yv), float(pv)] for i, yv, pv in zip(rec.test_indices, rec.y, rec.p)]
    sec.table("cv_folds", ["algorithm", "fold"] + METRIC_HEADER[1:] + ["hyperparameters"], fold_rows, "Per-fold metrics", in_html=False)
    sec.table("cv_predictions", ["algorithm", "fold", "row", "y", "p"], pred_rows, "Out-of-fold predictions", in_html=False)
    sec.figure(
        "cv_grand_average",
        figures.bar_figure(list(cv.candidates), [cv.grand_average(a) for a in cv.candidates], "Grand average (MCC+AUC+PR-AUC)/3", "Model comparison"),
        "CV grand average per algorithm",
    )
    bundle.sections.append(sec)

    trace = cv.results[winner].threshold_trace
    threshold = trace.final if c["threshold_tuning"] else 0.5
    sec = Section("threshold", "Probability threshold tuning")
    if c["threshold_tuning"]:
        sec.table(
            "threshold_trace",
            ["fold", "estimate", "applied"],
            [[f, e, a] for f, (e, a) in enumerate(zip(trace.estimates, trace.applied))] + [["final", None, trace.final]],
            f"Threshold trace for {winner}; initial = minority fraction {trace.initial:.4g}",
        )
        sec.figure(
            "threshold_trace",
            figures.line_figure(
                [("fold estimate", range(len(trace.estimates)), trace.estimates), ("applied", range(len(trace.applied)), trace.applied)],
                "Outer fold", "Probability threshold", "Threshold trace",
            ),
            "Per-fold estimates and applied thresholds",
        )
    bundle.sections.append(sec)

    with stage("refit"):
        xt, yt = x_train, y_train
        if c["oversampling"]:
            xt, yt, _ = random_oversample(xt, yt, derive_seed(seed, "oversample", "final"))
        weights = _row_weights(yt, c["class_weighting"])
        if c["tuning"]:
            params = random_search(
                winner, xt, yt, None if c["class_weighting"] else weights, c["n_search_iter"], c["inner_k"], c["objective"], derive_seed(seed, "refit", winner), threads
            ).best_params
        else:
            params = dict(DEFAULTS[winner])
        spec = ModelSpec(winner, params, derive_seed(seed, "final", winner))
        model = fit_classifier(spec, xt, yt, weights, sel_names, n_jobs=threads)
        bundle.models[f"classifier_{winner}"] = model
    sec = Section("model", "Selected model")
    sec.table(
        "selected_model",
        ["algorithm", "hyperparameters", "threshold", "cv_grand_average"],
        [[winner, _json(spec.hyperparameters), threshold, cv.grand_average(winner)]],
        "Winner refit on the full training split",
    )
    bundle.sections.append(sec)

    with stage("test_evaluation"):
        p_test = predict_proba(model, x_test)
        m_tuned = compute_metrics(y_test, p_test, threshold)
        m_half = compute_metrics(y_test, p_test, 0.5)
    sec = Section("test", "Test-set evaluation")
    sec.table("test_metrics", METRIC_HEADER, [_metric_row("test@tuned", m_tuned), _metric_row("test@0.5", m_half)], "Held-out test metrics")
    sec.table("test_predictions", ["row", "y", "p"], [[i, int(a), float(b)] for i, (a, b) in enumerate(zip(y_test, p_test))], "Test-set predictions", in_html=False)
    sec.figure("roc", figures.roc_figure(y_test, p_test), "ROC curve on the test split")
    sec.figure("pr", figures.pr_figure(y_test, p_test), "Precision-recall curve on the test split")
    sec.figure("confusion", figures.confusion_figure(m_tuned.tp, m_tuned.fp, m_tuned.tn, m_tuned.fn, f"Confusion at threshold {threshold:.3f}"), "Confusion matrix at the tuned threshold")
    bundle.sections.append(sec)
    result = {"winner": winner, "metrics": m_tuned, "threshold": threshold, "p_test": p_test, "y_test": y_test, "model": model}

    if cfg["data"]["test"]:
        with stage("external_test"):
            ext = load_configured_table(cfg, cfg.path(cfg["data"]["test"]))
            xe = pre.transform(ext)
            if cfg["feature_selection"]["enabled"]:
                xe = xe[:, [names.index(n) for n in sel_names]]
            ye = ext.column(outcome)
            ok = ~np.isnan(ye)
            pe = predict_proba(model, xe[ok])
            sec.table("external_test_metrics", METRIC_HEADER, [_metric_row("external@tuned", compute_metrics(ye[ok].astype(int), pe, threshold))], "External test metrics")

    if c["calibration"]:
        with stage("calibration"):
            tokens = [str(v) for v in y_train]
            plan = stratified_split(len(y_train), tokens, 0.2, derive_seed(seed, "calibration"))
            fit_rows, cal_rows = plan.train_indices, plan.test_indices
            cspec = ModelSpec(winner, params, derive_seed(seed, "calibration_model", winner))
            yf = y_train[fit_rows]
            cmodel = fit_classifier(cspec, x_train[fit_rows], yf, _row_weights(yf, c["class_weighting"]), sel_names)
            p_cal = predict_proba(cmodel, x_train[cal_rows])
            y_cal = y_train[cal_rows]
            iso = isotonic_calibrate(p_cal, y_cal)
            p_test_raw = predict_proba(cmodel, x_test)
            p_test_iso = iso.predict(p_test_raw)
            conf = SplitConformalClassifier(c["conformal_alpha"]).fit(p_cal, y_cal)
            sets = conf.predict_set(p_test_raw)
        sec = Section("calibration", "Calibration and conformal prediction")
        brier = lambda yy, pp: float(np.mean((pp - yy) ** 2))  # noqa: E731
        sec.table(
            "calibration_brier",
            ["set", "rows", "brier_raw", "brier_isotonic"],
            [["calibration", len(y_cal), brier(y_cal, p_cal), brier(y_cal, iso.predict(p_cal))],
             ["test", len(y_test), brier(y_test, p_test_raw), brier(y_test, p_test_iso)]],
            "Isotonic calibration fit on a stratified 20% calibration split of the training data",
        )
        sec.table("isotonic_map", ["p_raw", "p_calibrated"], [[a, b] for a, b in zip(iso.x_, iso.y_)], "Isotonic step map", in_html=False)
        size = sets.sum(axis=1)
        sec.table(
            "conformal",
            ["alpha", "q_hat", "test_coverage", "mean_set_size", "empty_sets", "singleton_sets", "both_label_sets"],
            [[c["conformal_alpha"], conf.q_hat_, coverage(sets, y_test), float(size.mean()), int(np.sum(size == 0)), int(np.sum(size == 1)), int(np.sum(size == 2))]],
            "Split-conformal label sets on the test split",
        )
        edges = np.linspace(0, 1, 11)
        series = []
        for label, pp in (("raw", p_test_raw), ("isotonic", p_test_iso)):
            b = np.clip(np.searchsorted(edges, pp, side="right") - 1, 0, 9)
            xs, ys = [], []
            for k in range(10):
                if np.any(b == k):
                    xs.append(float(pp[b == k].mean()))
                    ys.append(float(y_test[b == k].mean()))
            series.append((label, xs, ys))
        sec.figure("calibration", figures.line_figure(series, "Mean predicted probability", "Observed event fraction", "Reliability (test split)", identity=True), "Reliability diagram")
        bundle.sections.append(sec)

    with stage("decision_curve"):
        d = cfg["dca"]
        grid = default_grid(d["grid_start"], d["grid_stop"], d["grid_step"])
        nb = net_benefit_curve(y_test, p_test, grid, d["harm_weight"])
    sec = Section("dca", "Decision-curve analysis")
    sec.table(
        "dca",
        ["threshold", "model", "treat_all", "treat_none", "random"],
        [[a, b, cc, dd, e] for a, b, cc, dd, e in zip(nb.grid, nb.model, nb.treat_all, nb.treat_none, nb.random)],
        f"Net benefit with harm weight {d['harm_weight']}; random = coin-flip treatment at rate 0.5",
        in_html=False,
    )
    sec.figure(
        "dca",
        figures.line_figure(
            [("model", nb.grid, nb.model), ("treat all", nb.grid, nb.treat_all), ("treat none", nb.grid, nb.treat_none), ("random", nb.grid, nb.random)],
            "Threshold probability", "Net benefit", "Decision curve", ylim=(min(-0.05, float(np.min(nb.model)) - 0.02), max(0.05, float(y_test.mean()) + 0.05)),
        ),
        "Net benefit across threshold probabilities",
    )
    bundle.sections.append(sec)

    _attributions(cfg, bundle, model, x_train, y_train, x_test, y_test, p_test, threshold, sel_names, pre, seed, threads)
    return result


def _attributions(cfg, bundle, model, x_train, y_train, x_test, y_test, p_test, threshold, names, pre, seed, threads):
    c = cfg["classify"]
    with stage("attributions"):
        bg = x_train[_subsample(len(x_train), c["background_rows"], seed, "background")]
        shap = explain_model(model, x_test, bg, c["mc_orderings"], derive_seed(seed, "shap"), threads, names)
        margin = model.predict_margin(x_test)
        local_err = float(np.max(np.abs(shap.total() - margin))) if len(margin) else 0.0
        engine = "tree" if hasattr(model, "trees_") else ("linear" if hasattr(model, "coef_") else "monte_carlo")
        sig = shap_significance(shap, c["significance_bootstrap"], derive_seed(seed, "significance"), 0.95, None, threads)
        perm = permutation_importance(model, x_test, y_test, "auc", c["permutation_repeats"], derive_seed(seed, "perm"), threshold, threads, names)
        methods = {"shap": shap.mean_abs(), "permutation": perm.importance}
        if hasattr(model, "tree_gain_importance"):
            methods["tree_gain"] = model.tree_gain_importance()
        unified = unify_importance(methods, names)
        correct = correct_only_importance(shap, y_test, p_test, threshold)
    sec = Section("attributions", "Attributions and feature importance")
    sec.notes.append(
        f"Engine: {engine}; scale: {shap.scale}; base value {shap.base_value:.6g}; "
        f"max |base + sum(attributions) - model output| = {local_err:.3g} over {len(margin)} test rows."
    )
    sec.table("shap_local_accuracy", ["engine", "scale", "base_value", "max_abs_error", "rows"], [[engine, shap.scale, shap.base_value, local_err, len(margin)]], "Local accuracy of attributions")
    sec.table("shap_values", ["row"] + names, [[i] + list(r) for i, r in enumerate(shap.values)], "Per-row attributions (test split)", in_html=False)
    grouped = shap.grouped()
    order = np.argsort(-grouped.mean_abs(), kind="stable")
    sec.figure(
        "attribution_summary",
        figures.bar_figure(grouped.feature_names, grouped.mean_abs(), f"Mean |attribution| ({shap.scale} scale)", "Attribution summary (categories grouped)"),
        "Mean absolute attribution per original column (one-hot categories summed)",
    )
    sec.table(
        "attribution_grouped",
        ["column", "mean_abs_attribution"],
        [[grouped.feature_names[j], grouped.mean_abs()[j]] for j in order],
        "Mean |attribution| with encoded categories summed per source column",
    )
    sec.table(
        "shap_significance",
        ["feature", "median_abs", "crossing_fraction", "significant", "mean_abs_lower95", "mean_abs_upper95"],
        [[n, sig.median_abs[j], sig.crossing_fraction[j], bool(sig.significant[j]), sig.ci_lower[j], sig.ci_upper[j]] for j, n in enumerate(names)],
        f"Bootstrap significance ({sig.n_bootstrap} resamples): tau = global mean |attribution| = {sig.tau:.6g}; "
        "significant when the IQR crosses tau in < 5% of resamples and the median exceeds tau",
    )
    header = ["feature"] + [f"{m}_raw" for m in methods] + [f"{m}_normalized" for m in methods] + ["unified", "rank"]
    rows = []
    for j in unified.ordered():
        rows.append([names[j]] + [unified.raw[m][j] for m in methods] + [unified.normalized[m][j] for m in methods] + [unified.unified[j], int(unified.rank[j])])
    sec.table("importance_unified", header, rows, "Unified importance: mean of min-max normalised method scores" + (f" (flags: {', '.join(unified.flags)})" if unified.flags else ""))
    sec.table(
        "permutation_importance",
        ["feature", "auc_drop_mean", "auc_drop_sd"],
        [[n, perm.importance[j], perm.sd[j]] for j, n in enumerate(names)],
        f"Permutation importance on the test split (baseline AUC {perm.baseline:.4f})",
        in_html=False,
    )
    if correct is None:
        sec.notes.append("Correct-prediction-only importance: MISSING (no correctly classified test rows).")
    else:
        sec.table(
            "importance_correct_only",
            ["feature", "mean_abs_correct_only", "mean_abs_all"],
            [[n, correct[j], shap.mean_abs()[j]] for j, n in enumerate(names)],
            "Mean |attribution| over correctly classified test rows",
            in_html=False,
        )
    if c["interactions"]:
        with stage("interactions"):
            inter = pair_interactions(model, x_test, y_test, "auc", c["interaction_repeats"], derive_seed(seed, "pairs"), threshold, threads)
        order = np.argsort(-inter.score, kind="stable")
        sec.table(
            "pair_interactions",
            ["feature_a", "feature_b", "interaction", "se"],
            [[names[inter.pairs[k][0]], names[inter.pairs[k][1]], inter.score[k], inter.se[k]] for k in order],
            "Pairwise permutation interactions: joint AUC drop minus the two single drops",
            in_html=False,
        )
    bundle.sections.append(sec)

    if c["uncertainty_filter"]:
        with stage("uncertainty_filter"):
            u = uncertainty_filter(p_test, shap, c["prob_band"], c["shap_quantile"], c["uncertainty_combine"])
        sec = Section("uncertainty", "Uncertainty reduction")
        rows = [_metric_row("all_rows", compute_metrics(y_test, p_test, threshold))]
        if len(u.kept):
            rows.append(_metric_row("kept_rows", compute_metrics(y_test[u.kept], p_test[u.kept], threshold)))
        sec.table("uncertainty_metrics", METRIC_HEADER, rows, f"Metrics before/after discarding {len(u.discarded)} uncertain test rows")
        sec.table("uncertainty_discarded", ["row", "p", "reason"], [[int(i), float(p_test[i]), u.reasons[int(i)]] for i in u.discarded], "Discarded rows and reasons")
        bundle.sections.append(sec)

    if c["clustering"]:
        with stage("clustering"):
            cl = shap_clusters(shap, y_test, p_test, threshold, range(c["cluster_k_min"], c["cluster_k_max"] + 1), derive_seed(seed, "clusters"))
        sec = Section("clusters", "Attribution clusters")
        if cl.flags:
            sec.notes.append("Clustering flags: " + ", ".join(cl.flags))
        sec.table("cluster_silhouette", ["k", "mean_silhouette", "chosen"], [[k, s, k == cl.k] for k, s in sorted(cl.silhouettes.items())], "k-means on attribution rows; k chosen by mean silhouette")
        sec.table("cluster_importance", ["cluster", "size"] + names, [[k, int(np.sum(cl.labels == k))] + list(cl.importance[k]) for k in range(cl.k)], "Mean |attribution| per cluster", in_html=False)
        if cl.metrics:
            sec.table("cluster_metrics", ["cluster"] + METRIC_HEADER[1:], [[k] + _metric_row("", m)[1:] for k, m in enumerate(cl.metrics)], "Per-cluster test metrics")
        sec.table("cluster_labels", ["row", "cluster"], [[i, int(l)] for i, l in enumerate(cl.labels)], "Cluster membership of test rows", in_html=False)
        bundle.sections.append(sec)


def _eval_grid(train_time, train_event, test_time, max_points=50):
    ev = np.unique(train_time[train_event == 1])
    ev = ev[(ev >= test_time.min()) & (ev < test_time.max())]
    if len(ev) > max_points:
        ev = np.unique(ev[np.linspace(0, len(ev) - 1, max_points).round().astype(int)])
    return ev


def _survival(cfg, bundle, train_t, test_t, x_train, x_test, names, seed, threads):
    s = cfg["survival"]
    tt, et = train_t.column(s["time"]), train_t.column(s["event"])
    ts, es = test_t.column(s["time"]), test_t.column(s["event"])
    horizon = float(s["horizon"])
    sec = Section("survival", "Survival analysis")
    with stage("survival_fit"):
        rsf = RandomSurvivalForest(n_trees=s["n_trees"], min_leaf=s["min_leaf"], seed=derive_seed(seed, "rsf"), n_jobs=threads).fit(x_train, tt, et)
        cox = CoxElasticNet(lam=s["cox_lambda"], alpha=s["cox_l1_ratio"]).fit(x_train, tt, et)
    with stage("survival_metrics"):
        grid = _eval_grid(tt, et, ts)
        na = nelson_aalen(tt, et)
        rows = []
        preds = {
            "rsf": (rsf.predict_risk(x_test), rsf.predict_chf(x_test, grid)),
            "cox": (cox.predict_risk(x_test), cox.predict_chf(x_test, grid)),
            "nelson_aalen": (np.zeros(len(ts)), np.tile(step_interpolate(na.time_grid, na.chf, grid), (len(ts), 1))),
        }
        brier_series = []
        for name, (risk, chf) in preds.items():
            ci = concordance_index(risk, ts, es)
            ibs = integrated_brier(np.exp(-chf), ts, es, grid) if len(grid) else None
            auc_h = cumulative_dynamic_auc(risk, ts, es, horizon)
            rows.append([name, ci, None if ibs is None else ibs.ibs, auc_h])
            if ibs is not None:
                brier_series.append((name, ibs.grid, ibs.brier))
        sec.table("survival_metrics", ["model", "concordance", "integrated_brier", f"cd_auc_at_{horizon:g}"], rows, "Test-split survival metrics (IPCW Brier uses a censoring Kaplan-Meier on the test split)")
        if brier_series:
            sec.figure("survival_brier", figures.line_figure(brier_series, "Time", "IPCW Brier score", "Brier score over time"), "Time-resolved Brier score")
        q = np.quantile(ts[es == 1], [0.25, 0.5, 0.75]) if np.any(es == 1) else []
        auc_rows = [[float(t), cumulative_dynamic_auc(preds["rsf"][0], ts, es, t), cumulative_dynamic_auc(preds["cox"][0], ts, es, t)] for t in q]
        sec.table("survival_td_auc", ["time", "rsf_auc", "cox_auc"], auc_rows, "Cumulative/dynamic AUC at event-time quartiles")
        sec.table("cox_coefficients", ["feature", "coef", "std_coef"], [[n, cox.coef_[j], cox.std_coef_[j]] for j, n in enumerate(names)], f"Cox elastic net (lambda {s['cox_lambda']}, l1_ratio {s['cox_l1_ratio']})", in_html=False)
    with stage("hazard_translation"):
        labels_tr, obs_tr = horizon_labels(tt, et, horizon)
        labels_te, obs_te = horizon_labels(ts, es, horizon)
        tgrid = translation_grid(tt, et, horizon)
        trans_rows = []
        for name, model in (("rsf", rsf), ("cox", cox)):
            tr = chf_to_binary(model.predict_chf(x_train, tgrid), labels_tr, obs_tr, model.predict_chf(x_test, tgrid), tgrid)
            m = compute_metrics(labels_te[obs_te], tr.predicted[obs_te].astype(float), 0.5)
            trans_rows.append([name, int(obs_te.sum()), tr.medians.n_event, tr.medians.n_free] + _metric_row("", m)[1:])
            if name == "rsf":
                med = tr.medians
        sec.table(
            "hazard_translation",
            ["model", "test_rows_observed", "train_event_rows", "train_event_free_rows"] + METRIC_HEADER[1:],
            trans_rows,
            f"Nearest class-median CHF assignment at horizon {horizon:g} (ties to the event class)",
        )
        sec.table("class_median_curves", ["time", "event_median_chf", "event_free_median_chf"], [[t, a, b] for t, a, b in zip(med.time_grid, med.event_median, med.free_median)], "RSF class-median cumulative hazards", in_html=False)
        chf_test = rsf.predict_chf(x_test, tgrid)
        series = [("event-class median", tgrid, med.event_median), ("event-free median", tgrid, med.free_median)]
        for i in range(min(3, len(chf_test))):
            series.append((f"test row {i}", tgrid, chf_test[i]))
        sec.figure("chf_curves", figures.line_figure(series, "Time", "Cumulative hazard", "Predicted cumulative hazard (RSF)", steps=True), "Class-median and example test-row cumulative hazards")
        sec.table("survival_test_chf", ["row_id", "time", "chf"], [[i, t, v] for i, row in enumerate(chf_test) for t, v in zip(tgrid, row)], "RSF test-row cumulative hazards (long form)", in_html=False)
    with stage("survival_attributions"):
        rows_idx = _subsample(len(x_test), s["attribution_rows"], seed, "surv_rows")
        bg = x_train[_subsample(len(x_train), max(s["background_rows"], 10), seed, "surv_bg")]
        sa = survival_shapley(rsf, x_test[rows_idx], bg, tgrid, s["n_permutations"], derive_seed(seed, "survshap"), threads, names)
        perm = permutation_importance_ci(rsf, x_test, ts, es, s["permutation_repeats"], derive_seed(seed, "perm_ci"), threads)
    sec.table(
        "survival_importance",
        ["feature", "functional_shapley", "ci_permutation_drop"],
        [[n, sa.importance[j], perm[j]] for j, n in enumerate(names)],
        f"RSF attributions: time-integrated mean |Shapley| on the CHF over {len(rows_idx)} test rows; CI drop after permutation",
    )
    top = int(np.argmax(sa.importance))
    sec.figure(
        "survival_attribution_top",
        figures.line_figure([(names[top], tgrid, sa.values[:, top].mean(axis=0))], "Time", "Mean attribution to CHF", f"Time-resolved attribution: {names[top]}"),
        "Mean functional Shapley attribution of the top feature",
    )
    bundle.sections.append(sec)


def _regression(cfg, bundle, train_t, test_t, x_train, x_test, names, seed, threads):
    r = cfg["regression"]
    y_train = train_t.column(r["outcome"])
    y_test = test_t.column(r["outcome"])
    sec = Section("regression", "Regression analysis")
    rows, fitted = [], {}
    with stage("regression_fit"):
        for alg in r["candidates"]:
            params = {"n_trees": r["n_trees"]} if alg == "rf_reg" else {}
            m = fit_regressor(ModelSpec(alg, params, derive_seed(seed, "reg", alg)), x_train, y_train, names, n_jobs=threads)
            pred = predict_value(m, x_test)
            resid = pred - y_test
            ss_tot = float(np.sum((y_test - y_test.mean()) ** 2))
            r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")
            rows.append([alg, float(np.sqrt(np.mean(resid ** 2))), float(np.mean(np.abs(resid))), r2])
            fitted[alg] = (m, pred)
            bundle.models[f"regressor_{alg}"] = m
    best = min(rows, key=lambda row: row[1])[0]
    sec.table("regression_metrics", ["algorithm", "rmse", "mae", "r2"], rows, "Test-split regression metrics; best = lowest RMSE")
    model, pred = fitted[best]
    sec.figure("regression_fit", figures.scatter_figure(y_test, pred, "Observed outcome", "Predicted outcome", f"Observed vs predicted ({best})"), "Observed versus predicted values")
    with stage("regression_attributions"):
        bg = x_train[_subsample(len(x_train), r["background_rows"], seed, "reg_bg")]
        shap = explain_model(model, x_test, bg, 50, derive_seed(seed, "reg_shap"), threads, names)
        err = float(np.max(np.abs(shap.total() - model.predict_margin(x_test))))
    sec.table("regression_importance", ["feature", "mean_abs_attribution"], [[n, v] for n, v in zip(names, shap.mean_abs())], f"{best} attributions (max local-accuracy error {err:.3g})")
    sec.figure("regression_attribution_summary", figures.bar_figure(names, shap.mean_abs(), "Mean |attribution| (outcome units)", "Regression attributions"), "Mean absolute attribution")
    bundle.sections.append(sec)


# -- driver ----------------------------------------------------------------------------


def leakage_audit(fit_log, train_rows):
    """Rows (stage, kind, provenance, fit_row_count, ok) and the overall verdict."""
    rows = []
    for name, state in fit_log:
        ok = state.provenance == "train" and state.fit_row_count == train_rows
        rows.append([name, state.kind, state.provenance, state.fit_row_count, ok])
    return rows, all(r[-1] for r in rows)


def run_pipeline(cfg, threads=None):
    """Run every enabled stage and return the ReportBundle (nothing is written)."""
    threads = resolve_threads(threads if threads is not None else cfg["run"]["threads"])
    start = time.perf_counter()
    seed = cfg.seed
    bundle = ReportBundle([], [], threads=threads)
    with threadpool_limits(1):
        settings = Section("settings", "Settings")
        settings.table("settings", ["key", "value"], [[k, v if isinstance(v, str) else json.dumps(v)] for k, v in cfg.echo() if k not in RUNTIME_KEYS], "Effective configuration (defaults filled)", in_html=True)
        bundle.sections.append(settings)

        with stage("load"):
            table = load_configured_table(cfg, cfg.path(cfg["data"]["development"]))
        outcome = None
        if "classify" in cfg.modes:
            outcome = cfg["classify"]["outcome"]
        elif "regression" in cfg.modes:
            outcome = cfg["regression"]["outcome"]
        elif "survival" in cfg.modes:
            outcome = cfg["survival"]["event"]
        with stage("quality"):
            qsec, assoc = _quality_section(cfg, table, outcome, seed, threads)
        bundle.sections.append(qsec)
        bundle.sections.append(_association_section(assoc))

        with stage("split"):
            strata_cols, plan, train_t, test_t = development_split(cfg, table)
        with stage("preprocess"):
            pre = Preprocessor(cfg).fit(train_t, "train")
            x_train, x_test = pre.transform(train_t), pre.transform(test_t)
            names = list(pre.feature_names)
            bundle.fit_log = list(pre.states)
            audit_rows, audit_ok = leakage_audit(bundle.fit_log, train_t.row_count)
            iso = IsolationForest(cfg["quality"]["isolation_trees"], cfg["quality"]["isolation_subsample"], cfg["quality"]["contamination"], derive_seed(seed, "isolation"), threads).fit(x_train)
            scores = iso.anomaly_score(x_train)
        if not audit_ok:
            raise StageError("leakage_audit", MaitError("a preprocessing state was not fit on the training split"))
        psec = Section("preprocess", "Split and preprocessing")
        psec.table(
            "split",
            ["stratum", "rows", "test_rows"],
            [[tok, a, b] for tok, (a, b) in sorted(plan.stratum_counts.items())],
            f"Stratified split on {', '.join(strata_cols)} (test fraction {cfg['run']['test_fraction']})",
        )
        psec.table("leakage_audit", ["stage", "state", "provenance", "fit_rows", "ok"], audit_rows, "Every preprocessing state must be fit on the training split only")
        psec.table(
            "outliers",
            ["row", "anomaly_score", "flagged"],
            [[int(i), float(scores[i]), bool(scores[i] > iso.offset_)] for i in np.argsort(-scores, kind="stable")[: max(1, int(np.ceil(len(scores) * cfg["quality"]["contamination"])))]],
            "Isolation-forest anomaly scores of the most anomalous training rows (reported, not removed)",
        )
        bundle.sections.append(psec)

        if "classify" in cfg.modes:
            _classify(cfg, bundle, train_t, test_t, pre, x_train, x_test, names, seed, threads)
        if "survival" in cfg.modes:
            _survival(cfg, bundle, train_t, test_t, x_train, x_test, names, seed, threads)
        if "regression" in cfg.modes:
            _regression(cfg, bundle, train_t, test_t, x_train, x_test, names, seed, threads)

    prov = Section("provenance", "Provenance")
    bundle.provenance = [
        ["config_sha256", cfg.config_hash()],
        ["seed", seed],
        ["format_version", FORMAT_VERSION],
        ["package_version", __version__],
        ["modes", ",".join(cfg.modes)],
    ]
    prov.table("provenance", ["key", "value"], bundle.provenance, "Run provenance")
    bundle.sections.append(prov)
    bundle.runtime_seconds = time.perf_counter() - start
    return bundle


def run_to_directory(cfg, out_dir=None, threads=None):
    """Run the pipeline and write the report; on failure no partial output is left behind."""
    out_dir = os.path.abspath(out_dir or cfg.path(cfg["run"]["out"]))
    tmp = out_dir.rstrip(os.sep) + f".partial-{os.getpid()}"
    try:
        bundle = run_pipeline(cfg, threads)
        with stage("render"):
            shutil.rmtree(tmp, ignore_errors=True)
            render_report(bundle, tmp, dump_model)
            if os.path.isdir(out_dir):
                shutil.rmtree(out_dir)
            os.replace(tmp, out_dir)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return bundle, out_dir
