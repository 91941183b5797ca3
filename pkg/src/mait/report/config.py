"""Strict TOML configuration for pipeline runs."""

import copy
import hashlib
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..data import BINARY_OUTCOME, CONTINUOUS_OUTCOME, EVENT_INDICATOR, KINDS, TIME_TO_EVENT, ColumnSpec
from ..exceptions import ConfigError
from ..models.zoo import CLASSIFIERS, REGRESSORS

REQUIRED = object()
MODES = ("classify", "survival", "regression")

# section -> key -> default (REQUIRED marks mandatory keys)
SCHEMA = {
    "data": {
        "development": REQUIRED,
        "test": None,
        "default_kind": None,
        "sentinels": ["", "NA", "NaN", "null"],
        "columns": {},
    },
    "run": {
        "seed": REQUIRED,
        "modes": ["classify"],
        "threads": None,
        "out": "out",
        "test_fraction": 0.3,
        "strata": [],
    },
    "quality": {
        "n_bootstrap": 200,
        "mi_bins": 10,
        "isolation_trees": 200,
        "isolation_subsample": 256,
        "contamination": 0.05,
        "rare_min_fraction": 0.05,
    },
    "preprocess": {
        "rare_min_fraction": 0.05,
        "knn_k": 5,
        "scale": True,
        "label_propagation": False,
    },
    "feature_selection": {"enabled": False, "k": 10, "bins": 10},
    "classify": {
        "outcome": None,
        "candidates": list(CLASSIFIERS),
        "k_folds": 5,
        "n_search_iter": 25,
        "inner_k": 3,
        "objective": "auc",
        "tuning": True,
        "threshold_tuning": True,
        "class_weighting": True,
        "oversampling": False,
        "calibration": True,
        "conformal_alpha": 0.1,
        "uncertainty_filter": True,
        "prob_band": 0.1,
        "shap_quantile": 0.1,
        "uncertainty_combine": "and",
        "clustering": True,
        "cluster_k_min": 2,
        "cluster_k_max": 8,
        "significance_bootstrap": 200,
        "permutation_repeats": 5,
        "interactions": True,
        "interaction_repeats": 3,
        "mc_orderings": 50,
        "background_rows": 50,
    },
    "dca": {"harm_weight": 1.0, "grid_start": 0.01, "grid_stop": 0.99, "grid_step": 0.01},
    "survival": {
        "time": None,
        "event": None,
        "horizon": None,
        "n_trees": 100,
        "min_leaf": 5,
        "cox_lambda": 0.05,
        "cox_l1_ratio": 0.5,
        "attribution_rows": 10,
        "background_rows": 20,
        "n_permutations": 10,
        "permutation_repeats": 5,
    },
    "regression": {
        "outcome": None,
        "candidates": list(REGRESSORS),
        "n_trees": 100,
        "background_rows": 50,
    },
}


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: str
    source_text: str = ""
    columns: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.raw[section]

    @property
    def seed(self):
        return int(self.raw["run"]["seed"])

    @property
    def modes(self):
        return list(self.raw["run"]["modes"])

    def path(self, value):
        return value if value is None or os.path.isabs(value) else os.path.join(self.base_dir, value)

    def config_hash(self):
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()

    def column_specs(self, header):
        """ColumnSpecs for a CSV header: configured kinds, else ``default_kind``."""
        default = self.raw["data"]["default_kind"]
        specs = []
        for name in header:
            if name in self.columns:
                specs.append(self.columns[name])
            elif default is not None:
                specs.append(ColumnSpec(name, default))
            else:
                raise ConfigError(f"column {name!r} has no configured kind and data.default_kind is not set")
        return specs

    def echo(self):
        """Flattened (key, value) pairs of the effective settings."""
        rows = []
        for section in SCHEMA:
            for key in SCHEMA[section]:
                if key == "columns":
                    continue
                rows.append((f"{section}.{key}", self.raw[section][key]))
        for name, spec in self.columns.items():
            cats = f" {list(spec.declared_categories)}" if spec.declared_categories else ""
            rows.append((f"data.columns.{name}", spec.kind + cats))
        return rows

    def with_overrides(self, seed=None, out=None, threads=None, modes=None):
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["run"]["seed"] = int(seed)
        if out is not None:
            raw["run"]["out"] = out
        if threads is not None:
            raw["run"]["threads"] = int(threads)
        if modes is not None:
            raw["run"]["modes"] = list(modes)
        cfg = PipelineConfig(raw, self.base_dir, self.source_text, dict(self.columns))
        _check(cfg)
        return cfg


def _parse_columns(columns):
    out = {}
    if not isinstance(columns, dict):
        raise ConfigError("data.columns must be a table of column name -> kind")
    for name, value in columns.items():
        if isinstance(value, str):
            kind, cats = value, None
        elif isinstance(value, dict):
            unknown = sorted(set(value) - {"kind", "categories"})
            if unknown:
                raise ConfigError(f"unknown keys in data.columns.{name}: {', '.join(unknown)}")
            if "kind" not in value:
                raise ConfigError(f"data.columns.{name}: missing required key 'kind'")
            kind, cats = value["kind"], value.get("categories")
        else:
            raise ConfigError(f"data.columns.{name}: expected a kind string or a table")
        if kind not in KINDS:
            raise ConfigError(f"data.columns.{name}: unknown kind {kind!r}")
        try:
            out[name] = ColumnSpec(name, kind, cats)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return out


def _of_kind(columns, kind):
    return [n for n, s in columns.items() if s.kind == kind]


def _check(cfg):
    raw = cfg.raw
    modes = raw["run"]["modes"]
    if not modes:
        raise ConfigError("run.modes: at least one mode must be enabled")
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"run.modes: unknown mode(s) {', '.join(bad)}")
    if not 0 < raw["run"]["test_fraction"] < 1:
        raise ConfigError("run.test_fraction must lie in (0, 1)")
    cols = cfg.columns
    if "classify" in modes:
        c = raw["classify"]
        if c["outcome"] is None:
            found = _of_kind(cols, BINARY_OUTCOME)
            if len(found) != 1:
                raise ConfigError("classify.outcome required (or exactly one binary_outcome column)")
            c["outcome"] = found[0]
        elif c["outcome"] not in cols or cols[c["outcome"]].kind != BINARY_OUTCOME:
            raise ConfigError(f"classify.outcome {c['outcome']!r} is not a configured binary_outcome column")
        bad = [a for a in c["candidates"] if a not in CLASSIFIERS]
        if bad or not c["candidates"]:
            raise ConfigError(f"classify.candidates: unknown algorithm(s) {', '.join(bad) or '(none given)'}")
        if c["k_folds"] < 2 or c["n_search_iter"] < 1 or c["inner_k"] < 2:
            raise ConfigError("classify: k_folds >= 2, inner_k >= 2 and n_search_iter >= 1 are required")
        if c["objective"] not in ("auc", "pr_auc"):
            raise ConfigError("classify.objective must be 'auc' or 'pr_auc'")
        if not 0 < c["conformal_alpha"] < 1:
            raise ConfigError("classify.conformal_alpha must lie in (0, 1)")
        if c["uncertainty_combine"] not in ("and", "or"):
            raise ConfigError("classify.uncertainty_combine must be 'and' or 'or'")
        if c["significance_bootstrap"] < 20:
            raise ConfigError("classify.significance_bootstrap must be at least 20")
        if not 2 <= c["cluster_k_min"] <= c["cluster_k_max"]:
            raise ConfigError("classify: need 2 <= cluster_k_min <= cluster_k_max")
    if "survival" in modes:
        s = raw["survival"]
        if s["horizon"] is None:
            raise ConfigError("survival.horizon required for survival mode")
        for key, kind in (("time", TIME_TO_EVENT), ("event", EVENT_INDICATOR)):
            if s[key] is None:
                found = _of_kind(cols, kind)
                if len(found) != 1:
                    raise ConfigError(f"survival.{key} required (or exactly one {kind} column)")
                s[key] = found[0]
            elif s[key] not in cols or cols[s[key]].kind != kind:
                raise ConfigError(f"survival.{key} {s[key]!r} is not a configured {kind} column")
    if "regression" in modes:
        r = raw["regression"]
        if r["outcome"] is None:
            found = _of_kind(cols, CONTINUOUS_OUTCOME)
            if len(found) != 1:
                raise ConfigError("regression.outcome required (or exactly one continuous_outcome column)")
            r["outcome"] = found[0]
        elif r["outcome"] not in cols or cols[r["outcome"]].kind != CONTINUOUS_OUTCOME:
            raise ConfigError(f"regression.outcome {r['outcome']!r} is not a configured continuous_outcome column")
        bad = [a for a in r["candidates"] if a not in REGRESSORS]
        if bad or not r["candidates"]:
            raise ConfigError(f"regression.candidates: unknown algorithm(s) {', '.join(bad) or '(none given)'}")
    for name in raw["run"]["strata"]:
        if name not in cols:
            raise ConfigError(f"run.strata: column {name!r} is not configured")
    fs = raw["feature_selection"]
    if fs["enabled"] and fs["k"] < 1:
        raise ConfigError("feature_selection.k must be at least 1")
    d = raw["dca"]
    if not 0 < d["grid_start"] < d["grid_stop"] < 1 or d["grid_step"] <= 0 or d["harm_weight"] < 0:
        raise ConfigError("dca: need 0 < grid_start < grid_stop < 1, grid_step > 0, harm_weight >= 0")


def parse_config_text(text, base_dir="."):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    unknown = sorted(set(doc) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    raw = {}
    for section, keys in SCHEMA.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{section}] must be a table")
        extra = sorted(set(given) - set(keys))
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")
        raw[section] = {}
        for key, default in keys.items():
            if key in given:
                raw[section][key] = given[key]
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                raw[section][key] = copy.deepcopy(default)
    if isinstance(raw["run"]["modes"], str):
        raw["run"]["modes"] = ["classify", "survival", "regression"] if raw["run"]["modes"] == "all" else [raw["run"]["modes"]]
    default_kind = raw["data"]["default_kind"]
    if default_kind is not None and default_kind not in KINDS:
        raise ConfigError(f"data.default_kind: unknown kind {default_kind!r}")
    cfg = PipelineConfig(raw, base_dir, text, _parse_columns(raw["data"]["columns"]))
    _check(cfg)
    return cfg


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)))
