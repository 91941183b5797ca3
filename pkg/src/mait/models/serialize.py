"""Line-oriented text format for fitted models.

::

    mait-model 1
    class HistGradientBoostingClassifier
    param learning_rate 0.1
    attr init_score_ -0.52
    tree 0 3
    node 0 4 0.5 1 2 -0.01 300 1 12.5
    ...

Values after the key are JSON; floats use ``repr`` so a dump/load round
trip is exact.
"""

import json

import numpy as np

from ._tree import Tree
from .forest import RandomForestClassifier, RandomForestRegressor
from .hgbt import HistGradientBoostingClassifier
from .linear import L1LogisticRegression, LinearRegression
from .naive_bayes import GaussianNaiveBayes
from .zoo import ModelSpec

FORMAT_VERSION = 1

_CLASSES = {
    cls.__name__: cls
    for cls in (
        RandomForestClassifier,
        RandomForestRegressor,
        HistGradientBoostingClassifier,
        L1LogisticRegression,
        LinearRegression,
        GaussianNaiveBayes,
    )
}

_ATTRS = {
    "L1LogisticRegression": ("coef_", "intercept_", "std_coef_", "n_iter_", "classes_"),
    "LinearRegression": ("coef_", "intercept_"),
    "GaussianNaiveBayes": ("theta_", "var_", "class_prior_", "epsilon_", "classes_"),
    "RandomForestClassifier": ("classes_",),
    "RandomForestRegressor": (),
    "HistGradientBoostingClassifier": ("init_score_", "bin_edges_", "train_loss_", "classes_"),
}

_ARRAY_ATTRS = {"coef_", "std_coef_", "theta_", "var_", "class_prior_", "classes_"}


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def dump_model(model):
    name = type(model).__name__
    lines = [f"mait-model {FORMAT_VERSION}", f"class {name}"]
    spec = getattr(model, "spec_", None)
    if spec is not None:
        lines.append(f"spec {json.dumps({'algorithm': spec.algorithm, 'hyperparameters': spec.hyperparameters, 'seed': spec.seed})}")
    for key, value in sorted(model.get_params().items()):
        lines.append(f"param {key} {json.dumps(_plain(value))}")
    lines.append(f"attr n_features_in_ {json.dumps(int(model.n_features_in_))}")
    lines.append(f"attr feature_names_ {json.dumps(model.feature_names_)}")
    for attr in _ATTRS[name]:
        lines.append(f"attr {attr} {json.dumps(_plain(getattr(model, attr)))}")
    trees = getattr(model, "trees_", None)
    if trees is not None:
        lines.append(f"trees {len(trees)}")
        for i, tree in enumerate(trees):
            lines.append(f"tree {i} {tree.n_nodes}")
            for k in range(tree.n_nodes):
                lines.append(
                    "node {} {} {} {} {} {} {} {} {}".format(
                        k,
                        int(tree.feature[k]),
                        json.dumps(float(tree.threshold[k])),
                        int(tree.left[k]),
                        int(tree.right[k]),
                        json.dumps(float(tree.value[k])),
                        json.dumps(float(tree.cover[k])),
                        int(tree.missing_left[k]),
                        json.dumps(float(tree.gain[k])),
                    )
                )
    return "\n".join(lines) + "\n"


def load_model(text):
    lines = text.splitlines()
    head = lines[0].split()
    if head[:1] != ["mait-model"] or int(head[1]) != FORMAT_VERSION:
        raise ValueError("not a mait model file (or unsupported version)")
    cls = _CLASSES[lines[1].split(" ", 1)[1]]
    params, attrs, trees, spec = {}, {}, [], None
    i = 2
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        if key == "param":
            pname, _, val = rest.partition(" ")
            params[pname] = json.loads(val)
        elif key == "attr":
            aname, _, val = rest.partition(" ")
            attrs[aname] = json.loads(val)
        elif key == "spec":
            spec = json.loads(rest)
        elif key == "tree":
            n_nodes = int(rest.split()[1])
            rows = [lines[i + 1 + k].split()[2:] for k in range(n_nodes)]
            cols = list(zip(*rows)) if rows else [[]] * 8
            trees.append(
                Tree(
                    [int(v) for v in cols[0]],
                    [json.loads(v) for v in cols[1]],
                    [int(v) for v in cols[2]],
                    [int(v) for v in cols[3]],
                    [json.loads(v) for v in cols[4]],
                    [json.loads(v) for v in cols[5]],
                    [bool(int(v)) for v in cols[6]],
                    [json.loads(v) for v in cols[7]],
                )
            )
            i += n_nodes
        i += 1
    model = cls(**params)
    for aname, val in attrs.items():
        if aname in _ARRAY_ATTRS:
            val = np.asarray(val)
        elif aname == "bin_edges_":
            val = [np.asarray(v, dtype=float) for v in val]
        setattr(model, aname, val)
    if cls in (RandomForestClassifier, RandomForestRegressor, HistGradientBoostingClassifier):
        model.trees_ = trees
    if spec is not None:
        model.spec_ = ModelSpec(spec["algorithm"], spec["hyperparameters"], spec["seed"])
    return model
