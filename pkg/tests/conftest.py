import os
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("mait", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mait")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL_CONFIG = """
[data]
development = "{data}"
default_kind = "continuous"

[data.columns]
site = "categorical"
label = "binary_outcome"
time = "time_to_event"
event = "event_indicator"
y = "continuous_outcome"

[run]
seed = 11
modes = {modes}
out = "out"

[quality]
n_bootstrap = 50
isolation_trees = 50

[classify]
candidates = ["logreg_l1", "gnb", "hgbt"]
k_folds = 3
n_search_iter = 2
significance_bootstrap = 20
permutation_repeats = 2
interaction_repeats = 2
mc_orderings = 10
background_rows = 20
cluster_k_max = 4

[feature_selection]
enabled = true
k = 5

[survival]
horizon = 10.0
n_trees = 15
n_permutations = 4
permutation_repeats = 2

[regression]
n_trees = 20
"""


def write_small_config(directory, modes='["classify", "survival", "regression"]', n=200, seed=3, extra=""):
    """Synthetic CSV plus a fast all-stages config in ``directory``; returns the config path."""
    from mait.datasets import write_synthetic

    directory = str(directory)
    write_synthetic(os.path.join(directory, "syn.csv"), n=n, seed=seed)
    path = os.path.join(directory, "small.toml")
    with open(path, "w") as fh:
        fh.write(SMALL_CONFIG.format(data="syn.csv", modes=modes) + extra)
    return path


def csv_bytes(out_dir):
    tables = os.path.join(out_dir, "tables")
    return {name: open(os.path.join(tables, name), "rb").read() for name in sorted(os.listdir(tables))}
