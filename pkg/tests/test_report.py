import os
import re

import pytest

from conftest import csv_bytes, write_small_config
from mait.cli import main
from mait.exceptions import ConfigError
from mait.report import (
    ReportBundle,
    Section,
    parse_config,
    parse_config_text,
    render_html,
    run_to_directory,
)

MINIMAL = """
[data]
development = "d.csv"
[data.columns]
label = "binary_outcome"
[run]
seed = 1
"""


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("full")
    cfg = parse_config(write_small_config(d))
    bundle, out = run_to_directory(cfg)
    return bundle, out, d


def test_minimal_config_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg["classify"]["k_folds"] == 5 and cfg["classify"]["n_search_iter"] == 25
    assert cfg.modes == ["classify"]
    echo = dict(cfg.echo())
    assert echo["classify.k_folds"] == 5


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL + "foo = 3\n", "foo"),
        (MINIMAL.replace('seed = 1', 'seed = 1\nmodes = ["survival"]') + '[data.columns.t]\nkind = "time_to_event"\n', "horizon required"),
        (MINIMAL.replace("seed = 1", ""), "run.seed"),
        (MINIMAL + "[classify]\ncandidates = [\"svm\"]\n", "svm"),
        ("[data\n", "invalid TOML"),
        (MINIMAL + "[classify]\nconformal_alpha = 1.5\n", "conformal_alpha"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=re.escape(message)):
        parse_config_text(text)


def test_report_files_and_self_containment(full_run):
    bundle, out, _ = full_run
    html = open(os.path.join(out, "report.html"), encoding="utf-8").read()
    assert "http" not in html and "src=" not in html and "data:image" not in html
    assert all(h.startswith("#") for h in re.findall(r'href="([^"]*)"', html))
    table_ids = re.findall(r'<table id="([^"]+)"', html)
    assert table_ids
    for name in table_ids:
        assert os.path.isfile(os.path.join(out, "tables", f"{name}.csv"))
    assert {t.name for t in bundle.all_tables()} == {f[:-4] for f in os.listdir(os.path.join(out, "tables"))}
    figs = os.listdir(os.path.join(out, "figures"))
    assert {"roc.svg", "pr.svg", "confusion.svg", "spearman_heatmap.svg", "attribution_summary.svg", "dca.svg",
            "calibration.svg", "chf_curves.svg", "threshold_trace.svg"} <= set(figs)
    assert html.count("<svg") == len(figs)
    assert os.listdir(os.path.join(out, "models"))
    assert not [p for p in os.listdir(os.path.dirname(out)) if ".partial-" in p]


def test_every_enabled_block_has_a_section(full_run):
    bundle, _, _ = full_run
    keys = {s.key for s in bundle.sections if not s.empty}
    for key in ("settings", "quality", "associations", "preprocess", "feature_selection", "cv", "threshold",
                "model", "test", "calibration", "dca", "attributions", "survival", "regression", "provenance"):
        assert key in keys, key
    audit = bundle.section("preprocess")
    rows = [t for t in audit.tables if t.name == "leakage_audit"][0].rows
    assert rows and all(r[2] == "train" and r[-1] for r in rows)


def test_repeat_run_is_byte_identical(full_run, tmp_path):
    _, out, d = full_run
    _, again = run_to_directory(parse_config(os.path.join(d, "small.toml")), str(tmp_path / "again"))
    assert csv_bytes(out) == csv_bytes(again)


def test_empty_sections_omitted():
    s1 = Section("a", "Alpha")
    s1.table("t1", ["x"], [[1]])
    b = ReportBundle([s1, Section("b", "Bravo")], [])
    html = render_html(b)
    assert "Alpha" in html and "Bravo" not in html


def test_mode_gating_and_cli(tmp_path):
    path = write_small_config(tmp_path, modes='["classify"]', n=150)
    assert main(["validate", "--config", path]) == 0
    out = tmp_path / "cls"
    assert main(["run", "--config", path, "--out", str(out)]) == 0
    html = (out / "report.html").read_text()
    assert "Survival analysis" not in html and "Regression analysis" not in html
    assert not (out / "tables" / "survival_metrics.csv").exists()
    surv = tmp_path / "surv"
    assert main(["run", "--config", path, "--out", str(surv), "--mode", "survival"]) == 0
    html = (surv / "report.html").read_text()
    assert "Survival analysis" in html and "Cross-validation" not in html


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL + "foo = 1\n")
    assert main(["validate", "--config", str(bad)]) == 2
    assert main(["validate", "--config", str(tmp_path / "absent.toml")]) == 2
    nodata = tmp_path / "nodata.toml"
    nodata.write_text(MINIMAL)
    assert main(["validate", "--config", str(nodata)]) == 3
    # stratified folds need every class to fill k folds; the data cannot support that
    (tmp_path / "d.csv").write_text("a,label\n" + "\n".join(f"{i},{int(i < 2)}" for i in range(40)) + "\n")
    cfg = tmp_path / "rt.toml"
    cfg.write_text(MINIMAL.replace('label = "binary_outcome"', 'label = "binary_outcome"\na = "continuous"')
                   + "[classify]\nn_search_iter = 1\ncandidates = [\"gnb\"]\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert not (tmp_path / "o").exists()
    # an output path below a regular file fails at write time
    (tmp_path / "w").mkdir()
    ok = write_small_config(tmp_path / "w", modes='["regression"]', n=120)
    (tmp_path / "blocker").write_text("")
    assert main(["run", "--config", ok, "--out", str(tmp_path / "blocker" / "out")]) == 4
    assert not [p for p in os.listdir(tmp_path) if ".partial-" in p]


def test_dataset_command(tmp_path):
    assert main(["dataset", "synthetic", "--out", str(tmp_path / "s.csv"), "--seed", "2"]) == 0
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert "label" in header and "time" in header
