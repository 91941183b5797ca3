from .artifacts import FigureArtifact, ReportBundle, Section, TableArtifact, format_cell
from .config import MODES, PipelineConfig, parse_config, parse_config_text
from .pipeline import (
    FORMAT_VERSION,
    Preprocessor,
    StageError,
    development_split,
    leakage_audit,
    load_configured_table,
    run_pipeline,
    run_to_directory,
)
from .render import render_html, render_report

__all__ = [
    "FORMAT_VERSION",
    "FigureArtifact",
    "MODES",
    "PipelineConfig",
    "Preprocessor",
    "ReportBundle",
    "Section",
    "StageError",
    "TableArtifact",
    "development_split",
    "format_cell",
    "leakage_audit",
    "load_configured_table",
    "parse_config",
    "parse_config_text",
    "render_html",
    "render_report",
    "run_pipeline",
    "run_to_directory",
]
