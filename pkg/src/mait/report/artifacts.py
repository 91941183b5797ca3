"""Report bundle types and CSV serialisation."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


def format_cell(value):
    """Stable text for a CSV/HTML cell; floats use the shortest round-trip repr."""
    if value is None:
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "NA"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


@dataclass
class TableArtifact:
    name: str
    header: list
    rows: list
    caption: str = ""
    in_html: bool = True

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([format_cell(v) for v in row])
        return buf.getvalue()


@dataclass
class FigureArtifact:
    name: str
    svg: str
    caption: str = ""


@dataclass
class Section:
    key: str
    title: str
    tables: list = field(default_factory=list)
    figures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def table(self, name, header, rows, caption="", in_html=True):
        self.tables.append(TableArtifact(name, list(header), [list(r) for r in rows], caption, in_html))

    def figure(self, name, svg, caption=""):
        self.figures.append(FigureArtifact(name, svg, caption))

    @property
    def empty(self):
        return not (self.tables or self.figures or self.notes)


@dataclass
class ReportBundle:
    sections: list
    provenance: list
    models: dict = field(default_factory=dict)
    fit_log: list = field(default_factory=list)
    runtime_seconds: float = 0.0
    threads: int = 1

    def section(self, key):
        for s in self.sections:
            if s.key == key:
                return s
        return None

    def all_tables(self):
        return [t for s in self.sections for t in s.tables]

    def all_figures(self):
        return [f for s in self.sections for f in s.figures]
