"""Write a ReportBundle to disk: one self-contained HTML page plus CSV, SVG and model files."""

import html
import os

from .artifacts import format_cell
from .figures import inline_svg

_CSS = """
body{font-family:sans-serif;max-width:1100px;margin:2em auto;color:#222}
h1{border-bottom:2px solid #444}h2{border-bottom:1px solid #aaa;margin-top:2em}
table{border-collapse:collapse;margin:0.6em 0;font-size:12px}
td,th{border:1px solid #bbb;padding:2px 6px;text-align:right}th{background:#eee}
caption{caption-side:top;text-align:left;font-style:italic;padding:2px}
figure{display:inline-block;margin:0.5em}figcaption{font-size:12px;color:#555}
.note{font-size:13px;color:#444}
"""


def _html_table(t):
    head = "".join(f"<th>{html.escape(str(h))}</th>" for h in t.header)
    body = "".join(
        "<tr>" + "".join(f"<td>{html.escape(format_cell(v))}</td>" for v in row) + "</tr>" for row in t.rows
    )
    cap = html.escape(t.caption or t.name) + f" (tables/{html.escape(t.name)}.csv)"
    return f'<table id="{html.escape(t.name)}"><caption>{cap}</caption><tr>{head}</tr>{body}</table>'


def render_html(bundle, title="MAIT benchmarking report"):
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>{html.escape(title)}</title><style>{_CSS}</style></head><body>",
        f"<h1>{html.escape(title)}</h1>",
    ]
    toc = [s for s in bundle.sections if not s.empty]
    parts.append("<ol>" + "".join(f'<li><a href="#sec-{s.key}">{html.escape(s.title)}</a></li>' for s in toc) + "</ol>")
    for s in toc:
        parts.append(f'<section id="sec-{s.key}"><h2>{html.escape(s.title)}</h2>')
        for note in s.notes:
            parts.append(f'<p class="note">{html.escape(note)}</p>')
        for f in s.figures:
            cap = html.escape(f.caption or f.name) + f" (figures/{html.escape(f.name)}.svg)"
            parts.append(f"<figure>{inline_svg(f.svg)}<figcaption>{cap}</figcaption></figure>")
        hidden = [t for t in s.tables if not t.in_html]
        for t in s.tables:
            if t.in_html:
                parts.append(_html_table(t))
        if hidden:
            names = ", ".join(f"tables/{t.name}.csv" for t in hidden)
            parts.append(f'<p class="note">Exported without inline rendering: {html.escape(names)}</p>')
        parts.append("</section>")
    parts.append(
        f'<p class="note">Run time {bundle.runtime_seconds:.1f} s with a budget of {bundle.threads} thread(s).</p>'
    )
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def render_report(bundle, out_dir, model_dumper=None):
    """Write ``report.html``, ``tables/*.csv``, ``figures/*.svg`` and ``models/*.model``.

    Returns ``(html_path, csv_paths, svg_paths)``.
    """
    tables_dir = os.path.join(out_dir, "tables")
    figures_dir = os.path.join(out_dir, "figures")
    models_dir = os.path.join(out_dir, "models")
    for d in (out_dir, tables_dir, figures_dir, models_dir):
        os.makedirs(d, exist_ok=True)
    csvs, svgs = [], []
    for t in bundle.all_tables():
        path = os.path.join(tables_dir, f"{t.name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(t.to_csv())
        csvs.append(path)
    for f in bundle.all_figures():
        path = os.path.join(figures_dir, f"{f.name}.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f.svg)
        svgs.append(path)
    if model_dumper is not None:
        for name, model in bundle.models.items():
            with open(os.path.join(models_dir, f"{name}.model"), "w", encoding="utf-8") as fh:
                fh.write(model_dumper(model))
    html_path = os.path.join(out_dir, "report.html")
    with open(html_path, "w", encoding="utf-8") as fh:
        fh.write(render_html(bundle))
    return html_path, csvs, svgs
