"""Report rendering: aligned text table, delimited/structured output, figures.

Column order is P-AUC, PDD, PDO, then one R@k column per requested k,
followed by support counts.  The bottom row is the unweighted mean over
the included predicate rows.  ``write_report_files`` is the one-stop path
used by the CLI report subcommand: it drops the table, a CSV, a JSON
variant, and PNG figures into an output directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricReport

__all__ = [
    "format_table",
    "report_to_dict",
    "write_csv",
    "render_figures",
    "write_report_files",
]


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def format_table(report: MetricReport) -> str:
    """Aligned plain-text table with one predicate per row and a mean row."""
    headers = ["Predicate", "P-AUC", "PDD", "PDO"]
    headers += [f"R@{k}" for k in report.ks]
    headers += ["Pos", "Neg"]
    rows: list[list[str]] = []
    for row in report.rows:
        cells = [row.predicate, _fmt(row.p_auc), _fmt(row.pdd), _fmt(row.pdo)]
        cells += [_fmt(row.recall.get(k)) for k in report.ks]
        cells += [str(row.positives), str(row.negatives)]
        if not row.included:
            cells[0] += " *"
        rows.append(cells)
    mean = report.mean_row
    mean_cells = ["mean", _fmt(mean["p_auc"]), _fmt(mean["pdd"]), _fmt(mean["pdo"])]
    mean_cells += [_fmt(mean["recall"].get(k)) for k in report.ks]
    mean_cells += ["", ""]

    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows + [mean_cells]))
        if rows
        else max(len(headers[i]), len(mean_cells[i]))
        for i in range(len(headers))
    ]

    def line(cells: list[str]) -> str:
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    out = [line(headers), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    out.append(line(["-" * w for w in widths]))
    out.append(line(mean_cells))
    if any(not row.included for row in report.rows):
        out.append("")
        out.append("* excluded from the mean row: needs at least one positive and one negative")
    return "\n".join(out) + "\n"


def report_to_dict(report: MetricReport) -> dict:
    """Machine-readable structured variant of the report."""
    return {
        "ks": list(report.ks),
        "graph_constraint": report.graph_constraint,
        "rows": [
            {
                "predicate_id": row.predicate_id,
                "predicate": row.predicate,
                "p_auc": row.p_auc,
                "pdd": row.pdd,
                "pdo": row.pdo,
                "recall": {str(k): row.recall.get(k) for k in report.ks},
                "positives": row.positives,
                "negatives": row.negatives,
                "included": row.included,
            }
            for row in report.rows
        ],
        "mean": {
            "p_auc": report.mean_row["p_auc"],
            "pdd": report.mean_row["pdd"],
            "pdo": report.mean_row["pdo"],
            "recall": {str(k): report.mean_row["recall"].get(k) for k in report.ks},
        },
        "overall_recall": {str(k): report.overall_recall.get(k) for k in report.ks},
        "mean_recall": {str(k): report.mean_recall.get(k) for k in report.ks},
    }


def write_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = ["predicate", "p_auc", "pdd", "pdo"]
        header += [f"r@{k}" for k in report.ks]
        header += ["positives", "negatives", "included"]
        writer.writerow(header)
        for row in report.rows:
            writer.writerow(
                [row.predicate, row.p_auc, row.pdd, row.pdo]
                + [row.recall.get(k) for k in report.ks]
                + [row.positives, row.negatives, row.included]
            )
        mean = report.mean_row
        writer.writerow(
            ["mean", mean["p_auc"], mean["pdd"], mean["pdo"]]
            + [mean["recall"].get(k) for k in report.ks]
            + ["", "", ""]
        )


def _barh(ax, names: list[str], values: list[float], title: str, color: str) -> None:
    y = np.arange(len(names))
    ax.barh(y, values, color=color)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_title(title)


def render_figures(report: MetricReport, outdir: str | Path) -> list[Path]:
    """Render one PNG per metric family into ``outdir``; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = list(report.included_rows)
    paths: list[Path] = []
    if not rows:
        return paths
    names = [r.predicate for r in rows]
    height = max(2.5, 0.35 * len(rows) + 1.2)

    fig, ax = plt.subplots(figsize=(7, height))
    _barh(ax, names, [r.p_auc for r in rows], "Predicate ROC-AUC", "#4878cf")
    ax.axvline(0.5, color="grey", linestyle="--", linewidth=1)
    fig.tight_layout()
    path = outdir / "predicate_auc.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, height))
    y = np.arange(len(rows))
    ax.barh(y - 0.2, [r.pdd for r in rows], height=0.4, label="PDD", color="#d65f5f")
    ax.barh(y + 0.2, [r.pdo for r in rows], height=0.4, label="PDO", color="#ee854a")
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_title("Displacement (lower is better)")
    ax.legend()
    fig.tight_layout()
    path = outdir / "displacement.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    ks_with_values = [
        k for k in report.ks if any(r.recall.get(k) is not None for r in rows)
    ]
    if ks_with_values:
        fig, ax = plt.subplots(figsize=(7, height))
        y = np.arange(len(rows))
        band = 0.8 / len(ks_with_values)
        for i, k in enumerate(ks_with_values):
            offsets = y - 0.4 + band * (i + 0.5)
            values = [r.recall.get(k) or 0.0 for r in rows]
            ax.barh(offsets, values, height=band * 0.9, label=f"R@{k}")
        ax.set_yticks(y)
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xlim(0, 1)
        ax.set_title("Per-predicate Recall@k")
        ax.legend()
        fig.tight_layout()
        path = outdir / "recall.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    fig, ax = plt.subplots(figsize=(7, height))
    all_rows = list(report.rows)
    y = np.arange(len(all_rows))
    ax.barh(y, [r.positives for r in all_rows], height=0.8, label="positive", color="#6acc65")
    ax.barh(
        y,
        [r.negatives for r in all_rows],
        height=0.8,
        left=[r.positives for r in all_rows],
        label="negative",
        color="#956cb4",
    )
    ax.set_yticks(y)
    ax.set_yticklabels([r.predicate for r in all_rows])
    ax.invert_yaxis()
    ax.set_title("Annotation support")
    ax.legend()
    fig.tight_layout()
    path = outdir / "support.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def write_report_files(report: MetricReport, outdir: str | Path) -> dict[str, object]:
    """Write report.txt, report.csv, report.json, and figures under ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.txt").write_text(format_table(report), encoding="utf-8")
    write_csv(report, outdir / "report.csv")
    (outdir / "report.json").write_text(
        json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8"
    )
    figures = render_figures(report, outdir / "figures")
    return {
        "table": outdir / "report.txt",
        "csv": outdir / "report.csv",
        "json": outdir / "report.json",
        "figures": figures,
    }
