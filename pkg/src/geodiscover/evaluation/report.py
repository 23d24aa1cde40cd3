"""Report rendering: deterministic JSON, a delimited table, and figures."""

from __future__ import annotations

import json
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import LevelSummary, MetricReport

_COLUMNS = ("dcg", "idcg", "ndcg", "recall", "eimr")
_HEADERS = ("DCG@10", "IDCG@10", "NDCG@10", "Recall@20", "EIMR")


def _cell(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def _summary_row(summary: LevelSummary) -> list[str]:
    row = [summary.label, str(summary.query_count)]
    data = summary.as_dict()
    row.extend(_cell(data[column]) for column in _COLUMNS)
    return row


def render_table(report: MetricReport) -> str:
    """Tab-delimited per-level table for one system, overall row last."""
    lines = [f"# system: {report.system}"]
    lines.append("\t".join(("Level", "Queries") + _HEADERS))
    for label in sorted(report.levels):
        lines.append("\t".join(_summary_row(report.levels[label])))
    lines.append("\t".join(_summary_row(report.overall)))
    if report.missing_judgments:
        lines.append(f"# excluded (no judgments): {', '.join(report.missing_judgments)}")
    if report.recall_skipped:
        lines.append(f"# recall skipped (no relevant): {', '.join(report.recall_skipped)}")
    if report.eimr_missing:
        lines.append(f"# eimr missing (no intent): {', '.join(report.eimr_missing)}")
    return "\n".join(lines) + "\n"


def _slug(label: str) -> str:
    slug = re.sub(r"[^0-9A-Za-z._-]+", "-", label).strip("-")
    return slug or "system"


def _render_figure(report: MetricReport, path: Path) -> None:
    labels = sorted(report.levels)
    metrics = (("ndcg", "NDCG@10"), ("recall", "Recall@20"), ("eimr", "EIMR"))
    width = 0.25
    fig, ax = plt.subplots(figsize=(7, 4))
    for offset, (column, header) in enumerate(metrics):
        values = [report.levels[label].as_dict()[column] or 0.0 for label in labels]
        positions = [i + (offset - 1) * width for i in range(len(labels))]
        ax.bar(positions, values, width=width, label=header)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels([f"Level {label}" for label in labels])
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"{report.system}: ranking quality by constraint level")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    reports: list[MetricReport], out_dir: str | Path, stem: str = "report"
) -> dict[str, list[str]]:
    """Write the JSON report, the delimited table, and one figure per system.

    Output is deterministic (no timestamps) so frozen golden copies can
    be compared byte for byte. Returns the written paths by kind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    json_path = out / f"{stem}.json"
    payload = {"systems": [report.as_dict() for report in reports]}
    json_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    table_path = out / f"{stem}.tsv"
    table_path.write_text(
        "\n".join(render_table(report) for report in reports), encoding="utf-8"
    )

    figures = []
    for report in reports:
        figure_path = out / f"{stem}_{_slug(report.system)}.png"
        _render_figure(report, figure_path)
        figures.append(str(figure_path))

    return {
        "json": [str(json_path)],
        "table": [str(table_path)],
        "figures": figures,
    }
