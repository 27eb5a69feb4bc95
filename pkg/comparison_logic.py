# -*- coding: utf-8 -*-
"""
Cross-configuration comparison of evaluation reports.

Renders a text table of several EvalReports (one row per configuration) and
writes the same comparison to an .xlsx workbook: a summary sheet plus one
per-question-type breakdown sheet per configuration.
"""

import logging
import re
from typing import List, Mapping, Sequence

import openpyxl
from openpyxl.styles import Font
from openpyxl.utils import cell as openpyxl_cell_utils # For get_column_letter

from evaluation import EvalReport

logger = logging.getLogger(__name__) # Use module-specific logger

SUMMARY_SHEET = "Summary"
_SHEET_TITLE_FORBIDDEN = re.compile(r"[\[\]\*\?/\\:]")
_MAX_SHEET_TITLE = 31


def comparison_table(reports: Mapping[str, EvalReport], title: str = "") -> str:
    """Aligned text table: configuration, hits@1, MAP, MRR, n."""
    width = max([len("Configuration")] + [len(label) for label in reports])
    lines = [title] if title else []
    lines.append(f"{'Configuration':<{width}}  {'hits@1':>7}  {'MAP':>6}  {'MRR':>6}  {'n':>6}")
    lines.append("-" * (width + 35))
    for label, report in reports.items():
        lines.append(f"{label:<{width}}  {report.overall_hits1:>7.2f}  {report.map:>6.3f}  "
                     f"{report.mrr:>6.3f}  {report.n:>6}")
    return "\n".join(lines) + "\n"


def ordering_violations(reports: Mapping[str, EvalReport], order: Sequence[Sequence[str]],
                        tolerance: float = 2.0) -> List[str]:
    """
    Checks that hits@1 does not increase along `order` (a list of tiers; labels
    within one tier are unordered), allowing ties within `tolerance` points.

    Returns:
        One message per violated adjacent-tier pair (empty when the ordering holds).
    """
    problems = []
    tiers = [[label for label in tier if label in reports] for tier in order]
    tiers = [tier for tier in tiers if tier]
    for upper, lower in zip(tiers, tiers[1:]):
        floor = min(reports[label].overall_hits1 for label in upper)
        for label in lower:
            score = reports[label].overall_hits1
            if score > floor + tolerance:
                problems.append(f"'{label}' ({score:.2f}) beats {upper} (min {floor:.2f}) by more than {tolerance}")
    return problems


def _sheet_title(label: str, taken: Sequence[str]) -> str:
    base = _SHEET_TITLE_FORBIDDEN.sub("_", label)[:_MAX_SHEET_TITLE] or "Sheet"
    title, n = base, 2
    while title in taken:
        suffix = f" ({n})"
        title = base[:_MAX_SHEET_TITLE - len(suffix)] + suffix
        n += 1
    return title


def _write_rows(sheet, headers: Sequence[str], widths: Sequence[int], rows: Sequence[Sequence]):
    # Write headers to the sheet and apply formatting
    for col_idx, header_text in enumerate(headers, start=1):
        cell = sheet.cell(row=1, column=col_idx, value=header_text)
        cell.font = Font(bold=True) # Make headers bold
        column_letter = openpyxl_cell_utils.get_column_letter(col_idx)
        sheet.column_dimensions[column_letter].width = widths[col_idx - 1]
    for row_num, row in enumerate(rows, start=2):
        for col_idx, value in enumerate(row, start=1):
            sheet.cell(row=row_num, column=col_idx, value=value)


def write_comparison_workbook(path: str, reports: Mapping[str, EvalReport]) -> str:
    """
    Writes the comparison workbook.

    Args:
        path: Destination .xlsx path.
        reports: Configuration label -> report, in display order.

    Returns:
        The path written.

    Raises:
        ValueError: No reports.
        OSError: Unwritable destination.
    """
    if not reports:
        raise ValueError("write_comparison_workbook needs at least one report.")
    logger.info(f"Writing comparison workbook for {len(reports)} configurations to {path}")
    workbook = openpyxl.Workbook()
    summary = workbook.active
    summary.title = SUMMARY_SHEET
    _write_rows(summary, ["Configuration", "hits@1", "MAP", "MRR", "n", "Fingerprint"],
                [40, 12, 12, 12, 10, 40],
                [[label, round(r.overall_hits1, 2), round(r.map, 4), round(r.mrr, 4), r.n, r.fingerprint]
                 for label, r in reports.items()])

    for label, report in reports.items():
        sheet = workbook.create_sheet(title=_sheet_title(label, workbook.sheetnames))
        rows = [[qtype, round(row["hits1"], 2), int(row["n"])] for qtype, row in report.per_type.items()]
        rows.append(["Overall", round(report.overall_hits1, 2), report.n])
        _write_rows(sheet, ["Question Type", "hits@1", "n"], [30, 12, 10], rows)
        sheet.cell(row=len(rows) + 1, column=1).font = Font(bold=True)

    workbook.save(path)
    logger.info("Comparison workbook saved.")
    return path
