"""Regression-table rendering and the canonical number format.

One formatting rule covers every number that reaches the user: positional
with up to four significant digits, switching to 3-significant-digit
scientific notation below 1e-4 (the "2.07e-05" style). The text table and
the JSON serialization are checked against each other under this rule, so
they can never drift apart.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .estimator import FitResult

STAR_NOTE = "*p<0.1; **p<0.05; ***p<0.01"
_SCI_BELOW = 1e-4


def format_value(x) -> str:
    """Canonical rendering of a coefficient, SE, or statistic."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    if x == 0.0:
        return "0"
    if abs(x) < _SCI_BELOW:
        return f"{x:.2e}"
    return np.format_float_positional(
        x, precision=4, unique=False, fractional=False, trim="-"
    )


def _column_cells(fit: FitResult, row_names: Sequence[str]) -> dict[str, tuple[str, str]]:
    cells = {}
    for name, coef, se, star in zip(fit.names, fit.coef, fit.se, fit.stars):
        cells[name] = (format_value(coef) + star, f"({format_value(se)})")
    return {name: cells.get(name, ("", "")) for name in row_names}


def render_table(fits: Sequence[FitResult], title: str | None = None) -> str:
    """Plain-text regression table, one column per fit.

    Layout follows the journal convention: coefficient with stars, SE in
    parentheses beneath, then Observations, R2, and Residual Std. Error,
    with the star thresholds in the footer note.
    """
    fits = list(fits)
    if not fits:
        raise ValueError("no fits to render")
    dep = title or fits[0].outcome

    row_names: list[str] = []
    for fit in fits:
        for name in fit.names:
            if name not in row_names:
                row_names.append(name)
    # keep the intercept last even when fits disagree on controls
    if "Constant" in row_names:
        row_names.remove("Constant")
        row_names.append("Constant")

    per_fit_cells = [_column_cells(f, row_names) for f in fits]
    obs_row = [f"{f.n_obs:,}" for f in fits]
    r2_row = [format_value(f.r_squared) for f in fits]
    rse_row = [
        f"{format_value(f.resid_std_error)} (df = {f.df_resid})" for f in fits
    ]
    method_row = [f.method for f in fits]
    number_row = [f"({i + 1})" for i in range(len(fits))]
    header_rows = [method_row, number_row]

    label_width = max(
        [len(n) for n in row_names]
        + [len("Residual Std. Error"), len("Observations"), len("Note:")]
    )
    col_widths = []
    for j, fit in enumerate(fits):
        cells = [per_fit_cells[j][n][k] for n in row_names for k in (0, 1)]
        cells += [obs_row[j], r2_row[j], rse_row[j], method_row[j], number_row[j]]
        lbl = fit.label or ""
        col_widths.append(max(len(c) for c in cells + [lbl]) + 2)

    total = label_width + sum(col_widths) + 2 * len(fits)

    def line(ch: str) -> str:
        return ch * total

    def row(label: str, cells: Sequence[str]) -> str:
        out = label.ljust(label_width)
        for width, cell in zip(col_widths, cells):
            out += "  " + cell.center(width)
        return out.rstrip()

    lines = [line("="), "Dependent variable:".center(total)]
    lines.append(dep.center(total))
    lines.append(line("-"))
    if any(f.label for f in fits):
        lines.append(row("", [f.label or "" for f in fits]))
    for cells in header_rows:
        lines.append(row("", cells))
    lines.append(line("-"))
    for name in row_names:
        lines.append(row(name, [per_fit_cells[j][name][0] for j in range(len(fits))]))
        lines.append(row("", [per_fit_cells[j][name][1] for j in range(len(fits))]))
        lines.append("")
    lines.append(line("-"))
    lines.append(row("Observations", obs_row))
    lines.append(row("R2", r2_row))
    lines.append(row("Residual Std. Error", rse_row))
    lines.append(line("="))
    note = "Note:".ljust(label_width)
    note += STAR_NOTE.rjust(total - label_width)
    lines.append(note)
    return "\n".join(line.rstrip() for line in lines) + "\n"


def fits_to_json(fits: Sequence[FitResult]) -> str:
    payload = [f.to_dict() for f in fits]
    return json.dumps(payload[0] if len(payload) == 1 else payload, indent=2)
