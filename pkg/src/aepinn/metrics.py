"""Error metrics over test grids and comparison-table emission.

Three headline numbers per run, computed from per-point errors e_i and
exact values u_i over the n_test grid points:

    e_max    = max |e_i|
    e_rms    = sqrt(sum e_i^2) / n_test        (divisor outside the root)
    e_l2rel  = sqrt(sum e_i^2) / sqrt(sum u_i^2)

``e_rms`` keeps the 1/N outside the square root on purpose; the
conventional root-mean-square sqrt(mean e_i^2) is emitted alongside it as
``e_rms_conventional`` so both conventions stay inspectable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CSV_HEADER = "method,problem,kappa,E_M,E_R,E_R_conventional,E_L,n_test,seed,iterations"


@dataclass
class ErrorReport:
    e_max: float
    e_rms: float
    e_rms_conventional: float
    e_l2rel: float  # None when the exact solution has zero norm
    n_test: int
    pointwise: np.ndarray = None

    def as_tuple(self):
        return (self.e_max, self.e_rms, self.e_l2rel)


def compute_errors(model, spec, grid=None, keep_pointwise=False):
    """Error report of a model against the exact solution on a test grid.

    Grid points within interface tolerance are assigned by the sign of
    phi; exact zeros evaluate on side 1.
    """
    grid = spec.test_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    sub = spec.domain.subdomain_of(grid)
    exact = spec.u_exact(grid)
    predicted = model.predict(grid, subdomains=sub)
    err = np.abs(exact - predicted)
    sq = float((err * err).sum())
    denom = float((exact * exact).sum())
    n = len(grid)
    return ErrorReport(
        e_max=float(err.max()),
        e_rms=float(np.sqrt(sq) / n),
        e_rms_conventional=float(np.sqrt(sq / n)),
        e_l2rel=float(np.sqrt(sq) / np.sqrt(denom)) if denom > 0.0 else None,
        n_test=n,
        pointwise=err if keep_pointwise else None,
    )


@dataclass
class ResultRow:
    """One (method, problem) result for table emission."""

    method: str
    problem: str
    report: ErrorReport
    kappa: int = None
    seed: int = None
    iterations: int = None


def _fmt(value):
    if value is None:
        return "undefined"
    return f"{value:.3e}"


def error_table(rows):
    """Aligned text table: metrics as rows, methods as columns."""
    rows = list(rows)
    if not rows:
        raise ValueError("at least one result row is required")
    with_kappa = any(r.kappa is not None for r in rows)
    methods = []
    for r in rows:
        if r.method not in methods:
            methods.append(r.method)
    keys = []
    for r in rows:
        if (r.kappa,) not in keys:
            keys.append((r.kappa,))
    header = ["metric"] + (["kappa"] if with_kappa else []) + methods
    lines = []
    for metric, attr in (("E_M", "e_max"), ("E_R", "e_rms"), ("E_L", "e_l2rel")):
        for (kappa,) in keys:
            cells = [metric] + ([str(kappa)] if with_kappa else [])
            for method in methods:
                match = [r for r in rows if r.method == method and r.kappa == kappa]
                cells.append(_fmt(getattr(match[0].report, attr)) if match else "-")
            lines.append(cells)
    widths = [max(len(row[c]) for row in [header] + lines) for c in range(len(header))]
    rendered = []
    for row in [header] + lines:
        rendered.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(rendered) + "\n"


def rows_to_csv(rows):
    lines = [CSV_HEADER]
    for r in rows:
        rep = r.report
        cells = [
            r.method,
            r.problem,
            "" if r.kappa is None else str(r.kappa),
            repr(rep.e_max),
            repr(rep.e_rms),
            repr(rep.e_rms_conventional),
            "" if rep.e_l2rel is None else repr(rep.e_l2rel),
            str(rep.n_test),
            "" if r.seed is None else str(r.seed),
            "" if r.iterations is None else str(r.iterations),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def rows_from_csv(text):
    lines = text.strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ValueError("unrecognized error-table CSV header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        report = ErrorReport(
            e_max=float(cells[3]),
            e_rms=float(cells[4]),
            e_rms_conventional=float(cells[5]),
            e_l2rel=float(cells[6]) if cells[6] else None,
            n_test=int(cells[7]),
        )
        rows.append(
            ResultRow(
                method=cells[0],
                problem=cells[1],
                kappa=int(cells[2]) if cells[2] else None,
                report=report,
                seed=int(cells[8]) if cells[8] else None,
                iterations=int(cells[9]) if cells[9] else None,
            )
        )
    return rows


def error_field_csv(model, spec, path, grid=None):
    """Per-point absolute errors |u - u_nn| on the test grid, as CSV."""
    grid = spec.test_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    report = compute_errors(model, spec, grid, keep_pointwise=True)
    dim = grid.shape[1]
    header = ",".join("xyz"[:dim]) + ",abs_error"
    lines = [header]
    for row, err in zip(grid, report.pointwise):
        coords = ",".join(repr(float(c)) for c in row)
        lines.append(f"{coords},{float(err)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return report
