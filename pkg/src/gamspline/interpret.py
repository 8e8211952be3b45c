"""Centered per-predictor effect curves and their file exports.

The raw spline block of predictor j contributes sum_k coef_k * b_k(x) to the
log-odds; subtracting its integral over [0, 1] pins each curve to integrate
to zero, so no constant can slosh between components.  The subtracted
constants belong to the intercept: adding them back reproduces every
prediction exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnsupportedModelError
from .fit import FittedModel
from .splines import basis_integrals, eval_basis_matrix

DEFAULT_GRID_SIZE = 200


@dataclass(frozen=True, eq=False)
class CurveTable:
    """One predictor's centered effect curve on a plotting grid.

    empirical_support is (min, q1, median, q3, max) of the predictor's
    training values: regions outside the quartiles are thinly supported and
    should be read with care.
    """

    predictor_name: str
    grid_x: np.ndarray
    partial_effect: np.ndarray
    centering_constant: float
    empirical_support: tuple[float, float, float, float, float]


def entrywise_function(model: FittedModel, j: int, grid_x=None) -> CurveTable:
    """Centered effect curve of predictor ``j`` evaluated on ``grid_x``.

    The curve is sum_k coef_k * b_k(x) minus sum_k coef_k * integral(b_k),
    over the retained (non-dropped) basis functions, so its integral over
    [0, 1] vanishes.
    """
    spec = model.spec
    if not spec.spline_enabled:
        raise UnsupportedModelError(
            "effect curves need a spline-expanded model; the linear baseline "
            "has a single slope per predictor"
        )
    if not 0 <= j < len(spec.predictor_names):
        raise ValueError(f"predictor index {j} out of range")
    if grid_x is None:
        grid_x = np.linspace(0.0, 1.0, DEFAULT_GRID_SIZE)
    else:
        grid_x = np.asarray(grid_x, dtype=float)
        if grid_x.ndim != 1 or np.any(np.diff(grid_x) <= 0.0):
            raise ValueError("grid_x must be strictly increasing")
        if grid_x[0] < 0.0 or grid_x[-1] > 1.0:
            raise ValueError("grid_x must lie within [0, 1]")

    basis = spec.bases[j]
    keep = np.arange(basis.num_basis) != spec.dropped_index[j]
    coefs = np.asarray(model.predictor_coefs[j], dtype=float)
    values = eval_basis_matrix(basis, grid_x)[:, keep]
    integrals = basis_integrals(basis)[keep]
    centering = float(np.dot(coefs, integrals))
    return CurveTable(
        predictor_name=spec.predictor_names[j],
        grid_x=grid_x,
        partial_effect=values @ coefs - centering,
        centering_constant=centering,
        empirical_support=spec.predictor_support[j],
    )


def centered_intercept(model: FittedModel) -> float:
    """Intercept absorbing every curve's centering constant.

    centered_intercept + sum_j curve_j(x_j) + covariate terms reproduces the
    model's linear predictor.
    """
    if not model.spec.spline_enabled:
        raise UnsupportedModelError("effect curves need a spline-expanded model")
    shift = 0.0
    for j in range(len(model.spec.predictor_names)):
        basis = model.spec.bases[j]
        keep = np.arange(basis.num_basis) != model.spec.dropped_index[j]
        integrals = basis_integrals(basis)[keep]
        shift += float(np.dot(model.predictor_coefs[j], integrals))
    return model.intercept + shift


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def curve_to_csv(curve: CurveTable) -> str:
    lines = ["x,partial_effect"]
    lines.extend(
        f"{float(x)!r},{float(y)!r}"
        for x, y in zip(curve.grid_x, curve.partial_effect)
    )
    return "\n".join(lines) + "\n"


def curve_to_svg(curve: CurveTable) -> str:
    """Minimal static SVG line plot: effect curve over the predictor axis,
    dashed markers at the training interquartile range.  Hand-rolled so the
    bytes are a pure function of the curve."""
    width, height = 560.0, 400.0
    left, right, top, bottom = 72.0, 24.0, 36.0, 64.0
    plot_w = width - left - right
    plot_h = height - top - bottom

    y_min = float(np.min(curve.partial_effect))
    y_max = float(np.max(curve.partial_effect))
    if y_max - y_min < 1e-12:
        y_min, y_max = y_min - 1.0, y_max + 1.0
    pad = 0.05 * (y_max - y_min)
    y_min -= pad
    y_max += pad

    def sx(x: float) -> float:
        return left + plot_w * x

    def sy(y: float) -> float:
        return top + plot_h * (y_max - y) / (y_max - y_min)

    points = " ".join(
        f"{sx(float(x)):.2f},{sy(float(y)):.2f}"
        for x, y in zip(curve.grid_x, curve.partial_effect)
    )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<text x="{left + plot_w / 2:.2f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{curve.predictor_name}</text>',
    ]
    # axes
    parts.append(
        f'<line x1="{left:.2f}" y1="{top + plot_h:.2f}" x2="{left + plot_w:.2f}" '
        f'y2="{top + plot_h:.2f}" stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" '
        f'y2="{top + plot_h:.2f}" stroke="black" stroke-width="1"/>'
    )
    # x ticks at 0, 0.25, ..., 1
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{top + plot_h:.2f}" x2="{x:.2f}" '
            f'y2="{top + plot_h + 5:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 20:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    # y ticks at min/zero/max of the padded range
    for value in (y_min + pad, 0.0, y_max - pad):
        if not y_min <= value <= y_max:
            continue
        y = sy(value)
        parts.append(
            f'<line x1="{left - 5:.2f}" y1="{y:.2f}" x2="{left:.2f}" y2="{y:.2f}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 9:.2f}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{value:.3g}</text>'
        )
    # interquartile markers of the training support
    _, q1, _, q3, _ = curve.empirical_support
    for q in (q1, q3):
        x = sx(float(q))
        parts.append(
            f'<line x1="{x:.2f}" y1="{top:.2f}" x2="{x:.2f}" '
            f'y2="{top + plot_h:.2f}" stroke="#888888" stroke-width="1" '
            f'stroke-dasharray="4,4"/>'
        )
    parts.append(
        f'<polyline points="{points}" fill="none" stroke="#1f5fa8" stroke-width="2"/>'
    )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 16:.2f}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="13">'
        f"Predictive Value</text>"
    )
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.2f})">Partial Effect</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_curves(
    model: FittedModel,
    out_dir,
    fmt: str = "csv",
    grid_size: int = DEFAULT_GRID_SIZE,
) -> list[Path]:
    """Write one curve file per predictor under ``out_dir``.

    ``fmt='csv'`` writes CSVs only; ``fmt='svg'`` additionally writes a
    static SVG per predictor.  Outputs are byte-deterministic for a given
    model.
    """
    if fmt not in ("csv", "svg"):
        raise ValueError(f"format must be 'csv' or 'svg', got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, 1.0, grid_size)
    written: list[Path] = []
    for j, name in enumerate(model.spec.predictor_names):
        curve = entrywise_function(model, j, grid)
        stem = f"curve_{_safe_name(name)}"
        csv_path = out_dir / f"{stem}.csv"
        csv_path.write_text(curve_to_csv(curve), encoding="utf-8")
        written.append(csv_path)
        if fmt == "svg":
            svg_path = out_dir / f"{stem}.svg"
            svg_path.write_text(curve_to_svg(curve), encoding="utf-8")
            written.append(svg_path)
    return written
