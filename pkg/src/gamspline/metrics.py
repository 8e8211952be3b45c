"""Ranking metrics with explicit tie handling, plus percentile-bootstrap CIs.

AUROC is the Mann-Whitney statistic (ties get half credit), AUPRC is average
precision with thresholds grouped by unique score, and the F1 operating point
is chosen by exhaustive scan over the observed scores.  Bootstrap replicates
draw their random streams from (seed, replicate index) so parallel and
sequential execution would produce identical intervals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError, UnstableBootstrapError

logger = logging.getLogger(__name__)

DEFAULT_N_BOOTSTRAP = 1000
_CI_PERCENTILES = (2.5, 97.5)


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-d and aligned")
    if scores.size == 0:
        raise ValueError("scores must be non-empty")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(int)


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative,
    counting ties as one half; equals the trapezoidal ROC area."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    ranks = rankdata(scores)  # midranks: exact multiples of 0.5
    u = float(ranks[labels == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _threshold_counts(scores, labels):
    """Cumulative TP/FP after each group of tied scores, descending."""
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    ends = np.append(distinct, scores.size - 1)
    tp = np.cumsum(sorted_labels)[ends]
    fp = (ends + 1) - tp
    return sorted_scores[ends], tp, fp


def auprc(scores, labels) -> float:
    """Average precision over descending unique thresholds, ties grouped."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive")
    _, tp, fp = _threshold_counts(scores, labels)
    recall = tp / n_pos
    precision = tp / (tp + fp)
    steps = np.diff(np.concatenate([[0.0], recall]))
    # fsum gives the exactly rounded total, independent of term order.
    return math.fsum((steps * precision).tolist())


def f1_at_threshold(scores, labels, threshold: float) -> float:
    """F1 of the classifier ``score >= threshold``; 0 when degenerate."""
    scores, labels = _validate(scores, labels)
    if int(labels.sum()) == 0:
        raise UndefinedMetricError("F1 needs at least one positive")
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    fn = int(np.sum(~predicted & (labels == 1)))
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def select_f1_threshold(scores, labels) -> float:
    """The observed score maximizing F1; ties resolve to the lowest score."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("F1 needs at least one positive")
    thresholds, tp, fp = _threshold_counts(scores, labels)
    fn = n_pos - tp
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)
    # thresholds are descending; the last argmax is the lowest threshold.
    best = f1.size - 1 - int(np.argmax(f1[::-1]))
    return float(thresholds[best])


_METRIC_IDS = ("auroc", "auprc", "f1")


def _metric_value(metric_id: str, scores, labels, threshold) -> float:
    if metric_id == "auroc":
        return auroc(scores, labels)
    if metric_id == "auprc":
        return auprc(scores, labels)
    if metric_id == "f1":
        if threshold is None:
            raise ValueError("f1 bootstrap requires a threshold")
        return f1_at_threshold(scores, labels, threshold)
    raise ValueError(f"unknown metric {metric_id!r}; expected one of {_METRIC_IDS}")


def _bootstrap(scores, labels, metric_id, n_boot, seed, threshold):
    scores, labels = _validate(scores, labels)
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    seed_prefix = (seed,) if isinstance(seed, int) else tuple(seed)
    n = scores.size
    values = []
    skipped = 0
    for rep in range(n_boot):
        rng = np.random.default_rng(seed_prefix + (rep,))
        idx = rng.integers(0, n, size=n)
        try:
            values.append(_metric_value(metric_id, scores[idx], labels[idx], threshold))
        except UndefinedMetricError:
            skipped += 1
    if skipped > n_boot // 2:
        raise UnstableBootstrapError(
            f"{skipped}/{n_boot} bootstrap replicates left {metric_id} undefined"
        )
    if skipped:
        logger.warning(
            "%d/%d bootstrap replicates skipped for %s (single-class resamples)",
            skipped,
            n_boot,
            metric_id,
        )
    low, high = np.percentile(values, _CI_PERCENTILES)
    return float(low), float(high), skipped


def bootstrap_ci(
    scores,
    labels,
    metric_id: str,
    n_boot: int = DEFAULT_N_BOOTSTRAP,
    seed=0,
    threshold: float | None = None,
) -> tuple[float, float]:
    """95% percentile bootstrap interval for one metric.

    Rows are resampled with replacement; replicates where the metric is
    undefined are skipped (and counted), and more than 50% skipped raises
    UnstableBootstrapError.  The point estimate must be computable on the
    full sample or the underlying metric error propagates.
    """
    point = _metric_value(metric_id, *_validate(scores, labels), threshold)
    low, high, _ = _bootstrap(scores, labels, metric_id, n_boot, seed, threshold)
    # Percentile intervals are widened, if needed, to contain the point
    # estimate so the reported triple is always ordered.
    return min(low, point), max(high, point)


@dataclass(frozen=True)
class MetricReport:
    """Point estimates with 95% bootstrap intervals for one row slice.

    Metrics that are undefined on the slice (single-class subgroup, no
    positives) are reported as None rather than dropped.
    """

    auroc: float | None
    auprc: float | None
    f1: float | None
    auroc_ci: tuple[float, float] | None
    auprc_ci: tuple[float, float] | None
    f1_ci: tuple[float, float] | None
    n_bootstrap: int
    threshold_used: float | None
    n_rows: int
    subgroup: str | None = None
    skipped_replicates: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def _metric(point, ci):
            if point is None:
                return None
            return {
                "point": float(point),
                "ci_low": float(ci[0]),
                "ci_high": float(ci[1]),
            }

        return {
            "auroc": _metric(self.auroc, self.auroc_ci),
            "auprc": _metric(self.auprc, self.auprc_ci),
            "f1": _metric(self.f1, self.f1_ci),
            "n_bootstrap": int(self.n_bootstrap),
            "threshold_used": None
            if self.threshold_used is None
            else float(self.threshold_used),
            "n_rows": int(self.n_rows),
            "subgroup": self.subgroup,
            "skipped_replicates": {k: int(v) for k, v in self.skipped_replicates.items()},
        }


def compute_report(
    scores,
    labels,
    threshold: float,
    n_boot: int = DEFAULT_N_BOOTSTRAP,
    seed=0,
    subgroup: str | None = None,
) -> MetricReport:
    """AUROC/AUPRC/F1 with bootstrap CIs on one slice of rows."""
    scores, labels = _validate(scores, labels)
    points: dict[str, float | None] = {}
    cis: dict[str, tuple[float, float] | None] = {}
    skipped: dict[str, int] = {}
    for metric_id in _METRIC_IDS:
        try:
            point = _metric_value(metric_id, scores, labels, threshold)
            low, high, n_skipped = _bootstrap(
                scores, labels, metric_id, n_boot, seed, threshold
            )
            points[metric_id] = point
            cis[metric_id] = (min(low, point), max(high, point))
            if n_skipped:
                skipped[metric_id] = n_skipped
        except (UndefinedMetricError, UnstableBootstrapError) as exc:
            logger.warning("%s undefined on slice %r: %s", metric_id, subgroup, exc)
            points[metric_id] = None
            cis[metric_id] = None
    return MetricReport(
        auroc=points["auroc"],
        auprc=points["auprc"],
        f1=points["f1"],
        auroc_ci=cis["auroc"],
        auprc_ci=cis["auprc"],
        f1_ci=cis["f1"],
        n_bootstrap=n_boot,
        threshold_used=float(threshold),
        n_rows=int(scores.size),
        subgroup=subgroup,
        skipped_replicates=skipped,
    )


def subgroup_report(
    scores,
    labels,
    tags: dict[str, np.ndarray],
    tag_name: str,
    threshold: float,
    n_boot: int = DEFAULT_N_BOOTSTRAP,
    seed=0,
) -> list[MetricReport]:
    """One MetricReport per category of ``tag_name``, in sorted category order.

    Categories where a metric is undefined keep their row with that metric
    marked None; nothing is silently dropped.
    """
    scores, labels = _validate(scores, labels)
    if tag_name not in tags:
        raise ValueError(
            f"unknown tag {tag_name!r}; available tags: {sorted(tags)}"
        )
    column = np.asarray(tags[tag_name])
    if column.shape != scores.shape:
        raise ValueError(f"tag column {tag_name!r} not aligned with scores")
    seed_prefix = (seed,) if isinstance(seed, int) else tuple(seed)
    reports = []
    for idx, category in enumerate(np.unique(column)):
        mask = column == category
        reports.append(
            compute_report(
                scores[mask],
                labels[mask],
                threshold=threshold,
                n_boot=n_boot,
                seed=seed_prefix + (idx,),
                subgroup=f"{tag_name}={category}",
            )
        )
    return reports


def format_report_table(reports: list[MetricReport]) -> str:
    """Render reports as a fixed-width table, values in percent:
    ``point (ci_low-ci_high)``."""

    def _cell(point, ci):
        if point is None:
            return "undefined"
        return f"{100 * point:.1f} ({100 * ci[0]:.1f}-{100 * ci[1]:.1f})"

    rows = [("Slice", "n", "AUROC", "AUPRC", "F1 score")]
    for report in reports:
        rows.append(
            (
                report.subgroup or "overall",
                str(report.n_rows),
                _cell(report.auroc, report.auroc_ci),
                _cell(report.auprc, report.auprc_ci),
                _cell(report.f1, report.f1_ci),
            )
        )
    widths = [max(len(row[col]) for row in rows) for col in range(5)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
