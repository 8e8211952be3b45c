"""Penalty selection by validation AUROC over a fixed grid.

Spline knots and covariate standardization derive from the training rows
once per search, never from validation, and the basis size is computed once
from the training sample count.  Ties in validation AUROC resolve toward the
larger penalty (the smoother model).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .design import Dataset, ModelTemplate, build_model_spec
from .errors import NumericalError, TuningError
from .fit import DEFAULT_MAX_ITER, DEFAULT_TOL, FittedModel, fit_model, predict_proba
from .metrics import auroc

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class TuneCandidate:
    penalty: float
    val_auroc: float | None
    converged: bool | None
    n_iter: int | None
    objective: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "penalty": float(self.penalty),
            "val_auroc": None if self.val_auroc is None else float(self.val_auroc),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "objective": None if self.objective is None else float(self.objective),
            "error": self.error,
        }


@dataclass(frozen=True, eq=False)
class TuneResult:
    grid: tuple[float, ...]
    selection_log: tuple[TuneCandidate, ...]
    best_penalty: float
    best_model: FittedModel

    @property
    def best_auroc(self) -> float:
        return max(c.val_auroc for c in self.selection_log if c.val_auroc is not None)

    def to_dict(self) -> dict:
        return {
            "grid": [float(v) for v in self.grid],
            "selection_log": [c.to_dict() for c in self.selection_log],
            "best_penalty": float(self.best_penalty),
            "best_val_auroc": float(self.best_auroc),
        }


def grid_search(
    template: ModelTemplate,
    train: Dataset,
    valid: Dataset,
    grid=DEFAULT_LAMBDA_GRID,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> TuneResult:
    """Fit one model per penalty on ``train`` and keep the validation-AUROC
    argmax.

    Candidates whose fit raises NumericalError are recorded and excluded;
    if every candidate fails, TuningError is raised.
    """
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise ValueError("penalty grid must be non-empty")
    if any(v < 0.0 for v in grid):
        raise ValueError("penalties must be non-negative")
    if train.covariate_names != valid.covariate_names or (
        train.predictor_names != valid.predictor_names
    ):
        raise ValueError("train and validation sets must share the same schema")

    base_spec = build_model_spec(template, train, penalty=grid[0])

    log: list[TuneCandidate] = []
    best: tuple[float, float, FittedModel] | None = None  # (auroc, penalty, model)
    for penalty in grid:
        spec = base_spec.with_penalty(penalty)
        try:
            model = fit_model(spec, train, max_iter=max_iter, tol=tol)
        except NumericalError as exc:
            logger.warning("penalty %g excluded: %s", penalty, exc)
            log.append(
                TuneCandidate(
                    penalty=penalty,
                    val_auroc=None,
                    converged=None,
                    n_iter=None,
                    objective=None,
                    error=str(exc),
                )
            )
            continue
        val_auroc = auroc(predict_proba(model, valid), valid.labels)
        log.append(
            TuneCandidate(
                penalty=penalty,
                val_auroc=val_auroc,
                converged=model.diagnostics.converged,
                n_iter=model.diagnostics.n_iter,
                objective=model.diagnostics.objective,
            )
        )
        if (
            best is None
            or val_auroc > best[0]
            or (val_auroc == best[0] and penalty > best[1])
        ):
            best = (val_auroc, penalty, model)

    if best is None:
        raise TuningError("every candidate penalty failed to fit")
    return TuneResult(
        grid=grid,
        selection_log=tuple(log),
        best_penalty=best[1],
        best_model=best[2],
    )
