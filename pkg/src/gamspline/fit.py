"""Penalized logistic fitting by damped Newton with the exact Hessian.

The objective is the negative Bernoulli log-likelihood plus a shared ridge
penalty on every coefficient except the intercept:

    sum_i [ log(1 + exp(eta_i)) - y_i * eta_i ] + penalty * ||theta[1:]||^2

with eta = design @ theta.  The problem is convex; Newton steps with Armijo
backtracking descend monotonically and the solver is fully deterministic.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit, log_expit

from .design import Dataset, ModelSpec, Standardizer, build_design
from .errors import NumericalError
from .splines import SplineBasis

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-8
_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 60

MODEL_FORMAT_VERSION = 1

# Smallest/largest probabilities predict_proba may emit: strictly inside (0, 1).
_PROB_FLOOR = np.nextafter(0.0, 1.0)
_PROB_CEIL = np.nextafter(1.0, 0.0)


def _as_theta(theta, n_columns: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_columns,):
        raise ValueError(f"theta must have length {n_columns}, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def objective(design: np.ndarray, labels, theta, penalty: float) -> float:
    """Penalized negative log-likelihood at ``theta``.

    Uses the log-sigmoid identity -[y log p + (1-y) log(1-p)]
    = -(y * log_expit(eta) + (1-y) * log_expit(-eta)), which stays finite
    for linear predictors of magnitude well beyond 1e4.
    """
    theta = _as_theta(theta, design.shape[1])
    y = np.asarray(labels, dtype=float)
    eta = design @ theta
    nll = -float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))
    pen = float(penalty) * float(np.dot(theta[1:], theta[1:]))
    return nll + pen


def gradient(design: np.ndarray, labels, theta, penalty: float) -> np.ndarray:
    """Gradient of ``objective``: design.T @ (p - y) plus the penalty term,
    with the intercept entry unpenalized."""
    theta = _as_theta(theta, design.shape[1])
    y = np.asarray(labels, dtype=float)
    probs = expit(design @ theta)
    grad = design.T @ (probs - y)
    grad[1:] += 2.0 * float(penalty) * theta[1:]
    return grad


def hessian(design: np.ndarray, theta, penalty: float) -> np.ndarray:
    """Exact Hessian design.T @ diag(p(1-p)) @ design + 2*penalty*D."""
    theta = _as_theta(theta, design.shape[1])
    probs = expit(design @ theta)
    weights = probs * (1.0 - probs)
    hess = design.T @ (design * weights[:, None])
    idx = np.arange(1, design.shape[1])
    hess[idx, idx] += 2.0 * float(penalty)
    return hess


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Solve H d = -g, boosting the diagonal if the factorization fails."""
    scale = max(float(np.trace(hess)) / hess.shape[0], 1.0)
    boosts = [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2]
    for boost in boosts:
        try:
            h = hess if boost == 0.0 else hess + boost * scale * np.eye(hess.shape[0])
            factor = scipy.linalg.cho_factor(h, check_finite=False)
            return scipy.linalg.cho_solve(factor, -grad, check_finite=False)
        except scipy.linalg.LinAlgError:
            continue
    raise NumericalError(
        "Hessian factorization failed after ridge-boost retries",
        diagnostics={
            "boosts_tried": boosts,
            "grad_sup_norm": float(np.max(np.abs(grad))),
            "hessian_trace": float(np.trace(hess)),
        },
    )


@dataclass(frozen=True)
class FitDiagnostics:
    objective: float
    grad_sup_norm: float
    n_iter: int
    converged: bool
    objective_trace: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "objective": float(self.objective),
            "grad_sup_norm": float(self.grad_sup_norm),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "objective_trace": [float(v) for v in self.objective_trace],
        }


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Fitted coefficients plus everything needed to score new data.

    ``predictor_coefs`` holds one vector per predictor: the retained spline
    coefficients (length num_basis - 1) for spline models, or a single raw
    slope for the linear baseline.
    """

    spec: ModelSpec
    intercept: float
    covariate_coefs: np.ndarray
    predictor_coefs: tuple[np.ndarray, ...]
    diagnostics: FitDiagnostics

    def theta(self) -> np.ndarray:
        parts = [np.array([self.intercept]), np.asarray(self.covariate_coefs, dtype=float)]
        parts.extend(np.asarray(a, dtype=float) for a in self.predictor_coefs)
        return np.concatenate(parts)


def _unstack_theta(spec: ModelSpec, theta: np.ndarray):
    p = len(spec.covariate_names)
    intercept = float(theta[0])
    covariate_coefs = theta[1 : 1 + p].copy()
    if spec.spline_enabled:
        widths = [b.num_basis - 1 for b in spec.bases]
    else:
        widths = [1] * len(spec.predictor_names)
    blocks = []
    start = 1 + p
    for width in widths:
        blocks.append(theta[start : start + width].copy())
        start += width
    return intercept, covariate_coefs, tuple(blocks)


def fit_model(
    spec: ModelSpec,
    train: Dataset,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    theta0=None,
) -> FittedModel:
    """Minimize the penalized objective over ``train``.

    Damped Newton from theta = 0 (or ``theta0``): each step solves the exact
    Hessian system and backtracks by halving until the Armijo condition
    holds.  Terminates when the gradient sup-norm falls below ``tol``;
    reaching ``max_iter`` returns converged=False rather than raising, since
    unpenalized separable problems legitimately never converge.
    """
    design = build_design(spec, train)
    y = np.asarray(train.labels, dtype=float)
    d = design.shape[1]
    theta = np.zeros(d) if theta0 is None else _as_theta(theta0, d).copy()

    obj = objective(design, y, theta, spec.penalty)
    trace = [obj]
    grad = gradient(design, y, theta, spec.penalty)
    converged = bool(np.max(np.abs(grad)) <= tol)
    n_iter = 0

    while not converged and n_iter < max_iter:
        hess = hessian(design, theta, spec.penalty)
        direction = _newton_direction(hess, grad)
        slope = float(np.dot(grad, direction))
        if slope >= 0.0:
            logger.warning("Newton direction lost descent; stopping early")
            break

        step = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = theta + step * direction
            if np.array_equal(candidate, theta):
                break  # step shrank below float resolution of theta
            candidate_obj = objective(design, y, candidate, spec.penalty)
            if candidate_obj <= obj + _ARMIJO_C * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Near the optimum the Armijo decrease is below float64
            # resolution of the objective and every step gets rejected.
            # The full Newton step still contracts the gradient, so accept
            # it when it strictly does and the objective moves by no more
            # than rounding.
            candidate = theta + direction
            candidate_obj = objective(design, y, candidate, spec.penalty)
            candidate_grad = gradient(design, y, candidate, spec.penalty)
            # Summation rounding noise in the objective grows like sqrt(n).
            rounding = (
                np.finfo(float).eps
                * max(abs(obj), 1.0)
                * (4.0 + math.sqrt(design.shape[0]))
            )
            if (
                np.max(np.abs(candidate_grad)) < np.max(np.abs(grad))
                and candidate_obj <= obj + rounding
            ):
                theta, obj = candidate, candidate_obj
                trace.append(obj)
                n_iter += 1
                grad = candidate_grad
                converged = bool(np.max(np.abs(grad)) <= tol)
                continue
            logger.warning("line search stalled after %d halvings", _MAX_BACKTRACKS)
            break

        theta = candidate
        obj = candidate_obj
        trace.append(obj)
        n_iter += 1
        grad = gradient(design, y, theta, spec.penalty)
        converged = bool(np.max(np.abs(grad)) <= tol)

    intercept, covariate_coefs, predictor_coefs = _unstack_theta(spec, theta)
    diagnostics = FitDiagnostics(
        objective=obj,
        grad_sup_norm=float(np.max(np.abs(grad))),
        n_iter=n_iter,
        converged=converged,
        objective_trace=tuple(trace),
    )
    if not converged:
        logger.warning(
            "fit stopped without convergence: %d iterations, grad sup-norm %.3e",
            n_iter,
            diagnostics.grad_sup_norm,
        )
    return FittedModel(
        spec=spec,
        intercept=intercept,
        covariate_coefs=covariate_coefs,
        predictor_coefs=predictor_coefs,
        diagnostics=diagnostics,
    )


def predict_proba(model: FittedModel, data: Dataset) -> np.ndarray:
    """Predicted event probabilities, strictly inside (0, 1)."""
    design = build_design(model.spec, data)
    probs = expit(design @ model.theta())
    return np.clip(probs, _PROB_FLOOR, _PROB_CEIL)


def linear_predictor(model: FittedModel, data: Dataset) -> np.ndarray:
    """Linear predictor (log-odds scale) for each row of ``data``."""
    design = build_design(model.spec, data)
    return design @ model.theta()


# --- serialization -----------------------------------------------------------
#
# The JSON document stores every float through Python's repr, which
# round-trips float64 exactly, so save -> load reproduces the model bit for
# bit.


def model_to_dict(model: FittedModel, extra: dict | None = None) -> dict:
    spec = model.spec
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": {
            "covariate_names": list(spec.covariate_names),
            "predictor_names": list(spec.predictor_names),
            "spline_enabled": bool(spec.spline_enabled),
            "penalty": float(spec.penalty),
            "bases": [b.to_dict() for b in spec.bases],
            "dropped_index": [int(i) for i in spec.dropped_index],
            "standardization": spec.standardizer.to_dict(),
            "predictor_support": [
                [float(v) for v in s] for s in spec.predictor_support
            ],
        },
        "coefficients": {
            "intercept": float(model.intercept),
            "covariates": [float(v) for v in model.covariate_coefs],
            "predictors": [[float(v) for v in a] for a in model.predictor_coefs],
        },
        "diagnostics": model.diagnostics.to_dict(),
    }
    if extra:
        payload["extra"] = extra
    return payload


def model_from_dict(payload: dict) -> tuple[FittedModel, dict]:
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version!r}")
    raw_spec = payload["spec"]
    spec = ModelSpec(
        covariate_names=tuple(raw_spec["covariate_names"]),
        predictor_names=tuple(raw_spec["predictor_names"]),
        bases=tuple(SplineBasis.from_dict(b) for b in raw_spec["bases"]),
        dropped_index=tuple(raw_spec["dropped_index"]),
        penalty=float(raw_spec["penalty"]),
        standardizer=Standardizer.from_dict(raw_spec["standardization"]),
        spline_enabled=bool(raw_spec["spline_enabled"]),
        predictor_support=tuple(tuple(s) for s in raw_spec["predictor_support"]),
    )
    coefs = payload["coefficients"]
    raw_diag = payload["diagnostics"]
    model = FittedModel(
        spec=spec,
        intercept=float(coefs["intercept"]),
        covariate_coefs=np.asarray(coefs["covariates"], dtype=float),
        predictor_coefs=tuple(
            np.asarray(a, dtype=float) for a in coefs["predictors"]
        ),
        diagnostics=FitDiagnostics(
            objective=float(raw_diag["objective"]),
            grad_sup_norm=float(raw_diag["grad_sup_norm"]),
            n_iter=int(raw_diag["n_iter"]),
            converged=bool(raw_diag["converged"]),
            objective_trace=tuple(float(v) for v in raw_diag["objective_trace"]),
        ),
    )
    return model, dict(payload.get("extra", {}))


def save_model(model: FittedModel, path, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(model, extra=extra), handle, indent=2)
        handle.write("\n")


def load_model(path) -> tuple[FittedModel, dict]:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return model_from_dict(payload)
