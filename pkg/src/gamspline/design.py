"""Design-matrix assembly for the additive logistic model.

The design has one intercept column, the standardized covariates, and one
spline block per predictor with a single basis column removed.  Dropping one
column per predictor restores identifiability: the basis functions of each
predictor sum to 1, so keeping all of them would duplicate the intercept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .splines import (
    DEFAULT_ORDER,
    SplineBasis,
    build_basis,
    choose_num_basis,
    eval_basis_matrix,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column centering/scaling statistics learned from training data.

    Constant columns are flagged and passed through untouched (mean 0,
    scale 1) so that downstream penalties never divide by zero.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "constant": [bool(v) for v in self.constant],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardizer":
        return cls(
            mean=np.asarray(payload["mean"], dtype=float),
            std=np.asarray(payload["std"], dtype=float),
            constant=np.asarray(payload["constant"], dtype=bool),
        )


def standardize_fit(covariates) -> Standardizer:
    """Column means and population standard deviations of a covariate matrix."""
    cov = np.asarray(covariates, dtype=float)
    if cov.ndim != 2:
        raise ValueError("covariates must be a 2-d matrix")
    if cov.shape[0] < 2:
        raise ValueError("need at least two rows to standardize")
    mean = cov.mean(axis=0)
    std = cov.std(axis=0)  # population (ddof=0)
    constant = std == 0.0
    if np.any(constant):
        logger.warning(
            "constant covariate column(s) %s passed through unscaled",
            np.nonzero(constant)[0].tolist(),
        )
        mean = np.where(constant, 0.0, mean)
        std = np.where(constant, 1.0, std)
    return Standardizer(mean=mean, std=std, constant=constant)


def standardize_apply(stats: Standardizer, covariates) -> np.ndarray:
    cov = np.asarray(covariates, dtype=float)
    if cov.ndim != 2 or cov.shape[1] != stats.n_columns:
        raise ValueError(
            f"covariates must have {stats.n_columns} columns, got {cov.shape}"
        )
    return (cov - stats.mean) / stats.std


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-aligned modeling data.

    labels: binary outcomes in {0, 1}.
    covariates: n x p numeric matrix (already numerically encoded).
    predictors: n x J matrix of bounded scores in [0, 1].
    group_ids: per-row grouping key (e.g. patient); splits never separate
        rows sharing a group id.
    tags: named per-row categorical annotations used for subgroup reports.
    timestamps: optional per-row times used to keep only the latest row per
        group in evaluation splits.
    """

    labels: np.ndarray
    covariates: np.ndarray
    predictors: np.ndarray
    group_ids: np.ndarray
    covariate_names: tuple[str, ...]
    predictor_names: tuple[str, ...]
    tags: dict[str, np.ndarray] = field(default_factory=dict)
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        covariates = np.asarray(self.covariates, dtype=float)
        predictors = np.asarray(self.predictors, dtype=float)
        group_ids = np.asarray(self.group_ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "predictors", predictors)
        object.__setattr__(self, "group_ids", group_ids)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))

        n = labels.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        if covariates.shape != (n, len(self.covariate_names)):
            raise ValueError("covariates not aligned with labels/names")
        if predictors.shape != (n, len(self.predictor_names)):
            raise ValueError("predictors not aligned with labels/names")
        if group_ids.shape != (n,):
            raise ValueError("group_ids not aligned with labels")
        if covariates.size and not np.all(np.isfinite(covariates)):
            raise ValueError("covariates contain missing or non-finite values")
        if predictors.size and (
            not np.all(np.isfinite(predictors))
            or np.any(predictors < 0.0)
            or np.any(predictors > 1.0)
        ):
            raise ValueError("predictors must lie in [0, 1]")
        for name, column in self.tags.items():
            if np.asarray(column).shape != (n,):
                raise ValueError(f"tag column {name!r} not aligned with labels")
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            object.__setattr__(self, "timestamps", ts)
            if ts.shape != (n,):
                raise ValueError("timestamps not aligned with labels")

    @property
    def n_rows(self) -> int:
        return self.labels.shape[0]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            labels=self.labels[idx],
            covariates=self.covariates[idx],
            predictors=self.predictors[idx],
            group_ids=self.group_ids[idx],
            covariate_names=self.covariate_names,
            predictor_names=self.predictor_names,
            tags={name: np.asarray(col)[idx] for name, col in self.tags.items()},
            timestamps=None if self.timestamps is None else self.timestamps[idx],
        )


@dataclass(frozen=True)
class ModelTemplate:
    """Knobs fixed before any data is seen: spline order, an optional basis
    size override (None applies the sample-size rule), and whether predictors
    are spline-expanded at all (False gives the linear baseline)."""

    order: int = DEFAULT_ORDER
    num_basis: int | None = None
    spline_enabled: bool = True


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Complete design description derived from one training set.

    Bases and standardization statistics are training artifacts: validation
    and test data are always transformed with these, never refit.
    ``dropped_index`` records which basis column is removed per predictor.
    """

    covariate_names: tuple[str, ...]
    predictor_names: tuple[str, ...]
    bases: tuple[SplineBasis, ...]
    dropped_index: tuple[int, ...]
    penalty: float
    standardizer: Standardizer
    spline_enabled: bool = True
    predictor_support: tuple[tuple[float, float, float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))
        object.__setattr__(self, "bases", tuple(self.bases))
        object.__setattr__(self, "dropped_index", tuple(int(i) for i in self.dropped_index))
        object.__setattr__(
            self,
            "predictor_support",
            tuple(tuple(float(v) for v in s) for s in self.predictor_support),
        )
        if self.penalty < 0.0:
            raise ValueError("penalty must be non-negative")
        if self.standardizer.n_columns != len(self.covariate_names):
            raise ValueError("standardizer width does not match covariates")
        if self.spline_enabled:
            if len(self.bases) != len(self.predictor_names):
                raise ValueError("need one basis per predictor")
            if len(self.dropped_index) != len(self.bases):
                raise ValueError("need one dropped index per predictor")
            for basis, drop in zip(self.bases, self.dropped_index):
                if not 0 <= drop < basis.num_basis:
                    raise ValueError(f"dropped index {drop} out of range")
        elif self.bases:
            raise ValueError("linear baseline carries no spline bases")

    @property
    def n_columns(self) -> int:
        p = len(self.covariate_names)
        if self.spline_enabled:
            return 1 + p + sum(b.num_basis - 1 for b in self.bases)
        return 1 + p + len(self.predictor_names)

    def with_penalty(self, penalty: float) -> "ModelSpec":
        return replace(self, penalty=float(penalty))


def column_names(spec: ModelSpec) -> list[str]:
    """Human-readable design column labels, in design order."""
    names = ["intercept"]
    names.extend(spec.covariate_names)
    if spec.spline_enabled:
        for pred, basis, drop in zip(spec.predictor_names, spec.bases, spec.dropped_index):
            names.extend(
                f"{pred}:b{k + 1}" for k in range(basis.num_basis) if k != drop
            )
    else:
        names.extend(spec.predictor_names)
    return names


def build_model_spec(
    template: ModelTemplate, train: Dataset, penalty: float
) -> ModelSpec:
    """Derive all data-driven design pieces from a training set.

    The basis size uses the sample-size rule unless overridden, knots come
    from the training predictor columns, the dropped column is the last
    basis of each predictor, and covariate standardization is fit here.
    """
    p = len(train.covariate_names)
    if p > 0:
        stats = standardize_fit(train.covariates)
    else:
        stats = Standardizer(
            mean=np.empty(0), std=np.empty(0), constant=np.empty(0, dtype=bool)
        )

    support = tuple(
        tuple(
            float(q)
            for q in np.quantile(train.predictors[:, j], [0.0, 0.25, 0.5, 0.75, 1.0])
        )
        for j in range(len(train.predictor_names))
    )

    if template.spline_enabled:
        num_basis = template.num_basis
        if num_basis is None:
            num_basis = choose_num_basis(train.n_rows, template.order)
        bases = tuple(
            build_basis(train.predictors[:, j], num_basis, template.order)
            for j in range(len(train.predictor_names))
        )
        dropped = tuple(b.num_basis - 1 for b in bases)
    else:
        bases = ()
        dropped = ()

    return ModelSpec(
        covariate_names=train.covariate_names,
        predictor_names=train.predictor_names,
        bases=bases,
        dropped_index=dropped,
        penalty=float(penalty),
        standardizer=stats,
        spline_enabled=template.spline_enabled,
        predictor_support=support,
    )


def _check_compatible(spec: ModelSpec, data: Dataset) -> None:
    if data.covariate_names != spec.covariate_names:
        raise ValueError(
            f"covariate columns {data.covariate_names} do not match the model "
            f"({spec.covariate_names})"
        )
    if data.predictor_names != spec.predictor_names:
        raise ValueError(
            f"predictor columns {data.predictor_names} do not match the model "
            f"({spec.predictor_names})"
        )


def build_design(spec: ModelSpec, data: Dataset, drop_basis: bool = True) -> np.ndarray:
    """Assemble the n x d design matrix for ``data`` under ``spec``.

    Column 0 is the intercept, columns 1..p the standardized covariates, and
    the rest the per-predictor spline blocks (or the raw predictor values
    for the linear baseline).  ``drop_basis=False`` keeps every basis column
    and is only useful for rank diagnostics; the resulting matrix is
    deliberately rank-deficient.
    """
    _check_compatible(spec, data)
    n = data.n_rows
    blocks = [np.ones((n, 1))]
    if spec.covariate_names:
        blocks.append(standardize_apply(spec.standardizer, data.covariates))
    if spec.spline_enabled:
        for j, basis in enumerate(spec.bases):
            block = eval_basis_matrix(basis, data.predictors[:, j])
            if drop_basis:
                keep = np.arange(basis.num_basis) != spec.dropped_index[j]
                block = block[:, keep]
            blocks.append(block)
    elif spec.predictor_names:
        blocks.append(data.predictors)
    return np.concatenate(blocks, axis=1)
