"""CSV ingestion, patient-grouped splitting, and synthetic data generation.

Data arrives as a UTF-8 comma-delimited CSV with a header row; a JSON schema
manifest names the column roles.  Predictor columns may carry raw logits
(``logits_input``), in which case they pass through a numerically stable
sigmoid on load -- never auto-detected, since silently misreading logits as
probabilities would corrupt every downstream fit.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .design import Dataset
from .errors import DatasetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemaManifest:
    """Column roles for a CSV dataset."""

    label: str
    covariates: tuple[str, ...]
    predictors: tuple[str, ...]
    group_id: str
    timestamp: str | None = None
    tags: dict[str, str] = field(default_factory=dict)
    logits_input: bool = False

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "predictors", tuple(self.predictors))
        object.__setattr__(self, "tags", dict(self.tags))
        if len(set(self.covariates)) != len(self.covariates):
            raise ValueError("duplicate covariate column names")
        if len(set(self.predictors)) != len(self.predictors):
            raise ValueError("duplicate predictor column names")

    def to_dict(self) -> dict:
        payload = {
            "label": self.label,
            "covariates": list(self.covariates),
            "predictors": list(self.predictors),
            "group_id": self.group_id,
            "tags": dict(self.tags),
            "logits_input": bool(self.logits_input),
        }
        if self.timestamp is not None:
            payload["timestamp"] = self.timestamp
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "SchemaManifest":
        required = {"label", "covariates", "predictors", "group_id"}
        missing = required - payload.keys()
        if missing:
            raise ValueError(f"schema manifest missing keys: {sorted(missing)}")
        return cls(
            label=str(payload["label"]),
            covariates=tuple(payload["covariates"]),
            predictors=tuple(payload["predictors"]),
            group_id=str(payload["group_id"]),
            timestamp=payload.get("timestamp"),
            tags=dict(payload.get("tags", {})),
            logits_input=bool(payload.get("logits_input", False)),
        )

    @classmethod
    def from_json_file(cls, path) -> "SchemaManifest":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(
            f"row {row}, column {column}: non-numeric value {cell!r}"
        ) from None
    if not np.isfinite(value):
        raise DatasetError(f"row {row}, column {column}: non-finite value {cell!r}")
    return value


def load_dataset(path, manifest: SchemaManifest) -> Dataset:
    """Read and validate a CSV file against ``manifest``.

    Row numbers in error messages count data rows from 1 (the header is
    row 0).  Labels must be 0/1; predictors must land in [0, 1] after the
    optional sigmoid transform.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        col_index = {name: i for i, name in enumerate(header)}

        needed = [manifest.label, manifest.group_id]
        needed.extend(manifest.covariates)
        needed.extend(manifest.predictors)
        needed.extend(manifest.tags.values())
        if manifest.timestamp is not None:
            needed.append(manifest.timestamp)
        for name in needed:
            if name not in col_index:
                raise DatasetError(f"{path}: missing column {name!r}")

        labels: list[int] = []
        covariates: list[list[float]] = []
        predictors: list[list[float]] = []
        group_ids: list[str] = []
        timestamps: list[float] = []
        tag_values: dict[str, list[str]] = {name: [] for name in manifest.tags}

        for row_num, cells in enumerate(reader, start=1):
            if len(cells) != len(header):
                raise DatasetError(
                    f"row {row_num}: expected {len(header)} cells, got {len(cells)}"
                )
            raw_label = _parse_float(cells[col_index[manifest.label]], row_num, manifest.label)
            if raw_label not in (0.0, 1.0):
                raise DatasetError(
                    f"row {row_num}, column {manifest.label}: label must be 0 or 1, "
                    f"got {raw_label!r}"
                )
            labels.append(int(raw_label))
            covariates.append(
                [_parse_float(cells[col_index[c]], row_num, c) for c in manifest.covariates]
            )
            row_predictors = []
            for c in manifest.predictors:
                value = _parse_float(cells[col_index[c]], row_num, c)
                if manifest.logits_input:
                    value = float(expit(value))
                elif not 0.0 <= value <= 1.0:
                    raise DatasetError(f"row {row_num}, column {c} out of [0,1]")
                row_predictors.append(value)
            predictors.append(row_predictors)
            group_ids.append(cells[col_index[manifest.group_id]])
            if manifest.timestamp is not None:
                timestamps.append(
                    _parse_float(cells[col_index[manifest.timestamp]], row_num, manifest.timestamp)
                )
            for tag_name, column in manifest.tags.items():
                tag_values[tag_name].append(cells[col_index[column]])

    if not labels:
        raise DatasetError(f"{path}: no data rows")
    n = len(labels)
    data = Dataset(
        labels=np.asarray(labels, dtype=int),
        covariates=np.asarray(covariates, dtype=float).reshape(n, len(manifest.covariates)),
        predictors=np.asarray(predictors, dtype=float).reshape(n, len(manifest.predictors)),
        group_ids=np.asarray(group_ids, dtype=object),
        covariate_names=manifest.covariates,
        predictor_names=manifest.predictors,
        tags={name: np.asarray(vals, dtype=object) for name, vals in tag_values.items()},
        timestamps=np.asarray(timestamps, dtype=float) if manifest.timestamp else None,
    )
    logger.info(
        "loaded %s: %d rows, %d covariates, %d predictors, prevalence %.3f",
        path,
        n,
        len(manifest.covariates),
        len(manifest.predictors),
        float(np.mean(data.labels)),
    )
    return data


def default_manifest(data: Dataset, logits_input: bool = False) -> SchemaManifest:
    """Manifest matching ``save_dataset``'s column layout for ``data``."""
    return SchemaManifest(
        label="label",
        covariates=data.covariate_names,
        predictors=data.predictor_names,
        group_id="group_id",
        timestamp="timestamp" if data.timestamps is not None else None,
        tags={name: name for name in sorted(data.tags)},
        logits_input=logits_input,
    )


def save_dataset(data: Dataset, path) -> SchemaManifest:
    """Write ``data`` as CSV (floats via repr, so load round-trips exactly).

    Returns the manifest describing the written columns.
    """
    manifest = default_manifest(data)
    header = ["group_id"]
    if data.timestamps is not None:
        header.append("timestamp")
    header.append("label")
    header.extend(data.covariate_names)
    header.extend(data.predictor_names)
    tag_names = sorted(data.tags)
    header.extend(tag_names)

    lines = [",".join(header)]
    for i in range(data.n_rows):
        cells = [str(data.group_ids[i])]
        if data.timestamps is not None:
            cells.append(repr(float(data.timestamps[i])))
        cells.append(str(int(data.labels[i])))
        cells.extend(repr(float(v)) for v in data.covariates[i])
        cells.extend(repr(float(v)) for v in data.predictors[i])
        cells.extend(str(data.tags[name][i]) for name in tag_names)
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
    return manifest


@dataclass(frozen=True)
class SplitPlan:
    """Three-way split configuration.

    With ``group_aware`` (the default) the train/valid/test fractions apply
    to whole groups and no group ever straddles two splits.  Evaluation
    splits keep a single row per group: the latest by timestamp when
    timestamps exist, otherwise one seeded-random row (with a warning).
    """

    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    group_aware: bool = True
    seed: int = 0

    def __post_init__(self):
        fractions = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fractions)
        if len(fractions) != 3 or any(f <= 0.0 for f in fractions):
            raise ValueError("need three positive split fractions")
        if abs(sum(fractions) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must sum to 1, got {sum(fractions)}")


def _split_counts(n_groups: int, fractions) -> tuple[int, int, int]:
    n_train = int(round(fractions[0] * n_groups))
    n_valid = int(round(fractions[1] * n_groups))
    counts = [n_train, n_valid, n_groups - n_train - n_valid]
    # Guarantee every split gets at least one group (n_groups >= 3 checked
    # by the caller) by stealing from the largest split.
    while min(counts) < 1:
        counts[int(np.argmax(counts))] -= 1
        counts[int(np.argmin(counts))] += 1
    return tuple(counts)


def _dedup_latest(data: Dataset, seed: int) -> Dataset:
    """One row per group: max-timestamp when available, else seeded-random."""
    groups, inverse = np.unique(data.group_ids, return_inverse=True)
    if groups.size == data.n_rows:
        return data
    keep = np.empty(groups.size, dtype=int)
    if data.timestamps is not None:
        for g in range(groups.size):
            rows = np.nonzero(inverse == g)[0]
            keep[g] = rows[int(np.argmax(data.timestamps[rows]))]
    else:
        logger.warning(
            "no timestamp column: keeping one seeded-random row per group "
            "in the evaluation split"
        )
        rng = np.random.default_rng((seed, 1))
        for g in range(groups.size):
            rows = np.nonzero(inverse == g)[0]
            keep[g] = rows[int(rng.integers(0, rows.size))]
    return data.subset(np.sort(keep))


def grouped_split(data: Dataset, plan: SplitPlan) -> tuple[Dataset, Dataset, Dataset]:
    """Partition rows into train/valid/test without splitting any group.

    Groups are shuffled by the plan's seed and assigned whole; fractions
    apply to group counts.  Training keeps every row of its groups, while
    validation and test are deduplicated to one row per group.
    """
    if plan.group_aware:
        groups = np.unique(data.group_ids)
    else:
        groups = np.arange(data.n_rows)
    if groups.size < 3:
        raise ValueError(
            f"need at least 3 groups to form three splits, got {groups.size}"
        )
    rng = np.random.default_rng((plan.seed, 0))
    order = rng.permutation(groups.size)
    n_train, n_valid, _ = _split_counts(groups.size, plan.fractions)

    train_groups = groups[order[:n_train]]
    valid_groups = groups[order[n_train : n_train + n_valid]]
    test_groups = groups[order[n_train + n_valid :]]

    if plan.group_aware:
        train_mask = np.isin(data.group_ids, train_groups)
        valid_mask = np.isin(data.group_ids, valid_groups)
        test_mask = np.isin(data.group_ids, test_groups)
        train = data.subset(np.nonzero(train_mask)[0])
        valid = _dedup_latest(data.subset(np.nonzero(valid_mask)[0]), plan.seed)
        test = _dedup_latest(data.subset(np.nonzero(test_mask)[0]), plan.seed)
    else:
        train = data.subset(np.sort(train_groups))
        valid = data.subset(np.sort(valid_groups))
        test = data.subset(np.sort(test_groups))
    return train, valid, test


# --- synthetic data -----------------------------------------------------------
#
# Every catalog function integrates to exactly 0 over [0, 1], matching the
# centering convention of the fitted curves, so estimated and true effects
# are directly comparable.

FUNCTION_CATALOG = {
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "linear": lambda x: 2.0 * np.asarray(x, dtype=float) - 1.0,
    "quadratic": lambda x: 3.0 * np.square(np.asarray(x, dtype=float)) - 1.0,
    "sine": lambda x: np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
    "smooth-step": lambda x: np.tanh(8.0 * (np.asarray(x, dtype=float) - 0.5)),
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator configuration for oracle datasets with known structure.

    Predictors are logit-normal: sigmoid(mu_j + sigma_j * N(0,1)), clipped
    away from the endpoints.  Labels are Bernoulli with log-odds
    intercept + covariate_coefs . z + sum_j f_j(predictor_j).
    """

    n: int
    function_ids: tuple[str, ...]
    covariate_coefs: tuple[float, ...] = ()
    intercept: float = 0.0
    predictor_mu: tuple[float, ...] | None = None
    predictor_sigma: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "function_ids", tuple(self.function_ids))
        object.__setattr__(
            self, "covariate_coefs", tuple(float(v) for v in self.covariate_coefs)
        )
        if self.n < 1:
            raise ValueError("n must be at least 1")
        unknown = [f for f in self.function_ids if f not in FUNCTION_CATALOG]
        if unknown:
            raise ValueError(
                f"unknown function ids {unknown}; catalog: {sorted(FUNCTION_CATALOG)}"
            )
        n_pred = len(self.function_ids)
        mu = self.predictor_mu if self.predictor_mu is not None else (0.0,) * n_pred
        sigma = (
            self.predictor_sigma
            if self.predictor_sigma is not None
            else (1.0,) * n_pred
        )
        mu = tuple(float(v) for v in mu)
        sigma = tuple(float(v) for v in sigma)
        if len(mu) != n_pred or len(sigma) != n_pred:
            raise ValueError("predictor_mu/predictor_sigma must match function_ids")
        if any(s <= 0.0 for s in sigma):
            raise ValueError("predictor_sigma entries must be positive")
        object.__setattr__(self, "predictor_mu", mu)
        object.__setattr__(self, "predictor_sigma", sigma)


@dataclass(frozen=True)
class GroundTruth:
    """Exact generator parameters of a synthetic dataset."""

    function_ids: tuple[str, ...]
    covariate_coefs: tuple[float, ...]
    intercept: float
    predictor_mu: tuple[float, ...]
    predictor_sigma: tuple[float, ...]
    seed: int

    def true_function(self, j: int):
        return FUNCTION_CATALOG[self.function_ids[j]]

    def linear_predictor(self, data: Dataset) -> np.ndarray:
        """The generating log-odds for each row: the Bayes-optimal score."""
        eta = self.intercept + data.covariates @ np.asarray(self.covariate_coefs)
        for j in range(len(self.function_ids)):
            eta = eta + self.true_function(j)(data.predictors[:, j])
        return eta

    def to_dict(self) -> dict:
        return {
            "function_ids": list(self.function_ids),
            "covariate_coefs": [float(v) for v in self.covariate_coefs],
            "intercept": float(self.intercept),
            "predictor_mu": [float(v) for v in self.predictor_mu],
            "predictor_sigma": [float(v) for v in self.predictor_sigma],
            "seed": int(self.seed),
        }


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a fully seeded dataset with known additive structure.

    Draw order is fixed (covariates, then predictors, then labels), so a
    given seed always produces the identical dataset.  Each row gets its own
    group id.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    n_cov = len(spec.covariate_coefs)
    n_pred = len(spec.function_ids)

    covariates = rng.standard_normal((n, n_cov))
    noise = rng.standard_normal((n, n_pred))
    predictors = expit(
        np.asarray(spec.predictor_mu) + np.asarray(spec.predictor_sigma) * noise
    )
    predictors = np.clip(predictors, 1e-6, 1.0 - 1e-6)

    eta = spec.intercept + covariates @ np.asarray(spec.covariate_coefs)
    for j, fid in enumerate(spec.function_ids):
        eta = eta + FUNCTION_CATALOG[fid](predictors[:, j])
    labels = (rng.random(n) < expit(eta)).astype(int)

    truth = GroundTruth(
        function_ids=spec.function_ids,
        covariate_coefs=spec.covariate_coefs,
        intercept=spec.intercept,
        predictor_mu=spec.predictor_mu,
        predictor_sigma=spec.predictor_sigma,
        seed=spec.seed,
    )
    width = max(6, len(str(n)))
    data = Dataset(
        labels=labels,
        covariates=covariates,
        predictors=predictors,
        group_ids=np.asarray([f"g{i:0{width}d}" for i in range(n)], dtype=object),
        covariate_names=tuple(f"z{i + 1}" for i in range(n_cov)),
        predictor_names=tuple(f"q{j + 1}" for j in range(n_pred)),
    )
    return data, truth
