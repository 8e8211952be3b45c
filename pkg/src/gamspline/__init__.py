"""Interpretable additive risk modeling on bounded predictors.

Predictors living in (0, 1) are expanded in clamped B-spline bases with
quantile knots, combined with linear covariates in a penalized logistic
model, tuned by validation AUROC, evaluated with percentile-bootstrap
intervals, and explained through centered per-predictor effect curves.
"""

from .data_io import (
    FUNCTION_CATALOG,
    GroundTruth,
    SchemaManifest,
    SplitPlan,
    SyntheticSpec,
    default_manifest,
    generate_synthetic,
    grouped_split,
    load_dataset,
    save_dataset,
)
from .design import (
    Dataset,
    ModelSpec,
    ModelTemplate,
    Standardizer,
    build_design,
    build_model_spec,
    column_names,
    standardize_apply,
    standardize_fit,
)
from .errors import (
    DatasetError,
    GamsplineError,
    NumericalError,
    TuningError,
    UndefinedMetricError,
    UnstableBootstrapError,
    UnsupportedModelError,
)
from .fit import (
    FitDiagnostics,
    FittedModel,
    fit_model,
    gradient,
    hessian,
    linear_predictor,
    load_model,
    model_from_dict,
    model_to_dict,
    objective,
    predict_proba,
    save_model,
)
from .interpret import (
    CurveTable,
    centered_intercept,
    entrywise_function,
    export_curves,
)
from .metrics import (
    DEFAULT_N_BOOTSTRAP,
    MetricReport,
    auprc,
    auroc,
    bootstrap_ci,
    compute_report,
    f1_at_threshold,
    format_report_table,
    select_f1_threshold,
    subgroup_report,
)
from .splines import (
    DEFAULT_ORDER,
    SplineBasis,
    basis_integrals,
    build_basis,
    choose_num_basis,
    eval_basis,
    eval_basis_matrix,
)
from .tune import DEFAULT_LAMBDA_GRID, TuneCandidate, TuneResult, grid_search

__version__ = "0.1.0"
