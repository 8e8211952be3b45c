"""Command-line pipeline: simulate, fit, tune, evaluate, curves.

Flag values override a JSON config file (--config), which overrides built-in
defaults.  All randomness flows from one seed, resolved as
--seed > config file > the GAMSPLINE_SEED environment variable > 0.
Outputs land under --out together with a manifest.json listing them; reruns
with identical inputs and seed reproduce every output byte for byte.

Exit codes: 0 success, 1 usage or data error, 2 fit did not converge,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data_io, interpret, metrics
from .design import ModelTemplate
from .errors import GamsplineError, NumericalError, TuningError
from .fit import fit_model, load_model, model_to_dict, predict_proba, save_model
from .metrics import DEFAULT_N_BOOTSTRAP
from .splines import DEFAULT_ORDER
from .tune import DEFAULT_LAMBDA_GRID, grid_search
from .design import build_model_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_NUMERICAL = 3

SEED_ENV_VAR = "GAMSPLINE_SEED"
DEFAULT_PENALTY = 1.0
DEFAULT_SPLIT = (0.7, 0.15, 0.15)


class CliError(Exception):
    """Usage-level problem reported to stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path: Path, text: str) -> None:
    """Atomic write: the file appears complete or not at all."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_manifest(out_dir: Path, command: str, files: list[Path]) -> None:
    names = sorted(p.relative_to(out_dir).as_posix() for p in files)
    _write_json(out_dir / "manifest.json", {"command": command, "outputs": names})


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise CliError(f"config file not found: {config_path}")
    with open(config_path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict):
        raise CliError("config file must contain a JSON object")
    return payload


def _resolve(args, name: str, default):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    config = getattr(args, "_config", {})
    if name in config:
        return config[name]
    return default


def _resolve_seed(args) -> int:
    value = _resolve(args, "seed", None)
    if value is None:
        value = os.environ.get(SEED_ENV_VAR)
    return 0 if value is None else int(value)


def _parse_fractions(text) -> tuple[float, float, float]:
    if isinstance(text, (tuple, list)):
        parts = [float(v) for v in text]
    else:
        parts = [float(v) for v in str(text).split(",")]
    if len(parts) != 3:
        raise CliError(f"--split needs three comma-separated fractions, got {text!r}")
    return tuple(parts)


def _parse_grid(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise CliError(f"--grid must be a comma-separated list of numbers, got {text!r}")


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise CliError(f"missing required option {flag}")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{flag}: file not found: {p}")
    return p


def _out_dir(args) -> Path:
    out = _resolve(args, "out", None)
    if out is None:
        raise CliError("missing required option --out")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _template(args) -> ModelTemplate:
    num_basis = _resolve(args, "num_basis", None)
    return ModelTemplate(
        order=int(_resolve(args, "order", DEFAULT_ORDER)),
        num_basis=None if num_basis is None else int(num_basis),
        spline_enabled=not bool(_resolve(args, "no_splines", False)),
    )


def _load_splits(args, seed: int, need: tuple[str, ...]):
    """Datasets for the requested roles, from explicit files or one --data
    file split by the grouped plan."""
    schema_path = _require_file(_resolve(args, "schema", None), "--schema")
    manifest = data_io.SchemaManifest.from_json_file(schema_path)

    data_path = _resolve(args, "data", None)
    if data_path is not None:
        full = data_io.load_dataset(_require_file(data_path, "--data"), manifest)
        plan = data_io.SplitPlan(
            fractions=_parse_fractions(_resolve(args, "split", DEFAULT_SPLIT)),
            seed=seed,
        )
        train, valid, test = data_io.grouped_split(full, plan)
        pool = {"train": train, "valid": valid, "test": test}
        return {role: pool[role] for role in need}

    out = {}
    for role in need:
        path = _require_file(_resolve(args, role, None), f"--{role}")
        out[role] = data_io.load_dataset(path, manifest)
    return out


def _fit_report_text(model, n_rows: int) -> str:
    spec = model.spec
    diag = model.diagnostics
    theta = model.theta()
    penalized_norm = float(np.sqrt(np.sum(theta[1:] ** 2)))
    lines = [
        "model fit report",
        "================",
        f"rows:                      {n_rows}",
        f"design columns:            {spec.n_columns}",
        f"covariates:                {len(spec.covariate_names)}",
        f"predictors:                {len(spec.predictor_names)}",
    ]
    if spec.spline_enabled:
        sizes = ", ".join(str(b.num_basis) for b in spec.bases)
        order = spec.bases[0].order if spec.bases else DEFAULT_ORDER
        lines.append(f"spline expansion:          enabled (order {order})")
        lines.append(f"basis sizes:               {sizes}")
    else:
        lines.append("spline expansion:          disabled (linear baseline)")
    lines.extend(
        [
            f"penalty:                   {spec.penalty!r}",
            f"converged:                 {'yes' if diag.converged else 'no'}",
            f"iterations:                {diag.n_iter}",
            f"final objective:           {diag.objective!r}",
            f"gradient sup-norm:         {diag.grad_sup_norm:.6e}",
            f"penalized coefficient norm: {penalized_norm:.6e}",
        ]
    )
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    n = int(_resolve(args, "n", 1000))
    n_predictors = int(_resolve(args, "predictors", 4))
    n_covariates = int(_resolve(args, "covariates", 2))

    functions = _resolve(args, "functions", None)
    if functions is None:
        cycle = ("sine", "quadratic", "smooth-step", "zero")
        function_ids = tuple(cycle[j % len(cycle)] for j in range(n_predictors))
    else:
        function_ids = tuple(str(functions).split(","))
        if len(function_ids) != n_predictors:
            raise CliError(
                f"--functions lists {len(function_ids)} ids but --predictors is "
                f"{n_predictors}"
            )

    covariate_coefs = tuple(
        0.5 * (-1.0) ** i for i in range(n_covariates)
    )
    spec = data_io.SyntheticSpec(
        n=n,
        function_ids=function_ids,
        covariate_coefs=covariate_coefs,
        intercept=float(_resolve(args, "nu", 0.0)),
        seed=seed,
    )
    data, truth = data_io.generate_synthetic(spec)

    out_dir = _out_dir(args)
    data_path = out_dir / "data.csv"
    tmp = out_dir / (data_path.name + ".tmp")
    manifest = data_io.save_dataset(data, tmp)
    os.replace(tmp, data_path)
    schema_path = out_dir / "schema.json"
    _write_json(schema_path, manifest.to_dict())
    truth_path = out_dir / "ground_truth.json"
    _write_json(truth_path, truth.to_dict())
    _write_manifest(out_dir, "simulate", [data_path, schema_path, truth_path])
    print(f"wrote {data_path} ({n} rows, {n_predictors} predictors)")
    return EXIT_OK


def cmd_fit(args) -> int:
    seed = _resolve_seed(args)
    train = _load_splits(args, seed, ("train",))["train"]
    template = _template(args)
    penalty = float(_resolve(args, "lambda_", DEFAULT_PENALTY))
    spec = build_model_spec(template, train, penalty)
    model = fit_model(spec, train)

    scores = predict_proba(model, train)
    threshold = metrics.select_f1_threshold(scores, train.labels)
    extra = {"f1_threshold": float(threshold), "threshold_policy": "train-max-f1"}

    out_dir = _out_dir(args)
    model_path = out_dir / "model.json"
    _write_json(model_path, model_to_dict(model, extra=extra))
    report_path = out_dir / "fit_report.txt"
    _write_text(report_path, _fit_report_text(model, train.n_rows))
    _write_manifest(out_dir, "fit", [model_path, report_path])
    print(_fit_report_text(model, train.n_rows), end="")
    return EXIT_OK if model.diagnostics.converged else EXIT_NOT_CONVERGED


def cmd_tune(args) -> int:
    seed = _resolve_seed(args)
    splits = _load_splits(args, seed, ("train", "valid"))
    template = _template(args)
    grid = _parse_grid(_resolve(args, "grid", DEFAULT_LAMBDA_GRID))
    result = grid_search(template, splits["train"], splits["valid"], grid)

    model = result.best_model
    scores = predict_proba(model, splits["valid"])
    threshold = metrics.select_f1_threshold(scores, splits["valid"].labels)
    extra = {"f1_threshold": float(threshold), "threshold_policy": "validation-max-f1"}

    out_dir = _out_dir(args)
    tune_path = out_dir / "tune_result.json"
    _write_json(tune_path, result.to_dict())
    model_path = out_dir / "model.json"
    _write_json(model_path, model_to_dict(model, extra=extra))
    _write_manifest(out_dir, "tune", [tune_path, model_path])
    for cand in result.selection_log:
        status = f"auroc {cand.val_auroc:.6f}" if cand.val_auroc is not None else "failed"
        print(f"penalty {cand.penalty:g}: {status}")
    print(f"selected penalty {result.best_penalty:g}")
    return EXIT_OK if model.diagnostics.converged else EXIT_NOT_CONVERGED


def cmd_evaluate(args) -> int:
    seed = _resolve_seed(args)
    model_path = _require_file(_resolve(args, "model", None), "--model")
    model, extra = load_model(model_path)

    test = _load_splits(args, seed, ("test",))["test"]

    scores = predict_proba(model, test)
    threshold_flag = _resolve(args, "threshold", None)
    if threshold_flag is not None:
        threshold = float(threshold_flag)
        policy = "explicit"
    elif "f1_threshold" in extra:
        threshold = float(extra["f1_threshold"])
        policy = str(extra.get("threshold_policy", "stored"))
    else:
        threshold = metrics.select_f1_threshold(scores, test.labels)
        policy = "eval-max-f1"
        logger.warning(
            "no stored F1 threshold; selecting on the evaluated data itself"
        )

    n_boot = int(_resolve(args, "bootstrap", DEFAULT_N_BOOTSTRAP))
    overall = metrics.compute_report(
        scores, test.labels, threshold=threshold, n_boot=n_boot, seed=seed
    )
    reports = [overall]
    subgroup_payload = {}
    tag_name = _resolve(args, "subgroup", None)
    if tag_name is not None:
        rows = metrics.subgroup_report(
            scores,
            test.labels,
            test.tags,
            tag_name,
            threshold=threshold,
            n_boot=n_boot,
            seed=seed,
        )
        reports.extend(rows)
        subgroup_payload[tag_name] = [r.to_dict() for r in rows]

    table = metrics.format_report_table(reports)
    payload = {
        "overall": overall.to_dict(),
        "subgroups": subgroup_payload,
        "threshold_policy": policy,
    }
    out_dir = _out_dir(args)
    metrics_path = out_dir / "metrics.json"
    _write_json(metrics_path, payload)
    table_path = out_dir / "table.txt"
    _write_text(table_path, table)
    _write_manifest(out_dir, "evaluate", [metrics_path, table_path])
    print(table, end="")
    return EXIT_OK


def cmd_curves(args) -> int:
    model_path = _require_file(_resolve(args, "model", None), "--model")
    model, _ = load_model(model_path)
    out_dir = _out_dir(args)
    fmt = str(_resolve(args, "format", "csv"))
    written = interpret.export_curves(model, out_dir, fmt=fmt)
    index_path = out_dir / "index.json"
    _write_json(
        index_path,
        {
            "predictors": list(model.spec.predictor_names),
            "files": sorted(p.name for p in written),
        },
    )
    _write_manifest(out_dir, "curves", written + [index_path])
    print(f"wrote {len(written)} curve file(s) to {out_dir}")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser, *, data: bool = False) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--seed", type=int, help="seed for all randomness")
    sub.add_argument("--out", help="output directory")
    if data:
        sub.add_argument("--schema", help="JSON schema manifest for CSV files")
        sub.add_argument("--data", help="single CSV split by --split")
        sub.add_argument(
            "--split",
            help="train,valid,test fractions for --data (default 0.7,0.15,0.15)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gamspline", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="generate a seeded synthetic dataset")
    sim.add_argument("--n", type=int, help="number of rows (default 1000)")
    sim.add_argument("--predictors", type=int, help="number of predictors (default 4)")
    sim.add_argument("--covariates", type=int, help="number of covariates (default 2)")
    sim.add_argument("--functions", help="comma-separated catalog ids per predictor")
    sim.add_argument("--nu", type=float, help="true intercept (default 0)")
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    fit_cmd = commands.add_parser("fit", help="fit one model at a fixed penalty")
    fit_cmd.add_argument("--train", help="training CSV")
    fit_cmd.add_argument("--lambda", dest="lambda_", type=float, help="ridge penalty")
    fit_cmd.add_argument("--order", type=int, help="spline order (default 4)")
    fit_cmd.add_argument("--num-basis", dest="num_basis", type=int, help="basis size override")
    fit_cmd.add_argument(
        "--no-splines",
        dest="no_splines",
        action="store_const",
        const=True,
        help="linear baseline: raw predictors, no spline expansion",
    )
    _add_common(fit_cmd, data=True)
    fit_cmd.set_defaults(func=cmd_fit)

    tune_cmd = commands.add_parser("tune", help="grid-search the penalty by validation AUROC")
    tune_cmd.add_argument("--train", help="training CSV")
    tune_cmd.add_argument("--valid", help="validation CSV")
    tune_cmd.add_argument("--grid", help="comma-separated penalty grid")
    tune_cmd.add_argument("--order", type=int, help="spline order (default 4)")
    tune_cmd.add_argument("--num-basis", dest="num_basis", type=int, help="basis size override")
    tune_cmd.add_argument(
        "--no-splines",
        dest="no_splines",
        action="store_const",
        const=True,
        help="linear baseline: raw predictors, no spline expansion",
    )
    _add_common(tune_cmd, data=True)
    tune_cmd.set_defaults(func=cmd_tune)

    eval_cmd = commands.add_parser("evaluate", help="score a model file on held-out data")
    eval_cmd.add_argument("--model", help="fitted model JSON")
    eval_cmd.add_argument("--test", help="test CSV")
    eval_cmd.add_argument("--bootstrap", type=int, help="bootstrap replicates (default 1000)")
    eval_cmd.add_argument("--subgroup", help="tag name for per-category reports")
    eval_cmd.add_argument("--threshold", type=float, help="F1 threshold override")
    _add_common(eval_cmd, data=True)
    eval_cmd.set_defaults(func=cmd_evaluate)

    curves_cmd = commands.add_parser("curves", help="export centered effect curves")
    curves_cmd.add_argument("--model", help="fitted model JSON")
    curves_cmd.add_argument("--format", choices=("csv", "svg"), help="csv only, or csv+svg")
    _add_common(curves_cmd)
    curves_cmd.set_defaults(func=cmd_curves)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage problems by exiting
        return int(exc.code or 0)
    try:
        args._config = _load_config_file(getattr(args, "config", None))
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, TuningError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GamsplineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
