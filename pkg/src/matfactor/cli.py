"""Command line interface.

Subcommands
-----------
simulate   Draw a synthetic series and write it with its ground truth.
fit        Fit loadings/factors to a long-format CSV panel.
ranks      Eigenvalue-ratio rank selection plus scree tables.
validate   K-fold or rolling out-of-sample comparison of candidate models.
study      Monte-Carlo study over a config grid (JSON).
report     Span distances between a fitted model and saved ground truth.

Every failure exits nonzero after printing a single-line JSON diagnostic to
stderr, e.g. ``{"error": "IncompletePanel", "message": "...", "t": 3, ...}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io as mio
from .baseline import fit_vec
from .errors import MatfactorError
from .estimator import (
    EstimatorOptions,
    extract_factors,
    fit,
    subspace_distance,
)
from .series import MatrixSeries
from .simulation import (
    AR1Spec,
    DEFAULT_AR_GRID,
    KroneckerNoise,
    MA2Spec,
    SimConfig,
    simulate,
)
from .study import run_study
from .validation import (
    ModelSpec,
    kfold_cv,
    make_rolling_schedule,
    rolling_validation,
)
from .varimax import varimax

__all__ = ["main"]


def _parse_phi(text: str) -> float | np.ndarray:
    if ";" not in text and "," not in text:
        return float(text)
    rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    return np.asarray(rows, dtype=np.float64)


def _parse_specs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(
                f"spec {chunk!r} is not of the form k1,k2")
        pairs.append((int(parts[0]), int(parts[1])))
    if not pairs:
        raise argparse.ArgumentTypeError("no specs given")
    return pairs


def _outdir(args) -> str:
    os.makedirs(args.output_dir, exist_ok=True)
    return args.output_dir


def _cmd_simulate(args) -> int:
    if args.config:
        with open(args.config) as fh:
            cfg = mio.simconfig_from_jsonable(json.load(fh))
        if args.seed is not None:
            from dataclasses import replace
            cfg = replace(cfg, seed=args.seed)
    else:
        if args.factor_model == "ar1":
            if args.ar_phi is not None:
                factors = AR1Spec(phi=_parse_phi(args.ar_phi))
            elif (args.k1, args.k2) == (3, 2):
                factors = AR1Spec(phi=DEFAULT_AR_GRID)
            else:
                factors = AR1Spec(phi=0.5)
        else:
            factors = MA2Spec(theta1=args.ma_theta1, theta2=args.ma_theta2)
        cfg = SimConfig(
            p1=args.p1, p2=args.p2, k1=args.k1, k2=args.k2, T=args.T,
            delta1=args.delta1, delta2=args.delta2, factors=factors,
            noise=KroneckerNoise(off_rows=args.noise_off,
                                 off_cols=args.noise_off,
                                 scale=args.noise_scale),
            burn_in=args.burn_in,
            seed=args.seed if args.seed is not None else 0,
        )
    series, truth = simulate(cfg)
    out = _outdir(args)
    mio.export_csv(series, os.path.join(out, "series.csv"))
    mio.dump_json(mio.simconfig_to_jsonable(cfg), os.path.join(out, "config.json"))
    mio.dump_json({
        "p1": cfg.p1, "p2": cfg.p2, "k1": cfg.k1, "k2": cfg.k2,
        "seed": list(cfg.seed) if isinstance(cfg.seed, tuple) else cfg.seed,
        "r": truth.r.tolist(), "c": truth.c.tolist(),
    }, os.path.join(out, "truth.json"))
    print(f"wrote series.csv, config.json, truth.json to {out}")
    return 0


def _cmd_fit(args) -> int:
    series = mio.ingest_csv(args.input)
    out = _outdir(args)
    wrote = []
    if args.model in ("matrix", "both"):
        opts = EstimatorOptions(h0=args.h0, k1=args.k1, k2=args.k2,
                                standardize=args.standardize)
        fitted = fit(series, opts)
        q1, q2 = fitted.row.q, fitted.col.q
        if args.varimax:
            q1 = q1 @ varimax(q1)[1]
            q2 = q2 @ varimax(q2)[1]
            from .estimator import FactorFit, LoadingEstimate
            fitted = FactorFit(
                row=LoadingEstimate(q1, fitted.row.eigenvalues,
                                    fitted.row.spectrum),
                col=LoadingEstimate(q2, fitted.col.eigenvalues,
                                    fitted.col.spectrum),
                options=fitted.options,
                standardization=fitted.standardization,
            )
        mio.write_fit_json(fitted, os.path.join(out, "fit.json"))
        scale = args.loading_scale
        mio.write_matrix_csv(q1 * scale, os.path.join(out, "loadings_rows.csv"))
        mio.write_matrix_csv(q2 * scale, os.path.join(out, "loadings_cols.csv"))
        factors = extract_factors(fitted, series)
        mio.export_csv(factors, os.path.join(out, "factors.csv"))
        mio.write_scree_csv(fitted.row.spectrum,
                            os.path.join(out, "scree_rows.csv"))
        mio.write_scree_csv(fitted.col.spectrum,
                            os.path.join(out, "scree_cols.csv"))
        wrote += ["fit.json", "loadings_rows.csv", "loadings_cols.csv",
                  "factors.csv", "scree_rows.csv", "scree_cols.csv"]
    if args.model in ("vector", "both"):
        vfit = fit_vec(series, h0=args.h0, k=args.k)
        mio.write_fit_json(vfit, os.path.join(out, "fit_vec.json"))
        mio.write_scree_csv(vfit.spectrum, os.path.join(out, "scree_vec.csv"))
        wrote += ["fit_vec.json", "scree_vec.csv"]
    print(f"wrote {', '.join(wrote)} to {out}")
    return 0


def _cmd_ranks(args) -> int:
    series = mio.ingest_csv(args.input)
    out = _outdir(args)
    opts = EstimatorOptions(h0=args.h0)
    fitted = fit(series, opts)
    doc = {"h0": args.h0, "k1_hat": fitted.k1, "k2_hat": fitted.k2}
    mio.write_scree_csv(fitted.row.spectrum, os.path.join(out, "scree_rows.csv"))
    mio.write_scree_csv(fitted.col.spectrum, os.path.join(out, "scree_cols.csv"))
    wrote = ["ranks.json", "scree_rows.csv", "scree_cols.csv"]
    if args.model in ("vector", "both"):
        vfit = fit_vec(series, h0=args.h0)
        doc["k_vec_hat"] = vfit.k
        mio.write_scree_csv(vfit.spectrum, os.path.join(out, "scree_vec.csv"))
        wrote.append("scree_vec.csv")
    mio.dump_json(doc, os.path.join(out, "ranks.json"))
    print(f"selected ranks: {json.dumps(doc)}")
    print(f"wrote {', '.join(wrote)} to {out}")
    return 0


def _build_specs(args, series) -> list[ModelSpec]:
    pairs = args.specs
    specs: list[ModelSpec] = []
    if args.include_zero:
        if args.model in ("matrix", "both"):
            specs.append(ModelSpec(kind="matrix", k1=0, k2=0))
        if args.model in ("vector", "both"):
            specs.append(ModelSpec(kind="vector", k=0))
    if args.model in ("matrix", "both"):
        for k1, k2 in pairs:
            specs.append(ModelSpec(kind="matrix", k1=k1, k2=k2))
    if args.model in ("vector", "both"):
        seen = set()
        for k1, k2 in pairs:
            k = k1 * k2
            if k not in seen:
                seen.add(k)
                specs.append(ModelSpec(kind="vector", k=k))
    return specs


def _cmd_validate(args) -> int:
    series = mio.ingest_csv(args.input)
    specs = _build_specs(args, series)
    if args.method == "kfold":
        report = kfold_cv(series, args.folds, specs, h0=args.h0,
                          standardize_train=args.standardize)
    else:
        schedule = make_rolling_schedule(
            series.T, test_len=args.test_len, min_train=args.min_train,
            p1=series.p1, p2=series.p2)
        report = rolling_validation(series, schedule, specs, h0=args.h0,
                                    standardize_train=args.standardize,
                                    min_train=args.min_train)
    out = _outdir(args)
    mio.write_validation_json(report, os.path.join(out, "validation.json"))
    mio.write_validation_csv(report, os.path.join(out, "validation.csv"))
    for row in report.rows:
        print(f"{row.model}: RSS/SST = {row.ratio:.4f} "
              f"({row.factor_count} factors, {row.param_count} parameters)")
    print(f"wrote validation.json, validation.csv to {out}")
    return 0


def _cmd_study(args) -> int:
    with open(args.grid) as fh:
        doc = json.load(fh)
    if args.replicates is not None:
        doc["replicates"] = args.replicates
    if args.seed is not None:
        doc["seed"] = args.seed
    cells, master_seed = mio.parse_study_grid(doc)
    report = run_study(cells, master_seed=master_seed, workers=args.workers)
    out = _outdir(args)
    mio.write_study_json(report, os.path.join(out, "study.json"))
    mio.write_study_csv(report, os.path.join(out, "study_metrics.csv"),
                        paper_scale=args.paper_scale)
    mio.write_study_table_csv(report, os.path.join(out, "study_table.csv"),
                              paper_scale=args.paper_scale)
    wrote = ["study.json", "study_metrics.csv", "study_table.csv"]
    if any(c.rank_freq_mat or c.rank_freq_vec for c in report.cells):
        mio.write_rank_freq_csv(report, os.path.join(out, "rank_freq.csv"))
        wrote.append("rank_freq.csv")
    print(f"ran {len(cells)} cells; wrote {', '.join(wrote)} to {out}")
    return 0


def _cmd_report(args) -> int:
    fitted = mio.read_fit_json(args.fit)
    with open(args.truth) as fh:
        truth = json.load(fh)
    r = np.asarray(truth["r"], dtype=np.float64)
    c = np.asarray(truth["c"], dtype=np.float64)
    q_row = np.linalg.qr(r)[0]
    q_col = np.linalg.qr(c)[0]
    from .baseline import VecFactorFit
    if isinstance(fitted, VecFactorFit):
        doc = {"model": "vector",
               "d_joint": subspace_distance(fitted.q, np.kron(q_col, q_row))}
    else:
        doc = {
            "model": "matrix",
            "d_row_space": subspace_distance(fitted.row.q, q_row),
            "d_col_space": subspace_distance(fitted.col.q, q_col),
            "d_joint": subspace_distance(
                np.kron(fitted.col.q, fitted.row.q), np.kron(q_col, q_row)),
        }
    out = _outdir(args)
    mio.dump_json(doc, os.path.join(out, "report.json"))
    print(json.dumps(doc, default=float))
    print(f"wrote report.json to {out}")
    return 0


def _add_common_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", default=".", help="directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matfactor",
        description="Factor models for matrix-valued time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic series")
    p.add_argument("--config", help="simulation config JSON (overrides flags)")
    p.add_argument("--p1", type=int, default=20)
    p.add_argument("--p2", type=int, default=20)
    p.add_argument("--k1", type=int, default=3)
    p.add_argument("--k2", type=int, default=2)
    p.add_argument("--T", type=int, default=200)
    p.add_argument("--delta1", type=float, default=0.0)
    p.add_argument("--delta2", type=float, default=0.0)
    p.add_argument("--factor-model", choices=["ar1", "ma2"], default="ar1")
    p.add_argument("--ar-phi", help="AR(1) coefficient: scalar or 'a,b;c,d' grid")
    p.add_argument("--ma-theta1", type=float, default=0.0)
    p.add_argument("--ma-theta2", type=float, default=0.9)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--noise-off", type=float, default=0.2,
                   help="off-diagonal of both noise covariance factors")
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    _add_common_output(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit factor loadings to a CSV panel")
    p.add_argument("--input", required=True)
    p.add_argument("--h0", type=int, default=1)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--k2", type=int, default=None)
    p.add_argument("--k", type=int, default=None,
                   help="factor count for the vector route")
    p.add_argument("--model", choices=["matrix", "vector", "both"],
                   default="matrix")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--varimax", action="store_true",
                   help="rotate loading bases to varimax orientation")
    p.add_argument("--loading-scale", type=float, default=1.0,
                   help="display multiplier applied to loadings CSVs")
    _add_common_output(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("ranks", help="eigenvalue-ratio rank selection")
    p.add_argument("--input", required=True)
    p.add_argument("--h0", type=int, default=1)
    p.add_argument("--model", choices=["matrix", "vector", "both"],
                   default="matrix")
    _add_common_output(p)
    p.set_defaults(func=_cmd_ranks)

    p = sub.add_parser("validate", help="out-of-sample model comparison")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=["kfold", "rolling"], default="kfold")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--test-len", type=int, default=12)
    p.add_argument("--min-train", type=int, default=None)
    p.add_argument("--h0", type=int, default=1)
    p.add_argument("--specs", type=_parse_specs, required=True,
                   help="semicolon-separated k1,k2 pairs, e.g. '3,2;2,2'")
    p.add_argument("--model", choices=["matrix", "vector", "both"],
                   default="matrix")
    p.add_argument("--include-zero", action="store_true",
                   help="add the zero-factor reference model")
    p.add_argument("--standardize", action="store_true")
    _add_common_output(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("study", help="Monte-Carlo study over a config grid")
    p.add_argument("--grid", required=True, help="grid JSON file")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help="multiply distance metrics by 10 in CSV tables")
    _add_common_output(p)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("report", help="compare a fit against saved truth")
    p.add_argument("--fit", required=True)
    p.add_argument("--truth", required=True)
    _add_common_output(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MatfactorError as exc:
        doc = {"error": type(exc).__name__, "message": exc.message}
        doc.update(exc.payload)
        print(json.dumps(doc, default=str), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except ValueError as exc:
        print(json.dumps({"error": "ValueError", "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
