"""File formats: long CSV panels, fit/study/validation JSON, report tables.

Conventions
-----------
* Series travel as long-format CSV with header ``t,row,col,value``; indices
  are one-based and every (t, row, col) cell must appear exactly once.
  Values are written with 17 significant digits so a round trip is
  bit-exact.
* JSON files are written by a small deterministic serializer: dict order is
  insertion order, floats carry 17 significant digits, non-finite floats
  become null.
* Human-readable report CSVs round to 6 significant digits.
* All writers go through an atomic temp-file-plus-rename so readers never
  observe a half-written file.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .baseline import VecFactorFit
from .errors import IncompletePanel, NonFinite, SchemaError
from .estimator import EstimatorOptions, FactorFit, LoadingEstimate
from .series import MatrixSeries, StandardizedSeries
from .simulation import AR1Spec, KroneckerNoise, MA2Spec, SimConfig
from .study import StudyCell, StudyReport
from .validation import ValidationReport, ValidationRow

__all__ = [
    "atomic_write",
    "dump_json",
    "ingest_csv",
    "export_csv",
    "write_fit_json",
    "read_fit_json",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_scree_csv",
    "read_scree_csv",
    "write_study_json",
    "write_study_csv",
    "read_study_csv",
    "write_study_table_csv",
    "write_rank_freq_csv",
    "write_validation_json",
    "write_validation_csv",
    "read_validation_csv",
    "simconfig_to_jsonable",
    "simconfig_from_jsonable",
    "parse_study_grid",
]

SERIES_HEADER = ["t", "row", "col", "value"]

# Scalar study metrics are span/signal distances; the display convention for
# published tables multiplies them by 10.
PAPER_SCALE = 10.0


@contextmanager
def atomic_write(path: str):
    """Yield a text handle to a temp file that replaces ``path`` on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _json_write(obj, out: list, indent: int) -> None:
    pad = "  " * indent
    if obj is None or obj is True or obj is False:
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        out.append(format(x, ".17g") if math.isfinite(x) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, val) in enumerate(obj.items()):
            out.append(f'{pad}  {json.dumps(str(key))}: ')
            _json_write(val, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for i, val in enumerate(obj):
            _json_write(val, out, indent)
            if i < len(obj) - 1:
                out.append(", ")
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _json_write(obj.tolist(), out, indent)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dump_json(obj, path: str) -> None:
    """Deterministic JSON writer: 17 significant digits, atomic replace."""
    out: list[str] = []
    _json_write(obj, out, 0)
    out.append("\n")
    with atomic_write(path) as fh:
        fh.write("".join(out))


def ingest_csv(path: str) -> MatrixSeries:
    """Read a long-format panel into a series.

    The file must carry the exact header ``t,row,col,value``, one-based
    integer coordinates, and exactly one finite value for every cell of a
    complete T x p1 x p2 panel.

    Raises
    ------
    SchemaError
        Wrong header, malformed fields, or duplicate cells.
    NonFinite
        A value parses to NaN or infinity.
    IncompletePanel
        A missing cell; the first one (scanning t, then row, then col) is
        reported.
    """
    records: list[tuple[int, int, int, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty", path=path) from None
        if [h.strip() for h in header] != SERIES_HEADER:
            raise SchemaError(
                f"expected header {','.join(SERIES_HEADER)!r}, got "
                f"{','.join(header)!r}",
                header=header,
            )
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and rec[0].strip() == ""):
                continue
            if len(rec) != 4:
                raise SchemaError(
                    f"line {lineno}: expected 4 fields, got {len(rec)}",
                    line=lineno,
                )
            try:
                t, r, c = int(rec[0]), int(rec[1]), int(rec[2])
                v = float(rec[3])
            except ValueError:
                raise SchemaError(
                    f"line {lineno}: could not parse {rec!r}", line=lineno
                ) from None
            if t < 1 or r < 1 or c < 1:
                raise SchemaError(
                    f"line {lineno}: coordinates must be >= 1", line=lineno
                )
            if not math.isfinite(v):
                raise NonFinite(
                    f"line {lineno}: non-finite value at t={t}, row={r}, col={c}",
                    t=t, row=r, col=c, line=lineno,
                )
            records.append((t, r, c, v))
    if not records:
        raise SchemaError("file has a header but no data rows", path=path)
    T = max(rec[0] for rec in records)
    p1 = max(rec[1] for rec in records)
    p2 = max(rec[2] for rec in records)
    data = np.empty((T, p1, p2))
    seen = np.zeros((T, p1, p2), dtype=bool)
    for t, r, c, v in records:
        if seen[t - 1, r - 1, c - 1]:
            raise SchemaError(
                f"duplicate cell at t={t}, row={r}, col={c}", t=t, row=r, col=c
            )
        seen[t - 1, r - 1, c - 1] = True
        data[t - 1, r - 1, c - 1] = v
    if not seen.all():
        t, r, c = np.argwhere(~seen)[0]
        raise IncompletePanel(
            f"missing cell at t={t + 1}, row={r + 1}, col={c + 1} "
            f"(panel inferred as T={T}, p1={p1}, p2={p2})",
            t=int(t) + 1, row=int(r) + 1, col=int(c) + 1, T=T, p1=p1, p2=p2,
        )
    return MatrixSeries(data)


def export_csv(series: MatrixSeries, path: str) -> None:
    """Write a series in the long format accepted by :func:`ingest_csv`.

    Values carry 17 significant digits, so re-ingesting reproduces the
    series bit for bit.
    """
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_HEADER)
        T, p1, p2 = series.shape
        data = series.data
        for t in range(T):
            for r in range(p1):
                for c in range(p2):
                    writer.writerow(
                        [t + 1, r + 1, c + 1, format(data[t, r, c], ".17g")])


def _loading_jsonable(le: LoadingEstimate) -> tuple[list, list]:
    return le.q.tolist(), le.spectrum.tolist()


def write_fit_json(fitted: FactorFit | VecFactorFit, path: str) -> None:
    """Serialize a fit: dims, ranks, lag window, bases (row-major), spectra.

    The flattened-route fit reuses the same schema with ``k1 = k`` and a
    1 x 1 placeholder second basis, flagged by ``model`` and ``note``.
    """
    if isinstance(fitted, VecFactorFit):
        doc = {
            "model": "vector",
            "note": ("q1 holds the flattened (column-major) basis; "
                     "k2 and q2 are placeholders"),
            "p1": fitted.p1, "p2": fitted.p2,
            "k1": fitted.k, "k2": 1, "h0": fitted.h0,
            "q1": fitted.q.tolist(), "q2": [[1.0]],
            "eigvals1": fitted.spectrum.tolist(), "eigvals2": [1.0],
        }
    else:
        q1, eig1 = _loading_jsonable(fitted.row)
        q2, eig2 = _loading_jsonable(fitted.col)
        doc = {
            "model": "matrix",
            "p1": fitted.p1, "p2": fitted.p2,
            "k1": fitted.k1, "k2": fitted.k2, "h0": fitted.options.h0,
            "q1": q1, "q2": q2,
            "eigvals1": eig1, "eigvals2": eig2,
        }
        if fitted.standardization is not None:
            doc["standardize"] = {
                "means": fitted.standardization.means.tolist(),
                "scales": fitted.standardization.scales.tolist(),
            }
    dump_json(doc, path)


def read_fit_json(path: str) -> FactorFit | VecFactorFit:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        model = doc.get("model", "matrix")
        if model == "vector":
            return VecFactorFit(
                q=np.asarray(doc["q1"], dtype=np.float64),
                spectrum=np.asarray(doc["eigvals1"], dtype=np.float64),
                p1=int(doc["p1"]), p2=int(doc["p2"]), h0=int(doc["h0"]),
            )
        q1 = np.asarray(doc["q1"], dtype=np.float64)
        q2 = np.asarray(doc["q2"], dtype=np.float64)
        eig1 = np.asarray(doc["eigvals1"], dtype=np.float64)
        eig2 = np.asarray(doc["eigvals2"], dtype=np.float64)
        k1, k2 = q1.shape[1], q2.shape[1]
        std = None
        if "standardize" in doc:
            means = np.asarray(doc["standardize"]["means"], dtype=np.float64)
            scales = np.asarray(doc["standardize"]["scales"], dtype=np.float64)
            placeholder = MatrixSeries(np.zeros((2,) + means.shape))
            std = StandardizedSeries(placeholder, means, scales)
        opts = EstimatorOptions(h0=int(doc["h0"]), k1=k1, k2=k2,
                                standardize=std is not None)
        return FactorFit(
            row=LoadingEstimate(q1, eig1[:k1], eig1),
            col=LoadingEstimate(q2, eig2[:k2], eig2),
            options=opts, standardization=std,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed fit file {path}: {exc}", path=path) from exc


def write_matrix_csv(matrix: np.ndarray, path: str, prefix: str = "f") -> None:
    """Write a p x k matrix as rows ``row,f1..fk`` (6 significant digits)."""
    m = np.asarray(matrix, dtype=np.float64)
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row"] + [f"{prefix}{j + 1}" for j in range(m.shape[1])])
        for i in range(m.shape[0]):
            writer.writerow([i + 1] + [format(v, ".6g") for v in m[i]])


def read_matrix_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "row":
            raise SchemaError(f"not a matrix CSV: {path}", path=path)
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append([float(v) for v in rec[1:]])
    if not rows:
        raise SchemaError(f"matrix CSV has no rows: {path}", path=path)
    return np.asarray(rows)


def write_scree_csv(spectrum: np.ndarray, path: str) -> None:
    """Eigenvalue table for scree plots: index, value, log value, next/current
    ratio.  Log and ratio cells are blank where undefined."""
    lam = np.asarray(spectrum, dtype=np.float64)
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue", "log_eigenvalue", "ratio"])
        for i, v in enumerate(lam):
            logv = format(math.log(v), ".6g") if v > 0 else ""
            ratio = ""
            if i + 1 < lam.size and v > 0:
                ratio = format(lam[i + 1] / v, ".6g")
            writer.writerow([i + 1, format(v, ".6g"), logv, ratio])


def read_scree_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "eigenvalue", "log_eigenvalue", "ratio"]:
            raise SchemaError(f"not a scree CSV: {path}", path=path)
        idx, eig, logv, ratio = [], [], [], []
        for rec in reader:
            if not rec:
                continue
            idx.append(int(rec[0]))
            eig.append(float(rec[1]))
            logv.append(float(rec[2]) if rec[2] else math.nan)
            ratio.append(float(rec[3]) if rec[3] else math.nan)
    return {"index": np.asarray(idx), "eigenvalue": np.asarray(eig),
            "log_eigenvalue": np.asarray(logv), "ratio": np.asarray(ratio)}


def _metric_scale(name: str, paper_scale: bool) -> float:
    return PAPER_SCALE if paper_scale and name.startswith("d_") else 1.0


def _study_cells_jsonable(report: StudyReport) -> list[dict]:
    cells = []
    for cell in report.cells:
        metrics = {}
        for name, s in cell.metrics.items():
            metrics[name] = {"mean": s.mean, "sd": s.sd, "n": s.n}
        doc = {
            "label": cell.label,
            "params": cell.params,
            "replicates": cell.replicates,
            "metrics": metrics,
        }
        if cell.rank_freq_mat:
            doc["rank_freq_mat"] = [
                {"k1": k1, "k2": k2, "freq": f}
                for (k1, k2), f in cell.rank_freq_mat.items()
            ]
        if cell.rank_freq_vec:
            doc["rank_freq_vec"] = [
                {"k": k, "freq": f} for k, f in cell.rank_freq_vec.items()
            ]
        cells.append(doc)
    return cells


def write_study_json(report: StudyReport, path: str) -> None:
    dump_json({"master_seed": report.master_seed,
               "cells": _study_cells_jsonable(report)}, path)


_PARAM_COLS = ["p1", "p2", "k1", "k2", "T", "delta1", "delta2", "h0",
               "factor_model", "noise_scale"]


def write_study_csv(report: StudyReport, path: str,
                    paper_scale: bool = False) -> None:
    """Long-format study results: one row per cell per metric."""
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + _PARAM_COLS +
                        ["replicates", "metric", "mean", "sd"])
        for cell in report.cells:
            base = [cell.label] + [cell.params[c] for c in _PARAM_COLS]
            for name, s in cell.metrics.items():
                scale = _metric_scale(name, paper_scale)
                writer.writerow(
                    base + [s.n, name, format(s.mean * scale, ".6g"),
                            "" if s.sd is None else format(s.sd * scale, ".6g")])


def read_study_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "metric" not in reader.fieldnames:
            raise SchemaError(f"not a study CSV: {path}", path=path)
        rows = []
        for rec in reader:
            rec = dict(rec)
            rec["mean"] = float(rec["mean"])
            rec["sd"] = float(rec["sd"]) if rec["sd"] else None
            rows.append(rec)
    return rows


def write_study_table_csv(report: StudyReport, path: str,
                          paper_scale: bool = False) -> None:
    """Wide table mirroring the published layout.

    One row per design (delta1, delta2, p1, p2), one column per
    (sample size, metric) pair. When every design was swept over the same
    sample sizes the columns are labelled with the absolute T; otherwise
    (e.g. T proportional to p1*p2) the columns are positional, T1..Tn, and
    extra T1..Tn columns record each row's actual sample sizes.
    """
    designs: list[tuple] = []
    t_lists: dict = {}
    metric_names: list[str] = []
    values: dict = {}
    for cell in report.cells:
        p = cell.params
        design = (p["delta1"], p["delta2"], p["p1"], p["p2"])
        if design not in designs:
            designs.append(design)
            t_lists[design] = []
        if p["T"] not in t_lists[design]:
            t_lists[design].append(p["T"])
        for name, s in cell.metrics.items():
            if name not in metric_names:
                metric_names.append(name)
            values[design + (p["T"], name)] = s.mean
    shared = len({tuple(ts) for ts in t_lists.values()}) <= 1
    n_slots = max((len(ts) for ts in t_lists.values()), default=0)

    def cell_value(design, t, m):
        v = values.get(design + (t, m))
        if v is None:
            return ""
        return format(v * _metric_scale(m, paper_scale), ".6g")

    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        head = ["delta1", "delta2", "p1", "p2"]
        if shared:
            ts = next(iter(t_lists.values()), [])
            head += [f"{m}@T={t}" for t in ts for m in metric_names]
            writer.writerow(head)
            for design in designs:
                row = list(design)
                for t in ts:
                    row += [cell_value(design, t, m) for m in metric_names]
                writer.writerow(row)
        else:
            head += [f"T{j + 1}" for j in range(n_slots)]
            head += [f"{m}@T{j + 1}" for j in range(n_slots)
                     for m in metric_names]
            writer.writerow(head)
            for design in designs:
                ts = t_lists[design]
                row = list(design)
                row += [ts[j] if j < len(ts) else "" for j in range(n_slots)]
                for j in range(n_slots):
                    if j < len(ts):
                        row += [cell_value(design, ts[j], m)
                                for m in metric_names]
                    else:
                        row += ["" for _ in metric_names]
                writer.writerow(row)


def read_study_table_csv(path: str) -> list[dict]:
    """Parse a wide study table back into one dict per design row."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "delta1" not in reader.fieldnames:
            raise SchemaError(f"not a study table CSV: {path}", path=path)
        rows = []
        for rec in reader:
            out: dict = {}
            for key, raw in rec.items():
                if raw == "" or raw is None:
                    out[key] = None
                elif key in ("p1", "p2") or key.startswith("T"):
                    out[key] = int(raw)
                else:
                    out[key] = float(raw)
            rows.append(out)
        return rows


def write_rank_freq_csv(report: StudyReport, path: str) -> None:
    """Selected-rank frequency tables, one row per cell per observed rank."""
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + _PARAM_COLS + ["route", "k1_hat", "k2_hat",
                                                   "freq"])
        for cell in report.cells:
            base = [cell.label] + [cell.params[c] for c in _PARAM_COLS]
            for (k1, k2), f in cell.rank_freq_mat.items():
                writer.writerow(base + ["matrix", k1, k2, format(f, ".6g")])
            for k, f in cell.rank_freq_vec.items():
                writer.writerow(base + ["vector", k, "", format(f, ".6g")])


def read_rank_freq_csv(path: str) -> list[dict]:
    """Parse a rank-frequency CSV back into one dict per row."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "k1_hat" not in reader.fieldnames:
            raise SchemaError(f"not a rank frequency CSV: {path}", path=path)
        rows = []
        for rec in reader:
            rows.append({
                "label": rec["label"], "route": rec["route"],
                "k1_hat": int(rec["k1_hat"]),
                "k2_hat": int(rec["k2_hat"]) if rec["k2_hat"] else None,
                "freq": float(rec["freq"]),
            })
        return rows


def _validation_rows_jsonable(rows: list[ValidationRow]) -> list[dict]:
    return [
        {"model": r.model, "rss": r.rss, "sst": r.sst,
         "rss_over_sst": r.ratio, "factor_count": r.factor_count,
         "param_count": r.param_count}
        for r in rows
    ]


def write_validation_json(report: ValidationReport, path: str) -> None:
    dump_json({
        "method": report.method, "h0": report.h0,
        "standardized": report.standardized,
        "detail": report.detail or {},
        "rows": _validation_rows_jsonable(report.rows),
    }, path)


def write_validation_csv(report: ValidationReport, path: str) -> None:
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "rss", "sst", "rss_over_sst",
                         "factor_count", "param_count"])
        for r in report.rows:
            writer.writerow([r.model, format(r.rss, ".6g"),
                             format(r.sst, ".6g"), format(r.ratio, ".6g"),
                             r.factor_count, r.param_count])


def read_validation_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "rss_over_sst" not in reader.fieldnames:
            raise SchemaError(f"not a validation CSV: {path}", path=path)
        rows = []
        for rec in reader:
            rows.append({
                "model": rec["model"], "rss": float(rec["rss"]),
                "sst": float(rec["sst"]),
                "rss_over_sst": float(rec["rss_over_sst"]),
                "factor_count": int(rec["factor_count"]),
                "param_count": int(rec["param_count"]),
            })
    return rows


def simconfig_to_jsonable(cfg: SimConfig) -> dict:
    if isinstance(cfg.factors, AR1Spec):
        phi = cfg.factors.phi
        factors = {"model": "ar1",
                   "phi": phi.tolist() if isinstance(phi, np.ndarray) else phi}
    else:
        factors = {"model": "ma2", "theta1": cfg.factors.theta1,
                   "theta2": cfg.factors.theta2}
    return {
        "p1": cfg.p1, "p2": cfg.p2, "k1": cfg.k1, "k2": cfg.k2, "T": cfg.T,
        "delta1": cfg.delta1, "delta2": cfg.delta2,
        "factors": factors,
        "noise": {"diag_rows": cfg.noise.diag_rows,
                  "off_rows": cfg.noise.off_rows,
                  "diag_cols": cfg.noise.diag_cols,
                  "off_cols": cfg.noise.off_cols,
                  "scale": cfg.noise.scale},
        "burn_in": cfg.burn_in,
        "seed": list(cfg.seed) if isinstance(cfg.seed, tuple) else cfg.seed,
    }


def _factors_from_jsonable(doc) -> AR1Spec | MA2Spec:
    if not isinstance(doc, dict) or "model" not in doc:
        raise SchemaError(f"factor spec must be an object with 'model': {doc!r}")
    if doc["model"] == "ar1":
        phi = doc.get("phi", 0.5)
        if isinstance(phi, list):
            phi = np.asarray(phi, dtype=np.float64)
        return AR1Spec(phi=phi)
    if doc["model"] == "ma2":
        return MA2Spec(theta1=float(doc.get("theta1", 0.0)),
                       theta2=float(doc.get("theta2", 0.9)))
    raise SchemaError(f"unknown factor model {doc['model']!r}")


def simconfig_from_jsonable(doc: dict) -> SimConfig:
    try:
        noise_doc = doc.get("noise", {})
        seed = doc.get("seed", 0)
        if isinstance(seed, list):
            seed = tuple(int(s) for s in seed)
        return SimConfig(
            p1=int(doc["p1"]), p2=int(doc["p2"]),
            k1=int(doc["k1"]), k2=int(doc["k2"]), T=int(doc["T"]),
            delta1=float(doc.get("delta1", 0.0)),
            delta2=float(doc.get("delta2", 0.0)),
            factors=_factors_from_jsonable(doc.get("factors",
                                                   {"model": "ar1"})),
            noise=KroneckerNoise(
                diag_rows=float(noise_doc.get("diag_rows", 1.0)),
                off_rows=float(noise_doc.get("off_rows", 0.2)),
                diag_cols=float(noise_doc.get("diag_cols", 1.0)),
                off_cols=float(noise_doc.get("off_cols", 0.2)),
                scale=float(noise_doc.get("scale", 1.0)),
            ),
            burn_in=int(doc.get("burn_in", 100)),
            seed=seed,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed simulation config: {exc}") from exc


_SWEEPABLE = ["p1", "p2", "k1", "k2", "T", "delta1", "delta2", "h0"]


def parse_study_grid(doc: dict) -> tuple[list[StudyCell], int]:
    """Build study cells from a grid document.

    The document mirrors the simulation config, except that any of
    p1, p2, k1, k2, T, delta1, delta2 and h0 may be a list of values to
    sweep; cells enumerate the cartesian product in that fixed field order.
    ``metrics`` and ``replicates`` apply to every cell, ``seed`` is the
    study master seed.
    """
    if not isinstance(doc, dict):
        raise SchemaError("study grid must be a JSON object")
    metrics = doc.get("metrics", ["d_row_space", "d_col_space"])
    if not isinstance(metrics, list) or not metrics:
        raise SchemaError("'metrics' must be a non-empty list")
    replicates = int(doc.get("replicates", 200))
    master_seed = int(doc.get("seed", 0))
    axes = []
    for name in _SWEEPABLE:
        val = doc.get(name, 1 if name == "h0" else None)
        if val is None:
            raise SchemaError(f"study grid is missing {name!r}")
        axes.append(val if isinstance(val, list) else [val])
    cells = []
    for idx, combo in enumerate(itertools.product(*axes)):
        point = dict(zip(_SWEEPABLE, combo))
        h0 = int(point.pop("h0"))
        cell_doc = dict(doc)
        cell_doc.update(point)
        cell_doc.pop("h0", None)
        for drop in ("metrics", "replicates", "seed"):
            cell_doc.pop(drop, None)
        cfg = simconfig_from_jsonable(cell_doc)
        cells.append(StudyCell(config=cfg, h0=h0,
                               metrics=tuple(metrics),
                               replicates=replicates,
                               label=f"cell{idx:03d}"))
    return cells, master_seed
