"""File formats: long CSV panels, JSON documents, report tables."""

import json
import math

import numpy as np
import pytest

from matfactor import (
    AR1Spec,
    CellResult,
    DEFAULT_AR_GRID,
    EstimatorOptions,
    IncompletePanel,
    KroneckerNoise,
    MA2Spec,
    MatrixSeries,
    MetricSummary,
    ModelSpec,
    NonFinite,
    SchemaError,
    SimConfig,
    StudyCell,
    StudyReport,
    TooFewObservations,
    ValidationReport,
    ValidationRow,
    dump_json,
    export_csv,
    fit,
    fit_vec,
    ingest_csv,
    kfold_cv,
    parse_study_grid,
    read_fit_json,
    read_rank_freq_csv,
    read_study_table_csv,
    run_study,
    simconfig_from_jsonable,
    simconfig_to_jsonable,
    write_fit_json,
    write_study_csv,
    write_study_json,
    write_study_table_csv,
    write_validation_csv,
    write_validation_json,
)
from matfactor.io import (
    atomic_write,
    read_matrix_csv,
    read_scree_csv,
    read_study_csv,
    read_validation_csv,
    write_matrix_csv,
    write_rank_freq_csv,
    write_scree_csv,
)


# ---------------------------------------------------------------------------
# Long-format panel CSV.

def test_export_ingest_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    data = rng.standard_normal((5, 3, 4))
    data[0, 0, 0] = 1e-300
    data[1, 2, 3] = -1e300
    data[2, 1, 1] = math.pi
    path = tmp_path / "panel.csv"
    export_csv(MatrixSeries(data), str(path))
    back = ingest_csv(str(path))
    assert np.array_equal(back.data, data)


def test_ingest_accepts_shuffled_rows_and_blank_lines(tmp_path):
    lines = ["t,row,col,value"]
    for t in (2, 1):
        for r in (1, 2):
            for c in (2, 1):
                lines.append(f"{t},{r},{c},{t * 100 + r * 10 + c}")
    text = "\n".join(lines[:4] + [""] + lines[4:]) + "\n\n"
    path = tmp_path / "panel.csv"
    path.write_text(text)
    series = ingest_csv(str(path))
    assert series.shape == (2, 2, 2)
    assert series.data[1, 0, 1] == 212.0


def _write(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    return str(path)


def test_ingest_rejects_wrong_header(tmp_path):
    path = _write(tmp_path, "time,row,col,value\n1,1,1,0.5\n")
    with pytest.raises(SchemaError) as exc:
        ingest_csv(path)
    assert exc.value.payload["header"] == ["time", "row", "col", "value"]


def test_ingest_rejects_field_count_and_parse_errors(tmp_path):
    path = _write(tmp_path, "t,row,col,value\n1,1,1\n")
    with pytest.raises(SchemaError) as exc:
        ingest_csv(path)
    assert exc.value.payload["line"] == 2

    path = _write(tmp_path, "t,row,col,value\n1,1,1,0.5\n1,one,2,0.5\n")
    with pytest.raises(SchemaError) as exc:
        ingest_csv(path)
    assert exc.value.payload["line"] == 3

    path = _write(tmp_path, "t,row,col,value\n0,1,1,0.5\n")
    with pytest.raises(SchemaError) as exc:
        ingest_csv(path)
    assert exc.value.payload["line"] == 2


def test_ingest_rejects_non_finite_values(tmp_path):
    path = _write(tmp_path, "t,row,col,value\n1,1,1,0.5\n1,1,2,nan\n")
    with pytest.raises(NonFinite) as exc:
        ingest_csv(path)
    assert exc.value.payload == {"t": 1, "row": 1, "col": 2, "line": 3}


def test_ingest_rejects_duplicate_cells(tmp_path):
    path = _write(tmp_path, "t,row,col,value\n1,1,1,0.5\n1,1,1,0.6\n")
    with pytest.raises(SchemaError) as exc:
        ingest_csv(path)
    assert exc.value.payload == {"t": 1, "row": 1, "col": 1}


def test_ingest_reports_first_missing_cell(tmp_path):
    lines = ["t,row,col,value"]
    for t in (1, 2):
        for r in (1, 2):
            for c in (1, 2):
                if (t, r, c) != (2, 1, 2):
                    lines.append(f"{t},{r},{c},1.0")
    path = _write(tmp_path, "\n".join(lines) + "\n")
    with pytest.raises(IncompletePanel) as exc:
        ingest_csv(path)
    assert exc.value.payload == {"t": 2, "row": 1, "col": 2,
                                 "T": 2, "p1": 2, "p2": 2}


def test_ingest_rejects_empty_and_headerless_files(tmp_path):
    with pytest.raises(SchemaError):
        ingest_csv(_write(tmp_path, ""))
    with pytest.raises(SchemaError):
        ingest_csv(_write(tmp_path, "t,row,col,value\n"))


def test_ingest_needs_two_periods(tmp_path):
    path = _write(tmp_path, "t,row,col,value\n1,1,1,0.5\n1,1,2,0.25\n")
    with pytest.raises(TooFewObservations):
        ingest_csv(path)
    ok = _write(tmp_path, "t,row,col,value\n1,1,1,1\n2,1,1,2\n")
    assert ingest_csv(ok).shape == (2, 1, 1)


# ---------------------------------------------------------------------------
# Deterministic JSON.

def test_dump_json_layout_and_digits(tmp_path):
    path = tmp_path / "doc.json"
    dump_json({"a": 1 / 3, "b": [1, 2], "c": {"d": True}}, str(path))
    assert path.read_text() == (
        '{\n'
        '  "a": 0.33333333333333331,\n'
        '  "b": [1, 2],\n'
        '  "c": {\n'
        '    "d": true\n'
        '  }\n'
        '}\n'
    )


def test_dump_json_handles_numpy_and_non_finite(tmp_path):
    path = tmp_path / "doc.json"
    dump_json({"f": np.float64(0.5), "i": np.int64(7), "nan": math.nan,
               "inf": math.inf, "arr": np.array([1.0, 2.5]),
               "tup": (1, 2), "none": None, "empty": {}, "elist": []},
              str(path))
    doc = json.loads(path.read_text())
    assert doc == {"f": 0.5, "i": 7, "nan": None, "inf": None,
                   "arr": [1.0, 2.5], "tup": [1, 2], "none": None,
                   "empty": {}, "elist": []}


def test_dump_json_rejects_unknown_types(tmp_path):
    with pytest.raises(TypeError):
        dump_json({"x": {1, 2}}, str(tmp_path / "doc.json"))


def test_atomic_write_cleans_up_on_failure(tmp_path):
    path = tmp_path / "out.txt"
    path.write_text("original")
    with pytest.raises(RuntimeError):
        with atomic_write(str(path)) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert path.read_text() == "original"
    assert list(tmp_path.glob("*.tmp")) == []
    with atomic_write(str(path)) as fh:
        fh.write("replaced")
    assert path.read_text() == "replaced"
    assert list(tmp_path.glob("*.tmp")) == []


# ---------------------------------------------------------------------------
# Fit round trips.

def test_fit_json_round_trip_with_standardization(tmp_path):
    rng = np.random.default_rng(4)
    series = MatrixSeries(rng.standard_normal((40, 5, 4)) * 3.0 + 1.0)
    fitted = fit(series, EstimatorOptions(h0=2, k1=2, k2=1, standardize=True))
    path = tmp_path / "fit.json"
    write_fit_json(fitted, str(path))
    back = read_fit_json(str(path))
    assert json.loads(path.read_text())["model"] == "matrix"
    assert (back.p1, back.p2, back.k1, back.k2) == (5, 4, 2, 1)
    assert back.options.h0 == 2
    assert np.array_equal(back.row.q, fitted.row.q)
    assert np.array_equal(back.col.q, fitted.col.q)
    assert np.array_equal(back.row.spectrum, fitted.row.spectrum)
    assert np.array_equal(back.row.eigenvalues, fitted.row.eigenvalues)
    assert np.array_equal(back.standardization.means,
                          fitted.standardization.means)
    assert np.array_equal(back.standardization.scales,
                          fitted.standardization.scales)


def test_fit_json_round_trip_vector(tmp_path):
    rng = np.random.default_rng(6)
    series = MatrixSeries(rng.standard_normal((30, 4, 3)))
    fitted = fit_vec(series, h0=1, k=2)
    path = tmp_path / "fit_vec.json"
    write_fit_json(fitted, str(path))
    back = read_fit_json(str(path))
    assert json.loads(path.read_text())["model"] == "vector"
    assert (back.p1, back.p2, back.k, back.h0) == (4, 3, 2, 1)
    assert np.array_equal(back.q, fitted.q)
    assert np.array_equal(back.spectrum, fitted.spectrum)


def test_read_fit_json_rejects_malformed_documents(tmp_path):
    path = tmp_path / "fit.json"
    dump_json({"model": "matrix", "p1": 3}, str(path))
    with pytest.raises(SchemaError):
        read_fit_json(str(path))
    dump_json({"model": "vector", "q1": [[1.0]], "eigvals1": [1.0],
               "p1": 1, "p2": 1}, str(path))
    with pytest.raises(SchemaError):
        read_fit_json(str(path))


# ---------------------------------------------------------------------------
# Small report CSVs.

def test_matrix_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    m = rng.standard_normal((5, 3))
    path = tmp_path / "loadings.csv"
    write_matrix_csv(m, str(path), prefix="g")
    text = path.read_text().splitlines()
    assert text[0] == "row,g1,g2,g3"
    assert text[1].startswith("1,")
    back = read_matrix_csv(str(path))
    assert back.shape == (5, 3)
    assert np.allclose(back, m, rtol=1e-5, atol=1e-8)


def test_read_matrix_csv_rejects_other_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_matrix_csv(str(path))
    path.write_text("row,f1\n")
    with pytest.raises(SchemaError):
        read_matrix_csv(str(path))


def test_scree_csv_round_trip_with_blanks(tmp_path):
    path = tmp_path / "scree.csv"
    write_scree_csv(np.array([4.0, 1.0, 0.0]), str(path))
    doc = read_scree_csv(str(path))
    assert doc["index"].tolist() == [1, 2, 3]
    assert np.allclose(doc["eigenvalue"], [4.0, 1.0, 0.0])
    assert math.isclose(doc["log_eigenvalue"][0], math.log(4.0), rel_tol=1e-5)
    assert math.isnan(doc["log_eigenvalue"][2])
    assert math.isclose(doc["ratio"][0], 0.25, rel_tol=1e-5)
    assert doc["ratio"][1] == 0.0
    assert math.isnan(doc["ratio"][2])
    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_scree_csv(str(other))


# ---------------------------------------------------------------------------
# Study documents.

def _cell(label, p1, p2, T, mean, delta1=0.0, rank_freq_mat=None):
    params = {"p1": p1, "p2": p2, "k1": 1, "k2": 1, "T": T,
              "delta1": delta1, "delta2": 0.0, "h0": 1,
              "factor_model": "AR1Spec", "noise_scale": 1.0}
    return CellResult(label=label, params=params, replicates=4,
                      metrics={"d_row_space": MetricSummary(mean, 0.01, 4)},
                      rank_freq_mat=rank_freq_mat or {})


def test_study_csv_round_trip_and_paper_scale(tmp_path):
    report = StudyReport(master_seed=9, cells=[
        _cell("a", 4, 3, 40, 0.123456), _cell("b", 4, 3, 80, 0.05)])
    raw = tmp_path / "study.csv"
    scaled = tmp_path / "study10.csv"
    write_study_csv(report, str(raw))
    write_study_csv(report, str(scaled), paper_scale=True)
    rows = read_study_csv(str(raw))
    rows10 = read_study_csv(str(scaled))
    assert [r["label"] for r in rows] == ["a", "b"]
    assert rows[0]["metric"] == "d_row_space"
    assert math.isclose(rows[0]["mean"], 0.123456, rel_tol=1e-5)
    assert math.isclose(rows10[0]["mean"], 1.23456, rel_tol=1e-5)
    assert math.isclose(rows10[0]["sd"], 0.1, rel_tol=1e-5)
    assert rows[0]["p1"] == "4"
    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_study_csv(str(other))


def test_study_table_shared_sample_sizes(tmp_path):
    report = StudyReport(master_seed=0, cells=[
        _cell("a40", 4, 3, 40, 0.2), _cell("a80", 4, 3, 80, 0.1),
        _cell("b40", 4, 3, 40, 0.4, delta1=0.5),
        _cell("b80", 4, 3, 80, 0.3, delta1=0.5)])
    path = tmp_path / "table.csv"
    write_study_table_csv(report, str(path))
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["delta1", "delta2", "p1", "p2",
                      "d_row_space@T=40", "d_row_space@T=80"]
    rows = read_study_table_csv(str(path))
    assert len(rows) == 2
    assert rows[0]["delta1"] == 0.0 and rows[1]["delta1"] == 0.5
    assert math.isclose(rows[1]["d_row_space@T=40"], 0.4, rel_tol=1e-5)
    scaled = tmp_path / "table10.csv"
    write_study_table_csv(report, str(scaled), paper_scale=True)
    rows10 = read_study_table_csv(str(scaled))
    assert math.isclose(rows10[1]["d_row_space@T=40"], 4.0, rel_tol=1e-5)


def test_study_table_ordinal_sample_sizes(tmp_path):
    report = StudyReport(master_seed=0, cells=[
        _cell("a", 4, 3, 40, 0.2), _cell("b", 4, 3, 80, 0.1),
        _cell("c", 6, 3, 60, 0.4, delta1=0.5)])
    path = tmp_path / "table.csv"
    write_study_table_csv(report, str(path))
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["delta1", "delta2", "p1", "p2", "T1", "T2",
                      "d_row_space@T1", "d_row_space@T2"]
    rows = read_study_table_csv(str(path))
    assert rows[0]["T1"] == 40 and rows[0]["T2"] == 80
    assert rows[1]["T1"] == 60 and rows[1]["T2"] is None
    assert math.isclose(rows[1]["d_row_space@T1"], 0.4, rel_tol=1e-5)
    assert rows[1]["d_row_space@T2"] is None


def test_rank_freq_csv_round_trip(tmp_path):
    cell = _cell("a", 4, 3, 40, 0.2,
                 rank_freq_mat={(1, 1): 0.75, (2, 1): 0.25})
    vec_cell = CellResult(label="v", params=cell.params, replicates=4,
                          metrics={}, rank_freq_vec={1: 0.5, 2: 0.5})
    report = StudyReport(master_seed=0, cells=[cell, vec_cell])
    path = tmp_path / "rank_freq.csv"
    write_rank_freq_csv(report, str(path))
    rows = read_rank_freq_csv(str(path))
    assert rows[0] == {"label": "a", "route": "matrix",
                       "k1_hat": 1, "k2_hat": 1, "freq": 0.75}
    assert rows[2] == {"label": "v", "route": "vector",
                       "k1_hat": 1, "k2_hat": None, "freq": 0.5}
    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_rank_freq_csv(str(other))


def test_study_json_structure(tmp_path):
    cells = [StudyCell(config=SimConfig(p1=4, p2=3, k1=1, k2=1, T=40),
                       metrics=("d_row_space", "ranks_mat"),
                       replicates=3, label="tiny")]
    report = run_study(cells, master_seed=11)
    path = tmp_path / "study.json"
    write_study_json(report, str(path))
    doc = json.loads(path.read_text())
    assert doc["master_seed"] == 11
    cell = doc["cells"][0]
    assert cell["label"] == "tiny"
    assert cell["params"]["factor_model"] == "AR1Spec"
    assert cell["metrics"]["d_row_space"]["n"] == 3
    freqs = cell["rank_freq_mat"]
    assert math.isclose(sum(f["freq"] for f in freqs), 1.0, rel_tol=1e-12)
    assert all(set(f) == {"k1", "k2", "freq"} for f in freqs)


# ---------------------------------------------------------------------------
# Validation documents.

def test_validation_json_and_csv_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    series = MatrixSeries(rng.standard_normal((24, 3, 3)))
    report = kfold_cv(series, 3, [ModelSpec("matrix", k1=0, k2=0),
                                  ModelSpec("matrix", k1=1, k2=1)])
    jpath = tmp_path / "validation.json"
    cpath = tmp_path / "validation.csv"
    write_validation_json(report, str(jpath))
    write_validation_csv(report, str(cpath))
    doc = json.loads(jpath.read_text())
    assert doc["method"] == "kfold"
    assert doc["detail"] == {"folds": 3, "T": 24}
    assert [r["model"] for r in doc["rows"]] == ["matrix(0,0)", "matrix(1,1)"]
    assert doc["rows"][0]["rss_over_sst"] == 1.0
    rows = read_validation_csv(str(cpath))
    assert rows[0]["model"] == "matrix(0,0)"
    assert rows[0]["rss_over_sst"] == 1.0
    assert math.isclose(rows[1]["rss"], report.rows[1].rss, rel_tol=1e-5)
    assert rows[1]["param_count"] == report.rows[1].param_count
    other = tmp_path / "other.csv"
    other.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_validation_csv(str(other))


def test_validation_row_jsonable_fields(tmp_path):
    report = ValidationReport(
        method="rolling", h0=2, standardized=True,
        rows=[ValidationRow(model="vector(3)", rss=1.5, sst=6.0,
                            factor_count=3, param_count=36)],
        detail={"windows": 4, "T": 60, "min_train": 12})
    path = tmp_path / "validation.json"
    write_validation_json(report, str(path))
    doc = json.loads(path.read_text())
    assert doc["standardized"] is True
    assert doc["rows"][0] == {"model": "vector(3)", "rss": 1.5, "sst": 6.0,
                              "rss_over_sst": 0.25, "factor_count": 3,
                              "param_count": 36}


# ---------------------------------------------------------------------------
# Simulation config documents and study grids.

def test_simconfig_round_trip_ar_grid(tmp_path):
    cfg = SimConfig(p1=6, p2=5, k1=2, k2=1, T=90, delta1=0.25, delta2=0.5,
                    factors=AR1Spec(phi=DEFAULT_AR_GRID),
                    noise=KroneckerNoise(scale=0.5, off_rows=0.3),
                    burn_in=50, seed=(7, 3))
    path = tmp_path / "config.json"
    dump_json(simconfig_to_jsonable(cfg), str(path))
    back = simconfig_from_jsonable(json.loads(path.read_text()))
    assert (back.p1, back.p2, back.k1, back.k2, back.T) == (6, 5, 2, 1, 90)
    assert (back.delta1, back.delta2) == (0.25, 0.5)
    assert isinstance(back.factors, AR1Spec)
    assert np.array_equal(back.factors.phi, DEFAULT_AR_GRID)
    assert back.noise == cfg.noise
    assert back.burn_in == 50
    assert back.seed == (7, 3)


def test_simconfig_round_trip_ma2():
    cfg = SimConfig(p1=4, p2=3, k1=1, k2=1, T=50,
                    factors=MA2Spec(theta1=0.1, theta2=0.8), seed=5)
    back = simconfig_from_jsonable(simconfig_to_jsonable(cfg))
    assert isinstance(back.factors, MA2Spec)
    assert (back.factors.theta1, back.factors.theta2) == (0.1, 0.8)
    assert back.seed == 5


def test_simconfig_from_jsonable_rejects_malformed():
    with pytest.raises(SchemaError):
        simconfig_from_jsonable({"p2": 3, "k1": 1, "k2": 1, "T": 50})
    with pytest.raises(SchemaError):
        simconfig_from_jsonable({"p1": 4, "p2": 3, "k1": 1, "k2": 1, "T": 50,
                                 "factors": "ar1"})
    with pytest.raises(SchemaError):
        simconfig_from_jsonable({"p1": 4, "p2": 3, "k1": 1, "k2": 1, "T": 50,
                                 "factors": {"model": "arma"}})


def test_parse_study_grid_enumerates_cartesian_product():
    doc = {"p1": [4, 6], "p2": 3, "k1": 1, "k2": 1, "T": [30, 40],
           "delta1": 0.0, "delta2": 0.0, "h0": [1, 2],
           "metrics": ["d_row_space"], "replicates": 5, "seed": 99}
    cells, seed = parse_study_grid(doc)
    assert seed == 99
    assert len(cells) == 8
    assert [c.label for c in cells] == [f"cell{i:03d}" for i in range(8)]
    combos = [(c.config.p1, c.config.T, c.h0) for c in cells]
    assert combos == [(4, 30, 1), (4, 30, 2), (4, 40, 1), (4, 40, 2),
                      (6, 30, 1), (6, 30, 2), (6, 40, 1), (6, 40, 2)]
    assert all(c.metrics == ("d_row_space",) for c in cells)
    assert all(c.replicates == 5 for c in cells)


def test_parse_study_grid_defaults_and_extras():
    doc = {"p1": 4, "p2": 3, "k1": 1, "k2": 1, "T": 30,
           "delta1": 0.0, "delta2": 0.0,
           "noise": {"scale": 0.5}, "factors": {"model": "ma2"}}
    cells, seed = parse_study_grid(doc)
    assert seed == 0
    assert len(cells) == 1
    cell = cells[0]
    assert cell.h0 == 1
    assert cell.metrics == ("d_row_space", "d_col_space")
    assert cell.replicates == 200
    assert cell.config.noise.scale == 0.5
    assert cell.config.noise.off_rows == 0.2
    assert isinstance(cell.config.factors, MA2Spec)


def test_parse_study_grid_rejects_bad_documents():
    base = {"p2": 3, "k1": 1, "k2": 1, "T": 30, "delta1": 0.0, "delta2": 0.0}
    with pytest.raises(SchemaError):
        parse_study_grid(base)
    with pytest.raises(SchemaError):
        parse_study_grid("not a dict")
    with pytest.raises(SchemaError):
        parse_study_grid({**base, "p1": 4, "metrics": []})
    with pytest.raises(SchemaError):
        parse_study_grid({**base, "p1": 4, "metrics": "d_row_space"})
