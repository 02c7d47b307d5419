"""Acceptance criteria 1-10, each printing one PASS/FAIL line.

Criteria 1 and 10 run the full command-line pipeline (synthetic data, then
both table grids) and take several minutes on one core.
"""

import time

import numpy as np
import pytest

from glyforecast.baseline import BASELINE, _TABLE1_ROWS, _TABLE2_ROWS
from glyforecast.cli import main
from glyforecast.evaluation import DEFAULT_GRID_STRIDE, ExperimentConfig, profile_cell, walk_forward
from glyforecast.forecasters import ForecasterSpec, Method, fit, predict, tree_predictions
from glyforecast.forecasters.arima import ArimaHyper, fit_arima
from glyforecast.forecasters.svr import SVRHyper, fit_svr, max_kkt_violation, rbf_kernel, standardize
from glyforecast.report import read_records
from glyforecast.series import Window, lag_pairs
from glyforecast.synth import generate_ar, generate_patient, patient_spec

from conftest import make_series, record_verdict

GRID_BUDGET_S = 15 * 60


@pytest.fixture(scope="module")
def grid_runs(tmp_path_factory):
    """Two synth->grid pipelines: ``--jobs 1`` (timed) and ``--jobs 8``."""
    root = tmp_path_factory.mktemp("pipeline")
    out = {}
    for jobs in (1, 8):
        base = root / f"jobs{jobs}"
        assert main(["synth", "--patients", "5", "--days", "14", "--seed", "2024",
                     "--out-dir", str(base / "data")]) == 0
        inputs = [str(p) for p in sorted((base / "data").glob("*.csv"))]
        t0 = time.perf_counter()
        for table in (1, 2):
            code = main(["grid", "--input", *inputs, "--table", str(table), "--seed", "2024",
                         "--jobs", str(jobs), "--out", str(base / f"table{table}")])
            assert code == 0
        out[jobs] = (base, time.perf_counter() - t0)
    return out


def test_criterion_01_structure_and_runtime(grid_runs):
    base, elapsed = grid_runs[1]
    t1 = read_records(base / "table1" / "report.csv")
    t2 = read_records(base / "table2" / "report.csv")
    shape1 = {(r.method, r.psw_hours, r.ph_minutes) for r in t1} == set(BASELINE.table1)
    shape2 = {(r.method, r.sf_minutes, r.ph_minutes) for r in t2} == set(BASELINE.table2)
    text = (base / "table1" / "report.txt").read_text()
    order = text.index("\nARIMA") < text.index("\nRF") < text.index("\nSVM")
    ok = len(t1) == 60 and len(t2) == 36 and shape1 and shape2 and order and elapsed <= GRID_BUDGET_S
    strides = ", ".join(f"{m.label} {DEFAULT_GRID_STRIDE[m]}" for m in (Method.ARIMA, Method.RF, Method.SVR))
    assert record_verdict(1, ok, f"{len(t1)} + {len(t2)} cells, both tables in {elapsed:.0f} s on --jobs 1 "
                                 f"(budget {GRID_BUDGET_S} s; refit strides {strides})")


def test_criterion_02_baseline_fidelity():
    ok = True
    for rows, table in ((_TABLE1_ROWS, 1), (_TABLE2_ROWS, 2)):
        for (method, row), vals in rows.items():
            for ph, v in zip((15, 30, 45, 60), vals):
                ok &= BASELINE.lookup(table, method, row, ph) == v
    anchors = [BASELINE.lookup(2, "rf", 5, 15) == 10.15, BASELINE.lookup(2, "rf", 15, 15) == 15.43,
               BASELINE.lookup(1, "arima", 6, 15) == 11.53, BASELINE.lookup(1, "svm", 36, 60) == 33.90]
    ok &= all(anchors) and len(BASELINE.table1) == 60 and len(BASELINE.table2) == 36
    assert record_verdict(2, ok, "60 + 36 published values round-trip exactly, anchors 10.15/15.43/11.53/33.90")


def test_criterion_03_arima_oracle():
    passed, details = 0, []
    for seed in range(10):
        s = generate_ar([0.6, 0.3], 5.0, 4320, seed=seed, mean=120.0)
        coef = fit_arima(s.values, ArimaHyper(order=(2, 0, 0))).ar_coeffs
        cfg = ExperimentConfig("arima", psw_hours=36, sf_minutes=5, ph_minutes=5, refit_stride=48,
                               custom_grid=True)
        err = walk_forward(s, cfg).rmse
        ok = bool(np.all(np.abs(coef - [0.6, 0.3]) <= 0.1)) and abs(err - 5.0) <= 0.5
        passed += ok
        details.append(f"{err:.2f}")
    assert record_verdict(3, passed >= 8, f"{passed}/10 seeds recover AR(2) within 0.1 and 1-step RMSE "
                                          f"within 10% of 5 (RMSEs {', '.join(details)})")


def test_criterion_04_svr_optimality():
    worst_kkt, worst_eq, box = 0.0, 0.0, True
    hyper = SVRHyper()
    for i in range(10):
        v = generate_patient(patient_spec(i, 7, days=2)).values
        X, y = lag_pairs(v[i * 20:], 4, 3)
        X, y = X[:200], y[:200]
        model = fit_svr(X, y, hyper)
        Z, _, _ = standardize(X)
        K = rbf_kernel(Z, Z, model.gamma)
        worst_kkt = max(worst_kkt, max_kkt_violation(K, y, model.alpha, model.alpha_star, hyper.C, hyper.epsilon))
        worst_eq = max(worst_eq, abs(float(np.sum(model.alpha - model.alpha_star))))
        box &= bool(np.all((model.alpha >= 0) & (model.alpha <= hyper.C)) and
                    np.all((model.alpha_star >= 0) & (model.alpha_star <= hyper.C)))
    ok = worst_kkt <= 1e-3 and worst_eq <= 1e-6 and box
    assert record_verdict(4, ok, f"10 runs on 200 pairs: max KKT violation {worst_kkt:.2e}, "
                                 f"max |sum(a - a*)| {worst_eq:.1e}, box constraints hold={box}")


def test_criterion_05_forest_identity():
    s = generate_patient(patient_spec(0, 5, days=3))
    rng = np.random.default_rng(5)
    worst = 0.0
    for end in rng.integers(72, len(s), size=100):
        w = Window.from_series(s, 6, end=int(end))
        model = fit(ForecasterSpec("rf", seed=int(end)), w, 3)
        agg, mean = predict(model, 3), float(np.mean(tree_predictions(model)))
        worst = max(worst, abs(agg - mean) / abs(mean))
    assert record_verdict(5, worst <= 1e-12, f"100 windows, max relative gap {worst:.1e} between forest "
                                             f"output and mean of per-tree outputs")


@pytest.fixture(scope="module")
def ten_patients():
    pats = [generate_patient(patient_spec(i, 11)) for i in range(10)]
    table = {}
    for method in (Method.ARIMA, Method.RF):
        for ph in (15, 30, 45, 60):
            cache = [dict() for _ in pats]
            res = [walk_forward(p, ExperimentConfig(method, 6, 5, ph, refit_stride=DEFAULT_GRID_STRIDE[method]),
                                fit_cache=c) for p, c in zip(pats, cache)]
            table[(method, ph)] = (np.mean([r.rmse for r in res]), np.mean([r.persistence_rmse for r in res]))
    return table


def test_criterion_06_horizon_trend(ten_patients):
    ok, parts = True, []
    for method in (Method.ARIMA, Method.RF):
        vals = [ten_patients[(method, ph)][0] for ph in (15, 30, 45, 60)]
        tol = 0.05 * vals[0]
        ok &= all(b >= a - tol for a, b in zip(vals, vals[1:]))
        parts.append(f"{method.label} " + "/".join(f"{v:.2f}" for v in vals))
    assert record_verdict(6, ok, "mean RMSE over 10 patients nondecreasing in PH 15..60 (5% tol): "
                          + "; ".join(parts))


def test_criterion_07_persistence_dominance(ten_patients):
    arima, persist = ten_patients[(Method.ARIMA, 15)]
    rf, _ = ten_patients[(Method.RF, 15)]
    ok = arima <= persist and rf <= persist
    assert record_verdict(7, ok, f"PSW 6 h, SF 5, PH 15 over 10 patients: ARIMA {arima:.2f}, RF {rf:.2f}, "
                                 f"persistence {persist:.2f}")


def test_criterion_08_device_budget():
    s = generate_patient(patient_spec(0, 3, days=2))
    cost = profile_cell(ExperimentConfig("rf", 6, 5, 15, refit_stride=1), s)
    ok = cost.max_slide_ms <= 250 and cost.window_values == 72 and cost.memory_bytes == 72 * 8
    assert record_verdict(8, ok, f"RF at 72 values: worst fit+predict slide {cost.max_slide_ms:.1f} ms "
                                 f"(mean fit {cost.mean_fit_ms:.1f} ms), window {cost.window_values} values")


def test_criterion_09_counting():
    ok = True
    for n in range(1, 65):
        vals = np.arange(n, dtype=float)
        for m in range(1, 65):
            for h in range(1, 65):
                brute = sum(1 for i in range(n) if i + m + h - 1 < n)
                ok &= len(lag_pairs(vals, m, h)[1]) == brute
    checked = 0
    for psw, ph in ((1, 15), (3, 60)):
        cfg = ExperimentConfig("persistence", psw_hours=psw, ph_minutes=ph, custom_grid=True)
        w, h = cfg.capacity, cfg.horizon[0]
        for n in range(1, 501):
            brute = sum(1 for end in range(w, n + 1) if end - 1 + h < n)
            if brute == 0:
                ok &= n - w - h + 1 <= 0
                continue
            res = walk_forward(make_series(np.full(n, 100.0) + np.arange(n) % 7), cfg, min_predictions=1)
            ok &= res.n_predictions == brute == n - w - h + 1
            checked += 1
    assert record_verdict(9, ok, f"lag pairs for all n, m, h <= 64 and {checked} walk-forward runs "
                                 f"(N <= 500) match brute-force replay exactly")


def test_criterion_10_end_to_end_determinism(grid_runs):
    (b1, _), (b8, _) = grid_runs[1], grid_runs[8]
    same = True
    for table in ("table1", "table2"):
        for name in ("report.csv", "per_patient.csv", "report.txt", "deltas.txt"):
            same &= (b1 / table / name).read_bytes() == (b8 / table / name).read_bytes()
    data_same = all((b1 / "data" / p.name).read_bytes() == p.read_bytes() for p in (b8 / "data").glob("*.csv"))
    assert record_verdict(10, same and data_same, "synth -> grid with --jobs 1 and --jobs 8 gives byte-identical "
                                                  "report.csv, per_patient.csv and text tables for both tables")
