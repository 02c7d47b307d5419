"""Mean RMSE against prediction horizon on synthetic patients, with persistence as reference.

Usage: python scripts/horizon_sweep.py [--patients 10] [--psw 6] [--sf 5] [--seed 11]
"""

import argparse

import numpy as np

from glyforecast.evaluation import DEFAULT_GRID_STRIDE, PH_GRID, ExperimentConfig, walk_forward
from glyforecast.forecasters import Method
from glyforecast.synth import generate_patient, patient_spec


def sweep(patients, psw, sf, methods):
    rows = {}
    caches = [dict() for _ in patients]
    for method in methods:
        for ph in PH_GRID:
            cfg = ExperimentConfig(method, psw, sf, ph, refit_stride=DEFAULT_GRID_STRIDE[method])
            res = [walk_forward(p, cfg, fit_cache=c) for p, c in zip(patients, caches)]
            rows[(method.label, ph)] = float(np.mean([r.rmse for r in res]))
            rows[("PERSIST", ph)] = float(np.mean([r.persistence_rmse for r in res]))
    return rows


def main():
    p = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--patients", type=int, default=10)
    p.add_argument("--days", type=int, default=14)
    p.add_argument("--psw", type=float, default=6)
    p.add_argument("--sf", type=int, default=5)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--methods", default="arima,rf,svr")
    args = p.parse_args()
    pats = [generate_patient(patient_spec(i, args.seed, days=args.days)) for i in range(args.patients)]
    methods = [Method.parse(m) for m in args.methods.split(",")]
    rows = sweep(pats, args.psw, args.sf, methods)
    labels = [m.label for m in methods] + ["PERSIST"]
    print(f"{'method':<8}" + "".join(f"{'PH=' + str(ph):>9}" for ph in PH_GRID))
    for label in labels:
        print(f"{label:<8}" + "".join(f"{rows[(label, ph)]:>9.2f}" for ph in PH_GRID))


if __name__ == "__main__":
    main()
