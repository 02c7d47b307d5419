"""Fit and predict cost per slide at the window sizes of a constrained device (24 and 72 values).

Usage: python scripts/device_cost.py [--days 2] [--stride 1]
"""

import argparse

from glyforecast.evaluation import ExperimentConfig, profile_cell
from glyforecast.forecasters import Method
from glyforecast.synth import generate_patient, patient_spec


def main():
    p = argparse.ArgumentParser(formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--days", type=int, default=2)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    series = generate_patient(patient_spec(0, args.seed, days=args.days))
    print(f"{'method':<7}{'SF':>4}{'values':>8}{'bytes':>7}{'params':>8}"
          f"{'fit ms':>9}{'p95 fit':>9}{'pred ms':>9}{'max slide':>11}")
    for method in (Method.ARIMA, Method.RF, Method.SVR):
        for sf in (15, 5):
            c = profile_cell(ExperimentConfig(method, 6, sf, 15, refit_stride=args.stride), series)
            print(f"{method.label:<7}{sf:>4}{c.window_values:>8}{c.memory_bytes:>7}{c.param_count:>8}"
                  f"{c.mean_fit_ms:>9.2f}{c.p95_fit_ms:>9.2f}{c.mean_predict_ms:>9.3f}{c.max_slide_ms:>11.2f}")


if __name__ == "__main__":
    main()
