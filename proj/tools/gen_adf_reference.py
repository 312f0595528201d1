"""Freeze ADF reference values from statsmodels into tests/data/adf_reference.json."""

import argparse
import json

import numpy as np
from statsmodels.tsa.stattools import adfuller


def make_series(rng, i):
    n = int(rng.integers(60, 400))
    kind = i % 5
    e = rng.standard_normal(n)
    if kind == 0:
        return "white_noise", e
    if kind == 1:
        return "random_walk", np.cumsum(e)
    if kind == 2:
        phi = rng.uniform(0.3, 0.95)
        y = np.zeros(n)
        for t in range(1, n):
            y[t] = phi * y[t - 1] + e[t]
        return "ar1", y
    if kind == 3:
        t = np.arange(n)
        return "sinusoid", 3.0 * np.sin(2 * np.pi * t / rng.integers(5, 40)) + 0.5 * e
    return "drift_walk", np.cumsum(e + 0.1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/adf_reference.json")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = []
    for i in range(args.count):
        kind, y = make_series(rng, i)
        stat, p, lag, nobs, _, _ = adfuller(y, regression="c", autolag="AIC")
        cases.append(
            {
                "kind": kind,
                "values": [float(v) for v in y],
                "statistic": float(stat),
                "p_value": float(p),
                "lag_used": int(lag),
                "nobs": int(nobs),
                "stationary": bool(p < 0.001),
            }
        )
    with open(args.out, "w") as f:
        json.dump({"alpha": 0.001, "cases": cases}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
