# Copyright 2026 The SteerKit Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent cumulative-product oracle for the noise schedules.

Evaluated in 50-digit arithmetic with mpmath. The output is frozen into
tests/golden/alpha_bar_T50.json; rerun this script to regenerate it.
"""
import json
import sys

import mpmath as mp

mp.mp.dps = 50
MAX_BETA = mp.mpf("0.999")


def linear_beta(T):
    scale = mp.mpf(1000) / T
    lo, hi = mp.mpf("1e-4") * scale, mp.mpf("0.02") * scale
    betas = [min(lo + (hi - lo) * i / (T - 1), MAX_BETA) for i in range(T)]
    out, prod = [mp.mpf(1)], mp.mpf(1)
    for b in betas:
        prod *= 1 - b
        out.append(prod)
    return out


def cosine(T, s=mp.mpf("0.008")):
    def f(t):
        return mp.cos((mp.mpf(t) / T + s) / (1 + s) * mp.pi / 2) ** 2

    out, prod = [mp.mpf(1)], mp.mpf(1)
    for t in range(1, T + 1):
        prod *= 1 - min(1 - f(t) / f(t - 1), MAX_BETA)
        out.append(prod)
    return out


def main():
    T = 50
    doc = {
        "T": T,
        "linear_beta": [float(v) for v in linear_beta(T)],
        "cosine": [float(v) for v in cosine(T)],
        "cosine_T2": [float(v) for v in cosine(2)],
    }
    json.dump(doc, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
