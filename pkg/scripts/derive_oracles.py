"""Print the reference values frozen into the test suite.

Closed forms are evaluated in double precision and cross-checked against the
independent sample-path oracle in tests/oracles.py.
"""
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import conditional_interarrival_quad, mc_paoi, prrt_service_series  # noqa: E402


def closed(disc, lam, mu, a):
    q = math.exp(-lam * mu)
    if disc == "PR":
        return 1 / (lam * q * (1 - a)) + mu
    if disc == "PRRT":
        return (1 - q) / (lam * q * (1 - a)) + 1 / lam + mu / (1 - a * q)
    return (mu + a / lam) / (1 - a) + 1 / lam + mu


def main():
    for lam in (0.5, 0.1):
        for disc in ("PR", "PRRT", "NPR"):
            exact = closed(disc, lam, 1.0, 0.1)
            m, se = mc_paoi(disc, lam, 1.0, 0.1, n_arrivals=4_000_000, seed=11)
            print(f"{disc:5s} lambda={lam}: closed={exact:.9f}  oracle={m:.5f} +/- {se:.5f}  z={(m - exact) / se:+.2f}")
    print(f"E[X|X<1] at lambda=1: {conditional_interarrival_quad(1.0, 1.0):.9f}")
    print(f"PR-RT E[S] (0.5, 1, 0.1): {prrt_service_series(0.5, 1.0, 0.1):.12f}")
    print(f"beta(0.5, 1) = {-math.expm1(-0.5):.9f}, beta(0.1, 1) = {-math.expm1(-0.1):.9f}")


if __name__ == "__main__":
    main()
