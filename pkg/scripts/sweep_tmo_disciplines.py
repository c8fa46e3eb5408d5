"""lambda_F sweep of the trunked scenario for each first-responder discipline.

Writes one CSV (same columns as ``tetra-aoi sweep``) with a row per
(discipline, lambda_f, replication).
"""
import argparse

import numpy as np

from tetra_aoi.cli import RUN_COLUMNS, result_row, write_csv
from tetra_aoi.scenario import ScenarioConfig, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", default="0.05:1.0:0.05")
    ap.add_argument("--disciplines", default="FCFS,NPR,PR,PRRT")
    ap.add_argument("--replications", type=int, default=2)
    ap.add_argument("--horizon", type=float, default=3600.0)
    ap.add_argument("--out", default="tmo_disciplines.csv")
    args = ap.parse_args()

    lo, hi, step = (float(x) for x in args.lambdas.split(":"))
    lambdas = np.round(np.arange(lo, hi + step / 2, step), 10)
    rows = []
    for disc in args.disciplines.split(","):
        for lam in lambdas:
            cfg = ScenarioConfig(lambda_f=float(lam), fr_discipline=disc, horizon_s=args.horizon)
            for r in range(args.replications):
                res = run_scenario(cfg, replication=r)
                rows.append(result_row(cfg, res, param="fr_discipline", value=disc, replication=r))
                print(f"{disc:5s} lambda={lam:.2f} rep={r} paoi={res.mean_paoi:.3f} plr={res.plr:.3f}")
    write_csv(rows, RUN_COLUMNS, args.out)


if __name__ == "__main__":
    main()
