"""Command-line runner: ``validate`` (analytic vs Monte Carlo), ``sweep`` and ``run``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import __version__
from .abstract_queue import simulate_abstract
from .analytic import paoi
from .core import Discipline, ModelParams, ParameterError
from .des import EventBudgetExceeded, StarvationError
from .metrics import DROP_CAUSES
from .scenario import ConfigError, ScenarioConfig, load_config, run_scenario, set_path

CSV_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

VALIDATE_LAMBDAS = (0.06, 0.1, 0.3, 0.5, 0.9)
VALIDATE_ALPHAS = (0.1, 0.4)
VALIDATE_DISCIPLINES = ("PR", "PRRT", "NPR")

RUN_COLUMNS = [
    "csv_version", "param", "value", "replication", "seed", "mode", "setting",
    "fr_discipline", "gw_discipline", "n_c", "n_f", "lambda_f", "alpha_ch",
    "mean_paoi", "ci_half", "se", "n_samples", "flagged", "generated", "delivered",
    "in_flight", "plr", *[f"plr_{c}" for c in DROP_CAUSES], "collision_rate",
    "agg_failure_rate", "dmo_collision_rate", "mean_delay_s", "feedback_mean_paoi", "stale",
]
VALIDATE_COLUMNS = [
    "csv_version", "discipline", "lambda_f", "mu", "alpha", "analytic", "simulated",
    "ci_half", "se", "z", "rel_err", "n_samples", "status",
]


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.9g}"
    if x is None:
        return ""
    return str(x)


def write_csv(rows: list[dict], columns: list[str], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# validate

@dataclass(frozen=True)
class ValidationPoint:
    discipline: str
    lambda_f: float
    mu: float
    alpha: float


def validation_grid(lambdas=VALIDATE_LAMBDAS, alphas=VALIDATE_ALPHAS, mu=1.0,
                    disciplines=VALIDATE_DISCIPLINES) -> list[ValidationPoint]:
    return [ValidationPoint(d, lam, mu, a) for a in alphas for d in disciplines for lam in lambdas]


def validate_point(pt: ValidationPoint, deliveries: int, seed: int, sigmas: float = 3.0) -> dict:
    params = ModelParams(pt.lambda_f, pt.mu, pt.alpha, pt.discipline)
    exact = paoi(params).paoi
    res = simulate_abstract(params, deliveries, seed)
    se = res.se
    z = (res.mean_paoi - exact) / se if se > 0 and math.isfinite(se) else math.nan
    rel = abs(res.mean_paoi - exact) / exact if math.isfinite(res.mean_paoi) else math.nan
    if res.flagged:
        status = "WARN"
    elif abs(res.mean_paoi - exact) <= sigmas * se:
        status = "PASS"
    else:
        status = "FAIL"
    return {"csv_version": CSV_VERSION, "discipline": pt.discipline, "lambda_f": pt.lambda_f,
            "mu": pt.mu, "alpha": pt.alpha, "analytic": exact, "simulated": res.mean_paoi,
            "ci_half": res.ci_half, "se": se, "z": z, "rel_err": rel, "n_samples": res.n_samples,
            "status": status}


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futures = [ex.submit(fn, *it) for it in items]
        return [f.result() for f in futures]


def validation_report(rows: list[dict]) -> str:
    lines = [f"{'disc':<5} {'lambda':>7} {'alpha':>6} {'analytic':>11} {'simulated':>11} "
             f"{'ci95':>9} {'z':>7} {'rel':>8}  status"]
    for r in rows:
        lines.append(f"{r['discipline']:<5} {r['lambda_f']:>7.3g} {r['alpha']:>6.3g} {r['analytic']:>11.6f} "
                     f"{r['simulated']:>11.6f} {r['ci_half']:>9.2g} {r['z']:>7.2f} {r['rel_err']:>8.2e}  {r['status']}")
    n_fail = sum(r["status"] == "FAIL" for r in rows)
    n_warn = sum(r["status"] == "WARN" for r in rows)
    verdict = "PASS" if n_fail == 0 else "FAIL"
    lines.append("note: the abstract FCFS baseline treats a failed transmission as a terminal loss (no retry)")
    lines.append(f"{verdict}: {len(rows) - n_fail - n_warn} pass, {n_fail} fail, {n_warn} wide-CI warnings")
    return "\n".join(lines) + "\n"


def cmd_validate(args) -> int:
    grid = validation_grid(args.lambdas, args.alphas, args.mu, args.disciplines)
    rows = _map(validate_point, [(pt, args.deliveries, args.seed) for pt in grid], args.jobs)
    if args.out:
        write_csv(rows, VALIDATE_COLUMNS, args.out)
    sys.stdout.write(validation_report(rows))
    return EXIT_FAIL if any(r["status"] == "FAIL" for r in rows) else EXIT_OK


# sweep / run

def result_row(cfg: ScenarioConfig, res, *, param="", value="", replication=0) -> dict:
    row = {"csv_version": CSV_VERSION, "param": param, "value": value, "replication": replication,
           "seed": cfg.seed, "mode": cfg.mode, "setting": cfg.effective_setting,
           "fr_discipline": res.extra["fr_discipline"], "gw_discipline": res.extra["gw_discipline"],
           "n_c": cfg.n_c, "n_f": cfg.n_f, "lambda_f": float(cfg.lambda_f), "alpha_ch": float(cfg.alpha_ch),
           "mean_paoi": res.mean_paoi, "ci_half": res.ci_half, "se": res.se, "n_samples": res.n_samples,
           "flagged": res.flagged, "generated": res.generated, "delivered": res.delivered,
           "in_flight": res.in_flight, "plr": res.plr}
    for c, v in res.plr_breakdown.items():
        row[f"plr_{c}"] = v
    for k in ("collision_rate", "agg_failure_rate", "dmo_collision_rate", "mean_delay_s",
              "feedback_mean_paoi", "stale"):
        row[k] = res.extra[k]
    return row


def _run_one(cfg: ScenarioConfig, param, value, replication, max_events):
    res = run_scenario(cfg, replication, max_events=max_events)
    return result_row(cfg, res, param=param, value=value, replication=replication)


def parse_values(text: str) -> list:
    """``0.1,0.2,0.5`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    if not text:
        raise ConfigError("values: empty sweep")
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError("values: range must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            v = tok
        if isinstance(v, float):
            if not math.isfinite(v):
                raise ConfigError(f"values: {tok} is not finite")
            if v.is_integer() and "." not in tok and "e" not in tok.lower():
                v = int(v)
        out.append(v)
    if not out:
        raise ConfigError("values: empty sweep")
    return out


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_sweep(args) -> int:
    base = _load(args)
    values = parse_values(args.values)
    if args.replications < 1:
        raise ConfigError("replications: must be >= 1")
    jobs = []
    for v in values:
        cfg = set_path(base, args.param, v)
        for r in range(args.replications):
            jobs.append((cfg, args.param, v, r, args.max_events))
    rows = _map(_run_one, jobs, args.jobs)
    text = write_csv(rows, RUN_COLUMNS, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def run_header(cfg: ScenarioConfig) -> str:
    fr, gw = cfg.disciplines
    head = f"mode={cfg.mode} n_c={cfg.n_c} n_f={cfg.n_f} lambda_f={cfg.lambda_f:g} alpha_ch={cfg.alpha_ch:g} seed={cfg.seed}"
    if cfg.mode == "DMO":
        head += f" setting={cfg.effective_setting} fr_discipline={fr.value} gw_discipline={gw.value}"
    else:
        head += f" fr_discipline={fr.value}"
    return head


def run_summary(res) -> str:
    lines = [f"mean PAoI     {res.mean_paoi:.6g} s +/- {res.ci_half:.3g} (95%, n={res.n_samples}"
             f"{', flagged' if res.flagged else ''})",
             f"updates       generated={res.generated} delivered={res.delivered} in_flight={res.in_flight}",
             f"PLR           {res.plr:.6g} " + " ".join(f"{c}={v:.4g}" for c, v in res.plr_breakdown.items()),
             f"access        collision_rate={res.extra['collision_rate']:.4g} "
             f"agg_failure_rate={res.extra['agg_failure_rate']:.4g}",
             f"delay         mean={res.extra['mean_delay_s']:.6g} s"]
    if res.extra["mode"] == "DMO":
        lines.append(f"direct mode   collision_rate={res.extra['dmo_collision_rate']:.4g}")
    else:
        lines.append(f"feedback      deliveries={res.extra['feedback_deliveries']} "
                     f"mean_paoi={res.extra['feedback_mean_paoi']:.6g} s")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    cfg = _load(args)
    if args.replications < 1:
        raise ConfigError("replications: must be >= 1")
    rows = []
    sys.stdout.write(run_header(cfg) + "\n")
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        for r in range(args.replications):
            res = run_scenario(cfg, r, trace=trace if r == 0 else None, max_events=args.max_events)
            rows.append(result_row(cfg, res, replication=r))
            if args.replications > 1:
                sys.stdout.write(f"-- replication {r}\n")
            sys.stdout.write(run_summary(res))
    finally:
        if trace is not None:
            trace.close()
    if args.out:
        write_csv(rows, RUN_COLUMNS, args.out)
    return EXIT_OK


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tetra-aoi", description="PAoI of TETRA SDS status updates")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="analytic mean PAoI vs abstract-queue Monte Carlo")
    v.add_argument("--deliveries", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--lambdas", type=_floats, default=list(VALIDATE_LAMBDAS))
    v.add_argument("--alphas", type=_floats, default=list(VALIDATE_ALPHAS))
    v.add_argument("--mu", type=float, default=1.0)
    v.add_argument("--disciplines", type=lambda s: [Discipline.parse(x).value for x in s.split(",")],
                   default=list(VALIDATE_DISCIPLINES))
    v.add_argument("--out")
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(func=cmd_validate)

    for name, func, help_ in (("sweep", cmd_sweep, "sweep one config key over values"),
                              ("run", cmd_run, "single scenario run")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config")
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--replications", type=int, default=1)
        s.add_argument("--max-events", type=int)
        s.set_defaults(func=func)
        if name == "sweep":
            s.add_argument("--param", default="lambda_f")
            s.add_argument("--values", required=True)
            s.add_argument("--jobs", type=int, default=1)
        else:
            s.add_argument("--trace", nargs="?", const="trace.log", default=None,
                           help="write one line per event to PATH (default trace.log)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (StarvationError, EventBudgetExceeded) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
