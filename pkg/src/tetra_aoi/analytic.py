"""Closed-form mean peak AoI for the single-buffer PR, PR-RT and NPR schemes.

All three share the decomposition ``E[A] = E[T] + E[W] + E[S]`` with
``E[Y] = E[T] + E[W]`` the mean interdeparture time of successful updates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Discipline, ModelParams, ParameterError


@dataclass(frozen=True)
class AnalyticBreakdown:
    beta: float
    e_S: float
    e_W: float
    e_T: float
    e_Y: float
    paoi: float


def _check(lambda_F, mu):
    if not (lambda_F > 0 and mu > 0):
        raise ParameterError("lambda_F and mu must be > 0")


def _survival(lambda_F, mu):
    # 1 - beta, evaluated without cancellation
    return math.exp(-mu * lambda_F)


def preemption_prob(lambda_F: float, mu: float) -> float:
    """Probability that a fresh arrival lands inside a service of length mu."""
    _check(lambda_F, mu)
    return -math.expm1(-mu * lambda_F)


def conditional_interarrival(lambda_F: float, mu: float) -> float:
    """E[X | X < mu] for X ~ Exp(lambda_F)."""
    _check(lambda_F, mu)
    x = mu * lambda_F
    if x < 1e-4:
        # series of 1/x - 1/(e^x - 1), exact form loses digits here
        return mu * (0.5 - x / 12.0 + x**3 / 720.0)
    beta = -math.expm1(-x)
    return 1.0 / lambda_F + mu * (1.0 - 1.0 / beta)


def paoi_pr(params: ModelParams) -> AnalyticBreakdown:
    lam, mu, a = params.lambda_F, params.mu, params.alpha
    q = _survival(lam, mu)
    beta = -math.expm1(-mu * lam)
    e_W = 1.0 / lam
    e_T = (beta + a - beta * a) / (lam * q * (1.0 - a))
    e_Y = e_T + e_W
    return AnalyticBreakdown(beta, mu, e_W, e_T, e_Y, e_Y + mu)


def prrt_service_terms(lambda_F: float, mu: float, alpha: float):
    """(E_s, p_s) in closed form: mean delivered-service mass and its probability.

    E_s sums (k+1)*mu over k failed rounds, each surviving preemption; p_s is
    the probability of eventually delivering without being preempted.
    """
    q = _survival(lambda_F, mu)
    d = 1.0 - alpha * q
    E_s = q * (1.0 - alpha) * mu / (d * d)
    p_s = q * (1.0 - alpha) / d
    return E_s, p_s


def paoi_prrt(params: ModelParams) -> AnalyticBreakdown:
    lam, mu, a = params.lambda_F, params.mu, params.alpha
    q = _survival(lam, mu)
    beta = -math.expm1(-mu * lam)
    e_S = mu / (1.0 - a * q)
    E_s, p_s = prrt_service_terms(lam, mu, a)
    if not math.isclose(e_S, E_s / p_s, rel_tol=1e-12):
        raise ArithmeticError("PR-RT service-time identity violated")
    e_W = 1.0 / lam
    # rounds until an unpreempted success, each lasting beta/lambda on average
    e_T = beta / (lam * q * (1.0 - a))
    e_Y = e_T + e_W
    return AnalyticBreakdown(beta, e_S, e_W, e_T, e_Y, e_Y + e_S)


def paoi_npr(params: ModelParams) -> AnalyticBreakdown:
    lam, mu, a = params.lambda_F, params.mu, params.alpha
    beta = -math.expm1(-mu * lam)
    e_W = 1.0 / lam
    e_T = (mu + a / lam) / (1.0 - a)
    e_Y = e_T + e_W
    return AnalyticBreakdown(beta, mu, e_W, e_T, e_Y, e_Y + mu)


_FORMULAS = {
    Discipline.PR: paoi_pr,
    Discipline.PRRT: paoi_prrt,
    Discipline.NPR: paoi_npr,
}


def paoi(params: ModelParams) -> AnalyticBreakdown:
    """Dispatch on ``params.discipline``; FCFS and REPLACE2 have no closed form here."""
    try:
        fn = _FORMULAS[params.discipline]
    except KeyError:
        raise ParameterError(f"no closed form for {params.discipline.value}") from None
    return fn(params)
