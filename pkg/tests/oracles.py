"""Independent reference computations used to freeze expected values.

Nothing here imports the package: these are direct sample-path constructions
and numerical integrals written from the model definitions alone.
"""
import math

import numpy as np
from scipy import integrate


def paoi_paths(discipline: str, lam: float, mu: float, alpha: float, n_arrivals: int, seed: int):
    """Generation and delivery times of the delivered updates, built without an event loop."""
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.exponential(1 / lam, n_arrivals))
    if discipline == "PR":
        nxt = np.append(t[1:], np.inf)
        ok = (nxt - t > mu) & (rng.random(n_arrivals) >= alpha)
        return t[ok], t[ok] + mu
    if discipline == "PRRT":
        gap = np.append(t[1:], np.inf) - t
        # rounds needed until the first channel success
        rounds = rng.geometric(1 - alpha, n_arrivals) if alpha > 0 else np.ones(n_arrivals, int)
        ok = rounds * mu < gap
        return t[ok], t[ok] + rounds[ok] * mu
    if discipline == "NPR":
        gens, deps = [], []
        u = rng.random(n_arrivals)
        free_at = -np.inf
        # vectorising NPR needs the busy horizon, so walk arrivals but skip busy ones in bulk
        i = 0
        while i < n_arrivals:
            if t[i] >= free_at:
                end = t[i] + mu
                if u[i] >= alpha:
                    gens.append(t[i])
                    deps.append(end)
                free_at = end
                i = int(np.searchsorted(t, end, side="left"))
            else:
                i += 1
        return np.array(gens), np.array(deps)
    raise ValueError(discipline)


def mc_paoi(discipline, lam, mu, alpha, n_arrivals=2_000_000, seed=1):
    g, d = paoi_paths(discipline, lam, mu, alpha, n_arrivals, seed)
    a = d[1:] - g[:-1]
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def conditional_interarrival_quad(lam, mu):
    num, _ = integrate.quad(lambda s: s * lam * math.exp(-lam * s), 0, mu)
    return num / (1 - math.exp(-lam * mu))


def prrt_service_series(lam, mu, alpha, terms=400):
    """E[S] of a delivered PR-RT update by summing over the number of failed rounds."""
    q = math.exp(-lam * mu)
    num = den = 0.0
    for k in range(terms):
        # k failures then a success, no arrival during k+1 rounds
        p = (alpha ** k) * (1 - alpha) * q ** (k + 1)
        num += p * (k + 1) * mu
        den += p
    return num / den
