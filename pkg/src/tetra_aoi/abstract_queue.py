"""Monte-Carlo model of a single transmitter: Poisson updates, fixed service
time ``mu`` and i.i.d. transmission failure ``alpha``, under five buffer
disciplines.

Two backends share the same semantics and random streams:

* ``engine``: ``QueueState`` + ``step_arrival``/``step_service_end`` driven by
  the generic DES engine. Readable reference, slow.
* ``fast``: a numba kernel with the identical event logic, used for the
  million-delivery validation runs. A test pins the two to bit-identical
  delivery sequences.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .core import Discipline, ModelParams, ParameterError, RngStream, Update
from .des import Engine
from .metrics import RunResult, paoi_from_path, summarize, warmup_count

log = logging.getLogger(__name__)

CHUNK = 1 << 16
ARRIVAL_STREAM = (0, 0)
CHANNEL_STREAM = (0, 1)


@dataclass
class Serving:
    update: Update
    service_end: float
    attempt_count: int = 1
    handle: object = None


@dataclass
class Delivery:
    update: Update
    time: float
    attempts: int

    @property
    def span(self) -> float:
        return self.time - self.update.gen_time


@dataclass
class QueueState:
    discipline: Discipline
    mu: float
    now: float = 0.0
    server: Serving | None = None
    waiting: deque = field(default_factory=deque)
    drops_preempt: int = 0
    drops_replace: int = 0
    drops_busy: int = 0
    drops_channel: int = 0
    arrivals: int = 0
    deliveries: int = 0

    @property
    def waiting_capacity(self) -> float:
        return self.discipline.capacity - 1

    @property
    def in_system(self) -> int:
        return (self.server is not None) + len(self.waiting)

    @property
    def drops(self) -> dict:
        return {"channel": self.drops_channel, "preempt": self.drops_preempt,
                "replace": self.drops_replace, "busy": self.drops_busy, "access_fail": 0}

    def check(self):
        assert len(self.waiting) <= self.waiting_capacity
        total = self.deliveries + sum(self.drops.values()) + self.in_system
        assert self.arrivals == total, (self.arrivals, total)


def _start(state: QueueState, update: Update, now: float):
    state.server = Serving(update, now + state.mu)


def step_arrival(state: QueueState, update: Update, now: float | None = None) -> str:
    """Admit one arrival; returns which of started / enqueued / replaced-waiting /
    preempted-server / dropped-busy happened."""
    now = update.gen_time if now is None else now
    if now < state.now:
        raise ValueError("arrival before current time")
    state.now = now
    state.arrivals += 1
    disc = state.discipline
    if state.server is None:
        _start(state, update, now)
        return "started"
    if disc is Discipline.FCFS:
        state.waiting.append(update)
        return "enqueued"
    if disc is Discipline.NPR:
        state.drops_busy += 1
        return "dropped-busy"
    if disc.preemptive:
        state.drops_preempt += 1
        _start(state, update, now)
        return "preempted-server"
    # REPLACE2
    if state.waiting:
        state.waiting[0] = update
        state.drops_replace += 1
        return "replaced-waiting"
    state.waiting.append(update)
    return "enqueued"


def step_service_end(state: QueueState, rng, alpha: float, now: float | None = None) -> Delivery | None:
    """Finish the current transmission; ``rng.random() >= alpha`` is a success."""
    assert state.server is not None, "service end while idle"
    srv = state.server
    now = srv.service_end if now is None else now
    assert math.isclose(now, srv.service_end, rel_tol=0, abs_tol=1e-12), "service end at wrong time"
    state.now = now
    delivery = None
    if rng.random() >= alpha:
        delivery = Delivery(srv.update, now, srv.attempt_count)
        state.deliveries += 1
        state.server = None
    elif state.discipline is Discipline.PRRT:
        srv.attempt_count += 1
        srv.service_end = now + state.mu
        return None
    else:
        state.drops_channel += 1
        state.server = None
    if state.waiting:
        _start(state, state.waiting.popleft(), now)
    return delivery


class ChunkedSource:
    """Pre-draws fixed-size blocks so both backends see identical numbers."""

    def __init__(self, stream: RngStream, kind: str):
        self.stream = stream
        self.kind = kind
        self.buf = np.empty(0)
        self.pos = 0

    def refill(self):
        if self.kind == "exp":
            self.buf = self.stream.gen.standard_exponential(CHUNK)
        else:
            self.buf = self.stream.gen.random(CHUNK)
        self.pos = 0
        return self.buf

    def next(self) -> float:
        if self.pos >= self.buf.size:
            self.refill()
        x = self.buf[self.pos]
        self.pos += 1
        return float(x)

    # rng protocol for step_service_end
    random = next


@dataclass
class PathRecord:
    gen: np.ndarray
    dep: np.ndarray
    attempts: np.ndarray
    arrivals: int
    drops: dict
    in_system: int
    truncated: bool = False
    events: int = 0


def _simulate_engine(params: ModelParams, n_deliveries: int, seed: int,
                     max_events: int | None) -> PathRecord:
    ia = ChunkedSource(RngStream(seed, ARRIVAL_STREAM), "exp")
    ch = ChunkedSource(RngStream(seed, CHANNEL_STREAM), "unif")
    state = QueueState(params.discipline, params.mu)
    eng = Engine(start=0.0)
    gen, dep, att = [], [], []
    lam = params.lambda_F

    def on_service_end(ev):
        d = step_service_end(state, ch, params.alpha, eng.now)
        if d is not None:
            gen.append(d.update.gen_time)
            dep.append(d.time)
            att.append(d.attempts)
        arm_server()

    def arm_server():
        srv = state.server
        if srv is not None and (srv.handle is None or not srv.handle.active):
            srv.handle = eng.schedule(srv.service_end, on_service_end, kind="service_end")

    def on_arrival(ev):
        old = state.server
        outcome = step_arrival(state, Update(0, eng.now), eng.now)
        if outcome == "preempted-server" and old is not None and old.handle is not None:
            old.handle.cancel()
        arm_server()
        eng.after(ia.next() / lam, on_arrival, kind="arrival")

    eng.schedule(ia.next() / lam, on_arrival, kind="arrival")
    truncated = False
    try:
        eng.run_until(lambda: len(dep) >= n_deliveries, max_events=max_events)
    except Exception as exc:  # budget exhausted
        from .des import EventBudgetExceeded
        if not isinstance(exc, EventBudgetExceeded):
            raise
        truncated = True
    state.check()
    return PathRecord(np.array(gen), np.array(dep), np.array(att, dtype=np.int64),
                      state.arrivals, state.drops, state.in_system, truncated, eng.stats.events)


def _simulate_fast(params: ModelParams, n_deliveries: int, seed: int,
                   max_events: int | None) -> PathRecord:
    ia = ChunkedSource(RngStream(seed, ARRIVAL_STREAM), "exp")
    ch = ChunkedSource(RngStream(seed, CHANNEL_STREAM), "unif")
    ia_buf = ia.refill()
    u_buf = ch.refill()
    fst = np.zeros(_kernel.NF)
    ist = np.zeros(_kernel.NI, dtype=np.int64)
    fst[_kernel.NEXT_ARR] = ia_buf[0] / params.lambda_F
    ist[_kernel.IA_POS] = 1
    queue = np.empty(64)
    gen = np.empty(n_deliveries)
    dep = np.empty(n_deliveries)
    att = np.empty(n_deliveries, dtype=np.int64)
    code_disc = _kernel.DISC_CODES[params.discipline.value]
    budget = -1 if max_events is None else int(max_events)
    truncated = False
    while True:
        rc = _kernel.run(code_disc, params.lambda_F, params.mu, params.alpha,
                         ia_buf, u_buf, fst, ist, queue, gen, dep, att, n_deliveries, budget)
        if rc == _kernel.DONE:
            break
        if rc == _kernel.NEED_IA:
            ia_buf = ia.refill()
            ist[_kernel.IA_POS] = 0
        elif rc == _kernel.NEED_U:
            u_buf = ch.refill()
            ist[_kernel.U_POS] = 0
        elif rc == _kernel.NEED_Q:
            queue = _kernel.grow(queue, ist)
        elif rc == _kernel.TRUNCATED:
            truncated = True
            break
    n = int(ist[_kernel.N_DEL])
    drops = {"channel": int(ist[_kernel.D_CHANNEL]), "preempt": int(ist[_kernel.D_PREEMPT]),
             "replace": int(ist[_kernel.D_REPLACE]), "busy": int(ist[_kernel.D_BUSY]),
             "access_fail": 0}
    in_system = int(ist[_kernel.BUSY]) + int(ist[_kernel.Q_LEN])
    return PathRecord(gen[:n].copy(), dep[:n].copy(), att[:n].copy(), int(ist[_kernel.ARRIVALS]),
                      drops, in_system, truncated, int(ist[_kernel.EVENTS]))


def simulate_path(params: ModelParams, n_deliveries: int, seed: int = 0, *,
                  backend: str = "fast", max_events: int | None = None) -> PathRecord:
    if n_deliveries < 1:
        raise ParameterError("n_deliveries must be >= 1")
    if backend == "fast":
        return _simulate_fast(params, n_deliveries, seed, max_events)
    if backend == "engine":
        return _simulate_engine(params, n_deliveries, seed, max_events)
    raise ParameterError(f"unknown backend {backend!r}")


def simulate_abstract(params: ModelParams, n_deliveries: int, seed: int = 0, *,
                      backend: str = "fast", max_events: int | None = None,
                      n_batches: int = 30) -> RunResult:
    """Run until ``n_deliveries`` successes and summarise the PAoI samples."""
    rec = simulate_path(params, n_deliveries, seed, backend=backend, max_events=max_events)
    if rec.truncated:
        log.warning("abstract run truncated after %d events with %d/%d deliveries",
                    rec.events, rec.gen.size, n_deliveries)
    samples = paoi_from_path(rec.gen, rec.dep) if rec.gen.size > 1 else np.empty(0)
    w = warmup_count(n_deliveries)
    kept = samples[w:]
    s = summarize(kept, n_batches)
    spans = rec.dep - rec.gen
    res = RunResult(s.mean, s.half_width, s.se, s.n, s.flagged or rec.truncated,
                    rec.arrivals, int(rec.gen.size), rec.in_system, rec.drops,
                    extra={"mean_service": float(spans.mean()) if spans.size else math.nan,
                           "mean_attempts": float(rec.attempts.mean()) if spans.size else math.nan,
                           "truncated": rec.truncated, "events": rec.events,
                           "warmup": w, "discipline": params.discipline.value})
    res.check_conservation()
    return res
