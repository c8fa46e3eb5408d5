"""Peak-AoI bookkeeping, batch-means confidence intervals and loss accounting."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

DROP_CAUSES = ("channel", "preempt", "replace", "busy", "access_fail")


class TimeInversionError(RuntimeError):
    pass


@dataclass
class _SourceState:
    last_gen: float | None = None
    last_delivery: float | None = None
    last_span: float | None = None
    samples: list = field(default_factory=list)
    deliveries: int = 0
    stale: int = 0


class AoiTracker:
    """Per-source PAoI samples at a receiver.

    Each delivery after the first yields ``A = (d_i - d_{i-1}) + S_{i-1}``,
    where ``S_{i-1}`` is the generation-to-delivery span of the previous
    delivered update; it must agree with ``d_i - gen_{i-1}``.
    """

    def __init__(self, rel_tol: float = 1e-9):
        self.sources: dict = {}
        self.rel_tol = rel_tol

    def record_delivery(self, source, gen_time: float, now: float, service_span: float | None = None):
        """Returns the PAoI sample, or None for a first or stale delivery."""
        if now < gen_time:
            raise TimeInversionError(f"delivery at {now} precedes generation at {gen_time}")
        st = self.sources.get(source)
        if st is None:
            st = self.sources[source] = _SourceState()
        if service_span is None:
            service_span = now - gen_time
        if st.last_delivery is not None and now < st.last_delivery:
            raise TimeInversionError(f"delivery at {now} precedes previous delivery {st.last_delivery}")
        if st.last_gen is not None and gen_time <= st.last_gen:
            st.stale += 1
            return None
        st.deliveries += 1
        sample = None
        if st.last_gen is not None:
            sample = (now - st.last_delivery) + st.last_span
            direct = now - st.last_gen
            if not math.isclose(sample, direct, rel_tol=self.rel_tol, abs_tol=1e-9):
                raise AssertionError(f"PAoI bookkeeping mismatch: {sample} vs {direct}")
            st.samples.append(sample)
        st.last_gen = gen_time
        st.last_delivery = now
        st.last_span = service_span
        return sample

    def samples(self, source=None, warmup: int = 0) -> np.ndarray:
        if source is not None:
            return np.asarray(self.sources[source].samples[warmup:], dtype=float)
        parts = [s.samples[warmup:] for _, s in sorted(self.sources.items(), key=lambda kv: str(kv[0]))]
        return np.asarray([x for p in parts for x in p], dtype=float)

    @property
    def stale(self) -> int:
        return sum(s.stale for s in self.sources.values())

    @property
    def deliveries(self) -> int:
        return sum(s.deliveries for s in self.sources.values())


def paoi_from_path(gen: np.ndarray, dep: np.ndarray) -> np.ndarray:
    """Vectorised PAoI samples for an in-order delivery sequence; checks both forms agree."""
    gen = np.asarray(gen, dtype=float)
    dep = np.asarray(dep, dtype=float)
    a = dep[1:] - gen[:-1]
    b = (dep[1:] - dep[:-1]) + (dep[:-1] - gen[:-1])
    if not np.allclose(a, b, rtol=1e-9, atol=1e-9):
        raise AssertionError("PAoI bookkeeping mismatch on sample path")
    return a


@dataclass(frozen=True)
class Summary:
    mean: float
    half_width: float  # 95% batch-means
    se: float
    n: int
    n_batches: int
    flagged: bool

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(value - self.mean) <= sigmas * self.se

    def z(self, value: float) -> float:
        if self.se == 0:
            return 0.0 if value == self.mean else math.inf
        return (self.mean - value) / self.se


def summarize(samples, n_batches: int = 30, confidence: float = 0.95) -> Summary:
    """Batch means with ``n_batches`` contiguous batches; flags short inputs instead of failing."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        return Summary(math.nan, math.inf, math.inf, 0, 0, True)
    mean = float(x.mean())
    if n < n_batches:
        if n < 2:
            return Summary(mean, math.inf, math.inf, n, 0, True)
        se = float(x.std(ddof=1) / math.sqrt(n))
        t = stats.t.ppf(0.5 + confidence / 2, n - 1)
        return Summary(mean, float(t * se), se, n, 0, True)
    bm = np.array([b.mean() for b in np.array_split(x, n_batches)])
    se = float(bm.std(ddof=1) / math.sqrt(n_batches))
    t = stats.t.ppf(0.5 + confidence / 2, n_batches - 1)
    return Summary(mean, float(t * se), se, n, n_batches, False)


def warmup_count(n_deliveries: int) -> int:
    """Deliveries discarded before averaging: 1% with a floor of 100."""
    return max(100, n_deliveries // 100)


class LossLedger:
    """Fate of every tracked update: delivered, dropped by cause, or in flight.

    Updates may exist as copies at several holders (sender, relay); a drop is
    charged only when the last copy of an undelivered update disappears.
    """

    def __init__(self):
        self._copies: dict = {}
        self._delivered: set = set()
        self._dropped: set = set()
        self._released: dict = {}
        self.generated = 0
        self.delivered = 0
        self.drops = Counter({c: 0 for c in DROP_CAUSES})

    def generate(self, uid):
        self.generated += 1
        self._copies[uid] = 1

    def tracked(self, uid) -> bool:
        return uid in self._copies

    def copy(self, uid):
        if uid in self._copies and uid not in self._delivered and uid not in self._dropped:
            self._copies[uid] += 1

    def deliver(self, uid) -> bool:
        """True on first delivery."""
        if uid not in self._copies or uid in self._delivered:
            return False
        if uid in self._dropped:
            raise AssertionError(f"update {uid} delivered after being counted lost")
        self._delivered.add(uid)
        self.delivered += 1
        return True

    def release(self, uid, cause: str):
        if cause not in DROP_CAUSES:
            raise ValueError(cause)
        if uid not in self._copies or uid in self._delivered or uid in self._dropped:
            return
        self._copies[uid] -= 1
        self._released[uid] = cause
        if self._copies[uid] <= 0:
            self._dropped.add(uid)
            self.drops[cause] += 1

    def retire(self, uid):
        """A holder lets go after a successful hand-off (delivery or a relay copy)."""
        if uid not in self._copies or uid in self._dropped:
            return
        last = self._copies[uid] <= 1 and uid not in self._delivered
        # another holder dropped its copy earlier; that drop is the real fate
        cause = self._released.get(uid)
        if last and cause is None:
            raise AssertionError(f"update {uid} left its last holder undelivered")
        self._copies[uid] -= 1
        if last:
            self._dropped.add(uid)
            self.drops[cause] += 1

    @property
    def in_flight(self) -> int:
        return sum(1 for uid, c in self._copies.items()
                   if c > 0 and uid not in self._delivered and uid not in self._dropped)

    def check(self):
        if self.generated != self.delivered + sum(self.drops.values()) + self.in_flight:
            raise AssertionError("loss ledger does not conserve updates")
        if self.in_flight < 0:
            raise AssertionError("negative in-flight count")


@dataclass
class RunResult:
    mean_paoi: float
    ci_half: float
    se: float
    n_samples: int
    flagged: bool
    generated: int
    delivered: int
    in_flight: int
    drops: dict
    per_source: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def finished(self) -> int:
        return self.generated - self.in_flight

    @property
    def plr(self) -> float:
        return sum(self.drops.values()) / self.finished if self.finished else 0.0

    @property
    def plr_breakdown(self) -> dict:
        f = self.finished
        return {c: (self.drops.get(c, 0) / f if f else 0.0) for c in DROP_CAUSES}

    def check_conservation(self):
        if self.generated != self.delivered + sum(self.drops.values()) + self.in_flight:
            raise AssertionError("generated != delivered + drops + in-flight")
        parts = self.plr_breakdown
        if not math.isclose(sum(parts.values()), self.plr, rel_tol=1e-12, abs_tol=1e-15):
            raise AssertionError("PLR decomposition does not sum to PLR")

    @classmethod
    def from_samples(cls, samples, *, generated, delivered, in_flight, drops,
                     n_batches=30, **kw) -> "RunResult":
        s = summarize(samples, n_batches)
        return cls(s.mean, s.half_width, s.se, s.n, s.flagged, generated, delivered,
                   in_flight, dict(drops), **kw)

    @property
    def summary(self) -> Summary:
        return Summary(self.mean_paoi, self.ci_half, self.se, self.n_samples, 30, self.flagged)
