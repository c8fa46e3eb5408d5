"""Shared types: TDMA time base, status updates, seeded random streams."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

SLOTS_PER_FRAME = 4
FRAMES_PER_MULTIFRAME = 18
CONTROL_FRAME = 17
DEFAULT_FRAME_DUR_MS = 57.67


class ParameterError(ValueError):
    """Invalid model or configuration parameter."""


class Discipline(str, enum.Enum):
    FCFS = "FCFS"
    NPR = "NPR"
    PR = "PR"
    PRRT = "PRRT"
    REPLACE2 = "REPLACE2"

    @classmethod
    def parse(cls, value) -> "Discipline":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown discipline {value!r}") from None

    @property
    def capacity(self) -> float:
        """Number of updates the buffer can hold, including the one in service."""
        if self is Discipline.FCFS:
            return float("inf")
        if self is Discipline.REPLACE2:
            return 2
        return 1

    @property
    def preemptive(self) -> bool:
        return self in (Discipline.PR, Discipline.PRRT)


@dataclass(frozen=True)
class SlotClock:
    """Maps an absolute slot counter onto frame/multiframe coordinates."""

    abs_slot: int = 0
    frame_dur_ms: float = DEFAULT_FRAME_DUR_MS

    def __post_init__(self):
        if self.abs_slot < 0:
            raise ParameterError("abs_slot must be >= 0")
        if not self.frame_dur_ms > 0:
            raise ParameterError("frame_dur_ms must be > 0")

    @property
    def slot_dur(self) -> float:
        """Slot duration in seconds."""
        return self.frame_dur_ms / SLOTS_PER_FRAME / 1000.0

    @property
    def frame(self) -> int:
        return self.abs_slot // SLOTS_PER_FRAME

    @property
    def slot_in_frame(self) -> int:
        return self.abs_slot % SLOTS_PER_FRAME

    @property
    def frame_in_multiframe(self) -> int:
        return self.frame % FRAMES_PER_MULTIFRAME

    @property
    def multiframe(self) -> int:
        return self.frame // FRAMES_PER_MULTIFRAME

    @property
    def is_control_frame(self) -> bool:
        return self.frame_in_multiframe == CONTROL_FRAME

    @property
    def seconds(self) -> float:
        return slot_to_seconds(self, self.abs_slot)

    def at(self, abs_slot: int) -> "SlotClock":
        return SlotClock(abs_slot, self.frame_dur_ms)

    @staticmethod
    def compose(multiframe: int, frame_in_multiframe: int, slot_in_frame: int) -> int:
        frame = multiframe * FRAMES_PER_MULTIFRAME + frame_in_multiframe
        return frame * SLOTS_PER_FRAME + slot_in_frame


def slot_to_seconds(clock: SlotClock, abs_slot: int) -> float:
    return abs_slot * clock.frame_dur_ms / SLOTS_PER_FRAME / 1000.0


def seconds_to_next_slot(clock: SlotClock, t: float) -> int:
    """First slot boundary strictly after wall-clock time ``t``."""
    return int(t // clock.slot_dur) + 1


def is_control_frame(frame: int) -> bool:
    return frame % FRAMES_PER_MULTIFRAME == CONTROL_FRAME


_update_ids = itertools.count()


@dataclass(eq=False)
class Update:
    source_id: int
    gen_time: float
    n_fragments: int = 1
    bytes: int = 8
    kind: str = "uplink-status"
    uid: int = field(default_factory=lambda: next(_update_ids))

    def __post_init__(self):
        if self.n_fragments < 1 or self.bytes < 1:
            raise ParameterError("n_fragments and bytes must be >= 1")

    def __setattr__(self, name, value):
        if name == "gen_time" and "gen_time" in self.__dict__:
            raise AttributeError("gen_time is immutable")
        object.__setattr__(self, name, value)


class RngStream:
    """One independent random stream, keyed by (seed, stream_id).

    ``stream_id`` may be an int or a tuple of ints (e.g. entity, purpose); the
    pair is fed to numpy's SeedSequence spawn key so adding new streams never
    perturbs existing ones.
    """

    def __init__(self, seed: int, stream_id=0):
        self.seed = int(seed)
        self.stream_id = stream_id
        key = stream_id if isinstance(stream_id, tuple) else (stream_id,)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def random(self) -> float:
        return float(self.gen.random())

    def exponential(self, rate: float) -> float:
        return exp_sample(self, rate)

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return int(self.gen.integers(low, high))

    def uniform(self, low: float, high: float) -> float:
        return float(self.gen.uniform(low, high))

    def bernoulli(self, p: float) -> bool:
        return self.gen.random() < p


def exp_sample(rng: RngStream, rate: float) -> float:
    if not rate > 0:
        raise ParameterError(f"rate must be > 0, got {rate}")
    return float(rng.gen.standard_exponential()) / rate


@dataclass(frozen=True)
class ModelParams:
    lambda_F: float
    mu: float
    alpha: float
    discipline: Discipline = Discipline.PR

    def __post_init__(self):
        if not (self.lambda_F > 0 and np.isfinite(self.lambda_F)):
            raise ParameterError("lambda_F must be > 0")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ParameterError("mu must be > 0")
        if not 0 <= self.alpha < 1:
            raise ParameterError("alpha must be in [0, 1)")
        object.__setattr__(self, "discipline", Discipline.parse(self.discipline))
