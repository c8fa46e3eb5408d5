"""Trunked-mode SDS over the MCCH: slotted random access with WT/Nu retries,
reserved-slot grants, SDS acknowledgement and stealing-flag preemption.

Timing (integer slots, four per frame):

* access opportunity: slot 0 of every uplink frame except the control frame
  (index 17 of the multiframe) and frames already reserved for fragments;
* the BS answers in downlink slot 0 of the next frame (MAC-RESOURCE); with
  no answer after WT frames the MS retries at an opportunity drawn from
  the next WT;
* reserved fragment slots start the frame after the grant;
* once the message is complete the BS forwards it to the remote agent and
  sends the SDS ACK in the downlink frame ``ack_delay_frames`` later.

Each procedure carries a token; abandoning it (preemption, retransmission)
bumps the token so late callbacks for the old procedure are ignored.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from .core import (CONTROL_FRAME, FRAMES_PER_MULTIFRAME, SLOTS_PER_FRAME, Discipline,
                   ParameterError, SlotClock, Update)
from .metrics import LossLedger

SPF = SLOTS_PER_FRAME


class Phase(str, enum.Enum):
    IDLE = "idle"
    AWAIT_OPP = "awaiting_opportunity"
    AWAIT_GRANT = "awaiting_grant"
    TX_RESERVED = "transmitting_reserved"
    AWAIT_ACK = "awaiting_ack"


@dataclass
class TmoParams:
    wt: int = 4
    nu: int = 5
    sds_retx_limit: int = 3
    ack_timeout_frames: int = 4
    ack_delay_frames: int = 3
    first_fragment_bits: int = 86

    def __post_init__(self):
        if not 1 <= self.wt <= 15:
            raise ParameterError("tmo.wt must be in [1, 15]")
        if not 1 <= self.nu <= 15:
            raise ParameterError("tmo.nu must be in [1, 15]")
        if self.sds_retx_limit < 0:
            raise ParameterError("tmo.sds_retx_limit must be >= 0")
        if self.ack_timeout_frames < 1:
            raise ParameterError("tmo.ack_timeout_frames must be >= 1")
        if not 1 <= self.ack_delay_frames <= self.ack_timeout_frames:
            raise ParameterError("tmo.ack_delay_frames must be in [1, ack_timeout_frames]")
        if not 1 <= self.first_fragment_bits <= 86:
            raise ParameterError("tmo.first_fragment_bits must be in [1, 86]")


def _is_control(frame: int) -> bool:
    return frame % FRAMES_PER_MULTIFRAME == CONTROL_FRAME


def access_opportunities(start_slot: int, reserved=frozenset()):
    """Slot-0 uplink opportunities at or after ``start_slot``."""
    f = -(-start_slot // SPF)
    while True:
        if not _is_control(f) and f not in reserved:
            yield f * SPF
        f += 1


def next_access_opportunity(clock, rng=None, retry: bool = False, wt: int = 1,
                            reserved=frozenset()) -> int:
    """First valid opportunity, or for a retry one drawn uniformly from the next ``wt``."""
    now = clock.abs_slot if isinstance(clock, SlotClock) else int(clock)
    it = access_opportunities(now, reserved)
    if not retry or wt == 1:
        return next(it)
    opts = [next(it) for _ in range(wt)]
    return opts[rng.integers(0, wt)]


@dataclass
class Registration:
    ms: "TmoMs"
    token: int
    update: Update


@dataclass
class CellStats:
    access_slots: int = 0
    collision_slots: int = 0
    idle_deferrals: int = 0
    grants: int = 0
    reserved_frames: int = 0
    completed: int = 0
    duplicates: int = 0
    acks_lost: int = 0
    dl_bursts: int = 0
    dl_lost: int = 0


class TmoCell:
    """The BS side of one cell: arbitrates MCCH access slots, hands out
    reserved fragment slots, assembles messages and drives the downlink."""

    def __init__(self, engine, params: TmoParams, alpha_ch: float, rng_ul, rng_dl,
                 deliver=None, ledger: LossLedger | None = None, trace=None):
        if not 0 <= alpha_ch <= 1:
            raise ParameterError("alpha_ch must be in [0, 1]")
        self.engine = engine
        self.params = params
        self.alpha = alpha_ch
        self.rng_ul = rng_ul
        self.rng_dl = rng_dl
        self.deliver = deliver or (lambda update, slot: None)
        self.ledger = ledger if ledger is not None else LossLedger()
        self.trace = trace
        self.regs: dict[int, list[Registration]] = {}
        self.reserved: set[int] = set()
        self.reserved_owner: dict[int, int] = {}
        self._pending: set[int] = set()
        self._forwarded: set[int] = set()
        self._assembling: dict = {}
        self.dl_next_frame = 0
        self.stats = CellStats()

    def log(self, target, kind):
        if self.trace is not None:
            self.trace.write(f"{self.engine.now} {target} {kind}\n")

    # uplink random access

    def register(self, reg: Registration, slot: int):
        lst = self.regs.get(slot)
        if lst is None:
            lst = self.regs[slot] = []
            self.engine.schedule(slot + 1, self._arbitrate, target="BS", kind="ACCESS", data=slot)
        lst.append(reg)

    def withdraw(self, ms, slot: int):
        lst = self.regs.get(slot)
        if lst:
            lst[:] = [r for r in lst if r.ms is not ms]

    def arbitrate_slot(self, regs: list[Registration], frame: int) -> list[bool]:
        """Outcome per transmission: a lone burst survives the channel with
        probability 1 - alpha_ch, two or more collide."""
        if len(regs) == 0:
            return []
        self.stats.access_slots += 1
        if len(regs) >= 2:
            self.stats.collision_slots += 1
            return [False] * len(regs)
        return [self.rng_ul.random() >= self.alpha]

    def _arbitrate(self, ev):
        slot = ev.data
        regs = self.regs.pop(slot, [])
        if not regs:
            return
        frame = slot // SPF
        if frame in self.reserved:
            # ACCESS-ASSIGN marked the slot reserved after these MSs picked it
            self.stats.idle_deferrals += len(regs)
            for r in regs:
                r.ms._defer(r.token)
            return
        outcomes = self.arbitrate_slot(regs, frame)
        collided = len(regs) >= 2
        response = (frame + 1) * SPF + 1
        give_up = (frame + self.params.wt) * SPF + 1
        for reg, ok in zip(regs, outcomes):
            reg.ms._note_access(collided, ok)
            grant = None
            if ok and reg.ms.token == reg.token:
                grant = self._accept(reg, frame)
            if grant is not None:
                self.engine.schedule(response, reg.ms._on_response, target=reg.ms.ms_id,
                                     kind="RESOURCE", data=(reg.token, frame, grant))
            else:
                # no MAC-RESOURCE: the MS gives up waiting after WT downlink opportunities
                self.engine.schedule(give_up, reg.ms._on_response, target=reg.ms.ms_id,
                                     kind="NORESP", data=(reg.token, frame, None))

    def _accept(self, reg: Registration, frame: int):
        self.stats.grants += 1
        upd = reg.update
        if upd.kind == "voice-setup" or upd.n_fragments == 1:
            if upd.kind != "voice-setup":
                self._complete(reg, frame)
            return ()
        frames = self._reserve(frame + 2, upd.n_fragments - 1, reg.ms.ms_id)
        key = (id(reg.ms), reg.token)
        self._assembling[key] = [reg, len(frames), True]
        for fr in frames:
            self.engine.schedule(fr * SPF + 1, self._fragment, target="BS", kind="FRAG", data=(key, fr))
        return tuple(frames)

    def _reserve(self, start_frame: int, k: int, owner) -> list[int]:
        out = []
        f = start_frame
        while len(out) < k:
            if not _is_control(f) and f not in self.reserved:
                out.append(f)
                self.reserved.add(f)
                self.reserved_owner[f] = owner
            f += 1
        self.stats.reserved_frames += k
        return out

    def _fragment(self, ev):
        key, fr = ev.data
        self.reserved.discard(fr)
        self.reserved_owner.pop(fr, None)
        entry = self._assembling.get(key)
        if entry is None:
            return
        reg = entry[0]
        entry[1] -= 1
        if self.rng_ul.random() < self.alpha:
            entry[2] = False
        if reg.ms.token != reg.token:
            entry[2] = False
        if entry[1] == 0:
            del self._assembling[key]
            if entry[2]:
                self._complete(reg, fr)

    def _complete(self, reg: Registration, last_frame: int):
        upd = reg.update
        if upd.uid in self._forwarded or upd.uid in self._pending:
            self.stats.duplicates += 1
        else:
            self._pending.add(upd.uid)
            self.ledger.copy(upd.uid)
        self.stats.completed += 1
        t = (last_frame + self.params.ack_delay_frames) * SPF + 1
        self.engine.schedule(t, self._ack, target=reg.ms.ms_id, kind="ACK", data=reg)

    def _ack(self, ev):
        reg = ev.data
        upd = reg.update
        if upd.uid in self._pending:
            self._pending.discard(upd.uid)
            self._forwarded.add(upd.uid)
            self.deliver(upd, self.engine.now)
            self.ledger.retire(upd.uid)
        if self.rng_dl.random() >= self.alpha:
            reg.ms._on_ack(reg.token)
        else:
            self.stats.acks_lost += 1

    # downlink reserved access (feedback)

    def send_downlink(self, update: Update, receiver):
        """Queue one burst on the reserved downlink slot (slot 1), retried until received."""
        frame = max(self.engine.now // SPF + 1, self.dl_next_frame)
        self.dl_next_frame = frame + 1
        self.engine.schedule(frame * SPF + 2, self._dl_burst, target="BS", kind="DL",
                             data=(update, receiver))

    def _dl_burst(self, ev):
        update, receiver = ev.data
        self.stats.dl_bursts += 1
        if self.rng_dl.random() >= self.alpha:
            receiver(update, self.engine.now)
            return
        self.stats.dl_lost += 1
        frame = max(self.engine.now // SPF + 1, self.dl_next_frame)
        self.dl_next_frame = frame + 1
        self.engine.schedule(frame * SPF + 2, self._dl_burst, target="BS", kind="DL", data=ev.data)


@dataclass
class MsStats:
    # buffer-level discards at this MS; end-to-end fate lives in the loss ledger
    drops_preempt: int = 0
    drops_busy: int = 0
    drops_replace: int = 0
    access_tx: int = 0
    access_collided: int = 0
    access_channel: int = 0
    access_failures: int = 0
    sds_retx: int = 0
    delivered: int = 0
    failed: int = 0
    service_spans: list = field(default_factory=list)


class TmoMs:
    """One mobile station's SDS transmitter and its packet-management buffer."""

    def __init__(self, cell: TmoCell, ms_id, discipline, rng, *, on_finish=None):
        self.cell = cell
        self.engine = cell.engine
        self.ms_id = ms_id
        self.discipline = Discipline.parse(discipline)
        self.rng = rng
        self.params = cell.params
        self.on_finish = on_finish
        d = self.discipline
        if d is Discipline.PRRT:
            self.retx_limit = math.inf
        elif d in (Discipline.FCFS, Discipline.REPLACE2):
            self.retx_limit = self.params.sds_retx_limit
        else:
            self.retx_limit = 0
        self._phase = Phase.IDLE
        self.current: Update | None = None
        self.queue: deque[Update] = deque()
        self.token = 0
        self.attempt = 0
        self.retx = 0
        self.slot: int | None = None
        self.timer = None
        self.last_frag_slot = -1
        self.started_at = 0
        self.stats = MsStats()

    @property
    def phase(self) -> Phase:
        if self._phase is Phase.TX_RESERVED and self.engine.now > self.last_frag_slot:
            return Phase.AWAIT_ACK
        if self._phase is Phase.AWAIT_OPP and self.slot is not None and self.engine.now > self.slot:
            return Phase.AWAIT_GRANT
        return self._phase

    @property
    def ledger(self):
        return self.cell.ledger

    @property
    def busy(self) -> bool:
        return self.current is not None

    def on_update_arrival(self, update: Update) -> str:
        if self.current is None:
            self.current = update
            self._begin()
            return "started"
        d = self.discipline
        if d.preemptive:
            old = self.current
            self._abort()
            self.stats.drops_preempt += 1
            self.ledger.release(old.uid, "preempt")
            self.current = update
            self._begin()
            return "preempted-server"
        if d is Discipline.NPR:
            self.stats.drops_busy += 1
            self.ledger.release(update.uid, "busy")
            return "dropped-busy"
        if d is Discipline.REPLACE2 and self.queue:
            old = self.queue[0]
            self.queue[0] = update
            self.stats.drops_replace += 1
            self.ledger.release(old.uid, "replace")
            return "replaced-waiting"
        self.queue.append(update)
        return "enqueued"

    # procedure control

    def _begin(self):
        self.retx = 0
        self.started_at = self.engine.now
        self._restart()

    def _restart(self):
        self.token += 1
        self.attempt = 1
        self._register(next_access_opportunity(self.engine.now, reserved=self.cell.reserved))

    def _register(self, slot: int):
        self.slot = slot
        self._phase = Phase.AWAIT_OPP
        self.cell.register(Registration(self, self.token, self.current), slot)

    def _abort(self):
        if self.timer is not None:
            self.timer.cancel()
            self.timer = None
        if self.slot is not None and self.slot >= self.engine.now:
            self.cell.withdraw(self, self.slot)
        self.slot = None
        self.token += 1

    def _defer(self, token):
        if token != self.token:
            return
        self._register(next_access_opportunity(self.engine.now, reserved=self.cell.reserved))

    def _note_access(self, collided: bool, ok: bool):
        self.stats.access_tx += 1
        if collided:
            self.stats.access_collided += 1
        elif not ok:
            self.stats.access_channel += 1

    def _on_response(self, ev):
        token, frame, grant = ev.data
        if token != self.token:
            return
        self.slot = None
        if grant is None:
            if self.attempt >= self.params.nu:
                self.cell.log(self.ms_id, "FAIL")
                self.stats.access_failures += 1
                self._message_failed("access_fail")
            else:
                self.attempt += 1
                self._register(next_access_opportunity(self.engine.now, self.rng, retry=True,
                                                       wt=self.params.wt, reserved=self.cell.reserved))
            return
        if self.current.kind == "voice-setup":
            self._finish()
            return
        last = grant[-1] if grant else frame
        self.last_frag_slot = last * SPF
        self._phase = Phase.TX_RESERVED if grant else Phase.AWAIT_ACK
        expiry = (last + self.params.ack_timeout_frames + 1) * SPF
        self.timer = self.engine.schedule(expiry, self._on_timeout, target=self.ms_id,
                                          kind="ACK_TIMEOUT", data=self.token)

    def _on_ack(self, token):
        if token != self.token or self.current is None:
            return
        if self.timer is not None:
            self.timer.cancel()
            self.timer = None
        self._finish()

    def _on_timeout(self, ev):
        if ev.data != self.token:
            return
        self.timer = None
        if self.retx < self.retx_limit:
            self.retx += 1
            self.stats.sds_retx += 1
            self._restart()
        else:
            self.cell.log(self.ms_id, "FAIL")
            self._message_failed("channel")

    def _message_failed(self, cause: str):
        if self.discipline is Discipline.PRRT:
            self.stats.sds_retx += 1
            self._restart()
            return
        self.stats.failed += 1
        self.ledger.release(self.current.uid, cause)
        self._next()

    def _finish(self):
        self.stats.delivered += 1
        self.stats.service_spans.append(self.engine.now - self.started_at)
        done = self.current
        self.ledger.retire(done.uid)
        if self.on_finish is not None:
            self.on_finish(done, self.engine.now)
        self._next()

    def _next(self):
        self.token += 1
        self.slot = None
        self.current = self.queue.popleft() if self.queue else None
        if self.current is not None:
            self._begin()
        else:
            self._phase = Phase.IDLE
