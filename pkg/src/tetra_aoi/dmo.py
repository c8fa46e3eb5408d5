"""Direct-mode SDS between first responders and the DM-gateway, and the
gateway's relay into the trunked network.

Per transaction on a channel (frames, four slots each):

* an MS picks a start frame after a random backoff and senses the channel at
  its boundary; busy means waiting for the channel to free up, then drawing
  a fresh backoff;
* starters in the same frame collide (no master, nothing received);
* ``dsb_frames`` frames of synchronisation bursts carry the first fragment,
  the remaining fragments follow in slot 0 of the next frames;
* the gateway acknowledges in slots 0 and 2 of the frame after the last
  fragment; the channel stays busy until that frame ends;
* DT316 runs for ``dt316`` frames after the last fragment frame.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from .core import SLOTS_PER_FRAME, Discipline, ParameterError, Update
from .metrics import LossLedger

SPF = SLOTS_PER_FRAME


@dataclass
class DmoParams:
    dsb_frames: int = 2
    dt316: int = 2
    dn316: int = 3
    alpha_ch_dmo: float | None = None  # None: same as the trunked channel
    backoff_frames: int = 8
    channel_count: int = 1

    def __post_init__(self):
        if not 1 <= self.dsb_frames <= 4:
            raise ParameterError("dmo.dsb_frames must be in [1, 4]")
        if self.dt316 < 1:
            raise ParameterError("dmo.dt316 must be >= 1")
        if self.dn316 < 0:
            raise ParameterError("dmo.dn316 must be >= 0")
        if self.alpha_ch_dmo is not None and not 0 <= self.alpha_ch_dmo <= 1:
            raise ParameterError("dmo.alpha_ch_dmo must be in [0, 1]")
        if self.backoff_frames < 1:
            raise ParameterError("dmo.backoff_frames must be >= 1")
        if self.channel_count < 1:
            raise ParameterError("dmo.channel_count must be >= 1")


class DmoPhase(str, enum.Enum):
    IDLE = "idle"
    BACKOFF = "backoff"
    WAIT_FREE = "waiting_free"
    TX = "transmitting"
    AWAIT_ACK = "awaiting_ack"


@dataclass
class ChannelStats:
    transactions: int = 0
    collisions: int = 0
    starters: int = 0
    received: int = 0
    frag_errors: int = 0
    acks_lost: int = 0
    masters: list = field(default_factory=list)  # (start_slot, end_slot, ms_id)


class DmoChannel:
    """One shared direct-mode channel heard by the gateway."""

    def __init__(self, engine, index: int, params: DmoParams, alpha: float, rng, gateway):
        self.engine = engine
        self.index = index
        self.params = params
        self.alpha = alpha
        self.rng = rng
        self.gateway = gateway
        self.busy_until = 0
        self.master = None
        self._start_frame = None
        self._starters: list = []
        self._waiters: list = []
        self.stats = ChannelStats()
        self.record_masters = False

    @property
    def status(self):
        now = self.engine.now
        if now < self.busy_until:
            return ("busy", self.master, self.busy_until)
        return ("free", None, None)

    def sense(self, ms, token) -> str:
        now = self.engine.now
        frame = now // SPF
        if self._start_frame == frame:
            self._starters.append((ms, token, ms.current))
            return "join"
        if now < self.busy_until:
            self._waiters.append((ms, token))
            return "wait"
        self._start_frame = frame
        self._starters = [(ms, token, ms.current)]
        self.busy_until = now + 1  # held until the starters are resolved
        self.engine.schedule(now + 1, self._resolve, target=f"CH{self.index}", kind="DSB")
        return "start"

    def _last_frame(self, start: int, update: Update) -> int:
        return start + self.params.dsb_frames - 1 + update.n_fragments - 1

    def _resolve(self, ev):
        start = self._start_frame
        starters = self._starters
        self._start_frame = None
        self._starters = []
        self.stats.transactions += 1
        self.stats.starters += len(starters)
        lasts = [self._last_frame(start, upd) for _, _, upd in starters]
        end = (max(lasts) + 2) * SPF
        self.busy_until = end
        if len(starters) == 1:
            ms, token, upd = starters[0]
            self.master = ms.ms_id
            if self.record_masters:
                self.stats.masters.append((start * SPF, end, ms.ms_id))
            ok = True
            for _ in range(upd.n_fragments):
                if self.rng.random() < self.alpha:
                    ok = False
            if not ok:
                self.stats.frag_errors += 1
            self.engine.schedule(lasts[0] * SPF + 1, self._receive, target="GW", kind="FRAG",
                                 data=(ms, token, upd, ok, lasts[0]))
        else:
            self.master = None
            self.stats.collisions += 1
        for (ms, token, _), last in zip(starters, lasts):
            ms._on_tx(token, last, collided=len(starters) > 1)
        self.engine.schedule(end, self._free, target=f"CH{self.index}", kind="FREE")

    def _receive(self, ev):
        ms, token, upd, ok, last = ev.data
        if not ok or ms.token != token:
            return
        self.stats.received += 1
        self.gateway.receive(upd)
        base = (last + 1) * SPF
        self.engine.schedule(base + 1, self._ack, target=ms.ms_id, kind="ACK1", data=(ms, token))
        self.engine.schedule(base + 3, self._ack, target=ms.ms_id, kind="ACK3", data=(ms, token))

    def _ack(self, ev):
        ms, token = ev.data
        if self.rng.random() >= self.alpha:
            ms._on_ack(token)
        else:
            self.stats.acks_lost += 1

    def _free(self, ev):
        if self.engine.now < self.busy_until:
            return
        self.master = None
        waiters, self._waiters = self._waiters, []
        for ms, token in waiters:
            ms._on_channel_free(token)


@dataclass
class DmoMsStats:
    # buffer-level discards at this MS; end-to-end fate lives in the loss ledger
    drops_preempt: int = 0
    drops_busy: int = 0
    drops_replace: int = 0
    rounds: int = 0
    collided: int = 0
    failed_rounds: int = 0
    delivered: int = 0
    failed: int = 0


class DmoMs:
    """A first responder sending its status over direct mode."""

    def __init__(self, channel: DmoChannel, ms_id, discipline, rng, ledger: LossLedger):
        self.channel = channel
        self.engine = channel.engine
        self.ms_id = ms_id
        self.discipline = Discipline.parse(discipline)
        self.rng = rng
        self.ledger = ledger
        p = channel.params
        self.params = p
        d = self.discipline
        if d is Discipline.PRRT:
            self.retx_limit = math.inf
        elif d in (Discipline.FCFS, Discipline.REPLACE2):
            self.retx_limit = p.dn316
        else:
            self.retx_limit = 0
        self.phase = DmoPhase.IDLE
        self.current: Update | None = None
        self.queue: deque[Update] = deque()
        self.token = 0
        self.retx = 0
        self.timer = None
        self.last_collided = False
        self.stats = DmoMsStats()

    def on_update_arrival(self, update: Update) -> str:
        if self.current is None:
            self.current = update
            self.retx = 0
            self._ready()
            return "started"
        d = self.discipline
        if d.preemptive:
            old = self.current
            self.current = update
            self.retx = 0
            self.stats.drops_preempt += 1
            self.ledger.release(old.uid, "preempt")
            if self.phase in (DmoPhase.TX, DmoPhase.AWAIT_ACK):
                # the old transaction runs out on air; restart once it has
                self._drop_procedure()
                self._ready()
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

    def _drop_procedure(self):
        if self.timer is not None:
            self.timer.cancel()
            self.timer = None
        self.token += 1

    def _ready(self):
        frame = self.engine.now // SPF + 1 + int(self.rng.integers(0, self.params.backoff_frames))
        self.phase = DmoPhase.BACKOFF
        self.engine.schedule(frame * SPF, self._sense, target=self.ms_id, kind="SENSE", data=self.token)

    def _sense(self, ev):
        if ev.data != self.token:
            return
        if self.channel.sense(self, self.token) == "wait":
            self.phase = DmoPhase.WAIT_FREE
        else:
            self.phase = DmoPhase.TX

    def _on_channel_free(self, token):
        if token == self.token:
            self._ready()

    def _on_tx(self, token, last_frame: int, collided: bool):
        if token != self.token:
            return
        self.stats.rounds += 1
        self.last_collided = collided
        if collided:
            self.stats.collided += 1
        self.phase = DmoPhase.AWAIT_ACK
        expiry = (last_frame + 1 + self.params.dt316) * SPF
        self.timer = self.engine.schedule(expiry, self._on_timeout, target=self.ms_id,
                                          kind="DT316", data=token)

    def _on_ack(self, token):
        if token != self.token or self.current is None:
            return
        self._drop_procedure()
        self.stats.delivered += 1
        self.ledger.retire(self.current.uid)
        self._next()

    def _on_timeout(self, ev):
        if ev.data != self.token:
            return
        self.timer = None
        self.stats.failed_rounds += 1
        self.token += 1
        if self.retx < self.retx_limit:
            self.retx += 1
            self._ready()
            return
        self.stats.failed += 1
        self.ledger.release(self.current.uid, "access_fail" if self.last_collided else "channel")
        self._next()

    def _next(self):
        self.current = self.queue.popleft() if self.queue else None
        self.retx = 0
        if self.current is not None:
            self._ready()
        else:
            self.phase = DmoPhase.IDLE


@dataclass
class GatewayStats:
    received: int = 0
    duplicates: int = 0


class Gateway:
    """Receives direct-mode messages and relays them through its own trunked MS.

    The receive side and the trunked transmit side run independently.
    """

    def __init__(self, engine, tmo_ms, ledger: LossLedger):
        self.engine = engine
        self.tmo_ms = tmo_ms
        self.ledger = ledger
        self._seen: set = set()
        self.stats = GatewayStats()

    @property
    def discipline(self) -> Discipline:
        return self.tmo_ms.discipline

    def accept(self, update: Update) -> bool:
        """Take a copy of a newly received update; False for a duplicate."""
        if update.uid in self._seen:
            self.stats.duplicates += 1
            return False
        self._seen.add(update.uid)
        self.stats.received += 1
        self.ledger.copy(update.uid)
        return True

    def receive(self, update: Update):
        if self.accept(update):
            self.engine.schedule(self.engine.now, self._relay, target="GW", kind="RELAY", data=update)

    def _relay(self, ev):
        self.tmo_ms.on_update_arrival(ev.data)


def gateway_relay(gateway: Gateway, update: Update) -> str:
    """Hand a fully received update straight to the relay queue."""
    if not gateway.accept(update):
        return "duplicate"
    return gateway.tmo_ms.on_update_arrival(update)
