"""Scenario assembly: the trunked single-cell topology and the direct-mode
topology with a DM-gateway, their traffic generators and run bookkeeping."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .core import DEFAULT_FRAME_DUR_MS, SLOTS_PER_FRAME, Discipline, ParameterError, RngStream, Update
from .des import Engine
from .dmo import DmoChannel, DmoMs, DmoParams, Gateway
from .metrics import AoiTracker, LossLedger, RunResult, summarize
from .tmo import TmoCell, TmoMs, TmoParams

SETTINGS = {
    1: (Discipline.PRRT, Discipline.FCFS),
    2: (Discipline.FCFS, Discipline.FCFS),
    3: (Discipline.PRRT, Discipline.REPLACE2),
}

# stream key prefixes: (replication, entity kind, index, purpose)
FR, BG, GW, BS, AGENT, CHANNEL = range(1, 7)
ARRIVALS, MAC, VOICE, CALL_DURATION = range(4)


# an update generated inside a slot predates anything else that happens at its end
ARRIVAL_PRIORITY = -1


class ConfigError(ParameterError):
    """Invalid scenario configuration; the message starts with the key path."""


@dataclass
class ScenarioConfig:
    mode: str = "TMO"
    n_c: int = 500
    n_f: int = 10
    lambda_f: float = 0.1
    lambda_c: float = 10 / 3600
    lambda_voice: float = 3 / 3600
    call_dur: tuple = (20.0, 40.0)
    feedback_rate: float | None = None  # None: n_f / 60
    setting: int | None = None
    fr_discipline: str | None = None
    gw_discipline: str | None = None
    bg_discipline: str = "FCFS"
    alpha_ch: float = 0.1
    n_fragments: int = 1
    voice_setup_accesses: int = 1
    frame_dur_ms: float = DEFAULT_FRAME_DUR_MS
    seed: int = 0
    horizon_s: float = 3600.0
    warmup_s: float = 60.0
    positions: list | None = None  # kept for path-loss extensions, unused by the i.i.d. channel
    tmo: TmoParams = field(default_factory=TmoParams)
    dmo: DmoParams = field(default_factory=DmoParams)

    def __post_init__(self):
        self.mode = str(self.mode).upper()
        self.call_dur = tuple(float(x) for x in self.call_dur)
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        if self.mode not in ("TMO", "DMO"):
            bad("mode", f"must be TMO or DMO, got {self.mode!r}")
        if self.n_c < 0:
            bad("n_c", "must be >= 0")
        if self.n_f < 1:
            bad("n_f", "must be >= 1")
        for key in ("lambda_f",):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                bad(key, "must be finite and > 0")
        for key in ("lambda_c", "lambda_voice"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v >= 0):
                bad(key, "must be finite and >= 0")
        if self.feedback_rate is not None and not (math.isfinite(self.feedback_rate) and self.feedback_rate >= 0):
            bad("feedback_rate", "must be finite and >= 0")
        if len(self.call_dur) != 2 or not 0 <= self.call_dur[0] <= self.call_dur[1]:
            bad("call_dur", "must be [low, high] with 0 <= low <= high")
        if not 0 <= self.alpha_ch <= 1:
            bad("alpha_ch", "must be in [0, 1]")
        if self.n_fragments < 1:
            bad("n_fragments", "must be >= 1")
        if self.voice_setup_accesses < 0:
            bad("voice_setup_accesses", "must be >= 0")
        if not self.frame_dur_ms > 0:
            bad("frame_dur_ms", "must be > 0")
        if not (self.horizon_s > 0 and 0 <= self.warmup_s < self.horizon_s):
            bad("horizon_s", "need horizon_s > warmup_s >= 0")
        if self.mode == "TMO":
            if self.setting is not None:
                bad("setting", "only valid in DMO mode")
            if self.gw_discipline is not None:
                bad("gw_discipline", "only valid in DMO mode")
        elif self.setting is not None and self.setting not in SETTINGS:
            bad("setting", "must be 1, 2 or 3")
        for key in ("fr_discipline", "gw_discipline", "bg_discipline"):
            v = getattr(self, key)
            if v is not None:
                try:
                    Discipline.parse(v)
                except ValueError:
                    bad(key, f"unknown discipline {v!r}")
        if self.gw_discipline is not None and Discipline.parse(self.gw_discipline) not in (
                Discipline.FCFS, Discipline.REPLACE2):
            bad("gw_discipline", "gateway queue must be FCFS or REPLACE2")

    @property
    def slot_dur(self) -> float:
        return self.frame_dur_ms / SLOTS_PER_FRAME / 1000.0

    @property
    def effective_feedback_rate(self) -> float:
        return self.n_f / 60 if self.feedback_rate is None else self.feedback_rate

    @property
    def effective_setting(self) -> int | None:
        if self.mode != "DMO":
            return None
        return 1 if self.setting is None else self.setting

    @property
    def disciplines(self) -> tuple:
        """(first responder, gateway) disciplines after applying overrides."""
        if self.mode == "DMO":
            fr, gw = SETTINGS[self.effective_setting]
        else:
            fr, gw = Discipline.PRRT, None
        if self.fr_discipline is not None:
            fr = Discipline.parse(self.fr_discipline)
        if self.gw_discipline is not None:
            gw = Discipline.parse(self.gw_discipline)
        return fr, gw

    @property
    def alpha_dmo(self) -> float:
        a = self.dmo.alpha_ch_dmo
        return self.alpha_ch if a is None else a

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["call_dur"] = list(self.call_dur)
        return d


_NESTED = {"tmo": TmoParams, "dmo": DmoParams}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        key_path = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise ConfigError(f"{key_path}: unknown key")
        if key in _NESTED and cls is ScenarioConfig:
            value = _build(_NESTED[key], value or {}, key_path)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ParameterError, TypeError, ValueError) as exc:
        msg = str(exc)
        if path and not msg.startswith(path):
            msg = f"{path}: {msg}"
        raise ConfigError(msg) from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data or {}, "")


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"<file>: {exc}") from exc
    return config_from_dict(data or {})


def set_path(cfg: ScenarioConfig, key_path: str, value) -> ScenarioConfig:
    """Copy of ``cfg`` with one (possibly nested, dotted) key replaced and re-validated."""
    d = cfg.to_dict()
    node = d
    parts = key_path.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"{key_path}: unknown key")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"{key_path}: unknown key")
    node[parts[-1]] = value
    return config_from_dict(d)


@dataclass
class VoiceCall:
    caller: object
    setup_time: float
    duration: float


class Agent:
    """Remote agent behind the BS: PAoI of uplink updates, feedback source."""

    def __init__(self, ledger: LossLedger, slot_dur: float, warmup_s: float):
        self.ledger = ledger
        self.slot_dur = slot_dur
        self.warmup_s = warmup_s
        self.tracker = AoiTracker()
        self.pooled: list[float] = []
        self.spans: list[float] = []
        self.background = 0

    def deliver(self, update: Update, slot: int):
        if not self.ledger.deliver(update.uid):
            if not self.ledger.tracked(update.uid):
                self.background += 1
            return
        now = slot * self.slot_dur
        sample = self.tracker.record_delivery(update.source_id, update.gen_time, now)
        if now >= self.warmup_s:
            self.spans.append(now - update.gen_time)
            if sample is not None:
                self.pooled.append(sample)


class Simulation:
    """One built scenario instance; call ``run`` once."""

    def __init__(self, cfg: ScenarioConfig, replication: int = 0, trace=None):
        self.cfg = cfg
        self.replication = replication
        self.engine = Engine(start=0, trace=trace)
        self.ledger = LossLedger()
        self.agent = Agent(self.ledger, cfg.slot_dur, cfg.warmup_s)
        self.dl_tracker = AoiTracker()
        self.fr_disc, self.gw_disc = cfg.disciplines
        self.calls: list[VoiceCall] = []
        self.active_calls = 0
        self.entities: list = []
        self._ran = False
        eng = self.engine
        self.cell = TmoCell(eng, cfg.tmo, cfg.alpha_ch, self._rng(BS, 0, 0), self._rng(BS, 0, 1),
                            deliver=self.agent.deliver, ledger=self.ledger, trace=trace)
        self.background = [TmoMs(self.cell, f"C{i}", cfg.bg_discipline, self._rng(BG, i, MAC))
                           for i in range(cfg.n_c)]
        self.gateway = None
        self.channels = []
        if cfg.mode == "TMO":
            self.frs = [TmoMs(self.cell, f"F{i}", self.fr_disc, self._rng(FR, i, MAC))
                        for i in range(cfg.n_f)]
        else:
            gw_ms = TmoMs(self.cell, "GW", self.gw_disc, self._rng(GW, 0, MAC))
            self.gateway = Gateway(eng, gw_ms, self.ledger)
            self.channels = [DmoChannel(eng, k, cfg.dmo, cfg.alpha_dmo, self._rng(CHANNEL, k, 0), self.gateway)
                             for k in range(cfg.dmo.channel_count)]
            self.frs = [DmoMs(self.channels[i % len(self.channels)], f"F{i}", self.fr_disc,
                              self._rng(FR, i, MAC), self.ledger) for i in range(cfg.n_f)]
        self.entities = [m.ms_id for m in self.background] + [m.ms_id for m in self.frs] + ["AGENT"]
        if self.gateway is not None:
            self.entities.append("GW")
        self._wire_traffic()

    def _rng(self, kind, index, purpose) -> RngStream:
        return RngStream(self.cfg.seed, (self.replication, kind, index, purpose))

    @property
    def horizon_slots(self) -> int:
        return math.ceil(self.cfg.horizon_s / self.cfg.slot_dur)

    def _slot_after(self, t: float) -> int:
        return int(t // self.cfg.slot_dur) + 1

    # traffic generators

    def _poisson(self, rate: float, rng: RngStream, emit, target):
        """Poisson arrivals: each update is noticed at the first slot boundary after its generation."""
        if rate <= 0:
            return

        def fire(ev):
            g = ev.data
            emit(g)
            nxt = g + rng.exponential(rate)
            self.engine.schedule(self._slot_after(nxt), fire, target=target, kind="GEN", data=nxt,
                                 priority=ARRIVAL_PRIORITY)

        g0 = rng.exponential(rate)
        self.engine.schedule(self._slot_after(g0), fire, target=target, kind="GEN", data=g0,
                             priority=ARRIVAL_PRIORITY)

    def _wire_traffic(self):
        cfg = self.cfg
        for i, ms in enumerate(self.frs):
            self._poisson(cfg.lambda_f, self._rng(FR, i, ARRIVALS), self._fr_emitter(ms), ms.ms_id)
        for i, ms in enumerate(self.background):
            self._poisson(cfg.lambda_c, self._rng(BG, i, ARRIVALS),
                          lambda g, ms=ms: ms.on_update_arrival(Update(ms.ms_id, g, kind="bg-sds")), ms.ms_id)
            dur_rng = self._rng(BG, i, CALL_DURATION)
            self._poisson(cfg.lambda_voice, self._rng(BG, i, VOICE),
                          lambda g, ms=ms, r=dur_rng: self._call(ms, g, r), ms.ms_id)
        if cfg.mode == "TMO":
            fb_rng = self._rng(AGENT, 0, 1)
            self._poisson(cfg.effective_feedback_rate, self._rng(AGENT, 0, ARRIVALS),
                          lambda g: self._feedback(g, fb_rng), "AGENT")

    def _fr_emitter(self, ms):
        n_frag = self.cfg.n_fragments

        def emit(g):
            upd = Update(ms.ms_id, g, n_fragments=n_frag)
            self.ledger.generate(upd.uid)
            ms.on_update_arrival(upd)
        return emit

    def _call(self, ms, g, dur_rng):
        lo, hi = self.cfg.call_dur
        call = VoiceCall(ms.ms_id, g, float(dur_rng.uniform(lo, hi)))
        self.calls.append(call)
        self.active_calls += 1
        for _ in range(self.cfg.voice_setup_accesses):
            ms.on_update_arrival(Update(ms.ms_id, g, kind="voice-setup"))
        end = self._slot_after(g + call.duration)
        self.engine.schedule(end, self._teardown, target=ms.ms_id, kind="CALL_END", data=call)

    def _teardown(self, ev):
        self.active_calls -= 1

    def _feedback(self, g, rng):
        target = self.frs[int(rng.integers(0, len(self.frs)))]
        upd = Update("AGENT", g, bytes=1, kind="downlink-feedback")

        def received(update, slot, target=target):
            now = slot * self.cfg.slot_dur
            self.dl_tracker.record_delivery(target.ms_id, update.gen_time, now)

        self.cell.send_downlink(upd, received)

    # run and results

    def run(self, max_events: int | None = None) -> RunResult:
        if self._ran:
            raise RuntimeError("a Simulation instance runs once")
        self._ran = True
        self.engine.run_until(until=self.horizon_slots, max_events=max_events)
        return self.result()

    def _uplink_ms(self):
        return [self.gateway.tmo_ms] if self.gateway is not None else self.frs

    def result(self) -> RunResult:
        cfg = self.cfg
        led = self.ledger
        led.check()
        s = summarize(self.agent.pooled)
        per_source = {}
        for ms in self.frs:
            st = self.agent.tracker.sources.get(ms.ms_id)
            per_source[ms.ms_id] = (sum(st.samples) / len(st.samples)) if st and st.samples else math.nan
        ups = self._uplink_ms()
        tx = sum(m.stats.access_tx for m in ups)
        coll = sum(m.stats.access_collided for m in ups)
        chan = sum(m.stats.access_channel for m in ups)
        spans = [x for m in ups for x in m.stats.service_spans]
        extra = {
            "mode": cfg.mode,
            "setting": cfg.effective_setting,
            "fr_discipline": self.fr_disc.value,
            "gw_discipline": self.gw_disc.value if self.gw_disc is not None else "",
            "entities": len(self.entities),
            "collision_rate": coll / tx if tx else 0.0,
            "agg_failure_rate": (coll + chan) / tx if tx else 0.0,
            "access_tx": tx,
            "mean_service_s": (sum(spans) / len(spans) * cfg.slot_dur) if spans else math.nan,
            "mean_delay_s": (sum(self.agent.spans) / len(self.agent.spans)) if self.agent.spans else math.nan,
            "stale": self.agent.tracker.stale,
            "events": self.engine.stats.events,
            "voice_calls": len(self.calls),
            "background_delivered": self.agent.background,
        }
        if self.channels:
            rounds = sum(m.stats.rounds for m in self.frs)
            extra["dmo_collision_rate"] = (sum(m.stats.collided for m in self.frs) / rounds) if rounds else 0.0
            extra["dmo_failure_rate"] = (sum(m.stats.failed_rounds for m in self.frs) / rounds) if rounds else 0.0
        else:
            extra["dmo_collision_rate"] = math.nan
            extra["dmo_failure_rate"] = math.nan
        dl = self.dl_tracker.samples()
        extra["feedback_deliveries"] = self.dl_tracker.deliveries
        extra["feedback_mean_paoi"] = float(dl.mean()) if dl.size else math.nan
        res = RunResult(s.mean, s.half_width, s.se, s.n, s.flagged, led.generated, led.delivered,
                        led.in_flight, dict(led.drops), per_source=per_source, extra=extra)
        res.check_conservation()
        return res


def build(cfg: ScenarioConfig, replication: int = 0, trace=None) -> Simulation:
    return Simulation(cfg, replication, trace)


def run_scenario(cfg: ScenarioConfig, replication: int = 0, trace=None,
                 max_events: int | None = None) -> RunResult:
    return build(cfg, replication, trace).run(max_events)
