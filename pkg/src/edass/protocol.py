"""Per-node state machine: duty cycling, sensor escalation, clustering rounds
and energy accounting.

A node never touches the event queue. :meth:`Node.handle_event` returns the
messages it sends and the events it wants scheduled on itself; the simulation
delivers both.

Round protocol for an awake node, on the synchronized radar grid ``k * period``:

* sample magnetic, chemical and radar;
* a radar hit broadcasts a ``HeadClaim`` to neighbours and arms an ``elect`` timer;
* at ``elect`` the strongest claimant becomes head, the others send it a
  ``DetectionReport``;
* at ``fuse`` the head fuses the reports, predicts the next position, wakes the
  nodes around it and reports the fix to the command center.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .engine import MESSAGE, SENSOR_TICK, TIMER, Event, RandomSource, SimTime, UnknownEventKind
from .sensing import (
    Modality,
    SensorConfig,
    SensorReading,
    sample_chemical,
    sample_gas,
    sample_magnetic,
    sample_radar,
)
from .tracking import (
    ZeroWeightSum,
    cluster_id_for,
    elect_cluster_head,
    fuse_location,
    predict_next,
    select_wake_set,
)
from .world import DeploymentField, PlumeField, Position, Target

COMMAND_CENTER = "cc"

HEADER_BYTES = 24


class NodeMode(str, enum.Enum):
    SLEEP = "Sleep"
    ACTIVE = "Active"
    MEMBER = "ClusterMember"
    HEAD = "ClusterHead"

    def __str__(self) -> str:
        return self.value


class MessageKind(str, enum.Enum):
    DETECTION_REPORT = "DetectionReport"
    WAKE_COMMAND = "WakeCommand"
    TRACK_UPDATE = "TrackUpdate"
    HEAD_CLAIM = "HeadClaim"
    CU_NOTIFY = "CuNotify"

    def __str__(self) -> str:
        return self.value


# body sizes in bytes, excluding the header
_BODY_BYTES = {
    MessageKind.HEAD_CLAIM: 16,
    MessageKind.DETECTION_REPORT: 40,
    MessageKind.WAKE_COMMAND: 48,
    MessageKind.TRACK_UPDATE: 48,
    MessageKind.CU_NOTIFY: 24,
}

Address = Union[int, str]


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: Address
    to: Tuple[Address, ...]
    sent_at: SimTime
    body: Mapping[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        extra = 0
        reading = self.body.get("reading")
        if isinstance(reading, SensorReading) and isinstance(reading.payload, tuple):
            extra = 8 * len(reading.payload)
        return HEADER_BYTES + _BODY_BYTES[self.kind] + extra

    @property
    def direction(self) -> str:
        return "down" if self.kind is MessageKind.WAKE_COMMAND else "up"


@dataclass
class LinkParams:
    upload_bps: float = 50e6
    download_bps: float = 100e6
    propagation: float = 0.001
    drop_probability: float = 0.0

    def validate(self) -> None:
        if self.upload_bps <= 0 or self.download_bps <= 0:
            raise ValueError("link rates must be positive")
        if self.propagation < 0:
            raise ValueError("propagation delay must be non-negative")
        if not 0 <= self.drop_probability <= 1:
            raise ValueError("drop probability must lie in [0, 1]")


def link_delay(size_bytes: int, direction: str, link: Optional[LinkParams] = None) -> float:
    link = link or LinkParams()
    if size_bytes < 0:
        raise ValueError("negative message size")
    if direction == "up":
        rate = link.upload_bps
    elif direction == "down":
        rate = link.download_bps
    else:
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    return size_bytes * 8 / rate + link.propagation


@dataclass(frozen=True)
class EnergyRates:
    sleep: float = 0.03e-3
    active: float = 24e-3
    head: float = 36e-3
    tx: float = 50e-6
    sample: float = 10e-6

    def validate(self) -> None:
        if not 0 <= self.sleep < self.active < self.head:
            raise ValueError("energy rates must satisfy 0 <= sleep < active < head")
        if self.tx < 0 or self.sample < 0:
            raise ValueError("per-message and per-sample costs must be non-negative")

    def power(self, mode: NodeMode) -> float:
        if mode is NodeMode.SLEEP:
            return self.sleep
        if mode is NodeMode.HEAD:
            return self.head
        return self.active


@dataclass(frozen=True)
class EnergyLedger:
    rates: EnergyRates = EnergyRates()
    consumed: float = 0.0


def accrue_energy(ledger: EnergyLedger, mode: NodeMode, duration: float,
                  messages: int = 0, samples: int = 0) -> EnergyLedger:
    if duration < 0:
        raise ValueError("negative duration")
    r = ledger.rates
    delta = r.power(mode) * duration + r.tx * messages + r.sample * samples
    return replace(ledger, consumed=ledger.consumed + delta)


@dataclass
class ProtocolParams:
    guard_period: float = 5.0
    idle_timeout: float = 10.0
    gas_period: float = 10.0
    gas_window: float = 300.0
    claim_window: float = 0.05
    report_window: float = 0.05
    track_timeout: float = 5.0
    forced_active: bool = False

    def validate(self) -> None:
        for name in ("guard_period", "gas_period", "claim_window", "report_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("idle_timeout", "gas_window", "track_timeout"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class NodeEnv:
    """Everything a node may consult while handling an event."""

    rng: RandomSource
    sensors: SensorConfig
    protocol: ProtocolParams
    field: DeploymentField
    plume: PlumeField
    targets: Sequence[Target] = ()
    wake_radius: float = 9.144


@dataclass
class NodeOutcome:
    messages: List[Message] = field(default_factory=list)
    timers: List[Tuple[SimTime, str, Dict[str, Any]]] = field(default_factory=list)
    samples: int = 0
    energy_delta: float = 0.0
    details: Dict[str, str] = field(default_factory=dict)


@dataclass
class _Round:
    time: SimTime
    reading: SensorReading
    claims: Dict[int, float] = field(default_factory=dict)
    cluster_id: Optional[str] = None
    reports: List[SensorReading] = field(default_factory=list)


@dataclass
class _Fix:
    track_id: str
    time: SimTime
    position: Position


def _fmt(x: float) -> str:
    return repr(float(x))


class Node:
    def __init__(self, node_id: int, position: Position, rates: EnergyRates = EnergyRates(), *,
                 neighbors: Sequence[int] = (), guard_phase: float = 0.0,
                 mode: NodeMode = NodeMode.SLEEP):
        self.node_id = node_id
        self.position = Position(*position)
        self.neighbors = tuple(neighbors)
        self.guard_phase = guard_phase
        self.mode = mode
        self.ledger = EnergyLedger(rates)
        self.last_accrual: SimTime = 0.0
        self.epoch = 0
        self.last_activity: SimTime = -math.inf
        self.reported: set = set()
        self.gas_campaign: Optional[Tuple[int, SimTime]] = None  # (id, started)
        self._campaigns = 0
        self.round: Optional[_Round] = None
        self.last_fix: Optional[_Fix] = None

    @property
    def actor_id(self) -> str:
        return f"node:{self.node_id}"

    # scheduling helpers

    def initial_timers(self, env: NodeEnv) -> List[Tuple[SimTime, str, Dict[str, Any]]]:
        if self.mode is NodeMode.SLEEP:
            return [(self.guard_phase, SENSOR_TICK, {"tick": "guard", "epoch": self.epoch})]
        return [(0.0, SENSOR_TICK, {"tick": "active", "epoch": self.epoch})]

    @staticmethod
    def _next_grid(now: SimTime, period: float, phase: float = 0.0) -> SimTime:
        k = math.floor((now - phase) / period + 1e-9) + 1
        return phase + k * period

    def _wake(self, now: SimTime, env: NodeEnv, out: NodeOutcome) -> None:
        out.details["mode"] = f"{self.mode}->{NodeMode.ACTIVE}"
        self.mode = NodeMode.ACTIVE
        self.epoch += 1
        self.reported = set()
        out.timers.append((self._next_grid(now, env.sensors.radar.period), SENSOR_TICK,
                           {"tick": "active", "epoch": self.epoch}))

    def _sleep(self, now: SimTime, env: NodeEnv, out: NodeOutcome) -> None:
        out.details["mode"] = f"{self.mode}->{NodeMode.SLEEP}"
        self.mode = NodeMode.SLEEP
        self.epoch += 1
        self.reported = set()
        self.round = None
        nxt = self._next_grid(now, env.protocol.guard_period, self.guard_phase)
        out.timers.append((nxt, SENSOR_TICK, {"tick": "guard", "epoch": self.epoch}))

    def _notify(self, reading: SensorReading, now: SimTime) -> Message:
        return Message(MessageKind.CU_NOTIFY, self.node_id, (COMMAND_CENTER,), now,
                       {"reading": reading, "modality": reading.modality})

    def _strongest(self, readings) -> Optional[SensorReading]:
        hits = [r for r in readings if r is not None]
        if not hits:
            return None
        return max(hits, key=lambda r: r.strength)

    def _sample(self, modality: Modality, now: SimTime, env: NodeEnv,
                out: NodeOutcome) -> Optional[SensorReading]:
        out.samples += 1
        nid, pos, cfg = self.node_id, self.position, env.sensors
        if modality is Modality.MAGNETIC:
            return self._strongest(sample_magnetic(nid, pos, tg, now, cfg) for tg in env.targets)
        if modality is Modality.CHEMICAL:
            return self._strongest(sample_chemical(nid, pos, tg, now, cfg, env.rng) for tg in env.targets)
        if modality is Modality.RADAR:
            return self._strongest(sample_radar(nid, pos, tg, now, cfg, env.rng) for tg in env.targets)
        return sample_gas(nid, pos, env.plume, now, cfg, env.rng)

    def _escalate(self, readings: Sequence[SensorReading], now: SimTime, env: NodeEnv,
                  out: NodeOutcome) -> None:
        """Magnetic and chemical positives go to the command center once per wake
        episode; a chemical positive also starts a gas-sampling campaign."""
        for r in readings:
            if r.modality in (Modality.MAGNETIC, Modality.CHEMICAL) and r.modality not in self.reported:
                self.reported.add(r.modality)
                out.messages.append(self._notify(r, now))
            if r.modality is Modality.CHEMICAL and self.gas_campaign is None:
                self._campaigns += 1
                self.gas_campaign = (self._campaigns, now)
                out.timers.append((now + env.protocol.gas_period, SENSOR_TICK,
                                   {"tick": "gas", "campaign": self._campaigns}))
                out.details["gas_campaign"] = str(self._campaigns)

    @staticmethod
    def _describe(readings: Sequence[SensorReading], out: NodeOutcome) -> None:
        if readings:
            out.details["detect"] = ",".join(str(r.modality) for r in readings)
            out.details["strength"] = ",".join(f"{r.strength:.6g}" for r in readings)

    # event handlers

    def handle_event(self, event: Event, env: NodeEnv) -> NodeOutcome:
        now = event.time
        before = self.ledger.consumed
        self.ledger = accrue_energy(self.ledger, self.mode, now - self.last_accrual)
        self.last_accrual = now
        out = NodeOutcome()
        data = event.data
        if event.kind == SENSOR_TICK:
            tick = data.get("tick")
            if tick == "guard":
                self._on_guard(now, data, env, out)
            elif tick == "active":
                self._on_active(now, data, env, out)
            elif tick == "gas":
                self._on_gas(now, data, env, out)
            else:
                raise UnknownEventKind(f"sensor tick {tick!r}")
        elif event.kind == TIMER:
            timer = data.get("timer")
            if timer == "elect":
                self._on_elect(now, data, env, out)
            elif timer == "fuse":
                self._on_fuse(now, data, env, out)
            elif timer == "finalize":
                out.details["final"] = "1"
            else:
                raise UnknownEventKind(f"timer {timer!r}")
        elif event.kind == MESSAGE:
            self._on_message(now, data["message"], env, out)
        else:
            raise UnknownEventKind(event.kind)
        self.ledger = accrue_energy(self.ledger, self.mode, 0.0, len(out.messages), out.samples)
        out.energy_delta = self.ledger.consumed - before
        if out.messages:
            out.details["sent"] = ",".join(str(m.kind) for m in out.messages)
        out.details["mode_now"] = str(self.mode)
        out.details["energy"] = _fmt(self.ledger.consumed)
        return out

    def _on_guard(self, now, data, env, out):
        out.details["tick"] = "guard"
        if data.get("epoch") != self.epoch or self.mode is not NodeMode.SLEEP:
            out.details["stale"] = "1"
            return
        readings = [r for r in (self._sample(Modality.MAGNETIC, now, env, out),
                                self._sample(Modality.CHEMICAL, now, env, out)) if r]
        self._describe(readings, out)
        if readings:
            self.last_activity = now
            self._wake(now, env, out)
            self._escalate(readings, now, env, out)
        else:
            out.timers.append((now + env.protocol.guard_period, SENSOR_TICK,
                               {"tick": "guard", "epoch": self.epoch}))

    def _on_active(self, now, data, env, out):
        out.details["tick"] = "active"
        if data.get("epoch") != self.epoch or self.mode is NodeMode.SLEEP:
            out.details["stale"] = "1"
            return
        if self.mode is NodeMode.MEMBER:
            self.mode = NodeMode.ACTIVE
        readings = [r for r in (self._sample(Modality.MAGNETIC, now, env, out),
                                self._sample(Modality.CHEMICAL, now, env, out),
                                self._sample(Modality.RADAR, now, env, out)) if r]
        self._describe(readings, out)
        if readings:
            self.last_activity = now
        self._escalate(readings, now, env, out)
        radar = next((r for r in readings if r.modality is Modality.RADAR), None)
        if radar is not None:
            self.round = _Round(now, radar)
            if self.neighbors:
                out.messages.append(Message(MessageKind.HEAD_CLAIM, self.node_id, self.neighbors, now,
                                            {"round": now, "strength": radar.strength}))
            out.timers.append((now + env.protocol.claim_window, TIMER, {"timer": "elect", "round": now}))
            out.details["fix"] = str(radar.payload)
        idle = now - self.last_activity >= env.protocol.idle_timeout
        if not env.protocol.forced_active and radar is None and self.gas_campaign is None and idle:
            self._sleep(now, env, out)
        else:
            out.timers.append((self._next_grid(now, env.sensors.radar.period), SENSOR_TICK,
                               {"tick": "active", "epoch": self.epoch}))

    def _on_gas(self, now, data, env, out):
        out.details["tick"] = "gas"
        campaign = self.gas_campaign
        if campaign is None or data.get("campaign") != campaign[0]:
            out.details["stale"] = "1"
            return
        out.details["campaign"] = str(campaign[0])
        reading = self._sample(Modality.GAS, now, env, out)
        if reading is not None:
            self._describe([reading], out)
            self.last_activity = now
            out.messages.append(self._notify(reading, now))
            self.gas_campaign = None
            out.details["campaign_end"] = "found"
        elif now + env.protocol.gas_period <= campaign[1] + env.protocol.gas_window:
            out.timers.append((now + env.protocol.gas_period, SENSOR_TICK,
                               {"tick": "gas", "campaign": campaign[0]}))
        else:
            self.gas_campaign = None
            out.details["campaign_end"] = "expired"

    def _on_elect(self, now, data, env, out):
        out.details["timer"] = "elect"
        rnd = self.round
        if rnd is None or rnd.time != data.get("round") or self.mode is NodeMode.SLEEP:
            out.details["stale"] = "1"
            return
        candidates = [rnd.reading] + [
            SensorReading(nid, rnd.time, Modality.RADAR, s) for nid, s in sorted(rnd.claims.items())
        ]
        head = elect_cluster_head(candidates)
        rnd.cluster_id = cluster_id_for(head, rnd.time)
        out.details["cluster"] = rnd.cluster_id
        if head == self.node_id:
            self.mode = NodeMode.HEAD
            rnd.reports = [rnd.reading]
            out.details["role"] = "head"
            out.timers.append((now + env.protocol.report_window, TIMER, {"timer": "fuse", "round": rnd.time}))
        else:
            self.mode = NodeMode.MEMBER
            out.details["role"] = "member"
            out.details["head"] = str(head)
            out.messages.append(Message(MessageKind.DETECTION_REPORT, self.node_id, (head,), now,
                                        {"reading": rnd.reading, "cluster": rnd.cluster_id}))

    def _on_fuse(self, now, data, env, out):
        out.details["timer"] = "fuse"
        rnd = self.round
        if rnd is None or rnd.time != data.get("round") or self.mode is not NodeMode.HEAD:
            out.details["stale"] = "1"
            return
        weighted = [(r.payload, r.strength) for r in rnd.reports]
        try:
            fix = fuse_location(weighted)
        except ZeroWeightSum:
            # every reporter sits exactly on the range boundary
            fix = fuse_location([(p, 1.0) for p, _ in weighted])
        members = sorted(r.node_id for r in rnd.reports)
        out.details.update(cluster=rnd.cluster_id, members=",".join(map(str, members)),
                           fix=str(fix), fix_t=_fmt(rnd.time))
        prev = self.last_fix
        if prev is not None and prev.time < rnd.time and rnd.time - prev.time <= env.protocol.track_timeout:
            track_id = prev.track_id
        else:
            prev = None
            track_id = f"T{self.node_id}@{rnd.time:.3f}"
        out.details["track"] = track_id
        fix_body = {"track": track_id, "time": rnd.time, "fix": fix, "cluster": rnd.cluster_id,
                    "members": tuple(members)}
        if self.neighbors:
            out.messages.append(Message(MessageKind.TRACK_UPDATE, self.node_id, self.neighbors, now, fix_body))
        out.messages.append(Message(MessageKind.TRACK_UPDATE, self.node_id, (COMMAND_CENTER,), now, fix_body))
        if prev is not None:
            pred_t, pred_p = predict_next((prev.time, prev.position), (rnd.time, fix))
            wake = select_wake_set(pred_p, env.field, env.wake_radius)
            out.details.update(predicted=str(pred_p), pred_t=_fmt(pred_t),
                               wake=",".join(map(str, wake.nodes)) or "-")
            if wake.track_loss:
                out.details["trackloss"] = "1"
            body = {"predicted": pred_p, "pred_time": pred_t, "track": track_id, "time": rnd.time, "fix": fix}
            for nid in wake.nodes:
                if nid != self.node_id:
                    out.messages.append(Message(MessageKind.WAKE_COMMAND, self.node_id, (nid,), now, body))
        self.last_fix = _Fix(track_id, rnd.time, fix)
        self.last_activity = now
        self.mode = NodeMode.ACTIVE
        self.round = None

    def _remember(self, body: Mapping[str, Any]) -> None:
        if self.last_fix is None or body["time"] > self.last_fix.time:
            self.last_fix = _Fix(body["track"], body["time"], Position(*body["fix"]))

    def _on_message(self, now, msg: Message, env, out):
        out.details["msg"] = str(msg.kind)
        out.details["from"] = str(msg.sender)
        out.details["sent_at"] = _fmt(msg.sent_at)
        if msg.kind is MessageKind.WAKE_COMMAND:
            self._remember(msg.body)
            self.last_activity = now
            if self.mode is NodeMode.SLEEP:
                self._wake(now, env, out)
            return
        if self.mode is NodeMode.SLEEP:
            out.details["ignored"] = "asleep"
            return
        if msg.kind is MessageKind.HEAD_CLAIM:
            if self.round is not None and self.round.time == msg.body["round"] and self.round.cluster_id is None:
                self.round.claims[int(msg.sender)] = msg.body["strength"]
            else:
                out.details["ignored"] = "no-round"
        elif msg.kind is MessageKind.DETECTION_REPORT:
            rnd = self.round
            if self.mode is NodeMode.HEAD and rnd is not None and rnd.cluster_id == msg.body["cluster"]:
                rnd.reports.append(msg.body["reading"])
            else:
                out.details["ignored"] = "not-head"
        elif msg.kind is MessageKind.TRACK_UPDATE:
            self._remember(msg.body)
        else:
            raise UnknownEventKind(f"node cannot handle {msg.kind}")
