"""Command center: signature database, watchlist and alert escalation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .engine import MESSAGE, Event, SimTime, UnknownEventKind
from .protocol import Message, MessageKind
from .sensing import Modality, SensorReading
from .tracking import TargetTrack
from .world import Position

DEPARTMENTS = ("police", "bomb-disposal", "traffic-control", "emergency-medical", "intelligence")


class DimensionMismatch(ValueError):
    pass


class AlreadyKnown(ValueError):
    """register_unknown called for an observation the database already matches."""


class Unconfirmed(RuntimeError):
    """Escalation requested without a chemical confirmation."""


class RateClass(str, enum.Enum):
    HIGH = "high"  # detonates
    LOW = "low"  # deflagrates

    def __str__(self) -> str:
        return self.value


class ListStatus(str, enum.Enum):
    BROWN = "brown"
    BLACK = "black"

    def __str__(self) -> str:
        return self.value


class AlertKind(str, enum.Enum):
    TRAFFIC_SIGNAL_OVERRIDE = "TrafficSignalOverride"
    VOICE_BROADCAST = "VoiceBroadcast"
    RED_ZONE_DECLARED = "RedZoneDeclared"
    BASE_STATION_REPORT = "BaseStationReport"
    POLICE_NOTIFY = "PoliceNotify"

    def __str__(self) -> str:
        return self.value


ESCALATION_ORDER = (
    AlertKind.TRAFFIC_SIGNAL_OVERRIDE,
    AlertKind.VOICE_BROADCAST,
    AlertKind.RED_ZONE_DECLARED,
    AlertKind.BASE_STATION_REPORT,
)


@dataclass(frozen=True)
class SignatureRecord:
    record_id: int
    name: str
    features: Tuple[float, ...]
    rate_class: RateClass = RateClass.HIGH


@dataclass(frozen=True)
class WatchlistEntry:
    identity: str
    name: str = ""
    address: str = ""
    status: ListStatus = ListStatus.BROWN
    explosives: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Alert:
    kind: AlertKind
    time: SimTime
    zone: str
    details: str = ""


@dataclass(frozen=True)
class Known:
    record_id: int


@dataclass(frozen=True)
class Unknown:
    pass


UNKNOWN = Unknown()
MatchResult = Union[Known, Unknown]


@dataclass(frozen=True)
class NotListed:
    pass


@dataclass(frozen=True)
class Listed:
    status: ListStatus


NOT_LISTED = NotListed()
IdentityResult = Union[NotListed, Listed]


def validate_database(db: Sequence[SignatureRecord]) -> None:
    ids = [r.record_id for r in db]
    if sorted(ids) != list(range(1, len(db) + 1)):
        raise ValueError(f"signature ids must be unique and dense from 1, got {ids}")
    dims = {len(r.features) for r in db}
    if len(dims) > 1:
        raise DimensionMismatch(f"signature vectors have mixed dimensions {sorted(dims)}")
    for r in db:
        if any(v < 0 or not math.isfinite(v) for v in r.features):
            raise ValueError(f"signature {r.record_id} has a negative or non-finite feature")


def _dim(db: Sequence[SignatureRecord]) -> Optional[int]:
    return len(db[0].features) if db else None


def default_tolerance(db: Sequence[SignatureRecord], fraction: float = 0.15) -> float:
    """A fixed fraction of the mean signature norm."""
    if not db:
        return 0.0
    return fraction * sum(math.hypot(*r.features) for r in db) / len(db)


def match_signature(observed: Sequence[float], db: Sequence[SignatureRecord],
                    tolerance: float) -> MatchResult:
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    if not db:
        return UNKNOWN
    if len(observed) != _dim(db):
        raise DimensionMismatch(f"observed dimension {len(observed)} != database dimension {_dim(db)}")
    best_id, best_d = None, math.inf
    for rec in sorted(db, key=lambda r: r.record_id):
        d = math.dist(observed, rec.features)
        if d < best_d:
            best_id, best_d = rec.record_id, d
    return Known(best_id) if best_d <= tolerance else UNKNOWN


def register_unknown(observed: Sequence[float], db: Sequence[SignatureRecord],
                     tolerance: float = 0.0) -> Tuple[List[SignatureRecord], int]:
    """Append ``observed`` as a new high-rate record.

    Refuses when ``observed`` already matches an existing record.
    """
    if db and len(observed) != _dim(db):
        raise DimensionMismatch(f"observed dimension {len(observed)} != database dimension {_dim(db)}")
    prior = match_signature(observed, db, tolerance)
    if isinstance(prior, Known):
        raise AlreadyKnown(f"observation already matches record {prior.record_id}")
    new_id = max((r.record_id for r in db), default=0) + 1
    rec = SignatureRecord(new_id, f"UNKNOWN-{new_id}", tuple(float(v) for v in observed), RateClass.HIGH)
    return list(db) + [rec], new_id


def lookup_identity(identity: Optional[str], watchlist: Dict[str, WatchlistEntry]) -> IdentityResult:
    if identity is None or identity not in watchlist:
        return NOT_LISTED
    return Listed(watchlist[identity].status)


def mark_brown(identity: str, explosive: str,
               watchlist: Dict[str, WatchlistEntry]) -> Dict[str, WatchlistEntry]:
    updated = dict(watchlist)
    entry = updated.get(identity)
    if entry is None:
        updated[identity] = WatchlistEntry(identity, status=ListStatus.BROWN, explosives=(explosive,))
        return updated
    if explosive not in entry.explosives:
        entry = WatchlistEntry(entry.identity, entry.name, entry.address, entry.status,
                               entry.explosives + (explosive,))
    updated[identity] = entry
    return updated


@dataclass
class Confirmation:
    record: Optional[SignatureRecord]
    identity_key: Optional[str] = None
    identity: IdentityResult = NOT_LISTED
    track: Optional[TargetTrack] = None
    amount: float = 0.0
    confirmed_at: SimTime = 0.0


def escalate(confirmed: Confirmation, t: SimTime, zone: str) -> List[Alert]:
    if confirmed is None or confirmed.record is None:
        raise Unconfirmed("no chemical confirmation for this track")
    rec = confirmed.record
    location = "unknown"
    if confirmed.track is not None and confirmed.track.last is not None:
        location = str(confirmed.track.last[1])
    who = confirmed.identity_key or "unidentified"
    alerts = []
    if isinstance(confirmed.identity, Listed) and confirmed.identity.status is ListStatus.BLACK:
        alerts.append(Alert(AlertKind.POLICE_NOTIFY, t, zone, f"blacklisted identity {who} carrying {rec.name}"))
    alerts += [
        Alert(AlertKind.TRAFFIC_SIGNAL_OVERRIDE, t, zone, "signals set to stop inbound traffic"),
        Alert(AlertKind.VOICE_BROADCAST, t, zone, f"evacuate area around {location}"),
        Alert(AlertKind.RED_ZONE_DECLARED, t, zone, f"{rec.name} ({rec.rate_class})"),
        Alert(AlertKind.BASE_STATION_REPORT, t, zone,
              f"identity={who} location={location} explosive={rec.name} class={rec.rate_class} "
              f"amount={confirmed.amount:.6g} departments={'|'.join(DEPARTMENTS)}"),
    ]
    return alerts


class CommandCenter:
    """Single logical control unit; receives CuNotify and TrackUpdate messages."""

    def __init__(self, db: Sequence[SignatureRecord], watchlist: Dict[str, WatchlistEntry],
                 tolerance: Optional[float] = None,
                 capture_identity: Optional[Callable[[Position, SimTime], Optional[str]]] = None,
                 node_positions: Optional[Dict[int, Position]] = None):
        self.db: List[SignatureRecord] = list(db)
        self.watchlist = dict(watchlist)
        self.tolerance = default_tolerance(self.db) if tolerance is None else tolerance
        self.capture_identity = capture_identity or (lambda p, t: None)
        self.node_positions = node_positions or {}
        self.readings: List[SensorReading] = []
        self.tracks: Dict[str, TargetTrack] = {}
        self.latest: Optional[Tuple[str, str]] = None  # (track id, cluster id)
        self.confirmations: Dict[int, Confirmation] = {}
        self.pending: List[int] = []
        self.escalated: set = set()
        self.alerts: List[Alert] = []
        self.red_zones: List[str] = []
        self.max_gas = 0.0

    def handle(self, event: Event, sim=None) -> Dict[str, str]:
        if event.kind != MESSAGE:
            raise UnknownEventKind(f"command center cannot handle {event.kind}")
        msg: Message = event.data["message"]
        details = {"msg": str(msg.kind), "from": str(msg.sender), "sent_at": repr(float(msg.sent_at))}
        if msg.kind is MessageKind.CU_NOTIFY:
            self._on_notify(event.time, msg, details)
        elif msg.kind is MessageKind.TRACK_UPDATE:
            self._on_track(event.time, msg, details)
        else:
            raise UnknownEventKind(f"command center cannot handle {msg.kind}")
        return details

    def _on_notify(self, now, msg, details):
        reading: SensorReading = msg.body["reading"]
        self.readings.append(reading)
        details["modality"] = str(reading.modality)
        details["strength"] = f"{reading.strength:.6g}"
        if reading.modality is Modality.GAS:
            self.max_gas = max(self.max_gas, reading.strength)
            return
        if reading.modality is not Modality.CHEMICAL:
            return
        result = match_signature(reading.payload, self.db, self.tolerance)
        if isinstance(result, Known):
            rid = result.record_id
            details["match"] = str(rid)
        else:
            self.db, rid = register_unknown(reading.payload, self.db, self.tolerance)
            details["match"] = str(rid)
            details["registered"] = self.db[-1].name
        record = self.db[rid - 1]
        if rid in self.confirmations:
            self.confirmations[rid].amount = max(self.confirmations[rid].amount, reading.strength)
            return
        where = self.node_positions.get(reading.node_id, Position(0.0, 0.0))
        key = self.capture_identity(where, now)
        identity = lookup_identity(key, self.watchlist)
        if key is not None:
            self.watchlist = mark_brown(key, record.name, self.watchlist)
        details["identity"] = key or "-"
        details["listed"] = str(identity.status) if isinstance(identity, Listed) else "no"
        self.confirmations[rid] = Confirmation(record, key, identity, amount=reading.strength,
                                               confirmed_at=now)
        self.pending.append(rid)
        self._flush(now, details)

    def _on_track(self, now, msg, details):
        body = msg.body
        track = self.tracks.setdefault(body["track"], TargetTrack(body["track"]))
        track.add_fix(body["time"], body["fix"])
        self.latest = (body["track"], body["cluster"])
        details["track"] = body["track"]
        details["cluster"] = body["cluster"]
        self._flush(now, details)

    def _flush(self, now, details):
        if not self.pending or self.latest is None:
            return
        track_id, zone = self.latest
        emitted = []
        for rid in self.pending:
            if rid in self.escalated:
                continue
            conf = self.confirmations[rid]
            conf.track = self.tracks[track_id]
            conf.amount = max(conf.amount, self.max_gas)
            alerts = escalate(conf, now, zone)
            self.escalated.add(rid)
            self.alerts += alerts
            self.red_zones.append(zone)
            emitted += alerts
        self.pending = []
        if emitted:
            details["zone"] = zone
            details["alerts"] = ",".join(str(a.kind) for a in emitted)
