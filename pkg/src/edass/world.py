"""Ground truth: deployment field, target trajectories and the gas plume grid."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .engine import SimTime

FEET_TO_M = 0.3048
RADAR_RANGE_M = 30 * FEET_TO_M  # 9.144
PLUME_PERSISTENCE_S = 300.0


class BeforeStart(ValueError):
    """Target queried before its first waypoint."""


class OutOfField(ValueError):
    """Point lies outside the deployment field."""


class Position(NamedTuple):
    x: float
    y: float

    def __str__(self) -> str:
        return f"{self.x!r},{self.y!r}"


def distance(a: Position, b: Position) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass
class DeploymentField:
    width: float
    height: float
    nodes: Dict[int, Position] = field(default_factory=dict)

    def contains(self, p: Position) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def validate(self) -> None:
        for node_id, pos in self.nodes.items():
            if not (math.isfinite(pos[0]) and math.isfinite(pos[1])):
                raise ValueError(f"node {node_id} has a non-finite position")
            if not self.contains(pos):
                raise ValueError(f"node {node_id} at {pos} lies outside the field")


@dataclass
class Cargo:
    ferrous_mass: float = 0.0
    chemical: Optional[Tuple[float, ...]] = None
    gas_rate: float = 0.0
    identity: Optional[str] = None


@dataclass
class Target:
    target_id: str
    waypoints: List[Tuple[SimTime, Position]]
    cargo: Cargo = field(default_factory=Cargo)

    def __post_init__(self):
        self.waypoints = [(float(t), Position(*p)) for t, p in self.waypoints]
        self._times = [t for t, _ in self.waypoints]

    def validate(self) -> None:
        if not self.waypoints:
            raise ValueError(f"target {self.target_id} has no waypoints")
        for (t0, _), (t1, _) in zip(self.waypoints, self.waypoints[1:]):
            if not t1 > t0:
                raise ValueError(f"target {self.target_id}: waypoint times must be strictly increasing ({t0} then {t1})")

    @property
    def start(self) -> SimTime:
        return self.waypoints[0][0]

    def present_at(self, t: SimTime) -> bool:
        return t >= self.start


def position_at(target: Target, t: SimTime) -> Position:
    """Piecewise-linear position; the target holds its last waypoint afterwards."""
    wps = target.waypoints
    if t < wps[0][0]:
        raise BeforeStart(f"target {target.target_id} starts at t={wps[0][0]}, queried t={t}")
    i = bisect.bisect_right(target._times, t)
    if i >= len(wps):
        return wps[-1][1]
    t0, p0 = wps[i - 1]
    if t == t0:
        return p0
    t1, p1 = wps[i]
    f = (t - t0) / (t1 - t0)
    return Position(p0.x + (p1.x - p0.x) * f, p0.y + (p1.y - p0.y) * f)


@dataclass
class PlumeCell:
    concentration: float
    last_fed: SimTime


@dataclass
class PlumeField:
    """Residual particle grid. A cell holds its concentration for ``persistence``
    seconds after it was last fed, then reads as empty."""

    width: float
    height: float
    cell_size: float = 2.0
    persistence: float = PLUME_PERSISTENCE_S
    tick_interval: float = 1.0
    cells: Dict[Tuple[int, int], PlumeCell] = field(default_factory=dict)

    def cell_of(self, p: Position) -> Tuple[int, int]:
        if not (0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height):
            raise OutOfField(f"{tuple(p)} outside {self.width}x{self.height} field")
        return (int(p[0] // self.cell_size), int(p[1] // self.cell_size))

    def total_mass(self, t: SimTime) -> float:
        return sum(c.concentration for c in self.cells.values() if t - c.last_fed <= self.persistence)


def feed_plume(plume: PlumeField, target: Target, t: SimTime) -> PlumeField:
    """Deposit one tick of emission into the cell under the target.

    Targets outside the field (or not yet present) deposit nothing.
    """
    rate = target.cargo.gas_rate
    if rate <= 0 or not target.present_at(t):
        return plume
    try:
        key = plume.cell_of(position_at(target, t))
    except OutOfField:
        return plume
    cell = plume.cells.get(key)
    if cell is None or t - cell.last_fed > plume.persistence:
        cell = PlumeCell(0.0, t)
        plume.cells[key] = cell
    cell.concentration += rate * plume.tick_interval
    cell.last_fed = t
    return plume


def plume_concentration(plume: PlumeField, p: Position, t: SimTime) -> float:
    cell = plume.cells.get(plume.cell_of(p))
    if cell is None or t - cell.last_fed > plume.persistence:
        return 0.0
    return cell.concentration


def nodes_within(field_: DeploymentField, center: Position, radius: float) -> List[int]:
    return sorted(n for n, p in field_.nodes.items() if distance(p, center) <= radius)


def nearest_target(targets: Sequence[Target], p: Position, t: SimTime) -> Optional[Target]:
    best = None
    best_d = math.inf
    for target in targets:
        if not target.present_at(t):
            continue
        d = distance(position_at(target, t), p)
        if d < best_d:
            best, best_d = target, d
    return best
