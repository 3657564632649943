"""Cluster head election, weighted-centroid fusion and constant-velocity prediction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

from .engine import SimTime
from .sensing import SensorReading
from .world import DeploymentField, Position, nodes_within


class EmptyReports(ValueError):
    pass


class ZeroWeightSum(ValueError):
    pass


class NonIncreasingTimes(ValueError):
    pass


@dataclass(frozen=True)
class Cluster:
    cluster_id: str
    head: int
    members: FrozenSet[int]
    formed_at: SimTime

    def __post_init__(self):
        if self.head not in self.members:
            raise ValueError(f"cluster {self.cluster_id}: head {self.head} not among members")


@dataclass
class TargetTrack:
    track_id: str
    fixes: List[Tuple[SimTime, Position, str]] = field(default_factory=list)
    predicted: Optional[Tuple[SimTime, Position]] = None

    def add_fix(self, t: SimTime, p: Position, source: str = "fused") -> bool:
        """Append a fix; out-of-order or duplicate times are refused."""
        if self.fixes and t <= self.fixes[-1][0]:
            return False
        self.fixes.append((t, Position(*p), source))
        return True

    @property
    def last(self) -> Optional[Tuple[SimTime, Position]]:
        if not self.fixes:
            return None
        t, p, _ = self.fixes[-1]
        return t, p


def cluster_id_for(head: int, t: SimTime) -> str:
    return f"C{head}@{t:.3f}"


def elect_cluster_head(reports: Sequence[SensorReading]) -> int:
    """Strongest reporter wins; ties go to the smallest node id."""
    if not reports:
        raise EmptyReports("no reports to elect a head from")
    best = min(reports, key=lambda r: (-r.strength, r.node_id))
    return best.node_id


def fuse_location(reports: Sequence[Tuple[Position, float]]) -> Position:
    """Strength-weighted centroid of the reported positions.

    Accumulated as offsets from the first position, so identical inputs
    reproduce that position exactly.
    """
    if not reports:
        raise EmptyReports("no reports to fuse")
    total = 0.0
    for _, w in reports:
        if w < 0:
            raise ValueError(f"negative weight {w}")
        total += w
    if total <= 0:
        raise ZeroWeightSum("report strengths sum to zero")
    ox, oy = reports[0][0]
    dx = dy = 0.0
    for p, w in reports:
        dx += w * (p[0] - ox)
        dy += w * (p[1] - oy)
    return Position(ox + dx / total, oy + dy / total)


def predict_next(prev: Tuple[SimTime, Position],
                 cur: Tuple[SimTime, Position]) -> Tuple[SimTime, Position]:
    """Extrapolate one more interval of the same length at constant velocity."""
    (t0, p0), (t1, p1) = prev, cur
    if not t1 > t0:
        raise NonIncreasingTimes(f"current fix t={t1} does not follow previous t={t0}")
    return t1 + (t1 - t0), Position(p1[0] + (p1[0] - p0[0]), p1[1] + (p1[1] - p0[1]))


@dataclass(frozen=True)
class WakeSet:
    nodes: Tuple[int, ...]

    @property
    def track_loss(self) -> bool:
        return not self.nodes


def select_wake_set(predicted: Position, field_: DeploymentField, wake_radius: float) -> WakeSet:
    if not wake_radius > 0:
        raise ValueError("wake radius must be positive")
    return WakeSet(tuple(nodes_within(field_, predicted, wake_radius)))
