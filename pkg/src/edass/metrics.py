"""Summary metrics computed from a trace and the scenario that produced it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .scenario import Scenario
from .trace import TraceHeader, TraceLine
from .world import Position, nearest_target, position_at


class MismatchedTrace(ValueError):
    pass


@dataclass
class MetricsSummary:
    first_detection_latency: Optional[float]
    confirmation_latency: Optional[float]
    tracking_rmse: Optional[float]
    fix_count: int
    track_loss_count: int
    energy_total: float
    energy_per_node: Dict[int, float] = field(default_factory=dict)
    alert_sequence: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        def opt(x):
            return "none" if x is None else f"{x:.6f}"

        lines = [
            f"first_detection_latency_s: {opt(self.first_detection_latency)}",
            f"confirmation_latency_s: {opt(self.confirmation_latency)}",
            f"tracking_rmse_m: {opt(self.tracking_rmse)}",
            f"fix_count: {self.fix_count}",
            f"track_loss_count: {self.track_loss_count}",
            f"energy_total_j: {self.energy_total:.9f}",
            f"alert_sequence: {','.join(self.alert_sequence) or 'none'}",
        ]
        lines += [f"energy_node_{nid}_j: {e:.9f}" for nid, e in sorted(self.energy_per_node.items())]
        return "\n".join(lines) + "\n"


def _position(text: str) -> Position:
    x, y = text.split(",")
    return Position(float(x), float(y))


def compute_metrics(lines: Sequence[TraceLine], scenario: Scenario,
                    header: Optional[TraceHeader] = None) -> MetricsSummary:
    if header is not None and header.fingerprint != scenario.fingerprint():
        raise MismatchedTrace(f"trace was produced by scenario {header.fingerprint}, "
                              f"not {scenario.fingerprint()}")
    node_ids = set(scenario.field.nodes)
    target_ids = {t.target_id for t in scenario.targets}
    starts = [t.start for t in scenario.targets]
    origin = min(starts) if starts else None

    first_detect = first_confirm = None
    sq_errors: List[float] = []
    losses = 0
    energy: Dict[int, float] = {nid: 0.0 for nid in node_ids}
    alerts: List[str] = []

    for ln in lines:
        actor = ln.actor
        d = ln.details
        if actor.startswith("node:"):
            nid = int(actor[5:])
            if nid not in node_ids:
                raise MismatchedTrace(f"trace mentions unknown node {nid}")
            if "energy" in d:
                energy[nid] = float(d["energy"])
            if "detect" in d and first_detect is None:
                first_detect = ln.time
            if d.get("timer") == "fuse" and "fix" in d:
                fix_t = float(d["fix_t"])
                truth = nearest_target(scenario.targets, _position(d["fix"]), fix_t)
                if truth is not None:
                    fix = _position(d["fix"])
                    p = position_at(truth, fix_t)
                    sq_errors.append((fix.x - p.x) ** 2 + (fix.y - p.y) ** 2)
                if d.get("trackloss") == "1":
                    losses += 1
        elif actor.startswith("target:"):
            if actor[7:] not in target_ids:
                raise MismatchedTrace(f"trace mentions unknown target {actor[7:]}")
        elif actor == "cc":
            if "match" in d and first_confirm is None:
                first_confirm = ln.time
            if "alerts" in d:
                alerts += d["alerts"].split(",")
        else:
            raise MismatchedTrace(f"unknown actor {actor}")

    def since_origin(t):
        return None if t is None or origin is None else t - origin

    rmse = math.sqrt(sum(sq_errors) / len(sq_errors)) if sq_errors else None
    return MetricsSummary(
        first_detection_latency=since_origin(first_detect),
        confirmation_latency=since_origin(first_confirm),
        tracking_rmse=rmse,
        fix_count=len(sq_errors),
        track_loss_count=losses,
        energy_total=sum(energy.values()),
        energy_per_node=energy,
        alert_sequence=alerts,
    )
