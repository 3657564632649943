"""Build a runnable world from a scenario and drive it to ``t_end``."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Optional

from .command import Alert, CommandCenter
from .engine import MESSAGE, TARGET_MOTION, TIMER, Event, Simulator, TraceRecord
from .protocol import COMMAND_CENTER, Message, Node, NodeEnv, NodeMode, link_delay
from .scenario import Scenario
from .trace import format_trace
from .world import PlumeField, Target, distance, feed_plume, nearest_target, position_at


class NodeActor:
    """Adapter between the event loop and a :class:`Node`."""

    def __init__(self, node: Node, env: NodeEnv, world: "World"):
        self.node = node
        self.env = env
        self.world = world

    def handle(self, event: Event, sim: Simulator) -> Dict[str, str]:
        out = self.node.handle_event(event, self.env)
        for when, kind, data in out.timers:
            sim.schedule(when, self.node.actor_id, kind, data)
        for msg in out.messages:
            self.world.send(msg)
        return out.details


class CommandCenterActor:
    def __init__(self, cc: CommandCenter):
        self.cc = cc

    def handle(self, event: Event, sim: Simulator) -> Dict[str, str]:
        return self.cc.handle(event, sim)


class TargetActor:
    def __init__(self, target: Target, plume: PlumeField):
        self.target = target
        self.plume = plume

    def handle(self, event: Event, sim: Simulator) -> Dict[str, str]:
        t = event.time
        feed_plume(self.plume, self.target, t)
        sim.schedule(t + self.plume.tick_interval, event.actor, TARGET_MOTION)
        return {"pos": str(position_at(self.target, t))}


@dataclass
class RunResult:
    scenario: Scenario
    trace: List[TraceRecord]
    nodes: Dict[int, Node]
    command_center: CommandCenter
    plume: PlumeField

    @property
    def alerts(self) -> List[Alert]:
        return self.command_center.alerts

    @property
    def energy_total(self) -> float:
        return sum(n.ledger.consumed for n in self.nodes.values())

    def trace_text(self) -> str:
        return format_trace(self.trace, self.scenario)


class World:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.sim = Simulator(scenario.seed)
        fld = scenario.field
        self.plume = PlumeField(fld.width, fld.height, scenario.cell_size, tick_interval=scenario.plume_tick)
        self.env = NodeEnv(self.sim.rng, scenario.sensors, scenario.protocol, fld, self.plume,
                           tuple(scenario.targets), scenario.wake_radius)
        # any two nodes that can both see one target are within two radar ranges
        reach = 2 * scenario.sensors.radar.range
        forced = scenario.protocol.forced_active
        self.nodes: Dict[int, Node] = {}
        for nid in sorted(fld.nodes):
            pos = fld.nodes[nid]
            neighbors = [m for m in sorted(fld.nodes) if m != nid and distance(fld.nodes[m], pos) <= reach]
            phase = self.sim.rng.uniform(0.0, scenario.protocol.guard_period)
            node = Node(nid, pos, scenario.energy, neighbors=neighbors, guard_phase=phase,
                        mode=NodeMode.ACTIVE if forced else NodeMode.SLEEP)
            self.nodes[nid] = node
            self.sim.add_actor(node.actor_id, NodeActor(node, self.env, self))
        self.cc = CommandCenter(scenario.signatures, scenario.watchlist, scenario.tolerance,
                                capture_identity=self._capture_identity, node_positions=dict(fld.nodes))
        self.sim.add_actor(COMMAND_CENTER, CommandCenterActor(self.cc))
        for target in scenario.targets:
            self.sim.add_actor(f"target:{target.target_id}", TargetActor(target, self.plume))

    def _capture_identity(self, where, t) -> Optional[str]:
        # stands in for the camera plus identity database
        target = nearest_target(self.scenario.targets, where, t)
        return target.cargo.identity if target is not None else None

    def send(self, msg: Message) -> None:
        delay = link_delay(msg.size, msg.direction, self.scenario.link)
        p_drop = self.scenario.link.drop_probability
        for dest in msg.to:
            if p_drop > 0 and self.sim.rng.random() < p_drop:
                continue
            actor = COMMAND_CENTER if dest == COMMAND_CENTER else f"node:{dest}"
            self.sim.schedule(msg.sent_at + delay, actor, MESSAGE, {"message": msg})

    def start(self) -> None:
        t_end = self.scenario.t_end
        for node in self.nodes.values():
            for when, kind, data in node.initial_timers(self.env):
                self.sim.schedule(when, node.actor_id, kind, data)
            self.sim.schedule(t_end, node.actor_id, TIMER, {"timer": "finalize"})
        for target in self.scenario.targets:
            if target.start <= t_end:
                self.sim.schedule(max(target.start, 0.0), f"target:{target.target_id}", TARGET_MOTION)

    def run(self) -> RunResult:
        self.start()
        self.sim.run_until(self.scenario.t_end)
        return RunResult(self.scenario, self.sim.trace, self.nodes, self.cc, self.plume)


def run_scenario(scenario: Scenario, *, seed: Optional[int] = None, t_end: Optional[float] = None,
                 forced_active: Optional[bool] = None) -> RunResult:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if t_end is not None:
        changes["t_end"] = t_end
    if forced_active is not None:
        changes["protocol"] = dataclasses.replace(scenario.protocol, forced_active=forced_active)
    if changes:
        scenario = dataclasses.replace(scenario, **changes)
    return World(scenario).run()
