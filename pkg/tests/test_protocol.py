import pytest
from hypothesis import given
from hypothesis import strategies as st

from edass.engine import MESSAGE, SENSOR_TICK, TIMER, Event, RandomSource, UnknownEventKind
from edass.protocol import (
    EnergyLedger,
    EnergyRates,
    LinkParams,
    Message,
    MessageKind,
    Node,
    NodeEnv,
    NodeMode,
    ProtocolParams,
    accrue_energy,
    link_delay,
)
from edass.sensing import ChemicalConfig, RadarConfig, SensorConfig
from edass.world import Cargo, DeploymentField, PlumeField, Position, Target


def env_with(targets=(), **protocol):
    sensors = SensorConfig(chemical=ChemicalConfig(noise_sigma=0), radar=RadarConfig(fix_noise_sigma=0))
    fld = DeploymentField(50, 50, {1: Position(10, 10), 2: Position(15, 10)})
    return NodeEnv(RandomSource(1), sensors, ProtocolParams(**protocol), fld, PlumeField(50, 50), targets)


def tick(t, **data):
    return Event(t, 0, "node:1", SENSOR_TICK, data)


def test_wake_command_wakes_sleeping_node_silently():
    node = Node(1, Position(10, 10))
    body = {"track": "T2@1.000", "time": 1.0, "fix": Position(12, 10), "predicted": Position(13, 10)}
    msg = Message(MessageKind.WAKE_COMMAND, 2, (1,), 1.0, body)
    out = node.handle_event(Event(1.01, 0, "node:1", MESSAGE, {"message": msg}), env_with())
    assert node.mode is NodeMode.ACTIVE
    assert out.messages == []
    assert [kind for _, kind, _ in out.timers] == [SENSOR_TICK]


def test_sleeping_node_ignores_claims():
    node = Node(1, Position(10, 10))
    msg = Message(MessageKind.HEAD_CLAIM, 2, (1,), 1.0, {"round": 1.0, "strength": 0.5})
    out = node.handle_event(Event(1.0, 0, "node:1", MESSAGE, {"message": msg}), env_with())
    assert out.details["ignored"] == "asleep" and node.mode is NodeMode.SLEEP


def test_chemical_positive_notifies_once_and_starts_gas_campaign():
    # parked 5 m away: inside chemical range, outside radar and magnetic
    tgt = Target("t", [(0.0, (10.0, 15.5))], Cargo(chemical=(0.9, 0.1, 0.4)))
    node = Node(1, Position(10, 10), mode=NodeMode.ACTIVE)
    env = env_with([tgt])
    out = node.handle_event(tick(1.0, tick="active", epoch=0), env)
    assert [m.kind for m in out.messages] == [MessageKind.CU_NOTIFY]
    gas = [d for _, _, d in out.timers if d.get("tick") == "gas"]
    assert len(gas) == 1
    out2 = node.handle_event(tick(2.0, tick="active", epoch=0), env)
    assert out2.messages == []


def test_idle_timeout_returns_node_to_sleep():
    node = Node(1, Position(10, 10), mode=NodeMode.ACTIVE)
    env = env_with(idle_timeout=3.0)
    node.last_activity = 0.0
    out = node.handle_event(tick(2.0, tick="active", epoch=0), env)
    assert node.mode is NodeMode.ACTIVE
    out = node.handle_event(tick(3.0, tick="active", epoch=0), env)
    assert node.mode is NodeMode.SLEEP and out.details["mode"] == "Active->Sleep"
    assert [d["tick"] for _, _, d in out.timers] == ["guard"]


def test_forced_active_never_sleeps():
    node = Node(1, Position(10, 10), mode=NodeMode.ACTIVE)
    env = env_with(idle_timeout=0.0, forced_active=True)
    for t in range(1, 20):
        node.handle_event(tick(float(t), tick="active", epoch=0), env)
    assert node.mode is NodeMode.ACTIVE


def test_stale_tick_is_ignored():
    node = Node(1, Position(10, 10), mode=NodeMode.ACTIVE)
    out = node.handle_event(tick(1.0, tick="active", epoch=7), env_with())
    assert out.details["stale"] == "1" and out.timers == []


def test_lone_radar_hit_makes_head_and_reports_fix():
    tgt = Target("t", [(0.0, (12.0, 10.0))], Cargo())
    node = Node(1, Position(10, 10), mode=NodeMode.ACTIVE)
    env = env_with([tgt])
    node.handle_event(tick(1.0, tick="active", epoch=0), env)
    out = node.handle_event(Event(1.05, 0, "node:1", TIMER, {"timer": "elect", "round": 1.0}), env)
    assert out.details["role"] == "head" and node.mode is NodeMode.HEAD
    out = node.handle_event(Event(1.1, 0, "node:1", TIMER, {"timer": "fuse", "round": 1.0}), env)
    assert out.details["fix"] == str(Position(12.0, 10.0))
    assert [m.kind for m in out.messages] == [MessageKind.TRACK_UPDATE]
    assert node.mode is NodeMode.ACTIVE


def test_unknown_tick_and_timer():
    node = Node(1, Position(10, 10))
    with pytest.raises(UnknownEventKind):
        node.handle_event(tick(1.0, tick="warp"), env_with())
    with pytest.raises(UnknownEventKind):
        node.handle_event(Event(1.0, 0, "node:1", TIMER, {"timer": "warp"}), env_with())
    with pytest.raises(UnknownEventKind):
        node.handle_event(Event(1.0, 0, "node:1", "teleport", {}), env_with())


def test_link_delay_empty_message_is_propagation():
    assert link_delay(0, "up") == pytest.approx(0.001)


def test_link_delay_one_second_of_upload():
    assert link_delay(int(50e6 / 8), "up") == pytest.approx(1.001)


def test_upload_at_least_twice_download_delay():
    link = LinkParams(propagation=0.0)
    for size in (1, 64, 1500, 10**6):
        assert link_delay(size, "up", link) >= 2 * link_delay(size, "down", link) - 1e-15


def test_link_delay_rejects_bad_direction():
    with pytest.raises(ValueError):
        link_delay(10, "sideways")


def test_wake_command_travels_down():
    msg = Message(MessageKind.WAKE_COMMAND, 1, (2,), 0.0, {})
    assert msg.direction == "down"
    assert Message(MessageKind.TRACK_UPDATE, 1, (2,), 0.0, {}).direction == "up"


def test_accrue_zero_duration_is_identity():
    led = EnergyLedger(consumed=3.5)
    assert accrue_energy(led, NodeMode.ACTIVE, 0.0) == led


def test_accrue_exact():
    led = accrue_energy(EnergyLedger(), NodeMode.HEAD, 2.0, messages=3, samples=4)
    r = EnergyRates()
    assert led.consumed == pytest.approx(2 * r.head + 3 * r.tx + 4 * r.sample)


def test_sleep_cheaper_than_active():
    a = accrue_energy(EnergyLedger(), NodeMode.SLEEP, 60.0)
    b = accrue_energy(EnergyLedger(), NodeMode.ACTIVE, 60.0)
    assert a.consumed < b.consumed


def test_energy_rates_ordering_enforced():
    with pytest.raises(ValueError):
        EnergyRates(sleep=1.0, active=0.5).validate()


modes = st.sampled_from(list(NodeMode))


@given(st.lists(st.tuples(modes, st.floats(0, 100), st.integers(0, 10), st.integers(0, 10)), max_size=30))
def test_ledger_is_monotone(steps):
    led = EnergyLedger()
    for mode, dt, m, s in steps:
        nxt = accrue_energy(led, mode, dt, m, s)
        assert nxt.consumed >= led.consumed
        led = nxt
