"""Scenario files.

A scenario is plain text with a version header and ``[section]`` blocks of
``key = value`` lines. ``#`` starts a comment. Example::

    e-dass-scenario v1

    [run]
    seed = 7
    t_end = 600

    [nodes]
    grid = 1 10 10 5 5 10 10      # first-id cols rows x0 y0 dx dy
    node = 101 50 50

    [signature 1]
    name = TNT
    features = 0.9 0.1 0.4 0.2
    class = high

    [target courier]
    chemical = 0.9 0.1 0.4 0.2
    waypoint = 0 0 45             # time x y
    waypoint = 100 100 45

Unspecified fields keep the defaults of the corresponding config dataclass.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .command import ListStatus, RateClass, SignatureRecord, WatchlistEntry, validate_database
from .protocol import EnergyRates, LinkParams, ProtocolParams
from .sensing import SensorConfig
from .world import RADAR_RANGE_M, Cargo, DeploymentField, Position, Target

HEADER = "e-dass-scenario v1"
BUILTIN_PREFIX = "builtin:"


class ScenarioError(Exception):
    pass


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvariantViolation(ScenarioError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


@dataclass
class Scenario:
    seed: int
    t_end: float = 600.0
    field: DeploymentField = dataclasses.field(default_factory=lambda: DeploymentField(100.0, 100.0))
    cell_size: float = 2.0
    plume_tick: float = 1.0
    sensors: SensorConfig = dataclasses.field(default_factory=SensorConfig)
    energy: EnergyRates = dataclasses.field(default_factory=EnergyRates)
    link: LinkParams = dataclasses.field(default_factory=LinkParams)
    protocol: ProtocolParams = dataclasses.field(default_factory=ProtocolParams)
    signatures: List[SignatureRecord] = dataclasses.field(default_factory=list)
    watchlist: Dict[str, WatchlistEntry] = dataclasses.field(default_factory=dict)
    targets: List[Target] = dataclasses.field(default_factory=list)
    wake_radius: float = RADAR_RANGE_M
    tolerance: Optional[float] = None
    name: str = ""

    def validate(self) -> None:
        _check("seed", 0 <= self.seed < 2**64, "must be a 64-bit unsigned integer")
        _check("run.t_end", self.t_end >= 0, "must be non-negative")
        _check("run.wake_radius", self.wake_radius > 0, "must be positive")
        _check("run.tolerance", self.tolerance is None or self.tolerance >= 0, "must be non-negative")
        _check("field", self.field.width > 0 and self.field.height > 0, "dimensions must be positive")
        _check("field.cell_size", self.cell_size > 0, "must be positive")
        _check("field.plume_tick", self.plume_tick > 0, "must be positive")
        for section, obj in (("field", self.field), ("sensors", self.sensors), ("energy", self.energy),
                             ("link", self.link), ("protocol", self.protocol)):
            try:
                obj.validate()
            except ValueError as e:
                raise InvariantViolation(section, str(e)) from None
        try:
            validate_database(self.signatures)
        except ValueError as e:
            raise InvariantViolation("signature", str(e)) from None
        dim = len(self.signatures[0].features) if self.signatures else None
        seen = set()
        for t in self.targets:
            name = f"target {t.target_id}"
            _check(name, t.target_id not in seen, "duplicate target id")
            seen.add(t.target_id)
            try:
                t.validate()
            except ValueError as e:
                raise InvariantViolation(name, str(e)) from None
            c = t.cargo
            _check(name, c.ferrous_mass >= 0 and c.gas_rate >= 0, "cargo quantities must be non-negative")
            if c.chemical is not None:
                _check(name, all(v >= 0 for v in c.chemical), "chemical vector must be non-negative")
                _check(name, dim is None or len(c.chemical) == dim,
                       f"chemical vector has dimension {len(c.chemical)}, database uses {dim}")

    def fingerprint(self) -> str:
        """Hash of the scenario content, ignoring seed and t_end overrides."""
        neutral = dataclasses.replace(self, seed=0, t_end=0.0, name="")
        return hashlib.sha256(serialize_scenario(neutral).encode()).hexdigest()[:16]


def _check(field_name: str, ok: bool, reason: str) -> None:
    if not ok:
        raise InvariantViolation(field_name, reason)


# section -> key -> (object path, attribute)
def _config_keys() -> Dict[str, Tuple[str, ...]]:
    return {
        "sensors": tuple(f"{grp}.{f.name}" for grp in ("magnetic", "chemical", "gas", "radar")
                         for f in dataclasses.fields(getattr(SensorConfig(), grp))),
        "energy": tuple(f.name for f in dataclasses.fields(EnergyRates)),
        "link": tuple(f.name for f in dataclasses.fields(LinkParams)),
        "protocol": tuple(f.name for f in dataclasses.fields(ProtocolParams)),
    }


def _float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScenarioSyntaxError(line, f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ScenarioSyntaxError(line, f"non-finite number {text!r}")
    return value


def _int(text: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioSyntaxError(line, f"expected an integer, got {text!r}") from None


def _floats(text: str, line: int, n: Optional[int] = None) -> List[float]:
    parts = text.split()
    if n is not None and len(parts) != n:
        raise ScenarioSyntaxError(line, f"expected {n} numbers, got {len(parts)}")
    return [_float(p, line) for p in parts]


def _bool(text: str, line: int) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ScenarioSyntaxError(line, f"expected a boolean, got {text!r}")


def _coerce(value: str, current, line: int):
    if isinstance(current, bool):
        return _bool(value, line)
    if isinstance(current, int) and not isinstance(current, bool):
        return _int(value, line)
    return _float(value, line)


def parse_scenario(text: str, name: str = "") -> Scenario:
    lines = text.splitlines()
    first = next(((i, ln.strip()) for i, ln in enumerate(lines, 1)
                  if ln.strip() and not ln.strip().startswith("#")), None)
    if first is None or first[1] != HEADER:
        raise ScenarioSyntaxError(first[0] if first else 1, f"missing header {HEADER!r}")

    seed: Optional[int] = None
    run: Dict[str, float] = {}
    field_kw: Dict[str, float] = {}
    nodes: Dict[int, Position] = {}
    overrides: Dict[str, Dict[str, Tuple[str, int]]] = {k: {} for k in _config_keys()}
    signatures: List[SignatureRecord] = []
    watchlist: Dict[str, WatchlistEntry] = {}
    targets: List[Target] = []
    tolerance: Optional[float] = None

    section: Optional[Tuple[str, str, int]] = None
    block: Dict[str, object] = {}
    config_keys = _config_keys()

    def close_block():
        if section is None:
            return
        kind, arg, at = section
        if kind == "signature":
            rid = _int(arg, at)
            if "features" not in block:
                raise InvariantViolation(f"signature {rid}", "missing features")
            signatures.append(SignatureRecord(rid, str(block.get("name", f"SIG-{rid}")),
                                              tuple(block["features"]),
                                              block.get("class", RateClass.HIGH)))
        elif kind == "watch":
            if arg in watchlist:
                raise InvariantViolation(f"watch {arg}", "duplicate identity key")
            watchlist[arg] = WatchlistEntry(arg, str(block.get("name", "")), str(block.get("address", "")),
                                            block.get("status", ListStatus.BROWN))
        elif kind == "target":
            cargo = Cargo(float(block.get("ferrous_mass", 0.0)), block.get("chemical"),
                          float(block.get("gas_rate", 0.0)), block.get("identity"))
            targets.append(Target(arg, list(block.get("waypoints", [])), cargo))

    for lineno, raw in enumerate(lines, 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped or (lineno == first[0]):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ScenarioSyntaxError(lineno, "unterminated section header")
            close_block()
            block = {}
            words = stripped[1:-1].split(None, 1)
            if not words:
                raise ScenarioSyntaxError(lineno, "empty section header")
            kind = words[0]
            arg = words[1].strip() if len(words) > 1 else ""
            simple = ("run", "field", "nodes", "sensors", "energy", "link", "protocol")
            if kind in simple and arg:
                raise ScenarioSyntaxError(lineno, f"section [{kind}] takes no argument")
            if kind in ("signature", "watch", "target") and not arg:
                raise ScenarioSyntaxError(lineno, f"section [{kind}] needs an identifier")
            if kind not in simple + ("signature", "watch", "target"):
                raise ScenarioSyntaxError(lineno, f"unknown section [{kind}]")
            section = (kind, arg, lineno)
            continue
        if section is None:
            raise ScenarioSyntaxError(lineno, "key outside any section")
        if "=" not in stripped:
            raise ScenarioSyntaxError(lineno, "expected 'key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        kind = section[0]
        if kind == "run":
            if key == "seed":
                seed = _int(value, lineno)
            elif key == "tolerance":
                tolerance = None if value == "auto" else _float(value, lineno)
            elif key in ("t_end", "wake_radius"):
                run[key] = _float(value, lineno)
            else:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [run]")
        elif kind == "field":
            if key not in ("width", "height", "cell_size", "plume_tick"):
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [field]")
            field_kw[key] = _float(value, lineno)
        elif kind == "nodes":
            if key == "node":
                parts = value.split()
                if len(parts) != 3:
                    raise ScenarioSyntaxError(lineno, "node needs: id x y")
                nid = _int(parts[0], lineno)
                _add_node(nodes, nid, Position(_float(parts[1], lineno), _float(parts[2], lineno)))
            elif key == "grid":
                parts = value.split()
                if len(parts) != 7:
                    raise ScenarioSyntaxError(lineno, "grid needs: first-id cols rows x0 y0 dx dy")
                first_id, cols, rows = (_int(p, lineno) for p in parts[:3])
                x0, y0, dx, dy = (_float(p, lineno) for p in parts[3:])
                nid = first_id
                for r in range(rows):
                    for c in range(cols):
                        _add_node(nodes, nid, Position(x0 + c * dx, y0 + r * dy))
                        nid += 1
            else:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [nodes]")
        elif kind in config_keys:
            if key not in config_keys[kind]:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [{kind}]")
            overrides[kind][key] = (value, lineno)
        elif kind == "signature":
            if key == "name":
                block["name"] = value
            elif key == "features":
                block["features"] = _floats(value, lineno)
            elif key == "class":
                try:
                    block["class"] = RateClass(value)
                except ValueError:
                    raise ScenarioSyntaxError(lineno, "class must be 'high' or 'low'") from None
            else:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [signature]")
        elif kind == "watch":
            if key in ("name", "address"):
                block[key] = value
            elif key == "status":
                try:
                    block["status"] = ListStatus(value)
                except ValueError:
                    raise ScenarioSyntaxError(lineno, "status must be 'brown' or 'black'") from None
            else:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [watch]")
        elif kind == "target":
            if key == "waypoint":
                t, x, y = _floats(value, lineno, 3)
                block.setdefault("waypoints", []).append((t, Position(x, y)))
            elif key in ("ferrous_mass", "gas_rate"):
                block[key] = _float(value, lineno)
            elif key == "chemical":
                block["chemical"] = tuple(_floats(value, lineno))
            elif key == "identity":
                block["identity"] = value
            else:
                raise ScenarioSyntaxError(lineno, f"unknown key {key!r} in [target]")
    close_block()

    if seed is None:
        raise InvariantViolation("run.seed", "seed is mandatory")

    sensors = SensorConfig()
    for key, (value, lineno) in overrides["sensors"].items():
        grp, attr = key.split(".")
        obj = getattr(sensors, grp)
        setattr(obj, attr, _coerce(value, getattr(obj, attr), lineno))
    built = {}
    for section_name, cls in (("energy", EnergyRates), ("link", LinkParams), ("protocol", ProtocolParams)):
        defaults = cls()
        kw = {k: _coerce(v, getattr(defaults, k), ln) for k, (v, ln) in overrides[section_name].items()}
        built[section_name] = cls(**kw)

    scenario = Scenario(
        seed=seed,
        t_end=run.get("t_end", 600.0),
        field=DeploymentField(field_kw.get("width", 100.0), field_kw.get("height", 100.0), nodes),
        cell_size=field_kw.get("cell_size", 2.0),
        plume_tick=field_kw.get("plume_tick", 1.0),
        sensors=sensors,
        energy=built["energy"],
        link=built["link"],
        protocol=built["protocol"],
        signatures=sorted(signatures, key=lambda r: r.record_id),
        watchlist=watchlist,
        targets=targets,
        wake_radius=run.get("wake_radius", RADAR_RANGE_M),
        tolerance=tolerance,
        name=name,
    )
    scenario.validate()
    return scenario


def _add_node(nodes: Dict[int, Position], nid: int, pos: Position) -> None:
    if nid in nodes:
        raise InvariantViolation(f"node {nid}", "duplicate node id")
    nodes[nid] = pos


def _num(x: float) -> str:
    return repr(float(x))


def serialize_scenario(s: Scenario) -> str:
    out = [HEADER, "", "[run]", f"seed = {s.seed}", f"t_end = {_num(s.t_end)}",
           f"wake_radius = {_num(s.wake_radius)}",
           f"tolerance = {'auto' if s.tolerance is None else _num(s.tolerance)}",
           "", "[field]", f"width = {_num(s.field.width)}", f"height = {_num(s.field.height)}",
           f"cell_size = {_num(s.cell_size)}", f"plume_tick = {_num(s.plume_tick)}",
           "", "[nodes]"]
    for nid in sorted(s.field.nodes):
        p = s.field.nodes[nid]
        out.append(f"node = {nid} {_num(p.x)} {_num(p.y)}")
    out += ["", "[sensors]"]
    for grp in ("magnetic", "chemical", "gas", "radar"):
        obj = getattr(s.sensors, grp)
        for f in dataclasses.fields(obj):
            out.append(f"{grp}.{f.name} = {_num(getattr(obj, f.name))}")
    for section_name, obj in (("energy", s.energy), ("link", s.link), ("protocol", s.protocol)):
        out += ["", f"[{section_name}]"]
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else _num(v)}")
    for rec in s.signatures:
        out += ["", f"[signature {rec.record_id}]", f"name = {rec.name}",
                "features = " + " ".join(_num(v) for v in rec.features), f"class = {rec.rate_class}"]
    for key in sorted(s.watchlist):
        e = s.watchlist[key]
        out += ["", f"[watch {key}]"]
        if e.name:
            out.append(f"name = {e.name}")
        if e.address:
            out.append(f"address = {e.address}")
        out.append(f"status = {e.status}")
    for t in s.targets:
        c = t.cargo
        out += ["", f"[target {t.target_id}]", f"ferrous_mass = {_num(c.ferrous_mass)}",
                f"gas_rate = {_num(c.gas_rate)}"]
        if c.chemical is not None:
            out.append("chemical = " + " ".join(_num(v) for v in c.chemical))
        if c.identity is not None:
            out.append(f"identity = {c.identity}")
        for tw, p in t.waypoints:
            out.append(f"waypoint = {_num(tw)} {_num(p.x)} {_num(p.y)}")
    return "\n".join(out) + "\n"


def builtin_names() -> List[str]:
    root = resources.files("edass") / "scenarios"
    return sorted(p.name[: -len(".scenario")] for p in root.iterdir() if p.name.endswith(".scenario"))


def builtin_text(name: str) -> str:
    return (resources.files("edass") / "scenarios" / f"{name}.scenario").read_text()


def load_scenario(ref: str) -> Scenario:
    """Load from a path, or ``builtin:<name>`` for a bundled scenario."""
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        if name not in builtin_names():
            raise ScenarioError(f"no bundled scenario {name!r}; available: {', '.join(builtin_names())}")
        return parse_scenario(builtin_text(name), name=name)
    path = Path(ref)
    return parse_scenario(path.read_text(), name=path.stem)


def load_default() -> Scenario:
    return load_scenario(BUILTIN_PREFIX + "default")
