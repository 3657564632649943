"""Sensor models for the four modalities.

Each sampler returns a :class:`SensorReading` or ``None`` for a miss. Readings
below a modality's detection threshold are never produced. Noise is additive
Gaussian drawn from the shared random source; a zero sigma draws nothing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .engine import RandomSource, SimTime
from .world import (
    RADAR_RANGE_M,
    PlumeField,
    Position,
    Target,
    distance,
    plume_concentration,
    position_at,
)

MAGNETIC_NEAR_FIELD_M = 0.5


class Modality(str, enum.Enum):
    MAGNETIC = "magnetic"
    CHEMICAL = "chemical"
    GAS = "gas"
    RADAR = "radar"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SensorReading:
    node_id: int
    time: SimTime
    modality: Modality
    strength: float
    payload: Any = None


@dataclass
class MagneticConfig:
    moment_scale: float = 1000.0
    threshold: float = 1.0
    max_range: float = 15.0


@dataclass
class ChemicalConfig:
    range: float = 10.0
    noise_sigma: float = 0.02
    threshold: float = 0.1


@dataclass
class GasConfig:
    threshold: float = 0.1
    noise_sigma: float = 0.0


@dataclass
class RadarConfig:
    range: float = RADAR_RANGE_M
    fix_noise_sigma: float = 0.25
    period: float = 1.0


@dataclass
class SensorConfig:
    magnetic: MagneticConfig = field(default_factory=MagneticConfig)
    chemical: ChemicalConfig = field(default_factory=ChemicalConfig)
    gas: GasConfig = field(default_factory=GasConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)

    def validate(self) -> None:
        checks = {
            "magnetic.moment_scale": self.magnetic.moment_scale >= 0,
            "magnetic.max_range": self.magnetic.max_range >= 0,
            "magnetic.threshold": self.magnetic.threshold > 0,
            "chemical.range": self.chemical.range >= 0,
            "chemical.noise_sigma": self.chemical.noise_sigma >= 0,
            "chemical.threshold": self.chemical.threshold > 0,
            "gas.noise_sigma": self.gas.noise_sigma >= 0,
            "gas.threshold": self.gas.threshold > 0,
            "radar.range": self.radar.range >= 0,
            "radar.fix_noise_sigma": self.radar.fix_noise_sigma >= 0,
            "radar.period": self.radar.period > 0,
        }
        for name, ok in checks.items():
            if not ok:
                raise ValueError(f"{name} out of range")

    def threshold(self, modality: Modality) -> float:
        if modality is Modality.MAGNETIC:
            return self.magnetic.threshold
        if modality is Modality.CHEMICAL:
            return self.chemical.threshold
        if modality is Modality.GAS:
            return self.gas.threshold
        return 0.0


def magnetic_strength(moment_scale: float, ferrous_mass: float, d: float) -> float:
    """Inverse-cube dipole falloff with a near-field clamp."""
    d = max(d, MAGNETIC_NEAR_FIELD_M)
    return moment_scale * ferrous_mass / d**3


def sample_magnetic(node_id: int, node_pos: Position, target: Target, t: SimTime,
                    cfg: SensorConfig) -> Optional[SensorReading]:
    mass = target.cargo.ferrous_mass
    if mass <= 0 or not target.present_at(t):
        return None
    d = max(distance(node_pos, position_at(target, t)), MAGNETIC_NEAR_FIELD_M)
    if d > cfg.magnetic.max_range:
        return None
    strength = magnetic_strength(cfg.magnetic.moment_scale, mass, d)
    if strength < cfg.magnetic.threshold:
        return None
    return SensorReading(node_id, t, Modality.MAGNETIC, strength)


def sample_chemical(node_id: int, node_pos: Position, target: Target, t: SimTime,
                    cfg: SensorConfig, rng: RandomSource) -> Optional[SensorReading]:
    vector = target.cargo.chemical
    if vector is None or not target.present_at(t):
        return None
    if distance(node_pos, position_at(target, t)) > cfg.chemical.range:
        return None
    sigma = cfg.chemical.noise_sigma
    observed = tuple(max(0.0, v + rng.gauss(sigma)) for v in vector)
    strength = math.sqrt(sum(v * v for v in observed))
    if strength < cfg.chemical.threshold:
        return None
    return SensorReading(node_id, t, Modality.CHEMICAL, strength, observed)


def sample_gas(node_id: int, node_pos: Position, plume: PlumeField, t: SimTime,
               cfg: SensorConfig, rng: RandomSource) -> Optional[SensorReading]:
    c = plume_concentration(plume, node_pos, t)
    c = max(0.0, c + rng.gauss(cfg.gas.noise_sigma))
    if c < cfg.gas.threshold:
        return None
    return SensorReading(node_id, t, Modality.GAS, c, c)


def sample_radar(node_id: int, node_pos: Position, target: Target, t: SimTime,
                 cfg: SensorConfig, rng: RandomSource) -> Optional[SensorReading]:
    if not target.present_at(t):
        return None
    truth = position_at(target, t)
    d = distance(node_pos, truth)
    rng_m = cfg.radar.range
    if d > rng_m:
        return None
    sigma = cfg.radar.fix_noise_sigma
    fix = Position(truth.x + rng.gauss(sigma), truth.y + rng.gauss(sigma))
    strength = (rng_m - d) / rng_m if rng_m > 0 else 0.0
    return SensorReading(node_id, t, Modality.RADAR, strength, fix)
