"""Sabine reverberation time from room geometry and surface materials.

All quantities are SI internally: lengths in meters, areas in square meters,
frequencies in hertz, times in seconds. Room config files may be written in
feet and are converted on load.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptySurfaces,
    InvalidAbsorption,
    InvalidFeature,
    InvalidFrequency,
    MaterialNotFound,
    RoomConfigError,
)

SABINE_CONSTANT = 0.161  # s/m
FEET_TO_METERS = 0.3048
SQFT_TO_SQM = 0.09290304


@dataclass(frozen=True)
class RoomGeometry:
    length: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("length", "width", "height"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise RoomConfigError(f"room {name} must be positive, got {value!r}")

    def volume(self) -> float:
        return self.length * self.width * self.height

    def boundary_area(self) -> float:
        lw = self.length * self.width
        lh = self.length * self.height
        wh = self.width * self.height
        return 2.0 * (lw + lh + wh)


@dataclass(frozen=True)
class Surface:
    area: float
    material_id: str
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.area) and self.area > 0):
            raise RoomConfigError(f"surface {self.name or self.material_id!r} area must be positive")


class AbsorptionTable:
    """Per-material absorption coefficients sampled at discrete frequencies.

    Points are sorted by frequency on construction. Exact duplicate points are
    collapsed; two different coefficients at the same frequency are rejected.
    """

    def __init__(self, materials: Mapping[str, Iterable[Sequence[float]]]):
        self._freqs: dict[str, tuple[float, ...]] = {}
        self._coefs: dict[str, tuple[float, ...]] = {}
        for material_id, points in materials.items():
            merged: dict[float, float] = {}
            for point in points:
                if len(point) != 2:
                    raise RoomConfigError(f"{material_id}: points must be [frequency, coefficient] pairs")
                freq, coef = float(point[0]), float(point[1])
                if not (math.isfinite(freq) and freq > 0):
                    raise RoomConfigError(f"{material_id}: frequency must be positive, got {freq!r}")
                if not (math.isfinite(coef) and 0 < coef <= 1):
                    raise RoomConfigError(f"{material_id}: coefficient must be in (0, 1], got {coef!r}")
                if freq in merged and merged[freq] != coef:
                    raise RoomConfigError(f"{material_id}: conflicting coefficients at {freq} Hz")
                merged[freq] = coef
            if not merged:
                raise RoomConfigError(f"{material_id}: at least one point is required")
            ordered = sorted(merged.items())
            self._freqs[material_id] = tuple(f for f, _ in ordered)
            self._coefs[material_id] = tuple(c for _, c in ordered)

    def __contains__(self, material_id) -> bool:
        return material_id in self._freqs

    def __eq__(self, other) -> bool:
        if not isinstance(other, AbsorptionTable):
            return NotImplemented
        return self._freqs == other._freqs and self._coefs == other._coefs

    def __repr__(self) -> str:
        return f"AbsorptionTable({sorted(self._freqs)})"

    @property
    def materials(self) -> tuple[str, ...]:
        return tuple(self._freqs)

    def points(self, material_id: str) -> list[tuple[float, float]]:
        self._check(material_id)
        return list(zip(self._freqs[material_id], self._coefs[material_id]))

    def to_dict(self) -> dict[str, list[list[float]]]:
        return {m: [[f, c] for f, c in self.points(m)] for m in self._freqs}

    def _check(self, material_id):
        if material_id not in self._freqs:
            raise MaterialNotFound(f"unknown material {material_id!r}")

    def nearest(self, material_id: str, frequency: float) -> float:
        self._check(material_id)
        freqs = self._freqs[material_id]
        coefs = self._coefs[material_id]
        i = bisect.bisect_left(freqs, frequency)
        if i == 0:
            return coefs[0]
        if i == len(freqs):
            return coefs[-1]
        # ties go to the lower frequency
        if frequency - freqs[i - 1] <= freqs[i] - frequency:
            return coefs[i - 1]
        return coefs[i]

    def interpolated(self, material_id: str, frequency: float) -> float:
        self._check(material_id)
        freqs = self._freqs[material_id]
        coefs = self._coefs[material_id]
        if frequency <= freqs[0]:
            return coefs[0]
        if frequency >= freqs[-1]:
            return coefs[-1]
        i = bisect.bisect_right(freqs, frequency)
        f0, f1 = freqs[i - 1], freqs[i]
        c0, c1 = coefs[i - 1], coefs[i]
        return c0 + (c1 - c0) * (frequency - f0) / (f1 - f0)


def _check_frequency(frequency: float):
    if not (isinstance(frequency, (int, float)) and math.isfinite(frequency) and frequency > 0):
        raise InvalidFrequency(f"frequency must be a positive finite number of hertz, got {frequency!r}")


def absorption_at(table: AbsorptionTable, material_id: str, frequency: float,
                  interpolate: bool = False) -> float:
    """Coefficient of `material_id` at `frequency`.

    By default this is the coefficient at the tabulated frequency nearest to
    `frequency`. With `interpolate=True` it is linearly interpolated between the
    neighbouring points; outside the tabulated range both rules clamp to the
    closest endpoint.
    """
    _check_frequency(frequency)
    if interpolate:
        return table.interpolated(material_id, frequency)
    return table.nearest(material_id, frequency)


@dataclass(frozen=True)
class MeanAbsorption:
    value: float
    frequency: float


def mean_absorption(surfaces: Sequence[Surface], table: AbsorptionTable, frequency: float,
                    interpolate: bool = False) -> MeanAbsorption:
    """Area-weighted mean absorption coefficient of `surfaces` at `frequency`."""
    if not surfaces:
        raise EmptySurfaces("at least one surface is required")
    _check_frequency(frequency)
    weighted = 0.0
    total_area = 0.0
    for surface in surfaces:
        weighted += surface.area * absorption_at(table, surface.material_id, frequency, interpolate)
        total_area += surface.area
    return MeanAbsorption(weighted / total_area, float(frequency))


def reverberation_time(geometry: RoomGeometry, alpha: MeanAbsorption | float) -> float:
    """Sabine reverberation time 0.161 * V / (S * alpha) in seconds."""
    value = alpha.value if isinstance(alpha, MeanAbsorption) else float(alpha)
    if not (math.isfinite(value) and value > 0):
        raise InvalidAbsorption(f"mean absorption must be positive, got {value!r}")
    return SABINE_CONSTANT * geometry.volume() / (geometry.boundary_area() * value)


@dataclass(frozen=True)
class RoomModel:
    geometry: RoomGeometry
    surfaces: tuple[Surface, ...]
    table: AbsorptionTable = field(compare=True)
    interpolate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if not self.surfaces:
            raise EmptySurfaces("room has no surfaces")
        for surface in self.surfaces:
            if surface.material_id not in self.table:
                raise MaterialNotFound(
                    f"surface {surface.name or '?'!r} uses unknown material {surface.material_id!r}")


def room_reverberation(room: RoomModel, frequency: float) -> float:
    """Reverberation time of `room` for a sensed dominant `frequency`."""
    alpha = mean_absorption(room.surfaces, room.table, frequency, room.interpolate)
    return reverberation_time(room.geometry, alpha)


def frequency_for_reverberation(room: RoomModel, target: float) -> float:
    """Lowest frequency at which `room` has reverberation time `target`.

    Only defined for interpolating rooms, where the mean absorption is
    piecewise linear in frequency. Used to synthesize frequency readings that
    reproduce a chosen reverberation time.
    """
    if not room.interpolate:
        raise RoomConfigError("frequency inversion requires an interpolating room")
    if not (math.isfinite(target) and target > 0):
        raise InvalidFeature(f"reverberation time must be positive, got {target!r}")
    alpha_target = SABINE_CONSTANT * room.geometry.volume() / (room.geometry.boundary_area() * target)
    breaks = sorted({f for m in {s.material_id for s in room.surfaces}
                     for f, _ in room.table.points(m)})

    def alpha(f):
        return mean_absorption(room.surfaces, room.table, f, True).value

    values = [alpha(f) for f in breaks]
    for f0, f1, a0, a1 in zip(breaks, breaks[1:], values, values[1:]):
        if a0 == alpha_target:
            return f0
        if (a0 - alpha_target) * (a1 - alpha_target) < 0:
            return f0 + (alpha_target - a0) * (f1 - f0) / (a1 - a0)
    if values[-1] == alpha_target:
        return breaks[-1]
    raise InvalidFeature(
        f"reverberation time {target!r} s is outside the range this room can produce "
        f"({reverberation_time(room.geometry, max(values)):.4g} to "
        f"{reverberation_time(room.geometry, min(values)):.4g} s)")


def room_from_dict(config: Mapping) -> RoomModel:
    """Build a room from the JSON config structure.

    ``unit`` is ``"feet"`` or ``"meters"`` (default meters) and applies to the
    dimensions and to every surface area.
    """
    unit = config.get("unit", "meters")
    if unit not in ("feet", "meters"):
        raise RoomConfigError(f"unit must be 'feet' or 'meters', got {unit!r}")
    scale, area_scale = (FEET_TO_METERS, SQFT_TO_SQM) if unit == "feet" else (1.0, 1.0)
    try:
        geometry = RoomGeometry(float(config["length"]) * scale,
                                float(config["width"]) * scale,
                                float(config["height"]) * scale)
        surfaces = tuple(
            Surface(float(s["area"]) * area_scale, str(s["material"]), str(s.get("name", "")))
            for s in config["surfaces"])
        table = AbsorptionTable(config["materials"])
    except KeyError as exc:
        raise RoomConfigError(f"room config missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RoomConfigError):
            raise
        raise RoomConfigError(f"malformed room config: {exc}") from None
    interpolate = config.get("interpolate", False)
    if not isinstance(interpolate, bool):
        raise RoomConfigError("interpolate must be true or false")
    return RoomModel(geometry, surfaces, table, interpolate)


def room_to_dict(room: RoomModel) -> dict:
    """Inverse of :func:`room_from_dict`, always written in meters."""
    return {
        "unit": "meters",
        "length": room.geometry.length,
        "width": room.geometry.width,
        "height": room.geometry.height,
        "interpolate": room.interpolate,
        "surfaces": [{"name": s.name, "area": s.area, "material": s.material_id}
                     for s in room.surfaces],
        "materials": room.table.to_dict(),
    }


def load_room(path: str | Path) -> RoomModel:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RoomConfigError(f"{path}: invalid JSON: {exc}") from None
    return room_from_dict(config)


def default_room() -> RoomModel:
    """The 70 x 30 x 12 ft classroom with carpet floor, concrete ceiling and brick walls."""
    text = resources.files("occusense").joinpath("data/default_room.json").read_text("utf-8")
    return room_from_dict(json.loads(text))
