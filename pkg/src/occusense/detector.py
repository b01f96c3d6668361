"""Streaming occupancy detector.

Readings are folded one at a time into the open slot's opening window. When a
later reading (or the end of the stream) closes that window, the slot's
features are computed exactly as in batch windowing and classified by the
tree, or by the reverberation-time threshold when no tree is loaded.

Slot boundaries follow reading timestamps, never the host clock, so replaying
a file and running live share one code path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from datetime import date, datetime
from typing import Iterable

from . import id3
from .acoustics import RoomModel
from .dataset import KINDS, Schedule, SensorReading, check_reading_value, format_timestamp, slot_features
from .errors import InvalidFeature, StaleReading
from .id3 import DecisionTree, Internal, Leaf

log = logging.getLogger(__name__)

OCCUPIED = "occupied"
UNOCCUPIED = "unoccupied"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ThresholdRule:
    """Occupied when the reverberation time is at or below `theta` seconds."""

    theta: float = 0.45

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise InvalidFeature(f"threshold must be positive, got {self.theta!r}")


def threshold_detect(reverberation: float, rule: ThresholdRule = ThresholdRule()) -> int:
    if not (math.isfinite(reverberation) and reverberation > 0):
        raise InvalidFeature(f"reverberation time must be positive, got {reverberation!r}")
    return 1 if reverberation <= rule.theta else 0


def threshold_tree(rule: ThresholdRule) -> DecisionTree:
    """The single-split tree that decides exactly like `rule`."""
    root = Internal("reverberation_time", rule.theta, Leaf(1, 0, 1.0), Leaf(0, 0, 1.0))
    return DecisionTree(root, ("reverberation_time",), None)


@dataclass(frozen=True)
class StatusEvent:
    status: str
    day_index: int
    slot_index: int
    updated_at: datetime
    temperature: float | None = None
    co2: float | None = None
    reverberation_time: float | None = None
    source: str | None = None
    carried: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {"status": self.status}
        if self.status != UNKNOWN:
            out.update(reverberation_time=self.reverberation_time,
                       temperature=self.temperature, co2=self.co2)
        out.update(day_index=self.day_index, slot_index=self.slot_index,
                   updated_at=format_timestamp(self.updated_at))
        if self.source:
            out["source"] = self.source
        if self.carried:
            out["carried"] = list(self.carried)
        return out


@dataclass(frozen=True)
class DetectorConfig:
    room: RoomModel
    schedule: Schedule = Schedule()
    tree: DecisionTree | None = None
    rule: ThresholdRule = ThresholdRule()
    # how many slots a kind's last value may stand in for a missing kind
    hold_slots: int = 1


@dataclass(frozen=True)
class DetectorState:
    day0: date | None = None
    current_slot: tuple[int, int] | None = None
    window_start: datetime | None = None
    window_end: datetime | None = None
    closed_through: datetime | None = None
    values: tuple[tuple[float, ...], ...] = ((), (), ())
    last_known: tuple[tuple[int, float] | None, ...] = (None, None, None)
    last_status: str = UNKNOWN
    last_T: float | None = None
    updated_at: datetime | None = None


def _ordinal(schedule: Schedule, slot: tuple[int, int]) -> int:
    return slot[0] * schedule.slots_per_day + slot[1]


def classify(features: dict[str, float], config: DetectorConfig) -> tuple[int, str]:
    if config.tree is not None:
        return id3.predict(config.tree, features), "tree"
    return threshold_detect(features["reverberation_time"], config.rule), "threshold"


def _close(state: DetectorState, config: DetectorConfig) -> tuple[DetectorState, StatusEvent]:
    slot = state.current_slot
    ordinal = _ordinal(config.schedule, slot)
    aggregate = config.schedule.aggregator()
    values, carried, last_known = {}, [], list(state.last_known)
    for i, kind in enumerate(KINDS):
        if state.values[i]:
            values[kind] = state.values[i]
            last_known[i] = (ordinal, aggregate(state.values[i]))
        elif (state.last_known[i] is not None
              and ordinal - state.last_known[i][0] <= config.hold_slots):
            values[kind] = (state.last_known[i][1],)
            carried.append(kind)

    base = replace(state, current_slot=None, window_start=None, window_end=None,
                   closed_through=state.window_end, values=((), (), ()),
                   last_known=tuple(last_known), updated_at=state.window_end)
    if len(values) < len(KINDS):
        event = StatusEvent(UNKNOWN, slot[0], slot[1], state.window_end)
        return replace(base, last_status=UNKNOWN, last_T=None), event

    features = slot_features(values, config.room, aggregate)
    label, source = classify(features, config)
    status = OCCUPIED if label == 1 else UNOCCUPIED
    event = StatusEvent(status, slot[0], slot[1], state.window_end, features["temperature"],
                        features["co2"], features["reverberation_time"], source, tuple(carried))
    return replace(base, last_status=status, last_T=features["reverberation_time"]), event


def step(state: DetectorState, reading: SensorReading,
         config: DetectorConfig) -> tuple[DetectorState, StatusEvent | None]:
    """Fold one reading into the detector state.

    Returns the new state and the status event for the window this reading
    closed, if any. Raises StaleReading for readings belonging to a window
    that is already closed or earlier than the open one.
    """
    if reading.kind not in KINDS:
        raise InvalidFeature(f"unknown reading kind {reading.kind!r}")
    try:
        check_reading_value(reading.kind, reading.value)
    except ValueError as exc:
        raise InvalidFeature(str(exc)) from None
    ts = reading.timestamp
    if state.window_start is not None and ts < state.window_start:
        raise StaleReading(f"reading at {format_timestamp(ts)} predates open slot {state.current_slot}")
    if state.window_start is None and state.closed_through is not None and ts < state.closed_through:
        raise StaleReading(f"reading at {format_timestamp(ts)} belongs to an already closed window")

    if state.day0 is None:
        state = replace(state, day0=config.schedule.start_date or ts.date())
    event = None
    if state.window_end is not None and ts >= state.window_end:
        state, event = _close(state, config)

    pos = config.schedule.locate(ts, state.day0)
    if pos is None or not pos.in_window:
        return state, event
    if state.current_slot is None:
        state = replace(state, current_slot=(pos.day_index, pos.slot_index),
                        window_start=pos.window_start, window_end=pos.window_end)
    i = KINDS.index(reading.kind)
    values = tuple(v + (reading.value,) if j == i else v for j, v in enumerate(state.values))
    return replace(state, values=values), event


def finish(state: DetectorState, config: DetectorConfig) -> tuple[DetectorState, StatusEvent | None]:
    """Close the open window at end of stream."""
    if state.current_slot is None:
        return state, None
    return _close(state, config)


class Detector:
    """Single-writer wrapper around `step` that keeps a run history.

    The ingestion side calls :meth:`feed`; readers call :meth:`status` and
    :meth:`history` from any thread. Each event is published by swapping one
    reference, so readers always see a complete snapshot.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.state = DetectorState()
        self._history: list[dict] = []
        self._published: tuple[dict, int] = ({"status": UNKNOWN}, 0)
        self.stale = 0

    def _publish(self, event: StatusEvent | None):
        if event is None:
            return
        doc = event.to_dict()
        self._history.append(doc)
        self._published = (doc, len(self._history))
        log.info("slot (%d, %d): %s", event.day_index, event.slot_index, event.status)

    def feed(self, reading: SensorReading) -> StatusEvent | None:
        try:
            self.state, event = step(self.state, reading, self.config)
        except StaleReading as exc:
            self.stale += 1
            log.warning("stale reading dropped: %s", exc)
            return None
        self._publish(event)
        return event

    def flush(self) -> StatusEvent | None:
        self.state, event = finish(self.state, self.config)
        self._publish(event)
        return event

    def run(self, readings: Iterable[SensorReading]) -> list[StatusEvent]:
        events = [e for e in map(self.feed, readings) if e is not None]
        last = self.flush()
        if last is not None:
            events.append(last)
        return events

    def status(self) -> dict:
        return dict(self._published[0])

    def history(self) -> list[dict]:
        n = self._published[1]
        return [dict(d) for d in self._history[:n]]


def replay(readings: Iterable[SensorReading], config: DetectorConfig) -> list[StatusEvent]:
    """Run a finite reading sequence through a fresh detector."""
    return Detector(config).run(readings)
