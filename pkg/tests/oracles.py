"""Independent reference computations used to check the package.

Nothing here calls into the code paths it checks: gains are recomputed from
raw label lists, acoustics from plain arithmetic, and streaming results from
the batch windowing pipeline.
"""

import math
from datetime import timedelta

from occusense import dataset as ds
from occusense import id3
from occusense.detector import threshold_detect

FEATURE_ORDER = ("reverberation_time", "temperature", "co2")


def plain_entropy(labels):
    n = len(labels)
    h = 0.0
    for c in (labels.count(0), labels.count(1)):
        if c:
            h -= (c / n) * math.log2(c / n)
    return h


def brute_force_split(rows, features=FEATURE_ORDER):
    """rows: list of (feature dict, label). Enumerate every feature x midpoint."""
    labels = [y for _, y in rows]
    parent = plain_entropy(labels)
    candidates = []
    for f in FEATURE_ORDER:
        if f not in features:
            continue
        values = sorted({x[f] for x, _ in rows})
        for a, b in zip(values, values[1:]):
            t = (a + b) / 2
            if not a <= t < b:  # adjacent floats: the rounded midpoint must still separate them
                t = a
            left = [y for x, y in rows if x[f] <= t]
            right = [y for x, y in rows if x[f] > t]
            gain = parent - len(left) / len(rows) * plain_entropy(left) \
                - len(right) / len(rows) * plain_entropy(right)
            candidates.append((f, t, gain))
    if not candidates:
        return None
    top = max(g for _, _, g in candidates)
    if top <= 1e-12:
        return None
    return next(c for c in candidates if c[2] >= top - 1e-12)


def hand_mean_absorption(areas, coefs):
    return sum(a * c for a, c in zip(areas, coefs)) / sum(areas)


def hand_sabine(length, width, height, alpha):
    volume = length * width * height
    surface = 2 * (length * width + length * height + width * height)
    return 0.161 * volume / (surface * alpha)


def batch_events(readings, config):
    """Status dicts from batch windowize + predict, shaped like the detector's."""
    schedule = config.schedule
    windowed = ds.windowize(readings, schedule, config.room)
    if not readings:
        return []
    day0 = schedule.start_date or min(r.timestamp for r in readings).date()
    rows = []
    for s in windowed.samples:
        if config.tree is not None:
            label, source = id3.predict(config.tree, s), "tree"
        else:
            label, source = threshold_detect(s.reverberation_time, config.rule), "threshold"
        rows.append((s.key, {
            "status": "occupied" if label else "unoccupied",
            "reverberation_time": s.reverberation_time,
            "temperature": s.temperature,
            "co2": s.co2,
            "source": source,
        }))
    for inc in windowed.incompletes:
        if inc.observed:
            rows.append(((inc.day_index, inc.slot_index), {"status": "unknown"}))
    out = []
    for (day, slot), doc in sorted(rows, key=lambda r: r[0]):
        end = schedule.slot_start(day0, day, slot) + timedelta(minutes=schedule.window_minutes)
        doc.update(day_index=day, slot_index=slot, updated_at=ds.format_timestamp(end))
        out.append(doc)
    return out
