"""Randomized invariants. Every property runs at least 100 generated cases.

The functions take no fixtures so the acceptance suite can call them directly.
"""

import io
import math
from datetime import date, datetime, timedelta, timezone

from hypothesis import example, given, settings
from hypothesis import strategies as st

from occusense import acoustics as ac
from occusense import dataset as ds
from occusense import evaluation as ev
from occusense import id3
from occusense.dataset import SlotSample
from occusense.id3 import LearnerConfig

from .oracles import brute_force_split, hand_mean_absorption, plain_entropy

CASES = settings(max_examples=150, deadline=None, database=None)

labels_st = st.lists(st.integers(0, 1), min_size=1, max_size=40)
coef_st = st.floats(0.01, 1.0)
area_st = st.floats(0.1, 5000.0)
surfaces_st = st.lists(st.tuples(area_st, coef_st), min_size=1, max_size=8)
dim_st = st.floats(1.0, 100.0)

# small value pools force duplicate feature values and gain ties
value_st = st.one_of(st.integers(0, 6).map(float), st.floats(0.01, 3.0))


@st.composite
def samples_st(draw, min_size=1, max_size=12, values=value_st):
    n = draw(st.integers(min_size, max_size))
    return [SlotSample(0, i, draw(values), draw(values), draw(values), draw(st.integers(0, 1)))
            for i in range(n)]


def _surfaces(pairs):
    table = ac.AbsorptionTable({f"m{i}": [[1000.0, c]] for i, (_, c) in enumerate(pairs)})
    surfaces = [ac.Surface(a, f"m{i}") for i, (a, _) in enumerate(pairs)]
    return surfaces, table


# entropy and gain

@CASES
@given(labels_st)
def test_entropy_bounds(labels):
    h = id3.entropy(labels)
    assert 0.0 <= h <= 1.0
    assert math.isclose(h, plain_entropy(labels), abs_tol=1e-12)
    if len(set(labels)) == 1:
        assert h == 0.0


@CASES
@given(samples_st(min_size=2))
def test_gain_nonnegative_and_bounded(samples):
    parent = id3.entropy([s.label for s in samples])
    for f in ds.FEATURES:
        values = sorted({s.feature(f) for s in samples})
        for t in [(a + b) / 2 for a, b in zip(values, values[1:])] + [values[0] - 1, values[-1]]:
            g = id3.information_gain(samples, f, t)
            assert 0.0 <= g <= parent + 1e-12


# mean absorption and reverberation time

@CASES
@given(surfaces_st)
def test_mean_absorption_convex(pairs):
    surfaces, table = _surfaces(pairs)
    alpha = ac.mean_absorption(surfaces, table, 1000.0).value
    coefs = [c for _, c in pairs]
    assert min(coefs) - 1e-12 <= alpha <= max(coefs) + 1e-12
    assert math.isclose(alpha, hand_mean_absorption([a for a, _ in pairs], coefs), rel_tol=1e-9)


@CASES
@given(surfaces_st, st.randoms(use_true_random=False), st.floats(0.01, 100.0))
def test_mean_absorption_permutation_and_scale(pairs, rnd, k):
    surfaces, table = _surfaces(pairs)
    base = ac.mean_absorption(surfaces, table, 1000.0).value
    shuffled = list(surfaces)
    rnd.shuffle(shuffled)
    assert math.isclose(ac.mean_absorption(shuffled, table, 1000.0).value, base, rel_tol=1e-12)
    scaled = [ac.Surface(s.area * k, s.material_id) for s in surfaces]
    assert math.isclose(ac.mean_absorption(scaled, table, 1000.0).value, base, rel_tol=1e-12)


@CASES
@given(dim_st, dim_st, dim_st, coef_st, coef_st, st.floats(1.01, 10.0))
def test_reverberation_monotone(length, width, height, a1, a2, k):
    room = ac.RoomGeometry(length, width, height)
    lo, hi = sorted((a1, a2))
    assert ac.reverberation_time(room, lo) >= ac.reverberation_time(room, hi)
    if hi > lo * (1 + 1e-12):  # strict once the gap exceeds rounding
        assert ac.reverberation_time(room, lo) > ac.reverberation_time(room, hi)
    # uniform scaling by k multiplies V/S, and so T, by k
    big = ac.RoomGeometry(length * k, width * k, height * k)
    assert math.isclose(ac.reverberation_time(big, lo), k * ac.reverberation_time(room, lo), rel_tol=1e-9)
    # stretching one side grows V faster than S
    longer = ac.RoomGeometry(length * k, width, height)
    assert ac.reverberation_time(longer, lo) > ac.reverberation_time(room, lo)
    assert ac.reverberation_time(room, lo) == ac.reverberation_time(room, lo)


# split search and learner

@CASES
@given(samples_st())
@example([SlotSample(0, 0, 2.9999999999999996, 0.0, 0.0, 0), SlotSample(0, 1, 0.0, 0.0, 0.0, 0),
          SlotSample(0, 2, 3.0, 0.0, 0.0, 1)])
def test_best_split_matches_brute_force(samples):
    split = id3.best_split(samples, LearnerConfig())
    oracle = brute_force_split([(s.features(), s.label) for s in samples])
    if oracle is None:
        assert split is None
        return
    assert split is not None
    assert split.feature == oracle[0]
    assert math.isclose(split.threshold, oracle[1], rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(split.gain, oracle[2], abs_tol=1e-12)


@CASES
@given(samples_st(max_size=30))
def test_k1_fits_consistent_data(samples):
    seen = {}
    consistent = [s for s in samples if seen.setdefault(tuple(s.features().values()), s.label) == s.label]
    tree = id3.fit(consistent, LearnerConfig(k_min_points=1))
    assert all(id3.predict(tree, s) == s.label for s in consistent)


@CASES
@given(samples_st(max_size=20, values=st.integers(0, 50).map(float)),
       st.sampled_from(ds.FEATURES),
       st.sampled_from([lambda x: 3 * x + 7, lambda x: x ** 3 + 100, lambda x: math.exp(x / 10)]))
def test_monotone_rescale_invariance(samples, feature, fn):
    def rescale(s):
        doc = s.features()
        doc[feature] = fn(doc[feature])
        return SlotSample(s.day_index, s.slot_index, label=s.label, **doc)

    moved = [rescale(s) for s in samples]
    a = id3.fit(samples, LearnerConfig(k_min_points=1))
    b = id3.fit(moved, LearnerConfig(k_min_points=1))
    assert [id3.predict(a, s) for s in samples] == [id3.predict(b, s) for s in moved]
    assert a.depth() == b.depth() and a.leaf_count() == b.leaf_count()


@CASES
@given(samples_st(max_size=30), st.lists(st.tuples(value_st, value_st, value_st), min_size=1, max_size=20))
def test_serialize_roundtrip(samples, queries):
    tree = id3.fit(samples, LearnerConfig(k_min_points=1))
    back = id3.deserialize(id3.serialize(tree))
    assert back == tree
    for t, c, r in queries:
        q = {"temperature": t, "co2": c, "reverberation_time": r}
        assert id3.predict(back, q) == id3.predict(tree, q)


# folds and confusion matrices

@CASES
@given(st.integers(2, 400), st.sampled_from([ev.STANDARD, ev.PAPER]))
def test_fold_partition(days, mode):
    plan = ev.make_folds(days, mode)
    everything = set(range(days))
    for fold in plan.folds:
        assert not fold.train_days & fold.test_days
        assert fold.train_days | fold.test_days == everything
    if mode == ev.STANDARD:
        tests = [f.test_days for f in plan.folds]
        assert set().union(*tests) == everything
        assert sum(len(t) for t in tests) == days


@st.composite
def corpus_st(draw):
    days = draw(st.integers(2, 4))
    per_day = draw(st.integers(1, 4))
    samples = [SlotSample(d, s, draw(value_st), draw(value_st), draw(value_st), draw(st.integers(0, 1)))
               for d in range(days) for s in range(per_day)]
    return days, ds.Dataset(tuple(samples))


@CASES
@given(corpus_st(), st.sampled_from([ev.STANDARD, ev.PAPER]), st.integers(1, 4))
def test_confusion_conservation_and_no_leakage(corpus, mode, k):
    days, data = corpus
    plan = ev.make_folds(days, mode)
    report = ev.cross_validate(data, LearnerConfig(k_min_points=k), plan)
    for result in report.folds:
        test = data.select_days(result.fold.test_days)
        train = data.select_days(result.fold.train_days)
        c = result.confusion
        assert c.tp + c.tn + c.fp + c.fn == len(test)
        assert result.train_size == len(train)
        assert not {s.day_index for s in train} & {s.day_index for s in test}
    assert report == ev.cross_validate(data, LearnerConfig(k_min_points=k), plan)


# ingestion, windowing, generator

T0 = datetime(2025, 1, 6, 9, tzinfo=timezone.utc)
reading_st = st.builds(
    lambda sec, kind, value: ds.SensorReading(T0 + timedelta(seconds=sec), f"{kind}-1", kind, value),
    st.integers(-3600, 2 * 86400), st.sampled_from(ds.KINDS), st.floats(15.0, 30.0))


@CASES
@given(st.lists(st.one_of(
    reading_st.map(lambda r: f"{ds.format_timestamp(r.timestamp)},{r.sensor_id},{r.kind},{r.value!r}"),
    st.sampled_from(["junk", "2025-01-06T09:00:00Z,x,humidity,5", "2025-01-06T09:00:00Z,x,co2,-1",
                     "not-a-time,x,co2,700", "2025-01-06T09:00:00Z,x,co2,abc", "a,b"]))))
def test_ingestion_conserves_rows(lines):
    text = "timestamp,sensor_id,kind,value\n" + "".join(line + "\n" for line in lines)
    result = ds.ingest_readings(io.StringIO(text))
    assert len(result.readings) + len(result.rejects) == result.total_rows == len(lines)


@CASES
@given(st.lists(reading_st, max_size=60))
def test_windowize_partitions_readings(readings):
    schedule = ds.Schedule(start_date=date(2025, 1, 6))
    room = ds.simulation_room()
    windowed = ds.windowize(readings, schedule, room)
    owners = {}
    for i, r in enumerate(readings):
        pos = schedule.locate(r.timestamp, schedule.start_date)
        if pos is not None and pos.in_window:
            owners.setdefault((pos.day_index, pos.slot_index), []).append(r)
    assert sum(len(v) for v in owners.values()) + windowed.unassigned == len(readings)
    for s in windowed.samples:
        mine = owners[s.key]
        # each feature is the mean of that slot's own readings, nothing else
        temps = [r.value for r in mine if r.kind == "temperature"]
        co2 = [r.value for r in mine if r.kind == "co2"]
        assert math.isclose(s.temperature, sum(temps) / len(temps), rel_tol=1e-12)
        assert math.isclose(s.co2, sum(co2) / len(co2), rel_tol=1e-12)
    keys = [s.key for s in windowed.samples] + [(i.day_index, i.slot_index) for i in windowed.incompletes]
    assert len(keys) == len(set(keys))


@CASES
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.5), st.integers(1, 8), st.integers(1, 8))
def test_generator_deterministic(seed, noise, days, slots):
    params = ds.GeneratorParams(label_noise_prob=noise, seed=seed)
    a = ds.generate_synthetic(params, days, slots)
    b = ds.generate_synthetic(params, days, slots)
    assert a == b and len(a) == days * slots


ALL = [
    test_entropy_bounds, test_gain_nonnegative_and_bounded, test_mean_absorption_convex,
    test_mean_absorption_permutation_and_scale, test_reverberation_monotone,
    test_best_split_matches_brute_force, test_k1_fits_consistent_data, test_monotone_rescale_invariance,
    test_serialize_roundtrip, test_fold_partition, test_confusion_conservation_and_no_leakage,
    test_ingestion_conserves_rows, test_windowize_partitions_readings, test_generator_deterministic,
]
