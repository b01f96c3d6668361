"""Command-line entry point: ``occusense <subcommand> [options]``.

Data goes to files or standard output; every diagnostic goes to standard
error. The log level comes from the ``OCCUSENSE_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from dataclasses import replace
from datetime import date, datetime
from pathlib import Path

from . import acoustics, dataset as ds, evaluation as ev, id3
from .detector import Detector, DetectorConfig, ThresholdRule
from .errors import LabelCoverageError, OccusenseError, ParamError, SchemaError

log = logging.getLogger("occusense")


def _feature_list(text: str) -> tuple[str, ...]:
    names = tuple(f.strip() for f in text.split(",") if f.strip())
    aliases = {"rt": "reverberation_time", "reverberation": "reverberation_time", "temp": "temperature"}
    names = tuple(aliases.get(n, n) for n in names)
    bad = [n for n in names if n not in ds.FEATURES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"features must be a comma list of {', '.join(ds.FEATURES)}")
    return names


def _hhmm(text: str):
    try:
        return datetime.strptime(text, "%H:%M").time()
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HH:MM, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occusense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    room = argparse.ArgumentParser(add_help=False)
    room.add_argument("--room", type=Path, help="room config JSON (default: packaged 70x30x12 ft room)")
    sched = argparse.ArgumentParser(add_help=False)
    sched.add_argument("--first-slot", type=_hhmm, default="09:00", help="first slot start, HH:MM UTC")
    sched.add_argument("--slot-minutes", type=int, default=50)
    sched.add_argument("--slots", type=int, default=8, help="slots per day")
    sched.add_argument("--window-minutes", type=float, default=5.0,
                       help="opening window per slot that feeds the features")
    sched.add_argument("--aggregate", choices=("mean", "median"), default="mean",
                       help="how duplicate sensors of one kind are combined")
    sched.add_argument("--start-date", type=date.fromisoformat,
                       help="date of day 0 (default: date of the first reading)")
    data = argparse.ArgumentParser(add_help=False, parents=[room, sched])
    data.add_argument("--data", type=Path, help="features CSV (day_index,slot_index,...,occupied)")
    data.add_argument("--readings", type=Path, help="readings CSV")
    data.add_argument("--labels", type=Path, help="labels CSV")
    learner = argparse.ArgumentParser(add_help=False)
    learner.add_argument("--k", type=int, default=4, help="minimum samples for a node to be split")
    learner.add_argument("--max-depth", type=int)
    learner.add_argument("--features", type=_feature_list, default=ds.FEATURES)
    learner.add_argument("--tie-class", type=int, choices=(0, 1), default=0)
    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--days", type=int, default=7)
    synth.add_argument("--noise", type=float, default=0.05, help="label flip probability")
    synth.add_argument("--params", type=Path, help="generator parameters JSON")

    p = sub.add_parser("train", parents=[data, learner], help="fit a tree and write the model")
    p.add_argument("--model", type=Path, required=True, help="output model file")

    p = sub.add_parser("predict", parents=[data], help="classify slots with a saved model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    for name, text in (("evaluate", "day-wise cross validation"), ("ablate", "feature-subset ablation")):
        p = sub.add_parser(name, parents=[data, learner, synth], help=text,
                           description=f"{text}; without --data/--readings a synthetic corpus is used")
        p.add_argument("--cv-mode", choices=(ev.STANDARD, ev.PAPER), default=ev.STANDARD)
        p.add_argument("--out", type=Path, help="also write the report as CSV")
        if name == "ablate":
            p.add_argument("--repeats", type=int, default=20,
                           help="synthetic corpora (seeds seed..seed+N-1) to average over")

    p = sub.add_parser("simulate", parents=[room, sched, synth], help="write a synthetic corpus")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--samples-per-sensor", type=int, default=3)

    p = sub.add_parser("features", parents=[data], help="export windowed feature vectors")
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    p = sub.add_parser("serve", parents=[room, sched], help="run the live detector with an HTTP status endpoint")
    p.add_argument("--model", type=Path, help="model file; without it the threshold rule decides")
    p.add_argument("--theta", type=float, default=0.45, help="reverberation threshold in seconds")
    p.add_argument("--bind", default="127.0.0.1:8080", help="HTTP status address host:port")
    p.add_argument("--readings", default="-", help="readings CSV file, or - for standard input")
    p.add_argument("--feed", help="also accept line-delimited readings on this TCP host:port")
    p.add_argument("--hold-slots", type=int, default=1,
                   help="slots a kind's last value may cover for a missing reading")
    p.add_argument("--exit-when-done", action="store_true",
                   help="stop once the readings input ends instead of serving on")
    return parser


def _room(args) -> acoustics.RoomModel:
    return acoustics.load_room(args.room) if args.room else acoustics.default_room()


def _schedule(args) -> ds.Schedule:
    return ds.Schedule(first_slot=args.first_slot, slot_minutes=args.slot_minutes,
                       slots_per_day=args.slots, window_minutes=args.window_minutes,
                       aggregate=args.aggregate, start_date=args.start_date)


def _config(args) -> id3.LearnerConfig:
    return id3.LearnerConfig(k_min_points=args.k, max_depth=args.max_depth,
                             features_enabled=args.features, tie_class=args.tie_class)


def _report_incompletes(windowed: ds.Windowed, source):
    observed = [i for i in windowed.incompletes if i.observed]
    for inc in observed:
        print(f"{source}: incomplete slot (day {inc.day_index}, slot {inc.slot_index}): "
              f"missing {', '.join(inc.missing)}", file=sys.stderr)
    empty = len(windowed.incompletes) - len(observed)
    if empty:
        print(f"{source}: {empty} slot(s) without any readings", file=sys.stderr)


def _windowed(args) -> ds.Windowed:
    result = ds.ingest_readings(args.readings)
    for r in result.rejects:
        print(f"{args.readings}:{r.line}: rejected ({r.reason}): {r.row}", file=sys.stderr)
    windowed = ds.windowize(result.readings, _schedule(args), _room(args))
    _report_incompletes(windowed, args.readings)
    return windowed


def _load_dataset(args, need_labels: bool) -> ds.Dataset | None:
    """Dataset from --data or --readings; None when neither is given."""
    labels = ds.load_labels(args.labels) if args.labels else None
    if args.data:
        dataset = ds.load_features(args.data)
        if labels is not None:
            dataset = ds.label_samples(dataset, labels)
    elif args.readings:
        samples = _windowed(args).samples
        if labels is None and need_labels:
            raise LabelCoverageError("no labels file given (--labels); every slot needs a label")
        dataset = ds.label_samples(samples, labels)
    else:
        return None
    if need_labels and not dataset.labeled:
        missing = [s.key for s in dataset if s.label is None]
        raise LabelCoverageError(f"no label for (day, slot) {missing[:10]}")
    return dataset


def _generator_params(args, seed: int) -> ds.GeneratorParams:
    params = ds.GeneratorParams(label_noise_prob=args.noise, seed=seed)
    if args.params:
        try:
            raw = json.loads(args.params.read_text("utf-8"))
            kwargs = {}
            for cls in ("unoccupied", "occupied"):
                if cls in raw:
                    kwargs[cls] = ds.ClassStats(**{k: tuple(v) for k, v in raw[cls].items()})
            for key in ("label_noise_prob", "occupied_fraction"):
                if key in raw:
                    kwargs[key] = float(raw[key])
        except (OSError, ValueError, TypeError) as exc:
            raise ParamError(f"{args.params}: {exc}") from None
        params = ds.GeneratorParams(**{**params.__dict__, **kwargs})
    params.validate()
    return params


def _synthetic(args, seed: int) -> ds.Dataset:
    return ds.generate_synthetic(_generator_params(args, seed), args.days, args.slots)


def _open_out(path: Path | None):
    return open(path, "w", encoding="utf-8", newline="") if path else None


def cmd_train(args) -> int:
    dataset = _load_dataset(args, need_labels=True)
    if dataset is None:
        raise SchemaError("train needs --data or --readings with --labels")
    tree = id3.fit(dataset, _config(args))
    id3.save_model(tree, args.model)
    correct = sum(id3.predict(tree, s) == s.label for s in dataset)
    print(f"model: {args.model}")
    print(f"samples: {len(dataset)}")
    print(f"depth: {tree.depth()}")
    print(f"leaves: {tree.leaf_count()}")
    print(f"training accuracy: {100.0 * correct / len(dataset):.3f}")
    return 0


def cmd_predict(args) -> int:
    tree = id3.load_model(args.model)
    dataset = _load_dataset(args, need_labels=False)
    if dataset is None:
        raise SchemaError("predict needs --data or --readings")
    predicted = [replace(s, label=id3.predict(tree, s)) for s in dataset]
    fh = _open_out(args.out)
    try:
        ds.write_features(predicted, fh or sys.stdout)
    finally:
        if fh:
            fh.close()
    return 0


def _corpus(args):
    dataset = _load_dataset(args, need_labels=True)
    if dataset is not None:
        return [(None, dataset)]
    seeds = range(args.seed, args.seed + getattr(args, "repeats", 1))
    return [(s, _synthetic(args, s)) for s in seeds]


def _n_days(dataset: ds.Dataset) -> int:
    days = dataset.days()
    if days and days != list(range(len(days))):
        # plans index days 0..n-1; a gap must surface as a fold error, not be skipped
        return days[-1] + 1
    return len(days)


def cmd_evaluate(args) -> int:
    corpora = _corpus(args)
    seed, dataset = corpora[0]
    plan = ev.make_folds(_n_days(dataset), args.cv_mode)
    report = ev.cross_validate(dataset, _config(args), plan, seed)
    print(ev.format_report(report, plan))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            ev.write_report_csv(report, fh)
    return 0


def cmd_ablate(args) -> int:
    corpora = _corpus(args)
    plan = ev.make_folds(_n_days(corpora[0][1]), args.cv_mode)
    rows = ev.repeated_ablation(corpora, _config(args), plan)
    seeds = [s for s, _ in corpora if s is not None]
    print(f"cv mode: {plan.mode} ({plan.description})")
    if seeds:
        print(f"synthetic corpora: seeds {seeds[0]}..{seeds[-1]}, noise {args.noise}")
    print(ev.format_ablation(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            ev.write_ablation_csv(rows, fh)
    return 0


def cmd_simulate(args) -> int:
    dataset = _synthetic(args, args.seed)
    room = acoustics.load_room(args.room) if args.room else ds.simulation_room()
    schedule = _schedule(args)
    start = args.start_date or date(2025, 1, 6)
    readings = ds.synthesize_readings(dataset, room, schedule, start,
                                      args.samples_per_sensor, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "readings.csv", "w", encoding="utf-8", newline="") as fh:
        ds.write_readings(readings, fh)
    with open(args.out / "labels.csv", "w", encoding="utf-8", newline="") as fh:
        ds.write_labels(dataset, fh)
    with open(args.out / "features.csv", "w", encoding="utf-8", newline="") as fh:
        ds.write_features(dataset, fh)
    with open(args.out / "room.json", "w", encoding="utf-8") as fh:
        json.dump(acoustics.room_to_dict(room), fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(dataset)} slots, {len(readings)} readings to {args.out}")
    return 0


def cmd_features(args) -> int:
    if not args.readings:
        raise SchemaError("features needs --readings")
    windowed = _windowed(args)
    labels = ds.load_labels(args.labels) if args.labels else None
    samples = windowed.samples
    if labels is not None:
        samples = [replace(s, label=labels.get(s.key)) for s in samples]
    fh = _open_out(args.out)
    try:
        ds.write_features(samples, fh or sys.stdout)
    finally:
        if fh:
            fh.close()
    return 0


def cmd_serve(args) -> int:
    from . import service

    tree = id3.load_model(args.model) if args.model else None
    config = DetectorConfig(room=_room(args), schedule=_schedule(args), tree=tree,
                            rule=ThresholdRule(args.theta), hold_slots=args.hold_slots)
    detector = Detector(config)
    host, port = service.parse_bind(args.bind)
    server = service.start_status_server(detector, host, port)
    print(f"status endpoint on http://{host}:{server.server_address[1]}/status", file=sys.stderr)
    try:
        if args.readings == "-":
            service.feed_lines(detector, sys.stdin, "<stdin>")
        else:
            with open(args.readings, encoding="utf-8") as fh:
                service.feed_lines(detector, fh, args.readings)
        if args.feed:
            feed = service.FeedServer(service.parse_bind(args.feed), detector)
            print(f"reading feed on tcp://{args.feed}", file=sys.stderr)
            feed.serve_forever()
        detector.flush()
        if not args.exit_when_done:
            threading.Event().wait()  # keep answering status queries until interrupted
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "simulate": cmd_simulate,
    "features": cmd_features,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    level = os.environ.get("OCCUSENSE_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OccusenseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
