"""Day-wise cross validation and feature-subset ablation."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, TextIO

from . import id3
from .dataset import Dataset
from .errors import FoldError
from .id3 import LearnerConfig

STANDARD = "std"
PAPER = "paper"


@dataclass(frozen=True)
class Fold:
    train_days: frozenset[int]
    test_days: frozenset[int]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]
    mode: str

    @property
    def description(self) -> str:
        if self.mode == PAPER:
            return "train on 1 day, test on the remaining days"
        return "train on all days but one, test on the held-out day"


def make_folds(days: int, mode: str = STANDARD) -> FoldPlan:
    """One fold per day. ``std`` holds each day out as the test set; ``paper``
    trains on that single day and tests on all the others."""
    if days < 2:
        raise FoldError(f"cross validation needs at least 2 days, got {days}")
    if mode not in (STANDARD, PAPER):
        raise FoldError(f"unknown cv mode {mode!r}")
    everything = frozenset(range(days))
    folds = []
    for d in range(days):
        single, rest = frozenset({d}), everything - {d}
        folds.append(Fold(rest, single) if mode == STANDARD else Fold(single, rest))
    return FoldPlan(tuple(folds), mode)


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        """Percentage of correct predictions."""
        return 100.0 * (self.tp + self.tn) / self.total

    def add(self, truth: int, predicted: int) -> "Confusion":
        if truth == 1:
            return replace(self, tp=self.tp + 1) if predicted == 1 else replace(self, fn=self.fn + 1)
        return replace(self, fp=self.fp + 1) if predicted == 1 else replace(self, tn=self.tn + 1)


@dataclass(frozen=True)
class FoldResult:
    fold: Fold
    confusion: Confusion
    train_size: int

    @property
    def accuracy(self) -> float:
        return self.confusion.accuracy


@dataclass(frozen=True)
class EvalReport:
    folds: tuple[FoldResult, ...]
    mode: str
    features: tuple[str, ...]
    k_min_points: int
    seed: int | None = None

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return statistics.fmean(self.fold_accuracies)


def _check_leakage(train: Dataset, test: Dataset, fold: Fold):
    train_days = {s.day_index for s in train}
    test_days = {s.day_index for s in test}
    if train_days & test_days or not train_days <= fold.train_days or not test_days <= fold.test_days:
        raise AssertionError(f"day leakage between train and test in fold {fold}")


def _run_fold(dataset: Dataset, config: LearnerConfig, fold: Fold) -> FoldResult:
    if fold.train_days & fold.test_days:
        raise FoldError(f"fold trains and tests on day(s) {sorted(fold.train_days & fold.test_days)}")
    train = dataset.select_days(fold.train_days)
    test = dataset.select_days(fold.test_days)
    if len(train) == 0:
        raise FoldError(f"no training samples for days {sorted(fold.train_days)}")
    if len(test) == 0:
        raise FoldError(f"no test samples for days {sorted(fold.test_days)}")
    _check_leakage(train, test, fold)
    tree = id3.fit(train, config)
    confusion = Confusion()
    for sample in test:
        confusion = confusion.add(sample.label, id3.predict(tree, sample))
    assert confusion.total == len(test)
    return FoldResult(fold, confusion, len(train))


def cross_validate(dataset: Dataset, config: LearnerConfig, plan: FoldPlan,
                   seed: int | None = None) -> EvalReport:
    """Fit and score one tree per fold. `seed` is recorded, not used."""
    if not dataset.labeled:
        raise FoldError("cross validation needs a fully labelled dataset")
    planned = set().union(*(f.train_days | f.test_days for f in plan.folds))
    missing = planned - set(dataset.days())
    if missing:
        raise FoldError(f"dataset has no samples for day(s) {sorted(missing)}")
    results = tuple(_run_fold(dataset, config, fold) for fold in plan.folds)
    return EvalReport(results, plan.mode, config.features_enabled, config.k_min_points, seed)


# Table order of the published ablation, then the subset it leaves out.
ABLATION_SUBSETS = (
    ("co2", "reverberation_time"),
    ("temperature", "co2"),
    ("temperature", "co2", "reverberation_time"),
    ("temperature", "reverberation_time"),
    ("reverberation_time",),
    ("temperature",),
    ("co2",),
)
NOT_IN_PAPER = {("co2",)}


@dataclass(frozen=True)
class AblationRow:
    """One feature subset's result, possibly averaged over several corpora."""

    features: tuple[str, ...]
    reports: tuple[EvalReport, ...]
    in_paper: bool = True

    @property
    def co2(self) -> bool:
        return "co2" in self.features

    @property
    def temperature(self) -> bool:
        return "temperature" in self.features

    @property
    def reverberation(self) -> bool:
        return "reverberation_time" in self.features

    @property
    def accuracy(self) -> float:
        return statistics.fmean(r.mean_accuracy for r in self.reports)

    @property
    def fold_accuracies(self) -> list[float]:
        """Per-fold accuracy, averaged across reports."""
        return [statistics.fmean(col) for col in zip(*(r.fold_accuracies for r in self.reports))]


def ablation(dataset: Dataset, config: LearnerConfig, plan: FoldPlan,
             seed: int | None = None) -> list[AblationRow]:
    """Cross-validate once for every non-empty feature subset."""
    return repeated_ablation([(seed, dataset)], config, plan)


def repeated_ablation(corpora: Iterable[tuple[int | None, Dataset]], config: LearnerConfig,
                      plan: FoldPlan) -> list[AblationRow]:
    """Ablation averaged over several (seed, dataset) corpora."""
    corpora = list(corpora)
    if not corpora:
        raise FoldError("ablation needs at least one corpus")
    rows = []
    for subset in ABLATION_SUBSETS:
        sub_config = replace(config, features_enabled=subset)
        reports = tuple(cross_validate(d, sub_config, plan, seed) for seed, d in corpora)
        rows.append(AblationRow(subset, reports, subset not in NOT_IN_PAPER))
    return rows


def _mark(flag: bool) -> str:
    return "Included" if flag else "Not Included"


def format_report(report: EvalReport, plan: FoldPlan | None = None) -> str:
    lines = [f"cv mode: {report.mode}" + (f" ({plan.description})" if plan else ""),
             f"features: {', '.join(report.features)}   K: {report.k_min_points}"
             + (f"   seed: {report.seed}" if report.seed is not None else "")]
    lines.append(f"{'fold':>4}  {'test days':<12}{'tp':>4}{'tn':>4}{'fp':>4}{'fn':>4}  accuracy")
    for i, f in enumerate(report.folds):
        c = f.confusion
        days = ",".join(map(str, sorted(f.fold.test_days)))
        lines.append(f"{i:>4}  {days:<12}{c.tp:>4}{c.tn:>4}{c.fp:>4}{c.fn:>4}  {f.accuracy:8.3f}")
    lines.append(f"mean accuracy: {report.mean_accuracy:.3f}")
    return "\n".join(lines)


def format_ablation(rows: Sequence[AblationRow]) -> str:
    header = f"{'CO2':<14}{'Temperature':<14}{'Reverberation time':<20}{'Accuracy':>9}"
    lines = [header]
    for row in rows:
        note = "  (not in published table)" if not row.in_paper else ""
        lines.append(f"{_mark(row.co2):<14}{_mark(row.temperature):<14}{_mark(row.reverberation):<20}"
                     f"{row.accuracy:9.3f}{note}")
    return "\n".join(lines)


def write_ablation_csv(rows: Sequence[AblationRow], fh: TextIO):
    n_folds = max(len(r.fold_accuracies) for r in rows)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["co2", "temperature", "reverberation", "accuracy_mean"]
                    + [f"accuracy_fold_{i}" for i in range(n_folds)])
    for r in rows:
        writer.writerow([int(r.co2), int(r.temperature), int(r.reverberation), f"{r.accuracy:.3f}"]
                        + [f"{a:.3f}" for a in r.fold_accuracies])


def write_report_csv(report: EvalReport, fh: TextIO):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["fold", "train_days", "test_days", "tp", "tn", "fp", "fn", "accuracy"])
    for i, f in enumerate(report.folds):
        c = f.confusion
        writer.writerow([i, " ".join(map(str, sorted(f.fold.train_days))),
                         " ".join(map(str, sorted(f.fold.test_days))),
                         c.tp, c.tn, c.fp, c.fn, f"{f.accuracy:.3f}"])
    writer.writerow(["mean", "", "", "", "", "", "", f"{report.mean_accuracy:.3f}"])
