"""Binary decision trees over continuous features, grown by information gain.

Splits are thresholds at midpoints between consecutive distinct feature
values, ``value <= threshold`` going left. A node is only split when it holds
at least ``k_min_points`` samples, its labels are mixed, some split has
positive gain and the depth limit allows it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .dataset import FEATURES, SlotSample
from .errors import ConfigError, EmptyPartition, MissingFeature, ModelFormatError, UnlabeledSample

FORMAT = "occusense-tree/1"

# Candidate order used to break gain ties.
TIE_ORDER = ("reverberation_time", "temperature", "co2")

# Gains closer than this are treated as equal; anything at or below it counts as no gain.
GAIN_EPS = 1e-12


@dataclass(frozen=True)
class Leaf:
    label: int
    support: int
    purity: float


@dataclass(frozen=True)
class Internal:
    feature: str
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Internal]


@dataclass(frozen=True)
class LearnerConfig:
    k_min_points: int = 4
    max_depth: int | None = None
    features_enabled: tuple[str, ...] = FEATURES
    tie_class: int = 0

    def __post_init__(self):
        object.__setattr__(self, "features_enabled", tuple(self.features_enabled))
        if not self.features_enabled:
            raise ConfigError("at least one feature must be enabled")
        unknown = set(self.features_enabled) - set(FEATURES)
        if unknown:
            raise ConfigError(f"unknown features {sorted(unknown)}")
        if len(set(self.features_enabled)) != len(self.features_enabled):
            raise ConfigError("duplicate feature in features_enabled")
        if self.k_min_points < 1:
            raise ConfigError("k_min_points must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.tie_class not in (0, 1):
            raise ConfigError("tie_class must be 0 or 1")


def _entropy_counts(*counts: int) -> float:
    # Sorted so that mirrored partitions produce bit-identical entropies.
    total = sum(counts)
    h = 0.0
    for c in sorted(counts):
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def entropy(labels: Sequence[int]) -> float:
    """Shannon entropy of a 0/1 label list, in bits."""
    if len(labels) == 0:
        raise EmptyPartition("entropy of an empty partition")
    ones = sum(1 for y in labels if y == 1)
    return _entropy_counts(len(labels) - ones, ones)


def _split_gain(n0: int, n1: int, l0: int, l1: int) -> float:
    n = n0 + n1
    nl = l0 + l1
    nr = n - nl
    if nl == 0 or nr == 0:
        return 0.0
    parent = _entropy_counts(n0, n1)
    children = (nl / n) * _entropy_counts(l0, l1) + (nr / n) * _entropy_counts(n0 - l0, n1 - l1)
    return max(parent - children, 0.0)


def _labels_of(samples: Sequence[SlotSample]) -> list[int]:
    labels = []
    for s in samples:
        if s.label is None:
            raise UnlabeledSample(f"sample at (day {s.day_index}, slot {s.slot_index}) has no label")
        labels.append(s.label)
    return labels


def information_gain(samples: Sequence[SlotSample], feature: str, threshold: float) -> float:
    """Entropy reduction from splitting `samples` at ``feature <= threshold``."""
    labels = _labels_of(samples)
    if not labels:
        raise EmptyPartition("information gain of an empty dataset")
    n1 = sum(labels)
    l0 = l1 = 0
    for s, y in zip(samples, labels):
        if s.feature(feature) <= threshold:
            if y:
                l1 += 1
            else:
                l0 += 1
    return _split_gain(len(labels) - n1, n1, l0, l1)


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: float
    gain: float


def best_split(samples: Sequence[SlotSample], config: LearnerConfig) -> Split | None:
    """Highest-gain threshold split over the enabled features, or None.

    Each feature is scanned once in sorted order, accumulating class counts on
    the left side, so every midpoint is scored in constant time.
    """
    labels = _labels_of(samples)
    n = len(labels)
    n1 = sum(labels)
    n0 = n - n1
    best: Split | None = None
    for feature in TIE_ORDER:
        if feature not in config.features_enabled:
            continue
        pairs = sorted((s.feature(feature), y) for s, y in zip(samples, labels))
        l0 = l1 = 0
        for i in range(n - 1):
            value, y = pairs[i]
            if y:
                l1 += 1
            else:
                l0 += 1
            nxt = pairs[i + 1][0]
            if nxt == value:
                continue
            gain = _split_gain(n0, n1, l0, l1)
            if gain <= GAIN_EPS:
                continue
            if best is None or gain > best.gain + GAIN_EPS:
                threshold = (value + nxt) / 2
                if threshold >= nxt:  # adjacent floats
                    threshold = value
                best = Split(feature, threshold, gain)
    return best


class DecisionTree:
    """A fitted tree plus the settings it was grown with."""

    def __init__(self, root: Node, features: Sequence[str] = FEATURES, k_min_points: int | None = None):
        self.root = root
        self.features = tuple(features)
        self.k_min_points = k_min_points

    def __repr__(self):
        return f"DecisionTree(depth={self.depth()}, leaves={self.leaf_count()})"

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return (self.root, self.features, self.k_min_points) == (other.root, other.features, other.k_min_points)

    def predict(self, sample) -> int:
        return predict(self, sample)

    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def leaf_count(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 1
            return walk(node.left) + walk(node.right)
        return walk(self.root)

    def used_features(self) -> set[str]:
        found = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                found.add(node.feature)
                stack += [node.left, node.right]
        return found


def _make_leaf(labels: Sequence[int], tie_class: int) -> Leaf:
    ones = sum(labels)
    zeros = len(labels) - ones
    if ones == zeros:
        label = tie_class
    else:
        label = 1 if ones > zeros else 0
    return Leaf(label, len(labels), max(ones, zeros) / len(labels))


def fit(samples: Iterable[SlotSample], config: LearnerConfig | None = None) -> DecisionTree:
    """Grow a tree top-down on labelled `samples`."""
    config = config or LearnerConfig()
    samples = list(samples)
    if not samples:
        raise EmptyPartition("cannot fit on an empty dataset")
    _labels_of(samples)

    def grow(subset: list[SlotSample], depth: int) -> Node:
        labels = [s.label for s in subset]
        if (len(set(labels)) == 1
                or len(subset) < config.k_min_points
                or (config.max_depth is not None and depth >= config.max_depth)):
            return _make_leaf(labels, config.tie_class)
        split = best_split(subset, config)
        if split is None:
            return _make_leaf(labels, config.tie_class)
        left = [s for s in subset if s.feature(split.feature) <= split.threshold]
        right = [s for s in subset if s.feature(split.feature) > split.threshold]
        return Internal(split.feature, split.threshold, grow(left, depth + 1), grow(right, depth + 1))

    return DecisionTree(grow(samples, 0), config.features_enabled, config.k_min_points)


def _value(sample, feature: str) -> float:
    if isinstance(sample, Mapping):
        value = sample.get(feature)
    else:
        value = getattr(sample, feature, None)
    if value is None or (isinstance(value, float) and math.isnan(value)):
        raise MissingFeature(f"sample has no value for {feature!r}")
    return value


def predict(tree: DecisionTree, sample) -> int:
    """Occupancy (0 or 1) for `sample`, a SlotSample or a feature mapping."""
    for feature in tree.features:
        _value(sample, feature)
    node = tree.root
    while isinstance(node, Internal):
        node = node.left if _value(sample, node.feature) <= node.threshold else node.right
    return node.label


# Model documents

def _node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.label, "support": node.support, "purity": node.purity}
    return {"feature": node.feature, "threshold": node.threshold,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def to_document(tree: DecisionTree) -> dict:
    return {"format": FORMAT, "k_min_points": tree.k_min_points,
            "features": list(tree.features), "root": _node_to_dict(tree.root)}


def serialize(tree: DecisionTree) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(to_document(tree), indent=2, allow_nan=False)


def _number(obj, key, path):
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFormatError(f"{path}.{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ModelFormatError(f"{path}.{key}: must be finite, got {value!r}")
    return value


def _node_from_dict(obj, path: str, features: tuple[str, ...]) -> Node:
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: expected an object")
    if "leaf" in obj:
        label = obj["leaf"]
        if label not in (0, 1) or isinstance(label, bool):
            raise ModelFormatError(f"{path}.leaf: must be 0 or 1, got {label!r}")
        support = obj.get("support", 0)
        if isinstance(support, bool) or not isinstance(support, int) or support < 0:
            raise ModelFormatError(f"{path}.support: must be a non-negative integer")
        purity = _number(obj, "purity", path) if "purity" in obj else 1.0
        if not 0.5 <= purity <= 1.0:
            raise ModelFormatError(f"{path}.purity: must be in [0.5, 1], got {purity!r}")
        return Leaf(label, support, float(purity))
    feature = obj.get("feature")
    if feature not in FEATURES:
        raise ModelFormatError(f"{path}.feature: unknown feature {feature!r}")
    if feature not in features:
        raise ModelFormatError(f"{path}.feature: {feature!r} is not among the model's features")
    threshold = float(_number(obj, "threshold", path))
    for side in ("left", "right"):
        if side not in obj:
            raise ModelFormatError(f"{path}: missing {side!r} child")
    return Internal(feature, threshold,
                    _node_from_dict(obj["left"], f"{path}.left", features),
                    _node_from_dict(obj["right"], f"{path}.right", features))


def from_document(doc) -> DecisionTree:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format") != FORMAT:
        raise ModelFormatError(f"format: expected {FORMAT!r}, got {doc.get('format')!r}")
    features = doc.get("features", list(FEATURES))
    if (not isinstance(features, list) or not features
            or any(f not in FEATURES for f in features)):
        raise ModelFormatError(f"features: expected a non-empty list drawn from {FEATURES}")
    k = doc.get("k_min_points")
    if k is not None and (isinstance(k, bool) or not isinstance(k, int) or k < 1):
        raise ModelFormatError(f"k_min_points: expected a positive integer, got {k!r}")
    if "root" not in doc:
        raise ModelFormatError("root: missing")
    return DecisionTree(_node_from_dict(doc["root"], "root", tuple(features)), features, k)


def deserialize(text: str) -> DecisionTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    return from_document(doc)


def load_model(path) -> DecisionTree:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())


def save_model(tree: DecisionTree, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(tree) + "\n")

