"""
CART decision trees and a balanced bagging ensemble
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import EmptyClass, UsageError
from .seeds import derive_seed

logger = logging.getLogger(__name__)


def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def majority(y: np.ndarray, num_classes: int) -> int:
    """Most frequent label; ties go to the lowest class index"""
    return int(np.argmax(np.bincount(y, minlength=num_classes)))


@dataclass
class Node:
    feature: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    label: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def to_dict(self) -> Dict[str, Any]:
        if self.is_leaf:
            return {"label": self.label}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Node":
        if "label" in data:
            return cls(label=int(data["label"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data["threshold"]),
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


@dataclass
class DecisionTree:
    root: Node
    num_features: int
    num_classes: int

    def predict_one(self, x: np.ndarray) -> int:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.label

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in np.atleast_2d(x)], dtype=np.int64)

    def depth(self) -> int:
        def walk(node: Node) -> int:
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def to_dict(self) -> Dict[str, Any]:
        return {"num_features": self.num_features, "num_classes": self.num_classes, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        return cls(Node.from_dict(data["root"]), int(data["num_features"]), int(data["num_classes"]))


def midpoint(low: float, high: float) -> float:
    """Threshold separating low from high; adjacent floats round up, so fall back to low"""
    mid = (low + high) / 2.0
    return mid if mid < high else low


def best_split(
    x: np.ndarray, y: np.ndarray, num_classes: int, min_leaf: int = 1
) -> Optional[Tuple[int, float, float]]:
    """
    Lowest weighted-Gini split over midpoints of sorted unique values

    Returns:
        (feature, threshold, weighted child impurity), or None when no split
        leaves min_leaf rows on both sides. Ties keep the first feature and
        the lowest threshold.
    """
    n, num_features = x.shape
    onehot = np.eye(num_classes)[y]
    total = onehot.sum(axis=0)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    best = None

    for feature in range(num_features):
        order = np.argsort(x[:, feature], kind="stable")
        xs = x[order, feature]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        gini_left = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
        impurity = (n_left * gini_left + n_right * gini_right) / n
        impurity[~valid] = np.inf
        i = int(np.argmin(impurity))
        if best is None or impurity[i] < best[2]:
            best = (feature, midpoint(float(xs[i]), float(xs[i + 1])), float(impurity[i]))
    return best


def _grow(x: np.ndarray, y: np.ndarray, num_classes: int, depth: int, max_depth: int, min_leaf: int) -> Node:
    label = majority(y, num_classes)
    if depth >= max_depth or len(y) < 2 * min_leaf or np.all(y == y[0]):
        return Node(label=label)
    split = best_split(x, y, num_classes, min_leaf)
    if split is None:
        if np.all(x == x[0]):
            logger.debug(f"{len(y)} rows share identical features with mixed labels, forcing a leaf")
        return Node(label=label)

    feature, threshold, _ = split
    mask = x[:, feature] <= threshold
    left = _grow(x[mask], y[mask], num_classes, depth + 1, max_depth, min_leaf)
    right = _grow(x[~mask], y[~mask], num_classes, depth + 1, max_depth, min_leaf)
    if left.is_leaf and right.is_leaf and left.label == right.label:
        return Node(label=left.label)
    return Node(feature=feature, threshold=threshold, left=left, right=right)


def train_tree(
    x: np.ndarray, y: np.ndarray, num_classes: int, max_depth: int = 12, min_leaf: int = 5
) -> DecisionTree:
    """Greedy CART with Gini impurity"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise UsageError("Cannot train a tree on zero rows")
    root = _grow(x, y, num_classes, 0, max_depth, max(1, min_leaf))
    return DecisionTree(root=root, num_features=x.shape[1], num_classes=num_classes)


def _class_counts(y: np.ndarray, num_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=num_classes)
    if np.any(counts == 0):
        empty = ", ".join(map(str, np.flatnonzero(counts == 0)))
        raise EmptyClass(f"Balanced bagging needs every class; class index {empty} has no rows")
    return counts


def balanced_bag(y: np.ndarray, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Row indices drawn with replacement, n_min from every class"""
    n_min = int(_class_counts(y, num_classes).min())
    return np.concatenate(
        [rng.choice(np.flatnonzero(y == c), size=n_min, replace=True) for c in range(num_classes)]
    )


@dataclass
class BaggingEnsemble:
    trees: List[DecisionTree]
    num_classes: int
    bags: List[Dict[str, int]] = field(default_factory=list)

    def votes(self, x: np.ndarray) -> np.ndarray:
        """(rows, classes) vote counts"""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        predictions = np.stack([tree.predict(x) for tree in self.trees], axis=1)
        return np.stack([np.bincount(row, minlength=self.num_classes) for row in predictions])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_classes": self.num_classes,
            "bags": self.bags,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BaggingEnsemble":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            num_classes=int(data["num_classes"]),
            bags=list(data.get("bags", [])),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "BaggingEnsemble":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise UsageError(f"Cannot load ensemble {path}: {e}")


def balanced_bagging_train(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    n_trees: int = 71,
    seed: int = 0,
    max_depth: int = 12,
    min_leaf: int = 5,
    threads: int = 1,
) -> BaggingEnsemble:
    """
    Train n_trees CART trees, each on its own class-balanced bootstrap

    Args:
        x: Feature matrix (rows, features)
        y: Class indices
        num_classes: Class count; every class needs at least one row
        n_trees: Ensemble size
        seed: Run seed; each tree gets an independent child stream
        max_depth: Tree depth limit
        min_leaf: Minimum rows per leaf
        threads: Trees trained concurrently

    Returns:
        The ensemble, trees in index order regardless of thread count
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_min = int(_class_counts(y, num_classes).min())
    children = np.random.SeedSequence(derive_seed(seed, "bagging")).spawn(n_trees)

    def fit(child: np.random.SeedSequence) -> DecisionTree:
        bag = balanced_bag(y, num_classes, np.random.default_rng(child))
        return train_tree(x[bag], y[bag], num_classes, max_depth, min_leaf)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        trees = list(pool.map(fit, children))
    bags = [{"tree": i, "per_class": n_min} for i in range(n_trees)]
    logger.info(f"Trained {n_trees} trees on balanced bags of {n_min} rows per class")
    return BaggingEnsemble(trees=trees, num_classes=num_classes, bags=bags)


def predict(ensemble: BaggingEnsemble, x: np.ndarray) -> np.ndarray:
    """Majority vote per row; ties go to the lowest class index"""
    return np.argmax(ensemble.votes(x), axis=1)
