"""Bagged decision trees voting on cluster membership.

Each tree grows on a bootstrap resample with axis-aligned splits chosen by
Gini impurity over a random feature subset per node, then casts one vote
per query point.  The ensemble reports vote fractions, which downstream
code reads as membership probabilities: the spread comes from resampling,
so points every tree agrees on get a sharp row and boundary points do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble knobs.

    ``feature_subsample`` is the fraction of features examined at each
    split; ``None`` applies the square-root rule.  ``max_depth`` of
    ``None`` grows every tree to purity.
    """

    n_trees: int = 50
    max_depth: int | None = None
    min_leaf: int = 1
    feature_subsample: float | None = None

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("need at least one tree")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive when set")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be positive")
        if self.feature_subsample is not None and not (
            0.0 < self.feature_subsample <= 1.0
        ):
            raise ValueError("feature_subsample must lie in (0, 1]")


@dataclass(frozen=True)
class _Tree:
    # Flat node arrays; feature -1 marks a leaf holding a class code in vote.
    feature: NDArray[np.intp]
    threshold: NDArray[np.float64]
    left: NDArray[np.intp]
    right: NDArray[np.intp]
    vote: NDArray[np.intp]


def _split_width(p: int, fraction: float | None) -> int:
    if fraction is None:
        return max(1, int(np.sqrt(p)))
    return max(1, int(round(fraction * p)))


def _best_cut(values, onehot, min_leaf):
    """Best Gini split of one feature, as (score, threshold) or None.

    The score is sum over both children of (class count)^2 / size, which
    ranks splits identically to the weighted Gini impurity but avoids the
    constant terms.
    """
    order = np.argsort(values, kind="stable")
    ranked = values[order]
    cum = np.cumsum(onehot[order], axis=0)
    n = values.size
    total = cum[-1]
    size_left = np.arange(1, n)
    usable = (
        (ranked[1:] > ranked[:-1])
        & (size_left >= min_leaf)
        & (n - size_left >= min_leaf)
    )
    if not usable.any():
        return None
    left = cum[:-1][usable]
    n_l = size_left[usable].astype(np.float64)
    right = total - left
    score = (left * left).sum(axis=1) / n_l + (right * right).sum(axis=1) / (n - n_l)
    at = int(np.argmax(score))
    cut = size_left[usable][at]
    return float(score[at]), 0.5 * float(ranked[cut - 1] + ranked[cut])


def _grow_tree(
    x: NDArray[np.float64],
    codes: NDArray[np.intp],
    n_classes: int,
    cfg: ForestConfig,
    rng: np.random.Generator,
) -> _Tree:
    n, p = x.shape
    width = _split_width(p, cfg.feature_subsample)
    eye = np.eye(n_classes)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    vote: list[int] = []

    def make_leaf(idx) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        vote.append(int(np.argmax(np.bincount(codes[idx], minlength=n_classes))))
        return node

    # Worklist instead of recursion: chains of singleton splits can reach
    # depth n at min_leaf 1.  Entries patch their parent slot on creation.
    todo: list[tuple[NDArray[np.intp], int, int, int]] = [
        (np.arange(n, dtype=np.intp), 0, -1, 0)
    ]
    while todo:
        idx, depth, parent, side = todo.pop()
        here = codes[idx]
        capped = cfg.max_depth is not None and depth >= cfg.max_depth
        split = None
        if not capped and idx.size >= 2 * cfg.min_leaf and np.any(here != here[0]):
            onehot = eye[here]
            parent_score = float((onehot.sum(axis=0) ** 2).sum()) / idx.size
            best_score = parent_score + 1e-12
            for f in rng.choice(p, size=width, replace=False):
                got = _best_cut(x[idx, f], onehot, cfg.min_leaf)
                if got is not None and got[0] > best_score:
                    best_score = got[0]
                    split = (int(f), got[1])
        if split is None:
            node = make_leaf(idx)
        else:
            node = len(feature)
            feature.append(split[0])
            threshold.append(split[1])
            left.append(-1)
            right.append(-1)
            vote.append(-1)
            goes_left = x[idx, split[0]] <= split[1]
            # Right pushed first so the left child is built next (preorder),
            # keeping rng consumption independent of worklist internals.
            todo.append((idx[~goes_left], depth + 1, node, 1))
            todo.append((idx[goes_left], depth + 1, node, 0))
        if parent >= 0:
            (left if side == 0 else right)[parent] = node
    return _Tree(
        np.array(feature, dtype=np.intp),
        np.array(threshold),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(vote, dtype=np.intp),
    )


def _tree_votes(tree: _Tree, x: NDArray[np.float64]) -> NDArray[np.intp]:
    out = np.empty(x.shape[0], dtype=np.intp)
    stack = [(0, np.arange(x.shape[0], dtype=np.intp))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        f = tree.feature[node]
        if f < 0:
            out[idx] = tree.vote[node]
        else:
            goes_left = x[idx, f] <= tree.threshold[node]
            stack.append((int(tree.left[node]), idx[goes_left]))
            stack.append((int(tree.right[node]), idx[~goes_left]))
    return out


@dataclass(frozen=True)
class Forest:
    """Trained ensemble; ``classes`` maps vote columns back to labels."""

    classes: tuple[int, ...]
    trees: tuple[_Tree, ...]

    def vote_fractions(self, points) -> NDArray[np.float64]:
        """Per-point fraction of trees voting each class, shape (n, len(classes))."""
        x = np.asarray(points, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError("points must be a 2-d array")
        counts = np.zeros((x.shape[0], len(self.classes)))
        rows = np.arange(x.shape[0])
        for tree in self.trees:
            counts[rows, _tree_votes(tree, x)] += 1.0
        return counts / len(self.trees)


def fit_forest(points, labels, cfg: ForestConfig | None = None, seed: int = 0) -> Forest:
    """Fit the ensemble on labelled points.

    Trees receive independent streams spawned from the seed, so training is
    deterministic and could be farmed out per tree without changing the
    result.
    """
    cfg = cfg or ForestConfig()
    x = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels).ravel()
    if x.ndim != 2:
        raise DimensionError("points must be a 2-d array")
    if y.shape[0] != x.shape[0]:
        raise DimensionError(
            f"{x.shape[0]} points but {y.shape[0]} labels"
        )
    if x.shape[0] == 0:
        raise DimensionError("cannot fit on an empty sample")
    classes, codes = np.unique(y, return_inverse=True)
    codes = codes.astype(np.intp)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, x.shape[0], size=x.shape[0])
        trees.append(_grow_tree(x[boot], codes[boot], classes.size, cfg, rng))
    return Forest(tuple(int(c) for c in classes), tuple(trees))
