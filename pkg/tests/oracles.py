"""Independent reference computations used by unit and acceptance tests.

Everything here is deliberately naive: fixpoint loops, exhaustive grids,
full recomputations. Oracles must not share code paths with the package.
"""

import numpy as np


def closure_bruteforce(n, base):
    """Transitive closure by fixpoint over explicit triples."""

    def ordered(i, j):
        return (i, j) if i < j else (j, i)

    sim = {ordered(i, j) for i, j, rel in base if rel == "similar"}
    dis = {ordered(i, j) for i, j, rel in base if rel == "dissimilar"}
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if i == j or j == k or i == k:
                        continue
                    ij, jk, ik = ordered(i, j), ordered(j, k), ordered(i, k)
                    if ij in sim and jk in sim and ik not in sim:
                        sim.add(ik)
                        changed = True
                    if ij in sim and jk in dis and ik not in dis:
                        dis.add(ik)
                        changed = True
    return sim, dis


_PROX_GRID = np.arange(-2.5, 3.5, 1e-5)


def mdsp_prox_grid(v, tau):
    """Grid-search argmin of 0.5 (z - v)^2 + tau min(|z|, |z - 1|)."""
    vals = 0.5 * (_PROX_GRID - v) ** 2 + tau * np.minimum(
        np.abs(_PROX_GRID), np.abs(_PROX_GRID - 1.0)
    )
    return float(_PROX_GRID[np.argmin(vals)])


def ari_pair_counting(a, b):
    """Adjusted Rand index counted pair by explicit pair."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.size
    both = same_a = same_b = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            sa = a[i] == a[j]
            sb = b[i] == b[j]
            same_a += sa
            same_b += sb
            both += sa and sb
    expected = same_a * same_b / total
    maximum = 0.5 * (same_a + same_b)
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


def total_pair_entropy_direct(probs, unlabeled):
    """Plain loop over the unlabeled pair list."""
    probs = np.asarray(probs)
    total = 0.0
    for i, j in unlabeled:
        p = float(probs[i] @ probs[j])
        if p < 1e-12 or 1.0 - p < 1e-12:
            continue
        total -= p * np.log(p) + (1.0 - p) * np.log(1.0 - p)
    return total


def calinski_harabasz_euclidean(points, labels):
    """Textbook CH index with plain loops and Euclidean geometry."""
    labs = sorted(set(labels.tolist()))
    n = len(points)
    k = len(labs)
    overall = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for lab in labs:
        members = points[labels == lab]
        mu = members.mean(axis=0)
        between += len(members) * float(((mu - overall) ** 2).sum())
        for row in members:
            within += float(((row - mu) ** 2).sum())
    return (between / (k - 1)) / (within / (n - k))


def lloyd_kmeans(points, centers, iters=100):
    """Plain Lloyd's iteration from explicit starting centers."""
    centers = centers.copy()
    labels = np.zeros(len(points), dtype=np.int64)
    for _ in range(iters):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1) + 1
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(len(centers)):
            mask = labels == c + 1
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
    return labels, centers


def root_sum_objective(points, pairs, weights, a):
    """Plain weighted sum of root quadratic separations for diagonal weights."""
    total = 0.0
    for (i, j), w in zip(pairs, weights):
        q = 0.0
        for m in range(len(a)):
            q += a[m] * (points[i][m] - points[j][m]) ** 2
        total += w * np.sqrt(q)
    return float(total)


def similar_spread(points, pairs, a):
    """Mean similar-pair quadratic spread under diagonal weights."""
    total = 0.0
    for i, j in pairs:
        for m in range(len(a)):
            total += a[m] * (points[i][m] - points[j][m]) ** 2
    return float(total / len(pairs))


def best_gini_stump(points, labels, min_leaf=1):
    """Exhaustive best axis split by the two-child (count^2 / size) score.

    Returns (score, feature, threshold) or None when no split satisfies
    min_leaf. Ties keep the earliest (feature, threshold) in scan order.
    """
    from collections import Counter

    best = None
    n, p = points.shape
    for f in range(p):
        ordered = sorted(set(points[:, f]))
        for lo, hi in zip(ordered, ordered[1:]):
            thr = (lo + hi) / 2.0
            left = [lab for v, lab in zip(points[:, f], labels) if v <= thr]
            right = [lab for v, lab in zip(points[:, f], labels) if v > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            score = sum(c * c for c in Counter(left).values()) / len(left)
            score += sum(c * c for c in Counter(right).values()) / len(right)
            if best is None or score > best[0] + 1e-12:
                best = (score, f, thr)
    return best


def mee_scores_direct(rows, unlabeled, candidates):
    """Expected post-resolution pair entropy by full recomputation.

    For each candidate i and hypothesis column m, rebuilds the whole
    probability matrix with row i one-hot at m and re-sums the binary
    entropies over the unlabeled pairs.
    """
    import math

    def h(p):
        if p < 1e-12 or 1.0 - p < 1e-12:
            return 0.0
        return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))

    def q(mat):
        total = 0.0
        for a, b in unlabeled:
            total += h(sum(x * y for x, y in zip(mat[a], mat[b])))
        return total

    width = len(rows[0])
    scores = {}
    for i in candidates:
        u = 0.0
        for m in range(width):
            mat = [list(r) for r in rows]
            mat[i] = [1.0 if k == m else 0.0 for k in range(width)]
            u += rows[i][m] * q(mat)
        scores[i] = u
    return scores
