"""Split-quality criteria: entropy gain for class labels, compactness gain for
per-joint offset vectors, and argmax selection over candidate tests."""
from __future__ import annotations

import numpy as np
from numba import njit

# gains within this relative distance of the maximum count as ties
TIE_RTOL = 1e-12


def entropy_from_counts(counts: np.ndarray) -> np.ndarray:
    """Natural-log entropy along the last axis of a count array."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def entropy(labels, n_classes: int | None = None) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("entropy of an empty set is undefined")
    counts = np.bincount(labels, minlength=n_classes or 0)
    return float(entropy_from_counts(counts))


def gain(labels, values, threshold: float, n_classes: int | None = None) -> float:
    """Information gain of sending ``values > threshold`` left.

    A split that leaves one side empty scores 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if labels.size == 0:
        raise ValueError("gain of an empty set is undefined")
    C = n_classes or int(labels.max()) + 1
    left = values > threshold
    nl = int(left.sum())
    n = labels.size
    if nl == 0 or nl == n:
        return 0.0
    e = entropy(labels, C)
    el = entropy(labels[left], C)
    er = entropy(labels[~left], C)
    return e - (nl / n) * el - ((n - nl) / n) * er


def within_radius(offsets: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``(n, J)`` mask of examples closer than ``radii[j]`` to joint j."""
    return np.linalg.norm(offsets, axis=-1) < np.asarray(radii)[None, :]


def compactness(offsets: np.ndarray, radii, within: np.ndarray | None = None) -> float:
    """Sum over joints of the distances of within-radius offsets to their mean."""
    offsets = np.asarray(offsets, dtype=np.float64)
    if within is None:
        within = within_radius(offsets, radii)
    total = 0.0
    for j in range(offsets.shape[1]):
        o = offsets[within[:, j], j]
        if len(o) == 0:
            continue
        total += float(np.linalg.norm(o - o.mean(axis=0), axis=1).sum())
    return total


def compactness_gain(offsets, values, threshold: float, radii) -> float:
    """Gain with compactness in place of entropy; empty sides score 0."""
    offsets = np.asarray(offsets, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    within = within_radius(offsets, radii)
    left = values > threshold
    n = len(values)
    nl = int(left.sum())
    if nl == 0 or nl == n:
        return 0.0
    e = compactness(offsets, radii, within)
    el = compactness(offsets[left], radii, within[left])
    er = compactness(offsets[~left], radii, within[~left])
    return e - (nl / n) * el - ((n - nl) / n) * er


# ---------------------------------------------------------------------------
# vectorised sweeps over (feature, threshold) candidates; invalid = -inf


def classification_gains(values: np.ndarray, thresholds: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    F, n = values.shape
    T = thresholds.shape[1]
    C = n_classes
    labels = np.asarray(labels, dtype=np.int64)
    total = np.bincount(labels, minlength=C)
    h = entropy_from_counts(total)
    out = np.empty((F, T))
    for f in range(F):
        order = np.argsort(thresholds[f], kind="stable")
        ts = thresholds[f][order]
        # example goes left of sorted threshold k iff k < (#thresholds below its value)
        b = np.searchsorted(ts, values[f], side="left")
        hist = np.bincount(b * C + labels, minlength=(T + 1) * C).reshape(T + 1, C)
        left = np.cumsum(hist[::-1], axis=0)[::-1][1:]
        right = total[None, :] - left
        nl = left.sum(axis=1)
        nr = n - nl
        g = h - (nl / n) * entropy_from_counts(left) - (nr / n) * entropy_from_counts(right)
        g[(nl == 0) | (nr == 0)] = -np.inf
        out[f, order] = g
    return out


@njit(cache=True)
def _split_compactness(values, thresholds, offsets, members, starts):
    F, n = values.shape
    T = thresholds.shape[1]
    J = starts.shape[0] - 1
    e_left = np.zeros((F, T))
    e_right = np.zeros((F, T))
    n_left = np.zeros((F, T), dtype=np.int64)
    for f in range(F):
        for t in range(T):
            thr = thresholds[f, t]
            nl = 0
            for i in range(n):
                if values[f, i] > thr:
                    nl += 1
            n_left[f, t] = nl
            el = 0.0
            er = 0.0
            for j in range(J):
                a0 = 0.0
                a1 = 0.0
                a2 = 0.0
                b0 = 0.0
                b1 = 0.0
                b2 = 0.0
                ca = 0
                cb = 0
                for k in range(starts[j], starts[j + 1]):
                    i = members[k]
                    if values[f, i] > thr:
                        a0 += offsets[i, j, 0]
                        a1 += offsets[i, j, 1]
                        a2 += offsets[i, j, 2]
                        ca += 1
                    else:
                        b0 += offsets[i, j, 0]
                        b1 += offsets[i, j, 1]
                        b2 += offsets[i, j, 2]
                        cb += 1
                if ca > 0:
                    a0 /= ca
                    a1 /= ca
                    a2 /= ca
                if cb > 0:
                    b0 /= cb
                    b1 /= cb
                    b2 /= cb
                for k in range(starts[j], starts[j + 1]):
                    i = members[k]
                    if values[f, i] > thr:
                        d0 = offsets[i, j, 0] - a0
                        d1 = offsets[i, j, 1] - a1
                        d2 = offsets[i, j, 2] - a2
                        el += np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                    else:
                        d0 = offsets[i, j, 0] - b0
                        d1 = offsets[i, j, 1] - b1
                        d2 = offsets[i, j, 2] - b2
                        er += np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            e_left[f, t] = el
            e_right[f, t] = er
    return e_left, e_right, n_left


def _joint_members(within: np.ndarray):
    J = within.shape[1]
    cols = [np.nonzero(within[:, j])[0] for j in range(J)]
    starts = np.zeros(J + 1, dtype=np.int64)
    starts[1:] = np.cumsum([len(c) for c in cols])
    members = np.concatenate(cols).astype(np.int64) if J else np.zeros(0, np.int64)
    return members, starts


def regression_gains(values: np.ndarray, thresholds: np.ndarray, offsets: np.ndarray, within: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    n = values.shape[1]
    members, starts = _joint_members(within)
    e = compactness(offsets, None, within)
    el, er, nl = _split_compactness(values, thresholds, offsets, members, starts)
    g = e - (nl / n) * el - ((n - nl) / n) * er
    g[(nl == 0) | (nl == n)] = -np.inf
    return g


def pick_best(scores: np.ndarray) -> int | None:
    """Index of the best finite score, lowest index among near-ties."""
    flat = np.asarray(scores, dtype=np.float64).ravel()
    finite = np.isfinite(flat)
    if not finite.any():
        return None
    best = flat[finite].max()
    tol = TIE_RTOL * max(1.0, abs(best))
    return int(np.flatnonzero(finite & (flat >= best - tol))[0])
