"""Limb completion from main-body joints and paw positions.

Fore limbs: the shoulder joint (13/15) hangs rigidly off joint 4, placed
with a body frame rebuilt from the main joints; elbow and paw then follow
from a two-bone solve.  Hind limbs keep a right angle at the ankle
(17-18-23): the knee is solved first against a virtual bone spanning the
right triangle, after which the ankle lies on the Thales circle of that
virtual bone and a second two-bone solve places it exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..synth.skeleton import (
    FORE_LEFT,
    FORE_RIGHT,
    HIND_LEFT,
    HIND_RIGHT,
    MAIN_JOINTS,
    N_JOINTS,
    SkeletonModel,
    body_axes,
)


@dataclass
class IKResult:
    positions: np.ndarray  # (24, 3)
    clamped: dict  # paw id -> True when the paw was out of reach


def two_bone(root, target, l1: float, l2: float, pole):
    """Place the middle joint of a two-bone chain.

    Returns ``(middle, end, clamped)``; ``end`` equals ``target`` unless the
    target is out of reach, in which case it is pulled onto the reachable
    shell along the root->target direction.  ``pole`` picks the bend side.
    """
    root, target, pole = (np.asarray(v, dtype=np.float64) for v in (root, target, pole))
    span = target - root
    d = np.linalg.norm(span)
    lo, hi = abs(l1 - l2), l1 + l2
    if d > 0:
        axis = span / d
    else:
        axis = _any_perpendicular(pole)
    clamped = bool(d > hi or d < lo)
    d = min(max(d, lo), hi)
    end = root + axis * d if clamped else target
    perp = pole - np.dot(pole, axis) * axis
    n = np.linalg.norm(perp)
    perp = perp / n if n > 1e-12 else _any_perpendicular(axis)
    if d == 0:
        return root + perp * l1, end, clamped
    cos_a = np.clip((l1 * l1 + d * d - l2 * l2) / (2 * l1 * d), -1.0, 1.0)
    sin_a = np.sqrt(max(0.0, 1.0 - cos_a * cos_a))
    return root + l1 * (cos_a * axis + sin_a * perp), end, clamped


def _any_perpendicular(v):
    v = np.asarray(v, dtype=np.float64)
    trial = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    p = trial - np.dot(trial, v) / max(np.dot(v, v), 1e-300) * v
    return p / np.linalg.norm(p)


def _lengths(model: SkeletonModel, scale, bone_scale):
    bs = np.ones(N_JOINTS) if bone_scale is None else np.asarray(bone_scale)
    return np.linalg.norm(model.rest, axis=1) * scale * bs, model.rest * (scale * bs)[:, None]


def _rest_pole(vecs, chain):
    """Bend direction of the chain's middle joint in the rest pose (body-frame coordinates)."""
    a = vecs[chain[0] - 1]
    chord = sum(vecs[j - 1] for j in chain)
    return a - np.dot(a, chord) / np.dot(chord, chord) * chord


def ik_fuse(main: np.ndarray, paws: dict, model: SkeletonModel, scale: float = 1.0, bone_scale=None) -> IKResult:
    """Full 24-joint skeleton from the 12 main joints and any subset of the paws (ids 21-24).

    Limbs without a paw get the rest configuration relative to the rebuilt body frame.
    """
    main = np.asarray(main, dtype=np.float64)
    if main.shape != (len(MAIN_JOINTS), 3):
        raise ValueError("expected 12 main-body joints")
    out = np.full((N_JOINTS, 3), np.nan)
    out[: len(MAIN_JOINTS)] = main
    lengths, vecs = _lengths(model, scale, bone_scale)
    front, rear = body_axes(out)
    clamped = {}
    for chain, frame in ((FORE_LEFT, front), (FORE_RIGHT, front)):
        sh, el, paw = chain
        out[sh - 1] = out[model.parents[sh - 1] - 1] + frame @ vecs[sh - 1]
        if paws.get(paw) is None:
            out[el - 1] = out[sh - 1] + frame @ vecs[el - 1]
            out[paw - 1] = out[el - 1] + frame @ vecs[paw - 1]
            continue
        pole = frame @ _rest_pole(vecs, (el, paw))
        out[el - 1], out[paw - 1], clamped[paw] = two_bone(out[sh - 1], paws[paw], lengths[el - 1], lengths[paw - 1], pole)
    for chain, hip in ((HIND_LEFT, 11), (HIND_RIGHT, 12)):
        knee, ankle, paw = chain
        if paws.get(paw) is None:
            out[knee - 1] = out[hip - 1] + rear @ vecs[knee - 1]
            out[ankle - 1] = out[knee - 1] + rear @ vecs[ankle - 1]
            out[paw - 1] = out[ankle - 1] + rear @ vecs[paw - 1]
            continue
        virtual = np.hypot(lengths[ankle - 1], lengths[paw - 1])
        pole = rear @ _rest_pole(vecs, (knee, ankle, paw))
        out[knee - 1], out[paw - 1], clamped[paw] = two_bone(out[hip - 1], paws[paw], lengths[knee - 1], virtual, pole)
        pole2 = rear @ _rest_pole(vecs, (ankle, paw))
        out[ankle - 1], _, _ = two_bone(out[knee - 1], out[paw - 1], lengths[ankle - 1], lengths[paw - 1], pole2)
    return IKResult(out, clamped)
