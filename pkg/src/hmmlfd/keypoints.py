"""Key-point extraction from position and orientation sequences.

A sample becomes a key-point of a channel (position or orientation) when any
of three tests holds, each evaluated against the previously accepted
key-point of that channel:

* turning: the vertex angle between the vectors to the predecessor and the
  successor is small (the path folds back on itself);
* dwell: the channel has nearly stopped, enough time has elapsed since the
  last key-point and the channel has moved away from it;
* break-out: the channel has left a ball around the last key-point after
  staying confined to a slightly larger ball for long enough.

The vertex angle ``theta`` lies in ``[0, pi]`` and is compared on the full-turn
scale, ``2 * theta < 2*pi - eps``; a straight path (``theta = pi``) never fires.
The angle is undefined, and the turning test silent, when either difference
vector is shorter than the channel's dwell-speed threshold: at rest the
direction of motion is noise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import InvalidArgumentError, ParseError

@dataclass(frozen=True)
class KeyPointConfig:
    # position channel: turning (rad), dwell speed (m), dwell time (s), dwell displacement (m),
    # break-out radius (m), break-out time (s), confinement radius (m)
    eps1: float = 2.6
    eps2: float = 1e-4
    eps3: float = 0.3
    eps4: float = 0.01
    eps5: float = 0.02
    eps6: float = 0.5
    eps7: float = 0.03
    # orientation channel, same roles in quaternion-space distance
    eps8: float = 2.6
    eps9: float = 5e-5
    eps10: float = 0.3
    eps11: float = 0.02
    eps12: float = 0.1
    eps13: float = 0.5
    eps14: float = 0.12
    smoothing_window: int = 15

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("eps") and not getattr(self, f.name) > 0:
                raise InvalidArgumentError(f"{f.name} must be positive")
        for name in ("eps1", "eps8"):
            if not getattr(self, name) < np.pi:
                raise InvalidArgumentError(f"{name} must lie in (0, pi)")
        if int(self.smoothing_window) < 1:
            raise InvalidArgumentError("smoothing_window must be >= 1")

    def channel(self, name):
        """Thresholds ``(turn, speed, dwell, away, breakout, breakout_time, confine)`` of a channel."""
        first = {"position": 1, "orientation": 8}[name]
        return tuple(getattr(self, f"eps{first + k}") for k in range(7))

    def as_dict(self):
        return asdict(self)


def load_config(path, base=None):
    """Parse ``key = value`` lines into a :class:`KeyPointConfig`.

    Unknown keys are returned separately so callers can route them to other
    pipeline stages.
    """
    known = {f.name for f in fields(KeyPointConfig)}
    updates, extra = {}, {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", path, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            num = float(value)
        except ValueError:
            raise ParseError(f"value for {key!r} is not a number", path, lineno) from None
        if key in known:
            updates[key] = int(num) if key == "smoothing_window" else num
        else:
            extra[key] = num
    return replace(base or KeyPointConfig(), **updates), extra


@dataclass(frozen=True, eq=False)
class KeyPoint:
    demo_id: str
    sample_index: int
    timestamp: float
    vector: np.ndarray
    channel: str

    def __eq__(self, other):
        return (isinstance(other, KeyPoint) and self.demo_id == other.demo_id
                and self.sample_index == other.sample_index and self.timestamp == other.timestamp
                and self.channel == other.channel and np.array_equal(self.vector, other.vector))

    __hash__ = None


def smooth(values, window):
    """Centred moving average; edges repeat the boundary sample."""
    values = np.asarray(values, dtype=float)
    if window <= 1:
        return values.copy()
    return uniform_filter1d(values, size=int(window), axis=0, mode="nearest")


def turning_mask(X, eps, min_step):
    """Interior samples whose vertex angle passes the turning test."""
    u = X[:-2] - X[1:-1]
    v = X[2:] - X[1:-1]
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    ok = (nu >= min_step) & (nv >= min_step)
    cos = np.zeros(len(u))
    cos[ok] = np.einsum("ij,ij->i", u[ok], v[ok]) / (nu[ok] * nv[ok])
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    mask = np.zeros(len(X), dtype=bool)
    mask[1:-1] = ok & (2.0 * theta < 2.0 * np.pi - eps)
    return mask


def select_indices(X, t, thresholds):
    """Indices of key-points of one channel, endpoints included.

    ``X`` is the (already smoothed) channel sequence and ``t`` the timestamps.
    Evaluation is sequential: each test refers to the last accepted index.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(t, dtype=float)
    n = len(X)
    turn, speed, dwell, away, breakout, breakout_time, confine = thresholds
    turning = turning_mask(X, turn, speed)
    step = np.full(n, np.inf)
    step[1:] = np.linalg.norm(np.diff(X, axis=0), axis=1)
    slow = step < speed
    interior = np.zeros(n, dtype=bool)
    interior[1:-1] = True

    keys = [0]
    last = 0
    while True:
        d = np.linalg.norm(X[last:] - X[last], axis=1)
        elapsed = t[last:] - t[last]
        # largest distance over [last, i)
        reach = np.empty_like(d)
        reach[0] = 0.0
        reach[1:] = np.maximum.accumulate(d)[:-1]
        fire = (turning[last:]
                | (slow[last:] & (elapsed > dwell) & (d > away))
                | ((d >= breakout) & (elapsed > breakout_time) & (reach < confine)))
        fire &= interior[last:]
        fire[0] = False
        hits = np.flatnonzero(fire)
        if not len(hits):
            break
        last = last + int(hits[0])
        keys.append(last)
    keys.append(n - 1)
    return keys


def _channel_keypoints(demo, X, cfg, name):
    Xs = smooth(X, cfg.smoothing_window)
    idx = select_indices(Xs, demo.t, cfg.channel(name))
    V = demo.vectors()
    last = len(demo) - 1
    return [KeyPoint(demo.id, i, float(demo.t[i]), V[i].copy(), "endpoint" if i in (0, last) else name)
            for i in idx]


def extract_position_keypoints(demo, cfg=None):
    return _channel_keypoints(demo, demo.positions, cfg or KeyPointConfig(), "position")


def extract_orientation_keypoints(demo, cfg=None):
    return _channel_keypoints(demo, demo.orientations, cfg or KeyPointConfig(), "orientation")


def merge_keypoints(position, orientation, n_samples):
    """Merge two channels; key-points within one sample of a kept one are dropped."""
    last = n_samples - 1
    ends = {kp.sample_index: kp for kp in position + orientation if kp.sample_index in (0, last)}
    interior = sorted((kp for kp in position + orientation if 1 < kp.sample_index < last - 1),
                      key=lambda kp: kp.sample_index)
    merged = [ends[0]]
    for kp in interior:
        if kp.sample_index - merged[-1].sample_index > 1:
            merged.append(kp)
    merged.append(ends[last])
    return merged


def extract_keypoints(demo, cfg=None):
    cfg = cfg or KeyPointConfig()
    return merge_keypoints(extract_position_keypoints(demo, cfg),
                           extract_orientation_keypoints(demo, cfg), len(demo))
