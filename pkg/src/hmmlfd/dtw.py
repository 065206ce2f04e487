"""Multidimensional dynamic time warping and key-point timeline alignment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAlignmentError, InvalidArgumentError
from .hmm import forward_log_likelihood


@dataclass(frozen=True)
class WarpPath:
    pairs: tuple
    total_cost: float

    @property
    def ref_indices(self):
        return np.array([p[0] for p in self.pairs])

    @property
    def test_indices(self):
        return np.array([p[1] for p in self.pairs])


def _as_frames(seq):
    a = np.asarray(seq, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or len(a) == 0:
        raise InvalidArgumentError("sequences must be non-empty arrays of frames")
    return a


def distance_matrix(ref, test, block=256):
    """``H[x, y]``: squared Euclidean distance summed over all dimensions."""
    r, t = _as_frames(ref), _as_frames(test)
    if r.shape[1] != t.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {r.shape[1]} vs {t.shape[1]}")
    H = np.empty((len(r), len(t)))
    for start in range(0, len(r), block):
        diff = r[start:start + block, None, :] - t[None, :, :]
        H[start:start + block] = (diff * diff).sum(axis=2)
    return H


def accumulated_cost(H):
    """``g`` padded with an infinite border: ``G[x+1, y+1] = g(x, y)``.

    Filled one anti-diagonal at a time, since each cell depends only on the
    two previous diagonals.
    """
    R, T = H.shape
    G = np.full((R + 1, T + 1), np.inf)
    G[0, 0] = 0.0
    for k in range(R + T - 1):
        x = np.arange(max(0, k - T + 1), min(k, R - 1) + 1)
        y = k - x
        best = np.minimum(np.minimum(G[x, y + 1], G[x, y]), G[x + 1, y])
        G[x + 1, y + 1] = H[x, y] + best
    return G


def dtw_align(ref, test):
    """Optimal warp path; backtracking prefers diagonal, then vertical
    (reference index steps back), then horizontal."""
    H = distance_matrix(ref, test)
    G = accumulated_cost(H)
    R, T = H.shape
    x, y = R - 1, T - 1
    pairs = [(x, y)]
    while x or y:
        # candidates as (x, y) of the predecessor cell, in tie-break order
        options = ((x - 1, y - 1), (x - 1, y), (x, y - 1))
        best = None
        for px, py in options:
            if px < 0 or py < 0:
                continue
            if best is None or G[px + 1, py + 1] < G[best[0] + 1, best[1] + 1]:
                best = (px, py)
        x, y = best
        pairs.append((x, y))
    pairs.reverse()
    return WarpPath(tuple(pairs), float(G[R, T]))


def select_reference(model, sequences):
    """Index of the sequence with the highest forward likelihood (lowest index on ties)."""
    if not sequences:
        raise InvalidArgumentError("need at least one sequence")
    scores = [forward_log_likelihood(model, s) for s in sequences]
    return int(np.argmax(scores))


def decimation_indices(n, max_frames):
    step = max(1, -(-n // max_frames))
    idx = np.arange(0, n, step)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def reference_index_map(ref_vectors, test_vectors, max_frames=2000):
    """Fractional reference sample index for every test sample.

    Both sequences are decimated to at most ``max_frames`` frames before
    alignment; test samples between decimated frames are interpolated.
    """
    ref_vectors = np.asarray(ref_vectors, dtype=float)
    test_vectors = np.asarray(test_vectors, dtype=float)
    ri = decimation_indices(len(ref_vectors), max_frames)
    ti = decimation_indices(len(test_vectors), max_frames)
    path = dtw_align(ref_vectors[ri], test_vectors[ti])
    mapped = np.zeros(len(ti))
    counts = np.zeros(len(ti))
    np.add.at(mapped, path.test_indices, ri[path.ref_indices].astype(float))
    np.add.at(counts, path.test_indices, 1.0)
    mapped /= counts
    return np.interp(np.arange(len(test_vectors)), ti, mapped)


def map_to_reference_time(ref_demo, demo, sample_indices, max_frames=2000):
    """Reference-timeline times of ``demo``'s samples at ``sample_indices``."""
    if demo is ref_demo:
        return np.asarray(ref_demo.t, dtype=float)[np.asarray(sample_indices, dtype=int)]
    idx_map = reference_index_map(ref_demo.vectors(), demo.vectors(), max_frames)
    frac = idx_map[np.asarray(sample_indices, dtype=int)]
    return np.interp(frac, np.arange(len(ref_demo)), ref_demo.t)


def align_keypoint_timeline(reference_demo, demos, keypoint_sets, labels, order, max_frames=2000):
    """Common time of every label in ``order``.

    ``labels[m][j]`` is the cluster (or state) of key-point ``j`` of demo ``m``,
    or ``None`` to skip it. Each label's time is the mean reference-timeline
    time of its key-points. Raises ``DegenerateAlignmentError`` unless the
    times increase strictly along ``order``.
    """
    sums, counts = {}, {}
    for demo, kps, labs in zip(demos, keypoint_sets, labels):
        idx = [kp.sample_index for kp in kps]
        times = map_to_reference_time(reference_demo, demo, idx, max_frames)
        for time, lab in zip(times, labs):
            if lab is None:
                continue
            sums[lab] = sums.get(lab, 0.0) + float(time)
            counts[lab] = counts.get(lab, 0) + 1
    missing = [s for s in order if s not in counts]
    if missing:
        raise DegenerateAlignmentError(f"no key-points mapped to {missing}", missing)
    times = np.array([sums[s] / counts[s] for s in order])
    bad = [(order[i], order[i + 1]) for i in range(len(order) - 1) if not times[i + 1] > times[i]]
    if bad:
        raise DegenerateAlignmentError(
            "cluster times not increasing between " + ", ".join(f"{a}->{b}" for a, b in bad),
            [s for pair in bad for s in pair])
    return times
