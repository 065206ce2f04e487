"""Independent reference implementations used as test oracles.

These are deliberately naive: exhaustive enumeration, explicit loops and
textbook matrix products, written without reusing package internals.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# -- HMM -------------------------------------------------------------------------

def hmm_enumerate(pi, A, B, seq):
    """(log P(seq), best path, best log-prob) by summing over every state path."""
    n = len(pi)
    total = 0.0
    best, best_lp = None, -math.inf
    for path in itertools.product(range(n), repeat=len(seq)):
        p = pi[path[0]] * B[path[0], seq[0]]
        for t in range(1, len(seq)):
            p *= A[path[t - 1], path[t]] * B[path[t], seq[t]]
        total += p
        lp = math.log(p) if p > 0 else -math.inf
        if lp > best_lp:
            best, best_lp = path, lp
    return (math.log(total) if total > 0 else -math.inf), best, best_lp


def path_log_prob(pi, A, B, seq, path):
    p = pi[path[0]] * B[path[0], seq[0]]
    for t in range(1, len(seq)):
        p *= A[path[t - 1], path[t]] * B[path[t], seq[t]]
    return math.log(p) if p > 0 else -math.inf


# -- DTW -------------------------------------------------------------------------

def dtw_bruteforce(ref, test):
    """Minimum over every monotone (1,0)/(0,1)/(1,1) path of summed squared distances."""
    ref = np.atleast_2d(np.asarray(ref, dtype=float).T).T
    test = np.atleast_2d(np.asarray(test, dtype=float).T).T
    R, T = len(ref), len(test)
    cost = [[float(np.sum((ref[x] - test[y]) ** 2)) for y in range(T)] for x in range(R)]
    best = math.inf

    def walk(x, y, acc):
        nonlocal best
        acc += cost[x][y]
        if (x, y) == (R - 1, T - 1):
            best = min(best, acc)
            return
        for dx, dy in ((1, 0), (0, 1), (1, 1)):
            if x + dx < R and y + dy < T:
                walk(x + dx, y + dy, acc)

    walk(0, 0, 0.0)
    return best


# -- k-means ---------------------------------------------------------------------

def kmeans_bruteforce(X, k):
    """Smallest within-cluster sum of squares over every partition into k non-empty groups."""
    X = np.asarray(X, dtype=float)
    best = math.inf
    for labels in itertools.product(range(k), repeat=len(X)):
        if labels[0] != 0 or len(set(labels)) != k:
            continue
        lab = np.array(labels)
        sse = sum(float(((X[lab == j] - X[lab == j].mean(axis=0)) ** 2).sum()) for j in range(k))
        best = min(best, sse)
    return best


# -- kinematics ------------------------------------------------------------------

def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=float)


def _trans(x, y, z):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def fk_matrix_product(dh_rows, joints):
    """Base-to-tool transform as the product of elementary DH motions per link.

    ``dh_rows`` holds ``(theta_offset, d, a, alpha)`` per link.
    """
    T = np.eye(4)
    for (theta0, d, a, alpha), q in zip(dh_rows, joints):
        T = T @ _rot_z(theta0 + q) @ _trans(0, 0, d) @ _trans(a, 0, 0) @ _rot_x(alpha)
    return T


# -- key-points ------------------------------------------------------------------

def moving_average(X, window):
    """Centred moving average with edge replication, via explicit window sums."""
    X = np.asarray(X, dtype=float)
    if window <= 1:
        return X.copy()
    left = window // 2
    right = window - 1 - left
    P = np.concatenate([np.repeat(X[:1], left, axis=0), X, np.repeat(X[-1:], right, axis=0)])
    out = np.empty_like(X)
    for i in range(len(X)):
        out[i] = P[i:i + window].sum(axis=0) / window
    return out


def keypoint_predicate(X, t, eps):
    """Sample-by-sample transcription of the three-clause key-point selection rule.

    A sample i (not the first or last) is a key-point when, relative to the
    previously accepted key-point j:

    (i)   the vertex angle theta between X[i-1]-X[i] and X[i+1]-X[i] satisfies
          2*theta < 2*pi - eps_turn (both vectors at least eps_speed long);
    (ii)  the step into i is shorter than eps_speed, more than eps_dwell
          seconds have passed since j and X[i] is farther than eps_away from X[j];
    (iii) X[i] is at least eps_breakout from X[j], more than eps_breakout_time
          seconds have passed and every earlier sample since j stayed within
          eps_confine of X[j].
    """
    turn, speed, dwell, away, breakout, breakout_time, confine = eps
    n = len(X)
    keys = [0]
    j = 0
    reach = 0.0
    for i in range(1, n - 1):
        u = X[i - 1] - X[i]
        v = X[i + 1] - X[i]
        nu, nv = math.sqrt(float(u @ u)), math.sqrt(float(v @ v))
        fire = False
        if nu >= speed and nv >= speed:
            cos = max(-1.0, min(1.0, float(u @ v) / (nu * nv)))
            if 2.0 * math.acos(cos) < 2.0 * math.pi - turn:
                fire = True
        d = math.sqrt(float((X[i] - X[j]) @ (X[i] - X[j])))
        elapsed = t[i] - t[j]
        if nu < speed and elapsed > dwell and d > away:
            fire = True
        if d >= breakout and elapsed > breakout_time and reach < confine:
            fire = True
        if fire:
            keys.append(i)
            j = i
            reach = 0.0
        else:
            reach = max(reach, d)
    keys.append(n - 1)
    return keys


def keypoint_oracle(demo, cfg):
    """Merged key-point sample indices of a demonstration."""
    chans = []
    for X, first in ((demo.positions, 1), (demo.orientations, 8)):
        eps = tuple(getattr(cfg, f"eps{first + k}") for k in range(7))
        chans.append(keypoint_predicate(moving_average(X, cfg.smoothing_window), demo.t, eps))
    n = len(demo)
    interior = sorted(i for ch in chans for i in ch if 1 < i < n - 2)
    merged = [0]
    for i in interior:
        if i - merged[-1] > 1:
            merged.append(i)
    return merged + [n - 1]


# -- geometry --------------------------------------------------------------------

def point_polyline_distance(p, polyline):
    best = math.inf
    for a, b in zip(polyline[:-1], polyline[1:]):
        ab = b - a
        L = float(ab @ ab)
        u = 0.0 if L == 0 else min(1.0, max(0.0, float((p - a) @ ab) / L))
        best = min(best, float(np.linalg.norm(p - (a + u * ab))))
    return best
