"""Cubic smoothing splines and generalised trajectory synthesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kinematics import Pose, enforce_sign_continuity


@dataclass(frozen=True, eq=False)
class SplineModel:
    """Piecewise cubic; ``coefficients[i, k]`` multiplies ``(t - knots[i])**k``."""

    knots: np.ndarray
    coefficients: np.ndarray
    smoothing: float
    second_derivatives: np.ndarray  # at the knots, shape (n, d)
    scalar_values: bool = False  # fitted to 1-D values; evaluate without the trailing axis

    @property
    def dim(self):
        return self.coefficients.shape[2]

    def __call__(self, t, deriv=0):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        seg = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2)
        u = (t - self.knots[seg])[:, None]
        c = self.coefficients[seg]
        if deriv == 0:
            out = c[:, 0] + u * (c[:, 1] + u * (c[:, 2] + u * c[:, 3]))
        elif deriv == 1:
            out = c[:, 1] + u * (2 * c[:, 2] + 3 * u * c[:, 3])
        elif deriv == 2:
            out = 2 * c[:, 2] + 6 * u * c[:, 3]
        else:
            raise InvalidArgumentError("deriv must be 0, 1 or 2")
        if self.scalar_values:
            out = out[:, 0]
        return out[0] if scalar else out

    def roughness(self):
        """Integral of the squared second derivative, per dimension."""
        h = np.diff(self.knots)[:, None]
        g0, g1 = self.second_derivatives[:-1], self.second_derivatives[1:]
        # s'' is linear on each segment
        r = (h * (g0 * g0 + g0 * g1 + g1 * g1) / 3.0).sum(axis=0)
        return float(r[0]) if self.scalar_values else r


def _natural_matrices(x):
    n = len(x)
    h = np.diff(x)
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        c = j - 1
        Q[j - 1, c] = 1.0 / h[j - 1]
        Q[j, c] = -1.0 / h[j - 1] - 1.0 / h[j]
        Q[j + 1, c] = 1.0 / h[j]
        R[c, c] = (h[j - 1] + h[j]) / 3.0
        if c + 1 < n - 2:
            R[c, c + 1] = R[c + 1, c] = h[j] / 6.0
    return Q, R


def _coefficients(x, g, gamma):
    h = np.diff(x)[:, None]
    a = g[:-1]
    b = (g[1:] - g[:-1]) / h - h * (2 * gamma[:-1] + gamma[1:]) / 6.0
    c = gamma[:-1] / 2.0
    d = (gamma[1:] - gamma[:-1]) / (6.0 * h)
    return np.stack([a, b, c, d], axis=1)


def fit_smoothing_spline(times, values, p):
    """Minimise ``p * sum((y - s(t))**2) + (1 - p) * integral(s''**2)``.

    ``p = 1`` interpolates with a natural cubic spline, ``p = 0`` gives the
    least-squares straight line. ``values`` may be 1-D or (n, d).
    """
    x = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    one_d = y.ndim == 1
    Y = y[:, None] if one_d else y
    if x.ndim != 1 or len(x) != len(Y):
        raise InvalidArgumentError("times and values must have the same length")
    if len(x) < 4:
        raise InvalidArgumentError(f"need at least 4 points, got {len(x)}")
    if np.any(np.diff(x) <= 0):
        raise InvalidArgumentError("times must be strictly increasing")
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError("smoothing p must lie in [0, 1]")
    n = len(x)
    if p == 0.0:
        V = np.column_stack([np.ones(n), x - x[0]])
        coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
        g = V @ coef
        gamma = np.zeros_like(Y)
    else:
        Q, R = _natural_matrices(x)
        inner = np.linalg.solve(p * R + (1.0 - p) * (Q.T @ Q), p * (Q.T @ Y))
        g = Y - ((1.0 - p) / p) * (Q @ inner)
        if p == 1.0:
            g = Y.copy()
        gamma = np.zeros_like(Y)
        gamma[1:-1] = inner
    return SplineModel(x.copy(), _coefficients(x, g, gamma), float(p), gamma, one_d)


@dataclass(frozen=True, eq=False)
class GeneralizedTrajectory:
    times: np.ndarray
    positions: np.ndarray
    orientations: np.ndarray
    gripper: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def poses(self):
        return [Pose(p, q) for p, q in zip(self.positions, self.orientations)]

    @property
    def gripper_widths(self):
        return self.gripper

    def vectors(self):
        return np.column_stack([self.positions, self.orientations, self.gripper])

    def __eq__(self, other):
        return (isinstance(other, GeneralizedTrajectory)
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("times", "positions", "orientations", "gripper")))

    __hash__ = None


def generate_trajectory(ordered_centroids, timeline, p=0.9, oversample=50, max_width=None,
                        gripper_mode="spline"):
    """Spline the 8-D centroid sequence over its timeline and resample it.

    The output step is the mean inter-cluster period divided by ``oversample``.
    Quaternions are renormalised and kept sign-continuous; gripper width is
    clamped to ``[0, max_width]`` or, with ``gripper_mode="hold"``, copied from
    the nearest centroid in time.
    """
    C = np.asarray(ordered_centroids, dtype=float)
    t = np.asarray(timeline, dtype=float)
    if C.ndim != 2 or C.shape[1] != 8:
        raise InvalidArgumentError("centroids must be 8-vectors")
    if gripper_mode not in ("spline", "hold"):
        raise InvalidArgumentError(f"unknown gripper mode {gripper_mode!r}")
    spline = fit_smoothing_spline(t, C, p)
    n_out = (len(t) - 1) * int(oversample) + 1
    ts = np.linspace(t[0], t[-1], n_out)
    V = spline(ts)
    Q = V[:, 3:7] / np.linalg.norm(V[:, 3:7], axis=1, keepdims=True)
    Q = enforce_sign_continuity(Q)
    if gripper_mode == "hold":
        nearest = np.abs(ts[:, None] - t[None, :]).argmin(axis=1)
        G = C[nearest, 7]
    else:
        G = V[:, 7]
    G = np.clip(G, 0.0, np.inf if max_width is None else max_width)
    return GeneralizedTrajectory(ts, V[:, :3], Q, G)
