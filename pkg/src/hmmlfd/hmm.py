"""Discrete HMM with a Bakis (left-right) topology.

Transitions are allowed only to the same state or one/two states ahead.
All recursions run in log space, so long sequences cannot underflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgumentError

EMISSION_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class HmmModel:
    pi: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        n = len(pi)
        if A.shape != (n, n) or B.ndim != 2 or B.shape[0] != n:
            raise InvalidArgumentError(f"inconsistent shapes pi{pi.shape} A{A.shape} B{B.shape}")
        for name, arr in (("pi", pi), ("A", A), ("B", B)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"{name} has negative or non-finite entries")
        if abs(pi.sum() - 1) > 1e-9 or np.any(np.abs(A.sum(1) - 1) > 1e-9) or np.any(np.abs(B.sum(1) - 1) > 1e-9):
            raise InvalidArgumentError("probabilities must sum to one")
        for name, arr in (("pi", pi), ("A", A), ("B", B)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self):
        return len(self.pi)

    @property
    def n_symbols(self):
        return self.B.shape[1]

    def __eq__(self, other):
        return (isinstance(other, HmmModel) and np.array_equal(self.pi, other.pi)
                and np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B))

    __hash__ = None


@dataclass(frozen=True)
class StatePath:
    states: tuple
    log_prob: float


def bakis_mask(n_states):
    i, j = np.indices((n_states, n_states))
    return (j >= i) & (j <= i + 2)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def floor_distribution(counts, floor=EMISSION_FLOOR):
    """Maximise ``sum(c * log b)`` over distributions with every ``b >= floor``.

    This is the exact constrained M-step for emissions, so flooring keeps the
    EM likelihood monotone. All-zero counts give the uniform distribution.
    """
    c = np.asarray(counts, dtype=float)
    q = len(c)
    if floor * q > 1:
        raise InvalidArgumentError(f"floor {floor} is infeasible for {q} symbols")
    if c.sum() <= 0:
        return np.full(q, 1.0 / q)
    floored = c <= 0
    while True:
        free_mass = 1.0 - floor * floored.sum()
        total = c[~floored].sum()
        b = np.where(floored, floor, c * free_mass / total)
        low = ~floored & (b < floor)
        if not low.any():
            return b
        floored |= low


def _check_sequences(sequences, n_symbols):
    seqs = [np.asarray(s, dtype=int) for s in sequences]
    for s in seqs:
        if s.ndim != 1 or len(s) == 0:
            raise InvalidArgumentError("observation sequences must be non-empty")
        if s.min() < 0 or s.max() >= n_symbols:
            raise InvalidArgumentError(f"symbol out of range [0, {n_symbols})")
    return seqs


def init_bakis(sequences, reference_index, n_states, n_symbols, floor=EMISSION_FLOOR):
    """Left-right initialisation from one reference sequence.

    The reference is cut into ``n_states`` consecutive blocks of
    ``ceil(len/n_states)`` symbols; ``tau`` is a block's length (1 for an empty
    block, whose emissions start uniform). Each row's raw weights
    ``1 - 1/tau, 1/tau, 1/(4 tau)`` for self, +1, +2 are normalised over the
    transitions that exist.
    """
    if not 0 <= reference_index < len(sequences):
        raise InvalidArgumentError(f"reference index {reference_index} out of range")
    if n_states < 1 or n_symbols < 1:
        raise InvalidArgumentError("need at least one state and one symbol")
    ref = _check_sequences([sequences[reference_index]], n_symbols)[0]
    block = ceil(len(ref) / n_states)
    A = np.zeros((n_states, n_states))
    B = np.zeros((n_states, n_symbols))
    for i in range(n_states):
        seg = ref[i * block:(i + 1) * block]
        tau = max(len(seg), 1)
        raw = {i: 1.0 - 1.0 / tau, i + 1: 1.0 / tau, i + 2: 1.0 / (4.0 * tau)}
        raw = {j: w for j, w in raw.items() if j < n_states}
        z = sum(raw.values())
        if z <= 0:
            A[i, i] = 1.0
        else:
            for j, w in raw.items():
                A[i, j] = w / z
        B[i] = floor_distribution(np.bincount(seg, minlength=n_symbols) / tau, floor)
    pi = np.zeros(n_states)
    pi[0] = 1.0
    return HmmModel(pi, A, B)


def _forward(logpi, logA, logB, seq):
    T, n = len(seq), len(logpi)
    alpha = np.empty((T, n))
    alpha[0] = logpi + logB[:, seq[0]]
    for t in range(1, T):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + logA, axis=0) + logB[:, seq[t]]
    return alpha


def _backward(logA, logB, seq):
    T, n = len(seq), logA.shape[0]
    beta = np.zeros((T, n))
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(logA + (logB[:, seq[t + 1]] + beta[t + 1])[None, :], axis=1)
    return beta


def forward_log_likelihood(model, seq):
    seq = _check_sequences([seq], model.n_symbols)[0]
    alpha = _forward(_log(model.pi), _log(model.A), _log(model.B), seq)
    return float(logsumexp(alpha[-1]))


def baum_welch(model, sequences, max_iter=100, tol=1e-8, floor=EMISSION_FLOOR):
    """Multi-sequence EM. Returns the trained model and the total
    log-likelihood of every model visited (initial one first)."""
    seqs = _check_sequences(sequences, model.n_symbols)
    if not seqs:
        raise InvalidArgumentError("need at least one sequence")
    pi, A, B = model.pi.copy(), model.A.copy(), model.B.copy()
    n, q = B.shape
    history = []
    for it in range(max_iter + 1):
        logpi, logA, logB = _log(pi), _log(A), _log(B)
        pi_acc = np.zeros(n)
        trans = np.zeros((n, n))
        emit = np.zeros((n, q))
        total = 0.0
        for seq in seqs:
            alpha = _forward(logpi, logA, logB, seq)
            beta = _backward(logA, logB, seq)
            ll = logsumexp(alpha[-1])
            total += ll
            gamma = np.exp(alpha + beta - ll)
            pi_acc += gamma[0]
            for t in range(len(seq) - 1):
                trans += np.exp(alpha[t][:, None] + logA + (logB[:, seq[t + 1]] + beta[t + 1])[None, :] - ll)
            np.add.at(emit.T, seq, gamma)
        history.append(float(total))
        if it == max_iter or (it > 0 and history[-1] - history[-2] < tol):
            break
        pi = pi_acc / pi_acc.sum()
        rows = trans.sum(axis=1)
        for i in range(n):
            if rows[i] > 0:
                A[i] = trans[i] / rows[i]
        for i in range(n):
            if emit[i].sum() > 0:
                B[i] = floor_distribution(emit[i], floor)
    return HmmModel(pi, A, B), history


def viterbi(model, seq):
    """Most probable state path; ties resolve to the lower state id."""
    seq = _check_sequences([seq], model.n_symbols)[0]
    logpi, logA, logB = _log(model.pi), _log(model.A), _log(model.B)
    T, n = len(seq), model.n_states
    delta = logpi + logB[:, seq[0]]
    back = np.zeros((T, n), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + logA
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(n)] + logB[:, seq[t]]
    state = int(np.argmax(delta))
    log_prob = float(delta[state])
    path = [state]
    for t in range(T - 1, 0, -1):
        state = int(back[t, state])
        path.append(state)
    return StatePath(tuple(reversed(path)), log_prob)


def prune_zero_points(path, n_states=None):
    """States visited by ``path`` in order of first visit; unvisited states are zero-points."""
    states = path.states if isinstance(path, StatePath) else tuple(path)
    seen, order = set(), []
    for s in states:
        if s not in seen:
            seen.add(s)
            order.append(int(s))
    return order


def zero_points(path, n_states):
    visited = set(prune_zero_points(path))
    return [s for s in range(n_states) if s not in visited]
