"""End-to-end learning and execution: demonstrations -> skill model -> joint trajectory."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import Codebook, choose_k, kmeans_restarts, quantize
from .dtw import align_keypoint_timeline, select_reference
from .errors import HmmLfdError, InvalidArgumentError, ParseError, TooFewStatesError, UnreachablePoseError
from .generalize import GeneralizedTrajectory, generate_trajectory
from .hmm import HmmModel, baum_welch, init_bakis, prune_zero_points, viterbi, zero_points
from .keypoints import KeyPointConfig, extract_keypoints
from .kinematics import Pose, forward_kinematics, pose_error, solve_ik
from .trajectory import DemonstrationSet, _atomic_write

log = logging.getLogger(__name__)

FORMAT = "hmmlfd-skill-model"
FORMAT_VERSION = 1


@dataclass
class LearnConfig:
    keypoints: KeyPointConfig = field(default_factory=KeyPointConfig)
    k: int | None = None
    smoothing: float = 0.9
    oversample: int = 50
    zscore: bool = False
    kmeans_restarts: int = 10
    em_max_iter: int = 200
    em_tol: float = 1e-8
    dtw_max_frames: int = 2000
    gripper_mode: str = "spline"

    def snapshot(self):
        out = {k: v for k, v in self.__dict__.items() if k != "keypoints"}
        out["keypoints"] = self.keypoints.as_dict()
        return out


@dataclass(eq=False)
class SkillModel:
    codebook: Codebook
    hmm: HmmModel
    decoded_states: list
    state_symbols: list          # codebook symbol standing for each decoded state
    timeline: np.ndarray
    generalized: GeneralizedTrajectory
    provenance: dict
    report: dict = field(default_factory=dict)
    scale: np.ndarray | None = None
    max_width: float = 0.1

    def __eq__(self, other):
        return isinstance(other, SkillModel) and model_to_dict(self) == model_to_dict(other)

    __hash__ = None

    @property
    def ordered_centroids(self):
        return self.codebook.centroids[self.state_symbols]


class StageError(HmmLfdError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        self.code = getattr(error, "code", "ERROR")
        self.exit_code = getattr(error, "exit_code", 3)
        super().__init__(f"{stage}: {error}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HmmLfdError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc


def learn(demos, config=None, seed=0, provenance=None):
    """Learn a skill model from demonstrations."""
    cfg = config or LearnConfig()
    demos = DemonstrationSet(demos).demos
    keypoint_sets = [_stage("keypoints", extract_keypoints, d, cfg.keypoints) for d in demos]
    counts = [len(kps) for kps in keypoint_sets]
    pooled = np.array([kp.vector for kps in keypoint_sets for kp in kps])
    if cfg.k is not None:
        k = cfg.k
    else:
        # noise-free demos can repeat a key-point vector exactly (both ends of a dwell)
        k = min(choose_k(counts), len(np.unique(pooled, axis=0)))
    if cfg.zscore:
        scale = pooled.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        scale = np.ones(pooled.shape[1])
    scaled_book, _ = _stage("kmeans", kmeans_restarts, pooled / scale, k, restarts=cfg.kmeans_restarts, seed=seed)
    codebook = Codebook(scaled_book.centroids * scale, scaled_book.distortion, scaled_book.history)

    sequences, runs = [], []
    for kps in keypoint_sets:
        syms, rs = [], []
        for j, kp in enumerate(kps):
            s = quantize(kp.vector / scale, scaled_book)
            if syms and syms[-1] == s:
                rs[-1].append(j)
            else:
                syms.append(s)
                rs.append([j])
        sequences.append(syms)
        runs.append(rs)

    init_ref = max(range(len(sequences)), key=lambda m: (len(sequences[m]), -m))
    model0 = _stage("init_bakis", init_bakis, sequences, init_ref, k, k)
    model, ll_history = _stage("baum_welch", baum_welch, model0, sequences, cfg.em_max_iter, cfg.em_tol)
    ref = _stage("select_reference", select_reference, model, sequences)
    path = _stage("viterbi", viterbi, model, sequences[ref])
    order = prune_zero_points(path, k)
    if len(order) < 4:
        raise StageError("prune_zero_points", TooFewStatesError(
            f"only {len(order)} states survive decoding; at least 4 are needed"))

    # symbol for each state: the one it most likely emits
    state_symbols = [int(np.argmax(model.B[s])) for s in order]
    visited = set(order)
    labels = []
    for m, seq in enumerate(sequences):
        decoded = path.states if m == ref else _stage("viterbi", viterbi, model, seq).states
        lab = [None] * counts[m]
        for state, run in zip(decoded, runs[m]):
            if state in visited:
                lab[run[0]] = state
        labels.append(lab)
    timeline = _stage("align_keypoint_timeline", align_keypoint_timeline,
                      demos[ref], demos, keypoint_sets, labels, order, cfg.dtw_max_frames)
    centroids = codebook.centroids[state_symbols]
    generalized = _stage("generate_trajectory", generate_trajectory, centroids, timeline,
                         cfg.smoothing, cfg.oversample, demos[0].max_width, cfg.gripper_mode)

    prov = {"seed": int(seed), "config": cfg.snapshot(), "version": __version__}
    prov.update(provenance or {})
    report = {
        "keypoint_counts": counts,
        "sample_counts": [len(d) for d in demos],
        "durations": [float(d.duration) for d in demos],
        "k": int(k),
        "em_iterations": len(ll_history) - 1,
        "log_likelihood": ll_history[-1],
        "log_likelihood_history": ll_history,
        "reference_demo": ref,
        "reference_id": demos[ref].id,
        "zero_points": zero_points(path, k),
        "observation_sequences": sequences,
    }
    return SkillModel(codebook, model, order, state_symbols, timeline, generalized, prov, report,
                      scale if cfg.zscore else None, demos[0].max_width)


# -- model file ----------------------------------------------------------------

def _floats(a):
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model):
    g = model.generalized
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "codebook": {"centroids": _floats(model.codebook.centroids),
                     "distortion": float(model.codebook.distortion),
                     "scale": None if model.scale is None else _floats(model.scale)},
        "hmm": {"pi": _floats(model.hmm.pi), "A": _floats(model.hmm.A), "B": _floats(model.hmm.B)},
        "decoded_states": [int(s) for s in model.decoded_states],
        "state_symbols": [int(s) for s in model.state_symbols],
        "timeline": _floats(model.timeline),
        "max_width": float(model.max_width),
        "generalized": {"columns": ["t", "x", "y", "z", "qw", "qx", "qy", "qz", "gripper_width"],
                        "rows": _floats(np.column_stack([g.times, g.vectors()]))},
        "report": model.report,
        "provenance": model.provenance,
    }


def model_from_dict(d):
    if d.get("format") != FORMAT:
        raise ParseError(f"not a skill model (format={d.get('format')!r})")
    rows = np.array(d["generalized"]["rows"], dtype=float).reshape(-1, 9)
    cb = d["codebook"]
    return SkillModel(
        codebook=Codebook(np.array(cb["centroids"], dtype=float), cb["distortion"]),
        hmm=HmmModel(np.array(d["hmm"]["pi"]), np.array(d["hmm"]["A"]), np.array(d["hmm"]["B"])),
        decoded_states=list(d["decoded_states"]),
        state_symbols=list(d["state_symbols"]),
        timeline=np.array(d["timeline"], dtype=float),
        generalized=GeneralizedTrajectory(rows[:, 0], rows[:, 1:4], rows[:, 4:8], rows[:, 8]),
        provenance=d["provenance"],
        report=d.get("report", {}),
        scale=None if cb.get("scale") is None else np.array(cb["scale"], dtype=float),
        max_width=d.get("max_width", 0.1),
    )


def model_to_text(model):
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n"


def save_model(model, path):
    _atomic_write(path, model_to_text(model))


def load_model(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    try:
        return model_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed model: {exc}", path) from None


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- execution -------------------------------------------------------------------

@dataclass
class JointTrajectory:
    times: np.ndarray
    joints: np.ndarray
    gripper: np.ndarray
    position_errors: np.ndarray
    orientation_errors: np.ndarray

    def to_text(self):
        n = self.joints.shape[1]
        lines = [",".join(["t", *(f"j{i + 1}" for i in range(n)), "gripper_width"])]
        for t, q, g in zip(self.times, self.joints, self.gripper):
            lines.append(",".join(repr(float(v)) for v in (t, *q, g)))
        return "\n".join(lines) + "\n"


def execute(model, chain, seed_joints=None, pos_tol=1e-5, ori_tol=1e-4, max_step=0.5):
    """Inverse kinematics for every generalised pose, each seeded by the previous solution.

    Raises ``UnreachablePoseError`` (with ``index``) at the first pose that
    cannot be reached, or when consecutive solutions jump by more than
    ``max_step`` radians in any joint.
    """
    g = model.generalized
    q = np.clip(np.zeros(len(chain)) if seed_joints is None else np.asarray(seed_joints, dtype=float),
                chain.lower, chain.upper)
    out = np.empty((len(g), len(chain)))
    perr = np.empty(len(g))
    oerr = np.empty(len(g))
    for i, pose in enumerate(g.poses):
        try:
            sol = solve_ik(chain, pose, q, pos_tol=pos_tol, ori_tol=ori_tol)
        except UnreachablePoseError as exc:
            raise UnreachablePoseError(f"sample {i} (t={g.times[i]:.4f}): {exc}", exc.residual, i) from None
        if i and np.max(np.abs(sol.joints - q)) > max_step:
            # a restart landed on another IK branch; retry from the previous solution only
            try:
                sol = solve_ik(chain, pose, q, pos_tol=pos_tol, ori_tol=ori_tol, restarts=0)
            except UnreachablePoseError:
                pass
            if np.max(np.abs(sol.joints - q)) > max_step:
                raise UnreachablePoseError(
                    f"sample {i}: joint step {np.max(np.abs(sol.joints - q)):.3f} rad exceeds {max_step}",
                    (sol.position_error, sol.orientation_error), i)
        q = sol.joints
        out[i] = q
        perr[i], oerr[i] = pose_error(forward_kinematics(chain, q), pose)
    return JointTrajectory(g.times.copy(), out, g.gripper.copy(), perr, oerr)


def save_joint_trajectory(traj, path):
    _atomic_write(path, traj.to_text())
