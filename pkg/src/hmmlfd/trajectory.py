"""Demonstration data model and CSV persistence.

A demonstration is stored column-wise (numpy arrays) because recordings run
at 1 kHz for tens of seconds; ``Sample`` objects are materialised on demand.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, MalformedLogError, ParseError
from .kinematics import Pose, _batch_transforms, enforce_sign_continuity, rotation_to_quaternion

DEMO_COLUMNS = ("t", "x", "y", "z", "qw", "qx", "qy", "qz", "gripper_width")
DEFAULT_MAX_WIDTH = 0.1


@dataclass(frozen=True)
class Sample:
    t: float
    pose: Pose
    gripper_width: float


@dataclass(frozen=True, eq=False)
class Demonstration:
    id: str
    t: np.ndarray
    positions: np.ndarray
    orientations: np.ndarray
    gripper: np.ndarray
    source_rate: float = 1000.0
    max_width: float = DEFAULT_MAX_WIDTH

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        P = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        Q = np.asarray(self.orientations, dtype=float).reshape(-1, 4)
        g = np.asarray(self.gripper, dtype=float).reshape(-1)
        n = len(t)
        if n < 2:
            raise InvalidArgumentError(f"demonstration {self.id!r} needs at least 2 samples, got {n}")
        if not (len(P) == len(Q) == len(g) == n):
            raise InvalidArgumentError("column lengths differ")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise InvalidArgumentError(f"demonstration {self.id!r}: timestamps must be >= 0 and strictly increasing")
        if np.any(g < 0) or np.any(g > self.max_width):
            raise InvalidArgumentError(f"demonstration {self.id!r}: gripper width outside [0, {self.max_width}]")
        for name, arr in (("t", t), ("positions", P), ("orientations", Q), ("gripper", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, Demonstration):
            return NotImplemented
        return (self.id == other.id and self.source_rate == other.source_rate
                and self.max_width == other.max_width
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("t", "positions", "orientations", "gripper")))

    __hash__ = None

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    def sample(self, i):
        return Sample(float(self.t[i]), Pose(self.positions[i], self.orientations[i]), float(self.gripper[i]))

    def vectors(self):
        """(N, 8) array of pose vectors, see :func:`pose_vector`."""
        return np.column_stack([self.positions, self.orientations, self.gripper])

    @classmethod
    def from_samples(cls, id, samples, source_rate=1000.0, max_width=DEFAULT_MAX_WIDTH):
        return cls(id,
                   [s.t for s in samples],
                   [s.pose.position for s in samples],
                   [s.pose.orientation for s in samples],
                   [s.gripper_width for s in samples],
                   source_rate, max_width)


@dataclass(frozen=True)
class DemonstrationSet:
    demos: tuple

    def __post_init__(self):
        object.__setattr__(self, "demos", tuple(self.demos))
        if not self.demos:
            raise InvalidArgumentError("a demonstration set needs at least one demonstration")
        widths = {d.max_width for d in self.demos}
        if len(widths) > 1:
            raise InvalidArgumentError(f"demonstrations disagree on gripper max width: {sorted(widths)}")

    def __len__(self):
        return len(self.demos)

    def __iter__(self):
        return iter(self.demos)

    def __getitem__(self, i):
        return self.demos[i]


@dataclass(frozen=True)
class JointLogRecord:
    t: float
    joints: tuple
    gripper_width: float


def pose_vector(sample):
    """``(x, y, z, qw, qx, qy, qz, gripper_width)``."""
    return np.concatenate([sample.pose.position, sample.pose.orientation, [sample.gripper_width]])


def sample_from_vector(t, vector):
    v = np.asarray(vector, dtype=float)
    return Sample(float(t), Pose(v[:3], v[3:7]), float(v[7]))


def ingest_joint_log(records, chain, id="demo", source_rate=1000.0, max_width=DEFAULT_MAX_WIDTH):
    """Turn joint-angle records into a demonstration via forward kinematics."""
    if not records:
        raise MalformedLogError("joint log is empty")
    t = np.array([r.t for r in records], dtype=float)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if len(bad):
        raise MalformedLogError(f"timestamps not strictly increasing at record {bad[0] + 2}", line=int(bad[0]) + 2)
    Q = np.array([r.joints for r in records], dtype=float)
    if Q.ndim != 2 or Q.shape[1] != len(chain):
        raise MalformedLogError(f"expected {len(chain)} joint angles per record")
    T = _batch_transforms(chain, Q)
    quats = np.array([rotation_to_quaternion(R) for R in T[:, :3, :3]])
    quats = enforce_sign_continuity(quats)
    return Demonstration(id, t, T[:, :3, 3], quats, [r.gripper_width for r in records], source_rate, max_width)


# -- files -------------------------------------------------------------------

def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return repr(float(x))


def demo_to_text(demo):
    buf = io.StringIO()
    buf.write(f"# demo id={demo.id} source_rate={_fmt(demo.source_rate)} max_width={_fmt(demo.max_width)}\n")
    buf.write(",".join(DEMO_COLUMNS) + "\n")
    for row in zip(demo.t, demo.positions, demo.orientations, demo.gripper):
        t, p, q, g = row
        buf.write(",".join(map(_fmt, (t, *p, *q, g))) + "\n")
    return buf.getvalue()


def save_demo(demo, path):
    _atomic_write(path, demo_to_text(demo))


def _parse_meta(line):
    meta = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, value = token.split("=", 1)
            meta[key] = value
    return meta


def load_demo(path):
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    start = 0
    if lines and lines[0].startswith("#"):
        meta = _parse_meta(lines[0])
        start = 1
    if start >= len(lines) or [c.strip() for c in lines[start].split(",")] != list(DEMO_COLUMNS):
        raise ParseError(f"expected header {','.join(DEMO_COLUMNS)}", path, start + 1)
    rows = []
    for lineno, fields in enumerate(csv.reader(lines[start + 1:]), start + 2):
        if not fields:
            continue
        if len(fields) != len(DEMO_COLUMNS):
            raise ParseError(f"expected {len(DEMO_COLUMNS)} columns, got {len(fields)}", path, lineno)
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
    if not rows:
        raise ParseError("no samples", path)
    data = np.array(rows)
    try:
        return Demonstration(
            meta.get("id", path.stem), data[:, 0], data[:, 1:4], data[:, 4:8], data[:, 8],
            float(meta.get("source_rate", 1000.0)), float(meta.get("max_width", DEFAULT_MAX_WIDTH)))
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path) from None


def load_joint_log(path, n_joints=7):
    """Read a joint log CSV: ``t, j1..jN, gripper_width`` with an optional header row."""
    path = Path(path)
    records = []
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), 1):
            if not fields or fields[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                if lineno == 1 or not records:
                    continue  # header
                raise MalformedLogError(f"non-numeric field", path, lineno) from None
            if len(vals) != n_joints + 2:
                raise MalformedLogError(
                    f"expected {n_joints + 2} columns (t, {n_joints} joints, gripper_width), got {len(vals)}",
                    path, lineno)
            if records and vals[0] <= records[-1].t:
                raise MalformedLogError("timestamps not strictly increasing", path, lineno)
            records.append(JointLogRecord(vals[0], tuple(vals[1:-1]), vals[-1]))
    if not records:
        raise MalformedLogError("joint log is empty", path)
    return records


def save_joint_log(records, path):
    n = len(records[0].joints) if records else 7
    lines = [",".join(["t", *(f"j{i + 1}" for i in range(n)), "gripper_width"])]
    for r in records:
        lines.append(",".join(map(_fmt, (r.t, *r.joints, r.gripper_width))))
    _atomic_write(path, "\n".join(lines) + "\n")
