"""Denavit-Hartenberg kinematics for a 7-joint serial arm.

Forward kinematics chains the standard DH link transforms; inverse kinematics
is a damped least-squares solver on a finite-difference Jacobian.
Quaternions are stored scalar-first, ``(w, x, y, z)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ParseError, UnreachablePoseError

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class DhLink:
    theta_offset: float
    d: float
    a: float
    alpha: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.theta_offset, self.d, self.a, self.alpha])):
            raise InvalidArgumentError(f"non-finite DH parameter in {self}")


# Baxter joint ranges (s0, s1, e0, e1, w0, w1, w2) in radians.
BAXTER_JOINT_LIMITS = (
    (-1.70167993878, 1.70167993878),
    (-2.147, 1.047),
    (-3.05417993878, 3.05417993878),
    (-0.05, 2.618),
    (-3.059, 3.059),
    (-1.57079632679, 2.094),
    (-3.059, 3.059),
)


@dataclass(frozen=True)
class KinematicChain:
    links: tuple
    joint_limits: tuple

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joint_limits", tuple(tuple(map(float, lim)) for lim in self.joint_limits))
        if len(self.links) != len(self.joint_limits):
            raise InvalidArgumentError(
                f"{len(self.links)} links but {len(self.joint_limits)} joint limits")
        for i, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                raise InvalidArgumentError(f"joint {i}: limit min {lo} is not below max {hi}")

    def __len__(self):
        return len(self.links)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.joint_limits])

    def within_limits(self, joints, slack=0.0):
        q = np.asarray(joints, dtype=float)
        return bool(np.all(q >= self.lower - slack) and np.all(q <= self.upper + slack))

    @property
    def reach(self):
        """Upper bound on the distance from the base to the tool point."""
        return float(sum(np.hypot(link.d, link.a) for link in self.links))


def baxter_chain(joint_limits=BAXTER_JOINT_LIMITS):
    """Seven-link Baxter arm; the table's +-1.571 twists are taken as exact +-pi/2."""
    links = (
        DhLink(0.0, 0.2703, 0.069, -HALF_PI),
        DhLink(0.0, 0.0, 0.0, HALF_PI),
        DhLink(0.0, 0.3644, 0.069, -HALF_PI),
        DhLink(0.0, 0.0, 0.0, HALF_PI),
        DhLink(0.0, 0.3743, 0.01, -HALF_PI),
        DhLink(0.0, 0.0, 0.0, HALF_PI),
        DhLink(0.0, 0.2295, 0.0, 0.0),
    )
    return KinematicChain(links, joint_limits)


def load_chain(path, joint_limits=None):
    """Read a chain file: one link per line, ``theta_offset d a alpha``.

    Two optional trailing columns give the joint's ``min max`` limits.
    Blank lines and ``#`` comments are skipped.
    """
    links, limits = [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) not in (4, 6):
            raise ParseError(f"expected 4 or 6 columns, got {len(parts)}", path, lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        try:
            links.append(DhLink(*vals[:4]))
        except InvalidArgumentError as exc:
            raise ParseError(str(exc), path, lineno) from None
        limits.append(tuple(vals[4:]) if len(vals) == 6 else (-np.pi, np.pi))
    if not links:
        raise ParseError("no links defined", path)
    if joint_limits is not None:
        limits = joint_limits
    elif len(links) == len(BAXTER_JOINT_LIMITS) and all(len(l) == 2 and l == (-np.pi, np.pi) for l in limits):
        limits = BAXTER_JOINT_LIMITS
    return KinematicChain(tuple(links), tuple(limits))


def save_chain(chain, path):
    lines = ["# theta_offset d a alpha min max"]
    for link, (lo, hi) in zip(chain.links, chain.joint_limits):
        lines.append(" ".join(repr(float(v)) for v in (link.theta_offset, link.d, link.a, link.alpha, lo, hi)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def link_transform(link, joint_angle):
    """Rot_z(theta) Trans_z(d) Trans_x(a) Rot_x(alpha), theta = joint_angle + offset."""
    if not np.isfinite(joint_angle):
        raise InvalidArgumentError(f"non-finite joint angle {joint_angle!r}")
    theta = joint_angle + link.theta_offset
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(link.alpha), np.sin(link.alpha)
    return np.array([
        [ct, -st * ca, st * sa, link.a * ct],
        [st, ct * ca, -ct * sa, link.a * st],
        [0.0, sa, ca, link.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def chain_transform(chain, joints):
    q = np.asarray(joints, dtype=float)
    if q.shape != (len(chain),):
        raise InvalidArgumentError(f"expected {len(chain)} joint angles, got shape {q.shape}")
    T = np.eye(4)
    for link, angle in zip(chain.links, q):
        T = T @ link_transform(link, angle)
    return T


# -- quaternions -------------------------------------------------------------

def canonical_quaternion(q):
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q


def rotation_to_quaternion(R):
    """Unit quaternion ``(w, x, y, z)`` of a rotation matrix, scalar part >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    # Shepperd: branch on the largest diagonal term for numerical stability
    if tr > max(R[0, 0], R[1, 1], R[2, 2]):
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return canonical_quaternion(q)


def quaternion_to_rotation(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quaternion_multiply(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def axis_angle_quaternion(rotvec):
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-15:
        return np.array([1.0, *(0.5 * rotvec)]) / np.sqrt(1.0 + 0.25 * angle * angle)
    axis = rotvec / angle
    return np.array([np.cos(angle / 2), *(np.sin(angle / 2) * axis)])


def rotation_log(R):
    """Rotation vector (axis * angle) of a rotation matrix."""
    q = rotation_to_quaternion(R)
    vnorm = np.linalg.norm(q[1:])
    if vnorm < 1e-15:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(vnorm, q[0])
    return q[1:] / vnorm * angle


def slerp(q0, q1, u):
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    dot = float(np.dot(q0, q1))
    if dot < 0:
        q1, dot = -q1, -dot
    if dot > 1 - 1e-12:
        q = q0 + u * (q1 - q0)
        return q / np.linalg.norm(q)
    omega = np.arccos(min(dot, 1.0))
    so = np.sin(omega)
    return (np.sin((1 - u) * omega) * q0 + np.sin(u * omega) * q1) / so


def enforce_sign_continuity(quats):
    """Flip quaternions so consecutive ones have non-negative dot product."""
    q = np.array(quats, dtype=float, copy=True)
    for i in range(1, len(q)):
        if np.dot(q[i - 1], q[i]) < 0:
            q[i] = -q[i]
    return q


# -- poses -------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise InvalidArgumentError(f"orientation is not a unit quaternion (norm {np.linalg.norm(q)})")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def __eq__(self, other):
        return (isinstance(other, Pose)
                and np.array_equal(self.position, other.position)
                and np.array_equal(self.orientation, other.orientation))

    __hash__ = None

    @property
    def rotation(self):
        return quaternion_to_rotation(self.orientation)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T


def pose_from_matrix(T):
    return Pose(np.array(T[:3, 3]), rotation_to_quaternion(T[:3, :3]))


def forward_kinematics(chain, joints):
    return pose_from_matrix(chain_transform(chain, joints))


def pose_error(a, b):
    """(position distance in m, geodesic orientation angle in rad) between poses."""
    dp = float(np.linalg.norm(a.position - b.position))
    dot = min(1.0, abs(float(np.dot(a.orientation, b.orientation))))
    return dp, 2.0 * float(np.arccos(dot))


# -- inverse kinematics -------------------------------------------------------

@dataclass
class IkSolution:
    joints: np.ndarray
    position_error: float
    orientation_error: float
    iterations: int
    restarts: int = 0


def _batch_transforms(chain, Q):
    """Tool transforms for a batch of joint vectors, shape (B, 4, 4)."""
    Q = np.atleast_2d(Q)
    out = np.broadcast_to(np.eye(4), (len(Q), 4, 4)).copy()
    for j, link in enumerate(chain.links):
        theta = Q[:, j] + link.theta_offset
        ct, st = np.cos(theta), np.sin(theta)
        ca, sa = np.cos(link.alpha), np.sin(link.alpha)
        A = np.zeros_like(out)
        A[:, 0, 0], A[:, 0, 1], A[:, 0, 2], A[:, 0, 3] = ct, -st * ca, st * sa, link.a * ct
        A[:, 1, 0], A[:, 1, 1], A[:, 1, 2], A[:, 1, 3] = st, ct * ca, -ct * sa, link.a * st
        A[:, 2, 1], A[:, 2, 2], A[:, 2, 3] = sa, ca, link.d
        A[:, 3, 3] = 1.0
        out = out @ A
    return out


def _residual(T, target_p, target_R, w_pos, w_ori):
    ep = target_p - T[:3, 3]
    eo = rotation_log(target_R @ T[:3, :3].T)
    return np.concatenate([w_pos * ep, w_ori * eo])


def _jacobian(chain, q, e, target_p, target_R, w_pos, w_ori, fd_step):
    n = len(q)
    Ts = _batch_transforms(chain, q + fd_step * np.eye(n))
    J = np.empty((6, n))
    for j in range(n):
        J[:, j] = (_residual(Ts[j], target_p, target_R, w_pos, w_ori) - e) / fd_step
    return J


def _projected_step(J, e, lam, q, lo, hi):
    """Damped least-squares step with joints pinned at a limit removed."""
    free = np.ones(len(q), dtype=bool)
    for _ in range(len(q)):
        Jf = J * free
        step = -Jf.T @ np.linalg.solve(Jf @ Jf.T + lam * np.eye(len(e)), e)
        pinned = free & (((q <= lo) & (step < 0)) | ((q >= hi) & (step > 0)))
        if not pinned.any():
            return step
        free &= ~pinned
    return step


def solve_ik(chain, target, seed, pos_tol=1e-5, ori_tol=1e-4, max_iter=100, damping=1e-3,
             weights=(1.0, 0.5), fd_step=1e-6, restarts=40, rng_seed=0):
    """Damped least-squares IK with adaptive (Levenberg-Marquardt) damping.

    When a run stalls the solver restarts, alternating uniformly drawn in-limit
    seeds with perturbations of the best point so far (deterministic given
    ``rng_seed``). Raises ``UnreachablePoseError`` carrying
    the best (position, orientation) residual if nothing converges.
    """
    q0 = np.asarray(seed, dtype=float)
    if q0.shape != (len(chain),):
        raise InvalidArgumentError(f"seed must have {len(chain)} angles")
    if not chain.within_limits(q0, slack=1e-12):
        raise InvalidArgumentError("seed is outside the joint limits")
    lo, hi = chain.lower, chain.upper
    target_p = target.position
    target_R = target.rotation
    w_pos, w_ori = weights

    if np.linalg.norm(target_p) > chain.reach + 1e-9:
        here = forward_kinematics(chain, q0)
        raise UnreachablePoseError(
            f"target at distance {np.linalg.norm(target_p):.4g} m exceeds arm reach {chain.reach:.4g} m",
            residual=pose_error(here, target))

    rng = np.random.default_rng(rng_seed)
    best = None
    total_iter = 0
    for attempt in range(restarts + 1):
        if attempt == 0:
            q = q0.copy()
        elif attempt % 2:
            q = rng.uniform(lo, hi)
        else:
            q = np.clip(best.joints + rng.normal(0.0, 0.3, len(lo)), lo, hi)
        lam = damping
        e = _residual(chain_transform(chain, q), target_p, target_R, w_pos, w_ori)
        for it in range(max_iter + 1):
            perr = float(np.linalg.norm(e[:3])) / w_pos
            oerr = float(np.linalg.norm(e[3:])) / w_ori
            if best is None or perr + oerr < best.position_error + best.orientation_error:
                best = IkSolution(q.copy(), perr, oerr, total_iter + it, attempt)
            if perr < pos_tol and oerr < ori_tol:
                best.iterations = total_iter + it
                return best
            if it == max_iter:
                break
            J = _jacobian(chain, q, e, target_p, target_R, w_pos, w_ori, fd_step)
            cost = e @ e
            improved = False
            for _ in range(10):
                step = _projected_step(J, e, lam, q, lo, hi)
                q_new = np.clip(q + step, lo, hi)
                e_new = _residual(chain_transform(chain, q_new), target_p, target_R, w_pos, w_ori)
                if e_new @ e_new < cost:
                    improved = (cost - e_new @ e_new) > 1e-6 * cost or e_new @ e_new < cost * 0.5
                    q, e = q_new, e_new
                    lam = max(lam / 10.0, damping)
                    break
                lam *= 10.0
            # stalled against a joint limit or in a local minimum
            if not improved and it > 5:
                break
        total_iter += it
    raise UnreachablePoseError(
        f"IK did not converge (best residual {best.position_error:.3g} m, "
        f"{best.orientation_error:.3g} rad)",
        residual=(best.position_error, best.orientation_error))


def inverse_kinematics(chain, target, seed, tol=(1e-5, 1e-4), max_iter=100, **kwargs):
    """Joint angles reaching ``target``; ``tol`` is ``(meters, radians)`` or a scalar used for both."""
    pos_tol, ori_tol = (tol, tol) if np.isscalar(tol) else tol
    return solve_ik(chain, target, seed, pos_tol=pos_tol, ori_tol=ori_tol, max_iter=max_iter, **kwargs).joints
