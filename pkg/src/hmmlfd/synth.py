"""Synthetic demonstrations generated from task templates.

A template is a list of waypoints (pose, gripper width, dwell). Demonstrations
move between waypoints along straight lines (SLERP for orientation) at
constant speed, hold each waypoint for its dwell time, and switch the gripper
in the middle of a dwell. Variability between demonstrations comes from a
smooth random time warp and low-frequency pose deviations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import InvalidArgumentError
from .kinematics import Pose, axis_angle_quaternion, enforce_sign_continuity, quaternion_multiply, slerp
from .trajectory import DEFAULT_MAX_WIDTH, Demonstration

GRIPPER_RAMP = 0.2  # seconds for the gripper to open or close


@dataclass(frozen=True)
class Waypoint:
    pose: Pose
    gripper_width: float
    dwell: float = 0.0


@dataclass(frozen=True)
class TaskTemplate:
    name: str
    waypoints: tuple
    segment_durations: tuple
    max_width: float = DEFAULT_MAX_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "segment_durations", tuple(float(d) for d in self.segment_durations))
        if len(self.waypoints) < 2:
            raise InvalidArgumentError("a template needs at least two waypoints")
        if len(self.segment_durations) != len(self.waypoints) - 1:
            raise InvalidArgumentError("need one segment duration per consecutive waypoint pair")
        if any(d <= 0 for d in self.segment_durations) or any(w.dwell < 0 for w in self.waypoints):
            raise InvalidArgumentError("durations must be positive and dwells non-negative")

    @property
    def corner_count(self):
        return len(self.waypoints) - 2

    def schedule(self):
        """Nominal (arrive, depart) time of every waypoint."""
        out, t = [], 0.0
        for i, wp in enumerate(self.waypoints):
            if i:
                t += self.segment_durations[i - 1]
            out.append((t, t + wp.dwell))
            t += wp.dwell
        return out

    @property
    def duration(self):
        return self.schedule()[-1][1]

    def gripper_events(self):
        """Nominal times at which the gripper switches, with the new width."""
        events = []
        width = self.waypoints[0].gripper_width
        for (arrive, depart), wp in zip(self.schedule(), self.waypoints):
            if wp.gripper_width != width:
                events.append((0.5 * (arrive + depart), wp.gripper_width))
                width = wp.gripper_width
        return events

    def polyline(self):
        return np.array([wp.pose.position for wp in self.waypoints])

    def evaluate(self, tau):
        """Nominal positions, orientations and gripper widths at times ``tau``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        sched = self.schedule()
        P = np.empty((len(tau), 3))
        Q = np.empty((len(tau), 4))
        G = np.empty(len(tau))
        for n, s in enumerate(tau):
            k = 0
            while k + 1 < len(sched) and s >= sched[k + 1][0]:
                k += 1
            wp = self.waypoints[k]
            arrive, depart = sched[k]
            if s <= depart or k + 1 == len(sched):
                P[n], Q[n] = wp.pose.position, wp.pose.orientation
            else:
                nxt = self.waypoints[k + 1]
                u = (s - depart) / self.segment_durations[k]
                P[n] = (1 - u) * wp.pose.position + u * nxt.pose.position
                Q[n] = slerp(wp.pose.orientation, nxt.pose.orientation, u)
            G[n] = self._width_at(s)
        return P, enforce_sign_continuity(Q), G

    def _width_at(self, s):
        width = self.waypoints[0].gripper_width
        for t_event, new in self.gripper_events():
            lo, hi = t_event - GRIPPER_RAMP / 2, t_event + GRIPPER_RAMP / 2
            if s >= hi:
                width = new
            elif s > lo:
                width = width + (new - width) * (s - lo) / GRIPPER_RAMP
                break
            else:
                break
        return width


@dataclass(frozen=True)
class NoiseSpec:
    position_sigma: float = 0.0
    orientation_sigma: float = 0.0
    time_warp_amp: float = 0.0
    rate: float = 1000.0
    seed: int = 0
    correlation_time: float = 0.5

    def __post_init__(self):
        if self.position_sigma < 0 or self.orientation_sigma < 0:
            raise InvalidArgumentError("noise sigmas must be non-negative")
        if not 0 <= self.time_warp_amp < 0.5:
            raise InvalidArgumentError("time_warp_amp must lie in [0, 0.5)")
        if self.rate <= 0 or self.correlation_time <= 0:
            raise InvalidArgumentError("rate and correlation_time must be positive")


@dataclass
class SynthResult:
    demo: Demonstration
    nominal_time: np.ndarray  # template time of every sample
    gripper_events: list = field(default_factory=list)  # (demo time, new width)
    corner_times: list = field(default_factory=list)    # demo time of each waypoint arrival

    def demo_time(self, tau):
        return np.interp(tau, self.nominal_time, self.demo.t)


def _smooth_noise(rng, n, dims, width):
    """Unit-variance Gaussian noise low-pass filtered over ``width`` samples."""
    white = rng.standard_normal((n, dims))
    if width < 1:
        return white
    sm = gaussian_filter1d(white, sigma=width, axis=0, mode="reflect")
    return sm / sm.std(axis=0, keepdims=True)


def synthesize(template, noise=NoiseSpec(), id=None):
    rng = np.random.default_rng(noise.seed)
    nominal = template.duration
    amp = noise.time_warp_amp
    duration = nominal * (1.0 + amp * rng.uniform(-1.0, 1.0)) if amp else nominal
    n = int(round(duration * noise.rate)) + 1
    t = np.arange(n) / noise.rate
    width = noise.correlation_time * noise.rate
    if amp:
        jitter = np.clip(_smooth_noise(rng, n - 1, 1, width)[:, 0], -1.0, 1.0)
        increments = 1.0 + amp * jitter
        tau = np.concatenate([[0.0], np.cumsum(increments)])
        tau *= nominal / tau[-1]
    else:
        tau = np.linspace(0.0, nominal, n)

    P, Q, G = template.evaluate(tau)
    if noise.position_sigma:
        P = P + noise.position_sigma * _smooth_noise(rng, n, 3, width)
    if noise.orientation_sigma:
        rot = noise.orientation_sigma * _smooth_noise(rng, n, 3, width)
        Q = np.array([quaternion_multiply(q, axis_angle_quaternion(r)) for q, r in zip(Q, rot)])
        Q = enforce_sign_continuity(Q / np.linalg.norm(Q, axis=1, keepdims=True))
    demo = Demonstration(id or f"{template.name}-{noise.seed}", t, P, Q, np.clip(G, 0.0, template.max_width),
                         noise.rate, template.max_width)
    events = [(float(np.interp(e, tau, t)), w) for e, w in template.gripper_events()]
    corners = [float(np.interp(a, tau, t)) for a, _ in template.schedule()]
    return SynthResult(demo, tau, events, corners)


def synthesize_demo(template, noise=NoiseSpec(), id=None):
    return synthesize(template, noise, id).demo


# -- built-in tasks ----------------------------------------------------------

# tool z axis tilted forward and down; scalar part well away from zero
_DOWN = np.array([0.5, 0.0, np.sqrt(3.0) / 2.0, 0.0])
OPEN, CLOSED = 0.08, 0.03


def _yawed(yaw):
    q = quaternion_multiply(_DOWN, axis_angle_quaternion([0.0, 0.0, yaw]))
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q


def _wp(xyz, width, dwell, yaw=0.0):
    return Waypoint(Pose(np.array(xyz, dtype=float), _yawed(yaw)), width, dwell)


def stack_cup():
    """Receive a cup from a person, carry it over the stack and drop it on top."""
    home, handover, lifted = (0.45, -0.25, 0.50), (0.55, -0.20, 0.35), (0.55, -0.20, 0.55)
    above, on_stack = (0.65, 0.20, 0.55), (0.65, 0.20, 0.40)
    wps = [
        _wp(home, OPEN, 0.8),
        _wp(handover, CLOSED, 1.2),        # take the cup
        _wp(lifted, CLOSED, 1.0, 0.5),     # lift, turning the wrist
        _wp(above, CLOSED, 1.0, 0.5),
        _wp(on_stack, OPEN, 1.2, 0.5),     # lower onto the stack and let go
        _wp(above, OPEN, 1.0),             # retract, wrist back
        _wp(home, OPEN, 0.8),
    ]
    return TaskTemplate("stack_cup", wps, (1.2, 1.4, 2.4, 1.0, 1.0, 1.6))


def pick_place():
    """Move a block from A to B, then bring it back to A."""
    a_top, a = (0.55, -0.20, 0.50), (0.55, -0.20, 0.30)
    b_top, b = (0.65, 0.20, 0.50), (0.65, 0.20, 0.30)
    wps = [
        _wp(a_top, OPEN, 0.8),
        _wp(a, CLOSED, 1.2),            # grasp at A
        _wp(a_top, CLOSED, 1.0),
        _wp(b_top, CLOSED, 1.0, 0.4),   # carry, turning the block
        _wp(b, OPEN, 1.2, 0.4),         # release at B
        _wp(b_top, OPEN, 1.0, 0.4),
        _wp(b, CLOSED, 1.2, 0.4),       # grasp again at B
        _wp(b_top, CLOSED, 1.0, 0.4),
        _wp(a_top, CLOSED, 1.0),        # carry back, turning back
        _wp(a, OPEN, 1.2),              # release at A
        _wp(a_top, OPEN, 0.8),
    ]
    return TaskTemplate("pick_place", wps, (1.4, 1.4, 2.4, 1.4, 1.4, 1.4, 1.4, 2.4, 1.4, 1.4))


def builtin_templates():
    return {t.name: t for t in (stack_cup(), pick_place())}
