"""Figures of demonstrations, key-points, centroids and the generalised trajectory.

Every artist carries a ``gid`` so the SVG output can be inspected structurally:
``demo-<i>``, ``keypoints-<i>``, ``centroids`` and ``generalized``.
"""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "svg.hashsalt": "hmmlfd",
    "svg.fonttype": "none",
    "font.size": 8,
    "axes.labelsize": 8,
    "legend.fontsize": 7,
    "figure.figsize": (6.0, 4.5),
}
DEMO_COLORS = ("#4c72b0", "#55a868", "#8172b2", "#ccb974", "#64b5cd", "#8c8c8c")


def plot_skill(demos=(), keypoint_sets=(), model=None, title=None, max_points=2000):
    """3-D position plot; returns ``(figure, series)`` where ``series`` lists the plotted rows."""
    series = []
    with plt.rc_context(RC):
        fig = plt.figure()
        ax = fig.add_subplot(projection="3d")
        for i, demo in enumerate(demos):
            step = max(1, -(-len(demo) // max_points))
            P = demo.positions[::step]
            T = demo.t[::step]
            (line,) = ax.plot(P[:, 0], P[:, 1], P[:, 2], lw=0.8, color=DEMO_COLORS[i % len(DEMO_COLORS)],
                              label=f"demo {demo.id}")
            line.set_gid(f"demo-{i}")
            series += [(f"demo-{i}", j, t, *p) for j, (t, p) in enumerate(zip(T, P))]
        for i, kps in enumerate(keypoint_sets):
            if not kps:
                continue
            K = np.array([kp.vector[:3] for kp in kps])
            sc = ax.scatter(K[:, 0], K[:, 1], K[:, 2], marker="^", s=12,
                            color=DEMO_COLORS[i % len(DEMO_COLORS)])
            sc.set_gid(f"keypoints-{i}")
            series += [(f"keypoints-{i}", j, kp.timestamp, *kp.vector[:3]) for j, kp in enumerate(kps)]
        if model is not None:
            C = model.codebook.centroids
            sc = ax.scatter(C[:, 0], C[:, 1], C[:, 2], s=40, facecolors="none", edgecolors="red",
                            label="centroids")
            sc.set_gid("centroids")
            series += [("centroids", j, float("nan"), *c[:3]) for j, c in enumerate(C)]
            g = model.generalized
            (line,) = ax.plot(g.positions[:, 0], g.positions[:, 1], g.positions[:, 2], color="c", lw=1.6,
                              label="generalized")
            line.set_gid("generalized")
            series += [("generalized", j, t, *p) for j, (t, p) in enumerate(zip(g.times, g.positions))]
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_zlabel("z [m]")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
    return fig, series


def plot_deviation(times, deviation, title=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6.0, 2.5))
        (line,) = ax.plot(times, np.asarray(deviation) * 1000.0, lw=1.0)
        line.set_gid("deviation")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("deviation [mm]")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return fig


def figure_svg(fig):
    """Deterministic SVG text (no timestamp metadata)."""
    buf = io.StringIO()
    with plt.rc_context(RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def series_csv(series):
    lines = ["series,index,t,x,y,z"]
    for name, j, t, x, y, z in series:
        lines.append(",".join([name, str(j)] + [repr(float(v)) for v in (t, x, y, z)]))
    return "\n".join(lines) + "\n"
