"""Metrics comparing a learned skill against the template it was demonstrated from."""
from __future__ import annotations

import numpy as np


def polyline_distance(points, polyline):
    """Distance from every point to the nearest segment of ``polyline``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.asarray(polyline, dtype=float)
    best = np.full(len(P), np.inf)
    for a, b in zip(V[:-1], V[1:]):
        ab = b - a
        L = ab @ ab
        u = np.clip((P - a) @ ab / L, 0.0, 1.0) if L > 0 else np.zeros(len(P))
        best = np.minimum(best, np.linalg.norm(P - (a + u[:, None] * ab), axis=1))
    return best


def gripper_events(times, widths, level):
    """Times where ``widths`` crosses ``level`` (linear interpolation), with direction +1 opening."""
    t = np.asarray(times, dtype=float)
    w = np.asarray(widths, dtype=float) - level
    events = []
    for i in range(len(w) - 1):
        if w[i] < 0 <= w[i + 1] or w[i] >= 0 > w[i + 1]:
            u = w[i] / (w[i] - w[i + 1])
            events.append((float(t[i] + u * (t[i + 1] - t[i])), 1 if w[i + 1] > w[i] else -1))
    return events


def _template_events(template):
    out, width = [], template.waypoints[0].gripper_width
    for time, new in template.gripper_events():
        out.append((time, 1 if new > width else -1))
        width = new
    return out


def evaluate_model(model, template, recall_radius=0.02, reference_demo=None):
    """Deviation, corner recall and gripper timing of ``model`` against ``template``.

    The model runs on the reference demonstration's clock. When that
    demonstration is supplied, the expected gripper events are the crossings of
    its own gripper signal, which is exact on that clock. Otherwise template
    event times are stretched by the duration ratio, which ignores any
    non-uniform warp. A missing, extra or reversed event counts as an infinite
    error.
    """
    g = model.generalized
    dev = polyline_distance(g.positions, template.polyline())
    centroid_pos = model.ordered_centroids[:, :3]
    corners = template.polyline()
    hit = [bool(np.min(np.linalg.norm(centroid_pos - c, axis=1)) <= recall_radius) for c in corners]

    widths = [wp.gripper_width for wp in template.waypoints]
    level = 0.5 * (min(widths) + max(widths))
    switching = max(widths) > min(widths)
    learned = gripper_events(g.times, g.gripper, level) if switching else []
    expected = _template_events(template)
    report = model.report
    if reference_demo is not None:
        timing_reference = "reference-demo"
        demo_events = gripper_events(reference_demo.t, reference_demo.gripper, level) if switching else []
        if [d for _, d in demo_events] == [d for _, d in expected]:
            expected = demo_events
        else:
            expected = [(float("nan"), d) for _, d in expected]
        shift, scale = 0.0, 1.0
    else:
        timing_reference = "duration-scaled"
        if "durations" in report and "reference_demo" in report:
            scale = template.duration / report["durations"][report["reference_demo"]]
        else:
            scale = template.duration / (g.times[-1] - g.times[0])
        shift = g.times[0]
    errors = []
    for (t_exp, d_exp), (t, d) in zip(expected, learned):
        err = abs((t - shift) * scale - t_exp) if d == d_exp else float("inf")
        errors.append(float("inf") if np.isnan(err) else err)
    if len(learned) != len(expected):
        errors.append(float("inf"))
    return {
        "template": template.name,
        "samples": int(len(g)),
        "rms_deviation_m": float(np.sqrt(np.mean(dev ** 2))),
        "max_deviation_m": float(np.max(dev)),
        "corner_recall": float(np.mean(hit)),
        "corners_missed": int(len(hit) - sum(hit)),
        "gripper_events_expected": len(expected),
        "gripper_events_found": len(learned),
        "gripper_timing_max_error_s": float(max(errors)) if errors else float("nan"),
        "gripper_timing_reference": timing_reference,
    }
