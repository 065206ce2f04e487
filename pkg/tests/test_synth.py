import numpy as np
import pytest

import oracles
from hmmlfd.errors import InvalidArgumentError
from hmmlfd.keypoints import extract_keypoints
from hmmlfd.synth import CLOSED, OPEN, NoiseSpec, TaskTemplate, _wp, synthesize, synthesize_demo


def test_noise_free_samples_lie_on_polyline(templates):
    for tpl in templates.values():
        run = synthesize(tpl, NoiseSpec(rate=200))
        poly = tpl.polyline()
        dev = [oracles.point_polyline_distance(p, poly) for p in run.demo.positions]
        assert max(dev) < 1e-12
        assert np.allclose(run.demo.positions[0], poly[0]) and np.allclose(run.demo.positions[-1], poly[-1])


def test_noise_free_corner_times(templates):
    tpl = templates["stack_cup"]
    run = synthesize(tpl, NoiseSpec())
    assert run.corner_times == pytest.approx([a for a, _ in tpl.schedule()], abs=1e-9)
    for (arrive, depart), wp in zip(tpl.schedule(), tpl.waypoints):
        i = int(round(arrive * 1000))
        assert np.allclose(run.demo.positions[i], wp.pose.position, atol=1e-12)


def test_warped_events_follow_the_warp(templates):
    tpl = templates["pick_place"]
    run = synthesize(tpl, NoiseSpec(0.0, 0.0, 0.2, seed=4))
    assert len(run.gripper_events) == len(tpl.gripper_events())
    for (t, w), (tau, w0) in zip(run.gripper_events, tpl.gripper_events()):
        assert w == w0
        assert t == pytest.approx(run.demo_time(tau))
    assert abs(run.demo.duration / tpl.duration - 1) <= 0.2


def test_deterministic(templates):
    spec = NoiseSpec(0.002, 0.005, 0.1, seed=9, rate=250)
    a = synthesize_demo(templates["stack_cup"], spec)
    b = synthesize_demo(templates["stack_cup"], spec)
    assert a == b
    c = synthesize_demo(templates["stack_cup"], NoiseSpec(0.002, 0.005, 0.1, seed=10, rate=250))
    assert a != c


def test_pick_place_returns_to_start(templates):
    tpl = templates["pick_place"]
    assert np.array_equal(tpl.waypoints[0].pose.position, tpl.waypoints[-1].pose.position)
    assert tpl.corner_count == len(tpl.waypoints) - 2


def test_stack_cup_gripper_story(templates):
    tpl = templates["stack_cup"]
    events = tpl.gripper_events()
    sched = tpl.schedule()
    assert [w for _, w in events] == [CLOSED, OPEN]
    # closes at the hand-over before moving off, opens while sitting on the stack
    assert sched[1][0] < events[0][0] < sched[1][1]
    assert sched[4][0] < events[1][0] < sched[4][1]


def test_sample_counts(templates):
    for tpl in templates.values():
        n = len(synthesize_demo(tpl, NoiseSpec(0.002, 0.005, 0.1, seed=1)))
        assert 1e4 <= n <= 1e5


def test_widths_stay_in_range(templates):
    demo = synthesize_demo(templates["pick_place"], NoiseSpec(0.002, 0.005, 0.1, seed=2))
    assert demo.gripper.min() >= 0 and demo.gripper.max() <= demo.max_width


def test_noise_level_matches_sigma(templates):
    tpl = templates["stack_cup"]
    clean = synthesize_demo(tpl, NoiseSpec())
    noisy = synthesize_demo(tpl, NoiseSpec(0.002, 0.0, 0.0, seed=3))
    assert np.std(noisy.positions - clean.positions, axis=0) == pytest.approx([0.002] * 3, rel=1e-6)


@pytest.mark.parametrize("kwargs", [dict(position_sigma=-1.0), dict(orientation_sigma=-0.1),
                                    dict(time_warp_amp=0.5), dict(rate=0.0), dict(correlation_time=0.0)])
def test_noise_spec_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        NoiseSpec(**kwargs)


def test_template_validation():
    a, b = _wp((0.5, 0, 0.4), OPEN, 0.5), _wp((0.6, 0, 0.4), OPEN, 0.5)
    with pytest.raises(InvalidArgumentError):
        TaskTemplate("x", [a], ())
    with pytest.raises(InvalidArgumentError):
        TaskTemplate("x", [a, b], (1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        TaskTemplate("x", [a, b], (0.0,))


@pytest.mark.xfail(strict=True, reason="the default detector fires at both ends of every dwell, so counts "
                                      "sit near 2-3x the corner count")
@pytest.mark.parametrize("name", ["stack_cup", "pick_place"])
def test_keypoints_near_corner_count(templates, name):
    tpl = templates[name]
    n = len(extract_keypoints(synthesize_demo(tpl, NoiseSpec(0.001, 0.005, 0.1, seed=0))))
    assert abs(n - (tpl.corner_count + 2)) <= 2
