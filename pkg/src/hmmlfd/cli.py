"""Command line front end: ``hmmlfd {ingest,synth,learn,execute,eval,plot}``.

Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure. Every
failure prints exactly one line ``error[CODE]: message`` on stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .errors import HmmLfdError, InvalidArgumentError
from .evaluate import evaluate_model, polyline_distance
from .keypoints import KeyPointConfig, extract_keypoints, load_config
from .kinematics import baxter_chain, load_chain
from .pipeline import (LearnConfig, execute, file_digest, learn, load_model, model_to_text,
                       save_joint_trajectory)
from .plotting import figure_svg, plot_deviation, plot_skill, series_csv
from .synth import NoiseSpec, builtin_templates, synthesize
from .trajectory import _atomic_write, ingest_joint_log, load_demo, load_joint_log, save_demo

log = logging.getLogger("hmmlfd")

EPS_NAMES = [f.name for f in fields(KeyPointConfig)]
LEARN_KEYS = {"k", "smoothing", "oversample", "zscore", "kmeans_restarts", "em_max_iter", "em_tol",
              "dtw_max_frames"}


class UsageError(HmmLfdError):
    code = "USAGE"
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, tuple)):
        return " ".join(_fmt(v) for v in x)
    return str(x)


def _emit(rows, out=None):
    """Print ``key,value`` rows; optionally also save them as CSV."""
    text = "key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in rows)
    sys.stdout.write(text)
    if out:
        _atomic_write(out, text)


def _chain(args):
    return load_chain(args.chain) if args.chain else baxter_chain()


def _template(name):
    templates = builtin_templates()
    if name not in templates:
        raise UsageError(f"unknown template {name!r}; available: {', '.join(sorted(templates))}")
    return templates[name]


# -- subcommands -----------------------------------------------------------------

def cmd_ingest(args):
    chain = _chain(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in args.logs:
        records = load_joint_log(path, n_joints=len(chain))
        demo = ingest_joint_log(records, chain, Path(path).stem, args.rate, args.max_width)
        target = out_dir / f"{Path(path).stem}.csv"
        save_demo(demo, target)
        print(f"{target},samples={len(demo)},duration={demo.duration!r}")


def cmd_synth(args):
    template = _template(args.template)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        noise = NoiseSpec(args.position_sigma, args.orientation_sigma, args.time_warp, args.rate, args.seed + i)
        res = synthesize(template, noise, f"{template.name}_{i}")
        target = out_dir / f"{res.demo.id}.csv"
        save_demo(res.demo, target)
        events = " ".join(f"{t!r}" for t, _ in res.gripper_events)
        print(f"{target},samples={len(res.demo)},duration={res.demo.duration!r},gripper_events={events}")


def learn_config(args):
    kp = KeyPointConfig()
    extra = {}
    if args.config:
        kp, extra = load_config(args.config)
    unknown = set(extra) - LEARN_KEYS
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kp = replace(kp, **{n: getattr(args, n) for n in EPS_NAMES if getattr(args, n) is not None})
    cfg = LearnConfig(keypoints=kp)
    updates = {}
    for key, value in extra.items():
        updates[key] = bool(value) if key == "zscore" else (
            value if key in ("smoothing", "em_tol") else int(value))
    if args.k is not None:
        updates["k"] = args.k
    if args.smoothing is not None:
        updates["smoothing"] = args.smoothing
    if args.zscore:
        updates["zscore"] = True
    if args.gripper_mode:
        updates["gripper_mode"] = args.gripper_mode
    return replace(cfg, **updates)


def cmd_learn(args):
    cfg = learn_config(args)
    demos = [load_demo(p) for p in args.demos]
    prov = {"inputs": {Path(p).name: file_digest(p) for p in args.demos}}
    if args.config:
        prov["config_file"] = {Path(args.config).name: file_digest(args.config)}
    model = learn(demos, cfg, args.seed, prov)
    out = args.out or "model.json"
    _atomic_write(out, model_to_text(model))
    r = model.report
    rows = [(f"keypoints[{d.id}]", n) for d, n in zip(demos, r["keypoint_counts"])]
    rows += [("k", r["k"]), ("em_iterations", r["em_iterations"]), ("log_likelihood", r["log_likelihood"]),
             ("zero_points", r["zero_points"] or "none"), ("reference_demo", r["reference_demo"]),
             ("states", len(model.decoded_states)), ("model", out)]
    _emit(rows)


def cmd_execute(args):
    model = load_model(args.model)
    seed = None
    if args.seed_joints:
        try:
            seed = [float(v) for v in args.seed_joints.split(",")]
        except ValueError:
            raise UsageError("--seed-joints expects comma separated numbers") from None
    chain = _chain(args)
    if seed is not None and len(seed) != len(chain):
        raise UsageError(f"--seed-joints needs {len(chain)} values, got {len(seed)}")
    traj = execute(model, chain, seed, max_step=args.max_step)
    out = args.out or "joints.csv"
    save_joint_trajectory(traj, out)
    _emit([("samples", len(traj.times)), ("max_position_error_m", float(traj.position_errors.max())),
           ("max_orientation_error_rad", float(traj.orientation_errors.max())), ("trajectory", out)])


def cmd_eval(args):
    template = _template(args.template)
    model = load_model(args.model)
    reference = None
    if args.demos:
        wanted = model.report.get("reference_id")
        by_id = {d.id: d for d in (load_demo(p) for p in args.demos)}
        if wanted not in by_id:
            raise UsageError(f"none of the demonstrations is the model's reference {wanted!r}")
        reference = by_id[wanted]
    metrics = evaluate_model(model, template, reference_demo=reference)
    _emit(list(metrics.items()), args.out)
    if args.figure:
        g = model.generalized
        fig = plot_deviation(g.times, polyline_distance(g.positions, template.polyline()),
                             f"deviation from {template.name}")
        _atomic_write(args.figure, figure_svg(fig))


def cmd_plot(args):
    if not args.model and not args.demos:
        raise UsageError("plot needs --model and/or demonstration files")
    demos = [load_demo(p) for p in args.demos]
    model = load_model(args.model) if args.model else None
    kps = []
    if args.keypoints:
        kcfg = KeyPointConfig()
        if model is not None:
            kcfg = KeyPointConfig(**model.provenance["config"]["keypoints"])
        kps = [extract_keypoints(d, kcfg) for d in demos]
    fig, series = plot_skill(demos, kps, model, args.title)
    out = Path(args.out or "plot.svg")
    _atomic_write(out, figure_svg(fig))
    csv_path = out.with_suffix(".csv")
    _atomic_write(csv_path, series_csv(series))
    print(f"{out}\n{csv_path}")


# -- parser ----------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global RNG seed (k-means, synthesis)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--chain", help="DH parameter file (default: built-in Baxter arm)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="hmmlfd", description="Learn trajectory skills from demonstrations.")
    p.add_argument("--version", action="version", version=f"hmmlfd {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="joint logs -> demonstration CSVs")
    s.add_argument("logs", nargs="+")
    s.add_argument("--rate", type=float, default=1000.0, help="source sampling rate [Hz]")
    s.add_argument("--max-width", type=float, default=0.1, help="gripper opening limit [m]")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", parents=[common], help="synthetic demonstrations of a template task")
    s.add_argument("--template", required=True)
    s.add_argument("--count", type=int, default=3)
    s.add_argument("--position-sigma", type=float, default=0.002)
    s.add_argument("--orientation-sigma", type=float, default=0.005)
    s.add_argument("--time-warp", type=float, default=0.1)
    s.add_argument("--rate", type=float, default=1000.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("learn", parents=[common], help="demonstrations -> skill model")
    s.add_argument("demos", nargs="+")
    s.add_argument("--config", help="key = value threshold file")
    s.add_argument("--k", type=int, help="number of clusters (default: rounded mean key-point count)")
    s.add_argument("--smoothing", type=float, help="spline smoothing parameter p in [0, 1]")
    s.add_argument("--zscore", action="store_true", help="standardise dimensions before clustering")
    s.add_argument("--gripper-mode", choices=("spline", "hold"))
    for name in EPS_NAMES:
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float if name.startswith("eps") else int)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("execute", parents=[common], help="skill model -> joint trajectory")
    s.add_argument("model")
    s.add_argument("--seed-joints", help="comma separated initial joint angles")
    s.add_argument("--max-step", type=float, default=0.5, help="largest joint jump between samples [rad]")
    s.set_defaults(func=cmd_execute)

    s = sub.add_parser("eval", parents=[common], help="compare a model with a template task")
    s.add_argument("model")
    s.add_argument("--template", required=True)
    s.add_argument("--figure", help="SVG path for the deviation plot")
    s.add_argument("--demos", nargs="+", help="training demonstrations; the reference one times gripper events")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("plot", parents=[common], help="SVG + CSV of demos, key-points and model")
    s.add_argument("demos", nargs="*")
    s.add_argument("--model")
    s.add_argument("--keypoints", action="store_true", help="mark extracted key-points")
    s.add_argument("--title")
    s.set_defaults(func=cmd_plot)
    return p


def _die(code, exit_code, message):
    sys.stderr.write(f"error[{code}]: {' '.join(str(message).split())}\n")
    return exit_code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _die(exc.code, 2, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except HmmLfdError as exc:
        return _die(exc.code, exc.exit_code, exc)
    except OSError as exc:
        return _die("IO", 3, f"{exc.filename}: {exc.strerror}" if exc.filename else exc)
    except ValueError as exc:
        return _die("DATA", 3, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
