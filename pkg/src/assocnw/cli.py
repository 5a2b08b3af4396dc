"""Command-line interface: ``assocnw {simulate,train,associate,control,classify}``.

File formats
------------
sample CSV     ``v_prev,v,p,b`` (km/h, km/h, unitless, unitless), one tick per row
profile CSV    ``time_s,target_kmh``, piecewise-constant from each row's time
trace CSV      ``time_s,target_kmh,actual_kmh,p,b,plausibility,learned``
model          versioned JSON document (see ``assocnw.density.serialize``)

Lines starting with ``#`` are comments; every command writes its seed and
settings there. Numbers are written with shortest round-trip formatting.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .associate import DEFAULT_MC_SAMPLES, PlausibilityReference, associate, classify, detect_corrupt
from .control import (CAR_NAMES, ControllerConfig, TargetProfile, new_car_model, run_control,
                      teach)
from .density import MixtureModel, ModelFormatError, deserialize, serialize
from .powertrain import DriverParams, PlantParams, calibrate, simulate_drive

DEFAULT_PROFILE = TargetProfile.steps([60.0, 30.0, 90.0], 100.0)


class UsageError(Exception):
    """Bad flags or input files; reported on stderr with exit code 2."""


def _fmt(x) -> str:
    return repr(float(x))


def _positive(kind=float):
    def check(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return check


def _unit_interval(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text!r}")
    return v


def _decay(text):
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1]: {text!r}")
    return v


def read_table(path: str, expect: Optional[Sequence[str]] = None):
    """Read a numeric CSV; returns ``(header, rows)`` with ``rows`` as an (n, k) array."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    header = None
    rows: List[List[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = [c.strip() for c in cells]
            if expect is not None and header != list(expect):
                raise UsageError(f"{path}:{lineno}: header {','.join(header)!r} does not match "
                                 f"{','.join(expect)!r}")
            continue
        if len(cells) != len(header):
            raise UsageError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise UsageError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
        if not all(np.isfinite(vals)):
            raise UsageError(f"{path}:{lineno}: non-finite value")
        rows.append(vals)
    if header is None:
        raise UsageError(f"{path}: empty file (no header)")
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _load_model(path: str) -> MixtureModel:
    try:
        return deserialize(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read model {path}: {exc.strerror}") from None
    except ModelFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _plant(args) -> PlantParams:
    try:
        return calibrate(PlantParams(dt=args.dt)).with_mass(args.mass)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- commands
def cmd_simulate(args) -> int:
    driver = DriverParams(walk_sigma=args.walk_sigma, regime_switch_prob=args.switch_prob,
                          seed=args.seed)
    data = simulate_drive(_plant(args), driver, args.seconds, seed=args.seed)
    buf = io.StringIO()
    buf.write(f"# assocnw simulate seed={args.seed} seconds={_fmt(args.seconds)} "
              f"dt={_fmt(args.dt)} mass={_fmt(args.mass)}\n")
    buf.write(",".join(CAR_NAMES) + "\n")
    for row in data.tolist():
        buf.write(",".join(repr(x) for x in row) + "\n")
    _write(args.out, buf.getvalue())
    print(f"ticks={len(data)} speed_min_kmh={_fmt(data[:, 1].min())} "
          f"speed_max_kmh={_fmt(data[:, 1].max())} seed={args.seed}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def cmd_train(args) -> int:
    expect = None if args.any_header else CAR_NAMES
    header, rows = read_table(args.input, expect)
    if len(rows) == 0:
        raise UsageError(f"{args.input}: no samples")
    model = MixtureModel(len(header), header, budget=args.budget, decay=args.decay,
                         bandwidth_period=args.bandwidth_period)
    teach(model, rows)
    _write(args.out, serialize(model))
    print(f"m={model.m} update_count={model.update_count} "
          f"bandwidth_scale={_fmt(model.bandwidth_scale)} "
          f"bandwidth={','.join(_fmt(x) for x in model.bandwidth)}")
    return 0


def parse_query(text: str, names: Sequence[str]):
    """``"a=1,b=?"`` -> (values with NaN for unknowns, known mask)."""
    vals = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"query item {part!r} is not name=value")
        name, val = (s.strip() for s in part.split("=", 1))
        if name not in names:
            raise UsageError(f"unknown component {name!r}; model has {','.join(names)}")
        if name in vals:
            raise UsageError(f"component {name!r} given twice")
        if val == "?":
            vals[name] = None
        else:
            try:
                vals[name] = float(val)
            except ValueError:
                raise UsageError(f"bad value for {name!r}: {val!r}") from None
            if not np.isfinite(vals[name]):
                raise UsageError(f"value for {name!r} must be finite")
    missing = [n for n in names if n not in vals]
    if missing:
        raise UsageError(f"query must cover every component; missing {','.join(missing)}")
    values = np.array([np.nan if vals[n] is None else vals[n] for n in names])
    return values, ~np.isnan(values)


def cmd_associate(args) -> int:
    model = _load_model(args.model)
    values, mask = parse_query(args.query, model.names)
    try:
        res = associate(model, values, mask, order=args.order, mc_samples=args.mc_samples,
                        seed=args.seed, allow_unconditional=args.unconditional)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"# assocnw associate seed={args.seed} order={res.order} mc_samples={args.mc_samples}")
    print(",".join(list(model.names) + ["plausibility"]))
    print(",".join([_fmt(x) for x in res.completed] + [_fmt(res.plausibility)]))
    return 0


def cmd_control(args) -> int:
    plant = _plant(args)
    if args.profile:
        try:
            profile = TargetProfile.read_csv(Path(args.profile).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read profile {args.profile}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{args.profile}: {exc}") from None
    elif args.target is not None:
        profile = TargetProfile.constant(args.target)
    else:
        profile = DEFAULT_PROFILE
    if args.from_scratch:
        model = new_car_model(budget=args.budget, decay=args.decay)
        online = True
        floor = 0.05 if args.plausibility_floor is None else args.plausibility_floor
        explore = 0.3 if args.explore_sigma is None else args.explore_sigma
    elif args.model:
        model = _load_model(args.model)
        if model.names != list(CAR_NAMES):
            raise UsageError(f"model components {model.names} are not {list(CAR_NAMES)}")
        online = args.online_learn
        floor = args.plausibility_floor or 0.0
        explore = args.explore_sigma or 0.0
    else:
        raise UsageError("give --model or --from-scratch")
    if args.seconds is not None:
        duration = args.seconds
    else:
        segs = profile.times
        duration = float(segs[-1] + (segs[-1] - segs[-2] if len(segs) > 1 else 100.0))
    config = ControllerConfig(order=args.order, online_learn=online, plausibility_floor=floor,
                              explore_sigma=explore, seed=args.seed, mc_samples=args.mc_samples)
    trace = run_control(model, plant, profile, duration, config)
    comment = (f"assocnw control seed={args.seed} mass={_fmt(args.mass)} dt={_fmt(args.dt)} "
               f"online_learn={int(online)} from_scratch={int(args.from_scratch)}")
    _write(args.out, trace.to_csv(comment))
    out = sys.stderr if args.out in (None, "-") else sys.stdout
    for (t0, t1, v), err in zip(profile.segments(duration), trace.steady_state_errors(profile)):
        print(f"segment {_fmt(t0)}-{_fmt(t1)}s target={_fmt(v)} steady_state_error_kmh={_fmt(err)}",
              file=out)
    print(f"max_abs_error_kmh={_fmt(trace.error.max())} saturated_ticks={trace.saturated_ticks()} "
          f"guessed_ticks={int(trace.guessed.sum())}", file=out)
    last = min(60.0, duration)
    print(f"final_minute_mean_abs_error_kmh={_fmt(trace.mean_abs_error(duration - last, duration))}",
          file=out)
    if args.save_model:
        _write(args.save_model, serialize(model))
    return 0


def cmd_classify(args) -> int:
    model = _load_model(args.model)
    header, rows = read_table(args.input)
    truth = None
    if "truth" in header:
        k = header.index("truth")
        truth = rows[:, k].astype(int)
        rows = np.delete(rows, k, axis=1)
        header = header[:k] + header[k + 1:]
    d_m = model.dim - args.classes
    if args.classes < 0 or rows.shape[1] != d_m:
        raise UsageError(f"patterns have {rows.shape[1]} columns; model dim {model.dim} with "
                         f"{args.classes} classes needs {d_m}")
    ref = PlausibilityReference(model, args.mc_samples, args.seed)
    cols = ([] if args.classes == 0 else ["class"] + [f"score_{j}" for j in range(args.classes)])
    cols.append("plausibility")
    if args.repair:
        cols.append("corrupt")
    buf = io.StringIO()
    buf.write(f"# assocnw classify seed={args.seed} classes={args.classes} "
              f"mc_samples={args.mc_samples}\n")
    buf.write(",".join(cols) + "\n")
    labels = []
    pattern_model = model.marginal(list(range(d_m))) if args.repair else None
    for x in rows:
        res = classify(model, x, args.classes, reference=ref)
        cells = [] if args.classes == 0 else [str(res.label)] + [_fmt(s) for s in res.scores]
        cells.append(_fmt(res.plausibility))
        if args.repair:
            bad = detect_corrupt(pattern_model, x, threshold=args.threshold,
                                 mc_samples=args.mc_samples, seed=args.seed) if d_m > 1 else []
            cells.append(";".join(str(i) for i, _ in bad))
        labels.append(res.label)
        buf.write(",".join(cells) + "\n")
    _write(args.out, buf.getvalue())
    if truth is not None and args.classes > 0:
        err = float(np.mean(np.array(labels) != truth))
        print(f"error_rate={_fmt(err)} n={len(truth)}",
              file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="assocnw", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def plant_flags(p):
        p.add_argument("--dt", type=_positive(), default=0.01, help="tick length in s")
        p.add_argument("--mass", type=_positive(), default=1800.0, help="car mass in kg")

    p = sub.add_parser("simulate", help="excite the plant with a random-walk driver",
                       description="Writes a sample CSV with columns v_prev,v,p,b.")
    p.add_argument("--seconds", type=_positive(), default=500.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--walk-sigma", type=float, default=DriverParams.walk_sigma)
    p.add_argument("--switch-prob", type=_unit_interval, default=DriverParams.regime_switch_prob)
    p.add_argument("--out", default="-")
    plant_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="learn a density model from a sample CSV",
                       description="Reads v_prev,v,p,b rows and writes a model document.")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=_positive(int), default=500)
    p.add_argument("--decay", type=_decay, default=0.9999)
    p.add_argument("--bandwidth-period", type=_positive(int), default=50)
    p.add_argument("--any-header", action="store_true",
                   help="accept arbitrary column names (e.g. pattern + one-hot class columns)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("associate", help="complete a partially known vector",
                       description="Prints name columns plus plausibility; '?' marks unknowns.")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True, help='e.g. "v_prev=50,v=?,p=1,b=0"')
    p.add_argument("--order", type=int, choices=(0, 1), default=1)
    p.add_argument("--mc-samples", type=_positive(int), default=DEFAULT_MC_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unconditional", action="store_true",
                   help="allow an all-unknown query (returns the mixture mean)")
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("control", help="closed-loop speed control with the backward model",
                       description="Writes a trace CSV with columns "
                                   "time_s,target_kmh,actual_kmh,p,b,plausibility,learned.")
    p.add_argument("--model")
    p.add_argument("--from-scratch", action="store_true",
                   help="start with an empty density and learn online by trial and error")
    p.add_argument("--profile", help="profile CSV (time_s,target_kmh); default 60/30/90 km/h")
    p.add_argument("--target", type=float, help="constant target speed in km/h")
    p.add_argument("--seconds", type=_positive())
    p.add_argument("--online-learn", action="store_true")
    p.add_argument("--order", type=int, choices=(0, 1), default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=_positive(int), default=DEFAULT_MC_SAMPLES)
    p.add_argument("--plausibility-floor", type=_unit_interval)
    p.add_argument("--explore-sigma", type=float)
    p.add_argument("--budget", type=_positive(int), default=500)
    p.add_argument("--decay", type=_decay, default=0.9999)
    p.add_argument("--save-model", help="write the (possibly updated) model here")
    p.add_argument("--out", default="-")
    plant_flags(p)
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("classify", help="classify patterns with a pattern+one-hot model",
                       description="Writes class,score_0..,plausibility[,corrupt] per row; an "
                                   "input column named 'truth' yields an error-rate summary.")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--repair", action="store_true",
                   help="report pattern components that look corrupt")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=_positive(int), default=DEFAULT_MC_SAMPLES)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_classify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"assocnw {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
