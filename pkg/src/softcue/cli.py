"""Batch command-line front end.

Every command writes a JSON report (``schema: 1``) to ``--out`` or stdout,
plus optional CSV side outputs for plotting. The exit status is 0 exactly
when no input item failed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SoftcueError
from .frechet import CUES, discrimination_time
from .geometry import load_print, pixel_scale, polygon_area
from .pipeline import fuse_cohort, recognize, trial_cues
from .psycho import dprime_differencing, fit_psychometric, parse_label, rates, response_tables
from .skinfit import (
    DEFAULT_AREA,
    DEFAULT_THICKNESS,
    ELASTICITY_RATIO,
    LayerStack,
    fit_scale,
    forward_compression,
)
from .stats import bootstrap_ci, cohens_d, kmeans, mann_whitney_u, match_rate, spearman
from .synth import HertzParams, hertz_trace, ramp_hold_profile, spring_trace, triangle_profile
from .trace import load_traces, write_traces

log = logging.getLogger("softcue")

SCHEMA = 1
# settings that only locate files; they are echoed but never compared
_IO_KEYS = {"command", "config", "out", "func"}


# ---------------------------------------------------------------------------
# helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _settings(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _emit(args, results: dict, errors: list) -> int:
    report = {
        "schema": SCHEMA,
        "tool": "softcue",
        "version": __version__,
        "command": args.command,
        "settings": _settings(args),
        "results": results,
        "errors": errors,
    }
    if not args.no_timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 1 if errors else 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for v in row])


def _read_dict_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.DictReader(lines))


def _load_pairs(paths):
    forces, disps = [], []
    for p in paths:
        tr = load_traces(p)
        forces.append(tr["force"])
        if "displacement" in tr:
            disps.append(tr["displacement"])
    return forces, disps


# ---------------------------------------------------------------------------
# commands


def cmd_cues(args) -> int:
    root = Path(args.input)
    files = sorted(root.glob("*.csv"))
    if not files:
        log.warning("no trace files found in %s", root)
    rows, errors = [], []
    for path in files:
        try:
            tr = load_traces(path)
            if "displacement" not in tr:
                raise SoftcueError("trace has no displacement column")
            rows.append(trial_cues(tr["force"], tr["displacement"], path.stem, args.window,
                                   args.onset_fraction))
        except (SoftcueError, ValueError, OSError) as exc:
            errors.append({"file": path.name, "error": str(exc)})
    try:
        fuse_cohort(rows)
    except SoftcueError as exc:
        errors.append({"file": None, "error": f"fusion failed: {exc}"})
    table = [r.to_dict() for r in rows]
    if args.table:
        keys = list(table[0]) if table else ["trial"]
        _write_csv(args.table, keys, ([r[k] for k in keys] for r in table))
    return _emit(args, {"trials": table}, errors)


def cmd_frechet_time(args) -> int:
    first, _ = _load_pairs(args.first)
    second, _ = _load_pairs(args.second)
    res = discrimination_time(
        first, second, cue=args.cue, jnd_fraction=args.jnd, factor=args.downsample,
        window=args.window, mode=args.mode,
    )
    if args.profile:
        _write_csv(args.profile, ["t", "dissimilarity", "reference", "ratio"], res.rows())
    results = {
        "cue": args.cue,
        "discriminable": res.discriminable,
        "time_s": res.time,
        "final_dissimilarity": float(res.dissimilarity[-1]),
        "final_ratio": float(res.ratio[-1]),
        "profile_points": int(res.t.size),
    }
    return _emit(args, results, [])


def cmd_recognize_time(args) -> int:
    forces, disps = _load_pairs(args.inputs)
    if len(disps) != len(forces):
        return _emit(args, {}, [{"file": None, "error": "every trial needs a displacement column"}])
    rec = recognize(forces, disps, window=args.window, gain_threshold=args.gain_threshold,
                    meas_variance=args.meas_variance, init_variance=args.init_variance,
                    literal_posterior=args.literal_posterior)
    traj = rec.trajectory
    if args.trajectory:
        _write_csv(args.trajectory, ["t", "gain", "estimate", "variance"],
                   zip(traj.gain_times, traj.gains, traj.estimates[1:], traj.variances[1:]))
    results = {
        "recognized": rec.time is not None,
        "time_s": rec.time,
        "terminal_stiffness": traj.terminal.value,
        "max_gain": float(traj.gains.max()),
        "init_variance": rec.init_variance,
        "steps": int(traj.gains.size),
    }
    return _emit(args, results, [])


def cmd_dprime(args) -> int:
    rows, errors = [], []
    for lineno, rec in enumerate(_read_dict_rows(args.input), start=2):
        try:
            row = (rec["condition"], rec["pair"], parse_label(rec["truth"]),
                   parse_label(rec["response"]))
        except KeyError as exc:
            errors.append({"line": lineno, "error": f"missing column {exc}"})
            continue
        except (ValueError, AttributeError) as exc:
            errors.append({"line": lineno, "error": str(exc)})
            continue
        rows.append(row)
    out = []
    try:
        tables = response_tables(rows)
    except ValueError as exc:
        return _emit(args, {"table": []}, errors + [{"line": None, "error": str(exc)}])
    for (condition, pair), tab in sorted(tables.items()):
        hit, fa = rates(tab, args.correction)
        try:
            dp = dprime_differencing(hit, fa)
        except ValueError as exc:
            errors.append({"condition": condition, "pair": pair, "error": str(exc)})
            dp = None
        out.append({"condition": condition, "pair": pair, "hit": hit, "fa": fa, "dprime": dp,
                    "n_same": tab.n_same, "n_diff": tab.n_diff})
    return _emit(args, {"table": out}, errors)


def cmd_psychfit(args) -> int:
    recs = _read_dict_rows(args.input)
    levels = [float(r["level"]) for r in recs]
    k = [float(r["n_correct"]) for r in recs]
    n = [float(r["n_total"]) for r in recs]
    fit = fit_psychometric(levels, k, n, guess=args.guess, lapse_bounds=(0.0, args.max_lapse),
                           overdispersion=args.overdispersion)
    if args.curve:
        xs = np.linspace(min(levels), max(levels), 101)
        _write_csv(args.curve, ["level", "p_correct"], zip(xs, fit(xs)))
    return _emit(args, fit.to_dict(), [])


def cmd_skinfit(args) -> int:
    curves = []
    for p in args.inputs:
        recs = _read_dict_rows(p)
        curves.append(([float(r["d_mm"]) for r in recs], [float(r["force_N"]) for r in recs]))
    stack = LayerStack(thickness=tuple(args.thickness), area=args.area)
    fit = fit_scale(curves, stack, bounds=(args.k_min, args.k_max))
    results = {
        "k": fit.k,
        "softness_index": fit.softness,
        "moduli_kPa": fit.moduli,
        "r2": list(fit.r2),
        "mean_r2": fit.mean_r2,
        "thickness_mm": list(stack.thickness),
        "area_mm2": stack.area,
        "elasticity_ratio": list(ELASTICITY_RATIO),
    }
    return _emit(args, results, [])


def cmd_area(args) -> int:
    pr = load_print(args.input, scale_bar_cm=args.bar_cm)
    return _emit(args, {"area_cm2": polygon_area(pr), "scale_cm_per_px": pixel_scale(pr)}, [])


def cmd_synth(args) -> int:
    if args.model == "skin":
        stack = LayerStack(thickness=tuple(args.thickness), area=args.area, k=args.k)
        d = np.linspace(0.0, args.max_displacement, args.points)
        F = forward_compression(stack, d)
        if args.noise:
            rng = np.random.default_rng(args.seed)
            F = F * (1.0 + args.noise * rng.standard_normal(F.shape))
        text = "".join(f"# {k}={v}\n" for k, v in _settings(args).items() if k not in _IO_KEYS)
        text += "d_mm,force_N\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(d.tolist(), F.tolist()))
        _write_text(args.out, text)
        return 0
    if args.profile == "triangle":
        prof = triangle_profile(args.rate, args.peak, args.sample_rate)
    else:
        prof = ramp_hold_profile(args.rate, args.peak, args.sample_rate, baseline=args.baseline,
                                 hold=args.hold)
    if args.model == "spring":
        force, disp = spring_trace(args.k, prof, args.noise, args.seed)
    else:
        params = HertzParams(args.finger_modulus, args.sphere_modulus, args.radius)
        force, disp, _ = hertz_trace(params, prof, args.noise, args.seed)
    comments = [f"{k}={v}" for k, v in _settings(args).items() if k not in _IO_KEYS]
    if args.out:
        write_traces(args.out, force, disp, comments)
    else:
        write_traces(sys.stdout, force, disp, comments)
    return 0


def _write_text(path, text):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_cluster(args) -> int:
    recs = _read_dict_rows(args.input)
    if not recs:
        return _emit(args, {}, [{"error": "no points"}])
    cols = [c for c in recs[0] if c != "label"]
    pts = np.array([[float(r[c]) for c in cols] for r in recs])
    res = kmeans(pts, args.k, seed=args.seed, max_iter=args.max_iter)
    results = {
        "columns": cols,
        "assignments": res.assignments,
        "centroids": res.centroids,
        "sse": res.sse,
        "sse_history": list(res.history),
        "iterations": res.iterations,
    }
    if "label" in recs[0]:
        results["match_rate"] = match_rate([r["label"] for r in recs], res.assignments)
    return _emit(args, results, [])


def cmd_stats(args) -> int:
    recs = _read_dict_rows(args.input)
    if args.test == "spearman":
        x = [float(r["x"]) for r in recs]
        y = [float(r["y"]) for r in recs]
        return _emit(args, {"rho": spearman(x, y), "n": len(x)}, [])
    groups: dict[str, list[float]] = {}
    for r in recs:
        groups.setdefault(r["group"], []).append(float(r["value"]))
    if len(groups) != 2:
        return _emit(args, {}, [{"error": f"expected 2 groups, found {len(groups)}"}])
    (ga, a), (gb, b) = sorted(groups.items())
    mw = mann_whitney_u(a, b)
    results = {
        "groups": [ga, gb],
        "U": mw.U,
        "p": mw.p,
        "method": mw.method,
        "cohens_d": cohens_d(a, b),
        "mean_ci": {
            g: bootstrap_ci(v, iterations=args.iterations, seed=args.seed) for g, v in ((ga, a), (gb, b))
        },
    }
    return _emit(args, results, [])


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--window", type=int, default=100, help="moving-average window in samples")
    p.add_argument("--onset-fraction", type=float, default=0.05,
                   help="ramp onset as a fraction of the peak derivative")
    p.add_argument("--downsample", type=int, default=50, help="downsampling factor")
    p.add_argument("--jnd", type=float, default=0.10, help="Fréchet discrimination threshold")
    p.add_argument("--gain-threshold", type=float, default=0.10,
                   help="fraction of the maximum gain that marks recognition")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value file whose keys mirror the flags")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--no-timestamp", action="store_true", help="omit the report timestamp")
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="softcue", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    subs = {}

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        subs[name] = sp
        return sp

    sp = add("cues", cmd_cues, "per-trial cues and fused stiffness for a directory of traces")
    sp.add_argument("input", help="directory of <trial>.csv traces")
    sp.add_argument("--table", help="also write the cue table as CSV")

    sp = add("frechet-time", cmd_frechet_time, "differencing-rule discrimination time")
    sp.add_argument("--first", nargs="+", required=True, help="trial CSVs of the first stimulus")
    sp.add_argument("--second", nargs="+", required=True, help="trial CSVs of the second stimulus")
    sp.add_argument("--cue", choices=CUES, default="force")
    sp.add_argument("--mode", choices=("relative", "absolute"), default="relative")
    sp.add_argument("--profile", help="write the dissimilarity profile CSV here")

    sp = add("recognize-time", cmd_recognize_time, "independent-observation recognition time")
    sp.add_argument("inputs", nargs="+", help="trial CSVs of one stimulus")
    sp.add_argument("--meas-variance", type=float)
    sp.add_argument("--init-variance", type=float)
    sp.add_argument("--literal-posterior", action="store_true")
    sp.add_argument("--trajectory", help="write the gain trajectory CSV here")

    sp = add("dprime", cmd_dprime, "hit/false-alarm rates and d' per condition")
    sp.add_argument("input", help="CSV with condition,pair,truth,response")
    sp.add_argument("--correction", choices=("none", "half_trial"), default="none")

    sp = add("psychfit", cmd_psychfit, "maximum-likelihood psychometric function")
    sp.add_argument("input", help="CSV with level,n_correct,n_total")
    sp.add_argument("--guess", type=float, default=0.5)
    sp.add_argument("--max-lapse", type=float, default=0.1)
    sp.add_argument("--overdispersion", action="store_true")
    sp.add_argument("--curve", help="write the fitted curve CSV here")

    sp = add("skinfit", cmd_skinfit, "fit the skin modulus scale k")
    sp.add_argument("inputs", nargs="+", help="CSVs with d_mm,force_N")
    sp.add_argument("--area", type=float, default=DEFAULT_AREA, help="nominal contact area, mm^2")
    sp.add_argument("--thickness", type=float, nargs=3, default=list(DEFAULT_THICKNESS),
                    metavar=("EPI", "DERMIS", "HYPO"))
    sp.add_argument("--k-min", type=float, default=0.05)
    sp.add_argument("--k-max", type=float, default=50.0)

    sp = add("area", cmd_area, "ink-print contact area")
    sp.add_argument("input", help="CSV with x_px,y_px and a scale_bar_px line")
    sp.add_argument("--bar-cm", type=float, default=5.0)

    sp = add("synth", cmd_synth, "generate a synthetic exploration")
    sp.add_argument("--model", choices=("spring", "hertz", "skin"), default="spring")
    sp.add_argument("--profile", choices=("triangle", "ramp-hold"), default="triangle")
    sp.add_argument("--k", type=float, default=1.0, help="spring N/mm, or skin modulus scale")
    sp.add_argument("--rate", type=float, default=1.0, help="force rate, N/s")
    sp.add_argument("--peak", type=float, default=2.0, help="peak force, N")
    sp.add_argument("--sample-rate", type=float, default=1000.0, help="Hz")
    sp.add_argument("--baseline", type=float, default=0.0, help="ramp-hold baseline, s")
    sp.add_argument("--hold", type=float, default=0.0, help="ramp-hold plateau, s")
    sp.add_argument("--noise", type=float, default=0.0, help="relative Gaussian noise")
    sp.add_argument("--finger-modulus", type=float, default=100.0, help="kPa")
    sp.add_argument("--sphere-modulus", type=float, default=50.0, help="kPa")
    sp.add_argument("--radius", type=float, default=6.0, help="sphere radius, mm")
    sp.add_argument("--area", type=float, default=DEFAULT_AREA)
    sp.add_argument("--thickness", type=float, nargs=3, default=list(DEFAULT_THICKNESS))
    sp.add_argument("--max-displacement", type=float, default=3.5, help="skin model, mm")
    sp.add_argument("--points", type=int, default=36, help="skin model grid size")

    sp = add("cluster", cmd_cluster, "k-means partition and match rate")
    sp.add_argument("input", help="CSV of numeric columns, optional label column")
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--max-iter", type=int, default=300)

    sp = add("stats", cmd_stats, "two-group comparison or rank correlation")
    sp.add_argument("input", help="CSV with group,value (compare) or x,y (spearman)")
    sp.add_argument("--test", choices=("compare", "spearman"), default="compare")
    sp.add_argument("--iterations", type=int, default=1000)

    return parser, subs


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _apply_config(sp: argparse.ArgumentParser, config: dict[str, str]):
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in config.items():
        if key not in actions or key in ("config", "help"):
            raise ValueError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _parse_bool(raw)
            continue
        convert = action.type or str
        if action.nargs not in (None, "?"):
            defaults[key] = [convert(v) for v in raw.replace(",", " ").split()]
        else:
            defaults[key] = convert(raw)
        if action.choices is not None:
            vals = defaults[key] if isinstance(defaults[key], list) else [defaults[key]]
            if any(v not in action.choices for v in vals):
                raise ValueError(f"invalid value for {key}: {raw!r}")
        action.required = False
    sp.set_defaults(**defaults)


def _prescan(argv, commands):
    """Find the subcommand and ``--config`` path before the full parse."""
    command = config = None
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            config = next(it, None)
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        elif command is None and tok in commands:
            command = tok
    return command, config


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    command, config = _prescan(argv, subs)
    if command and config:
        try:
            _apply_config(subs[command], read_config(config))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SoftcueError, ValueError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
