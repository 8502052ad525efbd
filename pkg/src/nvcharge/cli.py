"""Command-line interface.

Commands: simulate, steady-state, map, curve, fit, refine, optimize, synth.
Powers are given in uW (green) and mW (IR) at the CLI boundary and converted
to SI immediately; every file the toolkit writes is in SI units.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. Failures
emit a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import (QuenchPoint, fit_quench_curves,
                       measure_quench_from_trace, read_quench_points_csv,
                       refine_by_trace_fit, synthesize, write_fit_report,
                       write_quench_points_csv)
from .dynamics import (Channel, PulseSegment, PulseSequence, Trace,
                       pl_signal, simulate_sequence, steady_state)
from .errors import ConfigError, NumericalError, NVChargeError
from .experiments import (NVProfile, PowerGrid, charge_population_curve,
                          nvm_fraction, optimize_ir_power,
                          steady_state_pl_map, write_curve_csv, write_map_csv,
                          write_map_sidecar)
from .levels import LevelIndex
from .params import CrossSectionSet, Profile, builtin_profile, load_profile
from .rates import build_rate_matrix

#: Default RNG seed for every stochastic command (synth); fixed so that
#: repeated runs with the same configuration are byte-identical.
DEFAULT_SEED = 20260823

_TIME_UNITS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3, "s": 1.0}


def _parse_window(text: str):
    """Parse 'A:Bus' (or ns/ms/s suffix) into (A, B) in seconds."""
    raw = text.strip()
    unit = 1.0
    for suffix, scale in sorted(_TIME_UNITS.items(), key=lambda kv: -len(kv[0])):
        if raw.endswith(suffix):
            raw, unit = raw[: -len(suffix)], scale
            break
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must look like '10:60us', got {text!r}")
    try:
        lo, hi = (float(p) * unit for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad window {text!r}: {exc}") from exc
    if not (0 <= lo < hi):
        raise ConfigError(f"window must satisfy 0 <= start < end, got {text!r}")
    return lo, hi


def _resolve_profile(spec: str) -> Profile:
    if spec in ("shallow", "bulk"):
        return builtin_profile(spec)
    return load_profile(spec)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(doc: dict):
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _write_json(path: Path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trace_to_doc(trace: Trace) -> dict:
    return {"time_s": trace.times_s.tolist(),
            "pl_nvm_hz": trace.pl_nvm_hz.tolist(),
            "pl_nv0_hz": trace.pl_nv0_hz.tolist(),
            "pl_nvm_norm": trace.pl_nvm_norm.tolist()}


def _ir_sequence(green_w: float, ir_w: float, window_s, total_s: float,
                 flat: bool = False) -> PulseSequence:
    """Green always on; IR on inside the window."""
    lo, hi = window_s
    if flat or ir_w == 0:
        return PulseSequence((PulseSegment(total_s, green_w, 0.0),))
    if hi >= total_s:
        raise ConfigError(
            f"IR window end {hi}s must lie before the total duration {total_s}s")
    return PulseSequence((PulseSegment(lo, green_w, 0.0),
                          PulseSegment(hi - lo, green_w, ir_w),
                          PulseSegment(total_s - hi, green_w, 0.0)))


def cmd_simulate(args) -> int:
    profile = _resolve_profile(args.profile)
    green_w = args.green_uw * 1e-6
    ir_w = args.ir_mw * 1e-3
    window = _parse_window(args.ir_window)
    total = args.duration_us * 1e-6 if args.duration_us else window[1] + 40e-6
    seq = _ir_sequence(green_w, ir_w, window, total, flat=(ir_w == 0))
    trace = simulate_sequence(profile.params, seq, dt_sample=args.dt_ns * 1e-9,
                              setup=profile.setup, store_populations=False)
    out = _out_dir(args)
    if args.format == "csv":
        path = out / "trace.csv"
        trace.write_csv(path)
    else:
        path = out / "trace.json"
        _write_json(path, _trace_to_doc(trace))
    _emit({"command": "simulate", "trace": str(path),
           "samples": int(trace.times_s.size),
           "profile": profile.label})
    return 0


def cmd_steady_state(args) -> int:
    profile = _resolve_profile(args.profile)
    m = build_rate_matrix(profile.params,
                          profile.setup.green(args.green_uw * 1e-6),
                          profile.setup.ir(args.ir_mw * 1e-3))
    p = steady_state(m)
    doc = {"command": "steady-state",
           "profile": profile.label,
           "green_power_w": args.green_uw * 1e-6,
           "ir_power_w": args.ir_mw * 1e-3,
           "populations": {lv.name.lower(): float(p[lv]) for lv in LevelIndex},
           "nvm_fraction": nvm_fraction(p),
           "pl_nvm_hz": pl_signal(p, profile.params, Channel.NVM),
           "pl_nv0_hz": pl_signal(p, profile.params, Channel.NV0)}
    path = _out_dir(args) / "steady_state.json"
    _write_json(path, doc)
    _emit(doc)
    return 0


def _grid_from_args(args) -> PowerGrid:
    return PowerGrid(
        tuple(np.geomspace(args.green_uw_min * 1e-6, args.green_uw_max * 1e-6,
                           args.n)),
        tuple(np.geomspace(args.ir_mw_min * 1e-3, args.ir_mw_max * 1e-3,
                           args.n)),
        scale="logarithmic")


def cmd_map(args) -> int:
    profile = _resolve_profile(args.profile)
    nv = NVProfile(profile.label, profile.params, profile.setup)
    grid = _grid_from_args(args)
    ratios = steady_state_pl_map(nv, grid)
    out = _out_dir(args)
    if args.format == "csv":
        path = out / "map.csv"
        write_map_csv(grid, ratios, path)
        write_map_sidecar(grid, profile.label, out / "map_grid.json")
    else:
        path = out / "map.json"
        _write_json(path, {"green_powers_w": list(grid.green_powers_w),
                           "ir_powers_w": list(grid.ir_powers_w),
                           "pl_ratio": ratios.tolist(),
                           "profile": profile.label})
    _emit({"command": "map", "map": str(path), "profile": profile.label,
           "max_ratio": float(ratios.max()), "min_ratio": float(ratios.min())})
    return 0


def cmd_curve(args) -> int:
    profile = _resolve_profile(args.profile)
    nv = NVProfile(profile.label, profile.params, profile.setup)
    greens = np.geomspace(args.green_uw_min * 1e-6, args.green_uw_max * 1e-6,
                          args.n)
    fractions, pl_ratio = charge_population_curve(nv, greens, args.ir_mw * 1e-3)
    out = _out_dir(args)
    if args.format == "csv":
        path = out / "curve.csv"
        write_curve_csv(greens, fractions, pl_ratio, path)
    else:
        path = out / "curve.json"
        _write_json(path, {"green_power_w": greens.tolist(),
                           "nvm_fraction": fractions.tolist(),
                           "pl_ratio": pl_ratio.tolist(),
                           "ir_power_w": args.ir_mw * 1e-3,
                           "profile": profile.label})
    _emit({"command": "curve", "curve": str(path), "profile": profile.label,
           "peak_fraction": float(fractions.max())})
    return 0


def _init_cross_sections(profile: Profile, scale: float) -> CrossSectionSet:
    return CrossSectionSet.from_array(profile.params.cross_sections.as_array()
                                      * scale)


def cmd_fit(args) -> int:
    profile = _resolve_profile(args.profile)
    points = read_quench_points_csv(args.points)
    init = _init_cross_sections(profile, args.init_scale)
    result = fit_quench_curves(points, profile.params, init,
                               setup=profile.setup)
    path = _out_dir(args) / "fit_report.json"
    write_fit_report(result, path)
    _emit({"command": "fit", "report": str(path),
           "converged": result.converged,
           "cross_sections_m2": {n: getattr(result.cross_sections, n)
                                 for n in CrossSectionSet.field_names()}})
    return 0


def cmd_refine(args) -> int:
    profile = _resolve_profile(args.profile)
    trace = Trace.read_csv(args.trace)
    window = _parse_window(args.ir_window)
    total = float(trace.times_s[-1]) + float(trace.times_s[1] - trace.times_s[0])
    seq = _ir_sequence(args.green_uw * 1e-6, args.ir_mw * 1e-3, window, total)
    init = _init_cross_sections(profile, args.init_scale)
    result = refine_by_trace_fit([(seq, trace)], init, profile.params,
                                 setup=profile.setup)
    path = _out_dir(args) / "refine_report.json"
    write_fit_report(result, path)
    _emit({"command": "refine", "report": str(path),
           "converged": result.converged,
           "cross_sections_m2": {n: getattr(result.cross_sections, n)
                                 for n in CrossSectionSet.field_names()}})
    return 0


def cmd_optimize(args) -> int:
    profile = _resolve_profile(args.profile)
    nv = NVProfile(profile.label, profile.params, profile.setup)
    opt = optimize_ir_power(nv, args.green_uw * 1e-6,
                            (args.ir_min_mw * 1e-3, args.ir_max_mw * 1e-3))
    doc = {"command": "optimize", "profile": profile.label,
           "green_power_w": args.green_uw * 1e-6,
           "ir_power_w": opt.ir_power_w,
           "nvm_fraction": opt.nvm_fraction,
           "flat_objective": opt.flat_objective}
    path = _out_dir(args) / "optimize.json"
    _write_json(path, doc)
    _emit(doc)
    return 0


def _csv_floats(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad power list {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError("power list is empty")
    return vals


def cmd_synth(args) -> int:
    """Generate a synthetic quench-point dataset.

    For every (green, IR) pair a full trace is synthesized with multiplicative
    PL noise, and the quench ratio is measured from the trace exactly as it
    would be from data: QSS-window mean over pre-IR mean, in both channels.
    """
    profile = _resolve_profile(args.profile)
    greens = _csv_floats(args.green_uw)
    irs = _csv_floats(args.ir_mw)
    pre_s = 2e-6
    # window starts after both PL channels reach their fast quasi-steady
    # state (slowest corner ~40 ns time constant) but well before charge
    # populations move
    win = (pre_s + 100e-9, pre_s + 160e-9)
    dt = 1e-9
    n_pre = int(round(pre_s / dt))
    n_win = int(round((win[1] - win[0]) / dt)) + 1
    # standard error of a ratio of two window means under i.i.d. relative
    # noise, plus a flat budget for the quasi-steady-state approximation
    # (finite window: residual fast transients and early charge drift)
    qss_systematic = 0.004
    rel_se = float(np.hypot(
        args.relative_sigma * np.sqrt(1.0 / n_win + 1.0 / n_pre),
        qss_systematic))
    points = []
    for i, g_uw in enumerate(greens):
        for j, ir_mw in enumerate(irs):
            seq = PulseSequence((PulseSegment(pre_s, g_uw * 1e-6, 0.0),
                                 PulseSegment(1e-6, g_uw * 1e-6, ir_mw * 1e-3)))
            trace = synthesize(profile.params, seq,
                               relative_sigma=args.relative_sigma,
                               seed=args.seed + 1000 * i + j, dt_sample=dt,
                               setup=profile.setup)
            for ch in (Channel.NVM, Channel.NV0):
                ratio = measure_quench_from_trace(trace, pre_s, win, ch)
                points.append(QuenchPoint(g_uw * 1e-6, ir_mw * 1e-3, ratio,
                                          ratio * rel_se, ch))
    out = _out_dir(args)
    if args.format == "csv":
        path = out / "quench_points.csv"
        write_quench_points_csv(points, path)
    else:
        path = out / "quench_points.json"
        _write_json(path, [{"green_power_w": p.green_power_w,
                            "ir_power_w": p.ir_power_w,
                            "channel": p.channel.value, "ratio": p.ratio,
                            "ratio_sigma": p.ratio_sigma} for p in points])
    _emit({"command": "synth", "points": str(path), "n_points": len(points),
           "seed": args.seed, "relative_sigma": args.relative_sigma})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvcharge",
        description="NV charge-state photodynamics: simulation and "
                    "cross-section estimation")
    parser.add_argument("--profile", default="shallow",
                        help="builtin profile name (shallow|bulk) or a JSON "
                             "profile path")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="RNG seed for stochastic commands")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output file format")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a green+IR pulse sequence")
    p.add_argument("--green-uw", type=float, required=True)
    p.add_argument("--ir-mw", type=float, required=True)
    p.add_argument("--ir-window", default="10:60us",
                   help="IR on/off times, e.g. 10:60us")
    p.add_argument("--duration-us", type=float, default=None,
                   help="total trace length (default: window end + 40 us)")
    p.add_argument("--dt-ns", type=float, default=2.0, help="sample step")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("steady-state", help="stationary populations and PL")
    p.add_argument("--green-uw", type=float, required=True)
    p.add_argument("--ir-mw", type=float, default=0.0)
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("map", help="steady-state PL-ratio power map")
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--green-uw-min", type=float, default=10.0)
    p.add_argument("--green-uw-max", type=float, default=1000.0)
    p.add_argument("--ir-mw-min", type=float, default=1.0)
    p.add_argument("--ir-mw-max", type=float, default=100.0)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("curve", help="NV- fraction vs green power")
    p.add_argument("--ir-mw", type=float, required=True)
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--green-uw-min", type=float, default=10.0)
    p.add_argument("--green-uw-max", type=float, default=1000.0)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("fit", help="fit cross-sections to quench points")
    p.add_argument("--points", required=True, help="quench-point CSV")
    p.add_argument("--init-scale", type=float, default=1.0,
                   help="multiply the profile cross-sections for the "
                        "fit starting point")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("refine", help="refine cross-sections against a trace")
    p.add_argument("--trace", required=True, help="trace CSV")
    p.add_argument("--green-uw", type=float, required=True)
    p.add_argument("--ir-mw", type=float, required=True)
    p.add_argument("--ir-window", default="10:60us")
    p.add_argument("--init-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("optimize", help="IR power maximizing the NV- fraction")
    p.add_argument("--green-uw", type=float, required=True)
    p.add_argument("--ir-min-mw", type=float, default=0.0)
    p.add_argument("--ir-max-mw", type=float, default=100.0)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("synth", help="generate a synthetic quench dataset")
    p.add_argument("--green-uw", required=True,
                   help="comma-separated green powers in uW")
    p.add_argument("--ir-mw", required=True,
                   help="comma-separated IR powers in mW")
    p.add_argument("--relative-sigma", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    return parser


def _error_record(exc: Exception, code: int):
    json.dump({"error": type(exc).__name__, "message": str(exc),
               "exit_code": code}, sys.stderr, sort_keys=True)
    sys.stderr.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _error_record(exc, 2)
        return 2
    except NumericalError as exc:
        _error_record(exc, 3)
        return 3
    except NVChargeError as exc:  # pragma: no cover - safety net
        _error_record(exc, 3)
        return 3


if __name__ == "__main__":
    sys.exit(main())
