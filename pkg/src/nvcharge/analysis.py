"""Closed-form quench ratios, cross-section estimation, and synthetic data.

The quench ratio is the quasi-steady-state PL reached on the fast (ns)
timescale after an IR power step, divided by the prior steady-state PL. For
the NV- channel it is (K_f + K_s + K_iG) / (K_f + K_s + K_iG + K_iIR) and for
the NV0 channel (K_f0 + K_rG) / (K_f0 + K_rG + K_rIR), valid while the ground
populations have not yet drifted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .dynamics import (GREEN_STEADY_STATE, Channel, PulseSequence, Trace,
                       fmt9, green_only_steady_state, simulate_sequence)
from .errors import (ConfigError, DegenerateSteadyStateError,
                     NonConvergenceError, ParameterAtBoundError,
                     RankDeficientError)
from .levels import LevelIndex
from .params import (CrossSectionSet, LaserField, OpticalSetup,
                     PhotophysicsParams)
from .rates import photon_rate

_SIGMA_NAMES = CrossSectionSet.field_names()
_DEFAULT_BOUNDS = (1e-26, 1e-16)


@dataclass(frozen=True)
class QuenchPoint:
    green_power_w: float
    ir_power_w: float
    ratio: float
    ratio_sigma: float
    channel: Channel

    def __post_init__(self):
        if not (self.ratio > 0):
            raise ConfigError(f"quench ratio must be > 0, got {self.ratio}")
        if self.ratio_sigma < 0:
            raise ConfigError("ratio_sigma must be >= 0")
        if self.green_power_w < 0 or self.ir_power_w < 0:
            raise ConfigError("powers must be >= 0")


@dataclass(frozen=True)
class FitResult:
    cross_sections: CrossSectionSet
    std_errors: CrossSectionSet   # 0 for parameters held fixed
    residual_norm: float
    iterations: int
    converged: bool


def effective_isc_rate(params: PhotophysicsParams, green: LaserField,
                       setup: OpticalSetup = OpticalSetup()) -> float:
    """Spin-population-weighted ISC rate at the green-only steady state.

    The model has two ISC rates but the quench formulas use a single K_s;
    the weight is the m_s=0 share of the excited-state population. Without a
    unique green-only steady state (zero green power) the weight falls back
    to the low-power perturbative limit from statistically populated ground
    manifolds.
    """
    try:
        p = green_only_steady_state(params, green.power_w, setup)
        e0 = p[LevelIndex.NVM_EXCITED_MS0]
        e1 = p[LevelIndex.NVM_EXCITED_MS1]
        tot = e0 + e1
        if tot > 1e-300:
            w = e0 / tot
            return w * params.k_isc_ms0 + (1.0 - w) * params.k_isc_ms1
    except DegenerateSteadyStateError:
        pass
    k_ig = photon_rate(params.cross_sections.sigma_ionize_green_m2, green)
    den0 = params.k_fluor_minus + params.k_isc_ms0 + k_ig
    den1 = params.k_fluor_minus + params.k_isc_ms1 + k_ig
    a0 = (1.0 / 3.0) / den0
    a1 = (2.0 / 3.0) / den1
    w = a0 / (a0 + a1)
    return w * params.k_isc_ms0 + (1.0 - w) * params.k_isc_ms1


def qss_quench_ratio_nvm(params: PhotophysicsParams, green: LaserField,
                         ir: LaserField,
                         setup: OpticalSetup = OpticalSetup()) -> float:
    """NV- channel fast-quench ratio; in (0, 1], equal to 1 iff no IR ionization."""
    cs = params.cross_sections
    k_ig = photon_rate(cs.sigma_ionize_green_m2, green)
    k_iir = photon_rate(cs.sigma_ionize_ir_m2, ir)
    k_s = effective_isc_rate(params, green, setup)
    base = params.k_fluor_minus + k_s + k_ig
    if not (base > 0):
        raise ConfigError("K_f + K_s + K_iG must be > 0")
    return base / (base + k_iir)


def qss_quench_ratio_nv0(params: PhotophysicsParams, green: LaserField,
                         ir: LaserField,
                         setup: OpticalSetup = OpticalSetup()) -> float:
    """NV0 channel fast-quench ratio; in (0, 1], equal to 1 iff no IR recombination."""
    cs = params.cross_sections
    k_rg = photon_rate(cs.sigma_recombine_green_m2, green)
    k_rir = photon_rate(cs.sigma_recombine_ir_m2, ir)
    base = params.k_fluor_zero + k_rg
    if not (base > 0):
        raise ConfigError("K_f0 + K_rG must be > 0")
    return base / (base + k_rir)


def measure_quench_from_trace(trace: Trace, ir_on_time_s: float,
                              qss_window_s, channel: Channel = Channel.NVM) -> float:
    """Empirical quench ratio: mean PL in the QSS window over mean pre-IR PL."""
    lo, hi = qss_window_s
    if not (lo < hi):
        raise ConfigError(f"qss window must be ordered, got ({lo}, {hi})")
    if lo < ir_on_time_s:
        raise ConfigError("qss window must start at or after the IR-on time")
    pl = trace.pl_nvm_hz if channel is Channel.NVM else trace.pl_nv0_hz
    pre = pl[trace.times_s < ir_on_time_s]
    win = pl[(trace.times_s >= lo) & (trace.times_s <= hi)]
    if pre.size == 0:
        raise ConfigError("no samples before the IR-on time")
    if win.size == 0:
        raise ConfigError("no samples inside the qss window")
    base = pre.mean()
    if base <= 0:
        raise ConfigError("pre-IR PL is zero; quench ratio undefined")
    return float(win.mean() / base)


def _log_bounds(bounds):
    lo, hi = bounds if bounds is not None else _DEFAULT_BOUNDS
    if not (0 < lo < hi):
        raise ConfigError(f"bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")
    return math.log(lo), math.log(hi)


def _finish_fit(res, free_idx, init: CrossSectionSet, weighted: bool,
                n_points: int) -> FitResult:
    if res.status <= 0:
        raise NonConvergenceError(f"least-squares did not converge: {res.message}")
    sv = np.linalg.svd(res.jac, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficientError(
            "fit Jacobian is rank deficient; the requested cross-sections are "
            "not separable from these points")
    jtj = res.jac.T @ res.jac
    cov = np.linalg.inv(jtj)
    n_free = len(free_idx)
    if not weighted:
        dof = max(n_points - n_free, 1)
        cov = cov * (2.0 * res.cost / dof)
    se_log = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    values = init.as_array()
    errors = np.zeros(4)
    values[list(free_idx)] = np.exp(res.x)
    errors[list(free_idx)] = values[list(free_idx)] * se_log
    return FitResult(cross_sections=CrossSectionSet.from_array(values),
                     std_errors=CrossSectionSet.from_array(errors),
                     residual_norm=float(np.linalg.norm(res.fun)),
                     iterations=int(res.nfev), converged=True)


def _check_at_bound(res, log_lo, log_hi):
    tol = 1e-8
    if np.any(res.x <= log_lo + tol) or np.any(res.x >= log_hi - tol):
        raise ParameterAtBoundError(
            "a fitted cross-section sits on its bound; widen the bounds or "
            "revisit the initialization")


def fit_quench_curves(points, fixed: PhotophysicsParams, init: CrossSectionSet,
                      bounds=None, setup: OpticalSetup = OpticalSetup()) -> FitResult:
    """Weighted least squares of the closed-form quench ratios.

    Points from the NV- channel constrain the ionization pair, NV0 points the
    recombination pair; channels may be supplied together for a joint fit.
    Cross-sections are fit in log space (they span two decades and must stay
    positive). Weights are inverse-variance when every point carries a
    ratio_sigma, uniform otherwise.
    """
    points = list(points)
    if not points:
        raise ConfigError("no quench points supplied")
    channels = {pt.channel for pt in points}
    free_idx = []
    if Channel.NVM in channels:
        free_idx += [0, 1]
    if Channel.NV0 in channels:
        free_idx += [2, 3]
    for ch, label in ((Channel.NVM, "NV-"), (Channel.NV0, "NV0")):
        greens = {pt.green_power_w for pt in points if pt.channel is ch}
        if greens and len(greens) < 2:
            raise RankDeficientError(
                f"{label} channel has a single green power; green and IR "
                "cross-sections are not separable")

    weighted = all(pt.ratio_sigma > 0 for pt in points)
    w = np.array([1.0 / pt.ratio_sigma if weighted else 1.0 for pt in points])
    init_arr = init.as_array()
    log_lo, log_hi = _log_bounds(bounds)
    x0 = np.clip(np.log(np.clip(init_arr[free_idx], 1e-300, None)),
                 log_lo, log_hi)

    greens_cache = [setup.green(pt.green_power_w) for pt in points]
    irs_cache = [setup.ir(pt.ir_power_w) for pt in points]

    def residuals(x):
        vals = init_arr.copy()
        vals[free_idx] = np.exp(x)
        params = fixed.with_cross_sections(CrossSectionSet.from_array(vals))
        ks_cache = {}
        out = np.empty(len(points))
        for i, pt in enumerate(points):
            if pt.channel is Channel.NVM:
                ks = ks_cache.get(pt.green_power_w)
                if ks is None:
                    ks = effective_isc_rate(params, greens_cache[i], setup)
                    ks_cache[pt.green_power_w] = ks
                base = params.k_fluor_minus + ks + photon_rate(
                    params.cross_sections.sigma_ionize_green_m2, greens_cache[i])
                model = base / (base + photon_rate(
                    params.cross_sections.sigma_ionize_ir_m2, irs_cache[i]))
            else:
                base = params.k_fluor_zero + photon_rate(
                    params.cross_sections.sigma_recombine_green_m2, greens_cache[i])
                model = base / (base + photon_rate(
                    params.cross_sections.sigma_recombine_ir_m2, irs_cache[i]))
            out[i] = w[i] * (model - pt.ratio)
        return out

    res = least_squares(residuals, x0, jac="3-point", diff_step=1e-6,
                        method="trf", bounds=(log_lo, log_hi),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    _check_at_bound(res, log_lo, log_hi)
    return _finish_fit(res, free_idx, init, weighted, len(points))


def refine_by_trace_fit(trace_data, init, fixed: PhotophysicsParams,
                        bounds=None, setup: OpticalSetup = OpticalSetup()) -> FitResult:
    """Fine-tune all four cross-sections against full time traces.

    `trace_data` is a sequence of (PulseSequence, Trace) pairs with known
    laser programs; the objective is the summed squared mismatch of both PL
    channels (each normalized by the observed channel mean) between the
    simulated and provided traces.
    """
    trace_data = list(trace_data)
    if not trace_data:
        raise ConfigError("no traces supplied")
    init_cs = init.cross_sections if isinstance(init, FitResult) else init
    free_idx = [0, 1, 2, 3]
    log_lo, log_hi = _log_bounds(bounds)
    x0 = np.clip(np.log(np.clip(init_cs.as_array(), 1e-300, None)),
                 log_lo, log_hi)

    scales = []
    for seq, trace in trace_data:
        if trace.times_s.size < 2:
            raise ConfigError("each trace needs at least two samples")
        s_nvm = trace.pl_nvm_hz.mean()
        s_nv0 = trace.pl_nv0_hz.mean()
        scales.append((s_nvm if s_nvm > 0 else 1.0, s_nv0 if s_nv0 > 0 else 1.0))

    def residuals(x):
        params = fixed.with_cross_sections(CrossSectionSet.from_array(np.exp(x)))
        parts = []
        for (seq, trace), (s_nvm, s_nv0) in zip(trace_data, scales):
            dt = trace.times_s[1] - trace.times_s[0]
            sim = simulate_sequence(params, seq, GREEN_STEADY_STATE, dt,
                                    setup=setup, store_populations=False)
            n = min(sim.times_s.size, trace.times_s.size)
            parts.append((sim.pl_nvm_hz[:n] - trace.pl_nvm_hz[:n]) / s_nvm)
            parts.append((sim.pl_nv0_hz[:n] - trace.pl_nv0_hz[:n]) / s_nv0)
        return np.concatenate(parts)

    res = least_squares(residuals, x0, jac="3-point", diff_step=1e-6,
                        method="trf", bounds=(log_lo, log_hi),
                        xtol=1e-12, ftol=1e-12, gtol=1e-12)
    _check_at_bound(res, log_lo, log_hi)
    n_points = sum(2 * t.times_s.size for _, t in trace_data)
    return _finish_fit(res, free_idx, init_cs, weighted=False, n_points=n_points)


def synthesize(params: PhotophysicsParams, seq: PulseSequence,
               relative_sigma: float = 0.0, seed: int = 0,
               dt_sample: float = 1e-9, setup: OpticalSetup = OpticalSetup(),
               p_init=GREEN_STEADY_STATE) -> Trace:
    """simulate_sequence plus i.i.d. multiplicative Gaussian PL noise.

    Bit-reproducible for a fixed seed; relative_sigma=0 returns the clean
    trace unchanged.
    """
    if relative_sigma < 0:
        raise ConfigError("relative_sigma must be >= 0")
    trace = simulate_sequence(params, seq, p_init, dt_sample, setup=setup)
    if relative_sigma == 0:
        return trace
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((trace.times_s.size, 2))
    nvm = np.clip(trace.pl_nvm_hz * (1.0 + relative_sigma * g[:, 0]), 0.0, None)
    nv0 = np.clip(trace.pl_nv0_hz * (1.0 + relative_sigma * g[:, 1]), 0.0, None)
    ref = trace.ref_pl_nvm_hz
    norm = nvm / ref if np.isfinite(ref) and ref > 0 else trace.pl_nvm_norm
    return Trace(trace.times_s, nvm, nv0, norm, populations=trace.populations,
                 ref_pl_nvm_hz=ref)


_QUENCH_HEADER = ["green_power_w", "ir_power_w", "channel", "ratio", "ratio_sigma"]


def write_quench_points_csv(points, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_QUENCH_HEADER)
        for pt in points:
            w.writerow([fmt9(pt.green_power_w), fmt9(pt.ir_power_w),
                        pt.channel.value, fmt9(pt.ratio), fmt9(pt.ratio_sigma)])


def read_quench_points_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != _QUENCH_HEADER:
            raise ConfigError(f"unexpected quench-point header in {path}")
        points = []
        for row in r:
            if not row:
                continue
            points.append(QuenchPoint(float(row[0]), float(row[1]),
                                      channel=Channel(row[2]),
                                      ratio=float(row[3]),
                                      ratio_sigma=float(row[4])))
    return points


def fit_result_to_dict(result: FitResult) -> dict:
    return {
        "estimates": {n: getattr(result.cross_sections, n) for n in _SIGMA_NAMES},
        "std_errors": {n: getattr(result.std_errors, n) for n in _SIGMA_NAMES},
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def write_fit_report(result: FitResult, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fit_report(path) -> FitResult:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return FitResult(
        cross_sections=CrossSectionSet(**doc["estimates"]),
        std_errors=CrossSectionSet(**doc["std_errors"]),
        residual_norm=float(doc["residual_norm"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]))
