#!/usr/bin/env python3
"""Calibration search that produced the shipped default profiles.

The ionization/recombination cross-sections are measured quantities, but the
internal NV rates (excitation per power, radiative rates, ISC, singlet decay
and branching) come from external literature and are only loosely pinned.
This script scans that internal-rate space for a profile that reproduces the
target phenomenology:

  * shallow green-only NV- fraction saturating near 0.63,
  * shallow NV- fraction near 0.78 with IR power optimized,
  * bulk NV- fraction near 0.87 with IR power optimized,
  * >= 0.10 absolute IR enhancement at each curve's peak,
  * PL enhancement at (159 uW, 38 mW) and suppression at (241 uW, 38 mW),
  * fast quench << 30 ns and slow charge relaxation on a us timescale,
  * power-map dichotomy: shallow shows enhancement and suppression cells,
    bulk only suppression.

Run:  python scripts/tune_default_profile.py [n_samples]
"""

import json
import sys

import numpy as np

from nvcharge import (Channel, CrossSectionSet, OpticalSetup,
                      PhotophysicsParams, build_rate_matrix, evolve,
                      nvm_fraction, photon_rate, pl_signal, steady_state)
from nvcharge.analysis import effective_isc_rate, qss_quench_ratio_nvm

TABLE1 = CrossSectionSet(6.25e-20, 1.76e-22, 9.83e-21, 4.66e-22)
BULK_SIGMA_IG = 0.95e-21
SETUP = OpticalSetup()

GREENS = np.geomspace(10e-6, 1e-3, 9)
IRS = np.geomspace(1e-3, 100e-3, 9)


def make_params(x, bulk=False):
    ke, r, isc0, isc1, ksdec, bs, kf0 = x
    cs = TABLE1
    if bulk:
        cs = CrossSectionSet(BULK_SIGMA_IG, cs.sigma_ionize_ir_m2,
                             cs.sigma_recombine_green_m2, cs.sigma_recombine_ir_m2)
    return PhotophysicsParams(
        k_excite_minus_per_w=ke * 1e9, k_excite_zero_per_w=r * ke * 1e9,
        k_fluor_minus=66e6, k_fluor_zero=kf0 * 1e6,
        k_isc_ms0=isc0 * 1e6, k_isc_ms1=isc1 * 1e6,
        k_singlet_decay=ksdec * 1e6, singlet_branch_ms0=bs,
        cross_sections=cs)


def frac(params, g, ir):
    m = build_rate_matrix(params, SETUP.green(g), SETUP.ir(ir))
    return nvm_fraction(steady_state(m))


def pl(params, g, ir):
    m = build_rate_matrix(params, SETUP.green(g), SETUP.ir(ir))
    return pl_signal(steady_state(m), params, Channel.NVM)


def closed_form_error(params):
    """Worst |closed-form quench ratio - QSS ratio| over the validation grid.

    The QSS ratio is evaluated 40 ns after an IR step from the green-only
    steady state (exact propagation); cells whose NV- fraction drifts more
    than 0.5% absolute across the 20-60 ns window are skipped, matching the
    agreement criterion the formulas are held to.
    """
    worst = 0.0
    for g in np.geomspace(10e-6, 300e-6, 6):
        m0 = build_rate_matrix(params, SETUP.green(g), SETUP.ir(0.0))
        p0 = steady_state(m0)
        ref = pl_signal(p0, params, Channel.NVM)
        for ir in np.geomspace(1e-3, 50e-3, 6):
            m1 = build_rate_matrix(params, SETUP.green(g), SETUP.ir(ir))
            p20 = evolve(m1, p0, 20e-9)
            p60 = evolve(m1, p20, 40e-9)
            if abs(nvm_fraction(p60) - nvm_fraction(p20)) > 0.005:
                continue
            p40 = evolve(m1, p20, 20e-9)
            meas = pl_signal(p40, params, Channel.NVM) / ref
            cf = qss_quench_ratio_nvm(params, SETUP.green(g), SETUP.ir(ir), SETUP)
            worst = max(worst, abs(meas - cf))
    return worst


def observables(x):
    sh = make_params(x)
    bu = make_params(x, bulk=True)
    obs = {}
    obs["shallow_sat"] = frac(sh, 1e-3, 0.0)
    # curve peaks with IR optimized on the coarse grid
    best_sh, best_bu = 0.0, 0.0
    enh_sh, enh_bu = -1.0, -1.0
    for g in GREENS:
        f0s, f0b = frac(sh, g, 0.0), frac(bu, g, 0.0)
        fs = max(frac(sh, g, ir) for ir in IRS)
        fb = max(frac(bu, g, ir) for ir in IRS)
        if fs > best_sh:
            best_sh, enh_sh = fs, fs - f0s
        if fb > best_bu:
            best_bu, enh_bu = fb, fb - f0b
    obs["shallow_peak"], obs["shallow_enh"] = best_sh, enh_sh
    obs["bulk_peak"], obs["bulk_enh"] = best_bu, enh_bu
    # IR = 0 is always admissible when optimizing, so the bulk curve peak is
    # at least the best green-only fraction; keep it inside its window
    obs["bulk_f0_max"] = max(frac(bu, g, 0.0) for g in GREENS)
    # steady-state PL enhancement/suppression branches
    obs["pl_ratio_159"] = pl(sh, 159e-6, 38e-3) / pl(sh, 159e-6, 0.0)
    obs["pl_ratio_241"] = pl(sh, 241e-6, 38e-3) / pl(sh, 241e-6, 0.0)
    # timescales at (159 uW, 38 mW)
    ks = effective_isc_rate(sh, SETUP.green(159e-6), SETUP)
    fast = sh.k_fluor_minus + ks + photon_rate(TABLE1.sigma_ionize_green_m2, SETUP.green(159e-6)) \
        + photon_rate(TABLE1.sigma_ionize_ir_m2, SETUP.ir(38e-3))
    obs["quench_time_ns"] = 3.0 / fast * 1e9
    m = build_rate_matrix(sh, SETUP.green(159e-6), SETUP.ir(38e-3))
    ev = np.sort(np.abs(np.real(np.linalg.eigvals(m))))
    obs["slow_tau_us"] = 1.0 / ev[1] * 1e6
    # map dichotomy on the coarse grid
    sh_vals, bu_vals = [], []
    for g in GREENS:
        p0s, p0b = pl(sh, g, 0.0), pl(bu, g, 0.0)
        for ir in IRS:
            sh_vals.append(pl(sh, g, ir) / p0s)
            bu_vals.append(pl(bu, g, ir) / p0b)
    obs["shallow_map_max"] = max(sh_vals)
    obs["shallow_map_min"] = min(sh_vals)
    obs["bulk_map_max"] = max(bu_vals)
    obs["cf_err"] = closed_form_error(sh)
    obs["isc_contrast"] = x[3] / x[2]
    return obs


def score(obs):
    pen = 0.0
    pen += ((obs["shallow_sat"] - 0.63) / 0.05) ** 2
    pen += ((obs["shallow_peak"] - 0.78) / 0.05) ** 2
    pen += ((obs["bulk_peak"] - 0.87) / 0.05) ** 2
    pen += max(0.0, (0.15 - obs["shallow_enh"]) / 0.05) ** 2
    pen += max(0.0, (0.15 - obs["bulk_enh"]) / 0.05) ** 2
    pen += max(0.0, (1.03 - obs["pl_ratio_159"]) / 0.02) ** 2
    pen += max(0.0, (obs["pl_ratio_241"] - 0.97) / 0.02) ** 2
    # hard sign requirements: enhancement at 159 uW, suppression at 241 uW
    pen += max(0.0, (1.005 - obs["pl_ratio_159"]) / 0.002) ** 2
    pen += max(0.0, (obs["pl_ratio_241"] - 0.995) / 0.002) ** 2
    pen += max(0.0, obs["quench_time_ns"] - 25.0) ** 2
    tau = obs["slow_tau_us"]
    pen += max(0.0, 0.5 - tau) ** 2 + max(0.0, (tau - 20.0) / 10) ** 2
    pen += max(0.0, (1.02 - obs["shallow_map_max"]) / 0.01) ** 2
    pen += max(0.0, (obs["shallow_map_min"] - 0.98) / 0.01) ** 2
    pen += max(0.0, (obs["bulk_map_max"] - 1.0) / 1e-3) ** 2
    pen += max(0.0, (obs["cf_err"] - 0.006) / 0.001) ** 2
    # keep the ISC spin-selective (readout contrast comes from it)
    pen += max(0.0, (8.0 - obs["isc_contrast"]) / 0.5) ** 2
    pen += max(0.0, (obs["bulk_f0_max"] - 0.958) / 0.002) ** 2
    # hard window edges for the population targets
    pen += max(0.0, (0.70 - obs["shallow_peak"]) / 0.005) ** 2
    pen += max(0.0, (0.56 - obs["shallow_sat"]) / 0.005) ** 2
    return pen


BOUNDS = [
    ("ke_mhz_per_mw", 0.5, 60.0, True),
    ("r_ke0_over_kem", 0.3, 4.0, True),
    ("k_isc0_mhz", 0.3, 15.0, True),
    ("k_isc1_mhz", 8.0, 60.0, True),
    ("k_singlet_mhz", 0.3, 5.0, True),
    ("singlet_branch", 0.3, 1.0, False),
    ("k_fluor0_mhz", 15.0, 80.0, False),
]


def sample(rng):
    x = []
    for _, lo, hi, logspace in BOUNDS:
        u = rng.random()
        x.append(np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo))) if logspace
                 else lo + u * (hi - lo))
    return x


def polish(x0):
    """Nelder-Mead refinement of the best random candidate (the shipped
    profile is the polished result, so the raw values fall slightly outside
    round numbers)."""
    from scipy.optimize import minimize

    def objective(x):
        if any(v <= 0 for v in x) or not 0.0 < x[5] < 1.0:
            return 1e6
        try:
            return score(observables(x))
        except Exception:
            return 1e6

    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"maxiter": 2000, "xatol": 1e-4, "fatol": 1e-6})
    return list(res.x), res.fun


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    rng = np.random.default_rng(20260823)
    results = []
    for i in range(n):
        x = sample(rng)
        try:
            obs = observables(x)
        except Exception:
            continue
        results.append((score(obs), x, obs))
        if (i + 1) % 50 == 0:
            results.sort(key=lambda t: t[0])
            print(f"[{i+1}/{n}] best score {results[0][0]:.3f}", flush=True)
    results.sort(key=lambda t: t[0])
    for s, x, obs in results[:5]:
        print("score", round(s, 3))
        print("  x:", json.dumps(dict(zip([b[0] for b in BOUNDS],
                                          [round(v, 4) for v in x]))))
        print("  obs:", json.dumps({k: round(v, 4) for k, v in obs.items()}))
    x_best, s_best = polish(results[0][1])
    print("polished score", round(s_best, 4))
    print("  x:", json.dumps(dict(zip([b[0] for b in BOUNDS],
                                      [round(v, 6) for v in x_best]))))
    print("  obs:", json.dumps({k: round(v, 4)
                                for k, v in observables(x_best).items()}))


if __name__ == "__main__":
    main()
