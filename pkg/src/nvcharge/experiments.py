"""Steady-state power maps, charge-population curves, and IR optimization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Channel, fmt9, pl_signal, steady_state
from .errors import ConfigError
from .levels import NVM_LEVELS
from .params import OpticalSetup, PhotophysicsParams
from .rates import build_rate_matrix

NVM_IDX = [int(i) for i in NVM_LEVELS]


@dataclass(frozen=True)
class PowerGrid:
    green_powers_w: tuple
    ir_powers_w: tuple
    scale: str = "logarithmic"

    def __post_init__(self):
        for name in ("green_powers_w", "ir_powers_w"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) == 0:
                raise ConfigError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
            if self.scale == "logarithmic" and vals[0] <= 0:
                raise ConfigError(f"{name} must be positive on a logarithmic scale")
        if self.scale not in ("linear", "logarithmic"):
            raise ConfigError(f"scale must be linear or logarithmic, got {self.scale!r}")


def default_power_grid(n: int = 25) -> PowerGrid:
    """Green 10 uW - 1 mW, IR 1 - 100 mW, log spaced."""
    return PowerGrid(tuple(np.geomspace(10e-6, 1e-3, n)),
                     tuple(np.geomspace(1e-3, 100e-3, n)),
                     scale="logarithmic")


@dataclass(frozen=True)
class NVProfile:
    """Named parameter set; bulk differs from shallow only in the green
    ionization cross-section (reduced ~85% for bulk NVs)."""

    label: str
    params: PhotophysicsParams
    setup: OpticalSetup = field(default_factory=OpticalSetup)


def _steady(profile: NVProfile, green_w: float, ir_w: float) -> np.ndarray:
    m = build_rate_matrix(profile.params, profile.setup.green(green_w),
                          profile.setup.ir(ir_w))
    return steady_state(m)


def nvm_fraction(p) -> float:
    """Total NV- population: sum over its five levels (spin-blind)."""
    return float(np.sum(np.asarray(p)[NVM_IDX]))


def steady_state_pl_map(profile: NVProfile, grid: PowerGrid) -> np.ndarray:
    """NV--channel steady-state PL with both lasers, normalized by green only.

    Rows index green powers, columns IR powers.
    """
    out = np.empty((len(grid.green_powers_w), len(grid.ir_powers_w)))
    for i, g in enumerate(grid.green_powers_w):
        ref = pl_signal(_steady(profile, g, 0.0), profile.params, Channel.NVM)
        for j, ir in enumerate(grid.ir_powers_w):
            pl = pl_signal(_steady(profile, g, ir), profile.params, Channel.NVM)
            out[i, j] = pl / ref
    return out


def charge_population_curve(profile: NVProfile, green_powers_w, ir_power_w: float):
    """Steady-state NV- fraction (and PL ratio) along a green-power sweep."""
    fractions = np.empty(len(green_powers_w))
    pl_ratio = np.empty(len(green_powers_w))
    for i, g in enumerate(green_powers_w):
        p = _steady(profile, g, ir_power_w)
        fractions[i] = nvm_fraction(p)
        ref = pl_signal(_steady(profile, g, 0.0), profile.params, Channel.NVM)
        pl_ratio[i] = pl_signal(p, profile.params, Channel.NVM) / ref
    return fractions, pl_ratio


@dataclass(frozen=True)
class IROptimum:
    ir_power_w: float
    nvm_fraction: float
    flat_objective: bool


def _golden_section_max(f, lo, hi, rel_tol=1e-3):
    """Golden-section search for the maximum of a unimodal scalar function."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(hi), 1e-30):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def optimize_ir_power(profile: NVProfile, green_power_w: float,
                      ir_search_range_w, n_scan: int = 33) -> IROptimum:
    """Maximize the steady-state NV- fraction over IR power.

    A coarse log-spaced scan brackets the best candidate; golden-section
    search refines it. IR = 0 is always an admissible candidate, so the
    returned fraction never falls below the green-only value.
    """
    lo, hi = ir_search_range_w
    if not (0 <= lo < hi):
        raise ConfigError(f"IR search range must satisfy 0 <= lo < hi, got ({lo}, {hi})")

    def f(ir_w):
        return nvm_fraction(_steady(profile, green_power_w, ir_w))

    scan_lo = max(lo, hi * 1e-4)
    xs = np.geomspace(scan_lo, hi, n_scan)
    fs = np.array([f(x) for x in xs])
    f0 = f(0.0)

    spread = fs.max() - min(fs.min(), f0)
    flat = spread <= 1e-9 * max(abs(fs.max()), 1e-30)
    if flat:
        return IROptimum(0.0, f0, True)

    k = int(np.argmax(fs))
    a = xs[k - 1] if k > 0 else max(lo, scan_lo / 10)
    b = xs[k + 1] if k < n_scan - 1 else hi
    x_best, f_best = _golden_section_max(f, a, b)
    # boundary and IR-off candidates
    candidates = [(x_best, f_best), (xs[k], fs[k]), (0.0, f0)]
    if lo > 0:
        candidates.append((lo, f(lo)))
    candidates.append((hi, f(hi)))
    x_opt, f_opt = max(candidates, key=lambda t: t[1])
    return IROptimum(float(x_opt), float(f_opt), False)


def write_map_csv(grid: PowerGrid, ratios: np.ndarray, path):
    """Green-power rows, IR-power columns; first column holds the green power."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["green_power_w"] + [fmt9(p) for p in grid.ir_powers_w])
        for g, row in zip(grid.green_powers_w, ratios):
            w.writerow([fmt9(g)] + [fmt9(v) for v in row])


def read_map_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        ir = [float(v) for v in header[1:]]
        greens, rows = [], []
        for row in r:
            if not row:
                continue
            greens.append(float(row[0]))
            rows.append([float(v) for v in row[1:]])
    grid = PowerGrid(tuple(greens), tuple(ir))
    return grid, np.array(rows)


def write_map_sidecar(grid: PowerGrid, profile_label: str, path):
    doc = {"green_powers_w": list(grid.green_powers_w),
           "ir_powers_w": list(grid.ir_powers_w),
           "scale": grid.scale,
           "profile": profile_label,
           "normalization": "pl_nvm / pl_nvm(ir=0)"}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve_csv(green_powers_w, fractions, pl_ratio, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["green_power_w", "nvm_fraction", "pl_ratio"])
        for g, fr, r in zip(green_powers_w, fractions, pl_ratio):
            w.writerow([fmt9(g), fmt9(fr), fmt9(r)])


def read_curve_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["green_power_w", "nvm_fraction", "pl_ratio"]:
            raise ConfigError(f"unexpected curve header in {path}")
        cols = [[], [], []]
        for row in r:
            if not row:
                continue
            for c, v in zip(cols, row):
                c.append(float(v))
    return tuple(np.array(c) for c in cols)
