"""Time evolution, steady states, pulse sequences, and PL extraction.

Within a pulse segment the generator is constant, so propagation uses the
exact matrix exponential (scaling-and-squaring); the rates span ~6 decades,
which rules out explicit fixed-step integration but is harmless for expm on a
7x7 system.
"""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, DegenerateSteadyStateError, EvolveError
from .levels import N_LEVELS, LevelIndex
from .params import OpticalSetup, PhotophysicsParams
from .rates import build_rate_matrix


class Channel(enum.Enum):
    """Idealized narrow band-pass detection channels (no cross-talk)."""

    NVM = "nvm"
    NV0 = "nv0"


def validate_population(p, atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (N_LEVELS,):
        raise ConfigError(f"population vector must have shape ({N_LEVELS},), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ConfigError("population vector contains non-finite entries")
    if np.any(p < -atol) or np.any(p > 1.0 + atol):
        raise ConfigError("population entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > atol:
        raise ConfigError(f"population must sum to 1, got {p.sum()!r}")
    return p


def _sanitize_population(p: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    """Clip roundoff-level negatives and renormalize; reject anything worse."""
    if not np.all(np.isfinite(p)):
        raise EvolveError("propagation produced non-finite populations")
    if np.any(p < -atol):
        raise EvolveError(f"propagation produced negative population {p.min():g}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if not (abs(s - 1.0) <= 1e-6):
        raise EvolveError(f"propagation lost probability (sum {s!r})")
    return p / s


def evolve(m: np.ndarray, p0, t: float) -> np.ndarray:
    """Propagate populations: exp(m t) @ p0."""
    if not (t >= 0):
        raise ConfigError(f"evolution time must be >= 0, got {t}")
    p0 = validate_population(p0)
    if t == 0:
        return p0.copy()
    return _sanitize_population(expm(np.asarray(m, float) * t) @ p0)


def _blocks(m: np.ndarray):
    """Connected groups of levels under the (symmetrized) transition graph."""
    adj = (np.abs(m - np.diag(np.diag(m))) > 0)
    n, labels = connected_components(adj, directed=False)
    groups = []
    for k in range(n):
        groups.append([LevelIndex(i).name for i in np.where(labels == k)[0]])
    return groups


def steady_state(m: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Unique stationary distribution of the generator.

    Raises DegenerateSteadyStateError (naming the disconnected level groups)
    when the null space is not one-dimensional.
    """
    m = np.asarray(m, dtype=float)
    scale = max(np.abs(m).max(), 1.0)
    _, s, vt = np.linalg.svd(m)
    null_dim = int(np.sum(s <= 1e-12 * scale))
    if null_dim != 1:
        groups = _blocks(m)
        names = "; ".join("{" + ", ".join(g) + "}" for g in groups)
        raise DegenerateSteadyStateError(
            f"generator has a {null_dim}-dimensional null space "
            f"(disconnected blocks: {names})", blocks=groups)
    v = vt[-1]
    if v.sum() < 0:
        v = -v
    if np.any(v < -1e-9 * max(np.abs(v).max(), 1e-300)):
        raise DegenerateSteadyStateError(
            "null vector is not sign-definite; no stationary distribution")
    v = np.clip(v, 0.0, None)
    p = v / v.sum()
    resid = np.abs(m @ p).max()
    if resid > rtol * scale:
        raise DegenerateSteadyStateError(
            f"steady-state residual {resid:g} exceeds {rtol:g} * max|m|")
    return p


def pl_signal(p, params: PhotophysicsParams, channel: Channel = Channel.NVM) -> float:
    """Emission rate (Hz) in one charge-state-filtered detection channel."""
    p = validate_population(p)
    if channel is Channel.NVM:
        return params.k_fluor_minus * (p[LevelIndex.NVM_EXCITED_MS0]
                                       + p[LevelIndex.NVM_EXCITED_MS1])
    if channel is Channel.NV0:
        return params.k_fluor_zero * p[LevelIndex.NV0_EXCITED]
    raise ConfigError(f"unknown channel {channel!r}")


@dataclass(frozen=True)
class PulseSegment:
    duration_s: float
    green_power_w: float
    ir_power_w: float

    def __post_init__(self):
        if not (self.duration_s > 0):
            raise ConfigError(f"segment duration must be > 0, got {self.duration_s}")
        if self.green_power_w < 0 or self.ir_power_w < 0:
            raise ConfigError("segment powers must be >= 0")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ConfigError("pulse sequence needs at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def total_duration_s(self) -> float:
        return float(sum(s.duration_s for s in self.segments))

    @property
    def boundaries_s(self) -> np.ndarray:
        return np.cumsum([s.duration_s for s in self.segments])


GREEN_STEADY_STATE = "green-steady-state"

_TRACE_HEADER = ["time_s", "pl_nvm_hz", "pl_nv0_hz", "pl_nvm_norm",
                 "p0", "p1", "p2", "p3", "p4", "p5", "p6"]


@dataclass
class Trace:
    """Sampled PL signal (both channels) with optional per-sample populations."""

    times_s: np.ndarray
    pl_nvm_hz: np.ndarray
    pl_nv0_hz: np.ndarray
    pl_nvm_norm: np.ndarray
    populations: Optional[np.ndarray] = None  # shape (n, 7)
    ref_pl_nvm_hz: float = float("nan")

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, float)
        self.pl_nvm_hz = np.asarray(self.pl_nvm_hz, float)
        self.pl_nv0_hz = np.asarray(self.pl_nv0_hz, float)
        self.pl_nvm_norm = np.asarray(self.pl_nvm_norm, float)
        n = self.times_s.size
        if not (self.pl_nvm_hz.size == self.pl_nv0_hz.size == self.pl_nvm_norm.size == n):
            raise ConfigError("trace arrays must share one length")
        if n and np.any(np.diff(self.times_s) <= 0):
            raise ConfigError("trace times must be strictly increasing")
        if np.any(self.pl_nvm_hz < 0) or np.any(self.pl_nv0_hz < 0):
            raise ConfigError("PL values must be >= 0")
        if self.populations is not None:
            self.populations = np.asarray(self.populations, float)
            if self.populations.shape != (n, N_LEVELS):
                raise ConfigError("populations must have shape (n, 7)")

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_TRACE_HEADER)
            have_p = self.populations is not None
            for i in range(self.times_s.size):
                row = [fmt9(self.times_s[i]), fmt9(self.pl_nvm_hz[i]),
                       fmt9(self.pl_nv0_hz[i]), fmt9(self.pl_nvm_norm[i])]
                if have_p:
                    row += [fmt9(v) for v in self.populations[i]]
                else:
                    row += [""] * N_LEVELS
                w.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "Trace":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if [h.strip() for h in header] != _TRACE_HEADER:
                raise ConfigError(f"unexpected trace header in {path}")
            rows = [row for row in r if row]
        times, nvm, nv0, norm, pops = [], [], [], [], []
        have_p = True
        for row in rows:
            times.append(float(row[0]))
            nvm.append(float(row[1]))
            nv0.append(float(row[2]))
            norm.append(float(row[3]))
            if any(cell == "" for cell in row[4:]):
                have_p = False
            else:
                pops.append([float(v) for v in row[4:]])
        ref = float("nan")
        for a, b in zip(nvm, norm):
            if b > 0 and np.isfinite(b):
                ref = a / b
                break
        return cls(np.array(times), np.array(nvm), np.array(nv0), np.array(norm),
                   populations=np.array(pops) if have_p and pops else None,
                   ref_pl_nvm_hz=ref)


def fmt9(x) -> str:
    """Fixed 9-significant-digit float formatting used by all CSV writers."""
    return f"{float(x):.9g}"


def green_only_steady_state(params: PhotophysicsParams, green_power_w: float,
                            setup: OpticalSetup = OpticalSetup()) -> np.ndarray:
    m = build_rate_matrix(params, setup.green(green_power_w), setup.ir(0.0))
    return steady_state(m)


def simulate_sequence(params: PhotophysicsParams, seq: PulseSequence,
                      p_init=GREEN_STEADY_STATE, dt_sample: float = 1e-9,
                      setup: OpticalSetup = OpticalSetup(),
                      store_populations: bool = True) -> Trace:
    """Piecewise-constant evolution through a laser on/off program.

    Populations are continuous across segment boundaries; the generator is
    rebuilt at each boundary. Propagation is exact per segment, so dt_sample
    only controls output resolution; a warning is emitted when it
    under-resolves the fastest rate (features faster than the sampling grid
    will not show in the trace).
    """
    if not (dt_sample > 0):
        raise ConfigError(f"dt_sample must be > 0, got {dt_sample}")

    mats = [build_rate_matrix(params, setup.green(s.green_power_w),
                              setup.ir(s.ir_power_w)) for s in seq.segments]
    max_rate = max(np.abs(np.diag(m)).max() for m in mats)
    if max_rate > 0 and dt_sample > 1.0 / max_rate:
        warnings.warn(
            f"dt_sample={dt_sample:g}s under-resolves the fastest rate "
            f"({max_rate:g} Hz); propagation stays exact but fast features "
            "may be missed by the sampling grid", stacklevel=2)

    if isinstance(p_init, str):
        if p_init != GREEN_STEADY_STATE:
            raise ConfigError(f"unknown p_init {p_init!r}")
        p = green_only_steady_state(params, seq.segments[0].green_power_w, setup)
    else:
        p = validate_population(p_init).copy()

    try:
        ref = pl_signal(green_only_steady_state(
            params, seq.segments[0].green_power_w, setup), params, Channel.NVM)
    except DegenerateSteadyStateError:
        ref = float("nan")

    total = seq.total_duration_s
    n_samples = int(np.floor(total / dt_sample + 1e-9)) + 1
    times = np.arange(n_samples) * dt_sample

    bounds = seq.boundaries_s
    prop_cache: dict = {}

    def propagate(p, seg, dt):
        if dt <= 0:
            return p
        key = (seg, round(dt / dt_sample, 9))
        prop = prop_cache.get(key)
        if prop is None:
            prop = expm(mats[seg] * dt)
            prop_cache[key] = prop
        return _sanitize_population(prop @ p)

    nvm = np.empty(n_samples)
    nv0 = np.empty(n_samples)
    pops = np.empty((n_samples, N_LEVELS)) if store_populations else None

    seg = 0
    t_now = 0.0
    eps = 1e-12 * max(total, dt_sample)
    for i, t in enumerate(times):
        # cross segment boundaries lying before this sample
        while seg < len(mats) - 1 and t > bounds[seg] + eps:
            p = propagate(p, seg, bounds[seg] - t_now)
            t_now = bounds[seg]
            seg += 1
        p = propagate(p, seg, t - t_now)
        t_now = t
        nvm[i] = pl_signal(p, params, Channel.NVM)
        nv0[i] = pl_signal(p, params, Channel.NV0)
        if store_populations:
            pops[i] = p

    norm = nvm / ref if np.isfinite(ref) and ref > 0 else np.full(n_samples, np.nan)
    return Trace(times, nvm, nv0, norm, populations=pops, ref_pl_nvm_hz=ref)
