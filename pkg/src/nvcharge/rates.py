"""Photon-rate conversion and construction of the 7x7 rate-equation generator.

The generator convention: entry (i, j) with i != j is the transition rate
(Hz) from level j into level i; each diagonal entry is minus the total
outflow of its column, so every column sums to zero and populations are
conserved.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.constants import c as _C
from scipy.constants import h as _H

from .errors import ConfigError
from .levels import N_LEVELS, LevelIndex
from .params import LaserField, PhotophysicsParams

_HC = _H * _C

_L = LevelIndex  # local shorthand


def photon_rate(sigma_m2: float, laser: LaserField) -> float:
    """Per-photon transition rate K = sigma * lambda * I / (h c), in Hz.

    Exactly linear in laser power; zero at zero power.
    """
    if not (isinstance(sigma_m2, (int, float)) and math.isfinite(sigma_m2)) or sigma_m2 < 0:
        raise ConfigError(f"cross-section must be finite and >= 0, got {sigma_m2}")
    return sigma_m2 * laser.wavelength_m * laser.intensity_w_m2 / _HC


def optical_rates(params: PhotophysicsParams, green: LaserField, ir: LaserField):
    """Total ionization and recombination rates K_i, K_r (Hz) for both lasers.

    Returns (k_ion_green, k_ion_ir, k_rec_green, k_rec_ir).
    """
    cs = params.cross_sections
    return (photon_rate(cs.sigma_ionize_green_m2, green),
            photon_rate(cs.sigma_ionize_ir_m2, ir),
            photon_rate(cs.sigma_recombine_green_m2, green),
            photon_rate(cs.sigma_recombine_ir_m2, ir))


def build_rate_matrix(params: PhotophysicsParams, green: LaserField,
                      ir: LaserField) -> np.ndarray:
    """Assemble the population-dynamics generator for the given laser powers.

    Transitions encoded (and nothing else): spin-conserving green excitation
    and radiative decay in both charge states, spin-selective ISC, branched
    singlet decay, ionization from the NV- excited states into the NV0 ground
    state, and recombination from the NV0 excited state into the NV- ground
    manifolds.
    """
    k_ion_g, k_ion_ir, k_rec_g, k_rec_ir = optical_rates(params, green, ir)
    k_ion = k_ion_g + k_ion_ir
    k_rec = k_rec_g + k_rec_ir
    k_exc_m = params.k_excite_minus_per_w * green.power_w
    k_exc_0 = params.k_excite_zero_per_w * green.power_w

    m = np.zeros((N_LEVELS, N_LEVELS))

    def add(src, dst, rate):
        m[dst, src] += rate

    # NV- optical cycle, spin conserving
    add(_L.NVM_GROUND_MS0, _L.NVM_EXCITED_MS0, k_exc_m)
    add(_L.NVM_GROUND_MS1, _L.NVM_EXCITED_MS1, k_exc_m)
    add(_L.NVM_EXCITED_MS0, _L.NVM_GROUND_MS0, params.k_fluor_minus)
    add(_L.NVM_EXCITED_MS1, _L.NVM_GROUND_MS1, params.k_fluor_minus)
    # ISC: the only spin-dependent transition
    add(_L.NVM_EXCITED_MS0, _L.NVM_SINGLET, params.k_isc_ms0)
    add(_L.NVM_EXCITED_MS1, _L.NVM_SINGLET, params.k_isc_ms1)
    # singlet decay, branched between spin manifolds
    add(_L.NVM_SINGLET, _L.NVM_GROUND_MS0,
        params.k_singlet_decay * params.singlet_branch_ms0)
    add(_L.NVM_SINGLET, _L.NVM_GROUND_MS1,
        params.k_singlet_decay * (1.0 - params.singlet_branch_ms0))
    # ionization from both NV- excited manifolds into the NV0 ground state
    add(_L.NVM_EXCITED_MS0, _L.NV0_GROUND, k_ion)
    add(_L.NVM_EXCITED_MS1, _L.NV0_GROUND, k_ion)
    # NV0 optical cycle
    add(_L.NV0_GROUND, _L.NV0_EXCITED, k_exc_0)
    add(_L.NV0_EXCITED, _L.NV0_GROUND, params.k_fluor_zero)
    # recombination into the NV- ground manifolds
    add(_L.NV0_EXCITED, _L.NVM_GROUND_MS0,
        k_rec * params.recombination_branch_ms0)
    add(_L.NV0_EXCITED, _L.NVM_GROUND_MS1,
        k_rec * (1.0 - params.recombination_branch_ms0))

    np.fill_diagonal(m, -m.sum(axis=0))
    return m


def validate_generator(m: np.ndarray, rtol: float = 1e-12):
    """Raise if `m` is not a valid probability-conserving generator."""
    m = np.asarray(m, dtype=float)
    if m.shape != (N_LEVELS, N_LEVELS):
        raise ConfigError(f"generator must be {N_LEVELS}x{N_LEVELS}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ConfigError("generator contains non-finite entries")
    off = m - np.diag(np.diag(m))
    if np.any(off < 0):
        raise ConfigError("generator has negative off-diagonal entries")
    scale = max(np.abs(m).max(), 1.0)
    col = np.abs(m.sum(axis=0)).max()
    if col > rtol * scale:
        raise ConfigError(f"generator columns do not sum to zero (max {col:g})")
    return m
