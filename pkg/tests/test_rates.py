"""Photon-rate formula and rate-matrix structure."""

import numpy as np
import pytest

from nvcharge import (ConfigError, CrossSectionSet, OpticalSetup,
                      PhotophysicsParams, build_rate_matrix, photon_rate)
from nvcharge.levels import N_LEVELS, LevelIndex
from nvcharge.rates import optical_rates, validate_generator

CS = CrossSectionSet(6.25e-20, 1.76e-22, 9.83e-21, 4.66e-22)
SETUP = OpticalSetup()


def make_params(**over):
    kw = dict(k_excite_minus_per_w=0.66e9, k_excite_zero_per_w=0.52e9,
              k_fluor_minus=66e6, k_fluor_zero=20e6, k_isc_ms0=1e6,
              k_isc_ms1=50e6, k_singlet_decay=1e6, singlet_branch_ms0=0.8,
              cross_sections=CS)
    kw.update(over)
    return PhotophysicsParams(**kw)


HC = 1.9864458571489286e-25  # J*m


def test_photon_rate_formula():
    laser = SETUP.green(1e-3)
    expected = CS.sigma_ionize_green_m2 * laser.wavelength_m \
        * laser.intensity_w_m2 / HC
    assert photon_rate(CS.sigma_ionize_green_m2, laser) == pytest.approx(expected)


def test_photon_rate_zero_power():
    assert photon_rate(CS.sigma_ionize_green_m2, SETUP.green(0.0)) == 0.0


def test_photon_rate_linear_in_power_and_sigma():
    r1 = photon_rate(CS.sigma_ionize_ir_m2, SETUP.ir(10e-3))
    r2 = photon_rate(CS.sigma_ionize_ir_m2, SETUP.ir(20e-3))
    r3 = photon_rate(2 * CS.sigma_ionize_ir_m2, SETUP.ir(10e-3))
    assert r2 == pytest.approx(2 * r1, rel=1e-12)
    assert r3 == pytest.approx(2 * r1, rel=1e-12)


def test_photon_rate_rejects_negative_sigma():
    with pytest.raises(ConfigError):
        photon_rate(-1e-20, SETUP.green(1e-3))


def test_optical_rates_order():
    params = make_params()
    k_ig, k_iir, k_rg, k_rir = optical_rates(params, SETUP.green(1e-3),
                                             SETUP.ir(1e-3))
    # per-mW ordering of the tabulated cross-sections
    assert k_ig > k_rg > k_rir > k_iir


def test_generator_columns_sum_to_zero():
    m = build_rate_matrix(make_params(), SETUP.green(159e-6), SETUP.ir(38e-3))
    assert m.shape == (N_LEVELS, N_LEVELS)
    np.testing.assert_allclose(m.sum(axis=0), 0.0, atol=1e-12 * np.abs(m).max())
    validate_generator(m)


def test_generator_off_diagonal_nonnegative():
    m = build_rate_matrix(make_params(), SETUP.green(159e-6), SETUP.ir(38e-3))
    off = m - np.diag(np.diag(m))
    assert (off >= 0).all()


def test_no_ir_ionization_without_ir():
    m = build_rate_matrix(make_params(), SETUP.green(159e-6), SETUP.ir(0.0))
    m_ref = build_rate_matrix(make_params(), SETUP.green(159e-6),
                              SETUP.ir(10e-3))
    # IR adds ionization flux out of the NV- excited levels
    i, j = LevelIndex.NV0_GROUND, LevelIndex.NVM_EXCITED_MS0
    assert m_ref[i, j] > m[i, j]


def test_spin_selective_isc():
    params = make_params()
    m = build_rate_matrix(params, SETUP.green(159e-6), SETUP.ir(0.0))
    s = LevelIndex.NVM_SINGLET
    assert m[s, LevelIndex.NVM_EXCITED_MS1] == pytest.approx(params.k_isc_ms1)
    assert m[s, LevelIndex.NVM_EXCITED_MS0] == pytest.approx(params.k_isc_ms0)
    assert m[s, LevelIndex.NVM_EXCITED_MS1] > m[s, LevelIndex.NVM_EXCITED_MS0]


def test_singlet_branching_splits_decay():
    params = make_params()
    m = build_rate_matrix(params, SETUP.green(159e-6), SETUP.ir(0.0))
    s = LevelIndex.NVM_SINGLET
    to_ms0 = m[LevelIndex.NVM_GROUND_MS0, s]
    to_ms1 = m[LevelIndex.NVM_GROUND_MS1, s]
    assert to_ms0 + to_ms1 == pytest.approx(params.k_singlet_decay)
    assert to_ms0 == pytest.approx(params.singlet_branch_ms0
                                   * params.k_singlet_decay)


def test_isc_selectivity_enforced():
    with pytest.raises(ConfigError):
        make_params(k_isc_ms0=60e6, k_isc_ms1=1e6)


def test_branch_bounds_enforced():
    with pytest.raises(ConfigError):
        make_params(singlet_branch_ms0=1.5)
