"""Power maps, population curves, and IR optimization."""

import numpy as np
import pytest

from nvcharge import (ConfigError, CrossSectionSet, IROptimum, NVProfile,
                      OpticalSetup, PhotophysicsParams, PowerGrid,
                      charge_population_curve, default_power_grid,
                      nvm_fraction, optimize_ir_power, steady_state_pl_map)
from nvcharge.experiments import (read_curve_csv, read_map_csv,
                                  write_curve_csv, write_map_csv,
                                  write_map_sidecar)
from nvcharge.levels import N_LEVELS, LevelIndex

CS = CrossSectionSet(6.25e-20, 1.76e-22, 9.83e-21, 4.66e-22)


def make_profile(**over):
    kw = dict(k_excite_minus_per_w=0.66e9, k_excite_zero_per_w=0.52e9,
              k_fluor_minus=66e6, k_fluor_zero=20e6, k_isc_ms0=1e6,
              k_isc_ms1=50e6, k_singlet_decay=1e6, singlet_branch_ms0=0.8,
              cross_sections=CS)
    kw.update(over)
    return NVProfile("custom", PhotophysicsParams(**kw), OpticalSetup())


def test_power_grid_validation():
    with pytest.raises(ConfigError):
        PowerGrid((), (1e-3,))
    with pytest.raises(ConfigError):
        PowerGrid((2e-3, 1e-3), (1e-3,))  # not increasing
    with pytest.raises(ConfigError):
        PowerGrid((1e-3,), (1e-3,), scale="cubic")


def test_default_power_grid_shape():
    grid = default_power_grid(7)
    assert len(grid.green_powers_w) == 7
    assert grid.green_powers_w[0] == pytest.approx(10e-6)
    assert grid.ir_powers_w[-1] == pytest.approx(100e-3)


def test_nvm_fraction_spin_blind():
    p = np.zeros(N_LEVELS)
    p[LevelIndex.NVM_GROUND_MS0] = 0.3
    p[LevelIndex.NVM_GROUND_MS1] = 0.2
    p[LevelIndex.NV0_GROUND] = 0.5
    q = p.copy()
    q[LevelIndex.NVM_GROUND_MS0], q[LevelIndex.NVM_GROUND_MS1] = 0.2, 0.3
    assert nvm_fraction(p) == pytest.approx(nvm_fraction(q))
    assert nvm_fraction(p) == pytest.approx(0.5)


def test_map_shape_and_positivity():
    profile = make_profile()
    grid = default_power_grid(5)
    ratios = steady_state_pl_map(profile, grid)
    assert ratios.shape == (5, 5)
    assert (ratios > 0).all()


def test_map_ir_to_zero_limit_is_one():
    profile = make_profile()
    grid = PowerGrid((50e-6, 200e-6), (1e-12, 1e-3), scale="logarithmic")
    ratios = steady_state_pl_map(profile, grid)
    np.testing.assert_allclose(ratios[:, 0], 1.0, atol=1e-9)


def test_curve_values_are_fractions():
    profile = make_profile()
    greens = np.geomspace(10e-6, 1e-3, 6)
    fractions, pl_ratio = charge_population_curve(profile, greens, 25e-3)
    assert ((fractions >= 0) & (fractions <= 1)).all()
    assert (pl_ratio > 0).all()


def test_optimize_never_below_ir_off():
    profile = make_profile()
    for g in (20e-6, 100e-6, 500e-6):
        opt = optimize_ir_power(profile, g, (0.0, 100e-3))
        f0 = charge_population_curve(profile, [g], 0.0)[0][0]
        assert opt.nvm_fraction >= f0 - 1e-12


def test_optimize_flat_objective_without_ir_coupling():
    no_ir = CrossSectionSet(6.25e-20, 0.0, 9.83e-21, 0.0)
    profile = make_profile(cross_sections=no_ir)
    opt = optimize_ir_power(profile, 100e-6, (0.0, 100e-3))
    assert opt.flat_objective
    assert opt.ir_power_w == 0.0


def test_optimize_grid_refinement_invariance():
    profile = make_profile()
    a = optimize_ir_power(profile, 30e-6, (0.0, 100e-3), n_scan=17)
    b = optimize_ir_power(profile, 30e-6, (0.0, 100e-3), n_scan=65)
    assert a.nvm_fraction == pytest.approx(b.nvm_fraction, rel=1e-4)
    if not (a.flat_objective or a.ir_power_w == 0.0):
        assert a.ir_power_w == pytest.approx(b.ir_power_w, rel=0.01)


def test_optimize_invalid_range():
    profile = make_profile()
    with pytest.raises(ConfigError):
        optimize_ir_power(profile, 100e-6, (50e-3, 10e-3))
    with pytest.raises(ConfigError):
        optimize_ir_power(profile, 100e-6, (-1e-3, 10e-3))
    assert isinstance(optimize_ir_power(profile, 100e-6, (0.0, 50e-3)),
                      IROptimum)


def test_map_csv_round_trip(tmp_path):
    profile = make_profile()
    grid = default_power_grid(4)
    ratios = steady_state_pl_map(profile, grid)
    path = tmp_path / "map.csv"
    write_map_csv(grid, ratios, path)
    grid2, back = read_map_csv(path)
    np.testing.assert_allclose(back, ratios, rtol=1e-8)
    np.testing.assert_allclose(grid2.green_powers_w, grid.green_powers_w,
                               rtol=1e-8)
    write_map_sidecar(grid, profile.label, tmp_path / "map_grid.json")
    path2 = tmp_path / "again.csv"
    write_map_csv(grid2, back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_curve_csv_round_trip(tmp_path):
    profile = make_profile()
    greens = np.geomspace(10e-6, 1e-3, 5)
    fractions, pl_ratio = charge_population_curve(profile, greens, 25e-3)
    path = tmp_path / "curve.csv"
    write_curve_csv(greens, fractions, pl_ratio, path)
    g2, f2, r2 = read_curve_csv(path)
    np.testing.assert_allclose(f2, fractions, rtol=1e-8)
    np.testing.assert_allclose(r2, pl_ratio, rtol=1e-8)
