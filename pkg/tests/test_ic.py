"""Initial-condition families: values, derivatives, masses, registry."""
import numpy as np
import pytest

from sgboltz.gpc import build_basis
from sgboltz.ic import (
    BiGaussianFamily,
    BkwFamily,
    bkw_sigma,
    grid_values,
    make_family,
)
from sgboltz.kernel import KernelModel
from sgboltz.spectral import VelocityGrid, truncation_params

MAXWELL = KernelModel(gamma=0.0, b_coeffs=(1.0, 0.2))


def grid_mass(grid, vals2d):
    return float(np.sum(vals2d)) * (2.0 * grid.L / grid.M) ** 2


def test_sigma_initial_value():
    assert bkw_sigma(0.0, 1.0) == 0.5
    # sigma -> 1 as t -> inf, monotonically
    ts = np.linspace(0.0, 40.0, 50)
    s = bkw_sigma(ts, 1.3)
    assert np.all(np.diff(s) > 0) and s[-1] > 0.99


def test_bkw_time_derivative_matches_fd():
    fam = BkwFamily(MAXWELL)
    vsq = np.linspace(0.0, 9.0, 40)
    t, z, h = 0.7, 0.3, 1e-5
    fd = (fam.value(t + h, vsq, z) - fam.value(t - h, vsq, z)) / (2 * h)
    an = fam.dt_value(t, vsq, z)
    assert np.max(np.abs(an - fd)) < 1e-8


def test_bkw_z_derivative_matches_fd():
    fam = BkwFamily(MAXWELL)
    vsq = np.linspace(0.0, 9.0, 40)
    t, z, h = 1.2, -0.4, 1e-5
    fd = (fam.value(t, vsq, z + h) - fam.value(t, vsq, z - h)) / (2 * h)
    an = fam.dz_value(t, vsq, z)
    assert np.max(np.abs(an - fd)) < 1e-8


def test_bkw_mass_is_one():
    fam = BkwFamily(MAXWELL)
    _, L = truncation_params(4.0)
    grid = VelocityGrid(24, L)
    vx, vy = grid.nodes[:, None], grid.nodes[None, :]
    for t in (0.0, 1.0, 5.0):
        m = grid_mass(grid, fam.value(t, vx**2 + vy**2, 0.2))
        assert abs(m - 1.0) < 1e-8


def test_bkw_nonnegative():
    fam = BkwFamily(MAXWELL)
    vsq = np.linspace(0.0, 30.0, 200)
    assert np.min(fam.value(0.0, vsq, 0.0)) >= 0.0
    assert np.min(fam.value(2.0, vsq, 0.5)) > 0.0


def test_bkw_requires_maxwell():
    with pytest.raises(ValueError, match="gamma"):
        BkwFamily(KernelModel(gamma=0.5))


def test_bkw_t0_shifts_reference():
    fam = BkwFamily(MAXWELL, t0=0.5)
    vsq = np.linspace(0.0, 4.0, 10)
    assert np.allclose(fam.ic_values(vsq, 0.1), fam.value(0.5, vsq, 0.1))
    # reference time is solver time, measured from t0
    assert np.allclose(fam.reference(1.0, vsq, 0.1),
                       fam.value(1.5, vsq, 0.1))
    assert np.allclose(fam.reference_dz(1.0, vsq, 0.1),
                       fam.dz_value(1.5, vsq, 0.1))


def test_bigaussian_mass_and_symmetry():
    fam = BiGaussianFamily(separation=1.0, temp_plus=(0.5,), temp_minus=(0.5,))
    _, L = truncation_params(4.0)
    grid = VelocityGrid(24, L)
    vx, vy = grid.nodes[:, None], grid.nodes[None, :]
    vals = fam.value_xy(vx, vy, 0.0)
    assert abs(grid_mass(grid, vals) - 1.0) < 1e-8
    # equal temperatures: symmetric under vx -> -vx up to grid asymmetry
    assert np.allclose(vals, fam.value_xy(-vx, vy, 0.0))


def test_bigaussian_z_derivative_matches_fd():
    fam = BiGaussianFamily(separation=0.8, temp_plus=(0.5, 0.1),
                           temp_minus=(0.4, -0.05))
    vx = np.linspace(-3, 3, 13)[:, None]
    vy = np.linspace(-3, 3, 13)[None, :]
    z, h = 0.25, 1e-6
    fd = (fam.value_xy(vx, vy, z + h) - fam.value_xy(vx, vy, z - h)) / (2 * h)
    assert np.max(np.abs(fam.dz_value_xy(vx, vy, z) - fd)) < 1e-8


def test_bigaussian_temperature_positivity_enforced():
    with pytest.raises(ValueError, match="temp_plus"):
        BiGaussianFamily(temp_plus=(0.5, 0.6))
    with pytest.raises(ValueError, match="temp_minus"):
        BiGaussianFamily(temp_minus=(-0.1,))


def test_grid_values_shapes_and_z_slices():
    _, L = truncation_params(4.0)
    grid = VelocityGrid(6, L)
    basis = build_basis(2)
    fam = BkwFamily(MAXWELL)
    vals = grid_values(fam, grid, basis, "ic")
    assert vals.shape == (grid.M, grid.M, basis.quad_order)
    ref = grid_values(fam, grid, basis, "reference", t=0.5)
    vx, vy = grid.nodes[:, None], grid.nodes[None, :]
    assert np.allclose(ref[:, :, 0],
                       fam.reference(0.5, vx**2 + vy**2, basis.nodes[0]))


def test_deterministic_ic_has_flat_z_dependence():
    _, L = truncation_params(4.0)
    grid = VelocityGrid(6, L)
    basis = build_basis(3)
    fam = BiGaussianFamily()  # z-independent temperatures
    vals = grid_values(fam, grid, basis, "ic")
    spread = np.max(vals, axis=2) - np.min(vals, axis=2)
    assert np.max(spread) == 0.0
    dz = grid_values(fam, grid, basis, "ic_dz")
    assert np.array_equal(dz, np.zeros_like(dz))


def test_registry_dispatch_and_validation():
    fam = make_family("bkw", {"t0": 0.25}, MAXWELL)
    assert isinstance(fam, BkwFamily) and fam.t0 == 0.25
    fam2 = make_family("bi_gaussian", {"separation": 1.5}, MAXWELL)
    assert isinstance(fam2, BiGaussianFamily) and fam2.u0 == 1.5
    with pytest.raises(ValueError, match="unknown family"):
        make_family("ring", {}, MAXWELL)
    with pytest.raises(ValueError, match="unknown keys"):
        make_family("bkw", {"radius": 2.0}, MAXWELL)
