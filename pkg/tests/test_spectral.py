"""Grid geometry, transform exactness, norms, and snapshot format."""
import numpy as np
import pytest

from sgboltz.gpc import build_basis
from sgboltz.spectral import (
    SnapshotError,
    SpectralField,
    VelocityGrid,
    forward_transform,
    inverse_transform,
    itransform_v,
    load_snapshot,
    lp_norm_v,
    save_snapshot,
    sobolev_norm_v,
    transform_v,
    truncation_params,
)


def random_field(grid, K, seed=0):
    """Field obtained by transforming random real node values (so Hermitian)."""
    basis = build_basis(K)
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((grid.M, grid.M, basis.quad_order))
    return forward_transform(grid, basis, vals, t=0.25), basis, vals


def test_truncation_params_frozen():
    R, L = truncation_params(2.0)
    assert R == pytest.approx(4.0, abs=0)
    assert L == pytest.approx(3.0 + np.sqrt(2.0), abs=1e-15)
    with pytest.raises(ValueError):
        truncation_params(0.0)


def test_grid_geometry():
    g = VelocityGrid(4, 5.0)
    assert g.M == 9
    assert g.nodes[0] == -5.0
    assert g.nodes[-1] < 5.0  # right endpoint excluded
    step = np.diff(g.nodes)
    assert np.max(np.abs(step - 2.0 * 5.0 / 9)) < 1e-14
    assert g.modes[0] == -4 and g.modes[-1] == 4
    assert g.refined().N == 8 and g.refined().L == 5.0


def test_single_mode_coefficients():
    # cos(pi v1 / L) has coefficients 1/2 at n = (+-1, 0)
    g = VelocityGrid(3, 2.0)
    vals = np.cos(np.pi * g.nodes[:, None] / g.L) * np.ones((1, g.M))
    c = transform_v(g, vals)
    n0 = g.N
    assert c[n0 + 1, n0] == pytest.approx(0.5, abs=1e-14)
    assert c[n0 - 1, n0] == pytest.approx(0.5, abs=1e-14)
    c[n0 + 1, n0] = c[n0 - 1, n0] = 0.0
    assert np.max(np.abs(c)) < 1e-14


def test_mode_index_alignment():
    # e^{i pi 3 v1 / L} lands at array index (N+3, N)
    g = VelocityGrid(4, 3.0)
    vals = np.exp(1j * np.pi * 3 * g.nodes[:, None] / g.L) * np.ones((1, g.M))
    c = transform_v(g, vals)
    assert c[g.N + 3, g.N] == pytest.approx(1.0, abs=1e-13)


def test_transform_roundtrip_values():
    # values with polynomial z-dependence of degree <= K round-trip exactly
    g = VelocityGrid(6, 4.4)
    basis = build_basis(2)
    rng = np.random.default_rng(3)
    nodal = rng.standard_normal((g.M, g.M, basis.K + 1))
    vals = nodal @ basis.psi  # (M, M, Q)
    field = forward_transform(g, basis, vals)
    back = inverse_transform(field, basis)
    assert np.max(np.abs(back - vals)) < 1e-12


def test_forward_inverse_forward_projection():
    # one projection pass makes arbitrary z-dependence polynomial; a second
    # pass then changes nothing
    g = VelocityGrid(6, 4.4)
    field, basis, _ = random_field(g, K=2, seed=3)
    again = forward_transform(g, basis, inverse_transform(field, basis))
    assert np.max(np.abs(again.coeffs - field.coeffs)) < 1e-12


def test_transform_roundtrip_coeffs():
    g = VelocityGrid(5, 8.83)
    rng = np.random.default_rng(11)
    c = rng.standard_normal((g.M, g.M)) + 1j * rng.standard_normal((g.M, g.M))
    back = transform_v(g, itransform_v(g, c))
    assert np.max(np.abs(back - c)) < 1e-12


def test_hermitian_symmetry_of_real_samples():
    g = VelocityGrid(4, 3.0)
    rng = np.random.default_rng(5)
    c = transform_v(g, rng.standard_normal((g.M, g.M)))
    assert np.max(np.abs(c - np.conj(c[::-1, ::-1]))) < 1e-13


def test_parseval_identity():
    g = VelocityGrid(7, 6.1)
    rng = np.random.default_rng(9)
    vals = rng.standard_normal((g.M, g.M))
    c = transform_v(g, vals)
    grid_norm = lp_norm_v(g, vals, 2)
    spec_norm = sobolev_norm_v(g, c, 0)
    assert grid_norm == pytest.approx(spec_norm, rel=1e-12)


def test_sobolev_single_mode_closed_form():
    # ||a e^{i pi n.v/L}||_{H^1}^2 = (2L)^2 |a|^2 (1 + (pi n1/L)^2 + (pi n2/L)^2)
    g = VelocityGrid(4, 2.5)
    c = np.zeros((g.M, g.M), dtype=complex)
    a = 0.7 - 0.2j
    n = (2, -1)
    c[g.N + n[0], g.N + n[1]] = a
    want = (2 * g.L) * abs(a) * np.sqrt(
        1.0 + (np.pi * n[0] / g.L) ** 2 + (np.pi * n[1] / g.L) ** 2)
    assert sobolev_norm_v(g, c, 1) == pytest.approx(want, rel=1e-14)
    assert sobolev_norm_v(g, c, 0) == pytest.approx((2 * g.L) * abs(a), rel=1e-14)


def test_sobolev_order_monotone():
    g = VelocityGrid(5, 3.0)
    rng = np.random.default_rng(2)
    c = rng.standard_normal((g.M, g.M)) + 1j * rng.standard_normal((g.M, g.M))
    n0 = sobolev_norm_v(g, c, 0)
    n1 = sobolev_norm_v(g, c, 1)
    n2 = sobolev_norm_v(g, c, 2)
    assert n0 <= n1 <= n2


def test_lp_norms_constant_field():
    g = VelocityGrid(3, 2.0)
    vals = np.full((g.M, g.M), -0.4)
    assert lp_norm_v(g, vals, 1) == pytest.approx(0.4 * (2 * g.L) ** 2, rel=1e-14)
    assert lp_norm_v(g, vals, 2) == pytest.approx(0.4 * (2 * g.L), rel=1e-14)
    assert lp_norm_v(g, vals, np.inf) == pytest.approx(0.4, abs=0)
    with pytest.raises(ValueError):
        lp_norm_v(g, vals, 3)


def test_field_shape_validation():
    g = VelocityGrid(2, 1.0)
    with pytest.raises(ValueError):
        SpectralField(g, 1, np.zeros((1, g.M, g.M), dtype=complex))


def test_snapshot_roundtrip_bit_exact(tmp_path):
    g = VelocityGrid(3, 4.414213562373095)
    field, _, _ = random_field(g, K=2, seed=8)
    field.t = 0.625
    p = tmp_path / "f.ksgf"
    save_snapshot(p, field)
    loaded = load_snapshot(p)
    assert loaded.grid == field.grid
    assert loaded.K == field.K
    assert loaded.t == field.t
    assert np.array_equal(loaded.coeffs, field.coeffs)
    # byte-identical re-save
    save_snapshot(tmp_path / "g.ksgf", loaded)
    assert (tmp_path / "f.ksgf").read_bytes() == (tmp_path / "g.ksgf").read_bytes()


def test_snapshot_rejects_bad_magic(tmp_path):
    g = VelocityGrid(2, 1.0)
    field, _, _ = random_field(g, K=0, seed=1)
    p = tmp_path / "f.ksgf"
    save_snapshot(p, field)
    raw = bytearray(p.read_bytes())
    raw[0:5] = b"NOPE!"
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="magic"):
        load_snapshot(p)


def test_snapshot_rejects_truncation(tmp_path):
    g = VelocityGrid(2, 1.0)
    field, _, _ = random_field(g, K=1, seed=1)
    p = tmp_path / "f.ksgf"
    save_snapshot(p, field)
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(SnapshotError, match="truncated"):
        load_snapshot(p)
    p.write_bytes(raw[:10])
    with pytest.raises(SnapshotError):
        load_snapshot(p)
