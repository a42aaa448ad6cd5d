"""Run diagnostics: masses, moments, mixed Sobolev norms, negative part.

Mixed norms follow the working spaces of the error analysis: velocity
regularity up to H^k_v combined with z-regularity up to H^1_z.  The
z-derivative is exact gPC differentiation; z-integrals use the basis
quadrature; velocity norms are Parseval sums (L^2-type) or uniform-cell
quadrature (L^1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gpc import GpcBasis, eval_basis, z_derivative_coeffs
from .spectral import (
    SpectralField,
    inverse_transform,
    forward_transform,
    sobolev_weights,
    transform_v,
)

MASS_IMAG_TOL = 1e-12


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    per_mode_mass: tuple
    density_mean: float
    density_std: float
    momentum_x_mean: float
    momentum_x_std: float
    momentum_y_mean: float
    momentum_y_std: float
    energy_mean: float
    energy_std: float
    norm_l1v_h1z: float
    norm_l2v_h1z: float
    norm_h1v_h1z: float
    neg_norm: float
    err_l2h1: float | None = None


def _dz_coeffs_arr(coeffs: np.ndarray, K: int) -> np.ndarray:
    """gPC z-derivative applied to the whole coefficient tensor."""
    arr = np.moveaxis(coeffs, 0, -1)
    return np.ascontiguousarray(
        np.moveaxis(z_derivative_coeffs(arr, K), -1, 0))


def per_mode_mass(field: SpectralField) -> np.ndarray:
    """(2L)^d times the zero velocity mode of each gPC slice."""
    N = field.grid.N
    c0 = field.coeffs[:, N, N] * (2.0 * field.grid.L) ** 2
    scale = max(1.0, float(np.max(np.abs(c0.real))))
    imag = float(np.max(np.abs(c0.imag)))
    if imag > MASS_IMAG_TOL * scale:
        raise ValueError(
            f"mass has imaginary residue {imag:.3e}; field is not Hermitian")
    return c0.real.copy()


def mixed_sobolev_norm(field: SpectralField, basis: GpcBasis,
                       k: int, r: int) -> float:
    """Norm of H^k_v H^r_z type: sum of squared L^2 norms of d_v^nu d_z^mu f
    over |nu| <= k, mu <= r, square-rooted.  Velocity part by Parseval,
    z part by basis quadrature of per-node velocity norms."""
    if r not in (0, 1):
        raise ValueError(f"z-regularity order r={r} unsupported; r <= 1 only")
    grid = field.grid
    wsob = sobolev_weights(grid, k)
    area = (2.0 * grid.L) ** 2
    total = 0.0
    coeffs = field.coeffs
    for mu in range(r + 1):
        if mu == 1:
            coeffs = _dz_coeffs_arr(field.coeffs, field.K)
        znode = np.tensordot(basis.psi, coeffs, axes=([0], [0]))  # (Q, M, M)
        sq = np.abs(znode) ** 2
        total += area * float(np.einsum("q,qxy,xy->", basis.weights, sq, wsob))
    return float(np.sqrt(total))


def l1v_h1z_norm(field: SpectralField, basis: GpcBasis) -> float:
    """(sum_{mu<=1} ||d_z^mu f||^2_{L^1_v L^2_z})^{1/2} by grid quadrature."""
    grid = field.grid
    cell = (2.0 * grid.L / grid.M) ** 2
    total = 0.0
    for mu in range(2):
        coeffs = field.coeffs if mu == 0 else _dz_coeffs_arr(field.coeffs,
                                                             field.K)
        f = SpectralField(grid, field.K, coeffs, field.t)
        vals = inverse_transform(f, basis)           # (M, M, Q) at the nodes
        # L^2_z pointwise in v, then L^1 over the grid
        l2z = np.sqrt(np.tensordot(np.abs(vals) ** 2, basis.weights,
                                   axes=([2], [0])))
        total += (float(np.sum(l2z)) * cell) ** 2
    return float(np.sqrt(total))


def negative_part_norm(field: SpectralField, basis: GpcBasis) -> float:
    """L^2_v H^1_z norm of the negative part f^- = max(-f, 0).

    The z-derivative uses d_z f^- = -1_{f<0} d_z f, valid almost
    everywhere; the strict inequality on the null set {f = 0} makes the
    result exactly zero for nonnegative sampled fields.
    """
    grid = field.grid
    vals = inverse_transform(field, basis).real
    dz = SpectralField(grid, field.K,
                       _dz_coeffs_arr(field.coeffs, field.K), field.t)
    dzvals = inverse_transform(dz, basis).real
    mask = vals < 0.0
    fm = np.where(mask, -vals, 0.0)
    dfm = np.where(mask, -dzvals, 0.0)
    cell = (2.0 * grid.L / grid.M) ** 2
    per_node = np.sum(fm**2 + dfm**2, axis=(0, 1)) * cell
    return float(np.sqrt(np.dot(basis.weights, per_node)))


def error_vs_reference(field: SpectralField, basis: GpcBasis,
                       reference_xy, t: float | None = None) -> float:
    """L^2_v H^1_z norm of P_N^K f_ref - f.

    reference_xy(t, vx, vy, z) evaluates the reference pointwise; it is
    projected through the same transform as the solution, so this measures
    the dynamic error within the projected space, not the projection tail.
    """
    grid = field.grid
    if t is None:
        t = field.t
    vx, vy = grid.nodes[:, None], grid.nodes[None, :]
    vals = np.empty((grid.M, grid.M, basis.quad_order))
    for q, z in enumerate(basis.nodes):
        vals[:, :, q] = reference_xy(t, vx, vy, z)
    ref = forward_transform(grid, basis, vals, t=t)
    diff = SpectralField(grid, field.K, ref.coeffs - field.coeffs, t)
    return mixed_sobolev_norm(diff, basis, 0, 1)


def error_vs_reference_znodes(field: SpectralField, reference_xy,
                              reference_dz_xy, znodes, zweights,
                              t: float | None = None) -> float:
    """L^2_v H^1_z error against a reference kept exact in z.

    The reference is projected in velocity only, separately at each z
    quadrature node; the field is evaluated at the same nodes from its
    gPC expansion.  Unlike error_vs_reference, the z-truncation tail of
    the solution stays visible, which is what a K-refinement study must
    measure (the K-projected metric saturates at the velocity error).
    """
    grid = field.grid
    if t is None:
        t = field.t
    vx, vy = grid.nodes[:, None], grid.nodes[None, :]
    psi = np.stack([eval_basis(k, np.asarray(znodes, dtype=float))
                    for k in range(field.K + 1)])
    dzc = _dz_coeffs_arr(field.coeffs, field.K)
    area = (2.0 * grid.L) ** 2
    total = 0.0
    for idx, (s, w) in enumerate(zip(znodes, zweights)):
        cref = transform_v(grid, reference_xy(t, vx, vy, s))
        cdzref = transform_v(grid, reference_dz_xy(t, vx, vy, s))
        cf = np.tensordot(psi[:, idx], field.coeffs, axes=([0], [0]))
        cdzf = np.tensordot(psi[:, idx], dzc, axes=([0], [0]))
        total += w * area * (np.sum(np.abs(cref - cf) ** 2)
                             + np.sum(np.abs(cdzref - cdzf) ** 2))
    return float(np.sqrt(total))


def _moment_vectors(grid):
    """Closed-form integrals of e^{i pi n v / L} against 1, v, v^2 on [-L, L]."""
    n = grid.modes.astype(float)
    L = grid.L
    sign = np.where(grid.modes % 2 == 0, 1.0, -1.0)
    I1 = np.zeros(grid.M, dtype=np.complex128)
    I2 = np.full(grid.M, 2.0 * L**3 / 3.0, dtype=np.complex128)
    nz = grid.modes != 0
    I1[nz] = -2j * sign[nz] * L**2 / (np.pi * n[nz])
    I2[nz] = 4.0 * sign[nz] * L**3 / (np.pi**2 * n[nz] ** 2)
    return I1, I2


def moment_stats(field: SpectralField) -> dict:
    """Mean/std over z of density, momentum, kinetic energy.

    Moments are exact integrals of the truncated expansion; z-statistics
    come from each moment's own gPC coefficients (mean = degree-0
    coefficient, variance = sum of squares of the rest).
    """
    grid = field.grid
    N, L = grid.N, grid.L
    I1, I2 = _moment_vectors(grid)
    c_x = field.coeffs[:, :, N]        # n2 = 0 line, pairs with I0(n2) = 2L
    c_y = field.coeffs[:, N, :]        # n1 = 0 line
    density = (2.0 * L) ** 2 * field.coeffs[:, N, N]
    mom_x = 2.0 * L * (c_x @ I1)
    mom_y = 2.0 * L * (c_y @ I1)
    energy = 2.0 * L * (c_x @ I2 + c_y @ I2)

    def stats(a):
        a = a.real
        return float(a[0]), float(np.sqrt(np.sum(a[1:] ** 2)))

    dm, ds = stats(density)
    mxm, mxs = stats(mom_x)
    mym, mys = stats(mom_y)
    em, es = stats(energy)
    return {
        "density_mean": dm, "density_std": ds,
        "momentum_x_mean": mxm, "momentum_x_std": mxs,
        "momentum_y_mean": mym, "momentum_y_std": mys,
        "energy_mean": em, "energy_std": es,
    }


def make_record(field: SpectralField, basis: GpcBasis, step: int,
                reference_xy=None) -> DiagnosticsRecord:
    masses = per_mode_mass(field)
    mom = moment_stats(field)
    err = None
    if reference_xy is not None:
        err = error_vs_reference(field, basis, reference_xy)
    return DiagnosticsRecord(
        t=field.t, step=step, per_mode_mass=tuple(masses),
        norm_l1v_h1z=l1v_h1z_norm(field, basis),
        norm_l2v_h1z=mixed_sobolev_norm(field, basis, 0, 1),
        norm_h1v_h1z=mixed_sobolev_norm(field, basis, 1, 1),
        neg_norm=negative_part_norm(field, basis),
        err_l2h1=err, **mom)


def fmt17(x) -> str:
    """17-significant-digit decimal, enough to round-trip float64."""
    return format(float(x), ".17g")


def write_diagnostics_csv(path, records, K: int) -> None:
    """One row per record; deterministic byte-for-byte given the records."""
    cols = (["t", "step"]
            + [f"mass_k{k}" for k in range(K + 1)]
            + ["density_mean", "density_std", "momentum_x_mean",
               "momentum_x_std", "momentum_y_mean", "momentum_y_std",
               "energy_mean", "energy_std", "norm_l1v_h1z", "norm_l2v_h1z",
               "norm_h1v_h1z", "neg_norm", "err_l2h1"])
    lines = [",".join(cols)]
    for r in records:
        row = [fmt17(r.t), str(r.step)]
        row += [fmt17(m) for m in r.per_mode_mass]
        row += [fmt17(v) for v in (
            r.density_mean, r.density_std, r.momentum_x_mean,
            r.momentum_x_std, r.momentum_y_mean, r.momentum_y_std,
            r.energy_mean, r.energy_std, r.norm_l1v_h1z, r.norm_l2v_h1z,
            r.norm_h1v_h1z, r.neg_norm)]
        row.append("" if r.err_l2h1 is None else fmt17(r.err_l2h1))
        lines.append(",".join(row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
