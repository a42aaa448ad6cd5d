"""Collision evaluation: Galerkin right-hand side and quadrature oracles.

The production path contracts the precomputed weight table with the gPC
triple-product tensor:

    Q^k_n = sum_{i,j} S[k,i,j] sum_{l+m=n} G(l,m) f^i_l f^j_m.

The oracle path never touches the table: it evaluates the truncated
operator pointwise in velocity space,

    Q^R(f,f)(v) = int_{B_R} int_{S^1} Phi(|q|) b_ang
                  [f(v')f(v'_*) - f(v-q)f(v)] dsigma dq,
    v'   = v - (q - |q| sigma)/2,
    v'_* = v - (q + |q| sigma)/2,

with off-grid values of f taken from its truncated Fourier series (exact
for a band-limited field).  Comparing the two routes is the main
correctness gate for the weight table and the convolution.

The collision output of a degree-N field is band-limited to 2N, so
projecting it exactly requires sampling on a refined grid (grid.refined());
on the solver's own M-point grid the modes beyond N would alias into the
cube.  oracle_project accepts the evaluation grid explicitly for this
reason.
"""
from __future__ import annotations

import numpy as np

from .gpc import GpcBasis, eval_amplitude
from .kernel import KernelModel, eval_kinetic
from .spectral import SpectralField, VelocityGrid, forward_transform
from .weights import QuadSpec, WeightTable, _angular_rule, _radial_rule

S_THRESH = 1e-15


class CollisionWorkspace:
    """Reusable scratch buffers for eval_galerkin_rhs."""

    def __init__(self, grid: VelocityGrid, K: int):
        self.N = grid.N
        self.M = grid.M
        self.K = K
        self.acc = np.zeros((2 * grid.M - 1, 2 * grid.M - 1), dtype=np.complex128)
        self.tmp = np.zeros((grid.M, grid.M), dtype=np.complex128)

    def check(self, field: SpectralField) -> None:
        if (self.N, self.K) != (field.grid.N, field.K):
            raise ValueError(
                f"workspace built for (N={self.N}, K={self.K}), "
                f"field has (N={field.grid.N}, K={field.K})")


def _convolve(G: np.ndarray, fi: np.ndarray, fj: np.ndarray,
              acc: np.ndarray, tmp: np.ndarray, N: int, M: int) -> np.ndarray:
    """sum_{l+m=n} G(l,m) fi_l fj_m for n in the cube, by direct summation."""
    acc[:] = 0.0
    for li in range(M):
        Gl = G[li]
        fl = fi[li]
        for lj in range(M):
            a = fl[lj]
            if a == 0.0:
                continue
            np.multiply(Gl[lj], a, out=tmp)
            tmp *= fj
            acc[li: li + M, lj: lj + M] += tmp
    return acc[N: N + M, N: N + M].copy()


def eval_galerkin_rhs(field: SpectralField, table: WeightTable,
                      S: np.ndarray, ws: CollisionWorkspace | None = None,
                      ) -> np.ndarray:
    """Galerkin collision rhs; returns a (K+1, M, M) coefficient tensor.

    gPC pairs whose triple products all vanish (parity structure of the
    Legendre family) are skipped; so are identically-zero coefficient
    slices.  Both skips drop exact zeros only, keeping the evaluation
    deterministic.
    """
    grid = field.grid
    N, M, K = grid.N, grid.M, field.K
    if table.N != N or table.L != grid.L:
        raise ValueError(
            f"table built for (N={table.N}, L={table.L}), "
            f"grid has (N={N}, L={grid.L})")
    if S.shape != (K + 1, K + 1, K + 1):
        raise ValueError(f"S shape {S.shape} incompatible with K={K}")
    if ws is None:
        ws = CollisionWorkspace(grid, K)
    ws.check(field)

    f = field.coeffs
    out = np.zeros_like(f)
    live = [bool(np.any(f[i])) for i in range(K + 1)]
    use = np.any(np.abs(S) > S_THRESH, axis=0)
    for i in range(K + 1):
        if not live[i]:
            continue
        for j in range(K + 1):
            if not live[j] or not use[i, j]:
                continue
            C = _convolve(table.G, f[i], f[j], ws.acc, ws.tmp, N, M)
            for k in range(K + 1):
                s = S[k, i, j]
                if abs(s) > S_THRESH:
                    out[k] += s * C
    return out


def _shifted_eval(phased_base: np.ndarray, modes: np.ndarray, L: float,
                  h1: np.ndarray, h2: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Evaluate f(v - h) on the E-grid for a batch of shifts h.

    phased_base is the (M, M) coefficient slice; the shift only modulates
    each coefficient by e^{-i pi n.h / L}, so evaluation stays exact for
    band-limited f.
    """
    ph1 = np.exp(-1j * np.pi / L * np.outer(h1, modes))  # (C, M)
    ph2 = np.exp(-1j * np.pi / L * np.outer(h2, modes))
    phased = phased_base[None, :, :] * ph1[:, :, None] * ph2[:, None, :]
    t = np.tensordot(phased, E, axes=([1], [1]))   # (C, m, x)
    return np.tensordot(t, E, axes=([1], [1]))     # (C, x, y)


def oracle_collide_slice(grid: VelocityGrid, c: np.ndarray,
                         kernel: KernelModel, R: float, quad: QuadSpec,
                         eval_grid: VelocityGrid | None = None,
                         part: str = "direct") -> np.ndarray:
    """Direct quadrature of one velocity-coefficient slice.

    part selects the integrand: "direct" (single pass over gain minus
    loss), "gain", or "loss" (the product f * L^R[f]).  Returns values on
    eval_grid's collocation points.
    """
    if part not in ("direct", "gain", "loss"):
        raise ValueError(f"unknown part {part!r}")
    eg = eval_grid if eval_grid is not None else grid
    if eg.L != grid.L:
        raise ValueError("evaluation grid must share the period L")
    L, modes = grid.L, grid.modes
    rho, wr = _radial_rule(R, quad.n_r)
    phi, wphi = _angular_rule(quad.n_phi)
    theta, wsig = _angular_rule(quad.n_sigma)
    wsig_total = float(np.sum(wsig))
    cphi, sphi = np.cos(phi), np.sin(phi)
    csig, ssig = np.cos(theta), np.sin(theta)

    E = np.exp(1j * np.pi / L * np.outer(eg.nodes, modes))  # (Me, M)
    fvals = _shifted_eval(c, modes, L, np.zeros(1), np.zeros(1), E)[0]

    acc = np.zeros((eg.M, eg.M), dtype=np.complex128)
    radial_w = wr * rho * eval_kinetic(kernel, rho)
    for a in range(quad.n_r):
        q1, q2 = rho[a] * cphi, rho[a] * sphi          # (B,)
        if part in ("direct", "gain"):
            # batch over (phi, sigma): post-collisional shifts
            hm1 = ((q1[:, None] - rho[a] * csig) / 2.0).ravel()
            hm2 = ((q2[:, None] - rho[a] * ssig) / 2.0).ravel()
            hp1 = ((q1[:, None] + rho[a] * csig) / 2.0).ravel()
            hp2 = ((q2[:, None] + rho[a] * ssig) / 2.0).ravel()
            w_bc = (radial_w[a] * np.outer(wphi, wsig)).ravel()
            Gm = _shifted_eval(c, modes, L, hm1, hm2, E)
            Gp = _shifted_eval(c, modes, L, hp1, hp2, E)
            acc += np.tensordot(w_bc, Gm * Gp, axes=([0], [0]))
        if part in ("direct", "loss"):
            Lb = _shifted_eval(c, modes, L, q1, q2, E)  # f(v - q), batch B
            lb = np.tensordot(radial_w[a] * wphi * wsig_total, Lb,
                              axes=([0], [0]))
            if part == "direct":
                acc -= fvals * lb
            else:
                acc += fvals * lb
    return kernel.angular_constant * acc


def oracle_direct_qr(field: SpectralField, basis: GpcBasis,
                     kernel: KernelModel, R: float, quad: QuadSpec,
                     eval_grid: VelocityGrid | None = None,
                     part: str = "direct") -> np.ndarray:
    """Quadrature evaluation of Q^R(f,f) at every (v grid point, z node).

    The z amplitude b(z) scales each node's velocity slice; output shape is
    (Me, Me, Q).
    """
    if basis.K != field.K:
        raise ValueError(f"basis degree {basis.K} != field degree {field.K}")
    eg = eval_grid if eval_grid is not None else field.grid
    bz = eval_amplitude(kernel.b_coeffs, basis.nodes)
    out = np.empty((eg.M, eg.M, basis.quad_order), dtype=np.complex128)
    cz = np.tensordot(basis.psi, field.coeffs, axes=([0], [0]))  # (Q, M, M)
    for q in range(basis.quad_order):
        out[:, :, q] = bz[q] * oracle_collide_slice(
            field.grid, cz[q], kernel, R, quad, eval_grid=eg, part=part)
    return out


def oracle_project(eval_grid: VelocityGrid, basis: GpcBasis,
                   values: np.ndarray, target_grid: VelocityGrid,
                   ) -> np.ndarray:
    """Exact Galerkin projection of oracle output onto the target cube.

    Transforms on the evaluation grid and keeps modes {-N..N}.  Exact when
    eval_grid resolves the data's band (idempotent on band-limited data).
    """
    if eval_grid.N < target_grid.N or eval_grid.L != target_grid.L:
        raise ValueError("evaluation grid must contain the target cube")
    field = forward_transform(eval_grid, basis, np.asarray(values))
    off = eval_grid.N - target_grid.N
    M = target_grid.M
    return field.coeffs[:, off: off + M, off: off + M].copy()
