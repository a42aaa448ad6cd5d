"""Galerkin weight table for the truncated collision operator.

The quadratic Galerkin form of the truncated operator is
Q_n = sum_{l+m=n} G(l, m) f_l f_m with

  G(l, m) = int_{B_R} e^{-i pi m.q/L}
            [ int_{S^1} Phi(|q|) b_ang (e^{i pi (l+m).(q-|q|s)/(2L)} - 1) ds ] dq.

Quadrature: Gauss-Legendre radially on [0, R], uniform (trapezoid) in both
angles.  Because the angular kernel is a constant, the inner sigma-sum only
depends on (l+m, |q|) and the phi-sum on (l-m, |q|), so the build factors
through two small tables and each l-row of G is an O(M^2 n_r) contraction
of contiguous slices.  This is an exact regrouping of the quadrature sum:
same nodes, same weights, same values up to float reassociation.

The table is z-independent: the uncertain amplitude b(z) enters through the
gPC triple-product tensor, not here.

Two structural identities hold exactly in exact arithmetic and are enforced
on the computed table after measuring the raw quadrature defects:
G(l, -l) = 0 (mass conservation) and G(-l, -m) = conj G(l, m) (realness).
"""
from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kernel import KernelModel, eval_kinetic
from .spectral import VelocityGrid

MAGIC = b"KSGW1"
# N, L, R, gamma, b_ang, n_r, n_phi, n_sigma, antidiag defect, hermitian
# defect, parameter hash, payload sha256
_HEADER = struct.Struct("<5sI4d3I2d32s32s")

RAW_DEFECT_TOL = 1e-12


class WeightCacheError(ValueError):
    """Base class for weight-cache file problems."""


class CacheParamsMismatch(WeightCacheError):
    """Cached table was built for different parameters."""


class CacheCorrupt(WeightCacheError):
    """Cache payload is truncated or fails its checksum."""


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature orders: radial Gauss-Legendre, uniform phi and sigma."""

    n_r: int = 32
    n_phi: int = 64
    n_sigma: int = 64

    def __post_init__(self):
        if min(self.n_r, self.n_phi, self.n_sigma) < 2:
            raise ValueError(f"quadrature orders must be >= 2, got {self}")

    def doubled(self) -> "QuadSpec":
        return QuadSpec(2 * self.n_r, 2 * self.n_phi, 2 * self.n_sigma)


@dataclass
class WeightTable:
    N: int
    L: float
    R: float
    gamma: float
    angular_constant: float
    quad: QuadSpec
    G: np.ndarray               # (M, M, M, M), [l1, l2, m1, m2] index order
    antidiag_defect: float      # raw |G(l,-l)| max before cleanup
    hermitian_defect: float     # raw |G(-l,-m) - conj G(l,m)| max before cleanup

    @property
    def param_hash(self) -> bytes:
        return param_hash(self.N, self.L, self.R, self.gamma,
                          self.angular_constant, self.quad)


def param_hash(N: int, L: float, R: float, gamma: float,
               angular_constant: float, quad: QuadSpec) -> bytes:
    """Content hash identifying a table build; K plays no role."""
    h = hashlib.sha256()
    h.update(MAGIC)
    h.update(struct.pack("<I4d3I", N, L, R, gamma, angular_constant,
                         quad.n_r, quad.n_phi, quad.n_sigma))
    return h.digest()


def _radial_rule(R: float, n: int):
    x, w = leggauss(n)
    return R * (x + 1.0) / 2.0, R * w / 2.0


def _angular_rule(n: int):
    return 2.0 * np.pi * np.arange(n) / n, np.full(n, 2.0 * np.pi / n)


def compute_weight_table(grid: VelocityGrid, kernel: KernelModel, R: float,
                         quad: QuadSpec | None = None, threads: int = 1,
                         ) -> WeightTable:
    """Build the weight table by quadrature.

    `threads` splits the per-l assembly loop across a thread pool; every
    thread writes disjoint rows of the output, so the result is identical
    bit for bit regardless of the thread count.
    """
    if quad is None:
        quad = QuadSpec()
    if R <= 0:
        raise ValueError(f"truncation radius R must be positive, got {R}")
    N, L, M = grid.N, grid.L, grid.M

    rho, wr = _radial_rule(R, quad.n_r)
    phi, wphi = _angular_rule(quad.n_phi)
    theta, wsig = _angular_rule(quad.n_sigma)
    crad = wr * rho * eval_kinetic(kernel, rho)          # radial measure x Phi
    coef = np.pi / (2.0 * L)
    U = np.arange(-2 * N, 2 * N + 1)

    # D1[u, a] = sum_b w_phi e^{+i pi rho_a u.qhat_b / (2L)}  (u = l - m)
    # T[s, a]  = sum_c w_sig e^{-i pi rho_a s.sigma_c / (2L)} (s = l + m)
    D1 = np.zeros((4 * N + 1, 4 * N + 1, quad.n_r), dtype=np.complex128)
    for b in range(quad.n_phi):
        proj = coef * (U[:, None] * np.cos(phi[b]) + U[None, :] * np.sin(phi[b]))
        D1 += wphi[b] * np.exp(1j * proj[:, :, None] * rho)
    T = np.zeros_like(D1)
    for c in range(quad.n_sigma):
        proj = coef * (U[:, None] * np.cos(theta[c]) + U[None, :] * np.sin(theta[c]))
        T += wsig[c] * np.exp(-1j * proj[:, :, None] * rho)

    Wsig = float(np.sum(wsig))
    Tc = T * crad
    D1f = np.ascontiguousarray(D1[::-1, ::-1, :])
    # loss term depends on m only: u = -2m has index 4N - 2 m_idx
    lossC = Wsig * (np.ascontiguousarray(D1[4 * N:: -2, 4 * N:: -2, :]) @ crad)
    b_ang = kernel.angular_constant

    G = np.empty((M, M, M, M), dtype=np.complex128)

    def fill(rows):
        for li in rows:
            for lj in range(M):
                g = np.einsum(
                    "mna,mna->mn",
                    D1f[2 * N - li: 4 * N + 1 - li, 2 * N - lj: 4 * N + 1 - lj, :],
                    Tc[li: li + M, lj: lj + M, :])
                G[li, lj] = b_ang * (g - lossC)

    if threads <= 1:
        fill(range(M))
    else:
        chunks = np.array_split(np.arange(M), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, chunks))

    # measure raw defects, then enforce the exact identities
    idx = np.arange(M)
    anti_rows = (idx[:, None], idx[None, :],
                 M - 1 - idx[:, None], M - 1 - idx[None, :])
    scale = float(np.max(np.abs(G)))
    antidiag = float(np.max(np.abs(G[anti_rows])))
    flip = np.conj(G[::-1, ::-1, ::-1, ::-1])
    hermit = float(np.max(np.abs(G - flip)))
    if antidiag > RAW_DEFECT_TOL * scale or hermit > RAW_DEFECT_TOL * scale:
        raise FloatingPointError(
            f"weight quadrature defects exceed {RAW_DEFECT_TOL} relative: "
            f"antidiagonal {antidiag:.3e}, hermitian {hermit:.3e}, "
            f"scale {scale:.3e}")
    G += flip
    G *= 0.5
    G[anti_rows] = 0.0

    return WeightTable(N=N, L=L, R=R, gamma=kernel.gamma,
                       angular_constant=b_ang, quad=quad, G=G,
                       antidiag_defect=antidiag, hermitian_defect=hermit)


def naive_weight_entries(grid: VelocityGrid, kernel: KernelModel, R: float,
                         quad: QuadSpec, lm_pairs) -> np.ndarray:
    """Literal quadrature of the weight integral for selected (l, m) pairs.

    Deliberately unfactored (full node tensor per entry); serves as the
    independent reference for the fast builder.  Cost grows like
    n_r * n_phi * n_sigma per pair, so keep the pair list small.
    """
    L = grid.L
    rho, wr = _radial_rule(R, quad.n_r)
    phi, wphi = _angular_rule(quad.n_phi)
    theta, wsig = _angular_rule(quad.n_sigma)

    # flattened (radial x phi) nodes of the q-integral
    q1 = (rho[:, None] * np.cos(phi)).ravel()
    q2 = (rho[:, None] * np.sin(phi)).ravel()
    rr = np.repeat(rho, quad.n_phi)
    wq = (wr[:, None] * wphi * rho[:, None]
          * eval_kinetic(kernel, rho)[:, None]).ravel()
    s1, s2 = np.cos(theta), np.sin(theta)

    out = np.empty(len(lm_pairs), dtype=np.complex128)
    c = np.pi / (2.0 * L)
    for i, (l, m) in enumerate(lm_pairs):
        l1, l2 = l
        m1, m2 = m
        p1, p2 = l1 + m1, l2 + m2
        inner = np.exp(1j * c * (
            (p1 * (q1[:, None] - rr[:, None] * s1)
             + p2 * (q2[:, None] - rr[:, None] * s2)))) - 1.0
        inner = inner @ wsig
        phase = np.exp(-1j * (np.pi / L) * (m1 * q1 + m2 * q2))
        out[i] = kernel.angular_constant * np.sum(wq * phase * inner)
    return out


def save_table(path, table: WeightTable) -> None:
    """Write a table to the KSGW1 cache format."""
    payload = np.ascontiguousarray(table.G, dtype="<c16").tobytes()
    header = _HEADER.pack(
        MAGIC, table.N, table.L, table.R, table.gamma,
        table.angular_constant, table.quad.n_r, table.quad.n_phi,
        table.quad.n_sigma, table.antidiag_defect, table.hermitian_defect,
        table.param_hash, hashlib.sha256(payload).digest())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_table(path, expect_hash: bytes | None = None) -> WeightTable:
    """Read a KSGW1 cache.

    If expect_hash is given (from param_hash of the wanted build), a stale
    cache raises CacheParamsMismatch.  Truncated or bit-flipped payloads
    raise CacheCorrupt via length and checksum verification.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CacheCorrupt(f"{path}: shorter than the KSGW1 header")
    (magic, N, L, R, gamma, b_ang, n_r, n_phi, n_sigma, antidiag, hermit,
     phash, dhash) = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise WeightCacheError(f"{path}: bad magic {magic!r}")
    quad = QuadSpec(n_r, n_phi, n_sigma)
    if phash != param_hash(N, L, R, gamma, b_ang, quad):
        raise CacheCorrupt(f"{path}: header parameter hash does not match "
                           f"header fields")
    if expect_hash is not None and phash != expect_hash:
        raise CacheParamsMismatch(
            f"{path}: cache was built for different parameters "
            f"(hash {phash.hex()[:12]}, wanted {expect_hash.hex()[:12]})")
    M = 2 * N + 1
    payload = raw[_HEADER.size:]
    if len(payload) != M**4 * 16:
        raise CacheCorrupt(
            f"{path}: payload {len(payload)} bytes, expected {M**4 * 16} "
            f"(truncated?)")
    if hashlib.sha256(payload).digest() != dhash:
        raise CacheCorrupt(f"{path}: payload checksum mismatch")
    G = np.frombuffer(payload, dtype="<c16").reshape(M, M, M, M).copy()
    return WeightTable(N=N, L=L, R=R, gamma=gamma, angular_constant=b_ang,
                       quad=quad, G=G, antidiag_defect=antidiag,
                       hermitian_defect=hermit)


def cache_filename(N: int, L: float, R: float, gamma: float,
                   angular_constant: float, quad: QuadSpec) -> str:
    h = param_hash(N, L, R, gamma, angular_constant, quad)
    return f"gtable_N{N}_{h.hex()[:12]}.ksgw"
