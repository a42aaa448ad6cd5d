"""Fourier spectral discretization of velocity space.

The solution is supported in a ball of radius S and periodized on the square
[-L, L]^2 with L = (3 + sqrt(2))/2 * S, the smallest box for which collision
circles of radius R = 2S do not wrap around and alias.  Velocity modes live
on the full tensor cube {-N..N}^2; the matching collocation grid has
M = 2N + 1 equispaced points per axis, so the discrete transform pair is
exactly invertible.

A SpectralField couples the velocity modes with gPC coefficients in z:
coeffs[k, i1, i2] is the (Psi_k, mode n = (i1 - N, i2 - N)) coefficient.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .gpc import GpcBasis, project_z

MAGIC = b"KSGF1"
_HEADER = struct.Struct("<5sIIIdd")  # magic, d, N, K, L, t


class SnapshotError(ValueError):
    """Raised for malformed snapshot files."""


def truncation_params(S: float) -> tuple[float, float]:
    """Collision truncation radius R and period half-width L for support S."""
    if S <= 0:
        raise ValueError(f"support radius S must be positive, got {S}")
    return 2.0 * S, (3.0 + np.sqrt(2.0)) / 2.0 * S


class VelocityGrid:
    """Mode cube {-N..N}^2 with its M = 2N+1 point collocation grid."""

    def __init__(self, N: int, L: float):
        if N < 1:
            raise ValueError(f"mode bound N must be >= 1, got {N}")
        if L <= 0:
            raise ValueError(f"period half-width L must be positive, got {L}")
        self.N = int(N)
        self.L = float(L)
        self.M = 2 * self.N + 1
        self.modes = np.arange(-self.N, self.N + 1)
        self.nodes = -self.L + 2.0 * self.L * np.arange(self.M) / self.M
        phase = np.pi * np.outer(self.modes, self.nodes) / self.L
        self.fwd = np.exp(-1j * phase) / self.M   # (mode, node)
        self.inv = np.exp(1j * phase).T           # (node, mode)

    def __eq__(self, other):
        return (isinstance(other, VelocityGrid)
                and self.N == other.N and self.L == other.L)

    def __repr__(self):
        return f"VelocityGrid(N={self.N}, L={self.L!r})"

    def refined(self) -> "VelocityGrid":
        """Grid resolving the doubled band {-2N..2N}, for alias-free products."""
        return VelocityGrid(2 * self.N, self.L)


@dataclass
class SpectralField:
    """Coefficient tensor (K+1, M, M) at time t on a velocity grid."""

    grid: VelocityGrid
    K: int
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        want = (self.K + 1, self.grid.M, self.grid.M)
        if self.coeffs.shape != want:
            raise ValueError(f"coeffs shape {self.coeffs.shape} != {want}")
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.K, self.coeffs.copy(), self.t)


def transform_v(grid: VelocityGrid, values: np.ndarray) -> np.ndarray:
    """Discrete Fourier analysis on the first two axes (nodes -> modes)."""
    c = np.tensordot(grid.fwd, values, axes=([1], [0]))
    c = np.tensordot(grid.fwd, c, axes=([1], [1]))
    return np.swapaxes(c, 0, 1)


def itransform_v(grid: VelocityGrid, coeffs: np.ndarray) -> np.ndarray:
    """Evaluate mode coefficients on the collocation grid (modes -> nodes)."""
    f = np.tensordot(grid.inv, coeffs, axes=([1], [0]))
    f = np.tensordot(grid.inv, f, axes=([1], [1]))
    return np.swapaxes(f, 0, 1)


def forward_transform(grid: VelocityGrid, basis: GpcBasis,
                      values: np.ndarray, t: float = 0.0) -> SpectralField:
    """Project node values (M, M, Q) onto velocity modes and the gPC basis."""
    if values.shape != (grid.M, grid.M, basis.quad_order):
        raise ValueError(
            f"values shape {values.shape} != "
            f"{(grid.M, grid.M, basis.quad_order)}"
        )
    c = transform_v(grid, np.asarray(values))
    coeffs = np.moveaxis(project_z(c, basis), -1, 0)
    return SpectralField(grid, basis.K, np.ascontiguousarray(coeffs), t)


def inverse_transform(field: SpectralField, basis: GpcBasis) -> np.ndarray:
    """Evaluate a field at the (M, M, Q) collocation x quadrature nodes."""
    if basis.K != field.K:
        raise ValueError(f"basis degree {basis.K} != field degree {field.K}")
    c = np.tensordot(basis.psi, field.coeffs, axes=([0], [0]))  # (Q, M, M)
    return itransform_v(field.grid, np.moveaxis(c, 0, -1))


def sobolev_weights(grid: VelocityGrid, k: int) -> np.ndarray:
    """Mode weights sum_{|nu| <= k} prod (pi n_i / L)^{2 nu_i} on the cube."""
    if k < 0:
        raise ValueError(f"Sobolev order must be >= 0, got {k}")
    xi = np.pi * grid.modes / grid.L
    w = np.zeros((grid.M, grid.M))
    for nu1 in range(k + 1):
        for nu2 in range(k + 1 - nu1):
            w += np.outer(xi**(2 * nu1), xi**(2 * nu2))
    return w


def sobolev_norm_v(grid: VelocityGrid, coeffs2d: np.ndarray, k: int) -> float:
    """H^k norm in v of one coefficient slice, via Parseval on [-L, L]^2."""
    w = sobolev_weights(grid, k)
    return float(np.sqrt((2.0 * grid.L) ** 2
                         * np.sum(w * np.abs(coeffs2d) ** 2)))


def lp_norm_v(grid: VelocityGrid, values2d: np.ndarray, p) -> float:
    """L^p norm (p in {1, 2, inf}) of grid values by cell quadrature."""
    a = np.abs(values2d)
    cell = (2.0 * grid.L / grid.M) ** 2
    if p == 1:
        return float(np.sum(a) * cell)
    if p == 2:
        return float(np.sqrt(np.sum(a**2) * cell))
    if p in (np.inf, "inf"):
        return float(np.max(a))
    raise ValueError(f"unsupported exponent {p!r}; use 1, 2 or inf")


def save_snapshot(path, field: SpectralField) -> None:
    """Write a field to the KSGF1 binary format (bit-exact round trip)."""
    header = _HEADER.pack(MAGIC, 2, field.grid.N, field.K,
                          field.grid.L, field.t)
    data = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def load_snapshot(path) -> SpectralField:
    """Read a KSGF1 snapshot; rejects wrong magic, dimension, or short files."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: file shorter than the header")
    magic, d, N, K, L, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if d != 2:
        raise SnapshotError(f"{path}: velocity dimension {d} unsupported")
    M = 2 * N + 1
    want = (K + 1) * M * M * 16
    body = raw[_HEADER.size:]
    if len(body) != want:
        raise SnapshotError(
            f"{path}: payload {len(body)} bytes, expected {want} (truncated?)"
        )
    coeffs = np.frombuffer(body, dtype="<c16").reshape(K + 1, M, M).copy()
    return SpectralField(VelocityGrid(N, L), K, coeffs, t)
