"""Polynomial chaos basis in the random variable z.

The uncertain kernel amplitude b(z) lives on z in [-1, 1] with the uniform
probability density pi(z) = 1/2.  The matching orthonormal family is the
normalized Legendre basis Psi_k(z) = sqrt(2k+1) P_k(z); everything here
(projection, differentiation, triple products) is expressed in that basis.
Quadrature is Gauss-Legendre with weights rescaled to sum to one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly


@dataclass(frozen=True)
class GpcBasis:
    """Normalized Legendre basis of degree K with its quadrature rule.

    nodes/weights are the Gauss-Legendre rule on [-1, 1] rescaled to the
    uniform probability measure (weights sum to 1).  psi[k, q] holds
    Psi_k(z_q); proj[k, q] = w_q * Psi_k(z_q) so that coefficients are
    values @ proj.T.
    """

    K: int
    quad_order: int
    nodes: np.ndarray
    weights: np.ndarray
    psi: np.ndarray
    proj: np.ndarray

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"gpc degree K must be >= 0, got {self.K}")
        if self.quad_order < self.K + 1:
            raise ValueError(
                f"quad_order {self.quad_order} too small for K={self.K}; "
                f"need at least K+1 nodes for an exact Gram matrix"
            )


def eval_basis(k: int, z) -> np.ndarray:
    """Evaluate Psi_k = sqrt(2k+1) P_k at z (scalar or array)."""
    coeff = np.zeros(k + 1)
    coeff[k] = np.sqrt(2 * k + 1)
    return npleg.legval(np.asarray(z, dtype=float), coeff)


def build_basis(K: int, quad_order: int | None = None) -> GpcBasis:
    """Construct the degree-K basis with a quadrature rule.

    The default order 2K+8 integrates triple products against kernel
    amplitudes of degree <= 2 exactly, with headroom.
    """
    if quad_order is None:
        quad_order = 2 * K + 8
    nodes, w = npleg.leggauss(quad_order)
    weights = w / 2.0  # uniform probability measure on [-1, 1]
    psi = np.empty((K + 1, quad_order))
    for k in range(K + 1):
        psi[k] = eval_basis(k, nodes)
    return GpcBasis(K=K, quad_order=quad_order, nodes=nodes, weights=weights,
                    psi=psi, proj=psi * weights)


def project_z(values: np.ndarray, basis: GpcBasis) -> np.ndarray:
    """Project node values (..., Q) onto the basis, returning (..., K+1)."""
    values = np.asarray(values)
    if values.shape[-1] != basis.quad_order:
        raise ValueError(
            f"last axis {values.shape[-1]} != quadrature order {basis.quad_order}"
        )
    return values @ basis.proj.T


def expand_z(coeffs: np.ndarray, basis: GpcBasis) -> np.ndarray:
    """Evaluate a coefficient array (..., K+1) at the quadrature nodes."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-1] != basis.K + 1:
        raise ValueError(f"last axis {coeffs.shape[-1]} != K+1 = {basis.K + 1}")
    return coeffs @ basis.psi


def z_derivative_coeffs(coeffs: np.ndarray, K: int) -> np.ndarray:
    """Coefficients of d/dz applied to a basis expansion.

    Exact: the derivative of a degree-K polynomial stays in the space.
    Output has the same length K+1 with the top coefficient zero.
    """
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-1] != K + 1:
        raise ValueError(f"last axis {coeffs.shape[-1]} != K+1 = {K + 1}")
    scale = np.sqrt(2 * np.arange(K + 1) + 1)
    plain = coeffs * scale
    out = np.zeros_like(coeffs)
    if K > 0:
        der = npleg.legder(plain, axis=-1)  # length K
        out[..., :K] = der / scale[:K]
    return out


def eval_amplitude(b_coeffs, z) -> np.ndarray:
    """Evaluate the kernel amplitude polynomial b(z) = sum b_j z^j."""
    return nppoly.polyval(np.asarray(z, dtype=float), np.asarray(b_coeffs, dtype=float))


def triple_product_tensor(basis: GpcBasis, b_coeffs) -> np.ndarray:
    """Galerkin coupling tensor S[k, i, j] = E[b(z) Psi_k Psi_i Psi_j].

    Computed by quadrature (exact given the order check below), then
    symmetrized over index permutations so the discrete tensor carries the
    full symmetry of the integral exactly.
    """
    b_coeffs = np.atleast_1d(np.asarray(b_coeffs, dtype=float))
    deg_b = len(b_coeffs) - 1
    # exactness: 2Q - 1 >= 3K + deg b
    need = (3 * basis.K + deg_b + 2) // 2
    if basis.quad_order < need:
        raise ValueError(
            f"quad_order {basis.quad_order} cannot integrate triple products "
            f"of degree 3K+{deg_b} exactly; need >= {need}"
        )
    bz = eval_amplitude(b_coeffs, basis.nodes)
    S = np.einsum("q,kq,iq,jq->kij", basis.weights * bz, basis.psi, basis.psi,
                  basis.psi)
    # one canonical value per index orbit so permuted entries are bit-equal
    out = np.empty_like(S)
    n = basis.K + 1
    for a in range(n):
        for b in range(a, n):
            for c in range(b, n):
                v = (S[a, b, c] + S[a, c, b] + S[b, a, c]
                     + S[b, c, a] + S[c, a, b] + S[c, b, a]) / 6.0
                for i, j, k in {(a, b, c), (a, c, b), (b, a, c),
                                (b, c, a), (c, a, b), (c, b, a)}:
                    out[i, j, k] = v
    return out
