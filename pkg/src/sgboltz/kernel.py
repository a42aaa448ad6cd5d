"""Collision kernel model B(|q|, sigma, z) = b(z) * |q|^gamma * b_ang.

Variable-hard-sphere form with an isotropic angular part.  The default
angular constant 1/(2 pi) normalizes the angular integral over the unit
circle to one (Grad cutoff).  The uncertain amplitude b(z) is a polynomial
of degree <= 2 in z and must stay strictly positive on [-1, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gpc import eval_amplitude

ANGULAR_DEFAULT = 1.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class KernelModel:
    gamma: float
    b_coeffs: tuple = (1.0,)
    angular_constant: float = ANGULAR_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "b_coeffs",
                           tuple(float(c) for c in np.atleast_1d(self.b_coeffs)))


def eval_kinetic(kernel: KernelModel, r) -> np.ndarray:
    """Kinetic factor |q|^gamma; the Maxwell case gamma=0 is identically 1."""
    r = np.asarray(r, dtype=float)
    if kernel.gamma == 0.0:
        return np.ones_like(r)
    return r**kernel.gamma


def validate_kernel(kernel: KernelModel) -> None:
    """Raise ValueError (with a kernel.* key path) on an unusable model."""
    if not 0.0 <= kernel.gamma <= 1.0:
        raise ValueError(
            f"kernel.gamma: must lie in [0, 1], got {kernel.gamma}")
    if len(kernel.b_coeffs) > 3:
        raise ValueError(
            f"kernel.b: amplitude degree {len(kernel.b_coeffs) - 1} > 2 "
            f"not supported")
    if kernel.angular_constant <= 0.0 or not np.isfinite(kernel.angular_constant):
        raise ValueError(
            f"kernel.angular_constant: must be positive and finite, "
            f"got {kernel.angular_constant}")
    # strict positivity of b on [-1, 1], checked on a dense sample
    z = np.linspace(-1.0, 1.0, 2001)
    bz = eval_amplitude(kernel.b_coeffs, z)
    if np.min(bz) <= 0.0:
        zbad = z[int(np.argmin(bz))]
        raise ValueError(
            f"kernel.b: amplitude must be strictly positive on [-1, 1]; "
            f"b({zbad:.4f}) = {np.min(bz):.4g}")
