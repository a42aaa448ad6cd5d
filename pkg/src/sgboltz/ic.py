"""Initial-condition families and the exact BKW reference solution.

The BKW family is the classical self-similar solution for Maxwell molecules
(gamma = 0) in two dimensions, extended with the uncertain amplitude b(z):

    sigma(t, z) = 1 - exp(-b(z) t / 8) / 2,
    f(t, v, z)  = (2 pi sigma)^{-1} e^{-|v|^2/(2 sigma)}
                  [ (2 sigma - 1)/sigma + (1 - sigma)|v|^2/(2 sigma^2) ].

The relaxation rate 1/8 belongs to the angular normalization b_ang = 1/(2 pi);
the formula is gated by a residual check (see the oracle-check command and
the acceptance suite) rather than taken on trust.  All time/z derivatives
below are analytic, no finite differencing.

The bi-Gaussian family is an isotropic two-bump state with optionally
z-affine temperatures; it has no exact reference and is used for projection,
positivity, and moment diagnostics.
"""
from __future__ import annotations

import numpy as np

from .gpc import GpcBasis, eval_amplitude
from .kernel import KernelModel
from .spectral import VelocityGrid


def bkw_sigma(t, bz):
    return 1.0 - np.exp(-np.asarray(bz) * t / 8.0) / 2.0


def bkw_value(vsq, sigma):
    P = np.exp(-vsq / (2.0 * sigma)) / (2.0 * np.pi * sigma)
    return P * ((2.0 * sigma - 1.0) / sigma
                + (1.0 - sigma) * vsq / (2.0 * sigma**2))


def bkw_dsigma(vsq, sigma):
    """Partial derivative of the BKW profile with respect to sigma."""
    P = np.exp(-vsq / (2.0 * sigma)) / (2.0 * np.pi * sigma)
    A = (2.0 * sigma - 1.0) / sigma
    B = (1.0 - sigma) / (2.0 * sigma**2)
    dP_over_P = -1.0 / sigma + vsq / (2.0 * sigma**2)
    dA = 1.0 / sigma**2
    dB = (sigma - 2.0) / (2.0 * sigma**3)
    return P * (dP_over_P * (A + B * vsq) + dA + dB * vsq)


class BkwFamily:
    """BKW state at time t0 plus the exact solution at any later time."""

    name = "bkw"
    has_reference = True
    exact_mass = 1.0

    def __init__(self, kernel: KernelModel, t0: float = 0.0):
        if kernel.gamma != 0.0:
            raise ValueError(
                f"ic.family: bkw requires Maxwell molecules (gamma=0), "
                f"got gamma={kernel.gamma}")
        if t0 < 0.0:
            raise ValueError(f"ic.t0: must be >= 0, got {t0}")
        self.b_coeffs = kernel.b_coeffs
        self.t0 = float(t0)

    def _db_dz(self, z):
        c = self.b_coeffs
        out = np.zeros_like(np.asarray(z, dtype=float))
        for j in range(1, len(c)):
            out = out + j * c[j] * np.asarray(z, dtype=float) ** (j - 1)
        return out

    def value(self, t, vsq, z):
        return bkw_value(vsq, bkw_sigma(t, eval_amplitude(self.b_coeffs, z)))

    def dt_value(self, t, vsq, z):
        bz = eval_amplitude(self.b_coeffs, z)
        sigma = bkw_sigma(t, bz)
        return bkw_dsigma(vsq, sigma) * (bz * (1.0 - sigma) / 8.0)

    def dz_value(self, t, vsq, z):
        bz = eval_amplitude(self.b_coeffs, z)
        sigma = bkw_sigma(t, bz)
        dsigma_dz = self._db_dz(z) * (t / 8.0) * (1.0 - sigma)
        return bkw_dsigma(vsq, sigma) * dsigma_dz

    # ic protocol -------------------------------------------------------
    def ic_values(self, vsq, z):
        return self.value(self.t0, vsq, z)

    def ic_dz_values(self, vsq, z):
        return self.dz_value(self.t0, vsq, z)

    def reference(self, t, vsq, z):
        # solver time is measured from t0; the family is autonomous in t
        return self.value(self.t0 + t, vsq, z)

    def reference_dz(self, t, vsq, z):
        return self.dz_value(self.t0 + t, vsq, z)


class BiGaussianFamily:
    """Half-and-half mixture of two isotropic Gaussians at (+-u0, 0).

    Temperatures may depend affinely on z: temp_* = (T0,) or (T0, T1)
    meaning T(z) = T0 + T1 z, required positive on [-1, 1].
    """

    name = "bi_gaussian"
    has_reference = False
    exact_mass = 1.0

    def __init__(self, separation: float = 1.0,
                 temp_plus=(0.5,), temp_minus=(0.5,)):
        self.u0 = float(separation)
        self.temp_plus = tuple(float(c) for c in np.atleast_1d(temp_plus))
        self.temp_minus = tuple(float(c) for c in np.atleast_1d(temp_minus))
        for key, T in (("temp_plus", self.temp_plus),
                       ("temp_minus", self.temp_minus)):
            if len(T) > 2:
                raise ValueError(f"ic.{key}: at most affine in z, got {T}")
            lo = min(eval_amplitude(T, -1.0), eval_amplitude(T, 1.0))
            if lo <= 0.0:
                raise ValueError(
                    f"ic.{key}: temperature must stay positive on [-1, 1], "
                    f"min {lo:.4g}")

    def _bumps(self, vsq_plus, vsq_minus, z):
        Tp = eval_amplitude(self.temp_plus, z)
        Tm = eval_amplitude(self.temp_minus, z)
        gp = np.exp(-vsq_plus / (2.0 * Tp)) / (2.0 * np.pi * Tp)
        gm = np.exp(-vsq_minus / (2.0 * Tm)) / (2.0 * np.pi * Tm)
        return gp, gm, Tp, Tm

    def split_vsq(self, vx, vy):
        """Squared distances to the two bump centers."""
        return (vx - self.u0) ** 2 + vy**2, (vx + self.u0) ** 2 + vy**2

    def value_xy(self, vx, vy, z):
        rp, rm = self.split_vsq(vx, vy)
        gp, gm, _, _ = self._bumps(rp, rm, z)
        return 0.5 * (gp + gm)

    def dz_value_xy(self, vx, vy, z):
        rp, rm = self.split_vsq(vx, vy)
        gp, gm, Tp, Tm = self._bumps(rp, rm, z)
        dTp = self.temp_plus[1] if len(self.temp_plus) > 1 else 0.0
        dTm = self.temp_minus[1] if len(self.temp_minus) > 1 else 0.0
        dgp = gp * (-1.0 / Tp + rp / (2.0 * Tp**2)) * dTp
        dgm = gm * (-1.0 / Tm + rm / (2.0 * Tm**2)) * dTm
        return 0.5 * (dgp + dgm)


def grid_values(family, grid: VelocityGrid, basis: GpcBasis,
                which: str = "ic", t: float | None = None) -> np.ndarray:
    """Evaluate a family on the (M, M, Q) collocation x quadrature grid.

    which: "ic", "ic_dz", or "reference" (the latter needs t).
    """
    vx = grid.nodes[:, None]
    vy = grid.nodes[None, :]
    out = np.empty((grid.M, grid.M, basis.quad_order))
    if hasattr(family, "value_xy"):
        for q, z in enumerate(basis.nodes):
            if which == "ic":
                out[:, :, q] = family.value_xy(vx, vy, z)
            elif which == "ic_dz":
                out[:, :, q] = family.dz_value_xy(vx, vy, z)
            else:
                raise ValueError(
                    f"{getattr(family, 'name', type(family).__name__)} "
                    f"has no reference solution")
        return out
    vsq = vx**2 + vy**2
    for q, z in enumerate(basis.nodes):
        if which == "ic":
            out[:, :, q] = family.ic_values(vsq, z)
        elif which == "ic_dz":
            out[:, :, q] = family.ic_dz_values(vsq, z)
        elif which == "reference":
            if t is None:
                raise ValueError("reference evaluation needs a time")
            out[:, :, q] = family.reference(t, vsq, z)
        else:
            raise ValueError(f"unknown evaluation kind {which!r}")
    return out


def make_family(name: str, params: dict, kernel: KernelModel):
    """Build an initial-condition family from config keys."""
    if name == "bkw":
        known = {"t0"}
        extra = set(params) - known
        if extra:
            raise ValueError(f"ic: unknown keys for bkw: {sorted(extra)}")
        return BkwFamily(kernel, t0=float(params.get("t0", 0.0)))
    if name == "bi_gaussian":
        known = {"separation", "temp_plus", "temp_minus"}
        extra = set(params) - known
        if extra:
            raise ValueError(
                f"ic: unknown keys for bi_gaussian: {sorted(extra)}")
        return BiGaussianFamily(
            separation=float(params.get("separation", 1.0)),
            temp_plus=params.get("temp_plus", (0.5,)),
            temp_minus=params.get("temp_minus", (0.5,)))
    raise ValueError(f"ic.family: unknown family {name!r} "
                     f"(available: bkw, bi_gaussian)")
