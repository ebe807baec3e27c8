"""Overflow-safe special functions for imaginary-frequency scattering.

Two families feed the scattering kernels:

* modified Bessel functions of half-integer order, I_{l+1/2}(x) and
  K_{l+1/2}(x), for orders up to a few hundred and arguments spanning
  many decades,
* normalized spherical harmonics Y_lm and their polar derivatives at
  "hyperbolic" angles, i.e. cos(theta) real with |cos(theta)| >= 1 and
  sin(theta) = -i*sigma purely imaginary (sigma > 0), which is what
  propagation directions become after Wick rotation.

Recurrences for both sweep through values far outside double range
(the Legendre table grows roughly like cos(theta)**l, I_nu(x) like
e**x), so every quantity is carried as a signed mantissa together with
a base-2 integer exponent; see :class:`ScaledArray`.  At a hyperbolic
angle every angular factor is purely real or purely imaginary, so only
a real magnitude plus a quadrant phase i**tag is ever stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

# exponent ceiling for conversions back to float; 2**1020 is close to
# the double-precision overflow threshold
_MAX_FLOAT_LOG2 = 1020.0


def _normalize(m, e):
    """Renormalize mantissas into +-[1,2); zero entries get exponent 0."""
    m = np.asarray(m, dtype=np.float64)
    fm, fe = np.frexp(m)
    fm = fm * 2.0
    fe = fe.astype(np.int64) - 1
    e_out = np.where(fm != 0.0, np.asarray(e, dtype=np.int64) + fe, 0)
    return fm, e_out


@dataclass(frozen=True)
class ScaledArray:
    """Array of reals stored as mantissa * 2**exponent.

    The mantissa is signed with |mantissa| in [1, 2), or exactly 0 with
    exponent 0.  This representation survives the dynamic range of the
    Bessel/Legendre recurrences (hundreds of thousands of binary orders
    of magnitude) where float64 would over- or underflow.
    """

    mantissa: np.ndarray
    exponent: np.ndarray

    @classmethod
    def from_float(cls, x) -> "ScaledArray":
        m, e = _normalize(np.asarray(x, dtype=np.float64), 0)
        return cls(m, e)

    @property
    def shape(self):
        return self.mantissa.shape

    def __getitem__(self, idx) -> "ScaledArray":
        return ScaledArray(self.mantissa[idx], self.exponent[idx])

    def times(self, other: "ScaledArray") -> "ScaledArray":
        m, e = _normalize(self.mantissa * other.mantissa,
                          self.exponent + other.exponent)
        return ScaledArray(m, e)

    def times_float(self, c) -> "ScaledArray":
        m, e = _normalize(self.mantissa * np.asarray(c, dtype=np.float64),
                          self.exponent)
        return ScaledArray(m, e)

    def plus(self, other: "ScaledArray") -> "ScaledArray":
        e_ref = np.maximum(self.exponent, other.exponent)
        with np.errstate(under="ignore"):
            v = (self.mantissa * np.exp2((self.exponent - e_ref).astype(np.float64))
                 + other.mantissa * np.exp2((other.exponent - e_ref).astype(np.float64)))
        m, e = _normalize(v, e_ref)
        return ScaledArray(m, e)

    def minus(self, other: "ScaledArray") -> "ScaledArray":
        return self.plus(ScaledArray(-other.mantissa, other.exponent))

    def over(self, other: "ScaledArray") -> "ScaledArray":
        m, e = _normalize(self.mantissa / other.mantissa,
                          self.exponent - other.exponent)
        return ScaledArray(m, e)

    def sqrt_abs(self) -> "ScaledArray":
        # split exponent into 2*half + rem with rem in {0, 1}
        half = self.exponent >> 1
        rem = self.exponent - 2 * half
        v = np.sqrt(np.abs(self.mantissa) * np.exp2(rem.astype(np.float64)))
        m, e = _normalize(v, half)
        return ScaledArray(m, e)

    def sign(self) -> np.ndarray:
        return np.sign(self.mantissa)

    def log2_abs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(np.abs(self.mantissa)) + self.exponent

    def to_float(self, extra_log2=0.0) -> np.ndarray:
        """Convert to float64, shifting by an additional 2**extra_log2.

        Underflow rounds to zero silently; overflow raises, since a
        value that genuinely exceeds double range this late means the
        caller forgot a compensating factor.
        """
        t = self.exponent.astype(np.float64) + extra_log2
        live = self.mantissa != 0.0
        if np.any(t[live] > _MAX_FLOAT_LOG2) if t.ndim else (live and t > _MAX_FLOAT_LOG2):
            raise OverflowError("scaled value exceeds float64 range "
                                f"(max log2 = {np.max(t[live]):.1f})")
        with np.errstate(under="ignore"):
            return self.mantissa * np.exp2(t)


def scaled_zeros(shape) -> ScaledArray:
    return ScaledArray(np.zeros(shape), np.zeros(shape, dtype=np.int64))


def _pow2_split(log2_value: float) -> tuple[float, int]:
    """Split 2**log2_value into (in-range factor, integer exponent)."""
    e = int(math.floor(log2_value))
    return 2.0 ** (log2_value - e), e


# ---------------------------------------------------------------------------
# modified Bessel functions of half-integer order
# ---------------------------------------------------------------------------

def _bessel_i_ratio_cf(nu: float, x: float, tol: float = 1e-16,
                       max_iter: int = 2_000_000) -> float:
    """Continued fraction for I_{nu+1}(x)/I_nu(x) (modified Lentz)."""
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    for j in range(1, max_iter + 1):
        b = 2.0 * (nu + j) / x
        d = b + d
        if d == 0.0:
            d = tiny
        c = b + 1.0 / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < tol:
            return f
    raise RuntimeError(f"Bessel ratio CF did not converge (nu={nu}, x={x})")


def bessel_ik_half(ell_max: int, x: float) -> tuple[ScaledArray, ScaledArray]:
    """Scaled I_{l+1/2}(x) and K_{l+1/2}(x) for l = 0..ell_max.

    I is generated by downward recurrence seeded with the continued
    fraction ratio at the top order, then pinned to the closed form
    I_{1/2} = sqrt(2/(pi x)) sinh(x); K runs upward from
    K_{1/2} = sqrt(pi/(2x)) e^{-x}.  Both directions follow the
    dominant solution, so the recurrences are stable.

    Parameters
    ----------
    ell_max : int
        highest order index, >= 1
    x : float
        argument, > 0

    Returns
    -------
    (ScaledArray, ScaledArray)
        I and K arrays of length ell_max + 1
    """
    if x <= 0.0:
        raise ValueError(f"Bessel argument must be positive, got {x}")
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")

    n = ell_max + 1
    km = np.empty(n)
    ke = np.empty(n, dtype=np.int64)

    # K_{1/2}, exactly sqrt(pi/(2x)) * e^{-x} in scaled form
    mant, e0 = _pow2_split(-x / LN2)
    km[0], ke[0] = _normalize(math.sqrt(math.pi / (2.0 * x)) * mant, e0)
    # K_{3/2} = K_{1/2} (1 + 1/x)
    km[1], ke[1] = _normalize(km[0] * (1.0 + 1.0 / x), ke[0])
    for ell in range(1, ell_max):
        # K_{l+3/2} = K_{l-1/2} + ((2l+1)/x) K_{l+1/2}
        e_ref = max(ke[ell - 1], ke[ell])
        v = (km[ell - 1] * 2.0 ** float(ke[ell - 1] - e_ref)
             + ((2 * ell + 1) / x) * km[ell] * 2.0 ** float(ke[ell] - e_ref))
        km[ell + 1], ke[ell + 1] = _normalize(v, e_ref)

    im = np.empty(n)
    ie = np.empty(n, dtype=np.int64)
    # trial values at the top, correct up to one global factor
    hi_m, hi_e = _normalize(_bessel_i_ratio_cf(ell_max + 0.5, x), 0)
    mid_m, mid_e = 1.0, 0
    im[ell_max], ie[ell_max] = mid_m, mid_e
    for ell in range(ell_max, 0, -1):
        # I_{l-1/2} = I_{l+3/2} + ((2l+1)/x) I_{l+1/2}
        e_ref = max(hi_e, mid_e)
        with np.errstate(under="ignore"):
            v = (hi_m * 2.0 ** float(hi_e - e_ref)
                 + ((2 * ell + 1) / x) * mid_m * 2.0 ** float(mid_e - e_ref))
        lo_m, lo_e = _normalize(v, e_ref)
        im[ell - 1], ie[ell - 1] = lo_m, lo_e
        hi_m, hi_e = mid_m, mid_e
        mid_m, mid_e = lo_m, lo_e

    # rescale with I_{1/2} = sqrt(2/(pi x)) e^x (1 - e^{-2x})/2
    mant, e0 = _pow2_split(x / LN2)
    t_m, t_e = _normalize(
        math.sqrt(2.0 / (math.pi * x)) * 0.5 * (-math.expm1(-2.0 * x)) * mant, e0)
    scale_m, scale_e = _normalize(t_m / im[0], t_e - ie[0])
    im, ie = _normalize(im * scale_m, ie + scale_e)

    return ScaledArray(im, ie), ScaledArray(km, ke)


# ---------------------------------------------------------------------------
# spherical harmonics at hyperbolic angles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicAngle:
    """Polar direction of a Wick-rotated plane wave.

    cos_theta = phi*c*kappa/xi (real, magnitude >= 1) and
    sin(theta) = -i*sin_mag with sin_mag = c*k/xi > 0, such that
    cos_theta**2 - sin_mag**2 == 1.  phi_k is the azimuth of the
    parallel wavevector.
    """

    cos_theta: float
    sin_mag: float
    phi_k: float = 0.0

    def __post_init__(self):
        if self.sin_mag <= 0.0:
            raise ValueError("sin_mag must be positive (grazing modes are "
                             "excluded by the quadrature design)")
        resid = self.cos_theta ** 2 - self.sin_mag ** 2 - 1.0
        if abs(resid) > 8.0 * np.finfo(float).eps * self.cos_theta ** 2:
            raise ValueError(f"inconsistent hyperbolic angle: cos^2-sin^2-1 = {resid:.3e}")

    @classmethod
    def from_wavevector(cls, xi: float, k_x: float, k_y: float, c_light: float,
                        phi: int = +1, phi_k: float | None = None) -> "HyperbolicAngle":
        k2 = k_x * k_x + k_y * k_y
        kappa = math.sqrt((xi / c_light) ** 2 + k2)
        sigma = c_light * math.sqrt(k2) / xi
        cos_t = phi * c_light * kappa / xi
        # rebuild cos from sigma so the hyperbolic identity holds to rounding
        cos_t = math.copysign(math.sqrt(1.0 + sigma * sigma), cos_t)
        if phi_k is None:
            phi_k = math.atan2(k_y, k_x)
        del kappa
        return cls(cos_t, sigma, phi_k)


def legendre_table_scaled(ell_max: int, cos_t: np.ndarray,
                          sigma: np.ndarray) -> ScaledArray:
    """Normalized spherical harmonic magnitudes at hyperbolic angles.

    Returns rho with shape (batch, ell_max+1, ell_max+1) such that
    Y_lm(theta, 0) = (-i)**m * rho[.., l, m] for m >= 0 (upper entries
    m > l are zero).  The Condon-Shortley phase is included, and
    Y_{l,-m} = (-1)**m Y_{lm} extends the table to negative m.

    The standard three-term recurrence in l is run per column m; at
    |cos_t| >= 1 it tracks the dominant (growing) solution so upward
    recursion is stable.
    """
    cos_t = np.atleast_1d(np.asarray(cos_t, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    if cos_t.shape != sigma.shape:
        raise ValueError("cos_t and sigma must have matching shapes")
    nb = cos_t.shape[0]
    size = ell_max + 1

    mant = np.zeros((nb, size, size))
    expo = np.zeros((nb, size, size), dtype=np.int64)
    mant[:, 0, 0] = 1.0 / math.sqrt(4.0 * math.pi)

    for ell in range(1, size):
        # diagonal seed: Y_ll = -sqrt((2l+1)/(2l)) * sigma * Y_{l-1,l-1}
        v = -math.sqrt((2 * ell + 1) / (2.0 * ell)) * sigma * mant[:, ell - 1, ell - 1]
        mant[:, ell, ell], expo[:, ell, ell] = _normalize(v, expo[:, ell - 1, ell - 1])
        # first step off the diagonal: Y_{l,l-1} = sqrt(2l+1) cos * Y_{l-1,l-1}
        v = math.sqrt(2.0 * ell + 1.0) * cos_t * mant[:, ell - 1, ell - 1]
        mant[:, ell, ell - 1], expo[:, ell, ell - 1] = _normalize(
            v, expo[:, ell - 1, ell - 1])
        if ell < 2:
            continue
        m_idx = np.arange(0, ell - 1)
        a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m_idx ** 2))
        b = np.sqrt(((2.0 * ell + 1.0) / (2.0 * ell - 3.0))
                    * ((ell - 1.0) ** 2 - m_idx ** 2) / (ell * ell - m_idx ** 2))
        e1 = expo[:, ell - 1, m_idx]
        e2 = expo[:, ell - 2, m_idx]
        e_ref = np.maximum(e1, e2)
        with np.errstate(under="ignore"):
            v = (a * cos_t[:, None] * mant[:, ell - 1, m_idx]
                 * np.exp2((e1 - e_ref).astype(np.float64))
                 - b * mant[:, ell - 2, m_idx]
                 * np.exp2((e2 - e_ref).astype(np.float64)))
        mant[:, ell, m_idx], expo[:, ell, m_idx] = _normalize(v, e_ref)

    return ScaledArray(mant, expo)


def angular_tables_scaled(ell_max: int, cos_t, sigma
                          ) -> tuple[ScaledArray, ScaledArray]:
    """Magnitudes of the two angular factors at hyperbolic angles.

    Returns (pi_tab, tau_tab), shape (batch, ell_max+1, ell_max+1),
    valid for m >= 0:

    * (m/sin)Y_lm(theta,0)    = (-i)**(m-1) * pi_tab[.., l, m]
    * dY_lm(theta,0)/dtheta   = (-i)**(m-1) * tau_tab[.., l, m]

    and for m < 0 the magnitudes are -pi_tab[.., l, |m|] and
    tau_tab[.., l, |m|] with phase (-i)**(m-1) throughout.  Flipping
    cos_theta -> -cos_theta multiplies pi by (-1)**(l+m) and tau by
    (-1)**(l+m+1), which callers use to get the phi = -1 direction.
    """
    cos_t = np.atleast_1d(np.asarray(cos_t, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    rho = legendre_table_scaled(ell_max, cos_t, sigma)
    size = ell_max + 1
    ells = np.arange(size, dtype=np.float64)[None, :, None]
    ms = np.arange(size, dtype=np.float64)[None, None, :]
    inv_sigma = 1.0 / sigma[:, None, None]

    pi_m, pi_e = _normalize(ms * rho.mantissa * inv_sigma, rho.exponent)

    # tau_lm = (l cos Y_lm - sqrt((2l+1)(l^2-m^2)/(2l-1)) Y_{l-1,m}) / sin
    with np.errstate(invalid="ignore", divide="ignore"):
        c_lm = np.sqrt((2.0 * ells + 1.0) * (ells ** 2 - ms ** 2)
                       / (2.0 * ells - 1.0))
    c_lm = np.where(ms <= ells, np.nan_to_num(c_lm), 0.0)
    prev_m = np.zeros_like(rho.mantissa)
    prev_e = np.zeros_like(rho.exponent)
    prev_m[:, 1:, :] = rho.mantissa[:, :-1, :]
    prev_e[:, 1:, :] = rho.exponent[:, :-1, :]
    e_ref = np.maximum(rho.exponent, prev_e)
    with np.errstate(under="ignore"):
        v = (ells * cos_t[:, None, None] * rho.mantissa
             * np.exp2((rho.exponent - e_ref).astype(np.float64))
             - c_lm * prev_m * np.exp2((prev_e - e_ref).astype(np.float64)))
    tau_m, tau_e = _normalize(v * inv_sigma, e_ref)

    return ScaledArray(pi_m, pi_e), ScaledArray(tau_m, tau_e)


def angular_factors(ell_max: int, m: int, angle: HyperbolicAngle
                    ) -> tuple[ScaledArray, ScaledArray, int]:
    """Angular factor pair (Pi_lm, tau_lm) for l = max(1,|m|)..ell_max.

    Both factors share the quadrant phase i**tag, returned as the tag
    exponent; the ScaledArrays hold the real magnitudes.
    """
    if abs(m) > ell_max:
        raise ValueError(f"|m| = {abs(m)} exceeds ell_max = {ell_max}")
    pi_tab, tau_tab = angular_tables_scaled(
        ell_max, np.array([angle.cos_theta]), np.array([angle.sin_mag]))
    lmin = max(1, abs(m))
    sl = slice(lmin, ell_max + 1)
    ma = abs(m)
    pi = ScaledArray(pi_tab.mantissa[0, sl, ma].copy(),
                     pi_tab.exponent[0, sl, ma].copy())
    tau = ScaledArray(tau_tab.mantissa[0, sl, ma].copy(),
                      tau_tab.exponent[0, sl, ma].copy())
    if m < 0:
        pi = ScaledArray(-pi.mantissa, pi.exponent)
    tag = (1 - m) % 4  # phase (-i)**(m-1) = i**tag
    return pi, tau, tag


def i_power(tag: int) -> complex:
    """i**tag as an exact complex unit."""
    return (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)[tag % 4]
