"""Sphere reflection amplitudes on the imaginary frequency axis.

The scattering of a regular spherical wave off a homogeneous sphere
into an outgoing wave is diagonal in (l, m, polarization) and
independent of m; the two amplitude families r_lE, r_lM (electric and
magnetic multipoles, equal to minus the classic Mie a_l, b_l) are
evaluated here from half-integer modified Bessel functions at the size
parameters x = xi R/c and n x.  Amplitudes decay super-exponentially
in l once l exceeds a few times x, far below double range, so the
tables are kept in scaled (mantissa, exponent) form.

`sphere_planewave_matrix` re-expands the sphere reflection operator in
plane waves.  It is not used on the production energy path; it exists
so that reciprocity and the small-radius (polarizable-atom) limit can
be checked against closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .basis import POL_E, POL_M, TE, TM
from .materials import MaterialModel, permittivity
from .specfun import (HyperbolicAngle, ScaledArray, angular_tables_scaled,
                      bessel_ik_half, i_power)


@dataclass(frozen=True)
class SphereSpec:
    """Homogeneous sphere of given radius (m) and material."""

    radius: float
    material: MaterialModel

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class MieTable:
    """Reflection amplitudes r_lE, r_lM for l = 0..ell_max (slot 0 unused)."""

    xi: float
    size_parameter: float
    ell_max: int
    r_e: ScaledArray
    r_m: ScaledArray

    def amplitude(self, pol: int) -> ScaledArray:
        return self.r_e if pol == POL_E else self.r_m

    def as_floats(self) -> tuple[np.ndarray, np.ndarray]:
        """Plain float64 amplitudes; entries below double range flush to 0."""
        return self.r_e.to_float(), self.r_m.to_float()


def mie_coefficients(sphere: SphereSpec, xi: float, ell_max: int) -> MieTable:
    """Mie reflection amplitudes of a homogeneous sphere at frequency i*xi.

    Parameters
    ----------
    sphere : SphereSpec
    xi : float
        imaginary-frequency coordinate in rad/s, > 0
    ell_max : int
        highest multipole order, >= 1

    Returns
    -------
    MieTable
        scaled amplitude tables indexed directly by l
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive; the zero-frequency term is "
                         "evaluated at a surrogate frequency upstream")
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    eps = permittivity(sphere.material, xi)
    if not math.isfinite(eps):
        raise ValueError("permittivity diverges at this frequency")
    x = xi * sphere.radius / C_LIGHT
    n_idx = math.sqrt(eps)
    nx = n_idx * x

    ix, kx = bessel_ik_half(ell_max, x)
    inx, _ = bessel_ik_half(ell_max, nx)

    ells = np.arange(1.0, ell_max + 1.0)
    # bracket terms: [x I_{l-1/2}(x) - l I_{l+1/2}(x)] and friends
    br_a = ix[:-1].times_float(x).minus(ix[1:].times_float(ells))
    br_b = inx[:-1].times_float(nx).minus(inx[1:].times_float(ells))
    br_c = kx[:-1].times_float(-x).minus(kx[1:].times_float(ells))

    s_a = inx[1:].times(br_a)
    s_b = ix[1:].times(br_b)
    s_c = inx[1:].times(br_c)
    s_d = kx[1:].times(br_b)

    sign = np.where(np.arange(1, ell_max + 1) % 2 == 0, 1.0, -1.0)
    pref = sign * (math.pi / 2.0)
    r_e = (s_a.times_float(eps).minus(s_b)
           .over(s_c.times_float(eps).minus(s_d)).times_float(pref))
    r_m = s_a.minus(s_b).over(s_c.minus(s_d)).times_float(pref)

    def _with_zero_slot(arr: ScaledArray) -> ScaledArray:
        m = np.concatenate([[0.0], arr.mantissa])
        e = np.concatenate([[0], arr.exponent])
        return ScaledArray(m, e.astype(np.int64))

    return MieTable(xi, x, ell_max, _with_zero_slot(r_e), _with_zero_slot(r_m))


def _angular_magnitude(pi_tab: ScaledArray, tau_tab: ScaledArray, batch: int,
                       ell: int, m: int, delta: bool) -> tuple[float, int]:
    """Signed magnitude (mantissa, exponent) of the angular factor.

    delta selects between the (m/sin)Y factor (polarizations matched)
    and the theta derivative; tables hold |m| columns, the sign of m
    rides on the (m/sin)Y magnitude only.
    """
    ma = abs(m)
    if delta:
        mm = pi_tab.mantissa[batch, ell, ma]
        if m < 0:
            mm = -mm
        return mm, int(pi_tab.exponent[batch, ell, ma])
    return tau_tab.mantissa[batch, ell, ma], int(tau_tab.exponent[batch, ell, ma])


def sphere_planewave_matrix(sphere: SphereSpec, xi: float,
                            k_in: tuple[float, float], k_out: tuple[float, float],
                            p_out: int, p_in: int, phi: int,
                            ell_max: int, mie: MieTable | None = None) -> complex:
    """Plane-wave matrix element <k_out, p_out| R_S^phi |k_in, p_in>.

    The outgoing wave travels in direction phi (+1 up, -1 down), the
    incoming one in -phi; both wavevectors are parallel components
    (k_x, k_y).  The multipole sum is truncated at ell_max.  Validation
    helper only; the energy path works in the spherical basis.
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    kox, koy = k_out
    kix, kiy = k_in
    ko = math.hypot(kox, koy)
    ki = math.hypot(kix, kiy)
    if ko == 0.0 or ki == 0.0:
        raise ValueError("grazing modes (k = 0) are excluded")
    xi_t = xi / C_LIGHT
    kappa_o = math.sqrt(xi_t ** 2 + ko ** 2)

    ang_out = HyperbolicAngle.from_wavevector(xi, kox, koy, C_LIGHT, phi=phi)
    ang_in = HyperbolicAngle.from_wavevector(xi, kix, kiy, C_LIGHT, phi=-phi)
    pi_tab, tau_tab = angular_tables_scaled(
        ell_max,
        np.array([ang_out.cos_theta, ang_in.cos_theta]),
        np.array([ang_out.sin_mag, ang_in.sin_mag]))

    if mie is None:
        mie = mie_coefficients(sphere, xi, ell_max)

    # K k_z = -xi kappa / c is real negative on the imaginary axis
    pref_mag = 2.0 * math.pi / (xi_t * kappa_o)
    total = 0.0 + 0.0j
    for pol, table in ((POL_E, mie.r_e), (POL_M, mie.r_m)):
        d_out = (p_out == pol)
        d_in = (p_in == pol)
        for ell in range(1, ell_max + 1):
            r_m_, r_e_ = table.mantissa[ell], int(table.exponent[ell])
            if r_m_ == 0.0:
                continue
            norm = pref_mag * 4.0 * math.pi / (ell * (ell + 1.0))
            for m in range(-ell, ell + 1):
                mo, eo = _angular_magnitude(pi_tab, tau_tab, 0, ell, m, d_out)
                mi, ei = _angular_magnitude(pi_tab, tau_tab, 1, ell, m, d_in)
                if mo == 0.0 or mi == 0.0:
                    continue
                mag = norm * mo * mi * r_m_
                expo = eo + ei + r_e_
                # phases: +i^{1-p_out} from the outgoing kernel (after
                # absorbing sign(K k_z) = -1), -i^{p_in-1} from the regular
                # one, (-i)^{m-1} from each angular factor, and the azimuths
                phase = (-1.0) * i_power(-p_out) * i_power(p_in) \
                    * i_power(2 * (1 - m)) \
                    * complex(math.cos(m * (ang_out.phi_k - ang_in.phi_k)),
                              math.sin(m * (ang_out.phi_k - ang_in.phi_k)))
                total += phase * mag * 2.0 ** expo
    return total
