"""Free energies, forces and proximity-force comparators.

The exact sphere-grating free energy is the Matsubara sum

    F = kT * sum'_n log det(1 - M(i xi_n)),   xi_n = 2 pi n kT / hbar,

with the n = 0 term carrying weight 1/2.  Because the Drude
permittivity diverges at xi = 0 while the matrix limit differs by
polarization, the n = 0 round trip is evaluated at a small surrogate
frequency xi_sur = 1e-3 * xi_1 instead of building four analytic
branches; halving the surrogate must leave the energy unchanged at the
reporting tolerance, which the test suite asserts.

Alongside the exact path this module carries:

* an independent plane-sphere reference that exploits the conservation
  of the angular momentum z-component over a flat mirror (per-m blocks
  and a polar wavevector quadrature), used to validate the general
  path in the f = 1 / h = 0 limits,
* plane-plane and plane-grating energies per unit area,
* single and double proximity-force approximations built on them,
* lateral force (finite difference in the sphere offset) and the
  plateau observables of a nanosphere scanned across one period.

Sign conventions: free energies of attractive configurations are
negative; the lateral force is F_x = -dF/dx_S, positive when pointing
toward increasing offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT, hbar as HBAR, k as K_BOLTZMANN
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .basis import POL_E, POL_M, TE, TM
from .materials import MaterialModel, permittivity
from .mie import SphereSpec, mie_coefficients
from .rcwa import (GratingSpec, ReflectionCache, fresnel_amplitudes,
                   grating_reflection)
from .roundtrip import (TruncationSpec, assemble_roundtrip, auto_truncate,
                        gauss_nodes, ky_grid, log_det_one_minus)
from .specfun import angular_tables_scaled

LN2 = math.log(2.0)
DEFAULT_SURROGATE = 1e-3


class ConvergenceError(RuntimeError):
    """A Matsubara sum or quadrature failed to settle."""


@dataclass(frozen=True)
class ThermalState:
    """Equilibrium temperature and the Matsubara ladder it generates."""

    temperature: float = 300.0

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")

    @property
    def kbt(self) -> float:
        return K_BOLTZMANN * self.temperature

    @property
    def xi_1(self) -> float:
        return 2.0 * math.pi * self.kbt / HBAR

    def xi(self, n: int) -> float:
        return n * self.xi_1


@dataclass
class EnergyResult:
    """Free energy with its per-term ledger and truncation metadata."""

    free_energy: float            # J
    kbt: float
    terms: list                   # rows (n, xi_rad_per_s, term_J)
    trunc: TruncationSpec | None
    geometry: dict = field(default_factory=dict)

    @property
    def free_energy_kbt(self) -> float:
        return self.free_energy / self.kbt

    def ledger_rows(self):
        """(n, xi, term_J, cumulative_J) rows for CSV emission."""
        acc = 0.0
        rows = []
        for n, xi, term in self.terms:
            acc += term
            rows.append((n, xi, term, acc))
        return rows


def _check_tol(tol: float) -> None:
    if not 1e-6 < tol < 1e-1:
        raise ValueError(f"tol must lie in (1e-6, 1e-1), got {tol}")


def ell_aware_cutoff(ell_max: int, base: float = 10.0) -> float:
    """Transverse window needed by multipoles up to ell_max.

    The (l1, l2) integrand entries peak near kappa ~ (l1+l2)/(2 travel)
    rather than at the light line, so the e^{-2 kappa travel} tail
    bound alone underestimates the window; empirically
    base + 1.5 ell_max converges the log-det terms at every frequency
    including the static surrogate.
    """
    return base + 1.5 * ell_max


def _surrogate_trunc(trunc: TruncationSpec, period: float,
                     travel: float) -> TruncationSpec:
    """Cutoffs for the zero-frequency surrogate evaluation.

    Guarantees the ell-aware transverse window and enough diffraction
    orders to tile it, in case the caller's spec was tuned on the
    regular (light-line-hugging) terms.
    """
    lam = max(trunc.ky_cutoff, ell_aware_cutoff(trunc.ell_max))
    n_orders = max(trunc.n_orders, int(math.ceil(
        period * lam / (2.0 * math.pi * travel))) + 1)
    n_ky = max(trunc.n_ky,
               int(math.ceil(trunc.n_ky * lam / trunc.ky_cutoff)))
    return TruncationSpec(trunc.ell_max, n_orders, trunc.n_kx, n_ky, lam)


def _matsubara_sum(term_fn, thermal: ThermalState, tol: float,
                   surrogate_factor: float, max_terms: int = 4096,
                   surrogate_fn=None) -> tuple[float, list]:
    """kT sum'_n of log-det terms with the three-small-terms stop rule.

    term_fn(xi) returns the summand at one frequency; the n = 0 entry
    is evaluated at the surrogate frequency with weight 1/2, through
    surrogate_fn when the zero-frequency limit needs different cutoffs.
    The sum stops once three consecutive terms are each below
    tol * |accumulated| / 10.
    """
    kbt = thermal.kbt
    ledger = []
    xi_sur = surrogate_factor * thermal.xi_1
    total = 0.5 * kbt * (surrogate_fn or term_fn)(xi_sur)
    ledger.append((0, xi_sur, total))
    small_run = 0
    prev_mag = math.inf
    for n in range(1, max_terms + 1):
        term = kbt * term_fn(thermal.xi(n))
        total += term
        ledger.append((n, thermal.xi(n), term))
        # <= so that an identically vanishing sum (vacuum bodies) stops
        if abs(term) <= tol * abs(total) / 10.0:
            small_run += 1
            if small_run >= 3:
                return total, ledger
        else:
            small_run = 0
        if n > 16 and abs(term) > 2.0 * prev_mag and abs(term) > tol * abs(total):
            raise ConvergenceError(
                f"Matsubara terms stopped decaying at n={n} "
                f"(|term|={abs(term):.3e}, total={total:.3e})")
        prev_mag = max(abs(term), 1e-300)
    raise ConvergenceError(f"Matsubara sum needed more than {max_terms} terms")


def free_energy(sphere: SphereSpec, grating: GratingSpec, gap: float,
                lateral: float = 0.0, thermal: ThermalState = ThermalState(),
                tol: float = 1e-3, trunc: TruncationSpec | None = None,
                cache: ReflectionCache | None = None,
                surrogate_factor: float = DEFAULT_SURROGATE) -> EnergyResult:
    """Exact sphere-grating Casimir free energy (J).

    Parameters
    ----------
    sphere, grating : the two bodies
    gap : float
        surface-to-top distance d > 0
    lateral : float
        sphere center x-offset over the grating profile
    thermal : ThermalState
    tol : float
        relative target for the Matsubara tail, in (1e-6, 1e-1)
    trunc : TruncationSpec, optional
        explicit cutoffs; derived with auto_truncate when omitted
    cache : ReflectionCache, optional
        grating-block memo shared across calls at the same geometry
    """
    if gap <= 0.0:
        raise ValueError("gap must be positive")
    _check_tol(tol)
    if cache is None:
        cache = ReflectionCache()
    if trunc is None:
        trunc = auto_truncate(sphere, grating, gap, tol,
                              temperature=thermal.temperature,
                              lateral=lateral, cache=cache)
    trunc_sur = _surrogate_trunc(trunc, grating.period, gap + sphere.radius)

    def term_fn(xi: float) -> float:
        rt = assemble_roundtrip(xi, sphere, grating, gap, lateral, trunc,
                                cache=cache)
        return log_det_one_minus(rt)

    def surrogate_fn(xi: float) -> float:
        rt = assemble_roundtrip(xi, sphere, grating, gap, lateral, trunc_sur,
                                cache=cache)
        return log_det_one_minus(rt)

    total, ledger = _matsubara_sum(term_fn, thermal, tol, surrogate_factor,
                                   surrogate_fn=surrogate_fn)
    geometry = {"gap": gap, "lateral": lateral, "radius": sphere.radius,
                "period": grating.period, "depth": grating.depth,
                "fill": grating.fill, "temperature": thermal.temperature}
    return EnergyResult(total, thermal.kbt, ledger, trunc, geometry)


def _central_difference(f, x: float, step: float) -> float:
    """Derivative by central differences with one Richardson level."""
    d1 = (f(x + step) - f(x - step)) / (2.0 * step)
    d2 = (f(x + 2.0 * step) - f(x - 2.0 * step)) / (4.0 * step)
    return (4.0 * d1 - d2) / 3.0


def lateral_force(sphere: SphereSpec, grating: GratingSpec, gap: float,
                  lateral: float, thermal: ThermalState = ThermalState(),
                  tol: float = 1e-3, trunc: TruncationSpec | None = None,
                  cache: ReflectionCache | None = None,
                  step: float | None = None) -> float:
    """Lateral Casimir force F_x = -dF/dx_S (N) at the given offset.

    The derivative is a central difference of step D/200 with one
    Richardson extrapolation; the grating blocks are lateral-shift
    phases away from each other, so the four energy evaluations share
    one reflection cache.
    """
    if cache is None:
        cache = ReflectionCache()
    if trunc is None:
        trunc = auto_truncate(sphere, grating, gap, tol,
                              temperature=thermal.temperature, cache=cache)
    if step is None:
        step = grating.period / 200.0
    if step <= 0.0 or step > grating.period / 8.0:
        raise ValueError("finite-difference step must be in (0, D/8]")

    def f(x: float) -> float:
        return free_energy(sphere, grating, gap, x, thermal, tol, trunc,
                           cache).free_energy

    return -_central_difference(f, lateral, step)


def normal_force(sphere: SphereSpec, grating: GratingSpec, gap: float,
                 lateral: float = 0.0, thermal: ThermalState = ThermalState(),
                 tol: float = 1e-3, trunc: TruncationSpec | None = None,
                 cache: ReflectionCache | None = None,
                 step: float | None = None) -> float:
    """Normal force -dF/dd (N), negative when attractive; auxiliary helper."""
    if cache is None:
        cache = ReflectionCache()
    if trunc is None:
        trunc = auto_truncate(sphere, grating, gap, tol,
                              temperature=thermal.temperature, cache=cache)
    if step is None:
        step = gap / 200.0

    def f(d: float) -> float:
        return free_energy(sphere, grating, d, lateral, thermal, tol, trunc,
                           cache).free_energy

    return -_central_difference(f, gap, step)


# ---------------------------------------------------------------------------
# plane-plane and plane-grating energies per unit area
# ---------------------------------------------------------------------------

def plane_plane_energy(mat_a: MaterialModel, mat_b: MaterialModel, z: float,
                       thermal: ThermalState = ThermalState(),
                       tol: float = 1e-4, n_k: int = 80, cutoff: float = 12.0,
                       surrogate_factor: float = DEFAULT_SURROGATE,
                       max_terms: int = 65536) -> float:
    """Casimir free energy per unit area (J/m^2) of two half-spaces at gap z.

    E = kT sum'_n int k dk/(2 pi) sum_p log(1 - r_p^a r_p^b e^{-2 kappa z})
    with Fresnel amplitudes on the imaginary axis; the radial quadrature
    is cut at kappa = cutoff / z where the integrand is ~e^{-2*cutoff}.
    """
    if z <= 0.0:
        raise ValueError("gap must be positive")
    _check_tol(tol)
    k_nodes, k_w = gauss_nodes(n_k, 0.0, cutoff / z)

    def term_fn(xi: float) -> float:
        eps_a = permittivity(mat_a, xi)
        eps_b = permittivity(mat_b, xi)
        kappa = np.sqrt((xi / C_LIGHT) ** 2 + k_nodes ** 2)
        decay = np.exp(-2.0 * kappa * z)
        total = 0.0
        r_a = fresnel_amplitudes(eps_a, xi, k_nodes)
        r_b = fresnel_amplitudes(eps_b, xi, k_nodes)
        for pol in (TE, TM):
            total += np.sum(k_w * k_nodes
                            * np.log1p(-r_a[pol] * r_b[pol] * decay))
        return total / (2.0 * math.pi)

    total, _ = _matsubara_sum(term_fn, thermal, tol, surrogate_factor,
                              max_terms=max_terms)
    return total


def plane_grating_energy(plane_mat: MaterialModel, grating: GratingSpec,
                         z: float, thermal: ThermalState = ThermalState(),
                         tol: float = 1e-4, n_kx: int = 16, n_ky: int = 32,
                         cutoff: float = 12.0, n_orders: int | None = None,
                         cache: ReflectionCache | None = None,
                         surrogate_factor: float = DEFAULT_SURROGATE) -> float:
    """Free energy per unit area (J/m^2) of a plane above the grating at gap z.

    Same structure as the plane-plane formula, but the round trip is a
    dense matrix over diffraction orders and polarizations integrated
    over the Brillouin zone; the plane is specular, the grating mixes
    orders.  The order truncation follows the translation suppression
    e^{-2 kappa_n z} unless given explicitly.
    """
    if z <= 0.0:
        raise ValueError("gap must be positive")
    _check_tol(tol)
    if n_orders is None:
        n_orders = max(1, int(math.ceil(
            cutoff * grating.period / (4.0 * math.pi * z))) + 1)
    if cache is None:
        cache = ReflectionCache()
    kx_nodes, kx_w = gauss_nodes(n_kx, -math.pi / grating.period,
                                 math.pi / grating.period)
    orders = np.arange(-n_orders, n_orders + 1)
    eye = np.eye(2 * len(orders))

    def term_fn(xi: float) -> float:
        eps_p = permittivity(plane_mat, xi)
        total = 0.0
        for ikx, kx in enumerate(kx_nodes):
            kxn = kx + 2.0 * math.pi * orders / grating.period
            ky_nodes, ky_w = ky_grid(xi, kx, cutoff / z, n_ky)
            for iky, ky in enumerate(ky_nodes):
                block = grating_reflection(grating, xi, kx, ky, n_orders,
                                           cache=cache)
                kappa = block.kappa
                k_par = np.hypot(kxn, ky)
                r_te, r_tm = fresnel_amplitudes(eps_p, xi, k_par)
                plane_r = np.concatenate([r_te, r_tm])
                decay = np.tile(np.exp(-kappa * z), 2)
                m_rt = (plane_r * decay)[:, None] * block.entries * decay[None, :]
                sign, logabs = np.linalg.slogdet(eye - m_rt)
                total += kx_w[ikx] * ky_w[iky] * logabs
        return total / (4.0 * math.pi ** 2)

    total, _ = _matsubara_sum(term_fn, thermal, tol, surrogate_factor)
    return total


# ---------------------------------------------------------------------------
# proximity-force approximations
# ---------------------------------------------------------------------------

def _log_gauss_layers(z_lo: float, z_hi: float, n: int):
    """Gauss-Legendre nodes in log-space, denser toward z_lo."""
    u_nodes, u_w = gauss_nodes(n, 0.0, math.log(z_hi / z_lo))
    z = z_lo * np.exp(u_nodes)
    return z, u_w * z  # dz = z du


def pfa_single(sphere: SphereSpec, grating: GratingSpec, gap: float,
               thermal: ThermalState = ThermalState(), tol: float = 1e-3,
               n_z: int = 12, cache: ReflectionCache | None = None,
               **pg_kwargs) -> float:
    """Single proximity-force energy (J): sphere flattened, grating exact.

    F = 2 pi R_S int_d^{d+R_S} E_PG(z) dz, integrated on a log-spaced
    Gauss grid so the peak of the integrand at z = d is resolved.
    """
    if cache is None:
        cache = ReflectionCache()
    z_nodes, z_w = _log_gauss_layers(gap, gap + sphere.radius, n_z)
    total = 0.0
    for z, w in zip(z_nodes, z_w):
        total += w * plane_grating_energy(sphere.material, grating, z,
                                          thermal, tol, cache=cache,
                                          **pg_kwargs)
    return 2.0 * math.pi * sphere.radius * total


def d_plane_plane(mat_a: MaterialModel, mat_b: MaterialModel, z: float,
                  thermal: ThermalState = ThermalState(), tol: float = 1e-4,
                  n_z: int = 24, z_far_factor: float = 40.0) -> float:
    """D(z) = int_z^inf E_PP(z') dz' by log-space quadrature plus a power tail.

    The local power law of E_PP at the far edge (between z^-2 and z^-3
    in the thermal-to-retarded crossover) closes the integral
    analytically.
    """
    z_far = z_far_factor * z
    z_nodes, z_w = _log_gauss_layers(z, z_far, n_z)
    body = sum(w * plane_plane_energy(mat_a, mat_b, zz, thermal, tol)
               for zz, w in zip(z_nodes, z_w))
    e_far = plane_plane_energy(mat_a, mat_b, z_far, thermal, tol)
    e_far2 = plane_plane_energy(mat_a, mat_b, 1.3 * z_far, thermal, tol)
    p = -math.log(e_far2 / e_far) / math.log(1.3)
    if p <= 1.2:
        raise ConvergenceError(f"plane-plane tail exponent {p:.2f} too shallow")
    tail = e_far * z_far / (p - 1.0)
    return body + tail


def pfa_double(sphere: SphereSpec, grating: GratingSpec, gap: float,
               thermal: ThermalState = ThermalState(), tol: float = 1e-3
               ) -> float:
    """Double proximity-force energy (J): both bodies flattened.

    The grating becomes two weighted plane pairs at gaps d and d+h:
    F = 2 pi R_S [ f (D(d) - D(d+R)) + (1-f) (D(d+h) - D(d+h+R)) ].
    """
    d_pp = lambda z: d_plane_plane(sphere.material, grating.material, z,
                                   thermal, tol)
    r_s = sphere.radius
    h = grating.depth
    f = grating.fill
    val = f * (d_pp(gap) - d_pp(gap + r_s))
    if f < 1.0:
        val += (1.0 - f) * (d_pp(gap + h) - d_pp(gap + h + r_s))
    return 2.0 * math.pi * r_s * val


# ---------------------------------------------------------------------------
# independent plane-sphere reference (m-block-diagonal path)
# ---------------------------------------------------------------------------

def plane_sphere_free_energy(sphere: SphereSpec, plane_mat: MaterialModel,
                             gap: float,
                             thermal: ThermalState = ThermalState(),
                             tol: float = 1e-3, ell_max: int | None = None,
                             n_k: int | None = None,
                             cutoff: float | None = None,
                             surrogate_factor: float = DEFAULT_SURROGATE
                             ) -> EnergyResult:
    """Sphere in front of a homogeneous half-space, per-m assembly.

    Over a flat mirror the round trip conserves the angular momentum
    z-component, so the determinant factorizes over m and each block is
    a small (l, P) matrix fed by a polar wavevector quadrature.  This
    never touches the Bloch machinery, which is exactly why the general
    path is validated against it in the f = 1 limit.
    """
    if gap <= 0.0:
        raise ValueError("gap must be positive")
    _check_tol(tol)
    if ell_max is None:
        ell_max = int(math.ceil(4.0 * sphere.radius / gap)) + 2
    if cutoff is None:
        cutoff = ell_aware_cutoff(ell_max, base=12.0)
    if n_k is None:
        n_k = int(math.ceil(4.0 * cutoff))
    travel = gap + sphere.radius
    k_nodes, k_w = gauss_nodes(n_k, 0.0, cutoff / travel)

    def term_fn(xi: float) -> float:
        return _plane_sphere_logdet(sphere, plane_mat, xi, travel, ell_max,
                                    k_nodes, k_w)

    total, ledger = _matsubara_sum(term_fn, thermal, tol, surrogate_factor)
    geometry = {"gap": gap, "radius": sphere.radius, "plane": "half-space",
                "temperature": thermal.temperature}
    return EnergyResult(total, thermal.kbt, ledger, None, geometry)


def _plane_sphere_logdet(sphere: SphereSpec, plane_mat: MaterialModel,
                         xi: float, travel: float, ell_max: int,
                         k_nodes: np.ndarray, k_w: np.ndarray) -> float:
    xi_t = xi / C_LIGHT
    mie = mie_coefficients(sphere, xi, ell_max)
    eps_p = permittivity(plane_mat, xi)
    kappa = np.sqrt(xi_t ** 2 + k_nodes ** 2)
    r_pol = np.stack(fresnel_amplitudes(eps_p, xi, k_nodes))  # (2, n_k)

    cos_t = kappa / xi_t
    sigma = k_nodes / xi_t
    pi_tab, tau_tab = angular_tables_scaled(ell_max, cos_t, sigma)

    # log2 of the per-node weight k w e^{-2 kappa L} / (2 pi), split off
    # scale to keep the balanced blocks in range
    trans_log2 = -2.0 * kappa * travel / LN2

    with np.errstate(divide="ignore"):
        log2_r = {POL_E: mie.r_e.log2_abs(), POL_M: mie.r_m.log2_abs()}
        sign_r = {POL_E: np.sign(mie.r_e.mantissa),
                  POL_M: np.sign(mie.r_m.mantissa)}

    total = 0.0
    for m in range(0, ell_max + 1):
        lmin = max(1, m)
        ells = np.arange(lmin, ell_max + 1)
        n_l = len(ells)
        dim = 2 * n_l  # (l, P) with P in {E, M}
        norm = 1.0 / np.sqrt(ells * (ells + 1.0))
        # angular magnitudes at phi=+1, (n_k, n_l)
        pi_m = pi_tab.mantissa[:, lmin:, m]
        pi_e = pi_tab.exponent[:, lmin:, m]
        tau_m = tau_tab.mantissa[:, lmin:, m]
        tau_e = tau_tab.exponent[:, lmin:, m]
        parity = np.where((ells + m) % 2 == 0, 1.0, -1.0)

        # a[j, row, p], b[j, p, col]; the i^p and (-i)^{m-1} phases of
        # the two kernels multiply to (-1)^m along every chain through
        # the block, so real arithmetic with one overall sign suffices
        a = np.zeros((len(k_nodes), dim, 2))
        b = np.zeros((len(k_nodes), 2, dim))
        for pol, base in ((POL_E, 0), (POL_M, 1)):
            rows = base + 2 * np.arange(n_l)
            half_r_log2 = 0.5 * log2_r[pol][ells]
            for p in (TE, TM):
                mag_m, mag_e = (pi_m, pi_e) if p == pol else (tau_m, tau_e)
                if p == pol and m == 0:
                    continue  # the (m/sin)Y factor vanishes at m = 0
                par_b = parity if p == pol else -parity
                expo = (mag_e + half_r_log2[None, :]
                        + 0.5 * trans_log2[:, None])
                with np.errstate(under="ignore"):
                    mag = mag_m * np.exp2(expo)
                a[:, rows, p] = (4.0 * math.pi) * sign_r[pol][ells][None, :] \
                    * norm[None, :] * mag
                b[:, p, rows] = (2.0 * math.pi / (xi_t * kappa))[:, None] \
                    * norm[None, :] * mag * par_b[None, :]
        mid = r_pol.T[:, :, None] * b  # (n_k, 2, dim)
        block = np.einsum("j,jap,jpb->ab", k_w * k_nodes / (2.0 * math.pi),
                          a, mid)
        if m % 2 == 1:
            block = -block
        sign, logabs = np.linalg.slogdet(np.eye(dim) - block)
        weight = 1.0 if m == 0 else 2.0
        total += weight * logabs
    return total


# ---------------------------------------------------------------------------
# plateau observables of a nanosphere scanned over one period
# ---------------------------------------------------------------------------

@dataclass
class PlateauResult:
    """Oscillation amplitude and transition length of F(x_S)."""

    delta_f: float                 # F(groove center) - F(ridge center), J
    delta_x: float                 # x_2 - x_1, m (nan when undefined)
    flat: bool                     # True when F has no usable x_S dependence
    monotone: bool                 # False when a transition leg wiggled
    offsets: np.ndarray
    energies: np.ndarray


def plateau_observables(sphere: SphereSpec, grating: GratingSpec, gap: float,
                        thermal: ThermalState = ThermalState(),
                        tol: float = 1e-3, n_x: int = 33,
                        trunc: TruncationSpec | None = None,
                        cache: ReflectionCache | None = None) -> PlateauResult:
    """Scan F(x_S) over one period and extract (Delta F, Delta x).

    Delta F is the groove-center minus ridge-center energy; x_1 and x_2
    solve the half-rise conditions between each plateau center and the
    ridge corner at x = f D, found on a monotone cubic interpolant of
    the samples.  A non-monotone transition leg is flagged and the
    first crossing returned as a bracketed estimate.
    """
    if n_x < 32:
        raise ValueError("need at least 32 offsets per period")
    if cache is None:
        cache = ReflectionCache()
    if trunc is None:
        trunc = auto_truncate(sphere, grating, gap, tol,
                              temperature=thermal.temperature, cache=cache)
    period = grating.period
    ridge_c = grating.fill * period / 2.0
    corner = grating.fill * period
    groove_c = (grating.fill + 1.0) * period / 2.0

    offsets = np.linspace(0.0, period, n_x, endpoint=False)
    extra = np.array([ridge_c, corner, groove_c])
    offsets = np.unique(np.concatenate([offsets, extra]))
    energies = np.array([
        free_energy(sphere, grating, gap, x, thermal, tol, trunc,
                    cache).free_energy for x in offsets])

    f_interp = PchipInterpolator(offsets, energies)
    f_ridge = float(f_interp(ridge_c))
    f_corner = float(f_interp(corner))
    f_groove = float(f_interp(groove_c))
    delta_f = f_groove - f_ridge

    scale = max(abs(f_ridge), abs(f_groove))
    if abs(delta_f) < 10.0 * tol * scale * 1e-2:
        return PlateauResult(delta_f, math.nan, True, True, offsets, energies)

    def half_rise(lo, hi, target):
        samples = energies[(offsets >= lo - 1e-15) & (offsets <= hi + 1e-15)]
        mono = bool(np.all(np.diff(samples) >= 0)
                    or np.all(np.diff(samples) <= 0))
        root = brentq(lambda x: f_interp(x) - target, lo, hi)
        return root, mono

    x_1, mono_1 = half_rise(ridge_c, corner, 0.5 * (f_ridge + f_corner))
    x_2, mono_2 = half_rise(corner, groove_c, 0.5 * (f_corner + f_groove))
    return PlateauResult(delta_f, x_2 - x_1, False, mono_1 and mono_2,
                         offsets, energies)
