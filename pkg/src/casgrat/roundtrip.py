"""Round-trip operator of the sphere-grating cavity and its log-determinant.

One Matsubara term of the free energy is log det(1 - M(i xi)), where M
propagates an outgoing spherical mode down to the grating, reflects it
(mixing diffraction orders and polarizations), propagates it back up,
re-expands in regular spherical modes, and scatters it off the sphere.
Per Bloch node (k_x, k_y) that chain is two rectangular kernel
matrices sandwiching the grating reflection block; the Brillouin-zone
and k_y integrals are Gauss-Legendre sums of those per-node products.

The Mie amplitudes are folded in symmetrically (rows scaled by
sign(r) sqrt|r|, columns by sqrt|r|), a similarity transformation that
leaves det(1 - M) unchanged while keeping every matrix entry inside
double range: the kernel growth in l is always paid for by either a
translation factor or a Mie decay.  The k_y integral is cut off at
Lambda/(d + R_S), where the integrand has decayed like e^{-2 Lambda}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.constants import c as C_LIGHT

from .basis import (POL_E, POL_M, SphericalModeTable, kernel_block_factors,
                    spherical_mode_table)
from .mie import MieTable, SphereSpec, mie_coefficients
from .rcwa import (GratingSpec, ReflectionCache, apply_lateral_shift,
                   geometry_fingerprint, grating_reflection,
                   material_fingerprint)

LN2 = math.log(2.0)


class RoundTripError(RuntimeError):
    """Assembly produced an unphysical round-trip matrix."""


@dataclass(frozen=True)
class TruncationSpec:
    """Numerical cutoffs of one round-trip assembly.

    ell_max truncates multipoles (matrix dimension 2 l_max (l_max+2)),
    n_orders the diffraction orders, n_kx/n_ky the Gauss-Legendre node
    counts, and ky_cutoff the dimensionless Lambda of the k_y window
    [-Lambda/(d+R_S), +Lambda/(d+R_S)].
    """

    ell_max: int
    n_orders: int
    n_kx: int = 12
    n_ky: int = 24
    ky_cutoff: float = 10.0

    def __post_init__(self):
        if self.ell_max < 1:
            raise ValueError("ell_max must be >= 1")
        if self.n_orders < 1:
            raise ValueError("n_orders must be >= 1")
        if self.ky_cutoff < 5.0:
            raise ValueError("ky_cutoff below 5 leaves a tail above e^{-10}")

    @property
    def dim(self) -> int:
        return 2 * self.ell_max * (self.ell_max + 2)

    def doubled(self, **kw) -> "TruncationSpec":
        new = {f: getattr(self, f) for f in
               ("ell_max", "n_orders", "n_kx", "n_ky", "ky_cutoff")}
        for name in kw:
            new[name] = 2 * new[name] if kw[name] else new[name]
        return TruncationSpec(**new)


@dataclass
class RoundTripMatrix:
    """Balanced round-trip matrix over outgoing spherical modes at one xi."""

    xi: float
    matrix: np.ndarray
    modes: SphericalModeTable
    meta: dict = field(default_factory=dict)


def gauss_nodes(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [lo, hi]."""
    x, w = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def ky_grid(xi: float, k_x: float, ky_max: float, n_ky: int
            ) -> tuple[np.ndarray, np.ndarray]:
    """Transverse quadrature grid, sinh-mapped around k_y = 0.

    The integrand varies on the scale s = hypot(k_x, xi/c): near the
    zero-frequency limit it develops a |k| cusp that uniform nodes
    resolve only algebraically.  Substituting k_y = s sinh(u) restores
    spectral convergence and degrades gracefully to a uniform grid when
    s exceeds the window.
    """
    s = math.hypot(k_x, xi / C_LIGHT)
    u_max = math.asinh(ky_max / s)
    u, w = gauss_nodes(n_ky, -u_max, u_max)
    return s * np.sinh(u), w * s * np.cosh(u)


def spectral_radius_estimate(mat: np.ndarray, iters: int = 60) -> float:
    """Power-iteration estimate of the largest |eigenvalue|."""
    n = mat.shape[0]
    if n == 0:
        return 0.0
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        lam = nrm
        v = w / nrm
    return float(lam)


def assemble_roundtrip(xi: float, sphere: SphereSpec, grating: GratingSpec,
                       gap: float, lateral: float, trunc: TruncationSpec,
                       cache: ReflectionCache | None = None,
                       mie: MieTable | None = None,
                       check_spectral_radius: bool = True) -> RoundTripMatrix:
    """Round-trip matrix M(i xi) for a sphere at height gap and offset lateral.

    Parameters
    ----------
    xi : float
        Matsubara frequency (rad/s), > 0
    sphere, grating : geometry of the two bodies
    gap : float
        closest distance between sphere surface and grating top, > 0
    lateral : float
        x position of the sphere center over the grating profile
    trunc : TruncationSpec
    cache : ReflectionCache, optional
        shared memo of centered grating blocks
    mie : MieTable, optional
        precomputed Mie amplitudes (must match sphere, xi, ell_max)

    Returns
    -------
    RoundTripMatrix
        the balanced matrix; its log det(1 - M) equals the physical one
    """
    if gap <= 0.0:
        raise ValueError("gap must be positive")
    lateral = lateral % grating.period
    modes = spherical_mode_table(trunc.ell_max)
    if mie is None:
        mie = mie_coefficients(sphere, xi, trunc.ell_max)
    travel = gap + sphere.radius

    # balancing factors sign(r) sqrt|r| per mode row / sqrt|r| per column
    log2_half_r = np.empty(modes.dim)
    sign_r = np.empty(modes.dim)
    for pol, tab in ((POL_E, mie.r_e), (POL_M, mie.r_m)):
        sel = modes.pols == pol
        with np.errstate(divide="ignore"):
            log2_half_r[sel] = 0.5 * tab.log2_abs()[modes.ells[sel]]
        sign_r[sel] = np.sign(tab.mantissa[modes.ells[sel]])

    kx_nodes, kx_w = gauss_nodes(trunc.n_kx, -math.pi / grating.period,
                                 math.pi / grating.period)
    ky_max = trunc.ky_cutoff / travel

    mat = np.zeros((modes.dim, modes.dim), dtype=np.complex128)
    for ikx, kx in enumerate(kx_nodes):
        ky_nodes, ky_w = ky_grid(xi, kx, ky_max, trunc.n_ky)
        kb = kernel_block_factors(xi, kx, ky_nodes, trunc.n_orders,
                                  grating.period, modes)
        trans_log2 = np.tile(-kb.kappa * travel / LN2, (1, 2))  # (n_ky, 2M)
        with np.errstate(under="ignore"):
            a = (kb.a_phase * kb.a_mant * sign_r[None, :, None]) * np.exp2(
                kb.a_exp + trans_log2[:, None, :]
                + log2_half_r[None, :, None])
            b = (kb.b_phase * kb.b_mant) * np.exp2(
                kb.b_exp + trans_log2[:, :, None]
                + log2_half_r[None, None, :])
        weights = kx_w[ikx] * ky_w / (4.0 * math.pi ** 2)
        a *= weights[:, None, None]
        rb = np.empty_like(b)
        for iky, ky in enumerate(ky_nodes):
            block = grating_reflection(grating, xi, kx, ky, trunc.n_orders,
                                       cache=cache)
            block = apply_lateral_shift(block, -lateral)
            rb[iky] = block.entries @ b[iky]
        # contract the k_y and plane-wave axes in one rectangular product
        mat += np.tensordot(a, rb, axes=([0, 2], [0, 1]))

    meta = {"gap": gap, "lateral": lateral, "trunc": trunc,
            "sphere_radius": sphere.radius,
            "sphere_material": material_fingerprint(sphere.material),
            "grating": geometry_fingerprint(grating)}
    rt = RoundTripMatrix(xi, mat, modes, meta)
    if check_spectral_radius:
        rho = spectral_radius_estimate(mat)
        meta["spectral_radius"] = rho
        if rho >= 1.0:
            raise RoundTripError(
                f"round-trip spectral radius {rho:.6f} >= 1 at xi={xi:.4e}; "
                f"truncation {trunc} or quadrature is inconsistent")
    return rt


def log_det_one_minus(rt: RoundTripMatrix) -> float:
    """log det(1 - M) via pivoted LU; the imaginary residue must vanish.

    The Bloch quadrature is symmetric in k_y, which makes the physical
    log-determinant real; a surviving imaginary part signals an
    assembly inconsistency and raises.
    """
    mat = rt.matrix if isinstance(rt, RoundTripMatrix) else rt
    sign, logabs = np.linalg.slogdet(np.eye(mat.shape[0]) - mat)
    if sign == 0.0:
        raise RoundTripError("det(1 - M) vanished; spectral radius check "
                             "should have caught this")
    imag = abs(math.atan2(sign.imag, sign.real))
    if imag > 1e-8 * abs(logabs) + 1e-10:
        raise RoundTripError(f"imaginary log-det residue {imag:.3e} vs real "
                             f"part {logabs:.3e}")
    return float(logabs + math.log(abs(sign)))


SNAPSHOT_VERSION = 1


def save_roundtrip(rt: RoundTripMatrix, path) -> None:
    """Binary snapshot of M for restart runs (versioned npz)."""
    trunc = rt.meta.get("trunc")
    np.savez_compressed(
        path, version=SNAPSHOT_VERSION, xi=rt.xi, matrix=rt.matrix,
        ell_max=rt.modes.ell_max,
        trunc=np.array([trunc.ell_max, trunc.n_orders, trunc.n_kx,
                        trunc.n_ky, trunc.ky_cutoff]) if trunc else np.zeros(5),
        gap=rt.meta.get("gap", 0.0), lateral=rt.meta.get("lateral", 0.0),
        grating=rt.meta.get("grating", ""),
        sphere_material=rt.meta.get("sphere_material", ""))


def load_roundtrip(path) -> RoundTripMatrix:
    """Restore a snapshot written by save_roundtrip."""
    data = np.load(path, allow_pickle=False)
    if int(data["version"]) != SNAPSHOT_VERSION:
        raise ValueError(f"snapshot version {int(data['version'])} "
                         f"not supported (expected {SNAPSHOT_VERSION})")
    t = data["trunc"]
    trunc = TruncationSpec(int(t[0]), int(t[1]), int(t[2]), int(t[3]),
                           float(t[4])) if t[0] >= 1 else None
    meta = {"gap": float(data["gap"]), "lateral": float(data["lateral"]),
            "trunc": trunc, "grating": str(data["grating"]),
            "sphere_material": str(data["sphere_material"])}
    return RoundTripMatrix(float(data["xi"]), data["matrix"],
                           spherical_mode_table(int(data["ell_max"])), meta)


def default_n_orders(period: float, gap: float) -> int:
    """Starting diffraction truncation; grows with period over distance."""
    return int(math.ceil(5.0 * period / (2.0 * math.pi * gap))) + 5


def auto_truncate(sphere: SphereSpec, grating: GratingSpec, gap: float,
                  tolerance: float, temperature: float = 300.0,
                  lateral: float = 0.0, cache: ReflectionCache | None = None,
                  max_doublings: int = 6) -> TruncationSpec:
    """Grow each cutoff until the first Matsubara term is stable.

    Starting from ell_max = ceil(4 R_S / gap) + 2 and the order
    heuristic, each parameter is doubled independently until the
    log-det term at xi_1 changes by less than tolerance/3 of itself;
    parameters that moved are re-checked until the full set is quiet.
    """
    if not 1e-6 < tolerance < 1e-1:
        raise ValueError("tolerance must lie in (1e-6, 1e-1)")
    from scipy.constants import hbar, k as k_b
    xi_1 = 2.0 * math.pi * k_b * temperature / hbar
    if cache is None:
        cache = ReflectionCache()
    trunc = TruncationSpec(
        ell_max=int(math.ceil(4.0 * sphere.radius / gap)) + 2,
        n_orders=default_n_orders(grating.period, gap))

    def term(t: TruncationSpec) -> float:
        return log_det_one_minus(assemble_roundtrip(
            xi_1, sphere, grating, gap, lateral, t, cache=cache))

    base = term(trunc)
    for name in ("ell_max", "n_orders", "n_kx", "n_ky", "ky_cutoff"):
        for _ in range(max_doublings):
            trial = trunc.doubled(**{name: True})
            value = term(trial)
            if abs(value - base) <= (tolerance / 3.0) * max(abs(base), 1e-300):
                break
            trunc, base = trial, value
        else:
            raise RoundTripError(f"auto truncation did not converge in "
                                 f"{max_doublings} doublings of {name}")
    return trunc
