"""Plane-wave / spherical-wave conversion kernels on the imaginary axis.

A plane wave regular at the origin decomposes into regular spherical
modes, and an outgoing spherical mode into plane waves, with
coefficients built from one azimuthal phase, a quadrant phase, and a
real angular magnitude (the (m/sin)Y or dY/dtheta factors evaluated at
the hyperbolic angle of the mode direction).  The round-trip assembly
consumes these in batched form: for one Bloch node (k_x, k_y) and the
full order lattice, `kernel_block_factors` emits the rectangular reg-
and out-kernel matrices as (mantissa, exponent, unit phase) triples;
the caller folds in translation factors and Mie balancing before
converting to floats, which is what keeps the chain inside double
range at any multipole order.

Polarization index conventions used package-wide: p = 0 is TE, 1 is
TM; spherical P = 0 is the electric multipole family, 1 the magnetic.
The pairing delta(p, P) selects the (m/sin)Y factor when the indices
match and the theta derivative otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.constants import c as C_LIGHT

from .specfun import (HyperbolicAngle, angular_factors, angular_tables_scaled,
                      i_power)

TE, TM = 0, 1
POL_E, POL_M = 0, 1
REG, OUT = "reg", "out"


@dataclass(frozen=True)
class PlaneWaveMode:
    """Bloch plane wave: reduced k_x, order n, k_y, polarization, direction."""

    k_x: float
    k_y: float
    n: int
    p: int
    phi: int
    period: float

    @property
    def kxn(self) -> float:
        return self.k_x + 2.0 * math.pi * self.n / self.period


@dataclass(frozen=True)
class SphericalMode:
    ell: int
    m: int
    pol: int
    kind: str = REG

    def __post_init__(self):
        if self.ell < 1 or abs(self.m) > self.ell:
            raise ValueError(f"invalid spherical mode (l={self.ell}, m={self.m})")
        if self.kind not in (REG, OUT):
            raise ValueError(f"kind must be 'reg' or 'out', got {self.kind!r}")


@dataclass(frozen=True)
class SphericalModeTable:
    """Flattened (l, m, P) mode list, m-major so fixed-m blocks are contiguous."""

    ell_max: int
    ells: np.ndarray
    ms: np.ndarray
    pols: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.ells)

    def block_slice(self, m: int) -> slice:
        start = np.searchsorted(self.ms, m, side="left")
        stop = np.searchsorted(self.ms, m, side="right")
        return slice(int(start), int(stop))


@lru_cache(maxsize=64)
def spherical_mode_table(ell_max: int) -> SphericalModeTable:
    """Mode list for l = 1..ell_max; dimension 2 l_max (l_max + 2)."""
    ells, ms, pols = [], [], []
    for m in range(-ell_max, ell_max + 1):
        for ell in range(max(1, abs(m)), ell_max + 1):
            for pol in (POL_E, POL_M):
                ells.append(ell)
                ms.append(m)
                pols.append(pol)
    return SphericalModeTable(ell_max, np.array(ells), np.array(ms),
                              np.array(pols))


def translation_factor(xi: float, k_xn: float, k_y: float, distance: float) -> float:
    """One-way propagation factor exp(-kappa_n * distance)."""
    if distance <= 0.0:
        raise ValueError("translation distance must be positive")
    kappa = math.sqrt((xi / C_LIGHT) ** 2 + k_xn ** 2 + k_y ** 2)
    return math.exp(-kappa * distance)


def _kernel_scalar(sph: SphericalMode, pw: PlaneWaveMode, xi: float,
                   outgoing: bool) -> complex:
    kxn = pw.kxn
    angle = HyperbolicAngle.from_wavevector(xi, kxn, pw.k_y, C_LIGHT, phi=pw.phi)
    pi_arr, tau_arr, tag = angular_factors(sph.ell, sph.m, angle)
    matched = (pw.p == sph.pol)
    mag = (pi_arr if matched else tau_arr)[-1].to_float()
    ang = float(mag) * i_power(tag)
    norm = 1.0 / math.sqrt(sph.ell * (sph.ell + 1.0))
    if not outgoing:
        # <l,m,P,reg | k,p,phi> = -4 pi i^{p-1} e^{-im phi_k} / sqrt(l(l+1)) * ang
        return (-4.0 * math.pi * i_power(pw.p) * norm
                * np.exp(-1j * sph.m * angle.phi_k) * ang)
    # <k,p,phi | l,m,P,out>: K k_z = -xi kappa / c is real negative
    xi_t = xi / C_LIGHT
    kappa = math.sqrt(xi_t ** 2 + kxn ** 2 + pw.k_y ** 2)
    return (2.0 * math.pi * i_power(-pw.p) * norm / (xi_t * kappa)
            * np.exp(1j * sph.m * angle.phi_k) * ang)


def kernel_reg(sph: SphericalMode, pw: PlaneWaveMode, xi: float) -> complex:
    """Coefficient of a plane wave on the regular spherical mode (l, m, P)."""
    if sph.kind != REG:
        raise ValueError("kernel_reg expects a regular spherical mode")
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    return _kernel_scalar(sph, pw, xi, outgoing=False)


def kernel_out(pw: PlaneWaveMode, sph: SphericalMode, xi: float) -> complex:
    """Coefficient of an outgoing spherical mode on the plane wave (k, p, phi)."""
    if sph.kind != OUT:
        raise ValueError("kernel_out expects an outgoing spherical mode")
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    return _kernel_scalar(sph, pw, xi, outgoing=True)


@dataclass
class KernelBlocks:
    """Batched kernel factor matrices along one Brillouin-zone line.

    The leading axis runs over the k_y nodes.  a_* describe the
    regular-mode kernels of upward waves, laid out
    [k_y, spherical modes, (p', n')]; b_* the outgoing-mode kernels of
    downward waves, [k_y, (p, n), spherical modes].  The plane-wave
    axis is polarization-major, matching ReflectionBlock.index.
    Values are phase * mantissa * 2**exponent; translation and Mie
    factors are folded in by the caller before float conversion.
    """

    a_mant: np.ndarray
    a_exp: np.ndarray
    a_phase: np.ndarray
    b_mant: np.ndarray
    b_exp: np.ndarray
    b_phase: np.ndarray
    kappa: np.ndarray  # (n_ky, 2N+1)


def kernel_block_factors(xi: float, k_x: float, k_y_nodes, n_orders: int,
                         period: float, modes: SphericalModeTable) -> KernelBlocks:
    """Assemble the scaled kernel matrices for a batch of k_y nodes.

    One angular-recurrence sweep, batched over (k_y node, diffraction
    order), serves every (l, m, P) row of both matrices; the phi = -1
    factors follow from the cos(theta) parity of the Legendre table.
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    k_y_nodes = np.atleast_1d(np.asarray(k_y_nodes, dtype=np.float64))
    n_ky = len(k_y_nodes)
    orders = np.arange(-n_orders, n_orders + 1)
    kxn = k_x + 2.0 * math.pi * orders / period
    xi_t = xi / C_LIGHT
    k_par = np.hypot(kxn[None, :], k_y_nodes[:, None])  # (n_ky, 2N+1)
    if np.any(k_par == 0.0):
        raise ValueError("node with k_parallel = 0 on the order lattice")
    kappa = np.sqrt(xi_t ** 2 + k_par ** 2)
    sigma = k_par / xi_t
    cos_up = kappa / xi_t
    phi_k = np.arctan2(k_y_nodes[:, None], kxn[None, :])
    n_pw = len(orders)
    ell_max = modes.ell_max

    pi_tab, tau_tab = angular_tables_scaled(ell_max, cos_up.ravel(),
                                            sigma.ravel())

    dim = modes.dim
    a_mant = np.zeros((n_ky, dim, 2 * n_pw))
    a_exp = np.zeros((n_ky, dim, 2 * n_pw), dtype=np.int64)
    a_phase = np.zeros((n_ky, dim, 2 * n_pw), dtype=np.complex128)
    b_mant = np.zeros((n_ky, 2 * n_pw, dim))
    b_exp = np.zeros((n_ky, 2 * n_pw, dim), dtype=np.int64)
    b_phase = np.zeros((n_ky, 2 * n_pw, dim), dtype=np.complex128)

    out_pref = 2.0 * math.pi / (xi_t * kappa)  # (n_ky, 2N+1)
    for m in range(-ell_max, ell_max + 1):
        blk = modes.block_slice(m)
        lmin = max(1, abs(m))
        ell_range = np.arange(lmin, ell_max + 1)
        n_l = len(ell_range)
        ma = abs(m)
        norm = 1.0 / np.sqrt(ell_range * (ell_range + 1.0))  # (n_l,)
        # angular magnitude slabs at phi = +1, shape (n_ky, n_l, 2N+1)
        def _slab(tab):
            v = tab[:, lmin:, ma].reshape(n_ky, n_pw, n_l)
            return np.swapaxes(v, 1, 2)
        pi_m = _slab(pi_tab.mantissa) * (1.0 if m >= 0 else -1.0)
        pi_e = _slab(pi_tab.exponent)
        tau_m = _slab(tau_tab.mantissa)
        tau_e = _slab(tau_tab.exponent)
        # parity signs turning the phi = +1 tables into phi = -1 values
        par = np.where((ell_range + ma) % 2 == 0, 1.0, -1.0)[None, :, None]

        quad = i_power(1 - m)          # the shared (-i)^{m-1} quadrant phase
        azim = np.exp(1j * m * phi_k)  # (n_ky, 2N+1)
        for pol in (POL_E, POL_M):
            rows = np.arange(blk.start + pol, blk.stop, 2)
            for p in (TE, TM):
                cols = slice(p * n_pw, (p + 1) * n_pw)
                mag_m, mag_e = (pi_m, pi_e) if p == pol else (tau_m, tau_e)
                # regular kernel of the upward wave:
                # -4 pi i^p (-i)^{m-1} e^{-im phi_k} mag / sqrt(l(l+1))
                a_mant[:, rows, cols] = (-4.0 * math.pi) \
                    * norm[None, :, None] * mag_m
                a_exp[:, rows, cols] = mag_e
                a_phase[:, rows, cols] = (i_power(p) * quad) \
                    * azim.conj()[:, None, :]
                # outgoing kernel of the downward wave: +2 pi i^{-p}
                # (-i)^{m-1} e^{+im phi_k} mag(theta^-) / (xi_t kappa sqrt(l(l+1)))
                par_b = par if p == pol else -par
                b_mant[:, cols, rows] = np.swapaxes(
                    out_pref[:, None, :] * norm[None, :, None] * mag_m * par_b,
                    1, 2)
                b_exp[:, cols, rows] = np.swapaxes(mag_e, 1, 2)
                b_phase[:, cols, rows] = (i_power(-p) * quad) * azim[:, :, None]

    return KernelBlocks(a_mant, a_exp, a_phase, b_mant, b_exp, b_phase, kappa)
