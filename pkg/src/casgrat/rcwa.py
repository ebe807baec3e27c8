"""Fourier-modal reflection matrices of a 1D lamellar grating at imaginary frequency.

The grating is a binary profile of period D along x: a ridge of the
substrate material filling a fraction f of the cell on top of a
homogeneous half-space of the same material, with vacuum above and in
the grooves.  Bloch reduction leaves, per (xi, k_x, k_y), a dense
reflection matrix over diffraction orders n = -N..N and the two
polarizations (TE, TM) of the incoming/outgoing vacuum plane waves.

After Wick rotation every propagation constant is real and decaying,
which makes the whole construction real arithmetic: the modal
eigenproblem of the grating layer is solved with the inverse-rule
(fast-converging) factorization for the x-discontinuous field
component, and the three regions are stitched with the scattering-
matrix recursion, which never exponentiates a growing mode.  The
conventions (polarization vectors, amplitude reference planes at the
grating top) match the plane-wave basis used by the round-trip
assembly, so degenerate profiles reduce exactly to the Fresnel
half-space amplitudes

    r_TE = (kappa - kappa_t)/(kappa + kappa_t),
    r_TM = (eps kappa - kappa_t)/(eps kappa + kappa_t).
"""

from __future__ import annotations

import hashlib
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.linalg import expm, sqrtm, toeplitz

from .materials import MaterialModel, Tabulated, permittivity

TE, TM = 0, 1


class RcwaError(RuntimeError):
    """Modal eigenproblem or interface matching failed."""


@dataclass(frozen=True)
class GratingSpec:
    """Lamellar grating geometry.

    period D and depth h in meters, fill factor f in (0, 1]; the ridge
    occupies [0, f D) of the unit cell, shifted by lateral_offset.  The
    substrate below the corrugation is the same material as the ridge.
    """

    period: float
    depth: float
    fill: float
    material: MaterialModel
    lateral_offset: float = 0.0

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValueError(f"grating period must be positive, got {self.period}")
        if self.depth < 0.0:
            raise ValueError(f"grating depth must be non-negative, got {self.depth}")
        if not 0.0 < self.fill <= 1.0:
            raise ValueError(f"fill factor must be in (0, 1], got {self.fill}")

    def fingerprint(self) -> str:
        return geometry_fingerprint(self)


def material_fingerprint(model: MaterialModel) -> str:
    h = hashlib.sha1()
    h.update(type(model).__name__.encode())
    if isinstance(model, Tabulated):
        h.update(model.xi_grid.tobytes())
        h.update(model.eps_grid.tobytes())
    else:
        h.update(repr(model).encode())
    return h.hexdigest()


def geometry_fingerprint(spec: GratingSpec) -> str:
    h = hashlib.sha1()
    h.update(np.array([spec.period, spec.depth, spec.fill]).tobytes())
    h.update(material_fingerprint(spec.material).encode())
    return h.hexdigest()


@dataclass
class ReflectionBlock:
    """Reflection matrix over (order, polarization) at fixed (xi, k_x, k_y).

    entries[row, col] couples an incoming downward mode (column) to an
    outgoing upward mode (row); indices are polarization-major,
    idx = p*(2N+1) + (n + N).
    """

    xi: float
    k_x: float
    k_y: float
    n_orders: int
    period: float
    entries: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_orders, self.n_orders + 1)

    @property
    def kxn(self) -> np.ndarray:
        return self.k_x + 2.0 * math.pi * self.orders / self.period

    @property
    def kappa(self) -> np.ndarray:
        return np.sqrt((self.xi / C_LIGHT) ** 2 + self.kxn ** 2 + self.k_y ** 2)

    def index(self, p: int, n: int) -> int:
        return p * (2 * self.n_orders + 1) + (n + self.n_orders)

    def dump_csv(self, path) -> None:
        """Debug dump: header row/col labels "n:p", entries as re,im pairs."""
        labels = [f"{n}:{'TE' if p == TE else 'TM'}"
                  for p in (TE, TM) for n in self.orders]
        with open(path, "w") as fh:
            fh.write("," + ",".join(labels) + "\n")
            for i, lab in enumerate(labels):
                cells = (f"{v.real:.12e},{v.imag:.12e}" for v in self.entries[i])
                fh.write(lab + "," + ",".join(cells) + "\n")


def apply_lateral_shift(block: ReflectionBlock, shift: float) -> ReflectionBlock:
    """Reflection matrix of the same grating translated by +shift along x.

    Bloch modes pick up order-dependent phases only:
    entry (n', p'; n, p) is multiplied by exp(i (k_{x,n} - k_{x,n'}) shift).
    """
    if shift == 0.0:
        return block
    ph = np.exp(1j * np.tile(block.kxn, 2) * shift)
    entries = block.entries * (ph[None, :] * ph[:, None].conj())
    return ReflectionBlock(block.xi, block.k_x, block.k_y, block.n_orders,
                           block.period, entries)


def step_profile_fourier(value_ridge: float, value_groove: float, fill: float,
                         n_harm: int) -> np.ndarray:
    """Fourier coefficients c_m, m = -n_harm..n_harm, of a binary profile.

    The profile equals value_ridge on a ridge of width fill*D centered
    at x = 0 and value_groove elsewhere, so all coefficients are real:
    c_0 = f*v_r + (1-f)*v_g, c_m = (v_r - v_g) f sinc(m f).
    """
    m = np.arange(-n_harm, n_harm + 1)
    coeffs = (value_ridge - value_groove) * fill * np.sinc(m * fill)
    coeffs[n_harm] = fill * value_ridge + (1.0 - fill) * value_groove
    return coeffs


def _toeplitz_from_coeffs(coeffs: np.ndarray, size: int) -> np.ndarray:
    """T[i, j] = c_{i-j} from coefficients indexed -n_harm..n_harm."""
    mid = len(coeffs) // 2
    col = coeffs[mid:mid + size]
    row = coeffs[mid::-1][:size]
    return toeplitz(col, row)


def fresnel_amplitudes(eps: float, xi: float, k_par: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Half-space Fresnel amplitudes (r_TE, r_TM) at imaginary frequency."""
    xi_t = xi / C_LIGHT
    k_par = np.asarray(k_par, dtype=np.float64)
    kappa = np.sqrt(xi_t ** 2 + k_par ** 2)
    kappa_t = np.sqrt(eps * xi_t ** 2 + k_par ** 2)
    r_te = (kappa - kappa_t) / (kappa + kappa_t)
    r_tm = (eps * kappa - kappa_t) / (eps * kappa + kappa_t)
    return r_te, r_tm


def fresnel_reflection(material: MaterialModel, xi: float, k_x: float,
                       k_y: float, n_orders: int, period: float
                       ) -> ReflectionBlock:
    """Diagonal ReflectionBlock of a homogeneous half-space.

    Used for the plane-sphere reference, the plane-plane energy, and as
    the degenerate limit of the grating solver.
    """
    eps = permittivity(material, xi)
    orders = np.arange(-n_orders, n_orders + 1)
    kxn = k_x + 2.0 * math.pi * orders / period
    k_par = np.hypot(kxn, k_y)
    r_te, r_tm = fresnel_amplitudes(eps, xi, k_par)
    entries = np.diag(np.concatenate([r_te, r_tm]).astype(np.complex128))
    return ReflectionBlock(xi, k_x, k_y, n_orders, period, entries)


def _homogeneous_stacks(eps: float, xi_t: float, kxn: np.ndarray, k_y: float
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Tangential-field stacks [E_x; E_y; b_x; b_y] of plane-wave modes.

    Columns are polarization-major (TE block then TM block over
    orders); returns (upward stack, downward stack).  b is the scaled
    magnetic field xi_t * i * Z0 * H made real by the Wick rotation.
    """
    m = len(kxn)
    k_par = np.hypot(kxn, k_y)
    if np.any(k_par == 0.0):
        raise RcwaError("mode with k_parallel = 0 hit the order lattice; "
                        "shift the quadrature node off the symmetry point")
    chat = kxn / k_par
    shat = k_y / k_par
    kappa = np.sqrt(eps * xi_t ** 2 + k_par ** 2)
    sq_eps = math.sqrt(eps)

    stacks = []
    for phi in (+1.0, -1.0):
        st = np.zeros((4 * m, 2 * m))
        idx = np.arange(m)
        # TE columns
        st[idx, idx] = -shat
        st[m + idx, idx] = chat
        st[2 * m + idx, idx] = phi * kappa * chat
        st[3 * m + idx, idx] = phi * kappa * shat
        # TM columns
        st[idx, m + idx] = phi * kappa * chat / (sq_eps * xi_t)
        st[m + idx, m + idx] = phi * kappa * shat / (sq_eps * xi_t)
        st[2 * m + idx, m + idx] = sq_eps * xi_t * shat
        st[3 * m + idx, m + idx] = -sq_eps * xi_t * chat
        stacks.append(st)
    return stacks[0], stacks[1]


def _layer_operator(eps_g: float, fill: float, xi_t: float, kxn: np.ndarray,
                    k_y: float) -> tuple[np.ndarray, np.ndarray]:
    """Square-root propagation operator of the corrugated layer.

    The tangential fields obey d^2 e/dz^2 = Omega e for e = [E_x; E_y],
    with the inverse-rule Toeplitz factorization on the E_x
    constitutive relation.  Instead of diagonalizing Omega (whose
    eigenvectors degenerate whenever two modal constants cross, e.g.
    for weak corrugation), the solutions are written in the identity
    basis with the principal square root S = Omega^{1/2}: fields decay
    like expm(+-S z).  Returns (S, V) where V = G S^{-1} gives the
    b-parts of the downward stack [I; +V] (upward [I; -V]).
    """
    m = len(kxn)
    eps_c = step_profile_fourier(eps_g, 1.0, fill, m - 1)
    inv_c = step_profile_fourier(1.0 / eps_g, 1.0, fill, m - 1)
    e_t = _toeplitz_from_coeffs(eps_c, m)
    e_inv_rule = np.linalg.inv(_toeplitz_from_coeffs(inv_c, m))
    eps_hat = np.linalg.inv(e_t)

    alpha = kxn
    beta = k_y
    xi2 = xi_t * xi_t

    # with the Li rules the upper-right block of Omega cancels exactly
    # (eps_hat @ e_t == I): the familiar conical-mount decoupling
    omega = np.zeros((2 * m, 2 * m))
    omega[:m, :m] = (xi2 * np.eye(m)
                     + (alpha[:, None] * eps_hat) * alpha[None, :]) @ e_inv_rule
    omega[:m, :m][np.diag_indices(m)] += beta * beta
    omega[m:, :m] = beta * ((eps_hat * alpha[None, :]) @ e_inv_rule
                            - np.diag(alpha))
    omega[m:, m:] = xi2 * e_t + np.diag(alpha ** 2)
    omega[m:, m:][np.diag_indices(m)] += beta * beta

    try:
        s_op = sqrtm(omega)
    except Exception as exc:  # scipy raises LinAlgError or ValueError
        raise RcwaError(f"layer square root failed (cond(Omega) ~ "
                        f"{np.linalg.cond(omega):.2e})") from exc
    if np.iscomplexobj(s_op):
        if np.max(np.abs(s_op.imag)) > 1e-10 * np.max(np.abs(s_op.real)):
            raise RcwaError("layer propagation operator has a complex part; "
                            "permittivity should be real on the imaginary axis")
        s_op = s_op.real
    g_t = np.zeros((2 * m, 2 * m))
    g_t[:m, :m] = alpha[:, None] * beta * np.eye(m)
    g_t[:m, m:] = -(xi2 * e_t + np.diag(alpha ** 2))
    g_t[m:, :m] = xi2 * e_inv_rule + beta * beta * np.eye(m)
    g_t[m:, m:] = -beta * np.diag(alpha)
    v_mat = np.linalg.solve(s_op.T, g_t.T).T
    return s_op, v_mat


def _interface_smatrix(stack_above: tuple[np.ndarray, np.ndarray],
                       stack_below: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Scattering matrix of a single interface from tangential continuity.

    Stacks are (upward, downward) 4M x 2M mode matrices.  The returned
    4M x 4M matrix maps incoming [down-from-above; up-from-below] to
    outgoing [up-into-above; down-into-below].
    """
    up_a, dn_a = stack_above
    up_b, dn_b = stack_below
    lhs = np.hstack([up_a, -dn_b])
    rhs = np.hstack([-dn_a, up_b])
    # the E rows are O(1) while the b rows scale like kappa/xi_t, which
    # can be many decades; equilibrate and refine once to keep the small
    # reflection entries honest
    row_scale = np.max(np.abs(lhs), axis=1)
    lhs_eq = lhs / row_scale[:, None]
    rhs_eq = rhs / row_scale[:, None]
    try:
        sol = np.linalg.solve(lhs_eq, rhs_eq)
        sol += np.linalg.solve(lhs_eq, rhs_eq - lhs_eq @ sol)
    except np.linalg.LinAlgError as exc:
        raise RcwaError("interface matching is singular "
                        f"(cond ~ {np.linalg.cond(lhs_eq):.2e})") from exc
    return sol


def _star(s_a: np.ndarray, s_b: np.ndarray, m2: int) -> np.ndarray:
    """Redheffer star product of two scattering matrices (shared mid basis)."""
    ra_t, ta_bt = s_a[:m2, :m2], s_a[:m2, m2:]
    ta_tb, ra_b = s_a[m2:, :m2], s_a[m2:, m2:]
    rb_t, tb_bt = s_b[:m2, :m2], s_b[:m2, m2:]
    tb_tb, rb_b = s_b[m2:, :m2], s_b[m2:, m2:]
    eye = np.eye(m2, dtype=s_a.dtype)
    mid = np.linalg.solve(eye - ra_b @ rb_t, np.hstack([ta_tb, ra_b @ tb_bt]))
    d_t, d_u = mid[:, :m2], mid[:, m2:]
    out = np.empty((2 * m2, 2 * m2), dtype=np.result_type(s_a, s_b))
    out[:m2, :m2] = ra_t + ta_bt @ rb_t @ d_t
    out[:m2, m2:] = ta_bt @ (rb_t @ d_u + tb_bt)
    out[m2:, :m2] = tb_tb @ d_t
    out[m2:, m2:] = rb_b + tb_tb @ d_u
    return out


def grating_reflection(spec: GratingSpec, xi: float, k_x: float, k_y: float,
                       n_orders: int, cache: "ReflectionCache | None" = None
                       ) -> ReflectionBlock:
    """Upward reflection matrix of the grating at Bloch vector (k_x, k_y).

    Parameters
    ----------
    spec : GratingSpec
    xi : float
        imaginary frequency (rad/s), > 0
    k_x : float
        reduced wavevector in the first Brillouin zone [-pi/D, pi/D]
    k_y : float
        conserved transverse wavevector
    n_orders : int
        diffraction truncation N; the matrix covers n = -N..N

    Returns
    -------
    ReflectionBlock
        amplitudes referenced at the grating top plane z = 0
    """
    if xi <= 0.0:
        raise ValueError("xi must be positive")
    if n_orders < 1:
        raise ValueError("n_orders must be >= 1")
    if abs(k_x) > math.pi / spec.period * (1.0 + 1e-12):
        raise ValueError("k_x outside the first Brillouin zone")
    if spec.fill * (2 * n_orders + 1) < 2.0:
        warnings.warn(f"truncation N={n_orders} barely resolves fill factor "
                      f"{spec.fill}; expect slow convergence", stacklevel=2)

    centered = None
    if cache is not None:
        centered = cache.lookup(spec, xi, k_x, k_y, n_orders)
    if centered is None:
        centered = _grating_reflection_centered(spec, xi, k_x, k_y, n_orders)
        if cache is not None:
            cache.store(spec, xi, k_x, k_y, n_orders, centered)
    # canonical profile: ridge spanning [0, fD) plus the spec's own offset
    return apply_lateral_shift(
        centered, spec.fill * spec.period / 2.0 + spec.lateral_offset)


def _grating_reflection_centered(spec: GratingSpec, xi: float, k_x: float,
                                 k_y: float, n_orders: int) -> ReflectionBlock:
    """Reflection matrix with the ridge centered at x = 0 (real problem)."""
    eps_g = permittivity(spec.material, xi)
    xi_t = xi / C_LIGHT
    orders = np.arange(-n_orders, n_orders + 1)
    kxn = k_x + 2.0 * math.pi * orders / spec.period
    m = len(kxn)
    m2 = 2 * m

    if eps_g == 1.0:
        return ReflectionBlock(xi, k_x, k_y, n_orders, spec.period,
                               np.zeros((m2, m2), dtype=np.complex128))
    if spec.fill == 1.0:
        # corrugation layer is the substrate material itself: a bare
        # half-space, solved exactly by the Fresnel amplitudes
        return fresnel_reflection(spec.material, xi, k_x, k_y, n_orders,
                                  spec.period)

    vac = _homogeneous_stacks(1.0, xi_t, kxn, k_y)
    sub = _homogeneous_stacks(eps_g, xi_t, kxn, k_y)
    s_op, v_mat = _layer_operator(eps_g, spec.fill, xi_t, kxn, k_y)
    # down solutions go like expm(+S z) on z in [-h, 0] (decaying toward
    # the substrate), up like expm(-S z); d e/dz = F h fixes the signs
    eye = np.eye(m2)
    lay_up = np.vstack([eye, -v_mat])
    lay_dn = np.vstack([eye, v_mat])

    s_top = _interface_smatrix(vac, (lay_up, lay_dn))
    s_bot = _interface_smatrix((lay_up, lay_dn), sub)
    if spec.depth > 0.0:
        decay = expm(-s_op * spec.depth)
        s_prop = np.zeros((2 * m2, 2 * m2), dtype=decay.dtype)
        s_prop[:m2, m2:] = decay
        s_prop[m2:, :m2] = decay
        s_tot = _star(s_top, _star(s_prop, s_bot, m2), m2)
    else:
        s_tot = _star(s_top, s_bot, m2)

    entries = np.ascontiguousarray(s_tot[:m2, :m2]).astype(np.complex128)
    return ReflectionBlock(xi, k_x, k_y, n_orders, spec.period, entries)


class ReflectionCache:
    """Thread-safe memo for centered grating reflection blocks.

    Keyed by (geometry, xi, k_x, k_y, N).  PFA comparators, lateral
    sweeps and finite differences revisit identical blocks constantly;
    the modal solve dominates their runtime, so this is the one cache
    that matters.  Oldest entries are evicted once max_bytes of block
    storage is reached.
    """

    def __init__(self, max_bytes: float = 1.2e9):
        self.max_bytes = max_bytes
        self._data: dict = {}
        self._bytes = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _key(self, spec, xi, k_x, k_y, n_orders):
        return (geometry_fingerprint(spec), float(xi), float(k_x),
                float(k_y), int(n_orders))

    def lookup(self, spec, xi, k_x, k_y, n_orders):
        with self._lock:
            block = self._data.get(self._key(spec, xi, k_x, k_y, n_orders))
            if block is None:
                self.misses += 1
            else:
                self.hits += 1
            return block

    def store(self, spec, xi, k_x, k_y, n_orders, block) -> None:
        with self._lock:
            while self._bytes >= self.max_bytes and self._data:
                old = self._data.pop(next(iter(self._data)))
                self._bytes -= old.entries.nbytes
            self._data[self._key(spec, xi, k_x, k_y, n_orders)] = block
            self._bytes += block.entries.nbytes

    def clear(self) -> None:
        with self._lock:
            self._data.clear()
            self._bytes = 0
