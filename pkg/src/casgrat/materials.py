"""Dielectric permittivities on the imaginary frequency axis.

Every scattering quantity in this package is evaluated at Wick-rotated
frequencies, where the permittivity of a passive causal medium is real,
>= 1, and monotonically non-increasing in xi.  Four model variants are
supported: vacuum, a Drude metal, a sum of Lorentz oscillators, and a
tabulated curve with log-log interpolation.  Tabulated curves can also
be produced from measured loss spectra via the dispersion integral in
:func:`kk_transform`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.constants import e as _e_charge, hbar as _hbar

EV_TO_RAD_S = _e_charge / _hbar  # angular frequency of a 1 eV photon


@dataclass(frozen=True)
class Vacuum:
    """Empty space, eps = 1 at every frequency."""


@dataclass(frozen=True)
class Drude:
    """Drude metal: eps(i xi) = 1 + omega_p^2 / (xi (xi + gamma)).

    omega_p and gamma are angular frequencies in rad/s.  At xi = 0 the
    permittivity diverges; evaluation returns +inf and the energy
    module handles the zero-frequency Matsubara term with a small
    surrogate frequency instead.
    """

    omega_p: float
    gamma: float

    def __post_init__(self):
        if self.omega_p < 0.0 or self.gamma < 0.0:
            raise ValueError("Drude parameters must be non-negative")


@dataclass(frozen=True)
class LorentzOscillators:
    """Sum of damped oscillators.

    terms is a tuple of (strength, resonance, damping); on the
    imaginary axis each contributes
    strength * resonance^2 / (resonance^2 + damping*xi + xi^2).
    """

    terms: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        for s, w0, g in self.terms:
            if s < 0.0 or w0 <= 0.0 or g < 0.0:
                raise ValueError(f"invalid oscillator term ({s}, {w0}, {g})")


@dataclass(frozen=True)
class Tabulated:
    """Permittivity sampled on a strictly increasing xi grid.

    Interpolation is log-log linear in (xi, eps - 1).  Below the grid
    eps - 1 is held at its first value (the static limit of a
    dielectric); up to ten times beyond the last point the curve is
    extrapolated as 1 + C/xi^2, the universal transparent-regime tail.
    """

    xi_grid: np.ndarray
    eps_grid: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi_grid, dtype=np.float64)
        eps = np.asarray(self.eps_grid, dtype=np.float64)
        if xi.size < 2:
            raise ValueError("tabulated curve needs at least 2 points")
        if np.any(np.diff(xi) <= 0.0) or xi[0] <= 0.0:
            raise ValueError("tabulated xi grid must be positive and strictly increasing")
        if np.any(eps < 1.0):
            raise ValueError("tabulated eps(i xi) must be >= 1")
        object.__setattr__(self, "xi_grid", xi)
        object.__setattr__(self, "eps_grid", eps)


MaterialModel = Vacuum | Drude | LorentzOscillators | Tabulated


def permittivity(model: MaterialModel, xi):
    """eps(i xi) for scalar or array xi >= 0 (rad/s)."""
    xi_arr = np.asarray(xi, dtype=np.float64)
    if np.any(xi_arr < 0.0):
        raise ValueError("xi must be non-negative")
    scalar = xi_arr.ndim == 0
    xi_arr = np.atleast_1d(xi_arr)

    if isinstance(model, Vacuum):
        out = np.ones_like(xi_arr)
    elif isinstance(model, Drude):
        with np.errstate(divide="ignore"):
            out = 1.0 + model.omega_p ** 2 / (xi_arr * (xi_arr + model.gamma))
        out[xi_arr == 0.0] = math.inf if model.omega_p > 0.0 else 1.0
    elif isinstance(model, LorentzOscillators):
        out = np.ones_like(xi_arr)
        for s, w0, g in model.terms:
            out += s * w0 ** 2 / (w0 ** 2 + g * xi_arr + xi_arr ** 2)
    elif isinstance(model, Tabulated):
        if np.any(xi_arr > 10.0 * model.xi_grid[-1]):
            raise ValueError("xi beyond 10x the tabulated range")
        log_xi = np.log(model.xi_grid)
        log_chi = np.log(model.eps_grid - 1.0)
        out = np.empty_like(xi_arr)
        below = xi_arr <= model.xi_grid[0]
        above = xi_arr >= model.xi_grid[-1]
        mid = ~(below | above)
        out[below] = model.eps_grid[0]
        if np.any(mid):
            out[mid] = 1.0 + np.exp(np.interp(np.log(xi_arr[mid]), log_xi, log_chi))
        if np.any(above):
            c_tail = (model.eps_grid[-1] - 1.0) * model.xi_grid[-1] ** 2
            out[above] = 1.0 + c_tail / xi_arr[above] ** 2
    else:
        raise TypeError(f"unknown material model {type(model)!r}")

    return float(out[0]) if scalar else out


def refractive_index(model: MaterialModel, xi):
    """n(i xi) = sqrt(eps(i xi))."""
    return np.sqrt(permittivity(model, xi))


def kk_transform(loss_spectrum, n_xi: int = 240,
                 xi_min: float = 1e10, xi_max: float = 1e19) -> Tabulated:
    """Imaginary-axis permittivity from a real-frequency loss spectrum.

    eps(i xi) = 1 + (2/pi) int_0^inf omega eps''(omega)/(omega^2+xi^2) domega,
    evaluated by trapezoidal quadrature on the given grid, with
    power-law extensions fitted to the first/last grid points so the
    integral tails are captured.  The result is returned as a Tabulated
    model on a log-spaced xi grid wide enough for Matsubara sums at
    room temperature.

    Parameters
    ----------
    loss_spectrum : array-like of shape (n, 2)
        rows (omega in rad/s, eps''(omega)), omega strictly increasing,
        eps'' >= 0
    """
    spec = np.asarray(loss_spectrum, dtype=np.float64)
    if spec.ndim != 2 or spec.shape[1] != 2 or spec.shape[0] < 2:
        raise ValueError("loss_spectrum must be an (n, 2) array with n >= 2")
    omega, loss = spec[:, 0], spec[:, 1]
    if np.any(np.diff(omega) <= 0.0) or omega[0] <= 0.0:
        raise ValueError("omega grid must be positive and strictly increasing")
    if np.any(loss < 0.0):
        raise ValueError("loss values must be non-negative")

    def _power_law_extension(w0, f0, w1, f1, targets):
        if f0 <= 0.0 or f1 <= 0.0:
            return np.zeros_like(targets)
        p = math.log(f1 / f0) / math.log(w1 / w0)
        return f0 * (targets / w0) ** p

    # extend below the grid (toward zero) and above it (transparent tail)
    lo_grid = np.geomspace(omega[0] * 1e-6, omega[0], 200, endpoint=False)
    lo_loss = _power_law_extension(omega[0], loss[0], omega[1], loss[1], lo_grid)
    hi_top = max(omega[-1] * 1e4, xi_max * 10.0)
    hi_grid = np.geomspace(omega[-1], hi_top, 400)[1:]
    hi_loss = _power_law_extension(omega[-2], loss[-2], omega[-1], loss[-1], hi_grid)
    w_ext = np.concatenate([lo_grid, omega, hi_grid])
    f_ext = np.concatenate([lo_loss, loss, hi_loss])

    xi_out = np.geomspace(xi_min, xi_max, n_xi)
    integrand = w_ext[None, :] * f_ext[None, :] / (w_ext[None, :] ** 2 + xi_out[:, None] ** 2)
    chi = (2.0 / math.pi) * np.trapezoid(integrand, w_ext, axis=1)
    return Tabulated(xi_out, 1.0 + chi)


def gold() -> Drude:
    """Drude gold: plasma frequency 9 eV, dissipation rate 35 meV."""
    return Drude(9.0 * EV_TO_RAD_S, 0.035 * EV_TO_RAD_S)


def fused_silica() -> Tabulated:
    """Bundled amorphous-SiO2 curve with eps(0) ~= 3.80.

    Generated from a causal two-oscillator fit (one infrared, one
    ultraviolet band) sampled on 200 log-spaced points; see
    data/fused_silica_eps.txt.  Any curve of this static value and
    shape class is interchangeable here.
    """
    ref = resources.files("casgrat").joinpath("data/fused_silica_eps.txt")
    with resources.as_file(ref) as path:
        return load_tabulated(path)


def load_tabulated(path) -> Tabulated:
    """Read a two-column whitespace-separated permittivity file.

    Columns are xi (rad/s) and eps(i xi); lines starting with '#' are
    ignored; the first column must be strictly increasing.
    """
    data = np.loadtxt(path, comments="#", dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: expected two columns (xi_rad_per_s, eps_i_xi)")
    return Tabulated(data[:, 0], data[:, 1])


def save_tabulated(model: Tabulated, path) -> None:
    """Write a Tabulated model in the two-column text format."""
    header = "xi_rad_per_s  eps_i_xi"
    np.savetxt(path, np.column_stack([model.xi_grid, model.eps_grid]),
               header=header, fmt="%.10e")
