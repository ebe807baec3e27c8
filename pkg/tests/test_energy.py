import math

import numpy as np
import pytest
from scipy.constants import c as C_LIGHT, hbar

from casgrat.energy import (ConvergenceError, ThermalState, d_plane_plane,
                            free_energy, lateral_force, normal_force,
                            pfa_double, pfa_single, plane_grating_energy,
                            plane_plane_energy, plane_sphere_free_energy,
                            plateau_observables)
from casgrat.materials import Vacuum, gold
from casgrat.mie import SphereSpec
from casgrat.rcwa import GratingSpec, ReflectionCache
from casgrat.roundtrip import TruncationSpec
from conftest import const_eps

TH = ThermalState(300.0)
MIRROR = const_eps(1e12)

# cheap setup reused by several scans: small sphere, shallow grating
CHEAP_TRUNC = TruncationSpec(ell_max=4, n_orders=4, n_kx=8, n_ky=16,
                             ky_cutoff=16.0)


def cheap_system(eps2):
    sphere = SphereSpec(0.15e-6, gold())
    grating = GratingSpec(1e-6, 0.3e-6, 0.5, eps2)
    return sphere, grating


class TestThermalState:
    def test_room_temperature_scales(self):
        assert TH.kbt == pytest.approx(4.141947e-21, rel=1e-6)  # ~25.85 meV
        assert TH.xi_1 == pytest.approx(2.4677903e14, rel=1e-6)
        assert TH.xi(3) == pytest.approx(3 * TH.xi_1, rel=1e-14)

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            ThermalState(0.0)


class TestFreeEnergy:
    def test_vacuum_sphere_is_zero(self, eps2):
        _, grating = cheap_system(eps2)
        sphere = SphereSpec(0.15e-6, Vacuum())
        res = free_energy(sphere, grating, 0.2e-6, 0.0, TH, 1e-3, CHEAP_TRUNC)
        assert abs(res.free_energy) < 1e-12 * TH.kbt

    def test_vacuum_grating_is_zero(self):
        sphere = SphereSpec(0.15e-6, gold())
        grating = GratingSpec(1e-6, 0.3e-6, 0.5, Vacuum())
        res = free_energy(sphere, grating, 0.2e-6, 0.0, TH, 1e-3, CHEAP_TRUNC)
        assert abs(res.free_energy) < 1e-12 * TH.kbt

    def test_attractive_and_ledger_structure(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        res = free_energy(sphere, grating, 0.2e-6, 0.0, TH, 1e-3,
                          CHEAP_TRUNC, cache)
        assert res.free_energy < 0.0
        ns = [n for n, _, _ in res.terms]
        assert ns == list(range(len(ns)))
        # n = 0 carries weight 1/2 at the surrogate frequency
        assert res.terms[0][1] == pytest.approx(1e-3 * TH.xi_1, rel=1e-12)
        rows = res.ledger_rows()
        assert rows[-1][3] == pytest.approx(res.free_energy, rel=1e-12)
        # magnitudes decay monotonically in the tail
        mags = [abs(t) for _, _, t in res.terms[1:]]
        assert all(b <= a * 1.05 for a, b in zip(mags[2:], mags[3:]))

    def test_monotone_in_gap(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        vals = [free_energy(sphere, grating, d, 0.0, TH, 1e-3, CHEAP_TRUNC,
                            cache).free_energy
                for d in (0.15e-6, 0.25e-6, 0.4e-6)]
        assert vals[0] < vals[1] < vals[2] < 0.0

    def test_surrogate_halving_stability(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        a = free_energy(sphere, grating, 0.2e-6, 0.0, TH, 1e-3, CHEAP_TRUNC,
                        cache, surrogate_factor=1e-3).free_energy
        b = free_energy(sphere, grating, 0.2e-6, 0.0, TH, 1e-3, CHEAP_TRUNC,
                        cache, surrogate_factor=5e-4).free_energy
        assert abs(b / a - 1.0) < 2e-3

    def test_tolerance_validated(self, eps2):
        sphere, grating = cheap_system(eps2)
        with pytest.raises(ValueError):
            free_energy(sphere, grating, 0.2e-6, 0.0, TH, 0.5, CHEAP_TRUNC)


class TestPlanePlane:
    def test_vacuum_side_gives_zero(self):
        assert plane_plane_energy(Vacuum(), gold(), 0.1e-6, TH) == 0.0

    def test_monotone_in_gap(self):
        vals = [plane_plane_energy(MIRROR, MIRROR, z, TH)
                for z in (0.1e-6, 0.2e-6, 0.4e-6)]
        assert vals[0] < vals[1] < vals[2] < 0.0

    def test_ideal_mirror_low_temperature_limit(self):
        # T -> 0 proxy: at 30 K the Matsubara sum approximates the
        # zero-temperature integral to well below a percent at 100 nm
        z = 100e-9
        got = plane_plane_energy(MIRROR, MIRROR, z, ThermalState(30.0),
                                 tol=1e-4, n_k=120, cutoff=20.0)
        want = -math.pi ** 2 * hbar * C_LIGHT / (720.0 * z ** 3)
        assert got == pytest.approx(want, rel=0.01)


class TestPlaneGrating:
    def test_full_fill_matches_plane_plane(self, eps2):
        z = 0.2e-6
        grating = GratingSpec(1e-6, 0.3e-6, 1.0, eps2)
        e_pg = plane_grating_energy(gold(), grating, z, TH, tol=1e-4,
                                    n_kx=12, n_ky=24)
        e_pp = plane_plane_energy(gold(), eps2, z, TH, tol=1e-4)
        assert e_pg == pytest.approx(e_pp, rel=1e-4)

    def test_zero_depth_matches_plane_plane(self, eps2):
        z = 0.2e-6
        grating = GratingSpec(1e-6, 0.0, 0.4, eps2)
        e_pg = plane_grating_energy(gold(), grating, z, TH, tol=1e-4,
                                    n_kx=12, n_ky=24)
        e_pp = plane_plane_energy(gold(), eps2, z, TH, tol=1e-4)
        assert e_pg == pytest.approx(e_pp, rel=1e-4)

    def test_half_fill_bounded_by_planes(self, eps2):
        z = 0.15e-6
        h = 0.3e-6
        grating = GratingSpec(1e-6, h, 0.5, eps2)
        e_pg = plane_grating_energy(gold(), grating, z, TH, tol=1e-3,
                                    n_kx=8, n_ky=16)
        hi = plane_plane_energy(gold(), eps2, z, TH, tol=1e-4)
        lo = plane_plane_energy(gold(), eps2, z + h, TH, tol=1e-4)
        assert hi < e_pg < lo < 0.0


class TestPfa:
    def test_single_full_fill_is_plane_sphere_pfa(self, eps2):
        # for f = 1 the single PFA is 2 pi R int_d^{d+R} E_PP dz; check
        # against an independent fixed-grid quadrature of E_PP
        sphere = SphereSpec(0.3e-6, gold())
        grating = GratingSpec(1e-6, 0.2e-6, 1.0, eps2)
        gap = 0.15e-6
        got = pfa_single(sphere, grating, gap, TH, tol=1e-3, n_z=12,
                         n_kx=8, n_ky=16)
        zs = np.linspace(gap, gap + sphere.radius, 160)
        e_vals = [plane_plane_energy(gold(), eps2, z, TH, tol=1e-4)
                  for z in zs]
        want = 2.0 * math.pi * sphere.radius * np.trapezoid(e_vals, zs)
        assert got == pytest.approx(want, rel=2e-3)

    def test_double_reduces_to_single_at_full_fill(self, eps2):
        sphere = SphereSpec(0.3e-6, gold())
        gap = 0.15e-6
        g_full = GratingSpec(1e-6, 0.2e-6, 1.0, eps2)
        single = pfa_single(sphere, g_full, gap, TH, tol=1e-3, n_z=12,
                            n_kx=8, n_ky=16)
        assert pfa_double(sphere, g_full, gap, TH, tol=1e-3) \
            == pytest.approx(single, rel=5e-3)

    def test_double_ignores_fill_at_zero_depth(self, eps2):
        sphere = SphereSpec(0.3e-6, gold())
        gap = 0.15e-6
        g_flat = GratingSpec(1e-6, 0.0, 0.35, eps2)
        g_full = GratingSpec(1e-6, 0.0, 1.0, eps2)
        assert pfa_double(sphere, g_flat, gap, TH, tol=1e-3) == pytest.approx(
            pfa_double(sphere, g_full, gap, TH, tol=1e-3), rel=1e-9)

    def test_d_plane_plane_is_antiderivative(self, eps2):
        # -dD/dz = E_PP via central difference
        z = 0.3e-6
        step = 0.01e-6
        lhs = -(d_plane_plane(gold(), eps2, z + step, TH, tol=1e-4)
                - d_plane_plane(gold(), eps2, z - step, TH, tol=1e-4)) \
            / (2.0 * step)
        want = plane_plane_energy(gold(), eps2, z, TH, tol=1e-4)
        assert lhs == pytest.approx(want, rel=5e-3)


class TestPlaneSphereReference:
    def test_matches_general_path_light(self, silica):
        # light version of the acceptance plane-limit criterion
        sphere = SphereSpec(0.3e-6, gold())
        gap = 0.25e-6
        ref = plane_sphere_free_energy(sphere, silica, gap, TH, tol=1e-3,
                                       ell_max=8)
        grating = GratingSpec(1e-6, 0.3e-6, 1.0, silica)
        trunc = TruncationSpec(ell_max=8, n_orders=6, n_kx=12, n_ky=32,
                               ky_cutoff=22.0)
        gen = free_energy(sphere, grating, gap, 0.0, TH, 1e-3, trunc)
        assert gen.free_energy == pytest.approx(ref.free_energy, rel=5e-3)

    def test_attractive(self, silica):
        sphere = SphereSpec(0.2e-6, gold())
        res = plane_sphere_free_energy(sphere, silica, 0.2e-6, TH, 1e-3,
                                       ell_max=6)
        assert res.free_energy < 0.0


class TestForces:
    def test_lateral_force_vanishes_at_symmetry_points(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        ridge_center = grating.fill * grating.period / 2.0
        groove_center = (grating.fill + 1.0) * grating.period / 2.0
        f_ridge = lateral_force(sphere, grating, 0.12e-6, ridge_center, TH,
                                1e-3, CHEAP_TRUNC, cache)
        f_groove = lateral_force(sphere, grating, 0.12e-6, groove_center, TH,
                                 1e-3, CHEAP_TRUNC, cache)
        f_quarter = lateral_force(sphere, grating, 0.12e-6,
                                  ridge_center + 0.25 * grating.period, TH,
                                  1e-3, CHEAP_TRUNC, cache)
        assert abs(f_ridge) < 1e-3 * abs(f_quarter)
        assert abs(f_groove) < 1e-3 * abs(f_quarter)

    def test_lateral_force_points_toward_ridge_center(self, eps2):
        # energy is minimized over the ridge center: the force for
        # 0 < x_S < ridge_center must be negative (pulling back)
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        ridge_center = grating.fill * grating.period / 2.0
        f_right = lateral_force(sphere, grating, 0.12e-6,
                                ridge_center + 0.1 * grating.period, TH,
                                1e-3, CHEAP_TRUNC, cache)
        f_left = lateral_force(sphere, grating, 0.12e-6,
                               ridge_center - 0.1 * grating.period, TH,
                               1e-3, CHEAP_TRUNC, cache)
        assert f_right < 0.0 < f_left

    def test_normal_force_attractive(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        f_n = normal_force(sphere, grating, 0.2e-6, 0.0, TH, 1e-3,
                           CHEAP_TRUNC, cache)
        assert f_n < 0.0

    def test_step_validation(self, eps2):
        sphere, grating = cheap_system(eps2)
        with pytest.raises(ValueError):
            lateral_force(sphere, grating, 0.2e-6, 0.0, TH, 1e-3,
                          CHEAP_TRUNC, step=grating.period)


class TestSymmetries:
    def test_periodicity_and_mirror(self, eps2):
        sphere, grating = cheap_system(eps2)
        cache = ReflectionCache()
        ridge_center = grating.fill * grating.period / 2.0
        u = 0.17 * grating.period

        def energy(x):
            return free_energy(sphere, grating, 0.15e-6, x, TH, 1e-3,
                               CHEAP_TRUNC, cache).free_energy

        base = energy(ridge_center + u)
        assert energy(ridge_center + u + grating.period) \
            == pytest.approx(base, rel=1e-10)
        assert energy(ridge_center - u) == pytest.approx(base, rel=1e-8)


class TestPlateau:
    def test_flat_profile_flagged(self, eps2):
        sphere = SphereSpec(0.1e-6, gold())
        grating = GratingSpec(1e-6, 0.0, 0.5, eps2)
        res = plateau_observables(sphere, grating, 0.15e-6, TH, 1e-3,
                                  n_x=32, trunc=CHEAP_TRUNC)
        assert res.flat
        assert math.isnan(res.delta_x)

    def test_oscillation_structure(self, eps2):
        sphere = SphereSpec(0.08e-6, gold())
        grating = GratingSpec(1.2e-6, 0.35e-6, 0.5, eps2)
        trunc = TruncationSpec(ell_max=4, n_orders=6, n_kx=8, n_ky=16,
                               ky_cutoff=16.0)
        res = plateau_observables(sphere, grating, 0.1e-6, TH, 1e-3,
                                  n_x=32, trunc=trunc)
        assert not res.flat
        assert res.delta_f > 0.0        # groove is shallower binding
        assert 0.0 < res.delta_x < grating.period
        assert res.monotone
