import math

import numpy as np
import pytest
from scipy.constants import c as C_LIGHT

from casgrat.basis import (OUT, POL_E, POL_M, REG, TE, TM, PlaneWaveMode,
                           SphericalMode, kernel_block_factors, kernel_out,
                           kernel_reg, spherical_mode_table,
                           translation_factor)

XI = 2.4678e14
D = 1e-6


def make_pw(kxn, ky, p, phi, n=0):
    """Plane-wave mode with the full parallel x-wavevector placed on k_x."""
    return PlaneWaveMode(kxn - 2.0 * math.pi * n / D, ky, n, p, phi, D)


def hyper(kxn, ky, phi):
    xi_t = XI / C_LIGHT
    k = math.hypot(kxn, ky)
    kappa = math.sqrt(xi_t ** 2 + k * k)
    return k, kappa, phi * kappa / xi_t, k / xi_t


class TestModeTable:
    def test_dimension(self):
        for ell in (1, 3, 8):
            table = spherical_mode_table(ell)
            assert table.dim == 2 * ell * (ell + 2)

    def test_block_slices_cover_everything(self):
        table = spherical_mode_table(4)
        total = 0
        for m in range(-4, 5):
            blk = table.block_slice(m)
            assert np.all(table.ms[blk] == m)
            total += blk.stop - blk.start
        assert total == table.dim

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            SphericalMode(0, 0, POL_E)
        with pytest.raises(ValueError):
            SphericalMode(2, 3, POL_E)
        with pytest.raises(ValueError):
            SphericalMode(2, 1, POL_E, "weird")


class TestClosedForms:
    def test_reg_te_e_vanishes_at_m0(self):
        pw = make_pw(1.3e6, 0.8e6, TE, +1)
        val = kernel_reg(SphericalMode(1, 0, POL_E, REG), pw, XI)
        assert val == 0.0

    def test_reg_l1_m0_tm(self):
        # <1,0,E,reg|k,TM,phi> = sqrt(6 pi) i sin(theta) with
        # sin(theta) = -i sigma, i.e. the value is sqrt(6 pi) sigma
        for phi in (+1, -1):
            pw = make_pw(1.3e6, 0.8e6, TM, phi)
            _, _, _, sigma = hyper(1.3e6, 0.8e6, phi)
            val = kernel_reg(SphericalMode(1, 0, POL_E, REG), pw, XI)
            assert val == pytest.approx(math.sqrt(6.0 * math.pi) * sigma,
                                        rel=1e-13)

    def test_out_l1_m0(self):
        # <k,TE,phi|1,0,E,out> = 0 and
        # <k,TM,phi|1,0,E,out> = sqrt(3 pi/2) i^{-1} sin(theta)/(K k_z)
        #                      = sqrt(3 pi/2) sigma / (xi_t kappa)
        kxn, ky = 1.3e6, 0.8e6
        xi_t = XI / C_LIGHT
        for phi in (+1, -1):
            te = kernel_out(make_pw(kxn, ky, TE, phi),
                            SphericalMode(1, 0, POL_E, OUT), XI)
            assert te == 0.0
            tm = kernel_out(make_pw(kxn, ky, TM, phi),
                            SphericalMode(1, 0, POL_E, OUT), XI)
            _, kappa, _, sigma = hyper(kxn, ky, phi)
            want = -math.sqrt(1.5 * math.pi) * (-sigma) / (xi_t * kappa)
            assert tm == pytest.approx(want, rel=1e-13)

    def test_out_l1_m_pm1(self):
        # <k,TE,phi|1,±1,E,out> = sqrt(3 pi) e^{±i phi_k} / (2 K k_z)
        kxn, ky = 1.1e6, -0.6e6
        xi_t = XI / C_LIGHT
        phi_k = math.atan2(ky, kxn)
        _, kappa, _, _ = hyper(kxn, ky, +1)
        for m in (+1, -1):
            val = kernel_out(make_pw(kxn, ky, TE, +1),
                             SphericalMode(1, m, POL_E, OUT), XI)
            # K k_z = -xi_t kappa
            want = math.sqrt(3.0 * math.pi) \
                * np.exp(1j * m * phi_k) / (2.0 * (-xi_t * kappa))
            assert val == pytest.approx(want, rel=1e-13)


class TestDualities:
    @pytest.mark.parametrize("ell,m", [(1, 0), (2, 1), (5, -3), (7, 7)])
    def test_reg_duality(self, ell, m):
        # <l,m,E|k,TE> = -i <l,m,M|k,TM> and <l,m,E|k,TM> = +i <l,m,M|k,TE>
        pw_te = make_pw(0.9e6, 1.4e6, TE, +1)
        pw_tm = make_pw(0.9e6, 1.4e6, TM, +1)
        e_te = kernel_reg(SphericalMode(ell, m, POL_E, REG), pw_te, XI)
        m_tm = kernel_reg(SphericalMode(ell, m, POL_M, REG), pw_tm, XI)
        assert e_te == pytest.approx(-1j * m_tm, rel=1e-13, abs=1e-300)
        e_tm = kernel_reg(SphericalMode(ell, m, POL_E, REG), pw_tm, XI)
        m_te = kernel_reg(SphericalMode(ell, m, POL_M, REG), pw_te, XI)
        assert e_tm == pytest.approx(1j * m_te, rel=1e-13, abs=1e-300)

    @pytest.mark.parametrize("ell,m", [(1, 1), (3, -2), (6, 0)])
    def test_out_duality(self, ell, m):
        # <k,TE|l,m,E,out> = i <k,TM|l,m,M,out>
        pw_te = make_pw(-1.2e6, 0.5e6, TE, -1)
        pw_tm = make_pw(-1.2e6, 0.5e6, TM, -1)
        te_e = kernel_out(pw_te, SphericalMode(ell, m, POL_E, OUT), XI)
        tm_m = kernel_out(pw_tm, SphericalMode(ell, m, POL_M, OUT), XI)
        assert te_e == pytest.approx(1j * tm_m, rel=1e-13, abs=1e-300)

    @pytest.mark.parametrize("ell,m,p,pol", [(2, 1, TE, POL_E), (4, -2, TM, POL_M),
                                             (3, 3, TE, POL_M)])
    def test_switch_property(self, ell, m, p, pol):
        # switching both polarizations multiplies the regular kernel by
        # i (-1)^p (p counted 1, 2), and the outgoing one by -i (-1)^p
        pw = make_pw(1.45e6, -0.35e6, p, +1)
        pw_sw = make_pw(1.45e6, -0.35e6, 1 - p, +1)
        reg = kernel_reg(SphericalMode(ell, m, pol, REG), pw, XI)
        reg_sw = kernel_reg(SphericalMode(ell, m, 1 - pol, REG), pw_sw, XI)
        sign = 1j * (-1.0) ** (p + 1)
        assert reg == pytest.approx(sign * reg_sw, rel=1e-13, abs=1e-300)
        out = kernel_out(pw, SphericalMode(ell, m, pol, OUT), XI)
        out_sw = kernel_out(pw_sw, SphericalMode(ell, m, 1 - pol, OUT), XI)
        assert out == pytest.approx(-sign * out_sw, rel=1e-13, abs=1e-300)

    def test_kind_is_enforced(self):
        pw = make_pw(1e6, 1e6, TE, +1)
        with pytest.raises(ValueError):
            kernel_reg(SphericalMode(1, 0, POL_E, OUT), pw, XI)
        with pytest.raises(ValueError):
            kernel_out(pw, SphericalMode(1, 0, POL_E, REG), XI)


class TestTranslation:
    def test_closed_values(self):
        length = 1e-6
        xi = C_LIGHT / length
        assert translation_factor(xi, 0.0, 1e-30, length) \
            == pytest.approx(math.exp(-1.0), rel=1e-12)
        # the xi -> 0 limit of kappa is |k|
        assert translation_factor(1e-3, 2.0 * math.pi / D, 0.0, D) \
            == pytest.approx(math.exp(-2.0 * math.pi), rel=1e-9)

    def test_monotone(self, rng):
        for _ in range(40):
            xi = 10.0 ** rng.uniform(12, 15)
            kx = rng.uniform(0, 3e6)
            ky = rng.uniform(0, 3e6)
            ell = rng.uniform(1e-7, 3e-6)
            base = translation_factor(xi, kx, ky, ell)
            assert translation_factor(xi * 1.1, kx, ky, ell) < base
            assert translation_factor(xi, kx * 1.1 + 1.0, ky, ell) < base
            assert translation_factor(xi, kx, ky * 1.1 + 1.0, ell) < base
            assert translation_factor(xi, kx, ky, ell * 1.1) < base

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            translation_factor(1e14, 1e6, 1e6, 0.0)


class TestBatchedBlocks:
    def test_matches_scalar_kernels(self, rng):
        ell_max = 3
        n_ord = 2
        modes = spherical_mode_table(ell_max)
        ky_nodes = np.array([-3.3e6, 0.9e6, 2.1e6])
        kx = 1.1e6
        kb = kernel_block_factors(XI, kx, ky_nodes, n_ord, D, modes)
        n_pw = 2 * n_ord + 1
        for _ in range(200):
            iky = int(rng.integers(0, len(ky_nodes)))
            row = int(rng.integers(0, modes.dim))
            p = int(rng.integers(0, 2))
            n = int(rng.integers(-n_ord, n_ord + 1))
            col = p * n_pw + (n + n_ord)
            sph_reg = SphericalMode(int(modes.ells[row]), int(modes.ms[row]),
                                    int(modes.pols[row]), REG)
            pw_up = PlaneWaveMode(kx, ky_nodes[iky], n, p, +1, D)
            want = kernel_reg(sph_reg, pw_up, XI)
            got = kb.a_phase[iky, row, col] * kb.a_mant[iky, row, col] \
                * 2.0 ** float(kb.a_exp[iky, row, col])
            assert got == pytest.approx(want, rel=1e-12, abs=1e-300)
            sph_out = SphericalMode(int(modes.ells[row]), int(modes.ms[row]),
                                    int(modes.pols[row]), OUT)
            pw_dn = PlaneWaveMode(kx, ky_nodes[iky], n, p, -1, D)
            want_b = kernel_out(pw_dn, sph_out, XI)
            got_b = kb.b_phase[iky, col, row] * kb.b_mant[iky, col, row] \
                * 2.0 ** float(kb.b_exp[iky, col, row])
            assert got_b == pytest.approx(want_b, rel=1e-12, abs=1e-300)

    def test_rejects_grazing_lattice(self):
        modes = spherical_mode_table(2)
        with pytest.raises(ValueError):
            kernel_block_factors(XI, 0.0, np.array([0.0]), 1, D, modes)
