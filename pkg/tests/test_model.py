import math

import numpy as np
import pytest

from dickemf import (
    DegenerateDenominator,
    DomainError,
    DriveParams,
    GroundState,
    ModelParams,
    ZeemanSet,
    bessel_j0,
    eval_F,
    eval_F_derivs,
    eval_e_driven,
    eval_e_gradient,
    eval_nu_stationary,
    nu_stationary_derivs,
    x_from_xi,
    xi_from_x,
)

K3 = ZeemanSet.k3()
K0 = ZeemanSet((0.0,))


def j0_series(x, terms=30):
    """Independent power-series oracle for J0."""
    total = 0.0
    for m in range(terms):
        total += (-1) ** m * (x / 2.0) ** (2 * m) / math.factorial(m) ** 2
    return total


class TestZeemanSet:
    def test_presets(self):
        assert ZeemanSet.k2().values == (-1.0, 1.0)
        assert ZeemanSet.k3().values == (-1.0, 0.0, 1.0)
        assert ZeemanSet.k4().values == (-1.5, -0.5, 2.0, 3.0)
        assert ZeemanSet.k5().values == (-2.0, -1.0, 0.0, 1.0, 2.0)
        assert ZeemanSet.k_epsilon(0.7).values == (-0.7, 0.0, 0.7)

    def test_symmetry_detection(self):
        assert ZeemanSet.k2().is_symmetric()
        assert ZeemanSet.k3().is_symmetric()
        assert ZeemanSet.k5().is_symmetric()
        assert not ZeemanSet.k4().is_symmetric()

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            ZeemanSet(())

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            ZeemanSet((1.0, float("nan")))


class TestModelParams:
    def test_g_nu_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            nu = float(rng.uniform(0.01, 20.0))
            p = ModelParams(1.0, nu, K3)
            p2 = ModelParams.from_g(1.0, p.g, K3)
            assert p2.nu == pytest.approx(nu, rel=1e-15, abs=0.0)

    def test_validation(self):
        with pytest.raises(DomainError):
            ModelParams(-1.0, 1.0, K3)
        with pytest.raises(DomainError):
            ModelParams(1.0, 0.0, K3)


class TestEvalF:
    def test_xi0_k3(self):
        p = ModelParams(1.0, 1.0, K3)
        assert eval_F(0.0, p) == pytest.approx(-(1.0 + 2.0 * math.sqrt(2.0)), abs=1e-14)

    def test_xi0_single(self):
        p = ModelParams(1.0, 1.0, K0)
        assert eval_F(0.0, p) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_value_k3(self):
        # 0.5 - (1 + sqrt2 + sqrt5), evaluated by hand
        p = ModelParams(1.0, 2.0, K3)
        expect = 0.5 - (1.0 + math.sqrt(2.0) + math.sqrt(5.0))
        assert eval_F(1.0, p) == pytest.approx(expect, abs=1e-14)

    def test_mirror_symmetry_exact(self):
        for zee in (ZeemanSet.k2(), K3, ZeemanSet.k5(), ZeemanSet.k_epsilon(0.3)):
            p = ModelParams(0.8, 1.7, zee)
            for xi in (0.1, 0.5, 1.25, 3.75):
                assert eval_F(-xi, p) == eval_F(xi, p)


class TestDerivs:
    def test_symmetric_point(self):
        p = ModelParams(1.0, 1.0, K0)
        d1, d2 = eval_F_derivs(0.0, p)
        assert d1 == 0.0
        assert d2 == pytest.approx(1.0, abs=1e-15)

    def test_critical_coupling_vanishing_curvature(self):
        # d2F(0) = 0 exactly at nu = 2 delta for a single uncoupled cavity
        for delta in (0.5, 1.0, 2.0):
            p = ModelParams(delta, 2.0 * delta, ZeemanSet((0.0,)))
            assert eval_F_derivs(0.0, p)[1] == pytest.approx(0.0, abs=1e-14)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(300):
            zee = [K0, ZeemanSet.k2(), K3, ZeemanSet.k4(), ZeemanSet.k5()][int(rng.integers(5))]
            p = ModelParams(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.2, 5.0)), zee)
            xi = float(rng.uniform(-4, 4))
            d1, _ = eval_F_derivs(xi, p)
            fd = (eval_F(xi + h, p) - eval_F(xi - h, p)) / (2 * h)
            assert d1 == pytest.approx(fd, rel=1e-6, abs=1e-9)


class TestNuStationary:
    def test_hand_value_k3(self):
        expect = 2.0 / (1.0 / math.sqrt(2.0) + 2.0 / math.sqrt(5.0))
        assert eval_nu_stationary(1.0, 1.0, K3) == pytest.approx(expect, rel=1e-14)

    def test_small_xi_limit_single(self):
        # series limit nu(delta, xi -> 0) = 2 delta for K = {0}
        assert eval_nu_stationary(1.0, 1e-8, K0) == pytest.approx(2.0, rel=1e-6)

    def test_degenerate_denominator(self):
        with pytest.raises(DegenerateDenominator):
            eval_nu_stationary(1.0, 0.0, K3)

    def test_stationarity_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            delta = float(rng.uniform(0.3, 3.0))
            xi = float(rng.uniform(0.05, 3.0))
            nu = eval_nu_stationary(delta, xi, K3)
            if nu <= 0:
                continue
            p = ModelParams(delta, nu, K3)
            assert abs(eval_F_derivs(xi, p)[0]) < 1e-10

    def test_analytic_derivs_vs_five_point_stencil(self):
        rng = np.random.default_rng(5)
        h = 1e-4
        for _ in range(100):
            delta = float(rng.uniform(0.3, 3.0))
            xi = float(rng.uniform(0.2, 2.5))
            nu, nx, nxx = nu_stationary_derivs(delta, xi, K3)
            vals = [eval_nu_stationary(delta, xi + k * h, K3) for k in (-2, -1, 0, 1, 2)]
            fd1 = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * h)
            fd2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)
            assert nu == pytest.approx(vals[2], rel=1e-14)
            assert nx == pytest.approx(fd1, rel=1e-6, abs=1e-8)
            assert nxx == pytest.approx(fd2, rel=1e-6, abs=1e-6)


class TestBesselJ0:
    def test_at_zero(self):
        assert bessel_j0(0.0) == 1.0

    def test_series_value(self):
        assert bessel_j0(1.0) == pytest.approx(0.7651976865579666, abs=1e-12)
        assert bessel_j0(1.0) == pytest.approx(j0_series(1.0), abs=1e-12)

    def test_first_zero(self):
        assert abs(bessel_j0(2.4048255577)) < 1e-9

    def test_even_symmetry_exact(self):
        for x in np.linspace(0.0, 50.0, 173):
            assert bessel_j0(-x) == bessel_j0(x)

    def test_series_equivalence(self):
        for x in np.linspace(-8.0, 8.0, 257):
            assert abs(bessel_j0(float(x)) - j0_series(float(x))) < 1e-10


class TestDrivenEnergy:
    def test_origin_value(self):
        for zee in (K3, ZeemanSet.k2()):
            p = ModelParams(1.3, 0.9, zee)
            e = eval_e_driven(0.0, np.zeros(zee.m), p, DriveParams(0.7))
            assert e == pytest.approx(-1.3 / 2.0, abs=1e-15)

    def test_pinned_hand_value(self):
        # X=1, Y=(1,1,1), M=3, g=1 (nu=2/3), delta=1, K3, no drive:
        # S=3, e = 1/6 - (1/6) sqrt(2/3) * 3 = 1/6 - sqrt(2/3)/2
        p = ModelParams(1.0, 2.0 / 3.0, K3)
        e = eval_e_driven(1.0, np.ones(3), p, DriveParams(0.0))
        expect = 1.0 / 6.0 - math.sqrt(2.0 / 3.0) / 2.0
        assert e == pytest.approx(expect, abs=1e-15)
        assert e == pytest.approx(-0.2415816237971963, abs=1e-13)

    def test_zero_drive_matches_F_after_y_relaxation(self):
        # e(X, Y*(X)) = F(xi)/2M at r = 0 with xi = 2gX/sqrt(2M)
        rng = np.random.default_rng(2)
        d0 = DriveParams(0.0)
        for _ in range(100):
            p = ModelParams(float(rng.uniform(0.3, 2.5)), float(rng.uniform(0.3, 4.0)), K3)
            xi = float(rng.uniform(-3, 3))
            st = GroundState.from_xi_undriven(xi, p)
            e = eval_e_driven(x_from_xi(xi, p), np.asarray(st.y), p, d0)
            assert e == pytest.approx(eval_F(xi, p) / (2.0 * p.m), rel=1e-12, abs=1e-12)

    def test_domain_error(self):
        p = ModelParams(1.0, 1.0, K3)
        with pytest.raises(DomainError):
            eval_e_driven(0.0, np.array([0.0, 0.0, 1.5]), p, DriveParams(0.1))


class TestDrivenGradient:
    def test_origin_gradient(self):
        p = ModelParams(1.1, 0.8, K3)
        g = eval_e_gradient(0.0, np.zeros(3), p, DriveParams(0.5))
        assert g[0] == pytest.approx(0.0, abs=1e-15)
        expect_y = -np.asarray(K3.values) * math.sqrt(2.0) / (2.0 * 3)
        assert np.allclose(g[1:], expect_y, atol=1e-15)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(13)
        h = 1e-6
        checked = 0
        while checked < 1000:
            zee = [K3, ZeemanSet.k2(), K0][int(rng.integers(3))]
            p = ModelParams(float(rng.uniform(0.3, 3.0)), float(rng.uniform(0.3, 4.0)), zee)
            d = DriveParams(float(rng.uniform(0.0, 0.6)))
            x = float(rng.uniform(-2, 2))
            y = rng.uniform(-1.3, 1.3, zee.m)
            g = eval_e_gradient(x, y, p, d)
            v = np.concatenate([[x], y])
            for i in range(len(v)):
                dv = np.zeros(len(v))
                dv[i] = h
                vp, vm = v + dv, v - dv
                fd = (eval_e_driven(vp[0], vp[1:], p, d)
                      - eval_e_driven(vm[0], vm[1:], p, d)) / (2 * h)
                assert g[i] == pytest.approx(fd, rel=1e-6, abs=5e-10)
            checked += 1

    def test_zero_drive_x_gradient_matches_undriven(self):
        # at the Y-relaxed point, de/dX = dF/dxi * dxi/dX / 2M
        p = ModelParams(0.9, 1.4, K3)
        d0 = DriveParams(0.0)
        for xi in (0.3, 1.1, 2.2):
            st = GroundState.from_xi_undriven(xi, p)
            g = eval_e_gradient(x_from_xi(xi, p), np.asarray(st.y), p, d0)
            dxi_dx = 2.0 * p.g / math.sqrt(2.0 * p.m)
            expect = eval_F_derivs(xi, p)[0] * dxi_dx / (2.0 * p.m)
            assert g[0] == pytest.approx(expect, rel=1e-9, abs=1e-12)

    def test_domain_error_near_edge(self):
        p = ModelParams(1.0, 1.0, K3)
        with pytest.raises(DomainError):
            eval_e_gradient(0.0, np.array([0.0, 0.0, math.sqrt(2.0)]), p, DriveParams(0.0))


class TestGroundStateInvariants:
    def test_spin_normalization(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            p = ModelParams(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.2, 5.0)), K3)
            xi = float(rng.uniform(-3, 3))
            st = GroundState.from_xi_undriven(xi, p)
            for sx, sz in zip(st.spin_x, st.spin_z):
                assert abs(sx * sx + sz * sz - 1.0) < 1e-12
                assert abs(sx) <= 1.0 and abs(sz) <= 1.0

    def test_xi_x_maps_inverse(self):
        p = ModelParams(1.0, 1.7, K3)
        for xi in (-2.0, -0.3, 0.0, 0.4, 3.1):
            assert xi_from_x(x_from_xi(xi, p), p) == pytest.approx(xi, rel=1e-15, abs=1e-15)
