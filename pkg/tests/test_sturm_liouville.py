import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from normlab.inequality_catalog import InequalityCase, hl_extremal, verify
from normlab.errors import AngleToleranceTooSmall, CoefficientEvaluationFailure, DiskTooLarge
from normlab.function_space import Grid, GridFunction, Weight, lp_norm
from normlab.sturm_liouville import (
    SLCoefficients,
    SLState,
    arg_cut_positive,
    dirichlet_form,
    extremal_Y,
    fundamental_trajectory,
    integrate,
    m_function,
    m_function_batch,
    m_trace,
    power_cut_positive,
    power_weight_m,
    power_weight_theta0,
    sqrt_cut_positive,
    tau_apply,
    theta0_search,
)

CLASSICAL = SLCoefficients.classical()


@pytest.fixture(scope="module")
def classical_theta0():
    return theta0_search(CLASSICAL)


class TestBranch:
    def test_arg_range(self):
        z = np.array([1.0, 1j, -1.0, -1j, 1 - 1e-300j])
        a = arg_cut_positive(z)
        assert np.all((a >= 0) & (a < 2 * math.pi))
        assert a[0] == 0.0 and a[2] == pytest.approx(math.pi)

    def test_upper_half_plane_matches_principal(self):
        z = np.array([1j, 2 + 3j, -4 + 0.1j])
        assert np.allclose(sqrt_cut_positive(z), np.sqrt(z), rtol=1e-15)
        assert np.allclose(power_cut_positive(z, 0.3), z ** 0.3, rtol=1e-14)

    def test_lower_half_plane_flips_sign(self):
        z = np.array([-1j, 2 - 3j])
        assert np.allclose(sqrt_cut_positive(z), -np.sqrt(z), rtol=1e-15)


class TestIntegrate:
    def test_harmonic(self):
        tr = integrate(CLASSICAL, 1.0, SLState(0.0, 0.0, 1.0), math.pi / 2, tol=1e-12)
        assert abs(tr.end.u - 1.0) < 1e-10 and abs(tr.end.qd) < 1e-10

    def test_constant_solution(self):
        tr = integrate(CLASSICAL, 0.0, SLState(0.0, 1.0, 0.0), 7.0, x_eval=[1.0, 3.0, 7.0])
        assert np.all(tr.u == 1.0) and np.all(tr.qd == 0.0)
        assert len(tr.states()) == 3

    def test_bessel_power_law(self):
        coef = SLCoefficients.bessel(1.0, 0.0, 0.5)
        s_plus = 1.25  # (1 - beta + (2 + alpha - beta) gamma) / 2
        tr = integrate(coef, 0.0, SLState(1.0, 1.0, s_plus), 10.0, tol=1e-12,
                       x_eval=[2.0, 5.0, 10.0])
        assert np.allclose(tr.u, np.array([2.0, 5.0, 10.0]) ** s_plus, rtol=1e-8, atol=0)

    def test_backwards(self):
        tr = integrate(CLASSICAL, 4.0, SLState(math.pi, 0.0, -2.0), 0.0, tol=1e-12)
        # u = sin(2x) with u'(pi) = 2 cos(2 pi) = 2; started with -2, so u = -sin(2x)
        assert abs(tr.end.u) < 1e-9 and abs(tr.end.qd + 2.0) < 1e-9

    def test_wronskian_conserved(self):
        coef = SLCoefficients.power(1.0, -0.5)
        nodes = np.linspace(0.1, 6.0, 50)
        th, th1, ph, ph1 = fundamental_trajectory(coef, 0.3 + 0.5j, nodes, tol=1e-12)
        w = th * ph1 - th1 * ph
        assert np.max(np.abs(w - 1.0)) < 1e-8
        # further out the solutions grow, so only the relative defect is meaningful
        far = np.linspace(6.0, 40.0, 30)
        th, th1, ph, ph1 = fundamental_trajectory(coef, 0.3 + 2j, far, tol=1e-12)
        scale = np.abs(th * ph1) + np.abs(th1 * ph)
        assert np.max(np.abs(th * ph1 - th1 * ph - 1.0) / scale) < 1e-8

    def test_coefficient_failure(self):
        bad = SLCoefficients(lambda x: np.where(x > 0.5, np.nan, 1.0), Weight.power(0.0, 0.0), Weight.unit())
        with pytest.raises(CoefficientEvaluationFailure):
            integrate(bad, 1j, SLState(0.0, 1.0, 0.0), 1.0)

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            integrate(CLASSICAL, 1j, SLState(0.0, 1.0, 0.0), 1.0, tol=0.0)


class TestMFunction:
    @pytest.mark.parametrize("z", [1j, 2j, 1 + 1j])
    def test_classical(self, z):
        m, rad = m_function(CLASSICAL, z)
        exact = 1j * z ** -0.5
        assert abs(m - exact) <= 1e-6 * abs(exact)
        assert rad <= 1e-6 * abs(exact)

    def test_classical_dirichlet(self):
        m, rad = m_function(CLASSICAL, 1j, bc="dirichlet_type")
        assert abs(m - 1j * np.sqrt(1j)) <= 1e-6

    def test_power_weight_closed_form(self):
        for alpha, beta in [(1.0, 0.0), (0.0, 0.5), (2.0, -1.0)]:
            m, _ = m_function(SLCoefficients.power(alpha, beta), 1j)
            ref = complex(power_weight_m(alpha, beta, 1j))
            assert abs(m - ref) <= 1e-4 * abs(ref)

    def test_power_weight_reduces_to_classical(self):
        z = np.array([1j, -2 + 0.5j, 3 - 1j])
        assert np.allclose(power_weight_m(0.0, 0.0, z), 1j * power_cut_positive(z, -0.5), rtol=1e-14)

    def test_real_z_rejected(self):
        with pytest.raises(ValueError):
            m_function(CLASSICAL, 2.0)

    def test_disk_too_large(self):
        with pytest.raises(DiskTooLarge):
            m_function(CLASSICAL, 1j, X=2.0)

    @given(st.floats(-3, 3), st.floats(0.05, 3), st.booleans())
    @settings(max_examples=15)
    def test_herglotz_and_conjugation(self, re, im, lower):
        coef = SLCoefficients.power(0.5, -0.5)
        z = complex(re, -im if lower else im)
        res = m_function_batch(coef, [z, z.conjugate()], 1e4, disk_rtol=1e-8)
        m, mc = res.m
        assert m.imag * z.imag > 0
        assert abs(mc - m.conjugate()) <= res.radius.sum() + 1e-9 * abs(m)

    def test_disk_monotone(self):
        Xs = [5.0, 10.0, 20.0, 40.0]
        radii = [float(m_function_batch(CLASSICAL, [0.5j], X, disk_rtol=0.0, strict=False).radius[0]) for X in Xs]
        assert all(b <= a for a, b in zip(radii, radii[1:]))

    def test_trace_csv(self, tmp_path):
        tr = m_trace(CLASSICAL, math.pi / 4, np.logspace(-1, 1, 3))
        path = tmp_path / "trace.csv"
        tr.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "theta,rho,z_re,z_im,m_re,m_im,disk_radius"
        assert len(lines) == 4
        assert np.allclose(tr.m, 1j * tr.z ** -0.5, rtol=1e-6)


class TestTheta0:
    def test_classical(self, classical_theta0):
        r = classical_theta0
        assert abs(r.theta_plus - math.pi / 3) <= 0.01
        assert r.theta_minus <= 0.01
        assert abs(r.theta0 - math.pi / 3) <= 0.01
        assert abs(r.K - 2.0) <= 0.05 and r.K > 1
        assert r.E_plus and not r.E_minus

    def test_json(self, classical_theta0):
        d = json.loads(classical_theta0.to_json())
        assert {"theta_plus", "theta_minus", "theta0", "K", "E_candidates"} <= set(d)

    def test_power_weight(self):
        r = theta0_search(SLCoefficients.power(1.0, 0.0))
        assert abs(r.theta0 - 2 * math.pi / 5) <= 0.01
        assert abs(r.K - 1 / math.cos(2 * math.pi / 5)) <= 0.1

    def test_formula(self):
        assert power_weight_theta0(0.0, 0.0) == pytest.approx(math.pi / 3)
        assert power_weight_theta0(1.0, -1.0) == pytest.approx(math.pi / 3)

    def test_angle_tol(self):
        with pytest.raises(AngleToleranceTooSmall):
            theta0_search(CLASSICAL, angle_tol=1e-7)

    def test_rho_grid_span(self):
        with pytest.raises(ValueError):
            theta0_search(CLASSICAL, rho_grid=np.logspace(0, 2, 5))


class TestForms:
    def test_dirichlet_form_extremal(self):
        g = Grid.uniform(0.0, 60.0, 30001)
        f = hl_extremal(1.0, 1.0, g)
        qf = dirichlet_form(f, CLASSICAL)
        ratio = abs(qf) / (lp_norm(f, 2) * lp_norm(GridFunction(g, f.derivs[1]), 2))
        assert abs(ratio - 2.0) < 1e-8
        assert abs(qf.imag) == 0.0

    def test_dirichlet_form_constant(self):
        g = Grid.uniform(0.0, 1.0, 101)
        f = GridFunction(g, np.ones(101), (np.zeros(101),))
        assert dirichlet_form(f, CLASSICAL) == 0

    def test_tau_apply_power(self):
        coef = SLCoefficients.power(1.0, 0.5)
        g = Grid.uniform(0.5, 3.0, 2001)
        f = GridFunction.from_callables(g, lambda x: x ** 2, lambda x: 2 * x, lambda x: 2 + 0 * x)
        # -(x^0.5 * 2x)' / x = -3 x^0.5 / x
        assert np.allclose(tau_apply(f, coef), -3 * g.nodes ** -0.5, rtol=1e-13)


class TestExtremalY:
    def test_classical_shape_and_ratio(self, classical_theta0):
        rho = 1.0
        g = Grid.uniform(0.0, 60.0, 30001)
        Y = extremal_Y(CLASSICAL, rho, "plus", classical_theta0.theta0, g)
        x = g.nodes
        shape = np.exp(-rho * x / 2) * np.sin(math.sqrt(3) * rho * x / 2 - math.pi / 3)
        c = np.vdot(shape, Y.values) / np.vdot(shape, shape)
        assert np.linalg.norm(Y.values - c * shape) <= 1e-3 * np.linalg.norm(Y.values)
        rep = verify(Y, InequalityCase.parse("half_line:2:2:1"))
        assert abs(rep.ratio - classical_theta0.K) <= 0.02 * classical_theta0.K
