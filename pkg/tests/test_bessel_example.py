import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from normlab.bessel_example import (
    BesselParams,
    boundary_values,
    default_grid,
    dirichlet_lhs,
    divergence_demo,
    divergence_exponent,
    extension_family,
    extension_system,
    fitted_slopes,
    friedrichs_family,
    friedrichs_member,
    hardy_log_bump,
    m_closed_form,
    m_delta,
    m_numeric,
    normalized_system,
    normalized_system_bessel,
    principal_solutions,
    psi_weyl,
    quasi_product,
    solution_with_cutoff,
    solutions_y,
    verify_friedrichs_form,
    weighted_hardy_check,
    wronskian,
)
from normlab.inequality_catalog import cutoff
from normlab.errors import (
    HypothesisViolated,
    InvalidParameters,
    NotInFriedrichsDomain,
    OnBranchCut,
    ProvisoViolated,
)
from normlab.function_space import Grid, GridFunction, GridKind, integrate
from normlab.report import Verdict
from normlab.sturm_liouville import SLCoefficients, dirichlet_form

# (alpha, beta, gamma, z, x) -> (phi, theta), frozen from mpmath 0F1 series at 30 digits
SYSTEM_ORACLE = {
    (1.0, 0.0, 0.5, 1 + 1j, 0.7): (0.6240167970657199 - 0.016020856947761203j,
                                   0.6732964784280786 - 0.05414975193040058j),
    (0.0, -0.5, 0.3, -2 + 0.5j, 1.3): (1.3766796682917177 - 0.13739040720017082j,
                                       4.503674823049502 - 0.6830243795982066j),
    (-0.5, 0.5, 0.6, 3j, 0.05): (0.38396139968702775 - 0.036079519993480816j,
                                 0.9485468928468463 - 0.36259063556073556j),
    (1.0, 0.0, 0.0, 1 + 1j, 0.3): (0.5460793906539264 - 0.0016407037425905243j,
                                   0.656369291238926 - 0.003068344053694297j),
}

LATTICE = [(a, b, g) for a in (-0.5, 0.0, 1.0) for b in (-0.5, 0.0, 0.5) for g in (0.0, 0.3, 0.6)]
# theta carries a 1/gamma normalization, so gamma is either exactly 0 (log branch) or bounded away from it
gammas = st.one_of(st.just(0.0), st.floats(0.02, 0.95))
params_st = st.builds(BesselParams, st.floats(-0.9, 3.0), st.floats(-2.0, 0.9), gammas)
nonreal_z = st.builds(complex, st.floats(-5, 5), st.floats(0.1, 5)).map(
    lambda z: z if int(abs(z.real * 1e3)) % 2 else z.conjugate())


def fd_residual(params, z, x, u):
    """||tau u - z u|| / ||u|| with tau applied by centered differences of p u'."""
    a, b = params.alpha, params.beta
    h = x[1] - x[0]
    du = np.gradient(u, h, edge_order=2)
    flux = np.gradient(x ** b * du, h, edge_order=2)
    res = (-flux + params.q_const * x ** (b - 2) * u) / x ** a - z * u
    return np.linalg.norm(res[3:-3]) / np.linalg.norm(u[3:-3])


class TestParams:
    @pytest.mark.parametrize("args", [(-1.0, 0, 0.5), (0, 1.0, 0.5), (0, 0, 1.0), (0, 0, -0.1), (0, 0, 0.5, math.pi)])
    def test_invalid(self, args):
        with pytest.raises(InvalidParameters):
            BesselParams(*args)

    def test_derived(self):
        p = BesselParams(1.0, 0.0, 0.5)
        assert (p.c, p.s_plus, p.s_minus) == (3.0, 1.25, -0.25)
        assert p.q_const == pytest.approx((9 * 0.25 - 1) / 4)
        assert p.coefficients().name == "bessel:1:0:0.5"


class TestSolutions:
    def test_half_integer_identity(self):
        x = np.linspace(0.1, 5, 30)
        y1, _ = solutions_y(BesselParams(0, 0, 0.5), 1.0, x)
        assert np.allclose(y1, math.sqrt(2 / math.pi) * np.sin(x), rtol=1e-13, atol=1e-15)

    def test_ode_residual_y1(self):
        p = BesselParams(1.0, 0.0, 0.5)
        x = np.linspace(0.5, 2.0, 15001)
        y1, y2 = solutions_y(p, 1.0, x)
        assert fd_residual(p, 1.0, x, y1) <= 1e-6
        assert fd_residual(p, 1.0, x, y2) <= 1e-6

    def test_wronskian_constant(self):
        p = BesselParams(1.0, 0.0, 0.5)
        xs = np.array([0.5, 1.0, 2.0])
        from normlab.bessel_example import _solutions_y_quasi
        y1, y2 = solutions_y(p, 1 + 1j, xs)
        q1, q2 = _solutions_y_quasi(p, 1 + 1j, xs)
        w = wronskian(y2, q2, y1, q1)
        assert np.ptp(np.abs(w)) <= 1e-8 and np.ptp(w.real) <= 1e-8

    @pytest.mark.parametrize("key", list(SYSTEM_ORACLE))
    def test_normalized_system_oracle(self, key):
        a, b, g, z, x = key
        phi, theta = normalized_system(BesselParams(a, b, g), z, [x])
        ref_phi, ref_theta = SYSTEM_ORACLE[key]
        assert abs(phi[0] - ref_phi) <= 1e-13 * abs(ref_phi)
        assert abs(theta[0] - ref_theta) <= 1e-13 * abs(ref_theta)

    @given(params_st, nonreal_z)
    @settings(max_examples=25)
    def test_system_wronskian(self, params, z):
        x = np.geomspace(1e-4, 2.0, 9)
        phi, phi1, th, th1 = normalized_system(params, z, x, quasi=True)
        assert np.max(np.abs(wronskian(th, th1, phi, phi1) - 1.0)) <= 1e-8

    @given(params_st, nonreal_z)
    @settings(max_examples=25)
    def test_series_matches_bessel_route(self, params, z):
        x = np.geomspace(1e-3, 2.0, 7)
        a = normalized_system(params, z, x, quasi=True)
        b = normalized_system_bessel(params, z, x, quasi=True)
        for u, v in zip(a, b):
            assert np.max(np.abs(u - v) / np.maximum(np.abs(u), 1e-300)) <= 1e-8

    @pytest.mark.parametrize("abg", LATTICE[::4])
    def test_ode_residuals(self, abg):
        p = BesselParams(*abg)
        x = np.linspace(0.4, 1.6, 4001)
        for z in (1j, -2 + 1j):
            phi, theta = normalized_system(p, z, x)
            assert fd_residual(p, z, x, phi) <= 1e-5
            assert fd_residual(p, z, x, theta) <= 1e-5

    def test_small_z_limit(self):
        p = BesselParams(1.0, 0.0, 0.5)
        x = np.array([0.1, 0.5, 1.5])
        phi, _ = normalized_system(p, 1e-8, x)
        u0, _ = principal_solutions(p, "zero", x)
        assert np.max(np.abs(phi - u0) / np.abs(u0)) <= 1e-6


class TestPrincipal:
    @given(params_st.filter(lambda p: p.gamma > 0), st.floats(1e-6, 0.9))
    def test_wronskian_minus_one(self, params, x):
        u, u1, uh, uh1 = principal_solutions(params, "zero", [x], quasi=True)
        assert wronskian(u, u1, uh, uh1)[0] == pytest.approx(-1.0, abs=1e-12)

    def test_exponent(self):
        p = BesselParams(1.0, 0.0, 0.5)
        x = np.array([1e-4, 1e-2])
        u, _ = principal_solutions(p, "zero", x)
        assert np.log(u[1] / u[0]) / np.log(100.0) == pytest.approx(1.25, rel=1e-13)

    def test_log_branch(self):
        p = BesselParams(0.0, 0.0, 0.0)
        x = np.geomspace(1e-12, 1e-2, 6)
        u, uh = principal_solutions(p, "zero", x)
        ratio = u / uh
        assert np.all(np.diff(ratio) > 0)
        assert np.allclose(ratio * np.log(1 / x), 1.0, rtol=1e-14)

    @pytest.mark.parametrize("at,sign", [("zero", 1.0), ("infinity", -1.0)])
    def test_quasi_product_orders(self, at, sign):
        p = BesselParams(1.0, -0.5, 0.4)
        x = np.array([1e-5, 1e-3]) if at == "zero" else np.array([1e3, 1e5])
        qp = quasi_product(p, at, x)
        slope = np.log(qp[1] / qp[0]) / np.log(x[1] / x[0])
        assert slope == pytest.approx(sign * p.c * p.gamma, rel=0.02)

    def test_bad_endpoint(self):
        with pytest.raises(ValueError):
            principal_solutions(BesselParams(0, 0, 0.5), "middle", [1.0])


class TestBoundaryValues:
    grid = default_grid(1e-7, 3.0, 100)

    @pytest.mark.parametrize("abg", [(1.0, 0.0, 0.5), (0.0, -0.5, 0.3), (0.0, 0.0, 0.0)])
    def test_principal(self, abg):
        p = BesselParams(*abg)
        u0 = solution_with_cutoff(p, "u0", self.grid)
        uh = solution_with_cutoff(p, "u0_hat", self.grid)
        b0, bh = boundary_values(u0, p), boundary_values(uh, p)
        assert abs(b0.g_tilde) <= 1e-6 and abs(b0.g_tilde_prime - 1) <= 1e-6
        assert abs(bh.g_tilde - 1) <= 1e-6 and abs(bh.g_tilde_prime) <= max(1e-6, 2 * bh.err_tilde_prime)

    def test_normalized_system(self):
        p = BesselParams(1.0, 0.0, 0.5)
        for z in (1j, 2 - 1j):
            bp = boundary_values(solution_with_cutoff(p, "phi", self.grid, z=z), p)
            bt = boundary_values(solution_with_cutoff(p, "theta", self.grid, z=z), p)
            assert abs(bp.g_tilde) <= 1e-6 and abs(bp.g_tilde_prime - 1) <= 1e-6
            assert abs(bt.g_tilde - 1) <= 1e-6 and abs(bt.g_tilde_prime) <= 1e-4

    def test_grid_must_reach_small_x(self):
        p = BesselParams(1.0, 0.0, 0.5)
        g = Grid.log_refined(1e-3, 3.0, 50)
        with pytest.raises(ValueError):
            boundary_values(solution_with_cutoff(p, "u0", g), p)


class TestMFunction:
    def test_half_integer_closed_form(self):
        m = m_closed_form(BesselParams(0, 0, 0.5), 1j)
        assert m == pytest.approx(np.exp(3j * math.pi / 4), abs=1e-14)

    def test_branch_cut(self):
        with pytest.raises(OnBranchCut):
            m_closed_form(BesselParams(0, 0, 0.5), 2.0)
        # the negative axis is off the cut: m = i z^{1/2} = -sqrt(2) there
        assert m_closed_form(BesselParams(0, 0, 0.5), -2.0) == pytest.approx(-math.sqrt(2), abs=1e-14)

    def test_lattice_against_numeric(self):
        worst = 0.0
        for abg in LATTICE:
            p = BesselParams(*abg)
            mn = m_numeric(p, [1j]).m[0]
            mc = m_closed_form(p, 1j)
            worst = max(worst, abs(mn - mc) / abs(mc))
        assert worst <= 1e-4

    @given(params_st, nonreal_z)
    @settings(max_examples=30)
    def test_herglotz(self, params, z):
        assert m_closed_form(params, z).imag * z.imag > 0

    @given(params_st, nonreal_z)
    @settings(max_examples=25)
    def test_psi_decomposition(self, params, z):
        x = np.geomspace(1e-3, 2.0, 7)
        phi, theta = normalized_system(params, z, x)
        psi = psi_weyl(params, z, x)
        m = m_closed_form(params, z)
        scale = np.abs(theta) + np.abs(m * phi)
        assert np.max(np.abs(psi - (theta + m * phi)) / scale) <= 1e-8

    def test_psi_tail_converges(self):
        p = BesselParams(1.0, 0.0, 0.5)
        vals = []
        for x_max in (4.0, 8.0):
            g = Grid(np.linspace(1.0, x_max, 4001), GridKind.UNIFORM)
            vals.append(integrate(g, g.nodes ** p.alpha * np.abs(psi_weyl(p, 1j, g.nodes)) ** 2)[0])
        assert abs(vals[1] - vals[0]) < 0.01 * vals[1]

    def test_half_integer_psi_decays(self):
        x = np.linspace(1.0, 10.0, 200)
        psi = psi_weyl(BesselParams(0, 0, 0.5), 1j, x)
        assert np.all(np.diff(np.abs(psi)) < 0)
        rate = np.polyfit(x, np.log(np.abs(psi)), 1)[0]
        assert rate == pytest.approx(-1 / math.sqrt(2), rel=1e-8)


class TestFriedrichs:
    grid = default_grid(1e-7, 3.0, 100)
    params = BesselParams(1.0, 0.0, 0.5)

    def test_u0_member(self):
        f = solution_with_cutoff(self.params, "u0", self.grid, start=1.0, width=1.0)
        assert friedrichs_member(f, self.params)
        assert verify_friedrichs_form(f, self.params).verdict is Verdict.HOLDS

    def test_u0_hat_rejected(self):
        f = solution_with_cutoff(self.params, "u0_hat", self.grid)
        v = friedrichs_member(f, self.params)
        assert not v and "boundary_value" in v.failed
        with pytest.raises(NotInFriedrichsDomain):
            verify_friedrichs_form(f, self.params)

    def test_phi_member(self):
        assert friedrichs_member(solution_with_cutoff(self.params, "phi", self.grid, z=1 + 2j), self.params)

    def test_gamma_zero_only_boundary_test(self):
        p = BesselParams(0.0, 0.0, 0.0)
        v = friedrichs_member(solution_with_cutoff(p, "u0", self.grid), p)
        assert v and set(v.tests) == {"boundary_value"}
        with pytest.raises(InvalidParameters):
            verify_friedrichs_form(solution_with_cutoff(p, "u0", self.grid), p)

    def test_sweep_fifty(self):
        family = friedrichs_family(self.params, 50, seed=0, grid=self.grid)
        reports = [verify_friedrichs_form(f, self.params) for f in family]
        assert all(r.verdict is Verdict.HOLDS for r in reports)

    def test_u0_hat_family_rejected(self):
        family = friedrichs_family(self.params, 10, seed=1, grid=self.grid, with_u0_hat=True)
        assert not any(friedrichs_member(f, self.params) for f in family)

    def test_q_zero_case(self):
        p = BesselParams(1.0, 0.0, 1.0 / 3.0)  # c gamma = 1 - beta
        assert p.q_const == pytest.approx(0.0, abs=1e-15)
        for f in friedrichs_family(p, 5, seed=2, grid=self.grid):
            assert verify_friedrichs_form(f, p).holds

    def test_dirichlet_form_cross_module(self):
        f = friedrichs_family(self.params, 1, seed=3, grid=self.grid)[0]
        ours = dirichlet_lhs(f, self.params)
        theirs = dirichlet_form(f, self.params.coefficients())
        assert abs(theirs.real - ours) <= 1e-8 * abs(ours)


def _admissible(beta, grid, rng):
    """Random complex combination of x^a e^{-x} with a > (1 - beta)/2, exact f', f''."""
    x = grid.nodes
    f = np.zeros(x.shape, complex)
    f1 = np.zeros_like(f)
    f2 = np.zeros_like(f)
    for _ in range(3):
        a = (1 - beta) / 2 + rng.uniform(0.05, 2.0)
        c = complex(*rng.standard_normal(2))
        e = np.exp(-x)
        f += c * x ** a * e
        f1 += c * (a * x ** (a - 1) - x ** a) * e
        f2 += c * (a * (a - 1) * x ** (a - 2) - 2 * a * x ** (a - 1) + x ** a) * e
    return GridFunction(grid, f, (f1, f2))


class TestHardy:
    grid = Grid.log_refined(1e-10, 60.0, 100)

    def test_classical_example(self):
        f = GridFunction.from_callables(self.grid, lambda x: x * np.exp(-x), lambda x: (1 - x) * np.exp(-x))
        rep = weighted_hardy_check(f, 0.0)
        assert rep.holds
        # (1/4) int e^{-2x} = 1/8 and int (1-x)^2 e^{-2x} = 1/4
        assert rep.lhs == pytest.approx(0.125, rel=1e-6) and rep.rhs == pytest.approx(0.25, rel=1e-6)

    @pytest.mark.parametrize("beta", [0.0, -1.0, 0.5])
    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=15)
    def test_random_admissible(self, beta, seed):
        f = _admissible(beta, self.grid, np.random.default_rng(seed))
        assert weighted_hardy_check(f, beta).verdict is Verdict.HOLDS
        assert weighted_hardy_check(f, beta, R=1.0).verdict is Verdict.HOLDS

    @pytest.mark.parametrize("beta,decades,floor", [(0.0, 8, 0.8), (-1.0, 8, 0.9), (0.5, 11, 0.7)])
    def test_near_equality(self, beta, decades, floor):
        g = Grid.log_refined(1e-12, 1.0, 200)
        ratios = [weighted_hardy_check(hardy_log_bump(beta, d, g), beta).ratio for d in (decades - 4, decades)]
        assert ratios[0] < ratios[1] <= 1.0
        assert ratios[1] >= floor

    def test_liminf_violation(self):
        x = self.grid.nodes
        ch, (c1,) = cutoff(x, 1.0, 1.0, max_order=1)
        f = GridFunction(self.grid, ch.astype(complex), (c1.astype(complex),))
        with pytest.raises(HypothesisViolated):
            weighted_hardy_check(f, 0.0)

    def test_needs_log_grid(self):
        g = Grid.uniform(0.0, 1.0, 101)
        with pytest.raises(ValueError):
            weighted_hardy_check(GridFunction(g, g.nodes + 0j), 0.0)


class TestExtensions:
    params = BesselParams(1.0, 0.0, 0.5, math.pi / 4)

    def test_delta_zero_reduces(self):
        p = BesselParams(1.0, 0.0, 0.5)
        x = np.array([0.1, 1.0])
        phi_d, th_d = extension_system(p, 1j, x)
        phi, th = normalized_system(p, 1j, x)
        assert np.array_equal(phi_d, phi) and np.array_equal(th_d, th)

    @pytest.mark.parametrize("delta", [0.3, 1.0, 2.5])
    def test_wronskian(self, delta):
        p = BesselParams(1.0, 0.0, 0.5, delta)
        x = np.geomspace(1e-3, 2.0, 8)
        phi, phi1, th, th1 = extension_system(p, 1 + 1j, x, quasi=True)
        assert np.max(np.abs(wronskian(th, th1, phi, phi1) - 1)) <= 1e-10

    def test_psi_delta_is_weyl_solution(self):
        x = np.geomspace(1e-3, 2.0, 8)
        phi_d, psi_d = extension_family(self.params, 1j, x)
        _, th_d = extension_system(self.params, 1j, x)
        assert np.allclose(psi_d, th_d + m_delta(self.params, 1j) * phi_d, rtol=1e-10)

    def test_small_x_law(self):
        x = np.geomspace(1e-8, 1e-6, 5)
        phi_d, _ = extension_family(self.params, 1j, x)
        slope = np.polyfit(np.log(x), np.log(np.abs(phi_d)), 1)[0]
        assert slope == pytest.approx(self.params.s_minus, abs=1e-3)

    def test_gamma_zero_rejected(self):
        with pytest.raises(InvalidParameters):
            extension_family(BesselParams(0, 0, 0.0, 0.3), 1j, [1.0])


class TestDivergence:
    eps = np.geomspace(1e-2, 1e-6, 5)

    def test_slopes(self):
        p = BesselParams(1.0, 0.0, 0.5, math.pi / 4)
        gs, hs = fitted_slopes(divergence_demo(p, 1j, self.eps))
        target = divergence_exponent(p)
        assert target == -1.5
        assert abs(gs - target) <= 0.05 * abs(target)
        assert abs(hs - target) <= 0.05 * abs(target)

    def test_control_bounded(self):
        rows = divergence_demo(BesselParams(1.0, 0.0, 0.5), 1j, self.eps)
        for col in (1, 2):
            v = np.array([r[col] for r in rows])
            assert np.ptp(v) / v[-1] < 0.01

    def test_proviso(self):
        with pytest.raises(ProvisoViolated):
            divergence_demo(BesselParams(1.0, 0.0, 1.0 / 3.0, 0.5), 1j, self.eps)

    def test_input_checks(self):
        p = BesselParams(1.0, 0.0, 0.5, 0.5)
        with pytest.raises(ValueError):
            divergence_demo(p, 2.0, self.eps)
        with pytest.raises(ValueError):
            divergence_demo(p, 1j, self.eps[::-1])
