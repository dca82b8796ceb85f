"""The generalized Bessel expression on (0, inf), solved in closed form.

    tau = x^{-alpha} [ -d/dx x^beta d/dx + C x^{beta-2} ],
    C = ((2+alpha-beta)^2 gamma^2 - (1-beta)^2) / 4,

with alpha > -1, beta < 1 and gamma in [0, 1), so that 0 is limit circle and
inf is limit point.  Throughout ``c = 2+alpha-beta``, ``k = c/2`` and
``s_pm = (1-beta +- c gamma)/2``; the Bessel argument is
``zeta = 2 z^{1/2} x^k / c``.

The normalized system (phi, theta) is evaluated from its entire power series
in ``z x^c`` (no branch choices involved); ``solutions_y`` and
``normalized_system_bessel`` give the same functions through J, Y and serve
as an independent route.  Powers and logarithms of z use arg z in [0, 2 pi),
the branch on which the closed-form m-function is Herglotz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .inequality_catalog import cutoff
from .errors import (
    ArgumentTooLarge,
    DivergentIntegrand,
    HypothesisViolated,
    InvalidParameters,
    NonConvergentLimit,
    NotInFriedrichsDomain,
    OnBranchCut,
    ProvisoViolated,
)
from .function_space import (
    Grid,
    GridFunction,
    GridKind,
    Weight,
    derivative_values,
    head_estimate,
    integrate,
    lp_norm_err,
)
from .report import InequalityReport
from .special_functions import (
    EULER_GAMMA,
    SERIES_RADIUS,
    bessel_j,
    bessel_j_deriv,
    bessel_y,
    bessel_y_deriv,
    gamma_fn,
    hankel1,
    hankel1_deriv,
    rgamma,
)
from .sturm_liouville import (
    MResult,
    SLCoefficients,
    log_cut_positive,
    m_function_from_state,
    power_cut_positive,
    sqrt_cut_positive,
)

_EPS = np.finfo(float).eps


def _gamma(x: float) -> float:
    return float(np.real(gamma_fn(x)))


def _rgamma(x: float) -> float:
    return float(np.real(rgamma(x)))


@dataclass(frozen=True)
class BesselParams:
    alpha: float
    beta: float
    gamma: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.alpha > -1:
            raise InvalidParameters("alpha must exceed -1")
        if not self.beta < 1:
            raise InvalidParameters("beta must be below 1")
        if not 0 <= self.gamma < 1:
            raise InvalidParameters("gamma must lie in [0, 1) (limit circle at 0)")
        if not 0 <= self.delta < math.pi:
            raise InvalidParameters("delta must lie in [0, pi)")

    @property
    def c(self) -> float:
        return 2.0 + self.alpha - self.beta

    @property
    def k(self) -> float:
        return self.c / 2.0

    @property
    def s_plus(self) -> float:
        return (1.0 - self.beta + self.c * self.gamma) / 2.0

    @property
    def s_minus(self) -> float:
        return (1.0 - self.beta - self.c * self.gamma) / 2.0

    @property
    def q_const(self) -> float:
        return (self.c ** 2 * self.gamma ** 2 - (1.0 - self.beta) ** 2) / 4.0

    def coefficients(self) -> SLCoefficients:
        return SLCoefficients.bessel(self.alpha, self.beta, self.gamma)

    def with_delta(self, delta: float) -> "BesselParams":
        return BesselParams(self.alpha, self.beta, self.gamma, delta)


@dataclass(frozen=True)
class BoundaryData:
    g_tilde: complex
    g_tilde_prime: complex
    err_tilde: float = 0.0
    err_tilde_prime: float = 0.0


def _x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    return x


def _zeta(params: BesselParams, z: complex, x: np.ndarray) -> np.ndarray:
    return 2.0 * complex(sqrt_cut_positive(z)) * x ** params.k / params.c


def _check_radius(params: BesselParams, z: complex, x: np.ndarray) -> None:
    r = 2.0 * math.sqrt(abs(z)) * float(np.max(x)) ** params.k / params.c
    if r > SERIES_RADIUS:
        raise ArgumentTooLarge(f"|zeta| = {r:.3g} exceeds the series radius {SERIES_RADIUS:g}")


# ---------------------------------------------------------------------------
# J / Y route


def solutions_y(params: BesselParams, z: complex, x):
    """(y1, y2) = x^{(1-beta)/2} (J_gamma(zeta), J_{-gamma}(zeta) or Y_0(zeta))."""
    x = _x(x)
    zeta = _zeta(params, z, x)
    amp = x ** ((1.0 - params.beta) / 2.0)
    y1 = amp * bessel_j(params.gamma, zeta)
    if params.gamma == 0.0:
        y2 = amp * bessel_y(0.0, zeta)
    else:
        y2 = amp * bessel_j(-params.gamma, zeta)
    return y1, y2


def _solutions_y_quasi(params: BesselParams, z: complex, x: np.ndarray):
    """Quasi-derivatives x^beta y' of y1, y2."""
    zeta = _zeta(params, z, x)
    s = (1.0 - params.beta) / 2.0
    pre = x ** (s + params.beta - 1.0)
    g = params.gamma
    j1, dj1 = bessel_j(g, zeta), bessel_j_deriv(g, zeta)
    if g == 0.0:
        j2, dj2 = bessel_y(0.0, zeta), bessel_y_deriv(0.0, zeta)
    else:
        j2, dj2 = bessel_j(-g, zeta), bessel_j_deriv(-g, zeta)
    q1 = pre * (s * j1 + params.k * zeta * dj1)
    q2 = pre * (s * j2 + params.k * zeta * dj2)
    return q1, q2


def normalized_system_bessel(params: BesselParams, z: complex, x, quasi: bool = False):
    """(phi, theta) from y1, y2 with the Gamma-weighted normalization; z off 0."""
    x = _x(x)
    a, b, g, c = params.alpha, params.beta, params.gamma, params.c
    y1, y2 = solutions_y(params, z, x)
    if quasi:
        q1, q2 = _solutions_y_quasi(params, z, x)
    if g == 0.0:
        lz = complex(log_cut_positive(z))
        f_phi = 1.0 / (1.0 - b)
        phi = f_phi * y1
        lead = (1.0 - b) / c
        shift = lz - 2.0 * math.log(c) + 2.0 * EULER_GAMMA
        theta = lead * (-math.pi * y2 + shift * y1)
        if quasi:
            return phi, f_phi * q1, theta, lead * (-math.pi * q2 + shift * q1)
        return phi, theta
    f_phi = c ** g * _gamma(1.0 + g) * complex(power_cut_positive(z, -g / 2.0)) / (1.0 - b)
    f_theta = (1.0 - b) * c ** (-g - 1.0) / g * _gamma(1.0 - g) * complex(power_cut_positive(z, g / 2.0))
    if quasi:
        return f_phi * y1, f_phi * q1, f_theta * y2, f_theta * q2
    return f_phi * y1, f_theta * y2


# ---------------------------------------------------------------------------
# entire-series route


def _power_series(nu: float, w: np.ndarray, e0: float, c: float, max_terms: int = 600):
    """S = sum w^m / (m! Gamma(nu+m+1)) and S1 = sum (e0 + c m) w^m / (m! Gamma(nu+m+1))."""
    term = np.full(w.shape, _rgamma(nu + 1.0), dtype=complex)
    s = term.copy()
    s1 = e0 * term
    for m in range(1, max_terms):
        term = term * w / (m * (nu + m))
        s = s + term
        s1 = s1 + (e0 + c * m) * term
        if m > 4 and np.all(np.abs(term) * (1.0 + c * m) <= 1e-17 * np.maximum(np.abs(s), 1e-300)):
            break
    return s, s1


def _log_series(w: np.ndarray, L: np.ndarray, e0: float, c: float, max_terms: int = 600):
    """Pieces of the gamma = 0 theta: sum w^m/(m!)^2 [L + (2/c) H_m] and its quasi factor."""
    a = np.ones(w.shape, dtype=complex)
    h = 0.0
    s = L.astype(complex)
    s1 = e0 * L - 1.0 + 0j
    for m in range(1, max_terms):
        a = a * w / (m * m)
        h += 1.0 / m
        inner = L + 2.0 * h / c
        e = e0 + c * m
        s = s + a * inner
        s1 = s1 + a * (e * inner - 1.0)
        if m > 4 and np.all(np.abs(a) * (np.abs(L) + 2 * h / c + 1.0) * (1.0 + e) <= 1e-17 * np.maximum(np.abs(s), 1e-300)):
            break
    return s, s1


def normalized_system(params: BesselParams, z: complex, x, quasi: bool = False):
    """The normalized fundamental system at z.

    phi has generalized boundary values (0, 1) at 0 and theta has (1, 0), with
    W(theta, phi) = 1.  Returns (phi, theta), or (phi, phi^[1], theta, theta^[1])
    with the quasi-derivatives x^beta u' when ``quasi`` is set.
    """
    x = _x(x)
    z = complex(z)
    _check_radius(params, z, x)
    b, g, c = params.beta, params.gamma, params.c
    w = -z * x ** c / c ** 2
    sp, sm = params.s_plus, params.s_minus
    f_phi = _gamma(1.0 + g) / (1.0 - b)
    S, S1 = _power_series(g, w, sp, c)
    phi = f_phi * x ** sp * S
    phi1 = f_phi * x ** (sp + b - 1.0) * S1
    if g == 0.0:
        L = np.log(1.0 / x)
        T, T1 = _log_series(w, L, sm, c)
        theta = (1.0 - b) * x ** sm * T
        theta1 = (1.0 - b) * x ** (sm + b - 1.0) * T1
    else:
        f_theta = (1.0 - b) / (c * g) * _gamma(1.0 - g)
        T, T1 = _power_series(-g, w, sm, c)
        theta = f_theta * x ** sm * T
        theta1 = f_theta * x ** (sm + b - 1.0) * T1
    if quasi:
        return phi, phi1, theta, theta1
    return phi, theta


def wronskian(u, u1, v, v1):
    """W(u, v) = u v^[1] - u^[1] v."""
    return u * v1 - u1 * v


# ---------------------------------------------------------------------------
# principal solutions


def principal_solutions(params: BesselParams, at: str, x, quasi: bool = False):
    """Principal and nonprincipal solutions of tau u = 0 at 0 or at infinity.

    ``at='zero'``: u0 = x^{s+}/(1-beta), u0_hat = (1-beta)/(c gamma) x^{s-}, or
    (1-beta) x^{(1-beta)/2} ln(1/x) when gamma = 0; W(u0, u0_hat) = -1.
    ``at='infinity'``: u = x^{s-}, u_hat = x^{s+}, or x^{(1-beta)/2} ln x.
    With ``quasi`` the quasi-derivatives are returned as well: (u, u^[1], uh, uh^[1]).
    """
    x = _x(x)
    b, g, c = params.beta, params.gamma, params.c
    sp, sm = params.s_plus, params.s_minus
    s0 = (1.0 - b) / 2.0
    if at == "zero":
        u = x ** sp / (1.0 - b)
        u1 = sp * x ** (sp + b - 1.0) / (1.0 - b)
        if g == 0.0:
            L = np.log(1.0 / x)
            uh = (1.0 - b) * x ** s0 * L
            uh1 = (1.0 - b) * x ** (s0 + b - 1.0) * (s0 * L - 1.0)
        else:
            f = (1.0 - b) / (c * g)
            uh = f * x ** sm
            uh1 = f * sm * x ** (sm + b - 1.0)
    elif at == "infinity":
        u = x ** sm
        u1 = sm * x ** (sm + b - 1.0)
        if g == 0.0:
            L = np.log(x)
            uh = x ** s0 * L
            uh1 = x ** (s0 + b - 1.0) * (s0 * L + 1.0)
        else:
            uh = x ** sp
            uh1 = sp * x ** (sp + b - 1.0)
    else:
        raise ValueError("at must be 'zero' or 'infinity'")
    if quasi:
        return u, u1, uh, uh1
    return u, uh


def quasi_product(params: BesselParams, at: str, x):
    """u * u^[1] for the principal solution; scales like x^{+-c gamma}."""
    u, u1, _, _ = principal_solutions(params, at, x, quasi=True)
    return u * u1


# ---------------------------------------------------------------------------
# generalized boundary values


def _decade_nodes(grid: Grid, count: int = 4, first: int = 0) -> np.ndarray:
    x = grid.nodes
    targets = x[0] * 10.0 ** np.arange(first, first + count)
    idx = [int(np.argmin(np.abs(np.log(x / t)))) for t in targets]
    if len(set(idx)) < count:
        raise ValueError("grid does not resolve its smallest decades")
    return np.array(idx)


def _richardson_power(xs: np.ndarray, qs: np.ndarray, e: float) -> np.ndarray:
    """Limits of L + C x^e from consecutive pairs (x_j, x_{j+1})."""
    r = (xs[1:] / xs[:-1]) ** e
    return (qs[:-1] * r - qs[1:]) / (r - 1.0)


def _richardson_log(xs: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """Limits of L + C / ln(1/x) from consecutive pairs."""
    la = np.log(1.0 / xs[:-1])
    lb = np.log(1.0 / xs[1:])
    return (qs[:-1] * la - qs[1:] * lb) / (la - lb)


def boundary_values(g: GridFunction, params: BesselParams, tol: float = 1e-6) -> BoundaryData:
    """g~(0) = lim g/u0_hat and g~'(0) = lim (g - g~(0) u0_hat)/u0 as x -> 0.

    The first quotient is Richardson-extrapolated from the nodes nearest
    x_min * 10^j, j = 0..3, removing its known leading correction; the spread
    between the two smallest-pair extrapolants is its error estimate.  The
    second quotient divides a cancellation by the small solution u0, so its
    roundoff grows like x^{-c gamma}; it uses the window of four consecutive
    decades below 1e-2 with the smallest spread plus roundoff estimate.
    NonConvergentLimit is raised when a spread exceeds the tolerance beyond
    the roundoff level.
    """
    grid = g.grid
    if grid.x_min > 1e-6 * (1 + 1e-9):
        raise ValueError("boundary values need a grid reaching x_min <= 1e-6")
    c, gam = params.c, params.gamma

    idx = _decade_nodes(grid)
    xs = grid.nodes[idx]
    _, uh = principal_solutions(params, "zero", xs)
    q1 = g.values[idx] / uh
    est1 = _richardson_log(xs, q1) if gam == 0.0 else _richardson_power(xs, q1, c * gam)
    A = est1[0]
    spread1 = float(abs(est1[0] - est1[1]))
    noise1 = 8 * _EPS * float(np.max(np.abs(q1)))
    err1 = spread1 + noise1

    e2 = c if gam == 0.0 else c * (1.0 - gam)
    n_dec = int(math.floor(math.log10(min(1e-2, grid.x_max / 10) / grid.x_min) + 1e-9)) + 1
    best = None
    for first in range(max(1, n_dec - 3)):
        idx2 = _decade_nodes(grid, 4, first)
        x2 = grid.nodes[idx2]
        u, uh2 = principal_solutions(params, "zero", x2)
        gv = g.values[idx2]
        q2 = (gv - A * uh2) / u
        est2 = _richardson_power(x2, q2, e2)
        noise2 = 8 * _EPS * float(np.max(np.abs(gv / u))) + 2 * err1 * float(abs(uh2[0] / u[0]))
        spread2 = float(abs(est2[0] - est2[1]))
        if best is None or spread2 + noise2 < best[1] + best[2]:
            best = (est2[0], spread2, noise2)
    B, spread2, noise2 = best

    scale = max(abs(A), abs(B))
    if scale == 0.0:
        return BoundaryData(0j, 0j, 0.0, 0.0)
    if spread1 > tol * scale + 4 * noise1:
        raise NonConvergentLimit(f"g/u0_hat does not settle near 0 (spread {spread1:.3g})")
    if spread2 > tol * scale + 4 * noise2:
        raise NonConvergentLimit(f"(g - g~(0) u0_hat)/u0 does not settle near 0 (spread {spread2:.3g})")
    return BoundaryData(complex(A), complex(B), err1, spread2 + noise2)


# ---------------------------------------------------------------------------
# m-function and Weyl solution


def _check_off_cut(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise OnBranchCut("z must lie off [0, inf)")
    return z


def m_closed_form(params: BesselParams, z) -> complex:
    """Closed-form m-function of the Friedrichs (delta = 0) boundary condition."""
    z = _check_off_cut(z)
    b, g, c = params.beta, params.gamma, params.c
    if g == 0.0:
        lz = complex(log_cut_positive(z))
        return (1.0 - b) ** 2 / c * (1j * math.pi - lz + 2.0 * math.log(c) - 2.0 * EULER_GAMMA)
    ratio = _gamma(1.0 - g) / _gamma(1.0 + g)
    zg = complex(power_cut_positive(z, g))
    return -np.exp(-1j * math.pi * g) * (1.0 - b) ** 2 * c ** (-2.0 * g - 1.0) / g * ratio * zg


def _psi_factor(params: BesselParams, z: complex) -> complex:
    b, g, c = params.beta, params.gamma, params.c
    if g == 0.0:
        return 1j * math.pi * (1.0 - b) / c
    return (1j * (1.0 - b) * c ** (-g - 1.0) / g * _gamma(1.0 - g) * math.sin(math.pi * g)
            * complex(power_cut_positive(z, g / 2.0)))


def psi_weyl(params: BesselParams, z, x, quasi: bool = False):
    """Weyl solution psi = theta + m phi through the Hankel function H^(1)_gamma.

    With ``quasi`` returns (psi, psi^[1]).
    """
    z = _check_off_cut(z)
    x = _x(x)
    zeta = _zeta(params, z, x)
    s = (1.0 - params.beta) / 2.0
    K = _psi_factor(params, z)
    h = hankel1(params.gamma, zeta)
    psi = K * x ** s * h
    if not quasi:
        return psi
    dh = hankel1_deriv(params.gamma, zeta)
    psi1 = K * x ** (s + params.beta - 1.0) * (s * h + params.k * zeta * dh)
    return psi, psi1


def m_numeric(params: BesselParams, zs, x0: float = 1e-2, X: float = 1e4, *, tol: float = 1e-11,
              disk_rtol: float = 1e-9, strict: bool = True) -> MResult:
    """Weyl-disk m-function started from the closed-form system at x0.

    The singular endpoint is never touched: (theta, phi) and their
    quasi-derivatives at x0 come from :func:`normalized_system`, and the
    Sturm-Liouville engine carries them to the limit-point end.  Starting
    much closer to 0 costs accuracy: theta outgrows phi like x0^{-c gamma}
    there, and integration errors leak into the phi direction.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    states = []
    for z in zs:
        phi, phi1, th, th1 = normalized_system(params, z, np.array([x0]), quasi=True)
        states.append([th[0], th1[0], phi[0], phi1[0]])
    return m_function_from_state(params.coefficients(), zs, x0, np.array(states), X,
                                 tol=tol, disk_rtol=disk_rtol, strict=strict)


# ---------------------------------------------------------------------------
# test functions with analytic derivatives


def _second_derivative(params: BesselParams, z: complex, x, u, du):
    """u'' from the equation (x^beta u')' = (C x^{beta-2} - z x^alpha) u."""
    b = params.beta
    return ((params.q_const * x ** (b - 2.0) - z * x ** params.alpha) * u - b * x ** (b - 1.0) * du) / x ** b


def _local_with_cutoff(grid: Grid, u, du, d2u, start: float, width: float) -> GridFunction:
    x = grid.nodes
    ch, (c1, c2) = cutoff(x, start, width, max_order=2)
    f = u * ch
    f1 = du * ch + u * c1
    f2 = d2u * ch + 2 * du * c1 + u * c2
    return GridFunction(grid, f, (f1, f2))


def solution_with_cutoff(params: BesselParams, which: str, grid: Grid, *, z: complex = 0.0,
                         start: float = 1.0, width: float = 1.0) -> GridFunction:
    """A local solution near 0 smoothly cut off to zero on [start, start + width].

    ``which`` is one of 'u0', 'u0_hat', 'phi', 'theta'; f' and f'' are exact.
    """
    x = grid.nodes
    b = params.beta
    if which in ("u0", "u0_hat"):
        u, u1, uh, uh1 = principal_solutions(params, "zero", x, quasi=True)
        val, q = (u, u1) if which == "u0" else (uh, uh1)
        zz = 0.0
    elif which in ("phi", "theta"):
        phi, phi1, th, th1 = normalized_system(params, z, x, quasi=True)
        val, q = (phi, phi1) if which == "phi" else (th, th1)
        zz = complex(z)
    else:
        raise ValueError(f"unknown local solution {which!r}")
    du = q / x ** b
    return _local_with_cutoff(grid, val, du, _second_derivative(params, zz, x, val, du), start, width)


def _random_combination(params: BesselParams, grid: Grid, rng: np.random.Generator, with_u0_hat: bool):
    x = grid.nodes
    b = params.beta
    n_terms = int(rng.integers(1, 4))
    u = np.zeros(x.shape, dtype=complex)
    du = np.zeros_like(u)
    d2u = np.zeros_like(u)
    for _ in range(n_terms):
        z = complex(rng.uniform(-4, 4), rng.uniform(-4, 4))
        coef = complex(rng.standard_normal(), rng.standard_normal())
        phi, phi1, _, _ = normalized_system(params, z, x, quasi=True)
        d1 = phi1 / x ** b
        u += coef * phi
        du += coef * d1
        d2u += coef * _second_derivative(params, z, x, phi, d1)
    if with_u0_hat:
        _, _, uh, uh1 = principal_solutions(params, "zero", x, quasi=True)
        d1 = uh1 / x ** b
        coef = complex(rng.standard_normal(), rng.standard_normal())
        coef = coef / abs(coef) * rng.uniform(0.5, 2.0)
        u += coef * uh
        du += coef * d1
        d2u += coef * _second_derivative(params, 0.0, x, uh, d1)
    start = float(rng.uniform(0.5, 1.5))
    width = float(rng.uniform(0.5, 1.5))
    return _local_with_cutoff(grid, u, du, d2u, start, width)


def friedrichs_family(params: BesselParams, count: int, seed: int = 0, grid: Optional[Grid] = None,
                      with_u0_hat: bool = False) -> List[GridFunction]:
    """Seeded random spans of phi(z_j, .) times a cutoff (optionally plus a u0_hat component)."""
    grid = grid or default_grid()
    rng = np.random.default_rng(seed)
    return [_random_combination(params, grid, rng, with_u0_hat) for _ in range(count)]


def default_grid(x_min: float = 1e-7, x_max: float = 3.0, per_decade: int = 100) -> Grid:
    return Grid.log_refined(x_min, x_max, per_decade)


# ---------------------------------------------------------------------------
# Friedrichs domain and the inequalities


@dataclass(frozen=True)
class FriedrichsVerdict:
    member: bool
    boundary: BoundaryData
    tests: dict = field(default_factory=dict)

    @property
    def failed(self) -> tuple:
        return tuple(name for name, ok in self.tests.items() if ok is False)

    def __bool__(self) -> bool:
        return self.member


def _head_finite(grid: Grid, integrand: np.ndarray) -> bool:
    try:
        head_estimate(grid.nodes, integrand)
    except DivergentIntegrand:
        return False
    return True


def friedrichs_member(f: GridFunction, params: BesselParams, tol: float = 1e-6) -> FriedrichsVerdict:
    """Membership test for the Friedrichs domain near 0.

    Checks g~(0) = 0 and, for gamma in (0, 1), that x^beta |f'|^2 and
    x^{beta-2} |f|^2 are integrable at 0.  For gamma = 0 only the
    boundary-value test applies.
    """
    bd = boundary_values(f, params, tol=tol)
    ok_bv = abs(bd.g_tilde) <= tol * abs(bd.g_tilde_prime) + 2.0 * bd.err_tilde
    tests = {"boundary_value": bool(ok_bv)}
    if params.gamma > 0.0:
        x = f.x
        b = params.beta
        d1 = derivative_values(f, 1)
        tests["gradient_finite"] = _head_finite(f.grid, x ** b * np.abs(d1) ** 2)
        tests["hardy_finite"] = _head_finite(f.grid, x ** (b - 2.0) * np.abs(f.values) ** 2)
    return FriedrichsVerdict(all(tests.values()), bd, tests)


def _energy_terms(f: GridFunction, beta: float):
    x = f.x
    d1 = derivative_values(f, 1)
    grad = integrate(f.grid, x ** beta * np.abs(d1) ** 2)
    hardy = integrate(f.grid, x ** (beta - 2.0) * np.abs(f.values) ** 2)
    return grad, hardy


def tau_values(f: GridFunction, params: BesselParams) -> np.ndarray:
    """tau f from f', f'' (analytic when attached, else finite differences).

    Near 0 tau f is a cancellation between terms much larger than the
    result; samples below the roundoff level of those terms are set to 0.
    """
    x = f.x
    b = params.beta
    d1 = derivative_values(f, 1)
    d2 = derivative_values(f, 2)
    t_pp = x ** b * d2
    t_p = b * x ** (b - 1.0) * d1
    t_q = params.q_const * x ** (b - 2.0) * f.values
    out = (-t_pp - t_p + t_q) / x ** params.alpha
    floor = 16 * _EPS * (np.abs(t_pp) + np.abs(t_p) + np.abs(t_q)) / x ** params.alpha
    return np.where(np.abs(out) <= floor, 0.0, out)


def verify_friedrichs_form(f: GridFunction, params: BesselParams) -> InequalityReport:
    """Report for int [x^beta |f'|^2 + C x^{beta-2} |f|^2] <= ||f|| ||tau f|| in L^2(x^alpha).

    Valid on the Friedrichs domain for gamma in (0, 1).
    """
    if not 0.0 < params.gamma < 1.0:
        raise InvalidParameters("the Friedrichs form inequality needs gamma in (0, 1)")
    verdict = friedrichs_member(f, params)
    if not verdict:
        raise NotInFriedrichsDomain(f"f fails {', '.join(verdict.failed)}")
    (grad, e_grad), (hardy, e_hardy) = _energy_terms(f, params.beta)
    lhs = grad + params.q_const * hardy
    w = Weight.power(params.alpha)
    n0, e0 = lp_norm_err(f, 2, w)
    tf = GridFunction(f.grid, tau_values(f, params))
    n1, e1 = lp_norm_err(tf, 2, w)
    err = e_grad + abs(params.q_const) * e_hardy + n0 * e1 + n1 * e0
    return InequalityReport.build(lhs, n0 * n1, 1.0, err)


def dirichlet_lhs(f: GridFunction, params: BesselParams) -> float:
    (grad, _), (hardy, _) = _energy_terms(f, params.beta)
    return grad + params.q_const * hardy


LIMINF_SLOPE = 0.02


def _liminf_zero(f: GridFunction) -> bool:
    idx = _decade_nodes(f.grid)
    a = np.abs(f.values[idx])
    top = float(np.max(np.abs(f.values)))
    if top == 0.0 or a[0] <= 1e-12 * top:
        return True
    if np.any(a == 0.0):
        return False
    slope = np.polyfit(np.log(f.grid.nodes[idx]), np.log(a), 1)[0]
    return bool(slope > LIMINF_SLOPE)


def weighted_hardy_check(f: GridFunction, beta: float, R: float = math.inf) -> InequalityReport:
    """Report for ((1-beta)^2/4) int_0^R x^{beta-2}|f|^2 <= int_0^R x^beta |f'|^2.

    ``lhs`` is the weighted Hardy side, the base is the gradient side and the
    constant is 1, so ``ratio`` approaches 1 for near-extremal f.  The
    vanishing hypothesis at 0 is judged from the log-log slope of |f| over
    the three smallest decades of the grid.
    """
    if not beta < 1:
        raise InvalidParameters("beta must be below 1")
    if f.grid.kind is not GridKind.LOG_REFINED_AT_ZERO:
        raise ValueError("the Hardy check needs a log-refined grid at 0")
    if not _liminf_zero(f):
        raise HypothesisViolated("liminf |f| at 0 does not appear to vanish")
    x = f.x
    d1 = derivative_values(f, 1)
    keep = x <= R
    if keep.sum() < 16:
        raise ValueError("fewer than 16 grid nodes below R")
    g = Grid(x[keep], GridKind.LOG_REFINED_AT_ZERO)
    grad, e_grad = integrate(g, x[keep] ** beta * np.abs(d1[keep]) ** 2)
    hardy, e_hardy = integrate(g, x[keep] ** (beta - 2.0) * np.abs(f.values[keep]) ** 2)
    c = (1.0 - beta) ** 2 / 4.0
    return InequalityReport.build(c * hardy, grad, 1.0, c * e_hardy + e_grad)


def hardy_log_bump(beta: float, decades: float, grid: Grid, x_top: float = 1.0) -> GridFunction:
    """x^{(1-beta)/2} chi(ln x), chi a C^2 plateau bump spanning ``decades`` below x_top.

    In t = ln x both sides of the Hardy inequality become integrals of chi and
    chi', and the ratio 1 / (1 + int chi'^2 / (s^2 int chi^2)) tends to 1 as
    the bump widens.
    """
    from .inequality_catalog import smoothstep, smoothstep_derivs

    if decades <= 0:
        raise ValueError("decades must be positive")
    x = grid.nodes
    s = (1.0 - beta) / 2.0
    t = np.log(x)
    t_hi = math.log(x_top)
    span = decades * math.log(10.0)
    t_lo = t_hi - span
    ramp = span / 4.0
    up = (t - t_lo) / ramp
    down = (t_hi - t) / ramp
    chi = smoothstep(up) * smoothstep(down)
    u1, u2, _ = smoothstep_derivs(up)
    v1, v2, _ = smoothstep_derivs(down)
    su, sd = smoothstep(up), smoothstep(down)
    dchi = (u1 * sd - su * v1) / ramp
    d2chi = (u2 * sd - 2 * u1 * v1 + su * v2) / ramp ** 2
    xs = x ** s
    f = xs * chi
    f1 = xs / x * (s * chi + dchi)
    f2 = xs / x ** 2 * (s * (s - 1.0) * chi + (2 * s - 1.0) * dchi + d2chi)
    return GridFunction(grid, f.astype(complex), (f1.astype(complex), f2.astype(complex)))


# ---------------------------------------------------------------------------
# self-adjoint extensions


def extension_system(params: BesselParams, z, x, quasi: bool = False):
    """(phi_delta, theta_delta) rotated from the normalized system by delta."""
    cd, sd = math.cos(params.delta), math.sin(params.delta)
    if quasi:
        phi, phi1, th, th1 = normalized_system(params, z, x, quasi=True)
        return (cd * phi - sd * th, cd * phi1 - sd * th1, sd * phi + cd * th, sd * phi1 + cd * th1)
    phi, th = normalized_system(params, z, x)
    return cd * phi - sd * th, sd * phi + cd * th


def m_delta(params: BesselParams, z) -> complex:
    m0 = m_closed_form(params, z)
    cd, sd = math.cos(params.delta), math.sin(params.delta)
    return (-sd + cd * m0) / (cd + sd * m0)


def extension_family(params: BesselParams, z, x):
    """(phi_delta, psi_delta) for the boundary condition with angle delta.

    psi_delta = theta_delta + m_delta phi_delta, which is psi_0 divided by
    cos(delta) + sin(delta) m_0(z).
    """
    if not 0.0 < params.gamma < 1.0:
        raise InvalidParameters("the extension family needs gamma in (0, 1)")
    z = _check_off_cut(z)
    phi_d, _ = extension_system(params, z, x)
    m0 = m_closed_form(params, z)
    psi = psi_weyl(params, z, x) / (math.cos(params.delta) + math.sin(params.delta) * m0)
    return phi_d, psi


def divergence_exponent(params: BesselParams) -> float:
    """Log-log slope of the truncated integrals int_eps for delta != 0 (and 0 for delta = 0)."""
    return -params.c * params.gamma if params.delta != 0.0 else 0.0


def divergence_demo(params: BesselParams, z, eps_sequence: Sequence[float], *, per_decade: int = 100,
                    start: float = 1.0, width: float = 1.0):
    """Truncated integrals int_eps x^beta |f'|^2 and int_eps x^{beta-2} |f|^2.

    f(z, delta, .) = phi_delta(z, .) times a cutoff on [start, start + width]:
    below the support of the resolvent's right-hand side it is phi_delta up to
    the constant factor, which is normalized to 1.  Returns (eps, I_grad, I_hardy)
    rows in the order of ``eps_sequence``.
    """
    if abs(params.c * params.gamma - (1.0 - params.beta)) < 1e-12:
        raise ProvisoViolated("(2+alpha-beta) gamma must differ from 1 - beta")
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("z must be nonreal")
    eps_sequence = [float(e) for e in eps_sequence]
    if any(e <= 0 for e in eps_sequence) or any(b >= a for a, b in zip(eps_sequence, eps_sequence[1:])):
        raise ValueError("eps_sequence must be positive and decreasing")
    b = params.beta
    rows = []
    for eps in eps_sequence:
        decades = math.log10((start + width) / eps)
        n = max(16, int(round(decades * per_decade)) + 1)
        grid = Grid(np.geomspace(eps, start + width, n), GridKind.LOG_REFINED_AT_ZERO)
        x = grid.nodes
        phi, phi1, _, _ = extension_system(params, z, x, quasi=True)
        du = phi1 / x ** b
        ch, (c1,) = cutoff(x, start, width, max_order=1)
        f = phi * ch
        f1 = du * ch + phi * c1
        i_grad, _ = integrate(grid, x ** b * np.abs(f1) ** 2, include_head=False)
        i_hardy, _ = integrate(grid, x ** (b - 2.0) * np.abs(f) ** 2, include_head=False)
        rows.append((eps, float(i_grad), float(i_hardy)))
    return rows


def fitted_slopes(rows) -> tuple[float, float]:
    """Least-squares log-log slopes of (I_grad, I_hardy) against eps."""
    e = np.log([r[0] for r in rows])
    sg = np.polyfit(e, np.log([r[1] for r in rows]), 1)[0]
    sh = np.polyfit(e, np.log([r[2] for r in rows]), 1)[0]
    return float(sg), float(sh)
