"""Sturm-Liouville engine: tau u = z u, Weyl-Titchmarsh m-functions and best constants.

The expression is ``tau u = r^{-1} (-(p u')' + q u)`` on (a, b), regular at a
and limit point at b.  The Neumann-type fundamental system is fixed at a by
``theta(a) = 0, theta^[1](a) = 1, phi(a) = -1, phi^[1](a) = 0`` (so that
``W(theta, phi) = 1``), and m(z) is the coefficient making ``theta + m phi``
square integrable near b.  It is approximated by the centre of the Weyl disk at
a truncation point X, whose radius certifies the error.

Square roots and powers of z use the cut along [0, inf) (arg z in (0, 2 pi)),
which is the branch on which the closed-form m-functions are Herglotz.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate as sp_integrate

from ._ode import solve_batch
from ._parallel import parallel_map
from .errors import (
    AngleToleranceTooSmall,
    CoefficientEvaluationFailure,
    DiskTooLarge,
)
from .function_space import Grid, GridFunction, Weight, integrate as quad_integrate
from .special_functions import gamma_fn

Coefficient = Union[Weight, Callable[[np.ndarray], np.ndarray]]


def sqrt_cut_positive(z):
    """z**(1/2) with arg z taken in [0, 2 pi), so Im sqrt(z) >= 0."""
    return power_cut_positive(z, 0.5)


def arg_cut_positive(z):
    """arg z in [0, 2 pi); points of [0, inf) get the value from above the cut."""
    a = np.angle(z)
    a = np.where(a < 0, a + 2 * np.pi, a)
    # tiny negative angles would otherwise round up to exactly 2 pi
    return np.minimum(a, np.nextafter(2 * np.pi, 0.0))


def power_cut_positive(z, s):
    """z**s with arg z in [0, 2 pi)."""
    z = np.asarray(z, dtype=complex)
    return np.abs(z) ** s * np.exp(1j * s * arg_cut_positive(z))


def log_cut_positive(z):
    z = np.asarray(z, dtype=complex)
    return np.log(np.abs(z)) + 1j * arg_cut_positive(z)


def _as_callable(c: Coefficient) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(c, Weight):
        return c
    if callable(c):
        return c
    value = float(c)
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def _weight_derivative(c: Coefficient) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    if isinstance(c, Weight) and c.exponent_form is not None:
        cc, s = c.exponent_form
        if s == 0:
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return lambda x: cc * s * np.asarray(x, dtype=float) ** (s - 1)
    return None


@dataclass(frozen=True)
class SLCoefficients:
    p: Coefficient
    q: Coefficient
    r: Coefficient
    interval: tuple = (0.0, math.inf)
    regular_at_a: bool = True
    dp: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __post_init__(self):
        a, b = self.interval
        if not a < b:
            raise ValueError("interval must satisfy a < b")
        if self.dp is None:
            object.__setattr__(self, "dp", _weight_derivative(self.p))

    @property
    def a(self) -> float:
        return float(self.interval[0])

    @property
    def b(self) -> float:
        return float(self.interval[1])

    def eval(self, x: np.ndarray):
        """(1/p, q, r) at x; raises CoefficientEvaluationFailure on bad values."""
        try:
            with np.errstate(all="ignore"):
                p = np.asarray(_as_callable(self.p)(x), dtype=float)
                q = np.asarray(_as_callable(self.q)(x), dtype=float)
                r = np.asarray(_as_callable(self.r)(x), dtype=float)
                inv_p = 1.0 / p
        except Exception as exc:  # noqa: BLE001 - any user callable failure
            raise CoefficientEvaluationFailure(str(exc)) from exc
        if not (np.all(np.isfinite(inv_p)) and np.all(np.isfinite(q)) and np.all(np.isfinite(r))):
            bad = x[~(np.isfinite(inv_p) & np.isfinite(q) & np.isfinite(r))]
            raise CoefficientEvaluationFailure(f"coefficients not finite at x = {bad[0]:.6g}")
        return inv_p, q, r

    def describe(self) -> str:
        return self.name

    # presets -------------------------------------------------------------

    @classmethod
    def classical(cls) -> "SLCoefficients":
        """p = r = 1, q = 0 on (0, inf)."""
        return cls(Weight.unit(), Weight.power(0.0, 0.0), Weight.unit(), name="classical")

    @classmethod
    def power(cls, alpha: float, beta: float) -> "SLCoefficients":
        """p = x^beta, r = x^alpha, q = 0 on (0, inf); regular at 0 for alpha > -1, beta < 1."""
        if not (alpha > -1 and beta < 1):
            raise ValueError("power weights need alpha > -1 and beta < 1")
        return cls(Weight.power(beta), Weight.power(0.0, 0.0), Weight.power(alpha),
                   name=f"power:{alpha:g}:{beta:g}")

    @classmethod
    def bessel(cls, alpha: float, beta: float, gamma: float) -> "SLCoefficients":
        """p = x^beta, r = x^alpha, q = C x^(beta-2), C = ((2+alpha-beta)^2 gamma^2 - (1-beta)^2)/4."""
        c = ((2 + alpha - beta) ** 2 * gamma ** 2 - (1 - beta) ** 2) / 4.0
        return cls(Weight.power(beta), Weight.power(beta - 2.0, c) if c != 0 else Weight.power(0.0, 0.0),
                   Weight.power(alpha), regular_at_a=False,
                   name=f"bessel:{alpha:g}:{beta:g}:{gamma:g}")

    @classmethod
    def parse(cls, text: str) -> "SLCoefficients":
        """``classical``, ``power:alpha:beta`` or ``bessel:alpha:beta:gamma``."""
        parts = text.split(":")
        if parts[0] == "classical" and len(parts) == 1:
            return cls.classical()
        if parts[0] == "power" and len(parts) == 3:
            return cls.power(float(parts[1]), float(parts[2]))
        if parts[0] == "bessel" and len(parts) == 4:
            return cls.bessel(float(parts[1]), float(parts[2]), float(parts[3]))
        raise ValueError(f"unknown coefficient preset {text!r}")


@dataclass(frozen=True)
class SLState:
    x: float
    u: complex
    qd: complex


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    u: np.ndarray
    qd: np.ndarray

    def states(self) -> List[SLState]:
        return [SLState(float(a), complex(b), complex(c)) for a, b, c in zip(self.x, self.u, self.qd)]

    @property
    def end(self) -> SLState:
        return SLState(float(self.x[-1]), complex(self.u[-1]), complex(self.qd[-1]))


def _make_rhs(coef: SLCoefficients, zs: np.ndarray):
    """Right-hand side for stacked (u, qd) pairs: u' = qd/p, qd' = (q - z r) u."""

    def rhs(x, y, idx):
        inv_p, q, r = coef.eval(x)
        pot = (q - zs[idx] * r)[:, None]
        out = np.empty_like(y)
        out[:, 0::2] = y[:, 1::2] * inv_p[:, None]
        out[:, 1::2] = y[:, 0::2] * pot
        return out

    return rhs


_OFFSET = 1e-10


def _start_offset(coef: SLCoefficients, x0: float, direction: float):
    """Moments of 1/p, q, r over a tiny interval next to x0 if the coefficients blow up there."""
    try:
        coef.eval(np.array([x0]))
        return None
    except CoefficientEvaluationFailure:
        pass
    h = _OFFSET * max(1.0, abs(x0))
    lo, hi = (x0, x0 + h) if direction > 0 else (x0 - h, x0)

    def moment(fn):
        val, _ = sp_integrate.quad(lambda t: float(fn(np.array([t]))[0]), lo, hi, limit=200)
        return val

    inv_p = moment(lambda t: 1.0 / np.asarray(_as_callable(coef.p)(t), dtype=float))
    mq = moment(lambda t: np.asarray(_as_callable(coef.q)(t), dtype=float))
    mr = moment(lambda t: np.asarray(_as_callable(coef.r)(t), dtype=float))
    sgn = 1.0 if direction > 0 else -1.0
    return x0 + sgn * h, sgn * inv_p, sgn * mq, sgn * mr


def _propagate(coef: SLCoefficients, zs: np.ndarray, x0: float, y0: np.ndarray, x_end, *,
               tol: float, x_eval=None, stop=None, renormalize=False):
    """Integrate stacked (u, qd) pairs for every z in zs from x0 to x_end."""
    zs = np.asarray(zs, dtype=complex)
    y0 = np.array(y0, dtype=complex)
    x_end_arr = np.broadcast_to(np.asarray(x_end, dtype=float), zs.shape)
    direction = 1.0 if np.all(x_end_arr >= x0) else -1.0
    start = np.full(zs.shape, float(x0))
    off = _start_offset(coef, x0, direction)
    if off is not None:
        xs, ip, mq, mr = off
        u0 = y0[:, 0::2].copy()
        qd0 = y0[:, 1::2].copy()
        y0[:, 0::2] = u0 + qd0 * ip
        y0[:, 1::2] = qd0 + (mq - zs[:, None] * mr) * u0
        start[:] = xs
    rhs = _make_rhs(coef, zs)
    return solve_batch(rhs, start, y0, x_end_arr, rtol=tol, x_eval=x_eval, stop=stop,
                       renormalize=renormalize)


def integrate(coef: SLCoefficients, z: complex, start: SLState, to_x: float, tol: float = 1e-10,
              x_eval: Optional[Sequence[float]] = None) -> Trajectory:
    """Solve u' = qd/p, qd' = (q - z r) u from ``start`` to ``to_x``.

    Returns the states at ``x_eval`` (which must lie between start.x and
    to_x, ordered in the direction of integration) followed by the endpoint.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    y0 = np.array([[start.u, start.qd]], dtype=complex)
    nodes = None if x_eval is None else np.asarray(x_eval, dtype=float)
    x, y, out = _propagate(coef, np.array([z]), start.x, y0, to_x, tol=tol, x_eval=nodes)
    xs = [start.x] if nodes is None else list(nodes)
    if nodes is None:
        us, qds = [start.u], [start.qd]
    else:
        us, qds = list(out[0, :, 0]), list(out[0, :, 1])
    if nodes is None or nodes.size == 0 or nodes[-1] != x[0]:
        xs.append(float(x[0]))
        us.append(y[0, 0])
        qds.append(y[0, 1])
    return Trajectory(np.array(xs), np.array(us, dtype=complex), np.array(qds, dtype=complex))


def neumann_initial(n: int = 1) -> np.ndarray:
    """Stacked (theta, theta^[1], phi, phi^[1]) initial data at a."""
    return np.tile(np.array([0.0, 1.0, -1.0, 0.0], dtype=complex), (n, 1))


def fundamental_trajectory(coef: SLCoefficients, z: complex, x_eval: Sequence[float], tol: float = 1e-10):
    """(theta, theta^[1], phi, phi^[1]) at the given nodes (> a), Neumann-type normalization."""
    nodes = np.asarray(x_eval, dtype=float)
    _, _, out = _propagate(coef, np.array([z]), coef.a, neumann_initial(), nodes[-1], tol=tol,
                           x_eval=nodes)
    return out[0].T


# --------------------------------------------------------------------------
# Weyl disk


def weyl_disk(state: np.ndarray):
    """Centre and radius of the Weyl disk from (theta, theta1, phi, phi1) at X.

    The disk is the image of the real boundary-condition parameter t under
    m(t) = -(theta t + theta1) / (phi t + phi1).  Both outputs are invariant under
    a common rescaling of the state.
    """
    th, th1, ph, ph1 = state[..., 0], state[..., 1], state[..., 2], state[..., 3]
    denom = ph * np.conj(ph1) - ph1 * np.conj(ph)
    with np.errstate(divide="ignore", invalid="ignore"):
        center = (-th * np.conj(ph1) + th1 * np.conj(ph)) / denom
        radius = np.abs(th * ph1 - th1 * ph) / np.abs(denom)
    return center, radius


def _disk_stop(rtol: float):
    def stop(x, y, idx):
        c, rad = weyl_disk(y)
        return rad <= rtol * np.abs(c)

    return stop


@dataclass(frozen=True)
class MResult:
    m: np.ndarray
    radius: np.ndarray
    X: np.ndarray


def m_function_batch(coef: SLCoefficients, zs, X: float, bc: str = "neumann_type", *,
                     tol: float = 1e-11, disk_rtol: float = 1e-9, strict: bool = True) -> MResult:
    """Vectorised :func:`m_function` for many z at once."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if np.any(zs.imag == 0):
        raise ValueError("m-function needs nonreal z")
    if bc not in ("neumann_type", "dirichlet_type"):
        raise ValueError("bc must be neumann_type or dirichlet_type")
    x, y, _ = _propagate(coef, zs, coef.a, neumann_initial(zs.size), X, tol=tol,
                         stop=_disk_stop(disk_rtol), renormalize=True)
    center, radius = weyl_disk(y)
    if strict and np.any(~(radius <= disk_rtol * np.abs(center))):
        worst = int(np.nanargmax(radius / np.abs(center)))
        raise DiskTooLarge(
            f"Weyl disk radius {radius[worst]:.3e} at X = {X:g} exceeds {disk_rtol:g} * |m| "
            f"for z = {zs[worst]:.4g}")
    if bc == "dirichlet_type":
        mod2 = np.abs(center) ** 2
        radius = radius / np.abs(mod2 - radius ** 2)
        center = -1.0 / center
    return MResult(center, radius, x)


def m_function_from_state(coef: SLCoefficients, zs, x0: float, states, X: float, *,
                          tol: float = 1e-11, disk_rtol: float = 1e-9, strict: bool = True) -> MResult:
    """Weyl-disk m from a fundamental system given at an interior point x0.

    ``states`` has rows (theta, theta^[1], phi, phi^[1]) at x0 with W(theta, phi) = 1;
    used when the left endpoint is singular and the system is known in closed form.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    y0 = np.atleast_2d(np.asarray(states, dtype=complex))
    x, y, _ = _propagate(coef, zs, x0, y0, X, tol=tol, stop=_disk_stop(disk_rtol), renormalize=True)
    center, radius = weyl_disk(y)
    if strict and np.any(~(radius <= disk_rtol * np.abs(center))):
        raise DiskTooLarge(f"Weyl disk did not shrink below {disk_rtol:g} * |m| before X = {X:g}")
    return MResult(center, radius, x)


def m_function(coef: SLCoefficients, z: complex, X: float = 1e4, bc: str = "neumann_type", *,
               tol: float = 1e-11, disk_rtol: float = 1e-9) -> tuple[complex, float]:
    """Weyl-disk approximation (m, radius) of the m-function at nonreal z.

    Integration stops as soon as the disk radius is below ``disk_rtol * |m|``;
    DiskTooLarge is raised if that does not happen before X.
    """
    res = m_function_batch(coef, [z], X, bc, tol=tol, disk_rtol=disk_rtol)
    return complex(res.m[0]), float(res.radius[0])


def ray_z(rho, theta: float, sign: str):
    """Points of L_+(theta) = rho e^{i theta} or L_-(theta) = rho e^{i (theta + pi)}."""
    rho = np.asarray(rho, dtype=float)
    if sign == "plus":
        return rho * np.exp(1j * theta)
    if sign == "minus":
        return rho * np.exp(1j * (theta + math.pi))
    raise ValueError("sign must be plus or minus")


@dataclass
class MTrace:
    ray_angle: float
    sign: str
    rho: np.ndarray
    z: np.ndarray
    m: np.ndarray
    disk_radius: np.ndarray

    def rows(self):
        for rho, z, m, rad in zip(self.rho, self.z, self.m, self.disk_radius):
            yield (self.ray_angle, float(rho), z.real, z.imag, m.real, m.imag, float(rad))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "rho", "z_re", "z_im", "m_re", "m_im", "disk_radius"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def m_trace(coef: SLCoefficients, theta: float, rho_grid, sign: str = "plus", X: float = 1e4,
            tol: float = 1e-10, disk_rtol: float = 1e-8) -> MTrace:
    rho = np.asarray(rho_grid, dtype=float)
    z = ray_z(rho, theta, sign)
    res = m_function_batch(coef, z, X, tol=tol, disk_rtol=disk_rtol)
    return MTrace(float(theta), sign, rho, z, res.m, res.radius)


# --------------------------------------------------------------------------
# theta_0 search


@dataclass
class Theta0Result:
    theta_plus: float
    theta_minus: float
    theta0: float
    K: Optional[float]
    E_candidates: List[float]
    E_plus: List[float] = field(default_factory=list)
    E_minus: List[float] = field(default_factory=list)
    angle_tol: float = 5e-3

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


DEFAULT_RHO_GRID = np.logspace(-2, 2, 17)
_COARSE = 16


def _ray_values(coef, thetas, rho, sign, X, tol, disk_rtol):
    """Normalised -/+ Im(z^2 m) / |z^2 m| for every (theta, rho) pair."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    tt, rr = np.meshgrid(thetas, rho, indexing="ij")
    z = ray_z(rr.ravel(), 0.0, sign) * np.exp(1j * tt.ravel())
    res = m_function_batch(coef, z, X, tol=tol, disk_rtol=disk_rtol)
    w = z * z * res.m
    sgn = -1.0 if sign == "plus" else 1.0
    v = sgn * w.imag / np.abs(w)
    return v.reshape(tt.shape)


def _search_sign(coef, rho, sign, angle_tol, num_tol, X, tol, disk_rtol):
    coarse = (math.pi / 2) * np.arange(_COARSE, 0, -1) / _COARSE
    vals = _ray_values(coef, coarse, rho, sign, X, tol, disk_rtol)
    passed = vals.min(axis=1) >= -num_tol
    if not passed[0]:
        return math.pi / 2
    fails = np.nonzero(~passed)[0]
    if fails.size:
        j = fails[0]
        lo, hi = coarse[j], coarse[j - 1]
    else:
        lo, hi = 0.0, coarse[-1]
    while hi - lo > angle_tol:
        mid = 0.5 * (lo + hi)
        ok = _ray_values(coef, [mid], rho, sign, X, tol, disk_rtol).min() >= -num_tol
        if ok:
            hi = mid
        else:
            lo = mid
    if lo == 0.0:
        # condition holds down to the resolution limit: the infimum is 0
        return 0.0
    return 0.5 * (lo + hi)


def theta0_search(coef: SLCoefficients, rho_grid=None, angle_tol: float = 5e-3, *,
                  num_tol: float = 1e-6, X: float = 1e4, tol: float = 1e-10,
                  disk_rtol: float = 1e-8, threads: Optional[int] = None) -> Theta0Result:
    """Locate theta_+, theta_-, theta_0 = max of the two, and K = 1/cos(theta_0).

    The "for all rho" condition is checked on ``rho_grid`` using the scale-free
    value -/+ Im(z^2 m)/|z^2 m| >= -num_tol; angles are scanned on a coarse grid
    from pi/2 downwards and then bisected to ``angle_tol``.  A bisection that
    never fails reports 0.  E-candidates are the rho where the value at theta_0
    vanishes within 10 num_tol plus the slope times angle_tol.
    """
    if not angle_tol >= 1e-5:
        raise AngleToleranceTooSmall("angle_tol must be at least 1e-5 rad")
    rho = DEFAULT_RHO_GRID if rho_grid is None else np.asarray(rho_grid, dtype=float)
    if rho.size < 2 or np.any(rho <= 0) or math.log10(rho.max() / rho.min()) < 4 - 1e-9:
        raise ValueError("rho grid must be positive and span at least four decades")
    signs = ("plus", "minus")
    found = parallel_map(
        lambda s: _search_sign(coef, rho, s, angle_tol, num_tol, X, tol, disk_rtol), signs, threads)
    th_plus, th_minus = found
    theta0 = max(th_plus, th_minus)
    K = 1.0 / math.cos(theta0) if theta0 < math.pi / 2 - angle_tol else None
    E = {}
    for s in signs:
        if theta0 <= 0.0:
            E[s] = []
            continue
        d = 0.5 * angle_tol
        vals = _ray_values(coef, [theta0 - d, theta0, min(theta0 + d, math.pi / 2)], rho, s, X, tol,
                           disk_rtol)
        slope = np.abs(vals[2] - vals[0]) / (2 * d)
        bound = 10 * num_tol + slope * angle_tol
        E[s] = [float(r) for r, v, b in zip(rho, vals[1], bound) if abs(v) <= b]
    union = sorted(set(E["plus"]) | set(E["minus"]))
    return Theta0Result(float(th_plus), float(th_minus), float(theta0), K, union, E["plus"],
                        E["minus"], angle_tol)


def power_weight_theta0(alpha: float, beta: float) -> float:
    """Closed form theta_0 = pi (1 + alpha) / (3 + 2 alpha - beta) for q = 0 power weights."""
    return math.pi * (1 + alpha) / (3 + 2 * alpha - beta)


def power_weight_m(alpha: float, beta: float, z) -> np.ndarray:
    """Closed-form Neumann-type m for p = x^beta, r = x^alpha, q = 0 on (0, inf)."""
    c = 2 + alpha - beta
    nu = (1 - beta) / c
    const = c ** (2 * (1 - beta) / c) / (1 - beta) * (
        gamma_fn((3 + alpha - 2 * beta) / c) / gamma_fn((1 + alpha) / c)).real
    return const * np.exp(1j * math.pi * nu) * power_cut_positive(z, -nu)


# --------------------------------------------------------------------------
# forms and extremals


def dirichlet_form_err(f: GridFunction, coef: SLCoefficients):
    """(q(f, f), error estimate) with q(f, f) = int p |f'|^2 + q |f|^2."""
    from .function_space import derivative_values

    x = f.x
    p = np.asarray(_as_callable(coef.p)(x), dtype=float)
    q = np.asarray(_as_callable(coef.q)(x), dtype=float)
    d1 = derivative_values(f, 1)
    integrand = p * np.abs(d1) ** 2 + q * np.abs(f.values) ** 2
    value, err = quad_integrate(f.grid, integrand)
    return complex(value), err


def dirichlet_form(f: GridFunction, coef: SLCoefficients) -> complex:
    return dirichlet_form_err(f, coef)[0]


def tau_apply(f: GridFunction, coef: SLCoefficients) -> np.ndarray:
    """tau f = r^{-1} (-(p f')' + q f) using available derivative samples."""
    from .function_space import derivative_values

    x = f.x
    p = np.asarray(_as_callable(coef.p)(x), dtype=float)
    q = np.asarray(_as_callable(coef.q)(x), dtype=float)
    r = np.asarray(_as_callable(coef.r)(x), dtype=float)
    d1 = derivative_values(f, 1)
    if coef.dp is not None:
        d2 = derivative_values(f, 2)
        pf = np.asarray(coef.dp(x), dtype=float) * d1 + p * d2
    else:
        from .function_space import derivative

        pf = derivative(GridFunction(f.grid, p * d1), 1).values
    return (-pf + q * f.values) / r


def extremal_Y(coef: SLCoefficients, rho: float, sign: str, theta0: float, grid: Grid, *,
               tol: float = 1e-11, X: float = 1e4) -> GridFunction:
    """Samples of Y(rho, x) = Im(z psi(z, x)) with z on the ray L_sign(theta0).

    psi = theta + m phi is obtained by integrating backwards from well beyond
    the grid (where any start vector is attracted to the decaying solution)
    and normalising so that psi^[1](a) = 1.  First and second derivatives are
    attached when p' is known.
    """
    z = complex(ray_z(rho, theta0, sign))
    mres = m_function_batch(coef, [z], X, tol=tol, disk_rtol=1e-10)
    x_conv = float(mres.X[0])
    nodes = grid.nodes
    if nodes[0] < coef.a:
        raise ValueError("grid extends below the left endpoint")
    x_far = max(nodes[-1], coef.a) + 2.0 * (x_conv - coef.a) + 1.0
    x_far = min(x_far, coef.b) if math.isfinite(coef.b) else x_far
    eval_nodes = np.concatenate([nodes[::-1], [coef.a]]) if nodes[0] > coef.a else nodes[::-1]
    y0 = np.array([[1.0, 0.0]], dtype=complex)
    _, yend, out = _propagate(coef, np.array([z]), x_far, y0, coef.a, tol=tol, x_eval=eval_nodes)
    traj = out[0]
    psi_a = traj[-1]
    if not np.all(np.isfinite(traj)):
        raise CoefficientEvaluationFailure("backward integration did not reach every node")
    scale = 1.0 / psi_a[1]
    vals = traj[::-1] * scale
    if nodes[0] > coef.a:
        vals = vals[1:]
    psi, psi1 = vals[:, 0], vals[:, 1]
    inv_p, q, r = coef.eval(nodes) if nodes[0] > coef.a or coef.regular_at_a else (None, None, None)
    values = (z * psi).imag
    derivs = ()
    if inv_p is not None:
        dpsi = psi1 * inv_p
        derivs = ((z * dpsi).imag,)
        if coef.dp is not None:
            dp = np.asarray(coef.dp(nodes), dtype=float)
            d2psi = ((q - z * r) * psi - dp * dpsi) * inv_p
            derivs = derivs + ((z * d2psi).imag,)
    return GridFunction(grid, values.astype(complex), derivs)
