"""Known sharp constants, inequality verification, extremals and a constant estimator.

The tabulated constants are those of ``||f'||^2 <= C ||f|| ||f''||`` in L^p on
the half-line and on the line.  :func:`estimate_constant` searches for the
supremum of the Landau ratio over a few test-function families; it is an
empirical lower bound, not a proof.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import BudgetTooSmall, NonpositiveD, UnknownConstant, WidthTooLarge, ZeroFunction
from .function_space import (
    Grid,
    GridFunction,
    GridKind,
    _normalize_p,
    derivative_values,
    lp_norm_err,
)
from .report import InequalityReport, Verdict

INF = math.inf


class Domain(str, enum.Enum):
    HALF_LINE = "half_line"
    LINE = "line"


@dataclass(frozen=True)
class InequalityCase:
    domain: Domain
    p: float
    n: int = 2
    k: int = 1
    mu: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "domain", Domain(self.domain))
        object.__setattr__(self, "p", _normalize_p(self.p))
        if self.n < 2 or not 1 <= self.k <= self.n - 1:
            raise ValueError("need n >= 2 and 1 <= k <= n-1")
        if self.mu is not None:
            if (self.n, self.k) != (2, 1) or self.p != 2.0:
                raise ValueError("a shift mu is only defined for (n, k) = (2, 1) and p = 2")
            if self.mu < 0:
                raise ValueError("mu must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "InequalityCase":
        """Parse ``domain:p:n:k[:mu]``, e.g. ``half_line:2:2:1``."""
        parts = text.split(":")
        if len(parts) not in (4, 5):
            raise ValueError(f"case must look like domain:p:n:k[:mu], got {text!r}")
        mu = float(parts[4]) if len(parts) == 5 else None
        return cls(Domain(parts[0]), parts[1], int(parts[2]), int(parts[3]), mu)

    def label(self) -> str:
        p = "inf" if self.p == INF else str(int(self.p))
        base = f"{self.domain.value}:{p}:{self.n}:{self.k}"
        return base if self.mu is None else f"{base}:{self.mu:g}"


_TABLE = {
    (Domain.HALF_LINE, 1.0): 2.5,
    (Domain.HALF_LINE, 2.0): 2.0,
    (Domain.HALF_LINE, INF): 4.0,
    (Domain.LINE, 1.0): 2.0,
    (Domain.LINE, 2.0): 1.0,
    (Domain.LINE, INF): 2.0,
}


def known_constant(case: InequalityCase) -> Optional[float]:
    if (case.n, case.k) != (2, 1):
        return None
    return _TABLE.get((case.domain, case.p))


def constants_table() -> List[tuple]:
    """Rows (domain, p, n, k, constant) of the catalog."""
    rows = []
    for (domain, p), c in _TABLE.items():
        rows.append((domain.value, "inf" if p == INF else int(p), 2, 1, c))
    return rows


def _check_domain(f: GridFunction, case: InequalityCase) -> None:
    if case.domain is Domain.HALF_LINE and f.grid.x_min < 0:
        raise ValueError("half-line cases need a grid inside [0, inf)")


def verify(f: GridFunction, case: InequalityCase, constant: Optional[float] = None) -> InequalityReport:
    """Evaluate both sides of the cataloged inequality for f.

    Without a shift the inequality is ``||f^(k)||^n <= C ||f||^(n-k) ||f^(n)||^k``;
    with ``mu`` it is ``| ||f'||^2 - mu ||f||^2 | <= C ||f|| ||f'' + mu f||``.
    ``constant`` overrides the catalog value (used to exercise failure paths).
    """
    c = known_constant(case) if constant is None else float(constant)
    if c is None:
        raise UnknownConstant(f"no sharp constant cataloged for {case.label()}")
    _check_domain(f, case)
    p = case.p
    if case.mu is not None:
        mu = case.mu
        n0, e0 = lp_norm_err(f, 2)
        n1, e1 = lp_norm_err(GridFunction(f.grid, derivative_values(f, 1)), 2)
        shifted = derivative_values(f, 2) + mu * f.values
        n2, e2 = lp_norm_err(GridFunction(f.grid, shifted), 2)
        lhs = abs(n1 * n1 - mu * n0 * n0)
        base = n0 * n2
        err = 2 * n1 * e1 + 2 * mu * n0 * e0 + c * (e0 * n2 + n0 * e2)
        return InequalityReport.build(lhs, base, c, err)
    n, k = case.n, case.k
    n0, e0 = lp_norm_err(f, p)
    nk, ek = lp_norm_err(GridFunction(f.grid, derivative_values(f, k)), p)
    nn, en = lp_norm_err(GridFunction(f.grid, derivative_values(f, n)), p)
    lhs = nk ** n
    base = n0 ** (n - k) * nn ** k
    err = n * nk ** (n - 1) * ek
    if base > 0:
        err += c * base * ((n - k) * e0 / n0 + k * en / nn if n0 > 0 and nn > 0 else 0.0)
    return InequalityReport.build(lhs, base, c, err)


# --------------------------------------------------------------------------
# extremals


_LAMBDA_ANGLE = 2 * math.pi / 3
_EXTREMAL_COEFFS = (np.exp(-1j * math.pi / 3) / 2j, -np.exp(1j * math.pi / 3) / 2j)


def hl_extremal(C: complex, D: float, grid: Grid, max_order: int = 4) -> GridFunction:
    """C e^{-Dx/2} sin(sqrt(3) D x / 2 - pi/3) with exact derivatives up to max_order."""
    if not D > 0:
        raise NonpositiveD("D must be positive")
    x = grid.nodes
    lam1 = D * np.exp(1j * _LAMBDA_ANGLE)
    lam2 = D * np.exp(-1j * _LAMBDA_ANGLE)
    e1 = _EXTREMAL_COEFFS[0] * np.exp(lam1 * x)
    e2 = _EXTREMAL_COEFFS[1] * np.exp(lam2 * x)
    values = C * (e1 + e2)
    derivs = tuple(C * (lam1 ** j * e1 + lam2 ** j * e2) for j in range(1, max_order + 1))
    return GridFunction(grid, values, derivs)


def equality_residual(f: GridFunction, D: float) -> tuple[float, float]:
    """(||f'' + D f' + D^2 f|| / ||f||, |Re int conj(f) f''| / ||f||^2)."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    n0, _ = lp_norm_err(f, 2)
    if n0 == 0.0:
        raise ZeroFunction("equality residual of the zero function")
    f1 = derivative_values(f, 1)
    f2 = derivative_values(f, 2)
    res = GridFunction(f.grid, f2 + D * f1 + D * D * f.values)
    r1 = lp_norm_err(res, 2)[0] / n0
    from .function_space import integrate

    inner, _ = integrate(f.grid, (np.conj(f.values) * f2).real)
    return r1, abs(inner) / (n0 * n0)


def smoothstep(t):
    """C^2 ramp 6t^5 - 15t^4 + 10t^3 on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def smoothstep_derivs(t):
    """First three derivatives of :func:`smoothstep` (zero outside [0, 1])."""
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    d1 = 30.0 * t * t * (1 - t) ** 2
    d2 = 60.0 * t * (1 - t) * (1 - 2 * t)
    d3 = 60.0 * (1 - 6 * t + 6 * t * t)
    return d1 * inside, d2 * inside, d3 * inside


def cutoff(x, start: float, width: float, max_order: int = 2):
    """1 on x <= start, C^2 descent to 0 on [start, start + width]; with derivatives."""
    t = (np.asarray(x, dtype=float) - start) / width
    s = smoothstep(t)
    d1, d2, d3 = smoothstep_derivs(t)
    derivs = (-d1 / width, -d2 / width ** 2, -d3 / width ** 3)
    return 1.0 - s, derivs[:max_order]


def line_near_extremal(half_width_multiple: int, smoothing_width: float, grid: Grid) -> GridFunction:
    """sin(x) on |x| < n pi, bridged to zero over the given width by a C^2 polynomial.

    Raises WidthTooLarge when the bridge is wider than the plateau half-width
    n pi or runs past the end of the grid.
    """
    n = int(half_width_multiple)
    if n < 1:
        raise ValueError("half_width_multiple must be a positive integer")
    w = float(smoothing_width)
    if not w > 0:
        raise ValueError("smoothing_width must be positive")
    edge = n * math.pi
    if w > edge or edge + w > min(-grid.x_min, grid.x_max) + 1e-12:
        raise WidthTooLarge(f"bridge of width {w} does not fit around |x| = {edge}")
    x = grid.nodes
    ax = np.abs(x)
    sgn = np.sign(x)
    g, (g1, g2, g3) = cutoff(ax, edge, w, max_order=3)
    g1, g3 = g1 * sgn, g3 * sgn
    s, c = np.sin(x), np.cos(x)
    f0 = s * g
    f1 = c * g + s * g1
    f2 = -s * g + 2 * c * g1 + s * g2
    f3 = -c * g - 3 * s * g1 + 3 * c * g2 + s * g3
    return GridFunction(grid, f0, (f1, f2, f3))


# --------------------------------------------------------------------------
# empirical constant estimation


def _sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


class _Family:
    """A parameterized set of test functions with a Landau-ratio evaluator."""

    name = "family"
    dim = 0

    def __init__(self, case: InequalityCase):
        self.case = case

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def seeds(self) -> List[np.ndarray]:
        return []

    def ratio(self, params: np.ndarray) -> float:
        raise NotImplementedError

    def safe_ratio(self, params: np.ndarray) -> float:
        try:
            with np.errstate(all="ignore"):
                r = float(self.ratio(np.asarray(params, dtype=float)))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return -math.inf
        return r if math.isfinite(r) else -math.inf


def _ratio_from_norms(n0: float, nk: float, nn: float, n: int, k: int) -> float:
    denom = n0 ** (n - k) * nn ** k
    if not denom > 0:
        return -math.inf
    return nk ** n / denom


class ExpSumFamily(_Family):
    """Sums sum_j c_j exp(lambda_j x) on the half-line with Re lambda_j < 0.

    Parameters: m angles (mapped into (pi/2, 3pi/2)), m-1 log-moduli (the
    first modulus is fixed by dilation invariance) and 2m real coefficient parts.
    """

    name = "exp_sum"

    def __init__(self, case: InequalityCase, m: int):
        super().__init__(case)
        self.m = m
        self.dim = m + (m - 1) + 2 * m

    def unpack(self, params):
        m = self.m
        ang = math.pi / 2 + 1e-6 + (math.pi - 2e-6) * _sigmoid(params[:m])
        logmod = np.concatenate([[0.0], params[m:2 * m - 1]])
        lam = np.exp(logmod) * np.exp(1j * ang)
        c = params[2 * m - 1:3 * m - 1] + 1j * params[3 * m - 1:]
        return lam, c

    def sample(self, rng):
        return rng.normal(size=self.dim) * np.concatenate(
            [np.full(self.m, 1.5), np.full(self.m - 1, 0.7), np.ones(2 * self.m)])

    def seeds(self):
        if self.m != 2 or (self.case.n, self.case.k) != (2, 1):
            return []
        # the half-line extremal f_{1,1}: lambda = exp(+-2 pi i/3)
        def logit(angle):
            q = (angle - math.pi / 2 - 1e-6) / (math.pi - 2e-6)
            return math.log(q / (1 - q))

        a, b = _EXTREMAL_COEFFS
        return [np.array([logit(2 * math.pi / 3), logit(4 * math.pi / 3), 0.0,
                          a.real, b.real, a.imag, b.imag])]

    def ratio(self, params):
        lam, c = self.unpack(params)
        n, k, p = self.case.n, self.case.k, self.case.p
        if p == 2.0:
            gram = -1.0 / (lam.conj()[:, None] + lam[None, :])

            def norm(d):
                v = c * lam ** d
                return math.sqrt(max(float(np.real(np.conj(v) @ gram @ v)), 0.0))

            return _ratio_from_norms(norm(0), norm(k), norm(n), n, k)
        decay = float(np.min(-lam.real))
        x_max = min(60.0 / decay, 2000.0)
        h = min(0.02, 0.05 / float(np.max(np.abs(lam))))
        npts = int(min(max(x_max / h, 400), 40000)) | 1
        grid = Grid(np.linspace(0.0, x_max, npts), GridKind.UNIFORM)
        x = grid.nodes
        e = np.exp(np.outer(x, lam))
        vals = [e @ (c * lam ** d) for d in (0, k, n)]
        norms = [lp_norm_err(GridFunction(grid, v), p)[0] for v in vals]
        return _ratio_from_norms(norms[0], norms[1], norms[2], n, k)


class SmoothedSineFamily(_Family):
    """sin(x) plateaus of n periods-of-pi, with a C^2 bridge; params (n, width)."""

    name = "smoothed_sine"
    dim = 2
    max_multiple = 100

    def unpack(self, params):
        n = int(np.clip(round(1 + (self.max_multiple - 1) * _sigmoid(params[0])), 1, self.max_multiple))
        w = float(0.2 + (math.pi - 0.2) * _sigmoid(params[1]))
        return n, w

    def sample(self, rng):
        return rng.normal(size=2) * 2.0

    def seeds(self):
        return [np.array([12.0, 0.5])]

    def ratio(self, params):
        n, w = self.unpack(params)
        half = n * math.pi + w + 0.5
        npts = int(2 * half / 0.02) | 1
        grid = Grid.line(half, npts)
        f = line_near_extremal(n, w, grid)
        return _grid_ratio(f, self.case)


def _grid_ratio(f: GridFunction, case: InequalityCase) -> float:
    n, k, p = case.n, case.k, case.p
    n0 = lp_norm_err(f, p)[0]
    nk = lp_norm_err(GridFunction(f.grid, derivative_values(f, k)), p)[0]
    nn = lp_norm_err(GridFunction(f.grid, derivative_values(f, n)), p)[0]
    return _ratio_from_norms(n0, nk, nn, n, k)


def _bspline3(t):
    """Cubic B-spline on [-2, 2] and its first three derivatives."""
    a = np.abs(t)
    s = np.sign(t)
    inner = a < 1
    outer = (a >= 1) & (a < 2)
    b0 = np.where(inner, 2 / 3 - a * a + a ** 3 / 2, np.where(outer, (2 - a) ** 3 / 6, 0.0))
    b1 = np.where(inner, -2 * a + 1.5 * a * a, np.where(outer, -((2 - a) ** 2) / 2, 0.0)) * s
    b2 = np.where(inner, -2 + 3 * a, np.where(outer, 2 - a, 0.0))
    b3 = np.where(inner, 3.0, np.where(outer, -1.0, 0.0)) * s
    return b0, b1, b2, b3


class BumpFamily(_Family):
    """Superpositions of cubic B-spline bumps (C^2) with free centers, widths, amplitudes."""

    name = "bspline_bumps"

    def __init__(self, case: InequalityCase, nbumps: int = 4):
        super().__init__(case)
        self.nb = nbumps
        self.dim = 4 * nbumps
        self.half = case.domain is Domain.HALF_LINE
        self.span = 12.0
        npts = 6001
        if self.half:
            self.grid = Grid(np.linspace(0.0, self.span + 8.0, npts), GridKind.UNIFORM)
        else:
            self.grid = Grid(np.linspace(-self.span - 8.0, self.span + 8.0, npts), GridKind.TWO_SIDED_LINE)

    def unpack(self, params):
        p = params.reshape(self.nb, 4)
        lo = -2.0 if self.half else -self.span / 2
        centers = lo + (self.span / 2 - lo) * _sigmoid(p[:, 0])
        widths = 0.3 + 2.7 * _sigmoid(p[:, 1])
        amps = p[:, 2] + 1j * p[:, 3]
        return centers, widths, amps

    def sample(self, rng):
        return rng.normal(size=self.dim)

    def function(self, params) -> GridFunction:
        centers, widths, amps = self.unpack(params)
        x = self.grid.nodes
        out = [np.zeros_like(x, dtype=complex) for _ in range(4)]
        for c0, w, a in zip(centers, widths, amps):
            b = _bspline3((x - c0) / w)
            for d in range(4):
                out[d] = out[d] + a * b[d] / w ** d
        return GridFunction(self.grid, out[0], tuple(out[1:]))

    def ratio(self, params):
        return _grid_ratio(self.function(params), self.case)


def _families(case: InequalityCase) -> List[_Family]:
    fams: List[_Family] = []
    if case.domain is Domain.HALF_LINE:
        fams.append(ExpSumFamily(case, case.n))
        fams.append(ExpSumFamily(case, case.n + 1))
    else:
        fams.append(SmoothedSineFamily(case))
    if case.n <= 3:
        fams.append(BumpFamily(case))
    return fams


def _golden_max(fun: Callable[[float], float], a: float, b: float, evals: int) -> tuple[float, float, int]:
    """Golden-section search for a maximum on [a, b]; returns (x, f(x), evaluations)."""
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    used = 2
    while used < evals:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
        used += 1
    return (c, fc, used) if fc >= fd else (d, fd, used)


@dataclass
class EstimateResult:
    value: float
    family: str
    params: np.ndarray
    evaluations: int


def estimate_constant_detail(case: InequalityCase, budget: int = 500, seed: int = 0,
                             threads: Optional[int] = None) -> EstimateResult:
    """Best Landau ratio found within ``budget`` evaluations (see :func:`estimate_constant`)."""
    if budget < 10:
        raise BudgetTooSmall("estimate_constant needs a budget of at least 10 evaluations")
    if case.mu is not None:
        raise ValueError("estimate_constant covers the unshifted inequalities only")
    rng = np.random.default_rng(seed)
    fams = _families(case)
    n_init = max(len(fams), budget // 3)
    cands = []
    for fam in fams:
        for s in fam.seeds():
            cands.append((fam, s))
    i = 0
    while len(cands) < n_init:
        fam = fams[i % len(fams)]
        cands.append((fam, fam.sample(rng)))
        i += 1
    cands = cands[:n_init]
    values = parallel_map(lambda fc: fc[0].safe_ratio(fc[1]), cands, threads)
    used = len(cands)
    order = sorted(range(len(cands)), key=lambda j: (-values[j], j))
    best_idx = order[0]
    best_fam, best_params, best_val = cands[best_idx][0], cands[best_idx][1].copy(), values[best_idx]

    # coordinate-wise golden-section refinement of the best few starts
    starts = order[: max(1, min(3, len(order)))]
    remaining = budget - used
    per_start = remaining // len(starts)
    for j in starts:
        fam, x = cands[j][0], cands[j][1].copy()
        fx = values[j]
        spent = 0
        step = 1.0
        evals_per_coord = 8
        while spent + evals_per_coord <= per_start and step > 1e-6:
            improved = False
            for coord in range(fam.dim):
                if spent + evals_per_coord > per_start:
                    break

                def along(t, coord=coord):
                    y = x.copy()
                    y[coord] = t
                    return fam.safe_ratio(y)

                t, ft, n_used = _golden_max(along, x[coord] - step, x[coord] + step, evals_per_coord)
                spent += n_used
                if ft > fx:
                    improved = improved or (ft - fx) > 1e-12 * abs(fx)
                    x[coord], fx = t, ft
            if not improved:
                step *= 0.3
        used += spent
        if fx > best_val:
            best_fam, best_params, best_val = fam, x.copy(), fx
    return EstimateResult(float(best_val), best_fam.name, best_params, used)


def estimate_constant(case: InequalityCase, budget: int = 500, seed: int = 0,
                      threads: Optional[int] = None) -> float:
    """Empirical supremum of the Landau ratio over exponential sums (half-line),
    smoothed sines (line) and random C^2 bump superpositions.

    Random multistart followed by coordinate-wise golden-section refinement;
    deterministic for a fixed seed and budget.
    """
    return estimate_constant_detail(case, budget, seed, threads).value
