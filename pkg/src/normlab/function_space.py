"""Grids, sampled functions, weighted L^p norms and derivative ratios.

Every inequality check in normlab works on a :class:`GridFunction`: complex
samples on a strictly increasing :class:`Grid`, optionally carrying analytic
derivative samples.  Integrals use composite Simpson on uniform panels
(uniform in ``log x`` for log-refined grids) and trapezoid otherwise, each
with a Richardson error estimate.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import (
    DegenerateDenominator,
    DivergentIntegrand,
    EmptyGrid,
    GridTooSmall,
    InvalidGrid,
    NonFiniteValue,
    TailNotNegligible,
)

MIN_NODES = 16


class GridKind(str, enum.Enum):
    UNIFORM = "uniform"
    LOG_REFINED_AT_ZERO = "log_refined_at_zero"
    TWO_SIDED_LINE = "two_sided_line"


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    kind: GridKind = GridKind.UNIFORM

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise EmptyGrid("grid has no nodes")
        if nodes.size < MIN_NODES:
            raise InvalidGrid(f"grid needs at least {MIN_NODES} nodes, got {nodes.size}")
        if not np.all(np.isfinite(nodes)):
            raise InvalidGrid("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidGrid("grid nodes must be strictly increasing")
        kind = GridKind(self.kind)
        if kind is GridKind.LOG_REFINED_AT_ZERO and nodes[0] <= 0:
            raise InvalidGrid("log_refined_at_zero grids need a positive first node")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Grid":
        return cls(np.linspace(a, b, n), GridKind.UNIFORM)

    @classmethod
    def line(cls, half_width: float, n: int) -> "Grid":
        """Symmetric uniform grid on [-half_width, half_width]."""
        return cls(np.linspace(-half_width, half_width, n), GridKind.TWO_SIDED_LINE)

    @classmethod
    def log_refined(cls, x_min: float, x_max: float, per_decade: int = 200) -> "Grid":
        """Geometric grid from x_min to x_max; x_min*10**j are nodes for integer j."""
        if not 0 < x_min < x_max:
            raise InvalidGrid("need 0 < x_min < x_max")
        decades = math.log10(x_max / x_min)
        n = int(math.ceil(decades * per_decade)) + 1
        t = np.arange(n) / per_decade
        nodes = x_min * 10.0 ** t
        nodes[-1] = max(nodes[-1], x_max) if n > 1 else x_max
        return cls(nodes, GridKind.LOG_REFINED_AT_ZERO)

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])


@dataclass(frozen=True)
class Weight:
    """Positive weight: either ``c * x**s`` or an arbitrary vectorised callable."""

    exponent_form: Optional[tuple] = None
    general: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if (self.exponent_form is None) == (self.general is None):
            raise ValueError("exactly one of exponent_form / general must be set")

    @classmethod
    def unit(cls) -> "Weight":
        return cls(exponent_form=(1.0, 0.0))

    @classmethod
    def power(cls, s: float, c: float = 1.0) -> "Weight":
        return cls(exponent_form=(float(c), float(s)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.exponent_form is not None:
            c, s = self.exponent_form
            if s == 0.0:
                return np.full_like(x, c)
            with np.errstate(divide="ignore"):
                return c * x ** s
        return np.asarray(self.general(x), dtype=float)

    def check_positive(self, grid: Grid) -> None:
        w = self(grid.nodes)
        inner = w[1:-1]
        if not np.all(np.isfinite(inner)) or np.any(inner <= 0):
            raise ValueError("weight must be positive and finite on the grid interior")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples on a grid; ``derivs[j]`` holds the (j+1)-th derivative if known."""

    grid: Grid
    values: np.ndarray
    derivs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("values and grid nodes differ in length")
        derivs = tuple(np.asarray(d, dtype=complex) for d in self.derivs)
        for d in derivs:
            if d.shape != values.shape:
                raise ValueError("derivative samples differ in length from values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivs", derivs)

    @classmethod
    def from_callables(cls, grid: Grid, f: Callable, *derivs: Callable) -> "GridFunction":
        x = grid.nodes
        return cls(grid, f(x), tuple(d(x) for d in derivs))

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def scaled(self, c: complex) -> "GridFunction":
        return GridFunction(self.grid, c * self.values, tuple(c * d for d in self.derivs))

    def __mul__(self, c):
        return self.scaled(c)

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if other.grid is not self.grid and not np.array_equal(other.x, self.x):
            raise ValueError("cannot add functions on different grids")
        n = min(len(self.derivs), len(other.derivs))
        return GridFunction(
            self.grid,
            self.values + other.values,
            tuple(self.derivs[j] + other.derivs[j] for j in range(n)),
        )


# --------------------------------------------------------------------------
# quadrature


def _is_uniform(x: np.ndarray) -> bool:
    d = np.diff(x)
    return bool(np.all(np.abs(d - d[0]) <= 1e-9 * abs(d[0])))


def _simpson_with_error(t: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    fine = simpson(g, x=t)
    m = t.size if t.size % 2 == 1 else t.size - 1
    coarse = simpson(g[:m:2], x=t[:m:2])
    fine_m = fine if m == t.size else simpson(g[:m], x=t[:m])
    return float(fine), float(abs(fine_m - coarse) / 15.0)


def _trapezoid_with_error(t: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    fine = np.trapezoid(g, t)
    m = t.size if t.size % 2 == 1 else t.size - 1
    coarse = np.trapezoid(g[:m:2], t[:m:2])
    fine_m = fine if m == t.size else np.trapezoid(g[:m], t[:m])
    return float(fine), float(abs(fine_m - coarse) / 3.0)


def head_estimate(x: np.ndarray, g: np.ndarray) -> float:
    """Bound on the omitted integral of g over (0, x[0]) from its local power law.

    Fits ``|g| ~ A x**s`` between the first node and the node nearest
    ``10 * x[0]`` (the first quarter of the grid at most); raises
    DivergentIntegrand when s <= -1.
    """
    g0 = abs(g[0])
    if g0 == 0.0:
        return 0.0
    j = int(np.searchsorted(x, 10.0 * x[0]))
    j = max(1, min(j, x.size // 4))
    g1 = abs(g[j])
    if g1 == 0.0:
        return g0 * x[0]
    s = math.log(g1 / g0) / math.log(x[j] / x[0])
    if s <= -1.0 + 1e-9:
        raise DivergentIntegrand(f"integrand behaves like x^{s:.3f} near 0")
    return g0 * x[0] / (s + 1.0)


def integrate(grid: Grid, g: np.ndarray, *, include_head: bool = True) -> tuple[float, float]:
    """Integral of real samples ``g`` over the grid span, with an error estimate.

    On log-refined grids the omitted head (0, x_min) is bounded by
    :func:`head_estimate` and added to the error.
    """
    g = np.asarray(g)
    if np.iscomplexobj(g):
        re, ere = integrate(grid, g.real, include_head=include_head)
        im, eim = integrate(grid, g.imag, include_head=include_head)
        return complex(re, im), ere + eim
    if not np.all(np.isfinite(g)):
        raise NonFiniteValue("integrand has non-finite samples")
    x = grid.nodes
    if grid.kind is GridKind.LOG_REFINED_AT_ZERO:
        t = np.log(x)
        if _is_uniform(t):
            value, err = _simpson_with_error(t, g * x)
        else:
            value, err = _trapezoid_with_error(x, g)
        if include_head:
            err += head_estimate(x, g)
        return value, err
    if _is_uniform(x):
        return _simpson_with_error(x, g)
    return _trapezoid_with_error(x, g)


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue("function has non-finite samples")


def _normalize_p(p) -> float:
    if isinstance(p, str):
        p = p.strip().lower()
        if p in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise ValueError(f"p must be 1, 2 or inf, got {p}")
    return p


def lp_norm_err(f: GridFunction, p=2, w: Optional[Weight] = None) -> tuple[float, float]:
    """Weighted L^p norm and an estimate of its quadrature error."""
    p = _normalize_p(p)
    _check_finite(f.values)
    a = np.abs(f.values)
    if p == math.inf:
        # a grid maximum can only understate the true supremum
        return float(a.max()), 0.0
    w = Weight.unit() if w is None else w
    wx = w(f.x)
    if p == 1.0:
        return integrate(f.grid, wx * a)
    value, err = integrate(f.grid, wx * a * a)
    value = max(value, 0.0)
    norm = math.sqrt(value)
    if norm > 0:
        return norm, err / (2.0 * norm)
    return 0.0, math.sqrt(err)


def lp_norm(f: GridFunction, p=2, w: Optional[Weight] = None) -> float:
    return lp_norm_err(f, p, w)[0]


def tail_bound(f: GridFunction, w: Optional[Weight] = None) -> float:
    """Heuristic size of the truncated tail(s): |f|^2 * |x| * w at the open ends."""
    w = Weight.unit() if w is None else w
    x = f.x
    ends = [-1]
    if f.grid.kind is GridKind.TWO_SIDED_LINE:
        ends.append(0)
    total = 0.0
    for i in ends:
        wx = float(w(np.array([x[i]]))[0])
        total += abs(f.values[i]) ** 2 * abs(x[i]) * wx
    return total


def check_truncation(f: GridFunction, tol: float, w: Optional[Weight] = None) -> float:
    bound = tail_bound(f, w)
    if bound > tol:
        raise TailNotNegligible(f"tail bound {bound:.3e} exceeds tolerance {tol:.3e}")
    return bound


# --------------------------------------------------------------------------
# derivatives


def fornberg_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at 0 for each row of ``offsets`` (shape (N, L)).

    Returns an (N, L) array of weights for the derivative of the given order.
    """
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    n_rows, n_pts = offsets.shape
    c = np.zeros((n_rows, n_pts, order + 1))
    c[:, 0, 0] = 1.0
    c1 = np.ones(n_rows)
    c4 = offsets[:, 0].copy()
    for i in range(1, n_pts):
        mn = min(i, order)
        c2 = np.ones(n_rows)
        c5 = c4
        c4 = offsets[:, i].copy()
        for j in range(i):
            c3 = offsets[:, i] - offsets[:, j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[:, i, k] = c1 * (k * c[:, i - 1, k - 1] - c5 * c[:, i - 1, k]) / c2
                c[:, i, 0] = -c1 * c5 * c[:, i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[:, j, k] = (c4 * c[:, j, k] - k * c[:, j, k - 1]) / c3
            c[:, j, 0] = c4 * c[:, j, 0] / c3
        c1 = c2
    return c[:, :, order]


def _fd_derivative(x: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    n = x.size
    if n < order + 4:
        raise GridTooSmall(f"order {order} needs at least {order + 4} nodes, grid has {n}")
    central = 5 if order <= 2 else 7
    end = order + 4
    half = central // 2
    idx = np.arange(n)
    # interior nodes use a centred stencil, the ends a one-sided one
    start = idx - half
    length = np.full(n, central)
    left = start < 0
    right = start + central > n
    start[left] = 0
    length[left] = end
    start[right] = n - end
    length[right] = end
    out = np.empty(n, dtype=complex)
    for L in np.unique(length):
        rows = np.nonzero(length == L)[0]
        stencil = start[rows, None] + np.arange(L)[None, :]
        offsets = x[stencil] - x[rows, None]
        w = fornberg_weights(offsets, order)
        out[rows] = np.sum(w * v[stencil], axis=1)
    return out


def derivative(f: GridFunction, order: int = 1) -> GridFunction:
    """Derivative of the given order (1..4).

    Analytic derivative samples are returned when the function carries them;
    otherwise fourth-order finite differences are used (centred inside,
    one-sided at the ends).
    """
    if not 1 <= order <= 4:
        raise ValueError("order must be in 1..4")
    if len(f.derivs) >= order:
        return GridFunction(f.grid, f.derivs[order - 1], f.derivs[order:])
    _check_finite(f.values)
    if f.derivs:
        base_order = len(f.derivs)
        start_values = f.derivs[-1]
        remaining = order - base_order
    else:
        start_values = f.values
        remaining = order
    return GridFunction(f.grid, _fd_derivative(f.x, start_values, remaining))


def derivative_values(f: GridFunction, order: int) -> np.ndarray:
    if order == 0:
        return f.values
    if len(f.derivs) >= order:
        return f.derivs[order - 1]
    return derivative(f, order).values


def landau_ratio(f: GridFunction, n: int = 2, k: int = 1, p=2, w: Optional[Weight] = None) -> float:
    """||f^(k)||^n / (||f||^(n-k) ||f^(n)||^k)."""
    if n < 2 or not 1 <= k <= n - 1:
        raise ValueError("need n >= 2 and 1 <= k <= n-1")
    norm0 = lp_norm(f, p, w)
    normk = lp_norm(GridFunction(f.grid, derivative_values(f, k)), p, w)
    normn = lp_norm(GridFunction(f.grid, derivative_values(f, n)), p, w)
    denom = norm0 ** (n - k) * normn ** k
    if denom == 0.0 or norm0 == 0.0 or normn == 0.0:
        raise DegenerateDenominator("||f|| * ||f^(n)|| vanishes")
    return normk ** n / denom


# --------------------------------------------------------------------------
# CSV format: x,re,im[,dre,dim,ddre,ddim]


def infer_kind(nodes: np.ndarray) -> GridKind:
    if nodes[0] > 0 and _is_uniform(np.log(nodes)) and not _is_uniform(nodes):
        return GridKind.LOG_REFINED_AT_ZERO
    if nodes[0] < 0 < nodes[-1] and math.isclose(-nodes[0], nodes[-1], rel_tol=1e-9):
        return GridKind.TWO_SIDED_LINE
    return GridKind.UNIFORM


def write_csv(f: GridFunction, path, *, with_derivs: bool = True) -> None:
    header = ["x", "re", "im"]
    cols = [f.x, f.values.real, f.values.imag]
    if with_derivs and len(f.derivs) >= 2:
        header += ["dre", "dim", "ddre", "ddim"]
        cols += [f.derivs[0].real, f.derivs[0].imag, f.derivs[1].real, f.derivs[1].imag]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])


def read_csv(path, kind: Optional[GridKind] = None) -> GridFunction:
    with open(Path(path), encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row]
    if header[:3] != ["x", "re", "im"]:
        raise ValueError("CSV header must start with x,re,im")
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise EmptyGrid("CSV file has no rows")
    nodes = data[:, 0]
    grid = Grid(nodes, kind if kind is not None else infer_kind(nodes))
    values = data[:, 1] + 1j * data[:, 2]
    derivs: Sequence = ()
    if header[3:7] == ["dre", "dim", "ddre", "ddim"]:
        derivs = (data[:, 3] + 1j * data[:, 4], data[:, 5] + 1j * data[:, 6])
    return GridFunction(grid, values, tuple(derivs))
