"""Gamma and Bessel J, Y, H^(1) for complex arguments.

Everything is evaluated from ascending series inside a validated radius,
which is all the generalized Bessel example needs.  Orders are restricted
to (-1, 1) and the nonnegative integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ArgumentTooLarge, PoleAtNonpositiveInteger, UnsupportedOrder, ZeroArgument

EULER_GAMMA = 0.57721566490153286061
SERIES_RADIUS = 30.0
SERIES_RTOL = 1e-16
_MAX_TERMS = 400

# Lanczos coefficients, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


@dataclass(frozen=True)
class BesselOrder:
    nu: float

    def __post_init__(self):
        nu = float(self.nu)
        if not (-1.0 < nu < 1.0 or (nu >= 0 and nu == int(nu))):
            raise UnsupportedOrder(f"order {nu} outside (-1, 1) and the nonnegative integers")
        object.__setattr__(self, "nu", nu)

    @property
    def is_integer(self) -> bool:
        return self.nu == int(self.nu) and self.nu >= 0


OrderLike = Union[BesselOrder, float, int]


def _order(order: OrderLike) -> BesselOrder:
    return order if isinstance(order, BesselOrder) else BesselOrder(order)


def _lanczos(x: np.ndarray) -> np.ndarray:
    x = x - 1.0
    a = np.full_like(x, _LANCZOS[0])
    for i, c in enumerate(_LANCZOS[1:], start=1):
        a = a + c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * np.exp(-t) * a


def gamma_fn(x):
    """Gamma function for real or complex input (scalar or array)."""
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=complex))
    pole = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if np.any(pole):
        raise PoleAtNonpositiveInteger(f"Gamma has a pole at {z[pole][0].real:g}")
    out = np.empty_like(z)
    refl = z.real < 0.5
    if np.any(~refl):
        out[~refl] = _lanczos(z[~refl])
    if np.any(refl):
        zr = z[refl]
        out[refl] = math.pi / (np.sin(math.pi * zr) * _lanczos(1.0 - zr))
    # exact factorials at small positive integers
    ints = (z.imag == 0) & (z.real >= 1) & (z.real <= 30) & (z.real == np.round(z.real))
    if np.any(ints):
        out[ints] = [float(math.factorial(int(v) - 1)) for v in z.real[ints]]
    return out[0] if scalar else out


def rgamma(x):
    """1/Gamma, zero at the poles."""
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=complex))
    pole = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    out = np.zeros_like(z)
    if np.any(~pole):
        out[~pole] = 1.0 / gamma_fn(z[~pole])
    return out[0] if scalar else out


def _prepare(z, radius: float, allow_zero: bool = True):
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite Bessel argument")
    if np.any(np.abs(z) > radius):
        raise ArgumentTooLarge(f"|z| = {np.abs(z).max():.3g} exceeds series radius {radius}")
    if not allow_zero and np.any(z == 0):
        raise ZeroArgument("Y and H^(1) are singular at z = 0")
    return scalar, z


def _j_series(nu: float, z: np.ndarray, deriv: bool = False):
    """Ascending series for J_nu (and optionally J_nu') at nonzero or zero z."""
    half = z / 2.0
    w = -(half * half)
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(z == 0, 1.0 if nu == 0 else 0.0, half ** nu) * rgamma(nu + 1.0)
    term = np.ones_like(z) * lead
    total = term.copy()
    dtotal = nu * term
    m = 0
    aw = np.abs(w)
    while m < _MAX_TERMS:
        m += 1
        term = term * w / (m * (nu + m))
        total = total + term
        if deriv:
            dtotal = dtotal + (nu + 2 * m) * term
        ratio = aw / ((m + 1) * abs(nu + m + 1))
        tail = np.abs(term) * np.where(ratio < 1, ratio / np.maximum(1 - ratio, 1e-300), np.inf)
        if np.all(tail <= SERIES_RTOL * np.abs(total)) or np.all(term == 0):
            break
    if not deriv:
        return total, None
    with np.errstate(divide="ignore", invalid="ignore"):
        d = dtotal / z
    return total, d


def bessel_j(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    """J_nu(z) from its ascending series, principal branch of z**nu."""
    nu = _order(order).nu
    scalar, zz = _prepare(z, radius)
    val, _ = _j_series(nu, zz)
    return val[0] if scalar else val


def bessel_j_deriv(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    """d/dz J_nu(z) from the termwise differentiated series (z != 0)."""
    nu = _order(order).nu
    scalar, zz = _prepare(z, radius, allow_zero=False)
    _, d = _j_series(nu, zz, deriv=True)
    return d[0] if scalar else d


def _y_integer(n: int, z: np.ndarray) -> np.ndarray:
    half = z / 2.0
    jn, _ = _j_series(float(n), z)
    out = (2.0 / math.pi) * jn * np.log(half)
    if n > 0:
        finite = np.zeros_like(z)
        for k in range(n):
            finite = finite + math.factorial(n - k - 1) / math.factorial(k) * half ** (2 * k - n)
        out = out - finite / math.pi
    # sum_k [psi(k+1) + psi(n+k+1)] (-z^2/4)^k / (k! (n+k)!) * (z/2)^n
    w = -(half * half)
    term = half ** n / math.factorial(n)
    harm_k, harm_nk = 0.0, sum(1.0 / j for j in range(1, n + 1))
    total = term * (2.0 * -EULER_GAMMA + harm_k + harm_nk)
    aw = np.abs(w)
    for k in range(1, _MAX_TERMS):
        term = term * w / (k * (n + k))
        harm_k += 1.0 / k
        harm_nk += 1.0 / (n + k)
        piece = term * (2.0 * -EULER_GAMMA + harm_k + harm_nk)
        total = total + piece
        ratio = aw / ((k + 1) * (n + k + 1))
        if k > aw.max() and np.all(np.abs(piece) * 2 <= SERIES_RTOL * np.abs(total)) and np.all(ratio < 0.5):
            break
    return out - total / math.pi


def _y(nu: float, z: np.ndarray) -> np.ndarray:
    if nu == int(nu) and nu >= 0:
        return _y_integer(int(nu), z)
    jp, _ = _j_series(nu, z)
    jm, _ = _j_series(-nu, z)
    return (jp * math.cos(nu * math.pi) - jm) / math.sin(nu * math.pi)


def bessel_y(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    """Y_nu(z); reflection formula for non-integer orders, log series otherwise."""
    nu = _order(order).nu
    scalar, zz = _prepare(z, radius, allow_zero=False)
    val = _y(nu, zz)
    return val[0] if scalar else val


def bessel_y_deriv(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    """d/dz Y_nu(z)."""
    nu = _order(order).nu
    scalar, zz = _prepare(z, radius, allow_zero=False)
    if nu == int(nu) and nu >= 0:
        n = int(nu)
        if n == 0:
            d = -_y_integer(1, zz)
        else:
            d = 0.5 * (_y_integer(n - 1, zz) - _y_integer(n + 1, zz))
    else:
        _, djp = _j_series(nu, zz, deriv=True)
        _, djm = _j_series(-nu, zz, deriv=True)
        d = (djp * math.cos(nu * math.pi) - djm) / math.sin(nu * math.pi)
    return d[0] if scalar else d


def hankel1(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    """H^(1)_nu(z) = J_nu(z) + i Y_nu(z)."""
    nu = _order(order).nu
    scalar, zz = _prepare(z, radius, allow_zero=False)
    val = _j_series(nu, zz)[0] + 1j * _y(nu, zz)
    return val[0] if scalar else val


def hankel1_deriv(order: OrderLike, z, *, radius: float = SERIES_RADIUS):
    return bessel_j_deriv(order, z, radius=radius) + 1j * bessel_y_deriv(order, z, radius=radius)
