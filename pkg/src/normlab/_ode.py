"""Batched Dormand-Prince 5(4) integrator with per-member step control.

Every member of the batch has its own position, step size, end point and
stopping rule, but all members advance in lockstep so the right-hand side
is evaluated on whole arrays.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import StepUnderflow

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

RHS = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def solve_batch(
    rhs: RHS,
    x0: np.ndarray,
    y0: np.ndarray,
    x_end: np.ndarray,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-300,
    h0: Optional[np.ndarray] = None,
    x_eval: Optional[np.ndarray] = None,
    stop: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
    renormalize: bool = False,
    max_iter: int = 200000,
):
    """Integrate ``y' = rhs(x, y, idx)`` for a batch of initial value problems.

    Parameters
    ----------
    rhs : callable(x, y, idx)
        ``x`` has shape (n,), ``y`` shape (n, d); ``idx`` are the batch
        indices of the rows, so member-specific data (like z) can be looked up.
    x0, x_end : arrays of shape (B,)
        Start and end point of every member; integration may run backwards.
    y0 : array of shape (B, d)
    x_eval : optional 1-D array
        Common output nodes, ordered in the direction of integration.  Steps
        are shortened to land on them exactly.
    stop : optional callable(x, y, idx) -> bool array
        Checked after every accepted step; members returning True finish early.
    renormalize : bool
        Rescale each member's state by its max modulus when it gets large
        (for homogeneous post-processing such as the Weyl disk).

    Returns
    -------
    x, y : final positions (B,) and states (B, d)
    out : array (B, len(x_eval), d) of states at x_eval (NaN where not reached),
        or None
    """
    x0 = np.asarray(x0, dtype=float).copy()
    x_end = np.broadcast_to(np.asarray(x_end, dtype=float), x0.shape).copy()
    y = np.array(y0, dtype=complex)
    nb, d = y.shape
    direction = np.sign(x_end - x0)
    direction[direction == 0] = 1.0
    x = x0
    span = np.abs(x_end - x0)
    if h0 is None:
        h = np.maximum(1e-3 * span, 1e-12)
    else:
        h = np.broadcast_to(np.asarray(h0, dtype=float), x0.shape).copy()
    scale_log = np.zeros(nb)

    out = None
    next_eval = None
    if x_eval is not None:
        x_eval = np.asarray(x_eval, dtype=float)
        out = np.full((nb, x_eval.size, d), np.nan + 0j, dtype=complex)
        next_eval = np.zeros(nb, dtype=int)
        # record nodes sitting exactly on the start point
        for i in range(nb):
            while next_eval[i] < x_eval.size and x_eval[next_eval[i]] == x[i]:
                out[i, next_eval[i]] = y[i]
                next_eval[i] += 1

    active = span > 0
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        xa, ya, ha, da = x[idx], y[idx], h[idx], direction[idx]
        target = x_end[idx].copy()
        if x_eval is not None:
            ne = next_eval[idx]
            has = ne < x_eval.size
            cand = np.where(has, x_eval[np.minimum(ne, x_eval.size - 1)], target)
            closer = has & ((cand - target) * da < 0)
            target = np.where(closer, cand, target)
        remaining = np.abs(target - xa)
        step = np.minimum(ha, remaining)
        lands = ha >= remaining
        small = step < 1e-14 * np.maximum(np.abs(xa), 1.0)
        if np.any(small & ~lands):
            bad = idx[np.nonzero(small & ~lands)[0][0]]
            raise StepUnderflow(f"step size underflow at x = {x[bad]:.6g}")
        hs = (step * da)[:, None]
        k = [None] * 7
        k[0] = rhs(xa, ya, idx)
        for s in range(1, 7):
            acc = ya.copy()
            for j, a in enumerate(_A[s]):
                if a != 0.0:
                    acc = acc + hs * a * k[j]
            k[s] = rhs(xa + _C[s] * hs[:, 0], acc, idx)
        y5 = ya.copy()
        for j in range(7):
            if _B5[j] != 0.0:
                y5 = y5 + hs * _B5[j] * k[j]
        err_vec = hs * sum(_E[j] * k[j] for j in range(7) if _E[j] != 0.0)
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(y5))
        # mixed norm: compare against the largest component of the state
        scale = np.maximum(scale, rtol * np.max(np.abs(ya), axis=1, keepdims=True))
        err = np.max(np.abs(err_vec) / scale, axis=1)
        err = np.where(np.isfinite(err), err, np.inf)
        ok = err <= 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(err > 0, 0.9 * err ** -0.2, 5.0)
        fac = np.clip(fac, 0.2, 5.0)
        new_h = step * fac
        acc_idx = idx[ok]
        if acc_idx.size:
            xn = np.where(lands[ok], target[ok], xa[ok] + hs[ok, 0])
            x[acc_idx] = xn
            y[acc_idx] = y5[ok]
            # a step that was only shortened to hit a node keeps its old size
            h[acc_idx] = np.where(lands[ok], np.maximum(new_h[ok], ha[ok]), new_h[ok])
            if renormalize:
                mags = np.max(np.abs(y[acc_idx]), axis=1)
                big = mags > 1e100
                if np.any(big):
                    rows = acc_idx[big]
                    y[rows] /= mags[big][:, None]
                    scale_log[rows] += np.log(mags[big])
            if x_eval is not None:
                for i in acc_idx:
                    while next_eval[i] < x_eval.size and x_eval[next_eval[i]] == x[i]:
                        out[i, next_eval[i]] = y[i]
                        next_eval[i] += 1
            finished = x[acc_idx] == x_end[acc_idx]
            if stop is not None:
                finished = finished | np.asarray(stop(x[acc_idx], y[acc_idx], acc_idx), dtype=bool)
            active[acc_idx[finished]] = False
        rej = idx[~ok]
        if rej.size:
            h[rej] = new_h[~ok]
    else:
        raise StepUnderflow("maximum number of integration steps exceeded")
    return x, y, out
