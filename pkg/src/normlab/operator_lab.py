"""Finite-dimensional checks of the abstract operator inequalities.

Matrices stand in for the Hilbert-space operators: Kato's inequality
``||Af||^2 <= 2 ||f|| ||A^2 f||`` for dissipative A, the constant-one version
for symmetric A, the interpolation bound for fractional powers of a
nonnegative S, and the semigroup-bound variant with constant ``4 M^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from ._parallel import parallel_map
from .errors import NotDissipative, NotPSD, NotSymmetric
from .report import InequalityReport

FLAG_TOL = 1e-12
# a symmetric ratio within 1e-8 of 1 corresponds to a projection residual of about sqrt(2e-8)
EQUALITY_RESIDUAL = math.sqrt(2e-8)


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("operator entries must be a nonempty square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, v):
        return self.entries @ v

    def scaled(self, c: complex) -> "Operator":
        return Operator(c * self.entries)


@dataclass(frozen=True)
class OperatorClass:
    symmetric: bool = False
    dissipative: bool = False
    psd: bool = False


def _as_operator(A) -> Operator:
    return A if isinstance(A, Operator) else Operator(A)


def classify(A) -> OperatorClass:
    a = _as_operator(A).entries
    scale = max(1.0, float(np.abs(a).max()))
    tol = FLAG_TOL * scale
    symmetric = bool(np.abs(a - a.conj().T).max() <= tol)
    herm_part = (a + a.conj().T) / 2
    dissipative = bool(np.linalg.eigvalsh(herm_part).max() <= tol)
    psd = symmetric and bool(np.linalg.eigvalsh((a + a.conj().T) / 2).min() >= -tol)
    return OperatorClass(symmetric=symmetric, dissipative=dissipative, psd=psd)


def _roundoff(*values: float) -> float:
    return 64 * np.finfo(float).eps * sum(abs(v) for v in values)


def kato_check(A, f) -> InequalityReport:
    """Report for ||Af||^2 <= 2 ||f|| ||A^2 f|| (A dissipative, already scaled)."""
    A = _as_operator(A)
    if not classify(A).dissipative:
        raise NotDissipative("Kato's inequality needs Re(f, Af) <= 0")
    f = np.asarray(f, dtype=complex)
    af = A @ f
    lhs = float(np.vdot(af, af).real)
    base = float(np.linalg.norm(f) * np.linalg.norm(A @ af))
    return InequalityReport.build(lhs, base, 2.0, _roundoff(lhs, 2 * base))


def semigroup_check(A, f, M: float) -> InequalityReport:
    """Report for ||Af||^2 <= 4 M^2 ||f|| ||A^2 f||, M a bound on ||exp(tA)||."""
    A = _as_operator(A)
    f = np.asarray(f, dtype=complex)
    af = A @ f
    lhs = float(np.vdot(af, af).real)
    base = float(np.linalg.norm(f) * np.linalg.norm(A @ af))
    c = 4.0 * M * M
    return InequalityReport.build(lhs, base, c, _roundoff(lhs, c * base))


def symmetric_check(A, f, scalar: complex = 1.0) -> tuple[InequalityReport, bool]:
    """Report for ||Af||^2 <= ||f|| ||A^2 f|| plus the equality flag.

    ``scalar`` is a known c with c*A symmetric; the inequality itself is
    invariant under that rescaling.  The flag is raised when A^2 f lies in
    span{f} up to a relative residual of about 1.4e-4, which matches a ratio
    within 1e-8 of one.
    """
    A = _as_operator(A)
    if not classify(A.scaled(scalar)).symmetric:
        raise NotSymmetric("symmetric_check needs c*A symmetric")
    f = np.asarray(f, dtype=complex)
    af = A @ f
    a2f = A @ af
    lhs = float(np.vdot(af, af).real)
    nf = float(np.linalg.norm(f))
    n2 = float(np.linalg.norm(a2f))
    report = InequalityReport.build(lhs, nf * n2, 1.0, _roundoff(lhs, nf * n2))
    if n2 == 0.0 or nf == 0.0:
        return report, True
    proj = np.vdot(f, a2f) / (nf * nf) * f
    residual = float(np.linalg.norm(a2f - proj)) / n2
    return report, residual <= EQUALITY_RESIDUAL


def fractional_power(S, tau: float) -> Operator:
    """S**tau by the spectral theorem, eigenvalues clamped at zero."""
    S = _as_operator(S)
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if not classify(S).psd:
        raise NotPSD("fractional powers need a nonnegative self-adjoint S")
    h = (S.entries + S.entries.conj().T) / 2
    lam, v = np.linalg.eigh(h)
    lam = np.clip(lam, 0.0, None)
    return Operator((v * lam ** tau) @ v.conj().T)


def interpolation_check(S, f, tau: float) -> InequalityReport:
    """Report for ||S^tau f|| <= ||f||^(1-tau) ||S f||^tau."""
    S = _as_operator(S)
    f = np.asarray(f, dtype=complex)
    st = fractional_power(S, tau)
    lhs = float(np.linalg.norm(st @ f))
    base = float(np.linalg.norm(f) ** (1 - tau) * np.linalg.norm(S @ f) ** tau)
    return InequalityReport.build(lhs, base, 1.0, _roundoff(lhs, base) * 4)


def semigroup_bound(A, t_max: float, samples: int) -> float:
    """max over t in linspace(0, t_max, samples) of ||exp(tA)||_2."""
    a = _as_operator(A).entries
    ts = np.linspace(0.0, t_max, max(int(samples), 1))
    return float(max(np.linalg.norm(expm(t * a), 2) for t in ts))


def random_operator(cls: OperatorClass, dim: int, seed: int) -> Operator:
    """Seeded random operator of the requested class.

    psd: B*B; symmetric: (B + B*)/2; dissipative: iH - C*C (or -C*C if also
    symmetric); otherwise a plain complex Gaussian matrix.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    rng = np.random.default_rng(seed)

    def gauss():
        return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2 * dim)

    b = gauss()
    if cls.psd:
        a = b.conj().T @ b
    elif cls.symmetric and cls.dissipative:
        a = -(b.conj().T @ b)
    elif cls.symmetric:
        a = (b + b.conj().T) / 2
    elif cls.dissipative:
        c = gauss()
        h = (b + b.conj().T) / 2
        a = 1j * h - c.conj().T @ c
    else:
        a = b
    if cls.symmetric or cls.psd:
        a = (a + a.conj().T) / 2
    return Operator(a)


def random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def kato_equality_example(D: float = 1.0, seed: int = 0) -> tuple[Operator, np.ndarray]:
    """A dissipative 4x4 matrix A and a vector f with equality in Kato's inequality.

    On the two-dimensional span of e^{l1 x}, e^{l2 x} (l^2 + D l + D^2 = 0) the
    derivative is dissipative in L^2(0, inf), and f = e^{-Dx/2} sin(sqrt(3)Dx/2 - pi/3)
    attains the constant 2.  That block is written in an orthonormal basis,
    padded with a dissipative 2x2 block and rotated by a random unitary.
    """
    rng = np.random.default_rng(seed)
    lam = D * np.exp(np.array([2j, -2j]) * math.pi / 3)
    gram = -1.0 / (lam.conj()[:, None] + lam[None, :])
    L = np.linalg.cholesky(gram).conj().T  # gram = L* L
    block = L @ np.diag(lam) @ np.linalg.inv(L)
    coeffs = np.array([np.exp(-1j * math.pi / 3) / 2j, -np.exp(1j * math.pi / 3) / 2j])
    fb = L @ coeffs
    c = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    other = 1j * (h + h.conj().T) / 2 - c.conj().T @ c
    full = np.zeros((4, 4), dtype=complex)
    full[:2, :2] = block
    full[2:, 2:] = other
    q = random_unitary(4, rng)
    a = q @ full @ q.conj().T
    f = q @ np.concatenate([fb, np.zeros(2)])
    return Operator(a), f


# --------------------------------------------------------------------------
# sweeps

SWEEP_CHECKS = ("kato", "symmetric", "interpolation", "semigroup")
TAU_GRID = tuple(round(0.1 * j, 1) for j in range(1, 10))


def _sweep_one(args) -> List[dict]:
    check, seed, dim = args
    rng = np.random.default_rng([seed, dim, SWEEP_CHECKS.index(check)])
    f = random_vector(dim, rng)
    records = []
    if check == "kato":
        A = random_operator(OperatorClass(dissipative=True), dim, seed)
        rep = kato_check(A, f)
        records.append((rep, None))
    elif check == "symmetric":
        A = random_operator(OperatorClass(symmetric=True), dim, seed)
        rep, _ = symmetric_check(A, f)
        records.append((rep, None))
    elif check == "interpolation":
        S = random_operator(OperatorClass(psd=True), dim, seed)
        for tau in TAU_GRID:
            records.append((interpolation_check(S, f, tau), tau))
    elif check == "semigroup":
        A = random_operator(OperatorClass(), dim, seed)
        # shift so the spectral abscissa is negative; M then stays finite
        shift = np.linalg.eigvals(A.entries).real.max() + 0.5
        A = Operator(A.entries - shift * np.eye(dim))
        M = semigroup_bound(A, 10.0, 201)
        records.append((semigroup_check(A, f, M), None))
    else:
        raise ValueError(f"unknown check {check!r}")
    out = []
    for rep, tau in records:
        rec = {"seed": seed, "dim": dim, "check": check, "ratio": rep.ratio, "verdict": rep.verdict.value}
        if tau is not None:
            rec["tau"] = tau
        out.append(rec)
    return out


def sweep(check: str, count: int, seed: int = 0, dims: Sequence[int] = (2, 3, 4, 5, 6, 8),
          threads: Optional[int] = None) -> List[dict]:
    """Run ``count`` seeded random cases of one check; records in case order."""
    if check not in SWEEP_CHECKS:
        raise ValueError(f"unknown check {check!r}")
    jobs = [(check, seed + i, dims[i % len(dims)]) for i in range(count)]
    chunks = parallel_map(_sweep_one, jobs, threads)
    return [rec for chunk in chunks for rec in chunk]


def violations(records: Iterable[dict]) -> int:
    return sum(1 for r in records if r["verdict"] == "violated")
