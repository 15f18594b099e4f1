"""Dense small-matrix linear algebra, eigenvalues, Newton solvers, FD Jacobians.

Sizes here are tiny (n <= 16: the 3-state model, its variational systems and
bordered continuation systems), so everything is plain dense numpy. The
eigenvalue path delegates to LAPACK's shifted-QR-on-Hessenberg driver via
``numpy.linalg.eigvals`` and post-processes the spectrum into a canonical
order with enforced conjugate pairing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SingularMatrixError",
    "NewtonError",
    "EigenSet",
    "NewtonSettings",
    "solve_linear",
    "eigenvalues",
    "newton_solve",
    "fd_jacobian",
    "bisect_secant",
]

MAX_DIM = 16
PIVOT_TOL = 1e-14


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when elimination meets a pivot below tolerance.

    ``pivot_index`` is the elimination column at which the factorization
    broke down.
    """

    def __init__(self, pivot_index: int, pivot: float):
        self.pivot_index = pivot_index
        self.pivot = pivot
        super().__init__(
            f"singular matrix: pivot {pivot:.3e} at column {pivot_index} below {PIVOT_TOL:.0e}"
        )


class NewtonError(RuntimeError):
    """Newton iteration failure; ``reason`` is one of 'diverged',
    'max_iterations', 'singular'."""

    def __init__(self, reason: str, iterations: int, residual: float):
        self.reason = reason
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"newton_solve {reason} after {iterations} iterations "
                         f"(residual {residual:.3e})")


@dataclass(frozen=True)
class EigenSet:
    """Eigenvalues sorted by descending real part, conjugation enforced.

    For real input matrices the spectrum is closed under conjugation; tiny
    asymmetric imaginary parts from rounding are symmetrized and lone
    near-real eigenvalues are snapped to the real axis.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def max_real(self) -> float:
        return float(self.values[0].real)

    def count_unstable(self, tol: float = 0.0) -> int:
        return int(np.sum(self.values.real > tol))


@dataclass(frozen=True)
class NewtonSettings:
    residual_tol: float = 1e-12
    step_tol: float = 1e-12
    max_iterations: int = 50
    damping: bool = True  # halving line search after a residual increase

    def __post_init__(self):
        if self.residual_tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def solve_linear(a, b) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting.

    Raises `SingularMatrixError` (carrying the failing column) when a pivot
    falls below tolerance relative to the matrix scale.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if b.shape[0] != n:
        raise ValueError("dimension mismatch between matrix and right-hand side")
    scale = max(np.abs(a).max(), 1.0)
    x = b.copy()
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) <= PIVOT_TOL * scale:
            raise SingularMatrixError(col, float(a[piv, col]))
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            x[[col, piv]] = x[[piv, col]]
        inv = 1.0 / a[col, col]
        for row in range(col + 1, n):
            m = a[row, col] * inv
            if m != 0.0:
                a[row, col + 1:] -= m * a[col, col + 1:]
                x[row] -= m * x[col]
    for col in range(n - 1, -1, -1):
        x[col] = (x[col] - a[col, col + 1:] @ x[col + 1:]) / a[col, col]
    return x


def eigenvalues(a) -> EigenSet:
    """Spectrum of a real square matrix (n <= 16), canonically ordered.

    Values come from the LAPACK shifted-QR iteration on the Hessenberg
    reduction. Conjugate pairs are symmetrized: for every eigenvalue with
    nonzero imaginary part the conjugate partner is averaged in, and
    imaginary parts below rounding scale collapse to the real axis.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds supported maximum {MAX_DIM}")
    vals = np.linalg.eigvals(a)
    scale = max(float(np.abs(vals).max()), 1e-300)
    snap = 1e4 * np.finfo(float).eps * scale
    vals = np.where(np.abs(vals.imag) <= snap, vals.real + 0.0j, vals)
    # pair remaining complex values with their conjugates and average
    used = np.zeros(n, dtype=bool)
    out = []
    for i in range(n):
        if used[i]:
            continue
        v = vals[i]
        if v.imag == 0.0:
            out.append(v)
            used[i] = True
            continue
        best, bestdist = -1, np.inf
        for j in range(n):
            if j == i or used[j] or vals[j].imag == 0.0:
                continue
            d = abs(vals[j] - np.conj(v))
            if d < bestdist:
                best, bestdist = j, d
        if best >= 0:
            mean = 0.5 * (v + np.conj(vals[best]))
            out.extend([mean, np.conj(mean)])
            used[i] = used[best] = True
        else:  # no partner (should not happen for real input)
            out.append(v)
            used[i] = True
    arr = np.array(out)
    order = np.lexsort((-np.abs(arr.imag), arr.imag < 0, -arr.real))
    return EigenSet(arr[order])


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x,
                base_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with per-coordinate step
    h_i = max(base_step, base_step * |x_i|)."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise ValueError("function value is not finite at the base point")
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = max(base_step, base_step * abs(x[i]))
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        fp = np.asarray(f(xp), dtype=float)
        fm = np.asarray(f(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError(f"function value is not finite near coordinate {i}")
        jac[:, i] = (fp - fm) / (2.0 * h)
    return jac


def newton_solve(f: Callable[[np.ndarray], np.ndarray], x0,
                 jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 settings: NewtonSettings = NewtonSettings()) -> np.ndarray:
    """Newton iteration for F(x) = 0 with optional halving line search.

    ``jac`` defaults to a central-difference Jacobian. Raises `NewtonError`
    on a singular Jacobian, on the iteration cap, or when the residual grows
    over five consecutive steps (divergence).
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    jac_fn = jac if jac is not None else (lambda v: fd_jacobian(f, v))
    res = np.atleast_1d(np.asarray(f(x), dtype=float))
    rnorm = float(np.max(np.abs(res)))
    growth_run = 0
    for it in range(settings.max_iterations):
        if rnorm < settings.residual_tol:
            return x
        try:
            step = solve_linear(jac_fn(x), -res)
        except SingularMatrixError as err:
            raise NewtonError("singular", it, rnorm) from err
        lam = 1.0
        for _ in range(30):
            x_new = x + lam * step
            res_new = np.atleast_1d(np.asarray(f(x_new), dtype=float))
            rnorm_new = float(np.max(np.abs(res_new)))
            if np.isfinite(rnorm_new) and (rnorm_new < rnorm or not settings.damping):
                break
            lam *= 0.5
        growth_run = growth_run + 1 if rnorm_new >= rnorm else 0
        if growth_run >= 5:
            raise NewtonError("diverged", it + 1, rnorm_new)
        x, res, rnorm = x_new, res_new, rnorm_new
        if float(np.max(np.abs(lam * step))) < settings.step_tol and rnorm < np.sqrt(settings.residual_tol):
            return x
    if rnorm < settings.residual_tol:
        return x
    raise NewtonError("max_iterations", settings.max_iterations, rnorm)


def bisect_secant(f: Callable[[float], float], lo: float, hi: float,
                  f_lo: Optional[float] = None, f_hi: Optional[float] = None,
                  xtol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of a scalar function on a sign-change bracket.

    Secant steps accelerated by a bisection safeguard; the bracket is
    maintained throughout, so convergence is guaranteed for continuous f.
    """
    a, b = float(lo), float(hi)
    fa = float(f(a)) if f_lo is None else float(f_lo)
    fb = float(f(b)) if f_hi is None else float(f_hi)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise ValueError(f"no sign change on bracket [{lo}, {hi}]")
    for _ in range(max_iter):
        if abs(b - a) <= xtol * max(1.0, abs(a), abs(b)):
            break
        if fb != fa:
            m = b - fb * (b - a) / (fb - fa)
        else:
            m = 0.5 * (a + b)
        # keep the trial strictly interior, else bisect
        if not (min(a, b) < m < max(a, b)):
            m = 0.5 * (a + b)
        fm = float(f(m))
        if fm == 0.0:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)
