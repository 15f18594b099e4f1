"""Pseudo-arclength continuation of equilibrium branches in one parameter.

A branch is traced by a tangent predictor and a Newton corrector constrained
orthogonally to the tangent, with an adaptive arclength step. At every
accepted point three test functions are evaluated:

    phi_fold   = det(J)                      zero at folds and branch points
    phi_branch = det([[J, f_p], [tangent]])  zero at branch points only
    phi_hopf   = a1*a2 - a0                  zero at Hopf points and neutral
                                             saddles (a1 > 0 vs a1 < 0)

Sign changes are bracketed and refined along the branch; Hopf records carry
the angular frequency sqrt(a1) and a first Lyapunov coefficient from the
projection (normal form) method, fold records the quadratic fold coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from .model import StabilityVerdict
from .numerics import (EigenSet, NewtonError, NewtonSettings, SingularMatrixError,
                       bisect_secant, eigenvalues, solve_linear)
from .systems import ParamSystem, get_param, set_param

__all__ = [
    "ContinuationSettings",
    "TestValues",
    "BranchPoint",
    "BifKind",
    "BifurcationRecord",
    "BranchTermination",
    "Branch",
    "ContinuationError",
    "continue_equilibria",
    "locate_codim1",
    "first_lyapunov",
    "fold_coefficient",
    "switch_branch_at_bp",
    "branch_to_csv",
]


class ContinuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContinuationSettings:
    initial_step: float = 1e-2
    min_step: float = 1e-6
    max_step: float = 1e-1
    grow_factor: float = 1.3
    grow_after: int = 4           # consecutive successes before growing
    max_points: int = 4000        # per direction
    foldback_cap: int = 40        # tangent parameter-sign flips before stopping
    simplex_guard: bool = True    # stop when a state component crosses below -boundary_tol
    boundary_tol: float = 1e-8
    newton: NewtonSettings = NewtonSettings(residual_tol=1e-11, step_tol=1e-13,
                                            max_iterations=12, damping=False)
    locate_param_tol: float = 1e-10
    marginal_tol: float = 1e-9


@dataclass(frozen=True)
class TestValues:
    phi_fold: float
    phi_branch: float
    phi_hopf: float
    a1: float


@dataclass(frozen=True)
class BranchPoint:
    state: np.ndarray
    param: float
    tangent: np.ndarray  # unit vector in (state, param) space
    eigen: EigenSet
    tests: TestValues
    stability: StabilityVerdict
    unstable_dim: int
    arclength: float

    @property
    def y(self) -> np.ndarray:
        return np.append(self.state, self.param)


class BifKind(Enum):
    BP = "BP"
    LP = "LP"
    HOPF_SUB = "H_sub"
    HOPF_SUPER = "H_super"
    NS = "NS"
    GH = "GH"
    BT = "BT"
    CP = "CP"
    LPC = "LPC"
    HOMOCLINIC_PROXY = "Hom"


@dataclass(frozen=True)
class BifurcationRecord:
    kind: BifKind
    state: np.ndarray
    params: dict  # parameter name -> value at the event
    coefficient: Optional[float] = None  # fold coefficient or ell_1
    omega: Optional[float] = None        # Hopf angular frequency
    arclength: float = 0.0
    degenerate: bool = False             # |ell_1| below the near-GH threshold

    def param(self, name: str) -> float:
        return self.params[name]


class BranchTermination(Enum):
    PARAM_BOUND = "parameter_bound"
    SIMPLEX_BOUNDARY = "simplex_boundary"
    FOLDBACK_CAP = "foldback_cap"
    STEP_FAILURE = "step_failure"
    MAX_POINTS = "max_points"


@dataclass
class Branch:
    points: list
    records: list
    termination: BranchTermination

    def record_kinds(self) -> list:
        return [r.kind for r in self.records]

    def records_of(self, *kinds: BifKind) -> list:
        return [r for r in self.records if r.kind in kinds]


# ---------------------------------------------------------------------------
# low-level pieces

def _char_coeffs(j: np.ndarray) -> tuple[float, float, float]:
    a2 = -float(np.trace(j))
    a1 = float(
        (j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])
        + (j[0, 0] * j[2, 2] - j[0, 2] * j[2, 0])
        + (j[1, 1] * j[2, 2] - j[1, 2] * j[2, 1])
    )
    a0 = -float(np.linalg.det(j))
    return a2, a1, a0


def _verdict_from_eigen(eig: EigenSet, tol: float) -> tuple[StabilityVerdict, int]:
    re = eig.values.real
    k = int(np.sum(re > tol))
    if np.any(np.abs(re) <= tol):
        return StabilityVerdict.MARGINAL, k
    return (StabilityVerdict.LAS if k == 0 else StabilityVerdict.UNSTABLE), k


class _Continuer:
    """Internal state of one continuation run (one system, one active parameter)."""

    def __init__(self, system: ParamSystem, p0, active: str,
                 settings: ContinuationSettings):
        self.sys = system
        self.p0 = p0
        self.active = active
        self.s = settings
        self.n = system.dim

    def params_at(self, value: float):
        return set_param(self.p0, self.active, value)

    def rhs_y(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.sys.rhs(self.params_at(y[-1]), y[:-1]), dtype=float)

    def ext_jac(self, y: np.ndarray) -> np.ndarray:
        """n x (n+1) Jacobian [J_x | f_param]."""
        p = self.params_at(y[-1])
        jx = self.sys.jacobian(p, y[:-1])
        fp = self.sys.param_derivative(p, y[:-1], self.active)
        return np.column_stack([jx, fp])

    def tangent(self, y: np.ndarray, guide: np.ndarray) -> np.ndarray:
        """Unit null vector of the extended Jacobian, oriented along ``guide``."""
        m = np.vstack([self.ext_jac(y), guide])
        rhs = np.zeros(self.n + 1)
        rhs[-1] = 1.0
        t = solve_linear(m, rhs)
        t /= np.linalg.norm(t)
        return t if t @ guide > 0 else -t

    def correct(self, y_pred: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Newton corrector in the hyperplane through y_pred orthogonal to t."""
        y = y_pred.copy()
        for _ in range(self.s.newton.max_iterations):
            f = self.rhs_y(y)
            g = np.append(f, t @ (y - y_pred))
            if np.max(np.abs(g)) < self.s.newton.residual_tol:
                return y
            m = np.vstack([self.ext_jac(y), t])
            y = y + solve_linear(m, -g)
        f = self.rhs_y(y)
        if np.max(np.abs(f)) < self.s.newton.residual_tol:
            return y
        raise NewtonError("max_iterations", self.s.newton.max_iterations,
                          float(np.max(np.abs(f))))

    def correct_fixed_param(self, x0: np.ndarray, value: float) -> np.ndarray:
        p = self.params_at(value)
        x = np.asarray(x0, dtype=float).copy()
        for _ in range(self.s.newton.max_iterations):
            f = np.asarray(self.sys.rhs(p, x), dtype=float)
            if np.max(np.abs(f)) < self.s.newton.residual_tol:
                return x
            x = x + solve_linear(self.sys.jacobian(p, x), -f)
        f = np.asarray(self.sys.rhs(p, x), dtype=float)
        if np.max(np.abs(f)) < self.s.newton.residual_tol:
            return x
        raise NewtonError("max_iterations", self.s.newton.max_iterations,
                          float(np.max(np.abs(f))))

    def make_point(self, y: np.ndarray, t: np.ndarray, arclength: float) -> BranchPoint:
        p = self.params_at(y[-1])
        jx = self.sys.jacobian(p, y[:-1])
        eig = eigenvalues(jx)
        phi_fold = float(np.linalg.det(jx))
        m = np.vstack([self.ext_jac(y), t])
        phi_branch = float(np.linalg.det(m))
        if self.n == 3:
            a2, a1, a0 = _char_coeffs(jx)
            phi_hopf = a1 * a2 - a0
        else:
            a1, phi_hopf = math.nan, math.nan
        verdict, udim = _verdict_from_eigen(eig, self.s.marginal_tol)
        return BranchPoint(
            state=y[:-1].copy(), param=float(y[-1]), tangent=t.copy(), eigen=eig,
            tests=TestValues(phi_fold, phi_branch, phi_hopf, a1),
            stability=verdict, unstable_dim=udim, arclength=arclength,
        )


def continue_equilibria(system: ParamSystem, p0, active: str, x0,
                        param_range: tuple[float, float],
                        settings: ContinuationSettings = ContinuationSettings(),
                        bidirectional: bool = True) -> Branch:
    """Trace the equilibrium branch through (x0, p0[active]) over a range.

    The starting point is Newton-refined at fixed parameter first; a point
    that will not converge raises ContinuationError. Both directions are
    traced by default and merged with signed arclength, so the returned
    points are ordered along the curve and records carry their arclength.
    Termination honors the parameter range, the positivity boundary of the
    state simplex, a fold-back cap, and the step-failure cascade.
    """
    lo, hi = param_range
    c = _Continuer(system, p0, active, settings)
    v0 = get_param(p0, active)
    if not (lo <= v0 <= hi):
        raise ContinuationError(f"start parameter {v0} outside range {param_range}")
    try:
        x0 = c.correct_fixed_param(np.asarray(x0, dtype=float), v0)
    except (NewtonError, SingularMatrixError) as err:
        raise ContinuationError("initial point is not an equilibrium") from err
    y0 = np.append(x0, v0)

    guide = np.zeros(c.n + 1)
    guide[-1] = 1.0
    try:
        t0 = c.tangent(y0, guide)
    except SingularMatrixError:
        guide = np.ones(c.n + 1) / math.sqrt(c.n + 1)
        t0 = c.tangent(y0, guide)

    def run(direction: float):
        pts = [c.make_point(y0, direction * t0, 0.0)]
        records: list[BifurcationRecord] = []
        h = settings.initial_step
        streak = 0
        foldbacks = 0
        term = BranchTermination.MAX_POINTS
        while len(pts) < settings.max_points:
            prev = pts[-1]
            y_prev = prev.y
            t = prev.tangent
            y_pred = y_prev + h * t
            try:
                y_new = c.correct(y_pred, t)
                t_new = c.tangent(y_new, t)
            except (NewtonError, SingularMatrixError, ValueError):
                h *= 0.5
                streak = 0
                if h < settings.min_step:
                    term = BranchTermination.STEP_FAILURE
                    break
                continue
            # reject steps that jumped implausibly far from the predictor
            if np.linalg.norm(y_new - y_pred) > 2.0 * h + 1e-12:
                h *= 0.5
                streak = 0
                if h < settings.min_step:
                    term = BranchTermination.STEP_FAILURE
                    break
                continue
            s_new = prev.arclength + direction * np.linalg.norm(y_new - y_prev)
            pt = c.make_point(y_new, t_new, s_new)
            records.extend(_scan_events(c, prev, pt, settings))
            pts.append(pt)
            if t @ t_new < 0 or (prev.tangent[-1] * t_new[-1] < 0):
                foldbacks += 1
                if foldbacks > settings.foldback_cap:
                    term = BranchTermination.FOLDBACK_CAP
                    break
            if not (lo <= y_new[-1] <= hi):
                bound = lo if y_new[-1] < lo else hi
                try:
                    xb = c.correct_fixed_param(y_new[:-1], bound)
                    yb = np.append(xb, bound)
                    sb = prev.arclength + direction * np.linalg.norm(yb - y_prev)
                    pts[-1] = c.make_point(yb, t_new, sb)
                except (NewtonError, SingularMatrixError):
                    pass
                term = BranchTermination.PARAM_BOUND
                break
            if settings.simplex_guard and np.min(y_new[:-1]) < -settings.boundary_tol:
                term = BranchTermination.SIMPLEX_BOUNDARY
                break
            streak += 1
            if streak >= settings.grow_after:
                h = min(h * settings.grow_factor, settings.max_step)
                streak = 0
        return pts, records, term

    pts_f, rec_f, term_f = run(+1.0)
    if bidirectional:
        pts_b, rec_b, term_b = run(-1.0)
    else:
        pts_b, rec_b, term_b = [], [], term_f
    # merge: backward points come first, reversed (negative arclength)
    points = list(reversed(pts_b[1:])) + pts_f
    pad = 1e-9 * max(1.0, abs(hi))
    records = sorted(
        (r for r in rec_b + rec_f if lo - pad <= r.params[active] <= hi + pad),
        key=lambda r: r.arclength,
    )
    term = term_f if not bidirectional else _merge_termination(term_f, term_b)
    return Branch(points=points, records=records, termination=term)


def _merge_termination(a: BranchTermination, b: BranchTermination) -> BranchTermination:
    order = [
        BranchTermination.STEP_FAILURE,
        BranchTermination.FOLDBACK_CAP,
        BranchTermination.SIMPLEX_BOUNDARY,
        BranchTermination.PARAM_BOUND,
        BranchTermination.MAX_POINTS,
    ]
    return a if order.index(a) <= order.index(b) else b


def _scan_events(c: _Continuer, a: BranchPoint, b: BranchPoint,
                 settings: ContinuationSettings) -> list[BifurcationRecord]:
    """Detect test-function sign changes between consecutive points."""
    records = []
    bp_rec = None
    if _sign_change(a.tests.phi_branch, b.tests.phi_branch):
        bp_rec = locate_codim1(c, a, b, "branch", settings)
        if bp_rec is not None:
            records.append(bp_rec)
    if _sign_change(a.tests.phi_fold, b.tests.phi_fold):
        rec = locate_codim1(c, a, b, "fold", settings)
        if rec is not None and not (
            bp_rec is not None
            and abs(rec.params[c.active] - bp_rec.params[c.active])
            < 1e-5 * max(1.0, abs(rec.params[c.active]))
        ):
            records.append(rec)
    if c.n == 3 and _sign_change(a.tests.phi_hopf, b.tests.phi_hopf):
        rec = locate_codim1(c, a, b, "hopf", settings)
        if rec is not None:
            records.append(rec)
    return records


def _sign_change(u: float, v: float) -> bool:
    return math.isfinite(u) and math.isfinite(v) and (u < 0.0) != (v < 0.0)


def locate_codim1(c, a: BranchPoint, b: BranchPoint, which: str,
                  settings: ContinuationSettings = ContinuationSettings()):
    """Refine a bracketed test-function sign change to a BifurcationRecord.

    ``which`` selects the test function ('fold' | 'branch' | 'hopf'). The
    event is refined along the branch chord (corrector re-applied at every
    trial) until the active parameter is resolved to ``locate_param_tol``.
    Hopf-vs-neutral-saddle discrimination uses the sign of a1 at the root.
    Returns None when the refined bracket loses the sign change (spurious
    detection near a tangency).
    """
    if isinstance(c, ParamSystem):
        raise TypeError("locate_codim1 is called with the internal continuer; "
                        "use continue_equilibria to produce records")
    if np.linalg.norm(b.y - a.y) == 0.0:
        return None

    # corrector anchors densify around the root, so each predictor works on a
    # short local chord and cannot slide onto a crossing branch
    anchors: dict[float, BranchPoint] = {0.0: a, 1.0: b}

    def point_at(s: float) -> BranchPoint:
        if s in anchors:
            return anchors[s]
        lo = max(k for k in anchors if k < s)
        hi = min(k for k in anchors if k > s)
        pa, pb = anchors[lo], anchors[hi]
        wgt = (s - lo) / (hi - lo)
        y_pred = (1.0 - wgt) * pa.y + wgt * pb.y
        chord = pb.y - pa.y
        tdir = chord / np.linalg.norm(chord)
        y = c.correct(y_pred, tdir)
        pt = c.make_point(y, tdir, (1.0 - wgt) * pa.arclength + wgt * pb.arclength)
        anchors[s] = pt
        return pt

    def test_of(pt: BranchPoint) -> float:
        return {"fold": pt.tests.phi_fold, "branch": pt.tests.phi_branch,
                "hopf": pt.tests.phi_hopf}[which]

    f_lo, f_hi = test_of(a), test_of(b)
    if not _sign_change(f_lo, f_hi):
        return None
    try:
        # one subdivision pass tightens the bracket before secant refinement
        s_lo, s_hi = 0.0, 1.0
        for k in range(1, 8):
            s_mid = k / 8.0
            f_mid = test_of(point_at(s_mid))
            if _sign_change(f_lo, f_mid):
                s_hi, f_hi = s_mid, f_mid
                break
            s_lo, f_lo = s_mid, f_mid
        span = abs(point_at(s_hi).param - point_at(s_lo).param)
        s_tol = settings.locate_param_tol * (s_hi - s_lo) / span if span > 0 else 1e-13
        s_root = bisect_secant(lambda s: test_of(point_at(s)), s_lo, s_hi,
                               f_lo=f_lo, f_hi=f_hi, xtol=max(s_tol, 1e-14))
        pt = point_at(s_root)
    except (NewtonError, SingularMatrixError, ValueError):
        return None

    params = {c.active: pt.param}
    if which == "branch":
        return BifurcationRecord(kind=BifKind.BP, state=pt.state, params=params,
                                 arclength=pt.arclength)
    if which == "fold":
        # det(J) vanishes at folds and at branch points; at a fold the branch
        # tangent has no parameter component, at a transcritical crossing it does
        if abs(pt.tangent[-1]) > 0.05:
            return BifurcationRecord(kind=BifKind.BP, state=pt.state, params=params,
                                     arclength=pt.arclength)
        coef = fold_coefficient(c.sys, c.params_at(pt.param), pt.state)
        return BifurcationRecord(kind=BifKind.LP, state=pt.state, params=params,
                                 coefficient=coef, arclength=pt.arclength)
    # hopf test root: genuine Hopf requires a positive a1
    a1 = pt.tests.a1
    if a1 <= 0.0:
        return BifurcationRecord(kind=BifKind.NS, state=pt.state, params=params,
                                 arclength=pt.arclength)
    omega = math.sqrt(a1)
    ell1 = first_lyapunov(c.sys, c.params_at(pt.param), pt.state, omega=omega)
    kind = BifKind.HOPF_SUB if ell1 > 0 else BifKind.HOPF_SUPER
    return BifurcationRecord(kind=kind, state=pt.state, params=params,
                             coefficient=ell1, omega=omega, arclength=pt.arclength,
                             degenerate=abs(ell1) < 1e-10)


# ---------------------------------------------------------------------------
# normal-form coefficients

def _bilinear(system: ParamSystem, p, x, u, v, h: float = 1e-5) -> np.ndarray:
    """B(u, v): second derivative of the RHS applied to real vectors u, v,
    obtained by central differences of the analytic Jacobian."""
    x = np.asarray(x, dtype=float)
    vn = np.linalg.norm(v)
    if vn == 0.0:
        return np.zeros_like(x)
    step = h * max(1.0, np.linalg.norm(x)) / vn
    jp = system.jacobian(p, x + step * v)
    jm = system.jacobian(p, x - step * v)
    return (jp - jm) @ np.asarray(u) / (2.0 * step)


def _bilinear_c(system, p, x, u, v, h: float = 1e-5) -> np.ndarray:
    br = lambda a, b: _bilinear(system, p, x, a, b, h)
    return (br(u.real, v.real) - br(u.imag, v.imag)
            + 1j * (br(u.real, v.imag) + br(u.imag, v.real)))


def _trilinear(system, p, x, u, v, w, h: float = 1e-3) -> np.ndarray:
    """C(u, v, w) for real vectors via second differences of the Jacobian."""
    x = np.asarray(x, dtype=float)
    jpp = system.jacobian(p, x + h * v + h * w)
    jpm = system.jacobian(p, x + h * v - h * w)
    jmp = system.jacobian(p, x - h * v + h * w)
    jmm = system.jacobian(p, x - h * v - h * w)
    return (jpp - jpm - jmp + jmm) @ np.asarray(u) / (4.0 * h * h)


def _trilinear_c(system, p, x, u, v, w, h: float = 1e-3) -> np.ndarray:
    out = np.zeros(len(x), dtype=complex)
    for cu, su in ((u.real, 1.0), (u.imag, 1j)):
        for cv, sv in ((v.real, 1.0), (v.imag, 1j)):
            for cw, sw in ((w.real, 1.0), (w.imag, 1j)):
                out = out + su * sv * sw * _trilinear(system, p, x, cu, cv, cw, h)
    return out


def first_lyapunov(system: ParamSystem, p, x_eq, omega: Optional[float] = None,
                   fd_step: float = 1e-5, imag_tol: float = 1e-6) -> float:
    """First Lyapunov coefficient at a Hopf point by the projection method.

    Follows the invariant normal-form expression

        l1 = Re[ <q_ad, C(q,q,conj q)> - 2 <q_ad, B(q, A^-1 B(q, conj q))>
                 + <q_ad, B(conj q, (2 i w I - A)^-1 B(q, q))> ] / (2 w)

    with A the Jacobian at the equilibrium, q its eigenvector for +i w,
    q_ad the adjoint eigenvector normalized to <q_ad, q> = 1, and B, C the
    second and third multilinear forms of the RHS evaluated by central
    differences of the analytic Jacobian. l1 < 0 marks a supercritical Hopf,
    l1 > 0 a subcritical one.

    Raises ValueError when no sufficiently pure imaginary pair is present.
    """
    x_eq = np.asarray(x_eq, dtype=float)
    a_mat = system.jacobian(p, x_eq)
    n = a_mat.shape[0]
    ev, vec = np.linalg.eig(a_mat)
    if omega is None:
        cand = [i for i in range(n) if ev[i].imag > 0.0]
        if not cand:
            raise ValueError("no complex eigenvalue pair at the alleged Hopf point")
        i_best = min(cand, key=lambda i: abs(ev[i].real))
        omega = float(ev[i_best].imag)
    k = int(np.argmin(np.abs(ev - 1j * omega)))
    if abs(ev[k].real) > imag_tol * max(1.0, abs(ev[k].imag)) or abs(ev[k].imag) < 1e-9:
        raise ValueError(
            f"eigenpair {ev[k]:.6g} is not sufficiently imaginary for a Hopf point"
        )
    omega = float(abs(ev[k].imag))
    q = vec[:, k]
    q = q / math.sqrt(abs(np.vdot(q, q)))
    evl, vecl = np.linalg.eig(a_mat.T)
    kl = int(np.argmin(np.abs(evl + 1j * omega)))
    q_ad = vecl[:, kl]
    q_ad = q_ad / np.conj(np.vdot(q_ad, q))  # <q_ad, q> = 1

    b_qq = _bilinear_c(system, p, x_eq, q, q, fd_step)
    b_qqb = _bilinear_c(system, p, x_eq, q, q.conj(), fd_step)
    s_vec = np.linalg.solve(a_mat, b_qqb.real) + 1j * np.linalg.solve(a_mat, b_qqb.imag)
    r_vec = np.linalg.solve(2j * omega * np.eye(n) - a_mat, b_qq)
    c_qqq = _trilinear_c(system, p, x_eq, q, q, q.conj())
    val = (
        np.vdot(q_ad, c_qqq)
        - 2.0 * np.vdot(q_ad, _bilinear_c(system, p, x_eq, q, s_vec, fd_step))
        + np.vdot(q_ad, _bilinear_c(system, p, x_eq, q.conj(), r_vec, fd_step))
    )
    return float(val.real / (2.0 * omega))


def fold_coefficient(system: ParamSystem, p, x_eq,
                     orient: Optional[np.ndarray] = None) -> float:
    """Quadratic normal-form coefficient <q_ad, B(q, q)>/2 at a fold.

    q and q_ad are the right/left null vectors of the Jacobian; q is oriented
    along ``orient`` when given (sign continuity along a traced fold curve),
    otherwise by making its largest-magnitude component positive.
    """
    x_eq = np.asarray(x_eq, dtype=float)
    a_mat = system.jacobian(p, x_eq)
    ev, vec = np.linalg.eig(a_mat)
    k = int(np.argmin(np.abs(ev)))
    q = np.real(vec[:, k])
    q /= np.linalg.norm(q)
    if orient is not None and q @ orient < 0:
        q = -q
    elif orient is None and q[int(np.argmax(np.abs(q)))] < 0:
        q = -q
    evl, vecl = np.linalg.eig(a_mat.T)
    kl = int(np.argmin(np.abs(evl)))
    q_ad = np.real(vecl[:, kl])
    denom = q_ad @ q
    if abs(denom) < 1e-12:
        raise ValueError("left/right null vectors nearly orthogonal; not a simple fold")
    q_ad = q_ad / denom
    return 0.5 * float(q_ad @ _bilinear(system, p, x_eq, q, q))


def switch_branch_at_bp(system: ParamSystem, p0, active: str,
                        bp: BifurcationRecord, offset: float = 1e-3,
                        settings: ContinuationSettings = ContinuationSettings()):
    """Jump from a transcritical branch point onto the crossing branch.

    The second tangent direction at a BP lies in the null space of the
    bordered extended Jacobian; here the parameter derivative vanishes on the
    trivial branch, so that direction is the state-space null vector of the
    state Jacobian. The switch steps off along it at parameter values just
    below and above the BP and Newton-corrects at fixed parameter; the first
    correction that lands on a genuinely different equilibrium wins.

    Returns (state, param_value) of a point on the emerging branch.
    """
    v_bp = bp.params[active]
    c = _Continuer(system, p0, active, settings)
    p_at = set_param(p0, active, v_bp)
    j = system.jacobian(p_at, bp.state)
    ev, vec = np.linalg.eig(j)
    k = int(np.argmin(np.abs(ev)))
    w = np.real(vec[:, k])
    w /= np.linalg.norm(w)
    # corrector constrained to w.(x - x_bp) = delta: the incoming branch has no
    # component along w there, so only the crossing branch satisfies the plane
    for delta in (offset, -offset, 3 * offset, -3 * offset):
        y = np.append(bp.state + delta * w, v_bp)
        ok = True
        for _ in range(settings.newton.max_iterations):
            g = np.append(c.rhs_y(y), w @ (y[:-1] - bp.state) - delta)
            if np.max(np.abs(g)) < settings.newton.residual_tol:
                break
            m = np.vstack([c.ext_jac(y), np.append(w, 0.0)])
            try:
                y = y + solve_linear(m, -g)
            except SingularMatrixError:
                ok = False
                break
        else:
            ok = False
        if ok and np.max(np.abs(c.rhs_y(y))) < settings.newton.residual_tol:
            return y[:-1], float(y[-1])
    raise ContinuationError("branch switching found no transverse branch at the BP")


def branch_to_csv(branch: Branch, p0, active: str, path) -> None:
    """Write a branch in the CSV layout: arclength, beta, rho, S, I, R,
    Re/Im of the three leading eigenvalues, stability, event flag."""
    import csv

    recs_by_s = {round(r.arclength, 9): r.kind.value for r in branch.records}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(
            ["arclength", "beta", "rho", "S", "I", "R",
             "re_lambda1", "re_lambda2", "re_lambda3",
             "im_lambda1", "im_lambda2", "im_lambda3", "stability", "event"]
        )
        for pt in branch.points:
            p_here = set_param(p0, active, pt.param)
            vals = [pt.arclength, get_param(p_here, "beta"), get_param(p_here, "rho"),
                    *pt.state]
            eig = list(pt.eigen.values) + [complex(math.nan, math.nan)] * (3 - len(pt.eigen))
            vals += [e.real for e in eig[:3]] + [e.imag for e in eig[:3]]
            row = [f"{v:.17g}" for v in vals]
            row.append(pt.stability.value)
            row.append(recs_by_s.get(round(pt.arclength, 9), ""))
            wr.writerow(row)
