"""Two-parameter continuation of fold, Hopf and transcritical loci in (beta, rho).

Fold and Hopf curves are traced as pseudo-arclength continuations of the
augmented systems

    fold:  { rhs(x; beta, rho) = 0,  a0(x; beta, rho) = 0 }
    hopf:  { rhs(x; beta, rho) = 0,  a1*a2 - a0 = 0,  a1 > 0 }

formulated through the characteristic-polynomial coefficients of the 3x3
state Jacobian. Along the curves the codimension-2 scalars are monitored:
the quadratic fold coefficient (zero at a cusp CP), a1 (zero at a
Bogdanov-Takens point BT, where the Hopf frequency sqrt(a1) vanishes), and
the first Lyapunov coefficient (zero at a generalized Hopf point GH). The
transcritical locus beta = alpha/rho is analytic and merely sampled.

Saddle-homoclinic and cycle-fold (LPC) loci are produced by the cycles
module; this module only defines their CurveSegment representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .continuation import (BifKind, BifurcationRecord, ContinuationError,
                           _char_coeffs, first_lyapunov, fold_coefficient)
from .numerics import NewtonError, SingularMatrixError, bisect_secant, solve_linear
from .systems import ParamSystem, get_param, set_param

__all__ = [
    "CurveKind",
    "Codim2Settings",
    "CurvePoint",
    "CurveSegment",
    "fold_curve",
    "hopf_curve",
    "transcritical_curve",
    "detect_codim2",
    "curve_to_csv",
]


class CurveKind(Enum):
    FOLD = "fold"
    HOPF = "hopf"
    TRANSCRITICAL = "transcritical"
    SADDLE_HOMOCLINIC = "saddle_homoclinic"
    LPC_CURVE = "lpc"


@dataclass(frozen=True)
class Codim2Settings:
    initial_step: float = 2e-2
    min_step: float = 1e-8
    max_step: float = 8e-2
    grow_factor: float = 1.3
    grow_after: int = 4
    max_points: int = 3000
    residual_tol: float = 1e-11
    max_newton: int = 12
    record_arclength_tol: float = 1e-8
    ell1_threshold: float = 1e-8  # |ell1| at a refined GH must drop below this


@dataclass(frozen=True)
class CurvePoint:
    beta: float
    rho: float
    state: np.ndarray
    arclength: float
    aux: dict

    @property
    def y(self) -> np.ndarray:
        return np.append(self.state, [self.beta, self.rho])


@dataclass
class CurveSegment:
    kind: CurveKind
    points: list
    records: list = field(default_factory=list)

    def betas(self) -> np.ndarray:
        return np.array([pt.beta for pt in self.points])

    def rhos(self) -> np.ndarray:
        return np.array([pt.rho for pt in self.points])

    def crossings_at_rho(self, rho: float) -> list:
        """Points where the polyline crosses a horizontal rho-slice
        (linear interpolation; use `refine_crossing` for solver accuracy)."""
        out = []
        for a, b in zip(self.points[:-1], self.points[1:]):
            da, db = a.rho - rho, b.rho - rho
            if da == 0.0 and db == 0.0:
                continue
            if (da <= 0.0 < db) or (db <= 0.0 < da) or da == 0.0:
                w = 0.0 if da == 0.0 else da / (da - db)
                beta = a.beta + w * (b.beta - a.beta)
                aux = {}
                for k in a.aux:
                    va, vb = a.aux.get(k), b.aux.get(k)
                    if isinstance(va, float) and isinstance(vb, float):
                        aux[k] = va + w * (vb - va)
                out.append(CurvePoint(beta, rho, a.state + w * (b.state - a.state),
                                      a.arclength + w * (b.arclength - a.arclength), aux))
        return out

    def min_distance_to(self, beta: float, rho: float) -> float:
        d = np.hypot(self.betas() - beta, self.rhos() - rho)
        return float(d.min()) if len(d) else math.inf


# ---------------------------------------------------------------------------
# defining functions

def _psi_fold(system: ParamSystem, p, x) -> float:
    return _char_coeffs(system.jacobian(p, x))[2]  # a0


def _psi_hopf(system: ParamSystem, p, x) -> float:
    a2, a1, a0 = _char_coeffs(system.jacobian(p, x))
    return a1 * a2 - a0


class _CurveTracer:
    """Pseudo-arclength continuation of {rhs = 0, psi = 0} in (x, beta, rho)."""

    def __init__(self, system: ParamSystem, p_fixed, psi: Callable,
                 settings: Codim2Settings):
        self.sys = system
        self.p0 = p_fixed
        self.psi = psi
        self.s = settings
        self.n = system.dim

    def pars(self, beta: float, rho: float):
        return set_param(set_param(self.p0, "beta", beta), "rho", rho)

    def residual(self, y: np.ndarray) -> np.ndarray:
        p = self.pars(y[-2], y[-1])
        x = y[:-2]
        return np.append(self.sys.rhs(p, x), self.psi(self.sys, p, x))

    def ext_jac(self, y: np.ndarray) -> np.ndarray:
        """(n+1) x (n+2) Jacobian of the defining system."""
        p = self.pars(y[-2], y[-1])
        x = y[:-2]
        jx = self.sys.jacobian(p, x)
        fb = self.sys.param_derivative(p, x, "beta")
        fr = self.sys.param_derivative(p, x, "rho")
        top = np.column_stack([jx, fb, fr])
        # psi row by central differences over all n+2 coordinates
        row = np.empty(self.n + 2)
        for i in range(self.n + 2):
            h = 1e-7 * max(1.0, abs(y[i]))
            yp = y.copy(); yp[i] += h
            ym = y.copy(); ym[i] -= h
            pp = self.pars(yp[-2], yp[-1])
            pm = self.pars(ym[-2], ym[-1])
            row[i] = (self.psi(self.sys, pp, yp[:-2]) - self.psi(self.sys, pm, ym[:-2])) / (2 * h)
        return np.vstack([top, row])

    def tangent(self, y: np.ndarray, guide: np.ndarray) -> np.ndarray:
        m = np.vstack([self.ext_jac(y), guide])
        rhs = np.zeros(self.n + 2)
        rhs[-1] = 1.0
        t = solve_linear(m, rhs)
        t /= np.linalg.norm(t)
        return t if t @ guide > 0 else -t

    def correct(self, y_pred: np.ndarray, t: np.ndarray) -> np.ndarray:
        y = y_pred.copy()
        for _ in range(self.s.max_newton):
            g = np.append(self.residual(y), t @ (y - y_pred))
            if np.max(np.abs(g)) < self.s.residual_tol:
                return y
            m = np.vstack([self.ext_jac(y), t])
            y = y + solve_linear(m, -g)
        if np.max(np.abs(self.residual(y))) < self.s.residual_tol:
            return y
        raise NewtonError("max_iterations", self.s.max_newton,
                          float(np.max(np.abs(self.residual(y)))))

    def correct_fixed(self, y0: np.ndarray, index: int, value: float) -> np.ndarray:
        """Solve the defining system with coordinate ``index`` pinned."""
        y = y0.copy()
        y[index] = value
        free = [i for i in range(self.n + 2) if i != index]
        for _ in range(self.s.max_newton):
            g = self.residual(y)
            if np.max(np.abs(g)) < self.s.residual_tol:
                return y
            m = self.ext_jac(y)[:, free]
            step = solve_linear(m, -g)
            y[free] += step
        if np.max(np.abs(self.residual(y))) < self.s.residual_tol:
            return y
        raise NewtonError("max_iterations", self.s.max_newton,
                          float(np.max(np.abs(self.residual(y)))))


def _trace(tracer: _CurveTracer, y0: np.ndarray, box, settings: Codim2Settings,
           aux_fn: Callable, stop_fn: Optional[Callable] = None) -> list:
    """Trace both directions from y0; returns ordered CurvePoints.

    ``aux_fn(tracer, y, prev_aux)`` computes monitored scalars per point;
    ``stop_fn(aux)`` may end a direction (used for the a1 <= 0 Hopf cutoff).
    """
    (b_lo, b_hi), (r_lo, r_hi) = box
    guide = np.zeros(tracer.n + 2)
    guide[-1] = 1.0
    try:
        t0 = tracer.tangent(y0, guide)
    except SingularMatrixError:
        guide = np.ones(tracer.n + 2) / math.sqrt(tracer.n + 2)
        t0 = tracer.tangent(y0, guide)
    aux0 = aux_fn(tracer, y0, None)

    def in_box(y) -> bool:
        return b_lo <= y[-2] <= b_hi and r_lo <= y[-1] <= r_hi

    def run(direction: float) -> list:
        pts = [CurvePoint(float(y0[-2]), float(y0[-1]), y0[:-2].copy(), 0.0, aux0)]
        t = direction * t0
        h = settings.initial_step
        streak = 0
        y = y0.copy()
        while len(pts) < settings.max_points:
            y_pred = y + h * t
            try:
                y_new = tracer.correct(y_pred, t)
                t_new = tracer.tangent(y_new, t)
            except (NewtonError, SingularMatrixError, ValueError):
                h *= 0.5
                streak = 0
                if h < settings.min_step:
                    break
                continue
            s_new = pts[-1].arclength + direction * float(np.linalg.norm(y_new - y))
            aux = aux_fn(tracer, y_new, pts[-1].aux)
            pts.append(CurvePoint(float(y_new[-2]), float(y_new[-1]),
                                  y_new[:-2].copy(), s_new, aux))
            if not in_box(y_new):
                # land exactly on the box edge when possible
                for idx, lo, hi in ((tracer.n, b_lo, b_hi), (tracer.n + 1, r_lo, r_hi)):
                    v = y_new[idx]
                    bound = lo if v < lo else hi if v > hi else None
                    if bound is None:
                        continue
                    try:
                        y_edge = tracer.correct_fixed(y_new, idx, bound)
                        s_edge = pts[-2].arclength + direction * float(np.linalg.norm(y_edge - y))
                        pts[-1] = CurvePoint(float(y_edge[-2]), float(y_edge[-1]),
                                             y_edge[:-2].copy(), s_edge,
                                             aux_fn(tracer, y_edge, pts[-2].aux))
                    except (NewtonError, SingularMatrixError, ValueError):
                        pass
                    break
                break
            if stop_fn is not None and stop_fn(aux):
                break
            # closed-loop detection: returned near the start after some travel
            if len(pts) > 12 and float(np.linalg.norm(y_new - y0)) < 0.5 * h:
                break
            y, t = y_new, t_new
            streak += 1
            if streak >= settings.grow_after:
                h = min(h * settings.grow_factor, settings.max_step)
                streak = 0
        return pts

    fwd = run(+1.0)
    bwd = run(-1.0)
    return list(reversed(bwd[1:])) + fwd


def _seed_from_record(system: ParamSystem, p_fixed, start: BifurcationRecord,
                      tracer: _CurveTracer) -> np.ndarray:
    beta = start.params.get("beta", get_param(p_fixed, "beta"))
    rho = start.params.get("rho", get_param(p_fixed, "rho"))
    y = np.append(np.asarray(start.state, dtype=float), [beta, rho])
    # polish the seed onto the defining system at fixed rho
    return tracer.correct_fixed(y, tracer.n + 1, rho)


def fold_curve(system: ParamSystem, p_fixed, start: BifurcationRecord, box,
               settings: Codim2Settings = Codim2Settings()) -> CurveSegment:
    """Continue the fold locus {rhs = 0, a0 = 0} through a located LP.

    Along the curve the quadratic fold coefficient is kept sign-continuous
    (the null eigenvector is oriented against the previous sample), so its
    zero marks the cusp CP; a1 is monitored for the Bogdanov-Takens point.
    """
    tracer = _CurveTracer(system, p_fixed, _psi_fold, settings)
    y0 = _seed_from_record(system, p_fixed, start, tracer)

    def aux(tr, y, prev):
        p = tr.pars(y[-2], y[-1])
        a2, a1, a0 = _char_coeffs(system.jacobian(p, y[:-2]))
        orient = prev.get("_fold_q") if prev else None
        q = _null_vector(system.jacobian(p, y[:-2]), orient)
        coef = fold_coefficient(system, p, y[:-2], orient=q)
        return {"a0": a0, "a1": a1, "a2": a2, "fold_coeff": coef, "_fold_q": q}

    pts = _trace(tracer, y0, box, settings, aux)
    seg = CurveSegment(CurveKind.FOLD, pts)
    seg.records = detect_codim2(seg, system=system, p_fixed=p_fixed, settings=settings)
    return seg


def _null_vector(j: np.ndarray, orient: Optional[np.ndarray]) -> np.ndarray:
    ev, vec = np.linalg.eig(j)
    q = np.real(vec[:, int(np.argmin(np.abs(ev)))])
    q /= np.linalg.norm(q)
    if orient is not None:
        if q @ orient < 0:
            q = -q
    elif q[int(np.argmax(np.abs(q)))] < 0:
        q = -q
    return q


def hopf_curve(system: ParamSystem, p_fixed, start: BifurcationRecord, box,
               settings: Codim2Settings = Codim2Settings()) -> CurveSegment:
    """Continue the Hopf locus {rhs = 0, a1 a2 = a0, a1 > 0} through a Hopf record.

    The first Lyapunov coefficient is recomputed at every accepted sample, so
    the GH sign change is located with full fidelity. A direction stops when
    a1 falls to zero: that end approaches the Bogdanov-Takens point, where
    the curve meets the fold locus tangentially. Neutral-saddle portions
    (a1 < 0) are never entered.
    """
    tracer = _CurveTracer(system, p_fixed, _psi_hopf, settings)
    y0 = _seed_from_record(system, p_fixed, start, tracer)

    def aux(tr, y, prev):
        p = tr.pars(y[-2], y[-1])
        a2, a1, a0 = _char_coeffs(system.jacobian(p, y[:-2]))
        entry = {"a0": a0, "a1": a1, "a2": a2,
                 "omega": math.sqrt(a1) if a1 > 0 else 0.0}
        if a1 > 0:
            try:
                entry["ell1"] = first_lyapunov(system, p, y[:-2],
                                               omega=math.sqrt(a1), imag_tol=1e-4)
            except ValueError:
                entry["ell1"] = math.nan
        else:
            entry["ell1"] = math.nan
        return entry

    pts = _trace(tracer, y0, box, settings, aux, stop_fn=lambda a: a["a1"] <= 0.0)
    seg = CurveSegment(CurveKind.HOPF, pts)
    # an end that ran into a1 <= 0 stopped at the Bogdanov-Takens point; polish
    # it onto {rhs = 0, a1 a2 = a0, a1 = 0} so the tangency to the fold curve
    # is represented exactly
    for idx in (0, -1):
        if len(seg.points) > 1 and seg.points[idx].aux["a1"] < 1e-3:
            y_bt = _polish_bt(system, tracer, seg.points[idx].y, settings)
            if y_bt is not None:
                old = seg.points[idx]
                seg.points[idx] = CurvePoint(float(y_bt[-2]), float(y_bt[-1]),
                                             y_bt[:-2].copy(), old.arclength,
                                             aux(tracer, y_bt, old.aux))
    seg.records = detect_codim2(seg, system=system, p_fixed=p_fixed, settings=settings)
    return seg


def _polish_bt(system: ParamSystem, tracer: _CurveTracer, y0: np.ndarray,
               settings: Codim2Settings):
    """Newton solve of {rhs = 0, a1*a2 - a0 = 0, a1 = 0} in (x, beta, rho)."""

    def full_res(y):
        p = tracer.pars(y[-2], y[-1])
        a2, a1, a0 = _char_coeffs(system.jacobian(p, y[:-2]))
        return np.append(system.rhs(p, y[:-2]), [a1 * a2 - a0, a1])

    y = y0.copy()
    for _ in range(settings.max_newton * 2):
        g = full_res(y)
        if np.max(np.abs(g)) < settings.residual_tol:
            return y
        jac = np.empty((tracer.n + 2, tracer.n + 2))
        for i in range(tracer.n + 2):
            h = 1e-7 * max(1.0, abs(y[i]))
            yp = y.copy(); yp[i] += h
            ym = y.copy(); ym[i] -= h
            jac[:, i] = (full_res(yp) - full_res(ym)) / (2 * h)
        try:
            y = y + solve_linear(jac, -g)
        except SingularMatrixError:
            return None
    return y if np.max(np.abs(full_res(y))) < settings.residual_tol else None


def transcritical_curve(p_fixed, box, n_samples: int = 400) -> CurveSegment:
    """The analytic transcritical locus beta = alpha/rho sampled over the box.

    The cusp sits at rho = rho_star, splitting the curve into its forward
    (rho > rho_star) and backward (rho < rho_star) parts; each sample's aux
    carries that tag. The CP record itself is attached by the fold-curve pass.
    """
    from .model import derived_scalars

    alpha = get_param(p_fixed, "alpha")
    (b_lo, b_hi), (r_lo, r_hi) = box
    r_min = max(r_lo, alpha / b_hi if b_hi > 0 else r_lo, 1e-9)
    r_max = min(r_hi, 1.0 - 1e-9)
    if not r_max > r_min:
        return CurveSegment(CurveKind.TRANSCRITICAL, [])
    rho_star = derived_scalars(set_param(set_param(p_fixed, "rho", 0.5 * (r_min + r_max)),
                                         "beta", 1.0)).rho_star
    rhos = np.linspace(r_min, r_max, n_samples)
    if r_min < rho_star < r_max:
        rhos = np.sort(np.append(rhos, rho_star))
    pts = []
    s = 0.0
    prev = None
    for rho in rhos:
        beta = alpha / rho
        if not (b_lo <= beta <= b_hi):
            continue
        if prev is not None:
            s += math.hypot(beta - prev[0], rho - prev[1])
        pts.append(CurvePoint(float(beta), float(rho), np.array([1.0, 0.0, 0.0]), s,
                              {"direction": "forward" if rho > rho_star else "backward",
                               "rho_star": float(rho_star)}))
        prev = (beta, rho)
    return CurveSegment(CurveKind.TRANSCRITICAL, pts)


_DETECT_SCALARS = {
    CurveKind.FOLD: (("fold_coeff", BifKind.CP), ("a1", BifKind.BT)),
    CurveKind.HOPF: (("ell1", BifKind.GH),),
}


def detect_codim2(segment: CurveSegment, system: Optional[ParamSystem] = None,
                  p_fixed=None, settings: Codim2Settings = Codim2Settings()) -> list:
    """Locate CP/BT/GH records on a traced segment by sign-change bracketing.

    Scans only the scalars owned by the segment kind (fold: fold coefficient
    and a1; hopf: ell1), then refines each bracket along the defining system
    to the arclength tolerance. Analytic transcritical segments yield nothing.
    """
    rules = _DETECT_SCALARS.get(segment.kind, ())
    if not rules or len(segment.points) < 3 or system is None:
        return []
    psi = _psi_fold if segment.kind is CurveKind.FOLD else _psi_hopf
    tracer = _CurveTracer(system, p_fixed, psi, settings)
    records = []
    for scalar, kind in rules:
        for a, b in zip(segment.points[:-1], segment.points[1:]):
            va, vb = a.aux.get(scalar, math.nan), b.aux.get(scalar, math.nan)
            if not (math.isfinite(va) and math.isfinite(vb)) or (va < 0) == (vb < 0):
                continue
            rec = _refine_codim2(tracer, system, a, b, scalar, kind, settings)
            if rec is None:
                continue
            # a sign change across a pole (e.g. the fold coefficient at BT)
            # refines to a large value, a genuine zero to a tiny one
            if abs(rec.coefficient) >= 0.5 * min(abs(va), abs(vb)):
                continue
            records.append(rec)
    return sorted(records, key=lambda r: r.arclength)


def _refine_codim2(tracer: _CurveTracer, system: ParamSystem, a: CurvePoint,
                   b: CurvePoint, scalar: str, kind: BifKind,
                   settings: Codim2Settings) -> Optional[BifurcationRecord]:
    anchors = {0.0: a, 1.0: b}

    def scalar_at(pt: CurvePoint) -> float:
        p = tracer.pars(pt.beta, pt.rho)
        if scalar == "a1":
            return _char_coeffs(system.jacobian(p, pt.state))[1]
        if scalar == "fold_coeff":
            orient = a.aux.get("_fold_q")
            return fold_coefficient(system, p, pt.state, orient=orient)
        return first_lyapunov(system, p, pt.state, imag_tol=1e-3)

    def point_at(s: float) -> CurvePoint:
        if s in anchors:
            return anchors[s]
        lo = max(k for k in anchors if k < s)
        hi = min(k for k in anchors if k > s)
        pa, pb = anchors[lo], anchors[hi]
        w = (s - lo) / (hi - lo)
        y_pred = (1 - w) * pa.y + w * pb.y
        chord = pb.y - pa.y
        t = chord / np.linalg.norm(chord)
        y = tracer.correct(y_pred, t)
        pt = CurvePoint(float(y[-2]), float(y[-1]), y[:-2].copy(),
                        (1 - w) * pa.arclength + w * pb.arclength, a.aux)
        anchors[s] = pt
        return pt

    try:
        span = abs(b.arclength - a.arclength)
        # BT and GH carry residual gates (|a1|, |ell1|) well below the generic
        # arclength tolerance, so refine them harder
        arc_tol = settings.record_arclength_tol if kind is BifKind.CP else 1e-11
        s_tol = arc_tol / span if span > 0 else 1e-12
        s_root = bisect_secant(lambda s: scalar_at(point_at(s)), 0.0, 1.0,
                               xtol=max(s_tol, 1e-14))
        pt = point_at(s_root)
    except (NewtonError, SingularMatrixError, ValueError):
        return None
    p = tracer.pars(pt.beta, pt.rho)
    a2, a1, a0 = _char_coeffs(system.jacobian(p, pt.state))
    omega = None
    if kind is BifKind.GH:
        coeff = scalar_at(pt)
        omega = math.sqrt(a1) if a1 > 0 else None
    elif kind is BifKind.BT:
        coeff = a1
    else:
        coeff = scalar_at(pt)
    return BifurcationRecord(kind=kind, state=pt.state, params={"beta": pt.beta, "rho": pt.rho},
                             coefficient=coeff, omega=omega, arclength=pt.arclength)


def refine_crossing(segment: CurveSegment, system: ParamSystem, p_fixed, rho: float,
                    settings: Codim2Settings = Codim2Settings()) -> list:
    """Solver-accurate beta values where a fold/Hopf segment crosses a rho-slice."""
    psi = {CurveKind.FOLD: _psi_fold, CurveKind.HOPF: _psi_hopf}.get(segment.kind)
    if psi is None:
        return [pt.beta for pt in segment.crossings_at_rho(rho)]
    tracer = _CurveTracer(system, p_fixed, psi, settings)
    out = []
    for pt in segment.crossings_at_rho(rho):
        try:
            y = tracer.correct_fixed(pt.y, tracer.n + 1, rho)
            out.append(float(y[-2]))
        except (NewtonError, SingularMatrixError):
            out.append(pt.beta)
    return out


def curve_to_csv(segment: CurveSegment, system: ParamSystem, p_fixed, path) -> None:
    """CSV layout: kind, arclength, beta, rho, S, I, R, defining residuals, codim2 flag."""
    import csv

    flags = {}
    for r in segment.records:
        flags[round(r.arclength, 9)] = r.kind.value
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(["kind", "arclength", "beta", "rho", "S", "I", "R",
                     "residual_rhs", "residual_psi", "codim2"])
        for pt in segment.points:
            p = set_param(set_param(p_fixed, "beta", pt.beta), "rho", pt.rho)
            res_rhs = float(np.max(np.abs(system.rhs(p, pt.state))))
            if segment.kind is CurveKind.FOLD:
                res_psi = abs(_psi_fold(system, p, pt.state))
            elif segment.kind is CurveKind.HOPF:
                res_psi = abs(_psi_hopf(system, p, pt.state))
            else:
                res_psi = 0.0
            row = [segment.kind.value]
            row += [f"{v:.17g}" for v in
                    (pt.arclength, pt.beta, pt.rho, *pt.state, res_rhs, res_psi)]
            row.append(flags.get(round(pt.arclength, 9), ""))
            wr.writerow(row)
