"""Limit cycles by shooting: construction near Hopf points, one-parameter
continuation with Floquet stability and LPC detection, and two-parameter
tracing of the cycle-fold and saddle-homoclinic loci.

Cycles are represented by shooting nodes (one node = single shooting, more
when Floquet amplification over one segment becomes too large for a stable
Newton solve). The shooting Jacobians come from integrating the variational
equations along each segment, augmented with the parameter sensitivity and
the running integral of trace(J) (which yields the Liouville determinant
check for the monodromy matrix).

A branch terminates with
  * HOPF_COLLAPSE       when the amplitude shrinks to zero (cycle dies in a
                        supercritical Hopf),
  * HOMOCLINIC_PROXY    when the period exceeds the configured cap while the
                        orbit passes close to the companion saddle; the same
                        verdict applies when the corrector can no longer
                        converge while the period has been growing and the
                        orbit already hugs the saddle (the shooting residual
                        floor scales like exp(lambda_u T / m) * eps, so
                        arbitrarily long periods are not reachable in double
                        precision),
  * RANGE_BOUND         at the parameter range,
  * STEP_FAILURE        when steps collapse away from any homoclinic signature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from .codim2 import CurveKind, CurvePoint, CurveSegment
from .continuation import BifKind, BifurcationRecord
from .numerics import NewtonError, NewtonSettings, SingularMatrixError, bisect_secant, solve_linear
from .ode import IntegratorSettings, Trajectory, integrate
from .systems import ParamSystem, get_param, set_param

__all__ = [
    "CycleSettings",
    "LimitCycle",
    "CycleTermination",
    "CycleBranch",
    "ShootingError",
    "cycle_from_hopf",
    "continue_cycles",
    "floquet_multipliers",
    "trace_cycle_loci",
    "cycle_branch_to_csv",
]


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CycleSettings:
    # arclength control in (nodes, log-period, parameter) space
    initial_step: float = 4e-2
    min_step: float = 1e-7
    max_step: float = 0.35
    grow_factor: float = 1.3
    grow_after: int = 3
    max_points: int = 400
    # shooting
    n_segments: int = 1
    max_segments: int = 16
    segment_amplification: float = 1e3   # re-node when one segment amplifies more
    closure_tol: float = 1e-8
    newton: NewtonSettings = NewtonSettings(residual_tol=2e-9, step_tol=1e-13,
                                            max_iterations=10, damping=False)
    integrator: IntegratorSettings = IntegratorSettings(rtol=1e-9, atol=1e-11)
    # termination thresholds
    period_cap: float = 5000.0           # homoclinic proxy period threshold
    saddle_distance: float = 1e-3        # ... with closest approach below this
    min_hom_period: float = 150.0        # corrector-collapse fallback needs at least this
    amplitude_collapse: float = 1e-3     # Hopf collapse once amplitude drops below
    amplitude_component: int = 1         # amplitude measured on this state component


@dataclass
class LimitCycle:
    """A periodic orbit represented by shooting nodes on a section."""

    period: float
    base_point: np.ndarray
    section_normal: np.ndarray
    section_offset: float
    nodes: np.ndarray              # (m, n) shooting nodes, nodes[0] = base_point
    closure_defect: float
    amplitude: float
    multipliers: Optional[np.ndarray] = None
    stable: Optional[bool] = None
    aux: dict = field(default_factory=dict)

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0]


class CycleTermination(Enum):
    HOPF_COLLAPSE = "hopf_collapse"
    HOMOCLINIC_PROXY = "homoclinic_proxy"
    RANGE_BOUND = "range_bound"
    STEP_FAILURE = "step_failure"
    MAX_POINTS = "max_points"


@dataclass
class CycleBranch:
    samples: list                      # (param value, LimitCycle), in trace order
    records: list                      # LPC records
    termination: CycleTermination
    termination_backward: Optional[CycleTermination] = None

    def params(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])


# ---------------------------------------------------------------------------
# shooting engine

class _Shooter:
    def __init__(self, system: ParamSystem, p_template, active: Optional[str],
                 settings: CycleSettings):
        self.sys = system
        self.p0 = p_template
        self.active = active
        self.s = settings
        self.n = system.dim
        self.last_orbit = None

    def pars(self, value: Optional[float]):
        if self.active is None or value is None:
            return self.p0
        return set_param(self.p0, self.active, value)

    def _aug_field(self, p, with_param: bool):
        n = self.n

        def field(_p, z):
            x = z[:n]
            j = self.sys.jacobian(p, x)
            phi = z[n:n + n * n].reshape(n, n)
            out = [self.sys.rhs(p, x).ravel(), (j @ phi).ravel()]
            if with_param:
                psi = z[n + n * n:n + n * n + n]
                out.append(j @ psi + self.sys.param_derivative(p, x, self.active))
            out.append([np.trace(j)])
            return np.concatenate(out)

        return field

    def segment(self, p, x0: np.ndarray, dt: float, with_param: bool):
        """Integrate one shooting segment with its variational data.

        Returns (endpoint, transition matrix, parameter sensitivity or None,
        trace integral, per-step orbit states for amplitude bookkeeping).
        """
        n = self.n
        z0 = [np.asarray(x0, dtype=float), np.eye(n).ravel()]
        if with_param:
            z0.append(np.zeros(n))
        z0.append([0.0])
        traj = integrate(self._aug_field(p, with_param), p, np.concatenate(z0),
                         (0.0, dt), self.s.integrator)
        z1 = traj.terminal_state
        x1 = z1[:n]
        phi = z1[n:n + n * n].reshape(n, n)
        psi = z1[n + n * n:n + n * n + n] if with_param else None
        trace_int = float(z1[-1])
        return x1, phi, psi, trace_int, traj.states[:, :n]

    def plain_orbit(self, p, x0: np.ndarray, t_end: float,
                    ref_point: Optional[np.ndarray] = None) -> tuple:
        """One plain integration pass; returns (trajectory, min distance to ref)."""
        best = [math.inf]
        ref = None if ref_point is None else np.asarray(ref_point, dtype=float)

        def cb(interp):
            if ref is not None:
                for th in (0.25, 0.5, 0.75, 1.0):
                    x = interp(interp.t0 + th * interp.h)
                    best[0] = min(best[0], float(np.max(np.abs(x - ref))))
            return False

        traj = integrate(self.sys.rhs, p, x0, (0.0, t_end), self.s.integrator,
                         step_callback=cb if ref is not None else None)
        return traj, best[0]

    def residual(self, nodes: np.ndarray, period: float, p,
                 normal: np.ndarray, anchor: np.ndarray,
                 with_param: bool = False):
        """Matching + phase residual and its building blocks."""
        m = nodes.shape[0]
        dt = period / m
        res = np.empty(m * self.n + 1)
        phis, psis, ends, orbit = [], [], [], []
        trace_total = 0.0
        for i in range(m):
            x1, phi, psi, tr, states = self.segment(p, nodes[i], dt, with_param)
            ends.append(x1)
            phis.append(phi)
            psis.append(psi)
            orbit.append(states)
            trace_total += tr
            res[i * self.n:(i + 1) * self.n] = x1 - nodes[(i + 1) % m]
        res[-1] = normal @ (nodes[0] - anchor)
        self.last_orbit = np.vstack(orbit)
        return res, ends, phis, psis, trace_total

    def orbit_stats(self, component: int, ref_point=None):
        """Amplitude and closest saddle approach from the last residual pass."""
        states = self.last_orbit
        comp = states[:, component]
        amp = float(comp.max() - comp.min())
        dist = math.inf
        if ref_point is not None:
            dist = float(np.abs(states - np.asarray(ref_point)).max(axis=1).min())
        return amp, dist

    def newton_fixed_param(self, nodes: np.ndarray, period: float, p,
                           normal: np.ndarray, anchor: np.ndarray,
                           solve_for: str = "period",
                           pinned_value: Optional[float] = None):
        """Newton on (nodes, T) at fixed parameters, or (nodes, beta) at
        fixed period when ``solve_for`` is the active parameter name."""
        m = nodes.shape[0]
        n = self.n
        nodes = nodes.copy()
        period = float(period)
        pv = pinned_value
        for _ in range(self.s.newton.max_iterations):
            p_here = self.pars(pv) if solve_for != "period" else p
            with_par = solve_for != "period"
            res, ends, phis, psis, _ = self.residual(nodes, period, p_here, normal, anchor,
                                                     with_param=with_par)
            if np.max(np.abs(res)) < self.s.newton.residual_tol:
                return nodes, period, pv, float(np.max(np.abs(res[:-1])))
            jac = np.zeros((m * n + 1, m * n + 1))
            dt = period / m
            for i in range(m):
                r0, r1 = i * n, (i + 1) * n
                jac[r0:r1, r0:r1] = phis[i]
                c_next = ((i + 1) % m) * n
                jac[r0:r1, c_next:c_next + n] -= np.eye(n)
                if solve_for == "period":
                    jac[r0:r1, -1] = self.sys.rhs(p_here, ends[i]) / m
                else:
                    jac[r0:r1, -1] = psis[i]
            jac[-1, :n] = normal
            step = solve_linear(jac, -res)
            for i in range(m):
                nodes[i] += step[i * n:(i + 1) * n]
            if solve_for == "period":
                period += float(step[-1])
                if period <= 0:
                    raise ShootingError("period went nonpositive during shooting")
            else:
                pv += float(step[-1])
        res, *_ = self.residual(nodes, period,
                                self.pars(pv) if solve_for != "period" else p,
                                normal, anchor, with_param=False)
        if np.max(np.abs(res)) < 10 * self.s.newton.residual_tol:
            return nodes, period, pv, float(np.max(np.abs(res[:-1])))
        raise ShootingError(f"shooting Newton stalled (residual {np.max(np.abs(res)):.2e})")

    def monodromy(self, phis: list) -> Optional[np.ndarray]:
        mono = np.eye(self.n)
        for phi in phis:
            if not np.all(np.isfinite(phi)) or np.max(np.abs(phi)) > 1e120:
                return None
            mono = phi @ mono
        return mono if np.all(np.isfinite(mono)) else None

    def renode(self, cycle_nodes: np.ndarray, period: float, p, m_new: int) -> np.ndarray:
        """Resample a converged orbit at m_new equal-time nodes."""
        out = [np.asarray(cycle_nodes[0], dtype=float)]
        x = out[0]
        for _ in range(m_new - 1):
            traj = integrate(self.sys.rhs, p, x, (0.0, period / m_new), self.s.integrator)
            x = traj.terminal_state
            out.append(x)
        return np.array(out)


def _finalize_cycle(shooter: _Shooter, p, nodes: np.ndarray, period: float,
                    normal: np.ndarray,
                    ref_point: Optional[np.ndarray], component: int,
                    precomputed: Optional[tuple] = None) -> LimitCycle:
    if precomputed is not None:
        res, phis, trace_int = precomputed
    else:
        res, ends, phis, psis, trace_int = shooter.residual(nodes, period, p, normal,
                                                            nodes[0])
        shooter.last_orbit_valid = True
    mono = shooter.monodromy(phis)
    multipliers = None
    stable = None
    liouville = None
    if mono is not None:
        multipliers = np.linalg.eigvals(mono)
        order = np.argsort(-np.abs(multipliers - 1.0))
        # sort so the trivial multiplier (closest to +1) comes last
        multipliers = multipliers[order]
        nontrivial = multipliers[:-1]
        stable = bool(np.all(np.abs(nontrivial) < 1.0))
        # determinant by LU: the eigenvalue product loses multipliers that sit
        # far below machine precision relative to the matrix norm
        liouville = {"det_monodromy": float(np.linalg.det(mono)),
                     "trace_integral": trace_int}
    amp, min_dist = shooter.orbit_stats(component, ref_point)
    return LimitCycle(
        period=float(period), base_point=nodes[0].copy(), section_normal=normal.copy(),
        section_offset=float(normal @ nodes[0]), nodes=nodes.copy(),
        closure_defect=float(np.max(np.abs(res[:-1]))), amplitude=float(amp),
        multipliers=multipliers, stable=stable,
        aux={"min_saddle_distance": min_dist, "liouville": liouville},
    )


def cycle_from_hopf(system: ParamSystem, p, hopf: BifurcationRecord,
                    offset: float = 1e-3,
                    settings: CycleSettings = CycleSettings(),
                    ref_point: Optional[np.ndarray] = None) -> LimitCycle:
    """Construct the limit cycle near a Hopf point by shooting.

    The initial guess is the linear center-eigenplane orbit of radius
    ``offset`` around the Hopf equilibrium with period 2 pi / omega; the
    phase condition fixes the section through the equilibrium with normal
    along the vector field at the guessed base point. ``p`` must place the
    active parameter slightly inside the cycle's existence region.

    Raises ShootingError when the corrector diverges or the offset lands
    outside the basin (e.g. the refined orbit collapses onto the equilibrium).
    """
    if hopf.omega is None or hopf.omega <= 0:
        raise ValueError("record does not carry a Hopf frequency")
    x_eq = np.asarray(hopf.state, dtype=float)
    jac = system.jacobian(p, x_eq)
    ev, vec = np.linalg.eig(jac)
    k = int(np.argmin(np.abs(ev - 1j * hopf.omega)))
    q = vec[:, k]
    q = q / np.linalg.norm(q.real)
    shooter = _Shooter(system, p, None, settings)
    for eps in (offset, offset / 2, offset / 4, offset / 8):
        x0 = x_eq + eps * q.real
        normal = np.asarray(system.rhs(p, x0), dtype=float)
        nrm = np.linalg.norm(normal)
        if nrm == 0.0:
            raise ShootingError("vector field vanishes at the initial guess")
        normal /= nrm
        nodes = x0[None, :].copy()
        try:
            nodes_s, period_s, _, defect = shooter.newton_fixed_param(
                nodes, 2.0 * math.pi / hopf.omega, p, normal, x_eq, solve_for="period")
        except (ShootingError, SingularMatrixError, NewtonError):
            continue
        cyc = _finalize_cycle(shooter, p, nodes_s, period_s, normal,
                              ref_point, settings.amplitude_component)
        if cyc.amplitude > max(1e-10, 0.02 * eps) and cyc.closure_defect < settings.closure_tol:
            return cyc
    raise ShootingError("shooting collapsed onto the equilibrium; "
                        "offset too large or parameters too close to the Hopf point")


# ---------------------------------------------------------------------------
# pseudo-arclength continuation of cycles in (nodes, log T, parameter)

class _CycleContinuer:
    def __init__(self, system, p_template, active: str, settings: CycleSettings,
                 saddle_fn: Optional[Callable] = None):
        self.sh = _Shooter(system, p_template, active, settings)
        self.s = settings
        self.active = active
        self.saddle_fn = saddle_fn
        self.n = system.dim

    def unpack(self, y: np.ndarray, m: int):
        nodes = y[:m * self.n].reshape(m, self.n)
        period = math.exp(y[-2])
        lam = y[-1]
        return nodes, period, lam

    def pack(self, nodes: np.ndarray, period: float, lam: float) -> np.ndarray:
        return np.concatenate([nodes.ravel(), [math.log(period), lam]])

    def residual_ext(self, y: np.ndarray, m: int, normal, anchor):
        nodes, period, lam = self.unpack(y, m)
        p = self.sh.pars(lam)
        return self.sh.residual(nodes, period, p, normal, anchor, with_param=True)

    def jacobian_ext(self, y: np.ndarray, m: int, normal, anchor):
        """(mn+1) x (mn+2) Jacobian of the shooting system."""
        nodes, period, lam = self.unpack(y, m)
        p = self.sh.pars(lam)
        res, ends, phis, psis, trace_int = self.sh.residual(nodes, period, p, normal,
                                                            anchor, with_param=True)
        n, dim = self.n, m * self.n + 2
        jac = np.zeros((m * n + 1, dim))
        for i in range(m):
            r0, r1 = i * n, (i + 1) * n
            jac[r0:r1, r0:r1] = phis[i]
            c_next = ((i + 1) % m) * n
            jac[r0:r1, c_next:c_next + n] -= np.eye(n)
            # d/d(log T) = T * d/dT; per segment dT contribution is f(end)/m
            jac[r0:r1, -2] = period * self.sh.sys.rhs(p, ends[i]) / m
            jac[r0:r1, -1] = psis[i]
        jac[-1, :n] = normal
        return res, jac, phis, trace_int

    def tangent_from_jac(self, jac, guide):
        mat = np.vstack([jac, guide])
        rhs = np.zeros(jac.shape[1])
        rhs[-1] = 1.0
        t = solve_linear(mat, rhs)
        t /= np.linalg.norm(t)
        return t if t @ guide > 0 else -t

    def tangent(self, y, m, normal, anchor, guide):
        _, jac, _, _ = self.jacobian_ext(y, m, normal, anchor)
        return self.tangent_from_jac(jac, guide)

    def correct(self, y_pred, m, normal, anchor, tvec):
        y = y_pred.copy()
        best = math.inf
        for _ in range(self.s.newton.max_iterations):
            res, jac, phis, trace_int = self.jacobian_ext(y, m, normal, anchor)
            g = np.append(res, tvec @ (y - y_pred))
            gnorm = np.max(np.abs(g))
            if gnorm < self.s.newton.residual_tol:
                return y, res, jac, phis, trace_int
            if gnorm > 1e3 * max(best, 1e-6):
                raise ShootingError("cycle corrector diverging")
            best = min(best, gnorm)
            mat = np.vstack([jac, tvec])
            y = y + solve_linear(mat, -g)
        res, jac, phis, trace_int = self.jacobian_ext(y, m, normal, anchor)
        if np.max(np.abs(res)) < 10 * self.s.newton.residual_tol:
            return y, res, jac, phis, trace_int
        raise ShootingError("cycle corrector stalled")


def continue_cycles(system: ParamSystem, p, active: str, start: LimitCycle,
                    param_range: tuple[float, float],
                    settings: CycleSettings = CycleSettings(),
                    saddle_fn: Optional[Callable] = None,
                    bidirectional: bool = True) -> CycleBranch:
    """Pseudo-arclength continuation of a limit cycle in one parameter.

    ``saddle_fn(p) -> point or None`` supplies the companion saddle
    equilibrium used by the homoclinic-proxy termination test; without it the
    proxy can only trigger on the period cap alone. LPC records are placed
    where the tangent's parameter component changes sign (the branch folds);
    there a nontrivial Floquet multiplier crosses +1.
    """
    lo, hi = param_range
    c = _CycleContinuer(system, p, active, settings, saddle_fn)
    v0 = get_param(p, active)
    if not (lo <= v0 <= hi):
        raise ValueError(f"start parameter {v0} outside range {param_range}")

    def saddle_at(lam):
        if saddle_fn is None:
            return None
        return saddle_fn(c.sh.pars(lam))

    def run(direction: float):
        m = max(settings.n_segments, start.n_segments)
        nodes = start.nodes if start.n_segments == m else c.sh.renode(
            start.nodes, start.period, c.sh.pars(v0), m)
        y = c.pack(nodes, start.period, v0)
        normal = start.section_normal.copy()
        anchor = nodes[0].copy()
        guide = np.zeros(len(y))
        guide[-1] = 1.0
        try:
            t = c.tangent(y, m, normal, anchor, guide)
        except (SingularMatrixError, NewtonError):
            guide = np.ones(len(y)) / math.sqrt(len(y))
            t = c.tangent(y, m, normal, anchor, guide)
        t *= direction
        cyc0 = _finalize_cycle(c.sh, c.sh.pars(v0), nodes, start.period, normal,
                               saddle_at(v0), settings.amplitude_component)
        samples = [(v0, cyc0)]
        tangents = [t]
        records: list[BifurcationRecord] = []
        h = settings.initial_step
        streak = 0
        term = CycleTermination.MAX_POINTS
        period_prev = start.period
        grew = 0
        bounces = 0
        while len(samples) < settings.max_points:
            y_pred = y + h * t
            try:
                y_new, res_new, jac_new, phis, trace_new = c.correct(y_pred, m, normal,
                                                                     anchor, t)
                t_new = c.tangent_from_jac(jac_new, t)
            except (ShootingError, SingularMatrixError, NewtonError, ValueError,
                    OverflowError):
                h *= 0.5
                streak = 0
                if h < settings.min_step:
                    last = samples[-1][1]
                    dist = last.aux.get("min_saddle_distance", math.inf)
                    if (last.period > settings.min_hom_period and grew >= 2
                            and dist < settings.saddle_distance):
                        term = CycleTermination.HOMOCLINIC_PROXY
                    else:
                        term = CycleTermination.STEP_FAILURE
                    break
                continue
            nodes, period, lam = c.unpack(y_new, m)
            p_here = c.sh.pars(lam)
            cyc = _finalize_cycle(c.sh, p_here, nodes, period, normal,
                                  saddle_at(lam), settings.amplitude_component,
                                  precomputed=(res_new, phis, trace_new))
            if cyc.closure_defect > settings.closure_tol:
                h *= 0.5
                streak = 0
                if h < settings.min_step:
                    term = CycleTermination.STEP_FAILURE
                    break
                continue
            # LPC: at a cycle fold only the parameter component of the tangent
            # flips while the state part keeps its direction; a Hopf-endpoint
            # bounce reverses the whole tangent (travel direction flip)
            if t[-1] * t_new[-1] < 0:
                state_cos = float(t[:-2] @ t_new[:-2])
                if state_cos > 0:
                    rec = _locate_lpc(c, samples[-1], (y.copy(), m, normal.copy(), anchor.copy()),
                                      (y_new, t_new), cyc)
                    if rec is not None:
                        records.append(rec)
                else:
                    bounces += 1
                    if bounces >= 2:
                        samples.append((float(lam), cyc))
                        term = CycleTermination.HOPF_COLLAPSE
                        break
            samples.append((float(lam), cyc))
            tangents.append(t_new)
            grew = grew + 1 if period > period_prev else 0
            period_prev = period
            # termination tests
            if cyc.amplitude < settings.amplitude_collapse:
                term = CycleTermination.HOPF_COLLAPSE
                break
            dist = cyc.aux.get("min_saddle_distance", math.inf)
            if period > settings.period_cap and dist < settings.saddle_distance:
                term = CycleTermination.HOMOCLINIC_PROXY
                break
            if not (lo <= lam <= hi):
                term = CycleTermination.RANGE_BOUND
                break
            # adapt segments when one segment amplifies too strongly
            amp_seg = max(float(np.max(np.abs(phi))) for phi in phis)
            if amp_seg > settings.segment_amplification and m < settings.max_segments:
                m_new = 4 if m == 1 else min(2 * m, settings.max_segments)
                nodes = c.sh.renode(nodes, period, p_here, m_new)
                m = m_new
                y_new = c.pack(nodes, period, lam)
                t_new = np.zeros(len(y_new))
                t_new[-1] = t[-1] if t[-1] != 0 else 1.0
                try:
                    t_new = c.tangent(y_new, m, normal, nodes[0], t_new)
                except (SingularMatrixError, NewtonError):
                    pass
            # re-anchor the phase section at the new base point
            anchor = nodes[0].copy()
            f0 = np.asarray(system.rhs(p_here, nodes[0]), dtype=float)
            if np.linalg.norm(f0) > 0:
                normal = f0 / np.linalg.norm(f0)
            y, t = y_new, t_new
            streak += 1
            if streak >= settings.grow_after:
                h = min(h * settings.grow_factor, settings.max_step)
                streak = 0
            # refine the approach to a shrinking-amplitude endpoint so the
            # collapse threshold is reached instead of bouncing past the Hopf
            if cyc.amplitude < 0.02:
                h = min(h, max(10 * settings.min_step, 3.0 * cyc.amplitude))
        return samples, records, term

    samples_f, rec_f, term_f = run(+1.0)
    if bidirectional:
        samples_b, rec_b, term_b = run(-1.0)
    else:
        samples_b, rec_b, term_b = [], [], None
    samples = list(reversed(samples_b[1:])) + samples_f
    return CycleBranch(samples=samples, records=rec_b + rec_f,
                       termination=term_f, termination_backward=term_b)


def _locate_lpc(c: _CycleContinuer, prev_sample, prev_state, new_state,
                new_cycle: LimitCycle) -> Optional[BifurcationRecord]:
    """Refine the parameter fold between two cycle samples by bisection on the
    tangent's parameter component."""
    y_a, m, normal, anchor = prev_state
    y_b, t_b = new_state
    anchors = {0.0: y_a, 1.0: y_b}

    def tangent_param(s: float) -> float:
        y = point_at(s)
        t = c.tangent(y, m, normal, anchor, chord_dir)
        return float(t[-1])

    chord = y_b - y_a
    nrm = np.linalg.norm(chord)
    if nrm == 0:
        return None
    chord_dir = chord / nrm

    def point_at(s: float) -> np.ndarray:
        if s in anchors:
            return anchors[s]
        lo = max(k for k in anchors if k < s)
        hi = min(k for k in anchors if k > s)
        ya, yb = anchors[lo], anchors[hi]
        w = (s - lo) / (hi - lo)
        y = c.correct((1 - w) * ya + w * yb, m, normal, anchor, chord_dir)[0]
        anchors[s] = y
        return y

    try:
        s_root = bisect_secant(tangent_param, 0.0, 1.0, xtol=1e-10)
        y_root = point_at(s_root)
    except (ShootingError, SingularMatrixError, NewtonError, ValueError):
        return None
    nodes, period, lam = c.unpack(y_root, m)
    p_here = c.sh.pars(lam)
    cyc = _finalize_cycle(c.sh, p_here, nodes, period, normal, None,
                          c.s.amplitude_component)
    # a tangent flip refined onto a vanishing-amplitude orbit is a Hopf
    # endpoint bounce, not a cycle fold
    if cyc.amplitude < max(4 * c.s.amplitude_collapse, 0.1 * new_cycle.amplitude):
        return None
    mult = None
    if cyc.multipliers is not None:
        nontrivial = cyc.multipliers[:-1]
        mult = float(np.real(nontrivial[np.argmin(np.abs(nontrivial - 1.0))]))
        # at a genuine cycle fold a nontrivial multiplier crosses +1; roots
        # whose multiplier stays away from +1 are Hopf-endpoint artifacts
        if abs(complex(nontrivial[np.argmin(np.abs(nontrivial - 1.0))]) - 1.0) > 5e-3:
            return None
    return BifurcationRecord(kind=BifKind.LPC, state=nodes[0],
                             params={c.active: float(lam), "period": float(period)},
                             coefficient=mult)


def floquet_multipliers(system: ParamSystem, p, cycle: LimitCycle,
                        settings: CycleSettings = CycleSettings()) -> np.ndarray:
    """Floquet multipliers of a converged cycle via the variational equations.

    The monodromy matrix is the ordered product of the per-segment transition
    matrices. One multiplier is the trivial unit multiplier of an autonomous
    cycle; the product of all multipliers satisfies the Liouville identity
    det M = exp(integral of trace J), which callers can audit through
    ``cycle.aux['liouville']``.
    """
    sh = _Shooter(system, p, None, settings)
    res, ends, phis, psis, trace_int = sh.residual(cycle.nodes, cycle.period, p,
                                                   cycle.section_normal, cycle.nodes[0])
    if float(np.max(np.abs(res[:-1]))) > 100 * settings.closure_tol:
        raise ShootingError("cycle closure defect too large for Floquet analysis")
    mono = sh.monodromy(phis)
    if mono is None:
        raise ShootingError("monodromy overflow; period too long for multipliers")
    mult = np.linalg.eigvals(mono)
    cycle.aux["liouville"] = {"det_monodromy": float(np.linalg.det(mono)),
                              "trace_integral": trace_int}
    return mult[np.argsort(-np.abs(mult - 1.0))]


# ---------------------------------------------------------------------------
# two-parameter loci

def trace_cycle_loci(system: ParamSystem, p_fixed, box,
                     hom_seed: Optional[tuple] = None,
                     lpc_seed: Optional[tuple] = None,
                     settings: CycleSettings = CycleSettings(),
                     saddle_fn: Optional[Callable] = None,
                     rho_step: float = 2.5e-3) -> dict:
    """Trace the saddle-homoclinic proxy locus and/or the LPC locus in (beta, rho).

    ``hom_seed`` is (LimitCycle, params) from a one-parameter branch that
    terminated as a homoclinic proxy: its (large) period is clamped and the
    fixed-period cycle is continued in beta while stepping rho. ``lpc_seed``
    is (LimitCycle, params) at a located LPC: at each rho step a short cycle
    continuation in beta brackets the fold again. Returns a dict with keys
    'homoclinic' and/or 'lpc' holding CurveSegments.
    """
    out = {}
    (b_lo, b_hi), (r_lo, r_hi) = box
    if hom_seed is not None:
        cycle, p_seed = hom_seed
        sh = _Shooter(system, p_seed, "beta", settings)
        t_fix = cycle.period
        normal = cycle.section_normal
        rho0 = get_param(p_seed, "rho")
        beta0 = get_param(p_seed, "beta")

        def solve_at(rho, nodes, beta):
            p_here = set_param(sh.p0, "rho", rho)
            sh2 = _Shooter(system, p_here, "beta", settings)
            nodes_s, _, beta_s, defect = sh2.newton_fixed_param(
                nodes, t_fix, None, normal, nodes[0], solve_for="beta",
                pinned_value=beta)
            p_at = set_param(p_here, "beta", beta_s)
            ref = saddle_fn(p_at) if saddle_fn else None
            amp, min_dist = sh2.orbit_stats(settings.amplitude_component, ref)
            # residual() in newton_fixed_param leaves the converged orbit cached
            pt = CurvePoint(float(beta_s), float(rho), nodes_s[0].copy(), 0.0,
                            {"period": t_fix, "amplitude": float(amp),
                             "defect": float(defect),
                             "min_saddle_distance": float(min_dist)})
            return nodes_s, beta_s, pt

        try:
            nodes_seed, beta_seed, pt_seed = solve_at(rho0, cycle.nodes.copy(), beta0)
        except (ShootingError, SingularMatrixError, NewtonError, ValueError) as err:
            raise ShootingError(f"homoclinic-locus seed did not converge: {err}")
        pts = [pt_seed]
        for direction in (+1.0, -1.0):
            rho_last, nodes, beta = rho0, nodes_seed.copy(), beta_seed
            drho = rho_step
            side: list[CurvePoint] = []
            while drho > 1e-6:
                rho_try = min(max(rho_last + direction * drho, r_lo), r_hi)
                if rho_try == rho_last:
                    break
                try:
                    nodes_s, beta_s, pt = solve_at(rho_try, nodes, beta)
                except (ShootingError, SingularMatrixError, NewtonError, ValueError):
                    drho *= 0.5
                    continue
                if not (b_lo <= beta_s <= b_hi):
                    break
                side.append(pt)
                rho_last, nodes, beta = rho_try, nodes_s, beta_s
                drho = min(drho * 1.3, 4 * rho_step)
            pts = list(reversed(side)) + pts if direction < 0 else pts + side
        pts.sort(key=lambda q: q.rho)
        out["homoclinic"] = _with_arclength(CurveKind.SADDLE_HOMOCLINIC, pts)

    if lpc_seed is not None:
        cycle, p_seed = lpc_seed
        rho0 = get_param(p_seed, "rho")
        pts = []
        for direction in (+1.0, -1.0):
            rho_last = rho0 if direction > 0 else rho0
            warm = cycle
            beta_prev = get_param(p_seed, "beta")
            drho = rho_step
            side = []
            include_seed = direction > 0  # the seed slice itself only once
            while drho > 2e-5:
                rho_try = rho_last if include_seed else min(max(rho_last + direction * drho, r_lo), r_hi)
                if not include_seed and rho_try == rho_last:
                    break
                p_here = set_param(set_param(p_seed, "rho", rho_try), "beta", beta_prev)
                rec_cyc = _lpc_at_slice(system, p_here, warm, settings, saddle_fn)
                if rec_cyc is None:
                    if include_seed:
                        break
                    drho *= 0.5
                    continue
                rec, cyc_at = rec_cyc
                beta_l = rec.params["beta"]
                if not (b_lo <= beta_l <= b_hi):
                    break
                side.append(CurvePoint(float(beta_l), float(rho_try), cyc_at.base_point.copy(), 0.0,
                                       {"period": float(rec.params.get("period", cyc_at.period)),
                                        "amplitude": float(cyc_at.amplitude),
                                        "multiplier": rec.coefficient if rec.coefficient else math.nan}))
                warm, beta_prev, rho_last = cyc_at, beta_l, rho_try
                include_seed = False
                drho = min(drho * 1.3, 3 * rho_step)
                if cyc_at.amplitude < 8 * settings.amplitude_collapse:
                    break  # locus pinches off near the generalized Hopf point
            pts = list(reversed(side)) + pts if direction < 0 else pts + side
        pts.sort(key=lambda q: q.rho)
        out["lpc"] = _with_arclength(CurveKind.LPC_CURVE, pts)
    return out


def _with_arclength(kind: CurveKind, pts: list) -> CurveSegment:
    arc = 0.0
    out = []
    for i, q in enumerate(pts):
        if i:
            arc += math.hypot(q.beta - pts[i - 1].beta, q.rho - pts[i - 1].rho)
        out.append(CurvePoint(q.beta, q.rho, q.state, arc, q.aux))
    return CurveSegment(kind, out)


def _lpc_at_slice(system, p_here, warm: LimitCycle, settings: CycleSettings,
                  saddle_fn) -> Optional[tuple]:
    """Re-locate the cycle fold in beta at one rho by a short branch walk."""
    loc = replace(settings, max_points=40, initial_step=2e-2,
                  amplitude_collapse=settings.amplitude_collapse / 4)
    try:
        nodes, period, beta, _ = _refresh_cycle(system, p_here, warm, loc)
    except (ShootingError, SingularMatrixError, NewtonError, ValueError):
        return None
    cyc = LimitCycle(period=period, base_point=nodes[0], section_normal=warm.section_normal,
                     section_offset=float(warm.section_normal @ nodes[0]), nodes=nodes,
                     closure_defect=0.0, amplitude=warm.amplitude)
    p_at = set_param(p_here, "beta", beta)
    br = continue_cycles(system, p_at, "beta", cyc,
                         (get_param(p_here, "beta") - 0.6, get_param(p_here, "beta") + 0.6),
                         loc, saddle_fn=saddle_fn)
    lpcs = [r for r in br.records if r.kind is BifKind.LPC]
    if not lpcs:
        return None
    rec = lpcs[0]
    # pick the branch sample closest to the fold for warm-starting the next slice
    k = int(np.argmin([abs(s[0] - rec.params["beta"]) for s in br.samples]))
    return rec, br.samples[k][1]


def _refresh_cycle(system, p_here, warm: LimitCycle, settings: CycleSettings):
    """Re-converge a warm-start cycle at new fixed parameters (beta free? no:
    beta pinned at its stored value, (nodes, T) solved)."""
    sh = _Shooter(system, p_here, None, settings)
    nodes, period, _, defect = sh.newton_fixed_param(
        warm.nodes, warm.period, p_here, warm.section_normal, warm.base_point,
        solve_for="period")
    return nodes, period, get_param(p_here, "beta"), defect


def cycle_branch_to_csv(branch: CycleBranch, active: str, path) -> None:
    """CSV layout: parameter, period, amplitude, multiplier moduli, stability,
    termination tag (on the last row)."""
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow([active, "period", "amplitude", "multiplier_moduli", "stable",
                     "termination"])
        last = len(branch.samples) - 1
        for i, (lam, cyc) in enumerate(branch.samples):
            mods = ";".join(f"{abs(m):.17g}" for m in cyc.multipliers) \
                if cyc.multipliers is not None else ""
            wr.writerow([f"{lam:.17g}", f"{cyc.period:.17g}", f"{cyc.amplitude:.17g}",
                         mods, "" if cyc.stable is None else str(cyc.stable).lower(),
                         branch.termination.value if i == last else ""])
