"""Adaptive explicit time integration for parametrized vector fields.

A single embedded Runge-Kutta pair of orders 5(4) (Dormand-Prince
coefficients, FSAL) drives all trajectory work: region simulations,
monodromy/variational runs for cycle stability, and section-crossing
detection for shooting. The pair carries a free 4th-order dense-output
interpolant; section crossings are located on that interpolant by a
bisection-safeguarded secant iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import bisect_secant

__all__ = [
    "IntegratorSettings",
    "Termination",
    "Trajectory",
    "IntegrationError",
    "NoCrossingError",
    "integrate",
    "integrate_with_section",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.append(_A[6], 0.0)  # 5th-order weights (FSAL: last stage unused)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# free 4th-order interpolant: y(t0+th) = y0 + h * K^T (P @ [t, t^2, t^3, t^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_SHRINK_CAP = 0.2
_GROW_CAP = 5.0


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-8
    atol: float = 1e-10
    initial_step: Optional[float] = None  # None: automatic
    max_step: float = np.inf
    max_steps: int = 10_000_000
    dense: bool = False  # retain per-step interpolants on the trajectory

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


class Termination(Enum):
    TIME_REACHED = "time_reached"
    STEP_CAP = "step_cap"
    EVENT = "event"


class IntegrationError(RuntimeError):
    """Step underflow (stiffness signal) or non-finite state."""


class NoCrossingError(RuntimeError):
    """The requested section was never crossed within the time span."""


@dataclass
class _StepInterp:
    t0: float
    h: float
    y0: np.ndarray
    q: np.ndarray  # (n, 4) interpolant coefficients, y = y0 + q @ [t,t^2,t^3,t^4]

    def __call__(self, t: float) -> np.ndarray:
        th = (t - self.t0) / self.h
        pows = np.array([th, th * th, th**3, th**4])
        return self.y0 + self.h * (self.q @ pows)


@dataclass
class Trajectory:
    """Accepted (time, state) samples of one integration run."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), n)
    termination: Termination
    interpolants: list = field(default_factory=list, repr=False)

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def terminal_time(self) -> float:
        return float(self.times[-1])

    def __call__(self, t) -> np.ndarray:
        """Dense evaluation (requires settings.dense at integration time)."""
        if not self.interpolants:
            raise ValueError("trajectory was integrated without dense output")
        t = float(t)
        starts = np.array([s.t0 for s in self.interpolants])
        i = int(np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1))
        return self.interpolants[i](t)


def _initial_step(f, t0, y0, f0, t1, rtol, atol):
    # standard two-sample heuristic (Hairer-Norsett-Wanner style)
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t1 - t0)


def integrate(field_fn: Callable, p, x0, t_span, settings: IntegratorSettings = IntegratorSettings(),
              step_callback: Optional[Callable] = None) -> Trajectory:
    """Integrate x' = field_fn(p, x) over t_span = (t0, t1), t1 > t0.

    Local error is controlled against atol + rtol*|y| with the standard
    controller (safety 0.9, step-ratio clamp [0.2, 5.0]). ``step_callback``,
    when given, receives each accepted per-step interpolant and may return
    True to stop the run early (termination reason EVENT).

    Raises IntegrationError on step underflow or a non-finite state, and
    reports Termination.STEP_CAP when ``max_steps`` is exhausted.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"t_span must satisfy t1 > t0, got {t_span}")
    y = np.array(x0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    n = y.size

    def f(t, state):
        return np.asarray(field_fn(p, state), dtype=float)

    k = np.empty((7, n))
    k[0] = f(t0, y)
    h = settings.initial_step or _initial_step(f, t0, y, k[0], t1, settings.rtol, settings.atol)
    h = min(h, settings.max_step, t1 - t0)

    times = [t0]
    states = [y.copy()]
    interps: list[_StepInterp] = []
    t = t0
    termination = Termination.STEP_CAP
    n_steps = 0
    while n_steps < settings.max_steps:
        n_steps += 1
        if h < 16.0 * np.finfo(float).eps * max(abs(t), 1.0):
            raise IntegrationError(f"step size underflow at t={t:.6g} (stiffness signal)")
        last = t + h >= t1
        if last:
            h = t1 - t
        for s in range(1, 7):
            k[s] = f(t + _C[s] * h, y + h * (k[:s].T @ _A[s]))
        y_new = y + h * (k.T @ _B)
        err = h * (k.T @ _E)
        scale = settings.atol + settings.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm <= 1.0:
            # accept
            interp = _StepInterp(t, h, y.copy(), k.T @ _P)
            t += h
            y = y_new.copy()
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state at t={t:.6g}")
            times.append(t)
            states.append(y.copy())
            if settings.dense:
                interps.append(interp)
            if step_callback is not None and step_callback(interp):
                termination = Termination.EVENT
                break
            if last:
                termination = Termination.TIME_REACHED
                break
            k[0] = k[6]  # FSAL
            factor = _GROW_CAP if err_norm == 0.0 else min(_GROW_CAP, _SAFETY * err_norm ** -0.2)
            h = min(h * factor, settings.max_step)
        else:
            # k[0] still holds f(t, y); only stages 1..6 were trial values
            h *= max(_SHRINK_CAP, _SAFETY * err_norm ** -0.2)
    return Trajectory(np.array(times), np.array(states), termination, interps)


def integrate_with_section(field_fn: Callable, p, x0, t_span, section,
                           direction: int = 0, n_crossings: int = 1,
                           settings: IntegratorSettings = IntegratorSettings(),
                           time_tol: float = 1e-10):
    """Integrate and collect transversal crossings of a hyperplane section.

    ``section`` is (normal, offset) defining normal . x = offset;
    ``direction`` restricts to ascending (+1), descending (-1) or any (0)
    crossings. Crossing times are refined on each step's dense interpolant to
    ``time_tol``. Returns (crossing_states, crossing_times, trajectory);
    raises NoCrossingError if the section is never crossed.
    """
    normal = np.asarray(section[0], dtype=float)
    offset = float(section[1])
    if not np.any(normal != 0.0):
        raise ValueError("section normal must be nonzero")
    crossings_t: list[float] = []
    crossings_x: list[np.ndarray] = []

    def g_of(state):
        return float(normal @ state - offset)

    def on_step(interp: _StepInterp) -> bool:
        # subsample the interpolant so a crossing pair inside one step is not missed
        ts = interp.t0 + interp.h * np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        gs = [g_of(interp(tt)) for tt in ts]
        for a in range(4):
            g0, g1 = gs[a], gs[a + 1]
            wanted = (
                (g0 < 0.0 <= g1) if direction > 0
                else (g0 > 0.0 >= g1) if direction < 0
                else ((g0 < 0.0) != (g1 < 0.0)) or g1 == 0.0
            )
            if not wanted or g0 == g1:
                continue
            t_hit = bisect_secant(lambda tt: g_of(interp(tt)), ts[a], ts[a + 1],
                                  f_lo=g0, f_hi=g1, xtol=time_tol)
            crossings_t.append(t_hit)
            crossings_x.append(interp(t_hit))
            if len(crossings_t) >= n_crossings:
                return True
        return False

    traj = integrate(field_fn, p, x0, t_span, settings, step_callback=on_step)
    if not crossings_t:
        raise NoCrossingError(
            f"no {'ascending' if direction > 0 else 'descending' if direction < 0 else ''} "
            f"crossing of the section within t_span {tuple(t_span)}"
        )
    return crossings_x, crossings_t, traj
