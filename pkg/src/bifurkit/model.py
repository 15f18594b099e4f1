"""Two-stage contagion model: vector field, Jacobian, and equilibrium theory.

The model tracks naive (S), weakened (W), promoter (I) and inactive (R)
fractions of a closed population. A naive individual contacting a promoter
either turns promoter directly (probability ``rho``) or is weakened; weakened
individuals turn promoter on a second contact. Promoters retire to R at rate
``alpha``, weakening fades back to S at rate ``gamma``, and inactivity wanes
back to S at rate ``eta``. With the population fixed at 1, W = 1 - S - I - R
and the dynamics reduce to three equations in (S, I, R).

Everything in this module is a closed form: the reduced/full right-hand
sides, the analytic Jacobian, threshold quantities (r0, rho_star, beta_b,
beta_c, beta_delta, r_c), the endemic-equilibrium quadratic, characteristic
polynomial coefficients, Routh-Hurwitz verdicts, and the center-manifold
direction coefficients (a, b) at the transcritical point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "ModelParams",
    "DerivedScalars",
    "EquilibriumKind",
    "EquilibriumSolution",
    "StabilityVerdict",
    "StabilityReport",
    "BifurcationDirection",
    "CcsReport",
    "Scenario",
    "rhs_reduced",
    "rhs_full",
    "jacobian",
    "param_derivative",
    "derived_scalars",
    "endemic_equilibria",
    "dfe_state",
    "characteristic_coefficients",
    "routh_hurwitz_stable",
    "stability_report",
    "ccs_direction",
    "equilibrium_scenario",
]

#: Default marginality tolerance for Routh-Hurwitz sign tests.
TOL_MARGINAL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Rate and probability parameters of the contagion model.

    Parameters
    ----------
    beta : float
        Perfect/imperfect contact rate between promoters and naives (1/time).
    rho : float
        Probability that a contact turns a naive directly into a promoter,
        strictly between 0 and 1.
    alpha : float
        Rate at which promoters become inactive (1/time).
    gamma : float
        Rate at which weakening fades, returning W to S (1/time).
    eta : float
        Rate at which inactivity wanes, returning R to S (1/time).
    beta2 : float, optional
        Second-stage contact rate for weakened individuals. The analysis
        requires ``beta2 == beta``; it is stored separately only so the data
        model can later accommodate the relaxed variant. Defaults to ``beta``.

    Raises
    ------
    ValueError
        If any rate is nonpositive, ``rho`` is outside (0, 1), ``gamma`` is
        smaller than ``alpha`` (standing assumption of the equilibrium
        theory), or ``beta2`` differs from ``beta``.
    """

    beta: float
    rho: float
    alpha: float
    gamma: float
    eta: float
    beta2: Optional[float] = None

    def __post_init__(self):
        if self.beta2 is None:
            object.__setattr__(self, "beta2", self.beta)
        for name in ("beta", "alpha", "gamma", "eta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {v!r}")
        if not (0.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie strictly in (0, 1), got {self.rho!r}")
        if self.gamma < self.alpha:
            raise ValueError(
                f"gamma >= alpha is required (got gamma={self.gamma}, alpha={self.alpha}); "
                "the threshold theory is not derived for gamma < alpha"
            )
        if self.beta2 != self.beta:
            raise ValueError(
                f"beta2 must equal beta (got beta2={self.beta2}, beta={self.beta})"
            )

    def with_value(self, name: str, value: float) -> "ModelParams":
        """Return a copy with one parameter replaced (beta2 tracks beta)."""
        if name == "beta":
            return replace(self, beta=value, beta2=value)
        return replace(self, **{name: value})

    @property
    def kappa(self) -> float:
        """1 + alpha/eta, the factor relating total endemic load to I*."""
        return 1.0 + self.alpha / self.eta


@dataclass(frozen=True)
class DerivedScalars:
    """Closed-form threshold quantities for a parameter set.

    ``r0`` is the basic reproduction number rho*beta/alpha. ``rho_star``
    separates forward from backward transcritical bifurcations. ``beta_b``,
    ``beta_c`` and ``beta_delta`` are the zeros of the endemic quadratic's
    linear coefficient, constant coefficient and discriminant; ``r_c`` is
    ``beta_delta / beta_c``, the reproduction-number threshold below which no
    endemic equilibrium exists in the backward regime.
    """

    r0: float
    kappa: float
    rho_star: float
    r_c: float
    beta_b: float
    beta_c: float
    beta_delta: float


class EquilibriumKind(Enum):
    DFE = "dfe"
    ENDEMIC_PLUS = "endemic_plus"
    ENDEMIC_MINUS = "endemic_minus"


@dataclass(frozen=True)
class EquilibriumSolution:
    """An equilibrium of the reduced system with its quadratic provenance.

    ``phi_coeffs`` holds (a, b, c) of the quadratic a*I^2 + b*I + c whose
    positive roots are the endemic I*-values; ``discriminant`` is b^2 - 4ac.
    For the DFE the quadratic data are still those of the parameter set.
    """

    kind: EquilibriumKind
    s_star: float
    i_star: float
    r_star: float
    phi_coeffs: tuple[float, float, float]
    discriminant: float

    @property
    def state(self) -> np.ndarray:
        return np.array([self.s_star, self.i_star, self.r_star])


class StabilityVerdict(Enum):
    LAS = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class StabilityReport:
    """Characteristic coefficients, spectrum and verdict at an equilibrium."""

    char_coeffs: tuple[float, float, float]
    eigenvalues: np.ndarray
    verdict: StabilityVerdict
    unstable_dim: int


class BifurcationDirection(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class CcsReport:
    """Center-manifold direction data at the transcritical point R0 = 1.

    ``a_coeff`` and ``b_coeff`` are the quadratic normal-form quantities of
    the center-manifold reduction; the bifurcation is backward when both are
    positive and forward when ``a_coeff`` < 0 < ``b_coeff``. ``right_vec``
    and ``left_vec`` are the null eigenvectors of the critical Jacobian used
    in the projection.
    """

    a_coeff: float
    b_coeff: float
    right_vec: np.ndarray
    left_vec: np.ndarray
    direction: BifurcationDirection


class Scenario(Enum):
    NO_ENDEMIC = "no_endemic"
    TWO_ENDEMIC = "two_endemic"
    TWO_COINCIDENT = "two_coincident"
    UNIQUE_ENDEMIC = "unique_endemic"


def dfe_state() -> np.ndarray:
    """The promoter-free equilibrium (1, 0, 0)."""
    return np.array([1.0, 0.0, 0.0])


def rhs_reduced(p: ModelParams, x) -> np.ndarray:
    """Right-hand side of the reduced (S, I, R) system.

    W is eliminated through W = 1 - S - I - R. Pure function; inputs outside
    the simplex are evaluated as-is.
    """
    s, i, r = float(x[0]), float(x[1]), float(x[2])
    w = 1.0 - s - i - r
    return np.array(
        [
            -p.beta * i * s + p.gamma * w + p.eta * r,
            p.rho * p.beta * i * s - p.alpha * i + p.beta * i * w,
            p.alpha * i - p.eta * r,
        ]
    )


def rhs_full(p: ModelParams, x4) -> np.ndarray:
    """Right-hand side of the full (S, W, I, R) system.

    The four components sum to zero, so the total population is conserved.
    """
    s, w, i, r = (float(x4[k]) for k in range(4))
    infect = p.beta * i * s
    second = p.beta2 * i * w
    return np.array(
        [
            -infect + p.gamma * w + p.eta * r,
            (1.0 - p.rho) * infect - second - p.gamma * w,
            second + p.rho * infect - p.alpha * i,
            p.alpha * i - p.eta * r,
        ]
    )


def jacobian(p: ModelParams, x) -> np.ndarray:
    """Analytic Jacobian of `rhs_reduced` at any state (not only equilibria)."""
    s, i, r = float(x[0]), float(x[1]), float(x[2])
    b, g, e = p.beta, p.gamma, p.eta
    return np.array(
        [
            [-b * i - g, -b * s - g, e - g],
            [(p.rho - 1.0) * b * i, b * ((p.rho - 1.0) * s + 1.0 - 2.0 * i - r) - p.alpha, -b * i],
            [0.0, p.alpha, -e],
        ]
    )


def param_derivative(p: ModelParams, x, name: str) -> np.ndarray:
    """Analytic derivative of `rhs_reduced` with respect to one parameter."""
    s, i, r = float(x[0]), float(x[1]), float(x[2])
    w = 1.0 - s - i - r
    if name == "beta":
        return np.array([-i * s, p.rho * i * s + i * w, 0.0])
    if name == "rho":
        return np.array([0.0, p.beta * i * s, 0.0])
    if name == "alpha":
        return np.array([0.0, -i, i])
    if name == "gamma":
        return np.array([w, 0.0, 0.0])
    if name == "eta":
        return np.array([r, 0.0, -r])
    raise ValueError(f"unknown parameter {name!r}")


def derived_scalars(p: ModelParams) -> DerivedScalars:
    """Evaluate all threshold quantities for a parameter set.

    The identity r_c * beta_c == beta_delta holds by construction.
    """
    kap = p.kappa
    gk = p.gamma * kap
    root = math.sqrt(p.alpha * gk)
    rho_star = (-p.alpha + root) / (gk - p.alpha)
    beta_b = p.alpha * (2.0 - p.rho) + p.rho * gk
    beta_c = p.alpha / p.rho
    beta_delta = p.alpha * (2.0 - p.rho) - p.rho * gk + 2.0 * (1.0 - p.rho) * root
    r_c = (
        p.rho * (2.0 - p.rho)
        - p.rho**2 * gk / p.alpha
        + 2.0 * p.rho * (1.0 - p.rho) * root / p.alpha
    )
    return DerivedScalars(
        r0=p.rho * p.beta / p.alpha,
        kappa=kap,
        rho_star=rho_star,
        r_c=r_c,
        beta_b=beta_b,
        beta_c=beta_c,
        beta_delta=beta_delta,
    )


def _phi_coeffs(p: ModelParams) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the endemic quadratic in I*."""
    a = p.beta * p.kappa
    b = p.alpha * (2.0 - p.rho) + p.rho * p.gamma * p.kappa - p.beta
    c = p.gamma * (p.alpha / p.beta - p.rho)
    return a, b, c


def _endemic_from_i(p: ModelParams, i_star: float, kind: EquilibriumKind,
                    coeffs, disc) -> EquilibriumSolution:
    r_star = p.alpha / p.eta * i_star
    s_star = (p.gamma * (1.0 - p.kappa * i_star) + p.alpha * i_star) / (
        p.beta * i_star + p.gamma
    )
    return EquilibriumSolution(
        kind=kind,
        s_star=s_star,
        i_star=i_star,
        r_star=r_star,
        phi_coeffs=coeffs,
        discriminant=disc,
    )


def endemic_equilibria(p: ModelParams) -> list[EquilibriumSolution]:
    """All endemic equilibria (I* > 0), largest I* first.

    Roots of the quadratic are computed with the cancellation-safe formula:
    the larger-magnitude root comes from the discriminant, the other from
    the product c/(a*I*). Returns zero, one or two solutions; a double root
    yields two coincident entries so the count matches the scenario table.
    """
    a, b, c = _phi_coeffs(p)
    disc = b * b - 4.0 * a * c
    coeffs = (a, b, c)
    # a discriminant within rounding of zero is a genuine double root
    disc_floor = 64.0 * np.finfo(float).eps * (b * b + abs(4.0 * a * c))
    if disc < -disc_floor:
        return []
    if abs(disc) <= disc_floor:
        disc = 0.0
    sq = math.sqrt(disc)
    if disc == 0.0:
        i_val = -b / (2.0 * a)
        if i_val <= 0.0:
            return []
        sol = _endemic_from_i(p, i_val, EquilibriumKind.ENDEMIC_PLUS, coeffs, disc)
        twin = _endemic_from_i(p, i_val, EquilibriumKind.ENDEMIC_MINUS, coeffs, disc)
        return [sol, twin]
    q = -0.5 * (b + math.copysign(sq, b))
    roots = sorted((q / a, c / q if q != 0.0 else -b / a), reverse=True)
    out = []
    if roots[0] > 0.0:
        out.append(_endemic_from_i(p, roots[0], EquilibriumKind.ENDEMIC_PLUS, coeffs, disc))
    if roots[1] > 0.0:
        out.append(_endemic_from_i(p, roots[1], EquilibriumKind.ENDEMIC_MINUS, coeffs, disc))
    return out


def characteristic_coefficients(p: ModelParams, e: EquilibriumSolution) -> tuple[float, float, float]:
    """Coefficients (a2, a1, a0) of det(lambda*I - J) at an endemic equilibrium.

    a2 = -trace(J), a1 = sum of principal 2x2 minors, a0 = -det(J), computed
    exactly from the analytic Jacobian. Rejects the DFE, whose spectrum is
    available directly from the Jacobian's triangular structure.
    """
    if e.kind is EquilibriumKind.DFE:
        raise ValueError("characteristic_coefficients expects an endemic equilibrium; "
                         "at the DFE use the Jacobian eigenvalues directly")
    return _char_coeffs_at(p, e.state)


def _char_coeffs_at(p: ModelParams, x) -> tuple[float, float, float]:
    j = jacobian(p, x)
    a2 = -(j[0, 0] + j[1, 1] + j[2, 2])
    a1 = (
        (j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])
        + (j[0, 0] * j[2, 2] - j[0, 2] * j[2, 0])
        + (j[1, 1] * j[2, 2] - j[1, 2] * j[2, 1])
    )
    a0 = -(
        j[0, 0] * (j[1, 1] * j[2, 2] - j[1, 2] * j[2, 1])
        - j[0, 1] * (j[1, 0] * j[2, 2] - j[1, 2] * j[2, 0])
        + j[0, 2] * (j[1, 0] * j[2, 1] - j[1, 1] * j[2, 0])
    )
    return a2, a1, a0


def routh_hurwitz_stable(coeffs, tol_marg: float = TOL_MARGINAL) -> StabilityVerdict:
    """Routh-Hurwitz verdict for a cubic lambda^3 + a2 l^2 + a1 l + a0.

    Stable iff a2 > 0, a0 > 0 and a1*a2 > a0. Any condition within
    ``tol_marg`` of equality yields MARGINAL (fold or Hopf boundary).
    """
    a2, a1, a0 = coeffs
    tests = (a2, a0, a1 * a2 - a0)
    if any(abs(t) <= tol_marg for t in tests):
        return StabilityVerdict.MARGINAL
    if all(t > 0.0 for t in tests):
        return StabilityVerdict.LAS
    return StabilityVerdict.UNSTABLE


def stability_report(p: ModelParams, e: EquilibriumSolution,
                     tol_marg: float = TOL_MARGINAL) -> StabilityReport:
    """Characteristic coefficients, eigenvalues and verdict at an equilibrium.

    The verdict comes from the Routh-Hurwitz tests at endemic equilibria and
    from the sign of rho*beta - alpha at the DFE; the unstable dimension is
    counted from the eigenvalue real parts.
    """
    eig = np.linalg.eigvals(jacobian(p, e.state))
    eig = eig[np.argsort(-eig.real)]
    if e.kind is EquilibriumKind.DFE:
        lead = p.rho * p.beta - p.alpha
        if abs(lead) <= tol_marg:
            verdict = StabilityVerdict.MARGINAL
        elif lead < 0.0:
            verdict = StabilityVerdict.LAS
        else:
            verdict = StabilityVerdict.UNSTABLE
        coeffs = _char_coeffs_at(p, e.state)
    else:
        coeffs = characteristic_coefficients(p, e)
        verdict = routh_hurwitz_stable(coeffs, tol_marg)
    unstable_dim = int(np.sum(eig.real > tol_marg))
    return StabilityReport(
        char_coeffs=coeffs,
        eigenvalues=eig,
        verdict=verdict,
        unstable_dim=unstable_dim,
    )


def dfe_solution(p: ModelParams) -> EquilibriumSolution:
    """The DFE wrapped as an EquilibriumSolution (quadratic data included)."""
    a, b, c = _phi_coeffs(p)
    return EquilibriumSolution(
        kind=EquilibriumKind.DFE,
        s_star=1.0,
        i_star=0.0,
        r_star=0.0,
        phi_coeffs=(a, b, c),
        discriminant=b * b - 4.0 * a * c,
    )


def ccs_direction(p: ModelParams, tol: float = 1e-12) -> CcsReport:
    """Direction of the transcritical bifurcation at R0 = 1.

    Requires beta = alpha/rho (within ``tol``) so the critical Jacobian has a
    simple zero eigenvalue. Builds the explicit null eigenvectors w (right,
    normalized to w_I = 1) and v = (0, 1, 0) (left), and projects the second
    derivatives of the I-equation onto them:

        b = rho                     (always positive)
        a = -2 beta* (w_I^2 + w_I w_R) + 2 (alpha - beta*) w_S w_I

    with beta* = alpha/rho. Backward bifurcation for a > 0, forward for
    a < 0; the sign of a flips exactly at rho = rho_star.
    """
    beta_star = p.alpha / p.rho
    if abs(p.beta - beta_star) > tol * max(1.0, beta_star):
        raise ValueError(
            f"ccs_direction requires beta = alpha/rho = {beta_star} (R0 = 1); got beta={p.beta}"
        )
    w_i = 1.0
    w_r = p.alpha / p.eta
    w_s = -p.alpha / (p.rho * p.gamma) - 1.0 + p.alpha / p.gamma - p.alpha / p.eta
    w = np.array([w_s, w_i, w_r])
    v = np.array([0.0, 1.0, 0.0])
    # second derivatives of f_I at the DFE: f_II = -2 beta*, f_IR = -beta*,
    # f_SI = (rho - 1) beta*; all others vanish.
    a_coeff = (
        -2.0 * beta_star * w_i * w_i
        - 2.0 * beta_star * w_i * w_r
        + 2.0 * (p.rho * beta_star - beta_star) * w_s * w_i
    )
    b_coeff = p.rho
    direction = (
        BifurcationDirection.BACKWARD if a_coeff > 0.0 else BifurcationDirection.FORWARD
    )
    return CcsReport(
        a_coeff=a_coeff,
        b_coeff=b_coeff,
        right_vec=w,
        left_vec=v,
        direction=direction,
    )


def equilibrium_scenario(p: ModelParams, tol: float = 1e-12) -> Scenario:
    """Which case of the equilibrium count theorems the parameters fall in.

    For rho > rho_star: no endemic equilibria when R0 <= 1, a unique one when
    R0 > 1. For rho < rho_star: none when R0 < RC, two (coincident at
    equality) when RC <= R0 < 1, a unique one when R0 >= 1.
    """
    d = derived_scalars(p)
    if p.rho >= d.rho_star:
        return Scenario.UNIQUE_ENDEMIC if d.r0 > 1.0 + tol else Scenario.NO_ENDEMIC
    if d.r0 >= 1.0:
        return Scenario.UNIQUE_ENDEMIC
    if abs(d.r0 - d.r_c) <= tol * max(1.0, abs(d.r_c)):
        return Scenario.TWO_COINCIDENT
    if d.r0 > d.r_c:
        return Scenario.TWO_ENDEMIC
    return Scenario.NO_ENDEMIC
