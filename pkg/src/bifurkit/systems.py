"""Parametrized vector-field wrapper shared by the analysis modules.

A ParamSystem bundles a right-hand side with (optionally) its analytic state
Jacobian and parameter derivatives; missing derivatives fall back to central
differences. Parameter containers can be frozen dataclasses (the model's
params), dicts, or anything exposing ``with_value``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import model as _model
from .numerics import fd_jacobian

__all__ = ["ParamSystem", "get_param", "set_param", "model_system", "model_full_system"]


def get_param(p: Any, name: str) -> float:
    if isinstance(p, dict):
        return float(p[name])
    return float(getattr(p, name))


def set_param(p: Any, name: str, value: float) -> Any:
    if hasattr(p, "with_value"):
        return p.with_value(name, value)
    if dataclasses.is_dataclass(p):
        return dataclasses.replace(p, **{name: value})
    if isinstance(p, dict):
        q = dict(p)
        q[name] = value
        return q
    raise TypeError(f"cannot set parameter on container of type {type(p)!r}")


@dataclass(frozen=True)
class ParamSystem:
    """A vector field x' = rhs(p, x) with optional analytic derivatives."""

    dim: int
    rhs: Callable[[Any, np.ndarray], np.ndarray]
    jac: Optional[Callable[[Any, np.ndarray], np.ndarray]] = None
    dfdp: Optional[Callable[[Any, np.ndarray, str], np.ndarray]] = None

    def jacobian(self, p, x) -> np.ndarray:
        if self.jac is not None:
            return np.asarray(self.jac(p, x), dtype=float)
        return fd_jacobian(lambda v: self.rhs(p, v), x)

    def param_derivative(self, p, x, name: str) -> np.ndarray:
        if self.dfdp is not None:
            return np.asarray(self.dfdp(p, x, name), dtype=float)
        v = get_param(p, name)
        h = max(1e-6, 1e-6 * abs(v))
        fp = np.asarray(self.rhs(set_param(p, name, v + h), x), dtype=float)
        fm = np.asarray(self.rhs(set_param(p, name, v - h), x), dtype=float)
        return (fp - fm) / (2.0 * h)


def model_system() -> ParamSystem:
    """The reduced 3-state contagion model as a ParamSystem."""
    return ParamSystem(
        dim=3,
        rhs=_model.rhs_reduced,
        jac=_model.jacobian,
        dfdp=_model.param_derivative,
    )


def model_full_system() -> ParamSystem:
    """The full 4-state contagion model (S, W, I, R); Jacobian by differences."""
    return ParamSystem(dim=4, rhs=_model.rhs_full)
