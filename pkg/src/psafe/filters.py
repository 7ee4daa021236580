"""CBF safety filters on a sampled safety function.

Both filters enforce a single affine constraint ``a . u >= c`` with no input
bounds, so the QP ``min |u - u_nom|^2`` is solved exactly by projecting
onto the half-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleFilterError
from .safety import Probe


@dataclass(frozen=True)
class FilterParams:
    gamma: float = 1.0
    sigma: float = 1.0
    mu1: float = 1.0
    use_dhdt: bool = True

    def __post_init__(self):
        for name in ("gamma", "sigma", "mu1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class FilterResult:
    command: np.ndarray
    slack: float
    active: bool
    h: float
    h_b: float | None = None


def sontag_lambda(a: float, b: float, sigma: float) -> float:
    """Gain of the Sontag-type controller; 0 when ``b == 0``."""
    if b == 0:
        return 0.0
    s = math.sqrt(a * a + sigma * b * b)
    # for a > 0 the rationalized form avoids cancellation in s - a
    return sigma * b / (2.0 * (a + s)) if a > 0 else (s - a) / (2.0 * b)


def sontag_lambda_partials(a: float, b: float, sigma: float) -> tuple[float, float]:
    """``(d lambda / d a, d lambda / d b)``, both 0 when ``b == 0``."""
    if b == 0:
        return 0.0, 0.0
    s = math.sqrt(a * a + sigma * b * b)
    lam = sontag_lambda(a, b, sigma)
    dlam_da = -sigma * b / (2.0 * s * (a + s)) if a > 0 else (a / s - 1.0) / (2.0 * b)
    return dlam_da, sigma / (2.0 * s) - lam / b


def sontag_k1(probe: Probe, params: FilterParams) -> np.ndarray:
    """Auxiliary velocity ``lambda(gamma h, |Dh|^2) Dh``."""
    g = probe.grad
    return sontag_lambda(params.gamma * probe.h, float(g @ g), params.sigma) * g


def _project(a: np.ndarray, c: float, u_nom: np.ndarray) -> tuple[np.ndarray, bool]:
    """Closest point to ``u_nom`` with ``a . u >= c``."""
    lhs = float(a @ u_nom)
    if lhs >= c:
        return u_nom.copy(), False
    aa = float(a @ a)
    if aa == 0:
        raise InfeasibleFilterError(f"constraint 0 >= {c:.3e} cannot be met: zero constraint gradient")
    return u_nom + (c - lhs) / aa * a, True


def filter_r1(probe: Probe, k_nom, params: FilterParams) -> FilterResult:
    """Velocity filter enforcing ``dh/dt + Dh . u >= -gamma h``."""
    k_nom = np.asarray(k_nom, dtype=np.float64)
    dh_dt = probe.dh_dt if params.use_dhdt else 0.0
    c = -params.gamma * probe.h - dh_dt
    u, active = _project(probe.grad, c, k_nom)
    slack = dh_dt + float(probe.grad @ u) + params.gamma * probe.h
    return FilterResult(u, slack, active, probe.h, probe.h)


@dataclass(frozen=True)
class BackstepTerms:
    h_b: float
    grad_y: np.ndarray
    grad_ydot: np.ndarray
    k1: np.ndarray
    phi1: np.ndarray
    dk1_dy: np.ndarray


def backstep_eval(probe: Probe, ydot, params: FilterParams) -> BackstepTerms:
    """Backstepping barrier ``h - |ydot - k1|^2 / (2 mu1)`` and its gradients.

    ``phi1 = (dk1/dy) ydot`` is the time derivative of ``k1`` along the motion.
    """
    ydot = np.asarray(ydot, dtype=np.float64)
    g = probe.grad
    H = probe.hess
    gamma, sigma, mu1 = params.gamma, params.sigma, params.mu1
    a = gamma * probe.h
    b = float(g @ g)
    lam = sontag_lambda(a, b, sigma)
    dlam_da, dlam_db = sontag_lambda_partials(a, b, sigma)
    k1 = lam * g
    # d(lambda)/dy = dlam_da * gamma * Dh + dlam_db * 2 * H Dh
    dlam_dy = dlam_da * gamma * g + dlam_db * 2.0 * (H @ g)
    dk1_dy = lam * H + np.outer(g, dlam_dy)
    phi1 = dk1_dy @ ydot
    err = ydot - k1
    return BackstepTerms(
        h_b=probe.h - float(err @ err) / (2.0 * mu1),
        grad_y=g + dk1_dy.T @ err / mu1,
        grad_ydot=-err / mu1,
        k1=k1,
        phi1=phi1,
        dk1_dy=dk1_dy,
    )


def filter_r2_from_terms(grad_h: np.ndarray, h_b: float, ydot, k1, phi1, w_nom,
                         params: FilterParams) -> FilterResult:
    """Acceleration filter enforcing ``Dh.ydot - (ydot-k1).(w-phi1)/mu1 >= -gamma h_B``."""
    ydot, k1, phi1, w_nom = (np.asarray(v, dtype=np.float64) for v in (ydot, k1, phi1, w_nom))
    err = ydot - k1
    a = -err / params.mu1
    drift = float(grad_h @ ydot) + float(err @ phi1) / params.mu1
    c = -params.gamma * h_b - drift
    w, active = _project(a, c, w_nom)
    slack = drift + float(a @ w) + params.gamma * h_b
    return FilterResult(w, slack, active, float("nan"), h_b)


def filter_r2(probe: Probe, ydot, w_nom, params: FilterParams) -> FilterResult:
    t = backstep_eval(probe, ydot, params)
    r = filter_r2_from_terms(probe.grad, t.h_b, ydot, t.k1, t.phi1, w_nom, params)
    return FilterResult(r.command, r.slack, r.active, probe.h, t.h_b)
