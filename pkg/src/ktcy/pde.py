"""The reduced scalar operator, its continuity path and its linearization.

The nonlinear operator is

    ma_lhs(u) = (u_xx + 1)(u_yy + u_tt + u_t + 1) - u_xy^2 - u_xt^2

and the equation being solved is ma_lhs(u) = e^F.  The linearization at u
is the second-order operator

    L w = P w_xx + Q (w_yy + w_tt) - 2 R w_xy - 2 S w_xt + Q w_t

with P = u_yy + u_tt + u_t + 1, Q = u_xx + 1, R = u_xy, S = u_xt.

All derivatives are spectral; mixed second derivatives compose two
first-order transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import GridMismatchError, ScalarField, derivative


def _second(u, a, b):
    return derivative(derivative(u, a, 1), b, 1)


def ma_lhs(u: ScalarField) -> ScalarField:
    """Left-hand side of the reduced equation."""
    q = derivative(u, "x", 2) + 1.0
    p = derivative(u, "y", 2) + derivative(u, "t", 2) + derivative(u, "t", 1) + 1.0
    r = _second(u, "x", "y")
    s = _second(u, "x", "t")
    return q * p - r * r - s * s


def residual(u: ScalarField, F: ScalarField) -> ScalarField:
    """ma_lhs(u) - e^F."""
    if u.grid != F.grid:
        raise GridMismatchError("residual: u and F live on different grids")
    return ma_lhs(u) - F.with_values(np.exp(F.values))


def continuity_datum(F: ScalarField, tau: float) -> ScalarField:
    """Continuity-path datum F_tau = log(1 - tau + tau e^F).

    Preserves the normalization: the integral of e^{F_tau} equals the box
    volume whenever the integral of e^F does.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if tau == 0.0:
        return F.with_values(np.zeros(F.grid.shape))
    if tau == 1.0:
        return F  # keep the endpoint datum bitwise exact
    return F.with_values(np.log1p(tau * np.expm1(F.values)))


@dataclass(frozen=True)
class LinearizedCoeffs:
    """Coefficient fields of the linearized operator at a state u."""

    P: ScalarField
    Q: ScalarField
    R: ScalarField
    S: ScalarField

    @property
    def grid(self):
        return self.P.grid


def linearize(u: ScalarField) -> LinearizedCoeffs:
    return LinearizedCoeffs(
        P=derivative(u, "y", 2) + derivative(u, "t", 2) + derivative(u, "t", 1) + 1.0,
        Q=derivative(u, "x", 2) + 1.0,
        R=_second(u, "x", "y"),
        S=_second(u, "x", "t"),
    )


def apply_linearized(c: LinearizedCoeffs, w: ScalarField) -> ScalarField:
    if c.grid != w.grid:
        raise GridMismatchError("apply_linearized: coefficient/argument grid mismatch")
    wxx = derivative(w, "x", 2)
    wyy = derivative(w, "y", 2)
    wtt = derivative(w, "t", 2)
    wxy = _second(w, "x", "y")
    wxt = _second(w, "x", "t")
    wt = derivative(w, "t", 1)
    return (
        c.P * wxx
        + c.Q * (wyy + wtt)
        - 2.0 * (c.R * wxy)
        - 2.0 * (c.S * wxt)
        + c.Q * wt
    )


def symbol_eigenvalues(u: ScalarField):
    """Eigenvalue fields of the 3x3 principal-symbol matrix

        [ P  R  S ]
        [ R  Q  0 ]
        [ S  0  Q ]

    from its factored characteristic polynomial: one linear factor Q and a
    quadratic with roots lam_pm.  Returns (lam_minus, lam_plus, Q); the
    discriminant (P - Q)^2 + 4 R^2 + 4 S^2 is nonnegative, so the roots are
    always real and satisfy lam_minus <= Q <= lam_plus.
    """
    c = linearize(u)
    P, Q, R, S = c.P.values, c.Q.values, c.R.values, c.S.values
    half_sum = 0.5 * (P + Q)
    half_disc = 0.5 * np.sqrt((P - Q) ** 2 + 4.0 * R**2 + 4.0 * S**2)
    lam_minus = u.with_values(half_sum - half_disc)
    lam_plus = u.with_values(half_sum + half_disc)
    return lam_minus, lam_plus, c.Q


@dataclass(frozen=True)
class EllipticityReport:
    """Pointwise admissibility diagnostics for a state u against a datum F.

    min_lambda is the infimum of the smallest symbol eigenvalue

        Lambda = (T - sqrt(T^2 - 4 e^F)) / 2,   T = trace factor,

    with the square-root argument clamped at zero (and flagged) when the
    state is far from a solution.  The report never aborts: it is a
    diagnostic for Newton iterates, which are not solutions.
    """

    min_q: float          # min of u_xx + 1
    min_p: float          # min of u_yy + u_tt + u_t + 1
    min_trace: float      # min of laplacian(u) + u_t + 2
    min_lambda: float
    trace_floor: float    # 2 * min e^{F/2}
    sqrt_clamped: bool
    q_positive: bool      # u_xx + 1 > 0 everywhere
    p_positive: bool      # u_yy + u_tt + u_t + 1 > 0 everywhere
    trace_bound_ok: bool  # min_trace >= trace_floor (within tolerance)

    @property
    def admissible(self) -> bool:
        return self.q_positive and self.p_positive


def ellipticity_report(u: ScalarField, F: ScalarField, tol: float = 1e-8) -> EllipticityReport:
    if u.grid != F.grid:
        raise GridMismatchError("ellipticity_report: grid mismatch")
    c = linearize(u)
    min_q = float(np.min(c.Q.values))
    min_p = float(np.min(c.P.values))
    trace = c.P.values + c.Q.values
    min_trace = float(np.min(trace))
    ef = np.exp(F.values)
    disc = trace * trace - 4.0 * ef
    clamped = bool(np.any(disc < 0.0))
    lam = 0.5 * (trace - np.sqrt(np.maximum(disc, 0.0)))
    min_lambda = float(np.min(lam))
    trace_floor = 2.0 * float(np.min(np.exp(0.5 * F.values)))
    return EllipticityReport(
        min_q=min_q,
        min_p=min_p,
        min_trace=min_trace,
        min_lambda=min_lambda,
        trace_floor=trace_floor,
        sqrt_clamped=clamped,
        q_positive=min_q > 0.0,
        p_positive=min_p > 0.0,
        trace_bound_ok=min_trace - trace_floor >= -tol * (1.0 + abs(trace_floor)),
    )


def is_solution(u: ScalarField, F: ScalarField, tol_factor: float = 1e-10) -> bool:
    """Solution test: sup |residual| <= tol_factor * max(1, sup e^F)."""
    r = residual(u, F)
    scale = max(1.0, float(np.max(np.exp(F.values))))
    return float(np.max(np.abs(r.values))) <= tol_factor * scale
