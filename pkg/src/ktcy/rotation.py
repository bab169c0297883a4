"""Rotated symplectic forms with rational angle.

The rotated problem solves the same reduced equation for omega_theta in
place of Omega.  A change of variables

    x = cos(theta) p + sin(theta) q,    y = -sin(theta) p + cos(theta) q

turns it into the base equation with relabeled axes on an enlarged periodic
cell: when cos(theta) = m/L and sin(theta) = n/L with coprime integers
(m, n) and L = sqrt(m^2 + n^2), shifting p or q by L moves (x, y) by an
integer lattice vector, so the transplanted solution v(p, q, t) = u(x, y, t)
is (L, L, 1)-periodic.  The cell covers the base torus m^2 + n^2 times, so
the normalization target for the transformed datum G is L^2, not 1.

Irrational angles admit no such periodic cell and are rejected by
construction of :class:`RationalAngle`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import GridSpec, ScalarField, derivative, evaluate, integrate
from .solver import SolveReport, SolverConfig, solve


@dataclass(frozen=True)
class RationalAngle:
    """Coprime pair (m, n) encoding theta with cos = m/L, sin = n/L."""

    m: int
    n: int

    def __post_init__(self):
        for name in ("m", "n"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValueError("m and n must be integers")
            object.__setattr__(self, name, int(v))
        if self.m == 0 and self.n == 0:
            raise ValueError("m^2 + n^2 must be positive")
        if math.gcd(abs(self.m), abs(self.n)) != 1:
            raise ValueError(f"({self.m}, {self.n}) is not a coprime pair")

    @property
    def length(self) -> float:
        """Cell period L = sqrt(m^2 + n^2)."""
        return math.sqrt(self.m * self.m + self.n * self.n)

    @property
    def cos_theta(self) -> float:
        return self.m / self.length

    @property
    def sin_theta(self) -> float:
        return self.n / self.length

    @property
    def theta(self) -> float:
        return math.atan2(self.n, self.m)


def rotated_grid(angle: RationalAngle, n_p: int, n_q: int, n_t: int) -> GridSpec:
    """Grid on the (L, L, 1) periodic cell of the rotated problem."""
    L = angle.length
    return GridSpec(n_p, n_q, n_t, L, L, 1.0)


def _check_rotated_grid(angle: RationalAngle, grid: GridSpec) -> None:
    L = angle.length
    if grid.periods != (L, L, 1.0):
        raise ValueError(
            f"grid periods {grid.periods} do not match the ({angle.m}, {angle.n}) "
            f"cell ({L!r}, {L!r}, 1.0); build the grid with rotated_grid()"
        )


@dataclass(frozen=True)
class RotatedProblem:
    """Transformed datum G on the enlarged cell, ready for the core solver."""

    angle: RationalAngle
    grid: GridSpec
    G: ScalarField
    cell_normalization: float  # integral of e^G over the cell; L^2 for normalized F


def pullback_datum(F: ScalarField, angle: RationalAngle, grid: GridSpec) -> ScalarField:
    """Transplant a unit-box datum to the rotated cell: G(p, q, t) = F(x, y, t).

    F is evaluated spectrally at the rotated points, wrapped modulo 1.  The
    result is (L, L, 1)-periodic because the rotated lattice contains (L, 0)
    and (0, L).
    """
    if F.grid.periods != (1.0, 1.0, 1.0):
        raise ValueError("pullback_datum expects the datum on the unit box")
    _check_rotated_grid(angle, grid)
    c, s = angle.cos_theta, angle.sin_theta
    p = grid.coordinates("x")[:, None, None]
    q = grid.coordinates("y")[None, :, None]
    t = grid.coordinates("t")[None, None, :]
    x = np.mod(c * p + s * q, 1.0)
    y = np.mod(-s * p + c * q, 1.0)
    values = evaluate(F, x, y, np.broadcast_to(t, grid.shape))
    return ScalarField(grid, values)


def rotated_problem(F: ScalarField, angle: RationalAngle, grid: GridSpec) -> RotatedProblem:
    G = pullback_datum(F, angle, grid)
    cell_norm = integrate(G.with_values(np.exp(G.values)))
    return RotatedProblem(angle=angle, grid=grid, G=G, cell_normalization=cell_norm)


@dataclass(frozen=True)
class RotatedSolveReport:
    """Solve report in the rotated frame, tagged with (m, n, L)."""

    angle: RationalAngle
    report: SolveReport
    sup_vp: float              # sup |v_p|; bounded by L for solutions
    cell_normalization: float

    @property
    def v(self) -> ScalarField:
        return self.report.u

    @property
    def period(self) -> float:
        return self.angle.length


def solve_rotated(F: ScalarField, angle: RationalAngle, cfg: SolverConfig) -> RotatedSolveReport:
    """Solve the rotated problem for a normalized unit-box datum F.

    cfg.grid must be an (L, L, 1) cell grid for the given angle.  The core
    solver runs unchanged on the transformed datum (the rotated equation is
    the base equation with relabeled axes, covered by the grid-period
    generalization); the report includes the rotated-frame estimate audit
    with the first-axis gradient bound sup |v_p| <= L.
    """
    if abs(integrate(F.with_values(np.exp(F.values))) - 1.0) > 1e-10:
        raise ValueError("solve_rotated expects a normalized unit-box datum")
    _check_rotated_grid(angle, cfg.grid)
    problem = rotated_problem(F, angle, cfg.grid)
    report = solve(problem.G, cfg)
    sup_vp = float(np.max(np.abs(derivative(report.u, "x", 1).values)))
    return RotatedSolveReport(
        angle=angle,
        report=report,
        sup_vp=sup_vp,
        cell_normalization=problem.cell_normalization,
    )


def base_point_values(v: ScalarField, angle: RationalAngle, x, y, t) -> np.ndarray:
    """Values of the base-torus solution u at arbitrary points, by spectral
    point evaluation of v at the inversely rotated points.

    No resampled field is returned: the inverse rotation maps the unit grid
    off the (L, L, 1) grid, and silent interpolation would hide error.
    """
    c, s = angle.cos_theta, angle.sin_theta
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = c * x - s * y
    q = s * x + c * y
    return evaluate(v, p, q, t)
