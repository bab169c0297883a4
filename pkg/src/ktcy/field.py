"""Periodic scalar fields on a rectangular box torus with spectral calculus.

Fields live on a uniform grid over [0, L_x) x [0, L_y) x [0, L_t) and are
differentiated, integrated and interpolated through real FFTs.  All other
modules build on the operations here.

Axis convention: values are indexed ``[i, j, k]`` for the point
``(i*L_x/n_x, j*L_y/n_y, k*L_t/n_t)``.  The text dump format stores x
fastest, then y, then t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

AXES = ("x", "y", "t")
_AXIS_INDEX = {"x": 0, "y": 1, "t": 2}


class GridMismatchError(ValueError):
    """Raised when two fields on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on a box with periods (L_x, L_y, L_t)."""

    n_x: int
    n_y: int
    n_t: int
    L_x: float = 1.0
    L_y: float = 1.0
    L_t: float = 1.0

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_t"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 4 or n % 2 != 0:
                raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("L_x", "L_y", "L_t"):
            L = float(getattr(self, name))
            if not (L > 0.0 and math.isfinite(L)):
                raise ValueError(f"{name} must be a positive finite real, got {L!r}")
            object.__setattr__(self, name, L)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_y, self.n_t)

    @property
    def periods(self) -> tuple[float, float, float]:
        return (self.L_x, self.L_y, self.L_t)

    def volume(self) -> float:
        return self.L_x * self.L_y * self.L_t

    def size(self, axis: str) -> int:
        return self.shape[_AXIS_INDEX[axis]]

    def period(self, axis: str) -> float:
        return self.periods[_AXIS_INDEX[axis]]

    def coordinates(self, axis: str) -> np.ndarray:
        """Sample coordinates along one axis."""
        n, L = self.size(axis), self.period(axis)
        return np.arange(n) * (L / n)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full (X, Y, T) coordinate arrays of shape ``self.shape``."""
        return np.meshgrid(
            self.coordinates("x"),
            self.coordinates("y"),
            self.coordinates("t"),
            indexing="ij",
        )


class ScalarField:
    """Real samples of a periodic function on a :class:`GridSpec`.

    Instances are immutable; arithmetic returns new fields.  Two fields
    combine only if their grids are exactly equal (no silent resampling).
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid {grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise ValueError(f"non-finite value at grid index {bad}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    # -- construction helpers -------------------------------------------

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        """Sibling field on the same grid."""
        return ScalarField(self.grid, values)

    # -- arithmetic ------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridMismatchError(
                    f"grids differ: {self.grid} vs {other.grid}"
                )
            return other.values
        return float(other)

    def __add__(self, other):
        return self.with_values(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self.with_values(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._coerce(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return (
            f"ScalarField(grid={self.grid.shape}, periods={self.grid.periods}, "
            f"sup={np.max(np.abs(self.values)):.3e})"
        )


def sample(f, grid: GridSpec) -> ScalarField:
    """Sample a periodic function f(x, y, t) on the grid.

    ``f`` must accept numpy coordinate arrays (vectorized evaluation).
    Non-finite sample values are rejected with the offending index.
    """
    X, Y, T = grid.meshgrid()
    values = np.broadcast_to(np.asarray(f(X, Y, T), dtype=np.float64), grid.shape)
    return ScalarField(grid, values)


def _mode_numbers(n: int) -> np.ndarray:
    """Integer mode numbers 0..n/2 of the real FFT along one axis."""
    return np.fft.rfftfreq(n, d=1.0 / n)


def derivative(u: ScalarField, axis: str, order: int) -> ScalarField:
    """Fourier-spectral partial derivative along one axis.

    Exact for trigonometric polynomials resolved by the grid.  The Nyquist
    mode of odd-order derivatives is zeroed so derivative fields stay real
    and the discrete operator is skew.
    """
    if axis not in _AXIS_INDEX:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    ax = _AXIS_INDEX[axis]
    n = u.grid.shape[ax]
    L = u.grid.periods[ax]
    m = _mode_numbers(n)
    k = 2.0 * np.pi * m / L
    if order == 1:
        fac = 1j * k
        fac[-1] = 0.0  # Nyquist
    else:
        fac = -(k * k)
    shape = [1, 1, 1]
    shape[ax] = fac.size
    spec = np.fft.rfft(u.values, axis=ax) * fac.reshape(shape)
    return u.with_values(np.fft.irfft(spec, n=n, axis=ax))


def gradient(u: ScalarField) -> tuple[ScalarField, ScalarField, ScalarField]:
    return (derivative(u, "x", 1), derivative(u, "y", 1), derivative(u, "t", 1))


def integrate(u: ScalarField) -> float:
    """Trapezoid quadrature over the box; spectral-exact for periodic data."""
    vol = u.grid.volume()
    return float(np.sum(u.values)) * vol / u.values.size


def mean(u: ScalarField) -> float:
    return integrate(u) / u.grid.volume()


def project_mean_zero(u: ScalarField) -> ScalarField:
    return u.with_values(u.values - np.mean(u.values))


def norms(u: ScalarField) -> dict:
    """Sup and L2 norms of the field and of its spectral gradient."""
    ux, uy, ut = gradient(u)
    grad_sq = ux.values**2 + uy.values**2 + ut.values**2
    scale = u.grid.volume() / u.values.size
    return {
        "sup": float(np.max(np.abs(u.values))),
        "l2": math.sqrt(float(np.sum(u.values**2)) * scale),
        "grad_sup": math.sqrt(float(np.max(grad_sq))),
        "grad_l2": math.sqrt(float(np.sum(grad_sq)) * scale),
    }


def random_band_limited(
    grid: GridSpec,
    rng: np.random.Generator,
    max_mode: int = 3,
    amplitude: float = 1.0,
) -> ScalarField:
    """Random mean-zero field with modes below max_mode per axis, given sup norm.

    Used for property-test corpora and solver warm-start perturbations.
    Keeps well clear of the Nyquist mode so all discrete integration-by-parts
    identities hold exactly.
    """
    if any(max_mode >= n // 2 for n in grid.shape):
        raise ValueError("max_mode must stay below every Nyquist mode")
    noise = rng.standard_normal(grid.shape)
    spec = np.fft.fftn(noise)
    mx = np.fft.fftfreq(grid.n_x, d=1.0 / grid.n_x).astype(int)
    my = np.fft.fftfreq(grid.n_y, d=1.0 / grid.n_y).astype(int)
    mt = np.fft.fftfreq(grid.n_t, d=1.0 / grid.n_t).astype(int)
    MX, MY, MT = np.meshgrid(mx, my, mt, indexing="ij")
    keep = (np.abs(MX) <= max_mode) & (np.abs(MY) <= max_mode) & (np.abs(MT) <= max_mode)
    spec[~keep] = 0.0
    spec[0, 0, 0] = 0.0
    vals = np.fft.ifftn(spec).real
    sup = np.max(np.abs(vals))
    if sup > 0:
        vals *= amplitude / sup
    return ScalarField(grid, vals)


# -- spectral resampling and point evaluation ----------------------------


def _transfer_matrix(n_old: int, n_new: int) -> np.ndarray:
    """Fourier-coefficient transfer for one axis (trig interpolation).

    Maps unnormalized FFT coefficients on n_old samples to coefficients on
    n_new samples of the same band-limited interpolant.  The Nyquist mode is
    split (upsampling) or folded (downsampling) to keep interpolants real.
    """
    T = np.zeros((n_new, n_old))
    half = min(n_old, n_new) // 2
    for m in range(-half + 1, half):
        T[m % n_new, m % n_old] = 1.0
    if n_new > n_old:
        T[half % n_new, half] += 0.5
        T[-half % n_new, half] += 0.5
    elif n_new < n_old:
        T[half, half] += 1.0
        T[half, -half % n_old] += 1.0
    else:
        T[half, half] = 1.0
        # n even: -half aliases to half, already covered
    return T * (n_new / n_old)


def resample(u: ScalarField, grid: GridSpec) -> ScalarField:
    """Spectral interpolation onto a grid with the same periods.

    Exact for fields resolved by both grids; downsampling truncates
    unresolved modes.
    """
    if u.grid.periods != grid.periods:
        raise GridMismatchError("resample requires identical periods")
    if u.grid == grid:
        return u
    spec = np.fft.fftn(u.values)
    Tx = _transfer_matrix(u.grid.n_x, grid.n_x)
    Ty = _transfer_matrix(u.grid.n_y, grid.n_y)
    Tt = _transfer_matrix(u.grid.n_t, grid.n_t)
    spec = np.einsum("ai,bj,ck,ijk->abc", Tx, Ty, Tt, spec, optimize=True)
    return ScalarField(grid, np.fft.ifftn(spec).real)


def _phase_matrix(coords: np.ndarray, n: int, L: float) -> np.ndarray:
    """Evaluation matrix of the band-limited interpolant basis at coords.

    Column j carries mode m_j in FFT ordering; the Nyquist column is the
    real cosine branch, matching the convention that odd-order derivatives
    kill the Nyquist mode.
    """
    m = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    A = np.exp((2j * np.pi / L) * np.outer(coords, m)) / n
    nyq = np.where(m == -(n // 2))[0][0]
    A[:, nyq] = np.cos((2.0 * np.pi * (n // 2) / L) * coords) / n
    return A


def evaluate(u: ScalarField, x, y, t) -> np.ndarray:
    """Evaluate the trigonometric interpolant at arbitrary points.

    x, y, t are broadcast-compatible coordinate arrays; returns an array of
    the broadcast shape.  Reproduces grid samples exactly at grid points.
    """
    x, y, t = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    )
    out_shape = x.shape
    xf = np.mod(x.ravel(), u.grid.L_x)
    yf = np.mod(y.ravel(), u.grid.L_y)
    tf = np.mod(t.ravel(), u.grid.L_t)
    spec = np.fft.fftn(u.values)
    nx, ny, nt = u.grid.shape
    out = np.empty(xf.size)
    chunk = max(1, 2**21 // (ny * nt))
    for lo in range(0, xf.size, chunk):
        hi = min(lo + chunk, xf.size)
        Ax = _phase_matrix(xf[lo:hi], nx, u.grid.L_x)
        Ay = _phase_matrix(yf[lo:hi], ny, u.grid.L_y)
        At = _phase_matrix(tf[lo:hi], nt, u.grid.L_t)
        t1 = Ax @ spec.reshape(nx, ny * nt)
        t2 = np.einsum("sy,syt->st", Ay, t1.reshape(-1, ny, nt))
        out[lo:hi] = np.einsum("st,st->s", At, t2).real
    return out.reshape(out_shape)


# -- text dump format -----------------------------------------------------


def write_field(u: ScalarField, path) -> None:
    """Write the dump format: header ``nx ny nt Lx Ly Lt``, one value per
    line, x fastest, 17 significant digits (bitwise round-trip)."""
    g = u.grid
    lines = [
        f"{g.n_x} {g.n_y} {g.n_t} "
        f"{g.L_x:.17g} {g.L_y:.17g} {g.L_t:.17g}"
    ]
    lines.extend(f"{v:.17g}" for v in u.values.ravel(order="F"))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise ValueError(f"{path}: malformed field dump header")
        nx, ny, nt = (int(w) for w in header[:3])
        Lx, Ly, Lt = (float(w) for w in header[3:])
        grid = GridSpec(nx, ny, nt, Lx, Ly, Lt)
        values = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    if values.size != nx * ny * nt:
        raise ValueError(
            f"{path}: expected {nx * ny * nt} values, found {values.size}"
        )
    return ScalarField(grid, values.reshape(grid.shape, order="F"))
