"""Base-flow families for the channel: linear (Couette) shear, oscillatory
shears U(y) = y + (A/n) sin(4 n pi y), general sine-series shears
U(y) = y + sum_m a_m sin(m pi y), and tabulated profiles on a CGL grid.

All profiles satisfy the Couette boundary values U(0) = 0, U(1) = 1 exactly.
The viscous dynamics restricted to the shear manifold is the 1D heat equation,
so each sine coefficient decays by exp(-eps (m pi)^2 t); `drift` applies that
factor in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import pi

import numpy as np
from scipy.optimize import brentq

from .chebyshev import cgl_grid, diff_matrix, barycentric_interpolate

__all__ = [
    "ShearProfile",
    "AmplitudeWindow",
    "DriftParams",
    "eval_profile",
    "inflection_points",
    "drift",
    "amplitude_window",
    "WINDOW_LO",
    "WINDOW_HI",
]

# amplitude window in which the oscillatory family is provably unstable
WINDOW_LO = 1.0 / (8.0 * pi)
WINDOW_HI = 1.0 / (4.0 * pi)


@dataclass(frozen=True)
class ShearProfile:
    """A 1D base flow U(y) on [0, 1] with exact derivatives where analytic.

    kind is one of "linear", "oscillatory", "sine-series", "tabulated".
    Oscillatory profiles carry the oscillation index n and amplitude A;
    sine-series profiles carry coefficients (a_1, a_2, ...); tabulated
    profiles carry samples on the CGL grid of matching length.
    """

    kind: str
    n: int = 1
    A: float = 0.0
    coeffs: tuple[float, ...] = field(default_factory=tuple)
    samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "oscillatory", "sine-series", "tabulated"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "oscillatory":
            if self.n < 1 or int(self.n) != self.n:
                raise ValueError("oscillation index n must be a positive integer")
            if self.A < 0:
                raise ValueError("amplitude A must be nonnegative")
        if self.kind == "tabulated":
            if self.samples is None or len(self.samples) < 9:
                raise ValueError("tabulated profile needs >= 9 CGL samples")
            s = np.asarray(self.samples)
            if abs(s[0]) > 1e-12 or abs(s[-1] - 1.0) > 1e-12:
                raise ValueError("tabulated samples must satisfy U(0)=0, U(1)=1")

    # ---- constructors -------------------------------------------------
    @staticmethod
    def linear() -> "ShearProfile":
        return ShearProfile(kind="linear")

    @staticmethod
    def oscillatory(n: int, A: float) -> "ShearProfile":
        return ShearProfile(kind="oscillatory", n=n, A=A)

    @staticmethod
    def sine_series(coeffs) -> "ShearProfile":
        return ShearProfile(kind="sine-series", coeffs=tuple(float(a) for a in coeffs))

    @staticmethod
    def tabulated(samples) -> "ShearProfile":
        return ShearProfile(kind="tabulated", samples=tuple(float(s) for s in samples))

    @staticmethod
    def from_callable(fun, n_grid: int = 256) -> "ShearProfile":
        """Tabulate an arbitrary U(y) with U(0)=0, U(1)=1 on the CGL grid."""
        y = cgl_grid(n_grid)
        return ShearProfile.tabulated(fun(y))

    # ---- evaluation ----------------------------------------------------
    def __call__(self, y, order: int = 0):
        return eval_profile(self, y, order)

    @property
    def delta(self) -> float:
        """1 - 4 pi A, the margin of monotonicity for oscillatory profiles."""
        if self.kind != "oscillatory":
            raise AttributeError("delta is defined for oscillatory profiles")
        return 1.0 - 4.0 * pi * self.A

    def as_sine_coefficients(self) -> np.ndarray:
        """Coefficients a_m of U(y) - y = sum a_m sin(m pi y)."""
        if self.kind == "linear":
            return np.zeros(0)
        if self.kind == "oscillatory":
            a = np.zeros(4 * self.n)
            a[4 * self.n - 1] = self.A / self.n
            return a
        if self.kind == "sine-series":
            return np.asarray(self.coeffs, dtype=float)
        raise ValueError("tabulated profiles have no exact sine representation")


@dataclass(frozen=True)
class AmplitudeWindow:
    """Amplitude diagnostics: delta = 1 - 4 pi A and the window verdict."""

    A: float
    delta: float
    in_window: bool


@dataclass(frozen=True)
class DriftParams:
    """Heat-semigroup drift parameters: epsilon = 1/R (inverse Reynolds), time t."""

    epsilon: float
    t: float

    def __post_init__(self):
        if self.epsilon < 0 or self.t < 0:
            raise ValueError("epsilon and t must be nonnegative")


def _eval_analytic(p: ShearProfile, y: np.ndarray, order: int) -> np.ndarray:
    """Derivative of any order for the analytic kinds (no order cap)."""
    y = np.asarray(y, dtype=float)
    if p.kind == "linear":
        if order == 0:
            return y.copy()
        if order == 1:
            return np.ones_like(y)
        return np.zeros_like(y)
    a = p.as_sine_coefficients()
    m = np.arange(1, len(a) + 1)
    freq = m * pi
    # d^k sin(wy) cycles through sin, cos, -sin, -cos with factor w^k
    phase = order % 4
    w = freq ** order
    trig = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)][phase]
    series = (a * w) @ trig(freq[:, None] * y[None, :])
    if order == 0:
        return y + series
    if order == 1:
        return 1.0 + series
    return series


def eval_profile(p: ShearProfile, y, order: int = 0):
    """U(y) or its derivative of the given order (0..3; tabulated kinds 0..2).

    y may be a scalar or array in [0, 1].
    """
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be in 0..3")
    yarr = np.asarray(y, dtype=float)
    if np.any(yarr < -1e-12) or np.any(yarr > 1.0 + 1e-12):
        raise ValueError("y outside [0, 1]")
    scalar = yarr.ndim == 0
    yarr = np.atleast_1d(yarr)
    if p.kind == "tabulated":
        if order > 2:
            raise ValueError("tabulated profiles support derivatives up to order 2")
        vals = _tabulated_derivative_values(p, order)
        grid = cgl_grid(len(vals) - 1)
        out = barycentric_interpolate(grid, vals, yarr)
    else:
        out = _eval_analytic(p, yarr, order)
    return float(out[0]) if scalar else out


def _tabulated_derivative_values(p: ShearProfile, order: int) -> np.ndarray:
    vals = np.asarray(p.samples, dtype=float)
    if order == 0:
        return vals
    d, _ = diff_matrix(len(vals) - 1)
    for _ in range(order):
        vals = d @ vals
    return vals


def inflection_points(p: ShearProfile, tol: float = 1e-12) -> np.ndarray:
    """Interior zeros of U'' where it changes sign, ascending.

    Oscillatory profiles are handled in closed form: U'' ~ sin(4 n pi y)
    vanishes with a sign change at y = k/(4n), k = 1..4n-1.  Other kinds are
    bracketed on a dense grid and bisected to `tol`.
    """
    if p.kind == "linear":
        return np.zeros(0)
    if p.kind == "oscillatory":
        if p.A == 0.0:
            return np.zeros(0)
        k = np.arange(1, 4 * p.n)
        return k / (4.0 * p.n)

    if p.kind == "sine-series":
        def upp(t):
            return _eval_analytic(p, np.atleast_1d(t), 2)[0]
        n_scan = max(512, 32 * len(p.coeffs))
    else:
        vals = _tabulated_derivative_values(p, 2)
        grid = cgl_grid(len(vals) - 1)

        def upp(t):
            return float(barycentric_interpolate(grid, vals, t))
        n_scan = 4 * len(vals)

    ys = np.linspace(0.0, 1.0, n_scan + 1)[1:-1]
    f = np.array([upp(t) for t in ys])
    roots = []
    for i in range(len(ys) - 1):
        if f[i] == 0.0:
            roots.append(ys[i])
        elif f[i] * f[i + 1] < 0.0:
            roots.append(brentq(upp, ys[i], ys[i + 1], xtol=tol))
    return np.array(sorted(roots))


def drift(p: ShearProfile, d: DriftParams) -> ShearProfile:
    """Heat-semigroup drift of the profile on the shear manifold.

    Each sine coefficient a_m picks up the factor exp(-eps (m pi)^2 t);
    the oscillatory kind stays oscillatory with amplitude
    A exp(-eps (4 n pi)^2 t).  Exact closed form, no time stepping.
    """
    if p.kind == "linear":
        return p
    if p.kind == "oscillatory":
        decay = np.exp(-d.epsilon * (4.0 * p.n * pi) ** 2 * d.t)
        return replace(p, A=p.A * decay)
    if p.kind == "sine-series":
        m = np.arange(1, len(p.coeffs) + 1)
        decay = np.exp(-d.epsilon * (m * pi) ** 2 * d.t)
        return replace(p, coeffs=tuple(np.asarray(p.coeffs) * decay))
    raise ValueError("drift requires an analytic (non-tabulated) profile")


def amplitude_window(A: float) -> AmplitudeWindow:
    """delta = 1 - 4 pi A plus the verdict whether A lies strictly inside
    the instability window (1/(8 pi), 1/(4 pi))."""
    delta = 1.0 - 4.0 * pi * A
    return AmplitudeWindow(A=A, delta=delta, in_window=WINDOW_LO < A < WINDOW_HI)
