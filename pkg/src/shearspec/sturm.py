"""Inflection-point Sturm-Liouville problems and the instability certificate.

For a monotone shear U with an inflection point y_i, the singular potential

    Q_i(y) = U''(y) / (U(y) - U(y_i))

is finite after filling the removable singularity with the limit
U'''(y_i)/U'(y_i).  The Dirichlet operator L_i = -d^2/dy^2 + Q_i decides
inviscid instability: a negative eigenvalue -alpha_s^2 of some L_i produces a
neutral Rayleigh mode (alpha_s, U(y_i)) and, for the oscillatory family in its
amplitude window, an unstable band of wavenumbers.

Two independent discretizations are kept deliberately separate: a Chebyshev
collocation production path and a symmetric tridiagonal finite-difference
reference path (`fd_reference_eigenvalues`), so that each guards the other
against spurious modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eig, eigh_tridiagonal

from .chebyshev import cgl_grid, diff_matrix, clenshaw_curtis_weights
from .profiles import ShearProfile, eval_profile, inflection_points, _eval_analytic

__all__ = [
    "SLProblem",
    "SLSpectrum",
    "InstabilityCertificate",
    "SingularPotentialError",
    "ConvergenceError",
    "build_Q",
    "solve_sl",
    "fd_reference_eigenvalues",
    "rayleigh_quotient",
    "PlateauTestFunction",
    "plateau_test_function",
    "lambda1_bound",
    "certify_instability",
    "default_grid_size",
]

# validity threshold for the first-eigenvalue bound: (pi-2)/(pi-1)
DELTA_MAX = (pi - 2.0) / (pi - 1.0)

# nodes closer to the inflection point than this use the series form of Q
_SING_RADIUS = 1e-8


class SingularPotentialError(ValueError):
    """U(y) - U(y_i) vanishes away from y_i; the potential is not removable."""


class ConvergenceError(RuntimeError):
    """Eigenvalues failed the grid-doubling agreement check."""

    def __init__(self, msg, coarse=None, fine=None):
        super().__init__(msg)
        self.coarse = coarse
        self.fine = fine


@dataclass(frozen=True, eq=False)
class SLProblem:
    """Dirichlet Sturm-Liouville problem -phi'' + Q phi = lambda phi on [0, 1]."""

    Q: np.ndarray                       # potential sampled on `grid`
    grid: np.ndarray                    # ascending CGL nodes
    singular_points: tuple              # ((y_i, limit value), ...)
    Q_callable: object = field(repr=False)  # vectorized Q(y) with the fill
    profile: ShearProfile | None = None
    inflection_point: float | None = None


@dataclass(frozen=True, eq=False)
class SLSpectrum:
    """Ascending Dirichlet eigenpairs with oscillation counts.

    Eigenfunctions are L2-normalized grid functions on `grid`; the first is
    sign-fixed positive.  `refinement_delta` records |lambda_N - lambda_2N|
    relative to the doubled-grid value for each retained eigenvalue.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray          # shape (len(grid), k)
    zero_counts: tuple
    grid: np.ndarray
    refinement_delta: np.ndarray


@dataclass(frozen=True, eq=False)
class InstabilityCertificate:
    """Verdict of the inflection-point criterion for a monotone shear.

    `witnesses` lists (y_i, lambda1_i) for every inflection point; the
    certificate fields describe the most negative one.  alpha_n = sqrt(-lambda1)
    is defined only when unstable.
    """

    unstable: bool
    witness_inflection: float | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    alpha_n: float | None = None
    phi_n: np.ndarray | None = None
    grid: np.ndarray | None = None
    problem: SLProblem | None = None
    witnesses: tuple = ()
    profile: ShearProfile | None = None


def default_grid_size(p: ShearProfile) -> int:
    """Collocation size resolving the potential's oscillation (>= 8 points
    per oscillation of Q, floor 256)."""
    if p.kind == "oscillatory":
        return max(256, 64 * p.n)
    if p.kind == "sine-series":
        return max(256, 16 * len(p.coeffs))
    if p.kind == "tabulated":
        return max(256, 2 * (len(p.samples) - 1))
    return 256


def _analytic_Q(p: ShearProfile, y_i: float):
    """Vectorized Q with a 4-term series fill near the inflection point."""
    u_i = eval_profile(p, y_i, 0)
    up_i = eval_profile(p, y_i, 1)
    # series coefficients of U''(y_i + h) and (U(y_i + h) - U(y_i))/h in h
    d = [_eval_analytic(p, np.atleast_1d(y_i), k)[0] for k in range(0, 7)]
    num_c = [d[3], d[4] / 2.0, d[5] / 6.0, d[6] / 24.0]        # U''/h series
    den_c = [d[1], d[3] / 6.0, d[4] / 24.0, d[5] / 120.0]      # (U-U_i)/h series
    # den has no h^1 term because U''(y_i) = 0

    def Qfun(y):
        y = np.asarray(y, dtype=float)
        h = y - y_i
        num = eval_profile(p, y, 2)
        den = eval_profile(p, y, 0) - u_i
        near = np.abs(h) < _SING_RADIUS
        hn = np.where(near, h, 1.0)
        num_s = num_c[0] + hn * (num_c[1] + hn * (num_c[2] + hn * num_c[3]))
        den_s = den_c[0] + hn * hn * (den_c[1] + hn * (den_c[2] + hn * den_c[3]))
        safe_den = np.where(near, 1.0, den)
        return np.where(near, num_s / den_s, num / safe_den)

    return Qfun, d[3] / up_i


def _tabulated_Q(p: ShearProfile, y_i: float):
    from .profiles import _tabulated_derivative_values
    from .chebyshev import barycentric_interpolate

    vals0 = np.asarray(p.samples, dtype=float)
    grid = cgl_grid(len(vals0) - 1)
    d, _ = diff_matrix(len(vals0) - 1)
    vals2 = d @ (d @ vals0)
    vals3 = d @ vals2
    u_i = float(barycentric_interpolate(grid, vals0, y_i))
    limit = float(barycentric_interpolate(grid, vals3, y_i)
                  / barycentric_interpolate(grid, d @ vals0, y_i))

    def Qfun(y):
        y = np.asarray(y, dtype=float)
        num = barycentric_interpolate(grid, vals2, y)
        den = barycentric_interpolate(grid, vals0, y) - u_i
        near = np.abs(y - y_i) < 1e-6
        return np.where(near, limit, num / np.where(near, 1.0, den))

    return Qfun, limit


def build_Q(p: ShearProfile, y_i: float, n_grid: int | None = None) -> SLProblem:
    """Singular potential U''/(U - U(y_i)) regularized at the inflection point.

    Raises ValueError if U''(y_i) != 0 and SingularPotentialError if the
    denominator vanishes away from y_i (non-monotone profile).
    """
    if p.kind == "linear":
        raise ValueError("linear shear has no inflection point")
    upp_i = eval_profile(p, y_i, 2)
    scale = max(abs(eval_profile(p, 0.25, 2)), abs(eval_profile(p, 0.75, 2)), 1.0)
    if abs(upp_i) > 1e-7 * scale:
        raise ValueError(f"y_i={y_i} is not an inflection point (U''={upp_i:.3e})")

    n = n_grid if n_grid is not None else default_grid_size(p)
    if n % 2:
        n += 1  # keep y = 1/2 on the grid
    grid = cgl_grid(n)

    if p.kind == "tabulated":
        Qfun, limit = _tabulated_Q(p, y_i)
    else:
        Qfun, limit = _analytic_Q(p, y_i)

    # monotonicity guard: U - U(y_i) may vanish only at y_i
    u_i = eval_profile(p, y_i, 0)
    den = eval_profile(p, grid, 0) - u_i
    away = np.abs(grid - y_i) > 1e-4
    if np.any(np.abs(den[away]) < 1e-10):
        raise SingularPotentialError(
            "U(y) - U(y_i) vanishes away from the inflection point; "
            "profile is not monotone")

    return SLProblem(Q=Qfun(grid), grid=grid, singular_points=((y_i, limit),),
                     Q_callable=Qfun, profile=p, inflection_point=y_i)


def _collocation_eigs(Qfun, n: int, k: int):
    d, y = diff_matrix(n)
    d2 = (d @ d)[1:-1, 1:-1]
    lmat = -d2 + np.diag(Qfun(y[1:-1]))
    w, v = eig(lmat)
    if np.max(np.abs(w.imag)) > 1e-6 * max(1.0, np.max(np.abs(w.real))):
        raise ConvergenceError("collocation produced non-real eigenvalues")
    order = np.argsort(w.real)
    w = w.real[order][:k]
    v = v.real[:, order][:, :k]
    return w, v, y


def solve_sl(prob: SLProblem, k: int = 4, rtol: float = 1e-8) -> SLSpectrum:
    """First k Dirichlet eigenpairs by Chebyshev collocation.

    Eigenvalues must agree to relative `rtol` under one grid doubling,
    otherwise ConvergenceError (carrying both values) is raised.  The
    reported eigenpairs come from the doubled grid.
    """
    n = len(prob.grid) - 1
    w_c, _, _ = _collocation_eigs(prob.Q_callable, n, k)
    w_f, v_f, y_f = _collocation_eigs(prob.Q_callable, 2 * n, k)
    scale = np.maximum(np.abs(w_f), 1.0)
    delta = np.abs(w_c - w_f) / scale
    if np.any(delta > rtol):
        raise ConvergenceError(
            f"eigenvalues not converged under grid doubling (max rel delta "
            f"{delta.max():.2e})", coarse=w_c, fine=w_f)

    wq = clenshaw_curtis_weights(2 * n)
    funcs = np.zeros((2 * n + 1, k))
    zero_counts = []
    for j in range(k):
        f = np.zeros(2 * n + 1)
        f[1:-1] = v_f[:, j]
        f /= np.sqrt(wq @ f ** 2)
        interior = f[1:-1]
        peak = np.argmax(np.abs(interior))
        flip = interior[peak] < 0 if j == 0 else interior[0] < 0
        if flip:
            f = -f
        interior = f[1:-1]
        sig = interior[np.abs(interior) > 1e-9 * np.abs(interior).max()]
        zero_counts.append(int(np.sum(sig[:-1] * sig[1:] < 0)))
        funcs[:, j] = f
    return SLSpectrum(eigenvalues=w_f, eigenfunctions=funcs,
                      zero_counts=tuple(zero_counts), grid=y_f,
                      refinement_delta=delta)


def fd_reference_eigenvalues(prob: SLProblem, k: int = 4, n: int = 4096,
                             richardson: bool = True) -> np.ndarray:
    """Independent second-order finite-difference eigenvalues (tridiagonal,
    bisection-based), with one Richardson extrapolation step by default."""
    def solve(m):
        h = 1.0 / m
        y = np.linspace(h, 1.0 - h, m - 1)
        diag = 2.0 / h ** 2 + prob.Q_callable(y)
        off = -np.ones(m - 2) / h ** 2
        w, _ = eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
        return w

    w1 = solve(n)
    if not richardson:
        return w1
    w2 = solve(2 * n)
    return (4.0 * w2 - w1) / 3.0


@dataclass(frozen=True)
class PlateauTestFunction:
    """Piecewise-linear plateau centered at y = 1/2: height 1/(4n) on
    |y - 1/2| <= 1/(8n), linear to zero at |y - 1/2| = 3/(8n).

    Both quadratic integrals are closed-form: the ramp-slope integral of
    (phi')^2 is 1/(4n) per half-interval and the mass integral of phi^2 is
    (5/6)(1/(4n))^3 per half-interval.
    """

    n: int

    @property
    def height(self) -> float:
        return 1.0 / (4.0 * self.n)

    @property
    def breakpoints(self) -> np.ndarray:
        b = np.array([-3.0, -1.0, 1.0, 3.0]) / (8.0 * self.n) + 0.5
        return b

    @property
    def grad_sq_integral(self) -> float:
        return 2.0 * (1.0 / (4.0 * self.n))

    @property
    def sq_integral(self) -> float:
        return 2.0 * (5.0 / 6.0) * (1.0 / (4.0 * self.n)) ** 3

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        r = np.abs(y - 0.5)
        ramp = 3.0 / (8.0 * self.n) - r
        return np.clip(np.minimum(self.height, ramp), 0.0, None)

    def on_grid(self, grid: np.ndarray) -> np.ndarray:
        return self(grid)


def plateau_test_function(n: int) -> PlateauTestFunction:
    if n < 1:
        raise ValueError("n must be >= 1")
    return PlateauTestFunction(n=n)


def rayleigh_quotient(prob: SLProblem, phi) -> float:
    """Rayleigh-Ritz quotient (int (phi')^2 + Q phi^2) / int phi^2.

    `phi` is either a grid function on prob.grid (spectral differentiation
    and Clenshaw-Curtis quadrature) or a PlateauTestFunction (closed-form
    quadratic integrals, adaptive quadrature against Q piece by piece).
    Always an upper bound for lambda_1 up to quadrature error.
    """
    if isinstance(phi, PlateauTestFunction):
        num_grad = phi.grad_sq_integral
        den = phi.sq_integral
        pieces = np.concatenate([[0.0], phi.breakpoints, [1.0]])
        num_q = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            if b - a < 1e-14:
                continue
            val, _ = quad(lambda t: prob.Q_callable(t) * phi(t) ** 2, a, b,
                          limit=400, epsabs=1e-13, epsrel=1e-11)
            num_q += val
        return (num_grad + num_q) / den

    phi = np.asarray(phi, dtype=float)
    if phi.shape != prob.grid.shape:
        raise ValueError("grid function must live on the problem grid")
    if abs(phi[0]) > 1e-10 or abs(phi[-1]) > 1e-10:
        raise ValueError("test function must vanish at both endpoints")
    n = len(prob.grid) - 1
    d, _ = diff_matrix(n)
    w = clenshaw_curtis_weights(n)
    den = w @ phi ** 2
    if den < 1e-300:
        raise ZeroDivisionError("test function is identically zero")
    num = w @ ((d @ phi) ** 2 + prob.Q * phi ** 2)
    return float(num / den)


def lambda1_bound(n: int, delta: float) -> float:
    """Closed-form upper bound -(6/5)(4n)^2 [pi(1-delta)/(2-delta) - 1] for
    the first eigenvalue; valid (negative) only for 0 < delta < (pi-2)/(pi-1)."""
    if not 0.0 < delta < DELTA_MAX:
        raise ValueError(
            f"bound not negative: delta={delta:.6f} outside (0, {DELTA_MAX:.6f})")
    return -(6.0 / 5.0) * (4.0 * n) ** 2 * (pi * (1.0 - delta) / (2.0 - delta) - 1.0)


def certify_instability(p: ShearProfile, k: int = 2,
                        n_grid: int | None = None) -> InstabilityCertificate:
    """Scan every inflection point, solve each L_i, and certify instability.

    The certificate reports the witness with the most negative lambda_1 (all
    witnesses are retained for endpoint analysis).  A cheap finite-difference
    prescreen selects candidates; the witness is then solved by collocation
    with the doubling check.  Monotonicity of U is a precondition.
    """
    if p.kind == "linear":
        return InstabilityCertificate(unstable=False, profile=p)

    dense = np.linspace(0.0, 1.0, 4097)
    if np.min(eval_profile(p, dense, 1)) <= 0.0:
        raise ValueError("instability criterion needs a monotone profile")

    pts = inflection_points(p)
    if len(pts) == 0:
        return InstabilityCertificate(unstable=False, profile=p)

    witnesses = []
    problems = {}
    for y_i in pts:
        prob = build_Q(p, float(y_i), n_grid=n_grid)
        lam1 = fd_reference_eigenvalues(prob, k=1, n=2048, richardson=False)[0]
        witnesses.append((float(y_i), float(lam1)))
        problems[float(y_i)] = prob

    y_best, lam_best = min(witnesses, key=lambda t: t[1])
    if lam_best >= 0.0:
        return InstabilityCertificate(unstable=False, witnesses=tuple(witnesses),
                                      profile=p)

    prob = problems[y_best]
    spec = solve_sl(prob, k=max(k, 2))
    lam1 = float(spec.eigenvalues[0])
    witnesses = [(y, lam1 if y == y_best else l) for y, l in witnesses]
    return InstabilityCertificate(
        unstable=True,
        witness_inflection=y_best,
        lambda1=lam1,
        lambda2=float(spec.eigenvalues[1]),
        alpha_n=sqrt(-lam1),
        phi_n=spec.eigenfunctions[:, 0],
        grid=spec.grid,
        problem=prob,
        witnesses=tuple(witnesses),
        profile=p,
    )
