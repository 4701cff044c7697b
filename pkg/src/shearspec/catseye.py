"""Travelling-wave bifurcation from the oscillatory shear: Kelvin cat's eyes.

In the frame moving with the inflection value 1/2, the shear's relative
stream function

    psi*(y) = (y - 1/2)^2 / 2 - (A /(4 n^2 pi)) (cos(4 n pi y) - 1)

solves psi*'' = f(psi*) for a nonlinearity f recovered by inverting psi* on
the monotone half-interval.  The inversion has a square-root fold at the eye
center psi* = 0, but f itself is analytic there: substituting y = 1/2 + i t
parameterizes the continuation of f to negative arguments in closed form, so
the table needs no one-sided extrapolation.

Travelling waves solve

    alpha^2 phi_xixi + phi_yy + 1 - f(phi + (y - 1/2)^2 / 2) = 0

for (phi, alpha^2), even and 2 pi periodic in xi, with the amplitude pinned by
projecting phi - phi* onto the kernel direction phi_n(y) cos(xi).  At leading
order the wave is phi* + beta phi_n cos(xi) and its streamlines close into one
cat's eye per period: a saddle at (xi, y) = (0, 1/2) and a center at (pi, 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve

from .chebyshev import (barycentric_interpolate, cgl_grid,
                        clenshaw_curtis_weights, diff_matrix)
from .profiles import ShearProfile, amplitude_window, eval_profile
from .sturm import InstabilityCertificate

__all__ = [
    "NonlinearityF",
    "TravellingWave",
    "CriticalPoint",
    "NewtonDivergenceError",
    "build_f",
    "psi_star_rel",
    "leading_order_wave",
    "newton_branch",
    "critical_points",
    "streamlines",
]


class NewtonDivergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class NonlinearityF:
    """Tabulated vorticity-stream relation f with exact slopes at each knot.

    The knots are (psi, f, f') triples, ascending in psi, assembled from the
    y-parameterized branch (psi >= 0) and the analytically continued branch
    (psi < 0); the cubic Hermite interpolant then matches f' = Q at every
    sample by construction, with the eye-center slope f'(0) = Q(1/2) exact.
    """

    knots: np.ndarray
    values: np.ndarray
    derivative_table: np.ndarray
    domain: tuple
    _spline: CubicHermiteSpline
    _dspline: object

    def __call__(self, psi):
        return self._spline(psi)

    def derivative(self, psi):
        return self._dspline(psi)


@dataclass(frozen=True, eq=False)
class TravellingWave:
    """A 2 pi periodic, even-in-xi relative stream function field.

    psi has shape (len(xi), len(y)) on the full-period grid (xi includes both
    0 and 2 pi); cos_coeffs holds the cosine-mode representation used for
    off-grid evaluation and derivatives.
    """

    beta: float
    alpha_sq: float
    xi: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    order: str                        # "leading" | "newton"
    profile: ShearProfile
    cos_coeffs: np.ndarray            # shape (K+1, len(y))
    newton_residual: float = 0.0

    def value(self, xi_pt, y_pt, d_xi: int = 0, d_y: int = 0):
        """Evaluate psi (or a mixed derivative) at one off-grid point."""
        k = np.arange(self.cos_coeffs.shape[0])
        coeffs = self.cos_coeffs
        if d_y:
            d, _ = diff_matrix(len(self.y) - 1)
            for _ in range(d_y):
                coeffs = coeffs @ d.T
        prof = np.array([barycentric_interpolate(self.y, coeffs[j], y_pt)
                         for j in range(coeffs.shape[0])])
        phase = d_xi % 4
        trig = [np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin][phase]
        return float((k ** d_xi * trig(k * xi_pt)) @ prof)


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple                    # (xi, y)
    classification: str                # "saddle" | "center" | "unclassified"
    hessian_det: float


def psi_star_rel(p: ShearProfile, y):
    """Relative stream function of the shear in the half-speed frame."""
    if p.kind != "oscillatory":
        raise ValueError("relative stream function in closed form needs the "
                         "oscillatory family")
    n, A = p.n, p.A
    y = np.asarray(y, dtype=float)
    return 0.5 * (y - 0.5) ** 2 - (A / (4 * n ** 2 * pi)) * (np.cos(4 * n * pi * y) - 1.0)


def _phi_shear(p: ShearProfile, y):
    """psi* minus the parabolic part: the xi-independent root of the branch."""
    n, A = p.n, p.A
    y = np.asarray(y, dtype=float)
    return -(A / (4 * n ** 2 * pi)) * (np.cos(4 * n * pi * y) - 1.0)


def build_f(p: ShearProfile, n_knots: int = 3000) -> NonlinearityF:
    """Recover f by inverting psi* on [y_lo, 1/2] plus the exact continuation
    to negative psi; returns a cubic Hermite table with f' = Q at every knot.

    Precondition: oscillatory profile in the amplitude window (monotone,
    symmetric); the y-branch extends below y = 0 so the table covers field
    values slightly above psi*(0) as well.
    """
    if p.kind != "oscillatory":
        raise ValueError("f reconstruction implemented for the oscillatory family")
    if not amplitude_window(p.A).in_window:
        raise ValueError("amplitude outside the instability window; psi* "
                         "monotonicity not guaranteed")
    n, A = p.n, p.A

    # branch psi >= 0: parameterized by y on [y_lo, 1/2], strictly decreasing
    y_lo = -0.25 / n
    ys = np.linspace(y_lo, 0.5, n_knots)
    dpsi = ys + (A / n) * np.sin(4 * n * pi * ys) - 0.5   # U(y) - 1/2, < 0 here
    if np.any(dpsi[:-1] >= 0.0):
        raise ValueError("psi* not monotone on the half-interval")
    psi_y = psi_star_rel(p, np.clip(ys, None, None))
    f_y = 1.0 + 4 * pi * A * np.cos(4 * n * pi * ys)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp_y = (-16 * n * pi ** 2 * A * np.sin(4 * n * pi * ys)) / dpsi
    # y = 1/2 knot handled on the continued branch below

    # branch psi < 0: y = 1/2 + i t, all quantities real and closed-form
    ts = np.linspace(0.0, 0.5 / n, max(800, n_knots // 3))
    psi_t = -0.5 * ts ** 2 - (A / (4 * n ** 2 * pi)) * (np.cosh(4 * n * pi * ts) - 1.0)
    f_t = 1.0 + 4 * pi * A * np.cosh(4 * n * pi * ts)
    dps = -ts - (A / n) * np.sinh(4 * n * pi * ts)
    q_center = -64 * n ** 2 * pi ** 3 * A / (1.0 + 4 * pi * A)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp_t = (16 * n * pi ** 2 * A * np.sinh(4 * n * pi * ts)) / dps
    fp_t[0] = q_center

    psis = np.concatenate([psi_t[::-1], psi_y[::-1][1:]])
    fs = np.concatenate([f_t[::-1], f_y[::-1][1:]])
    fps = np.concatenate([fp_t[::-1], fp_y[::-1][1:]])
    fps[np.isclose(psis, 0.0, atol=1e-15)] = q_center
    order = np.argsort(psis)
    psis, fs, fps = psis[order], fs[order], fps[order]
    keep = np.concatenate([[True], np.diff(psis) > 1e-14])
    psis, fs, fps = psis[keep], fs[keep], fps[keep]

    spline = CubicHermiteSpline(psis, fs, fps)
    return NonlinearityF(knots=psis, values=fs, derivative_table=fps,
                         domain=(float(psis[0]), float(psis[-1])),
                         _spline=spline, _dspline=spline.derivative())


def _phi_n_on(cert: InstabilityCertificate, y: np.ndarray) -> np.ndarray:
    return barycentric_interpolate(cert.grid, cert.phi_n, y)


def _full_period_field(coeffs: np.ndarray, n_xi_out: int) -> tuple[np.ndarray, np.ndarray]:
    xi = np.linspace(0.0, 2.0 * pi, n_xi_out + 1)
    k = np.arange(coeffs.shape[0])
    return xi, np.cos(np.outer(xi, k)) @ coeffs


def leading_order_wave(p: ShearProfile, cert: InstabilityCertificate,
                       beta: float, n_xi: int = 128,
                       n_y: int = 128) -> TravellingWave:
    """The first-order bifurcation field psi* + beta phi_n(y) cos(xi) at
    alpha^2 = alpha_n^2, assembled exactly from its formula."""
    if not cert.unstable:
        raise ValueError("certificate does not witness instability")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    y = cgl_grid(n_y)
    coeffs = np.zeros((2, n_y + 1))
    coeffs[0] = psi_star_rel(p, y)
    coeffs[1] = beta * _phi_n_on(cert, y)
    xi, psi = _full_period_field(coeffs, n_xi)
    return TravellingWave(beta=beta, alpha_sq=cert.alpha_n ** 2, xi=xi, y=y,
                          psi=psi, order="leading", profile=p,
                          cos_coeffs=coeffs)


def newton_branch(p: ShearProfile, cert: InstabilityCertificate, beta: float,
                  grid: tuple[int, int] = (24, 128), n_xi_out: int = 128,
                  tol: float = 1e-11, max_iter: int = 30) -> TravellingWave:
    """Solve the travelling-wave equation for (phi, alpha^2) at amplitude beta.

    Discretization: cosine collocation on the half period (evenness built in)
    times Chebyshev in y; the bordered Newton system closes alpha^2 with the
    kernel-projection constraint <phi - phi*, phi_n cos xi> / ||.||^2 = beta.
    Divergence raises NewtonDivergenceError carrying the last residual; for
    beta above ~2e-3 the solve walks up a beta ladder reseeding each rung.
    """
    if not cert.unstable:
        raise ValueError("certificate does not witness instability")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    k_modes, n_y = grid
    fnl = build_f(p)
    y = cgl_grid(n_y)
    yi = y[1:-1]
    d, _ = diff_matrix(n_y)
    d2y = (d @ d)[1:-1, 1:-1]
    xi = pi * np.arange(k_modes + 1) / k_modes
    vand = np.cos(np.outer(xi, np.arange(k_modes + 1)))
    dxx = vand @ np.diag(-np.arange(k_modes + 1) ** 2.0) @ np.linalg.inv(vand)

    q_par = 0.5 * (yi - 0.5) ** 2
    phi_star = _phi_shear(p, yi)
    phi_n = _phi_n_on(cert, yi)
    alpha_n_sq = cert.alpha_n ** 2

    n_int = n_y - 1
    n_tot = (k_modes + 1) * n_int
    lap_y = np.kron(np.eye(k_modes + 1), d2y)
    dxx_big = np.kron(dxx, np.eye(n_int))
    base = np.kron(np.ones(k_modes + 1), phi_star)
    qbig = np.kron(np.ones(k_modes + 1), q_par)
    kernel = np.kron(np.cos(xi), phi_n)
    w_xi = np.full(k_modes + 1, pi / k_modes)
    w_xi[0] *= 0.5
    w_xi[-1] *= 0.5
    w_big = np.kron(2.0 * w_xi, clenshaw_curtis_weights(n_y)[1:-1])
    ker_norm = w_big @ kernel ** 2
    proj = (w_big * kernel) / ker_norm

    def assemble_wave(u, a2, res):
        # phi obeys homogeneous Dirichlet walls; psi_rel adds the parabola
        psi_coeffs = np.zeros((k_modes + 1, n_y + 1))
        psi_coeffs[:, 1:-1] = np.linalg.inv(vand) @ u.reshape(k_modes + 1, n_int)
        psi_coeffs[0] += 0.5 * (y - 0.5) ** 2
        xi_out, psi = _full_period_field(psi_coeffs, n_xi_out)
        return TravellingWave(beta=beta, alpha_sq=float(a2), xi=xi_out, y=y,
                              psi=psi, order="newton", profile=p,
                              cos_coeffs=psi_coeffs, newton_residual=float(res))

    if beta == 0.0:
        u0 = base.copy()
        res0 = float(np.max(np.abs(lap_y @ u0 + 1.0 - fnl(u0 + qbig))))
        return assemble_wave(u0, alpha_n_sq, res0)

    def solve_at(beta_t, u, a2):
        for it in range(max_iter):
            arg = u + qbig
            f_res = a2 * (dxx_big @ u) + lap_y @ u + 1.0 - fnl(arg)
            g_res = proj @ (u - base) - beta_t
            res = max(float(np.max(np.abs(f_res))), abs(float(g_res)))
            if res < tol:
                return u, a2, res
            jac = a2 * dxx_big + lap_y - np.diag(fnl.derivative(arg))
            big = np.zeros((n_tot + 1, n_tot + 1))
            big[:n_tot, :n_tot] = jac
            big[:n_tot, n_tot] = dxx_big @ u
            big[n_tot, :n_tot] = proj
            rhs = -np.concatenate([f_res, [g_res]])
            try:
                step = solve(big, rhs)
            except np.linalg.LinAlgError:
                return None, None, res
            u = u + step[:n_tot]
            a2 = a2 + step[n_tot]
            if not np.isfinite(a2) or abs(a2) > 100 * alpha_n_sq:
                return None, None, res
        return None, None, res

    ladder = [beta]
    if beta > 2e-3:
        ladder = list(np.geomspace(1e-3, beta, max(2, int(np.log2(beta / 1e-3)) + 2)))
    u = base + ladder[0] * kernel
    a2 = alpha_n_sq
    last_res = np.inf
    for beta_t in ladder:
        u_try, a2_try, last_res = solve_at(beta_t, u + (beta_t - (proj @ (u - base))) * kernel, a2)
        if u_try is None:
            raise NewtonDivergenceError(
                f"Newton failed at beta={beta_t:g} (last residual {last_res:.2e})",
                residual=last_res)
        u, a2 = u_try, a2_try
    return assemble_wave(u, a2, last_res)


def critical_points(w: TravellingWave, seed_density: tuple[int, int] = (24, 24),
                    tol: float = 1e-12) -> list[CriticalPoint]:
    """Interior critical points of psi by damped Newton on the gradient from
    a seed lattice, deduplicated modulo 2 pi and Morse-classified by the
    Hessian determinant (saddle < 0 < center; |det| below tolerance reports
    unclassified)."""
    if w.beta == 0.0:
        return []

    def grad(pt):
        return np.array([w.value(pt[0], pt[1], d_xi=1),
                         w.value(pt[0], pt[1], d_y=1)])

    def hess(pt):
        return np.array([
            [w.value(pt[0], pt[1], d_xi=2), w.value(pt[0], pt[1], d_xi=1, d_y=1)],
            [w.value(pt[0], pt[1], d_xi=1, d_y=1), w.value(pt[0], pt[1], d_y=2)],
        ])

    scale = np.max(np.abs(w.psi))
    found = []
    xi_seeds = np.linspace(0.0, 2.0 * pi, seed_density[0], endpoint=False)
    y_seeds = np.linspace(0.05, 0.95, seed_density[1])
    for xs in xi_seeds:
        for ys in y_seeds:
            pt = np.array([xs, ys])
            ok = False
            for _ in range(40):
                g = grad(pt)
                if np.linalg.norm(g) < tol * max(scale, 1.0):
                    ok = True
                    break
                h = hess(pt)
                try:
                    step = np.linalg.solve(h, -g)
                except np.linalg.LinAlgError:
                    break
                step_len = np.linalg.norm(step)
                if step_len > 0.5:
                    step *= 0.5 / step_len
                pt = pt + step
                if not (0.0 < pt[1] < 1.0):
                    break
                pt[0] = np.mod(pt[0], 2.0 * pi)
            if not ok:
                continue
            if any(min(abs(pt[0] - q[0]), 2 * pi - abs(pt[0] - q[0])) < 1e-6
                   and abs(pt[1] - q[1]) < 1e-6 for q, _ in found):
                continue
            found.append((pt.copy(), hess(pt)))

    out = []
    for pt, h in found:
        det = float(np.linalg.det(h))
        if abs(det) < 1e-10 * max(scale, 1.0) ** 2:
            cls = "unclassified"
        elif det < 0:
            cls = "saddle"
        else:
            cls = "center"
        out.append(CriticalPoint(location=(float(pt[0]), float(pt[1])),
                                 classification=cls, hessian_det=det))
    out.sort(key=lambda cp: cp.location)
    return out


def streamlines(w: TravellingWave, levels) -> list[tuple[float, list]]:
    """Marching-squares contours of psi per level, as (level, [polyline])
    pairs with polylines in (xi, y) coordinates.  Segments that meet across
    the periodic seam xi = 0 ~ 2 pi are stitched."""
    from skimage import measure

    out = []
    lo, hi = w.psi.min(), w.psi.max()
    for lev in levels:
        if lev < lo or lev > hi:
            out.append((float(lev), []))
            continue
        raw = measure.find_contours(w.psi, lev)
        polys = []
        for seg in raw:
            xi_c = np.interp(seg[:, 0], np.arange(len(w.xi)), w.xi)
            y_c = np.interp(seg[:, 1], np.arange(len(w.y)), w.y)
            polys.append(np.column_stack([xi_c, y_c]))
        polys = _stitch_periodic(polys)
        out.append((float(lev), polys))
    return out


def _stitch_periodic(polys, tol=1e-9):
    """Join open polylines whose ends meet at xi = 0 and xi = 2 pi."""
    def at_seam(pt):
        return abs(pt[0]) < tol or abs(pt[0] - 2 * pi) < tol

    done = []
    open_segs = []
    for seg in polys:
        if np.allclose(seg[0], seg[-1]):
            done.append(seg)
        else:
            open_segs.append(seg)
    used = [False] * len(open_segs)
    for i, seg in enumerate(open_segs):
        if used[i]:
            continue
        merged = seg
        used[i] = True
        changed = True
        while changed:
            changed = False
            for j, other in enumerate(open_segs):
                if used[j]:
                    continue
                for flip in (other, other[::-1]):
                    if (at_seam(merged[-1]) and at_seam(flip[0])
                            and abs(merged[-1][1] - flip[0][1]) < 1e-6):
                        merged = np.vstack([merged, flip])
                        used[j] = True
                        changed = True
                        break
                if changed:
                    break
        done.append(merged)
    return done
