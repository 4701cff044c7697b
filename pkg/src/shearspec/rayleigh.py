"""Inviscid Rayleigh eigenmodes and continuation of the unstable branch.

The eigenvalue problem  U'' phi - (U - c)(phi'' - alpha^2 phi) = 0 with
phi(0) = phi(1) = 0 is discretized as a generalized matrix pencil on interior
CGL nodes and refined by a bordered Newton iteration on (phi, c).  Genuine
unstable modes are separated from discretized continuous spectrum by two
defenses: an instability threshold calibrated on a linear-shear control run,
and a grid-refinement Cauchy test on the eigenvalue.

Continuation marches the wavenumber away from the neutral anchor
(alpha_n, 1/2) supplied by the Sturm-Liouville certificate, reseeding each
step with the previous eigenvalue; Newton stays strictly inside {Im c > 0}
where the critical layer is regular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eig, lu_factor, lu_solve

from .chebyshev import diff_matrix, coefficient_tail_ratio
from .profiles import ShearProfile, eval_profile
from .sturm import InstabilityCertificate

__all__ = [
    "EigenMode",
    "BranchCurve",
    "BranchEndpoint",
    "solve_rayleigh",
    "neutral_mode",
    "continue_branch",
    "rayleigh_noise_floor",
    "rayleigh_pencil",
    "pencil_residual",
    "eigenfunction_tail_ratio",
]

CAUCHY_TOL = 1e-6           # |c_N - c_refined| for a mode to count as genuine
NEWTON_TOL = 1e-10
MIN_IM_FLOOR = 1e-9         # absolute floor under any calibrated threshold

_noise_floor_cache: dict[tuple[float, int], float] = {}


@dataclass(frozen=True, eq=False)
class EigenMode:
    """A complex eigenpair (alpha, c, phi) of Rayleigh or Orr-Sommerfeld type."""

    alpha: float
    c: complex
    phi: np.ndarray                  # complex values on `grid` (walls included)
    grid: np.ndarray
    residual: float
    kind: str                        # "rayleigh" | "orr_sommerfeld"
    unstable: bool
    noise_floor: float = 0.0
    two_grid_delta: float | None = None
    R: float | None = None           # Reynolds number for viscous modes

    @property
    def growth_rate(self) -> float:
        return self.alpha * self.c.imag


@dataclass(frozen=True)
class BranchEndpoint:
    """Terminus of a continuation march.

    reason is "neutral" (Im c reached the threshold), "no_unstable_mode"
    (next step found nothing), "domain_boundary" (alpha would cross 0) or
    "max_steps".  alpha_s is the extrapolated Im c -> 0 crossing when the
    nearby samples support one, else the last good alpha.
    """

    alpha_last: float
    reason: str
    im_c_last: float
    alpha_s: float | None


@dataclass(frozen=True, eq=False)
class BranchCurve:
    samples: tuple                     # ((alpha, c), ...) ascending in alpha
    neutral_anchor: tuple              # (alpha_n, 1/2)
    endpoints: tuple                   # BranchEndpoint, lower then upper

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.samples])

    @property
    def speeds(self) -> np.ndarray:
        return np.array([c for _, c in self.samples])

    @property
    def max_growth_rate(self) -> float:
        if not self.samples:
            return 0.0
        return float(max(a * c.imag for a, c in self.samples))


def _default_grid(p: ShearProfile) -> int:
    if p.kind == "oscillatory":
        return max(192, 64 * p.n)
    if p.kind == "sine-series":
        return max(192, 16 * len(p.coeffs))
    return 192


def rayleigh_pencil(p: ShearProfile, alpha: float, n_grid: int):
    """Interior-node matrices (A, B) with A phi = c B phi the discrete problem."""
    d, y = diff_matrix(n_grid)
    d2 = (d @ d)[1:-1, 1:-1]
    yi = y[1:-1]
    lap = d2 - alpha ** 2 * np.eye(n_grid - 1)
    a = np.diag(eval_profile(p, yi, 2)) - np.diag(eval_profile(p, yi, 0)) @ lap
    b = -lap
    return a, b, y


def pencil_residual(a, b, c, phi_int) -> float:
    r = (a - c * b) @ phi_int
    scale = np.linalg.norm(b @ phi_int)
    return float(np.linalg.norm(r) / max(scale, 1e-300))


def rayleigh_noise_floor(alpha: float, n_grid: int) -> float:
    """max |Im c| of the linear-shear control pencil at the same (alpha, N).

    The continuous spectrum of the linear shear discretizes onto the real
    segment [0, 1]; any imaginary part seen here is pure discretization noise.
    """
    key = (round(float(alpha), 12), int(n_grid))
    if key not in _noise_floor_cache:
        a, b, _ = rayleigh_pencil(ShearProfile.linear(), alpha, n_grid)
        w = eig(a, b, right=False)
        w = w[np.isfinite(w)]
        _noise_floor_cache[key] = float(np.max(np.abs(w.imag))) if len(w) else 0.0
    return _noise_floor_cache[key]


def _newton_refine(a, b, c0, phi0, max_iter=15):
    """Bordered Newton on (phi, c) for the pencil (A - cB) phi = 0."""
    m = a.shape[0]
    phi = phi0 / phi0[np.argmax(np.abs(phi0))]
    anchor = int(np.argmax(np.abs(phi)))
    c = c0
    for _ in range(max_iter):
        res = pencil_residual(a, b, c, phi)
        if res < NEWTON_TOL:
            break
        f = (a - c * b) @ phi
        big = np.zeros((m + 1, m + 1), dtype=complex)
        big[:m, :m] = a - c * b
        big[:m, m] = -(b @ phi)
        big[m, anchor] = 1.0
        rhs = np.concatenate([-f, [0.0]])
        try:
            step = np.linalg.solve(big, rhs)
        except np.linalg.LinAlgError:
            return None
        phi = phi + step[:m]
        c = c + step[m]
        nrm = phi[anchor]
        if abs(nrm) < 1e-300 or not np.isfinite(c):
            return None
        phi = phi / nrm
    res = pencil_residual(a, b, c, phi)
    if res > 1e-8:
        return None
    return c, phi, res


def _newton_at_resolution(p, alpha, c_seed, n_grid):
    """Newton from scratch at a given resolution, seeded with the pencil
    eigenvector nearest c_seed (a few steps of inverse iteration)."""
    a, b, _ = rayleigh_pencil(p, alpha, n_grid)
    m = a.shape[0]
    try:
        lufac = lu_factor(a - c_seed * b)
    except Exception:
        return None
    rng = np.random.default_rng(7)
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    for _ in range(6):
        v = lu_solve(lufac, b @ v)
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv == 0:
            return None
        v /= nv
    return _newton_refine(a, b, c_seed, v)


def solve_rayleigh(p: ShearProfile, alpha: float, c_seed: complex,
                   n_grid: int | None = None,
                   threshold: float | None = None) -> EigenMode | None:
    """Converged unstable eigenmode nearest c_seed, or None.

    A dense eigendecomposition proposes candidates above the instability
    threshold; each is Newton-refined and confirmed by re-solving at 1.5x
    resolution (|c_N - c_1.5N| < 1e-6).  Returning None is the documented
    "no unstable mode near the seed" outcome, not an error.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if complex(c_seed).imag <= 0:
        raise ValueError("seed must lie in the unstable half-plane Im c > 0")
    n = n_grid if n_grid is not None else _default_grid(p)
    floor = rayleigh_noise_floor(alpha, n)
    thresh = threshold if threshold is not None else max(10.0 * floor, MIN_IM_FLOOR)

    a, b, y = rayleigh_pencil(p, alpha, n)
    w, v = eig(a, b)
    ok = np.isfinite(w) & (w.imag > thresh)
    idx = np.argsort(np.where(np.isfinite(w), np.abs(w - c_seed), np.inf))
    candidates = [i for i in idx if ok[i]][:5]

    n_fine = int(np.ceil(1.5 * n / 2) * 2)
    for i in candidates:
        refined = _newton_refine(a, b, w[i], v[:, i])
        if refined is None:
            continue
        c, phi_int, res = refined
        if c.imag <= thresh:
            continue
        fine = _newton_at_resolution(p, alpha, c, n_fine)
        if fine is None or abs(fine[0] - c) > CAUCHY_TOL:
            continue
        phi = np.zeros(n + 1, dtype=complex)
        phi[1:-1] = phi_int
        phi /= phi[np.argmax(np.abs(phi))]
        return EigenMode(alpha=alpha, c=c, phi=phi, grid=y, residual=res,
                         kind="rayleigh", unstable=True, noise_floor=floor,
                         two_grid_delta=float(abs(fine[0] - c)))
    return None


def _march_step(p, alpha, c_seed, n_grid, thresh):
    """Continuation inner step: Newton seeded from the previous eigenvalue
    with the 1.5N Cauchy confirmation.  Near branch endpoints the critical
    layer sharpens, so failures escalate the resolution (2N, then a dense
    solve at 2N) before the step is abandoned."""
    def newton_pair(n_c):
        got = _newton_at_resolution(p, alpha, c_seed, n_c)
        if got is None:
            return None
        c, phi_int, res = got
        if c.imag <= thresh:
            return None
        n_f = int(np.ceil(1.5 * n_c / 2) * 2)
        fine = _newton_at_resolution(p, alpha, c, n_f)
        if fine is None or abs(fine[0] - c) > CAUCHY_TOL:
            return None
        _, ygrid = diff_matrix(n_c)
        phi = np.zeros(n_c + 1, dtype=complex)
        phi[1:-1] = phi_int
        return EigenMode(alpha=alpha, c=c, phi=phi, grid=ygrid,
                         residual=res, kind="rayleigh", unstable=True,
                         two_grid_delta=float(abs(fine[0] - c)))

    for n_try in (n_grid, 2 * n_grid, 4 * n_grid):
        mode = newton_pair(n_try)
        if mode is not None:
            return mode
    # cheap dense recovery at base resolution for lost-seed cases
    return solve_rayleigh(p, alpha, c_seed, n_grid=n_grid)


def neutral_mode(cert: InstabilityCertificate) -> EigenMode:
    """Package the certificate's neutral triple (alpha_n, U(y_i), phi_n) as a
    Rayleigh mode and verify its discrete residual (< 1e-6)."""
    if not cert.unstable:
        raise ValueError("certificate does not witness instability")
    p = cert.profile
    alpha = cert.alpha_n
    c = complex(eval_profile(p, cert.witness_inflection, 0))
    n = len(cert.grid) - 1
    a, b, _ = rayleigh_pencil(p, alpha, n)
    phi_int = cert.phi_n[1:-1].astype(complex)
    res = pencil_residual(a, b, c, phi_int)
    if res > 1e-6:
        raise RuntimeError(f"neutral-mode residual {res:.2e} exceeds 1e-6")
    return EigenMode(alpha=alpha, c=c, phi=cert.phi_n.astype(complex),
                     grid=cert.grid, residual=res, kind="rayleigh",
                     unstable=False)


def _extrapolate_zero_crossing(samples, side):
    """Linear fit of Im c over the <=4 samples nearest the terminus; returns
    the alpha where the fit crosses zero, or None if the fit points away."""
    pts = sorted(samples, key=lambda t: t[0])
    sel = pts[-4:] if side == "upper" else pts[:4]
    if len(sel) < 2:
        return None
    x = np.array([a for a, _ in sel])
    g = np.array([c.imag for _, c in sel])
    slope, icpt = np.polyfit(x, g, 1)
    if abs(slope) < 1e-14:
        return None
    alpha_s = -icpt / slope
    lo, hi = x.min(), x.max()
    span = max(hi - lo, 1e-12)
    inside = (alpha_s >= hi - 0.05 * span) if side == "upper" else (alpha_s <= lo + 0.05 * span)
    return float(alpha_s) if inside else None


def continue_branch(p: ShearProfile, cert: InstabilityCertificate,
                    alpha_step: float | None = None, max_steps: int = 60,
                    n_grid: int | None = None,
                    threshold: float | None = None) -> BranchCurve:
    """March the unstable branch away from the neutral anchor in both
    directions, reseeding each step with the previous eigenvalue.

    Each march stops when Im c falls below the threshold, when no converged
    unstable mode is found after step halving, when alpha would leave (0, inf),
    or at max_steps; the terminus is recorded with its reason and an
    extrapolated Im c -> 0 crossing where the data supports one.
    """
    if not cert.unstable:
        return BranchCurve(samples=(), neutral_anchor=(None, 0.5), endpoints=())

    alpha_n = cert.alpha_n
    n = n_grid if n_grid is not None else _default_grid(p)
    step0 = alpha_step if alpha_step is not None else 0.02 * alpha_n
    floor = rayleigh_noise_floor(alpha_n, n)
    thresh = threshold if threshold is not None else max(10.0 * floor, MIN_IM_FLOOR)
    seed0 = 0.5 + 1e-3j

    samples: list[tuple[float, complex]] = []
    endpoints = {}

    for direction in (-1.0, +1.0):
        side = "upper" if direction > 0 else "lower"
        # hunt outward for the first resolvable sample: right at the anchor
        # the mode is neutral and the critical layer defeats any fixed grid
        first = None
        for k in range(1, 9):
            alpha_try = alpha_n + direction * k * step0
            if alpha_try <= 0.0:
                break
            mode = _march_step(p, alpha_try, seed0, n, thresh)
            if mode is not None:
                first = mode
                break
        if first is None:
            endpoints[side] = ((alpha_n, 0.0), "no_unstable_mode")
            continue

        samples.append((first.alpha, first.c))
        alpha, c_prev = first.alpha, first.c
        step = step0
        last_good = (alpha, c_prev.imag)
        reason = "max_steps"
        for _ in range(max_steps):
            alpha_try = alpha + direction * step
            if alpha_try <= 0.0:
                reason = "domain_boundary"
                break
            seed = c_prev if c_prev.imag > 0 else seed0
            mode = _march_step(p, alpha_try, seed, n, thresh)
            if mode is None:
                if step > step0 / 64.0:
                    step *= 0.5
                    continue
                reason = "no_unstable_mode"
                break
            alpha = alpha_try
            c_prev = mode.c
            samples.append((alpha, mode.c))
            last_good = (alpha, mode.c.imag)
            if mode.c.imag < thresh:
                reason = "neutral"
                break
            step = min(step0, step * 1.3)
        endpoints[side] = (last_good, reason)

    # endpoint refinement: walk from the sample nearest the anchor back
    # toward it in shrinking steps, escalating resolution as far as it pays
    if samples:
        samples.sort(key=lambda t: t[0])
        for side, direction in (("upper", +1.0),):
            below = [s for s in samples if s[0] < alpha_n]
            if not below:
                continue
            alpha, c_prev = below[-1]
            gap = alpha_n - alpha
            for frac in (0.5, 0.75, 0.875):
                alpha_try = alpha + frac * gap
                mode = _march_step(p, alpha_try, c_prev, n, thresh)
                if mode is None:
                    break
                samples.append((alpha_try, mode.c))
                c_prev = mode.c

    samples.sort(key=lambda t: t[0])
    eps = []
    for side in ("lower", "upper"):
        (alpha_last, imc_last), reason = endpoints[side]
        alpha_s = None
        if reason in ("neutral", "no_unstable_mode"):
            alpha_s = _extrapolate_zero_crossing(samples, side)
            if alpha_s is None:
                alpha_s = alpha_last
        eps.append(BranchEndpoint(alpha_last=alpha_last, reason=reason,
                                  im_c_last=imc_last, alpha_s=alpha_s))
    return BranchCurve(samples=tuple(samples), neutral_anchor=(alpha_n, 0.5),
                       endpoints=tuple(eps))


def eigenfunction_tail_ratio(mode: EigenMode) -> float:
    """Chebyshev-coefficient tail decay of phi; smoothness proxy for genuine
    modes (spurious continuum modes have flat tails)."""
    return coefficient_tail_ratio(mode.phi)
