"""Viscous Orr-Sommerfeld spectra and the inviscid-limit tracker.

The fourth-order problem

    (eps / i alpha) (D^2 - alpha^2)^2 phi + U'' phi - (U - c)(D^2 - alpha^2) phi = 0,
    phi = phi' = 0 at y = 0, 1,  eps = 1/R,

is reduced to a matrix pencil by boundary bordering: the four clamped
conditions replace the outermost collocation rows.  OS pencils are notorious
for spurious eigenvalues, so retention is earned, not assumed: a mode is kept
only if it reappears within 1e-6 under a 1.5x grid refinement and its
Chebyshev coefficient tail decays; everything else is kept in a `discarded`
list for audit.

`track_inviscid_limit` follows the unstable eigenvalue of an oscillatory
shear down the viscosity ladder, reseeding each Reynolds number with the
previous eigenvalue, and measures the defect against the inviscid target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig

from .chebyshev import diff_matrix, clenshaw_curtis_weights, coefficient_tail_ratio
from .profiles import ShearProfile, eval_profile
from .rayleigh import EigenMode

__all__ = [
    "OSProblem",
    "OSSpectrum",
    "LimitTrack",
    "solve_os",
    "track_inviscid_limit",
    "growth_rate_vs_n",
    "boundary_layer_diagnostic",
    "os_grid_size",
    "sobolev_norm",
]

TWO_GRID_TOL = 1e-6
TAIL_TOL = 1e-4          # coefficient-tail ratio above which a mode is suspect


@dataclass(frozen=True)
class OSProblem:
    """One viscous eigenproblem: profile, wavenumber, Reynolds number, grid."""

    profile: ShearProfile
    alpha: float
    R: float
    N: int = 0               # 0 = choose automatically

    def __post_init__(self):
        if self.alpha <= 0 or self.R <= 0:
            raise ValueError("alpha and R must be positive")
        if self.N and self.N < 64:
            raise ValueError("collocation order must be >= 64")


@dataclass(frozen=True, eq=False)
class OSSpectrum:
    """Retained (two-grid confirmed) modes sorted by Im c descending."""

    modes: tuple                     # EigenMode, Im c descending
    discarded: np.ndarray            # eigenvalues that failed retention
    noise_floor: float
    n_grid: int
    resolution_warning: str | None = None

    @property
    def most_unstable(self) -> EigenMode | None:
        return self.modes[0] if self.modes else None

    def nearest(self, c_ref: complex) -> EigenMode | None:
        if not self.modes:
            return None
        return min(self.modes, key=lambda m: abs(m.c - c_ref))


@dataclass(frozen=True, eq=False)
class LimitTrack:
    """Path of the tracked eigenvalue c*(R) and its defect |c*(R) - c0|.

    `unstable` flags rows with Im c* above the threshold; the asymptotic
    slope is fitted on those rows only (below onset the branch mode does not
    exist and the nearest eigenvalue is a different, damped one).
    """

    schedule: tuple
    path: tuple                       # complex c* per R actually tracked
    inviscid_target: complex
    unstable: tuple
    truncated_at: float | None = None

    @property
    def defects(self) -> np.ndarray:
        return np.array([abs(c - self.inviscid_target) for c in self.path])

    def tail_slope(self) -> float | None:
        """log-defect vs log-R slope over the unstable rows (>= 2 needed)."""
        rs = np.array(self.schedule[: len(self.path)])
        sel = np.array(self.unstable[: len(self.path)])
        if sel.sum() < 2:
            return None
        x = np.log10(rs[sel])
        ydef = np.log10(self.defects[sel])
        return float(np.polyfit(x, ydef, 1)[0])


def os_grid_size(p: ShearProfile, alpha: float, R: float) -> int:
    """Automatic collocation order: resolve the profile oscillation and the
    wall layers (CGL clustering reaches width ~(alpha R)^-1/2 once
    N ~ (alpha R)^(1/4))."""
    n_osc = 64 * p.n if p.kind == "oscillatory" else 64
    n_bl = int(5.0 * (alpha * R) ** 0.25)
    return int(min(max(192, n_osc, n_bl, 64), 768) // 2 * 2)


def os_pencil(p: ShearProfile, alpha: float, R: float, n_grid: int):
    """Boundary-bordered pencil (A, B) on the full CGL grid."""
    d, y = diff_matrix(n_grid)
    d2 = d @ d
    k = d2 - alpha ** 2 * np.eye(n_grid + 1)
    eps = 1.0 / R
    a = (eps / (1j * alpha)) * (k @ k) \
        + np.diag(eval_profile(p, y, 2)).astype(complex) \
        - np.diag(eval_profile(p, y, 0)) @ k
    b = -k.astype(complex)
    ident = np.eye(n_grid + 1)
    for row, vec in ((0, ident[0]), (1, d[0]), (n_grid - 1, d[n_grid]),
                     (n_grid, ident[n_grid])):
        a[row] = vec
        b[row] = 0.0
    return a, b, y


def _os_eigensolve(p, alpha, R, n_grid):
    a, b, y = os_pencil(p, alpha, R, n_grid)
    w, v = eig(a, b)
    good = np.isfinite(w) & (np.abs(w) < 1e8)
    return w[good], v[:, good], y


def solve_os(prob: OSProblem, noise_floor: float | None = None) -> OSSpectrum:
    """Discrete OS spectrum with the spurious modes filtered by two-resolution
    agreement plus coefficient-tail decay; filtered eigenvalues are retained
    in `discarded` for audit.

    The noise floor defaults to the linear-shear control at the same
    (alpha, R, N): max Im c there is entirely discretization artifact, and a
    retained mode is flagged unstable only above 10x that floor.
    """
    p, alpha, R = prob.profile, prob.alpha, prob.R
    n = prob.N if prob.N else os_grid_size(p, alpha, R)
    warning = None
    if n < 4.0 * np.sqrt(alpha * R):
        warning = (f"N={n} below the uniform-grid layer criterion "
                   f"4*sqrt(alpha R)={4*np.sqrt(alpha*R):.0f}; CGL wall "
                   "clustering usually suffices, two-grid filter decides")
    n_fine = int(np.ceil(1.5 * n / 2) * 2)
    w1, v1, y = _os_eigensolve(p, alpha, R, n)
    w2, _, _ = _os_eigensolve(p, alpha, R, n_fine)

    if noise_floor is None:
        if p.kind == "linear":
            noise_floor = 0.0
        else:
            ctrl = solve_os(OSProblem(ShearProfile.linear(), alpha, R, n))
            noise_floor = max((m.c.imag for m in ctrl.modes), default=0.0)
    thresh = 10.0 * abs(noise_floor) if noise_floor else 0.0

    a, b, _ = os_pencil(p, alpha, R, n)
    modes = []
    discarded = []
    order = np.argsort(-w1.imag)
    for i in order:
        c = w1[i]
        delta = float(np.min(np.abs(w2 - c)))
        phi = v1[:, i]
        phi = phi / phi[np.argmax(np.abs(phi))]
        tail = coefficient_tail_ratio(phi)
        if delta > TWO_GRID_TOL or tail > TAIL_TOL:
            discarded.append(c)
            continue
        r = np.linalg.norm((a - c * b) @ phi) / max(np.linalg.norm(b @ phi), 1e-300)
        modes.append(EigenMode(alpha=alpha, c=c, phi=phi, grid=y,
                               residual=float(r), kind="orr_sommerfeld",
                               unstable=bool(c.imag > thresh),
                               noise_floor=float(noise_floor),
                               two_grid_delta=delta, R=R))
    return OSSpectrum(modes=tuple(modes), discarded=np.array(discarded),
                      noise_floor=float(noise_floor), n_grid=n,
                      resolution_warning=warning)


def track_inviscid_limit(p: ShearProfile, alpha0: float, c0: complex,
                         schedule, n_grid: int | None = None) -> LimitTrack:
    """Track the eigenvalue continuation of the inviscid mode c0 along an
    ascending Reynolds schedule.

    Each Reynolds number is solved in full and the retained eigenvalue
    nearest the previous c* (first: nearest c0) is taken.  Rows below the
    instability onset keep the nearest damped eigenvalue and are flagged not
    unstable.  The path is truncated only if a solve retains nothing.
    """
    schedule = tuple(float(r) for r in schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("Reynolds schedule must be strictly ascending")
    path = []
    unstable = []
    truncated = None
    seed = c0
    for r in schedule:
        prob = OSProblem(p, alpha0, r, n_grid if n_grid else 0)
        spec = solve_os(prob)
        mode = spec.nearest(seed)
        if mode is None:
            truncated = r
            break
        path.append(mode.c)
        unstable.append(mode.unstable and mode.c.imag > 0)
        # only reseed off an actually-tracked unstable mode; otherwise keep c0
        seed = mode.c if mode.c.imag > 0 else c0
    return LimitTrack(schedule=schedule, path=tuple(path),
                      inviscid_target=c0, unstable=tuple(unstable),
                      truncated_at=truncated)


def growth_rate_vs_n(n_list, A: float, R: float, n_branch_samples: int = 5):
    """Peak viscous growth rate alpha*Im c per oscillation index.

    For each n (certified unstable at amplitude A) a handful of wavenumbers
    spanning the inviscid branch are solved viscously at Reynolds R; the
    table reports (n, alpha_n, alpha_peak, growth_peak).  A linear-shear
    control row carries A=0 and a negative growth rate.
    """
    from .sturm import certify_instability
    from .rayleigh import continue_branch

    rows = []
    for n in n_list:
        p = ShearProfile.oscillatory(n, A)
        cert = certify_instability(p)
        if not cert.unstable:
            rows.append({"n": n, "alpha_n": None, "alpha_peak": None,
                         "growth_peak": None, "note": "not unstable"})
            continue
        branch = continue_branch(p, cert, max_steps=25)
        alphas = branch.alphas
        if len(alphas) == 0:
            rows.append({"n": n, "alpha_n": cert.alpha_n, "alpha_peak": None,
                         "growth_peak": None, "note": "empty branch"})
            continue
        picks = np.unique(np.linspace(0, len(alphas) - 1,
                                      n_branch_samples).astype(int))
        best = (None, -np.inf)
        for i in picks:
            alpha = float(alphas[i])
            seed = branch.speeds[i]
            spec = solve_os(OSProblem(p, alpha, R))
            mode = spec.nearest(seed)
            if mode is None:
                continue
            g = alpha * mode.c.imag
            if g > best[1]:
                best = (alpha, g)
        rows.append({"n": n, "alpha_n": cert.alpha_n, "alpha_peak": best[0],
                     "growth_peak": best[1], "note": ""})
    return rows


def couette_control_row(alpha: float, R: float):
    """Most stable-side datum for the linear shear: max Im c (must be < 0)."""
    spec = solve_os(OSProblem(ShearProfile.linear(), alpha, R))
    top = spec.most_unstable
    return {"alpha": alpha, "R": R,
            "max_im_c": top.c.imag if top else None,
            "max_re_lambda": alpha * top.c.imag if top else None}


def sobolev_norm(mode_phi: np.ndarray, grid: np.ndarray, s: float,
                 n_fourier: int = 2048) -> float:
    """Discrete H^s norm via the sine expansion of phi on [0, 1].

    phi is interpolated to a uniform grid, expanded in sin(k pi y), and the
    norm is (sum (1 + (k pi)^2)^s |b_k|^2)^(1/2); valid for real s up to ~2
    for clamped eigenfunctions.
    """
    from scipy.fft import dst
    from .chebyshev import barycentric_interpolate

    yu = np.linspace(0.0, 1.0, n_fourier + 1)[1:-1]
    vals = barycentric_interpolate(grid, mode_phi, yu)
    k = np.arange(1, n_fourier)
    total = 0.0
    for part in (vals.real, vals.imag):
        b = dst(part, type=1) / n_fourier
        total += np.sum((1.0 + (k * np.pi) ** 2) ** s * b ** 2)
    return float(np.sqrt(0.5 * total))


def boundary_layer_diagnostic(modes, s_list):
    """Wall-layer sharpening diagnostic: discrete H^s norms per mode, plus
    (for >= 2 Reynolds numbers) the fitted log-norm growth exponent in
    log |gamma|, gamma^2 = i alpha R.  Exponents increase with s as the
    layers steepen like derivatives of exp(-gamma y).
    """
    if isinstance(modes, EigenMode):
        modes = [modes]
    rows = []
    for m in modes:
        if m.R is None:
            raise ValueError("diagnostic needs viscous modes with R set")
        phi = m.phi / np.max(np.abs(m.phi))
        gamma = np.sqrt(m.alpha * m.R)
        rows.append({"R": m.R, "gamma": gamma,
                     "norms": {s: sobolev_norm(phi, m.grid, s) for s in s_list}})
    out = {"rows": rows, "exponents": None}
    if len(rows) >= 2:
        lg = np.log10([r["gamma"] for r in rows])
        expo = {}
        for s in s_list:
            ln = np.log10([r["norms"][s] for r in rows])
            expo[s] = float(np.polyfit(lg, ln, 1)[0])
        out["exponents"] = expo
    return out
