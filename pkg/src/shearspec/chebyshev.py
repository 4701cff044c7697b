"""Chebyshev collocation utilities on the channel interval [0, 1].

All solvers in this package share one grid convention: Chebyshev-Gauss-Lobatto
(CGL) nodes mapped to [0, 1] and stored in ascending order, with dense spectral
differentiation matrices, Clenshaw-Curtis quadrature weights, and barycentric
interpolation for off-grid evaluation.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "cgl_grid",
    "diff_matrix",
    "clenshaw_curtis_weights",
    "cheb_coefficients",
    "coefficient_tail_ratio",
    "antiderivative_matrix",
    "barycentric_weights",
    "barycentric_interpolate",
]


def cgl_grid(n: int) -> np.ndarray:
    """Ascending Chebyshev-Gauss-Lobatto nodes on [0, 1], n+1 points."""
    if n < 1:
        raise ValueError("need at least 2 nodes")
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))


def diff_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """First-derivative collocation matrix on the ascending CGL grid.

    Returns (D, y) with (D @ f)[i] ~ f'(y[i]).  Built from the classical
    matrix on [-1, 1] with the sign/scale of the map y = (1 - x)/2 folded in.
    """
    x = np.cos(np.pi * np.arange(n + 1) / n)  # descending on [-1, 1]
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    # y = (1 - x)/2 is ascending when x is descending; d/dy = -2 d/dx
    return -2.0 * d, 0.5 * (1.0 - x)


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights on the ascending CGL grid for integrals over [0, 1]."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    for k in range(1, n // 2 + 1):
        fac = 1.0 if 2 * k < n else 0.5
        v -= 2.0 * fac * np.cos(2.0 * k * theta[1:-1]) / (4.0 * k * k - 1.0)
    w[1:-1] = 2.0 * v / n
    w[0] = w[-1] = 1.0 / (n * n - 1.0) if n % 2 == 0 else 1.0 / (n * n)
    return 0.5 * w  # interval length 1 instead of 2


def cheb_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev expansion coefficients of a grid function (ascending CGL grid).

    Uses the type-I DCT identity; coefficient k multiplies T_k(1 - 2y).
    """
    vals = np.asarray(values)
    n = vals.shape[0] - 1
    # reverse to the descending x-grid ordering the DCT identity assumes
    v = vals[::-1]
    ext = np.concatenate([v, v[-2:0:-1]], axis=0)
    coef = np.fft.fft(ext, axis=0)[: n + 1] / n
    coef[0] *= 0.5
    coef[-1] *= 0.5
    if np.isrealobj(vals):
        coef = coef.real
    return coef


def coefficient_tail_ratio(values: np.ndarray, tail_fraction: float = 0.25) -> float:
    """max |tail coefficients| / max |coefficients|; smoothness proxy."""
    coef = np.abs(cheb_coefficients(values))
    peak = coef.max()
    if peak == 0.0:
        return 0.0
    k0 = int(len(coef) * (1.0 - tail_fraction))
    return float(coef[k0:].max() / peak)


def antiderivative_matrix(n: int) -> np.ndarray:
    """Matrix mapping grid values f(y_i) to values of the running integral
    from 0 to y_i, exact for polynomials representable on the grid."""
    x = np.cos(np.pi * np.arange(n + 1) / n)  # descending
    vander = np.polynomial.chebyshev.chebvander(x, n)
    to_coef = np.linalg.inv(vander)
    out = np.zeros((n + 1, n + 1))
    for col in range(n + 1):
        ci = np.polynomial.chebyshev.chebint(to_coef[:, col])
        vals = np.polynomial.chebyshev.chebval(x, ci)
        # dy = -dx/2 and y=0 corresponds to x=+1 (index 0 of the descending grid)
        out[:, col] = -0.5 * (vals - vals[0])
    return out


def barycentric_weights(n: int) -> np.ndarray:
    """Barycentric weights for the CGL nodes (either ordering, up to scale)."""
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_interpolate(y_nodes: np.ndarray, values: np.ndarray,
                            y_new: np.ndarray | float) -> np.ndarray:
    """Evaluate the CGL interpolant of `values` at arbitrary points."""
    yq = np.atleast_1d(np.asarray(y_new, dtype=float))
    w = barycentric_weights(len(y_nodes) - 1)
    diff = yq[:, None] - y_nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    num = (w / diff) @ values
    den = (w / diff).sum(axis=1)
    out = num / den
    hit_rows, hit_cols = np.nonzero(exact)
    out[hit_rows] = values[hit_cols]
    if np.isscalar(y_new) or np.ndim(y_new) == 0:
        return out[0]
    return out
