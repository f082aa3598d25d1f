"""Inner-boundary parameterisation.

A boundary is described by a truncated real Fourier series ``b`` (mean zero)
added to a fixed mean radius ``b0``.  The radius actually used for meshing is
``clamp(b0 + b(phi))`` where the clamp confines it to ``[r_min, r_max]``.  For
meshing the Fourier sum is first replaced by its L2-best periodic cubic
B-spline approximation on uniform knots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_circulant

TWO_PI = 2.0 * np.pi

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundaryParams:
    """Fourier coefficients of the mean-zero radial perturbation.

    ``coeffs[2k-2]`` multiplies ``cos(k x)`` and ``coeffs[2k-1]`` multiplies
    ``sin(k x)`` for ``k = 1..K/2`` (zero-based storage of the 1-based
    ``b_{2k-1}, b_{2k}`` pairs).
    """

    coeffs: np.ndarray
    b0: float = 1.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size < 2 or c.size % 2:
            raise ValueError(f"need an even number >= 2 of coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "b0", float(self.b0))

    @property
    def K(self) -> int:
        return self.coeffs.size

    @property
    def cos_coeffs(self) -> np.ndarray:
        return self.coeffs[0::2]

    @property
    def sin_coeffs(self) -> np.ndarray:
        return self.coeffs[1::2]

    @classmethod
    def zeros(cls, K: int, b0: float = 1.0) -> "BoundaryParams":
        return cls(np.zeros(K), b0)

    def __call__(self, x) -> np.ndarray:
        return eval_fourier(self, x)


@dataclass(frozen=True)
class ClampParams:
    r_min: float = 0.5
    r_max: float = 1.5
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if not 0.0 < self.epsilon < 0.5 * (self.r_max - self.r_min):
            raise ValueError("need 0 < epsilon < (r_max - r_min)/2")


@dataclass(frozen=True)
class BSplineCurve:
    """Periodic cubic B-spline on ``n_B`` uniform knots over ``[0, 2pi)``."""

    a: np.ndarray
    n_B: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        if a.size < 8:
            raise ValueError("periodic cubic spline needs at least 8 intervals")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "n_B", a.size)

    def __call__(self, x) -> np.ndarray:
        return eval_bspline(self, x)


# ---------------------------------------------------------------------------
# Fourier representation


def eval_fourier(params: BoundaryParams, x) -> np.ndarray:
    """Mean-zero Fourier sum ``b(x)``; ``b0`` is *not* included."""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, params.K // 2 + 1)
    kx = np.multiply.outer(x, k)
    return np.cos(kx) @ params.cos_coeffs + np.sin(kx) @ params.sin_coeffs


def sobolev_norm_sq(params: BoundaryParams, s: float) -> float:
    """Truncated ``||b||_{H^s}^2 = 1/2 sum_k k^{2s} (b_{2k-1}^2 + b_{2k}^2)``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    k = np.arange(1, params.K // 2 + 1, dtype=float)
    return 0.5 * float(np.sum(k ** (2 * s) * (params.cos_coeffs**2 + params.sin_coeffs**2)))


def rotate_params(params: BoundaryParams, angle: float) -> BoundaryParams:
    """Coefficients of ``phi -> b(phi - angle)`` (counter-clockwise rotation)."""
    k = np.arange(1, params.K // 2 + 1)
    c, s = np.cos(k * angle), np.sin(k * angle)
    a, b = params.cos_coeffs, params.sin_coeffs
    out = np.empty(params.K)
    out[0::2] = a * c - b * s
    out[1::2] = a * s + b * c
    return BoundaryParams(out, params.b0)


# ---------------------------------------------------------------------------
# Clamp


def clamp(t, cp: ClampParams):
    """Piecewise-quadratic C^1 clamp onto ``[r_min, r_max]``.

    Identity on ``[r_min + eps, r_max - eps]``, constant outside
    ``(r_min - eps, r_max + eps)``, quadratic blends in between.
    """
    lo, hi, eps = cp.r_min, cp.r_max, cp.epsilon
    # saturated inputs are moved to the band edges so the unused branches stay finite
    t = np.clip(np.asarray(t, dtype=float), lo - eps, hi + eps)
    out = np.where(t <= lo - eps, lo, t)
    out = np.where((t > lo - eps) & (t < lo + eps), lo + (t - lo + eps) ** 2 / (4 * eps), out)
    out = np.where((t > hi - eps) & (t < hi + eps), hi - (t - hi - eps) ** 2 / (4 * eps), out)
    out = np.where(t >= hi + eps, hi, out)
    return out if out.ndim else float(out)


def inner_radius(params: BoundaryParams, cp: ClampParams, phi):
    """Clamped inner radius ``clamp(b0 + b(phi))`` straight from the Fourier sum."""
    return clamp(params.b0 + eval_fourier(params, phi), cp)


# ---------------------------------------------------------------------------
# Periodic cubic B-splines


def _basis_local(u: np.ndarray, j: np.ndarray, h: float) -> np.ndarray:
    """Cox-de Boor values of the four cubic B-splines active on interval ``j``.

    ``u`` is the unwrapped coordinate with ``j*h <= u < (j+1)*h``.  Column ``r``
    holds ``B_{j-3+r,3}(u)``; knots are ``t_m = m*h``.
    """
    n = u.size
    N = np.zeros((n, 4))
    left = np.zeros((n, 4))
    right = np.zeros((n, 4))
    N[:, 0] = 1.0
    for s in range(1, 4):
        left[:, s] = u - (j + 1 - s) * h
        right[:, s] = (j + s) * h - u
        saved = np.zeros(n)
        for r in range(s):
            temp = N[:, r] / (right[:, r + 1] + left[:, s - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, s - r] * temp
        N[:, s] = saved
    return N


def _locate(x: np.ndarray, n_B: int) -> tuple[np.ndarray, np.ndarray, float]:
    h = TWO_PI / n_B
    u = np.mod(x, TWO_PI)
    j = np.minimum(np.floor(u / h).astype(int), n_B - 1)
    return u, j, h


def bspline_basis(x, n_B: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero basis values at ``x`` and the matching periodic basis indices.

    Returns ``(values, index)``, both of shape ``(len(x), 4)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u, j, h = _locate(x, n_B)
    vals = _basis_local(u, j, h)
    idx = np.mod(j[:, None] - 3 + np.arange(4), n_B)
    return vals, idx


def eval_bspline(c: BSplineCurve, x) -> np.ndarray:
    x_arr = np.asarray(x, dtype=float)
    vals, idx = bspline_basis(x_arr.ravel(), c.n_B)
    out = np.sum(vals * c.a[idx], axis=1).reshape(x_arr.shape)
    return out if out.ndim else float(out)


def _interval_rule(n_B: int, quad_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights, ``quad_order`` per knot interval."""
    g, w = np.polynomial.legendre.leggauss(quad_order)
    h = TWO_PI / n_B
    starts = h * np.arange(n_B)
    x = (starts[:, None] + 0.5 * h * (g + 1.0)).ravel()
    wts = np.tile(0.5 * h * w, n_B)
    return x, wts


def gram_column(n_B: int) -> np.ndarray:
    """First column of the circulant Gram matrix ``<B_i, B_j>``.

    Only the 7 central diagonals are nonzero.
    """
    x, w = _interval_rule(n_B, 4)  # exact for degree-6 products
    vals, idx = bspline_basis(x, n_B)
    col = np.zeros(n_B)
    # column 0: <B_i, B_0> summed over quadrature points where B_0 is active
    for r in range(4):
        mask = idx[:, r] == 0
        for r2 in range(4):
            np.add.at(col, idx[mask, r2], w[mask] * vals[mask, r] * vals[mask, r2])
    return col


def project_to_bspline(f: ArrayFn, n_B: int, quad_order: int = 8) -> BSplineCurve:
    """L2-orthogonal projection of a 2pi-periodic ``f`` onto the spline space.

    Solves the circulant Gram system ``G a = (<f, B_i>)_i`` by FFT.
    """
    if n_B < 8:
        raise ValueError("n_B must be >= 8")
    if quad_order < 8:
        raise ValueError("use at least 8 quadrature points per interval")
    x, w = _interval_rule(n_B, quad_order)
    vals, idx = bspline_basis(x, n_B)
    fx = np.asarray(f(x), dtype=float)
    rhs = np.zeros(n_B)
    np.add.at(rhs, idx.ravel(), ((w * fx)[:, None] * vals).ravel())
    a = solve_circulant(gram_column(n_B), rhs)
    return BSplineCurve(np.real_if_close(a).astype(float))


def galerkin_residual(f: ArrayFn, c: BSplineCurve, quad_order: int = 8) -> np.ndarray:
    """``<f - r_B, B_i>`` for every basis function (zero for the projection)."""
    x, w = _interval_rule(c.n_B, quad_order)
    vals, idx = bspline_basis(x, c.n_B)
    r = np.asarray(f(x), dtype=float) - np.sum(vals * c.a[idx], axis=1)
    out = np.zeros(c.n_B)
    np.add.at(out, idx.ravel(), ((w * r)[:, None] * vals).ravel())
    return out


def l2_error(f: ArrayFn, c: BSplineCurve, quad_order: int = 16) -> float:
    """``||f - r_B||_{L2(0, 2pi)}`` by composite Gauss-Legendre quadrature."""
    x, w = _interval_rule(c.n_B, quad_order)
    d = np.asarray(f(x), dtype=float) - eval_bspline(c, x)
    return float(np.sqrt(np.sum(w * d * d)))


def spline_radius(params: BoundaryParams, cp: ClampParams, n_B: int,
                  quad_order: int = 8) -> ArrayFn:
    """Radius function used by the forward map: clamp of the spline-projected sum."""
    curve = project_to_bspline(params, n_B, quad_order)

    def radius(phi):
        return clamp(params.b0 + eval_bspline(curve, phi), cp)

    radius.curve = curve
    return radius
