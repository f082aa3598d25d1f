"""Quadratic (P2) triangle machinery shared by the solvers and observations.

Local node order: vertices 0, 1, 2 then midside nodes 3 = (0,1), 4 = (1,2),
5 = (2,0).  Geometry is isoparametric: the six nodes define the element map,
so curved boundary edges are represented to second order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure

# Dunavant rules on the reference triangle, weights summing to 1/2.
_D4_A, _D4_B = 0.445948490915965, 0.091576213509771
_D4_WA, _D4_WB = 0.223381589678011, 0.109951743655322
_D5_A, _D5_B = 0.470142064105115, 0.101286507323456
_D5_WA, _D5_WB = 0.132394152788506, 0.125939180544827


@dataclass(frozen=True)
class TriangleRule:
    points: np.ndarray  # (Q, 2) reference coordinates
    weights: np.ndarray  # (Q,), sum 1/2
    degree: int


def _sym3(a: float) -> list[tuple[float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)]


def triangle_rule(degree: int) -> TriangleRule:
    """Symmetric quadrature exact for polynomials up to ``degree`` (<= 5)."""
    if degree <= 4:
        pts = _sym3(_D4_A) + _sym3(_D4_B)
        wts = [_D4_WA] * 3 + [_D4_WB] * 3
        deg = 4
    elif degree == 5:
        pts = [(1 / 3, 1 / 3)] + _sym3(_D5_A) + _sym3(_D5_B)
        wts = [0.225] + [_D5_WA] * 3 + [_D5_WB] * 3
        deg = 5
    else:
        raise ValueError(f"no rule of degree {degree}")
    return TriangleRule(np.array(pts), 0.5 * np.array(wts), deg)


def p2_shape(xi: np.ndarray) -> np.ndarray:
    """P2 basis values at reference points ``xi`` (..., 2) -> (..., 6)."""
    s, t = xi[..., 0], xi[..., 1]
    l0 = 1.0 - s - t
    return np.stack([
        l0 * (2 * l0 - 1),
        s * (2 * s - 1),
        t * (2 * t - 1),
        4 * l0 * s,
        4 * s * t,
        4 * t * l0,
    ], axis=-1)


def p2_grad(xi: np.ndarray) -> np.ndarray:
    """Reference gradients of the P2 basis, shape (..., 6, 2)."""
    s, t = xi[..., 0], xi[..., 1]
    l0 = 1.0 - s - t
    ds = np.stack([
        -(4 * l0 - 1),
        4 * s - 1,
        np.zeros_like(s),
        4 * (l0 - s),
        4 * t,
        -4 * t,
    ], axis=-1)
    dt = np.stack([
        -(4 * l0 - 1),
        np.zeros_like(s),
        4 * t - 1,
        -4 * s,
        4 * s,
        4 * (l0 - t),
    ], axis=-1)
    return np.stack([ds, dt], axis=-1)


def p1_shape(xi: np.ndarray) -> np.ndarray:
    s, t = xi[..., 0], xi[..., 1]
    return np.stack([1.0 - s - t, s, t], axis=-1)


@dataclass
class ElementGeometry:
    """Per-element, per-quadrature-point geometric data.

    Arrays are indexed ``[element, qp, ...]``.
    """

    x: np.ndarray  # (E, Q, 2) physical quadrature points
    detJ: np.ndarray  # (E, Q)
    dN: np.ndarray  # (E, Q, 6, 2) physical P2 gradients
    N: np.ndarray  # (Q, 6) P2 values
    weights: np.ndarray  # (E, Q) = w_q * detJ


def jacobians(coords: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Jacobian of the isoparametric map for element node ``coords`` (E, 6, 2).

    ``xi`` is (Q, 2); returns (E, Q, 2, 2) with ``J[..., i, j] = dx_i/dxi_j``.
    """
    G = p2_grad(xi)  # (Q, 6, 2)
    return np.einsum("eai,qaj->eqij", coords, G)


def element_geometry(coords: np.ndarray, rule: TriangleRule) -> ElementGeometry:
    N = p2_shape(rule.points)
    G = p2_grad(rule.points)
    J = np.einsum("eai,qaj->eqij", coords, G)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    # grad_x N = J^{-T} grad_xi N
    dN = np.einsum("qaj,eqji->eqai", G, inv)
    x = np.einsum("qa,eai->eqi", N, coords)
    return ElementGeometry(x=x, detJ=det, dN=dN, N=N, weights=det * rule.weights)


def invert_map(coords: np.ndarray, points: np.ndarray, iters: int = 12) -> np.ndarray:
    """Reference coordinates of ``points`` (P, 2) in elements ``coords`` (P, 6, 2).

    Newton iteration on the isoparametric map started from the centroid.
    """
    xi = np.full(points.shape, 1.0 / 3.0)
    coordsT = np.ascontiguousarray(coords.transpose(0, 2, 1))
    for _ in range(iters):
        N = p2_shape(xi)
        G = p2_grad(xi)
        x = np.matmul(N[:, None, :], coords)[:, 0]
        J = np.matmul(coordsT, G)
        r = points - x
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        d0 = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
        d1 = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
        xi = np.clip(xi + np.stack([d0, d1], axis=-1), -2.0, 3.0)
        if np.max(np.abs(d0) + np.abs(d1), initial=0.0) < 1e-14:
            break
    return xi


def inside_reference(xi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    s, t = xi[..., 0], xi[..., 1]
    return (s >= -tol) & (t >= -tol) & (s + t <= 1.0 + tol)


# Reference parameterisation of the three local edges: (start vertex, end vertex, midside).
EDGE_NODES = ((0, 1, 3), (1, 2, 4), (2, 0, 5))


def edge_reference_points(edge: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates along local ``edge`` for parameters ``t`` in [0, 1]."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    a, b, _ = EDGE_NODES[edge]
    return (1.0 - t)[:, None] * verts[a] + t[:, None] * verts[b]


def point_gradients(coords: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Physical P2 gradients at one reference point per element, (P, 6, 2)."""
    G = p2_grad(xi)  # (P, 6, 2)
    J = np.einsum("pai,paj->pij", coords, G)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    return np.einsum("paj,pji->pai", G, inv)


def assemble(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """Sum element matrices ``local`` (E, a, b) into a sparse global matrix."""
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()


def assemble_vector(rows: np.ndarray, local: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(rows.ravel(), weights=local.ravel(), minlength=n)


def solve_dirichlet(K: sp.spmatrix, rhs: np.ndarray, fixed: np.ndarray,
                    values: np.ndarray, order: np.ndarray | None = None,
                    symmetric: bool = False, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``K x = rhs`` with ``x[fixed] = values`` by symmetric elimination.

    ``order`` is a fill-reducing permutation of all unknowns; when given, SuperLU
    keeps it (``NATURAL`` column order).  ``symmetric`` additionally requests
    diagonal pivots, which is safe for the quasi-definite penalised Stokes
    matrix.  Up to two steps of iterative refinement are applied if the
    relative residual exceeds ``rtol``.
    """
    n = K.shape[0]
    is_free = np.ones(n, dtype=bool)
    is_free[fixed] = False
    x = np.zeros(n)
    x[fixed] = values
    free = np.flatnonzero(is_free) if order is None else order[is_free[order]]
    K = K.tocsr()
    Kf = K[free]
    Kff = Kf[:, free].tocsc()
    b = rhs[free] - Kf[:, ~is_free] @ x[~is_free]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x
    if order is None:
        opts = dict(permc_spec="COLAMD")
    elif symmetric:
        opts = dict(permc_spec="NATURAL", diag_pivot_thresh=0.0,
                    options=dict(SymmetricMode=True))
    else:
        opts = dict(permc_spec="NATURAL", diag_pivot_thresh=0.1)
    try:
        lu = spla.splu(Kff, **opts)
    except RuntimeError as exc:
        raise SolverFailure(f"factorisation failed: {exc}") from exc
    xf = lu.solve(b)
    res = np.linalg.norm(Kff @ xf - b) / bnorm
    for _ in range(2):
        if np.isfinite(res) and res <= rtol:
            break
        xf = xf + lu.solve(b - Kff @ xf)
        res = np.linalg.norm(Kff @ xf - b) / bnorm
    if not np.isfinite(res) or res > rtol:
        raise SolverFailure(f"relative residual {res:.3e} exceeds {rtol:.1e}")
    x[free] = xf
    return x
