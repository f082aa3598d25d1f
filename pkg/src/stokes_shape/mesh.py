"""Structured quadratic-triangle meshes of the annular domain.

The reference grid ``(phi_i, rho_j)`` is mapped to the plane by
``x = ((1 - rho) r(phi) + rho R) (cos phi, sin phi)``; every cell is split into
two six-node triangles.  Every node, midside nodes included, is the image of
its point on the half-step reference grid.  Elements are therefore P2
interpolants of the smooth mapping: boundary edges follow the exact curves,
and the curvature of a rough inner boundary is spread across the radial
layers rather than concentrated in the first one.  The mapping has Jacobian
``rad(phi, rho) (R - r(phi)) > 0``, so inversion only occurs when the grid
cannot resolve the boundary at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import BallOutsideDomain, InvalidGeometry, MeshInversion
from .fem import (
    EDGE_NODES,
    ElementGeometry,
    edge_reference_points,
    element_geometry,
    inside_reference,
    invert_map,
    p2_grad,
    p2_shape,
    triangle_rule,
)

RadiusFn = Callable[[np.ndarray], np.ndarray]

INNER_EDGE = 2  # local edge of the lower triangle lying on rho = 0
OUTER_EDGE = 1  # local edge of the upper triangle lying on rho = 1


@dataclass(eq=False)
class AnnulusMesh:
    nodes: np.ndarray  # (N, 2); vertices first, then midside nodes
    elements: np.ndarray  # (E, 6)
    inner_nodes: np.ndarray
    outer_nodes: np.ndarray
    h_target: float
    R: float
    n_phi: int
    n_rho: int
    n_vertices: int
    inner_edges: np.ndarray = field(repr=False)  # element ids, local edge INNER_EDGE
    outer_edges: np.ndarray = field(repr=False)  # element ids, local edge OUTER_EDGE
    grid: np.ndarray = field(repr=False)  # (2 n_phi, 2 n_rho + 1) half-grid -> node index

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def coords(self) -> np.ndarray:
        return self.nodes[self.elements]

    def geometry(self, degree: int = 4) -> ElementGeometry:
        cache = self.__dict__.setdefault("_geom", {})
        if degree not in cache:
            cache[degree] = element_geometry(self.coords, triangle_rule(degree))
        return cache[degree]

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.coords[:, :3].mean(axis=1))

    def _grid_candidates(self, points: np.ndarray) -> np.ndarray:
        """Six likely elements per point from the structured grid, best first.

        Radial element edges lie exactly on the rays ``phi_i``, so the angular
        cell is exact; the radial layer is estimated from the quadratic
        interpolant of the inner boundary and its two neighbours are added.
        """
        n_phi, n_rho = self.n_phi, self.n_rho
        phi = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
        s = phi * n_phi / (2.0 * np.pi)
        ci = np.floor(s).astype(np.int64) % n_phi
        t = s - np.floor(s)
        r_in = np.linalg.norm(self.nodes[self.grid[:, 0]], axis=1)
        nI = 2 * n_phi
        r0, rm, r1 = r_in[2 * ci], r_in[(2 * ci + 1) % nI], r_in[(2 * ci + 2) % nI]
        rb = r0 * (1 - t) * (1 - 2 * t) + rm * 4 * t * (1 - t) + r1 * t * (2 * t - 1)
        rho = (np.linalg.norm(points, axis=1) - rb) / (self.R - rb)
        cj = np.clip(np.floor(rho * n_rho).astype(np.int64), 0, n_rho - 1)
        n_cells = n_phi * n_rho
        cols = []
        for dj in (0, -1, 1):
            cell = ci * n_rho + np.clip(cj + dj, 0, n_rho - 1)
            cols += [cell, n_cells + cell]
        return np.stack(cols, axis=1)

    def locate(self, points: np.ndarray, k: int = 12) -> tuple[np.ndarray, np.ndarray]:
        """Element index and reference coordinates for each physical point.

        Tries the structured-grid guesses first, then nearest element
        centroids in widening sets.  Raises :class:`BallOutsideDomain` for
        points not covered by any element.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        P = len(points)
        elem = np.full(P, -1)
        xi = np.zeros((P, 2))
        todo = np.arange(P)

        def attempt(cand):
            nonlocal todo
            for c in range(cand.shape[1]):
                if todo.size == 0:
                    break
                e = cand[:, c]
                loc = invert_map(self.coords[e], points[todo])
                ok = inside_reference(loc)
                elem[todo[ok]] = e[ok]
                xi[todo[ok]] = loc[ok]
                todo, cand = todo[~ok], cand[~ok]

        attempt(self._grid_candidates(points))
        tried = 0
        for kk in (k, 8 * k, 64 * k):
            kk = min(kk, self.n_elements)
            if todo.size == 0 or kk <= tried:
                break
            _, cand = self._tree.query(points[todo], k=kk)
            attempt(cand.reshape(todo.size, kk)[:, tried:])
            tried = kk
        if todo.size:
            raise BallOutsideDomain(f"{todo.size} point(s) outside the mesh, e.g. {points[todo[0]]}")
        return elem, xi

    def export(self, path) -> None:
        write_mesh(self, path)

    @cached_property
    def dissection_order(self) -> np.ndarray:
        """Node permutation from nested dissection of the structured grid."""
        return nested_dissection(self.grid)


@dataclass(frozen=True)
class BallQuadrature:
    """Quadrature over a disc, with each point already located in the mesh."""

    center: np.ndarray
    radius: float
    points: np.ndarray
    weights: np.ndarray
    elements: np.ndarray
    xi: np.ndarray

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _angular_count(R: float, h: float) -> int:
    n = math.ceil(2.0 * math.pi * R / h)
    return max(8, 4 * math.ceil(n / 4))


def generate_mesh(radius_fn: RadiusFn, R: float, h_target: float) -> AnnulusMesh:
    """Mesh the region between ``|x| = radius_fn(phi)`` and ``|x| = R``.

    The angular count is rounded up to a multiple of four so the grid is
    invariant under quarter turns and quadrant boundaries are mesh lines.
    """
    if h_target <= 0:
        raise ValueError("h_target must be positive")
    n_phi = _angular_count(R, h_target)
    phi_half = np.pi * np.arange(2 * n_phi) / n_phi
    r_half = np.asarray(radius_fn(phi_half), dtype=float)
    if not np.all(np.isfinite(r_half)) or np.any(r_half <= 0):
        raise InvalidGeometry("inner radius must be finite and positive")
    if np.any(r_half >= R):
        raise InvalidGeometry(f"inner radius reaches the outer radius R={R}")
    n_rho = max(1, math.ceil((R - r_half.min()) / h_target))

    nI, nJ = 2 * n_phi, 2 * n_rho + 1
    I, J = np.meshgrid(np.arange(nI), np.arange(nJ), indexing="ij")
    cos_p, sin_p = np.cos(phi_half), np.sin(phi_half)

    # every node (vertex or midside) is the image of its half-grid point
    rho_half = np.arange(nJ) / (nJ - 1)
    rad = (1.0 - rho_half)[None, :] * r_half[:, None] + rho_half[None, :] * R
    pos = np.stack([rad * cos_p[:, None], rad * sin_p[:, None]], axis=-1)

    is_vertex = (I % 2 == 0) & (J % 2 == 0)
    index = np.empty((nI, nJ), dtype=np.int64)
    n_v = n_phi * (n_rho + 1)
    index[is_vertex] = ((J // 2) * n_phi + I // 2)[is_vertex]
    index[~is_vertex] = n_v + np.arange(np.count_nonzero(~is_vertex))
    nodes = np.empty((nI * nJ, 2))
    nodes[index.ravel()] = pos.reshape(-1, 2)

    ci, cj = np.meshgrid(np.arange(n_phi), np.arange(n_rho), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    i0, i1, i2 = 2 * ci, (2 * ci + 1) % nI, (2 * ci + 2) % nI
    j0, j1, j2 = 2 * cj, 2 * cj + 1, 2 * cj + 2
    A, B, C, D = index[i0, j0], index[i2, j0], index[i2, j2], index[i0, j2]
    lower = np.stack([A, C, B, index[i1, j1], index[i2, j1], index[i1, j0]], axis=1)
    upper = np.stack([A, D, C, index[i0, j1], index[i1, j2], index[i1, j1]], axis=1)
    elements = np.concatenate([lower, upper])

    n_cells = ci.size
    inner_edges = np.flatnonzero(cj == 0)
    outer_edges = n_cells + np.flatnonzero(cj == n_rho - 1)

    mesh = AnnulusMesh(
        nodes=nodes,
        elements=elements,
        inner_nodes=np.sort(index[:, 0]),
        outer_nodes=np.sort(index[:, -1]),
        h_target=float(h_target),
        R=float(R),
        n_phi=n_phi,
        n_rho=n_rho,
        n_vertices=n_v,
        inner_edges=inner_edges,
        outer_edges=outer_edges,
        grid=index,
    )
    if np.any(mesh.geometry(4).detJ <= 0):
        raise MeshInversion("non-positive element Jacobian; boundary too pathological")
    return mesh


def nested_dissection(grid: np.ndarray, leaf: int = 64) -> np.ndarray:
    """Nested-dissection node order for a periodic-in-phi half-grid.

    Separators are vertex lines (even half-grid index) so no element straddles
    them.  The periodic direction is first split by two opposite vertex
    columns; the resulting rectangles are bisected recursively along their
    longer side.  Separator nodes are numbered after the parts they split.
    """
    nI, nJ = grid.shape
    order: list[np.ndarray] = []

    def rect(i0, i1, j0, j1):
        # half-open ranges of half-grid indices, all interior to a region
        ni, nj = i1 - i0, j1 - j0
        if ni <= 0 or nj <= 0:
            return
        if ni * nj <= leaf:
            order.append(grid[i0:i1, j0:j1].ravel())
            return
        if ni >= nj:
            c = i0 + ni // 2
            c += c % 2  # separators on even (vertex) lines
            if c >= i1:
                c -= 2
            rect(i0, c, j0, j1)
            rect(c + 1, i1, j0, j1)
            order.append(grid[c, j0:j1])
        else:
            c = j0 + nj // 2
            c += c % 2
            if c >= j1:
                c -= 2
            rect(i0, i1, j0, c)
            rect(i0, i1, c + 1, j1)
            order.append(grid[i0:i1, c])

    half = nI // 2
    half -= half % 2
    rect(1, half, 0, nJ)
    rect(half + 1, nI, 0, nJ)
    order.append(grid[half])
    order.append(grid[0])
    perm = np.concatenate(order)
    assert np.array_equal(np.sort(perm), np.arange(grid.size))
    return perm


def mesh_area(m: AnnulusMesh) -> float:
    return float(m.geometry(4).weights.sum())


def locate_ball(m: AnnulusMesh, center, radius: float,
                n_radial: int = 8, n_angular: int = 64) -> BallQuadrature:
    """Polar Gauss-Legendre x midpoint quadrature over ``B(center, radius)``.

    The weights integrate ``rho d rho d theta`` exactly, so they sum to
    ``pi radius^2``.  Every point (and the ball perimeter) must lie in the mesh.
    """
    center = np.asarray(center, dtype=float)
    g, w = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * radius * (g + 1.0)
    w_rho = 0.5 * radius * w * rho
    theta = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    pts = center + np.stack([
        np.outer(rho, np.cos(theta)).ravel(),
        np.outer(rho, np.sin(theta)).ravel(),
    ], axis=1)
    wts = np.repeat(w_rho, n_angular) * (2.0 * np.pi / n_angular)
    rim = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    try:
        m.locate(rim)
        elem, xi = m.locate(pts)
    except BallOutsideDomain as exc:
        raise BallOutsideDomain(f"ball at {center.tolist()} r={radius} not inside mesh") from exc
    return BallQuadrature(center, float(radius), pts, wts, elem, xi)


def boundary_edge_quadrature(m: AnnulusMesh, which: str, n_points: int = 4):
    """Gauss points on the inner or outer boundary edges.

    Returns ``(elements, xi, x, ds_weights, normals)``; ``normals`` point out
    of the domain.
    """
    if which == "outer":
        elems, edge = m.outer_edges, OUTER_EDGE
    elif which == "inner":
        elems, edge = m.inner_edges, INNER_EDGE
    else:
        raise ValueError(which)
    g, w = np.polynomial.legendre.leggauss(n_points)
    t = 0.5 * (g + 1.0)
    xi = edge_reference_points(edge, t)  # (Q, 2)
    a, b, _ = EDGE_NODES[edge]
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    dxi_dt = verts[b] - verts[a]
    G = p2_grad(xi)  # (Q, 6, 2)
    coords = m.coords[elems]
    tangent = np.einsum("eai,qaj,j->eqi", coords, G, dxi_dt)
    ds = np.linalg.norm(tangent, axis=-1)
    # local vertex order is counter-clockwise, so the outward normal is the
    # tangent rotated clockwise
    normals = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1) / ds[..., None]
    x = np.einsum("qa,eai->eqi", p2_shape(xi), coords)
    return elems, xi, x, 0.5 * w * ds, normals


# ---------------------------------------------------------------------------
# Plain-text export


def write_mesh(m: AnnulusMesh, path) -> None:
    lines = [f"nodes {m.n_nodes} elements {m.n_elements}"]
    lines += [f"{x!r} {y!r}" for x, y in m.nodes.tolist()]
    lines += [" ".join(str(int(v)) for v in row) for row in m.elements]
    lines.append(" ".join(str(int(v)) for v in m.inner_nodes))
    lines.append(" ".join(str(int(v)) for v in m.outer_nodes))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> dict:
    """Parse an exported mesh into plain arrays (nodes, elements, inner, outer)."""
    text = Path(path).read_text().splitlines()
    head = text[0].split()
    n, e = int(head[1]), int(head[3])
    nodes = np.array([[float(v) for v in ln.split()] for ln in text[1:1 + n]])
    elements = np.array([[int(v) for v in ln.split()] for ln in text[1 + n:1 + n + e]])
    inner = np.array([int(v) for v in text[1 + n + e].split()])
    outer = np.array([int(v) for v in text[2 + n + e].split()])
    return {"nodes": nodes, "elements": elements, "inner_nodes": inner, "outer_nodes": outer}


def area_from_arrays(nodes: np.ndarray, elements: np.ndarray) -> float:
    """Isoparametric area of a six-node triangle mesh given as raw arrays."""
    geo = element_geometry(nodes[elements], triangle_rule(4))
    return float(geo.weights.sum())
