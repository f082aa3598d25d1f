"""Steady advection-diffusion of a passive scalar driven by a Stokes flow.

Strong form ``u . grad(theta) = kappa lap(theta) + q`` with ``theta = 0`` on the
outer circle and an insulated (natural) inner boundary.  Plain Galerkin P2;
no stabilisation, so :func:`cell_peclet` is checked and a warning is issued
above one.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshMismatch
from .fem import assemble, assemble_vector, p2_grad, solve_dirichlet
from .mesh import AnnulusMesh, boundary_edge_quadrature
from .stokes import FlowField


@dataclass(frozen=True)
class SourceSpec:
    """Gaussian source ``amplitude * exp(-|x - x0|^2 / length_scale_sq)``."""

    amplitude: float = 4.0
    x0: tuple[float, float] = (1.5, 1.0)
    length_scale_sq: float = 100.0

    def __post_init__(self):
        if self.length_scale_sq <= 0:
            raise ValueError("length_scale_sq must be positive")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        d2 = np.sum((x - np.asarray(self.x0)) ** 2, axis=-1)
        return self.amplitude * np.exp(-d2 / self.length_scale_sq)

    def rotated(self, angle: float) -> "SourceSpec":
        c, s = np.cos(angle), np.sin(angle)
        x, y = self.x0
        return SourceSpec(self.amplitude, (c * x - s * y, s * x + c * y), self.length_scale_sq)


@dataclass(eq=False)
class ScalarField:
    mesh: AnnulusMesh
    theta: np.ndarray  # (n_nodes,)

    def export(self, path) -> None:
        write_scalar(self, path)


def cell_peclet(m: AnnulusMesh, flow: FlowField, kappa: float) -> float:
    """``max_e |u|_e h_e / (2 kappa)``.

    ``|u|_e`` is the largest nodal speed on the element and
    ``h_e = sqrt(2 |T_e|)``, the leg of the right isosceles triangle of equal
    area (the nominal grid spacing for split quadrilateral cells).
    """
    if flow.mesh is not m:
        raise MeshMismatch("flow was solved on a different mesh")
    speed = np.linalg.norm(flow.velocity, axis=1)[m.elements].max(axis=1)
    area = m.geometry(4).weights.sum(axis=1)
    return float(np.max(speed * np.sqrt(2.0 * area)) / (2.0 * kappa))


def solve_advdiff(m: AnnulusMesh, flow: FlowField, kappa: float, q: SourceSpec,
                  check_peclet: bool = True) -> ScalarField:
    if flow.mesh is not m:
        raise MeshMismatch("flow was solved on a different mesh")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if check_peclet:
        pe = cell_peclet(m, flow, kappa)
        if pe > 1.0:
            warnings.warn(f"cell Peclet number {pe:.2f} > 1; unstabilised Galerkin may oscillate",
                          RuntimeWarning, stacklevel=2)
    geo = m.geometry(5)
    w = geo.weights
    el = m.elements
    u_q = np.einsum("qa,eai->eqi", geo.N, flow.velocity[el])  # velocity at qp
    diff = kappa * np.einsum("eq,eqai,eqbi->eab", w, geo.dN, geo.dN)
    adv = np.einsum("eq,qa,eqi,eqbi->eab", w, geo.N, u_q, geo.dN)  # row: test, col: trial
    K = assemble(el, el, diff + adv, (m.n_nodes, m.n_nodes))
    F = assemble_vector(el, np.einsum("eq,qa,eq->ea", w, geo.N, q(geo.x)), m.n_nodes)
    theta = solve_dirichlet(K, F, m.outer_nodes, np.zeros(m.outer_nodes.size),
                            order=m.dissection_order)
    return ScalarField(m, theta)


def outer_flux(field: ScalarField, kappa: float) -> float:
    """Outward diffusive flux ``-kappa int_{outer} grad(theta) . n ds``."""
    m = field.mesh
    elems, xi, _, ds, normals = boundary_edge_quadrature(m, "outer", n_points=4)
    G = p2_grad(xi)  # (Q, 6, 2)
    coords = m.coords[elems]
    J = np.einsum("eai,qaj->eqij", coords, G)
    invJ = np.linalg.inv(J)
    dN = np.einsum("qaj,eqji->eqai", G, invJ)
    grad = np.einsum("ea,eqai->eqi", field.theta[m.elements[elems]], dN)
    return float(-kappa * np.sum(ds * np.sum(grad * normals, axis=-1)))


def source_integral(m: AnnulusMesh, q: SourceSpec) -> float:
    geo = m.geometry(5)
    return float(np.sum(geo.weights * q(geo.x)))


def integrate(field: ScalarField) -> float:
    geo = field.mesh.geometry(4)
    th = geo.N @ field.theta[field.mesh.elements].T  # (Q, E)
    return float(np.sum(geo.weights * th.T))


def write_scalar(field: ScalarField, path) -> None:
    rows = (f"{i} {t!r}" for i, t in enumerate(field.theta.tolist()))
    Path(path).write_text("\n".join(rows) + "\n")
