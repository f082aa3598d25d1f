"""Steady Stokes flow with Taylor-Hood (P2/P1) elements and a penalty term.

The incompressibility constraint is relaxed to ``div u + eps p_k = 0`` where
``p_k = p / nu`` is the kinematic pressure.  The velocity then does not depend
on ``nu`` at all, and the physical pressure is recovered as ``nu * p_k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import assemble, p1_shape, p2_shape, point_gradients, solve_dirichlet, triangle_rule
from .mesh import AnnulusMesh


@dataclass(frozen=True)
class StokesConfig:
    nu: float = 0.001
    omega_bar: float = 10.0
    eps_pen: float = 0.001

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.eps_pen <= 0:
            raise ValueError("eps_pen must be positive")


@dataclass(eq=False)
class FlowField:
    mesh: AnnulusMesh
    velocity: np.ndarray  # (n_nodes, 2)
    pressure: np.ndarray  # (n_vertices,)
    config: StokesConfig

    def velocity_at(self, points) -> np.ndarray:
        elem, xi = self.mesh.locate(points)
        N = p2_shape(xi)  # (P, 6)
        return np.einsum("pa,pai->pi", N, self.velocity[self.mesh.elements[elem]])

    def vorticity_at(self, elem: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return vorticity(self, elem, xi)

    def export(self, velocity_path, pressure_path) -> None:
        write_velocity(self, velocity_path)
        write_pressure(self, pressure_path)


def boundary_velocity(points: np.ndarray, omega_bar: float) -> np.ndarray:
    """Rigid rotation ``omega_bar * x_perp`` with ``x_perp = (x2, -x1)``."""
    return omega_bar * np.stack([points[:, 1], -points[:, 0]], axis=1)


def assemble_stokes(m: AnnulusMesh, eps_pen: float) -> sp.csr_matrix:
    """Symmetric block matrix for unknowns ``[u1, u2, p_k]``."""
    geo = m.geometry(4)
    w = geo.weights
    N, Nv = m.n_nodes, m.n_vertices
    lap = np.einsum("eq,eqai,eqbi->eab", w, geo.dN, geo.dN)
    psi = p1_shape(triangle_rule(4).points)  # (Q, 3)
    div1 = np.einsum("eq,qk,eqa->eka", w, psi, geo.dN[..., 0])
    div2 = np.einsum("eq,qk,eqa->eka", w, psi, geo.dN[..., 1])
    mass = np.einsum("eq,qk,ql->ekl", w, psi, psi)

    el = m.elements
    vert = el[:, :3]
    n = 2 * N + Nv
    A = assemble(el, el, lap, (N, N))
    B1 = assemble(vert, el, div1, (Nv, N))
    B2 = assemble(vert, el, div2, (Nv, N))
    M = assemble(vert, vert, mass, (Nv, Nv))
    K = sp.bmat([
        [A, None, -B1.T],
        [None, A, -B2.T],
        [-B1, -B2, -eps_pen * M],
    ], format="csr")
    assert K.shape == (n, n)
    return K


def stokes_dof_order(m: AnnulusMesh) -> np.ndarray:
    """Node-interleaved ``(u1, u2[, p])`` unknown order following nested dissection."""
    N, Nv = m.n_nodes, m.n_vertices
    nd = m.dissection_order
    dofs = np.stack([nd, N + nd, 2 * N + nd], axis=1)
    keep = np.ones(dofs.shape, dtype=bool)
    keep[:, 2] = nd < Nv
    return dofs[keep]


def solve_stokes(m: AnnulusMesh, cfg: StokesConfig) -> FlowField:
    N = m.n_nodes
    K = assemble_stokes(m, cfg.eps_pen)
    bnodes = np.concatenate([m.inner_nodes, m.outer_nodes])
    uval = np.zeros((bnodes.size, 2))
    uval[m.inner_nodes.size:] = boundary_velocity(m.nodes[m.outer_nodes], cfg.omega_bar)
    fixed = np.concatenate([bnodes, N + bnodes])
    values = np.concatenate([uval[:, 0], uval[:, 1]])
    x = solve_dirichlet(K, np.zeros(K.shape[0]), fixed, values,
                        order=stokes_dof_order(m), symmetric=True)
    velocity = np.stack([x[:N], x[N:2 * N]], axis=1)
    pressure = cfg.nu * x[2 * N:]
    return FlowField(m, velocity, pressure, cfg)


def vorticity(flow: FlowField, elem: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Element-local vorticity ``d u1/d x2 - d u2/d x1`` at reference points.

    This is minus the usual scalar curl, so the clockwise outer rotation with
    ``omega_bar > 0`` gives positive values.
    """
    dN = point_gradients(flow.mesh.coords[elem], xi)  # (P, 6, 2)
    u = flow.velocity[flow.mesh.elements[elem]]  # (P, 6, 2)
    du1_dy = np.einsum("pa,pa->p", u[..., 0], dN[..., 1])
    du2_dx = np.einsum("pa,pa->p", u[..., 1], dN[..., 0])
    return du1_dy - du2_dx


def couette_exact(x: np.ndarray, a: float, R: float, omega_bar: float):
    """Closed-form circular Couette velocity and gradient for the annulus ``a < r < R``.

    The outer wall moves with ``omega_bar * x_perp`` (clockwise for positive
    rate); the inner wall is at rest.  Returns ``(u, grad_u)`` with
    ``grad_u[..., i, j] = d u_i / d x_j``.
    """
    A = omega_bar * R**2 / (R**2 - a**2)
    B = -A * a**2
    r2 = np.sum(x**2, axis=-1)
    # u = -(A + B/r^2) (-y, x) = (A + B/r^2) (y, -x)
    f = A + B / r2
    u = np.stack([f * x[..., 1], -f * x[..., 0]], axis=-1)
    df = -B / r2**2  # d f / d(r^2)
    grad = np.empty(x.shape[:-1] + (2, 2))
    grad[..., 0, 0] = df * 2 * x[..., 0] * x[..., 1]
    grad[..., 0, 1] = f + df * 2 * x[..., 1] ** 2
    grad[..., 1, 0] = -f - df * 2 * x[..., 0] ** 2
    grad[..., 1, 1] = -df * 2 * x[..., 0] * x[..., 1]
    return u, grad


def h1_error(flow: FlowField, exact) -> float:
    """``||u_h - u||_{H^1}`` with ``exact(x) -> (u, grad_u)`` at quadrature points."""
    geo = flow.mesh.geometry(4)
    ue = flow.velocity[flow.mesh.elements]  # (E, 6, 2)
    uh = np.einsum("qa,eai->eqi", geo.N, ue)
    gh = np.einsum("eai,eqaj->eqij", ue, geo.dN)
    u, g = exact(geo.x)
    integrand = np.sum((uh - u) ** 2, axis=-1) + np.sum((gh - g) ** 2, axis=(-1, -2))
    return float(np.sqrt(np.sum(geo.weights * integrand)))


def write_velocity(flow: FlowField, path) -> None:
    rows = (f"{i} {u1!r} {u2!r}" for i, (u1, u2) in enumerate(flow.velocity.tolist()))
    Path(path).write_text("\n".join(rows) + "\n")


def write_pressure(flow: FlowField, path) -> None:
    rows = (f"{i} {p!r}" for i, p in enumerate(flow.pressure.tolist()))
    Path(path).write_text("\n".join(rows) + "\n")
