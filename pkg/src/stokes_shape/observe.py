"""Observation operators and the composite forward map."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .advdiff import ScalarField, solve_advdiff
from .boundary import BoundaryParams, spline_radius
from .errors import PipelineError, ShapeError
from .mesh import AnnulusMesh, generate_mesh, locate_ball
from .stokes import FlowField, solve_stokes, vorticity

if TYPE_CHECKING:
    from .config import ProblemConfig

VORTICITY = "vorticity"
SCALAR_VAR_GLOBAL = "scalar_var_global"
SCALAR_VAR_SECTORAL = "scalar_var_sectoral"
KINDS = (VORTICITY, SCALAR_VAR_GLOBAL, SCALAR_VAR_SECTORAL)


@dataclass(frozen=True)
class SensorArray:
    centers: np.ndarray  # (n, 2)
    radii: np.ndarray  # (n,)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if c.shape != (r.size, 2):
            raise ValueError("centers must be (n, 2) with one radius per center")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self):
        return self.radii.size

    def check_inside(self, r_max: float, R: float) -> None:
        d = np.linalg.norm(self.centers, axis=1)
        bad = np.flatnonzero((d - self.radii < r_max) | (d + self.radii > R))
        if bad.size:
            raise ValueError(f"sensor(s) {bad.tolist()} not inside r_max <= |x| <= R")

    def rotated(self, angle: float) -> "SensorArray":
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return SensorArray(self.centers @ rot.T, self.radii)


def ring_sensors(n: int = 8, ring: float = 1.75, radius: float = 0.1,
                 start: float = 0.0) -> SensorArray:
    """``n`` equal balls evenly spaced counter-clockwise on a circle, first at ``start``."""
    phi = start + 2.0 * np.pi * np.arange(n) / n
    return SensorArray(ring * np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n, radius))


@dataclass(frozen=True)
class SectorSpec:
    angles: np.ndarray  # 0 = phi_0 < ... < phi_n = 2 pi

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if a.size < 2 or np.any(np.diff(a) <= 0):
            raise ValueError("sector angles must be strictly increasing")
        if abs(a[0]) > 1e-12 or abs(a[-1] - 2 * np.pi) > 1e-12:
            raise ValueError("sector angles must run from 0 to 2*pi")
        object.__setattr__(self, "angles", a)

    def __len__(self):
        return self.angles.size - 1

    def index(self, phi: np.ndarray) -> np.ndarray:
        """Sector of each angle; sector ``j`` is ``(phi_j, phi_{j+1}]`` (zero-based)."""
        phi = np.mod(phi, 2 * np.pi)
        j = np.searchsorted(self.angles, phi, side="left") - 1
        return np.mod(j, len(self))


def quadrants() -> SectorSpec:
    return SectorSpec(np.pi / 2 * np.arange(5))


@dataclass(frozen=True)
class Observation:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observation kind {self.kind!r}")
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=float)))

    def __len__(self):
        return self.values.size


# ---------------------------------------------------------------------------
# Operators


def vorticity_ball_averages(flow: FlowField, sensors: SensorArray) -> Observation:
    out = np.empty(len(sensors))
    for j, (c, r) in enumerate(zip(sensors.centers, sensors.radii)):
        ball = locate_ball(flow.mesh, c, r)
        out[j] = ball.integrate(vorticity(flow, ball.elements, ball.xi)) / (np.pi * r * r)
    return Observation(out, VORTICITY)


def quadrature_values(field: ScalarField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scalar values, weights and physical points at all domain quadrature points."""
    geo = field.mesh.geometry(4)
    vals = np.einsum("qa,ea->eq", geo.N, field.theta[field.mesh.elements])
    return vals.ravel(), geo.weights.ravel(), geo.x.reshape(-1, 2)


def variance_density(values: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-point contributions ``w (theta - mean)^2 / |D|`` and the area ``|D|``."""
    area = weights.sum()
    mean = np.dot(weights, values) / area
    return weights * (values - mean) ** 2 / area, area


def scalar_variance_global(theta: ScalarField) -> Observation:
    vals, w, _ = quadrature_values(theta)
    dens, _ = variance_density(vals, w)
    return Observation([dens.sum()], SCALAR_VAR_GLOBAL)


def scalar_variance_sectoral(theta: ScalarField, sectors: SectorSpec) -> Observation:
    """Sector contributions with the global mean and the global area normalisation."""
    vals, w, x = quadrature_values(theta)
    dens, _ = variance_density(vals, w)
    idx = sectors.index(np.arctan2(x[:, 1], x[:, 0]))
    return Observation(np.bincount(idx, weights=dens, minlength=len(sectors)), SCALAR_VAR_SECTORAL)


# ---------------------------------------------------------------------------
# Forward map


@dataclass(eq=False)
class ForwardResult:
    mesh: AnnulusMesh
    flow: FlowField
    scalar: Optional[ScalarField]
    observation: Observation
    radius_fn: object


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ShapeError as exc:
        raise PipelineError(name, exc) from exc
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise PipelineError(name, exc) from exc


def forward_fields(params: BoundaryParams, problem: "ProblemConfig") -> ForwardResult:
    """Boundary -> spline -> mesh -> Stokes -> (advection-diffusion) -> observation."""
    radius = _stage("boundary", spline_radius, params, problem.clamp, problem.boundary.n_B,
                    problem.boundary.quad_order)
    mesh = _stage("mesh", generate_mesh, radius, problem.domain.R, problem.domain.h)
    flow = _stage("stokes", solve_stokes, mesh, problem.stokes)
    kind = problem.observation.kind
    scalar = None
    if kind == VORTICITY:
        obs = _stage("observe", vorticity_ball_averages, flow, problem.sensors)
    else:
        scalar = _stage("advdiff", solve_advdiff, mesh, flow, problem.advdiff.kappa, problem.source)
        if kind == SCALAR_VAR_GLOBAL:
            obs = _stage("observe", scalar_variance_global, scalar)
        else:
            obs = _stage("observe", scalar_variance_sectoral, scalar, problem.sectors)
    return ForwardResult(mesh, flow, scalar, obs, radius)


def forward(params: BoundaryParams, problem: "ProblemConfig") -> Observation:
    return forward_fields(params, problem).observation
