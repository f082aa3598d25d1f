"""Bayesian shape inference for the inner rotor of a two-dimensional Stokes mixer.

The forward map takes Fourier coefficients of the inner boundary to a clamped
B-spline curve, meshes the annular domain with quadratic triangles, solves
Stokes (and optionally advection-diffusion) flow and evaluates an observation.
The posterior over coefficients is sampled with adaptive pCN.
"""
from .boundary import BoundaryParams, ClampParams
from .config import ProblemConfig, load_config, parse_config, serialize_config
from .errors import ShapeError
from .inference import LikelihoodSpec, PriorSpec, run_chain, sample_prior
from .observe import Observation, forward

__all__ = [
    "BoundaryParams", "ClampParams", "ProblemConfig", "load_config", "parse_config",
    "serialize_config", "ShapeError", "LikelihoodSpec", "PriorSpec", "run_chain",
    "sample_prior", "Observation", "forward",
]
