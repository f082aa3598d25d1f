"""Gaussian Fourier prior, Gaussian likelihood and the adaptive pCN sampler.

Chains write one CSV row per step with header
``step,accepted,rho,phi,obs_1..obs_n,b_1..b_K`` and a JSON checkpoint that
includes the counter-based RNG state, so an interrupted run resumes
record-for-record identical to an uninterrupted one.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .boundary import BoundaryParams
from .errors import ShapeError
from .observe import forward

log = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.23
RHO_BOUNDS = (0.1, 0.99999)


@dataclass(frozen=True)
class PriorSpec:
    """``b_{2k-1}, b_{2k} ~ N(0, k^{-2s-1})`` independently for ``k = 1..K/2``."""

    s: float
    K: int

    def __post_init__(self):
        if not self.s > 0.5:
            raise ValueError("s must exceed 1/2 for continuous boundaries")
        if self.K < 2 or self.K % 2:
            raise ValueError("K must be a positive even integer")

    @property
    def std(self) -> np.ndarray:
        k = np.repeat(np.arange(1, self.K // 2 + 1), 2)
        return k ** (-(2.0 * self.s + 1.0) / 2.0)


def sample_prior(spec: PriorSpec, rng: np.random.Generator, b0: float = 1.0) -> BoundaryParams:
    return BoundaryParams(spec.std * rng.standard_normal(spec.K), b0)


@dataclass(frozen=True)
class LikelihoodSpec:
    data: np.ndarray
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "data", np.atleast_1d(np.asarray(self.data, dtype=float)))


def misfit_from_values(values: np.ndarray, like: LikelihoodSpec) -> float:
    """``1/2 |(Y - G) / sigma|^2``."""
    values = np.asarray(values, dtype=float)
    if values.shape != like.data.shape:
        raise ValueError(f"observation length {values.size} does not match data length {like.data.size}")
    r = (like.data - values) / like.sigma
    return 0.5 * float(np.dot(r, r))


def misfit(params: BoundaryParams, like: LikelihoodSpec, problem) -> float:
    return misfit_from_values(forward(params, problem).values, like)


# ---------------------------------------------------------------------------
# Targets: callables params -> (phi, observation values)


class ForwardTarget:
    """Misfit through the full forward map, counting evaluations."""

    def __init__(self, problem, like: Optional[LikelihoodSpec] = None):
        self.problem = problem
        self.like = like if like is not None else problem.likelihood_spec
        self.n_obs = self.like.data.size
        self.n_evals = 0

    def __call__(self, params: BoundaryParams) -> tuple[float, np.ndarray]:
        self.n_evals += 1
        values = forward(params, self.problem).values
        return misfit_from_values(values, self.like), values


class PriorOnlyTarget:
    """``Phi = 0``; observations are logged as NaN."""

    def __init__(self, n_obs: int):
        self.n_obs = n_obs
        self.n_evals = 0

    def __call__(self, params: BoundaryParams) -> tuple[float, np.ndarray]:
        self.n_evals += 1
        return 0.0, np.full(self.n_obs, np.nan)


Target = Callable[[BoundaryParams], "tuple[float, np.ndarray]"]


# ---------------------------------------------------------------------------
# Sampler


def make_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Independent Philox stream per ``(seed, chain_id)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chain_id])))


@dataclass
class ChainState:
    params: BoundaryParams
    phi: float
    obs: np.ndarray
    rho: float
    step: int
    rng: np.random.Generator


def acceptance_probability(phi_current: float, phi_proposal: float) -> float:
    return float(np.exp(min(0.0, phi_current - phi_proposal)))


def pcn_proposal(b: np.ndarray, xi: np.ndarray, rho: float) -> np.ndarray:
    return rho * b + np.sqrt(1.0 - rho * rho) * xi


def pcn_step(state: ChainState, rho: float, target: Target,
             prior: PriorSpec) -> tuple[ChainState, bool]:
    """One pCN step; always draws ``xi`` then ``u`` so the RNG stream is path independent.

    A forward failure at the proposal counts as a rejection.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rng = state.rng
    xi = sample_prior(prior, rng).coeffs
    u = rng.random()
    proposal = BoundaryParams(pcn_proposal(state.params.coeffs, xi, rho), state.params.b0)
    step = state.step + 1
    try:
        phi_new, obs_new = target(proposal)
    except ShapeError as exc:
        log.warning("step %d: proposal rejected after forward failure (%s)", step, exc)
        return ChainState(state.params, state.phi, state.obs, rho, step, rng), False
    if u < acceptance_probability(state.phi, phi_new):
        return ChainState(proposal, phi_new, np.asarray(obs_new, float), rho, step, rng), True
    return ChainState(state.params, state.phi, state.obs, rho, step, rng), False


def adapt_rho(history, rho: float, progress: float, target: float = TARGET_ACCEPTANCE,
              gain: float = 2.0, bounds: tuple[float, float] = RHO_BOUNDS) -> float:
    """Rescale the step ``1 - rho`` towards the target acceptance rate.

    The factor ``exp(gain (a - target))`` is clipped to ``[0.5, 2]`` at the
    start of the run, and the bracket shrinks linearly to ``[1, 1]`` at the end.
    """
    if not 0.0 <= progress <= 1.0:
        raise ValueError("progress must lie in [0, 1]")
    a = float(np.mean(history)) if len(history) else target
    lower, upper = 0.5 + 0.5 * progress, 2.0 - progress
    c = float(np.clip(np.exp(gain * (a - target)), lower, upper))
    new = rho if c == 1.0 else 1.0 - (1.0 - rho) * c
    return float(np.clip(new, *bounds))


# ---------------------------------------------------------------------------
# Chain runner with CSV log and JSON checkpoint


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__uint64__": [int(v) for v in obj.ravel()]}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__uint64__" in obj:
            return np.array(obj["__uint64__"], dtype=np.uint64)
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj


def rng_state(rng: np.random.Generator) -> dict:
    return _jsonable(rng.bit_generator.state)


def rng_from_state(state: dict) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = _from_jsonable(state)
    return np.random.Generator(bg)


def csv_header(n_obs: int, K: int) -> str:
    cols = ["step", "accepted", "rho", "phi"]
    cols += [f"obs_{i}" for i in range(1, n_obs + 1)]
    cols += [f"b_{i}" for i in range(1, K + 1)]
    return ",".join(cols)


def _row(step: int, accepted: bool, rho: float, state: ChainState) -> str:
    vals = [repr(float(rho)), repr(float(state.phi))]
    vals += [repr(float(v)) for v in state.obs]
    vals += [repr(float(v)) for v in state.params.coeffs]
    return f"{step},{int(accepted)}," + ",".join(vals)


def chain_paths(out_dir, chain_id: int) -> tuple[Path, Path]:
    out = Path(out_dir)
    return out / f"chain_{chain_id}.csv", out / f"chain_{chain_id}.ckpt.json"


@dataclass
class ChainResult:
    csv_path: Path
    checkpoint_path: Path
    n_steps: int
    n_accepted: int
    final_rho: float
    n_evals: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / max(self.n_steps, 1)


def _initial_state(problem, target, prior, rng, init: str, rho: float,
                   max_tries: int = 100) -> ChainState:
    b0 = problem.boundary.b0
    for attempt in range(max_tries):
        if init == "zero" and attempt == 0:
            params = BoundaryParams.zeros(prior.K, b0)
        else:
            params = sample_prior(prior, rng, b0)
        try:
            phi, obs = target(params)
        except ShapeError as exc:
            log.warning("initial state rejected after forward failure (%s)", exc)
            continue
        return ChainState(params, phi, np.asarray(obs, float), rho, 0, rng)
    raise ShapeError(f"no valid initial state after {max_tries} prior draws")


def _write_checkpoint(path: Path, state: ChainState, window: list, n_accepted: int) -> None:
    payload = {
        "step": state.step,
        "rho": state.rho,
        "phi": state.phi,
        "obs": [float(v) for v in state.obs],
        "b0": state.params.b0,
        "coeffs": [float(v) for v in state.params.coeffs],
        "window": [bool(v) for v in window],
        "n_accepted": n_accepted,
        "rng": rng_state(state.rng),
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=1))
    os.replace(tmp, path)


def _read_checkpoint(path: Path):
    d = json.loads(path.read_text())
    params = BoundaryParams(np.array(d["coeffs"]), d["b0"])
    state = ChainState(params, d["phi"], np.array(d["obs"], dtype=float), d["rho"],
                       d["step"], rng_from_state(d["rng"]))
    return state, list(d["window"]), d["n_accepted"]


def _truncate_log(path: Path, n_steps: int) -> None:
    with path.open() as fh:
        lines = fh.readlines()
    keep = lines[: n_steps + 1]
    if len(keep) < n_steps + 1:
        raise ShapeError(f"{path} has fewer rows than its checkpoint ({n_steps})")
    with path.open("w") as fh:
        fh.writelines(keep)


def run_chain(problem, out_dir, chain_id: int = 0, *, seed: Optional[int] = None,
              n_samples: Optional[int] = None, target: Optional[Target] = None,
              prior_only: bool = False, resume: bool = False, force: bool = False) -> ChainResult:
    """Run (or resume) one pCN chain and write its log and checkpoint into ``out_dir``."""
    ch = problem.chain
    seed = ch.seed if seed is None else seed
    n_samples = ch.n_samples if n_samples is None else n_samples
    prior = problem.prior_spec
    if target is None:
        target = PriorOnlyTarget(problem.n_obs) if prior_only else ForwardTarget(problem)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, ckpt_path = chain_paths(out, chain_id)

    if resume and ckpt_path.exists():
        state, window, n_acc = _read_checkpoint(ckpt_path)
        _truncate_log(csv_path, state.step)
    else:
        if csv_path.exists() and not force and not resume:
            raise FileExistsError(f"{csv_path} exists; use force to overwrite")
        rng = make_rng(seed, chain_id)
        state = _initial_state(problem, target, prior, rng, ch.init, ch.rho0)
        window, n_acc = [], 0
        csv_path.write_text(csv_header(target.n_obs, prior.K) + "\n")
        _write_checkpoint(ckpt_path, state, window, n_acc)

    with csv_path.open("a") as fh:
        while state.step < n_samples:
            rho = state.rho
            state, accepted = pcn_step(state, rho, target, prior)
            n_acc += accepted
            window.append(accepted)
            fh.write(_row(state.step, accepted, rho, state) + "\n")
            if ch.adapt and state.step % ch.adapt_every == 0:
                state.rho = adapt_rho(window, rho, state.step / n_samples)
                window = []
            if state.step % ch.checkpoint_every == 0 or state.step == n_samples:
                fh.flush()
                _write_checkpoint(ckpt_path, state, window, n_acc)
    n_evals = getattr(target, "n_evals", 0)
    log.info("chain %d: %d steps, acceptance %.3f, final rho %.6f",
             chain_id, state.step, n_acc / max(state.step, 1), state.rho)
    return ChainResult(csv_path, ckpt_path, state.step, n_acc, state.rho, n_evals)


def _run_chain_job(args):
    problem, out_dir, chain_id, kwargs = args
    return run_chain(problem, out_dir, chain_id, **kwargs)


def run_chains(problem, out_dir, *, workers: Optional[int] = None, **kwargs) -> list[ChainResult]:
    """Run ``problem.chain.n_chains`` independent chains, in parallel when ``workers > 1``."""
    n = problem.chain.n_chains
    workers = min(n, os.cpu_count() or 1) if workers is None else workers
    jobs = [(problem, out_dir, c, kwargs) for c in range(n)]
    if workers <= 1:
        return [_run_chain_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chain_job, jobs))
