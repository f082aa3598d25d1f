"""Command-line entry point: ``stokes-shape {forward,sample,diagnose}``.

Exit codes: 0 success, 1 configuration or input validation error,
2 runtime or pipeline error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .boundary import BoundaryParams
from .config import load_config
from .errors import ConfigError, ShapeError
from .inference import chain_paths, run_chains
from .observe import forward_fields

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class InputError(Exception):
    """Bad command-line input (maps to exit code 1)."""


def read_params(path, K: int, b0: float) -> BoundaryParams:
    """Whitespace or comma separated list of ``K`` Fourier coefficients."""
    text = Path(path).read_text().replace(",", " ")
    try:
        coeffs = np.array([float(v) for v in text.split()])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if coeffs.size != K:
        raise InputError(f"{path}: expected {K} coefficients, got {coeffs.size}")
    return BoundaryParams(coeffs, b0)


def cmd_forward(args) -> int:
    cfg = load_config(args.config)
    if args.params:
        params = read_params(args.params, cfg.boundary.K, cfg.boundary.b0)
    else:
        params = BoundaryParams.zeros(cfg.boundary.K, cfg.boundary.b0)
    res = forward_fields(params, cfg)
    print(" ".join(repr(float(v)) for v in res.observation.values))
    if args.export_mesh:
        res.mesh.export(args.export_mesh)
    if args.export_fields:
        out = Path(args.export_fields)
        out.mkdir(parents=True, exist_ok=True)
        res.flow.export(out / "velocity.txt", out / "pressure.txt")
        if res.scalar is not None:
            res.scalar.export(out / "scalar.txt")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.output)
    if not args.force and not args.resume:
        existing = [p for c in range(cfg.chain.n_chains) for p in chain_paths(out, c) if p.exists()]
        if existing:
            raise InputError(f"{existing[0]} exists; pass --force to overwrite or --resume")
    seed = cfg.chain.seed if args.seed is None else args.seed
    results = run_chains(cfg, out, workers=args.workers, seed=seed, prior_only=args.prior_only,
                         resume=args.resume, force=args.force)
    for c, r in enumerate(results):
        print(f"chain {c}: steps {r.n_steps} acceptance {r.acceptance_rate:.4f} "
              f"final_rho {r.final_rho:.6f} log {r.csv_path}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    burn = cfg.chain.burn_in if args.burn_in is None else args.burn_in
    if not 0.0 <= burn < 1.0:
        raise InputError("--burn-in must lie in [0, 1)")
    try:
        chains = dg.read_chains(args.chains)
    except ShapeError as exc:
        raise InputError(str(exc)) from exc
    if chains[0].K != cfg.boundary.K:
        raise InputError(f"chains have K={chains[0].K} but the config says K={cfg.boundary.K}")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    b0, cp = cfg.boundary.b0, cfg.clamp

    areas = [dg.enclosed_areas(c.coeffs, b0, cp) for c in chains]
    dg.write_running_means(out / "running_mean_area.csv", [dg.running_mean(a) for a in areas],
                           [c.step for c in chains])
    kept = [c.discard(burn) for c in chains]
    summary = [f"burn_in {burn!r}"]
    summary += [f"chain {i} records {len(c)} acceptance {c.acceptance_rate:.4f}"
                for i, c in enumerate(chains)]
    if len(kept) >= 2:
        n = min(len(c) for c in kept)
        kept_areas = [a[len(a) - len(c):][-n:] for a, c in zip(areas, kept)]
        try:
            summary.append(f"rhat_area {dg.rhat(kept_areas)!r}")
        except ShapeError as exc:
            summary.append(f"rhat_area nan ({exc})")
    coeffs = np.concatenate([c.coeffs for c in kept])
    angles = dg.angle_grid(360)
    probs = np.asarray(dg.DEFAULT_PROBS)
    dg.write_radius_quantiles(out / "radius_quantiles.csv", angles, probs,
                              dg.radius_quantiles(coeffs, b0, cp, angles, probs))
    if coeffs.shape[0] >= 3:
        base = np.deg2rad([0.0, 90.0, 180.0, 360.0])
        lags = dg.angle_grid(360)
        dg.write_radius_correlation(out / "radius_correlation.csv", base, lags,
                                    dg.radius_correlation(coeffs, b0, cp, base, lags))
    obs = np.concatenate([c.obs for c in kept])
    if obs.shape[1] and np.all(np.isfinite(obs)):
        dg.write_observation_quantiles(out / "observation_quantiles.csv", probs,
                                       dg.observation_quantiles(obs, probs), cfg.likelihood.data)
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stokes-shape", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forward", help="solve the forward problem and print the observation")
    f.add_argument("--config", required=True)
    f.add_argument("--params", help="file with K Fourier coefficients (default: zeros)")
    f.add_argument("--export-mesh", metavar="PATH")
    f.add_argument("--export-fields", metavar="DIR")
    f.set_defaults(func=cmd_forward)

    s = sub.add_parser("sample", help="run pCN chains")
    s.add_argument("--config", required=True)
    s.add_argument("--output", required=True, metavar="DIR")
    s.add_argument("--seed", type=int)
    s.add_argument("--resume", action="store_true")
    s.add_argument("--force", action="store_true")
    s.add_argument("--prior-only", action="store_true", help="sample the prior (misfit 0)")
    s.add_argument("--workers", type=int, help="parallel chains (default: min(n_chains, cpus))")
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("diagnose", help="R-hat, quantile and correlation tables")
    d.add_argument("chains", nargs="+")
    d.add_argument("--config", required=True)
    d.add_argument("--burn-in", type=float)
    d.add_argument("--output", required=True, metavar="DIR")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
