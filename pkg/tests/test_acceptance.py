"""One check per acceptance criterion; each prints ``criterion N: PASS|FAIL detail``.

Criteria 10 and 11 sample desk-scale posteriors and are marked ``nightly``;
run them with ``pytest --run-nightly`` (optionally ``--desk-dir runs/desk`` to
resume or reuse chains written by ``scripts/run_desk_examples.py``).
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import unit_annulus
from oracles import couette_speed, couette_vorticity, expected_sobolev_norm, prior_variance
from stokes_shape import diagnostics as dg
from stokes_shape.advdiff import ScalarField, SourceSpec, outer_flux, solve_advdiff, source_integral
from stokes_shape.boundary import (
    ClampParams, clamp, galerkin_residual, l2_error, project_to_bspline, sobolev_norm_sq, spline_radius,
)
from stokes_shape.config import load_config
from stokes_shape.inference import ForwardTarget, PriorSpec, make_rng, run_chain, run_chains, sample_prior
from stokes_shape.mesh import generate_mesh
from stokes_shape.observe import (
    quadrants, ring_sensors, scalar_variance_global, scalar_variance_sectoral,
    vorticity_ball_averages,
)
from stokes_shape.stokes import StokesConfig, couette_exact, h1_error, solve_stokes

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
CP = ClampParams()


def test_criterion_01_couette_oracle(report):
    t0 = time.perf_counter()
    m = unit_annulus(0.03)
    flow = solve_stokes(m, StokesConfig())
    w = vorticity_ball_averages(flow, ring_sensors()).values
    elapsed = time.perf_counter() - t0
    phi = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    speed = np.linalg.norm(flow.velocity_at(1.5 * np.stack([np.cos(phi), np.sin(phi)], axis=1)), axis=1)
    w_err = np.max(np.abs(w / couette_vorticity() - 1))
    s_err = np.max(np.abs(speed / couette_speed(1.5) - 1))
    ok = w_err <= 0.02 and s_err <= 0.02 and elapsed < 30
    report(1, ok, f"vorticity rel err {w_err:.2e}, speed rel err {s_err:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_fem_convergence(report):
    t0 = time.perf_counter()
    cfg = StokesConfig(eps_pen=1e-6)
    exact = lambda x: couette_exact(x, 1.0, 2.0, 10.0)
    e1 = h1_error(solve_stokes(unit_annulus(0.12), cfg), exact)
    e2 = h1_error(solve_stokes(unit_annulus(0.06), cfg), exact)
    elapsed = time.perf_counter() - t0
    order = np.log2(e1 / e2)
    ok = order >= 1.8 and elapsed < 120
    report(2, ok, f"H1 errors {e1:.3e} -> {e2:.3e}, order {order:.2f}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_clamp(report):
    d = 1e-6
    jumps = []
    for t0 in (0.4, 0.6, 1.4, 1.6):
        left = (clamp(t0, CP) - clamp(t0 - d, CP)) / d
        right = (clamp(t0 + d, CP) - clamp(t0, CP)) / d
        jumps.append(abs(left - right))
    values_ok = (clamp(1.0, CP) == 1.0 and abs(clamp(0.5, CP) - 0.525) < 1e-15
                 and clamp(-1e300, CP) == 0.5 and clamp(1e300, CP) == 1.5)
    ok = values_ok and max(jumps) < 1e-4
    report(3, ok, f"values {'exact' if values_ok else 'wrong'}, max derivative jump {max(jumps):.1e}")
    assert ok


def test_criterion_04_bspline_projection(report):
    const = project_to_bspline(lambda x: np.full_like(x, 1.7), 40)
    const_err = max(np.max(np.abs(const.a - 1.7)), l2_error(lambda x: np.full_like(x, 1.7), const))
    rng = make_rng(2024)
    prior = PriorSpec(1.25, 320)
    residual, errors = 0.0, []
    for _ in range(50):
        b = sample_prior(prior, rng)
        c = project_to_bspline(b, 160)
        residual = max(residual, float(np.max(np.abs(galerkin_residual(b, c)))))
        errors.append(l2_error(b, c))
    errors = np.array(errors)
    frac = np.mean((errors >= 0.002) & (errors <= 0.05))
    ok = const_err <= 1e-10 and residual <= 1e-10 and frac >= 0.9
    report(4, ok, f"constant err {const_err:.1e}, max residual {residual:.1e}, "
                  f"L2 errors {errors.min():.4f}..{errors.max():.4f} ({frac:.0%} in [0.002, 0.05])")
    assert ok


def test_criterion_05_prior_moments(report):
    n = 100_000
    rng = make_rng(5)
    spec = PriorSpec(1.25, 8)
    draws = np.array([sample_prior(spec, rng).coeffs for _ in range(n)])
    z = []
    checks = {"Var[b1]": (draws[:, 0], prior_variance(1, 1.25)),
              "Var[b3]": (draws[:, 2], prior_variance(2, 1.25))}
    for name, (x, var) in checks.items():
        z.append(abs(x.var(ddof=1) - var) / (var * np.sqrt(2.0 / (n - 1))))
    spec1 = PriorSpec(1.0, 320)
    norms = np.array([sobolev_norm_sq(sample_prior(spec1, rng), 0.5) for _ in range(n)])
    target = expected_sobolev_norm(1.0, 0.5, 320)
    z.append(abs(norms.mean() - target) / (norms.std(ddof=1) / np.sqrt(n)))
    ok = max(z) < 3
    report(5, ok, "standard-error z scores Var[b1] {:.2f}, Var[b3] {:.2f}, E|b|^2_H0.5 {:.2f}".format(*z))
    assert ok


def batch_mean_se(series, n_batches=50):
    batches = np.array_split(series, n_batches)
    means = np.array([b.mean() for b in batches])
    return means.std(ddof=1) / np.sqrt(n_batches)


def test_criterion_06_pcn_prior_invariance(report, tmp_path):
    problem = load_config(CONFIGS / "ex1_desk.cfg")
    res = run_chain(problem, tmp_path, prior_only=True, n_samples=10_000, seed=6)
    chain = dg.read_chain(res.csv_path)
    x = chain.coeffs[:, 0]
    sq = (x - x.mean()) ** 2
    z = abs(sq.mean() - 1.0) / batch_mean_se(sq)
    ok = res.acceptance_rate == 1.0 and z < 3
    report(6, ok, f"acceptance {res.acceptance_rate:.4f}, Var[b1] {sq.mean():.4f} "
                  f"(batch-means z {z:.2f}), final rho {res.final_rho:.3f}")
    assert ok


def test_criterion_07_sectoral_identity(report):
    rng = make_rng(7)
    worst, const = 0.0, 0.0
    for _ in range(3):
        p = sample_prior(PriorSpec(1.0, 20), rng)
        m = generate_mesh(spline_radius(p, CP, 40), 2.0, 0.1)
        th = solve_advdiff(m, solve_stokes(m, StokesConfig()), 1.0, SourceSpec())
        total = scalar_variance_global(th).values[0]
        parts = scalar_variance_sectoral(th, quadrants()).values
        worst = max(worst, abs(parts.sum() - total) / total)
        c = ScalarField(m, np.full(m.n_nodes, 2.5))
        const = max(const, scalar_variance_global(c).values[0],
                    np.max(scalar_variance_sectoral(c, quadrants()).values))
    ok = worst <= 1e-10 and const <= 1e-20
    report(7, ok, f"max relative sum defect {worst:.1e}, constant-field variance {const:.1e}")
    assert ok


def test_criterion_08_scalar_balance(report):
    m = unit_annulus(0.03)
    q = SourceSpec()
    th = solve_advdiff(m, solve_stokes(m, StokesConfig()), 1.0, q)
    flux, total = outer_flux(th, 1.0), source_integral(m, q)
    rel = abs(flux - total) / total
    ok = rel <= 0.01
    report(8, ok, f"kappa*flux {flux:.5f} vs source integral {total:.5f} (rel {rel:.1e})")
    assert ok


def test_criterion_09_rhat(report, tmp_path):
    rng = make_rng(9)
    x = rng.standard_normal(1000)
    same = dg.rhat([x, x])
    separated = dg.rhat([rng.standard_normal(10_000), 10 + rng.standard_normal(10_000)])
    problem = load_config(CONFIGS / "ex1_desk.cfg")
    res = run_chains(problem, tmp_path, prior_only=True, workers=1)
    chains = [c.discard(problem.chain.burn_in) for c in dg.read_chains([r.csv_path for r in res])]
    prior_rhat = dg.rhat([dg.enclosed_areas(c.coeffs, 1.0, CP) for c in chains])
    ok = abs(same - np.sqrt(999 / 1000)) < 1e-12 and separated > 3 and prior_rhat < 1.1
    report(9, ok, f"identical {same:.6f}, separated {separated:.1f}, desk prior-only {prior_rhat:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# Desk-scale posteriors (nightly)


def desk_chains(name, request, tmp_path_factory):
    cfg = load_config(CONFIGS / f"{name}_desk.cfg")
    base = request.config.getoption("--desk-dir")
    out = Path(base) / name if base else tmp_path_factory.mktemp(name)
    t0 = time.perf_counter()
    results = run_chains(cfg, out, resume=True)
    elapsed = time.perf_counter() - t0
    recorded = out.parent / "report.json"
    if base and recorded.exists():
        # reused chains: count the sampling time recorded by scripts/run_desk_examples.py
        elapsed += json.loads(recorded.read_text()).get(name, {}).get("seconds", 0.0)
    chains = [c.discard(cfg.chain.burn_in) for c in dg.read_chains([r.csv_path for r in results])]
    return cfg, chains, elapsed


def lag180_correlation(cfg, chains):
    coeffs = np.concatenate([c.coeffs for c in chains])
    return dg.radius_correlation(coeffs, cfg.boundary.b0, cfg.clamp, [0.0], [np.pi])[0, 0]


@pytest.mark.nightly
def test_criterion_10_desk_example_one(report, request, tmp_path_factory):
    cfg, chains, elapsed = desk_chains("ex1", request, tmp_path_factory)
    acc = [c.acceptance_rate for c in chains]
    coeffs = np.concatenate([c.coeffs for c in chains])
    med = dg.radius_quantiles(coeffs, cfg.boundary.b0, cfg.clamp, np.deg2rad([0.0, 90.0]), [0.5])[0]
    ok = all(0.15 <= a <= 0.35 for a in acc) and med[1] > med[0] and elapsed < 4 * 3600
    report(10, ok, f"post-burn-in acceptance {acc[0]:.3f}/{acc[1]:.3f}, median r(90) {med[1]:.4f} "
                   f"vs r(0) {med[0]:.4f}, {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.nightly
def test_criterion_11_desk_correlation_contrast(report, request, tmp_path_factory):
    cfg2, chains2, _ = desk_chains("ex2", request, tmp_path_factory)
    cfg3, chains3, _ = desk_chains("ex3", request, tmp_path_factory)
    c2, c3 = lag180_correlation(cfg2, chains2), lag180_correlation(cfg3, chains3)
    ok = bool(abs(c3) < abs(c2))
    # report-only: the outcome is printed but does not fail the suite
    report(11, ok, f"corr(r(0), r(180)) example 2 {c2:+.3f}, example 3 {c3:+.3f} (report only)")


class CrashingTarget(ForwardTarget):
    """Forward target that dies on a given evaluation, like a killed process."""

    def __init__(self, problem, crash_at):
        super().__init__(problem)
        self.crash_at = crash_at

    def __call__(self, params):
        if self.n_evals + 1 == self.crash_at:
            raise KeyboardInterrupt
        return super().__call__(params)


def test_criterion_12_determinism(report, tmp_path, desk_problem):
    problem = desk_problem.with_changes(chain={"n_samples": 16, "checkpoint_every": 5,
                                               "adapt_every": 4, "n_chains": 1})
    a = run_chain(problem, tmp_path / "a", seed=12)
    b = run_chain(problem, tmp_path / "b", seed=12)
    identical = a.csv_path.read_bytes() == b.csv_path.read_bytes()
    with pytest.raises(KeyboardInterrupt):  # killed after step 12, last checkpoint at step 10
        run_chain(problem, tmp_path / "c", seed=12, target=CrashingTarget(problem, crash_at=14))
    resumed = run_chain(problem, tmp_path / "c", seed=12, resume=True)
    resumed_equal = resumed.csv_path.read_bytes() == a.csv_path.read_bytes()
    ok = identical and resumed_equal
    report(12, ok, f"same-seed logs identical: {identical}; resumed log equals straight run: {resumed_equal}")
    assert ok
