import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stokes_shape import diagnostics as dg
from stokes_shape.boundary import BoundaryParams, ClampParams, spline_radius
from stokes_shape.errors import ShapeError, ZeroWithinVariance
from stokes_shape.inference import PriorSpec, csv_header, make_rng, sample_prior
from stokes_shape.mesh import generate_mesh, mesh_area

CP = ClampParams()


def synthetic_chain(coeffs, obs=None):
    n = coeffs.shape[0]
    obs = np.zeros((n, 0)) if obs is None else obs
    return dg.Chain(np.arange(1, n + 1), np.ones(n, bool), np.full(n, 0.5), np.zeros(n), obs, coeffs)


class TestEnclosedArea:
    def test_unit_circle(self):
        assert dg.enclosed_area(BoundaryParams.zeros(6), CP) == pytest.approx(np.pi, abs=1e-8)

    def test_first_cosine(self):
        p = BoundaryParams(np.array([0.1, 0.0]))
        assert dg.enclosed_area(p, CP) == pytest.approx(1.005 * np.pi, abs=1e-8)

    def test_saturated(self):
        assert dg.enclosed_area(BoundaryParams.zeros(2, b0=5.0), CP) == pytest.approx(2.25 * np.pi, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            dg.enclosed_area(BoundaryParams.zeros(2), CP, n_points=100)

    def test_vectorised_matches_scalar(self):
        rng = make_rng(0)
        coeffs = np.array([sample_prior(PriorSpec(1.0, 10), rng).coeffs for _ in range(5)])
        single = [dg.enclosed_area(BoundaryParams(c), CP) for c in coeffs]
        assert np.allclose(dg.enclosed_areas(coeffs, 1.0, CP), single, rtol=1e-13)

    def test_agrees_with_mesh_area(self):
        rng = make_rng(12)
        prior = PriorSpec(1.25, 20)
        for _ in range(10):
            p = sample_prior(prior, rng)
            m = generate_mesh(spline_radius(p, CP, 40), 2.0, 0.1)
            assert mesh_area(m) == pytest.approx(4 * np.pi - dg.enclosed_area(p, CP), rel=0.002)


class TestRhat:
    def test_identical_chains(self):
        x = make_rng(1).standard_normal(50)
        assert dg.rhat([x, x, x]) == pytest.approx(np.sqrt(49 / 50), rel=1e-12)

    def test_separated_chains(self):
        rng = make_rng(2)
        assert dg.rhat([rng.standard_normal(10_000), 10 + rng.standard_normal(10_000)]) > 3

    def test_constant_chains(self):
        with pytest.raises(ZeroWithinVariance):
            dg.rhat([np.ones(5), np.ones(5)])

    def test_needs_two_chains(self):
        with pytest.raises(ValueError):
            dg.rhat([np.arange(5.0)])

    @given(arrays(float, (3, 20), elements=st.floats(-10, 10)))
    def test_lower_bound(self, x):
        try:
            value = dg.rhat(x)
        except ZeroWithinVariance:
            return
        assert value >= np.sqrt(19 / 20) * (1 - 1e-12)


class TestQuantiles:
    def test_identical_samples(self):
        c = np.tile(sample_prior(PriorSpec(1.0, 8), make_rng(3)).coeffs, (7, 1))
        angles = dg.angle_grid(36)
        table = dg.radius_quantiles(c, 1.0, CP, angles)
        assert np.allclose(table, dg.radius_matrix(c[:1], 1.0, CP, angles), atol=1e-15)

    def test_two_point_median(self):
        radii = np.array([[0.9] * 3, [1.1] * 3])  # r = 0.9 and r = 1.1 at three angles
        med = dg.quantiles(radii, [0.5])
        assert np.all((med >= 0.9) & (med <= 1.1))
        assert med == pytest.approx(1.0)

    def test_probability_range(self):
        with pytest.raises(ValueError):
            dg.quantiles(np.zeros(3), [0.0, 0.5])

    @given(st.integers(0, 2**31), st.integers(3, 40))
    @settings(max_examples=25, deadline=None)
    def test_monotone_and_in_clamp_range(self, seed, n):
        c = 3 * make_rng(seed).standard_normal((n, 12))
        table = dg.radius_quantiles(c, 1.0, CP, dg.angle_grid(72))
        assert np.all(np.diff(table, axis=0) >= 0)
        assert np.all((table >= CP.r_min) & (table <= CP.r_max))

    @given(st.integers(0, 2**31), st.integers(2, 30))
    @settings(max_examples=25, deadline=None)
    def test_duplication_invariance(self, seed, n):
        c = make_rng(seed).standard_normal((n, 8)) * 0.2
        d = np.repeat(c, 2, axis=0)
        angles = dg.angle_grid(24)
        exact_a = dg.radius_quantiles(c, 1.0, CP, angles, method="inverted_cdf")
        exact_b = dg.radius_quantiles(d, 1.0, CP, angles, method="inverted_cdf")
        assert np.array_equal(exact_a, exact_b)
        # type-7 interpolation moves by at most one order-statistic gap
        a = dg.radius_quantiles(c, 1.0, CP, angles)
        b = dg.radius_quantiles(d, 1.0, CP, angles)
        r = np.sort(dg.radius_matrix(c, 1.0, CP, angles), axis=0)
        gap = np.max(np.diff(r, axis=0), axis=0) if n > 1 else 0.0
        assert np.all(np.abs(a - b) <= gap + 1e-12)

    def test_observation_quantiles_constant(self):
        obs = np.tile([1.0, 2.0], (10, 1))
        assert np.all(dg.observation_quantiles(obs) == [1.0, 2.0])


class TestCorrelation:
    def test_lag_zero(self):
        c = make_rng(4).standard_normal((50, 6)) * 0.1
        corr = dg.radius_correlation(c, 1.0, CP, [0.0, 1.0], [0.0])
        assert np.allclose(corr, 1.0)

    def test_antipodal_anticorrelation(self):
        z = np.linspace(-1, 1, 21)
        c = np.zeros((21, 2))
        c[:, 0] = 0.1 * z
        assert dg.radius_correlation(c, 1.0, CP, [0.0], [np.pi])[0, 0] == pytest.approx(-1.0)

    def test_independent_angles(self):
        # equal variance over 100 modes: cov(r(0), r(90 deg)) = sum_k cos(k pi / 2) = 0
        c = make_rng(5).standard_normal((1000, 200)) * 0.01
        corr = dg.radius_correlation(c, 1.0, CP, [0.0], [np.pi / 2])
        assert abs(corr[0, 0]) < 0.2

    def test_degenerate_is_nan(self):
        c = np.zeros((5, 4))
        assert np.isnan(dg.radius_correlation(c, 1.0, CP, [0.0], [0.5])).all()

    def test_needs_three_samples(self):
        with pytest.raises(ValueError):
            dg.radius_correlation(np.zeros((2, 2)), 1.0, CP, [0.0], [0.0])

    @given(st.integers(0, 2**31), st.integers(3, 30))
    @settings(max_examples=25, deadline=None)
    def test_range_and_duplication(self, seed, n):
        c = make_rng(seed).standard_normal((n, 6)) * 0.2
        base, lags = [0.0, np.pi / 2], dg.angle_grid(12)
        a = dg.radius_correlation(c, 1.0, CP, base, lags)
        b = dg.radius_correlation(np.repeat(c, 2, axis=0), 1.0, CP, base, lags)
        ok = np.isfinite(a)
        assert np.all((a[ok] >= -1) & (a[ok] <= 1))
        assert np.allclose(a[ok], b[ok], atol=1e-9)


class TestChains:
    def test_running_mean(self):
        x = make_rng(6).standard_normal(100)
        rm = dg.running_mean(x)
        assert all(abs(rm[n - 1] - x[:n].mean()) <= 1e-12 for n in (1, 17, 100))
        assert np.all(dg.running_mean(np.full(10, 3.0)) == 3.0)

    def test_discard(self):
        ch = synthetic_chain(np.zeros((10, 2)))
        assert len(ch.discard(0.25)) == 8 and ch.discard(0.25).step[0] == 3
        assert len(ch.discard(0.0)) == 10
        with pytest.raises(ValueError):
            ch.discard(1.0)

    def test_steps_must_increase(self):
        with pytest.raises(ShapeError):
            dg.Chain(np.array([1, 1]), np.ones(2, bool), np.ones(2), np.ones(2),
                     np.zeros((2, 0)), np.zeros((2, 2)))

    def test_constant_chain_statistics(self):
        coeffs = np.tile([0.05, -0.02, 0.01, 0.0], (20, 1))
        ch = synthetic_chain(coeffs).discard(0.0)
        areas = dg.enclosed_areas(ch.coeffs, 1.0, CP)
        assert np.all(dg.running_mean(areas) == pytest.approx(areas[0]))
        table = dg.radius_quantiles(ch.coeffs, 1.0, CP)
        assert np.allclose(table, table[0], atol=1e-15)

    def test_read_round_trip(self, tmp_path):
        path = tmp_path / "chain.csv"
        rows = [csv_header(2, 4)]
        rows += [f"{i},{i % 2},0.5,{0.1 * i!r},1.0,2.0,{i}.0,0.0,0.0,-1.5" for i in range(1, 6)]
        path.write_text("\n".join(rows) + "\n")
        ch = dg.read_chain(path)
        assert ch.K == 4 and ch.obs.shape == (5, 2)
        assert ch.acceptance_rate == pytest.approx(0.6)
        assert ch.coeffs[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]

    def test_not_a_chain(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ShapeError):
            dg.read_chain(path)

    def test_mismatched_K(self, tmp_path):
        for name, K in (("a.csv", 2), ("b.csv", 4)):
            (tmp_path / name).write_text(csv_header(0, K) + "\n1,1,0.5,0.0" + ",0.0" * K + "\n")
        with pytest.raises(ShapeError, match="K"):
            dg.read_chains([tmp_path / "a.csv", tmp_path / "b.csv"])


def test_table_writers(tmp_path):
    angles = dg.angle_grid(4)
    probs = np.array([0.25, 0.75])
    dg.write_radius_quantiles(tmp_path / "q.csv", angles, probs, np.ones((2, 4)))
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == "angle_deg,prob,value" and lines[2] == "90.0,0.25,1.0" and len(lines) == 9
    dg.write_radius_correlation(tmp_path / "c.csv", [0.0], [0.0], np.array([[np.nan]]))
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "0.0,0.0,nan"
    dg.write_observation_quantiles(tmp_path / "o.csv", probs, np.ones((2, 1)), data=[30.0])
    assert (tmp_path / "o.csv").read_text().splitlines()[1] == "1,0.25,1.0,30.0"
