import numpy as np
import pytest

from langfit import Diverged, DriftModel, SimConfig, random_model, simulate_ensemble, \
    simulate_path
from langfit.errors import TooManyRejections
from langfit.simulate import make_grid, simulate_ensemble_with_stats
from langfit.timeseries import Series


class TestSimConfig:
    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            SimConfig(model=DriftModel(alphas=(0.1,), sigma=0.1), s0=1.0,
                      grid=[0.0, 2.0, 1.0], seed=0)

    def test_bound_must_exceed_start(self):
        with pytest.raises(ValueError):
            SimConfig(model=DriftModel(alphas=(0.1,), sigma=0.1), s0=2.0,
                      grid=[0.0, 1.0], seed=0, bound=1.5)


class TestSimulatePath:
    def test_no_drift_no_noise_is_constant(self):
        config = SimConfig(model=DriftModel(alphas=(0.0,), sigma=0.0), s0=3.0,
                           grid=np.arange(50.0), seed=0)
        path = simulate_path(config)
        np.testing.assert_array_equal(path.values, np.full(50, 3.0))

    def test_noiseless_path_is_forward_euler(self):
        mu, dt = 0.05, 0.5
        config = SimConfig(model=DriftModel(alphas=(mu,), sigma=0.0), s0=1.0,
                           grid=np.arange(40) * dt, seed=0)
        path = simulate_path(config)
        expected = (1 + mu * dt) ** np.arange(40)
        np.testing.assert_allclose(path.values, expected, rtol=1e-12)

    def test_noiseless_cubic_matches_euler_integration(self):
        model = DriftModel(alphas=(2.0, -1.0, 0.01), sigma=0.0)
        grid = np.linspace(0.0, 5.0, 101)
        path = simulate_path(SimConfig(model=model, s0=1.0, grid=grid, seed=0))
        s = 1.0
        for k in range(100):
            dt = grid[k + 1] - grid[k]
            s = s + (2 * s - s**2 + 0.01 * s**3) * dt
        assert path.values[-1] == pytest.approx(s, rel=1e-12)

    def test_seeded_determinism_is_bit_identical(self):
        config = SimConfig(model=DriftModel(alphas=(0.01,), sigma=0.2), s0=1.0,
                           grid=np.arange(200.0), seed=123)
        a, b = simulate_path(config), simulate_path(config)
        assert np.array_equal(a.values, b.values)

    def test_divergence_reported_with_step(self):
        config = SimConfig(model=DriftModel(alphas=(10.0,), sigma=0.0), s0=1.0,
                           grid=np.arange(100.0), seed=0, bound=1e9)
        result = simulate_path(config)
        assert isinstance(result, Diverged)
        assert 0 < result.step < 100

    def test_paper_parameters_survive_on_small_steps(self):
        model = DriftModel.from_phi([0.05, 2.0, -1.0, 0.01])
        ok = 0
        for seed in range(10):
            r = simulate_path(SimConfig(model=model, s0=1.0,
                                        grid=np.arange(1000) * 0.25, seed=seed))
            ok += isinstance(r, Series)
        assert ok >= 8


class TestMoments:
    def test_gbm_ensemble_mean_matches_discrete_product(self):
        # Euler scheme's exact mean: E[s_n] = s0 * prod(1 + mu*dt_k)
        mu, n_paths = 0.02, 10_000
        grid = np.concatenate(([0.0], np.cumsum(np.linspace(0.8, 1.2, 12))))
        model = DriftModel(alphas=(mu,), sigma=0.15)
        finals = np.empty(n_paths)
        for k in range(n_paths):
            path = simulate_path(SimConfig(model=model, s0=1.0, grid=grid, seed=k))
            finals[k] = path.values[-1]
        expected = np.prod(1 + mu * np.diff(grid))
        se = finals.std() / np.sqrt(n_paths)
        assert abs(finals.mean() - expected) < 3 * se

    def test_one_step_increment_variance(self):
        # tiny dt pins s at s0, so increments are iid with var (sigma*s)^2*dt
        sigma, s0, dt = 0.3, 2.0, 1e-8
        model = DriftModel(alphas=(0.5,), sigma=sigma)
        grid = np.arange(100_001) * dt
        path = simulate_path(SimConfig(model=model, s0=s0, grid=grid, seed=5))
        increments = np.diff(path.values)
        expected = (sigma * s0) ** 2 * dt
        assert np.var(increments) == pytest.approx(expected, rel=0.05)


class TestEnsemble:
    def test_count_and_length(self):
        model = DriftModel(alphas=(0.001,), sigma=0.05)
        paths = simulate_ensemble(model, count=7, length=50, seed=1)
        assert len(paths) == 7
        assert all(len(p) == 50 for p in paths)

    def test_deterministic_under_seed(self):
        model = DriftModel(alphas=(0.001,), sigma=0.05)
        a = simulate_ensemble(model, count=3, length=40, grid_style="jittered", seed=9)
        b = simulate_ensemble(model, count=3, length=40, grid_style="jittered", seed=9)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.values, pb.values)
            assert np.array_equal(pa.times, pb.times)

    def test_explosive_model_raises(self):
        # deterministic growth exp(10 t) passes 1e9 near t=2.1; every draw dies
        model = DriftModel(alphas=(10.0,), sigma=0.01)
        with pytest.raises(TooManyRejections):
            simulate_ensemble(model, count=1, length=1000, seed=0)

    def test_rejections_are_redrawn(self):
        model = DriftModel.from_phi([0.05, 2.0, -1.0, 0.01])
        paths, attempts = simulate_ensemble_with_stats(
            model, count=5, length=300, grid_style="jittered", seed=2, dt_scale=0.5)
        assert len(paths) == 5
        assert attempts >= 5

    def test_jittered_grid_steps_in_range(self):
        rng = np.random.default_rng(0)
        grid = make_grid(500, "jittered", rng)
        dt = np.diff(grid)
        assert dt.min() >= 0.5 and dt.max() <= 1.5


class TestRandomModel:
    def test_deterministic(self):
        assert random_model(1, seed=7) == random_model(1, seed=7)

    def test_order_matches(self):
        assert random_model(3, seed=1).q == 3

    def test_sigma_in_range(self):
        sigmas = [random_model(2, seed=k).sigma for k in range(50)]
        assert all(0.01 <= s <= 0.3 for s in sigmas)

    def test_some_draws_yield_usable_ensembles(self):
        # statistical smoke test: the sampling law must not be all-explosive
        usable = 0
        for k in range(100):
            model = random_model(2, seed=k)
            result = simulate_path(SimConfig(model=model, s0=1.0,
                                             grid=np.arange(200.0), seed=k))
            usable += isinstance(result, Series)
        assert usable >= 1
