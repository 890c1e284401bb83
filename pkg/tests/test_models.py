import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langfit import DriftModel, drift_eval, fixed_points, potential_eval
from langfit.errors import OrderOutOfRange
from langfit.models import MARGINAL, STABLE, UNSTABLE, default_search_range

coeff = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
price = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def models(q=None):
    orders = st.just(q) if q else st.integers(min_value=1, max_value=4)
    return orders.flatmap(lambda n: st.tuples(
        st.lists(coeff, min_size=n, max_size=n),
        st.floats(min_value=0.01, max_value=1.0),
    )).map(lambda t: DriftModel(alphas=tuple(t[0]), sigma=t[1]))


class TestDriftModel:
    def test_phi_layout_round_trips(self):
        model = DriftModel.from_phi([0.05, 2.0, -1.0, 0.01])
        assert model.q == 3
        assert model.sigma == pytest.approx(np.sqrt(0.05))
        np.testing.assert_allclose(model.phi(), [0.05, 2.0, -1.0, 0.01])

    def test_order_bounds(self):
        with pytest.raises(OrderOutOfRange):
            DriftModel(alphas=(), sigma=0.1)
        with pytest.raises(OrderOutOfRange):
            DriftModel(alphas=(1.0,) * 5, sigma=0.1)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            DriftModel(alphas=(1.0,), sigma=-0.1)

    def test_sigma_zero_allowed_for_simulation(self):
        assert DriftModel(alphas=(1.0,), sigma=0.0).sigma2 == 0.0


class TestDriftEval:
    def test_zero_coefficient_gives_zero_drift(self):
        model = DriftModel(alphas=(0.0,), sigma=0.1)
        for p in (-3.0, 0.0, 1.0, 7.5):
            assert drift_eval(model, p) == 0.0

    def test_cubic_at_one(self):
        model = DriftModel(alphas=(2.0, -1.0, 0.01), sigma=0.1)
        assert drift_eval(model, 1.0) == pytest.approx(1.01, abs=1e-12)

    @given(a=coeff, b=coeff)
    def test_every_drift_vanishes_at_zero(self, a, b):
        model = DriftModel(alphas=(a, b), sigma=0.1)
        assert drift_eval(model, 0.0) == 0.0


class TestPotentialEval:
    @given(mu=coeff.filter(lambda x: x != 0), p=price)
    def test_linear_drift_gives_quadratic_potential(self, mu, p):
        model = DriftModel(alphas=(mu,), sigma=0.1)
        assert potential_eval(model, p) == pytest.approx(-(mu / 2) * p * p, rel=1e-12, abs=1e-12)

    @given(model=models())
    def test_zero_at_origin(self, model):
        assert potential_eval(model, 0.0) == 0.0

    def test_cubic_at_one(self):
        model = DriftModel(alphas=(2.0, -1.0, 0.01), sigma=0.1)
        expected = -(2.0 / 2 - 1.0 / 3 + 0.01 / 4)
        assert potential_eval(model, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_matches_quadrature_of_drift(self):
        # V(1) - V(0) must equal minus the integral of the drift over [0, 1]
        model = DriftModel(alphas=(2.0, -1.0, 0.01), sigma=0.1)
        xs = np.linspace(0.0, 1.0, 20001)
        integral = np.trapz(drift_eval(model, xs), xs)
        assert potential_eval(model, 1.0) == pytest.approx(-integral, rel=1e-8)

    @settings(max_examples=60)
    @given(model=models(), p=price)
    def test_negative_gradient_is_drift(self, model, p):
        h = 1e-5 * max(1.0, abs(p))
        diff = (potential_eval(model, p + h) - potential_eval(model, p - h)) / (2 * h)
        drift = float(drift_eval(model, p))
        assert -diff == pytest.approx(drift, rel=1e-6, abs=1e-6)

    @given(model=models(), p=price, lam=st.floats(min_value=0.1, max_value=10.0))
    def test_coefficient_scaling_is_pointwise(self, model, p, lam):
        scaled = DriftModel(alphas=tuple(lam * a for a in model.alphas), sigma=model.sigma)
        assert drift_eval(scaled, p) == pytest.approx(lam * drift_eval(model, p), rel=1e-9, abs=1e-9)
        assert potential_eval(scaled, p) == pytest.approx(lam * potential_eval(model, p), rel=1e-9, abs=1e-9)


class TestFixedPoints:
    def test_gbm_origin_unstable_for_positive_drift(self):
        model = DriftModel(alphas=(0.5,), sigma=0.1)
        points = fixed_points(model, (-1.0, 1.0))
        assert len(points) == 1
        assert points[0].location == pytest.approx(0.0, abs=1e-8)
        assert points[0].stability == UNSTABLE

    def test_gbm_origin_stable_for_negative_drift(self):
        model = DriftModel(alphas=(-0.5,), sigma=0.1)
        (fp,) = fixed_points(model, (-1.0, 1.0))
        assert fp.stability == STABLE

    def test_zero_drift_is_marginal(self):
        model = DriftModel(alphas=(0.0,), sigma=0.1)
        (fp,) = fixed_points(model, (-1.0, 1.0))
        assert fp.stability == MARGINAL

    def test_quadratic_well(self):
        model = DriftModel(alphas=(2.0, -1.0), sigma=0.1)
        points = fixed_points(model, (-1.0, 5.0))
        locations = {round(fp.location, 6): fp.stability for fp in points}
        assert locations == {0.0: UNSTABLE, 2.0: STABLE}

    def test_origin_reported_even_outside_range(self):
        model = DriftModel(alphas=(2.0, -1.0), sigma=0.1)
        locations = [fp.location for fp in fixed_points(model, (1.0, 5.0))]
        assert 0.0 in locations

    @given(model=models(), lam=st.floats(min_value=0.5, max_value=2.0))
    @settings(max_examples=25, deadline=None)
    def test_scaling_keeps_root_locations(self, model, lam):
        scaled = DriftModel(alphas=tuple(lam * a for a in model.alphas), sigma=model.sigma)
        before = [fp.location for fp in fixed_points(model, (-2.0, 2.0))]
        after = [fp.location for fp in fixed_points(scaled, (-2.0, 2.0))]
        np.testing.assert_allclose(before, after, atol=1e-6)

    def test_empty_range_rejected(self):
        model = DriftModel(alphas=(1.0,), sigma=0.1)
        with pytest.raises(ValueError):
            fixed_points(model, (1.0, 1.0))

    def test_default_search_range(self):
        lo, hi = default_search_range([1.0, 3.0, 2.0])
        assert lo == 0.0 and hi == 6.0
