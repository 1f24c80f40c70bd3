import numpy as np
import pytest

from semicoop import RangeOverflowError, ValidationError
from semicoop.stubbornness import (
    BROWNIAN_SURFACE_GAMMA,
    GFFSampler,
    conformal_factor,
    covariance_between,
    green_function_column,
    regime_note,
    sample_gff,
    stubbornness_measure,
)


class TestSampler:
    def test_seed_determinism(self):
        assert np.array_equal(sample_gff(16, 7), sample_gff(16, 7))

    def test_distinct_seeds_differ(self):
        assert not np.array_equal(sample_gff(16, 7), sample_gff(16, 8))

    def test_dirichlet_boundary_exact(self):
        field = sample_gff(12, 3)
        assert np.abs(field[0]).max() == 0.0
        assert np.abs(field[-1]).max() == 0.0
        assert np.abs(field[:, 0]).max() == 0.0
        assert np.abs(field[:, -1]).max() == 0.0

    def test_minimum_size(self):
        with pytest.raises(ValidationError):
            GFFSampler(3, 0)

    def test_mean_zero(self):
        sampler = GFFSampler(12, seed=21)
        batch = sampler.sample_batch(10000)
        node = batch[:, 5, 6]
        assert abs(node.mean()) < 4.0 * node.std() / 100.0

    def test_covariance_matches_poisson_oracle(self):
        sampler = GFFSampler(16, seed=123)
        batch = sampler.sample_batch(30000)
        pairs = [((5, 6), (9, 11)), ((3, 3), (3, 4))]
        for a, b in pairs:
            est = np.cov(batch[:, a[0], a[1]], batch[:, b[0], b[1]])[0, 1]
            model = covariance_between(16, a, b)
            var_a = covariance_between(16, a, a)
            var_b = covariance_between(16, b, b)
            se = np.sqrt((var_a * var_b + model**2) / (batch.shape[0] - 1))
            assert abs(est - model) < 3.0 * se

    def test_green_function_symmetric(self):
        a, b = (4, 5), (8, 3)
        ga = green_function_column(16, a)[b[0], b[1]]
        gb = green_function_column(16, b)[a[0], a[1]]
        assert np.isclose(ga, gb, rtol=1e-10)

    def test_green_source_must_be_interior(self):
        with pytest.raises(ValidationError):
            green_function_column(16, (0, 5))


class TestStubbornnessMeasure:
    def test_rigid_limit(self):
        assert stubbornness_measure(2.0) == 2.0

    def test_flexible_blowup(self):
        assert stubbornness_measure(1e-6) > 1e6

    def test_brownian_surface_value(self):
        g = BROWNIAN_SURFACE_GAMMA
        assert np.isclose(stubbornness_measure(g), 2.0 / g + g / 2.0, rtol=1e-15)
        assert regime_note(g) == "brownian-surface"

    def test_minimum_at_top_of_range(self):
        grid = np.linspace(0.01, 2.0, 500)
        values = [stubbornness_measure(g) for g in grid]
        assert np.argmin(values) == len(grid) - 1
        assert min(values) == 2.0

    def test_strictly_decreasing(self):
        grid = np.linspace(0.05, 2.0, 200)
        values = np.array([stubbornness_measure(g) for g in grid])
        assert np.all(np.diff(values) < 0.0)

    @pytest.mark.parametrize("gamma", [0.0, -0.3, 2.0001, 5.0])
    def test_domain_enforced(self, gamma):
        with pytest.raises(ValidationError):
            stubbornness_measure(gamma)


class TestConformalFactor:
    def test_zero_field_gives_unit(self):
        assert np.array_equal(conformal_factor(np.zeros((4, 4)), 1.0), np.ones((4, 4)))

    def test_small_gamma_uniform_limit(self):
        field = np.random.default_rng(0).uniform(-5, 5, (6, 6))
        factor = conformal_factor(field, 1e-12)
        assert np.abs(factor - 1.0).max() < 1e-10

    def test_single_node_value(self):
        assert np.isclose(conformal_factor(np.array([[1.0]]), 1.0)[0, 0], np.e)

    def test_positive_everywhere(self):
        field = np.random.default_rng(1).standard_normal((8, 8)) * 10
        assert (conformal_factor(field, 1.5) > 0).all()

    def test_overflow_reports_node(self):
        field = np.zeros((4, 4))
        field[2, 1] = 800.0
        with pytest.raises(RangeOverflowError) as err:
            conformal_factor(field, 1.0)
        assert err.value.node == (2, 1)

    def test_gamma_domain(self):
        with pytest.raises(ValidationError):
            conformal_factor(np.zeros((3, 3)), 0.0)
