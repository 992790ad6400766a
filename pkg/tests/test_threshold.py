import numpy as np
import pytest

from sislab.mesh import Field, build_grid, eval_expression, integrate
from sislab.spectral import principal_eigenvalue
from sislab.threshold import critical_population, sigma_sensitivity


@pytest.fixture(scope="module")
def strict_instance():
    # nonconstant transmission rate with a sign-changing susceptible excess:
    # the optimum trades feasibility bought on the right for objective on
    # the left, so the threshold sits strictly between its two bounds
    g = build_grid(0, 1, 201)
    S0 = eval_expression(g, "1 + 0.9*cos(pi*x)")
    r = Field.constant(g, 1.0)
    beta = eval_expression(g, "0.5*(1 + x)")
    return g, S0, r, beta


class TestSensitivity:
    def test_constant_potential_gives_uniform_sensitivity(self):
        g = build_grid(0, 1, 51)
        sens = sigma_sensitivity(1.0, Field.constant(g, 2.0))
        assert sens.values == pytest.approx(1.0, rel=1e-9)

    def test_matches_central_differences(self):
        g = build_grid(0, 1, 33)
        rng = np.random.default_rng(42)
        hv = rng.uniform(-1.0, 1.0, g.nx)
        sens = sigma_sensitivity(0.8, Field(g, hv))
        eps = 1e-5
        for i in range(0, g.nx, 4):
            hp = hv.copy(); hp[i] += eps
            hm = hv.copy(); hm[i] -= eps
            fd = (principal_eigenvalue(0.8, Field(g, hp)).sigma
                  - principal_eigenvalue(0.8, Field(g, hm)).sigma) / (2 * eps)
            assert abs(fd - g.weights[i] * sens.values[i]) <= 1e-6

    def test_nonnegative_and_sums_to_one(self):
        g = build_grid(0, 1, 33)
        sens = sigma_sensitivity(0.5, eval_expression(g, "sin(3*x)"))
        assert sens.min() >= 0
        assert g.weights @ sens.values == pytest.approx(1.0, abs=1e-12)


class TestCriticalPopulation:
    def test_constant_transmission_rate_pins_the_threshold(self):
        g = build_grid(0, 1, 201)
        S0 = eval_expression(g, "2 + cos(pi*x)")
        r = eval_expression(g, "(4 - pi*sin(pi*x))/2")
        res = critical_population(S0, r, Field.constant(g, 2.0), d_I=1.0)
        assert res.n_star == pytest.approx(res.lower_bound, rel=1e-3)
        assert res.sigma_at_opt <= 1e-8

    def test_dominated_initial_susceptibles_pin_the_threshold(self):
        g = build_grid(0, 1, 201)
        S0 = eval_expression(g, "0.2 + 0.1*cos(pi*x)")
        r = eval_expression(g, "1 + 0.5*x")
        beta = eval_expression(g, "1 + x")
        res = critical_population(S0, r, beta, d_I=0.7)
        assert res.n_star == pytest.approx(integrate(r), rel=1e-3)

    def test_bound_sandwich_and_feasibility(self, strict_instance):
        g, S0, r, beta = strict_instance
        res = critical_population(S0, r, beta, d_I=1.0)
        assert res.lower_bound - 1e-9 <= res.n_star <= res.upper_bound + 1e-9
        assert res.sigma_at_opt <= 1e-8
        assert 0.0 <= res.lambda_star.min() and res.lambda_star.max() <= 1.0

    def test_strictly_below_the_upper_bound(self, strict_instance):
        g, S0, r, beta = strict_instance
        res = critical_population(S0, r, beta, d_I=1.0)
        assert res.n_star <= res.upper_bound * (1 - 0.005)
        assert res.n_star > res.lower_bound + 1e-3

    def test_monotone_in_the_infected_dispersal_rate(self, strict_instance):
        g, S0, r, beta = strict_instance
        slow = critical_population(S0, r, beta, d_I=0.5)
        fast = critical_population(S0, r, beta, d_I=2.0)
        assert fast.n_star >= slow.n_star - 1e-6

    def test_returned_multiplier_field_is_feasible(self, strict_instance):
        g, S0, r, beta = strict_instance
        res = critical_population(S0, r, beta, d_I=1.0)
        h = Field(g, beta.values * res.lambda_star.values * (S0.values - r.values))
        assert principal_eigenvalue(1.0, h).sigma <= 1e-8

    def test_input_validation(self):
        g = build_grid(0, 1, 21)
        with pytest.raises(ValueError):
            critical_population(Field.constant(g, 1.0), Field.constant(g, 0.0),
                                Field.constant(g, 1.0), d_I=1.0)
        with pytest.raises(ValueError):
            critical_population(Field.constant(g, 1.0), Field.constant(g, 1.0),
                                Field.constant(g, 1.0), d_I=0.0)
