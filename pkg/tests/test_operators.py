import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sislab.mesh import Field, build_grid, eval_expression, quadrature
from sislab.operators import (
    TridiagonalMatrix,
    TridiagonalSolveError,
    gradient_energy,
    neumann_laplacian,
    solve_shifted,
    solve_tridiagonal,
    weighted_inner,
)


@pytest.fixture
def grid():
    return build_grid(0, 1, 201)


class TestNeumannLaplacian:
    def test_rows_sum_to_zero(self, grid):
        L = neumann_laplacian(grid)
        assert np.abs(L.row_sums()).max() == 0.0

    def test_kills_constants(self, grid):
        L = neumann_laplacian(grid)
        assert np.abs(L.matvec(np.full(grid.nx, 4.2))).max() == 0.0

    def test_cosine_eigenfunction(self, grid):
        L = neumann_laplacian(grid)
        u = np.cos(np.pi * grid.nodes)
        err = np.abs(L.matvec(u) + np.pi**2 * u).max()
        assert err <= 1e-3

    def test_quadratic_exact_in_the_interior(self):
        g = build_grid(0, 2, 41)
        L = neumann_laplacian(g)
        vals = L.matvec(g.nodes**2)
        assert vals[1:-1] == pytest.approx(2.0, abs=1e-9)

    def test_weighted_symmetry_and_sign(self, grid):
        L = neumann_laplacian(grid)
        rng = np.random.default_rng(7)
        for _ in range(5):
            f = rng.normal(size=grid.nx)
            g_ = rng.normal(size=grid.nx)
            lhs = weighted_inner(grid, L.matvec(f), g_)
            rhs = weighted_inner(grid, f, L.matvec(g_))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)
            assert weighted_inner(grid, L.matvec(f), f) <= 1e-10
        assert weighted_inner(grid, L.matvec(np.ones(grid.nx)), np.ones(grid.nx)) == 0.0

    def test_discrete_flux_balance(self, grid):
        # quadrature of L f vanishes for every f: no mass crosses the boundary
        L = neumann_laplacian(grid)
        rng = np.random.default_rng(3)
        f = rng.normal(size=grid.nx)
        assert abs(quadrature(grid, L.matvec(f))) <= 1e-10 * np.abs(f).max() / grid.dx


class TestSolveShifted:
    def test_zero_alpha_is_identity(self, grid):
        L = neumann_laplacian(grid)
        rhs = np.sin(grid.nodes)
        assert np.array_equal(solve_shifted(L, 0.0, rhs), rhs)

    def test_constants_are_fixed_points(self, grid):
        L = neumann_laplacian(grid)
        rhs = np.full(grid.nx, 2.5)
        out = solve_shifted(L, 0.37, rhs)
        assert out == pytest.approx(2.5, rel=1e-13)

    def test_field_in_field_out(self, grid):
        L = neumann_laplacian(grid)
        out = solve_shifted(L, 0.1, Field.constant(grid, 1.0))
        assert isinstance(out, Field)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_random_dominant_systems_solve_to_tolerance(self, seed):
        rng = np.random.default_rng(seed)
        n = 50
        lower = rng.uniform(-1, 1, n - 1)
        upper = rng.uniform(-1, 1, n - 1)
        diag = 2.5 + rng.uniform(0, 1, n)  # strictly dominant
        rhs = rng.uniform(-1, 1, n)
        x = solve_tridiagonal(lower, diag, upper, rhs)
        m = TridiagonalMatrix(lower, diag, upper)
        residual = np.abs(m.matvec(x) - rhs).max()
        assert residual <= 1e-12 * max(1.0, np.abs(rhs).max())

    def test_tiny_pivot_is_reported(self):
        lower = np.array([1.0])
        diag = np.array([1.0, 1e-16])
        upper = np.array([1e-16])
        with pytest.raises(TridiagonalSolveError, match="pivot"):
            solve_tridiagonal(lower, diag, upper, np.array([1.0, 1.0]))

    def test_thomas_path_matches_banded_path(self):
        # a dominant system pushed through the pivot-checked branch
        rng = np.random.default_rng(5)
        n = 30
        lower = rng.uniform(-1, 1, n - 1)
        upper = rng.uniform(-1, 1, n - 1)
        diag = 2.00000000001 + np.zeros(n)  # dominance margin below the fast gate
        rhs = rng.uniform(-1, 1, n)
        x = solve_tridiagonal(lower, diag, upper, rhs)
        m = TridiagonalMatrix(lower, diag, upper)
        assert np.abs(m.matvec(x) - rhs).max() <= 1e-11


class TestGradientEnergy:
    def test_constant_has_no_energy(self, grid):
        assert gradient_energy(Field.constant(grid, 9.0)) == 0.0

    def test_cosine_energy(self, grid):
        f = eval_expression(grid, "cos(pi*x)")
        assert gradient_energy(f) == pytest.approx(np.pi**2 / 2, abs=1e-3)

    def test_linear_energy_exact(self, grid):
        f = Field(grid, grid.nodes)
        assert gradient_energy(f) == pytest.approx(1.0, rel=1e-13)

    def test_summation_by_parts_identity(self, grid):
        # <L f, f>_w = -gradient_energy(f), exactly
        L = neumann_laplacian(grid)
        rng = np.random.default_rng(11)
        f = rng.normal(size=grid.nx)
        lhs = weighted_inner(grid, L.matvec(f), f)
        assert lhs == pytest.approx(-gradient_energy(Field(grid, f)),
                                    rel=1e-12, abs=1e-9)
