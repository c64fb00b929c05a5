import math

import numpy as np
import pytest

from CM_QOperator.Algebra import SpectralParameter
from CM_QOperator.CalogeroMoser import truncation_radius
from CM_QOperator.Errors import EmptyGridError, GridMismatchError, MemoryGuardError, ParameterError
from CM_QOperator.Quadrature import (
    build_grid,
    commutator_norm,
    composite_gauss_legendre,
    integral_equation_residual,
    interior_mask,
    nystrom_leading_eigenvalues,
    nystrom_matrix,
    plane_wave_defect,
)
from CM_QOperator.SpecialFunctions import cosh_fourier_gamma


########################################################################
## GRIDS
########################################################################
def test_composite_rule_is_exact_on_polynomials():
    nodes, weights = composite_gauss_legendre(0.0, 3.0, 2, 4)
    assert nodes.size == 8
    assert np.sum(weights * nodes ** 5) == pytest.approx(121.5, rel=1e-13)


@pytest.mark.parametrize("center, wall_guard", [([0.0, 1.0], 0.0), ([0.0, 1.0, 2.5], 0.0), ([0.0, 1.0, 2.5], 0.3)])
def test_gaps_layout_volume_and_order(center, wall_guard):
    grid = build_grid(center, 3.0, panels=2, order=6, wall_guard=wall_guard)
    assert np.all(np.diff(grid.nodes, axis=1) > wall_guard)
    assert np.all(grid.weights > 0)
    assert np.sum(grid.weights) == pytest.approx(grid.region_volume, rel=1e-12)
    N = len(center)
    H = grid.hi - grid.lo - (N - 1) * wall_guard
    assert grid.region_volume == pytest.approx(H ** N / math.factorial(N))


def test_box_layout_drops_nodes_off_the_chamber():
    grid = build_grid([0.0, 1.0], 2.0, panels=2, order=4, layout="box")
    assert grid.size < 64
    assert np.all(np.diff(grid.nodes, axis=1) > 0)
    assert grid.region_volume == 16.0


def test_rank_one_grid():
    grid = build_grid([0.0], 10.0, panels=5, order=8)
    assert grid.size == 40
    assert np.sum(grid.weights) == pytest.approx(20.0, rel=1e-13)


def test_default_panel_count():
    grid = build_grid([0.0], 10.0)
    assert grid.panels_per_dim == 5


def test_empty_grid():
    with pytest.raises(EmptyGridError):
        build_grid([0.0, 1.0], 0.5, wall_guard=3.0)


@pytest.mark.parametrize("kwargs", [
    {"R": 0.0}, {"order": 3}, {"order": 17}, {"wall_guard": -1.0}, {"layout": "disk"}, {"panels": 0},
])
def test_grid_parameter_errors(kwargs):
    arguments = {"center": [0.0, 1.0], "R": 2.0}
    arguments.update(kwargs)
    with pytest.raises(ParameterError):
        build_grid(**arguments)


def test_refined_grid_and_identity():
    grid = build_grid([0.0, 1.0], 2.0, panels=2, order=6)
    again = build_grid([0.0, 1.0], 2.0, panels=2, order=6)
    finer = grid.refined()
    assert grid.grid_id == again.grid_id
    assert finer.panels_per_dim == 4
    assert finer.grid_id != grid.grid_id
    assert np.sum(finer.weights) == pytest.approx(grid.region_volume, rel=1e-12)


def test_grid_arrays_are_read_only():
    grid = build_grid([0.0], 4.0, panels=1, order=4)
    with pytest.raises(ValueError):
        grid.weights[0] = 1.0


def test_interior_mask():
    grid = build_grid([0.0], 10.0, panels=5, order=8)
    mask = interior_mask(grid, 5.0)
    assert np.array_equal(mask, np.abs(grid.nodes[:, 0]) <= 5.0)
    assert 0 < mask.sum() < grid.size


def test_grid_csv(tmp_path):
    grid = build_grid([0.0, 1.0], 2.0, panels=1, order=4)
    path = tmp_path / "grid.csv"
    grid.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "s1,s2,weight"
    assert len(lines) == 1 + grid.size


########################################################################
## INTEGRAL EQUATION
########################################################################
def test_integral_equation_rank_one():
    sp = SpectralParameter([0.4], 2.0)
    grid = build_grid([0.0], 40.0, layout="box")
    result = integral_equation_residual(0.3, sp, [0.0], grid, tol=1e-12)
    assert result.residual <= 1e-8
    assert result.nodes == grid.size
    assert result.rhs == pytest.approx(cosh_fourier_gamma(0.1, 2.0), rel=1e-12)


def test_integral_equation_dimension_mismatch():
    sp = SpectralParameter([0.4, -0.4], 2.0)
    grid = build_grid([0.0], 10.0)
    with pytest.raises(ParameterError):
        integral_equation_residual(0.0, sp, [0.0, 1.0], grid)


@pytest.mark.slow
def test_integral_equation_free_pair():
    sp = SpectralParameter([0.45, -0.45], 1.0)
    t = [-1.0, 1.0]
    grid = build_grid(t, truncation_radius(1.0, 2, 1e-8))
    result = integral_equation_residual(0.2, sp, t, grid, tol=1e-12)
    assert result.residual <= 1e-6


def _interacting_pair_residual(xi, t, panels=None, order=10):
    sp = SpectralParameter([0.8, -0.8], 2.5)
    grid = build_grid(t, truncation_radius(2.5, 2, 1e-6), panels=panels, order=order)
    return integral_equation_residual(xi, sp, t, grid, tol=1e-12).residual


@pytest.mark.slow
@pytest.mark.parametrize("t", [[-3.0, 3.0], [-1.0, 0.5], [0.2, 2.7]])
@pytest.mark.parametrize("xi", [0.0, 0.3, 1.0])
def test_integral_equation_interacting_pair(t, xi):
    assert _interacting_pair_residual(xi, t) <= 1e-4


def test_integral_equation_improves_with_panels():
    coarse = _interacting_pair_residual(0.3, [-3.0, 3.0], panels=2, order=6)
    fine = _interacting_pair_residual(0.3, [-3.0, 3.0], panels=8, order=6)
    assert fine < coarse


########################################################################
## NYSTROM MATRICES
########################################################################
def test_nystrom_matrix_is_hermitian():
    grid = build_grid([0.0], 10.0, panels=4, order=6)
    A = nystrom_matrix(0.3, 2.0, grid, chunk_size=7)
    assert A.size == grid.size
    assert A.hermiticity_defect() == 0.0
    assert commutator_norm(A, A) == 0.0


def test_nystrom_memory_guard():
    grid = build_grid([0.0], 10.0, panels=4, order=6)
    with pytest.raises(MemoryGuardError):
        nystrom_matrix(0.3, 2.0, grid, max_nodes=10)


def test_commutator_needs_one_grid():
    A = nystrom_matrix(0.3, 2.0, build_grid([0.0], 10.0, panels=4, order=6))
    B = nystrom_matrix(-0.2, 2.0, build_grid([0.0], 10.0, panels=5, order=6))
    with pytest.raises(GridMismatchError):
        commutator_norm(A, B)


def test_plane_wave_action():
    grid = build_grid([0.0], 40.0)
    A = nystrom_matrix(0.0, 2.0, grid)
    mask = interior_mask(grid, 20.0)
    assert plane_wave_defect(A, grid, 0.3, 2.0, mask) <= 1e-8


def test_plane_wave_action_is_rank_one_only():
    grid = build_grid([0.0, 1.0], 2.0, panels=1, order=4)
    A = nystrom_matrix(0.0, 2.0, grid)
    with pytest.raises(ParameterError):
        plane_wave_defect(A, grid, 0.3, 2.0, np.ones(grid.size, dtype=bool))


def test_leading_eigenvalue_below_the_bound():
    grid = build_grid([0.0], 40.0)
    A = nystrom_matrix(0.0, 2.0, grid)
    top, second = nystrom_leading_eigenvalues(A, 2)
    bound = cosh_fourier_gamma(0.0, 2.0)
    assert top <= bound + 1e-8
    assert top > 0.99
    assert second <= top


def test_nystrom_threads_are_bit_identical():
    pytest.importorskip("PySide6")
    grid = build_grid([0.0, 1.0], 3.0, panels=2, order=6)
    serial = nystrom_matrix(0.4, 1.5, grid, chunk_size=16)
    threaded = nystrom_matrix(0.4, 1.5, grid, threads=4, chunk_size=16)
    assert np.array_equal(serial.entries, threaded.entries)
