from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from CM_QOperator.Algebra import (
    ChamberPoint,
    LatticeWeight,
    SpectralParameter,
    chamber_gap,
    elementary_symmetric,
    elementary_symmetric_all,
    enumerate_weights,
    generating_E,
    generating_E_expansion,
    positive_roots,
    project_cms,
    root_vector,
    weight_count,
    weyl_vector,
)
from CM_QOperator.Errors import IrregularSpectralParameterError, ParameterError, WallCollisionError

momenta = st.lists(st.floats(-3, 3), min_size=1, max_size=5)


def test_chamber_point_sorts_and_keeps_permutation():
    raw = [2.0, -1.0, 0.5]
    point = ChamberPoint.from_coords(raw)
    assert list(point.coords) == [-1.0, 0.5, 2.0]
    assert list(np.asarray(raw)[list(point.permutation)]) == list(point.coords)
    assert point.gap == pytest.approx(-1.5)
    assert point.N == 3


def test_chamber_point_wall_collision():
    with pytest.raises(WallCollisionError):
        ChamberPoint.from_coords([0.3, 0.3])


def test_chamber_point_rejects_empty_and_nonfinite():
    with pytest.raises(ParameterError):
        ChamberPoint.from_coords([])
    with pytest.raises(ParameterError):
        ChamberPoint.from_coords([0.0, np.inf])


def test_weyl_vector():
    assert list(weyl_vector(3, 2.0)) == [2.0, 0.0, -2.0]
    assert list(weyl_vector(2, 1.5)) == [0.75, -0.75]
    with pytest.raises(ParameterError):
        weyl_vector(2, 0.0)


def test_chamber_gap():
    assert chamber_gap([0.0, 1.0, 3.0]) == -1.0
    assert chamber_gap([1.0, 0.0]) == 1.0
    assert chamber_gap([4.0]) == -np.inf


def test_positive_roots():
    assert positive_roots(3) == ((0, 1), (0, 2), (1, 2))


def test_root_vectors_against_weyl_vector():
    rho = weyl_vector(3, 2.0)
    # (alpha, rho) = lam (j - i) for alpha = e_i - e_j
    for i, j in positive_roots(3):
        alpha = root_vector(3, i, j)
        assert alpha.sum() == 0.0
        assert np.dot(alpha, rho) == pytest.approx(2.0 * (j - i))


def test_project_cms():
    assert list(project_cms([1.0, 1.0])) == [0.0, 0.0]
    assert list(project_cms([2.0, 0.0])) == [1.0, -1.0]


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6))
def test_project_cms_is_idempotent(v):
    once = project_cms(v)
    assert abs(once.sum()) <= 1e-9 * (1.0 + np.abs(v).sum())
    assert np.allclose(project_cms(once), once, atol=1e-9)


@given(momenta)
def test_elementary_symmetric_matches_brute_force(p):
    for r in range(len(p) + 1):
        brute = sum(np.prod(c) for c in combinations(p, r)) if r else 1.0
        assert elementary_symmetric(r, p) == pytest.approx(brute, rel=1e-9, abs=1e-9)


@given(momenta, st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False))
def test_generating_function_expansion(p, gamma):
    scale = np.prod([abs(gamma) + abs(v) + 1.0 for v in p])
    assert abs(generating_E(gamma, p) - generating_E_expansion(gamma, p)) <= 1e-12 * scale


def test_elementary_symmetric_all_and_range():
    assert list(elementary_symmetric_all([1.0, 2.0, 3.0])) == [1.0, 6.0, 11.0, 6.0]
    with pytest.raises(ParameterError):
        elementary_symmetric(4, [1.0, 2.0, 3.0])


def test_enumerate_weights_graded_order():
    weights = enumerate_weights(3, 2)
    assert len(weights) == weight_count(3, 2) == 6
    assert weights[0] == LatticeWeight((0, 0))
    degrees = [w.degree for w in weights]
    assert degrees == sorted(degrees)
    assert [w.m for w in weights if w.degree == 1] == [(1, 0), (0, 1)]


def test_lattice_weight_embedding():
    assert list(LatticeWeight((1, 0)).embed()) == [1.0, -1.0, 0.0]
    assert list(LatticeWeight((2, 1)).embed()) == [2.0, -1.0, -1.0]
    assert str(LatticeWeight((2, 1))) == "(2,1)"


def test_spectral_parameter():
    sp = SpectralParameter.from_physical([2.0, -1.0], g=3.0, hbar=1.5, mu=2.0)
    assert list(sp.u) == [2.0 / 3.0, -1.0 / 3.0]
    assert sp.lam == 2.0
    assert sp.min_separation == pytest.approx(1.0)
    with pytest.raises(IrregularSpectralParameterError):
        SpectralParameter([0.2, 0.2], 1.5).check_regular()
    with pytest.raises(ParameterError):
        SpectralParameter([0.2], -1.0)
