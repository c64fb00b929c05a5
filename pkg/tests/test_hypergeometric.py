import math

import mpmath
import numpy as np
import pytest

from CM_QOperator.Algebra import SpectralParameter, weyl_vector
from CM_QOperator.Errors import (
    OracleRangeError,
    ResonantSpectralParameterError,
    ToleranceUnreachableError,
    WallGuardError,
)
from CM_QOperator.Hypergeometric import (
    a1_ode_residual,
    a1_oracle,
    coefficient_growth,
    dominant_asymptotics,
    extended_hypergeom,
    extended_hypergeom_batch,
    hc_coefficients,
    hc_series_eval,
    hybrid_hypergeom,
    l2_residual_report,
    remainder_envelope,
)


def free_closed_form(v, s):
    return math.sin(0.5 * v * s) / (v * math.sinh(0.5 * s))


def test_free_case_coefficients_are_one():
    table = hc_coefficients([0.3j, -0.3j], 1.0, 20)
    assert np.allclose(table.coeffs, 1.0, rtol=1e-12, atol=0)


def test_degree_one_coefficient():
    # ((a,a) + 2(a,xi)) D_a = 2 lam (a, xi + rho)
    xi = np.array([0.4j, -0.1j])
    lam = 1.5
    table = hc_coefficients(xi, lam, 3)
    d = xi[0] - xi[1]
    assert table.coeff(table.weights[1]) == pytest.approx(2 * lam * (d + lam) / (2 + 2 * d), rel=1e-13)


def test_degree_blocks_follow_the_weights():
    table = hc_coefficients([0.4j, 0.1j, -0.5j], 1.5, 6)
    assert list(table.degree_coeffs(0)) == [1.0]
    for d in range(1, 7):
        weights = [w for w in table.weights if w.degree == d]
        block = table.degree_coeffs(d)
        assert len(block) == len(weights) == d + 1
        assert list(block) == [table.coeff(w) for w in weights]


def test_resonant_denominator():
    with pytest.raises(ResonantSpectralParameterError) as info:
        hc_coefficients([-0.5, 0.5], 1.5, 4)
    assert info.value.weight.m == (1,)


@pytest.mark.parametrize("s", [1.0, 2.0, 3.5, 6.0])
def test_c_sum_matches_free_closed_form(s):
    v = 0.9
    sp = SpectralParameter([0.5 * v, -0.5 * v], 1.0)
    value, diag = extended_hypergeom(sp, [0.0, s], tol=1e-12)
    assert abs(value - free_closed_form(v, s)) <= 1e-8
    assert diag.relative_tail <= 1e-12


@pytest.mark.parametrize("lam", [1.0, 1.5, 2.5])
@pytest.mark.parametrize("s", [1.0, 1.35, 1.7])
def test_c_sum_matches_origin_oracle(lam, s):
    v = 0.8
    sp = SpectralParameter([0.5 * v, -0.5 * v], lam)
    value, _ = extended_hypergeom(sp, [-0.5 * s, 0.5 * s], tol=1e-13)
    assert abs(value - a1_oracle(v, lam, s)) <= 1e-8


def test_origin_oracle_matches_mpmath_hyp2f1():
    v, lam, s = 0.7, 1.5, 1.2
    z = -math.sinh(0.5 * s) ** 2
    expected = mpmath.hyp2f1((lam + 1j * v) / 2, (lam - 1j * v) / 2, lam + 0.5, z)
    assert a1_oracle(v, lam, s) == pytest.approx(float(mpmath.re(expected)), rel=1e-13)


def test_origin_oracle_range_and_ode():
    assert a1_oracle(0.7, 1.5, 0.0) == 1.0
    assert a1_ode_residual(0.7, 1.5, 1.2) <= 1e-6
    with pytest.raises(OracleRangeError):
        a1_oracle(0.7, 1.5, 2.0)


def test_series_requires_chamber_point():
    table = hc_coefficients([0.3j, -0.3j], 1.5, 8)
    with pytest.raises(WallGuardError):
        hc_series_eval(table, [1.0, 0.0])


def test_wall_guard():
    sp = SpectralParameter([0.4, -0.4], 1.5)
    with pytest.raises(WallGuardError):
        extended_hypergeom(sp, [0.0, 0.01])
    # hybrid evaluation reaches the wall at N = 2
    value, _ = hybrid_hypergeom(sp, [0.0, 0.01])
    assert value == pytest.approx(a1_oracle(0.8, 1.5, 0.01), rel=1e-14)


def test_tolerance_unreachable_reports_best_tail():
    sp = SpectralParameter([0.4, -0.4], 1.5)
    with pytest.raises(ToleranceUnreachableError) as info:
        extended_hypergeom(sp, [0.0, 0.1], tol=1e-14, max_degree=16)
    assert info.value.best_tail > 1e-14


def test_extended_hypergeom_is_symmetric_in_u():
    t = [-1.0, 0.5, 2.5]
    sp = SpectralParameter([0.9, 0.1, -1.0], 1.5)
    a, _ = extended_hypergeom(sp, t, tol=1e-12)
    for sigma in ((2, 0, 1), (1, 0, 2)):
        b, _ = extended_hypergeom(sp.permuted(sigma), t, tol=1e-12)
        assert abs(a - b) <= 1e-10 * abs(a)


def test_batch_matches_pointwise():
    sp = SpectralParameter([0.7, -0.3], 1.5)
    nodes = np.array([[-1.0, 0.5], [0.0, 2.0], [-3.0, 1.0], [0.2, 0.9], [-0.4, 0.1]])
    batch = extended_hypergeom_batch(sp, nodes, degree=64)
    rho = weyl_vector(2, 1.5)
    for node, gauged in zip(nodes, batch.gauged):
        F, _ = hybrid_hypergeom(sp, node, tol=1e-13)
        assert abs(gauged - F * math.exp(-float(rho @ node))) <= 1e-10 * abs(gauged)
    assert batch.max_relative_tail < 1e-10


def test_batch_threads_are_bit_identical():
    pytest.importorskip("PySide6")
    sp = SpectralParameter([0.9, 0.1, -1.0], 1.5)
    rng = np.random.default_rng(3)
    nodes = np.sort(rng.uniform(-6, 6, size=(300, 3)), axis=1)
    nodes = nodes[np.min(np.diff(nodes, axis=1), axis=1) > 1.0]
    serial = extended_hypergeom_batch(sp, nodes, degree=24, chunk_size=16)
    threaded = extended_hypergeom_batch(sp, nodes, degree=24, threads=4, chunk_size=16)
    assert np.array_equal(serial.gauged, threaded.gauged)


def test_l2_eigen_equation_n2():
    sp = SpectralParameter([0.7, -0.3], 1.5)
    report = l2_residual_report(sp, [-1.5, 1.5], h=1e-2, fd_order=4, richardson=False)
    assert report.residual <= 1e-5


@pytest.mark.slow
def test_l2_eigen_equation_n3_second_order_ratio():
    sp = SpectralParameter([0.9, 0.1, -1.0], 1.5)
    fourth = l2_residual_report(sp, [-3.0, 0.0, 3.0], h=1e-2, fd_order=4, richardson=False)
    assert fourth.residual <= 1e-5
    second = l2_residual_report(sp, [-3.0, 0.0, 3.0], h=1e-2, fd_order=2)
    assert abs(second.ratio - 4.0) <= 0.8


def test_remainder_envelope_decays_along_a_ray():
    sp = SpectralParameter([0.9, 0.1, -1.0], 1.5)
    rho = weyl_vector(3, 1.5)
    direction = np.array([-1.0, 0.0, 1.5])
    values = []
    for tau in (3.0, 5.0, 7.0, 9.0):
        x = tau * direction
        values.append(remainder_envelope(sp, x) * math.exp(-float(rho @ x)))
    assert all(b < a for a, b in zip(values, values[1:]))
    # the envelope bounds the true remainder
    x = 4.0 * direction
    F, _ = extended_hypergeom(sp, x, tol=1e-13)
    assert abs(F - dominant_asymptotics(sp, x)) <= remainder_envelope(sp, x) * (1 + 1e-8)


def test_coefficient_growth_free_case():
    table = hc_coefficients([0.3j, -0.3j], 1.0, 12)
    growth = coefficient_growth(table, [0.5, -0.5])
    assert growth[0] == pytest.approx(1.0)
    assert np.all(np.diff(growth) < 0)


def test_table_csv_export(tmp_path):
    table = hc_coefficients([0.3j, 0.0, -0.3j], 1.5, 3)
    path = tmp_path / "table.csv"
    table.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "degree,m1,m2,re,im"
    assert len(lines) == 1 + len(table.weights)
