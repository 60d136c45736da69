"""Unit and property tests for the adaptivity indicators."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expit

from specadapt.approx import (
    Expansion,
    Expansion2D,
    evaluate,
    interpolate,
    interpolate_2d,
    relative_error,
    truncate,
)
from specadapt.basis import (
    derivative_coeffs,
    eval_basis_all,
    hermite_basis,
    laguerre_basis,
    quadrature,
)
from specadapt.indicators import (
    IndicatorConfig,
    _derivative_tail_norms,
    default_high_mode_count,
    default_split_point,
    exterior_error_indicator,
    exterior_error_indicator_x,
    exterior_error_indicator_y,
    frequency_indicator,
    frequency_indicator_x,
    frequency_indicator_y,
)


def front(x, center=5.0, width=2.0):
    return expit(-(np.asarray(x, dtype=float) - center) / width)


# ---------------------------------------------------------------------------
# frequency indicator


def test_frequency_zero_when_only_low_modes_populated():
    basis = laguerre_basis(12, 1.0)
    coeffs = np.zeros(13)
    coeffs[: 12 - 4 + 1] = 1.0  # default high-mode count for N=12 is 4
    assert frequency_indicator(Expansion(basis, coeffs)) == 0.0


def test_frequency_one_when_only_high_modes_populated():
    basis = laguerre_basis(12, 1.0)
    coeffs = np.zeros(13)
    coeffs[12 - 4 + 1 :] = 2.0
    assert frequency_indicator(Expansion(basis, coeffs)) == pytest.approx(1.0, abs=1e-15)


def test_frequency_undefined_for_zero_expansion():
    basis = laguerre_basis(8, 1.0)
    assert frequency_indicator(Expansion(basis, np.zeros(9))) is None


def test_frequency_equals_truncation_error_ratio():
    # the indicator is identically the relative weighted error of dropping
    # the top modes; the right side is measured through the independent
    # quadrature-based error path
    basis = laguerre_basis(12, 1.4)
    rng = np.random.default_rng(2)
    coeffs = rng.standard_normal(13) * np.exp(-0.4 * np.arange(13))
    exp = Expansion(basis, coeffs)
    cut = truncate(exp, 12 - default_high_mode_count(12))
    measured = relative_error(cut, lambda x: evaluate(exp, x))
    assert frequency_indicator(exp) == pytest.approx(measured, abs=1e-12)


def test_frequency_detects_scale_mismatch():
    # a width-2 front is resolved at beta=2.5 but far under-resolved when the
    # same order is stretched over a 25x larger domain
    for beta, bound in ((2.5, 1e-9), (0.1, 1e-3)):
        basis = laguerre_basis(40, beta)
        f = frequency_indicator(interpolate(front(quadrature(basis).nodes), basis))
        if beta == 2.5:
            assert f < bound
        else:
            assert f > bound


def test_frequency_scale_invariance_and_hermite():
    basis = hermite_basis(15, 1.2)
    rng = np.random.default_rng(13)
    coeffs = rng.standard_normal(16)
    f1 = frequency_indicator(Expansion(basis, coeffs))
    f2 = frequency_indicator(Expansion(basis, 7.3 * coeffs))
    assert f1 == pytest.approx(f2, rel=1e-14)
    assert 0.0 <= f1 <= 1.0


def test_frequency_config_validation():
    basis = laguerre_basis(9, 1.0)
    exp = Expansion(basis, np.ones(10))
    bad = IndicatorConfig(high_mode_rule=lambda n: n + 1)
    with pytest.raises(ValueError):
        frequency_indicator(exp, bad)
    bigger = IndicatorConfig(high_mode_rule=lambda n: n)
    assert frequency_indicator(exp, bigger) == pytest.approx(
        math.sqrt(9.0 / 10.0), rel=1e-14
    )


# ---------------------------------------------------------------------------
# exterior-error indicator


def test_exterior_approaches_one_near_the_left_endpoint():
    basis = laguerre_basis(20, 1.0)
    exp = interpolate(np.exp(-quadrature(basis).nodes), basis)
    assert exterior_error_indicator(exp, 1e-6) > 0.999


def test_exterior_undefined_for_constant():
    basis = laguerre_basis(10, 1.0)
    exp = Expansion(basis, np.eye(11)[0])
    assert exterior_error_indicator(exp, 2.0) is None


def test_exterior_exponential_matches_adaptive_integration():
    # the squared indicator equals the ratio of the exact weighted tail
    # integrals of the squared derivative; cross-check by brute force
    basis = laguerre_basis(30, 1.0)
    exp = interpolate(np.exp(-quadrature(basis).nodes), basis)
    value = exterior_error_indicator(exp, 5.0)
    dc, dbasis = derivative_coeffs(exp.coeffs, basis)
    g = lambda x: float((dc @ eval_basis_all(dbasis, x)) ** 2 * math.exp(-x))
    num = quad(g, 5.0, 40.0, limit=200)[0]
    den = quad(g, 0.0, 40.0, limit=200)[0]
    assert value**2 == pytest.approx(num / den, abs=1e-8)


def test_exterior_monotone_nonincreasing_in_split_point():
    basis = laguerre_basis(24, 1.0)
    rule = quadrature(basis)
    exp = interpolate(front(rule.nodes), basis)
    splits = np.linspace(0.5, rule.nodes[-1] * 0.95, 20)
    values = [exterior_error_indicator(exp, s) for s in splits]
    assert all(v is not None and 0.0 <= v <= 1.0 for v in values)
    assert all(values[i + 1] <= values[i] + 1e-14 for i in range(19))


def test_exterior_scale_invariance():
    basis = laguerre_basis(14, 0.9, x_left=1.0)
    rng = np.random.default_rng(5)
    coeffs = rng.standard_normal(15)
    e1 = exterior_error_indicator(Expansion(basis, coeffs), 4.0)
    e2 = exterior_error_indicator(Expansion(basis, -3.7 * coeffs), 4.0)
    assert e1 == pytest.approx(e2, rel=1e-13)


def test_exterior_shifted_numerator_exact_for_plain_weight():
    # the substitution-based tail rule must agree with adaptive integration
    # to quadrature exactness on random low-order expansions
    rng = np.random.default_rng(42)
    for _ in range(5):
        basis = laguerre_basis(6, 1.3, x_left=0.5)
        exp = Expansion(basis, rng.standard_normal(7))
        rule = quadrature(basis)
        x_right = 0.5 * (rule.nodes[2] + rule.nodes[3])
        num, _den = _derivative_tail_norms(exp, x_right)
        dc, dbasis = derivative_coeffs(exp.coeffs, basis)
        g = lambda x: float(
            (dc @ eval_basis_all(dbasis, x)) ** 2 * math.exp(-1.3 * (x - 0.5))
        )
        ref = quad(g, x_right, 0.5 + 60.0 / 1.3, limit=400)[0]
        assert num == pytest.approx(ref, rel=1e-10)


def test_exterior_nonzero_alpha_uses_refined_rule():
    basis = laguerre_basis(8, 1.0, alpha=1.5)
    rng = np.random.default_rng(7)
    exp = Expansion(basis, rng.standard_normal(9))
    rule = quadrature(basis)
    x_right = float(rule.nodes[3])
    value = exterior_error_indicator(exp, x_right)
    dc, dbasis = derivative_coeffs(exp.coeffs, basis)
    g = lambda x: float((dc @ eval_basis_all(dbasis, x)) ** 2 * x**1.5 * math.exp(-x))
    num = quad(g, x_right, 80.0, limit=400)[0]
    den = quad(g, 0.0, 80.0, limit=400)[0]
    assert value == pytest.approx(math.sqrt(num / den), rel=1e-6)


def test_exterior_split_validation():
    basis = laguerre_basis(10, 1.0, x_left=2.0)
    exp = Expansion(basis, np.ones(11))
    with pytest.raises(ValueError):
        exterior_error_indicator(exp, 2.0)
    with pytest.raises(ValueError):
        exterior_error_indicator(exp, 1e9)
    with pytest.raises(ValueError):
        exterior_error_indicator(Expansion(hermite_basis(5, 1.0), np.ones(6)), 1.0)


def test_default_split_point_is_an_interior_node():
    basis = laguerre_basis(40, 2.5)
    nodes = quadrature(basis).nodes
    split = default_split_point(40, nodes)
    assert split == nodes[14]
    assert nodes[0] < split < nodes[-1]


# ---------------------------------------------------------------------------
# tensor-product variants


def test_frequency_2d_separable_factorization():
    bx = laguerre_basis(12, 1.0)
    by = laguerre_basis(10, 1.5)
    rng = np.random.default_rng(11)
    cx = rng.standard_normal(13) * np.exp(-0.3 * np.arange(13))
    cy = rng.standard_normal(11) * np.exp(-0.2 * np.arange(11))
    e2 = Expansion2D(bx, by, np.outer(cx, cy))
    fx = frequency_indicator_x(e2)
    fy = frequency_indicator_y(e2)
    assert fx == pytest.approx(frequency_indicator(Expansion(bx, cx)), abs=1e-12)
    assert fy == pytest.approx(frequency_indicator(Expansion(by, cy)), abs=1e-12)


def test_frequency_2d_zero_tail_and_undefined():
    bx = laguerre_basis(9, 1.0)
    by = laguerre_basis(9, 1.0)
    coeffs = np.zeros((10, 10))
    coeffs[:7, :] = 1.0  # x-high-mode count for N=9 is 3: rows 7..9 empty
    assert frequency_indicator_x(Expansion2D(bx, by, coeffs)) == 0.0
    assert frequency_indicator_x(Expansion2D(bx, by, np.zeros((10, 10)))) is None
    assert exterior_error_indicator_x(Expansion2D(bx, by, np.zeros((10, 10))), 2.0) is None


def test_exterior_2d_separable_oracle():
    # small y-order keeps the exponential-reweighting noise of the marginal
    # well below the comparison tolerance
    bx = laguerre_basis(16, 1.0)
    by = laguerre_basis(8, 1.0)
    rx, ry = quadrature(bx), quadrature(by)
    g = lambda x: front(x, center=4.0, width=1.0)
    vals = g(rx.nodes)[:, None] * np.exp(-ry.nodes)[None, :]
    e2 = interpolate_2d(vals, bx, by)
    split = default_split_point(16, rx.nodes)
    direct = exterior_error_indicator(interpolate(g(rx.nodes), bx), split)
    assert exterior_error_indicator_x(e2, split) == pytest.approx(direct, abs=1e-8)


def test_exterior_2d_detects_outward_drift():
    # with the window fixed, moving the y-front outward must raise the
    # y-direction signal by a large factor
    bx = laguerre_basis(16, 1.0)
    by = laguerre_basis(16, 1.0)
    rx, ry = quadrature(bx), quadrature(by)
    split = default_split_point(16, ry.nodes)
    values = []
    for center in (2.0, 8.0):
        vals = np.exp(-rx.nodes)[:, None] * front(ry.nodes, center, 0.8)[None, :]
        values.append(exterior_error_indicator_y(interpolate_2d(vals, bx, by), split))
    assert values[1] > 10.0 * values[0]
