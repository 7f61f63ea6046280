import math
import warnings

import numpy as np
import pytest

from drone_handover.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    QuadratureSpec,
    QuadratureWarning,
    cosine_substitution,
    integrate,
    integrate_piecewise,
)


def test_rule_constants():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, rel=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, rel=1e-15)
    assert np.allclose(NODES, -NODES[::-1])
    # Gauss 10-point rule is exact for degree 19, Kronrod 21 for degree 31.
    for k in (18, 30):
        exact = 2.0 / (k + 1)
        rule = KRONROD_WEIGHTS if k == 30 else GAUSS_WEIGHTS
        assert rule @ NODES**k == pytest.approx(exact, rel=1e-13)


def test_batched_smooth_integrals():
    a = np.array([0.0, 0.0, 1.0])
    b = np.array([1.0, math.pi, 3.0])
    funcs = [np.exp, np.sin, lambda x: 1 / x]

    def f(x, idx):
        out = np.empty_like(x)
        for k, g in enumerate(funcs):
            m = idx == k
            out[m] = g(x[m])
        return out

    val, err = integrate(f, a, b, rel_tol=1e-12, abs_tol=1e-14)
    assert val == pytest.approx([math.e - 1, 2.0, math.log(3.0)], rel=1e-12)
    assert np.all(err < 1e-11)


def test_endpoint_singularity_converges():
    val, _ = integrate(lambda x, i: 1 / np.sqrt(x), 0.0, 1.0, rel_tol=1e-7, abs_tol=1e-12)
    assert float(val) == pytest.approx(2.0, rel=1e-7)


def test_cosine_substitution_removes_sqrt_endpoints():
    # integral of sqrt(1 - x^2) over [-1, 1] is pi/2
    def f(s, i):
        x, jac = cosine_substitution(s, -1.0, 1.0)
        return np.sqrt(np.maximum(1 - x * x, 0.0)) * jac

    val, _ = integrate(f, 0.0, math.pi, rel_tol=1e-13, abs_tol=1e-15)
    assert float(val) == pytest.approx(math.pi / 2, rel=1e-13)


def test_empty_and_reversed_ranges_are_zero():
    val, err = integrate(lambda x, i: np.ones_like(x), [1.0, 2.0], [1.0, 0.0])
    assert np.all(val == 0) and np.all(err == 0)


def test_piecewise_handles_kinks():
    def f(x, i):
        return np.abs(x - 0.3) + np.abs(x - 0.7)

    bp = np.array([[0.3, 0.7, np.nan, 5.0]])
    val, _ = integrate_piecewise(f, [0.0], [1.0], bp, rel_tol=1e-13, abs_tol=1e-15)
    exact = (0.3**2 + 0.7**2) / 2 + (0.7**2 + 0.3**2) / 2
    assert val[0] == pytest.approx(exact, rel=1e-13)


def test_budget_exhaustion_warns():
    with pytest.warns(QuadratureWarning):
        integrate(lambda x, i: np.sin(1 / x), 1e-9, 1.0, rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=10)


def test_spec_validation_and_nesting():
    q = QuadratureSpec()
    assert (q.rel_tol, q.abs_tol, q.max_subdivisions, q.tail_mass_epsilon) == (1e-7, 1e-10, 200, 1e-12)
    assert q.inner().rel_tol == pytest.approx(1e-8)
    for bad in (dict(rel_tol=0), dict(abs_tol=-1), dict(tail_mass_epsilon=1.0), dict(max_subdivisions=2)):
        with pytest.raises(ValueError):
            QuadratureSpec(**bad)


def test_nested_integration_over_a_disc():
    # Area of the unit disc via an integral of chord lengths.
    def outer(x, idx):
        xs = x.ravel()
        half = np.sqrt(np.maximum(1 - xs * xs, 0.0))
        v, _ = integrate(lambda y, j: np.ones_like(y), -half, half)
        return v.reshape(x.shape)

    val, _ = integrate(outer, -1.0, 1.0, rel_tol=1e-10, abs_tol=1e-12)
    assert float(val) == pytest.approx(math.pi, rel=1e-9)


def test_no_warning_for_well_behaved_integrand():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(lambda x, i: np.cos(x), 0.0, 10.0)
