import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectrace.errors import SpecError
from spectrace.model import (Branch, ChannelPotential, EigenvalueRecord, OperatorSpec, PotentialSpec,
                             eval_potential, make_operator_spec, operator_from_gammas, trace_endpoint)
from spectrace.quadrature import composite_nodes

coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6)


def test_generated_gammas():
    assert make_operator_spec(2, 3, 3).gammas == (2.0, 16.0, 54.0)
    assert make_operator_spec(2, 3, 50).gammas[-1] == 250000.0


def test_gamma_beyond_K_uses_the_law():
    spec = make_operator_spec(2, 3, 3)
    assert spec.gamma(4) == 128.0
    with pytest.raises(SpecError):
        operator_from_gammas([2.0, 3.0]).gamma(3)


@pytest.mark.parametrize("a, alpha, K", [(1, 2, 1), (0.5, 2, 3), (-2, 3, 2), (2, 0, 2), (2, -1, 2), (2, 3, 0)])
def test_make_operator_spec_rejects(a, alpha, K):
    with pytest.raises(SpecError):
        make_operator_spec(a, alpha, K)


def test_explicit_gammas_validated():
    with pytest.raises(SpecError):
        operator_from_gammas([2.0, 1.0 + 1e-12, 3.0])
    with pytest.raises(SpecError):
        operator_from_gammas([3.0, 2.0])
    with pytest.raises(SpecError):
        operator_from_gammas([])
    assert operator_from_gammas([1.2, 1.2, 5]).K == 3


def test_eval_potential_examples():
    p = PotentialSpec.from_coefficients({1: [1.0]})
    assert eval_potential(p, 1, 0.0) == 1.0
    assert eval_potential(p, 1, 0.0, 1) == 0.0
    assert eval_potential(p, 7, 0.3) == 0.0
    t, w = composite_nodes(8)
    assert abs(np.dot(w, eval_potential(p, 1, t))) < 1e-15
    with pytest.raises(SpecError):
        eval_potential(p, 1, 0.0, 3)


def test_trace_endpoint_examples():
    p = PotentialSpec.from_coefficients({1: [1.0]})
    assert trace_endpoint(p, 0) == 1.0 and trace_endpoint(p, 1) == -1.0
    assert trace_endpoint(PotentialSpec(), 0) == 0.0
    p = PotentialSpec.from_coefficients({1: [1.0, 1.0], 2: [0.0, 2.0]})
    assert trace_endpoint(p, 0) == 4.0 and trace_endpoint(p, 1) == 2.0


def test_potential_spec_rejects_constant_and_drops_zero():
    with pytest.raises(SpecError):
        PotentialSpec({1: ChannelPotential.constant(0.3)})
    p = PotentialSpec.from_coefficients({1: [0.0, 0.0], 2: [1.0]})
    assert p.active == (2,)


def test_sup_norm():
    assert ChannelPotential((0.0, 0.2)).sup_norm() == pytest.approx(0.2, abs=1e-15)
    q = ChannelPotential((1.0, 0.5))
    t = np.linspace(0, 1, 200001)
    assert q.sup_norm() >= np.max(np.abs(q(t))) - 1e-15


@settings(max_examples=60, deadline=None)
@given(coeffs)
def test_zero_mean_property(cs):
    q = ChannelPotential(tuple(cs))
    t, w = composite_nodes(8)
    assert abs(float(np.dot(w, q(t)))) < 1e-12 * max(1.0, sum(map(abs, cs)))


@settings(max_examples=60, deadline=None)
@given(coeffs, st.floats(0.01, 0.99))
def test_derivative_consistency_property(cs, t0):
    q = ChannelPotential(tuple(cs))
    h = 1e-5
    scale = max(1.0, sum(abs(c) * (math.pi * j) ** 3 for j, c in enumerate(cs, 1)))
    d1 = (q(t0 + h) - q(t0 - h)) / (2 * h)
    d2 = (q(t0 + h, 1) - q(t0 - h, 1)) / (2 * h)
    assert abs(d1 - q(t0, 1)) < 1e-9 * scale + 1e-10 * scale
    assert abs(d2 - q(t0, 2)) < 1e-6 * scale


@settings(max_examples=60, deadline=None)
@given(st.floats(1.01, 50), st.floats(0.1, 5), st.integers(1, 40))
def test_generated_gammas_positive_nondecreasing(a, alpha, K):
    g = np.array(make_operator_spec(a, alpha, K).gammas)
    assert np.all(g > 1) and np.all(np.diff(g) >= 0)


def test_record_check_flags_violations():
    good = EigenvalueRecord(1, Branch.OSCILLATORY, 1, 4.0, 10.0 + 16.0, 0.0)
    assert good.check(10.0, 1e-12) == []
    bad = EigenvalueRecord(1, Branch.OSCILLATORY, 1, 7.0, 59.0, 0.0)
    assert "root outside its bracket" in bad.check(10.0, 1e-12)
    neg = EigenvalueRecord(1, Branch.NEGATIVE, None, 3.0, 1.0, 0.0)
    assert any("negative" in v for v in neg.check(10.0, 1e-12))
