"""Normalization, matrix elements and trace sums.

The norm and matrix element references for gamma = 10, m = 1 come from
mpmath quadrature at 25 digits on the frozen root x = 3.2986252816159562552.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectrace.charroots import enumerate_channel, enumerate_spectrum, solve_oscillatory_root
from spectrace.errors import PairingError, SpecError
from spectrace.model import ChannelPotential, PotentialSpec, make_operator_spec
from spectrace.perturbed import solve_perturbed
from spectrace.traceform import (cesaro_tail, channel_elements, fourier_endpoint_limit, identity_residual,
                                 matrix_element, norm_H, normalized_mode, pair_and_sum, quadrature_norm2,
                                 root_identity_residual, trace_target, trace_verdict)

X_REF = 3.2986252816159562552
NORM2_REF = 0.5010999530785007046
H_REF = 1441.408118567439581386
ELEMENT_REF = -0.1005413822693157467


def test_norm_references():
    r = solve_oscillatory_root(10.0, 1)
    assert norm_H(r.root_param, 10.0) == pytest.approx(H_REF, rel=1e-13)
    md = normalized_mode(r, 10.0)
    assert md.method == "closed_form"
    assert md.norm2 == pytest.approx(NORM2_REF, rel=1e-14)
    assert quadrature_norm2(r) == pytest.approx(NORM2_REF, rel=1e-14)
    assert matrix_element(md, ChannelPotential((0.0, 0.2))) == pytest.approx(ELEMENT_REF, rel=1e-12)


def test_identity_residual():
    for gamma in (1.2, 10.0, 100.0):
        ch = enumerate_channel(gamma, 200)
        assert max(abs(root_identity_residual(r, gamma)) for r in ch.oscillatory) < 1e-9
        assert abs(identity_residual(ch.oscillatory[0].root_param, gamma)) < 1e-9
    assert abs(identity_residual(math.pi / 2 + 0.1, 10.0)) > 1.0


def test_identity_and_char_fn_vanish_together():
    from spectrace.charroots import char_fn
    ch = enumerate_channel(10.0, 50)
    for r in ch.oscillatory:
        assert abs(char_fn(r.root_param, 10.0)) < 1e-8 * r.root_param
        assert abs(identity_residual(r.root_param, 10.0)) < 1e-9 * max(1.0, r.lam)


def test_norm_large_m():
    ch = enumerate_channel(10.0, 300)
    for r in ch.oscillatory[100:]:
        md = normalized_mode(r, 10.0)
        s = math.sin(r.root_param)
        assert md.norm2 == pytest.approx(0.5 + s * s, abs=5e-3)


@pytest.mark.parametrize("gamma", [1.2, 10.0, 1000.0])
def test_unit_norm_all_branches(gamma):
    for r in enumerate_channel(gamma, 30).records:
        md = normalized_mode(r, gamma)
        assert abs(md.unit_norm_defect()) < 1e-10
        assert md.H > 0


def test_element_linearity_and_zero():
    r = solve_oscillatory_root(10.0, 3)
    md = normalized_mode(r, 10.0)
    assert matrix_element(md, ChannelPotential()) == 0.0
    a = matrix_element(md, ChannelPotential((0.3, 0.0, 0.1)))
    b = matrix_element(md, ChannelPotential((0.6, 0.0, 0.2)))
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_element_fourier_overlap():
    # w = sin^2(xt)/norm2 so the element of cos(2 pi j t) is -(1/2) int cos(2xt) cos(2 pi j t) / norm2
    r = solve_oscillatory_root(10.0, 20)
    x = r.root_param
    md = normalized_mode(r, 10.0)
    j = 3
    q = ChannelPotential(tuple([0.0] * (2 * j - 1) + [1.0]))
    a, b = 2 * x, 2 * math.pi * j
    overlap = 0.5 * (math.sin(a - b) / (a - b) + math.sin(a + b) / (a + b))
    assert matrix_element(md, q) == pytest.approx(-0.5 * overlap / md.norm2, rel=1e-10)
    assert abs(matrix_element(md, q)) < 0.05


def test_channel_elements_match_single():
    ch = enumerate_channel(16.0, 40)
    q = ChannelPotential((0.1, 0.2, -0.05))
    els, modes = channel_elements(ch, q)
    single = [matrix_element(normalized_mode(r, 16.0), q) for r in ch.records]
    assert els == pytest.approx(single, rel=1e-10, abs=1e-14)
    zeros, none = channel_elements(ch, ChannelPotential())
    assert not zeros.any() and none == []


def test_fourier_endpoint_examples():
    p, c = fourier_endpoint_limit(ChannelPotential((0.0, 1.0)), 50)
    assert p == pytest.approx(0.5, abs=1e-12) and c == pytest.approx(0.5, abs=1e-12)
    p, c = fourier_endpoint_limit(ChannelPotential((1.0,)), 50)
    assert abs(p) < 1e-12 and abs(c) < 1e-12
    q = lambda t: t * t - t + 1.0 / 6.0
    # partial sums are sum_{m<=N} 1/(2 pi^2 m^2), an independent closed form
    for N in (10, 100):
        want = math.fsum(1 / (2 * math.pi ** 2 * m * m) for m in range(1, N + 1))
        assert fourier_endpoint_limit(q, N)[0] == pytest.approx(want, rel=1e-11)
    with pytest.raises(SpecError):
        fourier_endpoint_limit(q, 0)


def test_cesaro_tail():
    assert cesaro_tail([1.0, 2.0, 3.0, 4.0]) == (4.0, 1)
    assert cesaro_tail([1.0, 2.0, 3.0, 4.0, 5.0]) == (4.5, 2)
    with pytest.raises(SpecError):
        cesaro_tail([])


def _ledger(pot, K=3, M=40, schedule=(10, 20, 40)):
    spec = make_operator_spec(2, 3, K)
    spectra = enumerate_spectrum(spec, M)
    pairs = solve_perturbed(spectra, pot)
    els = {ch.k: channel_elements(ch, pot.channel(ch.k))[0] for ch in spectra}
    return spectra, pairs, els, pair_and_sum(spectra, pairs, els, schedule, trace_target(pot))


def test_zero_potential_sums_are_zero():
    *_, led = _ledger(PotentialSpec())
    assert all(v == 0.0 for d in led.partial_sums.values() for vals in d.values() for v in vals)
    v = trace_verdict(led, 3.0)
    assert v["relative_deviation_osc"] == 0.0 and v["target"] == 0.0


def test_ledger_bookkeeping_and_inactive_channels():
    pot = PotentialSpec.from_coefficients({1: [0.0, 0.2]})
    *_, led = _ledger(pot)
    for d in led.partial_sums.values():
        for i in range(len(led.schedule)):
            assert d["total"][i] == math.fsum(d[b][i] for b in ("oscillatory", "principal", "negative"))
    assert all(e.shift == 0.0 and e.element == 0.0 for e in led.entries if e.k != 1)
    assert all(abs(e.shift) <= 0.2 + 1e-8 for e in led.entries)
    assert led.target == pytest.approx(-0.1)


def test_pairing_errors():
    pot = PotentialSpec.from_coefficients({1: [0.0, 0.2]})
    spectra, pairs, els, _ = _ledger(pot)
    with pytest.raises(PairingError):
        pair_and_sum(spectra, pairs, els, (10, 80), -0.1)
    bad = dict(pairs)
    bad[1] = list(reversed(bad[1]))
    with pytest.raises(PairingError):
        pair_and_sum(spectra, bad, els, (10, 20), -0.1)


def test_verdict_warns_outside_hypothesis():
    *_, led = _ledger(PotentialSpec.from_coefficients({1: [0.0, 0.2]}))
    assert trace_verdict(led, 1.5)["warnings"]
    assert not trace_verdict(led, 3.0)["warnings"]


def test_remainder_decays_along_channel():
    # second-order remainder of each mode shrinks with m
    pot = PotentialSpec.from_coefficients({1: [0.0, 0.2]})
    *_, led = _ledger(pot, K=1, M=40)
    rem = [abs(e.remainder) for e in led.entries if e.branch == "oscillatory" and e.m >= 5]
    assert rem[-1] < rem[0] / 10


@settings(max_examples=20, deadline=None)
@given(st.floats(1.1, 1e4), st.integers(1, 500))
def test_norm_consistency_property(gamma, m):
    r = solve_oscillatory_root(gamma, m)
    md = normalized_mode(r, gamma)
    assert abs(md.norm2 - quadrature_norm2(r)) / md.norm2 < 1e-8
