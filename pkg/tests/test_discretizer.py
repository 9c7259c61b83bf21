import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectrace.charroots import enumerate_channel
from spectrace.discretizer import (assemble_forms, convergence_orders, dump_matrix, eigenpair_checks,
                                   green_identity_residuals, jacobi_eigenvalues, oracle_spectrum, solve_gevp)
from spectrace.errors import InvariantError, SpecError
from spectrace.model import ChannelPotential, PotentialSpec
from spectrace.perturbed import solve_perturbed_channel


def test_scalar_and_diagonal_forms():
    assert solve_gevp((np.array([[2.0]]), np.array([[1.0]]))) == pytest.approx([2.0])
    A = np.diag([3.0, 8.0, -1.0])
    B = np.diag([1.0, 2.0, 4.0])
    assert solve_gevp((A, B), method="jacobi") == pytest.approx([-0.25, 3.0, 4.0], rel=1e-14)


def test_cholesky_failure_is_invariant_error():
    with pytest.raises(InvariantError):
        solve_gevp((np.eye(2), np.diag([1.0, -1.0])))


def test_dimensions_and_symmetry():
    f = assemble_forms([2.0, 16.0, 54.0], None, 100, coupling={(1, 2): lambda t: 0.1 * np.cos(np.pi * t)})
    assert f.A.shape == f.B.shape == (303, 303)
    assert np.array_equal(f.A, f.A.T) and np.array_equal(f.B, f.B.T)
    assert np.all(green_identity_residuals(f) == 0.0)
    np.linalg.cholesky(f.B)
    with pytest.raises(SpecError):
        assemble_forms([2.0], None, 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 31))
def test_jacobi_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((n, n))
    C = C + C.T
    w = jacobi_eigenvalues(C)
    ref = np.linalg.eigvalsh(C)
    assert np.max(np.abs(w - ref)) < 1e-11 * max(1.0, np.linalg.norm(C))


def test_jacobi_vectors():
    rng = np.random.default_rng(3)
    C = rng.standard_normal((30, 30))
    C = C + C.T
    w, V = jacobi_eigenvalues(C, vectors=True)
    assert np.max(np.abs(C @ V - V * w)) < 1e-10
    assert np.max(np.abs(V.T @ V - np.eye(30))) < 1e-12


def test_jacobi_route_agrees_with_lapack_on_forms():
    f = assemble_forms([10.0], None, 120)
    assert solve_gevp(f, 10, method="jacobi") == pytest.approx(solve_gevp(f, 10, method="lapack"), rel=1e-11)


@pytest.mark.parametrize("gamma", [1.2, 2.0, 10.0, 100.0])
def test_census_matches_charroots(gamma):
    oc = oracle_spectrum([gamma], None, 400, 10)[0]
    base = enumerate_channel(gamma, 12)
    ref = {"oscillatory": 0, "principal": 0, "negative": 0}
    for r in base.records[:10]:
        ref[r.branch.value] += 1
    assert oc.census() == ref
    assert ref["negative"] == 1
    assert np.allclose(oc.lams, base.lams[:10], rtol=1e-3)


def test_convergence_order_gamma10():
    ref = enumerate_channel(10.0, 12).lams[:10]
    errs = [np.max(np.abs(np.array(solve_gevp(assemble_forms([10.0], None, n), 10)) - ref) / np.abs(ref))
            for n in (250, 500, 1000)]
    for p in convergence_orders(errs):
        assert 1.8 <= p <= 2.2


def test_lowest_mode_at_n2000():
    ref = enumerate_channel(10.0, 3).oscillatory[0].lam
    lams = solve_gevp(assemble_forms([10.0], None, 2000), 4)
    assert min(abs(lams - ref)) / ref < 1e-5


def test_eigenpair_checks():
    # the Rayleigh quotient is roundoff-limited near eps * n^2, so the check runs at moderate n
    chk = eigenpair_checks(assemble_forms([10.0], None, 200), 8)
    assert np.max(chk["rayleigh_residual"] / np.maximum(1, np.abs(chk["lams"]))) < 1e-10
    assert np.max(chk["boundary_relation"]) < 1e-6


def test_matches_perturbed_with_potential():
    q = ChannelPotential((1.0,))
    pot = PotentialSpec({1: q})
    base = enumerate_channel(2.0, 10)
    mus = np.array([p.mu for p in solve_perturbed_channel(2.0, q, base)])[:8]
    errs = [np.max(np.abs(np.array(oracle_spectrum([2.0], pot, n, 8)[0].lams) - mus) / np.abs(mus))
            for n in (200, 400, 800)]
    orders = convergence_orders(errs)
    assert all(1.8 <= p <= 2.2 for p in orders)


def test_dump_matrix(tmp_path):
    f = assemble_forms([2.0], None, 10)
    path = tmp_path / "A.txt"
    dump_matrix(f.A, path)
    back = np.loadtxt(path)
    assert np.array_equal(back, f.A)
    assert len(path.read_text().splitlines()) == f.dof
