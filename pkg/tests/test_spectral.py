import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from common import SCHEDULE, TWO_FREQ, annulus_points, cosine_spec, rng, spec_from
from oracles import fd_gradient
from qpmomentum.hamiltonian import HamiltonianMatrix, assemble
from qpmomentum.quasilattice import TruncationSet
from qpmomentum.spectral import (
    ContinuationParams, NearDegenerate, Resonant, ResonantAtLevel, SolverError, branch,
    continue_pair, eig_all, gradient, initial_pair, run_multiscale, select_branch, truncation,
)

DEGENERATE_K = (-0.5, -0.5)  # |k| = |k+(1,0)| = |k+(0,1)| = |k+(1,1)|


def lam_of(spec, level, schedule=SCHEDULE):
    def f(k):
        p = branch(spec, k, level, schedule)
        assert not isinstance(p, Resonant)
        return p.lam
    return f


def test_eig_all_free_is_sorted_diagonal():
    H = assemble(spec_from(TWO_FREQ, g=0.0), (0.31, 0.17), TruncationSet.box(1, 1))
    w, _ = eig_all(H)
    assert np.array_equal(w, np.sort(H.diag))


def test_eig_all_two_by_two_closed_form():
    a, b, c = 2.0, -1.0, 0.5 + 0.75j
    w, _ = eig_all(np.array([[a, c], [np.conj(c), b]]))
    r = math.sqrt((a - b) ** 2 / 4 + abs(c) ** 2)
    assert w == pytest.approx([(a + b) / 2 - r, (a + b) / 2 + r], abs=1e-14)


def test_eig_all_reconstruction():
    g = rng(5)
    A = g.normal(size=(20, 20)) + 1j * g.normal(size=(20, 20))
    H = (A + A.conj().T) / 2
    w, V = eig_all(H)
    assert np.linalg.norm(V @ np.diag(w) @ V.conj().T - H) <= 1e-9 * np.linalg.norm(H)
    assert np.allclose(V.conj().T @ V, np.eye(20), atol=1e-10)
    assert np.all(np.diff(w) >= 0)


def test_eig_all_nonfinite_raises():
    with pytest.raises(SolverError):
        eig_all(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_free_initial_pair_is_plane_wave():
    spec = spec_from(TWO_FREQ, g=0.0)
    k = (0.83, 0.29)
    p = initial_pair(spec, k, TruncationSet.box(1, 1))
    assert p.lam == (k[0] ** 2 + k[1] ** 2) ** 2
    u0 = np.zeros(81)
    u0[40] = 1.0
    assert np.array_equal(p.coeffs, u0)
    assert p.overlap_prev == 1.0


def test_symmetric_degeneracy_is_resonant():
    p = initial_pair(spec_from(TWO_FREQ, g=1e-6), DEGENERATE_K, TruncationSet.box(1, 1))
    assert isinstance(p, Resonant)
    assert p.level == 1 and p.overlap < 0.5
    assert "resonant at level 1" in str(p)


def test_cosine_pair_against_dense_eigensolve():
    spec, k = cosine_spec(0.05), (1.37, 0.22)
    t = TruncationSet.box(2, 2)
    p = initial_pair(spec, k, t)
    H = assemble(spec, k, t)
    w, V = eig_all(H)
    i = int(np.argmax(np.abs(V[t.zero_position]) ** 2))
    assert abs(p.lam - w[i]) <= 1e-10 * (1 + abs(w[i]))
    assert abs(abs(np.dot(V[:, i], p.coeffs)) - 1) < 1e-10
    lam0 = (k[0] ** 2 + k[1] ** 2) ** 2
    gap = np.min(np.abs(np.delete(H.diag, t.zero_position) - lam0))
    # second-order shift: bounded by a measured constant times g^2 / gap
    assert abs(p.lam - lam0) <= 2 * 0.05 ** 2 / gap


@pytest.mark.parametrize("k", [(3.7, 1.3), (1.37, 0.22), (-2.1, 4.4)])
def test_pair_invariants(spec, k):
    for n in (1, 2):
        p = branch(spec, k, n, SCHEDULE)
        assert abs(np.linalg.norm(p.coeffs) - 1) <= 1e-12
        assert p.coeffs[p.tset.zero_position] >= 0
        assert 0 <= p.overlap_prev <= 1
        H = assemble(spec, k, p.tset)
        assert np.linalg.norm(H.entries @ p.coeffs - p.lam * p.coeffs) <= 1e-10 * (1 + abs(p.lam))


def test_free_chain_has_no_increments(spec0):
    k = (2.31, 1.13)
    chain = []
    branch(spec0, k, 3, SCHEDULE, chain=chain)
    lam0 = (k[0] ** 2 + k[1] ** 2) ** 2
    assert [p.level for p in chain] == [1, 2, 3]
    for p in chain:
        assert p.lam == lam0 and p.l1_increment == 0.0
    again = continue_pair(spec0, k, chain[0], truncation(2, SCHEDULE))
    assert again.lam == chain[0].lam and again.l1_increment == 0


def test_perturbative_chain_decreases_and_matches_largest_box(spec):
    k = (3.7, 1.3)
    chain = []
    last = branch(spec, k, 3, SCHEDULE, chain=chain)
    diffs = [abs(p.diff) for p in chain]
    assert diffs[0] > diffs[1] > diffs[2]
    H = assemble(spec, k, last.tset)
    w, _ = eig_all(H)
    assert np.min(np.abs(w - last.lam)) <= 1e-10 * last.lam


def test_continue_requires_containment(spec):
    p = initial_pair(spec, (3.7, 1.3), TruncationSet.box(2, 1))
    with pytest.raises(ValueError):
        continue_pair(spec, (3.7, 1.3), p, TruncationSet.box(1, 2))


def test_free_gradient_formula():
    spec = spec_from(TWO_FREQ, g=0.0)
    # box (1, 0): the (1,1) -> (-1,1) degeneracy of the full box is out of reach
    p = initial_pair(spec, (1.0, 1.0), TruncationSet.box(1, 0))
    assert np.array_equal(gradient(spec, (1.0, 1.0), p), [8.0, 8.0])


@given(x=st.floats(0.5, 3), y=st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_free_gradient_is_radial(x, y):
    spec = spec_from(TWO_FREQ, g=0.0)
    p = initial_pair(spec, (x, y), TruncationSet.box(1, 0))
    assume(not isinstance(p, Resonant))
    gx, gy = gradient(spec, (x, y), p)
    assert abs(gx * y - gy * x) <= 1e-12 * math.hypot(gx, gy) * math.hypot(x, y)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_gradient_matches_finite_differences(spec, seed):
    for k in annulus_points(seed, 3, 5.0, 10.0):
        p = branch(spec, k, 1, SCHEDULE)
        if isinstance(p, Resonant):
            continue
        hf = gradient(spec, k, p)
        fd = fd_gradient(lam_of(spec, 1), k, 1e-4)
        assert np.linalg.norm(hf - fd) <= 1e-6 * np.linalg.norm(hf)


def test_gradient_rejects_near_degenerate(spec):
    p = initial_pair(spec, (3.7, 1.3), TruncationSet.box(1, 1))
    tight = ContinuationParams(gap_rel=1.0)
    with pytest.raises(NearDegenerate):
        gradient(spec, (3.7, 1.3), p, tight)


def test_phase_determinism(spec):
    a = branch(spec, (3.7, 1.3), 2, SCHEDULE)
    b = branch(spec, (3.7, 1.3), 2, SCHEDULE)
    assert a.lam == b.lam
    assert np.array_equal(a.coeffs, b.coeffs)


def test_complex_phase_fix():
    coeffs = {((1, 0), (0, 0)): 0.5 + 0.25j, ((-1, 0), (0, 0)): 0.5 - 0.25j}
    spec = spec_from(coeffs, g=0.1)
    p = initial_pair(spec, (0.7, 0.4), TruncationSet.box(1, 1))
    z = p.coeffs[p.tset.zero_position]
    assert z.imag == 0 and z.real > 0


@pytest.mark.parametrize("c", [0.5, 3.0, 1024.0])
def test_selection_invariance_under_scaling(spec, c):
    t = TruncationSet.box(1, 1)
    H = assemble(spec, (3.7, 1.3), t)
    Hc = HamiltonianMatrix(H.k, t, c * H.entries, c * H.diag)
    u0 = np.zeros(len(t))
    u0[t.zero_position] = 1.0
    params = ContinuationParams()
    s1, v1, o1, _ = select_branch(H, u0, 1, params)
    s2, v2, o2, _ = select_branch(Hc, u0, 1, params)
    assert s2 == pytest.approx(c * s1, rel=1e-9)
    assert np.allclose(v1, v2, atol=1e-12)
    assert o1 == pytest.approx(o2, abs=1e-12)


def test_free_multiscale_report(spec0):
    rep = run_multiscale(spec0, (2.31, 1.13), 3, SCHEDULE)
    assert [r.n for r in rep.rows] == [1, 2, 3]
    for r in rep.rows:
        assert r.diff == 0 and r.l1_increment == 0 and r.residual_next == 0 and r.residual_l1 == 0


def test_multiscale_report_columns(spec):
    rep = run_multiscale(spec, (3.7, 1.3), 3, SCHEDULE)
    lams = [(3.7 ** 2 + 1.3 ** 2) ** 2] + [r.lam for r in rep.rows]
    for r, a, b in zip(rep.rows, lams, lams[1:]):
        assert abs(r.diff - abs(b - a)) <= 1e-12 * abs(b)
    assert rep.rows[0].diff > rep.rows[1].diff > rep.rows[2].diff
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,lambda,diff,l1_increment,residual_next,grad_x,grad_y"
    assert len(lines) == 4
    assert rep.fits["diff_log_slope"] < 0


def test_multiscale_resonant_at_level_one():
    rep = run_multiscale(spec_from(TWO_FREQ, g=1e-6), DEGENERATE_K, 3, SCHEDULE)
    assert isinstance(rep, ResonantAtLevel)
    assert rep.level == 1 and rep.partial.rows == []


def test_multiscale_rejects_zero_levels(spec):
    with pytest.raises(ValueError):
        run_multiscale(spec, (1.0, 1.0), 0, SCHEDULE)
