import math

import numpy as np
import pytest

from common import SCHEDULE, cosine_spec
from oracles import dense_root_scan
from qpmomentum.isoenergetic import (
    NoRoot, TangentialCrossing, carve_levels, curve_derivative, direction, radial_solve, radius_function,
    refine_root, trace_curve,
)
from qpmomentum.resonance import AngleSet, Thresholds
from qpmomentum.spectral import Resonant, branch

TWO_PI = 2 * math.pi


@pytest.mark.parametrize("lam,kappa", [(16.0, 2.0), (81.0, 3.0)])
def test_free_radius(spec0, lam, kappa):
    for phi in (0.0, 0.7, 2.5, 5.9):
        k, pair = radial_solve(spec0, lam, phi, 1, SCHEDULE)
        assert abs(k - kappa) <= 1e-9 * kappa
        assert abs(pair.lam - lam) <= 1e-9 * lam


def test_root_against_dense_scan():
    spec, lam, phi = cosine_spec(0.05), 81.0, 0.7
    kappa, _ = radial_solve(spec, lam, phi, 1, SCHEDULE)
    nu, _ = direction(phi)

    def f(kap):
        p = branch(spec, kap * nu, 1, SCHEDULE)
        assert not isinstance(p, Resonant)
        return p.lam - lam

    oracle = dense_root_scan(f, 3.0 * 0.8, 3.0 * 1.2, 10_000).value
    assert abs(kappa - oracle) <= 1e-6 * oracle
    assert 0 < abs(kappa - 3.0) < 0.01


def test_dense_scan_oracle_on_linear_function():
    assert dense_root_scan(lambda x: 2 * x - 1, 0.0, 1.0, 101).value == pytest.approx(0.5, abs=1e-15)
    assert dense_root_scan(lambda x: x + 5, 0.0, 1.0).value is None


def test_free_curve_is_a_circle(spec0):
    curve = trace_curve(spec0, 81.0, 1, AngleSet.full(), 1024, SCHEDULE)
    assert len(curve.samples) == 1024 and not curve.failures
    assert all(abs(s.kappa - 3.0) <= 1e-9 * 3.0 and s.dkappa_dphi == 0.0 for s in curve.samples)
    assert curve.max_deviation <= 3e-9


def test_curve_samples_certified(spec):
    aset = AngleSet(((0.5, 0.5 + 64 * TWO_PI / 1024),))
    curve = trace_curve(spec, 81.0, 1, aset, 1024, SCHEDULE)
    assert curve.samples
    for s in curve.samples:
        assert aset.contains(s.phi) and s.kappa > 0
        nu, _ = direction(s.phi)
        p = branch(spec, s.kappa * nu, 1, SCHEDULE)
        assert abs(p.lam - 81.0) <= 1e-9 * 81.0
        assert s.residual <= 1e-9 * 81.0
    phis = [s.phi for s in curve.samples]
    assert phis == sorted(phis)
    assert curve.to_csv().splitlines()[0] == "phi,kappa,dkappa_dphi,residual"


def test_derivative_matches_finite_differences(spec):
    lam, h = 81.0, 1e-4
    b1 = carve_levels(spec, lam, 1, SCHEDULE, Thresholds(delta_scale=0.1, delta_exponent=0.5))[0]
    good = total = 0
    for phi in [p for p in np.linspace(0.1, 6.0, 24) if b1.contains(p)]:
        res = radial_solve(spec, lam, phi, 1, SCHEDULE)
        plus = radial_solve(spec, lam, phi + h, 1, SCHEDULE)
        minus = radial_solve(spec, lam, phi - h, 1, SCHEDULE)
        if not all(isinstance(r, tuple) for r in (res, plus, minus)):
            continue
        d = curve_derivative(spec, lam, phi, res[0], res[1])
        fd = (plus[0] - minus[0]) / (2 * h)
        total += 1
        good += abs(d - fd) <= 1e-4 * max(abs(fd), 1e-12) or abs(d - fd) <= 1e-10
    assert total >= 8
    assert good >= 0.95 * total


def test_reflection_symmetry():
    # V depends on x1 only, so lam(k1, -k2) = lam(k1, k2) and kappa is even in phi
    spec, lam = cosine_spec(0.05), 81.0
    for phi in (0.3, 1.1, 2.0):
        a, pa = radial_solve(spec, lam, phi, 1, SCHEDULE)
        b, pb = radial_solve(spec, lam, TWO_PI - phi, 1, SCHEDULE)
        da = curve_derivative(spec, lam, phi, a, pa)
        db = curve_derivative(spec, lam, TWO_PI - phi, b, pb)
        assert abs(da + db) <= 1e-8


def test_free_derivative_is_zero(spec0):
    k, p = radial_solve(spec0, 81.0, 1.234, 1, SCHEDULE)
    assert curve_derivative(spec0, 81.0, 1.234, k, p) == 0.0


def test_tangential_floor(spec):
    k, p = radial_solve(spec, 81.0, 0.5, 1, SCHEDULE)
    with pytest.raises(TangentialCrossing):
        curve_derivative(spec, 81.0, 0.5, k, p, floor=10.0)


def test_newton_without_bracket_reports_no_root(spec):
    res = refine_root(spec, 81.0, 0.5, 1, SCHEDULE, start=50.0, max_iter=1)
    assert isinstance(res, NoRoot)
    assert "no sign change" in str(res)


def test_solver_guards(spec):
    with pytest.raises(ValueError):
        radial_solve(spec, -1.0, 0.0, 1, SCHEDULE)
    with pytest.raises(ValueError):
        radial_solve(spec, 81.0, 0.0, 1, SCHEDULE, eta=1.5)
    with pytest.raises(ValueError):
        trace_curve(spec, 81.0, 1, AngleSet(()), 1024, SCHEDULE)


def test_seeded_radius_matches_bracketed_solve(spec):
    r1 = radius_function(spec, 81.0, 1, SCHEDULE)
    r2 = radius_function(spec, 81.0, 2, SCHEDULE, seed=r1)
    for phi in (0.4, 2.2):
        direct = radial_solve(spec, 81.0, phi, 2, SCHEDULE)
        assert abs(r2(phi) - direct[0]) <= 1e-9 * direct[0]


def test_free_zero_threshold_levels_keep_full_circle(spec0):
    sets = carve_levels(spec0, 81.0, 2, SCHEDULE, Thresholds(delta_scale=0.0))
    assert [s.arcs for s in sets] == [((0.0, TWO_PI),)] * 2
