import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from common import COSINE, SQRT2, TWO_FREQ, spec_from
from oracles import extended_potential
from qpmomentum.potential import (
    PotentialSpec, SchemaError, coefficient, evaluate, from_config, is_hermitian_symmetric, validate,
)


def cos_spec(g=1.0):
    return spec_from(COSINE, g=g)


def test_constant_term_rejected():
    spec = spec_from({((0, 0), (0, 0)): 1.0})
    assert any("|s1|+|s2|=0" in p for p in validate(spec))


def test_hermitian_pair_ok():
    assert validate(cos_spec()) == []


def test_cutoff_boundary():
    ok = spec_from({((1, 1), (0, 0)): 1.0, ((-1, -1), (0, 0)): 1.0}, Q=2)
    bad = spec_from({((1, 1), (1, 0)): 1.0, ((-1, -1), (-1, 0)): 1.0}, Q=2)
    assert validate(ok) == []
    msgs = validate(bad)
    assert len(msgs) == 2 and all("cutoff exceeded" in m for m in msgs)


def test_missing_partner_and_conjugate_mismatch():
    missing = spec_from({((1, 0), (0, 0)): 1.0})
    assert any("partner" in p for p in validate(missing))
    wrong = PotentialSpec(SQRT2, 2, 2, {((1, 0), (0, 0)): 1j, ((-1, 0), (0, 0)): 1j})
    assert any("conj" in p for p in validate(wrong))
    assert not is_hermitian_symmetric(wrong)


def test_small_l_rejected():
    assert any("l=1" in p for p in validate(spec_from(COSINE, l=1)))


def test_evaluate_cosine_examples():
    spec = cos_spec()
    assert evaluate(spec, (0.0, 0.0)) == 2.0
    assert abs(evaluate(spec, (0.25, 0.0))) < 1e-14


def test_evaluate_two_frequency_against_extended_precision():
    spec = spec_from(TWO_FREQ, g=1.0)
    for x in [(1.0, 1.0), (0.3, -2.7), (12.5, 7.25)]:
        want = extended_potential(TWO_FREQ, 1.0, 0, 1, 2, x)
        got = evaluate(spec, x)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_evaluate_batch_matches_pointwise():
    spec = spec_from(TWO_FREQ)
    pts = np.random.Generator(np.random.Philox(key=3)).uniform(-5, 5, (10, 2))
    batch = evaluate(spec, pts)
    assert np.allclose(batch, [evaluate(spec, p) for p in pts], rtol=0, atol=1e-15)


def test_realness_on_pseudorandom_grid():
    spec = spec_from(TWO_FREQ, g=1.0)
    pts = np.random.Generator(np.random.Philox(key=11)).uniform(-50, 50, (100, 2))
    vals = evaluate(spec, pts)
    assert np.max(np.abs(vals.imag)) <= 1e-12 * spec.abs_sum


@given(u=st.tuples(st.integers(-5, 5), st.integers(-5, 5)),
       x=st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
@settings(max_examples=50, deadline=None)
def test_translation_structure(u, x):
    spec = spec_from(TWO_FREQ, g=1.0)
    alpha = SQRT2.value
    rotated = {key: v * cmath.exp(2j * math.pi * alpha * (key[1][0] * u[0] + key[1][1] * u[1]))
               for key, v in spec.coeffs.items()}
    rspec = PotentialSpec(SQRT2, 2, 2, rotated, 1.0, real_valued=False)
    lhs = evaluate(spec, (x[0] + u[0], x[1] + u[1]))
    rhs = evaluate(rspec, x)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_coefficient_lookup():
    spec = cos_spec()
    assert coefficient(spec, (1, 0), (0, 0)) == 1.0
    assert coefficient(spec, (0, 1), (0, 0)) == 0
    assert coefficient(spec, (0, 0), (0, 0)) == 0


def test_cutoff_exhaustive_scan():
    spec = spec_from(TWO_FREQ)
    rng = range(-4, 5)
    for a, b, c, d in itertools.product(rng, rng, rng, rng):
        if abs(a) + abs(b) + abs(c) + abs(d) > spec.Q:
            assert coefficient(spec, (a, b), (c, d)) == 0


def test_config_roundtrip_and_schema():
    spec = spec_from(TWO_FREQ)
    assert from_config(spec.to_config()) == spec
    block = spec.to_config()
    with pytest.raises(SchemaError):
        from_config({**block, "colour": 1})
    with pytest.raises(SchemaError):
        from_config({**block, "coefficients": block["coefficients"] + block["coefficients"][:1]})
    with pytest.raises(SchemaError):
        from_config({**block, "l": 2.0})
    with pytest.raises(SchemaError):
        from_config({k: v for k, v in block.items() if k != "Q"})


def test_conventions_differ_by_two_pi():
    spec = spec_from(TWO_FREQ)
    x = np.array([0.37, -1.1])
    assert evaluate(spec, x, "absorbed") == pytest.approx(evaluate(spec, x / (2 * math.pi), "literal"), abs=1e-14)
    with pytest.raises(ValueError):
        evaluate(spec, x, "radians")
