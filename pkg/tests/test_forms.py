import math

import numpy as np
from hypothesis import given, strategies as st

from quasisasaki.forms import Form, evaluate_on_frame, wedge, wedge_power
from oracles import brute_wedge, random_two_form


def random_one_form(rng, d):
    return rng.normal(size=d)


@st.composite
def seeded(draw):
    return np.random.default_rng(draw(st.integers(0, 2**32 - 1))), draw(st.integers(2, 6))


@given(seeded())
def test_wedge_matches_alternation(sd):
    rng, d = sd
    a, b = random_two_form(rng, d), random_one_form(rng, d)
    got = wedge(Form.from_dense(a), Form.from_dense(b)).to_dense()
    np.testing.assert_allclose(got, brute_wedge(a, b), atol=1e-12)


@given(seeded())
def test_two_forms_commute_one_forms_anticommute(sd):
    rng, d = sd
    a, b = Form.from_dense(random_two_form(rng, d)), Form.from_dense(random_two_form(rng, d))
    u, v = Form.from_dense(random_one_form(rng, d)), Form.from_dense(random_one_form(rng, d))
    np.testing.assert_allclose((a ^ b).to_dense(), (b ^ a).to_dense(), atol=1e-12)
    np.testing.assert_allclose((u ^ v).to_dense(), -(v ^ u).to_dense(), atol=1e-12)
    assert (u ^ u).max_abs() == 0.0


@given(seeded())
def test_wedge_associative(sd):
    rng, d = sd
    a = Form.from_dense(random_one_form(rng, d))
    b = Form.from_dense(random_two_form(rng, d))
    c = Form.from_dense(random_one_form(rng, d))
    np.testing.assert_allclose(((a ^ b) ^ c).to_dense(), (a ^ (b ^ c)).to_dense(), atol=1e-12)


def test_standard_symplectic_power_is_volume():
    n, d = 2, 4
    w = np.zeros((d, d))
    for i in range(n):
        w[2 * i, 2 * i + 1], w[2 * i + 1, 2 * i] = 1.0, -1.0
    top = wedge_power(Form.from_dense(w), n)
    # Alt normalisation: (k! l! / (k+l)!) per wedge
    expected = math.factorial(n) * math.factorial(2) ** n / math.factorial(2 * n)
    assert evaluate_on_frame(top, np.eye(d)) == np.float64(expected)
    assert wedge_power(Form.from_dense(w), n + 1).max_abs() == 0.0
