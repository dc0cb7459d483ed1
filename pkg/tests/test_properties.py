"""Randomised invariants of the circuit model and the data plumbing."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qclattice import io, kernels
from qclattice.data import postprocess, preprocess
from qclattice.lattice import Configuration
from qclattice.model import CircuitParams, MeasurementOperator, build_state, param_count, predict_energy

angles = st.floats(-10.0, 10.0, allow_nan=False)


@st.composite
def model_case(draw, sizes=(2, 4, 6)):
    n = draw(st.sampled_from(sizes))
    x = draw(arrays(np.float64, param_count(n), elements=angles))
    signs = draw(st.lists(st.sampled_from("+-"), min_size=n, max_size=n))
    return n, x, Configuration.parse("".join(signs))


@settings(max_examples=60, deadline=None)
@given(model_case())
def test_energy_bounded_by_scale(case):
    n, x, c = case
    p = CircuitParams.from_vector(x, n)
    assert abs(predict_energy(p, c)) <= abs(p.scale) * (1 + 1e-12)
    assert abs(build_state(p, c).norm() - 1.0) < 1e-12


@settings(max_examples=60, deadline=None)
@given(model_case(), st.data())
def test_angle_shift_by_pi_is_a_global_phase(case, data):
    n, x, c = case
    k = data.draw(st.integers(0, x.size - 2))
    y = x.copy()
    y[k] += math.pi
    e1 = predict_energy(CircuitParams.from_vector(x, n), c)
    e2 = predict_energy(CircuitParams.from_vector(y, n), c)
    assert abs(e1 - e2) < 1e-11


@settings(max_examples=40, deadline=None)
@given(model_case(), st.floats(-5.0, 5.0, allow_nan=False))
def test_energy_linear_in_scale(case, s):
    n, x, c = case
    p = CircuitParams.from_vector(x, n)
    assert abs(predict_energy(p.with_scale(s), c) * p.scale - s * predict_energy(p, c)) < 1e-9 * (1 + abs(s * p.scale))


@settings(max_examples=40, deadline=None)
@given(model_case(sizes=(2, 4, 6)))
def test_backends_agree(case):
    n, x, c = case
    sigma = np.array([c.sigma], dtype=np.float64)
    m = MeasurementOperator.default(n)
    masks = m.pauli.masks()
    py = kernels.get_backend("python")
    e_py, j_py = py.energies_and_jacobian(x, sigma, *masks)
    assert abs(e_py[0] - predict_energy(CircuitParams.from_vector(x, n), c)) < 1e-10
    if kernels.BACKEND == "cython":
        e_cy, j_cy = kernels.get_backend("cython").energies_and_jacobian(x, sigma, *masks)
        np.testing.assert_allclose(e_cy, e_py, atol=1e-12)
        np.testing.assert_allclose(j_cy, j_py, atol=1e-11)


@given(st.floats(-50, 50, allow_nan=False), st.floats(0, 1))
def test_preprocess_inverse(e, x):
    assert abs(postprocess(preprocess(e, x), x) - e) < 1e-12


@given(st.text(alphabet="+-", min_size=1, max_size=12))
def test_configuration_text_round_trip(text):
    assert Configuration.parse(text).to_signs() == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_exact(x):
    assert float(io.fmt(x)) == x
