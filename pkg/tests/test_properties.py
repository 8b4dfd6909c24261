"""Randomized properties across modules."""
import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ticklab.heurisearch import F_value, objective_G, project
from ticklab.jsonio import dumps
from ticklab.matkit import adjugate, expm, solve_linear
from ticklab.models import MulticyclicParams, QubitParams, build_multicyclic, build_qubit, classical
from ticklab.stats import (
    moments_classical_resolvent,
    moments_multicyclic_closed,
    pmf_2x2_closed,
    pmf_classical,
    pmf_multicyclic_closed,
    pmf_series,
)
from ticklab.witness import accuracy_witness

unit = st.floats(0.0, 1.0)
finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def substochastic(draw, d_max=5):
    d = draw(st.integers(1, d_max))
    M = draw(arrays(float, (d, d), elements=unit))
    slack = draw(arrays(float, (d, 1), elements=st.floats(0.01, 2.0)))
    return M / (M.sum(axis=1, keepdims=True) + slack)


@st.composite
def multicyclic_params(draw):
    d = draw(st.integers(1, 10))
    k = draw(st.sampled_from([k for k in range(1, d + 1) if d % k == 0]))
    return MulticyclicParams(d, k, draw(st.floats(0.0, 0.99)))


@given(arrays(float, st.tuples(st.just(2), st.integers(1, 5), st.integers(1, 5)).map(lambda s: (s[0], s[1], s[1])),
              elements=finite))
def test_projection_is_always_substochastic(B):
    T = project(B)
    assert T.min() >= 0
    assert T.sum(axis=1).max() <= 1 + 1e-12


@given(arrays(float, (2, 3, 3), elements=finite), st.integers(1, 12))
def test_G_is_pmf_of_projection(B, L):
    value, _ = objective_G(B, L)
    assert abs(value - pmf_classical(classical(project(B)), L)) <= 1e-14


@given(substochastic())
@settings(max_examples=200)
def test_survival_nonincreasing_and_normalized(T0):
    c = classical(T0)
    p, f = pmf_series(c, 200)
    assert np.all(np.diff(f) <= 1e-12)
    assert np.all(p >= 0)
    assert abs(p.sum() + f[-1] - 1.0) <= 1e-10


@given(substochastic(d_max=2).filter(lambda T: T.shape == (2, 2)), st.integers(1, 40))
def test_pmf_2x2_matches_recursion(T0, L):
    assert abs(pmf_2x2_closed(*T0.ravel(), L) - pmf_classical(classical(T0), L)) <= 1e-12


@given(multicyclic_params(), st.integers(1, 40))
def test_multicyclic_closed_pmf_matches_engine(p, L):
    assert abs(pmf_multicyclic_closed(p, L) - pmf_classical(build_multicyclic(p, L=L), L)) <= 1e-12


@given(multicyclic_params())
def test_multicyclic_witness_nonpositive(p):
    st_ = moments_multicyclic_closed(p)
    assert accuracy_witness(st_, p.d) <= 1e-9 * max(1.0, st_.mu**2)


@given(substochastic(d_max=2).filter(lambda T: T.shape == (2, 2)))
def test_d2_witness_and_F_sign(T0):
    st_ = moments_classical_resolvent(classical(T0))
    assert accuracy_witness(st_, 2) <= 1e-9 * max(1.0, st_.mu**2)
    assert F_value(T0) >= -1e-9


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_qubit_kraus_contraction(q, u):
    K = build_qubit(QubitParams(q, u)).K0
    assert np.linalg.norm(K, 2) <= 1 + 1e-12


@given(arrays(float, (4, 4), elements=st.floats(-3, 3)))
def test_adjugate_identity(M):
    scale = max(1.0, np.abs(M).max()) ** 4
    assert np.abs(M @ adjugate(M) - np.linalg.det(M) * np.eye(4)).max() <= 1e-9 * scale


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)))
def test_expm_inverse(M):
    assert np.abs(expm(M) @ expm(-M) - np.eye(3)).max() <= 1e-9 * np.exp(2 * np.abs(M).sum(axis=0).max())


@given(arrays(float, (3, 3), elements=st.floats(-1, 1)), arrays(float, 3, elements=st.floats(-1, 1)))
def test_solve_residual(M, b):
    A = M + 4 * np.eye(3)
    assert np.abs(A @ solve_linear(A, b) - b).max() <= 1e-12


@given(st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=5),
    lambda children: st.lists(children, max_size=3) | st.dictionaries(st.text(max_size=3), children, max_size=3),
    max_leaves=10,
))
def test_json_round_trips_exactly(obj):
    assert json.loads(dumps(obj)) == obj
