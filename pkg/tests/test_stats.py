from fractions import Fraction

import numpy as np
import pytest

from ticklab.errors import DegenerateParams, NegativeProbability, NeverTicks, NoConvergence
from ticklab.models import (
    MulticyclicParams,
    QubitParams,
    build_cyclic,
    build_multicyclic,
    build_oneway,
    build_qubit,
    classical,
    quantum,
)
from ticklab.stats import (
    Method,
    moments_batch,
    moments_classical_resolvent,
    moments_classical_truncated,
    moments_multicyclic_closed,
    moments_quantum,
    moments_quantum_resolvent,
    moments_qubit_closed,
    pmf_2x2_closed,
    pmf_classical,
    pmf_multicyclic_closed,
    pmf_series,
    pmf_series_classical,
    survival_classical,
    survival_quantum,
    tick_statistics,
)


def random_substochastic(rng, d):
    M = rng.uniform(0, 1, (d, d)) * (rng.uniform(0, 1, (d, d)) < 0.7)
    rows = M.sum(axis=1, keepdims=True) + rng.uniform(0.05, 1.0, (d, 1))
    return M / rows


def test_survival_classical_examples():
    assert survival_classical(build_oneway(2, 0.5), 0) == 1.0
    assert survival_classical(build_oneway(2, 0.5), 2) == pytest.approx(0.75, abs=1e-15)
    assert survival_classical(classical([[0.3]]), 5) == pytest.approx(0.3**5, rel=1e-14)


def test_pmf_classical_examples():
    assert pmf_classical(build_oneway(2, 1 / 3), 3) == pytest.approx(8 / 27, abs=1e-15)
    cyclic = build_multicyclic(MulticyclicParams(2, 2, 2 / 3), L=5)
    assert pmf_classical(cyclic, 5) == pytest.approx(4 / 27, abs=1e-15)
    zero = classical(np.zeros((2, 2)))
    assert pmf_classical(zero, 1) == 1.0
    assert all(pmf_classical(zero, L) == 0.0 for L in range(2, 6))


def test_pmf_rejects_invalid_model():
    from ticklab.models import ClassicalClock

    bad = ClassicalClock(np.array([[1.5]]), np.array([1.0]))
    with pytest.raises(NegativeProbability):
        pmf_classical(bad, 2)


def test_pmf_multicyclic_examples():
    assert pmf_multicyclic_closed(MulticyclicParams(2, 2, 0.5), 4) == pytest.approx(0.25)
    assert pmf_multicyclic_closed(MulticyclicParams(2, 1, 1 / 3), 3) == pytest.approx(8 / 27)
    assert pmf_multicyclic_closed(MulticyclicParams(6, 1, 0.5), 3) == 0.0


def test_pmf_multicyclic_matches_engine():
    rng = np.random.default_rng(5)
    for d in range(1, 11):
        for k in (k for k in range(1, d + 1) if d % k == 0):
            q = float(rng.uniform(0.05, 0.95))
            p = MulticyclicParams(d, k, q)
            for L in range(1, 4 * d + 1):
                engine = pmf_classical(build_multicyclic(p, L=L), L)
                assert abs(pmf_multicyclic_closed(p, L) - engine) <= 1e-12


def test_pmf_2x2_examples():
    for q in np.arange(0.1, 1.0, 0.1):
        c = build_oneway(2, q)
        for L in range(1, 51):
            assert abs(pmf_2x2_closed(q, 1 - q, 0.0, q, L) - pmf_classical(c, L)) <= 1e-12
    for r in (0.1, 0.5, 0.9):
        c = build_cyclic(2, r)
        for L in range(1, 41):
            assert abs(pmf_2x2_closed(0.0, 1.0, r, 0.0, L) - pmf_classical(c, L)) <= 1e-12
    assert pmf_2x2_closed(0.4, 0.0, 0.0, 0.4, 3) == pytest.approx(0.4**2 * 0.6)


def test_pmf_2x2_random_including_near_defective():
    rng = np.random.default_rng(6)
    for n in range(1000):
        T0 = random_substochastic(rng, 2)
        if n % 5 == 0:
            T0[1, 0] = 0.0
            T0[1, 1] = T0[0, 0]
        if n % 7 == 0:
            T0[1, 1] = T0[0, 0] + 1e-9
        if T0.sum(axis=1).max() > 1:
            continue
        c = classical(T0)
        for L in range(1, 41):
            assert abs(pmf_2x2_closed(*T0.ravel(), L) - pmf_classical(c, L)) <= 1e-12


def test_resolvent_examples():
    st = moments_classical_resolvent(build_oneway(2, 0.5))
    assert (st.mu, st.sigma2, st.accuracy) == pytest.approx((4, 4, 4))
    st = moments_classical_resolvent(build_cyclic(2, 0.5))
    assert (st.mu, st.sigma2, st.accuracy) == pytest.approx((4, 8, 2))
    q = 0.3
    st = moments_classical_resolvent(classical([[q]]))
    assert (st.mu, st.sigma2) == pytest.approx((1 / (1 - q), q / (1 - q) ** 2))
    assert st.method is Method.RESOLVENT


def test_resolvent_never_ticks():
    with pytest.raises(NeverTicks):
        moments_classical_resolvent(classical(np.eye(2)))


def test_resolvent_ignores_unreachable_absorbing_state():
    T0 = np.array([[0.5, 0.0], [0.0, 1.0]])
    st = moments_classical_resolvent(classical(T0))
    assert st.mu == pytest.approx(2.0)


def test_multicyclic_closed_examples():
    st = moments_multicyclic_closed(MulticyclicParams(6, 2, 0.5))
    assert (st.mu, st.sigma2, st.accuracy) == pytest.approx((12, 24, 6))
    res = moments_classical_resolvent(build_multicyclic(MulticyclicParams(6, 2, 0.5)))
    assert (res.mu, res.sigma2) == pytest.approx((12, 24), rel=1e-12)
    for mu in (3.0, 5.0, 17.0):
        st = moments_multicyclic_closed(MulticyclicParams(2, 1, 1 - 2 / mu))
        assert st.accuracy == pytest.approx(2 * mu / (mu - 2), rel=1e-12)
    st = moments_multicyclic_closed(MulticyclicParams(3, 1, 0.0))
    assert st.mu == 3 and st.sigma2 == 0 and st.accuracy_infinite
    assert st.to_dict()["accuracy"] is None
    with pytest.raises(NeverTicks):
        moments_multicyclic_closed(MulticyclicParams(2, 1, 1.0))


def test_survival_quantum_examples():
    dark = quantum(build_qubit(QubitParams(0.3, 1.0)).K0, [1, 0])
    assert all(survival_quantum(dark, L) == pytest.approx(1.0) for L in range(10))
    upper = quantum(build_qubit(QubitParams(0.0, 1.0)).K0, [0, 1])
    assert survival_quantum(upper, 0) == 1.0
    assert survival_quantum(upper, 3) == 0.0
    clock = build_qubit(QubitParams(0.5, 0.8))
    # level 0 is undamped, so the first step cannot tick
    assert survival_quantum(clock, 1) == pytest.approx(1.0, abs=1e-15)
    assert survival_quantum(clock, 2) == pytest.approx(0.8 + 0.2 * 0.25, abs=1e-15)


def test_moments_quantum_examples():
    st = moments_quantum(build_qubit(QubitParams(0.5, 0.8)))
    assert st.mu == pytest.approx(4.0, rel=1e-12)
    q = 0.5
    st = moments_quantum(build_qubit(QubitParams(q, 2 * q / (1 + q * q))))
    assert st.sigma2 == pytest.approx(20 / 9, rel=1e-10)
    assert len(st.pmf_prefix) > 0
    with pytest.raises(NoConvergence):
        moments_quantum(build_qubit(QubitParams(0.5, 1.0)), horizon_cap=2000)


def test_qubit_closed_examples():
    st = moments_qubit_closed(QubitParams(0.5, 0.8))
    assert st.mu == pytest.approx(4.0, rel=1e-14)
    assert st.sigma2 == pytest.approx(20 / 9, rel=1e-13)
    assert st.accuracy == pytest.approx(36 / 5, rel=1e-13)
    for mu in (4, 10, 100):
        q = 1 - 2 / mu
        R = moments_qubit_closed(QubitParams(q, 2 * q / (1 + q * q))).accuracy
        exact = Fraction(4 * mu * (mu - 1) ** 2, (mu - 2) * (mu * (mu - 2) + 2))
        assert R == pytest.approx(float(exact), rel=1e-11)
    with pytest.raises(DegenerateParams):
        moments_qubit_closed(QubitParams(1.0, 0.5))
    with pytest.raises(DegenerateParams):
        moments_qubit_closed(QubitParams(0.5, 1.0))


def test_qubit_family_accuracy_approaches_four():
    Rs = []
    for mu in (10, 100, 1000, 10000):
        q = 1 - 2 / mu
        Rs.append(moments_qubit_closed(QubitParams(q, 2 * q / (1 + q * q))).accuracy)
    assert all(a > b for a, b in zip(Rs, Rs[1:]))
    assert abs(Rs[-1] - 4) < 1e-3


def test_qubit_closed_matches_engine_on_grid():
    for q in np.linspace(0.05, 0.95, 10):
        for u in np.linspace(0.05, 0.95, 10):
            p = QubitParams(float(q), float(u))
            a = moments_qubit_closed(p)
            b = moments_quantum(build_qubit(p))
            assert abs(a.mu - b.mu) <= 1e-7 * max(1, b.mu)
            assert abs(a.sigma2 - b.sigma2) <= 1e-7 * max(1, b.sigma2)


def test_normalization_and_monotone_survival():
    models = [build_multicyclic(MulticyclicParams(d, k, q)) for d, k, q in
              [(1, 1, 0.9), (4, 2, 0.5), (6, 3, 0.8), (8, 8, 0.95)]]
    models.append(build_qubit(QubitParams(0.7, 0.6)))
    for m in models:
        p, f = pmf_series(m, 20000)
        assert f[-1] < 1e-9
        assert 1 - p.sum() <= f[-1] + 1e-12
        assert np.all(np.diff(f) <= 1e-12)
        assert np.all((p >= 0) & (p <= 1))


def test_resolvent_vs_truncated_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        d = int(rng.integers(1, 6))
        c = classical(random_substochastic(rng, d))
        a = moments_classical_resolvent(c)
        b, tail_mu, tail_m2 = moments_classical_truncated(c)
        assert abs(a.mu - b.mu) <= 1e-8 * max(1, a.mu) + tail_mu
        m2 = a.sigma2 + a.mu**2
        assert abs(m2 - (b.sigma2 + b.mu**2)) <= 1e-8 * max(1, m2) + tail_m2
        assert b.method is Method.TRUNCATED


def test_moments_batch_matches_resolvent():
    rng = np.random.default_rng(8)
    stack = np.stack([random_substochastic(rng, 3) for _ in range(50)])
    mu, sigma2 = moments_batch(stack)
    for T0, m, s in zip(stack, mu, sigma2):
        ref = moments_classical_resolvent(classical(T0))
        assert m == pytest.approx(ref.mu, rel=1e-10)
        assert s == pytest.approx(ref.sigma2, rel=1e-8, abs=1e-10)


def test_tick_statistics_dispatch_and_accuracy_field():
    st = tick_statistics(build_oneway(3, 0.4), pmf_terms=5)
    assert len(st.pmf_prefix) == 5
    assert st.accuracy == st.mu**2 / st.sigma2
    qs = tick_statistics(build_qubit(QubitParams(0.5, 0.8)))
    assert qs.mu == pytest.approx(moments_quantum_resolvent(build_qubit(QubitParams(0.5, 0.8))).mu)
    with pytest.raises(TypeError):
        tick_statistics("clock")


def test_pmf_series_consistent_with_single_values():
    c = build_multicyclic(MulticyclicParams(4, 2, 0.6))
    p, f = pmf_series_classical(c, 30)
    for L in range(1, 31):
        assert p[L - 1] == pytest.approx(pmf_classical(c, L), abs=1e-15)
        assert f[L - 1] == pytest.approx(survival_classical(c, L), abs=1e-15)
