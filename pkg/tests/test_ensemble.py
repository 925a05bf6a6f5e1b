import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enscontrol import (
    DltiSystem,
    RngStream,
    ZeroMassError,
    draw_ensemble,
    gamma_mat,
    gamma_vec,
    sample_matrix,
    sample_vector,
)

finite_vectors = st.lists(
    st.floats(-10, 10, allow_nan=False), min_size=1, max_size=12
).map(np.array)


def test_gamma_vec_examples():
    assert gamma_vec([0.6, -0.4]) == pytest.approx(1.0)
    assert gamma_vec(np.zeros(7)) == 0.0
    # direct summation oracle
    w = np.array([1.0, -2.0, 3.0])
    assert gamma_vec(w) == pytest.approx(sum(abs(v) for v in w)) == 6.0


def test_gamma_mat_examples():
    assert gamma_mat(np.eye(2)) == 1.0
    m = np.array([[1.0, -3.0], [2.0, 0.0]])
    per_column = [sum(abs(v) for v in m[:, j]) for j in range(2)]
    assert gamma_mat(m) == pytest.approx(max(per_column)) == 3.0
    stochastic = np.array([[0.2, 0.7], [0.8, 0.3]])
    assert gamma_mat(stochastic) == pytest.approx(1.0)


def test_gamma_rejects_non_finite():
    with pytest.raises(ValueError):
        gamma_vec([np.inf, 0.0])
    with pytest.raises(ValueError):
        gamma_mat([[np.nan]])


def test_sample_vector_two_point_support(rng):
    w = np.array([0.6, -0.4])
    seen = set()
    for d in range(50):
        s = sample_vector(w, rng, draw_index=d)
        assert s.dimension == 2
        assert s.gamma == pytest.approx(1.0)
        if s.support_index == 0:
            assert s.value == pytest.approx(1.0)
        else:
            assert s.value == pytest.approx(-1.0)
        seen.add(s.support_index)
    assert seen == {0, 1}


def test_sample_vector_single_atom(rng):
    for d in range(20):
        s = sample_vector([0.0, 5.0], rng, draw_index=d)
        assert (s.support_index, s.value) == (1, 5.0)


def test_sample_vector_zero_mass(rng):
    with pytest.raises(ZeroMassError):
        sample_vector(np.zeros(3), rng)


def test_exact_unbiasedness_by_enumeration(rng):
    # enumerate the sample space: outcome j occurs with probability
    # |w_j|/gamma and contributes sign(w_j)*gamma at component j
    gen = rng.generator()
    for _ in range(100):
        n = int(gen.integers(1, 13))
        w = gen.uniform(-1, 1, n)
        w[gen.random(n) < 0.2] = 0.0
        if not w.any():
            w[0] = 0.5
        gamma = gamma_vec(w)
        expectation = np.zeros(n)
        for j in range(n):
            p = abs(w[j]) / gamma
            outcome = np.zeros(n)
            outcome[j] = np.sign(w[j]) * gamma
            expectation += p * outcome
        assert np.abs(expectation - w).max() <= 1e-12


def test_draws_live_in_enumerated_sample_space(rng):
    w = np.array([0.3, 0.0, -0.7])
    allowed = {(0, 1.0), (2, -1.0)}
    for s in draw_ensemble(w, 200, rng):
        assert (s.support_index, round(s.value, 12)) in allowed


def test_sample_matrix_identity_fixed_point(rng):
    for d in range(10):
        s = sample_matrix(np.eye(3), rng, draw_index=d)
        assert np.array_equal(s.to_array(), np.eye(3))


def test_sample_matrix_two_point_column(rng):
    m = np.array([[0.5], [-0.5]])
    outcomes = set()
    for d in range(60):
        arr = sample_matrix(m, rng, draw_index=d).to_array()
        outcomes.add(tuple(arr.ravel()))
    assert outcomes == {(1.0, 0.0), (0.0, -1.0)}


def test_sample_matrix_zero_matrix(rng):
    s = sample_matrix(np.zeros((2, 2)), rng)
    assert np.array_equal(s.to_array(), np.zeros((2, 2)))
    assert np.all(s.support_rows == -1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 6), st.integers(2, 5))
def test_sparsity_preservation(seed, n, m):
    gen = np.random.default_rng(seed)
    mat = gen.uniform(-1, 1, (n, m))
    mat[:, : m // 2] *= gen.random((n, m // 2)) < 0.5
    mat[:, 0] = 0.0
    s = sample_matrix(mat, RngStream(seed % (2**64)))
    arr = s.to_array()
    assert np.all((arr != 0) <= (mat != 0))
    assert np.array_equal(arr[:, 0], np.zeros(n))


def test_draw_ensemble_deterministic_and_chunkable(rng):
    w = np.array([0.5, -0.5])
    full = draw_ensemble(w, 100, rng)
    again = draw_ensemble(w, 100, rng)
    assert full == again
    chunked = draw_ensemble(w, 64, rng) + draw_ensemble(w, 36, rng, start=64)
    assert full == chunked


def test_draw_ensemble_single_atom_replicates(rng):
    draws = draw_ensemble(np.array([1.0, 0.0]), 3, rng)
    assert all((s.support_index, s.value) == (0, 1.0) for s in draws)


def test_draw_ensemble_empirical_mean(rng):
    w = np.array([0.5, -0.5])
    n = 10_000
    draws = draw_ensemble(w, n, rng)
    mean = np.zeros(2)
    for s in draws:
        mean[s.support_index] += s.value
    mean /= n
    assert np.abs(mean - w).max() <= 4.0 * gamma_vec(w) / np.sqrt(n)


def test_draw_ensemble_matrix_column_expectation(rng):
    m = np.array([[0.25, 0.0], [-0.75, 1.0]])
    draws = draw_ensemble(m, 20_000, rng)
    mean = sum(s.to_array() for s in draws) / len(draws)
    assert np.abs(mean - m).max() <= 4.0 / np.sqrt(len(draws))


def test_draw_ensemble_propagates_zero_mass(rng):
    with pytest.raises(ZeroMassError):
        draw_ensemble(np.zeros(4), 5, rng)


def test_draw_ensemble_count_validation(rng):
    with pytest.raises(ValueError):
        draw_ensemble(np.ones(2), 0, rng)


def test_dlti_system_validation():
    with pytest.raises(ValueError):
        DltiSystem(np.zeros((2, 3)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        DltiSystem(np.eye(2), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        DltiSystem(np.full((2, 2), np.nan), np.zeros((2, 1)))
    sys2 = DltiSystem(np.eye(2), np.ones((2, 1)))
    states = sys2.simulate([1.0, 0.0], [[1.0], [2.0]])
    assert np.array_equal(states[-1], [4.0, 3.0])
