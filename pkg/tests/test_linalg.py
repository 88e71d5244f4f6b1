import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cascadebench.linalg import (
    REFACTOR_EVERY,
    ridge_init,
    ridge_theta,
    ridge_update,
    ucb_width,
    ucb_widths,
)


def test_init_identity():
    s = ridge_init(2, 1.0)
    np.testing.assert_array_equal(s.gram, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(s.response, [0, 0])


def test_init_scalar_inverse():
    np.testing.assert_array_equal(ridge_init(1, 0.5).gram_inv, [[2.0]])


def test_init_zero_theta():
    np.testing.assert_array_equal(ridge_theta(ridge_init(3, 2.0)), [0, 0, 0])


@pytest.mark.parametrize("dim, reg", [(0, 1.0), (2, 0.0), (2, -1.0), (1.5, 1.0)])
def test_init_rejects(dim, reg):
    with pytest.raises(ValueError):
        ridge_init(dim, reg)


def test_single_update_closed_form():
    s = ridge_update(ridge_init(2, 1.0), [1.0, 0.0], 1.0)
    np.testing.assert_array_equal(s.gram, [[2, 0], [0, 1]])
    np.testing.assert_array_equal(s.response, [1, 0])
    np.testing.assert_allclose(ridge_theta(s), [0.5, 0.0])
    np.testing.assert_allclose(ridge_theta(s), np.linalg.solve(s.gram, s.response))


def test_zero_vector_update_is_noop():
    rng = np.random.default_rng(0)
    s = ridge_init(3)
    for _ in range(5):
        ridge_update(s, rng.normal(size=3), 1.0)
    before = s.copy()
    ridge_update(s, np.zeros(3), 1.0)
    np.testing.assert_array_equal(s.gram, before.gram)
    np.testing.assert_array_equal(s.gram_inv, before.gram_inv)
    np.testing.assert_array_equal(s.response, before.response)
    assert s.num_updates == before.num_updates


def test_update_rejects_bad_input():
    s = ridge_init(2)
    with pytest.raises(ValueError):
        ridge_update(s, [np.nan, 0.0], 1.0)
    with pytest.raises(ValueError):
        ridge_update(s, [1.0, 0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        ucb_width(s, [1.0])


def test_fifty_updates_match_direct_inverse():
    rng = np.random.default_rng(1)
    s = ridge_init(8)
    for _ in range(50):
        ridge_update(s, rng.normal(size=8), float(rng.integers(0, 2)))
    assert np.max(np.abs(s.gram_inv - np.linalg.inv(s.gram))) <= 1e-8


@pytest.mark.parametrize("dim", [1, 5, 32])
def test_long_sequence_keeps_identity_invariant(dim):
    rng = np.random.default_rng(dim)
    s = ridge_init(dim)
    for k in range(2 * REFACTOR_EVERY + 7):
        ridge_update(s, rng.normal(size=dim), float(rng.integers(0, 2)))
        if k % 97 == 0:
            assert np.max(np.abs(s.gram @ s.gram_inv - np.eye(dim))) <= 1e-6
    assert np.max(np.abs(s.gram_inv - np.linalg.inv(s.gram))) <= 1e-8
    assert np.all(np.linalg.eigvalsh(s.gram) >= s.reg - 1e-9)


def test_theta_recovers_noiseless_linear_model():
    rng = np.random.default_rng(2)
    theta_star = rng.normal(size=5)
    s = ridge_init(5, 1e-6)
    for _ in range(100):
        x = rng.normal(size=5)
        ridge_update(s, x, float(theta_star @ x))
    np.testing.assert_allclose(ridge_theta(s), theta_star, atol=1e-3)


def test_width_examples():
    assert ucb_width(ridge_init(2, 1.0), [1.0, 0.0]) == 1.0
    assert ucb_width(ridge_init(2, 1.0), [0.0, 0.0]) == 0.0
    assert ucb_width(ridge_init(2, 4.0), [2.0, 0.0]) == pytest.approx(1.0)


def test_vectorized_widths_match_scalar():
    rng = np.random.default_rng(3)
    s = ridge_init(4)
    for _ in range(20):
        ridge_update(s, rng.normal(size=4), 0.0)
    X = rng.normal(size=(9, 4))
    np.testing.assert_allclose(ucb_widths(s, X), [ucb_width(s, x) for x in X], rtol=1e-12)


vectors = arrays(np.float64, 4, elements=st.floats(-3, 3))


@settings(max_examples=60, deadline=None)
@given(st.lists(vectors, min_size=1, max_size=15), vectors)
def test_width_never_grows_after_update(updates, probe):
    s = ridge_init(4)
    for u in updates:
        before = ucb_width(s, probe)
        ridge_update(s, u, 1.0)
        assert ucb_width(s, probe) <= before + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(vectors, st.integers(0, 1)), min_size=1, max_size=20))
def test_clipped_estimates_in_unit_interval(obs):
    s = ridge_init(4, 1.0)
    for x, y in obs:
        ridge_update(s, x, float(y))
    est = np.clip(np.array([x for x, _ in obs]) @ ridge_theta(s), 0.0, 1.0)
    assert np.all((est >= 0) & (est <= 1))
