import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadebench.features import (
    build_svd_features,
    build_topic_profiles,
    hybrid_feature,
    list_coverage,
    topic_gain,
    topic_gains,
    truncated_svd,
    RelevanceProfile,
)


def test_topic_profile_even_split():
    p = build_topic_profiles({0: {0, 1}, 1: set(), 2: {2}}, num_topics=3)
    np.testing.assert_allclose(p.vector(0), [0.5, 0.5, 0.0])
    np.testing.assert_array_equal(p.vector(1), [0, 0, 0])


def test_topic_profile_scale():
    p = build_topic_profiles({0: {2}}, num_topics=3, scale=0.8)
    np.testing.assert_allclose(p.vector(0), [0, 0, 0.8])


@pytest.mark.parametrize("scale", [0.0, 1.5, -0.1])
def test_topic_profile_rejects_scale(scale):
    with pytest.raises(ValueError):
        build_topic_profiles({0: {0}}, 1, scale=scale)


def test_topic_profile_rejects_unknown_topic():
    with pytest.raises(ValueError):
        build_topic_profiles({0: {3}}, num_topics=3)


@pytest.fixture
def two_items():
    from cascadebench.features import TopicProfile

    return TopicProfile(2, np.array([[0.5, 0.0], [0.4, 1.0]]))


def test_list_coverage_examples(two_items):
    np.testing.assert_array_equal(list_coverage([], two_items), [0, 0])
    np.testing.assert_allclose(list_coverage([1], two_items), [0.4, 1.0])
    np.testing.assert_allclose(list_coverage([0, 1], two_items), [0.7, 1.0])


def test_list_coverage_errors(two_items):
    with pytest.raises(KeyError):
        list_coverage([5], two_items)
    with pytest.raises(ValueError):
        list_coverage([0, 0], two_items)


def test_topic_gain_examples(two_items):
    np.testing.assert_allclose(topic_gain(1, [0, 0], two_items), [0.4, 1.0])
    np.testing.assert_array_equal(topic_gain(1, [1.0, 0.0], two_items)[0], 0.0)
    np.testing.assert_allclose(topic_gain(1, [0.5, 0.0], two_items), [0.2, 1.0])
    with pytest.raises(KeyError):
        topic_gain(2, [0, 0], two_items)


def _random_profile(rng, num_items=7, num_topics=4):
    genre_map = {
        i: set(rng.choice(num_topics, size=rng.integers(0, 3), replace=False).tolist())
        for i in range(num_items)
    }
    return build_topic_profiles(genre_map, num_topics, scale=float(rng.uniform(0.1, 1.0)))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coverage_properties(seed):
    rng = np.random.default_rng(seed)
    p = _random_profile(rng)
    order = rng.permutation(p.num_items)
    k = int(rng.integers(0, p.num_items))
    prefix, item = order[:k].tolist(), int(order[k])
    cov = list_coverage(prefix, p)
    gain = topic_gain(item, cov, p)
    # closed-form identity, monotonicity, gain bounds, permutation invariance
    np.testing.assert_allclose(cov + gain, list_coverage(prefix + [item], p), atol=1e-12)
    assert np.all(list_coverage(prefix + [item], p) >= cov)
    assert np.all(gain >= 0) and np.all(gain <= p.vector(item))
    np.testing.assert_allclose(list_coverage(prefix[::-1], p), cov, atol=0)
    np.testing.assert_allclose(topic_gains(cov, p)[item], gain)


def test_svd_identity_gives_basis_vectors():
    prof = build_svd_features(np.eye(3), rank=3)
    mags = np.abs(prof.vectors)
    np.testing.assert_allclose(np.sort(mags, axis=1), [[0, 0, 1]] * 3, atol=1e-12)
    np.testing.assert_allclose(mags.sum(axis=0), [1, 1, 1], atol=1e-12)


def test_svd_zero_matrix():
    prof = build_svd_features(np.zeros((4, 5)), rank=2)
    np.testing.assert_array_equal(prof.vectors, np.zeros((5, 2)))


def test_svd_rank_one():
    u = np.array([1.0, 2.0, 0.5])
    v = np.array([3.0, 0.0, -1.0, 2.0])
    prof = build_svd_features(np.outer(u, v), rank=1)
    # largest-magnitude entry of v is positive, so signs follow v
    np.testing.assert_allclose(prof.vectors[:, 0], [1.0, 0.0, -1.0, 1.0], atol=1e-12)


def test_svd_sign_convention_flips():
    prof = build_svd_features(np.outer([1.0, 1.0], [-3.0, 1.0]), rank=1)
    np.testing.assert_allclose(prof.vectors[:, 0], [1.0, -1.0])


@pytest.mark.parametrize("rank", [0, 4])
def test_svd_rejects_rank(rank):
    with pytest.raises(ValueError):
        build_svd_features(np.ones((3, 3)), rank=rank)


@pytest.mark.parametrize("shape", [(5, 9), (40, 64), (64, 64)])
def test_svd_full_rank_reconstruction(shape):
    rng = np.random.default_rng(shape[0])
    m = (rng.random(shape) < 0.2).astype(float)
    u, s, vt = truncated_svd(m, min(shape))
    assert np.linalg.norm(u @ np.diag(s) @ vt - m) <= 1e-6
    # independent oracle: numpy's own dense factorization
    assert np.allclose(s, np.linalg.svd(m, compute_uv=False))


def test_svd_unit_norm_rows():
    rng = np.random.default_rng(5)
    m = (rng.random((30, 20)) < 0.15).astype(float)
    m[:, 3] = 0.0
    prof = build_svd_features(m, rank=6)
    norms = np.linalg.norm(prof.vectors, axis=1)
    assert norms[3] == 0.0
    others = np.delete(norms, 3)
    assert np.all(np.abs(others - 1.0) <= 1e-9)


def test_hybrid_feature():
    from cascadebench.features import TopicProfile

    topic = TopicProfile(2, np.array([[0.4, 1.0], [0.5, 0.0]]))
    rel = RelevanceProfile(2, np.array([[1.0, 0.0], [0.0, 0.0]]))
    np.testing.assert_allclose(hybrid_feature(0, [0.5, 0.0], topic, rel), [1, 0, 0.2, 1.0])
    np.testing.assert_allclose(hybrid_feature(0, [0, 0], topic, rel), [1, 0, 0.4, 1.0])
    np.testing.assert_array_equal(hybrid_feature(1, [0, 0], topic, rel)[:2], [0, 0])
    with pytest.raises(KeyError):
        hybrid_feature(2, [0, 0], topic, rel)
