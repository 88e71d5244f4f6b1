"""Item feature families consumed by the cascading policies.

Two families are built here:

* topic coverage vectors, whose list-conditional gains are the features of the
  diversity-seeking policy (LSB);
* truncated-SVD relevance vectors learned from the training interactions, the
  features of the relevance-seeking policy (LinUCB).

The hybrid policy concatenates a relevance vector with a topic gain.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class TopicProfile:
    """Per-item topic coverage probabilities, shape ``(num_items, num_topics)``."""

    num_topics: int
    coverage: NDArray[np.float64]

    @property
    def num_items(self) -> int:
        return self.coverage.shape[0]

    def vector(self, item: int) -> NDArray[np.float64]:
        _check_item(item, self.num_items)
        return self.coverage[item]


@dataclass(frozen=True)
class RelevanceProfile:
    """Unit-norm item embeddings, shape ``(num_items, rank)``; all-zero rows allowed."""

    rank: int
    vectors: NDArray[np.float64]

    @property
    def num_items(self) -> int:
        return self.vectors.shape[0]

    def vector(self, item: int) -> NDArray[np.float64]:
        _check_item(item, self.num_items)
        return self.vectors[item]


def _check_item(item: int, num_items: int) -> None:
    if not 0 <= item < num_items:
        raise KeyError(f"unknown item {item!r} (catalog has {num_items} items)")


def build_topic_profiles(
    genre_map: Mapping[int, Iterable[int]],
    num_topics: int,
    scale: float = 1.0,
    num_items: int | None = None,
) -> TopicProfile:
    """Spread ``scale`` evenly over each item's topics.

    Parameters
    ----------
    genre_map : mapping of item index -> topic ids
        Items absent from the mapping (or with empty sets) get zero vectors.
    num_topics : int
        Number of topics.
    scale : float in (0, 1]
        Total coverage mass of an item.
    num_items : int, optional
        Catalog size; defaults to ``max(genre_map) + 1``.
    """
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must lie in (0, 1], got {scale!r}")
    if num_topics < 1:
        raise ValueError("num_topics must be positive")
    if num_items is None:
        num_items = max(genre_map, default=-1) + 1
    coverage = np.zeros((num_items, num_topics))
    for item, topics in genre_map.items():
        _check_item(item, num_items)
        topics = sorted(set(topics))
        if not topics:
            continue
        if topics[0] < 0 or topics[-1] >= num_topics:
            raise ValueError(f"item {item} has topic ids outside [0, {num_topics})")
        coverage[item, topics] = scale / len(topics)
    coverage.setflags(write=False)
    return TopicProfile(num_topics=num_topics, coverage=coverage)


def list_coverage(items: Sequence[int], profile: TopicProfile) -> NDArray[np.float64]:
    """Noisy-or coverage ``1 - prod_a (1 - coverage[a])`` of a list of items."""
    items = list(items)
    if len(set(items)) != len(items):
        raise ValueError("items must be distinct")
    for item in items:
        _check_item(item, profile.num_items)
    if not items:
        return np.zeros(profile.num_topics)
    # sorting the factors makes the product independent of list order
    miss = np.sort(1.0 - profile.coverage[items], axis=0)
    return 1.0 - np.prod(miss, axis=0)


def topic_gain(
    item: int, prefix_coverage: ArrayLike, profile: TopicProfile
) -> NDArray[np.float64]:
    """Coverage gained by appending ``item`` to a list with ``prefix_coverage``."""
    prefix_coverage = np.asarray(prefix_coverage, dtype=np.float64)
    return (1.0 - prefix_coverage) * profile.vector(item)


def topic_gains(prefix_coverage: ArrayLike, profile: TopicProfile) -> NDArray[np.float64]:
    """:func:`topic_gain` for every item at once, shape ``(num_items, num_topics)``."""
    return (1.0 - np.asarray(prefix_coverage, dtype=np.float64)) * profile.coverage


def truncated_svd(
    matrix: ArrayLike, rank: int
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Top-``rank`` SVD factors ``(U, s, Vt)`` with a deterministic sign.

    Each right singular vector is flipped so that its largest-magnitude entry
    is positive; the matching left vector is flipped with it, so ``U @ diag(s) @ Vt``
    is unchanged.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if int(rank) != rank or not 1 <= rank <= min(matrix.shape):
        raise ValueError(f"rank must lie in [1, {min(matrix.shape)}], got {rank!r}")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(rank), pivot])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def build_svd_features(train_matrix: ArrayLike, rank: int = 10) -> RelevanceProfile:
    """Item embeddings from a ``(users, items)`` interaction matrix.

    Item ``i`` gets ``s * Vt[:, i]`` restricted to the top ``rank`` components,
    normalized to unit length. Items with no interactions keep a zero vector.
    """
    _, s, vt = truncated_svd(train_matrix, rank)
    vectors = (vt * s[:, None]).T
    norms = np.linalg.norm(vectors, axis=1)
    # rows that are zero up to rounding stay exactly zero
    tol = max(float(s[0]) if s.size else 0.0, 1.0) * 1e-10
    nonzero = norms > tol
    vectors[~nonzero] = 0.0
    vectors[nonzero] /= norms[nonzero, None]
    vectors.setflags(write=False)
    return RelevanceProfile(rank=int(rank), vectors=vectors)


def hybrid_feature(
    item: int,
    prefix_coverage: ArrayLike,
    topic_profile: TopicProfile,
    relevance_profile: RelevanceProfile,
) -> NDArray[np.float64]:
    return np.concatenate(
        [relevance_profile.vector(item), topic_gain(item, prefix_coverage, topic_profile)]
    )
