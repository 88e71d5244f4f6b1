"""User side of the simulation: true attraction weights and cascade clicks."""

from __future__ import annotations

from collections.abc import Collection, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class GroundTruthUser:
    user_id: int
    weights: NDArray[np.float64]
    optimal_list: tuple[int, ...]

    @property
    def optimal_reward(self) -> float:
        return expected_reward(self.optimal_list, self.weights)


@dataclass(frozen=True)
class ClickOutcome:
    """Result of showing a list to a cascade-model user.

    ``click_position`` is 1-based; ``None`` means the whole list was examined
    without a click.
    """

    examined: tuple[int, ...]
    click_position: int | None = None

    @property
    def clicked(self) -> bool:
        return self.click_position is not None


def optimal_list(weights: ArrayLike, K: int) -> tuple[int, ...]:
    """The ``K`` heaviest items, heaviest first, ties by ascending item id.

    Since ``1 - prod(1 - w)`` increases in every weight, this set maximizes the
    expected cascade reward over all ``K``-subsets.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if K < 1:
        raise ValueError("K must be positive")
    if K > weights.size:
        raise ValueError(f"K={K} exceeds the number of items ({weights.size})")
    order = np.argsort(-weights, kind="stable")
    return tuple(int(i) for i in order[:K])


def _check_list(items: Sequence[int], num_items: int) -> list[int]:
    items = [int(i) for i in items]
    if len(set(items)) != len(items):
        raise ValueError("list items must be distinct")
    for i in items:
        if not 0 <= i < num_items:
            raise KeyError(f"unknown item {i}")
    return items


def expected_reward(items: Sequence[int], weights: ArrayLike) -> float:
    """Probability of a click on ``items``: ``1 - prod_k (1 - w[a_k])``."""
    weights = np.asarray(weights, dtype=np.float64)
    items = _check_list(items, weights.size)
    # product over the ascending-sorted factors: order-invariant and monotone
    # in each weight even after rounding, so regret against the top-K list is >= 0
    miss = np.sort(1.0 - weights[items])
    return float(1.0 - np.prod(miss))


def click_probabilities(items: Sequence[int], weights: ArrayLike) -> NDArray[np.float64]:
    """Analytic cascade distribution over click positions.

    Returns an array of length ``K + 1``: entry ``k-1`` is the probability of a
    click at position ``k`` and the last entry is the no-click probability.
    """
    weights = np.asarray(weights, dtype=np.float64)
    w = weights[_check_list(items, weights.size)]
    survive = np.concatenate([[1.0], np.cumprod(1.0 - w)])
    return np.concatenate([w * survive[:-1], survive[-1:]])


def sample_cascade(
    items: Sequence[int], weights: ArrayLike, rng: np.random.Generator
) -> ClickOutcome:
    """Scan ``items`` top-down and click the first attractive one.

    One uniform draw is consumed per position regardless of where the click
    lands, so the random stream advances identically for every list.
    """
    weights = np.asarray(weights, dtype=np.float64)
    items = tuple(int(i) for i in items)
    attractive = rng.random(len(items)) < weights[list(items)]
    hits = np.flatnonzero(attractive)
    if hits.size == 0:
        return ClickOutcome(examined=items, click_position=None)
    k = int(hits[0]) + 1
    return ClickOutcome(examined=items[:k], click_position=k)


def step_regret(chosen: Sequence[int], gt: GroundTruthUser) -> float:
    return gt.optimal_reward - expected_reward(chosen, gt.weights)


def fit_ground_truth(
    liked: Collection[int],
    features: ArrayLike,
    K: int,
    *,
    reg: float = 1.0,
    exclude: Collection[int] = (),
    num_negatives: int | None = None,
    rng: np.random.Generator | None = None,
    user_id: int = -1,
) -> GroundTruthUser:
    """Fit true attraction weights for one user.

    A ridge regression without intercept maps item features to the binary
    held-out profile: ``y = 1`` on ``liked`` items and ``y = 0`` on the negative
    pool (every other item not in ``exclude``, optionally subsampled to
    ``num_negatives`` items). Predictions for the whole catalog are clipped to
    ``[0, 1]``.

    Parameters
    ----------
    liked : collection of int
        Items the user liked in the held-out half.
    features : array of shape (num_items, d)
        Item features in the same linear form the learner assumes.
    K : int
        List length of the optimal list.
    reg : float
        Ridge regularizer of the offline fit.
    exclude : collection of int
        Items that are neither positive nor negative (e.g. training positives).
    num_negatives : int, optional
        Subsample size of the negative pool; ``None`` uses all of it.
    rng : numpy Generator, optional
        Needed only when subsampling negatives.
    user_id : int
        Carried into the result.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("empty catalog")
    if not reg > 0:
        raise ValueError("reg must be positive")
    num_items, dim = features.shape
    positives = np.array(sorted(set(int(i) for i in liked)), dtype=np.int64)
    if positives.size and (positives[0] < 0 or positives[-1] >= num_items):
        raise KeyError("liked items outside the catalog")

    blocked = np.zeros(num_items, dtype=bool)
    blocked[positives] = True
    blocked[[int(i) for i in exclude]] = True
    negatives = np.flatnonzero(~blocked)
    if num_negatives is not None and num_negatives < negatives.size:
        if rng is None:
            raise ValueError("rng is required to subsample negatives")
        negatives = np.sort(rng.choice(negatives, size=num_negatives, replace=False))

    rows = np.concatenate([positives, negatives])
    x = features[rows]
    y = np.concatenate([np.ones(positives.size), np.zeros(negatives.size)])
    theta = np.linalg.solve(x.T @ x + reg * np.eye(dim), x.T @ y)
    weights = np.clip(features @ theta, 0.0, 1.0)
    weights.setflags(write=False)
    return GroundTruthUser(
        user_id=user_id, weights=weights, optimal_list=optimal_list(weights, K)
    )
