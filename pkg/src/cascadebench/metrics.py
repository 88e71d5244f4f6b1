"""Performance and exposure-fairness metrics over simulation logs."""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

PERMUTATION_RESAMPLES = 100_000
EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class ImpressionCounts:
    """Recommendation counts of one run.

    Attributes
    ----------
    per_user_item : ndarray of shape (num_users, num_items)
        How often each item was shown to each simulated user.
    supplier_of : ndarray of shape (num_items,)
        Supplier index of every item.
    num_suppliers : int
        Number of distinct suppliers in the catalog.
    """

    per_user_item: NDArray[np.int64]
    supplier_of: NDArray[np.int64]
    num_suppliers: int

    def __post_init__(self) -> None:
        if self.per_user_item.ndim != 2:
            raise ValueError("per_user_item must be 2-d")
        if self.supplier_of.shape != (self.num_items,):
            raise ValueError("every item needs a supplier")
        if self.supplier_of.size and (
            self.supplier_of.min() < 0 or self.supplier_of.max() >= self.num_suppliers
        ):
            raise ValueError("supplier index out of range")

    @property
    def num_users(self) -> int:
        return self.per_user_item.shape[0]

    @property
    def num_items(self) -> int:
        return self.per_user_item.shape[1]

    @property
    def per_item(self) -> NDArray[np.int64]:
        return self.per_user_item.sum(axis=0)

    def merge(self, other: "ImpressionCounts") -> "ImpressionCounts":
        """Stack the users of two runs over the same catalog."""
        if not np.array_equal(self.supplier_of, other.supplier_of):
            raise ValueError("cannot merge counts over different catalogs")
        return ImpressionCounts(
            np.vstack([self.per_user_item, other.per_user_item]),
            self.supplier_of,
            self.num_suppliers,
        )


def cumulative_regret(step_regrets: ArrayLike) -> NDArray[np.float64]:
    step_regrets = np.asarray(step_regrets, dtype=np.float64)
    if np.any(step_regrets < 0):
        raise ValueError("negative step regret")
    return np.cumsum(step_regrets)


def item_coverage(counts: ImpressionCounts) -> float:
    """Fraction of items shown at least once to any user."""
    return float(np.count_nonzero(counts.per_item) / counts.num_items)


def supplier_coverage(counts: ImpressionCounts) -> float:
    shown = counts.supplier_of[counts.per_item > 0]
    return float(np.unique(shown).size / counts.num_suppliers)


def user_item_coverage(counts: ImpressionCounts) -> float:
    """Mean over users of the fraction of items each user was shown."""
    if counts.num_users == 0:
        raise ValueError("no simulated users")
    seen = np.count_nonzero(counts.per_user_item, axis=1)
    return float(np.mean(seen / counts.num_items))


def gini(frequencies: ArrayLike) -> float:
    """Gini index of an exposure distribution; 0 means perfectly uniform.

    Uses the sorted-index form ``sum_i (2i - L - 1) x_(i) / (L * sum x)``.
    """
    x = np.sort(np.asarray(frequencies, dtype=np.float64))
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    if np.any(x < 0):
        raise ValueError("frequencies must be non-negative")
    total = x.sum()
    if total <= 0:
        raise ValueError("Gini index is undefined for an all-zero distribution")
    n = x.size
    ranks = np.arange(1, n + 1)
    return float(np.sum((2 * ranks - n - 1) * x) / (n * total))


def exposure_distribution(counts: ImpressionCounts) -> list[tuple[int, int]]:
    return [(i, int(c)) for i, c in enumerate(counts.per_item)]


def significance_test(
    samples_a: Sequence[float], samples_b: Sequence[float], seed: int = 0
) -> float:
    """Two-sided permutation test on the difference of means.

    Enumerates every relabelling when there are at most 12 samples in total,
    otherwise draws 100k random relabellings from a fixed seed.
    """
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least two samples per side")
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    observed = abs(a.mean() - b.mean())
    # relabellings whose statistic ties the observed one up to rounding count as extreme
    tol = 1e-12 * max(1.0, float(np.abs(pooled).max()))
    total = pooled.sum()

    if n <= EXHAUSTIVE_LIMIT:
        hits = 0
        for idx in itertools.combinations(range(n), na):
            sa = pooled[list(idx)].sum()
            hits += abs(sa / na - (total - sa) / (n - na)) >= observed - tol
        return float(hits / math.comb(n, na))

    rng = np.random.default_rng(seed)
    hits = 0
    for chunk in np.array_split(np.arange(PERMUTATION_RESAMPLES), 20):
        perms = rng.permuted(np.tile(pooled, (chunk.size, 1)), axis=1)
        sa = perms[:, :na].sum(axis=1)
        diff = np.abs(sa / na - (total - sa) / (n - na))
        hits += int(np.count_nonzero(diff >= observed - tol))
    return (hits + 1) / (PERMUTATION_RESAMPLES + 1)
