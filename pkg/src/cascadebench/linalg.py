"""Incremental ridge regression with UCB widths.

All three cascading policies share this core: a Gram matrix ``M = reg*I + sum x x^T``,
a response vector ``B = sum y x`` and a cached ``M^{-1}`` kept current by rank-one
Sherman-Morrison updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

#: Number of rank-one updates between full re-inversions of the Gram matrix.
REFACTOR_EVERY = 512


@dataclass
class RidgeState:
    """Sufficient statistics of a ridge regression problem.

    Attributes
    ----------
    dim : int
        Feature dimension.
    gram : ndarray of shape (dim, dim)
        ``reg * I + sum_s x_s x_s^T``.
    gram_inv : ndarray of shape (dim, dim)
        Cached inverse of ``gram``.
    response : ndarray of shape (dim,)
        ``sum_s y_s x_s``.
    reg : float
        Ridge regularizer.
    num_updates : int
        Non-trivial updates applied so far.
    """

    dim: int
    gram: NDArray[np.float64]
    gram_inv: NDArray[np.float64]
    response: NDArray[np.float64]
    reg: float
    num_updates: int = 0

    def copy(self) -> "RidgeState":
        return RidgeState(
            self.dim,
            self.gram.copy(),
            self.gram_inv.copy(),
            self.response.copy(),
            self.reg,
            self.num_updates,
        )


def ridge_init(dim: int, reg: float = 1.0) -> RidgeState:
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    if not reg > 0:
        raise ValueError(f"reg must be positive, got {reg!r}")
    dim = int(dim)
    reg = float(reg)
    return RidgeState(
        dim=dim,
        gram=reg * np.eye(dim),
        gram_inv=np.eye(dim) / reg,
        response=np.zeros(dim),
        reg=reg,
    )


def _as_vector(state: RidgeState, x: ArrayLike) -> NDArray[np.float64]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise ValueError(f"expected a vector of shape ({state.dim},), got {x.shape}")
    return x


def ridge_update(state: RidgeState, x: ArrayLike, y: float) -> RidgeState:
    """Add one observation ``(x, y)`` to ``state`` in place and return it.

    The inverse is maintained by the Sherman-Morrison identity and recomputed
    from the Gram matrix every :data:`REFACTOR_EVERY` updates to bound drift.
    A zero feature vector carries no information and leaves the state untouched.
    """
    x = _as_vector(state, x)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains non-finite entries")
    if not np.isfinite(y):
        raise ValueError(f"observation must be finite, got {y!r}")
    if not x.any():
        return state

    state.gram += np.outer(x, x)
    state.response += y * x
    state.num_updates += 1
    if state.num_updates % REFACTOR_EVERY == 0:
        state.gram_inv = np.linalg.inv(state.gram)
        # inv() of a symmetric matrix is only symmetric up to rounding
        state.gram_inv = 0.5 * (state.gram_inv + state.gram_inv.T)
    else:
        mx = state.gram_inv @ x
        state.gram_inv -= np.outer(mx, mx) / (1.0 + x @ mx)
    return state


def ridge_theta(state: RidgeState) -> NDArray[np.float64]:
    """Ridge estimate ``gram_inv @ response``."""
    return state.gram_inv @ state.response


def ucb_width(state: RidgeState, x: ArrayLike) -> float:
    """Confidence width ``sqrt(x^T M^{-1} x)`` of a single feature vector."""
    x = _as_vector(state, x)
    return float(np.sqrt(max(x @ state.gram_inv @ x, 0.0)))


def ucb_widths(state: RidgeState, features: NDArray[np.float64]) -> NDArray[np.float64]:
    """Row-wise :func:`ucb_width` for a ``(n, dim)`` feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != state.dim:
        raise ValueError(f"expected shape (n, {state.dim}), got {features.shape}")
    quad = np.einsum("ij,ij->i", features @ state.gram_inv, features)
    return np.sqrt(np.maximum(quad, 0.0))
