"""Cascading UCB policies with an optional exposure discount.

Every policy scores an item by ``clip(estimate) + c * UCB width``. The unbiased
variants shrink the exploration term by ``1 - N_i / t``, where ``N_i`` counts how
often item ``i`` was already recommended to the same user in the previous
``t - 1`` steps. Only the exploration term is discounted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .clickmodel import ClickOutcome
from .features import RelevanceProfile, TopicProfile, topic_gains
from .linalg import RidgeState, ridge_init, ridge_theta, ridge_update, ucb_widths


class PolicyKind(str, enum.Enum):
    LSB = "LSB"
    LINUCB = "LinUCB"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind
    c: float = 1.0
    K: int = 4
    unbiased: bool = False
    reg: float = 1.0
    clip_attraction: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.c < 0:
            raise ValueError(f"exploration coefficient must be >= 0, got {self.c}")
        if self.K < 1:
            raise ValueError("K must be positive")
        if not self.reg > 0:
            raise ValueError("reg must be positive")

    @property
    def label(self) -> str:
        name = f"Cascade{self.kind.value}"
        return f"Unbiased{name}" if self.unbiased else name


@dataclass
class ExposureLedger:
    """Per-user recommendation counts; ``step`` is the index of the next step."""

    counts: NDArray[np.int64]
    step: int = 1

    @classmethod
    def fresh(cls, num_items: int) -> "ExposureLedger":
        return cls(counts=np.zeros(num_items, dtype=np.int64), step=1)


@dataclass(frozen=True)
class SelectionTrace:
    """A chosen list and the exact feature vector scored at each position."""

    items: tuple[int, ...]
    features: NDArray[np.float64] = field(repr=False)


def discount_factor(n_i: int, t: int) -> float:
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if not 0 <= n_i <= t:
        raise ValueError(f"exposure count must lie in [0, t], got n_i={n_i}, t={t}")
    return 1.0 - n_i / t


def utility(
    attraction_estimate: float,
    width: float,
    cfg: PolicyConfig,
    ledger: ExposureLedger,
    item: int,
    t: int | None = None,
) -> float:
    """Score of a single item; ``t`` defaults to the ledger's current step."""
    if width < 0:
        raise ValueError("width must be non-negative")
    t = ledger.step if t is None else t
    estimate = attraction_estimate
    if cfg.clip_attraction:
        estimate = min(max(estimate, 0.0), 1.0)
    discount = discount_factor(int(ledger.counts[item]), t) if cfg.unbiased else 1.0
    return estimate + cfg.c * width * discount


def utilities(
    estimates: NDArray[np.float64],
    widths: NDArray[np.float64],
    cfg: PolicyConfig,
    counts: NDArray[np.int64],
    t: int,
) -> NDArray[np.float64]:
    """Vectorized :func:`utility` over all items."""
    if cfg.clip_attraction:
        estimates = np.clip(estimates, 0.0, 1.0)
    bonus = cfg.c * widths
    if cfg.unbiased:
        bonus = bonus * (1.0 - counts / t)
    return estimates + bonus


def _check_capacity(cfg: PolicyConfig, num_items: int) -> None:
    if cfg.K > num_items:
        raise ValueError(f"K={cfg.K} exceeds the catalog size ({num_items})")


def select_linucb(
    ridge: RidgeState,
    relevance: RelevanceProfile,
    cfg: PolicyConfig,
    ledger: ExposureLedger,
    t: int | None = None,
) -> SelectionTrace:
    """Top-``K`` items by utility over static relevance features."""
    t = ledger.step if t is None else t
    x = relevance.vectors
    _check_capacity(cfg, x.shape[0])
    scores = utilities(x @ ridge_theta(ridge), ucb_widths(ridge, x), cfg, ledger.counts, t)
    chosen = np.argsort(-scores, kind="stable")[: cfg.K]
    return SelectionTrace(tuple(int(i) for i in chosen), x[chosen].copy())


def select_greedy_gain(
    ridge: RidgeState,
    topic: TopicProfile,
    relevance: RelevanceProfile | None,
    cfg: PolicyConfig,
    ledger: ExposureLedger,
    t: int | None = None,
) -> SelectionTrace:
    """Build the list one position at a time on prefix-dependent topic gains.

    With ``relevance`` given, each candidate's feature is the relevance vector
    followed by its topic gain (hybrid); otherwise the topic gain alone (LSB).
    """
    t = ledger.step if t is None else t
    num_items = topic.num_items
    _check_capacity(cfg, num_items)
    theta = ridge_theta(ridge)
    taken = np.zeros(num_items, dtype=bool)
    prefix = np.zeros(topic.num_topics)
    items: list[int] = []
    rows: list[NDArray[np.float64]] = []
    for _ in range(cfg.K):
        gains = topic_gains(prefix, topic)
        x = gains if relevance is None else np.hstack([relevance.vectors, gains])
        scores = utilities(x @ theta, ucb_widths(ridge, x), cfg, ledger.counts, t)
        scores[taken] = -np.inf
        best = int(np.argmax(scores))
        taken[best] = True
        items.append(best)
        rows.append(x[best].copy())
        prefix = prefix + gains[best]
    return SelectionTrace(tuple(items), np.vstack(rows))


def update_from_feedback(
    ridge: RidgeState, trace: SelectionTrace, outcome: ClickOutcome
) -> RidgeState:
    """Apply cascade feedback: examined items above the click are negatives."""
    k = len(outcome.examined)
    if k == 0 or outcome.examined != trace.items[:k]:
        raise ValueError("outcome does not match the shown list")
    if outcome.click_position is None:
        if k != len(trace.items):
            raise ValueError("a list without a click must be examined in full")
    elif outcome.click_position != k:
        raise ValueError("click position must be the last examined position")
    for pos in range(k):
        y = 1.0 if outcome.click_position == pos + 1 else 0.0
        ridge_update(ridge, trace.features[pos], y)
    return ridge


def record_exposure(ledger: ExposureLedger, trace: SelectionTrace) -> ExposureLedger:
    ledger.counts[list(trace.items)] += 1
    ledger.step += 1
    return ledger


def feature_dim(
    kind: PolicyKind, topic: TopicProfile | None, relevance: RelevanceProfile | None
) -> int:
    kind = PolicyKind(kind)
    if kind is PolicyKind.LINUCB:
        if relevance is None:
            raise ValueError("LinUCB needs a relevance profile")
        return relevance.rank
    if topic is None:
        raise ValueError(f"{kind.value} needs a topic profile")
    if kind is PolicyKind.LSB:
        return topic.num_topics
    if relevance is None:
        raise ValueError("Hybrid needs a relevance profile")
    return relevance.rank + topic.num_topics


class CascadeBandit:
    """One learner for one user: ridge state, exposure ledger and features.

    Parameters
    ----------
    cfg : PolicyConfig
        Policy family, exploration coefficient and discount switch.
    num_items : int
        Catalog size.
    topic, relevance : profiles
        Feature sources; which ones are needed depends on ``cfg.kind``.
    ridge : RidgeState, optional
        Start from an existing state instead of a fresh one (shared learning).
    """

    def __init__(
        self,
        cfg: PolicyConfig,
        num_items: int,
        topic: TopicProfile | None = None,
        relevance: RelevanceProfile | None = None,
        ridge: RidgeState | None = None,
    ) -> None:
        self.cfg = cfg
        self.topic = topic
        self.relevance = relevance
        dim = feature_dim(cfg.kind, topic, relevance)
        self.ridge = ridge if ridge is not None else ridge_init(dim, cfg.reg)
        if self.ridge.dim != dim:
            raise ValueError("ridge state dimension does not match the features")
        self.ledger = ExposureLedger.fresh(num_items)

    def select(self) -> SelectionTrace:
        if self.cfg.kind is PolicyKind.LINUCB:
            return select_linucb(self.ridge, self.relevance, self.cfg, self.ledger)
        relevance = self.relevance if self.cfg.kind is PolicyKind.HYBRID else None
        return select_greedy_gain(self.ridge, self.topic, relevance, self.cfg, self.ledger)

    def update(self, trace: SelectionTrace, outcome: ClickOutcome) -> None:
        update_from_feedback(self.ridge, trace, outcome)
        record_exposure(self.ledger, trace)
