"""Synthetic fixtures: a long-tail interaction dataset and a realizable problem."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clickmodel import GroundTruthUser, optimal_list
from .features import RelevanceProfile


def generate_long_tail_dataset(
    out_dir: str | Path,
    num_users: int = 300,
    num_items: int = 400,
    num_topics: int = 12,
    num_suppliers: int = 80,
    latent_dim: int = 6,
    mean_activity: float = 60.0,
    seed: int = 7,
) -> dict[str, Path]:
    """Write a MovieLens-shaped rating file plus supplier and genre metadata.

    Item popularity and supplier catalog sizes are Zipf-distributed, so
    exposure is long-tailed before any learner touches it. Ratings are 1-5
    and grow with a latent user-item affinity.

    Returns the paths of ``interactions.csv``, ``suppliers.tsv`` and ``genres.tsv``.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    user_vec = rng.normal(size=(num_users, latent_dim)) / np.sqrt(latent_dim)
    item_vec = rng.normal(size=(num_items, latent_dim))
    popularity = 1.0 / np.arange(1, num_items + 1) ** 1.0
    popularity = popularity[rng.permutation(num_items)]

    activity = rng.lognormal(np.log(mean_activity), 0.6, size=num_users)
    activity = np.clip(np.round(activity), 15, int(0.6 * num_items)).astype(int)

    rows = []
    for u in range(num_users):
        affinity = item_vec @ user_vec[u]
        score = np.log(popularity) + 1.5 * affinity + rng.gumbel(size=num_items)
        picked = np.sort(np.argsort(-score)[: activity[u]])
        z = (affinity[picked] - affinity.mean()) / affinity.std()
        rating = np.clip(np.round(3.3 + 1.1 * z + rng.normal(0, 0.7, picked.size)), 1, 5)
        rows.extend(
            f"{u + 1},{i + 1},{int(r)}\n" for i, r in zip(picked.tolist(), rating.tolist())
        )

    interactions = out_dir / "interactions.csv"
    interactions.write_text("user,item,rating\n" + "".join(rows))

    supplier_p = 1.0 / np.arange(1, num_suppliers + 1) ** 1.2
    supplier_p /= supplier_p.sum()
    owner = rng.choice(num_suppliers, size=num_items, p=supplier_p)
    suppliers = out_dir / "suppliers.tsv"
    suppliers.write_text(
        "".join(f"{i + 1}\tmaker_{s:03d}\n" for i, s in enumerate(owner.tolist()))
    )

    topic_vec = rng.normal(size=(num_topics, latent_dim))
    topic_score = item_vec @ topic_vec.T + 0.5 * rng.normal(size=(num_items, num_topics))
    ranked = np.argsort(-topic_score, axis=1)
    extra = rng.random((num_items, 2))
    lines = []
    for i in range(num_items):
        n_genres = 1 + int(extra[i, 0] < 0.5) + int(extra[i, 1] < 0.2)
        lines.extend(f"{i + 1}\tgenre_{t:02d}\n" for t in sorted(ranked[i, :n_genres].tolist()))
    genres = out_dir / "genres.tsv"
    genres.write_text("".join(lines))
    return {"interactions": interactions, "suppliers": suppliers, "genres": genres}


@dataclass(frozen=True)
class RealizableProblem:
    """Item features and users whose attraction is exactly linear in them."""

    relevance: RelevanceProfile
    thetas: np.ndarray
    users: tuple[GroundTruthUser, ...]


def make_realizable_problem(
    num_items: int = 10,
    dim: int = 4,
    K: int = 2,
    num_users: int = 1,
    max_weight: float = 0.8,
    seed: int = 0,
) -> RealizableProblem:
    """Non-negative unit-norm item vectors and non-negative user parameters.

    Each user's parameter is scaled so the largest attraction equals
    ``max_weight``; all weights are then ``x . theta`` in ``[0, max_weight]``
    with no clipping involved.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(num_items, dim)) ** 2
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    thetas = rng.uniform(size=(num_users, dim)) ** 2
    users = []
    for u in range(num_users):
        w = x @ thetas[u]
        thetas[u] *= max_weight / w.max()
        w = x @ thetas[u]
        w.setflags(write=False)
        users.append(GroundTruthUser(user_id=u, weights=w, optimal_list=optimal_list(w, K)))
    x.setflags(write=False)
    return RealizableProblem(RelevanceProfile(dim, x), thetas, tuple(users))
