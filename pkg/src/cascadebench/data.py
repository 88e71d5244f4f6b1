"""Interaction ingestion and preprocessing.

Pipeline: load delimited interactions -> keep the most active users and most
interacted items -> binarize -> split every user's positives into a training
half (features, learner) and a held-out half (simulated feedback).
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

log = logging.getLogger(__name__)

PROVENANCES = ("movielens-like", "lastfm-like", "synthetic")


class DataError(ValueError):
    """Raised on unreadable or inconsistent input data."""


@dataclass(frozen=True)
class FormatSpec:
    """How to read a delimited interaction file.

    ``columns`` names every field in file order; exactly one each must be
    ``user``, ``item`` and ``value``, others (timestamps...) are ignored.
    Count-valued data (``lastfm-like``) sums duplicate (user, item) rows,
    rating-valued data keeps the last one.
    """

    delimiter: str = ","
    columns: tuple[str, ...] = ("user", "item", "value")
    header: bool = False
    provenance: str = "movielens-like"

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        for name in ("user", "item", "value"):
            if self.columns.count(name) != 1:
                raise ValueError(f"columns must name {name!r} exactly once")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not self.delimiter:
            raise ValueError("empty delimiter")

    @property
    def sums_duplicates(self) -> bool:
        return self.provenance == "lastfm-like"


@dataclass(frozen=True)
class InteractionTable:
    """Deduplicated (user, item, value) triples, sorted by (user, item)."""

    users: NDArray[np.int64]
    items: NDArray[np.int64]
    values: NDArray[np.float64]
    provenance: str = "synthetic"
    binary: bool = False

    def __len__(self) -> int:
        return self.users.size

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[tuple[int, int, float]],
        provenance: str = "synthetic",
        binary: bool = False,
    ) -> "InteractionTable":
        rows = sorted((int(u), int(i), float(v)) for u, i, v in triples)
        if len({(u, i) for u, i, _ in rows}) != len(rows):
            raise DataError("duplicate (user, item) pairs")
        arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
        return cls(
            users=arr[:, 0].astype(np.int64),
            items=arr[:, 1].astype(np.int64),
            values=arr[:, 2],
            provenance=provenance,
            binary=binary,
        )

    def triples(self) -> list[tuple[int, int, float]]:
        return list(zip(self.users.tolist(), self.items.tolist(), self.values.tolist()))

    def _subset(self, mask: NDArray[np.bool_]) -> "InteractionTable":
        return InteractionTable(
            self.users[mask], self.items[mask], self.values[mask], self.provenance, self.binary
        )

    def positives_by_user(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for u, i, v in zip(self.users.tolist(), self.items.tolist(), self.values.tolist()):
            if v > 0:
                out[u].append(i)
        return dict(out)


def load_interactions(path: str | Path, fmt: FormatSpec = FormatSpec()) -> InteractionTable:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    cu, ci, cv = (fmt.columns.index(n) for n in ("user", "item", "value"))
    agg: dict[tuple[int, int], float] = {}
    for lineno, line in enumerate(lines, start=1):
        if (fmt.header and lineno == 1) or not line.strip():
            continue
        fields = line.rstrip("\r").split(fmt.delimiter)
        if len(fields) != len(fmt.columns):
            raise DataError(
                f"{path}:{lineno}: expected {len(fmt.columns)} fields, got {len(fields)}"
            )
        try:
            key = (int(fields[cu]), int(fields[ci]))
            value = float(fields[cv])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: cannot parse row {line!r}") from exc
        if not math.isfinite(value):
            raise DataError(f"{path}:{lineno}: non-finite value")
        if fmt.sums_duplicates:
            agg[key] = agg.get(key, 0.0) + value
        else:
            agg[key] = value
    if not agg:
        raise DataError(f"{path}: no interactions")
    return InteractionTable.from_triples(
        ((u, i, v) for (u, i), v in agg.items()), provenance=fmt.provenance
    )


def _top_ids(ids: NDArray[np.int64], n: int) -> NDArray[np.int64]:
    uniq, counts = np.unique(ids, return_counts=True)
    # most interactions first, then ascending id
    order = np.lexsort((uniq, -counts))
    return np.sort(uniq[order[:n]])


def top_n_filter(table: InteractionTable, n_users: int, n_items: int) -> InteractionTable:
    """Keep the ``n_users`` most active users and ``n_items`` most interacted items.

    Both rankings use the full input table, then both filters apply at once.
    """
    if n_users < 1 or n_items < 1:
        raise ValueError("n_users and n_items must be positive")
    num_users = np.unique(table.users).size
    num_items = np.unique(table.items).size
    if num_users < n_users or num_items < n_items:
        raise DataError(
            f"requested {n_users} users / {n_items} items, "
            f"table has {num_users} / {num_items}"
        )
    keep_users = _top_ids(table.users, n_users)
    keep_items = _top_ids(table.items, n_items)
    mask = np.isin(table.users, keep_users) & np.isin(table.items, keep_items)
    return table._subset(mask)


@dataclass(frozen=True)
class BinarizeRule:
    kind: str
    threshold: float

    def __post_init__(self) -> None:
        if self.kind not in ("rating_equals", "count_greater"):
            raise ValueError(f"unknown binarization rule {self.kind!r}")

    def apply(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kind == "rating_equals":
            hit = values == self.threshold
        else:
            hit = values > self.threshold
        return hit.astype(np.float64)


def rating_equals(v: float = 5) -> BinarizeRule:
    return BinarizeRule("rating_equals", float(v))


def count_greater(v: float = 50) -> BinarizeRule:
    return BinarizeRule("count_greater", float(v))


def binarize(table: InteractionTable, rule: BinarizeRule) -> InteractionTable:
    """Map values to {0, 1}; an already binarized table is returned as is."""
    if table.binary:
        return table
    return InteractionTable(
        table.users, table.items, rule.apply(table.values), table.provenance, binary=True
    )


@dataclass(frozen=True)
class SplitReport:
    """Per-user sizes of a split and the users left out of evaluation."""

    seed: int
    ratio: float
    train_counts: dict[int, int]
    test_counts: dict[int, int]
    excluded_users: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "ratio": self.ratio,
                "excluded_users": list(self.excluded_users),
                "users": {
                    str(u): {"train": self.train_counts[u], "test": self.test_counts.get(u, 0)}
                    for u in sorted(self.train_counts)
                },
            },
            indent=2,
            sort_keys=True,
        )


def _user_rng(seed: int, user: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, user & 0xFFFFFFFF, user >> 32]))


def split_profile(
    table: InteractionTable, ratio: float = 0.5, seed: int = 0
) -> tuple[InteractionTable, InteractionTable, SplitReport]:
    """Randomly partition each user's positive items into train and test.

    The train half gets ``floor(ratio * n + 1/2)`` of a user's ``n`` positives.
    Users whose test half comes out empty are listed as excluded. Only positive
    items appear in the outputs. Each user draws from a stream derived from
    ``(seed, user)``, so the split does not depend on user order.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio!r}")
    train: list[tuple[int, int, float]] = []
    test: list[tuple[int, int, float]] = []
    train_counts: dict[int, int] = {}
    test_counts: dict[int, int] = {}
    excluded = []
    for user, items in sorted(table.positives_by_user().items()):
        items = np.array(sorted(items), dtype=np.int64)
        n_train = math.floor(ratio * items.size + 0.5)
        perm = _user_rng(seed, user).permutation(items)
        chosen_train, chosen_test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        train.extend((user, int(i), 1.0) for i in chosen_train)
        test.extend((user, int(i), 1.0) for i in chosen_test)
        train_counts[user] = int(chosen_train.size)
        test_counts[user] = int(chosen_test.size)
        if chosen_test.size == 0:
            excluded.append(user)
    report = SplitReport(seed, ratio, train_counts, test_counts, tuple(excluded))
    return (
        InteractionTable.from_triples(train, table.provenance, binary=True),
        InteractionTable.from_triples(test, table.provenance, binary=True),
        report,
    )


def write_split(
    train: InteractionTable, test: InteractionTable, report: SplitReport, out_dir: str | Path
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, tab in (("train", train), ("test", test)):
        rows = [f"{u}\t{i}\n" for u, i, _ in tab.triples()]
        (out_dir / f"{name}.tsv").write_text("".join(rows))
    (out_dir / "split_report.json").write_text(report.to_json() + "\n")


@dataclass(frozen=True)
class CatalogMetadata:
    supplier_of: dict[int, str]
    genres_of: dict[int, frozenset[str]] = field(default_factory=dict)

    def check_items(self, items: Iterable[int]) -> None:
        missing = sorted(set(int(i) for i in items) - set(self.supplier_of))
        if missing:
            shown = ", ".join(map(str, missing[:20]))
            more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
            raise DataError(f"items without a supplier: {shown}{more}")


def _read_pairs(path: Path) -> list[tuple[int, str]]:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 2 or not fields[1]:
            raise DataError(f"{path}:{lineno}: expected 'item<TAB>value'")
        try:
            pairs.append((int(fields[0]), fields[1]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: item id is not an integer") from exc
    return pairs


def load_metadata(
    path_suppliers: str | Path,
    path_genres: str | Path | None = None,
    required_items: Iterable[int] | None = None,
) -> CatalogMetadata:
    """Read ``item<TAB>supplier`` and ``item<TAB>topic`` files.

    Raises :class:`DataError` naming the items of ``required_items`` that have
    no supplier; supplier coverage is undefined without one.
    """
    supplier_of: dict[int, str] = {}
    for item, supplier in _read_pairs(Path(path_suppliers)):
        if supplier_of.get(item, supplier) != supplier:
            raise DataError(f"item {item} has more than one supplier")
        supplier_of[item] = supplier
    genres: dict[int, set[str]] = defaultdict(set)
    if path_genres is not None:
        for item, topic in _read_pairs(Path(path_genres)):
            genres[item].add(topic)
    meta = CatalogMetadata(supplier_of, {i: frozenset(g) for i, g in genres.items()})
    if required_items is not None:
        meta.check_items(required_items)
    return meta


@dataclass(frozen=True)
class Dataset:
    """A preprocessed dataset in dense index space.

    Items are indexed ``0..L-1`` by ascending raw id, users likewise.
    """

    item_ids: NDArray[np.int64]
    user_ids: NDArray[np.int64]
    train_matrix: NDArray[np.float64]
    test_items: dict[int, tuple[int, ...]]
    train_items: dict[int, tuple[int, ...]]
    supplier_of: NDArray[np.int64]
    supplier_names: tuple[str, ...]
    genre_map: dict[int, frozenset[int]]
    topic_names: tuple[str, ...]
    split_report: SplitReport
    num_interactions: int

    @property
    def num_items(self) -> int:
        return self.item_ids.size

    @property
    def num_users(self) -> int:
        return self.user_ids.size

    @property
    def num_topics(self) -> int:
        return len(self.topic_names)

    @property
    def num_suppliers(self) -> int:
        return len(self.supplier_names)

    @property
    def eligible_users(self) -> list[int]:
        """User indices with a non-empty held-out half."""
        return sorted(u for u, items in self.test_items.items() if items)

    def summary(self) -> dict:
        return {
            "users": self.num_users,
            "items": self.num_items,
            "interactions": self.num_interactions,
            "positives": int(self.train_matrix.sum())
            + sum(len(v) for v in self.test_items.values()),
            "topics": self.num_topics,
            "suppliers": self.num_suppliers,
            "eligible_users": len(self.eligible_users),
            "excluded_users": len(self.split_report.excluded_users),
        }


def assemble_dataset(
    table: InteractionTable,
    metadata: CatalogMetadata,
    ratio: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Split a binarized table and index it densely against its metadata."""
    if not table.binary:
        raise DataError("assemble_dataset expects a binarized table")
    item_ids = np.unique(table.items)
    user_ids = np.unique(table.users)
    metadata.check_items(item_ids.tolist())
    item_index = {int(r): k for k, r in enumerate(item_ids)}
    user_index = {int(r): k for k, r in enumerate(user_ids)}

    train, test, report = split_profile(table, ratio, seed)
    train_matrix = np.zeros((user_ids.size, item_ids.size))
    train_matrix[
        [user_index[u] for u in train.users.tolist()],
        [item_index[i] for i in train.items.tolist()],
    ] = 1.0

    def by_user(tab: InteractionTable) -> dict[int, tuple[int, ...]]:
        out = {k: () for k in range(user_ids.size)}
        for raw_user, raw_items in tab.positives_by_user().items():
            out[user_index[raw_user]] = tuple(sorted(item_index[i] for i in raw_items))
        return out

    supplier_names = tuple(sorted({metadata.supplier_of[int(i)] for i in item_ids}))
    sup_index = {s: k for k, s in enumerate(supplier_names)}
    supplier_of = np.array(
        [sup_index[metadata.supplier_of[int(i)]] for i in item_ids], dtype=np.int64
    )

    topic_names = tuple(
        sorted({t for i in item_ids for t in metadata.genres_of.get(int(i), ())})
    )
    top_index = {t: k for k, t in enumerate(topic_names)}
    genre_map = {
        k: frozenset(top_index[t] for t in metadata.genres_of.get(int(i), ()))
        for k, i in enumerate(item_ids)
    }
    return Dataset(
        item_ids=item_ids,
        user_ids=user_ids,
        train_matrix=train_matrix,
        test_items=by_user(test),
        train_items=by_user(train),
        supplier_of=supplier_of,
        supplier_names=supplier_names,
        genre_map=genre_map,
        topic_names=topic_names,
        split_report=report,
        num_interactions=len(table),
    )


def prepare_dataset(
    interactions: str | Path,
    fmt: FormatSpec,
    rule: BinarizeRule,
    suppliers: str | Path,
    genres: str | Path | None = None,
    top_users: int | None = None,
    top_items: int | None = None,
    ratio: float = 0.5,
    split_seed: int = 0,
) -> Dataset:
    """Run the whole preprocessing pipeline on files."""
    table = load_interactions(interactions, fmt)
    log.info("loaded %d interactions from %s", len(table), interactions)
    if top_users is not None or top_items is not None:
        n_users = top_users or np.unique(table.users).size
        n_items = top_items or np.unique(table.items).size
        table = top_n_filter(table, n_users, n_items)
    table = binarize(table, rule)
    metadata = load_metadata(suppliers, genres, required_items=np.unique(table.items).tolist())
    return assemble_dataset(table, metadata, ratio, split_seed)

