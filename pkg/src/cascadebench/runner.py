"""Experiment orchestration: per-user simulations, grids, sweeps, outputs."""

from __future__ import annotations

import csv
import json
import logging
import os
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import metrics
from .bandits import CascadeBandit, PolicyConfig, PolicyKind
from .clickmodel import GroundTruthUser, expected_reward, fit_ground_truth, sample_cascade
from .data import BinarizeRule, Dataset, FormatSpec, prepare_dataset
from .features import (
    RelevanceProfile,
    TopicProfile,
    build_svd_features,
    build_topic_profiles,
)
from .linalg import RidgeState
from .synthetic import generate_long_tail_dataset

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "CASCADEBENCH_OUTPUT_DIR"
SWEEP_C_VALUES = (0.5, 1.0, 2.0, 5.0)
SUMMARY_COLUMNS = ("algorithm", "unbiased", "c", "seed", "IC", "SC", "UIC", "G", "regret_final")

# stream tags keep the random streams of different purposes apart
_CLICKS, _USERS, _NEGATIVES = 0, 1, 2


class SimulationError(RuntimeError):
    """A failure inside the grid, tagged with where it happened."""

    def __init__(self, message: str, **where) -> None:
        self.where = {k: v for k, v in where.items() if v is not None}
        super().__init__(message)

    def with_context(self, **where) -> "SimulationError":
        err = SimulationError(self.args[0], **{**where, **self.where})
        err.__cause__ = self.__cause__
        return err

    def to_dict(self) -> dict:
        return {"error": self.args[0], **self.where}

    def __str__(self) -> str:
        ctx = ", ".join(f"{k}={v}" for k, v in self.where.items())
        return f"{self.args[0]} ({ctx})" if ctx else self.args[0]


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


@dataclass(frozen=True)
class StepLog:
    step: int
    items: tuple[int, ...]
    click_position: int | None
    regret: float


@dataclass
class UserLog:
    """All steps of one user's simulation, stored column-wise.

    ``clicks`` holds the 1-based click position, 0 for no click.
    """

    user_id: int
    lists: NDArray[np.int64]
    clicks: NDArray[np.int64]
    regrets: NDArray[np.float64]

    def __len__(self) -> int:
        return self.regrets.size

    def __getitem__(self, t: int) -> StepLog:
        click = int(self.clicks[t])
        return StepLog(t + 1, tuple(self.lists[t].tolist()), click or None, float(self.regrets[t]))

    def __iter__(self):
        return (self[t] for t in range(len(self)))

    def impressions(self, num_items: int) -> NDArray[np.int64]:
        return np.bincount(self.lists.ravel(), minlength=num_items)

    def first_seen(self, num_items: int) -> NDArray[np.int64]:
        """1-based step at which each item was first shown; ``n + 1`` if never."""
        n = len(self)
        first = np.full(num_items, n + 1, dtype=np.int64)
        steps = np.repeat(np.arange(1, n + 1), self.lists.shape[1])
        flat = self.lists.ravel()
        # reversed assignment leaves the earliest step in place
        first[flat[::-1]] = steps[::-1]
        return first


def run_user_simulation(
    gt: GroundTruthUser, policy: CascadeBandit, n: int, rng: np.random.Generator
) -> UserLog:
    """Let ``policy`` interact with the cascade user ``gt`` for ``n`` steps."""
    if n < 1:
        raise ValueError("n must be positive")
    K = policy.cfg.K
    lists = np.empty((n, K), dtype=np.int64)
    clicks = np.zeros(n, dtype=np.int64)
    regrets = np.empty(n)
    best = gt.optimal_reward
    t = 0
    try:
        for t in range(n):
            trace = policy.select()
            outcome = sample_cascade(trace.items, gt.weights, rng)
            policy.update(trace, outcome)
            lists[t] = trace.items
            clicks[t] = outcome.click_position or 0
            regrets[t] = best - expected_reward(trace.items, gt.weights)
    except Exception as exc:
        raise SimulationError(f"{type(exc).__name__}: {exc}", user=gt.user_id, step=t + 1) from exc
    return UserLog(gt.user_id, lists, clicks, regrets)


@dataclass(frozen=True)
class DatasetConfig:
    """Where the interactions come from and how to preprocess them.

    With ``synthetic`` set, a long-tail fixture is generated (its entries are
    keyword arguments of :func:`generate_long_tail_dataset`) and the file paths
    are ignored.
    """

    interactions: str | None = None
    suppliers: str | None = None
    genres: str | None = None
    format: FormatSpec = FormatSpec()
    binarize: BinarizeRule = BinarizeRule("rating_equals", 5.0)
    top_users: int | None = None
    top_items: int | None = None
    split_ratio: float = 0.5
    split_seed: int = 0
    synthetic: dict | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "DatasetConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown dataset keys: {sorted(unknown)}")
        if "format" in d:
            d["format"] = FormatSpec(**d["format"])
        if "binarize" in d:
            d["binarize"] = BinarizeRule(d["binarize"]["rule"], float(d["binarize"]["value"]))
        for key in ("interactions", "suppliers", "genres"):
            if d.get(key) is not None and base_dir is not None:
                d[key] = str((base_dir / d[key]).resolve())
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "interactions": self.interactions,
            "suppliers": self.suppliers,
            "genres": self.genres,
            "format": {
                "delimiter": self.format.delimiter,
                "columns": list(self.format.columns),
                "header": self.format.header,
                "provenance": self.format.provenance,
            },
            "binarize": {"rule": self.binarize.kind, "value": self.binarize.threshold},
            "top_users": self.top_users,
            "top_items": self.top_items,
            "split_ratio": self.split_ratio,
            "split_seed": self.split_seed,
            "synthetic": self.synthetic,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    algorithms: tuple[PolicyConfig, ...]
    n: int = 10_000
    num_eval_users: int = 100
    K: int = 4
    seeds: tuple[int, ...] = (0,)
    svd_rank: int = 10
    topic_scale: float = 1.0
    output_dir: str = "results"
    curve_interval: int = 100
    gt_reg: float = 1.0
    gt_negatives: int | None = None
    shared_policy: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.num_eval_users < 1 or self.curve_interval < 1:
            raise ValueError("num_eval_users and curve_interval must be positive")
        # the experiment-level list length wins over per-algorithm values
        algos = tuple(
            replace(a, K=self.K) if isinstance(a, PolicyConfig) else PolicyConfig(**{**a, "K": self.K})
            for a in self.algorithms
        )
        object.__setattr__(self, "algorithms", algos)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d["dataset"] = DatasetConfig.from_dict(d["dataset"], base_dir)
        d["algorithms"] = tuple(d["algorithms"])
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        if base_dir is not None and "output_dir" in d:
            d["output_dir"] = str((base_dir / d["output_dir"]).resolve())
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


@dataclass(frozen=True)
class PreparedInputs:
    dataset: Dataset
    topic: TopicProfile
    relevance: RelevanceProfile

    @property
    def gt_features(self) -> NDArray[np.float64]:
        """Hybrid features with an empty prefix: the ground-truth model's inputs."""
        return np.hstack([self.relevance.vectors, self.topic.coverage])


def prepare_inputs(config: ExperimentConfig) -> PreparedInputs:
    ds_cfg = config.dataset
    if ds_cfg.synthetic is not None:
        paths = generate_long_tail_dataset(Path(config.output_dir) / "data", **ds_cfg.synthetic)
        fmt = FormatSpec(header=True, provenance="synthetic")
        interactions, suppliers, genres = paths["interactions"], paths["suppliers"], paths["genres"]
    else:
        if ds_cfg.interactions is None or ds_cfg.suppliers is None:
            raise ValueError("dataset needs 'interactions' and 'suppliers' paths")
        fmt = ds_cfg.format
        interactions, suppliers, genres = ds_cfg.interactions, ds_cfg.suppliers, ds_cfg.genres
    dataset = prepare_dataset(
        interactions,
        fmt,
        ds_cfg.binarize,
        suppliers,
        genres,
        top_users=ds_cfg.top_users,
        top_items=ds_cfg.top_items,
        ratio=ds_cfg.split_ratio,
        split_seed=ds_cfg.split_seed,
    )
    topic = build_topic_profiles(
        dataset.genre_map,
        max(dataset.num_topics, 1),
        config.topic_scale,
        num_items=dataset.num_items,
    )
    relevance = build_svd_features(dataset.train_matrix, config.svd_rank)
    return PreparedInputs(dataset, topic, relevance)


def sample_eval_users(dataset: Dataset, num_users: int, seed: int) -> list[int]:
    eligible = dataset.eligible_users
    if num_users > len(eligible):
        raise ValueError(
            f"num_eval_users={num_users} exceeds the {len(eligible)} users with a held-out half"
        )
    chosen = derive_rng(seed, _USERS).choice(eligible, size=num_users, replace=False)
    return sorted(int(u) for u in chosen)


def fit_user(inputs: PreparedInputs, user: int, seed: int, config: ExperimentConfig) -> GroundTruthUser:
    ds = inputs.dataset
    return fit_ground_truth(
        ds.test_items[user],
        inputs.gt_features,
        config.K,
        reg=config.gt_reg,
        exclude=ds.train_items[user],
        num_negatives=config.gt_negatives,
        rng=derive_rng(seed, _NEGATIVES, user),
        user_id=user,
    )


@dataclass
class RunResult:
    """Outcome of one (algorithm, seed) cell over all evaluated users."""

    policy: PolicyConfig
    seed: int
    users: tuple[int, ...]
    regret_curve: NDArray[np.float64]
    curve_steps: NDArray[np.int64]
    curve_ic: NDArray[np.float64]
    curve_uic: NDArray[np.float64]
    counts: metrics.ImpressionCounts
    user_regret: NDArray[np.float64] = field(repr=False)

    @property
    def algorithm(self) -> str:
        return self.policy.label

    @property
    def tag(self) -> str:
        return f"{self.algorithm}_c{self.policy.c:g}_seed{self.seed}"

    def summary(self) -> dict:
        counts = self.counts
        return {
            "algorithm": self.algorithm,
            "unbiased": self.policy.unbiased,
            "c": self.policy.c,
            "seed": self.seed,
            "IC": metrics.item_coverage(counts),
            "SC": metrics.supplier_coverage(counts),
            "UIC": metrics.user_item_coverage(counts),
            "G": metrics.gini(counts.per_item),
            "regret_final": float(self.regret_curve[-1]),
        }


def _curve_steps(n: int, interval: int) -> NDArray[np.int64]:
    steps = np.arange(interval, n + 1, interval)
    if steps.size == 0 or steps[-1] != n:
        steps = np.append(steps, n)
    return steps


def _aggregate(
    policy: PolicyConfig,
    seed: int,
    logs: Sequence[UserLog],
    inputs: PreparedInputs,
    interval: int,
) -> RunResult:
    num_items = inputs.dataset.num_items
    per_user_item = np.vstack([lg.impressions(num_items) for lg in logs])
    first = np.vstack([lg.first_seen(num_items) for lg in logs])
    cum = np.vstack([metrics.cumulative_regret(lg.regrets) for lg in logs])
    n = cum.shape[1]
    steps = _curve_steps(n, interval)
    first_any = first.min(axis=0)
    curve_ic = np.array([np.mean(first_any <= s) for s in steps])
    curve_uic = np.array([np.mean(first <= s) for s in steps])
    counts = metrics.ImpressionCounts(
        per_user_item, inputs.dataset.supplier_of, inputs.dataset.num_suppliers
    )
    return RunResult(
        policy=policy,
        seed=seed,
        users=tuple(lg.user_id for lg in logs),
        regret_curve=cum.mean(axis=0),
        curve_steps=steps,
        curve_ic=curve_ic,
        curve_uic=curve_uic,
        counts=counts,
        user_regret=cum[:, -1],
    )


def _make_policy(policy: PolicyConfig, inputs: PreparedInputs, ridge: RidgeState | None = None):
    return CascadeBandit(
        policy,
        inputs.dataset.num_items,
        topic=inputs.topic,
        relevance=inputs.relevance,
        ridge=ridge,
    )


def _simulate_cell(args) -> UserLog:
    policy, inputs, gt, seed, n = args
    return run_user_simulation(gt, _make_policy(policy, inputs), n, derive_rng(seed, _CLICKS, gt.user_id))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]
    output_dir: Path | None = None

    def summary_rows(self) -> list[dict]:
        return [r.summary() for r in self.runs]

    def comparisons(self) -> list[dict]:
        """Original vs unbiased per (kind, c), with permutation-test p-values."""
        rows = []
        groups: dict[tuple[PolicyKind, float], dict[bool, list[dict]]] = {}
        for run in self.runs:
            key = (run.policy.kind, run.policy.c)
            groups.setdefault(key, {}).setdefault(run.policy.unbiased, []).append(run.summary())
        for (kind, c), variants in groups.items():
            if set(variants) != {False, True}:
                continue
            orig, unb = variants[False], variants[True]
            for metric in ("IC", "SC", "UIC", "G", "regret_final"):
                a = [r[metric] for r in orig]
                b = [r[metric] for r in unb]
                p = metrics.significance_test(a, b) if min(len(a), len(b)) >= 2 else float("nan")
                rows.append(
                    {
                        "kind": kind.value,
                        "c": c,
                        "metric": metric,
                        "mean_original": float(np.mean(a)),
                        "mean_unbiased": float(np.mean(b)),
                        "p_value": p,
                    }
                )
        return rows


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_outputs(result: ExperimentResult, inputs: PreparedInputs, out_dir: Path) -> None:
    """Summary, comparison, per-run curve and exposure CSVs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "summary.csv",
        SUMMARY_COLUMNS,
        ([row[c] for c in SUMMARY_COLUMNS] for row in result.summary_rows()),
    )
    comp = result.comparisons()
    if comp:
        cols = ("kind", "c", "metric", "mean_original", "mean_unbiased", "p_value")
        _write_csv(out_dir / "comparison.csv", cols, ([r[c] for c in cols] for r in comp))
    ds = inputs.dataset
    for run in result.runs:
        step_idx = run.curve_steps - 1
        _write_csv(
            out_dir / f"curves_{run.tag}.csv",
            ("step", "cum_regret", "cum_IC", "cum_UIC"),
            zip(run.curve_steps.tolist(), run.regret_curve[step_idx], run.curve_ic, run.curve_uic),
        )
        _write_csv(
            out_dir / f"exposure_{run.tag}.csv",
            ("item", "supplier", "count"),
            (
                (int(ds.item_ids[i]), ds.supplier_names[ds.supplier_of[i]], int(c))
                for i, c in metrics.exposure_distribution(run.counts)
            ),
        )


def _resolve_output_dir(config: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or config.output_dir)


def run_experiment(
    config: ExperimentConfig,
    inputs: PreparedInputs | None = None,
    write: bool = True,
) -> ExperimentResult:
    """Run every (algorithm, seed, user) cell and aggregate per (algorithm, seed).

    Preprocessing happens once; ground truth is fitted once per (user, seed)
    and shared by all algorithms, as is the click stream of each (seed, user).
    """
    out_dir = _resolve_output_dir(config)
    if inputs is None:
        inputs = prepare_inputs(replace(config, output_dir=str(out_dir)))

    runs: list[RunResult] = []
    for seed in config.seeds:
        users = sample_eval_users(inputs.dataset, config.num_eval_users, seed)
        truths = [fit_user(inputs, u, seed, config) for u in users]
        for policy in config.algorithms:
            log.info("running %s c=%g seed=%d on %d users", policy.label, policy.c, seed, len(users))
            try:
                logs = _run_cell_users(policy, inputs, truths, seed, config)
            except SimulationError as err:
                raise err.with_context(algorithm=policy.label, c=policy.c, seed=seed) from err.__cause__
            runs.append(_aggregate(policy, seed, logs, inputs, config.curve_interval))

    result = ExperimentResult(config, runs, out_dir if write else None)
    if write:
        write_outputs(result, inputs, out_dir)
    return result


def _run_cell_users(
    policy: PolicyConfig,
    inputs: PreparedInputs,
    truths: Sequence[GroundTruthUser],
    seed: int,
    config: ExperimentConfig,
) -> list[UserLog]:
    if config.shared_policy:
        # one learner carried across users in ascending user order; exposure stays per user
        ridge = None
        logs = []
        for gt in truths:
            bandit = _make_policy(policy, inputs, ridge)
            logs.append(
                run_user_simulation(gt, bandit, config.n, derive_rng(seed, _CLICKS, gt.user_id))
            )
            ridge = bandit.ridge
        return logs
    cells = [(policy, inputs, gt, seed, config.n) for gt in truths]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_simulate_cell, cells))
    return [_simulate_cell(cell) for cell in cells]


def sweep_exploration(
    config: ExperimentConfig,
    c_values: Sequence[float] = SWEEP_C_VALUES,
    inputs: PreparedInputs | None = None,
    write: bool = True,
) -> dict[tuple[float, bool], ExperimentResult]:
    """Run every configured policy family at each ``c``, original and unbiased.

    Writes ``sweep.csv`` with the (original, unbiased) item coverage pair and
    final regret per family and ``c``, and each run's outputs under
    ``c<c>_<variant>/``.
    """
    out_dir = _resolve_output_dir(config)
    if inputs is None:
        inputs = prepare_inputs(replace(config, output_dir=str(out_dir)))
    kinds = list(dict.fromkeys(a.kind for a in config.algorithms))
    base = {a.kind: a for a in config.algorithms}
    results: dict[tuple[float, bool], ExperimentResult] = {}
    for c in c_values:
        for unbiased in (False, True):
            algos = tuple(replace(base[k], c=float(c), unbiased=unbiased) for k in kinds)
            sub = replace(
                config,
                algorithms=algos,
                output_dir=str(out_dir / f"c{c:g}_{'unbiased' if unbiased else 'original'}"),
            )
            res = run_experiment(sub, inputs=inputs, write=False)
            if write:
                res.output_dir = Path(sub.output_dir)
                write_outputs(res, inputs, res.output_dir)
            results[(float(c), unbiased)] = res

    if write:
        rows = []
        for kind in kinds:
            for c in c_values:
                pair = [results[(float(c), u)] for u in (False, True)]
                ic = [
                    np.mean([r.summary()["IC"] for r in res.runs if r.policy.kind is kind])
                    for res in pair
                ]
                regret = [
                    np.mean([r.summary()["regret_final"] for r in res.runs if r.policy.kind is kind])
                    for res in pair
                ]
                rows.append((kind.value, float(c), ic[0], ic[1], regret[0], regret[1]))
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(
            out_dir / "sweep.csv",
            ("kind", "c", "IC_original", "IC_unbiased", "regret_original", "regret_unbiased"),
            rows,
        )
    return results
