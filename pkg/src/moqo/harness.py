"""Benchmark orchestration and quality measurement.

Runs the competing optimizers on generated query instances, snapshots
their result sets on a shared time or iteration grid, scores every
snapshot against a reference frontier with the multiplicative epsilon
indicator, and emits plot-ready CSV files.
"""

from __future__ import annotations

import enum
import math
import random
import statistics
import time
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .baselines import dp_frontier, run_2p, run_ii, run_nsga2, run_sa
from .core import Archive
from .costmodel import (
    N_METRICS,
    CostModel,
    JoinOp,
    OperatorCatalog,
    ScanOp,
    Topology,
)
from .optimizer import Budget, rmq_optimize
from .querygen import GenSpec, SelectivityMode, generate_query

BASE_ALGORITHMS = ("rmq", "ii", "sa", "2p", "nsga2")


class ReferenceMode(enum.Enum):
    UNION = "union"
    EXACT = "exact"


def epsilon_indicator(candidate: Sequence, reference: Sequence) -> float:
    """Smallest factor by which the candidate set must be inflated to
    cover every reference vector.

    Assumes strictly positive components (the cost model floors every
    metric at 1). An empty candidate cannot cover anything and scores
    +inf; an empty reference is a caller error.
    """
    if len(reference) == 0:
        raise ValueError("reference set must not be empty")
    if len(candidate) == 0:
        return math.inf
    cand = np.array(candidate, dtype=float)
    ref = np.array(reference, dtype=float)
    if cand.shape[1] != ref.shape[1]:
        raise ValueError("candidate and reference metric counts differ")
    ratios = (cand[:, None, :] / ref[None, :, :]).max(-1)
    return float(ratios.min(0).max())


def build_reference(
    model: CostModel, runs: dict, mode: ReferenceMode
) -> list:
    """Reference cost-set: pruned union of final archives, or the
    near-exact DP frontier at factor 1.01."""
    if mode is ReferenceMode.EXACT:
        if model.query.n > 7:
            raise ValueError("exact reference mode supports at most 7 tables")
        archive = dp_frontier(model, 1.01)
        return archive.costs()
    union = Archive()
    for archive in runs.values():
        for plan in archive:
            union.insert(plan)
    return union.costs()


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description; one instance drives one CSV."""

    n: int
    topology: Topology = Topology.CHAIN
    selectivity_mode: SelectivityMode = SelectivityMode.STEINBRUNN
    metrics_count: int = 3
    algorithms: tuple = BASE_ALGORITHMS
    budget_ms: float | None = 3000.0
    budget_iters: int | None = None
    sample_interval: float = 100.0
    seeds: tuple = tuple(range(20))
    reference_mode: ReferenceMode = ReferenceMode.UNION
    output_path: str | None = None
    catalog: OperatorCatalog | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.metrics_count <= N_METRICS:
            raise ValueError(f"metric count {self.metrics_count} outside [1, 3]")
        if (self.budget_ms is None) == (self.budget_iters is None):
            raise ValueError("set exactly one of budget_ms and budget_iters")
        if self.budget_ms is not None and self.budget_ms < 0:
            raise ValueError("budget_ms must be >= 0")
        if self.budget_iters is not None and self.budget_iters < 0:
            raise ValueError("budget_iters must be >= 0")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        for algorithm in self.algorithms:
            _parse_algorithm(algorithm)
        if self.reference_mode is ReferenceMode.EXACT and self.n > 7:
            raise ValueError("exact reference mode supports at most 7 tables")

    @property
    def by_iterations(self) -> bool:
        return self.budget_iters is not None

    def budget(self) -> Budget:
        if self.by_iterations:
            return Budget(max_iterations=self.budget_iters)
        return Budget(deadline_s=self.budget_ms / 1000.0)

    def grid_end(self) -> float:
        return float(self.budget_iters if self.by_iterations else self.budget_ms)

    def resolved_lines(self) -> list:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, OperatorCatalog):
                value = _catalog_repr(value)
            out.append(f"{f.name}={value}")
        return out


def _catalog_repr(catalog: OperatorCatalog) -> str:
    scans = ",".join(f"{op.name}:{op.time_per_row}" for op in catalog.scan_ops)
    joins = ",".join(op.name for op in catalog.join_ops)
    return f"scans[{scans}] joins[{joins}]"


@dataclass(frozen=True)
class SamplePoint:
    algorithm: str
    seed: int
    elapsed_ms: float
    alpha_error: float


def _parse_algorithm(token: str):
    """Split an algorithm id into (kind, dp_alpha)."""
    if token in BASE_ALGORITHMS:
        return token, None
    if token.startswith("dp:"):
        try:
            alpha = float(token[3:])
        except ValueError as exc:
            raise ValueError(f"bad DP factor in algorithm id {token!r}") from exc
        if alpha < 1.0:
            raise ValueError(f"DP factor must be >= 1 in {token!r}")
        return "dp", alpha
    raise ValueError(
        f"unknown algorithm id {token!r}; expected one of "
        f"{', '.join(BASE_ALGORITHMS)} or dp:<alpha>"
    )


class _Sampler:
    """Collects (axis position, cost-set) snapshots during one run.

    The axis is wall-clock milliseconds for deadline budgets and the
    iteration counter for iteration budgets, which keeps iteration-budget
    experiments bit-reproducible.
    """

    def __init__(self, interval: float, by_iterations: bool) -> None:
        self.snapshots: list = []
        self._interval = interval
        self._by_iterations = by_iterations
        self._iterations = 0
        self._next = interval

    def __call__(self, elapsed_s: float, plans: list) -> None:
        if self._by_iterations:
            self._iterations += 1
            position = float(self._iterations)
        else:
            position = elapsed_s * 1000.0
        if position >= self._next:
            self.snapshots.append((position, tuple(p.cost for p in plans)))
            steps = math.floor(position / self._interval) + 1
            self._next = steps * self._interval

    def finalize(self, end: float, archive: Archive) -> None:
        self.snapshots.append((end, tuple(archive.costs())))


def _metric_subset(seed: int, count: int) -> tuple:
    if count == N_METRICS:
        return tuple(range(N_METRICS))
    rng = random.Random(f"metrics-{seed}")
    return tuple(sorted(rng.sample(range(N_METRICS), count)))


def _run_one(
    cfg: ExperimentConfig, algorithm: str, model: CostModel, seed: int
) -> tuple:
    """Execute one (algorithm, seed) cell; returns (archive, sampler)."""
    kind, dp_alpha = _parse_algorithm(algorithm)
    sampler = _Sampler(cfg.sample_interval, cfg.by_iterations)
    budget = cfg.budget()
    end = cfg.grid_end()
    if kind == "dp":
        started = time.perf_counter()
        deadline = None if cfg.by_iterations else budget.deadline_s
        result = dp_frontier(model, dp_alpha, deadline_s=deadline)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        archive = result if result is not None else Archive()
        if result is not None:
            position = 1.0 if cfg.by_iterations else min(elapsed_ms, end)
            sampler.snapshots.append((position, tuple(archive.costs())))
            sampler.finalize(end, archive)
        return archive, sampler
    runner: Callable = {
        "rmq": rmq_optimize,
        "ii": run_ii,
        "sa": run_sa,
        "2p": run_2p,
        "nsga2": run_nsga2,
    }[kind]
    archive = runner(model, budget, seed=seed, progress_sink=sampler)
    sampler.finalize(end, archive)
    return archive, sampler


def _grid(cfg: ExperimentConfig) -> list:
    end = cfg.grid_end()
    marks = [
        cfg.sample_interval * k
        for k in range(1, int(end / cfg.sample_interval) + 1)
    ]
    if not marks or marks[-1] < end:
        marks.append(end)
    return marks


def run_experiment(cfg: ExperimentConfig) -> tuple:
    """Run every (seed, algorithm) cell and score snapshots.

    Returns (samples, aggregates): per-cell grid rows with last-value
    carry-forward, and per-(algorithm, grid mark) medians over seeds.
    Writes CSV files when the config names an output path.
    """
    marks = _grid(cfg)
    samples: list = []
    per_cell_errors: dict = {}
    for seed in cfg.seeds:
        spec = GenSpec(
            n=cfg.n,
            topology=cfg.topology,
            selectivity_mode=cfg.selectivity_mode,
            seed=seed,
        )
        query = generate_query(spec)
        metrics = _metric_subset(seed, cfg.metrics_count)
        model = CostModel(query, cfg.catalog, metrics)
        cell_results: dict = {}
        cell_samplers: dict = {}
        for algorithm in cfg.algorithms:
            archive, sampler = _run_one(cfg, algorithm, model, seed)
            cell_results[algorithm] = archive
            cell_samplers[algorithm] = sampler
        reference = build_reference(model, cell_results, cfg.reference_mode)
        for algorithm in cfg.algorithms:
            snapshots = cell_samplers[algorithm].snapshots
            errors = _carry_forward(snapshots, marks, reference)
            per_cell_errors[(algorithm, seed)] = errors
            for mark, error in zip(marks, errors):
                samples.append(SamplePoint(algorithm, seed, mark, error))
    aggregates = []
    for algorithm in cfg.algorithms:
        for idx, mark in enumerate(marks):
            median = statistics.median(
                per_cell_errors[(algorithm, seed)][idx] for seed in cfg.seeds
            )
            aggregates.append((algorithm, mark, median))
    if cfg.output_path:
        write_samples_csv(cfg.output_path, cfg, samples)
        write_aggregate_csv(_aggregate_path(cfg.output_path), cfg, aggregates)
    return samples, aggregates


def _carry_forward(snapshots: list, marks: list, reference: list) -> list:
    """Score the most recent snapshot at every grid mark; +inf before the
    first snapshot. Scores are memoized per snapshot index."""
    errors = []
    cached: dict = {}
    idx = -1
    for mark in marks:
        while idx + 1 < len(snapshots) and snapshots[idx + 1][0] <= mark:
            idx += 1
        if idx < 0:
            errors.append(math.inf)
            continue
        if idx not in cached:
            costs = snapshots[idx][1]
            cached[idx] = (
                epsilon_indicator(costs, reference) if costs else math.inf
            )
        errors.append(cached[idx])
    return errors


def _aggregate_path(path: str) -> str:
    if path.endswith(".csv"):
        return path[: -len(".csv")] + ".agg.csv"
    return path + ".agg.csv"


def _format_error(value: float) -> str:
    return "inf" if math.isinf(value) else repr(value)


def write_samples_csv(path: str, cfg: ExperimentConfig, samples: list) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for line in cfg.resolved_lines():
                fh.write(f"# {line}\n")
            fh.write("algorithm,seed,elapsed_ms,alpha_error\n")
            for s in samples:
                fh.write(
                    f"{s.algorithm},{s.seed},{s.elapsed_ms:g},"
                    f"{_format_error(s.alpha_error)}\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write samples CSV to {path!r}: {exc}") from exc


def write_aggregate_csv(path: str, cfg: ExperimentConfig, aggregates: list) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for line in cfg.resolved_lines():
                fh.write(f"# {line}\n")
            fh.write("algorithm,elapsed_ms,median_alpha\n")
            for algorithm, mark, median in aggregates:
                fh.write(f"{algorithm},{mark:g},{_format_error(median)}\n")
    except OSError as exc:
        raise OSError(f"cannot write aggregate CSV to {path!r}: {exc}") from exc


def read_samples_csv(path: str) -> list:
    """Parse a samples CSV back into SamplePoint rows (comments skipped)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "algorithm,seed,elapsed_ms,alpha_error":
                    raise ValueError(f"unexpected CSV header in {path!r}: {line}")
                header_seen = True
                continue
            algorithm, seed, elapsed, error = line.split(",")
            out.append(
                SamplePoint(algorithm, int(seed), float(elapsed), float(error))
            )
    return out


@dataclass(frozen=True)
class ClimbStatsConfig:
    """Settings for the path-length and Pareto-set-size statistics."""

    table_counts: tuple = (10, 25, 50, 100)
    topology: Topology = Topology.CHAIN
    selectivity_mode: SelectivityMode = SelectivityMode.STEINBRUNN
    metrics_count: int = 3
    seeds: tuple = tuple(range(20))
    rmq_iterations: int = 0
    catalog: OperatorCatalog | None = None


def climb_stats(cfg: ClimbStatsConfig) -> list:
    """Median climb path length, plus median final Pareto-set size when
    optimizer iterations are requested, per table count.

    Returns rows {"n", "median_path_length", "median_pareto_size"};
    the size is None when rmq_iterations is 0.
    """
    from .optimizer import pareto_climb, random_plan

    rows = []
    for n in cfg.table_counts:
        paths = []
        sizes = []
        for seed in cfg.seeds:
            spec = GenSpec(
                n=n,
                topology=cfg.topology,
                selectivity_mode=cfg.selectivity_mode,
                seed=seed,
            )
            model = CostModel(
                generate_query(spec),
                cfg.catalog,
                _metric_subset(seed, cfg.metrics_count),
            )
            rng = random.Random(seed)
            paths.append(pareto_climb(model, random_plan(model, rng)).path_length)
            if cfg.rmq_iterations > 0:
                archive = rmq_optimize(
                    model, Budget(max_iterations=cfg.rmq_iterations), seed=seed
                )
                sizes.append(len(archive))
        rows.append(
            {
                "n": n,
                "median_path_length": statistics.median(paths),
                "median_pareto_size": statistics.median(sizes) if sizes else None,
            }
        )
    return rows


def parse_catalog_spec(scans: str, joins: str) -> OperatorCatalog:
    """Build a catalog from config tokens.

    Scan tokens are ``name:time_per_row``; join tokens are
    ``kind[:coefficient]`` where the coefficient is the loop factor for
    nested_loop and the buffer page count for sort_merge.
    """
    scan_ops = []
    for token in _split_tokens(scans):
        name, _, factor = token.partition(":")
        scan_ops.append(ScanOp(name, time_per_row=float(factor) if factor else 1.0))
    join_ops = []
    for token in _split_tokens(joins):
        kind, _, coeff = token.partition(":")
        if kind == "nested_loop":
            op = JoinOp(kind, kind=kind, loop_factor=float(coeff) if coeff else 1e-3)
        elif kind == "sort_merge":
            op = JoinOp(kind, kind=kind, buffer_pages=float(coeff) if coeff else 64.0)
        else:
            op = JoinOp(kind, kind=kind)
        join_ops.append(op)
    return OperatorCatalog(scan_ops=tuple(scan_ops), join_ops=tuple(join_ops))


def _split_tokens(raw: str) -> list:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]
