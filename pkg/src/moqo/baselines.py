"""Comparison algorithms: exhaustive oracle, DP approximation scheme,
iterative improvement, simulated annealing, two-phase optimization and
NSGA-II.

All anytime runners share the signature (model, budget, seed,
progress_sink) so the benchmark harness can treat them uniformly. The
exhaustive oracle and the DP scheme are deliberately separate
implementations of frontier search; their agreement at full precision is
the package's keystone correctness check.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Archive, Plan, strictly_dominates, weakly_dominates
from .costmodel import CostModel
from .optimizer import (
    DEFAULT_RULES,
    Budget,
    ProgressSink,
    mutations,
    offer_join_combinations,
    pareto_climb,
    prune_approx,
    random_plan,
)

MAX_EXHAUSTIVE_TABLES = 7


def exhaustive_frontier(model: CostModel) -> Archive:
    """Exact Pareto frontier over every bushy plan of the query.

    Covers all tree shapes, leaf permutations and operator assignments by
    enumerating, per table subset in ascending cardinality, every ordered
    two-way partition combined with every join operator. Each subset
    keeps only its non-dominated plans; with node-local costs that is
    lossless for the root frontier. Ties keep the first-built plan.
    """
    n = model.query.n
    if n > MAX_EXHAUSTIVE_TABLES:
        raise ValueError(
            f"exhaustive enumeration supports at most {MAX_EXHAUSTIVE_TABLES} "
            f"tables, got {n}"
        )
    fronts: dict = {}
    for t in range(n):
        kept: list = []
        for op in range(len(model.catalog.scan_ops)):
            _exact_insert(kept, model.leaf(t, op))
        fronts[1 << t] = kept
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            bits = 0
            for t in combo:
                bits |= 1 << t
            kept = []
            sub = (bits - 1) & bits
            while sub:
                _exact_offer_block(model, kept, fronts[sub], fronts[bits ^ sub])
                sub = (sub - 1) & bits
            fronts[bits] = kept
    archive = Archive()
    for plan in fronts[(1 << n) - 1]:
        archive.insert(plan)
    return archive


def _exact_insert(kept: list, plan: Plan) -> None:
    cost = plan.cost
    fmt = plan.fmt
    for old in kept:
        if old.fmt is fmt and weakly_dominates(old.cost, cost):
            return
    kept[:] = [
        old
        for old in kept
        if not (old.fmt is fmt and weakly_dominates(cost, old.cost))
    ]
    kept.append(plan)


def _exact_offer_block(model: CostModel, kept: list, outs: list, ins: list) -> None:
    """Insert every (outer, inner, operator) combination, in that order.

    Large blocks are thinned first by a vectorized test against the
    pre-block frontier; that never changes the outcome because a frontier
    plan is only ever displaced by a weak dominator, which inherits its
    rejections.
    """
    join_ops = model.catalog.join_ops
    n_ops = len(join_ops)
    if len(outs) * len(ins) * n_ops * max(1, len(kept)) < 2048:
        for pa in outs:
            for pb in ins:
                for op in range(n_ops):
                    _exact_insert(kept, model.join(pa, pb, op))
        return

    ka, kb = len(outs), len(ins)
    cs = model.cross_selectivity(outs[0].rel, ins[0].rel)
    o_out = np.array([p.out_card for p in outs])
    i_out = np.array([p.out_card for p in ins])
    og = o_out[:, None] * i_out[None, :]
    out_grid = og * cs
    pa_cost = np.array([p.cost for p in outs])
    pb_cost = np.array([p.cost for p in ins])
    zeros = np.zeros_like(og)
    sort_o = sort_i = None
    slabs = []
    for op in join_ops:
        if op.kind == "nested_loop":
            grids = (og * op.loop_factor + out_grid, np.full_like(og, 2.0), zeros)
        elif op.kind == "hash":
            grids = (
                (o_out[:, None] + i_out[None, :]) + out_grid,
                np.broadcast_to(o_out[:, None], og.shape),
                zeros,
            )
        else:
            if sort_o is None:
                sort_o = np.array([x * math.log2(1.0 + x) for x in o_out.tolist()])
                sort_i = np.array([x * math.log2(1.0 + x) for x in i_out.tolist()])
            grids = (
                (sort_o[:, None] + sort_i[None, :]) + out_grid,
                np.full_like(og, op.buffer_pages),
                o_out[:, None] + i_out[None, :],
            )
        local = np.stack(
            [
                np.maximum(1.0, np.broadcast_to(grids[k], og.shape))
                for k in model.metrics
            ],
            axis=-1,
        )
        slabs.append((local + pa_cost[:, None, :]) + pb_cost[None, :, :])

    n_metrics = len(model.metrics)
    flat = np.stack(slabs, axis=2).reshape(ka * kb * n_ops, n_metrics)
    dominated = np.zeros(len(flat), dtype=bool)
    snapshot: dict = {}
    for old in kept:
        snapshot.setdefault(old.fmt, []).append(old.cost)
    for op_idx, op in enumerate(join_ops):
        old_costs = snapshot.get(op.fmt)
        if not old_costs:
            continue
        old_arr = np.array(old_costs)
        cand = flat[op_idx::n_ops]
        chunk = max(1, 4_000_000 // (len(old_arr) * n_metrics))
        mask = np.empty(len(cand), dtype=bool)
        for lo in range(0, len(cand), chunk):
            hi = min(lo + chunk, len(cand))
            mask[lo:hi] = (
                (old_arr[None, :, :] <= cand[lo:hi, None, :]).all(-1).any(-1)
            )
        dominated[op_idx::n_ops] = mask
    for flat_idx in np.flatnonzero(~dominated):
        op_idx = flat_idx % n_ops
        pair = flat_idx // n_ops
        _exact_insert(kept, model.join(outs[pair // kb], ins[pair % kb], op_idx))


def dp_frontier(
    model: CostModel, alpha: float, deadline_s: float | None = None
) -> Archive | None:
    """Dynamic-programming frontier approximation with factor alpha.

    Enumerates table subsets in ascending cardinality and prunes each
    subset's candidates at the per-level factor alpha ** (1 / (n - 1)),
    so the compounded error at the root stays within alpha. alpha = 1
    computes the exact frontier; alpha = inf keeps one plan per (subset,
    format), the first surviving candidate in enumeration order.

    Returns None if the optional deadline expires before completion.
    """
    if alpha < 1.0:
        raise ValueError(f"approximation factor must be >= 1, got {alpha}")
    n = model.query.n
    per_level = (
        alpha ** (1.0 / max(1, n - 1)) if math.isfinite(alpha) else math.inf
    )
    start = time.perf_counter()
    fronts: dict = {}
    for t in range(n):
        lst: list = []
        for op in range(len(model.catalog.scan_ops)):
            prune_approx(lst, model.leaf(t, op), per_level)
        fronts[1 << t] = lst
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            if deadline_s is not None and time.perf_counter() - start >= deadline_s:
                return None
            bits = 0
            for t in combo:
                bits |= 1 << t
            target: list = []
            sub = (bits - 1) & bits
            while sub:
                if deadline_s is not None and time.perf_counter() - start >= deadline_s:
                    return None
                offer_join_combinations(
                    model, target, fronts[sub], fronts[bits ^ sub], per_level
                )
                sub = (sub - 1) & bits
            fronts[bits] = target
    archive = Archive()
    for plan in fronts[(1 << n) - 1]:
        archive.insert(plan)
    return archive


def run_ii(
    model: CostModel,
    budget: Budget,
    seed: int = 0,
    progress_sink: ProgressSink | None = None,
    rules: tuple = DEFAULT_RULES,
) -> Archive:
    """Iterative improvement: climb fresh random plans to local Pareto
    optima and archive every result."""
    rng = random.Random(seed)
    archive = Archive()
    start = time.perf_counter()
    iteration = 0
    while not budget.exhausted(iteration, time.perf_counter() - start):
        iteration += 1
        plan = random_plan(model, rng)
        archive.insert(pareto_climb(model, plan, rules).plan)
        if progress_sink is not None:
            progress_sink(time.perf_counter() - start, archive.entries)
    return archive


@dataclass(frozen=True)
class SaConfig:
    """Annealing constants; stage length scales with the table count."""

    neighbors_per_table: int = 16
    cooling: float = 0.95
    start_temperature_scale: float = 2.0
    freeze_temperature: float = 1e-3
    freeze_stages: int = 4


@dataclass
class SaState:
    current: Plan
    temperature: float
    stage: int = 0
    unimproved_stages: int = 0


_SA_RULES = tuple(r for r in DEFAULT_RULES if r != "identity")


def _random_neighbor(model: CostModel, plan: Plan, rng: random.Random) -> Plan:
    """Apply one random non-identity mutation at a random node."""
    idx = rng.randrange(2 * len(plan.rel) - 1)
    return _mutate_at(model, plan, idx, rng)


def _mutate_at(model: CostModel, plan: Plan, idx: int, rng: random.Random) -> Plan:
    if idx == 0:
        options = mutations(model, plan, _SA_RULES)
        if not options:
            return plan
        return options[rng.randrange(len(options))]
    idx -= 1
    outer_size = 2 * len(plan.outer.rel) - 1
    if idx < outer_size:
        return model.join(
            _mutate_at(model, plan.outer, idx, rng), plan.inner, plan.join_op
        )
    return model.join(
        plan.outer, _mutate_at(model, plan.inner, idx - outer_size, rng), plan.join_op
    )


def _sa_loop(
    model: CostModel,
    budget: Budget,
    rng: random.Random,
    archive: Archive,
    state: SaState,
    config: SaConfig,
    progress_sink: ProgressSink | None,
    start_time: float,
    iterations_done: int,
) -> int:
    """Run annealing stages until the budget expires or the state
    freezes. Returns the updated iteration count."""
    neighbors = config.neighbors_per_table * model.query.n
    n_metrics = model.n_metrics
    while not budget.exhausted(iterations_done, time.perf_counter() - start_time):
        iterations_done += 1
        state.stage += 1
        improved = False
        for _ in range(neighbors):
            neighbor = _random_neighbor(model, state.current, rng)
            if archive.insert(neighbor):
                improved = True
            if strictly_dominates(neighbor.cost, state.current.cost):
                state.current = neighbor
                continue
            delta = (
                sum(
                    (nb - cur) / cur
                    for nb, cur in zip(neighbor.cost, state.current.cost)
                )
                / n_metrics
            )
            if delta < 0.0:
                delta = 0.0
            if rng.random() < math.exp(-delta / state.temperature):
                state.current = neighbor
        state.temperature *= config.cooling
        if improved:
            state.unimproved_stages = 0
        else:
            state.unimproved_stages += 1
        if progress_sink is not None:
            progress_sink(time.perf_counter() - start_time, archive.entries)
        if (
            state.temperature < config.freeze_temperature
            and state.unimproved_stages >= config.freeze_stages
        ):
            break
    return iterations_done


def run_sa(
    model: CostModel,
    budget: Budget,
    seed: int = 0,
    progress_sink: ProgressSink | None = None,
    config: SaConfig = SaConfig(),
) -> Archive:
    """Simulated annealing over plan mutations.

    Move acceptance uses the mean relative per-metric cost change, so the
    temperature is scale-free; with start-relative normalization the
    start plan's mean normalized cost is exactly 1, making the initial
    temperature the configured scale. A single trajectory is annealed
    until frozen; every visited plan feeds the archive.
    """
    rng = random.Random(seed)
    archive = Archive()
    start_time = time.perf_counter()
    if budget.exhausted(0, 0.0):
        return archive
    current = random_plan(model, rng)
    archive.insert(current)
    state = SaState(
        current=current, temperature=config.start_temperature_scale * 1.0
    )
    _sa_loop(
        model, budget, rng, archive, state, config, progress_sink, start_time, 0
    )
    return archive


def run_2p(
    model: CostModel,
    budget: Budget,
    seed: int = 0,
    progress_sink: ProgressSink | None = None,
    config: SaConfig = SaConfig(),
    improvement_iterations: int = 10,
) -> Archive:
    """Two-phase optimization: a short iterative-improvement burst, then
    annealing from the archive plan with the lowest normalized cost sum
    (per-metric costs divided by the archive minima)."""
    rng = random.Random(seed)
    archive = Archive()
    start_time = time.perf_counter()
    iterations = 0
    while iterations < improvement_iterations and not budget.exhausted(
        iterations, time.perf_counter() - start_time
    ):
        iterations += 1
        plan = random_plan(model, rng)
        archive.insert(pareto_climb(model, plan).plan)
        if progress_sink is not None:
            progress_sink(time.perf_counter() - start_time, archive.entries)
    if not archive.entries:
        return archive
    mins = [
        min(plan.cost[k] for plan in archive.entries)
        for k in range(model.n_metrics)
    ]

    def normalized_sum(plan: Plan) -> float:
        return sum(c / m for c, m in zip(plan.cost, mins))

    handoff = min(archive.entries, key=normalized_sum)
    state = SaState(current=handoff, temperature=0.1 * normalized_sum(handoff))
    _sa_loop(
        model,
        budget,
        rng,
        archive,
        state,
        config,
        progress_sink,
        start_time,
        iterations,
    )
    return archive


@dataclass
class Nsga2Individual:
    """Ordinal plan encoding: join-position genes pick the next table
    from the shrinking remaining-table list (left-deep order), followed
    by per-leaf scan-operator genes and per-join operator genes."""

    genes: list
    plan: Plan | None = field(repr=False, default=None)
    rank: int = 0
    crowding: float = 0.0


def gene_bounds(model: CostModel) -> list:
    """Inclusive upper bound per gene; lower bounds are all zero."""
    n = model.query.n
    ordinal = [n - 1 - k for k in range(n - 1)]
    scans = [len(model.catalog.scan_ops) - 1] * n
    joins = [len(model.catalog.join_ops) - 1] * (n - 1)
    return ordinal + scans + joins


def decode_genes(model: CostModel, genes: list) -> Plan:
    """Total decoding of any in-range gene array into a left-deep plan."""
    n = model.query.n
    ordinal = genes[: n - 1]
    scans = genes[n - 1 : 2 * n - 1]
    joins = genes[2 * n - 1 :]
    remaining = list(range(n))
    order = [remaining.pop(g) for g in ordinal]
    order.append(remaining.pop())
    plan = model.leaf(order[0], scans[0])
    for k in range(1, n):
        plan = model.join(plan, model.leaf(order[k], scans[k]), joins[k - 1])
    return plan


def nondominated_ranks(costs: list) -> list:
    """Fast non-dominated sort; rank 0 is the Pareto frontier."""
    arr = np.array(costs, dtype=float)
    le = (arr[:, None, :] <= arr[None, :, :]).all(-1)
    lt = (arr[:, None, :] < arr[None, :, :]).any(-1)
    dominates = le & lt
    ranks = np.full(len(costs), -1, dtype=int)
    remaining = np.ones(len(costs), dtype=bool)
    rank = 0
    while remaining.any():
        blocked = (dominates & remaining[:, None]).any(0)
        front = remaining & ~blocked
        ranks[front] = rank
        remaining &= ~front
        rank += 1
    return ranks.tolist()


def _crowding_distances(costs: list) -> list:
    size = len(costs)
    if size <= 2:
        return [math.inf] * size
    dist = [0.0] * size
    n_metrics = len(costs[0])
    for k in range(n_metrics):
        order = sorted(range(size), key=lambda i: costs[i][k])
        lo = costs[order[0]][k]
        hi = costs[order[-1]][k]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        if hi <= lo:
            continue
        for pos in range(1, size - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (costs[order[pos + 1]][k] - costs[order[pos - 1]][k]) / (
                    hi - lo
                )
    return dist


def _rank_population(population: list) -> None:
    ranks = nondominated_ranks([ind.plan.cost for ind in population])
    for ind, rank in zip(population, ranks):
        ind.rank = rank
    by_front: dict = {}
    for ind in population:
        by_front.setdefault(ind.rank, []).append(ind)
    for front in by_front.values():
        dists = _crowding_distances([ind.plan.cost for ind in front])
        for ind, d in zip(front, dists):
            ind.crowding = d


def _tournament(rng: random.Random, population: list) -> Nsga2Individual:
    a = population[rng.randrange(len(population))]
    b = population[rng.randrange(len(population))]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a


def run_nsga2(
    model: CostModel,
    budget: Budget,
    seed: int = 0,
    progress_sink: ProgressSink | None = None,
    population_size: int = 200,
    crossover_probability: float = 0.9,
) -> Archive:
    """Elitist genetic search over the ordinal left-deep encoding.

    Each budget iteration evaluates exactly ``population_size`` new
    individuals: the initial population on the first pass, one offspring
    generation afterwards. Selection is binary tournament on (rank,
    crowding); variation is single-point crossover plus per-gene uniform
    resampling at rate 1 / gene count.
    """
    rng = random.Random(seed)
    archive = Archive()
    bounds = gene_bounds(model)
    n_genes = len(bounds)
    mutation_rate = 1.0 / n_genes
    start_time = time.perf_counter()
    population: list = []

    def evaluate(genes: list) -> Nsga2Individual:
        ind = Nsga2Individual(genes=genes, plan=decode_genes(model, genes))
        archive.insert(ind.plan)
        return ind

    def mutate(genes: list) -> list:
        out = list(genes)
        for g in range(n_genes):
            if rng.random() < mutation_rate:
                out[g] = rng.randint(0, bounds[g])
        return out

    iteration = 0
    while not budget.exhausted(iteration, time.perf_counter() - start_time):
        iteration += 1
        if not population:
            population = [
                evaluate([rng.randint(0, hi) for hi in bounds])
                for _ in range(population_size)
            ]
            _rank_population(population)
        else:
            offspring = []
            for _ in range(population_size):
                p1 = _tournament(rng, population)
                p2 = _tournament(rng, population)
                if n_genes > 1 and rng.random() < crossover_probability:
                    cut = rng.randrange(1, n_genes)
                    genes = p1.genes[:cut] + p2.genes[cut:]
                else:
                    genes = list(p1.genes)
                offspring.append(evaluate(mutate(genes)))
            combined = population + offspring
            _rank_population(combined)
            combined.sort(key=lambda ind: (ind.rank, -ind.crowding))
            population = combined[:population_size]
        if progress_sink is not None:
            progress_sink(time.perf_counter() - start_time, archive.entries)
    return archive
