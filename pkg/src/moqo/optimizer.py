"""Randomized multi-objective plan search.

One iteration draws a uniformly random bushy plan, hill-climbs it with
simultaneous sub-tree mutations until no neighbor strictly dominates,
then feeds the climbed plan's intermediate results through a shared plan
cache that approximates one Pareto frontier per table set. The cache's
precision factor tightens with the iteration count, so early iterations
keep the cache tiny while later ones refine it toward exact frontiers.
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .core import (
    Archive,
    Plan,
    TableSet,
    approx_dominates,
    same_output,
    strictly_dominates,
    weakly_dominates,
)
from .costmodel import CostModel

log = logging.getLogger(__name__)

# Mutation rules in their fixed enumeration order.
RULE_IDENTITY = "identity"
RULE_COMMUTATIVITY = "commutativity"
RULE_RIGHT_ROTATION = "right_rotation"
RULE_LEFT_ROTATION = "left_rotation"
RULE_LEFT_EXCHANGE = "left_exchange"
RULE_RIGHT_EXCHANGE = "right_exchange"
RULE_OPERATOR = "operator"

DEFAULT_RULES = (
    RULE_IDENTITY,
    RULE_COMMUTATIVITY,
    RULE_RIGHT_ROTATION,
    RULE_LEFT_ROTATION,
    RULE_LEFT_EXCHANGE,
    RULE_RIGHT_EXCHANGE,
    RULE_OPERATOR,
)


class CacheLimitError(RuntimeError):
    """Raised when the plan cache exceeds its configured hard size cap."""


def random_plan(model: CostModel, rng: random.Random) -> Plan:
    """Uniformly random bushy plan with random operators, O(n).

    The tree shape is grown one leaf at a time: each step grafts a fresh
    leaf onto a uniformly chosen node and side, which makes every shape
    with k leaves equally likely. Tables are then assigned by a uniform
    random permutation and every node gets a uniform random operator.
    """
    n = model.query.n
    shape = _random_shape(n, rng)
    tables = list(range(n))
    rng.shuffle(tables)
    next_table = iter(tables)
    n_scan = len(model.catalog.scan_ops)
    n_join = len(model.catalog.join_ops)

    def build(node: _ShapeNode) -> Plan:
        if node.left is None:
            return model.leaf(next(next_table), rng.randrange(n_scan))
        outer = build(node.left)
        inner = build(node.right)
        return model.join(outer, inner, rng.randrange(n_join))

    return build(shape)


class _ShapeNode:
    __slots__ = ("left", "right", "parent")

    def __init__(self) -> None:
        self.left: _ShapeNode | None = None
        self.right: _ShapeNode | None = None
        self.parent: _ShapeNode | None = None


def _random_shape(n: int, rng: random.Random) -> _ShapeNode:
    root = _ShapeNode()
    nodes = [root]
    for _ in range(n - 1):
        pick = rng.randrange(2 * len(nodes))
        victim = nodes[pick >> 1]
        graft = _ShapeNode()
        leaf = _ShapeNode()
        parent = victim.parent
        if pick & 1:
            graft.left, graft.right = leaf, victim
        else:
            graft.left, graft.right = victim, leaf
        victim.parent = graft
        leaf.parent = graft
        graft.parent = parent
        if parent is None:
            root = graft
        elif parent.left is victim:
            parent.left = graft
        else:
            parent.right = graft
        nodes.append(graft)
        nodes.append(leaf)
    return root


def mutations(
    model: CostModel, plan: Plan, rules: tuple = DEFAULT_RULES
) -> list:
    """All single transformations applicable at the plan's root.

    Includes the plan itself so that downstream pruning can retain an
    unmutated but sub-tree-improved plan. Rotations and exchanges keep
    the root operator at the root and reuse the displaced child's
    operator for the newly formed child node. Results that introduce
    cross products are legal.
    """
    out: list = []
    for rule in rules:
        if rule == RULE_IDENTITY:
            out.append(plan)
        elif not plan.is_join:
            if rule == RULE_OPERATOR:
                for op in range(len(model.catalog.scan_ops)):
                    if op != plan.scan_op:
                        out.append(model.leaf(plan.table, op))
        elif rule == RULE_COMMUTATIVITY:
            out.append(model.join(plan.inner, plan.outer, plan.join_op))
        elif rule == RULE_RIGHT_ROTATION:
            o = plan.outer
            if o.is_join:
                fresh = model.join(o.inner, plan.inner, o.join_op)
                out.append(model.join(o.outer, fresh, plan.join_op))
        elif rule == RULE_LEFT_ROTATION:
            i = plan.inner
            if i.is_join:
                fresh = model.join(plan.outer, i.outer, i.join_op)
                out.append(model.join(fresh, i.inner, plan.join_op))
        elif rule == RULE_LEFT_EXCHANGE:
            o = plan.outer
            if o.is_join:
                fresh = model.join(o.outer, plan.inner, o.join_op)
                out.append(model.join(fresh, o.inner, plan.join_op))
        elif rule == RULE_RIGHT_EXCHANGE:
            i = plan.inner
            if i.is_join:
                fresh = model.join(plan.outer, i.inner, i.join_op)
                out.append(model.join(i.outer, fresh, plan.join_op))
        elif rule == RULE_OPERATOR:
            for op in range(len(model.catalog.join_ops)):
                if op != plan.join_op:
                    out.append(model.join(plan.outer, plan.inner, op))
    return out


def prune_strict(plans: list, new_plan: Plan) -> list:
    """Strict-dominance pruning: reject the newcomer if a same-format
    plan strictly dominates it, else insert it and drop every same-format
    plan it strictly dominates. Mutates and returns the list."""
    for old in plans:
        if old.fmt is new_plan.fmt and strictly_dominates(old.cost, new_plan.cost):
            return plans
    plans[:] = [
        old
        for old in plans
        if not (old.fmt is new_plan.fmt and strictly_dominates(new_plan.cost, old.cost))
    ]
    plans.append(new_plan)
    return plans


def pareto_step(
    model: CostModel, plan: Plan, rules: tuple = DEFAULT_RULES
) -> list:
    """One parallel improvement pass over the whole tree.

    Sub-plans are improved recursively; every pair of improved sub-plans
    is reassembled under the original root operator and all root
    mutations compete. Exactly one plan per output format is kept: a
    candidate replaces the incumbent of its format only by strictly
    dominating it, so the result never branches and the identity plan
    survives at a local optimum. Result order follows first appearance
    of each format.
    """
    return _pareto_step_memo(model, plan, rules, {})


def _pareto_step_memo(
    model: CostModel, plan: Plan, rules: tuple, memo: dict
) -> list:
    # memo is keyed by node identity; subtrees shared between successive
    # climb adoptions reuse their step results unchanged
    got = memo.get(plan)
    if got is not None:
        return got
    # at most two output formats exist; two slots in first-appearance
    # order avoid a dict in the innermost loop
    first = None
    second = None
    if plan.is_join:
        improved_outer = _pareto_step_memo(model, plan.outer, rules, memo)
        improved_inner = _pareto_step_memo(model, plan.inner, rules, memo)
        for o in improved_outer:
            for i in improved_inner:
                if o is plan.outer and i is plan.inner:
                    root = plan
                else:
                    root = model.join(o, i, plan.join_op)
                for cand in mutations(model, root, rules):
                    if first is None:
                        first = cand
                    elif cand.fmt is first.fmt:
                        if strictly_dominates(cand.cost, first.cost):
                            first = cand
                    elif second is None:
                        second = cand
                    elif strictly_dominates(cand.cost, second.cost):
                        second = cand
    else:
        for cand in mutations(model, plan, rules):
            if first is None:
                first = cand
            elif cand.fmt is first.fmt:
                if strictly_dominates(cand.cost, first.cost):
                    first = cand
            elif second is None:
                second = cand
            elif strictly_dominates(cand.cost, second.cost):
                second = cand
    if first is None:
        result = []
    elif second is None:
        result = [first]
    else:
        result = [first, second]
    memo[plan] = result
    return result


class ClimbResult(NamedTuple):
    plan: Plan
    path_length: int


def pareto_climb(
    model: CostModel, plan: Plan, rules: tuple = DEFAULT_RULES
) -> ClimbResult:
    """Hill-climb until no step result strictly dominates the plan.

    Adopts the first strictly dominating plan in enumeration order, one
    neighbor per round, and reports how many plans were adopted.
    """
    path_length = 0
    memo: dict = {}
    while True:
        adopted = None
        for cand in _pareto_step_memo(model, plan, rules, memo):
            if strictly_dominates(cand.cost, plan.cost):
                adopted = cand
                break
        if adopted is None:
            return ClimbResult(plan, path_length)
        plan = adopted
        path_length += 1


def alpha_schedule(i: int) -> float:
    """Precision factor for iteration i: 25 * 0.99 ** floor(i / 25)."""
    if i < 1:
        raise ValueError(f"iteration counter must be >= 1, got {i}")
    return 25.0 * 0.99 ** (i // 25)


def sig_better(p1: Plan, p2: Plan, alpha: float) -> bool:
    """p1 beats p2 significantly: same output format and p1's cost is
    within factor alpha of dominating p2's in every metric."""
    if alpha < 1.0:
        raise ValueError(f"approximation factor must be >= 1, got {alpha}")
    return same_output(p1, p2) and approx_dominates(p1.cost, p2.cost, alpha)


def prune_approx(plans: list, new_plan: Plan, alpha: float) -> list:
    """Approximate-frontier insertion: reject the newcomer if an existing
    same-format plan alpha-approximately dominates it; otherwise drop
    every same-format plan the newcomer weakly dominates and append it.
    Mutates and returns the list."""
    if alpha < 1.0:
        raise ValueError(f"approximation factor must be >= 1, got {alpha}")
    for old in plans:
        if sig_better(old, new_plan, alpha):
            return plans
    plans[:] = [old for old in plans if not sig_better(new_plan, old, 1.0)]
    plans.append(new_plan)
    return plans


class PlanCache:
    """Frontier lists keyed by table set, shared across iterations.

    Entries are never evicted; precision only enters through the alpha
    used at insertion time. An optional hard cap on the total number of
    cached plans aborts the run instead of degrading silently.
    """

    __slots__ = ("_lists", "max_plans", "_count")

    def __init__(self, max_plans: int | None = None) -> None:
        self._lists: dict = {}
        self.max_plans = max_plans
        self._count = 0

    def frontier(self, rel: TableSet) -> list:
        lst = self._lists.get(rel)
        if lst is None:
            lst = []
            self._lists[rel] = lst
        return lst

    def keys(self) -> Iterable[TableSet]:
        return self._lists.keys()

    @property
    def total_plans(self) -> int:
        return self._count

    def _grew(self, delta: int) -> None:
        self._count += delta
        if self.max_plans is not None and self._count > self.max_plans:
            raise CacheLimitError(
                f"plan cache holds {self._count} plans, cap is {self.max_plans}"
            )

    def offer(self, rel: TableSet, plan: Plan, alpha: float) -> None:
        lst = self.frontier(rel)
        before = len(lst)
        prune_approx(lst, plan, alpha)
        self._grew(len(lst) - before)

    def stats(self) -> dict:
        sizes = [len(lst) for lst in self._lists.values()]
        return {
            "keys": len(sizes),
            "plans": self._count,
            "max_list": max(sizes, default=0),
        }


# Below this many candidate comparisons a plain Python offer loop beats
# the vectorized path's setup overhead.
_BATCH_THRESHOLD = 4096


def offer_join_combinations(
    model: CostModel,
    plans: list,
    outs: list,
    ins: list,
    alpha: float,
) -> int:
    """Offer every (outer, inner, join operator) combination to a pruned
    list, in that nesting order. Returns the net length change.

    Semantically identical to calling prune_approx once per combination.
    Large blocks take a vectorized path that batches the rejection test
    against the pre-block list state; that is safe because removals only
    happen through weakly dominating newcomers, so any stale rejector is
    covered by a live one.
    """
    if not outs or not ins:
        return 0
    n_ops = len(model.catalog.join_ops)
    before = len(plans)
    if len(outs) * len(ins) * n_ops * max(1, len(plans)) < _BATCH_THRESHOLD:
        for o in outs:
            for i in ins:
                for op in range(n_ops):
                    prune_approx(plans, model.join(o, i, op), alpha)
        return len(plans) - before

    join_ops = model.catalog.join_ops
    ka, kb = len(outs), len(ins)
    cs = model.cross_selectivity(outs[0].rel, ins[0].rel)
    o_out = np.array([p.out_card for p in outs])
    i_out = np.array([p.out_card for p in ins])
    og = o_out[:, None] * i_out[None, :]
    out_grid = og * cs
    pa = np.array([p.cost for p in outs])
    pb = np.array([p.cost for p in ins])
    n_metrics = pa.shape[1]
    zeros = np.zeros_like(og)

    # Candidate cost grids per operator, replicating the scalar evaluation
    # order so accepted plans carry bit-identical cached costs.
    sort_o = sort_i = None
    per_op = []
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
        per_op.append((local + pa[:, None, :]) + pb[None, :, :])

    flat = np.stack(per_op, axis=2).reshape(ka * kb * n_ops, n_metrics)
    reject = np.zeros(len(flat), dtype=bool)
    snapshot: dict = {}
    for old in plans:
        snapshot.setdefault(old.fmt, []).append(old.cost)
    for op_idx, op in enumerate(join_ops):
        old_costs = snapshot.get(op.fmt)
        if not old_costs:
            continue
        old_arr = np.array(old_costs)
        cand = flat[op_idx::n_ops]
        limit = alpha * cand
        chunk = max(1, 4_000_000 // (len(old_arr) * n_metrics))
        rej = np.empty(len(cand), dtype=bool)
        for lo in range(0, len(cand), chunk):
            hi = min(lo + chunk, len(cand))
            rej[lo:hi] = (
                (old_arr[None, :, :] <= limit[lo:hi, None, :]).all(-1).any(-1)
            )
        reject[op_idx::n_ops] = rej

    accepted: list = []
    for flat_idx in np.flatnonzero(~reject):
        op_idx = flat_idx % n_ops
        pair = flat_idx // n_ops
        fmt = join_ops[op_idx].fmt
        row = flat[flat_idx]
        covered = False
        for prev in accepted:
            if prev.fmt is fmt and approx_dominates(prev.cost, tuple(row), alpha):
                covered = True
                break
        if covered:
            continue
        plan = model.join(outs[pair // kb], ins[pair % kb], op_idx)
        cost = plan.cost
        plans[:] = [
            old
            for old in plans
            if not (old.fmt is fmt and weakly_dominates(cost, old.cost))
        ]
        plans.append(plan)
        accepted.append(plan)
    return len(plans) - before


def approximate_frontiers(
    model: CostModel, plan: Plan, cache: PlanCache, iteration: int
) -> PlanCache:
    """Refine cached frontiers along one climbed plan.

    Walks the plan post-order. Every leaf offers all scan operators for
    its table; every join crosses the cached frontiers of its input table
    sets (including entries from earlier iterations and other join
    orders) with all join operators. Offers prune at the iteration's
    precision factor, floored at 1 once the schedule drops below it.
    """
    if iteration < 1:
        raise ValueError(f"iteration counter must be >= 1, got {iteration}")
    alpha = max(1.0, alpha_schedule(iteration))
    _approximate_rec(model, plan, cache, alpha)
    return cache


def _approximate_rec(
    model: CostModel, plan: Plan, cache: PlanCache, alpha: float
) -> None:
    if not plan.is_join:
        for op in range(len(model.catalog.scan_ops)):
            cache.offer(plan.rel, model.leaf(plan.table, op), alpha)
        return
    _approximate_rec(model, plan.outer, cache, alpha)
    _approximate_rec(model, plan.inner, cache, alpha)
    delta = offer_join_combinations(
        model,
        cache.frontier(plan.rel),
        cache.frontier(plan.outer.rel),
        cache.frontier(plan.inner.rel),
        alpha,
    )
    cache._grew(delta)


@dataclass(frozen=True)
class Budget:
    """Search budget: a wall-clock deadline, an iteration cap, or both."""

    max_iterations: int | None = None
    deadline_s: float | None = None

    def __post_init__(self) -> None:
        if self.max_iterations is None and self.deadline_s is None:
            raise ValueError("budget needs an iteration cap or a deadline")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("iteration cap must be >= 0")
        if self.deadline_s is not None and self.deadline_s < 0:
            raise ValueError("deadline must be >= 0")

    def exhausted(self, iterations_done: int, elapsed_s: float) -> bool:
        if self.max_iterations is not None and iterations_done >= self.max_iterations:
            return True
        if self.deadline_s is not None and elapsed_s >= self.deadline_s:
            return True
        return False


ProgressSink = Callable[[float, list], None]


def rmq_optimize(
    model: CostModel,
    budget: Budget,
    seed: int = 0,
    progress_sink: ProgressSink | None = None,
    cache: PlanCache | None = None,
    rules: tuple = DEFAULT_RULES,
    schedule: Callable[[int], float] = alpha_schedule,
) -> Archive:
    """Randomized multi-objective optimization of the model's query.

    Repeats random plan generation, Pareto climbing and frontier
    approximation until the budget runs out, then reports the cached
    frontier of the full table set as a strictly pruned archive. The
    progress sink, if given, sees the live full-set frontier after every
    iteration and must only snapshot cost vectors.
    """
    rng = random.Random(seed)
    if cache is None:
        cache = PlanCache()
    full = model.full_set
    start = time.perf_counter()
    iteration = 0
    while not budget.exhausted(iteration, time.perf_counter() - start):
        iteration += 1
        plan = random_plan(model, rng)
        climbed = pareto_climb(model, plan, rules).plan
        alpha = max(1.0, schedule(iteration))
        _approximate_rec(model, climbed, cache, alpha)
        if progress_sink is not None:
            progress_sink(time.perf_counter() - start, cache.frontier(full))
    log.debug("cache after %d iterations: %s", iteration, cache.stats())
    archive = Archive()
    for plan in cache.frontier(full):
        archive.insert(plan)
    return archive
