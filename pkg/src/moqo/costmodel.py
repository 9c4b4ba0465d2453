"""Synthetic query instances and a multi-metric plan cost model.

A query instance fixes table cardinalities and pairwise join selectivities
over one of three join-graph topologies. The cost model prices plan trees
on up to three metrics (execution time, buffer space, disc space) with
per-node formulas that depend only on input and output cardinalities, so
total plan cost is the sum of node-local costs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .core import CostVector, OutputFormat, Plan, TableSet

METRIC_NAMES = ("time", "buffer", "disc")
N_METRICS = 3


class Topology(enum.Enum):
    CHAIN = "chain"
    CYCLE = "cycle"
    STAR = "star"


Edge = tuple  # (table_a, table_b, selectivity)


@dataclass(frozen=True)
class QueryInstance:
    """A join query: table cardinalities plus selectivity-weighted edges.

    Tables absent from a common edge combine as a cross product with
    selectivity 1. ``topology`` must describe the edge set exactly.
    """

    n: int
    cards: tuple
    edges: tuple
    topology: Topology

    def __post_init__(self) -> None:
        if not 1 <= self.n <= 128:
            raise ValueError(f"table count {self.n} outside [1, 128]")
        if len(self.cards) != self.n:
            raise ValueError("need one cardinality per table")
        if any(c < 1 for c in self.cards):
            raise ValueError("table cardinalities must be >= 1")
        seen = set()
        for a, b, sel in self.edges:
            if a == b or not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"bad edge endpoints ({a}, {b})")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            if not 0.0 < sel <= 1.0:
                raise ValueError(f"selectivity {sel} outside (0, 1]")
        expected = _topology_pairs(self.topology, self.n)
        if seen != expected:
            raise ValueError(
                f"edge set does not match {self.topology.value} over {self.n} tables"
            )

    @property
    def m(self) -> float:
        """Largest table cardinality."""
        return max(self.cards)


def _topology_pairs(topology: Topology, n: int) -> set:
    if topology is Topology.CHAIN:
        return {(i, i + 1) for i in range(n - 1)}
    if topology is Topology.CYCLE:
        if n < 3:
            raise ValueError("cycle topology needs at least 3 tables")
        return {(i, i + 1) for i in range(n - 1)} | {(0, n - 1)}
    if topology is Topology.STAR:
        return {(0, i) for i in range(1, n)}
    raise ValueError(f"unknown topology {topology}")


def cardinality(query: QueryInstance, tables: TableSet) -> float:
    """Expected output rows of joining exactly the given tables.

    Product of member cardinalities times the selectivity of every edge
    with both endpoints inside the set. Join-order independent.
    """
    if not tables:
        raise ValueError("cardinality of the empty table set is undefined")
    card = 1.0
    for t in tables:
        card *= query.cards[t]
    for a, b, sel in query.edges:
        if a in tables and b in tables:
            card *= sel
    return card


@dataclass(frozen=True)
class ScanOp:
    """Table scan priced per row; ``time_per_row`` differentiates variants."""

    name: str
    time_per_row: float = 1.0
    buffer: float = 1.0
    disc: float = 0.0
    fmt: OutputFormat = OutputFormat.PIPELINED


@dataclass(frozen=True)
class JoinOp:
    """Join implementation; ``kind`` selects the cost formula family."""

    name: str
    kind: str
    fmt: OutputFormat = OutputFormat.PIPELINED
    loop_factor: float = 1e-3
    buffer_pages: float = 64.0

    def __post_init__(self) -> None:
        if self.kind not in ("nested_loop", "hash", "sort_merge"):
            raise ValueError(f"unknown join kind {self.kind!r}")


@dataclass(frozen=True)
class OperatorCatalog:
    scan_ops: tuple
    join_ops: tuple

    def __post_init__(self) -> None:
        if not self.scan_ops or not self.join_ops:
            raise ValueError("catalog needs at least one scan and one join operator")

    @property
    def r(self) -> int:
        """Largest operator-implementation count."""
        return max(len(self.scan_ops), len(self.join_ops))


def default_catalog() -> OperatorCatalog:
    return OperatorCatalog(
        scan_ops=(
            ScanOp("seq_scan", time_per_row=1.0),
            ScanOp("sample_scan", time_per_row=0.1),
        ),
        join_ops=(
            JoinOp("nested_loop", kind="nested_loop"),
            JoinOp("hash", kind="hash"),
            JoinOp("sort_merge", kind="sort_merge"),
        ),
    )


def materializing_catalog() -> OperatorCatalog:
    """Default catalog variant whose sort-merge join materializes its
    output; exercises mixed-format handling."""
    base = default_catalog()
    joins = tuple(
        JoinOp(op.name, kind=op.kind, fmt=OutputFormat.MATERIALIZED)
        if op.kind == "sort_merge"
        else op
        for op in base.join_ops
    )
    return OperatorCatalog(scan_ops=base.scan_ops, join_ops=joins)


def _scan_local3(op: ScanOp, card: float) -> tuple:
    return (op.time_per_row * card, op.buffer, op.disc)


def _join_local3(op: JoinOp, out_o: float, out_i: float, out: float) -> tuple:
    if op.kind == "nested_loop":
        return (out_o * out_i * op.loop_factor + out, 2.0, 0.0)
    if op.kind == "hash":
        return (out_o + out_i + out, out_o, 0.0)
    # sort_merge
    time = out_o * math.log2(1.0 + out_o) + out_i * math.log2(1.0 + out_i) + out
    return (time, op.buffer_pages, out_o + out_i)


class CostModel:
    """Binds a query, an operator catalog and an active metric subset.

    Builds plan nodes with their cached cost, output cardinality and
    format. Per-node local costs are floored at 1 in every active metric,
    and a node's total cost is local plus both children's totals.
    """

    def __init__(
        self,
        query: QueryInstance,
        catalog: OperatorCatalog | None = None,
        metrics: Sequence[int] = (0, 1, 2),
    ) -> None:
        self.query = query
        self.catalog = catalog if catalog is not None else default_catalog()
        metrics = tuple(metrics)
        if not metrics or len(set(metrics)) != len(metrics):
            raise ValueError("metrics must be a non-empty set of indices")
        if any(not 0 <= k < N_METRICS for k in metrics):
            raise ValueError(f"metric indices must lie in [0, {N_METRICS})")
        if list(metrics) != sorted(metrics):
            raise ValueError("metrics must be listed in ascending order")
        self.metrics = metrics
        self.full_set = TableSet.range_of(query.n)
        self._cross_sel: dict = {}
        self._leaves: dict = {}
        # flattened per-op records and interned TableSets for the join
        # fast path, which dominates optimizer run time
        self._join_specs = tuple(
            (op.kind, op.fmt, op.loop_factor, op.buffer_pages)
            for op in self.catalog.join_ops
        )
        self._rels: dict = {self.full_set.bits: self.full_set}
        self._all_three = metrics == (0, 1, 2)

    @property
    def n_metrics(self) -> int:
        return len(self.metrics)

    def _project_floor(self, local3: tuple) -> CostVector:
        return tuple(max(1.0, local3[k]) for k in self.metrics)

    def scan_local_cost(self, scan_op: int, card: float) -> CostVector:
        return self._project_floor(_scan_local3(self.catalog.scan_ops[scan_op], card))

    def join_local_cost(
        self, join_op: int, out_o: float, out_i: float, out: float
    ) -> CostVector:
        return self._project_floor(
            _join_local3(self.catalog.join_ops[join_op], out_o, out_i, out)
        )

    def cross_selectivity(self, left: TableSet, right: TableSet) -> float:
        """Product of selectivities of edges crossing between the two sets."""
        key = (left.bits, right.bits)
        sel = self._cross_sel.get(key)
        if sel is None:
            sel = 1.0
            for a, b, s in self.query.edges:
                if (a in left and b in right) or (a in right and b in left):
                    sel *= s
            self._cross_sel[key] = sel
            self._cross_sel[(right.bits, left.bits)] = sel
        return sel

    def join_out_card(self, outer: Plan, inner: Plan) -> float:
        return (
            outer.out_card
            * inner.out_card
            * self.cross_selectivity(outer.rel, inner.rel)
        )

    def leaf(self, table: int, scan_op: int) -> Plan:
        key = (table, scan_op)
        plan = self._leaves.get(key)
        if plan is None:
            op = self.catalog.scan_ops[scan_op]
            card = float(self.query.cards[table])
            plan = Plan(
                rel=TableSet.singleton(table),
                cost=self.scan_local_cost(scan_op, card),
                out_card=card,
                fmt=op.fmt,
                table=table,
                scan_op=scan_op,
            )
            self._leaves[key] = plan
        return plan

    def join(self, outer: Plan, inner: Plan, join_op: int) -> Plan:
        # hand-inlined equivalent of join_local_cost + join_out_card;
        # plan_cost and the batched kernels replicate this operation
        # order exactly, so keep the three paths in sync
        orel = outer.rel
        irel = inner.rel
        key = (orel.bits, irel.bits)
        cs = self._cross_sel.get(key)
        if cs is None:
            cs = self.cross_selectivity(orel, irel)
        oc = outer.out_card
        ic = inner.out_card
        out = oc * ic * cs
        kind, fmt, loop_factor, buffer_pages = self._join_specs[join_op]
        if kind == "nested_loop":
            t, b, d = oc * ic * loop_factor + out, 2.0, 0.0
        elif kind == "hash":
            t, b, d = oc + ic + out, oc, 0.0
        else:
            t = oc * math.log2(1.0 + oc) + ic * math.log2(1.0 + ic) + out
            b, d = buffer_pages, oc + ic
        ocost = outer.cost
        icost = inner.cost
        if self._all_three:
            cost = (
                (max(1.0, t) + ocost[0]) + icost[0],
                (max(1.0, b) + ocost[1]) + icost[1],
                (max(1.0, d) + ocost[2]) + icost[2],
            )
        else:
            local3 = (t, b, d)
            cost = tuple(
                (max(1.0, local3[k]) + a) + b2
                for k, a, b2 in zip(self.metrics, ocost, icost)
            )
        rbits = orel.bits | irel.bits
        rel = self._rels.get(rbits)
        if rel is None:
            rel = TableSet(rbits)
            self._rels[rbits] = rel
        return Plan(rel, cost, out, fmt, -1, -1, outer, inner, join_op)


def plan_cost(model: CostModel, plan: Plan) -> CostVector:
    """Recompute a plan's total cost from scratch.

    Mirrors the construction-time evaluation order, so the result is
    bit-identical to the cached ``plan.cost``.
    """
    if not plan.is_join:
        return model.scan_local_cost(plan.scan_op, float(model.query.cards[plan.table]))
    outer_cost = plan_cost(model, plan.outer)
    inner_cost = plan_cost(model, plan.inner)
    out = model.join_out_card(plan.outer, plan.inner)
    local = model.join_local_cost(
        plan.join_op, plan.outer.out_card, plan.inner.out_card, out
    )
    return tuple(l + a + b for l, a, b in zip(local, outer_cost, inner_cost))
