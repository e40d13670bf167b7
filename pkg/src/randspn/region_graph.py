"""Random region graphs: hierarchical balanced splits of a variable set.

A region is a non-empty subset of the variable indices {0, ..., num_vars-1},
kept as a sorted tuple. A partition splits a region into two non-empty,
non-overlapping child regions whose union is the parent. The region graph is
a bipartite DAG alternating between regions and partitions: the full variable
set is the unique root, leaf regions have no child partitions.

Construction draws, for each of R repetitions, a recursive random balanced
split of the root down to depth D (or until regions become singletons).
Region nodes are shared between repetitions when the same scope shows up at
the same split level; partitions are shared when the same unordered scope
pair is drawn under the same parent. Keying nodes by (scope, level) rather
than scope alone keeps every root-to-leaf path at most D partitions long even
when one repetition happens to reproduce a scope at a different depth than
another.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput


class Region:
    """One region node. Identity is the node, not the scope."""

    __slots__ = ("index", "scope", "level", "child_partitions", "parent_partitions")

    def __init__(self, index: int, scope: tuple[int, ...], level: int):
        self.index = index
        self.scope = scope
        self.level = level
        self.child_partitions: list[Partition] = []
        self.parent_partitions: list[Partition] = []

    @property
    def is_leaf(self) -> bool:
        return not self.child_partitions

    def __repr__(self):
        return f"Region({list(self.scope)}@L{self.level})"


class Partition:
    """A 2-way split of a parent region. Children ordered larger scope first."""

    __slots__ = ("index", "parent", "children")

    def __init__(self, index: int, parent: Region, children: tuple[Region, Region]):
        self.index = index
        self.parent = parent
        self.children = children

    def __repr__(self):
        a, b = self.children
        return f"Partition({list(a.scope)} | {list(b.scope)})"


@dataclass
class RegionGraph:
    num_vars: int
    depth: int
    repetitions: int
    seed: int | None
    regions: list[Region] = field(default_factory=list)
    partitions: list[Partition] = field(default_factory=list)

    @property
    def root(self) -> Region:
        return self.regions[0]

    def region_kind(self, region: Region) -> str:
        if len(region.scope) == self.num_vars:
            return "root"
        return "leaf" if region.is_leaf else "internal"

    def leaf_regions(self) -> list[Region]:
        return [r for r in self.regions if r.is_leaf]

    def structure_signature(self):
        """Hashable summary used to compare graphs for structural identity."""
        regions = tuple((r.level, r.scope) for r in self.regions)
        partitions = tuple(
            (p.parent.level, p.parent.scope, p.children[0].scope, p.children[1].scope)
            for p in self.partitions
        )
        return regions, partitions


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str):
        self.violations.append(message)

    def __repr__(self):
        if self.ok:
            return "ValidationReport(ok)"
        return "ValidationReport(\n  " + "\n  ".join(self.violations) + "\n)"


def _canonical_children(a: Region, b: Region) -> tuple[Region, Region]:
    # larger-or-equal scope first; equal sizes ordered lexicographically
    return (a, b) if (-len(a.scope), a.scope) <= (-len(b.scope), b.scope) else (b, a)


class _Builder:
    def __init__(self, num_vars, depth, repetitions, seed):
        self.graph = RegionGraph(num_vars, depth, repetitions, seed)
        self._regions_by_key: dict[tuple[int, tuple[int, ...]], Region] = {}
        self._partition_keys: dict[tuple, Partition] = {}

    def region(self, scope: tuple[int, ...], level: int) -> Region:
        key = (level, scope)
        node = self._regions_by_key.get(key)
        if node is None:
            node = Region(len(self.graph.regions), scope, level)
            self.graph.regions.append(node)
            self._regions_by_key[key] = node
        return node

    def partition(self, parent: Region, c1: Region, c2: Region) -> Partition:
        first, second = _canonical_children(c1, c2)
        key = (parent.index, first.scope, second.scope)
        node = self._partition_keys.get(key)
        if node is None:
            node = Partition(len(self.graph.partitions), parent, (first, second))
            self.graph.partitions.append(node)
            self._partition_keys[key] = node
            parent.child_partitions.append(node)
            first.parent_partitions.append(node)
            second.parent_partitions.append(node)
        return node


def random_region_graph(
    num_vars: int, depth: int, repetitions: int, seed: int | None = None
) -> RegionGraph:
    """Draw a random region graph over ``num_vars`` variables.

    Each repetition recursively splits the root region into two balanced
    halves (a uniformly random permutation cut at ceil(n/2)) down to ``depth``
    levels, stopping early at singleton regions. Identical draws are merged,
    so the root ends up with at most ``repetitions`` child partitions.
    Deterministic for a fixed seed.
    """
    if num_vars < 1:
        raise InvalidInput(f"num_vars must be >= 1, got {num_vars}")
    if depth < 1:
        raise InvalidInput(f"depth must be >= 1, got {depth}")
    if repetitions < 1:
        raise InvalidInput(f"repetitions must be >= 1, got {repetitions}")

    rng = np.random.default_rng(seed)
    builder = _Builder(num_vars, depth, repetitions, seed)
    root = builder.region(tuple(range(num_vars)), 0)

    def split(region: Region, budget: int):
        perm = rng.permutation(np.asarray(region.scope))
        cut = (len(perm) + 1) // 2
        left = builder.region(tuple(sorted(int(v) for v in perm[:cut])), region.level + 1)
        right = builder.region(tuple(sorted(int(v) for v in perm[cut:])), region.level + 1)
        builder.partition(region, left, right)
        if budget > 1:
            if len(left.scope) > 1:
                split(left, budget - 1)
            if len(right.scope) > 1:
                split(right, budget - 1)

    for _ in range(repetitions):
        if num_vars > 1:
            split(root, depth)

    return builder.graph


def validate_region_graph(graph: RegionGraph) -> ValidationReport:
    """Check the bipartite-DAG conditions and node deduplication.

    Violations are collected into the report rather than raised, so a single
    call describes everything wrong with a hand-built or corrupted graph.
    """
    report = ValidationReport()
    full_scope = tuple(range(graph.num_vars))

    roots = [r for r in graph.regions if tuple(r.scope) == full_scope]
    if not roots:
        report.add("no root region: no region covers all variables")
    elif len(roots) > 1:
        report.add(f"multiple root regions covering all variables: {roots}")
    root = roots[0] if roots else None

    seen_keys = {}
    for region in graph.regions:
        scope = tuple(region.scope)
        if len(scope) == 0:
            report.add(f"empty scope at region #{region.index}")
        if len(set(scope)) != len(scope):
            report.add(f"repeated variable indices in region {region}")
        if any(v < 0 or v >= graph.num_vars for v in scope):
            report.add(f"region {region} has variable indices outside 0..{graph.num_vars - 1}")
        key = (region.level, scope)
        if key in seen_keys:
            report.add(f"duplicate scope: {list(scope)} appears twice at level {region.level}")
        seen_keys[key] = region

        for child in region.child_partitions:
            if not isinstance(child, Partition):
                report.add(f"region {region} has a non-partition child {child!r}")
        if region is root and region.parent_partitions:
            report.add("root region has a parent partition")
        if region is not root and not region.parent_partitions:
            report.add(f"region {region} is not the root but has no parent partition")

    for part in graph.partitions:
        if not isinstance(part.parent, Region):
            report.add(f"partition #{part.index} has a non-region parent")
            continue
        children = part.children
        if len(children) != 2:
            report.add(f"partition #{part.index} has {len(children)} children (expected 2)")
            continue
        a, b = children
        if not (isinstance(a, Region) and isinstance(b, Region)):
            report.add(f"partition #{part.index} has a non-region child")
            continue
        sa, sb = set(a.scope), set(b.scope)
        if not sa or not sb:
            report.add(f"partition {part} has an empty child region")
        if sa & sb:
            report.add(f"partition {part} children overlap on {sorted(sa & sb)}")
        if sa | sb != set(part.parent.scope):
            report.add(
                f"partition {part} does not cover parent {list(part.parent.scope)}"
            )
        if part not in part.parent.child_partitions:
            report.add(f"partition {part} missing from its parent's child list")
        for child in (a, b):
            if part not in child.parent_partitions:
                report.add(f"region {child} missing back-reference to partition {part}")

    _check_acyclic(graph, report)
    return report


def _check_acyclic(graph: RegionGraph, report: ValidationReport):
    state: dict[int, int] = {}  # id(node) -> 1 visiting, 2 done

    def visit(node) -> bool:
        mark = state.get(id(node))
        if mark == 1:
            return False
        if mark == 2:
            return True
        state[id(node)] = 1
        if isinstance(node, Region):
            children = node.child_partitions
        else:
            children = getattr(node, "children", ())  # tolerate bogus injected nodes
        for child in children:
            if not visit(child):
                state[id(node)] = 2
                return False
        state[id(node)] = 2
        return True

    for region in graph.regions:
        if not visit(region):
            report.add("region graph contains a cycle")
            return
