"""Graph model, two-coordinate vertex labels, and layered-tree validation.

A layered tree (DLT) is a rooted spanning tree in which every child's label
strictly exceeds its parent's label and every child knows its parent's label.
This module holds the immutable graph representation, the label order, the
label-to-round embedding used for wake scheduling, and the structural
validators the protocol modules rely on.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

GENERATOR_KINDS = ("ring", "path", "complete", "random-gnp", "random-tree")

_GNP_MAX_RETRIES = 200


class GraphError(ValueError):
    """Malformed or unusable graph input."""


def ceil_log2(x: int) -> int:
    """Smallest k with 2**k >= x, for x >= 1."""
    if x < 1:
        raise ValueError(f"ceil_log2 undefined for {x}")
    return (x - 1).bit_length()


def log_star(x: float) -> int:
    """Number of times log2 must be applied to x before it drops to <= 2."""
    import math

    count = 0
    while x > 2:
        x = math.log2(x)
        count += 1
    return count


@dataclass(frozen=True, order=True)
class VertexLabel:
    """Ordered pair ``(tree_id, level)`` compared lexicographically.

    ``tree_id`` is shared by every vertex of one tree and dominates the
    order; ``level`` orders vertices inside a tree.
    """

    tree_id: int
    level: int

    def __repr__(self) -> str:
        return f"<{self.tree_id},{self.level}>"


def label_compare(a: VertexLabel, b: VertexLabel) -> int:
    """Return -1, 0, or 1 as ``a`` is below, equal to, or above ``b``."""
    if a == b:
        return 0
    return -1 if a < b else 1


def label_to_round(label: VertexLabel, n_hat: int, n: int) -> int:
    """Map a label to its wake-round index, preserving the label order.

    The mapping is ``tree_id * (n + 1) + level`` with range
    ``(n_hat + 1) * (n + 1)``; it is a strict order embedding of
    ``label_compare`` for all in-range labels.
    """
    max_level = max(n - 1, 0)
    if not 0 <= label.tree_id < n_hat:
        raise ValueError(f"tree_id {label.tree_id} outside [0, {n_hat})")
    if not 0 <= label.level <= max_level:
        raise ValueError(f"level {label.level} outside [0, {max_level}]")
    return label.tree_id * (n + 1) + label.level


def round_window(n_hat: int, n: int) -> int:
    """Size of the round window that fits every in-range label."""
    return (n_hat + 1) * (n + 1)


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected connected graph with IDs drawn from [n_hat)."""

    n: int
    n_hat: int
    vertices: tuple[int, ...]
    adjacency: Mapping[int, tuple[int, ...]]

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency.values()), default=0)

    def edges(self) -> list[tuple[int, int]]:
        """Each undirected edge once, as (min, max), sorted."""
        out = []
        for u in self.vertices:
            for w in self.adjacency[u]:
                if u < w:
                    out.append((u, w))
        out.sort()
        return out

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency.values()) // 2


def _check_connected(vertices: Iterable[int], adjacency: Mapping[int, tuple[int, ...]]) -> bool:
    verts = list(vertices)
    if not verts:
        return False
    seen = {verts[0]}
    queue = deque([verts[0]])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == len(verts)


def make_graph(
    edges: Iterable[tuple[int, int]],
    *,
    n_hat: int | None = None,
    isolated: Iterable[int] = (),
    require_connected: bool = True,
) -> Graph:
    """Build and validate a :class:`Graph` from an undirected edge list.

    ``isolated`` lists vertices with no incident edges (a singleton graph is
    the common case).  ``n_hat`` defaults to ``max ID + 1``.
    """
    adj: dict[int, set[int]] = {}
    for v in isolated:
        adj.setdefault(v, set())
    for u, w in edges:
        if u == w:
            raise GraphError(f"self-loop at vertex {u}")
        if u in adj and w in adj[u]:
            raise GraphError(f"duplicate edge ({u}, {w})")
        adj.setdefault(u, set()).add(w)
        adj.setdefault(w, set()).add(u)
    if not adj:
        raise GraphError("graph has no vertices")
    verts = tuple(sorted(adj))
    if any(v < 0 for v in verts):
        raise GraphError("vertex IDs must be nonnegative")
    bound = max(verts) + 1
    if n_hat is None:
        n_hat = bound
    elif n_hat < bound:
        raise GraphError(f"n_hat {n_hat} too small for vertex ID {max(verts)}")
    if require_connected and not _check_connected(verts, {v: tuple(a) for v, a in adj.items()}):
        raise GraphError("graph is not connected")
    frozen = MappingProxyType({v: tuple(sorted(a)) for v, a in adj.items()})
    return Graph(n=len(verts), n_hat=n_hat, vertices=verts, adjacency=frozen)


def load_graph(text: str) -> Graph:
    """Parse the edge-list document format.

    Lines hold two whitespace-separated nonnegative integers.  An optional
    first line is a header ``n n_hat``; it is treated as a header only when
    reading it as one yields a consistent graph (``1 <= n <= n_hat``, all IDs
    below ``n_hat``, and exactly ``n`` distinct vertices), otherwise it is an
    edge.  Parse and invariant failures carry the offending line number.
    """
    rows: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected two integers, got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: expected two integers, got {raw!r}") from None
        if a < 0 or b < 0:
            raise GraphError(f"line {lineno}: negative vertex ID")
        rows.append((lineno, a, b))
    if not rows:
        raise GraphError("empty graph document")

    def build(edge_rows: list[tuple[int, int, int]], n_hat: int | None, expect_n: int | None) -> Graph:
        adj: dict[int, set[int]] = {}
        for lineno, u, w in edge_rows:
            if u == w:
                raise GraphError(f"line {lineno}: self-loop at vertex {u}")
            if u in adj and w in adj[u]:
                raise GraphError(f"line {lineno}: duplicate edge ({u}, {w})")
            adj.setdefault(u, set()).add(w)
            adj.setdefault(w, set()).add(u)
        if expect_n is not None and not adj:
            if expect_n != 1:
                raise GraphError("header announces vertices but no edges follow")
            adj = {0: set()}
        verts = sorted(adj)
        if n_hat is not None:
            if any(v >= n_hat for v in verts):
                raise GraphError(f"vertex ID {max(verts)} not below header n_hat {n_hat}")
            if expect_n is not None and len(verts) != expect_n:
                raise GraphError(f"header announces {expect_n} vertices, found {len(verts)}")
        if not _check_connected(verts, {v: tuple(a) for v, a in adj.items()}):
            raise GraphError("graph is not connected")
        return make_graph(
            [(u, w) for _, u, w in edge_rows],
            n_hat=n_hat,
            isolated=verts if not edge_rows else (),
        )

    first_line, ha, hb = rows[0]
    if 1 <= ha <= hb:
        try:
            return build(rows[1:], n_hat=hb, expect_n=ha)
        except GraphError:
            pass  # fall through: first line was an edge after all
    return build(rows, n_hat=None, expect_n=None)


def generate_graph(kind: str, n: int, p: float | None = None, seed: int = 0) -> Graph:
    """Deterministic seeded generator; IDs are a seed-determined permutation of [n)."""
    if kind not in GENERATOR_KINDS:
        raise GraphError(f"unknown generator kind {kind!r}")
    if n < 1:
        raise GraphError("n must be >= 1")
    rng = random.Random(f"sleepsim:{kind}:{n}:{p}:{seed}")
    ids = list(range(n))
    rng.shuffle(ids)

    def pos_edges() -> list[tuple[int, int]]:
        if kind == "ring":
            if n == 1:
                return []
            if n == 2:
                return [(0, 1)]
            return [(i, (i + 1) % n) for i in range(n)]
        if kind == "path":
            return [(i, i + 1) for i in range(n - 1)]
        if kind == "complete":
            return [(i, j) for i in range(n) for j in range(i + 1, n)]
        if kind == "random-tree":
            return [(i, rng.randrange(i)) for i in range(1, n)]
        raise AssertionError(kind)

    if kind == "random-gnp":
        if p is None:
            raise GraphError("random-gnp requires p")
        for _ in range(_GNP_MAX_RETRIES):
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
            adj: dict[int, set[int]] = {i: set() for i in range(n)}
            for i, j in edges:
                adj[i].add(j)
                adj[j].add(i)
            if _check_connected(range(n), {v: tuple(a) for v, a in adj.items()}):
                return make_graph(
                    [(ids[i], ids[j]) for i, j in edges],
                    n_hat=n,
                    isolated=ids if not edges else (),
                )
        raise GraphError(f"random-gnp(n={n}, p={p}) not connected after {_GNP_MAX_RETRIES} tries")

    return make_graph(
        [(ids[i], ids[j]) for i, j in pos_edges()],
        n_hat=n,
        isolated=ids if n == 1 else (),
    )


def reroot_levels(tree_edges: Iterable[tuple[int, int]], new_root: int) -> dict[int, int]:
    """Tree distance of every vertex from ``new_root``.

    ``tree_edges`` must form a tree containing ``new_root``; adjacent tree
    vertices end up with levels differing by exactly one.
    """
    adj: dict[int, list[int]] = {}
    count = 0
    for u, w in tree_edges:
        adj.setdefault(u, []).append(w)
        adj.setdefault(w, []).append(u)
        count += 1
    if not adj:
        adj = {new_root: []}
    if new_root not in adj:
        raise GraphError(f"new root {new_root} not in tree")
    if count != len(adj) - 1:
        raise GraphError("edges do not form a tree (wrong edge count)")
    levels = {new_root: 0}
    queue = deque([new_root])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in levels:
                levels[w] = levels[u] + 1
                queue.append(w)
    if len(levels) != len(adj):
        raise GraphError("edges do not form a tree (disconnected)")
    return levels


@dataclass(frozen=True)
class DltVertex:
    """Per-vertex slice of a layered-tree assignment."""

    label: VertexLabel
    parent: int | None
    parent_label: VertexLabel | None
    is_root: bool


@dataclass(frozen=True)
class DltAssignment:
    """Labels plus parent links for every vertex of a graph."""

    entries: Mapping[int, DltVertex]

    @staticmethod
    def from_dict(entries: dict[int, DltVertex]) -> "DltAssignment":
        return DltAssignment(MappingProxyType(dict(entries)))

    def label_of(self, v: int) -> VertexLabel:
        return self.entries[v].label

    def root(self) -> int | None:
        roots = [v for v, e in self.entries.items() if e.is_root]
        return roots[0] if len(roots) == 1 else None

    def tree_edges(self) -> list[tuple[int, int]]:
        return [(v, e.parent) for v, e in sorted(self.entries.items()) if e.parent is not None]

    def children_map(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {v: [] for v in self.entries}
        for v, e in self.entries.items():
            if e.parent is not None:
                out[e.parent].append(v)
        for lst in out.values():
            lst.sort()
        return out


@dataclass(frozen=True)
class CheckReport:
    """Validator outcome: empty ``violations`` means the structure checks out."""

    violations: tuple[tuple[str, str], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dlt(graph: Graph, assignment: DltAssignment) -> CheckReport:
    """Check every layered-tree clause; violations carry a witness string."""
    bad: list[tuple[str, str]] = []
    entries = assignment.entries
    missing = [v for v in graph.vertices if v not in entries]
    extra = [v for v in entries if v not in graph.adjacency]
    if missing:
        bad.append(("coverage", f"vertices without assignment: {missing[:5]}"))
    if extra:
        bad.append(("coverage", f"assignment for unknown vertices: {extra[:5]}"))
    if bad:
        return CheckReport(tuple(bad))

    roots = sorted(v for v, e in entries.items() if e.is_root)
    if len(roots) != 1:
        bad.append(("single-root", f"root flags on {roots}"))
    for v in sorted(entries):
        e = entries[v]
        if e.is_root:
            if e.parent is not None:
                bad.append(("root-parent", f"root {v} has parent {e.parent}"))
            continue
        if e.parent is None:
            bad.append(("orphan", f"non-root {v} has no parent"))
            continue
        if e.parent not in graph.adjacency or e.parent not in graph.adjacency[v]:
            bad.append(("parent-neighbor", f"parent {e.parent} of {v} is not a neighbor"))
            continue
        actual = entries[e.parent].label
        if e.parent_label != actual:
            bad.append(
                ("parent-label", f"vertex {v} records {e.parent_label}, parent has {actual}")
            )
        if not e.label > actual:
            bad.append(("label-order", f"child {v} label {e.label} <= parent label {actual}"))

    if len(roots) == 1:
        # Parent links must reach the root from everywhere without cycles.
        root = roots[0]
        reached: dict[int, bool] = {root: True}
        for v in entries:
            path = []
            x = v
            while x not in reached:
                path.append(x)
                reached[x] = False  # visiting marker
                parent = entries[x].parent
                if parent is None or parent not in entries:
                    break
                x = parent
            ok_here = reached.get(x, False) is True
            for y in path:
                reached[y] = ok_here
            if not ok_here:
                bad.append(("spanning", f"parent walk from {v} does not reach root {root}"))
                break
    return CheckReport(tuple(bad))


def two_coloring_solver(graph: Graph) -> dict[int, int]:
    """Proper 2-coloring by BFS parity; raises GraphError on odd cycles."""
    colors: dict[int, int] = {}
    start = graph.vertices[0]
    colors[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in graph.adjacency[u]:
            if w not in colors:
                colors[w] = 1 - colors[u]
                queue.append(w)
            elif colors[w] == colors[u]:
                raise GraphError("graph is not bipartite")
    return colors


SOLVERS: dict[str, Callable[[Graph], dict[int, int]]] = {
    "leader-election": lambda g: {v: min(g.vertices) for v in g.vertices},
    "edge-count": lambda g: {v: g.edge_count() for v in g.vertices},
    "two-coloring": two_coloring_solver,
}
