"""Bit-budgeted construction and combinable-solution solvers.

The connection-phase protocol already keeps every message within
O(log n_hat) bits, so the congested build is the same program run under an
enforced budget.  Distance relabeling propagates incremental counters along
the tree instead of shipping structure, and the combinable-problem runner
convergecasts compact partial solutions, finalizes at the root, and
broadcasts the answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

from . import engine as eng
from .cast import _tree_info
from .codec import Dist, Frac, Uint
from .dlt import BuildResult, build_dlt
from .graph import DltAssignment, Graph, GraphError, ceil_log2, make_graph, round_window

BUDGET_LABEL_WORDS = 4
BUDGET_HEADER_BITS = 32


def bit_budget(n_hat: int) -> int:
    """Per-message budget: room for two labels, a distance, and a header."""
    return BUDGET_LABEL_WORDS * ceil_log2(n_hat) + BUDGET_HEADER_BITS


def congest_config(n_hat: int, budget: int | None = None) -> eng.EngineConfig:
    return eng.EngineConfig(
        mode=eng.MODE_CONGEST,
        bit_budget=bit_budget(n_hat) if budget is None else budget,
    )


def build_dlt_congest(graph: Graph, budget: int | None = None) -> BuildResult:
    """Layered-tree construction with the per-message bit budget enforced."""
    return build_dlt(graph, congest_config(graph.n_hat, budget))


# -- distance-propagation relabeling ----------------------------------------


class _PathRelabelProgram(eng.VertexProgram):
    """Reroot a level-labeled tree by propagating incremental distances.

    Phase A climbs the path from the new root to the old root, each hop
    forwarding a counter one larger.  Phase B propagates distances from the
    old root down the old orientation: path vertices already know theirs,
    everyone else adds one to its parent's value.
    """

    def __init__(self, levels, parents, children, new_root, n) -> None:
        self.levels = levels
        self.parents = parents
        self.children = children
        self.new_root = new_root
        self.n = n
        self.width = n + 1

    def _conv_recv(self, lvl: int) -> int:
        return self.n - 1 - lvl

    def _conv_send(self, lvl: int) -> int:
        return self.n - lvl

    def _bcast_recv(self, lvl: int) -> int:
        return self.width + lvl - 1

    def _bcast_own(self, lvl: int) -> int:
        return self.width + lvl

    def on_init(self, ctx: eng.VertexView):
        v = ctx.vertex
        lvl = self.levels[v]
        state = {"on_path": v == self.new_root, "dist": 0 if v == self.new_root else None}
        rounds = [self._bcast_own(lvl)]
        if lvl > 0:
            rounds.append(self._bcast_recv(lvl))
        if v == self.new_root:
            if self.parents[v] is not None:
                rounds.append(self._conv_send(lvl))
        else:
            rounds.append(self._conv_recv(lvl))
        return state, rounds

    def on_send(self, ctx, state, rnd):
        v = ctx.vertex
        lvl = self.levels[v]
        if state["on_path"] and self.parents[v] is not None and rnd == self._conv_send(lvl):
            return [(self.parents[v], Dist(state["dist"] + 1))]
        if rnd == self._bcast_own(lvl) and state["dist"] is not None:
            return [(c, Dist(state["dist"])) for c in self.children[v]]
        return ()

    def on_receive(self, ctx, state, rnd, inbox, api):
        v = ctx.vertex
        lvl = self.levels[v]
        if rnd == self._conv_recv(lvl):
            for _, payload in inbox:
                if isinstance(payload, Dist):
                    state["on_path"] = True
                    state["dist"] = payload.value
                    if self.parents[v] is not None:
                        api.wake(self._conv_send(lvl))
        elif rnd == self._bcast_recv(lvl):
            for src, payload in inbox:
                if src == self.parents[v] and not state["on_path"]:
                    state["dist"] = payload.value + 1
        if rnd == self._bcast_own(lvl):
            api.finish(state["dist"])


def path_distance_relabel(
    tree_edges: Iterable[tuple[int, int]],
    new_root: int,
    old_root: int,
    config: eng.EngineConfig | None = None,
) -> tuple[dict[int, int], eng.RunMetrics]:
    """New levels (distance from ``new_root``) for a tree rooted at ``old_root``.

    Every message carries a single distance counter below the vertex count.
    """
    edges = list(tree_edges)
    graph = make_graph(edges, isolated=[new_root] if not edges else ())
    if old_root not in graph.adjacency:
        raise GraphError(f"old root {old_root} not in tree")
    from .graph import reroot_levels

    levels = reroot_levels(edges, old_root)
    parents: dict[int, int | None] = {old_root: None}
    children: dict[int, list[int]] = {v: [] for v in graph.vertices}
    for v, lvl in levels.items():
        if v == old_root:
            continue
        parent = next(w for w in graph.adjacency[v] if levels[w] == lvl - 1)
        parents[v] = parent
        children[parent].append(v)
    for lst in children.values():
        lst.sort()
    program = _PathRelabelProgram(levels, parents, children, new_root, graph.n)
    result = eng.run(graph, program, config)
    return dict(sorted(result.outputs.items())), result.metrics


# -- combinable problems ------------------------------------------------------


@dataclass(frozen=True)
class CCongestProblem:
    """A problem whose partial solutions fit the budget and combine.

    ``leaf`` emits one vertex's partial solution; ``combine`` merges the
    solutions of two vertex-disjoint subgraphs; ``finalize`` runs at the
    root; ``extract`` turns the broadcast solution into one vertex's answer.
    """

    name: str
    leaf: Callable[[int, tuple[int, ...]], Any]
    combine: Callable[[Any, Any], Any]
    finalize: Callable[[Any, int], Any]
    extract: Callable[[Any, int], Any]


def _leader_leaf(v: int, neighbors: tuple[int, ...]) -> Uint:
    return Uint(v)


def _edge_leaf(v: int, neighbors: tuple[int, ...]) -> Frac:
    return Frac(len(neighbors), 2)


def _avg_leaf(v: int, neighbors: tuple[int, ...]) -> Frac:
    return Frac(len(neighbors), 1)


PROBLEMS: dict[str, CCongestProblem] = {
    "leader-election": CCongestProblem(
        name="leader-election",
        leaf=_leader_leaf,
        combine=lambda a, b: Uint(min(a.value, b.value)),
        finalize=lambda agg, root: agg,
        extract=lambda solution, v: solution.value,
    ),
    "edge-count": CCongestProblem(
        name="edge-count",
        # Each vertex contributes deg/2 kept as an exact rational pair.
        leaf=_edge_leaf,
        combine=lambda a, b: Frac(a.numerator + b.numerator, 2),
        finalize=lambda agg, root: agg,
        extract=lambda solution, v: solution.numerator // 2,
    ),
    "average-degree": CCongestProblem(
        name="average-degree",
        # Degree sum and vertex count ride as an unreduced pair.
        leaf=_avg_leaf,
        combine=lambda a, b: Frac(a.numerator + b.numerator, a.denominator + b.denominator),
        finalize=lambda agg, root: agg,
        extract=lambda solution, v: Fraction(solution.numerator, solution.denominator),
    ),
}


class _CCongestProgram(eng.VertexProgram):
    def __init__(self, info, window: int, problem: CCongestProblem) -> None:
        self.info = info
        self.window = window
        self.bcast_base = window + 1
        self.extract_round = 2 * window + 1
        self.problem = problem

    def on_init(self, ctx: eng.VertexView):
        node = self.info[ctx.vertex]
        state = {"agg": self.problem.leaf(ctx.vertex, ctx.neighbors), "solution": None}
        rounds = [self.window - node.rnd, self.extract_round]
        if not node.is_root:
            rounds.append(self.window - node.parent_rnd)
            rounds.append(self.bcast_base + node.parent_rnd)
        rounds.append(self.bcast_base + node.rnd)
        return state, rounds

    def on_send(self, ctx, state, rnd):
        node = self.info[ctx.vertex]
        if not node.is_root and rnd == self.window - node.parent_rnd:
            return [(node.parent, state["agg"])]
        if rnd == self.bcast_base + node.rnd and state["solution"] is not None:
            return [(c, state["solution"]) for c in node.children]
        return ()

    def on_receive(self, ctx, state, rnd, inbox, api):
        node = self.info[ctx.vertex]
        if rnd == self.window - node.rnd:
            for _, payload in inbox:
                state["agg"] = self.problem.combine(state["agg"], payload)
            if node.is_root:
                state["solution"] = self.problem.finalize(state["agg"], ctx.vertex)
        elif self.bcast_base <= rnd < self.extract_round:
            for src, payload in inbox:
                if src == node.parent:
                    state["solution"] = payload
        if rnd == self.extract_round:
            api.finish(self.problem.extract(state["solution"], ctx.vertex))


def solve_ccongest(
    graph: Graph,
    assignment: DltAssignment,
    problem: CCongestProblem | str,
    config: eng.EngineConfig | None = None,
) -> tuple[dict[int, Any], eng.RunMetrics]:
    """Convergecast partials, finalize at the root, broadcast, extract."""
    if isinstance(problem, str):
        problem = PROBLEMS[problem]
    info = _tree_info(graph, assignment)
    window = round_window(graph.n_hat, graph.n)
    if config is None:
        config = congest_config(graph.n_hat)
    program = _CCongestProgram(info, window, problem)
    result = eng.run(graph, program, config)
    return result.outputs, result.metrics
