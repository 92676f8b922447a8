"""Label-scheduled tree flows over a layered tree.

Broadcast wakes each non-root vertex exactly at its parent's label round
and its own label round (the root only at its own), so a root payload
reaches every vertex in two awake rounds per vertex.  Convergecast mirrors
the schedule across the window so aggregates flow leafward-to-root.  The
learn-everything solver chains one convergecast (full topology up), a local
computation at the root, one broadcast (full solution down), and a single
fixed extraction round: five awake rounds per vertex, total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping

from . import engine as eng
from .codec import Blob
from .graph import (
    DltAssignment,
    Graph,
    GraphError,
    label_to_round,
    make_graph,
    round_window,
    validate_dlt,
)


class CastError(RuntimeError):
    """Invalid layered tree or misbehaving aggregator."""


@dataclass(frozen=True)
class _TreeInfo:
    rnd: int
    parent: int | None
    parent_rnd: int | None
    children: tuple[int, ...]
    is_root: bool


def _tree_info(graph: Graph, assignment: DltAssignment) -> dict[int, _TreeInfo]:
    report = validate_dlt(graph, assignment)
    if not report.ok:
        raise CastError(f"invalid layered tree: {report.violations[0]}")
    children = assignment.children_map()
    info = {}
    for v, entry in assignment.entries.items():
        rnd = label_to_round(entry.label, graph.n_hat, graph.n)
        parent_rnd = (
            label_to_round(entry.parent_label, graph.n_hat, graph.n)
            if entry.parent_label is not None
            else None
        )
        info[v] = _TreeInfo(
            rnd=rnd,
            parent=entry.parent,
            parent_rnd=parent_rnd,
            children=tuple(children[v]),
            is_root=entry.is_root,
        )
    return info


class _BroadcastProgram(eng.VertexProgram):
    def __init__(self, info: Mapping[int, _TreeInfo], root_payload: Any) -> None:
        self.info = info
        self.root_payload = root_payload

    def on_init(self, ctx: eng.VertexView):
        node = self.info[ctx.vertex]
        state = {"payload": self.root_payload if node.is_root else None}
        rounds = (node.rnd,) if node.is_root else (node.parent_rnd, node.rnd)
        return state, rounds

    def on_send(self, ctx, state, rnd):
        node = self.info[ctx.vertex]
        if rnd == node.rnd and state["payload"] is not None:
            return [(c, state["payload"]) for c in node.children]
        return ()

    def on_receive(self, ctx, state, rnd, inbox, api):
        node = self.info[ctx.vertex]
        for src, payload in inbox:
            if src == node.parent:
                state["payload"] = payload
        if rnd == node.rnd:
            api.finish(state["payload"])


class _ConvergecastProgram(eng.VertexProgram):
    def __init__(
        self,
        info: Mapping[int, _TreeInfo],
        window: int,
        leaf_values: Mapping[int, Any],
        combine: Callable[[Any, Any], Any],
        debug_check: bool = False,
    ) -> None:
        self.info = info
        self.window = window
        self.leaf_values = leaf_values
        self.combine = combine
        self.debug_check = debug_check

    def on_init(self, ctx: eng.VertexView):
        node = self.info[ctx.vertex]
        state = {"agg": self.leaf_values[ctx.vertex]}
        rounds = (
            (self.window - node.rnd,)
            if node.is_root
            else (self.window - node.rnd, self.window - node.parent_rnd)
        )
        return state, rounds

    def on_send(self, ctx, state, rnd):
        node = self.info[ctx.vertex]
        if not node.is_root and rnd == self.window - node.parent_rnd:
            return [(node.parent, Blob(state["agg"]))]
        return ()

    def on_receive(self, ctx, state, rnd, inbox, api):
        node = self.info[ctx.vertex]
        if rnd == self.window - node.rnd:
            values = [state["agg"]] + [payload.obj for _, payload in inbox]
            if self.debug_check and len(values) >= 3:
                a, b, c = values[0], values[1], values[2]
                left = self.combine(self.combine(a, b), c)
                right = self.combine(a, self.combine(b, c))
                if left != right:
                    raise CastError(f"aggregator not associative on {(a, b, c)}")
            agg = values[0]
            for value in values[1:]:
                agg = self.combine(agg, value)
            state["agg"] = agg
            if node.is_root:
                api.finish(state["agg"])
        else:
            api.finish(state["agg"])


def tree_broadcast(
    graph: Graph,
    assignment: DltAssignment,
    root_payload: Any,
    config: eng.EngineConfig | None = None,
) -> tuple[dict[int, Any], eng.RunMetrics]:
    """Deliver ``root_payload`` to every vertex of a valid layered tree."""
    info = _tree_info(graph, assignment)
    result = eng.run(graph, _BroadcastProgram(info, root_payload), config)
    return result.outputs, result.metrics


def tree_convergecast(
    graph: Graph,
    assignment: DltAssignment,
    leaf_values: Mapping[int, Any],
    combine: Callable[[Any, Any], Any],
    config: eng.EngineConfig | None = None,
    window: int | None = None,
    debug_check: bool = False,
) -> tuple[Any, eng.RunMetrics]:
    """Aggregate per-vertex values to the root of a valid layered tree.

    ``combine`` must be associative and commutative; ``debug_check`` samples
    re-associations during the run and fails loudly on a mismatch.
    """
    info = _tree_info(graph, assignment)
    if window is None:
        window = round_window(graph.n_hat, graph.n)
    max_rnd = max(node.rnd for node in info.values())
    if window <= max_rnd:
        raise CastError(f"window {window} does not exceed max label round {max_rnd}")
    program = _ConvergecastProgram(info, window, leaf_values, combine, debug_check)
    result = eng.run(graph, program, config)
    root = assignment.root()
    return result.outputs[root], result.metrics


class _UniversalProgram(eng.VertexProgram):
    """Convergecast topology, solve at the root, broadcast, extract."""

    def __init__(
        self,
        info: Mapping[int, _TreeInfo],
        window: int,
        solver: Callable[[Graph], Mapping[int, Any]],
        n: int,
        n_hat: int,
    ) -> None:
        self.info = info
        self.window = window
        self.bcast_base = window + 1
        self.extract_round = 2 * window + 1
        self.solver = solver
        self.n = n
        self.n_hat = n_hat

    def on_init(self, ctx: eng.VertexView):
        node = self.info[ctx.vertex]
        topo = ((ctx.vertex, tuple(ctx.neighbors)),)
        state = {"agg": topo, "solution": None}
        rounds = [self.window - node.rnd, self.extract_round]
        if not node.is_root:
            rounds.append(self.window - node.parent_rnd)
            rounds.append(self.bcast_base + node.parent_rnd)
        rounds.append(self.bcast_base + node.rnd)
        return state, rounds

    def on_send(self, ctx, state, rnd):
        node = self.info[ctx.vertex]
        if not node.is_root and rnd == self.window - node.parent_rnd:
            return [(node.parent, Blob([[v, list(nbrs)] for v, nbrs in state["agg"]]))]
        if rnd == self.bcast_base + node.rnd and state["solution"] is not None:
            return [(c, Blob(state["solution"])) for c in node.children]
        return ()

    def on_receive(self, ctx, state, rnd, inbox, api):
        node = self.info[ctx.vertex]
        if rnd == self.window - node.rnd:
            merged = dict(state["agg"])
            for _, payload in inbox:
                for v, nbrs in payload.obj:
                    merged[v] = tuple(nbrs)
            state["agg"] = tuple(sorted(merged.items()))
            if node.is_root:
                edges = set()
                for v, nbrs in state["agg"]:
                    for w in nbrs:
                        edges.add((min(v, w), max(v, w)))
                rebuilt = make_graph(
                    sorted(edges),
                    n_hat=self.n_hat,
                    isolated=[v for v, _ in state["agg"]] if not edges else (),
                )
                full = self.solver(rebuilt)
                state["solution"] = {str(v): full[v] for v in sorted(full)}
        elif rnd >= self.bcast_base and rnd != self.extract_round:
            for src, payload in inbox:
                if src == node.parent:
                    state["solution"] = payload.obj
        if rnd == self.extract_round:
            api.finish(state["solution"][str(ctx.vertex)])


def solve_universal(
    graph: Graph,
    assignment: DltAssignment,
    solver: Callable[[Graph], Mapping[int, Any]],
    config: eng.EngineConfig | None = None,
) -> tuple[dict[int, Any], eng.RunMetrics]:
    """Solve any deterministic whole-graph problem in <= 5 awake rounds each.

    The root learns the entire graph through one convergecast, runs
    ``solver`` locally, and broadcasts the full solution; one extra fixed
    round lets every vertex extract its own part.
    """
    info = _tree_info(graph, assignment)
    window = round_window(graph.n_hat, graph.n)
    program = _UniversalProgram(info, window, solver, graph.n, graph.n_hat)
    result = eng.run(graph, program, config)
    return result.outputs, result.metrics
