"""Schedule-tree protocols for decreasing-color decision problems.

A fast distributed coloring (iterated polynomial recoloring, all vertices
awake) shrinks the palette to q = O(max_degree^2) colors with q a power of
two.  Each vertex then builds the same complete binary search tree over
[1, 2q-1] internally and wakes exactly at the rounds named on the path from
the root to the leaf matching its color.  Any two adjacent vertices share
the round of their leaves' lowest common ancestor, which falls strictly
between the two leaf values, so by a vertex's own leaf round every
smaller-colored neighbor has already decided and said so.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from . import engine as eng
from .codec import Status, Uint
from .graph import CheckReport, Graph, ceil_log2, log_star


class OLocalError(RuntimeError):
    """Protocol contract breach (a decision round arrived under-informed)."""


# -- internal binary schedule tree -------------------------------------------


@dataclass(frozen=True)
class ScheduleTree:
    """Complete binary search tree over [1, 2q-1]; leaves are odd values."""

    q: int

    @property
    def size(self) -> int:
        return 2 * self.q - 1

    @property
    def root(self) -> int:
        return self.q

    @property
    def depth(self) -> int:
        return ceil_log2(self.q) + 1

    def leaf_value(self, color: int) -> int:
        if not 1 <= color <= self.q:
            raise ValueError(f"color {color} outside [1, {self.q}]")
        return 2 * color - 1

    def path_to_leaf(self, leaf: int) -> tuple[int, ...]:
        """Node values from the root down to ``leaf``."""
        if not (1 <= leaf <= self.size and leaf % 2 == 1):
            raise ValueError(f"{leaf} is not a leaf of the schedule tree")
        lo, hi = 1, self.size
        path = []
        while True:
            mid = (lo + hi) // 2
            path.append(mid)
            if mid == leaf:
                return tuple(path)
            if leaf < mid:
                hi = mid - 1
            else:
                lo = mid + 1

    def in_order(self) -> tuple[int, ...]:
        return tuple(range(1, self.size + 1))

    def lca(self, leaf_a: int, leaf_b: int) -> int:
        pa, pb = self.path_to_leaf(leaf_a), self.path_to_leaf(leaf_b)
        common = self.root
        for x, y in zip(pa, pb):
            if x != y:
                break
            common = x
        return common


def build_schedule_tree(q: int) -> ScheduleTree:
    if q < 2 or q & (q - 1):
        raise ValueError(f"q must be a power of two >= 2, got {q}")
    return ScheduleTree(q)


def wake_rounds(color: int, tree: ScheduleTree) -> tuple[tuple[int, ...], int]:
    """Round values a vertex of this color is awake at, plus its decision round."""
    leaf = tree.leaf_value(color)
    return tree.path_to_leaf(leaf), leaf


# -- palette reduction --------------------------------------------------------


def _is_prime(x: int) -> bool:
    if x < 2:
        return False
    i = 2
    while i * i <= x:
        if x % i == 0:
            return False
        i += 1
    return True


def _next_prime(x: int) -> int:
    while not _is_prime(x):
        x += 1
    return x


def palette_plan(n_hat: int, delta: int) -> list[tuple[int, int]]:
    """Deterministic (prime, degree) recoloring steps from [n_hat) colors.

    Each step maps a color below p**(d+1) to a polynomial of degree <= d
    over GF(p) and then to a new color below p*p; p >= d*delta + 1 ensures
    some evaluation point separates a vertex from all neighbors.
    """
    if delta <= 0:
        return []
    steps: list[tuple[int, int]] = []
    m = n_hat
    while True:
        best: tuple[int, int] | None = None
        p = 2
        while p * p < m:
            p = _next_prime(p)
            if p * p >= m:
                break
            d = 0
            power = p
            while power < m:
                power *= p
                d += 1
            if p >= d * delta + 1:
                best = (p, d)
                break
            p += 1
        if best is None:
            return steps
        steps.append(best)
        m = best[0] * best[0]


def palette_bound(n_hat: int, delta: int) -> int:
    """Color-space size after the full plan (before power-of-two padding)."""
    steps = palette_plan(n_hat, delta)
    return steps[-1][0] ** 2 if steps else max(n_hat, 2)


def _recolor(color: int, neighbor_colors, p: int, d: int) -> int:
    """Pick (x, f(x)) with f's value differing from every neighbor at x."""

    def digits(c: int) -> tuple[int, ...]:
        return tuple((c // p**i) % p for i in range(d + 1))

    def evaluate(coeffs: tuple[int, ...], x: int) -> int:
        acc = 0
        for coef in reversed(coeffs):
            acc = (acc * x + coef) % p
        return acc

    own = digits(color)
    others = [digits(c) for c in neighbor_colors if c != color]
    for x in range(p):
        mine = evaluate(own, x)
        if all(evaluate(o, x) != mine for o in others):
            return x * p + mine
    raise AssertionError("no separating evaluation point; parameters too small")


def next_pow2(x: int) -> int:
    return 1 << ceil_log2(max(x, 2))


@dataclass(frozen=True)
class ColorAssignment:
    """Proper coloring with palette [1, q], q a power of two."""

    colors: Mapping[int, int]
    q: int
    rounds_used: int


def properness_report(graph: Graph, colors: Mapping[int, int]) -> CheckReport:
    bad = []
    for u, w in graph.edges():
        if colors[u] == colors[w]:
            bad.append(("monochromatic-edge", f"edge ({u}, {w}) colored {colors[u]}"))
    return CheckReport(tuple(bad))


class _ColoringProgram(eng.VertexProgram):
    """All vertices awake for the whole palette reduction, one step per round.

    A final exchange round publishes the settled colors 1-hop, so every
    vertex ends up knowing its neighbors' final colors.
    """

    def __init__(self, graph: Graph) -> None:
        self.delta = graph.max_degree()
        self.steps = palette_plan(graph.n_hat, self.delta)
        self.total_rounds = len(self.steps) + 1

    def on_init(self, ctx: eng.VertexView):
        state = {"color": ctx.vertex, "neighbors": {}}
        return state, range(self.total_rounds)

    def on_send(self, ctx, state, rnd):
        return [(w, Uint(state["color"])) for w in ctx.neighbors]

    def on_receive(self, ctx, state, rnd, inbox, api):
        nb = {src: payload.value for src, payload in inbox}
        if rnd < len(self.steps):
            p, d = self.steps[rnd]
            state["color"] = _recolor(state["color"], nb.values(), p, d)
        else:
            state["neighbors"] = nb
            api.finish({"color": state["color"], "neighbors": nb})


def linial_coloring(
    graph: Graph, config: eng.EngineConfig | None = None
) -> tuple[ColorAssignment, eng.RunMetrics]:
    """Proper coloring with q <= next_pow2 of the palette bound, 1-based."""
    program = _ColoringProgram(graph)
    result = eng.run(graph, program, config)
    q = next_pow2(palette_bound(graph.n_hat, program.delta))
    colors = {v: out["color"] + 1 for v, out in result.outputs.items()}
    assignment = ColorAssignment(colors=colors, q=q, rounds_used=program.total_rounds)
    report = properness_report(graph, colors)
    if not report.ok:
        raise OLocalError(f"recoloring produced an improper coloring: {report.violations[0]}")
    return assignment, result.metrics


# -- the decision runner ------------------------------------------------------


@dataclass(frozen=True)
class DecideInfo:
    """Context handed to a decision function at its decision round."""

    delta: int
    out_neighbors: tuple[int, ...]
    transitive: Mapping[int, int] | None


@dataclass(frozen=True)
class OLocalProblem:
    """Decision rule over the choices of smaller-colored neighbors.

    ``decide(vertex, out_decisions, info)`` returns the vertex's value once
    every neighbor on an outgoing (toward smaller color) edge has one.  Set
    ``transitive`` for problems that need everything reachable along the
    orientation; the runner then accumulates and forwards decision maps.
    """

    name: str
    decide: Callable[[int, dict[int, int], DecideInfo], int]
    transitive: bool = False


def _mis_decide(vertex: int, out_decisions: dict[int, int], info: DecideInfo) -> int:
    return 1 if all(val == 0 for val in out_decisions.values()) else 0


def _coloring_decide(vertex: int, out_decisions: dict[int, int], info: DecideInfo) -> int:
    used = set(out_decisions.values())
    for c in range(1, info.delta + 2):
        if c not in used:
            return c
    raise AssertionError("palette exhausted; neighbor count exceeds delta")


PROBLEMS: dict[str, OLocalProblem] = {
    "mis": OLocalProblem(name="mis", decide=_mis_decide),
    "delta-plus-one-coloring": OLocalProblem(
        name="delta-plus-one-coloring", decide=_coloring_decide
    ),
}


@dataclass(frozen=True)
class OLocalOutcome:
    decisions: dict[int, int]
    colors: ColorAssignment
    coloring_rounds: int
    post_rounds: int
    metrics: eng.RunMetrics


class _OLocalProgram(eng.VertexProgram):
    """Coloring epoch followed by schedule-tree decision rounds.

    Schedule-tree round k (1-based node value) happens at absolute clock
    round R - 1 + k where R is the coloring epoch length.
    """

    def __init__(self, graph: Graph, problem: OLocalProblem) -> None:
        self.graph = graph
        self.problem = problem
        self.delta = graph.max_degree()
        self.steps = palette_plan(graph.n_hat, self.delta)
        self.epoch = len(self.steps) + 1
        self.q = next_pow2(palette_bound(graph.n_hat, self.delta))
        self.tree = build_schedule_tree(self.q)

    def _abs(self, value: int) -> int:
        return self.epoch - 1 + value

    def on_init(self, ctx: eng.VertexView):
        state = {
            "color": ctx.vertex,
            "neighbor_colors": {},
            "my_rounds": (),
            "r_prime": None,
            "peer_rounds": {},
            "statuses": {},
            "accum": {},
            "decision": None,
        }
        return state, range(self.epoch)

    def on_send(self, ctx, state, rnd):
        if rnd < self.epoch:
            return [(w, Uint(state["color"])) for w in ctx.neighbors]
        value = rnd - (self.epoch - 1)
        decided = state["decision"] is not None
        accum = None
        if self.problem.transitive:
            accum = tuple(sorted(state["accum"].items()))
            if decided:
                accum += ((ctx.vertex, state["decision"]),)
        payload = Status(decided, state["decision"], accum)
        return [
            (w, payload)
            for w in ctx.neighbors
            if value in state["peer_rounds"].get(w, ())
        ]

    def on_receive(self, ctx, state, rnd, inbox, api):
        if rnd < self.epoch:
            nb = {src: payload.value for src, payload in inbox}
            if rnd < len(self.steps):
                p, d = self.steps[rnd]
                state["color"] = _recolor(state["color"], nb.values(), p, d)
            else:
                # Colors are settled; commit to the path rounds.
                state["neighbor_colors"] = {w: c + 1 for w, c in nb.items()}
                color = state["color"] + 1
                rounds, r_prime = wake_rounds(color, self.tree)
                state["my_rounds"] = rounds
                state["r_prime"] = r_prime
                state["color"] = color
                state["peer_rounds"] = {
                    w: set(wake_rounds(c, self.tree)[0])
                    for w, c in state["neighbor_colors"].items()
                }
                for value in rounds:
                    api.wake(self._abs(value))
            return
        value = rnd - (self.epoch - 1)
        for src, payload in inbox:
            state["statuses"][src] = payload
            if self.problem.transitive and payload.accum:
                for vertex, decided_value in payload.accum:
                    state["accum"][vertex] = decided_value
        if value == state["r_prime"]:
            out = [w for w, c in state["neighbor_colors"].items() if c < state["color"]]
            missing = [
                w
                for w in out
                if w not in state["statuses"] or not state["statuses"][w].decided
            ]
            if missing:
                raise OLocalError(
                    f"vertex {ctx.vertex} reached decision round {value} without "
                    f"decisions from {missing}"
                )
            out_decisions = {w: state["statuses"][w].value for w in out}
            info = DecideInfo(
                delta=self.delta,
                out_neighbors=tuple(sorted(out)),
                transitive=dict(state["accum"]) if self.problem.transitive else None,
            )
            state["decision"] = self.problem.decide(ctx.vertex, out_decisions, info)
        if value == max(state["my_rounds"]):
            api.finish(
                {
                    "decision": state["decision"],
                    "color": state["color"],
                }
            )


def run_olocal(
    graph: Graph,
    problem: OLocalProblem | str,
    config: eng.EngineConfig | None = None,
) -> OLocalOutcome:
    """Solve a decreasing-color decision problem end to end."""
    if isinstance(problem, str):
        problem = PROBLEMS[problem]
    program = _OLocalProgram(graph, problem)
    result = eng.run(graph, program, config)
    decisions = {v: out["decision"] for v, out in result.outputs.items()}
    colors = {v: out["color"] for v, out in result.outputs.items()}
    assignment = ColorAssignment(colors=colors, q=program.q, rounds_used=program.epoch)
    return OLocalOutcome(
        decisions=decisions,
        colors=assignment,
        coloring_rounds=program.epoch,
        post_rounds=program.tree.depth,
        metrics=result.metrics,
    )


def sequential_color_order_oracle(
    graph: Graph,
    colors: Mapping[int, int],
    problem: OLocalProblem,
    delta: int | None = None,
) -> dict[int, int]:
    """Process vertices in increasing (color, id) order with the same rule."""
    if delta is None:
        delta = graph.max_degree()
    decisions: dict[int, int] = {}
    accum: dict[int, dict[int, int]] = {v: {} for v in graph.vertices}
    for v in sorted(graph.vertices, key=lambda x: (colors[x], x)):
        out = [w for w in graph.adjacency[v] if colors[w] < colors[v]]
        out_decisions = {w: decisions[w] for w in out}
        transitive = None
        if problem.transitive:
            merged: dict[int, int] = {}
            for w in out:
                merged.update(accum[w])
                merged[w] = decisions[w]
            accum[v] = merged
            transitive = dict(merged)
        info = DecideInfo(
            delta=delta, out_neighbors=tuple(sorted(out)), transitive=transitive
        )
        decisions[v] = problem.decide(v, out_decisions, info)
    return decisions


def check_mis(graph: Graph, decisions: Mapping[int, int]) -> CheckReport:
    """Independence plus maximality, by direct edge and vertex scans."""
    bad = []
    for u, w in graph.edges():
        if decisions[u] == 1 and decisions[w] == 1:
            bad.append(("independence", f"adjacent {u}, {w} both in the set"))
    for v in graph.vertices:
        if decisions[v] == 0 and not any(decisions[w] == 1 for w in graph.adjacency[v]):
            bad.append(("maximality", f"vertex {v} excluded with no member neighbor"))
    return CheckReport(tuple(bad))


def check_proper_palette(
    graph: Graph, decisions: Mapping[int, int], palette_size: int
) -> CheckReport:
    bad = []
    for u, w in graph.edges():
        if decisions[u] == decisions[w]:
            bad.append(("monochromatic-edge", f"edge ({u}, {w}) colored {decisions[u]}"))
    for v in graph.vertices:
        if not 1 <= decisions[v] <= palette_size:
            bad.append(("palette", f"vertex {v} color {decisions[v]} outside [1, {palette_size}]"))
    return CheckReport(tuple(bad))
