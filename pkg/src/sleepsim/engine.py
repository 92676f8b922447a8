"""Deterministic synchronous executor of the sleeping model.

Per clock round: vertices whose schedule contains the round form the awake
set; every awake vertex's send hook runs against pre-round state; a message
reaches its destination only when the destination is awake in the same
round, otherwise it is silently lost; then every awake vertex's receive
hook runs.  Every awake vertex pays exactly one awake round regardless of
activity.  Wake rounds are a-priori commitments: they may be added (or
withdrawn) only at initialization or while the owning vertex is awake at a
strictly earlier round.

Rounds with an empty awake set are skipped without per-round cost, so the
clock-round count can be quadratically larger than the work performed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .codec import CodecContext, payload_bits
from .graph import Graph

MODE_LOCAL = "local"
MODE_CONGEST = "congest"

DEFAULT_MAX_CLOCK_ROUNDS = 50_000_000


class SimError(RuntimeError):
    """Base class for executor failures."""


class ScheduleContractError(SimError):
    """A vertex tried to change its schedule for a non-future round."""


class BudgetExceededError(SimError):
    """A message exceeded the per-message bit budget in congest mode."""


class ClockLimitError(SimError):
    """The run passed the configured clock-round safety cap."""


@dataclass(frozen=True)
class EngineConfig:
    mode: str = MODE_LOCAL
    bit_budget: int | None = None
    max_clock_rounds: int = DEFAULT_MAX_CLOCK_ROUNDS

    def __post_init__(self) -> None:
        if self.mode not in (MODE_LOCAL, MODE_CONGEST):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_CONGEST and (self.bit_budget is None or self.bit_budget < 1):
            raise ValueError("congest mode requires bit_budget >= 1")


@dataclass
class RunMetrics:
    """Awake, clock, and message meters for one run."""

    awake_per_vertex: dict[int, int]
    clock_rounds: int = 0
    total_messages: int = 0
    max_message_bits: int = 0
    total_message_bits: int = 0

    @property
    def worst_awake(self) -> int:
        return max(self.awake_per_vertex.values(), default=0)

    @property
    def avg_awake(self) -> float:
        if not self.awake_per_vertex:
            return 0.0
        return sum(self.awake_per_vertex.values()) / len(self.awake_per_vertex)

    def to_record(self, graph: Graph, mode: str) -> dict[str, Any]:
        """Flat key/value record for report serialization."""
        return {
            "n": graph.n,
            "nHat": graph.n_hat,
            "mode": mode,
            "worstAwake": self.worst_awake,
            "avgAwake": round(self.avg_awake, 6),
            "clockRounds": self.clock_rounds,
            "totalMessages": self.total_messages,
            "maxMessageBits": self.max_message_bits,
            "totalMessageBits": self.total_message_bits,
        }


@dataclass(frozen=True)
class VertexView:
    """Static local view handed to every program hook."""

    vertex: int
    neighbors: tuple[int, ...]
    n: int
    n_hat: int
    mode: str


class VertexApi:
    """Schedule and termination controls for one vertex, one round."""

    __slots__ = ("_engine", "_vertex", "_round")

    def __init__(self, engine: "_Engine", vertex: int) -> None:
        self._engine = engine
        self._vertex = vertex
        self._round = -1

    def wake(self, rnd: int) -> None:
        """Commit to be awake at a strictly later round."""
        if rnd <= self._round:
            raise ScheduleContractError(
                f"vertex {self._vertex} at round {self._round} cannot schedule round {rnd}"
            )
        self._engine.schedule(self._vertex, rnd)

    def cancel(self, rnd: int) -> None:
        """Withdraw a previously committed strictly later round."""
        if rnd <= self._round:
            raise ScheduleContractError(
                f"vertex {self._vertex} at round {self._round} cannot cancel round {rnd}"
            )
        self._engine.unschedule(self._vertex, rnd)

    def finish(self, output: Any) -> None:
        self._engine.finish(self._vertex, output)


class VertexProgram:
    """Behavior contract: override the three hooks.

    ``on_init`` returns (state, initial wake rounds).  ``on_send`` sees only
    pre-round state and returns an iterable of (neighbor, payload) pairs.
    ``on_receive`` sees exactly the messages delivered this round and may
    adjust the vertex's own future schedule or produce the terminal output.
    """

    def on_init(self, ctx: VertexView) -> tuple[Any, Iterable[int]]:
        raise NotImplementedError

    def on_send(self, ctx: VertexView, state: Any, rnd: int) -> Iterable[tuple[int, Any]]:
        return ()

    def on_receive(
        self,
        ctx: VertexView,
        state: Any,
        rnd: int,
        inbox: list[tuple[int, Any]],
        api: VertexApi,
    ) -> None:
        raise NotImplementedError


@dataclass
class RunResult:
    outputs: dict[int, Any]
    metrics: RunMetrics
    states: dict[int, Any] = field(default_factory=dict)


class _Engine:
    def __init__(self, graph: Graph, config: EngineConfig) -> None:
        self.graph = graph
        self.config = config
        self.codec_ctx = CodecContext(n_hat=graph.n_hat, n=graph.n)
        self.heap: list[int] = []
        self.by_round: dict[int, set[int]] = {}
        self.finished: dict[int, Any] = {}
        self.current_round = -1

    def schedule(self, vertex: int, rnd: int) -> None:
        bucket = self.by_round.get(rnd)
        if bucket is None:
            bucket = set()
            self.by_round[rnd] = bucket
            heapq.heappush(self.heap, rnd)
        bucket.add(vertex)

    def unschedule(self, vertex: int, rnd: int) -> None:
        bucket = self.by_round.get(rnd)
        if bucket is not None:
            bucket.discard(vertex)

    def finish(self, vertex: int, output: Any) -> None:
        if vertex not in self.finished:
            self.finished[vertex] = output


def run(graph: Graph, program: VertexProgram, config: EngineConfig | None = None) -> RunResult:
    """Execute a program to completion; deterministic for identical inputs."""
    config = config or EngineConfig()
    engine = _Engine(graph, config)
    metrics = RunMetrics(awake_per_vertex={v: 0 for v in graph.vertices})

    views = {
        v: VertexView(
            vertex=v,
            neighbors=graph.adjacency[v],
            n=graph.n,
            n_hat=graph.n_hat,
            mode=config.mode,
        )
        for v in graph.vertices
    }
    apis = {v: VertexApi(engine, v) for v in graph.vertices}
    states: dict[int, Any] = {}
    for v in graph.vertices:
        state, rounds = program.on_init(views[v])
        states[v] = state
        for rnd in rounds:
            if rnd < 0:
                raise ScheduleContractError(f"vertex {v} scheduled negative round {rnd}")
            engine.schedule(v, rnd)

    awake_events = 0
    edge_dir_count = {v: len(graph.adjacency[v]) for v in graph.vertices}
    send_budget = 0  # sum over processed rounds of deg(v) per awake vertex

    while engine.heap and len(engine.finished) < graph.n:
        rnd = heapq.heappop(engine.heap)
        bucket = engine.by_round.pop(rnd, None)
        if not bucket:
            continue
        if rnd > config.max_clock_rounds:
            raise ClockLimitError(f"round {rnd} exceeds cap {config.max_clock_rounds}")
        awake = sorted(v for v in bucket if v not in engine.finished)
        if not awake:
            continue
        engine.current_round = rnd
        metrics.clock_rounds = rnd + 1
        awake_set = set(awake)

        inboxes: dict[int, list[tuple[int, Any]]] = {}
        for v in awake:
            out = program.on_send(views[v], states[v], rnd)
            if not out:
                continue
            grouped: dict[int, int] = {}
            for dst, payload in out:
                if dst not in graph.adjacency[v]:
                    raise SimError(f"vertex {v} sent to non-neighbor {dst} at round {rnd}")
                bits = payload_bits(payload, engine.codec_ctx)
                grouped[dst] = grouped.get(dst, 0) + bits
                if dst in awake_set:
                    inboxes.setdefault(dst, []).append((v, payload))
            # Multiple logical payloads to one neighbor in one round count
            # as a single concatenated message.
            for dst, bits in sorted(grouped.items()):
                metrics.total_messages += 1
                metrics.total_message_bits += bits
                if bits > metrics.max_message_bits:
                    metrics.max_message_bits = bits
                if config.mode == MODE_CONGEST and bits > config.bit_budget:
                    raise BudgetExceededError(
                        f"message {v}->{dst} at round {rnd} is {bits} bits, "
                        f"budget {config.bit_budget}"
                    )

        for v in awake:
            api = apis[v]
            api._round = rnd
            inbox = inboxes.get(v, [])
            inbox.sort(key=lambda item: item[0])
            program.on_receive(views[v], states[v], rnd, inbox, api)
            metrics.awake_per_vertex[v] += 1
            awake_events += 1
            send_budget += edge_dir_count[v]

    # Engine-level consistency cross-checks (cheap, always on).
    assert sum(metrics.awake_per_vertex.values()) == awake_events
    assert metrics.total_messages <= send_budget, "message accounting bound violated"

    return RunResult(outputs=dict(engine.finished), metrics=metrics, states=states)


class _ExchangeOnce(VertexProgram):
    """Every vertex wakes at one fixed round and trades payloads 1-hop."""

    def __init__(self, rnd: int, payload_fn: Callable[[int], Any]) -> None:
        self.rnd = rnd
        self.payload_fn = payload_fn

    def on_init(self, ctx: VertexView) -> tuple[Any, Iterable[int]]:
        return {}, (self.rnd,)

    def on_send(self, ctx: VertexView, state: Any, rnd: int) -> Iterable[tuple[int, Any]]:
        payload = self.payload_fn(ctx.vertex)
        return [(w, payload) for w in ctx.neighbors]

    def on_receive(self, ctx, state, rnd, inbox, api) -> None:
        api.finish({src: payload for src, payload in inbox})


def one_shot_exchange(
    graph: Graph,
    payload_fn: Callable[[int], Any],
    rnd: int = 0,
    config: EngineConfig | None = None,
) -> RunResult:
    """Global wake: all vertices up for one round, swapping 1-hop payloads.

    The wake round is fixed before execution; the result maps every vertex
    to the payloads received from each neighbor.
    """
    return run(graph, _ExchangeOnce(rnd, payload_fn), config)
