"""Layered-tree construction by label-scheduled connection phases.

Each phase runs inside a fixed clock-round frame that every vertex derives
from (phase index, slot, own/parent label) alone:

  slot 1  candidate convergecast   window of n' rounds
  slot 2  choice broadcast         window of n'
  slot 3  relabel climb            window of n' (reflected rounds; also
                                   carries cross-edge child notifications
                                   and the adoption convergecast inside
                                   local-minimum trees)
  slot 4  relabel propagate        window of n' (also the local-minimum
                                   decision broadcast)
  GW 1    global wake              1 round (labels + attach requests)
  slot 5  merge propagate          window of n' (final component labels
                                   cascade across the merged trees in
                                   tree-id block order)
  slot 6  attach climb             window of n' (inside attaching trees)
  slot 7  attach propagate         window of n'
  GW 2    global wake              1 round (final labels, next phase)

with n' = (n_hat + 1) * (n + 1), so one phase spans exactly 7 n' + 2 clock
rounds and every vertex is awake at most 14 rounds per phase.  The tree
count at least halves per phase: every tree either connects to a
smaller-labeled neighbor tree, is adopted by one, or attaches through a
fallback edge.  At every phase boundary each component carries uniform
labels (surviving tree id, tree distance from the component root) and every
vertex knows its neighbors' labels.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Iterable

from . import engine as eng
from .codec import (
    Adopt,
    Candidate,
    ChoiceComplete,
    ChoiceConnect,
    ChoiceLocalMin,
    Climb,
    Decision,
    Gw,
    NoCandidate,
    Notify,
    Propagate,
)
from .graph import (
    CheckReport,
    DltAssignment,
    DltVertex,
    Graph,
    VertexLabel,
    ceil_log2,
    label_to_round,
    round_window,
)

MAX_AWAKE_PER_PHASE = 14


@dataclass(frozen=True)
class CandidateEdge:
    """Cross edge (u inside own tree, w outside) with w's tree coordinate."""

    u: int
    w: int
    w_tree_id: int


def select_outgoing_edge(
    candidates: Iterable[CandidateEdge], own_tree_id: int
) -> CandidateEdge | None:
    """Minimum (w_tree_id, w, u) among candidates leading to smaller trees."""
    best: tuple[int, int, int] | None = None
    for cand in candidates:
        if cand.w_tree_id >= own_tree_id:
            continue
        key = (cand.w_tree_id, cand.w, cand.u)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return CandidateEdge(u=best[2], w=best[1], w_tree_id=best[0])


@dataclass(frozen=True)
class PhaseLayout:
    """Static clock-round frame of one connection phase."""

    n_hat: int
    n: int

    @property
    def n_prime(self) -> int:
        return round_window(self.n_hat, self.n)

    @property
    def phase_window(self) -> int:
        return 7 * self.n_prime + 2

    def phase_count(self) -> int:
        return ceil_log2(self.n) if self.n > 1 else 0

    @property
    def candidate_conv(self) -> int:
        return 0

    @property
    def choice_bcast(self) -> int:
        return self.n_prime

    @property
    def relabel_climb(self) -> int:
        return 2 * self.n_prime

    @property
    def relabel_propagate(self) -> int:
        return 3 * self.n_prime

    @property
    def global_wake_1(self) -> int:
        return 4 * self.n_prime

    @property
    def merge_propagate(self) -> int:
        return 4 * self.n_prime + 1

    @property
    def attach_climb(self) -> int:
        return 5 * self.n_prime + 1

    @property
    def attach_propagate(self) -> int:
        return 6 * self.n_prime + 1

    @property
    def global_wake_2(self) -> int:
        return 7 * self.n_prime + 1

    def slots(self) -> tuple[int, ...]:
        return (
            self.candidate_conv,
            self.choice_bcast,
            self.relabel_climb,
            self.relabel_propagate,
            self.global_wake_1,
            self.merge_propagate,
            self.attach_climb,
            self.attach_propagate,
            self.global_wake_2,
        )


class _St:
    """Per-vertex protocol state across phases."""

    __slots__ = (
        "label",
        "parent",
        "parent_label",
        "children",
        "neighbor_labels",
        "complete",
        "phase",
        "intents",
        "history",
        "awake_phase",
        "role",
        "old_parent",
        "old_parent_label",
        "old_children",
        "cand_smaller",
        "cand_any",
        "choice",
        "chosen_u",
        "chosen_w",
        "on_path",
        "dist",
        "climb_src",
        "notify_children",
        "notified",
        "adopt_flag",
        "tm_adopted",
        "fallback",
        "base",
    )

    def __init__(self, vertex: int) -> None:
        self.label = VertexLabel(vertex, 0)
        self.parent: int | None = None
        self.parent_label: VertexLabel | None = None
        self.children: set[int] = set()
        self.neighbor_labels: dict[int, VertexLabel] = {}
        self.complete = False
        self.phase = 0
        self.intents: dict[int, list[tuple]] = {}
        self.history: list[dict] = []
        self.awake_phase = 0
        self.reset_phase_scratch()

    def reset_phase_scratch(self) -> None:
        self.role = "idle"
        self.old_parent: int | None = None
        self.old_parent_label: VertexLabel | None = None
        self.old_children: tuple[int, ...] = ()
        self.cand_smaller: tuple[int, int, int] | None = None
        self.cand_any: tuple[int, int, int] | None = None
        self.choice = None
        self.chosen_u: int | None = None
        self.chosen_w: int | None = None
        self.on_path = False
        self.dist: int | None = None
        self.climb_src: int | None = None
        self.notify_children: set[int] = set()
        self.notified = False
        self.adopt_flag = False
        self.tm_adopted: bool | None = None
        self.fallback: tuple[int, int] | None = None
        self.base: tuple[int, int] | None = None

    def add_intent(self, rnd: int, intent: tuple) -> None:
        self.intents.setdefault(rnd, []).append(intent)


class ConnectionPhaseProgram(eng.VertexProgram):
    """Distributed layered-tree construction over the sleeping-model engine."""

    def __init__(self, graph: Graph, phases: int | None = None) -> None:
        self.graph = graph
        self.layout = PhaseLayout(n_hat=graph.n_hat, n=graph.n)
        default = self.layout.phase_count()
        self.phases = default if phases is None else phases

    def _rnd(self, label: VertexLabel) -> int:
        return label_to_round(label, self.graph.n_hat, self.graph.n)

    # -- per-phase scheduling -------------------------------------------

    def _schedule_phase(self, st: _St, wake) -> None:
        lay = self.layout
        base = st.phase * lay.phase_window
        st.awake_phase = 0
        st.reset_phase_scratch()
        st.old_parent = st.parent
        st.old_parent_label = st.parent_label
        st.old_children = tuple(sorted(st.children))
        if st.complete:
            st.role = "complete"
        else:
            r_own = self._rnd(st.label)
            recv1 = base + lay.candidate_conv + (lay.n_prime - 1 - r_own)
            wake(recv1)
            st.add_intent(recv1, ("s1_recv",))
            own2 = base + lay.choice_bcast + r_own
            wake(own2)
            st.add_intent(own2, ("s2_own",))
            if st.parent is not None:
                r_par = self._rnd(st.parent_label)
                send1 = base + lay.candidate_conv + (lay.n_prime - 1 - r_par)
                wake(send1)
                st.add_intent(send1, ("s1_send",))
                recv2 = base + lay.choice_bcast + r_par
                wake(recv2)
                st.add_intent(recv2, ("s2_recv",))
        gw1 = base + lay.global_wake_1
        wake(gw1)
        st.add_intent(gw1, ("gw1",))
        gw2 = base + lay.global_wake_2
        wake(gw2)
        st.add_intent(gw2, ("gw2",))

    def _schedule_choice_followups(self, st: _St, wake, base: int) -> None:
        lay = self.layout
        r_own = self._rnd(st.label)
        recv3 = base + lay.relabel_climb + (lay.n_prime - 1 - r_own)
        wake(recv3)
        st.add_intent(recv3, ("s3_recv",))
        own4 = base + lay.relabel_propagate + r_own
        wake(own4)
        st.add_intent(own4, ("s4_own",))
        if st.old_parent is not None:
            r_par = self._rnd(st.old_parent_label)
            recv4 = base + lay.relabel_propagate + r_par
            wake(recv4)
            st.add_intent(recv4, ("s4_recv",))
            if st.role == "localmin":
                send3 = base + lay.relabel_climb + (lay.n_prime - 1 - r_par)
                wake(send3)
                st.add_intent(send3, ("s3_send",))

    def _process_choice(self, vertex: int, st: _St, choice, wake, base: int) -> None:
        st.choice = choice
        lay = self.layout
        if isinstance(choice, ChoiceComplete):
            st.role = "complete"
            st.complete = True
            return
        if isinstance(choice, ChoiceConnect):
            st.role = "connect"
            st.chosen_u, st.chosen_w = choice.u, choice.w
            self._schedule_choice_followups(st, wake, base)
            if choice.u == vertex:
                st.on_path = True
                st.dist = 0
                w_label = st.neighbor_labels[choice.w]
                notify_rnd = base + lay.relabel_climb + (lay.n_prime - 1 - self._rnd(w_label))
                wake(notify_rnd)
                st.add_intent(notify_rnd, ("notify", choice.w))
                if st.old_parent is not None:
                    send3 = base + lay.relabel_climb + (
                        lay.n_prime - 1 - self._rnd(st.old_parent_label)
                    )
                    wake(send3)
                    st.add_intent(send3, ("s3_send",))
            return
        if isinstance(choice, ChoiceLocalMin):
            st.role = "localmin"
            st.fallback = (choice.fv, choice.fu)
            self._schedule_choice_followups(st, wake, base)
            return
        raise eng.SimError(f"unexpected choice payload {choice!r}")

    def _local_candidates(self, ctx: eng.VertexView, st: _St):
        own_tid = st.label.tree_id
        smaller = None
        any_c = None
        for w in ctx.neighbors:
            w_tid = st.neighbor_labels[w].tree_id
            if w_tid == own_tid:
                continue
            key = (w_tid, w, ctx.vertex)
            if any_c is None or key < any_c:
                any_c = key
            if w_tid < own_tid and (smaller is None or key < smaller):
                smaller = key
        return smaller, any_c

    @staticmethod
    def _merge_cand(current, incoming):
        if incoming is None:
            return current
        if current is None or incoming < current:
            return incoming
        return current

    # -- engine hooks -----------------------------------------------------

    def on_init(self, ctx: eng.VertexView):
        st = _St(ctx.vertex)
        st.neighbor_labels = {w: VertexLabel(w, 0) for w in ctx.neighbors}
        rounds: list[int] = []
        if self.phases == 0:
            rounds.append(0)
            st.add_intent(0, ("finalize",))
        else:
            self._schedule_phase(st, rounds.append)
        return st, rounds

    def on_send(self, ctx: eng.VertexView, st: _St, rnd: int):
        msgs: list[tuple[int, Any]] = []
        for intent in st.intents.get(rnd, ()):
            kind = intent[0]
            if kind == "s1_send":
                if st.cand_smaller is not None:
                    payload: Any = Candidate(True, *st.cand_smaller)
                elif st.cand_any is not None:
                    payload = Candidate(False, *st.cand_any)
                else:
                    payload = NoCandidate()
                msgs.append((st.old_parent, payload))
            elif kind == "s2_own":
                if st.choice is not None:
                    msgs.extend((c, st.choice) for c in st.old_children)
            elif kind == "s3_send":
                if st.role == "connect" and st.on_path:
                    msgs.append((st.old_parent, Climb(st.dist + 1)))
                elif st.role == "localmin":
                    msgs.append((st.old_parent, Adopt(st.adopt_flag or st.notified)))
            elif kind == "notify":
                msgs.append((intent[1], Notify(ctx.vertex)))
            elif kind == "s4_own":
                if st.role == "connect":
                    payload = VertexLabel(st.label.tree_id, st.dist)
                    msgs.extend((c, payload) for c in st.old_children)
                elif st.role in ("localmin", "attach"):
                    # Keep forwarding the decision even after this vertex
                    # already switched into its attach role.
                    msgs.extend((c, Decision(bool(st.tm_adopted))) for c in st.old_children)
            elif kind == "gw1":
                for w in ctx.neighbors:
                    attach = st.role == "attach" and w == st.fallback[1]
                    msgs.append((w, Gw(st.label, st.parent, attach)))
            elif kind == "s5_own":
                msgs.extend((w, st.label) for w in ctx.neighbors)
            elif kind == "s6_send":
                msgs.append((st.old_parent, Climb(st.dist + 1, st.base[0], st.base[1])))
            elif kind == "s7_own":
                payload = Propagate(st.base[0], st.base[1], st.dist)
                msgs.extend((c, payload) for c in st.old_children)
            elif kind == "gw2":
                msgs.extend((w, Gw(st.label, st.parent, False)) for w in ctx.neighbors)
        return msgs

    def on_receive(self, ctx: eng.VertexView, st: _St, rnd: int, inbox, api: eng.VertexApi):
        st.awake_phase += 1
        lay = self.layout
        base = st.phase * lay.phase_window
        for intent in list(st.intents.pop(rnd, ())):
            kind = intent[0]
            if kind == "finalize":
                self._finish(st, api)
            elif kind == "s1_recv":
                smaller, any_c = self._local_candidates(ctx, st)
                st.cand_smaller, st.cand_any = smaller, any_c
                for _, payload in inbox:
                    if isinstance(payload, Candidate):
                        key = (payload.w_tree, payload.w, payload.u)
                        if payload.has_smaller:
                            st.cand_smaller = self._merge_cand(st.cand_smaller, key)
                        st.cand_any = self._merge_cand(st.cand_any, key)
                if st.parent is None:
                    if st.cand_smaller is not None:
                        wt, w, u = st.cand_smaller
                        st.choice = ChoiceConnect(u=u, w=w, w_tree=wt)
                    elif st.cand_any is not None:
                        _, w, u = st.cand_any
                        st.choice = ChoiceLocalMin(fv=u, fu=w)
                    else:
                        st.choice = ChoiceComplete()
            elif kind == "s2_recv":
                for src, payload in inbox:
                    if src == st.old_parent:
                        self._process_choice(ctx.vertex, st, payload, api.wake, base)
            elif kind == "s2_own":
                if st.parent is None and st.role == "idle" and st.choice is not None:
                    self._process_choice(ctx.vertex, st, st.choice, api.wake, base)
            elif kind == "s3_recv":
                for src, payload in inbox:
                    if isinstance(payload, Notify):
                        st.notify_children.add(src)
                        st.notified = True
                    elif isinstance(payload, Climb):
                        st.on_path = True
                        st.dist = payload.dist
                        st.climb_src = src
                        if st.old_parent is not None:
                            send3 = base + lay.relabel_climb + (
                                lay.n_prime - 1 - self._rnd(st.old_parent_label)
                            )
                            api.wake(send3)
                            st.add_intent(send3, ("s3_send",))
                    elif isinstance(payload, Adopt):
                        st.adopt_flag = st.adopt_flag or payload.flag
                if st.role == "localmin" and st.old_parent is None:
                    st.tm_adopted = st.adopt_flag or st.notified
            elif kind == "s4_recv":
                for src, payload in inbox:
                    if src != st.old_parent:
                        continue
                    if isinstance(payload, VertexLabel) and st.role == "connect":
                        if not st.on_path:
                            st.dist = payload.level + 1
                    elif isinstance(payload, Decision) and st.role == "localmin":
                        st.tm_adopted = payload.adopted
                if st.role == "localmin" and st.tm_adopted is False:
                    self._begin_attach(ctx, st, api.wake, base)
            elif kind == "s4_own":
                if st.role == "connect":
                    self._apply_stage_one_relabel(ctx, st)
                elif st.role == "localmin" and st.old_parent is None and st.tm_adopted is False:
                    self._begin_attach(ctx, st, api.wake, base)
            elif kind == "gw1":
                for src, payload in inbox:
                    if isinstance(payload, Gw):
                        st.neighbor_labels[src] = payload.label
                        if payload.attach:
                            st.children.add(src)
                self._schedule_merge_propagate(ctx, st, api.wake, base)
            elif kind == "s5_recv":
                for src, payload in inbox:
                    if src == st.parent and isinstance(payload, VertexLabel):
                        st.label = VertexLabel(payload.tree_id, payload.level + 1)
                        st.parent_label = payload
            elif kind == "s5_listen":
                for src, payload in inbox:
                    if src == st.fallback[1] and isinstance(payload, VertexLabel):
                        st.base = (payload.tree_id, payload.level + 1)
                        st.label = VertexLabel(payload.tree_id, payload.level + 1)
                        st.parent = st.fallback[1]
                        st.parent_label = payload
            elif kind == "s6_recv":
                for src, payload in inbox:
                    if isinstance(payload, Climb):
                        st.on_path = True
                        st.dist = payload.dist
                        st.climb_src = src
                        st.base = (payload.base_tree, payload.base_level)
                        if st.old_parent is not None:
                            send6 = base + lay.attach_climb + (
                                lay.n_prime - 1 - self._rnd(st.old_parent_label)
                            )
                            api.wake(send6)
                            st.add_intent(send6, ("s6_send",))
            elif kind == "s7_recv":
                for src, payload in inbox:
                    if src == st.old_parent and isinstance(payload, Propagate):
                        if st.base is None:
                            st.base = (payload.tree_id, payload.base_level)
                        if not st.on_path:
                            st.dist = payload.dist + 1
            elif kind == "s7_own":
                self._apply_attach_relabel(ctx, st)
            elif kind == "gw2":
                for src, payload in inbox:
                    if isinstance(payload, Gw):
                        st.neighbor_labels[src] = payload.label
                self._end_phase(st, api)

    # -- phase-step helpers ------------------------------------------------

    def _begin_attach(self, ctx: eng.VertexView, st: _St, wake, base: int) -> None:
        lay = self.layout
        st.role = "attach"
        r_own = self._rnd(st.label)
        is_v = st.fallback[0] == ctx.vertex
        if not is_v:
            recv6 = base + lay.attach_climb + (lay.n_prime - 1 - r_own)
            wake(recv6)
            st.add_intent(recv6, ("s6_recv",))
        elif st.old_parent is not None:
            send6 = base + lay.attach_climb + (lay.n_prime - 1 - self._rnd(st.old_parent_label))
            wake(send6)
            st.add_intent(send6, ("s6_send",))
        own7 = base + lay.attach_propagate + r_own
        wake(own7)
        st.add_intent(own7, ("s7_own",))
        if st.old_parent is not None:
            recv7 = base + lay.attach_propagate + self._rnd(st.old_parent_label)
            wake(recv7)
            st.add_intent(recv7, ("s7_recv",))
        if is_v:
            st.on_path = True
            st.dist = 0

    def _apply_stage_one_relabel(self, ctx: eng.VertexView, st: _St) -> None:
        st.label = VertexLabel(st.label.tree_id, st.dist)
        new_children = set(st.old_children) | st.notify_children
        if st.on_path:
            if st.climb_src is not None:
                new_children.discard(st.climb_src)
            if st.old_parent is not None:
                new_children.add(st.old_parent)
            if ctx.vertex == st.chosen_u:
                st.parent = st.chosen_w
                st.parent_label = None  # learned during the merge propagate
            else:
                st.parent = st.climb_src
                st.parent_label = VertexLabel(st.label.tree_id, st.dist - 1)
        else:
            st.parent = st.old_parent
            st.parent_label = VertexLabel(st.label.tree_id, st.dist - 1)
        st.children = new_children

    def _schedule_merge_propagate(self, ctx: eng.VertexView, st: _St, wake, base: int) -> None:
        lay = self.layout
        off = base + lay.merge_propagate
        if st.role in ("complete", "idle"):
            return
        if st.role == "localmin":
            if st.tm_adopted:
                st.children |= st.notify_children
                rnd = off + self._rnd(st.label)
                wake(rnd)
                st.add_intent(rnd, ("s5_own",))
            return
        if st.role == "attach":
            if st.fallback[0] == ctx.vertex:
                rnd = off + self._rnd(st.neighbor_labels[st.fallback[1]])
                wake(rnd)
                st.add_intent(rnd, ("s5_listen",))
            return
        rnd_own = off + self._rnd(st.label)
        wake(rnd_own)
        st.add_intent(rnd_own, ("s5_own",))
        rnd_recv = off + self._rnd(st.neighbor_labels[st.parent])
        wake(rnd_recv)
        st.add_intent(rnd_recv, ("s5_recv",))

    def _apply_attach_relabel(self, ctx: eng.VertexView, st: _St) -> None:
        is_v = st.fallback[0] == ctx.vertex
        st.label = VertexLabel(st.base[0], st.base[1] + st.dist)
        new_children = set(st.old_children)
        if st.on_path:
            if st.climb_src is not None:
                new_children.discard(st.climb_src)
            if st.old_parent is not None:
                new_children.add(st.old_parent)
        if is_v:
            st.parent = st.fallback[1]
            # parent_label was recorded at the merge-propagate listen
        elif st.on_path:
            st.parent = st.climb_src
            st.parent_label = VertexLabel(st.label.tree_id, st.label.level - 1)
        else:
            st.parent = st.old_parent
            st.parent_label = VertexLabel(st.label.tree_id, st.label.level - 1)
        st.children = new_children

    def _end_phase(self, st: _St, api: eng.VertexApi) -> None:
        st.history.append(
            {
                "phase": st.phase,
                "label": st.label,
                "parent": st.parent,
                "parent_label": st.parent_label,
                "is_root": st.parent is None,
                "awake": st.awake_phase,
                "role": st.role,
            }
        )
        st.phase += 1
        if st.phase >= self.phases:
            self._finish(st, api)
        else:
            self._schedule_phase(st, api.wake)

    def _finish(self, st: _St, api: eng.VertexApi) -> None:
        api.finish(
            {
                "entry": DltVertex(
                    label=st.label,
                    parent=st.parent,
                    parent_label=st.parent_label,
                    is_root=st.parent is None,
                ),
                "history": st.history,
            }
        )


# -- forest validation and the build wrapper --------------------------------


def validate_forest(
    graph: Graph,
    labels: dict[int, VertexLabel],
    parents: dict[int, int | None],
    parent_labels: dict[int, VertexLabel | None],
) -> CheckReport:
    """validate_dlt generalized to a forest: one root per parent-component."""
    bad: list[tuple[str, str]] = []
    for v in graph.vertices:
        p = parents[v]
        if p is None:
            continue
        if p not in graph.adjacency[v]:
            bad.append(("parent-neighbor", f"parent {p} of {v} is not a neighbor"))
            continue
        if parent_labels[v] != labels[p]:
            bad.append(("parent-label", f"vertex {v} records {parent_labels[v]}, parent has {labels[p]}"))
        if not labels[v] > labels[p]:
            bad.append(("label-order", f"child {v} label {labels[v]} <= parent label {labels[p]}"))
    status: dict[int, bool] = {}
    for v in graph.vertices:
        path = []
        x = v
        while x not in status:
            status[x] = False
            path.append(x)
            if parents[x] is None:
                status[x] = True
                break
            x = parents[x]
        ok_here = status.get(x, False)
        for y in path:
            status[y] = ok_here
        if not ok_here:
            bad.append(("spanning", f"parent walk from {v} cycles"))
            break
    return CheckReport(tuple(bad))


def _component_levels_ok(
    graph: Graph, labels: dict[int, VertexLabel], parents: dict[int, int | None]
) -> bool:
    """Levels must equal tree distance from the component root, everywhere."""
    children: dict[int, list[int]] = {v: [] for v in graph.vertices}
    roots = []
    for v in graph.vertices:
        p = parents[v]
        if p is None:
            roots.append(v)
        else:
            children[p].append(v)
    seen = 0
    for root in roots:
        queue = deque([(root, 0)])
        tid = labels[root].tree_id
        while queue:
            x, depth = queue.popleft()
            seen += 1
            if labels[x] != VertexLabel(tid, depth):
                return False
            for c in children[x]:
                queue.append((c, depth + 1))
    return seen == graph.n


@dataclass(frozen=True)
class PhaseRecord:
    """One connection phase as observed from the vertices' own histories."""

    phase: int
    component_count: int
    validator_ok: bool
    level_form_ok: bool
    max_awake: int
    labels: dict[int, VertexLabel]
    parents: dict[int, int | None]
    roles: dict[int, str]

    def to_row(self) -> dict[str, Any]:
        return {
            "phase": self.phase,
            "components": self.component_count,
            "validatorOk": self.validator_ok,
            "levelFormOk": self.level_form_ok,
            "maxAwake": self.max_awake,
        }


@dataclass
class BuildResult:
    assignment: DltAssignment
    metrics: eng.RunMetrics
    trace: list[PhaseRecord]


def build_dlt(
    graph: Graph,
    config: eng.EngineConfig | None = None,
    phases: int | None = None,
) -> BuildResult:
    """Construct a layered spanning tree in ceil(log2 n) connection phases."""
    program = ConnectionPhaseProgram(graph, phases)
    result = eng.run(graph, program, config or eng.EngineConfig())
    entries = {v: out["entry"] for v, out in result.outputs.items()}
    assignment = DltAssignment.from_dict(entries)
    trace: list[PhaseRecord] = []
    for k in range(program.phases):
        labels = {}
        parents = {}
        parent_labels = {}
        roles = {}
        max_awake = 0
        for v in graph.vertices:
            rec = result.outputs[v]["history"][k]
            labels[v] = rec["label"]
            parents[v] = rec["parent"]
            parent_labels[v] = rec["parent_label"]
            roles[v] = rec["role"]
            max_awake = max(max_awake, rec["awake"])
        report = validate_forest(graph, labels, parents, parent_labels)
        trace.append(
            PhaseRecord(
                phase=k,
                component_count=len({lab.tree_id for lab in labels.values()}),
                validator_ok=report.ok,
                level_form_ok=_component_levels_ok(graph, labels, parents),
                max_awake=max_awake,
                labels=labels,
                parents=parents,
                roles=roles,
            )
        )
    return BuildResult(assignment=assignment, metrics=result.metrics, trace=trace)


# -- pure reference model (hand-simulation oracle) ---------------------------


@dataclass
class ForestState:
    """Labels plus parent pointers, one entry per vertex."""

    labels: dict[int, VertexLabel]
    parents: dict[int, int | None]

    def tree_members(self) -> dict[int, list[int]]:
        trees: dict[int, list[int]] = {}
        for v in sorted(self.labels):
            trees.setdefault(self.labels[v].tree_id, []).append(v)
        return trees


def initial_forest(graph: Graph) -> ForestState:
    return ForestState(
        labels={v: VertexLabel(v, 0) for v in graph.vertices},
        parents={v: None for v in graph.vertices},
    )


def _bfs_parents(members: list[int], parents: dict[int, int | None], root: int):
    adj: dict[int, list[int]] = {v: [] for v in members}
    for v in members:
        p = parents[v]
        if p is not None:
            adj[v].append(p)
            adj[p].append(v)
    out: dict[int, int | None] = {root: None}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in out:
                out[y] = x
                queue.append(y)
    return out


@dataclass(frozen=True)
class ReferencePhaseInfo:
    choices: dict[int, tuple[int, int, int]]
    local_minima: tuple[int, ...]
    adopted: tuple[int, ...]
    attached: dict[int, tuple[int, int]]
    complete: tuple[int, ...]


def reference_phase(graph: Graph, state: ForestState) -> tuple[ForestState, ReferencePhaseInfo]:
    """One connection phase, computed centrally with the same tie-breaks."""
    trees = state.tree_members()
    tid_of = {v: state.labels[v].tree_id for v in graph.vertices}
    choices: dict[int, tuple[int, int, int]] = {}
    fallback: dict[int, tuple[int, int, int]] = {}
    complete: list[int] = []
    for tid, members in trees.items():
        cands = [
            (tid_of[w], w, u)
            for u in members
            for w in graph.adjacency[u]
            if tid_of[w] != tid
        ]
        if not cands:
            complete.append(tid)
            continue
        smaller = [c for c in cands if c[0] < tid]
        if smaller:
            choices[tid] = min(smaller)
        else:
            fallback[tid] = min(cands)
    adopted = sorted({wt for wt, _, _ in choices.values()} & set(fallback))
    attached = {
        tid: (u, w)
        for tid, (_, w, u) in fallback.items()
        if tid not in adopted
    }

    new_parents = dict(state.parents)
    for tid, (_, w, u) in choices.items():
        for v, p in _bfs_parents(trees[tid], state.parents, u).items():
            new_parents[v] = p
        new_parents[u] = w
    for tid, (u, w) in attached.items():
        for v, p in _bfs_parents(trees[tid], state.parents, u).items():
            new_parents[v] = p
        new_parents[u] = w

    children: dict[int, list[int]] = {v: [] for v in graph.vertices}
    roots = []
    for v in graph.vertices:
        p = new_parents[v]
        if p is None:
            roots.append(v)
        else:
            children[p].append(v)
    new_labels: dict[int, VertexLabel] = {}
    for root in roots:
        tid = state.labels[root].tree_id
        queue = deque([(root, 0)])
        while queue:
            x, depth = queue.popleft()
            new_labels[x] = VertexLabel(tid, depth)
            for c in children[x]:
                queue.append((c, depth + 1))
    info = ReferencePhaseInfo(
        choices=choices,
        local_minima=tuple(sorted(fallback)),
        adopted=tuple(adopted),
        attached=attached,
        complete=tuple(complete),
    )
    return ForestState(labels=new_labels, parents=new_parents), info


def reference_build(graph: Graph, phases: int | None = None) -> list[ForestState]:
    """Forest state after each phase; the last entry is the final tree."""
    count = PhaseLayout(graph.n_hat, graph.n).phase_count() if phases is None else phases
    state = initial_forest(graph)
    snapshots = []
    for _ in range(count):
        state, _info = reference_phase(graph, state)
        snapshots.append(state)
    return snapshots
