"""Mesh network-on-chip: adjacency, routing plans and request delivery.

Timing model: every link traversal (including injection into and ejection
from the fabric) takes one tick; a DPU decision takes one tick; an accepting
DPU spends one tick building its view, one per view record, and one to
report. Links are reliable and contention-free, so a packet's link events are
laid out as soon as it departs and only its arrival is scheduled.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

from antituring.blocks import REGISTRY, FunctionalBlock, select_block
from antituring.dpu import (
    FsmState,
    FsmStep,
    View,
    execute_block,
    on_request_packet,
    prepare_view,
)
from antituring.fabric import Fabric, Topology
from antituring.lang.compiler import Request
from antituring.packets import (
    ConfirmationPacket,
    Coord,
    ProtocolViolation,
    RequestPacket,
    ResultPacket,
)

INITIATOR = "initiator"
ROUTING_POLICIES = ("walk", "flood", "multicast")
_POLICY_ALIASES = {
    "walk": "walk",
    "serpentine-walk": "walk",
    "flood": "flood",
    "flood-spanning-tree": "flood",
    "multicast": "multicast",
    "relation-multicast": "multicast",
}
EVENT_KINDS = ("inject", "hop", "deliver", "confirm", "result", "eject")
LINK_KINDS = frozenset({"inject", "hop", "confirm", "result", "eject"})
_KIND_RANK = {k: i for i, k in enumerate(EVENT_KINDS)}

Endpoint = Union[Coord, str]


def normalize_policy(policy: str) -> str:
    try:
        return _POLICY_ALIASES[policy]
    except KeyError:
        raise ValueError(f"unknown routing policy {policy!r}") from None


# --- mesh geometry ---------------------------------------------------------


def _check(topology: Topology, coord: Coord) -> Coord:
    coord = tuple(coord)
    if not topology.contains(coord):
        raise KeyError(f"unknown DpuId {coord} for topology {topology}")
    return coord


def neighbors(topology: Topology, dpu: Coord) -> list[Coord]:
    """Mesh neighbours at Manhattan distance 1, sorted by coordinate."""
    dpu = _check(topology, dpu)
    out = []
    for axis, extent in enumerate(topology.extent):
        for delta in (-1, 1):
            c = dpu[axis] + delta
            if 0 <= c < extent:
                out.append(dpu[:axis] + (c,) + dpu[axis + 1 :])
    return sorted(out)


def manhattan(a: Coord, b: Coord) -> int:
    return sum(abs(x - y) for x, y in zip(a, b))


def _serpentine(extent: Sequence[int]) -> list[Coord]:
    if not extent:
        return [()]
    inner = _serpentine(extent[1:])
    out = []
    for i in range(extent[0]):
        for rest in (inner if i % 2 == 0 else reversed(inner)):
            out.append((i,) + rest)
    return out


def plan_walk(topology: Topology) -> list[Coord]:
    """Boustrophedon order over the mesh, starting at the all-zeros DPU.

    Odd rows run backwards; in 3D odd planes replay the planar order in
    reverse so the walk stays on mesh links.
    """
    return _serpentine(topology.extent)


def spanning_tree(topology: Topology, root: Coord) -> dict[Coord, Coord]:
    """BFS tree as a child -> parent mapping."""
    root = _check(topology, root)
    parent: dict[Coord, Coord] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for nb in neighbors(topology, node):
            if nb not in seen:
                seen.add(nb)
                parent[nb] = node
                queue.append(nb)
    return parent


def route_back(topology: Topology, src: Coord, dst: Coord) -> list[Coord]:
    """Dimension-ordered path, first coordinate first. Empty when src == dst."""
    src, dst = _check(topology, src), _check(topology, dst)
    if src == dst:
        return []
    path = [src]
    cur = list(src)
    for axis in range(topology.dims):
        step = 1 if dst[axis] > cur[axis] else -1
        while cur[axis] != dst[axis]:
            cur[axis] += step
            path.append(tuple(cur))
    return path


# --- trace -----------------------------------------------------------------


def _endpoint_key(ep: Endpoint) -> tuple[int, ...]:
    return (-1,) if ep == INITIATOR else tuple(ep)


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str
    src: Endpoint
    dst: Endpoint
    request: int
    nbytes: int
    seq: int = field(default=0, compare=False)

    @property
    def is_link(self) -> bool:
        return self.kind in LINK_KINDS

    def sort_key(self) -> tuple:
        return (self.tick, _endpoint_key(self.src), _KIND_RANK[self.kind],
                _endpoint_key(self.dst), self.seq)

    def to_json(self) -> dict:
        def ep(x: Endpoint):
            return x if x == INITIATOR else list(x)

        return {"tick": self.tick, "kind": self.kind, "from": ep(self.src), "to": ep(self.dst),
                "request": self.request, "bytes": self.nbytes}


class EventQueue:
    """Tick-ordered callback queue; ties break on (order key, submission)."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = itertools.count()
        self.now = 0

    def at(self, tick: int, order: tuple, fn: Callable, *args) -> None:
        if tick < self.now:
            raise ValueError("cannot schedule in the past")
        heapq.heappush(self._heap, (tick, order, next(self._seq), fn, args))

    def run(self) -> None:
        while self._heap:
            tick, _, _, fn, args = heapq.heappop(self._heap)
            self.now = tick
            fn(tick, *args)


@dataclass
class Delivery:
    """Everything that happened while one request was in the fabric."""

    request: Request
    policy: str
    packet: RequestPacket | None = None
    packet_arrival: int = 0
    events: list[TraceEvent] = field(default_factory=list)
    confirmations: list[tuple[int, ConfirmationPacket]] = field(default_factory=list)
    results: list[tuple[int, ResultPacket]] = field(default_factory=list)
    fsm_log: list[FsmStep] = field(default_factory=list)
    skips: list[tuple[Coord, int]] = field(default_factory=list)
    exec_ticks: dict[Coord, tuple[int, int]] = field(default_factory=dict)
    targets: list[Coord] | None = None
    fallback: bool = False
    packet_count: int = 0

    @property
    def link_events(self) -> list[TraceEvent]:
        return [e for e in self.events if e.is_link]

    @property
    def completion_tick(self) -> int:
        arrivals = [self.packet_arrival]
        arrivals += [t for t, _ in self.confirmations]
        arrivals += [t for t, _ in self.results]
        return max(arrivals)


class _Run:
    def __init__(self, fabric: Fabric, request: Request, policy: str,
                 registry: Mapping[str, FunctionalBlock]) -> None:
        self.fabric = fabric
        self.topology = fabric.topology
        self.entry = fabric.initiator
        self.request = request
        self.rid = request.request_id
        self.block = select_block(request, registry)
        self.q = EventQueue()
        self.out = Delivery(request, policy)
        self._pids = itertools.count()
        self._seq = itertools.count()

    # -- transport --

    def _emit(self, tick: int, kind: str, src: Endpoint, dst: Endpoint, nbytes: int) -> None:
        self.out.events.append(TraceEvent(tick, kind, src, dst, self.rid, nbytes, next(self._seq)))

    def transmit(self, tick: int, kind: str, path: Sequence[Coord], nbytes: int, *,
                 inject: bool = False, eject: bool = False, on_arrive: Callable,
                 args: tuple = (), pid: int | None = None) -> int:
        """Send one packet along ``path`` starting at ``tick``.

        ``inject`` prepends the initiator->path[0] link, ``eject`` appends the
        path[-1]->initiator link. Request packets use hop/eject kinds;
        confirmations and results use their own kind on every link. Pass the
        returned ``pid`` back in to continue the same packet on a later leg.
        """
        if pid is None:
            pid = next(self._pids)
            self.out.packet_count += 1
        t = tick
        if inject:
            self._emit(t, "inject", INITIATOR, path[0], nbytes)
            t += 1
        for a, b in zip(path, path[1:]):
            self._emit(t, kind, a, b, nbytes)
            t += 1
        if eject:
            self._emit(t, "eject" if kind == "hop" else kind, path[-1], INITIATOR, nbytes)
            t += 1
        dest = INITIATOR if eject else path[-1]
        self.q.at(t, (_endpoint_key(dest), _KIND_RANK[kind]), on_arrive, *args)
        return pid

    def _return_path(self, src: Coord) -> list[Coord]:
        return route_back(self.topology, src, self.entry) or [src]

    # -- DPU side --

    def deliver(self, tick: int, coord: Coord, packet: RequestPacket) -> int:
        """Run the DPU decision at ``coord``; returns the tick it completes."""
        dpu = self.fabric.dpus[coord]
        self._emit(tick, "deliver", coord, coord, 0)
        if dpu.fsm is not FsmState.IDLE:
            raise ProtocolViolation(f"DPU {coord} busy ({dpu.fsm.value}) when request {self.rid} arrived")
        dpu.transition(FsmState.MATCHING, tick, self.rid, self.out.fsm_log)
        packet, confirmation = on_request_packet(dpu, packet)
        total = packet.processing_count + packet.rejection_count
        if total > self.topology.size:
            raise ProtocolViolation(f"counter overflow on request {self.rid}")
        done = tick + 1
        if confirmation is None:
            dpu.transition(FsmState.IDLE, done, self.rid, self.out.fsm_log)
            return done
        dpu.transition(FsmState.PREPARING_VIEW, done, self.rid, self.out.fsm_log)
        self.transmit(done, "confirm", self._return_path(coord), confirmation.nbytes,
                      eject=True, on_arrive=self._got_confirmation, args=(confirmation,))
        self.q.at(done + 1, (coord, 0), self._start_execute, coord, done)
        return done

    def _start_execute(self, tick: int, coord: Coord, accepted_at: int) -> None:
        dpu = self.fabric.dpus[coord]
        view = prepare_view(dpu, self.request)
        dpu.transition(FsmState.EXECUTING, tick, self.rid, self.out.fsm_log)
        self.q.at(tick + len(view.record_ids), (coord, 1), self._finish_execute, coord, view,
                  accepted_at)

    def _finish_execute(self, tick: int, coord: Coord, view: View, accepted_at: int) -> None:
        dpu = self.fabric.dpus[coord]
        partial = execute_block(dpu, self.block, view, self.request.args, self.rid)
        if partial.skipped:
            self.out.skips.append((coord, partial.skipped))
        dpu.transition(FsmState.REPORTING, tick, self.rid, self.out.fsm_log)
        dpu.transition(FsmState.IDLE, tick + 1, self.rid, self.out.fsm_log)
        self.out.exec_ticks[coord] = (accepted_at, tick + 1)
        result = ResultPacket(self.rid, coord, partial)
        self.transmit(tick + 1, "result", self._return_path(coord), result.payload_bytes,
                      eject=True, on_arrive=self._got_result, args=(result,))

    # -- initiator side --

    def _got_confirmation(self, tick: int, confirmation: ConfirmationPacket) -> None:
        self.out.confirmations.append((tick, confirmation))

    def _got_result(self, tick: int, result: ResultPacket) -> None:
        self.out.results.append((tick, result))

    def _got_packet(self, tick: int, packet: RequestPacket) -> None:
        self.out.packet = packet
        self.out.packet_arrival = tick
        if self.out.policy == "multicast" and packet.round == 0 and packet.processing_count == 0:
            # stale targets: nobody accepted, so fall back to a full broadcast
            self.out.fallback = True
            self.tour(tick, plan_walk(self.topology), round=1)

    # -- routing policies --

    def tour(self, tick: int, stops: Sequence[Coord], round: int = 0) -> None:
        """Visit ``stops`` in order along dimension-ordered paths, then return.

        The serpentine walk is the tour over every DPU; relation multicast is a
        tour over the target subset (DPUs passed on the way are not delivered).
        """
        packet = RequestPacket(self.request, round=round)
        nbytes = packet.nbytes
        stops = list(stops)

        def leg(t: int, cur: Coord, i: int) -> None:
            if i < len(stops):
                path = route_back(self.topology, cur, stops[i])
                if path:
                    self.transmit(t, "hop", path, nbytes, on_arrive=arrive, args=(i,), pid=pid)
                else:
                    arrive(t, i)
            else:
                self.transmit(t, "hop", self._return_path(cur), nbytes, eject=True,
                              on_arrive=self._got_packet, args=(packet,), pid=pid)

        def arrive(t: int, i: int) -> None:
            done = self.deliver(t, stops[i], packet)
            leg(done, stops[i], i + 1)

        pid = self.transmit(tick, "hop", [self.entry], nbytes, inject=True,
                            on_arrive=lambda t: leg(t, self.entry, 0))

    def flood(self, tick: int) -> None:
        root = self.entry
        parent = spanning_tree(self.topology, root)
        children: dict[Coord, list[Coord]] = {c: [] for c in self.topology.coords()}
        for child, par in sorted(parent.items()):
            children[par].append(child)
        pending = {c: len(kids) for c, kids in children.items()}
        local: dict[Coord, RequestPacket] = {}
        decided: set[Coord] = set()
        nbytes = RequestPacket(self.request).nbytes

        def arrive(t: int, node: Coord) -> None:
            local[node] = RequestPacket(self.request)
            done = self.deliver(t, node, local[node])
            for child in children[node]:
                self.transmit(done, "hop", [node, child], nbytes, on_arrive=arrive, args=(child,))
            self.q.at(done, (node, 2), settle, node)

        def settle(t: int, node: Coord) -> None:
            decided.add(node)
            maybe_up(t, node)

        def maybe_up(t: int, node: Coord) -> None:
            if node not in decided or pending[node]:
                return
            if node == root:
                self.transmit(t, "hop", [root], nbytes, eject=True, on_arrive=self._got_packet,
                              args=(local[root],))
            else:
                self.transmit(t, "hop", [node, parent[node]], nbytes, on_arrive=merge,
                              args=(node,))

        def merge(t: int, child: Coord) -> None:
            par = parent[child]
            local[par].merge(local[child])
            pending[par] -= 1
            maybe_up(t, par)

        self.transmit(tick, "hop", [root], nbytes, inject=True, on_arrive=arrive, args=(root,))

    def run(self, policy: str, targets: Sequence[Coord] | None) -> Delivery:
        if policy == "walk":
            self.tour(0, plan_walk(self.topology))
        elif policy == "flood":
            self.flood(0)
        else:
            if targets is None:
                raise ValueError("multicast routing needs a target set")
            order = {c: i for i, c in enumerate(plan_walk(self.topology))}
            stops = sorted({_check(self.topology, t) for t in targets}, key=order.__getitem__)
            self.out.targets = stops
            self.tour(0, stops)
        self.q.run()
        out = self.out
        out.events.sort(key=TraceEvent.sort_key)
        if out.packet is None:
            raise ProtocolViolation(f"request {self.rid} never returned to the initiator")
        out.packet.hop_count = sum(
            1 for e in out.events if e.kind in ("inject", "hop", "eject")
        )
        busy = [c for c, d in self.fabric.dpus.items() if d.fsm is not FsmState.IDLE]
        if busy:
            raise ProtocolViolation(f"DPUs still busy after request {self.rid}: {busy}")
        return out


def route_request(fabric: Fabric, request: Request, policy: str = "walk", *,
                  targets: Sequence[Coord] | None = None,
                  registry: Mapping[str, FunctionalBlock] = REGISTRY) -> Delivery:
    """Deliver ``request`` to the fabric and simulate it until the initiator
    holds the returned packet, every confirmation and every result.

    ``targets`` is required for multicast and ignored otherwise.
    """
    policy = normalize_policy(policy)
    return _Run(fabric, request, policy, registry).run(policy, targets)
