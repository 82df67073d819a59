"""Deterministic simulation harness: virtual clock, scripted or random edits.

Runs a server and N mirror clients over an in-memory transport with a
virtual event clock.  Everything is driven from one seeded RNG, so a
scenario (seed, script, delivery schedule) always produces the same
event order, the same conflicts, and the same final model — byte for
byte.
"""

from __future__ import annotations

import copy
import heapq
import random
from dataclasses import dataclass, field

import yaml

from . import model as model_mod
from . import protocol as proto
from .client import MirrorModel
from .errors import ParseError
from .metamodel import parse_metamodel
from .model import apply_command, clone_model, diff_models, models_equal
from .server import GraphServer


@dataclass
class ScriptStep:
    clientIndex: int
    delay: float  # virtual time offset from scenario start
    action: dict  # a command dict (see protocol docs) or {"kind": "randomEdits", "count": n}


@dataclass
class Scenario:
    seed: int = 0
    clients: int = 2
    modelId: str = "sim"
    metamodel: str | None = None  # path; None = bundled flowchart
    script: list = field(default_factory=list)  # ScriptSteps
    deliverySchedule: str = "fifo"  # fifo | randomDelay
    delayBounds: tuple = (0.5, 3.0)  # randomDelay only
    baseLatency: float = 1.0


def load_scenario(text) -> Scenario:
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ParseError("scenario file must be a mapping")
    steps = [
        ScriptStep(
            clientIndex=int(s["clientIndex"]),
            delay=float(s.get("delay", 0.0)),
            action=s["action"],
        )
        for s in raw.get("script", [])
    ]
    return Scenario(
        seed=int(raw.get("seed", 0)),
        clients=int(raw.get("clients", 2)),
        modelId=raw.get("modelId", "sim"),
        metamodel=raw.get("metamodel"),
        script=steps,
        deliverySchedule=raw.get("deliverySchedule", "fifo"),
        delayBounds=tuple(raw.get("delayBounds", (0.5, 3.0))),
        baseLatency=float(raw.get("baseLatency", 1.0)),
    )


class VirtualClock:
    """Heapq event loop; ties break on insertion order for determinism."""

    def __init__(self):
        self.now = 0.0
        self._seq = 0
        self._events = []

    def schedule(self, delay, callback):
        self._seq += 1
        heapq.heappush(self._events, (self.now + delay, self._seq, callback))

    def run(self):
        while self._events:
            time, _, callback = heapq.heappop(self._events)
            self.now = time
            callback()


class SimLink:
    """One direction of a client-server connection.

    Delivery is FIFO per link even under random jitter: a frame never
    overtakes an earlier frame on the same link (TCP-like ordering).
    """

    def __init__(self, clock, rng, deliver, base_latency, jitter_bounds=None):
        self.clock = clock
        self.rng = rng
        self.deliver = deliver
        self.base_latency = base_latency
        self.jitter_bounds = jitter_bounds
        self._last_delivery = 0.0

    def send(self, frame):
        latency = self.base_latency
        if self.jitter_bounds is not None:
            latency += self.rng.uniform(*self.jitter_bounds)
        at = max(self.clock.now + latency, self._last_delivery)
        self._last_delivery = at
        self.clock.schedule(at - self.clock.now, lambda: self.deliver(frame))


@dataclass
class ConvergenceReport:
    converged: bool
    virtualTime: float
    perClientDiff: dict  # clientIndex -> list of diff strings vs. central
    committed: int
    rejected: int
    reverted: int
    broadcasts: int
    finalModel: dict  # central snapshot
    replayMatches: bool = True


class SimClient:
    def __init__(self, index, spec, server, session, clock, rng, scenario):
        self.index = index
        self.session = session
        jitter = scenario.delayBounds if scenario.deliverySchedule == "randomDelay" else None
        self.uplink = SimLink(
            clock, rng, lambda f: server.handle_frame(session, f), scenario.baseLatency, jitter
        )
        self.downlink = SimLink(
            clock, rng, self._receive, scenario.baseLatency, jitter
        )
        self.mirror = MirrorModel(spec, f"user{index}", transport=self.uplink)

    def _receive(self, frame):
        self.mirror.on_server_frame(frame)

    def drain(self):
        """Move server-enqueued frames onto the downlink."""
        while self.session.outbound:
            self.downlink.send(self.session.outbound.popleft())


class RandomEditor:
    """Generates valid-looking random edits against a client's replica.

    Each attempt picks an operation and random parameters, then tries it
    through the replica guard (bounded retries).  Conflicts with other
    clients are expected and resolved by the server.
    """

    OPS = ("create", "move", "resize", "delete", "attrs", "edge")

    def __init__(self, rng, spec):
        self.rng = rng
        self.spec = spec
        self._node_types = sorted(t.name for t in spec.concrete_node_types())
        self._edge_types = sorted(t.name for t in spec.concrete_edge_types())
        self._counter = 0

    def _new_id(self, client_index):
        self._counter += 1
        return f"c{client_index}x{self._counter}"

    def one_edit(self, mirror, client_index, retries=25):
        if len(mirror.pending) >= mirror.max_pending:
            return None  # in-flight window full; skip this slot
        for _ in range(retries):
            out = self._attempt(mirror, client_index)
            if out is not None and out.status == "sent":
                return out
        return None

    def _attempt(self, mirror, client_index):
        replica = mirror.replica
        nodes = sorted(
            e.id for e in replica.elements.values() if not isinstance(e, model_mod.Edge)
        )
        edges = sorted(
            e.id for e in replica.elements.values() if isinstance(e, model_mod.Edge)
        )
        op = self.rng.choice(self.OPS)
        try:
            if op == "create" or not nodes:
                cmd = proto.CreateNode(
                    id=self._new_id(client_index),
                    typeName=self.rng.choice(self._node_types),
                    containerId=replica.id,
                    x=self.rng.randrange(0, 800),
                    y=self.rng.randrange(0, 600),
                    width=self.rng.randrange(40, 120),
                    height=self.rng.randrange(30, 80),
                )
            elif op == "move":
                el = replica.elements[self.rng.choice(nodes)]
                cmd = proto.MoveNode(
                    id=el.id,
                    fromContainerId=el.containerId,
                    toContainerId=el.containerId,
                    from_=[el.x, el.y],
                    to=[self.rng.randrange(0, 800), self.rng.randrange(0, 600)],
                )
            elif op == "resize":
                el = replica.elements[self.rng.choice(nodes)]
                cmd = proto.ResizeNode(
                    id=el.id,
                    oldSize=[el.width, el.height],
                    newSize=[self.rng.randrange(40, 120), self.rng.randrange(30, 80)],
                )
            elif op == "delete":
                pick = self.rng.choice(edges + nodes if edges else nodes)
                return mirror.delete_element(pick)
            elif op == "attrs":
                el = replica.elements[self.rng.choice(nodes)]
                attrs = model_mod.cached_attributes(self.spec, el.typeName)
                writable = [a for a in attrs if a.valueType == "string"]
                if not writable:
                    return None
                attr = self.rng.choice(sorted(writable, key=lambda a: a.name))
                new = dict(el.attributes)
                new[attr.name] = [f"v{self.rng.randrange(1000)}"]
                cmd = proto.SetAttributes(
                    id=el.id, oldAssignment=dict(el.attributes), newAssignment=new
                )
            else:  # edge
                if len(nodes) < 2 or not self._edge_types:
                    return None
                src, tgt = self.rng.choice(nodes), self.rng.choice(nodes)
                cmd = proto.CreateEdge(
                    id=self._new_id(client_index),
                    typeName=self.rng.choice(self._edge_types),
                    sourceId=src,
                    targetId=tgt,
                )
            return mirror.local_edit(cmd)
        except KeyError:
            return None


def run_scenario(scenario: Scenario, spec=None) -> ConvergenceReport:
    if spec is None:
        spec = _load_spec(scenario)
    rng = random.Random(scenario.seed)
    clock = VirtualClock()
    server = GraphServer(spec, auto_create=True)
    server.get_model(scenario.modelId)

    clients = []
    for i in range(scenario.clients):
        session = server.connect(f"user{i}", scenario.modelId)
        clients.append(SimClient(i, spec, server, session, clock, rng, scenario))

    def pump():
        for c in clients:
            c.drain()
        if any(c.session.outbound for c in clients):
            clock.schedule(0.0, pump)

    # deliver init frames and keep the downlinks primed after every event
    orig_schedule = clock.schedule

    def schedule(delay, callback):
        def wrapped():
            callback()
            for c in clients:
                c.drain()

        orig_schedule(delay, wrapped)

    clock.schedule = schedule
    # connection handshake completes before the scenario clock starts
    for c in clients:
        while c.session.outbound:
            c.mirror.on_server_frame(c.session.outbound.popleft())

    editor = RandomEditor(rng, spec)
    for step in scenario.script:
        client = clients[step.clientIndex]
        action = step.action

        if action.get("kind") == "randomEdits":
            # spread the burst so echoes can drain the bounded pending window
            spacing = float(action.get("spacing", 0.25))
            for k in range(int(action.get("count", 1))):

                def fire_one(client=client, index=step.clientIndex):
                    editor.one_edit(client.mirror, index)

                clock.schedule(step.delay + k * spacing, fire_one)
        else:

            def fire(client=client, action=action):
                client.mirror.local_edit(proto.command_from_dict(action))

            clock.schedule(step.delay, fire)

    clock.run()
    # settle: pump until fully quiescent
    for _ in range(64):
        if not any(c.session.outbound for c in clients):
            break
        for c in clients:
            c.drain()
        clock.run()

    central = server.get_model(scenario.modelId)
    per_client = {}
    converged = True
    for c in clients:
        diffs = diff_models(c.mirror.replica, central)
        per_client[c.index] = diffs
        if diffs:
            converged = False
    replay_ok = replay_matches(server, scenario.modelId, spec)
    return ConvergenceReport(
        converged=converged,
        virtualTime=clock.now,
        perClientDiff=per_client,
        committed=server.counters["committed"],
        rejected=server.counters["rejected"],
        reverted=server.counters["reverted"],
        broadcasts=server.counters["broadcasts"],
        finalModel=model_mod.model_to_dict(central),
        replayMatches=replay_ok,
    )


def replay_matches(server, model_id, spec) -> bool:
    """Replaying the committed stacks from an empty model reproduces the state."""
    replayed = model_mod.new_model(spec, model_id)
    for stack in server.committed_stacks.get(model_id, []):
        for cmd in stack:
            model_mod.force_apply(replayed, spec, cmd)
        # modelVersion advances once per committed message
        replayed.modelVersion += 1
    return models_equal(replayed, server.get_model(model_id), ignore_versions=True)


def _load_spec(scenario):
    if scenario.metamodel is None:
        import importlib.resources as ir

        text = (ir.files("collabgraph") / "samples" / "flowchart.yaml").read_text()
    else:
        with open(scenario.metamodel, encoding="utf-8") as fh:
            text = fh.read()
    return parse_metamodel(text)


# ---------------------------------------------------------------------------
# Exhaustive interleaving exploration
# ---------------------------------------------------------------------------


def exhaustive_interleave(spec, setup_commands, concurrent_edits, model_id="x"):
    """Explore every delivery interleaving of concurrent edits.

    ``setup_commands`` build the shared base state.  ``concurrent_edits``
    is a list of (client_index, command) pairs issued simultaneously —
    before any client has seen the others' edits.  Explores all orders in
    which the server processes the uplinks and the clients receive the
    downlinks; returns the set of distinct convergent outcomes (as
    canonical model dicts) and asserts convergence on every terminal.
    """
    n_clients = len({ci for ci, _ in concurrent_edits}) or 1
    n_clients = max(n_clients, max((ci for ci, _ in concurrent_edits), default=0) + 1)

    def fresh_system():
        server = GraphServer(spec, auto_create=True)
        server.get_model(model_id)
        sessions, mirrors = [], []
        for i in range(n_clients):
            sess = server.connect(f"user{i}", model_id)
            mir = MirrorModel(spec, f"user{i}")
            mir.transport = _Capture()
            while sess.outbound:
                mir.on_server_frame(sess.outbound.popleft())
            sessions.append(sess)
            mirrors.append(mir)
        for cmd in setup_commands:
            msg = proto.edit_message(model_id, "setup", [copy.deepcopy(cmd)])
            setup_sess = server.connect("setup", model_id)
            server.handle_message(setup_sess, msg)
            server.handle_disconnect(setup_sess)
            for sess, mir in zip(sessions, mirrors):
                while sess.outbound:
                    mir.on_server_frame(sess.outbound.popleft())
        return server, sessions, mirrors

    outcomes = {}

    def snapshot_key(m):
        return proto.canonical_json(model_mod.model_to_dict(_strip(m)))

    def _strip(m):
        c = clone_model(m)
        for el in c.elements.values():
            el.version = 0
        c.modelVersion = 0
        return c

    def explore(order):
        """Run one full interleaving: `order` picks which ready frame goes next."""
        server, sessions, mirrors = fresh_system()
        # each client issues its edit locally (no delivery yet)
        uplink = []  # (client_index, frame)
        for ci, cmd in concurrent_edits:
            mirrors[ci].transport.frames.clear()
            mirrors[ci].local_edit(copy.deepcopy(cmd))
            for f in mirrors[ci].transport.frames:
                uplink.append((ci, f))
        queues = {("up", ci): [] for ci in range(n_clients)}
        for ci, f in uplink:
            queues[("up", ci)].append(f)
        for ci in range(n_clients):
            queues[("down", ci)] = []

        branching = []
        choice_idx = 0
        while True:
            ready = [k for k in sorted(queues) if queues[k]]
            if not ready:
                break
            branching.append(len(ready))
            choice = order[choice_idx] if choice_idx < len(order) else 0
            pick = ready[choice]
            choice_idx += 1
            frame = queues[pick].pop(0)
            kind, ci = pick
            if kind == "up":
                server.handle_frame(sessions[ci], frame)
                for i, sess in enumerate(sessions):
                    while sess.outbound:
                        queues[("down", i)].append(sess.outbound.popleft())
            else:
                mirrors[ci].transport.frames.clear()
                mirrors[ci].on_server_frame(frame)
                for f in mirrors[ci].transport.frames:
                    queues[("up", ci)].append(f)
                for i, sess in enumerate(sessions):
                    while sess.outbound:
                        queues[("down", i)].append(sess.outbound.popleft())
        return server, mirrors, branching

    # DFS over delivery orders: run the prefix, extend choice 0 to the end,
    # and record the branching factor at every decision so siblings can be
    # enqueued exactly once each.
    explored = 0
    stack = [()]
    while stack:
        order = stack.pop()
        server, mirrors, branching = explore(order)
        explored += 1
        if explored > 100_000:
            raise AssertionError("interleaving space too large to exhaust")
        central = server.get_model(model_id)
        for mir in mirrors:
            diffs = diff_models(mir.replica, central)
            if diffs:
                raise AssertionError(f"interleaving {order!r} did not converge: {diffs}")
        outcomes[snapshot_key(central)] = model_mod.model_to_dict(central)
        for depth in range(len(order), len(branching)):
            prefix = order + (0,) * (depth - len(order))
            for choice in range(1, branching[depth]):
                stack.append(prefix + (choice,))
    return outcomes


class _Capture:
    def __init__(self):
        self.frames = []

    def send(self, frame):
        self.frames.append(frame)
