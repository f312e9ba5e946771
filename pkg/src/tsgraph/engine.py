"""Iterative BSP over subgraphs of a time-series graph deployment.

Each timestep runs one bulk-synchronous computation (a BSP) over a single
graph instance: ``Compute`` is called on every subgraph in superstep 1 and
afterwards on every subgraph that has not voted to halt or has mail.
Messages sent in superstep ``s`` are delivered together in ``s + 1``; a BSP
ends when every subgraph has halted and no message is in flight.

The timestep loop around the BSPs follows one of three design patterns:

* ``INDEPENDENT``: every instance's BSP runs once, in any order and possibly
  concurrently.
* ``EVENTUALLY_DEPENDENT``: as independent, then a ``Merge`` BSP runs over the
  subgraph templates and receives every ``send_to_merge`` message.
* ``SEQUENTIALLY_DEPENDENT``: instances run one after another in time order
  and ``send_to_next_timestep`` hands state to the next instance.

Hosts are simulated in-process: every partition gets its own slice store and
a pool of ``workers_per_host`` threads. Outgoing messages are buffered per
invocation and merged at the barrier in (origin subgraph, send sequence)
order, so results do not depend on thread scheduling.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import (
    ComputeError,
    NonTerminationError,
    PatternError,
    TSGraphError,
    UnknownSubgraphError,
)
from .model import EDGE, EXISTS_ATTR, VERTEX
from .store.cache import Counters
from .store.host import Deployment

log = logging.getLogger(__name__)

DEFAULT_MAX_SUPERSTEPS = 1_000_000


class Pattern(enum.Enum):
    INDEPENDENT = "independent"
    EVENTUALLY_DEPENDENT = "eventually-dependent"
    SEQUENTIALLY_DEPENDENT = "sequentially-dependent"


class Routing(enum.Enum):
    TO_SUBGRAPH = "to-subgraph"
    TO_NEXT_TIMESTEP = "to-next-timestep"
    TO_SUBGRAPH_NEXT_TIMESTEP = "to-subgraph-next-timestep"
    TO_MERGE = "to-merge"
    INPUT = "input"


@dataclass(frozen=True)
class Origin:
    subgraph_id: int | None
    timestep: int | None
    superstep: int


@dataclass(frozen=True)
class Message:
    payload: bytes
    routing: Routing
    target: int
    origin: Origin
    seq: int = 0


class Application:
    """Base class for iBSP applications.

    Subclasses set :attr:`pattern`, list the attributes they read in
    :attr:`vertex_attrs` / :attr:`edge_attrs`, and implement :meth:`compute`
    (and :meth:`merge` for the eventually dependent pattern). ``isExists``
    is projected automatically when the schema declares it.
    """

    pattern: Pattern = Pattern.INDEPENDENT
    vertex_attrs: Sequence[str] = ()
    edge_attrs: Sequence[str] = ()

    def compute(self, ctx: "ComputeContext") -> None:
        raise NotImplementedError

    def merge(self, ctx: "MergeContext") -> None:
        raise NotImplementedError

    @classmethod
    def has_merge(cls) -> bool:
        return cls.merge is not Application.merge


_UNSET = object()


class _Context:
    def __init__(self, engine, subgraph_id, superstep, messages, state, timestep):
        self._engine = engine
        self.subgraph_id = subgraph_id
        self.superstep = superstep
        self.timestep = timestep
        self.messages: list[Message] = messages
        self.state: dict = state
        self._seq = 0
        self._sends: list[Message] = []
        self._next: list[Message] = []
        self._merge: list[Message] = []
        self._halted = False
        self._output = _UNSET

    @property
    def msgs(self) -> list[Message]:
        return self.messages

    @property
    def subgraph_ids(self) -> tuple:
        """Every subgraph id in the deployment, ascending."""
        return self._engine.subgraph_ids

    def _message(self, payload, routing, target) -> Message:
        if not isinstance(payload, (bytes, bytearray, memoryview)):
            raise TypeError(f"message payload must be bytes, got {type(payload).__name__}")
        self._seq += 1
        return Message(bytes(payload), routing, target, Origin(self.subgraph_id, self.timestep, self.superstep), self._seq)

    def _check_target(self, sgid):
        if sgid not in self._engine.subgraph_set:
            raise UnknownSubgraphError(f"unknown target subgraph {sgid}")

    def send_to_subgraph(self, subgraph_id: int, payload: bytes) -> None:
        """Deliver ``payload`` to ``subgraph_id`` in the next superstep."""
        self._check_target(subgraph_id)
        self._sends.append(self._message(payload, Routing.TO_SUBGRAPH, subgraph_id))

    def vote_to_halt(self) -> None:
        self._halted = True

    def output(self, value: Any) -> None:
        """Record this subgraph's result for the current timestep (last call wins)."""
        self._output = value


class ComputeContext(_Context):
    """What a ``Compute`` call sees: one subgraph instance, its mail, and the send API."""

    def __init__(self, engine, sg_instance, timestep, superstep, messages, state, pattern, last_timestep):
        super().__init__(engine, sg_instance.subgraph_id, superstep, messages, state, timestep)
        self.sg_instance = sg_instance
        self.pattern = pattern
        self.is_last_timestep = last_timestep

    @property
    def subgraph(self):
        return self.sg_instance

    @property
    def template(self):
        return self.sg_instance.template

    def send_to_next_timestep(self, payload: bytes) -> None:
        """Pass ``payload`` to this subgraph at superstep 1 of the next timestep."""
        self._require(Pattern.SEQUENTIALLY_DEPENDENT, "send_to_next_timestep")
        self._next.append(self._message(payload, Routing.TO_NEXT_TIMESTEP, self.subgraph_id))

    def send_to_subgraph_in_next_timestep(self, subgraph_id: int, payload: bytes) -> None:
        self._require(Pattern.SEQUENTIALLY_DEPENDENT, "send_to_subgraph_in_next_timestep")
        self._check_target(subgraph_id)
        self._next.append(self._message(payload, Routing.TO_SUBGRAPH_NEXT_TIMESTEP, subgraph_id))

    def send_to_merge(self, payload: bytes) -> None:
        """Buffer ``payload`` for this subgraph's ``Merge`` call."""
        self._require(Pattern.EVENTUALLY_DEPENDENT, "send_to_merge")
        self._merge.append(self._message(payload, Routing.TO_MERGE, self.subgraph_id))

    def _require(self, pattern, what):
        if self.pattern is not pattern:
            raise PatternError(
                f"{what} is only allowed in the {pattern.value} pattern "
                f"(subgraph {self.subgraph_id}, timestep {self.timestep}, superstep {self.superstep})"
            )


class MergeContext(_Context):
    """What a ``Merge`` call sees: a subgraph template and its mail."""

    def __init__(self, engine, template, superstep, messages, state):
        super().__init__(engine, template.subgraph_id, superstep, messages, state, None)
        self.template = template


@dataclass
class RunConfig:
    workers_per_host: int = 1
    cache_slots: int = 0
    time_range: tuple[int, int] | None = None
    inputs: Mapping[int, Sequence[bytes]] = field(default_factory=dict)
    max_supersteps: int = DEFAULT_MAX_SUPERSTEPS
    record_trace: bool = False


@dataclass
class TimestepStats:
    timestep: int
    instance_index: int | None
    start_s: float = 0.0
    end_s: float = 0.0
    supersteps: int = 0
    msgs_intra: int = 0
    msgs_cross: int = 0
    counters: Counters = field(default_factory=Counters)

    @property
    def wall_ms(self) -> float:
        return (self.end_s - self.start_s) * 1000.0

    @property
    def slices_read(self) -> int:
        return self.counters.slices_read

    @property
    def cache_hits(self) -> int:
        return self.counters.hits


@dataclass(frozen=True)
class TraceEvent:
    timestep: int | None
    superstep: int
    subgraph_id: int
    was_halted: bool
    inbox: tuple


CSV_COLUMNS = ("timestep", "wall_ms", "supersteps", "msgs_intra", "msgs_cross", "slices_read", "cache_hits")


@dataclass
class RunStats:
    timesteps: list[TimestepStats] = field(default_factory=list)
    merge: TimestepStats | None = None
    dropped_messages: int = 0
    open_counters: Counters = field(default_factory=Counters)
    trace: list[TraceEvent] = field(default_factory=list)
    wall_s: float = 0.0

    def rows(self) -> list[dict]:
        return [
            {
                "timestep": t.timestep,
                "wall_ms": round(t.wall_ms, 3),
                "supersteps": t.supersteps,
                "msgs_intra": t.msgs_intra,
                "msgs_cross": t.msgs_cross,
                "slices_read": t.slices_read,
                "cache_hits": t.cache_hits,
            }
            for t in self.timesteps
        ]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue() if fh is None else ""


@dataclass
class AppResult:
    """``outputs[timestep][subgraph_id]`` and ``merge_outputs[subgraph_id]``."""

    outputs: dict = field(default_factory=dict)
    merge_outputs: dict = field(default_factory=dict)
    instance_index: dict = field(default_factory=dict)

    def last(self) -> dict:
        if not self.outputs:
            return {}
        return self.outputs[max(self.outputs)]


@dataclass
class _BspOutcome:
    supersteps: int = 0
    msgs_intra: int = 0
    next_msgs: list = field(default_factory=list)
    merge_msgs: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)


class Engine:
    """Runs one application over one opened deployment."""

    def __init__(self, deployment: Deployment, config: RunConfig):
        self.deployment = deployment
        self.config = config
        if config.workers_per_host < 1:
            raise ValueError("workers_per_host must be >= 1")
        self.hosts = deployment.hosts(config.cache_slots)
        self.open_counters = Counters()
        for h in self.hosts:
            self.open_counters.add(h.open_counters)
        self.host_of = {}
        self.order = []
        for h in self.hosts:
            for sgid in h.subgraph_ids:
                self.host_of[sgid] = h.host
                self.order.append(sgid)
        self.subgraph_ids = tuple(sorted(self.host_of))
        self.subgraph_set = frozenset(self.subgraph_ids)
        self.templates = {sgid: h.subgraphs[sgid] for h in self.hosts for sgid in h.subgraph_ids}
        self.instances = self.hosts[0].instances
        self._pools = []

    # -- executors -----------------------------------------------------------

    def __enter__(self):
        if self.config.workers_per_host > 1:
            self._pools = [ThreadPoolExecutor(self.config.workers_per_host) for _ in self.hosts]
        return self

    def __exit__(self, *exc):
        for p in self._pools:
            p.shutdown(wait=True)
        self._pools = []

    def _map_by_host(self, fn, items_by_host: dict) -> dict:
        """Apply ``fn`` to every item, using each host's pool when present."""
        results = {}
        if not self._pools:
            for host in sorted(items_by_host):
                for item in items_by_host[host]:
                    results[item] = fn(item)
            return results
        futures = {}
        for host, items in items_by_host.items():
            for item in items:
                futures[item] = self._pools[host].submit(fn, item)
        for item, fut in futures.items():
            results[item] = fut.result()
        return results

    # -- one BSP -------------------------------------------------------------

    def _bsp(self, timestep, make_ctx, invoke, inbox) -> _BspOutcome:
        out = _BspOutcome()
        halted = {sgid: False for sgid in self.subgraph_ids}
        state = {sgid: {} for sgid in self.subgraph_ids}
        superstep = 1
        record = self.config.record_trace
        while True:
            if superstep > self.config.max_supersteps:
                raise NonTerminationError(
                    f"nontermination guard: more than {self.config.max_supersteps} supersteps"
                    + ("" if timestep is None else f" in timestep {timestep}")
                )
            active = [
                sgid for sgid in self.subgraph_ids if superstep == 1 or not halted[sgid] or inbox.get(sgid)
            ]
            by_host: dict = {}
            for sgid in active:
                by_host.setdefault(self.host_of[sgid], []).append(sgid)

            def call(sgid, superstep=superstep):
                ctx = make_ctx(sgid, superstep, inbox.get(sgid, []), state[sgid])
                try:
                    invoke(ctx)
                except TSGraphError:
                    raise
                except Exception as exc:
                    raise ComputeError(sgid, timestep, superstep, exc) from exc
                return ctx

            contexts = self._map_by_host(call, by_host)
            new_inbox: dict = {}
            sent = 0
            for sgid in active:
                ctx = contexts[sgid]
                if record:
                    out.trace.append(
                        TraceEvent(timestep, superstep, sgid, halted[sgid] and superstep > 1, tuple(inbox.get(sgid, ())))
                    )
                halted[sgid] = ctx._halted
                for m in ctx._sends:
                    new_inbox.setdefault(m.target, []).append(m)
                sent += len(ctx._sends)
                out.next_msgs.extend(ctx._next)
                out.merge_msgs.extend(ctx._merge)
                if ctx._output is not _UNSET:
                    out.outputs[sgid] = ctx._output
            for target in new_inbox:
                halted[target] = False
            out.msgs_intra += sent
            out.supersteps = superstep
            if not new_inbox and all(halted.values()):
                return out
            inbox = new_inbox
            superstep += 1

    # -- timesteps -----------------------------------------------------------

    def _projection(self, app):
        def names(element, requested):
            out = list(requested)
            schema = self.hosts[0].schema[element]
            if EXISTS_ATTR in schema and EXISTS_ATTR not in out:
                out.append(EXISTS_ATTR)
            return out

        return names(VERTEX, app.vertex_attrs), names(EDGE, app.edge_attrs)

    def _load_instances(self, index, vattrs, eattrs, counters_by_host):
        by_host = {h.host: [h.host] for h in self.hosts}

        def load(host):
            store = self.hosts[host]
            return {
                sg.subgraph_id: store.load_instance(sg, index, vattrs, eattrs, counters_by_host[host])
                for sg in store.get_subgraphs()
            }

        loaded = {}
        for part in self._map_by_host(load, by_host).values():
            loaded.update(part)
        return loaded

    def _inputs(self, timestep):
        inbox = {}
        for sgid in sorted(self.config.inputs):
            if sgid not in self.subgraph_set:
                raise UnknownSubgraphError(f"input addressed to unknown subgraph {sgid}")
            for i, payload in enumerate(self.config.inputs[sgid], 1):
                inbox.setdefault(sgid, []).append(
                    Message(bytes(payload), Routing.INPUT, sgid, Origin(None, None, 0), i)
                )
        return inbox

    def _run_timestep(self, app, pattern, timestep, index, inbox, last, t0) -> tuple:
        stats = TimestepStats(timestep, index)
        stats.start_s = time.perf_counter() - t0
        per_host = {h.host: Counters() for h in self.hosts}
        vattrs, eattrs = self._projection(app)
        instances = self._load_instances(index, vattrs, eattrs, per_host)

        def make_ctx(sgid, superstep, msgs, state):
            return ComputeContext(self, instances[sgid], timestep, superstep, msgs, state, pattern, last)

        outcome = self._bsp(timestep, make_ctx, app.compute, inbox)
        stats.end_s = time.perf_counter() - t0
        stats.supersteps = outcome.supersteps
        stats.msgs_intra = outcome.msgs_intra
        stats.msgs_cross = len(outcome.next_msgs) + len(outcome.merge_msgs)
        for c in per_host.values():
            stats.counters.add(c)
        return stats, outcome

    def run(self, app: Application, pattern: Pattern | None = None) -> tuple[AppResult, RunStats]:
        pattern = Pattern(pattern) if pattern is not None else app.pattern
        if pattern is Pattern.EVENTUALLY_DEPENDENT and not app.has_merge():
            raise PatternError("the eventually dependent pattern needs a merge method")
        if self.config.time_range is None:
            indices = list(range(len(self.instances)))
        else:
            indices = self.hosts[0].instance_indices(*self.config.time_range)
        timesteps = list(enumerate(indices, 1))
        t0 = time.perf_counter()
        result = AppResult(instance_index=dict(timesteps))
        stats = RunStats(open_counters=self.open_counters.copy())
        outcomes = {}

        if pattern is Pattern.SEQUENTIALLY_DEPENDENT:
            carried: list[Message] = []
            for timestep, index in timesteps:
                inbox = self._inputs(timestep) if timestep == 1 else {}
                carried.sort(key=lambda m: (m.origin.subgraph_id, m.origin.superstep, m.seq))
                for m in carried:
                    inbox.setdefault(m.target, []).append(m)
                last = timestep == len(timesteps)
                ts, outcome = self._run_timestep(app, pattern, timestep, index, inbox, last, t0)
                stats.timesteps.append(ts)
                outcomes[timestep] = outcome
                carried = outcome.next_msgs
                if last and carried:
                    stats.dropped_messages += len(carried)
                    log.warning("dropped %d message(s) sent past the last timestep", len(carried))
        else:
            def one(item):
                timestep, index = item
                return self._run_timestep(
                    app, pattern, timestep, index, self._inputs(timestep), timestep == len(timesteps), t0
                )

            if self.config.workers_per_host > 1 and len(timesteps) > 1:
                with ThreadPoolExecutor(self.config.workers_per_host) as pool:
                    done = list(pool.map(one, timesteps))
            else:
                done = [one(item) for item in timesteps]
            for (timestep, _), (ts, outcome) in zip(timesteps, done):
                stats.timesteps.append(ts)
                outcomes[timestep] = outcome

        if stats.timesteps:
            stats.timesteps[0].counters.add(self.open_counters)
        for timestep, outcome in outcomes.items():
            result.outputs[timestep] = outcome.outputs
            stats.trace.extend(outcome.trace)

        if pattern is Pattern.EVENTUALLY_DEPENDENT:
            inbox: dict = {}
            for timestep in sorted(outcomes):
                for m in outcomes[timestep].merge_msgs:
                    inbox.setdefault(m.target, []).append(m)
            for msgs in inbox.values():
                msgs.sort(key=lambda m: (m.origin.timestep, m.origin.superstep, m.seq))
            merge_stats = TimestepStats(0, None)
            merge_stats.start_s = time.perf_counter() - t0

            def make_merge_ctx(sgid, superstep, msgs, state):
                return MergeContext(self, self.templates[sgid], superstep, msgs, state)

            outcome = self._bsp(None, make_merge_ctx, app.merge, inbox)
            merge_stats.end_s = time.perf_counter() - t0
            merge_stats.supersteps = outcome.supersteps
            merge_stats.msgs_intra = outcome.msgs_intra
            stats.merge = merge_stats
            stats.trace.extend(outcome.trace)
            result.merge_outputs = outcome.outputs

        stats.wall_s = time.perf_counter() - t0
        return result, stats


def run(
    app: Application,
    deployment,
    pattern: Pattern | None = None,
    config: RunConfig | None = None,
) -> tuple[AppResult, RunStats]:
    """Run ``app`` over ``deployment`` (a :class:`Deployment` or its root path)."""
    if not isinstance(deployment, Deployment):
        deployment = Deployment(deployment)
    with Engine(deployment, config or RunConfig()) as engine:
        return engine.run(app, pattern)
