import struct
import time
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import Chatter, FnApp, check_trace, random_collection
from tsgraph.engine import CSV_COLUMNS, Pattern, Routing, RunConfig, run
from tsgraph.errors import ComputeError, NonTerminationError, PatternError, UnknownSubgraphError
from tsgraph.model import Collection, GraphInstance, GraphTemplate
from tsgraph.store.deploy import deploy
from tsgraph.store.host import Deployment
from tsgraph.store.layout import LayoutConfig

SEQ = Pattern.SEQUENTIALLY_DEPENDENT
EVENT = Pattern.EVENTUALLY_DEPENDENT
INDEP = Pattern.INDEPENDENT


def _pairs(n_pairs, n_instances):
    tpl = GraphTemplate.build(range(2 * n_pairs), [(i, 2 * i, 2 * i + 1) for i in range(n_pairs)])
    return Collection(tpl, [GraphInstance(t * 10, t * 10 + 10) for t in range(n_instances)])


@pytest.fixture(scope="module")
def pairs(tmp_path_factory):
    """Four one-edge subgraphs on one host, five instances."""
    root = tmp_path_factory.mktemp("pairs")
    deploy(_pairs(4, 5), 1, LayoutConfig(), root)
    return Deployment(root)


@pytest.fixture(scope="module")
def pairs2(tmp_path_factory):
    """Six one-edge subgraphs over two hosts, four instances."""
    root = tmp_path_factory.mktemp("pairs2")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        deploy(_pairs(6, 4), 2, LayoutConfig(2, 2), root)
    return Deployment(root)


def _ids(dep):
    return sorted(s for h in dep.hosts() for s in h.subgraph_ids)


def test_halting_app_runs_one_superstep_per_instance(pairs):
    result, stats = run(FnApp(lambda ctx: ctx.vote_to_halt()), pairs)
    assert [t.supersteps for t in stats.timesteps] == [1] * 5
    assert sum(t.msgs_intra + t.msgs_cross for t in stats.timesteps) == 0
    assert sorted(result.outputs) == [1, 2, 3, 4, 5]


def test_two_subgraph_exchange_takes_two_supersteps(pairs):
    a, b = _ids(pairs)[:2]

    def compute(ctx):
        if ctx.superstep == 1 and ctx.subgraph_id == a:
            ctx.send_to_subgraph(b, b"hi")
        if ctx.superstep == 2:
            ctx.output([m.payload for m in ctx.messages])
        ctx.vote_to_halt()

    result, stats = run(FnApp(compute), pairs, config=RunConfig(time_range=(0, 10)))
    assert stats.timesteps[0].supersteps == 2
    assert result.outputs[1] == {b: [b"hi"]}


def test_token_ring_of_four_takes_five_supersteps(pairs):
    ids = _ids(pairs)
    nxt = {s: ids[(i + 1) % 4] for i, s in enumerate(ids)}

    def compute(ctx):
        hops = None
        if ctx.superstep == 1 and ctx.subgraph_id == ids[0]:
            hops = 0
        for m in ctx.messages:
            hops = struct.unpack("<i", m.payload)[0]
        if hops is not None and hops < 4:
            ctx.send_to_subgraph(nxt[ctx.subgraph_id], struct.pack("<i", hops + 1))
        if hops == 4:
            ctx.output(ctx.superstep)
        ctx.vote_to_halt()

    result, stats = run(FnApp(compute), pairs, config=RunConfig(time_range=(0, 10)))
    assert stats.timesteps[0].supersteps == 5
    assert result.outputs[1] == {ids[0]: 5}


def test_self_send_arrives_next_superstep(pairs):
    def compute(ctx):
        if ctx.superstep == 1:
            ctx.send_to_subgraph(ctx.subgraph_id, b"me")
        else:
            ctx.output((ctx.superstep, tuple(m.payload for m in ctx.messages)))
        ctx.vote_to_halt()

    result, _ = run(FnApp(compute), pairs, config=RunConfig(time_range=(0, 10)))
    assert set(result.outputs[1].values()) == {(2, (b"me",))}


def test_sender_that_halts_is_only_woken_by_mail(pairs):
    a, b = _ids(pairs)[:2]
    calls = []

    def compute(ctx):
        calls.append((ctx.superstep, ctx.subgraph_id))
        if ctx.subgraph_id == a and ctx.superstep == 1:
            ctx.send_to_subgraph(b, b"x")
        if ctx.subgraph_id == b and ctx.superstep == 2:
            ctx.send_to_subgraph(a, b"y")
        ctx.vote_to_halt()

    run(FnApp(compute), pairs, config=RunConfig(time_range=(0, 10)))
    assert sorted(c for c in calls if c[0] > 1) == [(2, b), (3, a)]


def test_sequential_handoff_and_ordering(pairs):
    seen = {}

    def compute(ctx):
        if ctx.superstep == 1:
            seen.setdefault((ctx.timestep, ctx.subgraph_id), [m.payload for m in ctx.messages])
            ctx.send_to_next_timestep(f"{ctx.timestep}a".encode())
            ctx.send_to_next_timestep(f"{ctx.timestep}b".encode())
        ctx.vote_to_halt()

    _, stats = run(FnApp(compute, pattern=SEQ), pairs)
    for (t, sg), msgs in seen.items():
        assert msgs == ([] if t == 1 else [f"{t - 1}a".encode(), f"{t - 1}b".encode()])
    assert stats.dropped_messages == 2 * 4
    for a, b in zip(stats.timesteps, stats.timesteps[1:]):
        assert b.start_s >= a.end_s


def test_last_timestep_send_is_counted(pairs):
    def compute(ctx):
        if ctx.is_last_timestep and ctx.subgraph_id == ctx.subgraph_ids[0]:
            ctx.send_to_next_timestep(b"late")
        ctx.vote_to_halt()

    _, stats = run(FnApp(compute, pattern=SEQ), pairs)
    assert stats.dropped_messages == 1


def test_subgraph_in_next_timestep_and_self_target(pairs):
    ids = _ids(pairs)
    got = {}

    def compute(ctx):
        if ctx.superstep == 1:
            got[(ctx.timestep, ctx.subgraph_id)] = [(m.routing, m.payload) for m in ctx.messages]
            if ctx.timestep == 1 and ctx.subgraph_id == ids[0]:
                ctx.send_to_subgraph_in_next_timestep(ids[3], b"to3")
                ctx.send_to_subgraph_in_next_timestep(ids[0], b"self")
                with pytest.raises(UnknownSubgraphError):
                    ctx.send_to_subgraph_in_next_timestep(12345, b"?")
        ctx.vote_to_halt()

    run(FnApp(compute, pattern=SEQ), pairs)
    assert got[(2, ids[3])] == [(Routing.TO_SUBGRAPH_NEXT_TIMESTEP, b"to3")]
    assert [p for _, p in got[(2, ids[0])]] == [b"self"]
    assert got[(2, ids[1])] == []


def test_vertex_count_merge_matches_the_collection(tmp_path):
    c = random_collection(3, n_vertices=80, n_instances=4, exists_flip=0.2)
    deploy(c, 3, LayoutConfig(1, 2), tmp_path / "d")

    def compute(ctx):
        n = sum(ctx.subgraph.vertex_exists(v) for v in ctx.template.vertices.tolist())
        ctx.send_to_merge(struct.pack("<iq", ctx.timestep, n))
        ctx.vote_to_halt()

    def merge(ctx):
        first = ctx.subgraph_ids[0]
        if ctx.superstep == 1:
            for m in ctx.messages:
                ctx.send_to_subgraph(first, m.payload)
        else:
            totals = {}
            for m in ctx.messages:
                t, n = struct.unpack("<iq", m.payload)
                totals[t] = totals.get(t, 0) + n
            ctx.output(totals)
        ctx.vote_to_halt()

    for workers in (1, 3):
        result, _ = run(FnApp(compute, merge, EVENT), tmp_path / "d", config=RunConfig(workers_per_host=workers))
        (totals,) = result.merge_outputs.values()
        assert totals == {t + 1: sum(c.is_exists(t, v) for v in range(80)) for t in range(4)}


def test_merge_sees_one_message_per_instance_and_runs_without_mail(pairs):
    def compute(ctx):
        if ctx.subgraph_id != ctx.subgraph_ids[0]:
            ctx.send_to_merge(bytes([ctx.timestep, 0xFF]))
        ctx.vote_to_halt()

    def merge(ctx):
        ctx.output([m.payload for m in ctx.messages])
        ctx.vote_to_halt()

    result, stats = run(FnApp(compute, merge, EVENT), pairs)
    ids = _ids(pairs)
    assert result.merge_outputs[ids[0]] == []
    for sg in ids[1:]:
        assert result.merge_outputs[sg] == [bytes([t, 0xFF]) for t in range(1, 6)]
    assert stats.merge.supersteps == 1


def test_inputs_reach_superstep_one(pairs):
    ids = _ids(pairs)
    cfg = RunConfig(inputs={ids[2]: [b"go", b"now"]})

    def compute(ctx):
        if ctx.superstep == 1:
            ctx.output([m.payload for m in ctx.messages])
        ctx.vote_to_halt()

    seq, _ = run(FnApp(compute, pattern=SEQ), pairs, config=cfg)
    ind, _ = run(FnApp(compute), pairs, config=cfg)
    assert seq.outputs[1][ids[2]] == [b"go", b"now"] and seq.outputs[2][ids[2]] == []
    assert all(ind.outputs[t][ids[2]] == [b"go", b"now"] for t in range(1, 6))


@pytest.mark.parametrize(
    "pattern, call",
    [
        (INDEP, lambda ctx: ctx.send_to_next_timestep(b"x")),
        (EVENT, lambda ctx: ctx.send_to_subgraph_in_next_timestep(ctx.subgraph_id, b"x")),
        (SEQ, lambda ctx: ctx.send_to_merge(b"x")),
    ],
)
def test_routing_violations_are_errors(pairs, pattern, call):
    app = FnApp(call, merge=lambda ctx: ctx.vote_to_halt(), pattern=pattern)
    with pytest.raises(PatternError, match="timestep 1, superstep 1"):
        run(app, pairs)


def test_eventually_dependent_needs_merge(pairs):
    with pytest.raises(PatternError):
        run(FnApp(lambda ctx: ctx.vote_to_halt(), pattern=EVENT), pairs)


def test_unknown_target_and_bad_payload(pairs):
    with pytest.raises(UnknownSubgraphError):
        run(FnApp(lambda ctx: ctx.send_to_subgraph(999, b"x")), pairs)
    with pytest.raises(ComputeError, match="payload must be bytes") as info:
        run(FnApp(lambda ctx: ctx.send_to_subgraph(ctx.subgraph_id, "text")), pairs)
    assert isinstance(info.value.__cause__, TypeError)


def test_compute_errors_name_their_location(pairs):
    target = _ids(pairs)[1]

    def compute(ctx):
        if ctx.timestep == 3 and ctx.superstep == 2 and ctx.subgraph_id == target:
            raise RuntimeError("boom")
        if ctx.superstep == 1:
            ctx.send_to_subgraph(target, b"")
        ctx.vote_to_halt()

    with pytest.raises(ComputeError) as info:
        run(FnApp(compute), pairs)
    e = info.value
    assert (e.subgraph_id, e.timestep, e.superstep) == (target, 3, 2)
    assert isinstance(e.__cause__, RuntimeError)


def test_nontermination_guard(pairs):
    with pytest.raises(NonTerminationError, match="nontermination guard"):
        run(FnApp(lambda ctx: None), pairs, config=RunConfig(max_supersteps=50))


def test_payload_bytes_are_delivered_unchanged(pairs):
    blob = bytes(range(256)) * 3
    got = []

    def compute(ctx):
        if ctx.superstep == 1:
            ctx.send_to_subgraph(ctx.subgraph_ids[0], bytearray(blob))
        got.extend(m.payload for m in ctx.messages)
        ctx.vote_to_halt()

    run(FnApp(compute), pairs, config=RunConfig(time_range=(0, 10)))
    assert got == [blob] * 4


def test_independent_timesteps_overlap_with_workers(pairs):
    def compute(ctx):
        time.sleep(0.02)
        ctx.vote_to_halt()

    _, stats = run(FnApp(compute), pairs, config=RunConfig(workers_per_host=3))
    spans = sorted((t.start_s, t.end_s) for t in stats.timesteps)
    assert any(b[0] < a[1] for a, b in zip(spans, spans[1:]))


def test_time_range_selects_instances(pairs):
    result, stats = run(FnApp(lambda ctx: ctx.vote_to_halt()), pairs, config=RunConfig(time_range=(15, 35)))
    assert result.instance_index == {1: 1, 2: 2, 3: 3}
    assert [t.instance_index for t in stats.timesteps] == [1, 2, 3]


def test_stats_csv_has_one_row_per_timestep(pairs):
    _, stats = run(FnApp(lambda ctx: ctx.vote_to_halt()), pairs)
    lines = stats.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 5


def _fingerprint(result, stats):
    trace = [(e.timestep, e.superstep, e.subgraph_id, tuple((m.payload, m.seq) for m in e.inbox)) for e in stats.trace]
    return result.outputs, result.merge_outputs, sorted(trace, key=repr)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), pattern=st.sampled_from(list(Pattern)), workers=st.integers(2, 4))
def test_random_apps_obey_bsp_rules_and_are_deterministic(pairs2, seed, pattern, workers):
    ids = _ids(pairs2)
    runs = []
    for w in (1, workers):
        app = Chatter(seed, pattern)
        result, stats = run(app, pairs2, config=RunConfig(workers_per_host=w, record_trace=True))
        check_trace(app, stats, ids)
        runs.append(_fingerprint(result, stats))
    assert runs[0] == runs[1]
