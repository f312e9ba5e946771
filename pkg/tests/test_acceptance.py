"""Acceptance suite: one PASS/FAIL line per criterion.

The lines are printed as each test runs and repeated in the pytest terminal
summary, so they show up in plain ``pytest -v`` output.
"""

import math
import random
import time
import warnings

import pytest

import oracles
from acceptance_log import verdict
from helpers import Chatter, check_partition_invariants, check_trace, random_collection, sighting_collection
from tsgraph.apps import nhop, pagerank, sssp, track
from tsgraph.bench import scan
from tsgraph.engine import Pattern, RunConfig, run
from tsgraph.generate import bench_spec, generate
from tsgraph.model import GraphTemplate
from tsgraph.partition import partition, read_partition_map
from tsgraph.store.cache import SliceCache
from tsgraph.store.deploy import deploy
from tsgraph.store.host import Deployment
from tsgraph.store.layout import LayoutConfig

HOST_COUNTS = (1, 2, 4)


def _deploy(collection, root, hosts, bins=1, ipack=1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        deploy(collection, hosts, LayoutConfig(bins, ipack), root)
    return Deployment(root)


# -- oracle equivalence ------------------------------------------------------------


def test_criterion_1_sssp_matches_running_min_dijkstra(tmp_path):
    rng = random.Random(1)
    t0 = time.perf_counter()
    checked = mismatches = 0
    for k in range(20):
        c = random_collection(
            100 + k,
            n_vertices=rng.randint(20, 300),
            n_instances=rng.randint(1, 8),
            directed=bool(k % 2),
            components=rng.randint(1, 3),
        )
        source = rng.randrange(c.template.n_vertices)
        expected = oracles.sssp_running_min(c, source)
        for hosts in HOST_COUNTS:
            dep = _deploy(c, tmp_path / f"c{k}-h{hosts}", hosts, bins=2, ipack=rng.choice((1, 3)))
            result, _ = run(sssp.SSSP(), dep, config=RunConfig(inputs=sssp.SSSP.inputs(dep, source)))
            for t in range(len(c.instances)):
                checked += 1
                mismatches += sssp.distances(result, t + 1) != expected[t]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    detail = f"20 collections x hosts {HOST_COUNTS}, {checked} timesteps, {mismatches} mismatches, {elapsed:.1f} s"
    assert verdict(1, "SSSP oracle equivalence", ok, detail)


def test_criterion_2_pagerank_matches_dense_power_iteration(tmp_path):
    worst = 0.0
    worst_sum = 0.0
    n_instances = 0
    for k in range(8):
        c = random_collection(200 + k, n_vertices=30 + 20 * k, n_instances=3, directed=k % 2 == 0, sparsity=0.7)
        dep = _deploy(c, tmp_path / f"p{k}", HOST_COUNTS[k % 3], bins=2)
        result, _ = run(pagerank.PageRank(), dep, config=RunConfig(workers_per_host=1 + k % 3))
        for t in range(len(c.instances)):
            got = pagerank.ranks(result, t + 1)
            want = oracles.pagerank(c, t)
            assert set(got) == set(want)
            worst = max(worst, max(abs(got[v] - want[v]) for v in want))
            worst_sum = max(worst_sum, abs(sum(got.values()) - 1.0))
            n_instances += 1
    ok = n_instances >= 20 and worst < 1e-8 and worst_sum <= 1e-6
    detail = f"{n_instances} instances, max |diff| {worst:.2e}, max |sum-1| {worst_sum:.2e}"
    assert verdict(2, "PageRank oracle equivalence", ok, detail)


def test_criterion_3_nhop_matches_bfs_oracle(tmp_path):
    rng = random.Random(3)
    bad = []
    for k in range(20):
        c = random_collection(300 + k, n_vertices=rng.randint(20, 200), n_instances=rng.randint(1, 5), directed=bool(k % 2))
        source = rng.randrange(c.template.n_vertices)
        dep = _deploy(c, tmp_path / f"n{k}", HOST_COUNTS[k % 3], bins=2)
        result, _ = run(nhop.NHop(6), dep, config=RunConfig(inputs=nhop.NHop.inputs(dep, source)))
        if nhop.composite(result).tolist() != oracles.nhop_histogram(c, source, 6).tolist():
            bad.append(k)
    assert verdict(3, "N-hop oracle equivalence", not bad, f"20 collections, N=6, mismatching: {bad or 'none'}")


# -- tracking ----------------------------------------------------------------------

PATH = [(i, i + 1) for i in range(11)]


def _scenarios():
    yield "stationary", [{5: [("CAR", 10 * t + 2)]} for t in range(5)], 5, [(t + 1, 5, 10 * t + 2) for t in range(5)]
    yield "one hop per instance", [{2 + t: [("CAR", 10 * t + 4)]} for t in range(6)], 2, [
        (t + 1, 2 + t, 10 * t + 4) for t in range(6)
    ]
    # gone after instance 2; a later sighting is out of reach because nothing seeds the search
    vanish = [{3: [("CAR", 1)]}, {4: [("CAR", 11)]}, {}, {}, {5: [("CAR", 41)]}]
    yield "vanishing", vanish, 3, [(1, 3, 1), (2, 4, 11)]
    # two sightings in one subgraph: only the later one (vertex 4) is within reach of vertex 7
    latest = [{2: [("CAR", 5)], 4: [("CAR", 9), ("BUS", 99)]}, {7: [("CAR", 12)]}]
    yield "seed from latest sighting", latest, 3, [(1, 4, 9), (2, 7, 12)]
    earliest = [{2: [("CAR", 9)], 4: [("CAR", 5)]}, {7: [("CAR", 12)]}]
    yield "older sighting is not a seed", earliest, 3, [(1, 2, 9)]


def test_criterion_4_tracking_follows_the_oracle(tmp_path):
    failures = []
    count = 0
    for name, seen, start, expected in _scenarios():
        c = sighting_collection(12, PATH, seen)
        for hosts in (1, 3):
            dep = _deploy(c, tmp_path / f"{name.replace(' ', '_')}-{hosts}", hosts)
            owner = {int(r["vid"]): int(r["sgid"]) for r in read_partition_map(dep.root / "partition_map.bin")}
            result, _ = run(track.Track("CAR"), dep, config=RunConfig(inputs=track.Track.inputs(dep, start)))
            sim = oracles.track_simulation(c, owner, start, "CAR")
            same_as_oracle = track.sightings(result) == {t + 1: f for t, f in enumerate(sim)}
            # the hand expectations assume one subgraph; with 3 hosts only the oracle applies
            scripted = hosts > 1 or track.track(result) == expected
            count += 1
            if not (same_as_oracle and scripted):
                failures.append(f"{name}/h{hosts}")
    assert verdict(4, "tracking fidelity", not failures, f"{count} runs, failing: {failures or 'none'}")


# -- storage findings on the default benchmark collection --------------------------


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    collection = generate(bench_spec(0))
    deps = {}
    for s in (4, 8):
        for i in (1, 5):
            deps[(s, i)] = _deploy(collection, root / f"s{s}-i{i}", 4, s, i)
    return deps


def test_criterion_5_bin_major_scan_reads_each_slice_once(bench):
    lines = []
    ok = True
    for (s, i), dep in sorted(bench.items()):
        rep = scan(dep, 14 * s, "time")
        formula = rep.n_attrs * s * math.ceil(rep.n_instances / i) * len(rep.n_bins)
        ok &= rep.attr_slices_read == formula == rep.expected_minimum()
        lines.append(f"s{s}-i{i}: {rep.attr_slices_read} vs {formula}")
    assert verdict(5, "read minimality", ok, "; ".join(lines) + " (summed over 4 hosts)")


def test_criterion_6_caching_cuts_reads_threefold(bench):
    dep = bench[(8, 5)]
    c0 = scan(dep, 0).attr_slices_read
    c14 = scan(dep, 14).attr_slices_read
    assert verdict(6, "caching necessity", c0 >= 3 * c14, f"s8-i5 c0 {c0} vs c14 {c14}, ratio {c0 / c14:.2f}")


def test_criterion_7_temporal_packing_cuts_reads(bench):
    parts = []
    ok = True
    for s in (4, 8):
        i1 = scan(bench[(s, 1)], 14).attr_slices_read
        i5 = scan(bench[(s, 5)], 14).attr_slices_read
        ok &= 4 * i5 <= i1
        parts.append(f"s{s} c14 i5 {i5} vs i1 {i1} ({i5 / i1:.3f})")
    assert verdict(7, "temporal packing", ok, "; ".join(parts))


def test_criterion_8_first_timestep_dominates(bench):
    parts = []
    ok = True
    for i in (1, 5):
        dep = bench[(8, i)]
        _, stats = run(sssp.SSSP(), dep, config=RunConfig(inputs=sssp.SSSP.inputs(dep, 0), cache_slots=14))
        reads = [t.slices_read for t in stats.timesteps]
        ok &= all(reads[0] > r for r in reads[1:])
        parts.append(f"s8-i{i}: ts1 {reads[0]}, max later {max(reads[1:])}")
    assert verdict(8, "first-timestep dominance", ok, "; ".join(parts))


# -- engine invariants -------------------------------------------------------------

LRU_TRIALS = 4000
PARTITION_TRIALS = 3500
ENGINE_TRIALS = 2500


def _lru_trial(rng):
    cap = rng.randint(0, 8)
    cache = SliceCache(cap, lambda sid: (sid, 1, True))
    model = oracles.LRUModel(cap)
    for _ in range(rng.randint(0, 60)):
        key = rng.randint(0, 11)
        cache.fetch(key)
        model.access(key)
        if cache.keys() != list(model.entries):
            return False
    c = cache.counters
    return (c.hits, c.misses, c.evictions) == (model.hits, model.misses, model.evictions)


def _partition_trial(rng):
    n = rng.randint(1, 40)
    pairs = [(rng.randrange(n), rng.randrange(n)) for _ in range(rng.randint(0, 3 * n))]
    tpl = GraphTemplate.build(range(n), [(i, s, d) for i, (s, d) in enumerate(pairs)], rng.random() < 0.5)
    k = rng.randint(1, min(6, n))
    check_partition_invariants(tpl, partition(tpl, k, seed=rng.randint(0, 1000)), k)
    return True


def _fingerprint(result, stats):
    trace = [(e.timestep, e.superstep, e.subgraph_id, tuple((m.payload, m.seq) for m in e.inbox)) for e in stats.trace]
    return result.outputs, result.merge_outputs, sorted(trace, key=repr)


def _engine_trial(rng, deps):
    dep, ids = deps[rng.randrange(len(deps))]
    seed = rng.randint(0, 10**9)
    params = dict(pattern=rng.choice(list(Pattern)), max_superstep=rng.randint(1, 5), halt_p=rng.choice((0.3, 0.6, 0.9)))
    prints = []
    for workers in (1, rng.randint(2, 4)):
        app = Chatter(seed, **params)
        result, stats = run(app, dep, config=RunConfig(workers_per_host=workers, record_trace=True))
        check_trace(app, stats, ids)
        prints.append(_fingerprint(result, stats))
    return prints[0] == prints[1]


def test_criterion_9_engine_invariants(tmp_path, caplog):
    caplog.set_level("ERROR")
    rng = random.Random(9)
    deps = []
    for k, (n, hosts, comps) in enumerate([(20, 1, 3), (40, 2, 4), (60, 3, 6), (30, 4, 2)]):
        c = random_collection(900 + k, n_vertices=n, n_instances=3, components=comps, directed=bool(k % 2))
        dep = _deploy(c, tmp_path / f"e{k}", hosts, bins=2, ipack=2)
        deps.append((dep, sorted(s for h in dep.hosts() for s in h.subgraph_ids)))

    t0 = time.perf_counter()
    failed = {"lru": 0, "partition": 0, "engine": 0}
    for _ in range(LRU_TRIALS):
        failed["lru"] += not _lru_trial(rng)
    for _ in range(PARTITION_TRIALS):
        try:
            _partition_trial(rng)
        except AssertionError:
            failed["partition"] += 1
    for _ in range(ENGINE_TRIALS):
        try:
            failed["engine"] += not _engine_trial(rng, deps)
        except AssertionError:
            failed["engine"] += 1
    elapsed = time.perf_counter() - t0
    total = LRU_TRIALS + PARTITION_TRIALS + ENGINE_TRIALS
    ok = total >= 10_000 and not any(failed.values()) and elapsed < 300
    detail = f"{total} trials (lru {LRU_TRIALS}, partition {PARTITION_TRIALS}, engine {ENGINE_TRIALS}), failures {failed}, {elapsed:.0f} s"
    assert verdict(9, "engine invariants", ok, detail)
