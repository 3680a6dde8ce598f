import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eonplan import data_path
from eonplan.topology import (
    TopologyError, TrafficDemand, build_topology, generate_traffic, load_topology, load_traffic,
    mark_ver_nodes, random_topology, save_topology, save_traffic,
)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def test_chain_file_degrees_and_ver_site():
    topo = load_topology(data_path("fig2_chain.json"))
    assert [n.degree for n in topo.nodes] == [1, 2, 1]
    assert [n.ver_eligible for n in topo.nodes] == [False, True, False]
    assert [f.length_km for f in topo.fibers] == [1500, 900]


def test_bundled_31_node_topology():
    topo = load_topology(data_path("nkn31.json"))
    assert (topo.num_nodes, len(topo.fibers)) == (31, 81)
    assert sum(n.ver_eligible for n in topo.nodes) == 10
    assert "reconstructed" in topo.name


def test_minimal_document_uses_defaults(tmp_path):
    doc = {"nodes": [{"id": 0}, {"id": 1}], "fibers": [{"id": 0, "a": 0, "b": 1, "length_km": 160}],
           "span_km": 80}
    topo = load_topology(write_json(tmp_path / "t.json", doc))
    assert topo.fibers[0].slots_total == 320
    assert topo.nodes[0].max_sbvts == 64 and topo.nodes[0].max_vers == 3


@pytest.mark.parametrize("doc", [
    {"nodes": [{"id": 0}], "fibers": [], "span_km": 80},
    {"nodes": [{"id": 0}, {"id": 1}, {"id": 2}],
     "fibers": [{"id": 0, "a": 0, "b": 1, "length_km": 10}], "span_km": 80},
    {"nodes": [{"id": 0}, {"id": 1}],
     "fibers": [{"id": 0, "a": 0, "b": 1, "length_km": 10}, {"id": 1, "a": 1, "b": 0, "length_km": 20}],
     "span_km": 80},
    {"nodes": [{"id": 0}, {"id": 1}], "fibers": [{"id": 0, "a": 0, "b": 1, "length_km": 0}], "span_km": 80},
    {"nodes": [{"id": 0}, {"id": 1}], "fibers": [{"id": 0, "a": 0, "b": 0, "length_km": 5}], "span_km": 80},
    {"nodes": [{"id": 0}, {"id": 1}], "fibers": [{"id": 0, "a": 0, "b": 7, "length_km": 5}], "span_km": 80},
    {"fibers": []},
], ids=["single-node", "disconnected", "duplicate", "zero-length", "self-loop", "bad-endpoint", "no-nodes"])
def test_invalid_topologies_rejected(tmp_path, doc):
    with pytest.raises(TopologyError):
        load_topology(write_json(tmp_path / "t.json", doc))


def test_unparseable_file(tmp_path):
    path = tmp_path / "t.json"
    path.write_text("{nodes: ")
    with pytest.raises(TopologyError):
        load_topology(path)


def test_mark_ver_nodes_counts():
    topo = random_topology(31, seed=1)
    assert sum(n.ver_eligible for n in mark_ver_nodes(topo, 0.30).nodes) == 10
    assert all(n.ver_eligible for n in mark_ver_nodes(topo, 1.0).nodes)
    with pytest.raises(ValueError):
        mark_ver_nodes(topo, 0)


def test_mark_ver_nodes_tie_break_by_id():
    # ring: every degree is 2, so the lowest ids win
    topo = build_topology(10, [(i, (i + 1) % 10, 100) for i in range(10)])
    assert [n.id for n in topo.nodes if n.ver_eligible] == [0, 1, 2]


@given(st.integers(3, 25), st.integers(0, 1000), st.floats(0.05, 1.0))
@settings(max_examples=40, deadline=None)
def test_mark_ver_nodes_idempotent_and_top_degree(n, seed, fraction):
    topo = random_topology(n, seed=seed)
    once = mark_ver_nodes(topo, fraction)
    assert mark_ver_nodes(once, fraction) == once
    chosen = [nd for nd in once.nodes if nd.ver_eligible]
    assert len(chosen) == math.ceil(round(fraction * n, 9))
    rest = [nd for nd in once.nodes if not nd.ver_eligible]
    if rest:
        assert min(nd.degree for nd in chosen) >= max(nd.degree for nd in rest)


def test_degree_equals_incident_fibers():
    topo = random_topology(12, seed=4)
    for nd in topo.nodes:
        assert nd.degree == sum(nd.id in (f.a, f.b) for f in topo.fibers)


@given(st.integers(2, 15), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_save_load_round_trip(tmp_path_factory, n, seed):
    topo = random_topology(n, seed=seed, max_sbvts=10, max_vers=1, slots_total=64)
    path = tmp_path_factory.mktemp("topo") / "t.json"
    save_topology(topo, path)
    assert load_topology(path) == topo


def test_generate_traffic_full_matrix():
    topo = random_topology(31, seed=0)
    demands = generate_traffic(topo, 40, seed=3)
    assert len(demands) == 31 * 30
    assert all(5 <= d.rate_gbps <= 75 and d.rate_gbps == int(d.rate_gbps) for d in demands)
    assert [d.demand_id for d in demands] == list(range(930))
    pairs = [(d.src, d.dst) for d in demands]
    assert pairs == sorted(pairs) and all(s != t for s, t in pairs)
    assert generate_traffic(topo, 40, seed=3) == demands
    assert generate_traffic(topo, 40, seed=4) != demands


def test_generate_traffic_subset_and_errors():
    topo = random_topology(8, seed=0)
    demands = generate_traffic(topo, 20, seed=1, n_demands=20)
    assert len(demands) == 20 and len({(d.src, d.dst) for d in demands}) == 20
    with pytest.raises(ValueError):
        generate_traffic(topo, 4.9, seed=1)
    with pytest.raises(ValueError):
        generate_traffic(topo, 20, seed=1, n_demands=57)


def test_traffic_mean_tracks_atd():
    topo = random_topology(31, seed=0)
    for atd in (40, 100, 200):
        means = [np.mean([d.rate_gbps for d in generate_traffic(topo, atd, seed=s)]) for s in range(10)]
        assert abs(np.mean(means) - atd) <= 0.05 * atd


def test_traffic_demand_validation():
    with pytest.raises(ValueError):
        TrafficDemand(1, 1, 10)
    with pytest.raises(ValueError):
        TrafficDemand(0, 1, 0)


def test_traffic_csv_round_trip(tmp_path):
    topo = random_topology(6, seed=2)
    demands = generate_traffic(topo, 30, seed=5)
    path = tmp_path / "traffic.csv"
    save_traffic(demands, path, header="atd=30 traffic_seed=5")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "src,dst,gbps"
    assert load_traffic(path, topo) == demands


def test_traffic_csv_skips_zero_and_renumbers(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text("src,dst,gbps\n2,0,15\n0,1,0\n0,2,7\n")
    demands = load_traffic(path)
    assert [(d.src, d.dst, d.rate_gbps, d.demand_id) for d in demands] == [(0, 2, 7, 0), (2, 0, 15, 1)]


def test_traffic_csv_rejects_duplicates_and_unknown_nodes(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text("src,dst,gbps\n0,1,5\n0,1,6\n")
    with pytest.raises(ValueError):
        load_traffic(path)
    path.write_text("src,dst,gbps\n0,9,5\n")
    with pytest.raises(ValueError):
        load_traffic(path, random_topology(3, seed=0))
