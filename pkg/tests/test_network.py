import itertools
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smcts.ingest import SyntheticSpec, generate_synthetic
from smcts.network import (ClosureState, StoreClosedError, StoreNetwork, StoreRecord,
                           UnknownStoreError, haversine_miles, neighbors_within,
                           network_sales, pairwise_miles, store_sales, total_loss)

from conftest import make_store

lat = st.floats(-90, 90, allow_nan=False)
lon = st.floats(-180, 180, allow_nan=False)


def test_haversine_identity():
    assert haversine_miles((41.6005, -93.6091), (41.6005, -93.6091)) == 0.0


def test_haversine_small_meridian_step():
    d = haversine_miles((41.6005, -93.6091), (41.6105, -93.6091))
    # along a meridian the great-circle distance is the plain arc length
    arc = math.radians(0.01) * 3958.8
    assert d == pytest.approx(arc, abs=1e-9)
    assert abs(d - 0.6905) < 1e-3


def test_haversine_symmetry_random_pairs():
    rng = random.Random(7)
    for _ in range(100):
        a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
        assert haversine_miles(a, b) == haversine_miles(b, a)


@given(lat, lon, lat, lon)
def test_haversine_nonnegative_and_bounded(a1, o1, a2, o2):
    d = haversine_miles((a1, o1), (a2, o2))
    assert 0.0 <= d <= math.pi * 3958.8 + 1e-6


def test_pairwise_matches_scalar():
    rng = np.random.default_rng(3)
    lats = rng.uniform(41, 42, 12)
    lons = rng.uniform(-94, -93, 12)
    d = pairwise_miles(lats, lons)
    for i, j in itertools.product(range(12), repeat=2):
        assert d[i, j] == pytest.approx(haversine_miles((lats[i], lons[i]), (lats[j], lons[j])),
                                        rel=1e-12, abs=1e-12)
    assert np.array_equal(d, d.T)


def test_isolated_store_has_no_neighbors(three_store_network):
    assert neighbors_within(three_store_network, 3) == frozenset()


def test_close_pair_are_mutual_neighbors(three_store_network):
    assert 2 in neighbors_within(three_store_network, 1)
    assert 1 in neighbors_within(three_store_network, 2)


def test_neighbors_unknown_id(three_store_network):
    with pytest.raises(UnknownStoreError):
        neighbors_within(three_store_network, 99)


def test_neighbors_match_brute_force_scan():
    net = generate_synthetic(SyntheticSpec(5, seed=11, cluster_count=1))
    for s in net.stores:
        expected = {t.store_id for t in net.stores
                    if t.store_id != s.store_id
                    and haversine_miles(s.coords, t.coords) <= net.radius_miles}
        assert neighbors_within(net, s.store_id) == expected
    assert net.mean_degree() > 0


def test_neighbor_relation_symmetric_irreflexive():
    net = generate_synthetic(SyntheticSpec(40, seed=2))
    for sid, nbrs in net.neighbor_index.items():
        assert sid not in nbrs
        for k in nbrs:
            assert sid in net.neighbor_index[k]


def test_store_record_validation():
    with pytest.raises(ValueError):
        StoreRecord(1, latitude=91.0)
    with pytest.raises(ValueError):
        StoreRecord(1, longitude=-181.0)
    with pytest.raises(ValueError):
        StoreRecord(1, base_sales=-1.0)


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        StoreNetwork((make_store(1, 41, -93, 1), make_store(1, 41.1, -93, 1)))


def test_no_closures_sales_equal_base(three_store_network):
    for s in three_store_network.stores:
        assert store_sales(three_store_network, ClosureState(), s.store_id) == s.base_sales


def test_single_neighbor_recapture(three_store_network):
    # 100 + 0.5 * 200
    assert store_sales(three_store_network, ClosureState.of(2), 1) == pytest.approx(200.0)


def test_store_sales_of_closed_store_raises(three_store_network):
    with pytest.raises(StoreClosedError):
        store_sales(three_store_network, ClosureState.of(2), 2)


def test_total_loss_zero_closure(three_store_network):
    assert total_loss(three_store_network, ClosureState()) == 0.0


@pytest.mark.parametrize("closed, expected", [
    ({2}, 100.0),
    ({3}, 300.0),
    ({2, 3}, 400.0),
    ({1, 2}, 300.0),
    ({1}, 50.0),
])
def test_total_loss_hand_values(three_store_network, closed, expected):
    assert total_loss(three_store_network, closed) == pytest.approx(expected)


def test_total_loss_unknown_id(three_store_network):
    with pytest.raises(UnknownStoreError):
        total_loss(three_store_network, {42})


def _per_store_loss(net, closed):
    # sum over every store with nothing closed, minus open stores' sales now
    return net.total_sales - network_sales(net, closed)


def test_per_store_sum_matches_closed_form():
    net = generate_synthetic(SyntheticSpec(25, seed=5, cluster_count=2))
    rng = random.Random(1)
    ids = net.store_ids
    for _ in range(50):
        closed = set(rng.sample(ids, rng.randint(0, len(ids) - 1)))
        expected = _per_store_loss(net, closed)
        got = total_loss(net, closed)
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-6)


def test_coincident_stores_finite():
    net = StoreNetwork((make_store(1, 41.0, -93.0, 10.0), make_store(2, 41.0, -93.0, 20.0),
                        make_store(3, 41.0, -93.0, 30.0)))
    s = store_sales(net, {3}, 1)
    assert s == pytest.approx(10.0 + 0.5 * 30.0 / 2)


@pytest.mark.parametrize("seed", range(3))
def test_monotone_under_inclusion_exhaustive(seed):
    net = generate_synthetic(SyntheticSpec(8, seed=seed, cluster_count=1))
    ids = net.store_ids
    loss = {}
    for r in range(len(ids) + 1):
        for combo in itertools.combinations(ids, r):
            loss[frozenset(combo)] = total_loss(net, combo)
    for s, v in loss.items():
        assert 0.0 <= v <= sum(net.base_sales(k) for k in s) + 1e-9
        for m in ids:
            if m not in s:
                assert v <= loss[s | {m}] + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.data())
def test_bounds_and_monotone_random(seed, gamma, data):
    spec = SyntheticSpec(10, seed=seed, cluster_count=2, recapture_gamma=gamma)
    net = generate_synthetic(spec)
    ids = net.store_ids
    s = data.draw(st.sets(st.sampled_from(ids), max_size=9))
    m = data.draw(st.sampled_from(ids))
    base = total_loss(net, s)
    assert 0.0 <= base <= sum(net.base_sales(k) for k in s) + 1e-9
    assert base <= total_loss(net, s | {m}) + 1e-9


def test_decision_vector(three_store_network):
    x = ClosureState.of(2).decision_vector(three_store_network)
    assert x.tolist() == [1, 0, 1]


def test_json_round_trip(tmp_path, three_store_network):
    path = tmp_path / "net.json"
    three_store_network.save(path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"stores", "radius_miles", "recapture_gamma"}
    assert set(doc["stores"][0]) == {"id", "name", "lat", "lon", "county", "city", "zip",
                                     "base_sales"}
    again = StoreNetwork.load(path)
    assert again.to_dict() == three_store_network.to_dict()
    assert again.neighbor_index == three_store_network.neighbor_index
