"""Spatial store network, proximity index and the sales-recapture loss model.

Sales of an open store depend on which of its neighbours are closed: a closed
store's annual sales are partially recaptured (fraction ``recapture_gamma``)
by the open stores within ``radius_miles``, split in proportion to inverse
distance. The network loss of a closure set is the drop in total sales.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

EARTH_RADIUS_MILES = 3958.8
# keeps inverse-distance weights finite for co-located stores
WEIGHT_EPSILON_MILES = 0.01
DEFAULT_RADIUS_MILES = 0.5
DEFAULT_GAMMA = 0.5


class UnknownStoreError(KeyError):
    """Raised when a store id is not part of the network."""


class StoreClosedError(ValueError):
    """Raised when asking for the sales of a store that is closed."""


def haversine_miles(a, b) -> float:
    """Great-circle distance in miles between two ``(lat, lon)`` pairs in degrees."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    h = (math.sin((lat2 - lat1) / 2.0) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def pairwise_miles(lats, lons) -> np.ndarray:
    """Symmetric matrix of haversine distances for coordinate arrays."""
    lat = np.radians(np.asarray(lats, dtype=float))
    lon = np.radians(np.asarray(lons, dtype=float))
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = (np.sin(dlat / 2.0) ** 2
         + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2)
    d = 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    # exact symmetry and zero diagonal regardless of rounding
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class StoreRecord:
    store_id: int
    name: str = ""
    latitude: float = 0.0
    longitude: float = 0.0
    county: str = ""
    city: str = ""
    zip: str = ""
    base_sales: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"store {self.store_id}: latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"store {self.store_id}: longitude {self.longitude} out of range")
        if not (self.base_sales >= 0.0 and math.isfinite(self.base_sales)):
            raise ValueError(f"store {self.store_id}: base_sales must be finite and >= 0")

    @property
    def coords(self) -> tuple[float, float]:
        return (self.latitude, self.longitude)

    def to_dict(self) -> dict:
        return {
            "id": self.store_id,
            "name": self.name,
            "lat": self.latitude,
            "lon": self.longitude,
            "county": self.county,
            "city": self.city,
            "zip": self.zip,
            "base_sales": self.base_sales,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StoreRecord":
        return cls(
            store_id=int(d["id"]),
            name=str(d.get("name", "")),
            latitude=float(d["lat"]),
            longitude=float(d["lon"]),
            county=str(d.get("county", "")),
            city=str(d.get("city", "")),
            zip=str(d.get("zip", "")),
            base_sales=float(d["base_sales"]),
        )


@dataclass(frozen=True)
class ClosureState:
    """A set of closed store ids. Store ``j`` is open iff ``j not in closed``."""

    closed: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.closed, frozenset):
            object.__setattr__(self, "closed", frozenset(self.closed))

    @classmethod
    def of(cls, *store_ids: int) -> "ClosureState":
        return cls(frozenset(store_ids))

    def __len__(self) -> int:
        return len(self.closed)

    def __contains__(self, store_id) -> bool:
        return store_id in self.closed

    def __iter__(self):
        return iter(sorted(self.closed))

    def is_open(self, store_id) -> bool:
        return store_id not in self.closed

    def decision_vector(self, network: "StoreNetwork") -> np.ndarray:
        """0/1 vector over the network's stores, 1 where the store stays open."""
        return np.array([0 if s.store_id in self.closed else 1 for s in network.stores],
                        dtype=np.int8)


def closed_set(state) -> frozenset:
    """Accept a ClosureState or any iterable of store ids."""
    if isinstance(state, ClosureState):
        return state.closed
    if isinstance(state, frozenset):
        return state
    return frozenset(state)


@dataclass(frozen=True, eq=False)
class StoreNetwork:
    """Immutable store network with a precomputed proximity index.

    Equality and hashing are by identity so a network can key caches.
    """

    stores: tuple
    radius_miles: float = DEFAULT_RADIUS_MILES
    recapture_gamma: float = DEFAULT_GAMMA
    distances: np.ndarray = field(init=False, repr=False)
    neighbor_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        stores = tuple(self.stores)
        object.__setattr__(self, "stores", stores)
        if not self.radius_miles > 0:
            raise ValueError("radius_miles must be > 0")
        if not 0.0 <= self.recapture_gamma <= 1.0:
            raise ValueError("recapture_gamma must lie in [0, 1]")
        ids = [s.store_id for s in stores]
        if len(set(ids)) != len(ids):
            raise ValueError("store ids must be unique")

        n = len(stores)
        if n:
            d = pairwise_miles([s.latitude for s in stores], [s.longitude for s in stores])
        else:
            d = np.zeros((0, 0))
        d.setflags(write=False)
        within = (d <= self.radius_miles) & ~np.eye(n, dtype=bool)
        neighbors = {}
        weights = {}
        for i, sid in enumerate(ids):
            cols = np.flatnonzero(within[i])
            neighbors[sid] = frozenset(ids[c] for c in cols)
            weights[sid] = {ids[c]: 1.0 / (float(d[i, c]) + WEIGHT_EPSILON_MILES) for c in cols}

        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "neighbor_index", neighbors)
        object.__setattr__(self, "_weights", weights)
        object.__setattr__(self, "_position", {sid: i for i, sid in enumerate(ids)})
        object.__setattr__(self, "_sales", {s.store_id: s.base_sales for s in stores})
        object.__setattr__(self, "_ids", frozenset(ids))

    def __len__(self) -> int:
        return len(self.stores)

    @property
    def n_stores(self) -> int:
        return len(self.stores)

    @property
    def store_ids(self) -> list:
        return [s.store_id for s in self.stores]

    @property
    def id_set(self) -> frozenset:
        return self._ids

    @property
    def total_sales(self) -> float:
        return float(sum(s.base_sales for s in self.stores))

    def base_sales(self, store_id) -> float:
        try:
            return self._sales[store_id]
        except KeyError:
            raise UnknownStoreError(store_id) from None

    def store(self, store_id) -> StoreRecord:
        try:
            return self.stores[self._position[store_id]]
        except KeyError:
            raise UnknownStoreError(store_id) from None

    def distance(self, a, b) -> float:
        return float(self.distances[self._position[a], self._position[b]])

    def weight(self, a, b) -> float:
        """Inverse-distance weight between two neighbouring stores."""
        return self._weights[a][b]

    def mean_degree(self) -> float:
        if not self.stores:
            return 0.0
        return sum(len(v) for v in self.neighbor_index.values()) / len(self.stores)

    def with_stores(self, stores: Iterable[StoreRecord]) -> "StoreNetwork":
        """New network over ``stores`` with the same model parameters."""
        return StoreNetwork(tuple(stores), self.radius_miles, self.recapture_gamma)

    def validate(self, state) -> frozenset:
        closed = closed_set(state)
        unknown = closed - self._ids
        if unknown:
            raise UnknownStoreError(f"unknown store ids in closure set: {sorted(unknown)}")
        return closed

    def to_dict(self) -> dict:
        return {
            "stores": [s.to_dict() for s in self.stores],
            "radius_miles": self.radius_miles,
            "recapture_gamma": self.recapture_gamma,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StoreNetwork":
        return cls(
            tuple(StoreRecord.from_dict(s) for s in d["stores"]),
            radius_miles=float(d.get("radius_miles", DEFAULT_RADIUS_MILES)),
            recapture_gamma=float(d.get("recapture_gamma", DEFAULT_GAMMA)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "StoreNetwork":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def neighbors_within(network: StoreNetwork, store_id) -> frozenset:
    """Stores other than ``store_id`` within the network's proximity radius."""
    try:
        return network.neighbor_index[store_id]
    except KeyError:
        raise UnknownStoreError(store_id) from None


def store_sales(network: StoreNetwork, state, store_id) -> float:
    """Annual sales of an open store given the closure set.

    The store keeps its own base sales and picks up, from every closed
    neighbour ``k``, the share ``gamma * b_k * w_jk / sum(w_kl)`` where the
    sum runs over ``k``'s open neighbours.
    """
    closed = network.validate(state)
    if store_id not in network.id_set:
        raise UnknownStoreError(store_id)
    if store_id in closed:
        raise StoreClosedError(f"store {store_id} is closed")
    total = network.base_sales(store_id)
    gamma = network.recapture_gamma
    for k in network.neighbor_index[store_id] & closed:
        wk = network._weights[k]
        denom = sum(w for l, w in wk.items() if l not in closed)
        total += gamma * network.base_sales(k) * wk[store_id] / denom
    return total


def network_sales(network: StoreNetwork, state) -> float:
    """Total sales of all open stores, summed store by store."""
    closed = network.validate(state)
    return math.fsum(store_sales(network, closed, s.store_id)
                     for s in network.stores if s.store_id not in closed)


def total_loss(network: StoreNetwork, state) -> float:
    """Sales lost network-wide by closing ``state``.

    Closed form: each closed store loses its full base sales unless at least
    one of its neighbours stays open, in which case a ``gamma`` share is kept.
    """
    closed = network.validate(state)
    gamma = network.recapture_gamma
    nbrs = network.neighbor_index
    loss = 0.0
    for k in closed:
        b = network._sales[k]
        if nbrs[k] and not nbrs[k] <= closed:
            loss += b * (1.0 - gamma)
        else:
            loss += b
    return loss
