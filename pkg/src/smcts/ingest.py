"""Build store networks from transaction CSVs or from a seeded generator."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
import warnings
from dataclasses import dataclass
from datetime import date, datetime
from typing import Mapping, Optional

import numpy as np

from .network import (DEFAULT_GAMMA, DEFAULT_RADIUS_MILES, StoreNetwork,
                      StoreRecord)

log = logging.getLogger(__name__)

# logical column -> header in the file
DEFAULT_COLUMNS = {
    "date": "date",
    "store_id": "store_id",
    "store_name": "store_name",
    "city": "city",
    "county": "county",
    "zip": "zip",
    "latitude": "latitude",
    "longitude": "longitude",
    "sale_amount": "sale_amount",
}

# headers of the public Iowa liquor sales export
IOWA_COLUMNS = {
    "date": "Date",
    "store_id": "Store Number",
    "store_name": "Store Name",
    "city": "City",
    "county": "County",
    "zip": "Zip Code",
    "location": "Store Location",
    "sale_amount": "Sale (Dollars)",
}

REQUIRED = ("date", "store_id", "sale_amount")
DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%Y/%m/%d", "%Y-%m-%dT%H:%M:%S")
_POINT = re.compile(r"POINT\s*\(\s*(-?[\d.]+)\s+(-?[\d.]+)\s*\)", re.IGNORECASE)

MILES_PER_DEGREE_LAT = 69.0


class SchemaError(ValueError):
    """A required column is missing from the CSV header."""

    def __init__(self, column: str, header: str):
        super().__init__(f"missing required column {column!r} (expected header {header!r})")
        self.column = column


class IngestWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TransactionRow:
    date: date
    store_id: int
    store_name: str
    city: str
    county: str
    zip: str
    latitude: Optional[float]
    longitude: Optional[float]
    sale_amount: float


def parse_date(text: str) -> date:
    text = text.strip()
    for fmt in DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _money(text: str) -> float:
    value = float(text.strip().replace("$", "").replace(",", ""))
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"invalid sale amount {text!r}")
    return value


def _coord(text) -> Optional[float]:
    if text is None or not str(text).strip():
        return None
    return float(text)


def _parse_row(row: Mapping, cols: Mapping) -> TransactionRow:
    def get(key):
        header = cols.get(key)
        return (row.get(header) or "").strip() if header else ""

    lat = lon = None
    if "location" in cols:
        m = _POINT.search(get("location"))
        if m:
            lon, lat = float(m.group(1)), float(m.group(2))
    if lat is None:
        lat, lon = _coord(get("latitude")), _coord(get("longitude"))
    if (lat is None) != (lon is None):
        lat = lon = None
    return TransactionRow(
        date=parse_date(get("date")),
        store_id=int(get("store_id")),
        store_name=get("store_name"),
        city=get("city"),
        county=get("county"),
        zip=get("zip"),
        latitude=lat,
        longitude=lon,
        sale_amount=_money(get("sale_amount")),
    )


def load_column_map(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise ValueError("column map must be a JSON object")
    return mapping


def aggregate_transactions(csv_stream, column_map: Optional[Mapping] = None,
                           radius_miles: float = DEFAULT_RADIUS_MILES,
                           recapture_gamma: float = DEFAULT_GAMMA,
                           year: Optional[int] = None) -> StoreNetwork:
    """Sum transaction rows into per-store annual sales and build a network.

    ``csv_stream`` is a text stream or a string holding the CSV. Rows that do
    not parse are skipped; stores whose coordinates never appear are
    dropped; for stores seen with several coordinates the first wins. Each of
    these raises one summary :class:`IngestWarning`. ``year`` restricts the
    sum to one calendar year.
    """
    if isinstance(csv_stream, str):
        csv_stream = io.StringIO(csv_stream)
    cols = dict(DEFAULT_COLUMNS)
    if column_map:
        if "location" in column_map:
            cols.pop("latitude", None)
            cols.pop("longitude", None)
        cols.update(column_map)

    reader = csv.DictReader(csv_stream)
    header = reader.fieldnames or []
    for key in REQUIRED:
        if cols.get(key) not in header:
            raise SchemaError(key, cols.get(key, key))
    if "location" not in cols:
        for key in ("latitude", "longitude"):
            if cols.get(key) not in header:
                raise SchemaError(key, cols.get(key, key))

    sales = {}
    meta = {}
    coords = {}
    bad_rows = 0
    conflicts = set()
    for row in reader:
        try:
            rec = _parse_row(row, cols)
        except (ValueError, TypeError):
            bad_rows += 1
            continue
        if year is not None and rec.date.year != year:
            continue
        sid = rec.store_id
        sales[sid] = sales.get(sid, 0.0) + rec.sale_amount
        if sid not in meta:
            meta[sid] = (rec.store_name, rec.county, rec.city, rec.zip)
        if rec.latitude is not None:
            here = (rec.latitude, rec.longitude)
            if sid not in coords:
                coords[sid] = here
            elif coords[sid] != here:
                conflicts.add(sid)

    if bad_rows:
        warnings.warn(f"skipped {bad_rows} unparseable row(s)", IngestWarning, stacklevel=2)
    if conflicts:
        warnings.warn(f"{len(conflicts)} store(s) with conflicting coordinates; "
                      f"kept first occurrence: {sorted(conflicts)}", IngestWarning, stacklevel=2)
    missing = sorted(set(sales) - set(coords))
    if missing:
        warnings.warn(f"dropped {len(missing)} store(s) without coordinates: {missing}",
                      IngestWarning, stacklevel=2)

    stores = []
    for sid in sorted(coords):
        if sid not in sales:
            continue
        name, county, city, zip_ = meta[sid]
        lat, lon = coords[sid]
        stores.append(StoreRecord(sid, name, lat, lon, county, city, zip_, sales[sid]))
    log.info("aggregated %d stores from transactions", len(stores))
    return StoreNetwork(tuple(stores), radius_miles, recapture_gamma)


def read_transactions(path, column_map=None, **kwargs) -> StoreNetwork:
    with open(path, newline="", encoding="utf-8") as fh:
        return aggregate_transactions(fh, column_map, **kwargs)


def filter_county(network: StoreNetwork, county_name: str) -> StoreNetwork:
    """Sub-network of the stores in one county (case-insensitive match)."""
    wanted = county_name.strip().casefold()
    stores = [s for s in network.stores if s.county.strip().casefold() == wanted]
    if not stores:
        raise ValueError(f"no stores in county {county_name!r}")
    return network.with_stores(stores)


@dataclass(frozen=True)
class SyntheticSpec:
    """Clustered random network. ``area`` is (lat_min, lat_max, lon_min, lon_max)."""

    n_stores: int
    seed: int = 0
    area: tuple = (41.45, 41.75, -93.85, -93.45)
    cluster_count: int = 4
    sales_lognormal: tuple = (12.0, 0.8)
    cluster_sigma_miles: float = 0.3
    radius_miles: float = DEFAULT_RADIUS_MILES
    recapture_gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.n_stores < 2:
            raise ValueError("n_stores must be >= 2")
        lat0, lat1, lon0, lon1 = self.area
        if not (-90 <= lat0 < lat1 <= 90 and -180 <= lon0 < lon1 <= 180):
            raise ValueError(f"invalid bounding box {self.area}")
        if self.cluster_count < 1:
            raise ValueError("cluster_count must be >= 1")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticSpec":
        d = dict(d)
        for key in ("area", "sales_lognormal"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def generate_synthetic(spec: SyntheticSpec) -> StoreNetwork:
    """Stores scattered around uniform cluster centres with lognormal sales."""
    rng = np.random.default_rng(spec.seed)
    lat0, lat1, lon0, lon1 = spec.area
    centers = np.column_stack([rng.uniform(lat0, lat1, spec.cluster_count),
                               rng.uniform(lon0, lon1, spec.cluster_count)])
    member = rng.integers(0, spec.cluster_count, spec.n_stores)
    offsets = rng.normal(0.0, spec.cluster_sigma_miles, (spec.n_stores, 2))
    mu, sigma = spec.sales_lognormal
    sales = rng.lognormal(mu, sigma, spec.n_stores)

    stores = []
    for i in range(spec.n_stores):
        clat, clon = centers[member[i]]
        lat = float(np.clip(clat + offsets[i, 0] / MILES_PER_DEGREE_LAT, -90, 90))
        miles_per_deg_lon = MILES_PER_DEGREE_LAT * max(math.cos(math.radians(lat)), 1e-6)
        lon = float(np.clip(clon + offsets[i, 1] / miles_per_deg_lon, -180, 180))
        stores.append(StoreRecord(
            store_id=i + 1,
            name=f"store-{i + 1}",
            latitude=lat,
            longitude=lon,
            county="synthetic",
            city=f"cluster-{member[i]}",
            zip="",
            base_sales=round(float(sales[i]), 2),
        ))
    return StoreNetwork(tuple(stores), spec.radius_miles, spec.recapture_gamma)
