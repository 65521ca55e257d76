import pytest

from smcts.network import StoreNetwork, StoreRecord

# 0.3 mi north of the first store (0.3 / 69.09 degrees of latitude)
NEAR_LAT = 41.6005 + 0.3 / 69.0935


def make_store(sid, lat, lon, sales, county="Polk"):
    return StoreRecord(sid, f"s{sid}", lat, lon, county, "Des Moines", "50309", sales)


@pytest.fixture
def three_store_network():
    """Stores 1-2 are mutual neighbours, store 3 sits ~10 miles away."""
    return StoreNetwork((
        make_store(1, 41.6005, -93.6091, 100.0),
        make_store(2, NEAR_LAT, -93.6091, 200.0),
        make_store(3, 41.7450, -93.6091, 300.0),
    ), radius_miles=0.5, recapture_gamma=0.5)


@pytest.fixture
def isolated_network():
    """Three stores with no neighbours; losses equal base sales a=5, b=1, c=9."""
    return StoreNetwork((
        make_store(1, 41.0, -93.0, 5.0),
        make_store(2, 41.2, -93.0, 1.0),
        make_store(3, 41.4, -93.0, 9.0),
    ))
