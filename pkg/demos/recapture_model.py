"""How closing a store moves its sales to nearby stores."""

# %%
from smcts import ClosureState, StoreNetwork, StoreRecord, store_sales, total_loss

# Two downtown stores a few blocks apart and one out in the suburbs.
net = StoreNetwork((
    StoreRecord(1, "Downtown A", 41.6005, -93.6091, "Polk", "Des Moines", "50309", 100.0),
    StoreRecord(2, "Downtown B", 41.6048, -93.6091, "Polk", "Des Moines", "50309", 200.0),
    StoreRecord(3, "Suburb", 41.7450, -93.6091, "Polk", "Ankeny", "50023", 300.0),
), radius_miles=0.5, recapture_gamma=0.5)

print(net.neighbor_index)
print(round(net.distance(1, 2), 3), "miles between the downtown stores")

# %%
# Closing B: half of its sales walk over to A, the rest are lost.
closed = ClosureState.of(2)
print("A after B closes:", store_sales(net, closed, 1))
print("loss:", total_loss(net, closed))

# %%
# The suburban store has nobody nearby, so all of its sales are lost.
for state in ({1}, {2}, {3}, {1, 2}, {2, 3}):
    print(sorted(state), total_loss(net, state))
