"""A noisier surrogate triggers more re-evaluation with the main evaluator."""

# %%
from smcts import SyntheticSpec
from smcts.bench import InstanceSpec, SweepSpec, run_sweep, summarize

instances = [InstanceSpec(f"syn{i}", SyntheticSpec(20, seed=i)) for i in range(4)]
spec = SweepSpec(instances, M_values=[3], seeds=[0], nrmse_values=[0.05, 0.1, 0.2, 0.3],
                 search={"budget_iterations": 1500, "ucb_variant": "log",
                         "exploration_C": 0.1})
records, failures = run_sweep(spec)

# %%
print(f"{'nrmse':>6} {'reevals':>8} {'ratio':>6} {'dice':>5}")
for row in summarize(records):
    print(f"{row['nrmse']:6.2f} {row['reevals']:8.1f} {row['ratio']:6.3f} {row['dice']:5.2f}")
