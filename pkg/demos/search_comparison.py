"""Plain MCTS and surrogate-assisted MCTS on one synthetic county."""

# %%
from smcts import (MainEvaluator, NaiveSurrogate, SearchConfig, SyntheticSpec,
                   calibrate_sigma, generate_synthetic, run_mcts, run_smcts)
from smcts.bench import brute_force_optimal, dice_coefficient, surrogate_ratio

net = generate_synthetic(SyntheticSpec(14, seed=7))
print(net.n_stores, "stores, mean degree", round(net.mean_degree(), 2))

M = 3
best, best_loss = brute_force_optimal(net, M)
print("exhaustive optimum", sorted(best), round(best_loss, 2))

# %%
# The naive surrogate ignores recapture. Its error bound comes from
# comparing both evaluators on random closure sets of up to M stores.
main, naive = MainEvaluator(), NaiveSurrogate()
report = calibrate_sigma(naive, main, net, 500, seed=0, max_depth=M)
print(report.to_dict())

# %%
config = SearchConfig(M=M, budget_iterations=4000, seed=1, ucb_variant="log",
                      exploration_C=0.1)
baseline = run_mcts(net, MainEvaluator(), config)
assisted = run_smcts(net, MainEvaluator(), NaiveSurrogate(), report.sigma_s, config)

for name, res in (("mcts", baseline), ("smcts", assisted)):
    print(name, sorted(res.best_closure_set), round(res.best_loss_main, 2),
          "fs", res.fs_calls, "fm", res.fm_calls)

# %%
# Most of the assisted run is served by the cheap evaluator.
print("surrogate ratio", round(surrogate_ratio(assisted), 3))
print("dice vs baseline", dice_coefficient(assisted.best_closure_set,
                                           baseline.best_closure_set))
