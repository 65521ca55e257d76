"""Surrogate-assisted Monte Carlo Tree Search for store-closure problems."""

from .evaluation import (CalibrationReport, Evaluator, EvaluatorKind,
                         MainEvaluator, NaiveSurrogate, NoisySurrogate,
                         calibrate_sigma, naive_surrogate, noisy_surrogate,
                         sample_states)
from .ingest import (SyntheticSpec, aggregate_transactions, filter_county,
                     generate_synthetic)
from .network import (ClosureState, StoreNetwork, StoreRecord, haversine_miles,
                      neighbors_within, store_sales, total_loss)
from .search import (SearchResult, equally_visited, extract_solution,
                     reevaluate_children, run_mcts, run_smcts)
from .tree import (SearchConfig, SearchNode, TieBreak, UcbVariant, backup,
                   expand, select_child, ucb1_score)

__version__ = "0.1.0"
