"""Command-line interface: ``smcts {ingest,synth,solve,compare,calibrate,oracle,sweep}``.

Results go to stdout as JSON, logs to stderr. Exit status is 0 on success,
1 for usage or configuration errors and 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .bench import SweepSpec, brute_force_optimal, dice_coefficient, run_sweep
from .evaluation import (MainEvaluator, NaiveSurrogate, NoisySurrogate,
                         calibrate_sigma)
from .ingest import (IOWA_COLUMNS, SyntheticSpec, filter_county, generate_synthetic,
                     load_column_map, read_transactions)
from .network import DEFAULT_GAMMA, DEFAULT_RADIUS_MILES, StoreNetwork
from .search import BudgetError, run_mcts, run_smcts
from .tree import SearchConfig, dump_tree

log = logging.getLogger("smcts")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _add_source(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--network", help="network JSON file")
    src.add_argument("--csv", help="transaction CSV to aggregate on the fly")
    p.add_argument("--column-map", help="JSON file mapping logical columns to CSV headers")
    p.add_argument("--iowa", action="store_true",
                   help="use the Iowa liquor sales export headers")
    p.add_argument("--county", help="restrict to one county (case-insensitive)")


def _add_search(p):
    p.add_argument("--remove", "-M", type=int, required=True, dest="M",
                   help="number of stores to close")
    p.add_argument("--budget", type=int, default=5000, help="iteration budget")
    p.add_argument("--seconds", type=float, default=None, help="wall-clock budget")
    p.add_argument("--C", type=float, default=0.05, dest="C", help="exploration constant")
    p.add_argument("--ucb", choices=["ratio", "log"], default="ratio")
    p.add_argument("--tie-break", choices=["random", "lowest"], default="random")
    p.add_argument("--surrogate", choices=["naive", "noisy"], default="naive")
    p.add_argument("--nrmse", type=float, default=0.1,
                   help="target normalised RMSE of the noisy surrogate")
    p.add_argument("--sigma", type=float, default=None,
                   help="surrogate error bound in loss units (default: calibrate)")
    p.add_argument("--calibration-samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)


def _column_map(args):
    if args.column_map:
        return load_column_map(args.column_map)
    if args.iowa:
        return IOWA_COLUMNS
    return None


def _load_network(args) -> StoreNetwork:
    if getattr(args, "network", None):
        net = StoreNetwork.load(args.network)
    else:
        net = read_transactions(args.csv, _column_map(args))
    if args.county:
        net = filter_county(net, args.county)
    return net


def _config(args) -> SearchConfig:
    return SearchConfig(
        M=args.M,
        exploration_C=args.C,
        budget_iterations=args.budget,
        budget_seconds=args.seconds,
        seed=args.seed,
        ucb_variant=args.ucb,
        tie_break=args.tie_break,
    )


def _surrogate(args):
    if args.surrogate == "noisy":
        return NoisySurrogate(args.nrmse, seed=args.seed)
    return NaiveSurrogate()


def _check_M(args, net):
    if args.M >= net.n_stores:
        raise ConfigError(f"--remove {args.M} must be smaller than the number of stores "
                          f"({net.n_stores})")


def _sigma(args, surrogate, main, net):
    if args.sigma is not None:
        if args.sigma < 0:
            raise ConfigError("--sigma must be >= 0")
        return args.sigma, None
    report = calibrate_sigma(surrogate, main, net, args.calibration_samples,
                             seed=args.seed, max_depth=args.M)
    log.info("calibrated sigma_s=%.6g (normalised %.4g)", report.sigma_s,
             report.sigma_normalized)
    return report.sigma_s, report


def cmd_ingest(args) -> int:
    net = read_transactions(args.csv, _column_map(args), radius_miles=args.radius,
                            recapture_gamma=args.gamma, year=args.year)
    if args.county:
        net = filter_county(net, args.county)
    net.save(args.out)
    _emit({"stores": net.n_stores, "total_sales": net.total_sales,
           "mean_degree": net.mean_degree(), "out": args.out})
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(n_stores=args.stores, seed=args.seed, cluster_count=args.clusters,
                         radius_miles=args.radius, recapture_gamma=args.gamma)
    net = generate_synthetic(spec)
    net.save(args.out)
    _emit({"stores": net.n_stores, "total_sales": net.total_sales,
           "mean_degree": net.mean_degree(), "out": args.out})
    return EXIT_OK


def cmd_solve(args) -> int:
    net = _load_network(args)
    _check_M(args, net)
    config = _config(args)
    main = MainEvaluator()
    if args.no_surrogate:
        result = run_mcts(net, main, config)
    else:
        surrogate = _surrogate(args)
        sigma, _ = _sigma(args, surrogate, main, net)
        result = run_smcts(net, main, surrogate, sigma, config)
    if args.dump_tree:
        with open(args.dump_tree, "w", encoding="utf-8") as fh:
            dump_tree(result.root, fh)
    _emit(result.to_dict())
    return EXIT_OK


def cmd_compare(args) -> int:
    net = _load_network(args)
    _check_M(args, net)
    config = _config(args)
    main = MainEvaluator()
    surrogate = _surrogate(args)
    sigma, _ = _sigma(args, surrogate, main, net)
    assisted = run_smcts(net, main, surrogate, sigma, config)
    baseline = run_mcts(net, main, config)
    _emit({
        "smcts": assisted.to_dict(),
        "mcts": baseline.to_dict(),
        "sigma_s": sigma,
        "dice": dice_coefficient(assisted.best_closure_set, baseline.best_closure_set),
    })
    return EXIT_OK


def cmd_calibrate(args) -> int:
    net = _load_network(args)
    surrogate = _surrogate(args)
    report = calibrate_sigma(surrogate, MainEvaluator(), net, args.samples, seed=args.seed,
                             max_depth=args.max_depth)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_oracle(args) -> int:
    net = _load_network(args)
    closed, loss = brute_force_optimal(net, args.M)
    _emit({"closed": sorted(closed), "loss": loss})
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = SweepSpec.load(args.spec)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed sweep spec {args.spec}: {exc}") from exc
    records, failures = run_sweep(spec, out_dir=args.out, jobs=args.jobs)
    _emit({"runs": len(records), "failures": len(failures), "out": args.out})
    if not records:
        log.error("every sweep cell failed; see %s", os.path.join(args.out, "failures.csv"))
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smcts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="aggregate a transaction CSV into a network JSON")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column-map")
    p.add_argument("--iowa", action="store_true")
    p.add_argument("--county")
    p.add_argument("--year", type=int)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS_MILES)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a seeded synthetic network JSON")
    p.add_argument("--stores", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS_MILES)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="choose stores to close with SMCTS (or plain MCTS)")
    _add_source(p)
    _add_search(p)
    p.add_argument("--no-surrogate", action="store_true", help="plain MCTS with F_m only")
    p.add_argument("--dump-tree", help="write the visited tree as JSON lines")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run SMCTS and the MCTS baseline on one instance")
    _add_source(p)
    _add_search(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="estimate the surrogate error bound")
    _add_source(p)
    p.add_argument("--surrogate", choices=["naive", "noisy"], default="naive")
    p.add_argument("--nrmse", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("oracle", help="exhaustive optimum (small instances)")
    _add_source(p)
    p.add_argument("--remove", "-M", type=int, required=True, dest="M")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="run an experiment grid and write CSVs")
    p.add_argument("--spec", required=True, help="sweep spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"smcts: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetError, RuntimeError) as exc:
        print(f"smcts: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
