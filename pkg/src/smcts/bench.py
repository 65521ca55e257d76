"""Exhaustive oracle, comparison metrics and experiment sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .evaluation import (MainEvaluator, NaiveSurrogate, NoisySurrogate,
                         calibrate_sigma)
from .ingest import SyntheticSpec, filter_county, generate_synthetic, read_transactions
from .network import StoreNetwork, total_loss
from .search import SearchResult, run_mcts, run_smcts
from .tree import SearchConfig

log = logging.getLogger(__name__)

MAX_ENUMERATION = 10 ** 6

RUNS_HEADER = ["instance", "M", "nrmse", "seed", "ratio", "dice", "loss_smcts",
               "loss_mcts", "reevals", "secs"]
SUMMARY_HEADER = ["M", "nrmse", "runs", "ratio", "dice", "loss_smcts", "loss_mcts",
                  "reevals", "reeval_invocations", "secs", "secs_mcts"]
FAILURES_HEADER = ["instance", "M", "nrmse", "seed", "error"]


def brute_force_optimal(network: StoreNetwork, M: int, F_m=None):
    """Minimum-loss closure set of size ``M`` by full enumeration.

    Ties go to the lexicographically smallest sorted id tuple. Refuses more
    than a million subsets.
    """
    ids = sorted(network.store_ids)
    if not 0 <= M <= len(ids):
        raise ValueError(f"M={M} outside 0..{len(ids)}")
    count = math.comb(len(ids), M)
    if count > MAX_ENUMERATION:
        raise ValueError(f"C({len(ids)}, {M}) = {count} subsets exceeds the enumeration "
                         f"guard of {MAX_ENUMERATION}; use run_mcts/run_smcts instead")
    score = F_m.evaluate if F_m is not None else total_loss
    best, best_loss = None, math.inf
    for combo in itertools.combinations(ids, M):
        loss = score(network, frozenset(combo))
        if loss < best_loss:
            best, best_loss = combo, loss
    return frozenset(best), float(best_loss)


def dice_coefficient(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def surrogate_ratio(result: SearchResult) -> float:
    """Share of all evaluator calls answered by the surrogate."""
    total = result.fs_calls + result.fm_calls
    if total <= 0:
        raise ValueError("search made no evaluator calls")
    return result.fs_calls / total


@dataclass
class InstanceSpec:
    """Where a sweep instance comes from: a synthetic spec, a network JSON or a CSV."""

    name: str
    synthetic: Optional[SyntheticSpec] = None
    network_path: Optional[str] = None
    csv_path: Optional[str] = None
    county: Optional[str] = None

    def __post_init__(self):
        sources = [self.synthetic, self.network_path, self.csv_path]
        if sum(s is not None for s in sources) != 1:
            raise ValueError(f"instance {self.name!r}: give exactly one of "
                             "'synthetic', 'network' or 'csv'")

    def load(self) -> StoreNetwork:
        if self.synthetic is not None:
            net = generate_synthetic(self.synthetic)
        elif self.network_path is not None:
            net = StoreNetwork.load(self.network_path)
        else:
            net = read_transactions(self.csv_path)
        if self.county:
            net = filter_county(net, self.county)
        return net


@dataclass
class SweepSpec:
    """Grid of runs. An ``nrmse`` of None selects the naive surrogate."""

    instances: list
    M_values: list
    seeds: list
    nrmse_values: list = field(default_factory=lambda: [None])
    search: dict = field(default_factory=dict)
    calibration_samples: int = 500

    def __post_init__(self):
        for name in ("instances", "M_values", "seeds", "nrmse_values"):
            if not getattr(self, name):
                raise ValueError(f"sweep field {name!r} must be a non-empty list")
        for m in self.M_values:
            if not isinstance(m, int) or m < 1:
                raise ValueError(f"sweep field 'M_values' has invalid entry {m!r}")
        for x in self.nrmse_values:
            if x is not None and not (isinstance(x, (int, float)) and x >= 0):
                raise ValueError(f"sweep field 'nrmse_values' has invalid entry {x!r}")
        unknown = set(self.search) - {f.name for f in fields(SearchConfig)} - {"M"}
        if unknown:
            raise ValueError(f"sweep field 'search' has unknown keys {sorted(unknown)}")
        if self.calibration_samples < 1:
            raise ValueError("sweep field 'calibration_samples' must be >= 1")

    @classmethod
    def from_dict(cls, d) -> "SweepSpec":
        if not isinstance(d, dict):
            raise ValueError("sweep spec must be a JSON object")
        for key in ("instances", "M_values", "seeds"):
            if key not in d:
                raise ValueError(f"sweep spec is missing field {key!r}")
        instances = []
        for i, inst in enumerate(d["instances"]):
            if not isinstance(inst, dict):
                raise ValueError(f"sweep field 'instances[{i}]' must be an object")
            try:
                syn = inst.get("synthetic")
                instances.append(InstanceSpec(
                    name=str(inst.get("name", f"instance-{i}")),
                    synthetic=SyntheticSpec.from_dict(syn) if syn is not None else None,
                    network_path=inst.get("network"),
                    csv_path=inst.get("csv"),
                    county=inst.get("county"),
                ))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"sweep field 'instances[{i}]': {exc}") from exc
        return cls(
            instances=instances,
            M_values=list(d["M_values"]),
            seeds=list(d["seeds"]),
            nrmse_values=list(d.get("nrmse_values", [None])),
            search=dict(d.get("search", {})),
            calibration_samples=int(d.get("calibration_samples", 500)),
        )

    @classmethod
    def load(cls, path) -> "SweepSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SweepRecord:
    instance: str
    M: int
    nrmse: Optional[float]
    seed: int
    surrogate_ratio: float
    dice_vs_baseline: float
    loss_smcts: float
    loss_mcts: float
    reevals: int
    reeval_invocations: int
    secs_smcts: float
    secs_mcts: float

    def csv_row(self) -> list:
        return [self.instance, self.M, "" if self.nrmse is None else self.nrmse, self.seed,
                self.surrogate_ratio, self.dice_vs_baseline, self.loss_smcts,
                self.loss_mcts, self.reevals, self.secs_smcts]


def run_cell(network: StoreNetwork, instance: str, M: int, nrmse, seed: int,
             search: Optional[dict] = None, calibration_samples: int = 500) -> SweepRecord:
    """One SMCTS run against its MCTS baseline on the same seed."""
    main = MainEvaluator()
    surrogate = NaiveSurrogate() if nrmse is None else NoisySurrogate(nrmse, seed=seed)
    report = calibrate_sigma(surrogate, main, network, calibration_samples, seed=seed,
                             max_depth=M)
    surrogate.sigma_s = report.sigma_s
    opts = dict(search or {})
    opts.pop("M", None)
    config = SearchConfig(M=M, **{**opts, "seed": seed})
    smcts = run_smcts(network, main, surrogate, report.sigma_s, config)
    mcts = run_mcts(network, main, config)
    return SweepRecord(
        instance=instance,
        M=M,
        nrmse=nrmse,
        seed=seed,
        surrogate_ratio=surrogate_ratio(smcts),
        dice_vs_baseline=dice_coefficient(smcts.best_closure_set, mcts.best_closure_set),
        loss_smcts=smcts.best_loss_main,
        loss_mcts=mcts.best_loss_main,
        reevals=smcts.reevaluated_children,
        reeval_invocations=smcts.reevaluation_invocations,
        secs_smcts=smcts.wall_seconds,
        secs_mcts=mcts.wall_seconds,
    )


def _cell_job(args):
    inst, M, nrmse, seed, search, samples = args
    try:
        return run_cell(inst.load(), inst.name, M, nrmse, seed, search, samples), None
    except Exception as exc:  # recorded, the sweep carries on
        return None, f"{type(exc).__name__}: {exc}"


def summarize(records) -> list:
    """Mean metrics per (M, nrmse) cell, in first-seen order."""
    cells = {}
    for r in records:
        cells.setdefault((r.M, r.nrmse), []).append(r)
    rows = []
    for (M, nrmse), rs in cells.items():
        rows.append({
            "M": M,
            "nrmse": nrmse,
            "runs": len(rs),
            "ratio": statistics.fmean(r.surrogate_ratio for r in rs),
            "dice": statistics.fmean(r.dice_vs_baseline for r in rs),
            "loss_smcts": statistics.fmean(r.loss_smcts for r in rs),
            "loss_mcts": statistics.fmean(r.loss_mcts for r in rs),
            "reevals": statistics.fmean(r.reevals for r in rs),
            "reeval_invocations": statistics.fmean(r.reeval_invocations for r in rs),
            "secs": statistics.fmean(r.secs_smcts for r in rs),
            "secs_mcts": statistics.fmean(r.secs_mcts for r in rs),
        })
    return rows


def write_csvs(records, failures, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RUNS_HEADER)
        for r in records:
            w.writerow(r.csv_row())
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for row in summarize(records):
            row = dict(row, nrmse="" if row["nrmse"] is None else row["nrmse"])
            w.writerow([row[k] for k in SUMMARY_HEADER])
    if failures:
        with open(out / "failures.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(FAILURES_HEADER)
            w.writerows(failures)


def run_sweep(spec: SweepSpec, out_dir=None, jobs: int = 1):
    """Run every (instance, M, nrmse, seed) cell; SMCTS and MCTS per cell.

    Returns ``(records, failures)`` in grid order. Failed cells are listed in
    ``failures`` as ``[instance, M, nrmse, seed, error]`` and skipped. With
    ``out_dir`` the runs, summary and (if any) failures CSVs are written.
    """
    jobs_args = [(inst, M, nrmse, seed, spec.search, spec.calibration_samples)
                 for inst in spec.instances
                 for M in spec.M_values
                 for nrmse in spec.nrmse_values
                 for seed in spec.seeds]
    t0 = time.perf_counter()
    if jobs is None or jobs <= 0:
        jobs = os.cpu_count() or 1
    if jobs == 1 or len(jobs_args) == 1:
        outcomes = [_cell_job(a) for a in jobs_args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_cell_job, jobs_args))
    records, failures = [], []
    for args, (rec, err) in zip(jobs_args, outcomes):
        if rec is not None:
            records.append(rec)
        else:
            inst, M, nrmse, seed = args[:4]
            log.warning("cell %s M=%s nrmse=%s seed=%s failed: %s", inst.name, M, nrmse, seed, err)
            failures.append([inst.name, M, "" if nrmse is None else nrmse, seed, err])
    log.info("sweep of %d cells finished in %.1fs", len(jobs_args), time.perf_counter() - t0)
    if out_dir is not None:
        write_csvs(records, failures, out_dir)
    return records, failures


def record_dicts(records) -> list:
    return [asdict(r) for r in records]
