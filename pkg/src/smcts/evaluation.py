"""Main and surrogate loss evaluators plus surrogate error calibration."""

from __future__ import annotations

import enum
import functools
import json
import math
import random
import threading
from dataclasses import asdict, dataclass

import numpy as np

from .network import StoreNetwork, total_loss

# fixed so every noisy surrogate on a network shares one normaliser
REFERENCE_SEED = 20240101
REFERENCE_SAMPLES = 1000


class EvaluatorKind(enum.Enum):
    MAIN = "main"
    SURROGATE = "surrogate"


class Evaluator:
    """Loss estimator for a closure set, with a thread-safe call counter.

    Subclasses implement :meth:`loss`; callers go through :meth:`evaluate`
    so every estimate is counted.
    """

    kind = EvaluatorKind.SURROGATE
    name = "evaluator"

    def __init__(self, sigma_s: float = 0.0):
        if sigma_s < 0:
            raise ValueError("sigma_s must be >= 0")
        self.sigma_s = float(sigma_s)
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return self._calls

    def reset_count(self) -> None:
        with self._lock:
            self._calls = 0

    def evaluate(self, network: StoreNetwork, state) -> float:
        closed = network.validate(state)
        with self._lock:
            self._calls += 1
        return self.loss(network, closed)

    __call__ = evaluate

    def loss(self, network: StoreNetwork, closed: frozenset) -> float:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(sigma_s={self.sigma_s:g})"


class MainEvaluator(Evaluator):
    """The exact recapture-model loss; treated as ground truth."""

    kind = EvaluatorKind.MAIN
    name = "main"

    def loss(self, network, closed):
        return total_loss(network, closed)


def naive_surrogate(network: StoreNetwork, state) -> float:
    """Loss ignoring recapture: the summed base sales of the closed stores."""
    closed = network.validate(state)
    return math.fsum(network._sales[k] for k in closed)


class NaiveSurrogate(Evaluator):
    name = "naive"

    def loss(self, network, closed):
        return math.fsum(network._sales[k] for k in closed)


def sample_states(network: StoreNetwork, size: int, seed=0, max_depth=None) -> list:
    """Random closure sets: size uniform on 1..max_depth, then a uniform subset.

    ``max_depth`` defaults to ``N - 1``.
    """
    n = network.n_stores
    if n < 2:
        raise ValueError("need at least two stores to sample closure states")
    top = n - 1 if max_depth is None else int(max_depth)
    if not 1 <= top <= n - 1:
        raise ValueError(f"max_depth must lie in 1..{n - 1}")
    rng = np.random.default_rng(seed)
    ids = np.array(network.store_ids)
    out = []
    for _ in range(size):
        depth = int(rng.integers(1, top + 1))
        out.append(frozenset(ids[rng.choice(n, size=depth, replace=False)].tolist()))
    return out


@functools.lru_cache(maxsize=64)
def reference_losses(network: StoreNetwork, sample_size: int = REFERENCE_SAMPLES,
                     seed: int = REFERENCE_SEED) -> tuple:
    """``(max, rms)`` of the true loss over a fixed random sample of closure states."""
    losses = np.array([total_loss(network, s) for s in sample_states(network, sample_size, seed)])
    return float(losses.max()), float(np.sqrt(np.mean(losses ** 2)))


def reference_normalizer(network: StoreNetwork) -> float:
    """Largest loss over the reference sample; the NRMSE denominator."""
    return reference_losses(network)[0]


def relative_noise_scale(network: StoreNetwork, target_nrmse: float) -> float:
    """Relative noise level giving ``target_nrmse`` over the reference sample.

    With noise ``loss * k * z`` the RMSE is ``k * rms(loss)``, so
    ``k = target * max(loss) / rms(loss)``.
    """
    peak, rms = reference_losses(network)
    if rms == 0:
        return 0.0
    return target_nrmse * peak / rms


def _unit_noise(seed, closed: frozenset) -> float:
    # string seeding hashes with sha512, so this is stable across processes
    key = f"{seed}|{','.join(map(str, sorted(closed)))}"
    return random.Random(key).gauss(0.0, 1.0)


def noisy_surrogate(network: StoreNetwork, state, target_nrmse: float, seed=0) -> float:
    """Main loss with deterministic Gaussian noise proportional to the loss.

    The noise level is set so the normalised RMSE over the reference sample
    is ``target_nrmse``; the draw depends only on ``seed`` and the closed set.
    """
    if target_nrmse < 0:
        raise ValueError("target_nrmse must be >= 0")
    closed = network.validate(state)
    exact = total_loss(network, closed)
    if target_nrmse == 0:
        return exact
    k = relative_noise_scale(network, target_nrmse)
    return exact * (1.0 + k * _unit_noise(seed, closed))


class NoisySurrogate(Evaluator):
    """Synthetic surrogate whose normalised RMSE is dialled by ``target_nrmse``."""

    name = "noisy"

    def __init__(self, target_nrmse: float, seed=0, sigma_s: float = 0.0):
        if target_nrmse < 0:
            raise ValueError("target_nrmse must be >= 0")
        super().__init__(sigma_s)
        self.target_nrmse = float(target_nrmse)
        self.seed = seed

    def loss(self, network, closed):
        exact = total_loss(network, closed)
        if self.target_nrmse == 0:
            return exact
        k = relative_noise_scale(network, self.target_nrmse)
        return exact * (1.0 + k * _unit_noise(self.seed, closed))

    def __repr__(self):
        return f"NoisySurrogate(target_nrmse={self.target_nrmse:g}, seed={self.seed})"


@dataclass(frozen=True)
class CalibrationReport:
    """RMSEs of both evaluators against ground truth and the excess error ``sigma_s``.

    ``sigma_s`` and both RMSEs are in loss units; divide by ``normalizer``
    for the normalised values.
    """

    rmse_main: float
    rmse_surrogate: float
    sigma_s: float
    sample_count: int
    normalizer: float

    @property
    def nrmse_main(self) -> float:
        return self.rmse_main / self.normalizer if self.normalizer else 0.0

    @property
    def nrmse_surrogate(self) -> float:
        return self.rmse_surrogate / self.normalizer if self.normalizer else 0.0

    @property
    def sigma_normalized(self) -> float:
        return self.sigma_s / self.normalizer if self.normalizer else 0.0

    @classmethod
    def from_rmse(cls, rmse_surrogate: float, rmse_main: float,
                  sample_count: int = 1, normalizer: float = 1.0) -> "CalibrationReport":
        return cls(rmse_main, rmse_surrogate, max(0.0, rmse_surrogate - rmse_main),
                   sample_count, normalizer)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _rmse(estimates, truth) -> float:
    err = np.asarray(estimates, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(err ** 2)))


def calibrate_sigma(surrogate: Evaluator, main: Evaluator, network: StoreNetwork,
                    sample_size: int = 500, seed=0, states=None,
                    max_depth=None) -> CalibrationReport:
    """Estimate the surrogate's error bound as the RMSE gap to the main evaluator.

    Ground truth is the recapture-model loss. States are drawn with
    :func:`sample_states` (closure sizes up to ``max_depth``) unless given
    explicitly. A search closing ``M`` stores only scores sets of size at
    most ``M``; pass ``max_depth=M`` to measure the error where it matters.
    """
    if states is None:
        if sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        states = sample_states(network, sample_size, seed, max_depth)
    else:
        states = [network.validate(s) for s in states]
        if not states:
            raise ValueError("need at least one calibration state")
    truth = [total_loss(network, s) for s in states]
    rmse_m = _rmse([main.evaluate(network, s) for s in states], truth)
    rmse_s = _rmse([surrogate.evaluate(network, s) for s in states], truth)
    return CalibrationReport.from_rmse(rmse_s, rmse_m, len(states), max(truth))
