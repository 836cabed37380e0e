"""Federated simulation loop with pluggable robust aggregation.

Each round samples a subset of devices uniformly without replacement,
broadcasts the model, runs a faithful local update on every selected
device (on whatever data that device holds, poisoned or not), then
aggregates the returned models through a secure-average oracle. The
aggregators are the weighted mean, the smoothed-Weiszfeld geometric
median ("rfa"), median-of-means (group means through the oracle, then a
server-side geometric median of the group means), and a single-gradient-
step baseline ("sgd_step"). Metrics are always evaluated on uncorrupted
pooled data.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .corruption import CorruptionSpec, omniscient_updates, poison_adaptive, poison_static, realize
from .geomed import WeightedPointSet, smoothed_weiszfeld
from .secure_avg import SecureAverageOracle

TRACE_CSV_COLUMNS = (
    "round",
    "train_loss",
    "test_loss",
    "dist_to_opt_sq",
    "oracle_calls",
    "corrupted_selected",
)

DIVERGENCE_LOSS = 1e12

AGGREGATOR_KINDS = ("mean", "rfa", "median_of_means", "sgd_step")


@dataclass(frozen=True)
class LrSchedule:
    """Piecewise-constant schedule gamma_t = gamma0 * decay^(t // decay_every)."""

    gamma0: float
    decay: float = 1.0
    decay_every: int = 1

    def __post_init__(self) -> None:
        if self.gamma0 < 0.0 or self.decay <= 0.0 or self.decay_every < 1:
            raise ValueError("invalid learning-rate schedule")

    def gamma_at(self, t: int) -> float:
        return self.gamma0 * self.decay ** (t // self.decay_every)


@dataclass(frozen=True)
class LocalSGD:
    """Minibatch SGD pass: ceil(n_k * epochs / batch_size) steps."""

    batch_size: int
    epochs: int = 1

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass(frozen=True)
class TailAveragedSGD:
    """Single-sample SGD for ``steps`` steps, averaging the last half.

    ``lr`` None means use 1 / (2 * feature_bound^2) for the task at hand.
    """

    steps: int
    lr: float | None = None

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ValueError("steps must be at least 2")


@dataclass(frozen=True)
class AggregatorSpec:
    """Which aggregator a round uses and its knobs.

    ``budget`` and ``rel_tol`` control the smoothed Weiszfeld solve for
    kind "rfa" (and the server-side solve for "median_of_means", whose
    oracle cost is ``groups`` calls regardless). kind "sgd_step" forces a
    single local minibatch step and aggregates by the weighted mean.
    """

    kind: str = "mean"
    nu: float = 1e-6
    budget: int = 3
    rel_tol: float = 1e-6
    groups: int = 1

    def __post_init__(self) -> None:
        if self.kind not in AGGREGATOR_KINDS:
            raise ValueError(f"aggregator kind must be one of {AGGREGATOR_KINDS}")
        if self.nu <= 0.0 or self.budget < 1 or self.rel_tol < 0.0 or self.groups < 1:
            raise ValueError("invalid aggregator parameters")


@dataclass(frozen=True)
class RoundConfig:
    """Everything one federated round needs besides the data."""

    devices_per_round: int
    local: LocalSGD | TailAveragedSGD
    lr: LrSchedule
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)
    halt_on_divergence: bool = True

    def __post_init__(self) -> None:
        if self.devices_per_round < 1:
            raise ValueError("devices_per_round must be positive")


@dataclass
class DeviceState:
    """One simulated device: its shard, population weight and private rng."""

    id: int
    features: np.ndarray
    labels: np.ndarray
    alpha: float
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class RoundTrace:
    """Metrics recorded after a round's aggregation, on uncorrupted data."""

    round: int
    train_loss: float
    test_loss: float
    dist_to_opt_sq: float
    oracle_calls: int
    corrupted_selected: int
    selected: tuple[int, ...]
    wall_time: float

    def csv_row(self) -> list:
        return [
            self.round,
            self.train_loss,
            self.test_loss,
            self.dist_to_opt_sq,
            self.oracle_calls,
            self.corrupted_selected,
        ]


def sample_devices(total: int, per_round: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly sample ``per_round`` distinct device ids; sorted for stable order."""
    if per_round < 1 or per_round > total:
        raise ValueError("per_round must lie in [1, total]")
    return np.sort(rng.choice(total, size=per_round, replace=False))


def renormalized_weights(alphas: np.ndarray, selected: np.ndarray) -> np.ndarray:
    """Population weights of the selected devices, renormalized to sum to one."""
    sub = np.asarray(alphas, dtype=float)[np.asarray(selected, dtype=int)]
    return sub / sub.sum()


def local_update_sgd(
    task,
    device: DeviceState,
    w0: np.ndarray,
    gamma: float,
    batch_size: int,
    epochs: int = 1,
) -> np.ndarray:
    """Minibatch SGD from w0 on the device's shard.

    Runs ceil(n_k * epochs / batch_size) steps; every minibatch is a fresh
    uniform subset (without replacement) of the shard drawn from the
    device's own rng. gamma = 0 returns w0 unchanged.
    """
    if batch_size < 1 or batch_size > device.n:
        raise ValueError("batch_size must lie in [1, n_k]")
    if epochs < 1:
        raise ValueError("epochs must be positive")
    steps = math.ceil(device.n * epochs / batch_size)
    w = np.array(w0, dtype=float, copy=True)
    for _ in range(steps):
        idx = device.rng.choice(device.n, size=batch_size, replace=False)
        w -= gamma * task.gradient(w, device.features[idx], device.labels[idx])
    return w


def local_update_tail_avg_sgd(
    task,
    device: DeviceState,
    w0: np.ndarray,
    gamma: float,
    steps: int,
) -> np.ndarray:
    """Single-sample SGD, returning the average of the last half of iterates.

    Performs ``steps`` steps on samples drawn i.i.d. (with replacement)
    from the device's shard, then averages iterates ceil(steps/2)+1
    through steps.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    idx = device.rng.integers(0, device.n, size=steps)
    w = np.array(w0, dtype=float, copy=True)
    tail_start = (steps + 1) // 2 + 1
    acc = np.zeros_like(w)
    count = 0
    feats = device.features
    labs = device.labels
    for i in range(steps):
        j = idx[i]
        w -= gamma * task.gradient(w, feats[j : j + 1], labs[j : j + 1])
        if i + 1 >= tail_start:
            acc += w
            count += 1
    return acc / count


def aggregate(
    updates: np.ndarray,
    weights: np.ndarray,
    spec: AggregatorSpec,
    oracle: SecureAverageOracle,
) -> np.ndarray:
    """Combine per-device models according to the aggregator spec.

    Oracle cost: "mean" and "sgd_step" one call, "rfa" one call for the
    mean initializer plus one per Weiszfeld step (at most budget + 1
    total), "median_of_means" exactly ``groups`` calls with the geometric
    median of the group means solved server side.
    """
    updates = np.asarray(updates, dtype=float)
    weights = np.asarray(weights, dtype=float).ravel()
    if spec.kind in ("mean", "sgd_step"):
        return oracle.average(updates, weights)
    if spec.kind == "rfa":
        result = smoothed_weiszfeld(
            WeightedPointSet(updates, weights),
            nu=spec.nu,
            budget=spec.budget,
            rel_tol=spec.rel_tol,
            oracle=oracle,
        )
        return result.z
    # median_of_means
    m = updates.shape[0]
    if spec.groups > m:
        raise ValueError("more groups than devices in the round")
    chunks = np.array_split(np.arange(m), spec.groups)
    means = []
    group_weights = []
    for chunk in chunks:
        means.append(oracle.average(updates[chunk], weights[chunk]))
        group_weights.append(weights[chunk].sum())
    result = smoothed_weiszfeld(
        WeightedPointSet(np.asarray(means), np.asarray(group_weights)),
        nu=spec.nu,
        budget=max(spec.budget, 50),
        rel_tol=min(spec.rel_tol, 1e-9),
        oracle=None,
    )
    return result.z


def _build_devices(partition, seed: int) -> list[DeviceState]:
    children = np.random.SeedSequence([int(seed), 0xFED]).spawn(partition.devices)
    return [
        DeviceState(
            id=k,
            features=partition.device_features[k],
            labels=partition.device_labels[k],
            alpha=float(partition.alphas[k]),
            rng=np.random.default_rng(children[k]),
        )
        for k in range(partition.devices)
    ]


def _tail_avg_lr(local: TailAveragedSGD, task) -> float:
    if local.lr is not None:
        return local.lr
    return 1.0 / (2.0 * task.feature_bound**2)


def run_federated(
    task,
    partition,
    corruption: CorruptionSpec,
    config: RoundConfig,
    rounds: int,
    seed: int = 0,
    oracle: SecureAverageOracle | None = None,
) -> list[RoundTrace]:
    """Simulate the federated loop from w = 0 for the given number of rounds.

    Static data poisoning is applied to the corrupted devices' shards once
    up front; adaptive poisoning relabels their original shards against
    each round's broadcast model; the omniscient attack intercepts the
    aggregation itself. Train/test losses and the squared distance to the
    task's pooled optimum are recorded after every round on uncorrupted
    data. If a round's train loss exceeds 1e12 or turns non-finite the run
    is marked diverged by its trace and, with ``halt_on_divergence``,
    stops early. rounds = 0 returns an empty trace.
    """
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if config.devices_per_round > partition.devices:
        raise ValueError("devices_per_round exceeds the population")
    oracle = oracle if oracle is not None else SecureAverageOracle("plain")
    server_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E7]))
    devices = _build_devices(partition, seed)
    spec = corruption
    if spec.realized_set is None:
        spec = realize(spec, partition.alphas, fallback_seed=seed)
    corrupted_ids = set(spec.realized_set)

    if spec.kind == "static_data":
        for k in corrupted_ids:
            feats, labs = poison_static(devices[k].features, devices[k].labels)
            devices[k].features = feats
            devices[k].labels = labs
    originals = {k: (devices[k].features, devices[k].labels) for k in corrupted_ids}

    counts = np.asarray(partition.counts, dtype=float)
    w = np.zeros(task.train_features.shape[1])
    traces: list[RoundTrace] = []
    for t in range(rounds):
        tic = time.perf_counter()
        selected = sample_devices(partition.devices, config.devices_per_round, server_rng)
        round_weights = renormalized_weights(counts, selected)
        gamma = config.lr.gamma_at(t)

        if spec.kind == "adaptive_data":
            for k in corrupted_ids:
                if k in set(int(s) for s in selected):
                    feats, labs = poison_adaptive(*originals[k], w)
                    devices[k].features = feats
                    devices[k].labels = labs

        updates = []
        for k in selected:
            dev = devices[int(k)]
            if config.aggregator.kind == "sgd_step":
                if not isinstance(config.local, LocalSGD):
                    raise ValueError("sgd_step requires a LocalSGD spec for its batch size")
                idx = dev.rng.choice(dev.n, size=config.local.batch_size, replace=False)
                updates.append(w - gamma * task.gradient(w, dev.features[idx], dev.labels[idx]))
            elif isinstance(config.local, LocalSGD):
                updates.append(
                    local_update_sgd(
                        task, dev, w, gamma, config.local.batch_size, config.local.epochs
                    )
                )
            else:
                updates.append(
                    local_update_tail_avg_sgd(
                        task, dev, w, _tail_avg_lr(config.local, task), config.local.steps
                    )
                )
        updates = np.asarray(updates)

        corrupted_mask = np.array([int(k) in corrupted_ids for k in selected])
        if spec.kind == "omniscient" and corrupted_mask.any():
            updates = omniscient_updates(updates, round_weights, corrupted_mask)

        calls_before = oracle.call_count
        w = aggregate(updates, round_weights, config.aggregator, oracle)
        round_calls = oracle.call_count - calls_before

        train_loss = task.loss(w, task.train_features, task.train_labels)
        test_loss = task.loss(w, task.test_features, task.test_labels)
        dist_sq = float(np.sum((w - task.optimum) ** 2))
        traces.append(
            RoundTrace(
                round=t,
                train_loss=train_loss,
                test_loss=test_loss,
                dist_to_opt_sq=dist_sq,
                oracle_calls=round_calls,
                corrupted_selected=int(corrupted_mask.sum()),
                selected=tuple(int(k) for k in selected),
                wall_time=time.perf_counter() - tic,
            )
        )
        if not math.isfinite(train_loss) or train_loss > DIVERGENCE_LOSS:
            if config.halt_on_divergence:
                break
    return traces


def trace_diverged(traces: list[RoundTrace]) -> bool:
    """A run is diverged when its last recorded loss is non-finite or huge."""
    if not traces:
        return False
    last = traces[-1].train_loss
    return not math.isfinite(last) or last > DIVERGENCE_LOSS


def steps_at_round(base_steps: int, t: int, schedule: str = "doubling") -> int:
    """Local step count for round t: base * 2^t when doubling, else base."""
    if schedule not in ("doubling", "constant"):
        raise ValueError("schedule must be 'doubling' or 'constant'")
    if base_steps < 2:
        raise ValueError("base_steps must be at least 2")
    return base_steps * (2**t) if schedule == "doubling" else base_steps


def run_rfa_doubling(
    task,
    partition,
    corruption: CorruptionSpec,
    devices_per_round: int,
    base_steps: int,
    rounds: int,
    q: float = 0.1,
    seed: int = 0,
    schedule: str = "doubling",
    nu: float = 1e-6,
    budget: int = 200,
    rel_tol: float = 1e-13,
    oracle: SecureAverageOracle | None = None,
) -> list[RoundTrace]:
    """Geometric-median aggregation with tail-averaged local SGD, steps doubling.

    Round t runs ``base_steps * 2^t`` single-sample SGD steps per selected
    device (constant ``base_steps`` when schedule="constant") at the fixed
    rate 1 / (2 * feature_bound^2), then aggregates with a tight-tolerance
    geometric-median solve. ``q`` is the sampling-failure budget used when
    sizing devices_per_round and base_steps; it is validated but does not
    enter the dynamics.
    """
    if not 0.0 < q < 0.5:
        raise ValueError("q must lie in (0, 0.5)")
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    oracle = oracle if oracle is not None else SecureAverageOracle("plain")
    server_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E7]))
    devices = _build_devices(partition, seed)
    spec = corruption
    if spec.realized_set is None:
        spec = realize(spec, partition.alphas, fallback_seed=seed)
    corrupted_ids = set(spec.realized_set)
    if spec.kind == "static_data":
        for k in corrupted_ids:
            feats, labs = poison_static(devices[k].features, devices[k].labels)
            devices[k].features = feats
            devices[k].labels = labs
    originals = {k: (devices[k].features, devices[k].labels) for k in corrupted_ids}

    gamma = 1.0 / (2.0 * task.feature_bound**2)
    agg = AggregatorSpec(kind="rfa", nu=nu, budget=budget, rel_tol=rel_tol)
    counts = np.asarray(partition.counts, dtype=float)
    w = np.zeros(task.train_features.shape[1])
    traces: list[RoundTrace] = []
    for t in range(rounds):
        tic = time.perf_counter()
        steps = steps_at_round(base_steps, t, schedule)
        selected = sample_devices(partition.devices, devices_per_round, server_rng)
        round_weights = renormalized_weights(counts, selected)

        if spec.kind == "adaptive_data":
            for k in corrupted_ids:
                if k in set(int(s) for s in selected):
                    feats, labs = poison_adaptive(*originals[k], w)
                    devices[k].features = feats
                    devices[k].labels = labs

        updates = np.asarray(
            [
                local_update_tail_avg_sgd(task, devices[int(k)], w, gamma, steps)
                for k in selected
            ]
        )
        corrupted_mask = np.array([int(k) in corrupted_ids for k in selected])
        if spec.kind == "omniscient" and corrupted_mask.any():
            updates = omniscient_updates(updates, round_weights, corrupted_mask)

        calls_before = oracle.call_count
        w = aggregate(updates, round_weights, agg, oracle)
        round_calls = oracle.call_count - calls_before

        train_loss = task.loss(w, task.train_features, task.train_labels)
        test_loss = task.loss(w, task.test_features, task.test_labels)
        traces.append(
            RoundTrace(
                round=t,
                train_loss=train_loss,
                test_loss=test_loss,
                dist_to_opt_sq=float(np.sum((w - task.optimum) ** 2)),
                oracle_calls=round_calls,
                corrupted_selected=int(corrupted_mask.sum()),
                selected=tuple(int(k) for k in selected),
                wall_time=time.perf_counter() - tic,
            )
        )
        if not math.isfinite(train_loss) or train_loss > DIVERGENCE_LOSS:
            break
    return traces
