"""Synthetic federated learning tasks with analytically checkable optima.

The main task is well-specified least squares: features are drawn with
norms bounded by a known radius, labels are a fixed linear function of the
features plus Gaussian noise, and the pooled empirical minimizer comes
from the normal equations. A multinomial logistic task is included for
qualitative runs; it shares the partitioner and the gradient conventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize

TASK_SCHEMA_VERSION = 1


def least_squares_loss(w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean squared residual loss 0.5 * mean (y - <w, x>)^2."""
    r = features @ w - labels
    return float(0.5 * np.mean(r * r))


def least_squares_gradient(
    w: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Gradient of ``least_squares_loss`` with respect to w."""
    r = features @ w - labels
    return features.T @ r / features.shape[0]


def exact_optimum(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Solve the normal equations for the pooled least-squares minimizer.

    Raises
    ------
    ValueError
        If the feature second-moment matrix is numerically rank deficient.
    """
    n = features.shape[0]
    gram = features.T @ features / n
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 1e-12 * max(eigs[-1], 1.0):
        raise ValueError("feature matrix is rank deficient; optimum is not unique")
    return np.linalg.solve(gram, features.T @ labels / n)


@dataclass(frozen=True)
class FederatedPartition:
    """Per-device data shards plus the population weights alpha_k ~ n_k."""

    device_features: tuple
    device_labels: tuple
    counts: np.ndarray
    alphas: np.ndarray

    @property
    def devices(self) -> int:
        return len(self.device_features)


def partition_data(
    features: np.ndarray, labels: np.ndarray, devices: int, samples_per_device: int
) -> FederatedPartition:
    """Split pooled data into contiguous equally sized device shards."""
    need = devices * samples_per_device
    if features.shape[0] < need:
        raise ValueError("not enough samples to fill every device")
    feats = []
    labs = []
    for k in range(devices):
        sl = slice(k * samples_per_device, (k + 1) * samples_per_device)
        feats.append(features[sl])
        labs.append(labels[sl])
    counts = np.full(devices, samples_per_device, dtype=float)
    return FederatedPartition(
        device_features=tuple(feats),
        device_labels=tuple(labs),
        counts=counts,
        alphas=counts / counts.sum(),
    )


@dataclass(frozen=True)
class SyntheticLSTask:
    """Well-specified least-squares problem over bounded features.

    ``w_star`` generated the labels; ``optimum`` is the pooled empirical
    minimizer (identical to ``w_star`` when ``noise_std == 0``).
    ``mu`` and ``smoothness`` are the extreme eigenvalues of the empirical
    feature second-moment matrix, and ``kappa = feature_bound^2 / mu``.
    """

    d: int
    feature_bound: float
    noise_std: float
    w_star: np.ndarray
    optimum: np.ndarray
    mu: float
    smoothness: float
    kappa: float
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray

    kind = "least_squares"

    def loss(self, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        return least_squares_loss(w, features, labels)

    def gradient(self, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return least_squares_gradient(w, features, labels)


def generate_ls_task(
    d: int,
    devices: int,
    samples_per_device: int,
    noise_std: float,
    feature_bound: float = 1.0,
    seed: int = 0,
    test_samples: int = 1000,
) -> tuple[SyntheticLSTask, FederatedPartition]:
    """Generate a synthetic least-squares task and its device partition.

    Features are drawn as uniformly random directions with radii spread
    over a range (so the second-moment spectrum is not degenerate), then
    centered empirically and rescaled so the largest norm equals
    ``feature_bound`` exactly. The ground truth ``w_star`` is a uniformly
    random unit vector, so signal magnitude is comparable across seeds and
    dimensions. Labels are <w_star, x> plus independent Gaussian noise of
    standard deviation ``noise_std``. Everything is deterministic given
    ``seed``.
    """
    if d < 1 or devices < 1 or samples_per_device < 1:
        raise ValueError("d, devices and samples_per_device must be positive")
    if noise_std < 0.0 or feature_bound <= 0.0:
        raise ValueError("noise_std must be >= 0 and feature_bound > 0")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7A5C]))
    n = devices * samples_per_device + test_samples

    raw = rng.standard_normal((n, d))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    radii = feature_bound * rng.uniform(0.3, 1.0, size=n)
    phi = raw / norms[:, None] * radii[:, None]
    phi = phi - phi.mean(axis=0)
    max_norm = float(np.linalg.norm(phi, axis=1).max())
    if max_norm > 0.0:
        phi = phi * (feature_bound / max_norm)

    direction = rng.standard_normal(d)
    w_star = direction / np.linalg.norm(direction)
    labels = phi @ w_star
    if noise_std > 0.0:
        labels = labels + noise_std * rng.standard_normal(n)

    n_train = devices * samples_per_device
    train_x, test_x = phi[:n_train], phi[n_train:]
    train_y, test_y = labels[:n_train], labels[n_train:]

    gram = train_x.T @ train_x / n_train
    eigs = np.linalg.eigvalsh(gram)
    mu = float(eigs[0])
    smoothness = float(eigs[-1])
    optimum = exact_optimum(train_x, train_y)

    task = SyntheticLSTask(
        d=d,
        feature_bound=float(feature_bound),
        noise_std=float(noise_std),
        w_star=w_star,
        optimum=optimum,
        mu=mu,
        smoothness=smoothness,
        kappa=float(feature_bound**2 / mu),
        train_features=train_x,
        train_labels=train_y,
        test_features=test_x,
        test_labels=test_y,
    )
    return task, partition_data(train_x, train_y, devices, samples_per_device)


@dataclass(frozen=True)
class MultinomialLogisticTask:
    """Softmax regression over the same bounded feature distribution.

    The parameter vector is the (classes, d) weight matrix flattened in row
    order. ``optimum`` is the pooled empirical minimizer found numerically.
    Provided for qualitative experiments; there is no closed-form optimum.
    """

    d: int
    classes: int
    feature_bound: float
    w_star: np.ndarray
    optimum: np.ndarray
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray

    kind = "logistic"

    def loss(self, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        logits = features @ w.reshape(self.classes, self.d).T
        logits = logits - logits.max(axis=1, keepdims=True)
        logz = np.log(np.exp(logits).sum(axis=1))
        picked = logits[np.arange(features.shape[0]), labels.astype(int)]
        return float(np.mean(logz - picked))

    def gradient(self, w: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        n = features.shape[0]
        logits = features @ w.reshape(self.classes, self.d).T
        logits = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p = p / p.sum(axis=1, keepdims=True)
        hot = np.zeros_like(p)
        hot[np.arange(n), labels.astype(int)] = 1.0
        return ((p - hot).T @ features / n).ravel()


def generate_logistic_task(
    d: int,
    classes: int,
    devices: int,
    samples_per_device: int,
    feature_bound: float = 1.0,
    seed: int = 0,
    test_samples: int = 500,
) -> tuple[MultinomialLogisticTask, FederatedPartition]:
    """Softmax-regression analogue of ``generate_ls_task``."""
    if classes < 2:
        raise ValueError("classes must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x10615]))
    n = devices * samples_per_device + test_samples

    raw = rng.standard_normal((n, d))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    radii = feature_bound * rng.uniform(0.3, 1.0, size=n)
    phi = raw / norms[:, None] * radii[:, None]
    phi = phi - phi.mean(axis=0)
    max_norm = float(np.linalg.norm(phi, axis=1).max())
    if max_norm > 0.0:
        phi = phi * (feature_bound / max_norm)

    w_star = rng.standard_normal((classes, d)) * 3.0
    logits = phi @ w_star.T
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p = p / p.sum(axis=1, keepdims=True)
    labels = np.array([rng.choice(classes, p=row) for row in p], dtype=float)

    n_train = devices * samples_per_device
    train_x, test_x = phi[:n_train], phi[n_train:]
    train_y, test_y = labels[:n_train], labels[n_train:]

    stub = MultinomialLogisticTask(
        d=d,
        classes=classes,
        feature_bound=float(feature_bound),
        w_star=w_star.ravel(),
        optimum=np.zeros(classes * d),
        train_features=train_x,
        train_labels=train_y,
        test_features=test_x,
        test_labels=test_y,
    )
    res = optimize.minimize(
        stub.loss,
        np.zeros(classes * d),
        args=(train_x, train_y),
        jac=stub.gradient,
        method="L-BFGS-B",
        options={"maxiter": 500, "gtol": 1e-10},
    )
    task = MultinomialLogisticTask(
        d=d,
        classes=classes,
        feature_bound=float(feature_bound),
        w_star=w_star.ravel(),
        optimum=np.asarray(res.x, dtype=float),
        train_features=train_x,
        train_labels=train_y,
        test_features=test_x,
        test_labels=test_y,
    )
    return task, partition_data(train_x, train_y, devices, samples_per_device)


def task_to_json(task, partition: FederatedPartition) -> str:
    """Serialize a task and its partition to portable JSON (no binary blobs)."""
    header = {
        "schema_version": TASK_SCHEMA_VERSION,
        "kind": task.kind,
        "d": task.d,
        "feature_bound": task.feature_bound,
        "devices": partition.devices,
        "samples_per_device": int(partition.counts[0]),
    }
    if task.kind == "least_squares":
        header.update(
            {
                "noise_std": task.noise_std,
                "mu": task.mu,
                "smoothness": task.smoothness,
                "kappa": task.kappa,
            }
        )
    else:
        header["classes"] = task.classes
    payload = {
        "header": header,
        "w_star": task.w_star.tolist(),
        "optimum": task.optimum.tolist(),
        "train_features": task.train_features.tolist(),
        "train_labels": task.train_labels.tolist(),
        "test_features": task.test_features.tolist(),
        "test_labels": task.test_labels.tolist(),
    }
    return json.dumps(payload)


def task_from_json(text: str):
    """Inverse of ``task_to_json``; returns (task, partition)."""
    payload = json.loads(text)
    header = payload["header"]
    if header["schema_version"] != TASK_SCHEMA_VERSION:
        raise ValueError("unsupported task schema version")
    train_x = np.asarray(payload["train_features"], dtype=float)
    train_y = np.asarray(payload["train_labels"], dtype=float)
    test_x = np.asarray(payload["test_features"], dtype=float)
    test_y = np.asarray(payload["test_labels"], dtype=float)
    common = dict(
        d=header["d"],
        feature_bound=header["feature_bound"],
        w_star=np.asarray(payload["w_star"], dtype=float),
        optimum=np.asarray(payload["optimum"], dtype=float),
        train_features=train_x,
        train_labels=train_y,
        test_features=test_x,
        test_labels=test_y,
    )
    if header["kind"] == "least_squares":
        task = SyntheticLSTask(
            noise_std=header["noise_std"],
            mu=header["mu"],
            smoothness=header["smoothness"],
            kappa=header["kappa"],
            **common,
        )
    elif header["kind"] == "logistic":
        task = MultinomialLogisticTask(classes=header["classes"], **common)
    else:
        raise ValueError(f"unknown task kind {header['kind']!r}")
    partition = partition_data(
        train_x, train_y, header["devices"], header["samples_per_device"]
    )
    return task, partition
