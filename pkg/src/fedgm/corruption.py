"""Device corruption models for federated simulations.

Corrupted devices are chosen by sampling the population uniformly without
replacement until their cumulative data weight strictly exceeds the target
fraction rho. Three attack families are provided: static data poisoning
(feature negation), adaptive data poisoning (relabel against the current
broadcast model), and an omniscient update attack that replaces corrupted
updates so the weighted round mean becomes the exact negation of what the
honest mean would have been. Evaluation data is never touched by any of
these; poisoning always returns fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

CORRUPTION_KINDS = ("none", "static_data", "adaptive_data", "omniscient")


@dataclass(frozen=True)
class CorruptionSpec:
    """What fraction of data weight is corrupted, and how.

    ``seed`` drives the random choice of corrupted devices; when None the
    runner substitutes its own master seed. ``realized_set`` and
    ``realized_weight`` are filled by ``realize``.
    """

    kind: str = "none"
    rho: float = 0.0
    seed: int | None = None
    realized_set: tuple[int, ...] | None = None
    realized_weight: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"kind must be one of {CORRUPTION_KINDS}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.kind != "none" and self.rho == 0.0:
            object.__setattr__(self, "kind", "none")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rho": self.rho,
            "seed": self.seed,
            "realized_set": list(self.realized_set) if self.realized_set is not None else None,
            "realized_weight": self.realized_weight,
        }


def select_corrupted(alphas: np.ndarray, rho: float, rng: np.random.Generator) -> list[int]:
    """Sample device ids until their cumulative weight strictly exceeds rho.

    ``alphas`` are the population data weights (normalized to sum to one).
    rho = 0 corrupts nobody. The returned ids are sorted.
    """
    alphas = np.asarray(alphas, dtype=float).ravel()
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if rho == 0.0:
        return []
    chosen: list[int] = []
    cum = 0.0
    for k in rng.permutation(alphas.shape[0]):
        chosen.append(int(k))
        cum += alphas[k]
        if cum > rho:
            break
    return sorted(chosen)


def realize(spec: CorruptionSpec, alphas: np.ndarray, fallback_seed: int = 0) -> CorruptionSpec:
    """Fill in the realized corrupted set for a concrete device population."""
    if spec.kind == "none" or spec.rho == 0.0:
        return replace(spec, realized_set=(), realized_weight=0.0)
    seed = spec.seed if spec.seed is not None else fallback_seed
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0DE]))
    ids = select_corrupted(alphas, spec.rho, rng)
    weight = float(np.asarray(alphas, dtype=float)[ids].sum())
    return replace(spec, realized_set=tuple(ids), realized_weight=weight)


def poison_static(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Negate every feature vector, leave labels alone. Involutive."""
    return -np.asarray(features, dtype=float), np.array(labels, dtype=float, copy=True)


def poison_adaptive(
    features: np.ndarray, labels: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Relabel y to <x, -w> for the current broadcast model w.

    The corrupted device then faithfully fits data whose exact local
    optimum is -w, dragging the aggregate away from wherever the server
    currently is. Regression transform; classification tasks need their
    own relabeling. Deterministic in (features, w); labels are ignored.
    """
    del labels
    feats = np.array(features, dtype=float, copy=True)
    return feats, feats @ (-np.asarray(w, dtype=float))


def omniscient_updates(
    updates: np.ndarray, weights: np.ndarray, corrupted_mask: np.ndarray
) -> np.ndarray:
    """Replace corrupted rows so the weighted mean flips sign exactly.

    Every corrupted device returns the same vector
    psi = -(2 * sum_honest a_k u_k + sum_corrupt a_k u_k) / sum_corrupt a_k,
    which makes the weighted mean of the returned updates equal the
    negation of the weighted mean of the honest updates. With no corrupted
    rows this is a no-op and a copy of the input is returned.
    """
    updates = np.asarray(updates, dtype=float)
    weights = np.asarray(weights, dtype=float).ravel()
    mask = np.asarray(corrupted_mask, dtype=bool).ravel()
    if updates.shape[0] != weights.shape[0] or updates.shape[0] != mask.shape[0]:
        raise ValueError("updates, weights and corrupted_mask must agree in length")
    out = updates.copy()
    corrupted_weight = float(weights[mask].sum())
    if corrupted_weight <= 0.0:
        return out
    honest_sum = weights[~mask] @ updates[~mask] if (~mask).any() else 0.0
    corrupt_sum = weights[mask] @ updates[mask]
    psi = -(2.0 * honest_sum + corrupt_sum) / corrupted_weight
    out[mask] = psi
    return out
