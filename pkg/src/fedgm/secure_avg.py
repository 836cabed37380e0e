"""Simulated secure weighted-average oracle with call accounting.

The oracle computes sum_k beta_k v_k / sum_k beta_k over device
contributions. In "masked" mode each contribution is perturbed with
pairwise antisymmetric masks before summation, mimicking additive secret
sharing: the mask drawn for an ordered pair (j, k) with j < k is added to
j's contribution and subtracted from k's, so all masks cancel in the total
and the result matches plain mode up to floating-point rounding.

Counters track how many averages were requested and a modeled
communication cost of m * d + m^2 units per call (vectors up and pairwise
key agreement).
"""

from __future__ import annotations

import numpy as np


class SecureAverageOracle:
    """Weighted-average aggregator standing in for a secure-summation protocol.

    Parameters
    ----------
    mode : str
        "plain" computes the weighted mean directly; "masked" simulates the
        mask-and-sum protocol described in the module docstring.
    seed : int, optional
        Seed for mask generation in masked mode. Fixed seed gives
        bit-identical behaviour across runs.
    """

    def __init__(self, mode: str = "plain", seed: int | None = None):
        if mode not in ("plain", "masked"):
            raise ValueError("mode must be 'plain' or 'masked'")
        self.mode = mode
        self.call_count = 0
        self.bytes_modeled = 0
        self._rng = np.random.default_rng(seed)

    def average(self, values: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Weighted average of row vectors; one call on the counters.

        ``values`` is (m, d) with one row per device (a 1-d array is one
        device), ``weights`` is (m,) strictly positive.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("values must be a nonempty (m, d) array")
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape[0] != values.shape[0]:
            raise ValueError("weights length must match number of contributions")
        if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and strictly positive")

        m, d = values.shape
        self.call_count += 1
        self.bytes_modeled += m * d + m * m

        if self.mode == "plain":
            return (weights @ values) / weights.sum()

        # Masked mode aggregates the stacked vector [beta * v, beta] so the
        # weight total is never revealed in the clear either.
        contrib = np.concatenate([values * weights[:, None], weights[:, None]], axis=1)
        span = 1.0 + float(np.abs(contrib[np.isfinite(contrib)]).max(initial=0.0))
        masked = contrib.copy()
        for j in range(m):
            for k in range(j + 1, m):
                mask = self._rng.standard_normal(d + 1) * span
                masked[j] += mask
                masked[k] -= mask
        total = masked.sum(axis=0)
        return total[:d] / total[d]

    def reset_counters(self) -> None:
        self.call_count = 0
        self.bytes_modeled = 0
