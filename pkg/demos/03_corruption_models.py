"""Three device corruption models and how the corrupted set is drawn.

Corrupted devices are sampled uniformly until their data weight strictly
exceeds the target fraction rho. Static poisoning negates features once;
adaptive poisoning relabels against whatever model the server broadcasts;
the omniscient attack skips the data entirely and substitutes updates so
the round's weighted mean is exactly the negation of its honest value.
"""

import numpy as np

from fedgm import (
    CorruptionSpec,
    omniscient_updates,
    poison_adaptive,
    poison_static,
    realize,
)
from fedgm.tasks import exact_optimum

print("=== choosing who is corrupted ===")
alphas = np.full(20, 0.05)
spec = realize(CorruptionSpec(kind="static_data", rho=0.25, seed=3), alphas)
print(f"rho = {spec.rho}: corrupted devices {spec.realized_set}")
print(f"their combined data weight: {spec.realized_weight:.2f} (strictly above rho)")

print("\n=== static data poisoning ===")
rng = np.random.default_rng(1)
x = rng.standard_normal((5, 3))
y = rng.standard_normal(5)
px, py = poison_static(x, y)
print("features are negated, labels kept:")
print(f"  x[0] = {np.round(x[0], 3)} -> {np.round(px[0], 3)}, y[0] = {y[0]:.3f} -> {py[0]:.3f}")

print("\n=== adaptive data poisoning ===")
w_broadcast = np.array([1.0, -0.5, 2.0])
ax, ay = poison_adaptive(x, y, w_broadcast)
w_fit = exact_optimum(ax, ay)
print(f"server broadcasts   w = {w_broadcast}")
print(f"poisoned shard fits w = {np.round(w_fit, 6)} (the exact negation)")

print("\n=== omniscient update substitution ===")
updates = rng.standard_normal((8, 3))
weights = rng.uniform(0.5, 1.5, 8)
mask = np.zeros(8, dtype=bool)
mask[[1, 4]] = True
honest_mean = (weights @ updates) / weights.sum()
attacked = omniscient_updates(updates, weights, mask)
post_mean = (weights @ attacked) / weights.sum()
print(f"honest weighted mean: {np.round(honest_mean, 6)}")
print(f"after substitution:   {np.round(post_mean, 6)}")
print(f"flip error: {np.abs(post_mean + honest_mean).max():.2e}")
print("the two corrupted rows both send the same crafted vector:")
print(f"  {np.round(attacked[1], 4)}")
