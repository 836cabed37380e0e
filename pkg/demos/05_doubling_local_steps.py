"""Doubling the local step count each round: geometric contraction.

With noiseless labels, running tail-averaged local SGD whose step count
doubles every round drives the squared distance to the pooled optimum
down at an accelerating per-round rate, all the way to numerical zero.
With label noise and a constant step count the same runner stalls at a
positive floor instead: extra rounds stop helping once the averaging
noise dominates.
"""

import numpy as np

from fedgm import CorruptionSpec, run_rfa_doubling
from fedgm.tasks import generate_ls_task

print("=== noiseless task, steps double every round ===")
task, partition = generate_ls_task(
    d=40, devices=30, samples_per_device=120, noise_std=0.0, seed=0, test_samples=100
)
traces = run_rfa_doubling(
    task, partition, CorruptionSpec(), devices_per_round=10,
    base_steps=2, rounds=14, seed=0,
)
prev = float(np.sum(task.optimum**2))
print(f"{'round':>5} {'local steps':>12} {'dist^2 to optimum':>18} {'ratio':>8}")
for t, trace in enumerate(traces):
    ratio = trace.dist_to_opt_sq / prev if prev > 0 else float("nan")
    print(f"{t:>5} {2 * 2**t:>12} {trace.dist_to_opt_sq:>18.3e} {ratio:>8.3f}")
    prev = trace.dist_to_opt_sq
    if prev <= 1e-12:
        break

print("\n=== noisy task, constant 8 steps per round ===")
task, partition = generate_ls_task(
    d=40, devices=30, samples_per_device=120, noise_std=0.1, seed=0, test_samples=100
)
noisy = run_rfa_doubling(
    task, partition, CorruptionSpec(), devices_per_round=10,
    base_steps=8, rounds=60, seed=0, schedule="constant",
)
dists = [t.dist_to_opt_sq for t in noisy]
for t in (0, 9, 19, 29, 39, 49, 59):
    print(f"round {t:>2}: dist^2 = {dists[t]:.3e}")
print("\nthe noisy trace keeps a positive floor; the noiseless doubling run")
print("above reaches the numerical zero of the problem in about a dozen rounds.")
