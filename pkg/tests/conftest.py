"""Shared fixtures: a reusable pool of solved geometric-median instances.

The pool pairs every instance with both solver outputs (iterative and
brute force) so equivalence, convergence-speed and invariant checks can
share one build. Instances keep their optimum well separated from the
data points; an optimum sitting on a data point is handled by the solver
but approached only sublinearly, which is a different regime from the
one the equivalence checks target.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

from fedgm.geomed import (
    GMResult,
    WeightedPointSet,
    brute_force_gm,
    gm_objective,
    smoothed_weiszfeld,
)

POOL_SIZE = 100
POOL_NU = 1e-6
POOL_BUDGET = 50
INTERIOR_MARGIN = 0.1


@dataclass(frozen=True)
class SolvedInstance:
    point_set: WeightedPointSet
    result: GMResult
    z_ref: np.ndarray
    g_ref: float


@dataclass(frozen=True)
class InstancePool:
    instances: list[SolvedInstance]
    build_seconds: float


def random_instance(index: int) -> tuple[WeightedPointSet, np.ndarray]:
    """Instance ``index``: 3-20 points in 1-5 dimensions, interior optimum.

    Degenerate draws (collinear in d >= 2, or optimum within
    ``INTERIOR_MARGIN`` of a data point) are redrawn deterministically.
    """
    for attempt in range(40):
        rng = np.random.default_rng(np.random.SeedSequence([2024, index, attempt]))
        m = int(rng.integers(3, 21))
        d = int(rng.integers(1, 6))
        points = rng.standard_normal((m, d))
        if d >= 2 and np.linalg.matrix_rank(points - points.mean(axis=0)) < 2:
            continue
        weights = rng.uniform(0.5, 1.5, m)
        point_set = WeightedPointSet(points, weights)
        z_ref = brute_force_gm(point_set, tol=1e-8)
        if np.linalg.norm(point_set.points - z_ref, axis=1).min() <= INTERIOR_MARGIN:
            continue
        return point_set, z_ref
    raise RuntimeError(f"could not draw a usable instance for index {index}")


@pytest.fixture(scope="session")
def gm_pool() -> InstancePool:
    tic = time.perf_counter()
    instances = []
    for i in range(POOL_SIZE):
        point_set, z_ref = random_instance(i)
        result = smoothed_weiszfeld(
            point_set, nu=POOL_NU, budget=POOL_BUDGET, rel_tol=0.0
        )
        instances.append(
            SolvedInstance(
                point_set=point_set,
                result=result,
                z_ref=z_ref,
                g_ref=gm_objective(z_ref, point_set),
            )
        )
    return InstancePool(instances=instances, build_seconds=time.perf_counter() - tic)
