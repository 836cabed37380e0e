"""Weighted geometric median via a smoothed Weiszfeld iteration.

The geometric median of points w_1..w_m with positive weights a_1..a_m
minimizes g(z) = sum_k a_k ||z - w_k||. The solver below minimizes a
smoothed objective g_nu in which each distance is replaced by a quadratic
inside a ball of radius nu, so every update is a plain weighted average
with bounded reweights and no division by a vanishing distance can occur.

Each iteration consumes exactly one weighted-average aggregation. The
average can be routed through a secure-average oracle (any object with an
``average(values, weights)`` method), which is what makes the solver usable
on top of privacy-preserving summation: the coordinator only ever sees
weighted averages of the points, never an individual point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


@dataclass(frozen=True)
class WeightedPointSet:
    """Points in R^d with positive weights normalized to sum to one.

    Parameters
    ----------
    points : ndarray of shape (m, d)
        One row per point. A 1-d array is treated as m points in R^1.
    weights : ndarray of shape (m,)
        Strictly positive weights. They are normalized in place so that
        downstream code can rely on ``weights.sum() == 1``.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty (m, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        wts = np.asarray(self.weights, dtype=float).ravel()
        if wts.shape[0] != pts.shape[0]:
            raise ValueError("weights length must match number of points")
        if not np.all(np.isfinite(wts)) or np.any(wts <= 0.0):
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts / wts.sum())

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def diameter(self) -> float:
        """Largest pairwise distance. O(m^2 d); point sets here are small."""
        diff = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=2)).max())


@dataclass
class IterationRecord:
    """One solver iterate: objective values and the local averaging weight sum."""

    t: int
    z: np.ndarray
    g: float
    g_nu: float
    lipschitz: float


@dataclass
class GMResult:
    """Outcome of ``smoothed_weiszfeld``.

    ``beta`` holds the final per-point reweights, so that ``z`` equals the
    beta-weighted average of the points at termination (exactly, for any
    run that took at least one step). ``converged_by`` is either
    ``"relative_improvement"`` or ``"budget"``.
    """

    z: np.ndarray
    g_value: float
    g_nu_value: float
    iterations: int
    beta: np.ndarray
    converged_by: str
    oracle_calls: int
    trace: list[IterationRecord] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "z": [float(v) for v in self.z],
            "g": self.g_value,
            "g_nu": self.g_nu_value,
            "iterations": self.iterations,
            "beta": [float(b) for b in self.beta],
            "converged_by": self.converged_by,
            "oracle_calls": self.oracle_calls,
            "trace": [
                {"t": r.t, "g": r.g, "g_nu": r.g_nu, "L": r.lipschitz}
                for r in self.trace
            ],
        }


def gm_objective(z: np.ndarray, point_set: WeightedPointSet) -> float:
    """Weighted sum of distances g(z) = sum_k a_k ||z - w_k||."""
    z = np.asarray(z, dtype=float).ravel()
    dists = np.linalg.norm(point_set.points - z, axis=1)
    return float(point_set.weights @ dists)


def smoothed_norm(v: np.ndarray, nu: float) -> float:
    """Norm with a quadratic cap inside radius nu.

    Returns ||v||^2/(2 nu) + nu/2 when ||v|| <= nu, else ||v||. The two
    branches touch with matching value and slope at ||v|| = nu, and the
    result always lies in [||v||, ||v|| + nu/2].
    """
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    r = float(np.linalg.norm(np.asarray(v, dtype=float)))
    if r <= nu:
        return r * r / (2.0 * nu) + nu / 2.0
    return r


def smoothed_objective(z: np.ndarray, point_set: WeightedPointSet, nu: float) -> float:
    """g_nu(z) = sum_k a_k * smoothed_norm(z - w_k, nu)."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    z = np.asarray(z, dtype=float).ravel()
    r = np.linalg.norm(point_set.points - z, axis=1)
    vals = np.where(r <= nu, r * r / (2.0 * nu) + nu / 2.0, r)
    return float(point_set.weights @ vals)


def surrogate_objective(
    z: np.ndarray, eta: np.ndarray, point_set: WeightedPointSet
) -> float:
    """Quadratic upper model 0.5 * sum_k a_k (||z - w_k||^2 / eta_k + eta_k).

    For eta_k >= nu this majorizes the smoothed objective, with equality
    when eta = eta_update(z, point_set, nu).
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.shape[0] != point_set.m:
        raise ValueError("eta length must match number of points")
    if np.any(eta <= 0.0):
        raise ValueError("eta entries must be positive")
    z = np.asarray(z, dtype=float).ravel()
    sq = ((point_set.points - z) ** 2).sum(axis=1)
    return float(0.5 * (point_set.weights @ (sq / eta + eta)))


def eta_update(z: np.ndarray, point_set: WeightedPointSet, nu: float) -> np.ndarray:
    """Per-point auxiliary distances eta_k = max(nu, ||z - w_k||)."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    z = np.asarray(z, dtype=float).ravel()
    dists = np.linalg.norm(point_set.points - z, axis=1)
    return np.maximum(dists, nu)


def lipschitz_constant(eta: np.ndarray, point_set: WeightedPointSet) -> float:
    """Averaging weight sum L = sum_k a_k / eta_k.

    For eta produced by ``eta_update`` on a point z in the convex hull,
    L lies in [1/diameter-scale, 1/nu]; it is the curvature of the local
    quadratic model at z.
    """
    eta = np.asarray(eta, dtype=float).ravel()
    if np.any(eta <= 0.0):
        raise ValueError("eta entries must be positive")
    return float((point_set.weights / eta).sum())


def _weighted_average(
    points: np.ndarray, weights: np.ndarray, oracle
) -> np.ndarray:
    if oracle is not None:
        return np.asarray(oracle.average(points, weights), dtype=float)
    return (weights @ points) / weights.sum()


def weiszfeld_step(
    z: np.ndarray,
    point_set: WeightedPointSet,
    nu: float,
    oracle=None,
) -> tuple[np.ndarray, np.ndarray]:
    """One smoothed Weiszfeld update from z.

    Computes reweights beta_k = a_k / max(nu, ||z - w_k||) and returns the
    beta-weighted average of the points together with beta itself. Exactly
    one oracle call is made when an oracle is supplied.
    """
    z = np.asarray(z, dtype=float).ravel()
    eta = eta_update(z, point_set, nu)
    beta = point_set.weights / eta
    z_next = _weighted_average(point_set.points, beta, oracle)
    return z_next, beta


def smoothed_weiszfeld(
    point_set: WeightedPointSet,
    nu: float = 1e-6,
    budget: int = 50,
    rel_tol: float = 1e-6,
    z0: np.ndarray | None = None,
    oracle=None,
) -> GMResult:
    """Minimize the smoothed geometric-median objective by reweighted averaging.

    Parameters
    ----------
    point_set : WeightedPointSet
        The weighted points.
    nu : float
        Smoothing radius. Distances below nu are treated quadratically, so
        reweights are capped at a_k / nu and the iteration is defined
        everywhere, including on top of a data point.
    budget : int
        Maximum number of averaging steps (>= 1). Each step costs one
        oracle call.
    rel_tol : float
        Stop once the relative improvement of the smoothed objective
        between consecutive iterates falls to this level or below.
    z0 : ndarray, optional
        Starting point, expected inside the convex hull of the points.
        Defaults to the weighted mean, which costs one extra oracle call.
    oracle : object, optional
        Anything with ``average(values, weights)``; every weighted average
        is routed through it so calls can be counted or masked. When None,
        averages are computed directly (the reported ``oracle_calls`` still
        counts the averages the run required).

    Returns
    -------
    GMResult
        Final point, objective values, per-iterate trace, final reweights
        and the number of oracle calls consumed.

    Notes
    -----
    Each step minimizes the quadratic surrogate at the current iterate, so
    the smoothed objective never increases; iterates stay in the convex
    hull of the points. With a single point the exact answer is returned
    immediately with zero iterations.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if rel_tol < 0.0:
        raise ValueError("rel_tol must be nonnegative")
    if nu <= 0.0:
        raise ValueError("nu must be positive")

    pts = point_set.points
    wts = point_set.weights

    if point_set.m == 1:
        z = pts[0].copy()
        g = gm_objective(z, point_set)
        g_nu = smoothed_objective(z, point_set, nu)
        rec = IterationRecord(
            0, z.copy(), g, g_nu, lipschitz_constant(eta_update(z, point_set, nu), point_set)
        )
        return GMResult(
            z=z,
            g_value=g,
            g_nu_value=g_nu,
            iterations=0,
            beta=wts.copy(),
            converged_by="relative_improvement",
            oracle_calls=0,
            trace=[rec],
        )

    calls = 0
    if z0 is None:
        z = _weighted_average(pts, wts, oracle)
        calls += 1
    else:
        z = np.asarray(z0, dtype=float).ravel()
        if z.shape[0] != point_set.d:
            raise ValueError("z0 dimension does not match the points")
        z = z.copy()

    def record(t: int, zt: np.ndarray) -> IterationRecord:
        eta_t = eta_update(zt, point_set, nu)
        return IterationRecord(
            t,
            zt.copy(),
            gm_objective(zt, point_set),
            smoothed_objective(zt, point_set, nu),
            lipschitz_constant(eta_t, point_set),
        )

    trace = [record(0, z)]
    beta = wts.copy()
    converged_by = "budget"
    iterations = 0
    g_nu_prev = trace[0].g_nu
    for t in range(budget):
        z, beta = weiszfeld_step(z, point_set, nu, oracle)
        calls += 1
        iterations = t + 1
        rec = record(iterations, z)
        trace.append(rec)
        # g_nu >= nu/2 always, so the ratio below is well defined
        if abs(g_nu_prev - rec.g_nu) / rec.g_nu <= rel_tol:
            converged_by = "relative_improvement"
            g_nu_prev = rec.g_nu
            break
        g_nu_prev = rec.g_nu

    final = trace[-1]
    return GMResult(
        z=final.z.copy(),
        g_value=final.g,
        g_nu_value=final.g_nu,
        iterations=iterations,
        beta=beta,
        converged_by=converged_by,
        oracle_calls=calls,
        trace=trace,
    )


def _weighted_coordinate_median(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Coordinate-wise weighted median; a robust starting point."""
    m, d = points.shape
    out = np.empty(d)
    for j in range(d):
        order = np.argsort(points[:, j], kind="stable")
        cum = np.cumsum(weights[order])
        idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
        out[j] = points[order[min(idx, m - 1)], j]
    return out


def brute_force_gm(
    point_set: WeightedPointSet,
    tol: float = 1e-8,
    subgradient_iters: int = 400,
    max_refinements: int = 12,
) -> np.ndarray:
    """Reference geometric median by a method unrelated to Weiszfeld averaging.

    Runs projected subgradient descent with diminishing steps from the
    coordinate-wise weighted median, then polishes with derivative-free
    simplex refinements of the exact (unsmoothed) objective until the
    objective improves by less than tol/10 between refinements. Intended
    as an independent cross-check for small instances (m <= 50, d <= 10).

    Raises
    ------
    RuntimeError
        If the refinement loop fails to stabilize within its cap.
    """
    if point_set.m > 50 or point_set.d > 10:
        raise ValueError("brute_force_gm is limited to small instances (m <= 50, d <= 10)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    pts = point_set.points
    wts = point_set.weights
    if point_set.m == 1:
        return pts[0].copy()

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    z = _weighted_coordinate_median(pts, wts)
    dists = np.linalg.norm(pts - z, axis=1)
    scale = float(np.median(dists))
    if scale <= 0.0:
        scale = float(dists.max())
    if scale <= 0.0:
        return pts[0].copy()  # all points identical

    best_z = z.copy()
    best_g = gm_objective(z, point_set)
    for i in range(subgradient_iters):
        diff = z - pts
        dist = np.linalg.norm(diff, axis=1)
        nz = dist > 0.0
        sub = (wts[nz] / dist[nz]) @ diff[nz]
        z = np.clip(z - (scale / math.sqrt(i + 1.0)) * sub, lo, hi)
        g = gm_objective(z, point_set)
        if g < best_g:
            best_g = g
            best_z = z.copy()

    fun = lambda v: gm_objective(v, point_set)
    z_cur = best_z
    g_prev = best_g
    for _ in range(max_refinements):
        res = optimize.minimize(
            fun,
            z_cur,
            method="Nelder-Mead",
            options={
                "xatol": max(1e-12, tol * 1e-4),
                "fatol": max(1e-13, tol * 1e-5),
                "maxiter": 4000,
                "maxfev": 8000,
            },
        )
        if res.fun <= g_prev:
            z_cur = np.asarray(res.x, dtype=float)
        if abs(g_prev - res.fun) < tol / 10.0:
            return z_cur
        g_prev = min(g_prev, float(res.fun))
    raise RuntimeError("brute_force_gm did not stabilize within the refinement cap")


def displacement_bound(theta: float, eps: float, max_honest_dist: float) -> float:
    """How far an eps-approximate geometric median can move under corruption.

    For corrupted weight theta < 1/2, any point whose objective is within
    eps of optimal on the corrupted instance lies within
    2 (1 - theta) / (1 - 2 theta) * max_honest_dist + eps / (1 - 2 theta)
    of any reference point whose max distance to the honest points is
    max_honest_dist.
    """
    if not 0.0 <= theta < 0.5:
        raise ValueError("theta must lie in [0, 0.5)")
    if eps < 0.0 or max_honest_dist < 0.0:
        raise ValueError("eps and max_honest_dist must be nonnegative")
    return (2.0 * (1.0 - theta) * max_honest_dist + eps) / (1.0 - 2.0 * theta)


def robustness_bound(
    theta: float, eps: float, smoothness: float, max_honest_dist: float
) -> float:
    """Function-value form of the corruption bound for an L-smooth objective.

    Combines the displacement bound with smoothness: the suboptimality of
    the corrupted eps-approximate geometric median, measured by an L-smooth
    function minimized at the honest reference point, is at most
    smoothness / (1 - 2 theta)^2 * (4 * max_honest_dist^2 + eps^2).
    """
    if not 0.0 <= theta < 0.5:
        raise ValueError("theta must lie in [0, 0.5)")
    if eps < 0.0 or max_honest_dist < 0.0 or smoothness < 0.0:
        raise ValueError("eps, smoothness and max_honest_dist must be nonnegative")
    return smoothness / (1.0 - 2.0 * theta) ** 2 * (
        4.0 * max_honest_dist**2 + eps**2
    )


def hull_distance(z: np.ndarray, points: np.ndarray) -> float:
    """Euclidean distance from z to the convex hull of the given points.

    Solved as a bounded-variable least-squares problem with a penalty row
    that pins the coefficient sum to one; adequate for verification purposes.
    """
    z = np.asarray(z, dtype=float).ravel()
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    penalty = 1e5 * (1.0 + float(np.abs(pts).max()))
    a = np.vstack([pts.T, np.full((1, m), penalty)])
    b = np.concatenate([z, [penalty]])
    res = optimize.lsq_linear(
        a, b, bounds=(0.0, np.inf), method="bvls", tol=1e-14, max_iter=10 * m
    )
    lam = res.x
    s = lam.sum()
    if s <= 0.0:
        return float(np.linalg.norm(pts[0] - z))
    combo = (lam / s) @ pts
    return float(np.linalg.norm(combo - z))
