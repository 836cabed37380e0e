"""Unit and property tests for the geometric-median toolbox."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgm.geomed import (
    WeightedPointSet,
    brute_force_gm,
    displacement_bound,
    eta_update,
    gm_objective,
    hull_distance,
    lipschitz_constant,
    robustness_bound,
    smoothed_norm,
    smoothed_objective,
    smoothed_weiszfeld,
    surrogate_objective,
    weiszfeld_step,
)
from fedgm.secure_avg import SecureAverageOracle

RNG_SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def equilateral() -> WeightedPointSet:
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, math.sqrt(3.0)]])
    return WeightedPointSet(pts, np.ones(3) / 3.0)


def random_set(seed: int, m: int | None = None, d: int | None = None) -> WeightedPointSet:
    rng = np.random.default_rng(seed)
    m = m if m is not None else int(rng.integers(2, 12))
    d = d if d is not None else int(rng.integers(1, 5))
    return WeightedPointSet(rng.standard_normal((m, d)), rng.uniform(0.2, 2.0, m))


class TestWeightedPointSet:
    def test_weights_normalized_to_one(self):
        ps = WeightedPointSet(np.zeros((3, 2)), np.array([1.0, 2.0, 3.0]))
        assert np.isclose(ps.weights.sum(), 1.0)
        assert np.allclose(ps.weights, [1 / 6, 2 / 6, 3 / 6])

    def test_shape_properties(self):
        ps = WeightedPointSet(np.zeros((4, 3)), np.ones(4))
        assert ps.m == 4 and ps.d == 3

    def test_diameter_of_unit_segment(self):
        ps = WeightedPointSet(np.array([[0.0], [1.0]]), np.ones(2))
        assert np.isclose(ps.diameter(), 1.0)

    def test_rejects_empty_points(self):
        with pytest.raises(ValueError):
            WeightedPointSet(np.zeros((0, 2)), np.ones(0))

    def test_rejects_weight_count_mismatch(self):
        with pytest.raises(ValueError):
            WeightedPointSet(np.zeros((3, 2)), np.ones(2))

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            WeightedPointSet(np.zeros((2, 2)), np.array([1.0, 0.0]))

    def test_rejects_nonfinite_points(self):
        with pytest.raises(ValueError):
            WeightedPointSet(np.array([[np.inf, 0.0]]), np.ones(1))


class TestGMObjective:
    def test_zero_at_single_point(self):
        ps = WeightedPointSet(np.array([[1.0, 2.0]]), np.ones(1))
        assert gm_objective(np.array([1.0, 2.0]), ps) == 0.0

    def test_symmetric_pair(self):
        ps = WeightedPointSet(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))
        assert np.isclose(gm_objective(np.zeros(1), ps), 1.0)

    def test_matches_straight_line_summation(self):
        rng = np.random.default_rng(7)
        pts = rng.standard_normal((4, 2))
        wts = rng.uniform(0.5, 2.0, 4)
        ps = WeightedPointSet(pts, wts)
        z = np.array([0.3, 0.3])
        expected = 0.0
        for k in range(4):
            expected += (wts[k] / wts.sum()) * math.sqrt(
                (z[0] - pts[k, 0]) ** 2 + (z[1] - pts[k, 1]) ** 2
            )
        assert np.isclose(gm_objective(z, ps), expected, rtol=1e-12)

    @given(seed=RNG_SEEDS)
    @settings(max_examples=40, deadline=None)
    def test_translation_invariance(self, seed):
        ps = random_set(seed)
        rng = np.random.default_rng(seed + 1)
        z = rng.standard_normal(ps.d)
        shift = rng.standard_normal(ps.d)
        shifted = WeightedPointSet(ps.points + shift, ps.weights)
        assert np.isclose(
            gm_objective(z, ps), gm_objective(z + shift, shifted), rtol=1e-9
        )


class TestSmoothedNorm:
    def test_origin_gives_half_nu(self):
        assert np.isclose(smoothed_norm(np.zeros(3), 0.5), 0.25)

    def test_outer_branch_is_plain_norm(self):
        assert np.isclose(smoothed_norm(np.array([2.0, 0.0]), 1.0), 2.0)

    def test_branches_agree_at_seam(self):
        v = np.array([0.8])
        nu = 0.8
        inner = np.dot(v, v) / (2 * nu) + nu / 2
        assert np.isclose(smoothed_norm(v, nu), 0.8)
        assert np.isclose(inner, 0.8)

    def test_rejects_nonpositive_nu(self):
        with pytest.raises(ValueError):
            smoothed_norm(np.ones(2), 0.0)

    @given(seed=RNG_SEEDS, nu=st.floats(min_value=1e-6, max_value=10.0))
    @settings(max_examples=60, deadline=None)
    def test_sandwich(self, seed, nu):
        v = np.random.default_rng(seed).standard_normal(3)
        plain = float(np.linalg.norm(v))
        smoothed = smoothed_norm(v, nu)
        assert plain - 1e-12 <= smoothed <= plain + nu / 2 + 1e-12


class TestSmoothedObjective:
    def test_equals_plain_objective_far_from_points(self):
        ps = random_set(3)
        z = ps.points.mean(axis=0) + 50.0
        nu = 1e-3
        assert np.isclose(
            smoothed_objective(z, ps, nu), gm_objective(z, ps), rtol=1e-12
        )

    def test_single_point_at_origin(self):
        ps = WeightedPointSet(np.array([[1.0, 1.0]]), np.ones(1))
        assert np.isclose(smoothed_objective(np.array([1.0, 1.0]), ps, 0.5), 0.25)

    @given(seed=RNG_SEEDS)
    @settings(max_examples=60, deadline=None)
    def test_sandwich_property(self, seed):
        ps = random_set(seed)
        z = np.random.default_rng(seed + 9).standard_normal(ps.d)
        nu = 10 ** np.random.default_rng(seed).uniform(-6, 0)
        gap = smoothed_objective(z, ps, nu) - gm_objective(z, ps)
        assert -1e-12 <= gap <= nu / 2 + 1e-12


class TestSurrogate:
    def test_equals_objective_when_eta_is_distances(self):
        ps = random_set(11)
        z = np.random.default_rng(1).standard_normal(ps.d) + 10.0
        eta = np.linalg.norm(ps.points - z, axis=1)
        assert np.isclose(
            surrogate_objective(z, eta, ps), gm_objective(z, ps), rtol=1e-12
        )

    def test_single_point_at_nu(self):
        ps = WeightedPointSet(np.array([[2.0]]), np.ones(1))
        nu = 0.3
        assert np.isclose(surrogate_objective(np.array([2.0]), np.array([nu]), ps), nu / 2)

    def test_rejects_nonpositive_eta(self):
        ps = random_set(5)
        with pytest.raises(ValueError):
            surrogate_objective(np.zeros(ps.d), np.zeros(ps.m), ps)

    def test_rejects_eta_length_mismatch(self):
        ps = random_set(5)
        with pytest.raises(ValueError):
            surrogate_objective(np.zeros(ps.d), np.ones(ps.m + 1), ps)

    @given(seed=RNG_SEEDS)
    @settings(max_examples=60, deadline=None)
    def test_majorizes_smoothed_objective(self, seed):
        ps = random_set(seed)
        rng = np.random.default_rng(seed + 2)
        z = rng.standard_normal(ps.d)
        nu = 10 ** rng.uniform(-4, -1)
        eta = np.maximum(rng.uniform(0.0, 3.0, ps.m), nu)
        lhs = surrogate_objective(z, eta, ps)
        rhs = smoothed_objective(z, ps, nu)
        assert lhs >= rhs - 1e-9 - 1e-7 * abs(rhs)

    @given(seed=RNG_SEEDS)
    @settings(max_examples=60, deadline=None)
    def test_tight_at_eta_update(self, seed):
        ps = random_set(seed)
        rng = np.random.default_rng(seed + 3)
        z = rng.standard_normal(ps.d)
        nu = 10 ** rng.uniform(-4, -1)
        eta = eta_update(z, ps, nu)
        assert np.isclose(
            surrogate_objective(z, eta, ps),
            smoothed_objective(z, ps, nu),
            rtol=1e-10,
        )


class TestEtaUpdate:
    def test_clamps_at_own_point(self):
        ps = WeightedPointSet(np.array([[1.0, 0.0], [3.0, 0.0]]), np.ones(2))
        eta = eta_update(np.array([1.0, 0.0]), ps, 1e-4)
        assert eta[0] == pytest.approx(1e-4)
        assert eta[1] == pytest.approx(2.0)

    def test_unclamped_branch(self):
        nu = 0.2
        ps = WeightedPointSet(np.array([[3 * nu]]), np.ones(1))
        eta = eta_update(np.array([0.0]), ps, nu)
        assert eta[0] == pytest.approx(3 * nu)

    def test_always_at_least_nu(self):
        ps = random_set(17)
        eta = eta_update(ps.points[0], ps, 0.05)
        assert (eta >= 0.05 - 1e-15).all()


class TestLipschitzConstant:
    def test_all_eta_at_nu(self):
        ps = random_set(2, m=5)
        nu = 1e-3
        assert np.isclose(lipschitz_constant(np.full(5, nu), ps), 1.0 / nu)

    def test_constant_eta(self):
        ps = random_set(2, m=4)
        assert np.isclose(lipschitz_constant(np.full(4, 2.5), ps), 1.0 / 2.5)

    def test_matches_direct_summation(self):
        ps = random_set(23, m=6)
        eta = np.random.default_rng(0).uniform(0.5, 2.0, 6)
        expected = sum(ps.weights[k] / eta[k] for k in range(6))
        assert np.isclose(lipschitz_constant(eta, ps), expected, rtol=1e-12)


class TestWeiszfeldStep:
    def test_fixed_point_at_equilateral_centroid(self):
        ps = equilateral()
        centroid = ps.points.mean(axis=0)
        z_next, _ = weiszfeld_step(centroid, ps, 1e-6)
        assert np.allclose(z_next, centroid, atol=1e-12)

    def test_single_point_returns_it(self):
        ps = WeightedPointSet(np.array([[4.0, 5.0]]), np.ones(1))
        z_next, _ = weiszfeld_step(np.array([100.0, -3.0]), ps, 1e-6)
        assert np.allclose(z_next, [4.0, 5.0])

    def test_hand_computed_two_point_step(self):
        ps = WeightedPointSet(np.array([[0.0], [1.0]]), np.array([0.7, 0.3]))
        z_next, beta = weiszfeld_step(np.array([0.5]), ps, 1e-6)
        # beta = (0.7/0.5, 0.3/0.5); average = (0.6/0.5) / (1.0/0.5) * ... = 0.3
        assert z_next[0] == pytest.approx(0.3, rel=1e-12)
        assert np.allclose(beta, [1.4, 0.6])

    def test_exactly_one_oracle_call(self):
        ps = random_set(5)
        oracle = SecureAverageOracle("plain")
        weiszfeld_step(np.zeros(ps.d), ps, 1e-6, oracle)
        assert oracle.call_count == 1

    @given(seed=RNG_SEEDS)
    @settings(max_examples=40, deadline=None)
    def test_lands_in_convex_hull(self, seed):
        ps = random_set(seed)
        z = np.random.default_rng(seed + 4).standard_normal(ps.d) * 5
        z_next, _ = weiszfeld_step(z, ps, 1e-6)
        assert hull_distance(z_next, ps.points) <= 1e-7


class TestSmoothedWeiszfeld:
    def test_equilateral_terminates_at_centroid(self):
        ps = equilateral()
        res = smoothed_weiszfeld(ps)
        assert res.converged_by == "relative_improvement"
        assert res.iterations <= 2
        assert np.allclose(res.z, ps.points.mean(axis=0), atol=1e-9)

    def test_two_point_weighted_median(self):
        nu = 1e-6
        ps = WeightedPointSet(np.array([[0.0], [1.0]]), np.array([0.7, 0.3]))
        res = smoothed_weiszfeld(ps, nu=nu, budget=100, rel_tol=0.0)
        assert abs(res.z[0]) < 1e-5
        assert 0.3 - 1e-12 <= res.g_value <= 0.3 + nu / 2 + 1e-9

    def test_single_point_short_circuit(self):
        ps = WeightedPointSet(np.array([[2.0, 3.0]]), np.ones(1))
        res = smoothed_weiszfeld(ps)
        assert res.iterations == 0
        assert res.oracle_calls == 0
        assert np.allclose(res.z, [2.0, 3.0])
        assert len(res.trace) == 1

    def test_result_is_beta_weighted_average(self):
        ps = random_set(31)
        res = smoothed_weiszfeld(ps, rel_tol=0.0, budget=60)
        assert (res.beta > 0).all()
        recombined = (res.beta[:, None] * ps.points).sum(axis=0) / res.beta.sum()
        assert np.allclose(res.z, recombined, atol=1e-9)

    def test_objective_gap_in_smoothing_band(self):
        ps = random_set(13)
        nu = 1e-4
        res = smoothed_weiszfeld(ps, nu=nu)
        assert -1e-12 <= res.g_nu_value - res.g_value <= nu / 2 + 1e-12

    def test_smoothed_objective_never_increases_along_trace(self):
        ps = random_set(41)
        res = smoothed_weiszfeld(ps, rel_tol=0.0, budget=50)
        g_nus = [rec.g_nu for rec in res.trace]
        for before, after in zip(g_nus, g_nus[1:]):
            assert after <= before + 1e-12

    def test_budget_exhaustion_reported(self):
        ps = random_set(47)
        res = smoothed_weiszfeld(ps, budget=1, rel_tol=0.0)
        assert res.converged_by == "budget"
        assert res.iterations == 1

    def test_default_start_costs_one_extra_call(self):
        ps = random_set(53)
        res = smoothed_weiszfeld(ps, budget=10, rel_tol=0.0)
        assert res.oracle_calls == res.iterations + 1
        oracle = SecureAverageOracle("plain")
        res2 = smoothed_weiszfeld(ps, budget=10, rel_tol=0.0, oracle=oracle)
        assert oracle.call_count == res2.oracle_calls

    def test_explicit_start_skips_mean_call(self):
        ps = random_set(59)
        res = smoothed_weiszfeld(ps, budget=5, rel_tol=0.0, z0=ps.points[0])
        assert res.oracle_calls == res.iterations

    def test_trace_covers_every_iterate(self):
        ps = random_set(61)
        res = smoothed_weiszfeld(ps, budget=20, rel_tol=0.0)
        assert len(res.trace) == res.iterations + 1
        assert [rec.t for rec in res.trace] == list(range(res.iterations + 1))

    def test_validation_errors(self):
        ps = random_set(3)
        with pytest.raises(ValueError):
            smoothed_weiszfeld(ps, budget=0)
        with pytest.raises(ValueError):
            smoothed_weiszfeld(ps, nu=0.0)
        with pytest.raises(ValueError):
            smoothed_weiszfeld(ps, rel_tol=-1.0)
        with pytest.raises(ValueError):
            smoothed_weiszfeld(ps, z0=np.zeros(ps.d + 1))

    def test_json_dict_round_trips(self):
        ps = random_set(67)
        res = smoothed_weiszfeld(ps)
        payload = json.loads(json.dumps(res.to_json_dict()))
        assert payload["iterations"] == res.iterations
        assert payload["converged_by"] == res.converged_by
        assert len(payload["trace"]) == len(res.trace)
        assert set(payload["trace"][0]) == {"t", "g", "g_nu", "L"}

    @given(seed=RNG_SEEDS)
    @settings(max_examples=15, deadline=None)
    def test_solution_translates_with_the_points(self, seed):
        ps = random_set(seed, m=6, d=2)
        rng = np.random.default_rng(seed + 5)
        shift = rng.standard_normal(2)
        res = smoothed_weiszfeld(ps, budget=40, rel_tol=0.0)
        shifted = WeightedPointSet(ps.points + shift, ps.weights)
        res_shifted = smoothed_weiszfeld(shifted, budget=40, rel_tol=0.0)
        assert np.allclose(res.z + shift, res_shifted.z, atol=1e-6)


class TestBruteForce:
    def test_equilateral_centroid(self):
        ps = equilateral()
        z = brute_force_gm(ps, tol=1e-8)
        assert np.allclose(z, ps.points.mean(axis=0), atol=1e-6)

    def test_weighted_median_on_a_line(self):
        ps = WeightedPointSet(
            np.array([[0.0], [1.0], [2.0]]), np.array([0.6, 0.2, 0.2])
        )
        z = brute_force_gm(ps, tol=1e-8)
        assert abs(z[0]) < 1e-6

    def test_agrees_with_iterative_solver(self):
        for seed in (101, 202, 303):
            ps = random_set(seed, m=8, d=3)
            res = smoothed_weiszfeld(ps, budget=80, rel_tol=0.0)
            g_ref = gm_objective(brute_force_gm(ps, tol=1e-8), ps)
            assert (res.g_value - g_ref) / g_ref <= 1e-5

    def test_rejects_oversized_instances(self):
        rng = np.random.default_rng(0)
        ps = WeightedPointSet(rng.standard_normal((60, 2)), np.ones(60))
        with pytest.raises(ValueError):
            brute_force_gm(ps)


class TestRobustnessBounds:
    def test_displacement_bound_at_theta_zero(self):
        assert displacement_bound(0.0, 0.0, 3.0) == pytest.approx(6.0)

    def test_displacement_bound_monotone_in_theta(self):
        values = [displacement_bound(t, 0.1, 1.0) for t in (0.0, 0.2, 0.4, 0.49)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_value_bound_formula(self):
        theta, eps, smooth, dist = 0.25, 0.5, 2.0, 3.0
        expected = smooth / (1 - 2 * theta) ** 2 * (4 * dist**2 + eps**2)
        assert robustness_bound(theta, eps, smooth, dist) == pytest.approx(expected)

    def test_rejects_theta_at_half(self):
        with pytest.raises(ValueError):
            displacement_bound(0.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            robustness_bound(0.6, 0.0, 1.0, 1.0)


class TestHullDistance:
    def test_interior_point(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        assert hull_distance(np.array([0.5, 0.5]), square) <= 1e-9

    def test_exterior_point(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        assert hull_distance(np.array([2.0, 0.5]), square) == pytest.approx(1.0, abs=1e-6)
