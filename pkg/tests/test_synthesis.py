import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stt.errors import ConfigError
from stt.geometry import (
    Ball2,
    Environment,
    Obstacle,
    Rect,
    dist_point_unsafe,
    workspace_margin,
)
from stt.synthesis import (
    Certificate,
    SolverOptions,
    SopProblem,
    constraint_values,
    initialize_coefficients,
    make_sampling_plan,
    plan_initial_path,
    sampled_eta,
    solve_sop,
    solve_sop_report,
    tube_from_coefficients,
    verify_dense,
)
from stt.tube import BasisSpec, Tube, eval_center, eval_radius


def ball_env(obstacles=(), t_c=10.0):
    return Environment(
        workspace=Ball2((0.0, 0.0), 10.0),
        start=Ball2((-5.0, 0.0), 0.5),
        target=Ball2((5.0, 0.0), 0.5),
        obstacles=tuple(obstacles),
        t_c=t_c,
    )


def small_problem(obstacles=(), degree=4, epsilon=0.25, t_c=10.0):
    env = ball_env(obstacles, t_c)
    return SopProblem.from_environment(env, BasisSpec(degree, t_c),
                                       make_sampling_plan(t_c, epsilon), r_d=0.2)


# ---------------------------------------------------------------- sampling plans


def test_plan_quarter_epsilon():
    plan = make_sampling_plan(1.0, 0.25)
    assert plan.times == (0.0, 0.25, 0.75, 1.0)


def test_plan_wide_epsilon_still_covers():
    plan = make_sampling_plan(1.0, 0.6)
    assert plan.times == (0.0, 0.6, 1.0)
    grid = np.linspace(0.0, 1.0, 10_000)
    gaps = np.min(np.abs(grid[:, None] - np.array(plan.times)[None, :]), axis=1)
    assert float(np.max(gaps)) <= 0.6


@settings(max_examples=100, deadline=None)
@given(t_c=st.floats(0.5, 30.0), frac=st.floats(0.005, 0.9))
def test_plan_covering_property(t_c, frac):
    eps = frac * t_c
    plan = make_sampling_plan(t_c, eps)
    grid = np.linspace(0.0, t_c, 10_000)
    gaps = np.min(np.abs(grid[:, None] - np.array(plan.times)[None, :]), axis=1)
    assert float(np.max(gaps)) <= eps + 1e-12
    assert plan.times[0] == 0.0 and plan.times[-1] == t_c


def test_plan_rejects_bad_epsilon():
    with pytest.raises(ConfigError):
        make_sampling_plan(1.0, 0.0)
    with pytest.raises(ConfigError):
        make_sampling_plan(1.0, 1.5)


# ---------------------------------------------------------------- constraint margins


def test_margins_obstacle_free_fat_tube():
    prob = small_problem(degree=1)
    q = np.concatenate([[-5.0, 5.0], [0.0, 0.0], [0.5, 0.5]])
    for t in prob.plan.times:
        g_ws, g_r, g_unsafe = constraint_values(q, prob, t)
        assert g_r <= -prob.r_d < 0.0
        assert g_ws < 0.0
        assert g_unsafe < 0.0  # sentinel distance dominates


def test_margin_flags_tube_on_obstacle():
    prob = small_problem(obstacles=(Obstacle(Ball2((0.0, 3.0), 1.0)),), degree=1)
    # constant-ish tube parked on the obstacle center mid-horizon
    tube = Tube(BasisSpec(2, 10.0), (-5.0, 0.0, 5.0), (0.0, 6.0, 0.0), (0.5, 0.5, 0.5))
    g = constraint_values(tube, prob, 5.0)
    assert g[2] > 0.0  # center inside the obstacle: dist clamps to 0, margin = r


# ---------------------------------------------------------------- initialization


def test_initial_obstacle_free_is_straight_line():
    prob = small_problem(degree=4)
    q = initialize_coefficients(prob, seed=0)
    z = prob.basis.size
    xs, ys, rs = q[:z], q[z:2 * z], q[2 * z:]
    assert np.allclose(xs, np.linspace(-5.0, 5.0, z))
    assert np.allclose(ys, 0.0)
    assert np.allclose(rs, 0.5)


def test_initial_path_routes_through_gap():
    # wall across the middle with a gap near the top
    wall = Obstacle(Rect((-0.5, -10.0), (0.5, 6.0)))
    prob = small_problem(obstacles=(wall,), degree=6)
    path = plan_initial_path(prob)
    assert path is not None
    assert all(dist_point_unsafe(p, t, prob.env) >= prob.r_d - 1e-9 for t, p in path)
    crossing_ys = [p[1] for _, p in path if abs(p[0]) <= 0.5]
    assert crossing_ys and min(crossing_ys) > 6.0


def test_seed_jitters_interior_only():
    prob = small_problem(degree=5)
    q0 = initialize_coefficients(prob, seed=0)
    q1 = initialize_coefficients(prob, seed=1)
    z = prob.basis.size
    assert not np.allclose(q0, q1)
    for block in range(3):
        assert q1[block * z] == q0[block * z]
        assert q1[block * z + z - 1] == q0[block * z + z - 1]


# ---------------------------------------------------------------- solver


def test_corridor_margin_beats_analytic_bound(corridor_solution):
    problem, tube, cert = corridor_solution
    eta = sampled_eta(tube, problem)
    assert eta <= -0.1
    # recompute every sampled margin from raw geometry, no solver code
    env = problem.env
    for t in problem.plan.times:
        c = eval_center(tube, t)
        r = eval_radius(tube, t)
        assert workspace_margin(c, r, env.workspace) <= eta + 1e-9
        assert problem.r_d - r <= eta + 1e-9
        assert r - dist_point_unsafe(c, t, env) <= eta + 1e-9


def test_solver_deterministic_and_worker_invariant():
    prob = small_problem(degree=4, epsilon=0.5)
    opts = SolverOptions(starts=3, iterations=200, rounds=4)
    t1, e1 = solve_sop(prob, opts)
    t2, e2 = solve_sop(prob, opts)
    assert t1 == t2 and e1 == e2
    t3, e3 = solve_sop(prob, SolverOptions(starts=3, iterations=200, rounds=4, workers=2))
    assert t3 == t1 and e3 == e1


def test_report_history_is_monotone():
    prob = small_problem(degree=4, epsilon=0.5)
    report = solve_sop_report(prob, SolverOptions(starts=2, iterations=100, rounds=5))
    hist = report.history
    assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))
    assert len(report.per_start) == 2


def test_problem_rejects_pinned_ball_outside_start():
    env = ball_env()
    with pytest.raises(ConfigError):
        SopProblem.from_environment(env, BasisSpec(3, 10.0),
                                    make_sampling_plan(10.0, 0.5), r_d=0.6)


def test_problem_rejects_deadline_mismatch():
    env = ball_env(t_c=10.0)
    with pytest.raises(ConfigError):
        SopProblem.from_environment(env, BasisSpec(3, 9.0),
                                    make_sampling_plan(10.0, 0.5), r_d=0.2)


# ---------------------------------------------------------------- certificates


def test_certificate_constant_tube_valid():
    cert = Certificate.build(eta_star=-0.2, L=0.0, epsilon=0.3, env_rate=0.0)
    assert cert.valid


def test_certificate_arithmetic_rejects():
    cert = Certificate.build(eta_star=-0.05, L=1.0, epsilon=0.1, env_rate=0.0)
    assert not cert.valid


def test_certificate_round_trip():
    cert = Certificate.build(-0.25, 1.5, 0.05, 0.75)
    back = Certificate.from_dict(cert.to_dict())
    assert back == cert


def test_valid_certificate_implies_dense_feasibility(corridor_solution):
    problem, tube, cert = corridor_solution
    assert cert.valid
    report = verify_dense(tube, problem.env, 10 * len(problem.plan.times))
    assert report.worst <= 0.0


# ---------------------------------------------------------------- dense verification


def test_dense_report_flags_radius_dip():
    env = ball_env(t_c=1.0)
    # radius swings negative mid-horizon by construction
    tube = Tube(BasisSpec(2, 1.0), (-5.0, 0.0, 5.0), (0.0, 0.0, 0.0), (0.5, -2.0, 0.5))
    report = verify_dense(tube, env, 301)
    assert report.g_radius > 0.0
    assert 0.2 < report.t_radius < 0.8


def test_dense_report_monotone_under_refinement(corridor_solution):
    problem, tube, _ = corridor_solution
    coarse = verify_dense(tube, problem.env, 101)
    fine = verify_dense(tube, problem.env, 201)  # shares every coarse grid point
    assert fine.worst >= coarse.worst - 1e-15


def test_dense_report_serializes(corridor_solution):
    problem, tube, _ = corridor_solution
    report = verify_dense(tube, problem.env, 101)
    doc = report.to_dict()
    assert doc["grid_points"] == 101
    assert doc["worst"] == report.worst
