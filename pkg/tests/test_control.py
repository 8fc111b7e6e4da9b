import numpy as np
import pytest

import episteer as ep
from _support import random_covered_instance


def _belief_for(g, o, xhat, x_obs):
    xhat = np.asarray(xhat, dtype=float).copy()
    xhat[o.mask] = x_obs[o.mask]
    return ep.BeliefState(xhat=xhat, observers=o, obs_cur=x_obs)


def _random_setup(seed, n=6, p=0.4):
    g, o = random_covered_instance(seed, n, p)
    rng = ep.RngStream((seed, 77))
    x = (rng.uniforms(n) < 0.4).astype(np.uint8)
    belief = _belief_for(g, o, rng.uniforms(n), x)
    return g, o, x, belief, rng


# -- back transform -----------------------------------------------------------

def test_back_transform_extremes_and_examples():
    g = ep.SpreadingGraph(2, ((0, 1),))
    spec = ep.ControlSpec(r=0.5, w=2.0)
    params = ep.back_transform(np.zeros(2), np.ones(1), spec, g)
    assert np.array_equal(params.delta, np.ones(2))
    assert np.array_equal(params.beta, np.zeros(1))
    params = ep.back_transform(np.full(2, 0.25), np.array([0.25]), spec, g)
    assert params.beta[0] == pytest.approx(0.5)


def test_back_transform_round_trip_interior_points():
    g = ep.SpreadingGraph(2, ((0, 1), (1, 0)))
    rng = ep.RngStream(5)
    for w in (2.5, 3.0, 7.0):
        spec = ep.ControlSpec(r=0.5, w=w)
        delta = 0.01 + 0.98 * rng.uniforms(2)
        beta = 0.01 + 0.98 * rng.uniforms(2)
        params = ep.back_transform(1.0 - delta, (1.0 - beta) ** w, spec, g)
        assert np.all(np.abs(params.delta - delta) <= 1e-14)
        assert np.all(np.abs(params.beta - beta) <= 1e-14)


# -- transformed infection probability ----------------------------------------

def test_infection_term_zero_when_survival_certain():
    g = ep.SpreadingGraph(3, ((0, 2), (1, 2)))
    o = ep.ObserverSet.from_members(3, [1, 2])
    x = np.array([0, 1, 0], dtype=np.uint8)
    belief = _belief_for(g, o, np.array([0.0, 0.0, 0.0]), x)
    spec = ep.ControlSpec(r=0.5, w=3.0)
    gamma = np.ones(2)
    for i in range(3):
        assert ep.transformed_infection_prob(i, x, belief, gamma, spec, g, o) == 0.0


def test_infection_term_single_attacker():
    g = ep.SpreadingGraph(2, ((1, 0),))
    o = ep.ObserverSet.from_members(2, [1])
    x = np.array([0, 1], dtype=np.uint8)
    belief = _belief_for(g, o, np.zeros(2), x)
    spec = ep.ControlSpec(r=0.5, w=2.0)
    got = ep.transformed_infection_prob(0, x, belief, np.array([0.5]), spec, g, o)
    assert got == pytest.approx(1.0 - 0.5 ** 0.5, abs=1e-12)


def test_infection_term_matches_expectation_expansion():
    for seed in range(12):
        g, o, x, belief, rng = _random_setup(seed)
        m = len(g.edges)
        if m == 0:
            continue
        w = g.d_max + 1.0 + 2.0 * rng.uniforms(1)[0]
        spec = ep.ControlSpec(r=0.5, w=w)
        gamma = 0.05 + 0.95 * rng.uniforms(m)
        beta = 1.0 - gamma ** (1.0 / w)
        for i in range(g.node_count):
            got = ep.transformed_infection_prob(i, x, belief, gamma, spec, g, o)
            # direct expectation of the infection indicator given the
            # information set, expanded over the one unknown in-neighbor
            jp = ep.unobserved_in_neighbor(g, o, i) if i in o else None
            surv = 1.0
            for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
                if o.mask[j]:
                    surv *= 1.0 - beta[eid] * x[j]
            if jp is None:
                want = 1.0 - surv
            else:
                xj = belief.xhat[jp]
                b = beta[g.edge_index[(jp, i)]]
                want = xj * (1.0 - surv * (1.0 - b)) + (1.0 - xj) * (1.0 - surv)
            assert got == pytest.approx(want, abs=1e-12)


# -- constraint value ----------------------------------------------------------

def test_constraint_zero_for_healthy_certainty():
    g = ep.SpreadingGraph(3, ((0, 1), (1, 2)))
    o = ep.ObserverSet.from_members(3, [0, 1, 2])
    x = np.zeros(3, dtype=np.uint8)
    belief = _belief_for(g, o, np.zeros(3), x)
    spec = ep.ControlSpec(r=0.5, w=3.0)
    val = ep.constraint_value(x, belief, np.full(3, 0.7), np.ones(2), spec, g, o)
    assert val == 0.0


def test_constraint_single_infected_node_reduces_to_scalar():
    g = ep.SpreadingGraph(1, ())
    o = ep.ObserverSet.from_members(1, [0])
    x = np.ones(1, dtype=np.uint8)
    belief = _belief_for(g, o, np.ones(1), x)
    spec = ep.ControlSpec(r=0.4, w=1.0)
    for dc in (0.0, 0.25, 0.4, 0.9):
        got = ep.constraint_value(x, belief, np.array([dc]), np.empty(0), spec, g, o)
        assert got == pytest.approx(dc - 0.4)


def test_constraint_matches_predictor_gap():
    for seed in range(25):
        g, o, x, belief, rng = _random_setup(seed, n=7, p=0.35)
        n, m = g.node_count, len(g.edges)
        w = g.d_max + 1.0 + rng.uniforms(1)[0]
        spec = ep.ControlSpec(r=0.3 + 0.5 * rng.uniforms(1)[0], w=w)
        dc = rng.uniforms(n)
        gamma = 0.02 + 0.98 * rng.uniforms(m)
        got = ep.constraint_value(x, belief, dc, gamma, spec, g, o)
        params = ep.back_transform(dc, gamma, spec, g)
        want = (float(ep.predict_all(belief, g, params, x).sum())
                - spec.r * float(belief.xhat.sum()))
        assert got == pytest.approx(want, abs=1e-10)


def test_constraint_jensen_convexity():
    for seed in range(25):
        g, o, x, belief, rng = _random_setup(seed, n=7, p=0.35)
        n, m = g.node_count, len(g.edges)
        spec = ep.ControlSpec(r=0.5, w=g.d_max + 1.0)
        dc1, dc2 = rng.uniforms(n), rng.uniforms(n)
        gm1 = 0.02 + 0.98 * rng.uniforms(m)
        gm2 = 0.02 + 0.98 * rng.uniforms(m)
        lam = float(rng.uniforms(1)[0])
        mid = ep.constraint_value(x, belief, lam * dc1 + (1 - lam) * dc2,
                                  lam * gm1 + (1 - lam) * gm2, spec, g, o)
        ends = (lam * ep.constraint_value(x, belief, dc1, gm1, spec, g, o)
                + (1 - lam) * ep.constraint_value(x, belief, dc2, gm2, spec, g, o))
        assert mid <= ends + 1e-10


# -- cost descriptors -----------------------------------------------------------

def test_cost_descriptor_shapes():
    aff = ep.AffineCost(-1.0, 1.0)
    assert aff.value(0.25) == 0.75 and aff.slope(0.5) == -1.0
    assert aff.box_argmin(0.1, 0.9) == 0.9

    pw = ep.PowerCost(0.5, 2.0)
    assert pw.value(0.25) == pytest.approx(1.0)
    assert pw.box_argmin(0.1, 0.9) == 0.1
    with pytest.raises(ValueError):
        ep.PowerCost(0.0)

    pwl = ep.PiecewiseLinearCost((0.0, 0.5, 1.0), (1.0, 0.2, 0.6))
    assert pwl.value(0.25) == pytest.approx(0.6)
    assert pwl.slope(0.25) == pytest.approx(-1.6)
    assert pwl.box_argmin(0.0, 1.0) == 0.5
    with pytest.raises(ValueError):
        ep.PiecewiseLinearCost((0.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        # concave corner
        ep.PiecewiseLinearCost((0.0, 0.5, 1.0), (0.0, 0.6, 0.7))


def test_control_spec_validation():
    with pytest.raises(ValueError):
        ep.ControlSpec(r=0.0)
    with pytest.raises(ValueError):
        ep.ControlSpec(r=1.0)
    g = ep.SpreadingGraph(3, ((0, 2), (1, 2)))
    with pytest.raises(ValueError):
        ep.ControlSpec(r=0.5, w=2.0).effective_w(g)  # w must exceed d_max
    assert ep.ControlSpec(r=0.5).effective_w(g) == 3.0


# -- solve ----------------------------------------------------------------------

def test_solve_scalar_analytic_optimum():
    g = ep.SpreadingGraph(1, ())
    o = ep.ObserverSet.from_members(1, [0])
    x = np.ones(1, dtype=np.uint8)
    belief = _belief_for(g, o, np.ones(1), x)
    dec = ep.solve(x, belief, ep.ControlSpec(r=0.4, w=2.0), g, o)
    assert abs(dec.delta_star[0] - 0.6) <= 1e-6
    assert dec.constraint_slack >= -1e-6
    assert abs(dec.objective_value - 0.6) <= 1e-6


def test_solve_healthy_certainty_takes_cheap_corner():
    g = ep.SpreadingGraph(3, ((0, 1), (1, 2)))
    o = ep.ObserverSet.from_members(3, [0, 1, 2])
    x = np.zeros(3, dtype=np.uint8)
    belief = _belief_for(g, o, np.zeros(3), x)
    dec = ep.solve(x, belief, ep.ControlSpec(r=0.5), g, o)
    assert dec.constraint_slack == pytest.approx(0.0, abs=1e-12)
    # nothing to control: no healing spend, no suppression spend
    assert np.array_equal(dec.delta_star, np.zeros(3))
    assert np.array_equal(dec.gamma, np.full(2, 1e-9))
    fallback_cost = 3 * 1.0 + 2 * 1.0
    assert dec.objective_value <= fallback_cost


def test_solve_infeasible_reports_minimal_lhs():
    g = ep.SpreadingGraph(1, ())
    o = ep.ObserverSet.from_members(1, [0])
    x = np.ones(1, dtype=np.uint8)
    belief = _belief_for(g, o, np.ones(1), x)
    spec = ep.ControlSpec(r=0.4, w=2.0, delta_c_bounds=(0.5, 1.0))
    with pytest.raises(ep.Infeasible) as err:
        ep.solve(x, belief, spec, g, o)
    assert err.value.min_lhs == pytest.approx(0.5)


def test_solve_pinned_bounds_full_suppression():
    g, o = random_covered_instance(3, 6, 0.4)
    x = np.ones(6, dtype=np.uint8)
    belief = _belief_for(g, o, np.ones(6), x)
    spec = ep.ControlSpec(r=0.5, delta_c_bounds=(0.0, 0.0), gamma_bounds=(1.0, 1.0))
    dec = ep.solve(x, belief, spec, g, o)
    assert np.array_equal(dec.delta_star, np.ones(6))
    assert np.array_equal(dec.beta_star, np.zeros(len(g.edges)))
    assert dec.constraint_slack >= -1e-6


def test_solve_deterministic():
    g, o, x, belief, _ = _random_setup(9, n=8, p=0.3)
    spec = ep.ControlSpec(r=0.7)
    d1 = ep.solve(x, belief, spec, g, o)
    d2 = ep.solve(x, belief, spec, g, o)
    assert np.array_equal(d1.delta_star, d2.delta_star)
    assert np.array_equal(d1.beta_star, d2.beta_star)
    assert d1.objective_value == d2.objective_value


def test_solve_random_instances_feasible_and_certified():
    for seed in range(10):
        g, o, x, belief, _ = _random_setup(seed, n=8, p=0.3)
        spec = ep.ControlSpec(r=0.6)
        dec = ep.solve(x, belief, spec, g, o)
        assert dec.constraint_slack >= -1e-6
        # decision variables within their boxes
        assert np.all(dec.delta_c >= 0.0) and np.all(dec.delta_c <= 1.0)
        if len(g.edges):
            assert np.all(dec.gamma >= 1e-9) and np.all(dec.gamma <= 1.0)
        # re-derive the slack independently through the predictors
        params = ep.SISParams(dec.delta_star, dec.beta_star)
        lhs = float(ep.predict_all(belief, g, params, x).sum())
        assert lhs <= spec.r * float(belief.xhat.sum()) + 1e-6


def test_solve_supports_piecewise_linear_costs():
    g = ep.SpreadingGraph(1, ())
    o = ep.ObserverSet.from_members(1, [0])
    x = np.ones(1, dtype=np.uint8)
    belief = _belief_for(g, o, np.ones(1), x)
    # kinked healing cost, still minimized at the constraint boundary 0.4
    cost = ep.PiecewiseLinearCost((0.0, 0.5, 1.0), (1.0, 0.4, 0.0))
    spec = ep.ControlSpec(r=0.4, w=2.0, node_cost=cost)
    dec = ep.solve(x, belief, spec, g, o)
    assert abs(dec.delta_c[0] - 0.4) <= 1e-5
    assert dec.constraint_slack >= -1e-6


def test_solve_feasible_throughout_reference_closed_loop():
    # the 30-node reference configuration, driven for 100 steps: a feasible
    # decision (predictor-certified within 1e-6) must come back every step
    g = ep.generate_er_graph(30, 0.2, 82)
    o = ep.approx_min_cover(ep.moralize(g))
    spec = ep.ControlSpec(r=0.8)
    rng = ep.RngStream((82, 100))
    state = ep.ProcessState(np.ones(30, dtype=np.uint8))
    belief = ep.initial_belief(g, o, np.ones(30), state.x)
    for _ in range(100):
        dec = ep.solve(state.x, belief, spec, g, o)
        assert dec.constraint_slack >= -1e-6
        params = ep.SISParams(dec.delta_star, dec.beta_star)
        state = ep.step(g, params, state, rng)
        belief = ep.filter_step(belief, g, params, state.x)


def test_solve_affine_edge_costs_reach_analytic_optimum():
    # minimize (1-dc_0) + (1-dc_1) + gamma  s.t.  dc_0 + (1 - sqrt(gamma)) <= 0.5:
    # eliminating the active constraint gives gamma* = 0.25, dc_0* = 0,
    # dc_1* = 1 (unconstrained), optimal value 1.25
    g = ep.SpreadingGraph(2, ((0, 1),))
    o = ep.ObserverSet.from_members(2, [0, 1])
    x = np.array([1, 0], dtype=np.uint8)
    belief = _belief_for(g, o, np.zeros(2), x)
    spec = ep.ControlSpec(r=0.5, w=2.0, edge_cost=ep.AffineCost(1.0, 0.0))
    dec = ep.solve(x, belief, spec, g, o)
    lhs = dec.delta_c[0] + (1.0 - dec.gamma[0] ** 0.5)
    assert lhs == pytest.approx(0.5, abs=1e-6)
    assert dec.objective_value == pytest.approx(1.25, abs=1e-6)
    assert dec.delta_c[1] == 1.0
