"""One-step receding-horizon control of the partially observed SIS process.

Each step the controller picks healing and transmission probabilities that
minimize a resource cost subject to the expected infected count contracting
by a chosen decay rate.  In the raw parameters the decay constraint involves
products of decision variables; substituting the retention probability
``delta_c = 1 - delta`` per node and the powered edge-survival variable
``gamma = (1 - beta)**w`` per edge (with the exponent ``w`` above the
maximum in-degree) makes the constraint a single smooth convex inequality
over a box, which we solve with a logarithmic-barrier interior-point method.

Generic modeling layers reject the product terms, so the barrier solver is
coded directly: damped Newton with backtracking per stage, barrier weight
increased tenfold per stage, terminating once the duality measure drops
below 1e-8.  Variables that the constraint does not touch are split off and
minimized in closed form.  Every returned decision is re-certified through
the one-step predictors before it leaves this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CoverViolation, Infeasible
from .filtering import BeliefState, predict_all
from .graphs import ObserverSet, SpreadingGraph, _frozen, unobserved_in_neighbor
from .simulate import SISParams

DUALITY_TARGET = 1e-8
SLACK_TOLERANCE = 1e-6


# ---------------------------------------------------------------------------
# cost descriptors

class CostTerm:
    """One-dimensional cost of a single transformed decision variable."""

    def value(self, z: float) -> float:
        raise NotImplementedError

    def slope(self, z: float) -> float:
        raise NotImplementedError

    def curvature(self, z: float) -> float:
        raise NotImplementedError

    def box_argmin(self, lo: float, hi: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class AffineCost(CostTerm):
    slope_coef: float
    intercept: float = 0.0

    def value(self, z):
        return self.slope_coef * z + self.intercept

    def slope(self, z):
        return self.slope_coef

    def curvature(self, z):
        return 0.0

    def box_argmin(self, lo, hi):
        return lo if self.slope_coef >= 0.0 else hi


@dataclass(frozen=True)
class PowerCost(CostTerm):
    """``scale * z**exponent`` with a positive exponent; monotone on [0, 1]."""

    exponent: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0.0:
            raise ValueError("power cost exponent must be positive")

    def value(self, z):
        return self.scale * z ** self.exponent

    def slope(self, z):
        return self.scale * self.exponent * z ** (self.exponent - 1.0)

    def curvature(self, z):
        return self.scale * self.exponent * (self.exponent - 1.0) * z ** (self.exponent - 2.0)

    def box_argmin(self, lo, hi):
        return lo if self.scale >= 0.0 else hi


@dataclass(frozen=True)
class PiecewiseLinearCost(CostTerm):
    """Convex piecewise-linear cost tabulated as breakpoints."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("need at least two (x, y) breakpoints")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        slopes = [(yb - ya) / (xb - xa)
                  for (xa, xb, ya, yb) in zip(xs, xs[1:], ys, ys[1:])]
        if any(s2 < s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:])):
            raise ValueError("piecewise-linear cost must be convex")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def _segment(self, z):
        k = 0
        while k < len(self.xs) - 2 and z >= self.xs[k + 1]:
            k += 1
        return k

    def value(self, z):
        return float(np.interp(z, self.xs, self.ys))

    def slope(self, z):
        k = self._segment(z)
        return (self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k])

    def curvature(self, z):
        return 0.0

    def box_argmin(self, lo, hi):
        candidates = [lo] + [x for x in self.xs if lo < x < hi] + [hi]
        best = candidates[0]
        best_val = self.value(best)
        for z in candidates[1:]:
            v = self.value(z)
            if v < best_val - 0.0:
                best, best_val = z, v
        return best

    def domain_covers(self, lo, hi):
        return self.xs[0] <= lo + 1e-12 and self.xs[-1] >= hi - 1e-12


def default_node_cost() -> CostTerm:
    """Cost of a node's healing probability, written over the retention variable."""
    return AffineCost(-1.0, 1.0)


def default_edge_cost(g: SpreadingGraph, w: float) -> CostTerm:
    """Suppression cost of an edge, written over the powered survival variable."""
    exponent = (g.d_max - 1.0) / w
    if exponent <= 0.0:
        return AffineCost(0.0, 1.0)
    return PowerCost(exponent)


# ---------------------------------------------------------------------------
# problem specification and decision records

@dataclass(frozen=True)
class ControlSpec:
    """Decay target, transform exponent, box bounds, and cost descriptors.

    ``w`` defaults to one above the graph's maximum in-degree when left
    unset.  ``gamma`` lower bounds must stay strictly positive so the
    transform and the barrier remain differentiable (this also keeps
    transmission probabilities strictly below one, protecting the filter
    from zero-probability evidence).
    """

    r: float
    w: Optional[float] = None
    delta_c_bounds: tuple = (0.0, 1.0)
    gamma_bounds: tuple = (1e-9, 1.0)
    node_cost: Union[CostTerm, Sequence[CostTerm], None] = None
    edge_cost: Union[CostTerm, Sequence[CostTerm], None] = None

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError("decay rate r must lie strictly inside (0, 1)")
        if self.w is not None and not self.w > 0.0:
            raise ValueError("transform exponent must be positive")

    def effective_w(self, g: SpreadingGraph) -> float:
        w = float(self.w) if self.w is not None else g.d_max + 1.0
        if not w > g.d_max:
            raise ValueError(
                f"transform exponent {w} must exceed the maximum in-degree {g.d_max}")
        return w

    def resolved_node_costs(self, g: SpreadingGraph) -> list:
        return _spread_costs(self.node_cost, g.node_count, default_node_cost())

    def resolved_edge_costs(self, g: SpreadingGraph) -> list:
        default = default_edge_cost(g, self.effective_w(g))
        return _spread_costs(self.edge_cost, len(g.edges), default)


def _spread_costs(spec_value, count, default):
    if spec_value is None:
        return [default] * count
    if isinstance(spec_value, CostTerm):
        return [spec_value] * count
    costs = list(spec_value)
    if len(costs) != count:
        raise ValueError(f"expected {count} cost descriptors, got {len(costs)}")
    return costs


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    final_tolerance: float
    stages: int
    mode: str


@dataclass(frozen=True, eq=False)
class ControlDecision:
    """Selected parameters with the certified constraint slack.

    ``delta_star``/``beta_star`` are the back-transformed process parameters;
    ``delta_c``/``gamma`` keep the solver-space solution.  ``constraint_slack``
    is re-derived through the one-step predictors, never from the solver's own
    arithmetic; nonnegative means the decay constraint holds.
    """

    delta_star: np.ndarray
    beta_star: np.ndarray
    objective_value: float
    constraint_slack: float
    solver_diagnostics: SolveDiagnostics
    delta_c: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("delta_star", "beta_star", "delta_c", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            object.__setattr__(self, name, _frozen(arr))


# ---------------------------------------------------------------------------
# transformed constraint pieces (public operations)

def back_transform(delta_c, gamma, spec: ControlSpec,
                   g: SpreadingGraph) -> SISParams:
    """Recover process parameters from the transformed decision variables."""
    w = spec.effective_w(g)
    delta = 1.0 - np.asarray(delta_c, dtype=np.float64)
    beta = 1.0 - np.asarray(gamma, dtype=np.float64) ** (1.0 / w)
    return SISParams(np.clip(delta, 0.0, 1.0), np.clip(beta, 0.0, 1.0))


def transformed_infection_prob(i: int, X_obs, belief: BeliefState, gamma,
                               spec: ControlSpec, g: SpreadingGraph,
                               o: ObserverSet) -> float:
    """Next-step infection probability of susceptible node i in transformed variables.

    Convex in ``gamma`` whenever the transform exponent exceeds the maximum
    in-degree; agrees with the one-step predictors once the variables are
    back-transformed.
    """
    i = int(i)
    w = spec.effective_w(g)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.size != len(g.edges):
        raise ValueError("gamma length does not match the edge set")
    if gamma.size and (gamma.min() <= 0.0 or gamma.max() > 1.0):
        raise ValueError("gamma entries must lie in (0, 1]")
    X_obs = np.asarray(X_obs)
    slog = 0.0
    for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
        j = int(j)
        if o.mask[j] and X_obs[j]:
            slog += math.log(gamma[eid])
    slog /= w
    one_minus_q = -math.expm1(slog)
    if o.mask[i]:
        jp = unobserved_in_neighbor(g, o, i)
        if jp is None:
            return one_minus_q
        lq = math.log(gamma[g.edge_index[(jp, i)]]) / w
        return one_minus_q + math.exp(slog) * float(belief.xhat[jp]) * (-math.expm1(lq))
    for j in g.in_neighbors[i]:
        if not o.mask[j]:
            raise CoverViolation(
                f"unobserved node {i} has unobserved in-neighbor {int(j)}; "
                f"observer set is not a cover", node=i)
    return one_minus_q


def constraint_value(X_obs, belief: BeliefState, delta_c, gamma,
                     spec: ControlSpec, g: SpreadingGraph,
                     o: ObserverSet) -> float:
    """Decay-constraint gap: expected next infected count minus its budget.

    Negative values mean the candidate parameters are strictly feasible.
    """
    X_obs = np.asarray(X_obs)
    delta_c = np.asarray(delta_c, dtype=np.float64)
    xhat = belief.xhat
    lhs = 0.0
    for i in range(g.node_count):
        psi = transformed_infection_prob(i, X_obs, belief, gamma, spec, g, o)
        if o.mask[i]:
            lhs += delta_c[i] * X_obs[i] + psi * (1.0 - X_obs[i])
        else:
            lhs += delta_c[i] * xhat[i] + psi * (1.0 - xhat[i])
    return lhs - spec.r * float(xhat.sum())


# ---------------------------------------------------------------------------
# compiled constraint model for the barrier solver

class _ConstraintModel:
    """Constraint evaluation over the coupled decision variables.

    The decay constraint is an affine function of the retention variables
    plus, per node, products of powered survival variables over the node's
    infected observed in-neighbors (and its single unobserved in-neighbor,
    weighted by that node's belief).  Values are computed in a cancellation-
    free form so the constraint stays meaningful when beliefs are tiny;
    gradients and Hessians come from the raw monomial terms.
    """

    def __init__(self, X_obs, belief, spec, g, o, dlo, dhi, glo, ghi):
        n = g.node_count
        m = len(g.edges)
        w = spec.effective_w(g)
        xhat = belief.xhat
        X = np.asarray(X_obs, dtype=np.float64)
        a = np.where(o.mask, X, xhat)
        b = np.where(o.mask, 1.0 - X, 1.0 - xhat)
        infected_obs = o.mask & (X == 1.0)

        d_pinned = (dhi - dlo) <= 0.0
        g_pinned = (ghi - glo) <= 0.0
        self.r_total = spec.r * float(xhat.sum())
        # contributions this far below the constraint scale cannot move the
        # certified slack; dropping them keeps term products out of subnormals
        floor = max(1e-280, self.r_total * 1e-30)

        psi_b, psi_a, psi_s_sets, psi_ep = [], [], [], []
        terms = []  # (coef, member edge ids)
        for i in range(n):
            if o.mask[i]:
                jp = unobserved_in_neighbor(g, o, i)
            else:
                jp = None
                for j in g.in_neighbors[i]:
                    if not o.mask[j]:
                        raise CoverViolation(
                            f"unobserved node {i} has unobserved in-neighbor "
                            f"{int(j)}; observer set is not a cover", node=i)
            if b[i] <= floor:
                continue
            s_ids = [int(eid) for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i])
                     if infected_obs[j]]
            a_i = float(xhat[jp]) if jp is not None else 0.0
            if b[i] * a_i <= floor:
                a_i = 0.0
            ep = g.edge_index[(jp, i)] if jp is not None and a_i > 0.0 else -1
            psi_b.append(float(b[i]))
            psi_a.append(a_i)
            psi_s_sets.append(np.array(s_ids, dtype=np.int64))
            psi_ep.append(ep)
            coef_b = b[i] * (1.0 - a_i)
            if coef_b > floor and s_ids:
                terms.append((float(coef_b), np.array(s_ids, dtype=np.int64)))
            coef_a = b[i] * a_i
            if coef_a > 0.0:
                terms.append((float(coef_a),
                              np.array(s_ids + [ep], dtype=np.int64)))

        self.w = w
        self.n_nodes = n

        # variable layout: coupled retention variables then coupled survival variables
        self.coupled_delta = np.array(
            [i for i in range(n) if a[i] > 0.0 and not d_pinned[i]], dtype=np.int64)
        referenced = sorted({int(e) for _, ids in terms for e in ids})
        self.referenced_edges = np.array(referenced, dtype=np.int64)
        self.coupled_gamma = np.array(
            [e for e in referenced if not g_pinned[e]], dtype=np.int64)
        self.n_cd = self.coupled_delta.size
        self.dim = self.n_cd + self.coupled_gamma.size

        self.a_coupled = a[self.coupled_delta].astype(np.float64)
        self.const = float((a[d_pinned] * dlo[d_pinned]).sum())

        gamma_pos = np.full(m, -1, dtype=np.int64)
        gamma_pos[self.coupled_gamma] = self.n_cd + np.arange(self.coupled_gamma.size)
        self._gamma_pos = gamma_pos

        # gamma work vector: pinned edges fixed, unreferenced edges irrelevant
        gw = np.ones(m)
        gw[g_pinned] = glo[g_pinned]
        self._gamma_work = gw

        # flattened per-node survival-product segments for value evaluation
        self.psi_b = np.array(psi_b)
        self.psi_a = np.array(psi_a)
        self.psi_ep = np.array(psi_ep, dtype=np.int64)
        counts = np.array([ids.size for ids in psi_s_sets], dtype=np.int64)
        self.psi_s_concat = (np.concatenate(psi_s_sets) if psi_s_sets
                             else np.empty(0, dtype=np.int64))
        ends = np.cumsum(counts)
        self.psi_starts = ends - counts
        self.psi_ends = ends
        self._has_ep = self.psi_a > 0.0

        # flattened monomial terms for derivatives
        self.term_coefs = np.array([c for c, _ in terms])
        t_counts = np.array([ids.size for _, ids in terms], dtype=np.int64)
        self.term_members = (np.concatenate([ids for _, ids in terms])
                             if terms else np.empty(0, dtype=np.int64))
        t_ends = np.cumsum(t_counts)
        self.term_starts = t_ends - t_counts
        self.term_ends = t_ends
        self.term_counts = t_counts
        self.term_member_pos = gamma_pos[self.term_members] if terms else np.empty(0, dtype=np.int64)
        # static gather arrays for the vectorized Hessian
        member_term = (np.repeat(np.arange(self.term_coefs.size), t_counts)
                       if terms else np.empty(0, dtype=np.int64))
        valid = self.term_member_pos >= 0
        self._hm_edge = self.term_members[valid]
        self._hm_pos = self.term_member_pos[valid]
        self._hm_term = member_term[valid]

    # -- evaluation ---------------------------------------------------------

    def _fill(self, z):
        gw = self._gamma_work
        gw[self.coupled_gamma] = z[self.n_cd:]
        return gw

    def value(self, z) -> float:
        gw = self._fill(z)
        total = self.const - self.r_total
        if self.n_cd:
            total += float(self.a_coupled @ z[:self.n_cd])
        if self.psi_b.size:
            logs = np.log(gw)
            seg = np.concatenate(([0.0], np.cumsum(logs[self.psi_s_concat])))
            slog = (seg[self.psi_ends] - seg[self.psi_starts]) / self.w
            vals = -np.expm1(slog)
            if self._has_ep.any():
                sel = self._has_ep
                lq = logs[self.psi_ep[sel]] / self.w
                vals[sel] += np.exp(slog[sel]) * self.psi_a[sel] * (-np.expm1(lq))
            total += float(self.psi_b @ vals)
        return total

    def _term_products(self, gw):
        logs = np.log(gw)
        seg = np.concatenate(([0.0], np.cumsum(logs[self.term_members])))
        tsum = (seg[self.term_ends] - seg[self.term_starts]) / self.w
        return self.term_coefs * np.exp(tsum)

    def grad(self, z) -> np.ndarray:
        gw = self._fill(z)
        grad = np.zeros(self.dim)
        grad[:self.n_cd] = self.a_coupled
        if self.term_coefs.size:
            prods = self._term_products(gw)
            weights = np.repeat(prods, self.term_counts) / (self.w * gw[self.term_members])
            valid = self.term_member_pos >= 0
            if valid.any():
                grad -= np.bincount(self.term_member_pos[valid],
                                    weights=weights[valid], minlength=self.dim)
        return grad

    def hess(self, z) -> np.ndarray:
        gw = self._fill(z)
        h = np.zeros((self.dim, self.dim))
        if not self._hm_edge.size:
            return h
        prods = self._term_products(gw)
        gm = gw[self._hm_edge]
        v = prods[self._hm_term] / (self.w * gm)
        # Sum_k outer(v_k, v_k) / P_k via a (dim x terms) scatter matrix
        scatter = np.zeros((self.dim, prods.size))
        scatter[self._hm_pos, self._hm_term] = v
        h -= (scatter / prods) @ scatter.T
        diag = np.bincount(self._hm_pos, weights=prods[self._hm_term] / (self.w * gm * gm),
                           minlength=self.dim)
        idx = np.arange(self.dim)
        h[idx, idx] += diag
        return h


class _CostArray:
    """Vectorized value/slope/curvature over one variable block."""

    def __init__(self, costs):
        self.count = len(costs)
        aff_idx, aff_s, aff_b = [], [], []
        pow_idx, pow_e, pow_s = [], [], []
        self.pwl = []
        for k, c in enumerate(costs):
            if isinstance(c, AffineCost):
                aff_idx.append(k)
                aff_s.append(c.slope_coef)
                aff_b.append(c.intercept)
            elif isinstance(c, PowerCost):
                pow_idx.append(k)
                pow_e.append(c.exponent)
                pow_s.append(c.scale)
            else:
                self.pwl.append((k, c))
        self.aff_idx = np.array(aff_idx, dtype=np.int64)
        self.aff_s = np.array(aff_s)
        self.aff_b = np.array(aff_b)
        self.pow_idx = np.array(pow_idx, dtype=np.int64)
        self.pow_e = np.array(pow_e)
        self.pow_s = np.array(pow_s)

    def value(self, z) -> float:
        total = 0.0
        if self.aff_idx.size:
            total += float((self.aff_s * z[self.aff_idx] + self.aff_b).sum())
        if self.pow_idx.size:
            total += float((self.pow_s * z[self.pow_idx] ** self.pow_e).sum())
        for k, c in self.pwl:
            total += c.value(z[k])
        return total

    def slope(self, z) -> np.ndarray:
        out = np.zeros(self.count)
        if self.aff_idx.size:
            out[self.aff_idx] = self.aff_s
        if self.pow_idx.size:
            out[self.pow_idx] = self.pow_s * self.pow_e * z[self.pow_idx] ** (self.pow_e - 1.0)
        for k, c in self.pwl:
            out[k] = c.slope(z[k])
        return out

    def curvature(self, z) -> np.ndarray:
        out = np.zeros(self.count)
        if self.pow_idx.size:
            out[self.pow_idx] = (self.pow_s * self.pow_e * (self.pow_e - 1.0)
                                 * z[self.pow_idx] ** (self.pow_e - 2.0))
        for k, c in self.pwl:
            out[k] = c.curvature(z[k])
        return out


# ---------------------------------------------------------------------------
# barrier solver

def _newton_stage(model, cost_arr, z, lo, hi, t, dec_tol=1e-11, max_iter=60):
    dim = z.size

    def feval(zz):
        if np.any(zz <= lo) or np.any(zz >= hi):
            return np.inf
        c = model.value(zz)
        if c >= 0.0:
            return np.inf
        return (t * cost_arr.value(zz) - math.log(-c)
                - float(np.log(zz - lo).sum()) - float(np.log(hi - zz).sum()))

    f_cur = feval(z)
    iters = 0
    for _ in range(max_iter):
        c = model.value(z)
        cg = model.grad(z)
        inv_lo = 1.0 / (z - lo)
        inv_hi = 1.0 / (hi - z)
        grad = t * cost_arr.slope(z) + cg / (-c) - inv_lo + inv_hi
        h = model.hess(z) / (-c) + np.outer(cg, cg) / (c * c)
        h[np.arange(dim), np.arange(dim)] += (
            t * cost_arr.curvature(z) + inv_lo ** 2 + inv_hi ** 2)
        scale = max(1.0, float(np.trace(h)) / dim)
        lam = 0.0
        step = None
        for _ in range(40):
            try:
                step = np.linalg.solve(h + lam * np.eye(dim), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and float(grad @ step) < 0.0:
                break
            lam = max(lam * 10.0, 1e-10 * scale)
        else:
            break
        gs = float(grad @ step)
        if -gs / 2.0 <= dec_tol:
            break
        # fraction-to-boundary: do not waste line-search trials outside the box
        with np.errstate(divide="ignore"):
            room = np.where(step > 0.0, (hi - z) / step,
                            np.where(step < 0.0, (lo - z) / step, np.inf))
        alpha = min(1.0, 0.99 * float(room.min()))
        accepted = False
        while alpha > 1e-18:
            z_new = z + alpha * step
            f_new = feval(z_new)
            if f_new <= f_cur + 1e-4 * alpha * gs:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        iters += 1
        moved = float(np.abs(alpha * step).max())
        z, f_cur = z_new, f_new
        if moved <= 1e-15 * (1.0 + float(np.abs(z).max())):
            break
    return z, iters


def _feasible_start(model, lo, hi, corner, c_min):
    center = 0.5 * (lo + hi)
    c_center = model.value(center)
    denom = max(c_center - c_min, 0.0)
    eps = 1e-7 if denom == 0.0 else min(1e-7, 0.5 * (-c_min) / denom)
    inner = corner + eps * (center - corner)
    c_inner = model.value(inner)
    z = center
    for _ in range(200):
        if model.value(z) <= 0.5 * c_inner:
            return z
        z = 0.5 * (z + inner)
    return inner


def _barrier_solve(model, cost_arr, lo, hi, corner, c_min):
    z = _feasible_start(model, lo, hi, corner, c_min)
    m_log = 1 + 2 * z.size
    t = 1.0
    total_iters = 0
    stages = 0
    while True:
        final = m_log / t <= DUALITY_TARGET
        # intermediate stages only track the central path; solve them loosely
        z, it = _newton_stage(model, cost_arr, z, lo, hi, t,
                              dec_tol=1e-11 if final else 1e-6,
                              max_iter=80 if final else 40)
        total_iters += it
        stages += 1
        if final:
            break
        t *= 10.0
    return z, total_iters, stages, m_log / t


# ---------------------------------------------------------------------------
# main entry point

def _resolve_bounds(bounds, count, name, positive_lo=False):
    arr = np.asarray(bounds, dtype=np.float64)
    if arr.shape == (2,):
        lo = np.full(count, arr[0])
        hi = np.full(count, arr[1])
    elif arr.shape == (count, 2):
        lo = arr[:, 0].copy()
        hi = arr[:, 1].copy()
    else:
        raise ValueError(f"{name} bounds must be a (lo, hi) pair or a ({count}, 2) array")
    if count and (lo.min() < 0.0 or hi.max() > 1.0 or (lo > hi).any()):
        raise ValueError(f"{name} bounds must satisfy 0 <= lo <= hi <= 1")
    if positive_lo and count and lo.min() <= 0.0:
        raise ValueError(f"{name} lower bounds must be strictly positive")
    return lo, hi


def solve(X_obs, belief: BeliefState, spec: ControlSpec, g: SpreadingGraph,
          o: ObserverSet) -> ControlDecision:
    """Pick feasible cost-minimizing parameters for the current step.

    Raises :class:`Infeasible` when even the most aggressive corner of the
    box (maximal healing, minimal transmission) cannot meet the decay
    constraint.
    """
    X_obs = np.asarray(X_obs)
    if X_obs.size != g.node_count:
        raise ValueError("observation length does not match the graph")
    if not np.array_equal(o.mask, belief.observers.mask):
        raise ValueError("observer set does not match the belief state")
    if not np.array_equal(X_obs[o.mask].astype(np.float64), belief.xhat[o.mask]):
        raise ValueError("observed entries disagree with the belief state")
    n = g.node_count
    m = len(g.edges)
    dlo, dhi = _resolve_bounds(spec.delta_c_bounds, n, "delta_c")
    glo, ghi = _resolve_bounds(spec.gamma_bounds, m, "gamma", positive_lo=True)
    node_costs = spec.resolved_node_costs(g)
    edge_costs = spec.resolved_edge_costs(g)
    for costs, lo, hi in ((node_costs, dlo, dhi), (edge_costs, glo, ghi)):
        for k, c in enumerate(costs):
            if isinstance(c, PiecewiseLinearCost) and not c.domain_covers(lo[k], hi[k]):
                raise ValueError("piecewise-linear cost breakpoints must span the box")

    model = _ConstraintModel(X_obs, belief, spec, g, o, dlo, dhi, glo, ghi)

    delta_c = np.empty(n)
    gamma = np.empty(m)
    # pinned variables sit at their (unique) bound
    d_pinned = (dhi - dlo) <= 0.0
    g_pinned = (ghi - glo) <= 0.0
    delta_c[d_pinned] = dlo[d_pinned]
    gamma[g_pinned] = glo[g_pinned]
    # variables outside the constraint take their cost-minimal box value
    coupled_d = set(model.coupled_delta.tolist())
    coupled_g = set(model.coupled_gamma.tolist())
    for i in range(n):
        if not d_pinned[i] and i not in coupled_d:
            delta_c[i] = node_costs[i].box_argmin(dlo[i], dhi[i])
    for e in range(m):
        if not g_pinned[e] and e not in coupled_g:
            gamma[e] = edge_costs[e].box_argmin(glo[e], ghi[e])

    lo = np.concatenate([dlo[model.coupled_delta], glo[model.coupled_gamma]])
    hi = np.concatenate([dhi[model.coupled_delta], ghi[model.coupled_gamma]])
    corner = np.concatenate([dlo[model.coupled_delta], ghi[model.coupled_gamma]])

    c_min = model.value(corner) if model.dim else model.value(np.empty(0))
    if c_min > SLACK_TOLERANCE:
        raise Infeasible(
            f"decay constraint unreachable: minimal gap {c_min:.6e} over the "
            f"given boxes", min_lhs=c_min + model.r_total)

    if model.dim == 0 or c_min > -1e-9:
        z = corner
        diagnostics = SolveDiagnostics(0, 0.0, 0, "corner")
    else:
        cost_arr = _CostArray(
            [node_costs[i] for i in model.coupled_delta]
            + [edge_costs[e] for e in model.coupled_gamma])
        z, iters, stages, duality = _barrier_solve(model, cost_arr, lo, hi,
                                                   corner, c_min)
        diagnostics = SolveDiagnostics(iters, duality, stages, "barrier")

    delta_c[model.coupled_delta] = z[:model.n_cd]
    gamma[model.coupled_gamma] = z[model.n_cd:]

    def build_decision(dc, gm, diag):
        params = back_transform(dc, gm, spec, g)
        objective = (sum(node_costs[i].value(dc[i]) for i in range(n))
                     + sum(edge_costs[e].value(gm[e]) for e in range(m)))
        predicted = predict_all(belief, g, params, X_obs)
        slack = model.r_total - float(predicted.sum())
        return ControlDecision(
            delta_star=params.delta, beta_star=params.beta,
            objective_value=float(objective), constraint_slack=float(slack),
            solver_diagnostics=diag, delta_c=dc, gamma=gm), params

    decision, _ = build_decision(delta_c, gamma, diagnostics)

    # with a nonconvex objective the barrier can settle on a stationary point
    # costlier than the always-feasible aggressive corner; never return it
    fallback_obj = (sum(node_costs[i].value(dlo[i]) for i in range(n))
                    + sum(edge_costs[e].value(ghi[e]) for e in range(m)))
    if decision.objective_value > fallback_obj + 1e-9:
        dc = dlo.copy()
        gm = ghi.copy()
        decision, _ = build_decision(
            dc, gm, SolveDiagnostics(diagnostics.iterations,
                                     diagnostics.final_tolerance,
                                     diagnostics.stages, "fallback"))

    if decision.constraint_slack < -SLACK_TOLERANCE:
        raise RuntimeError(
            f"solver returned a decision whose certified slack "
            f"{decision.constraint_slack:.3e} violates the tolerance")
    return decision
