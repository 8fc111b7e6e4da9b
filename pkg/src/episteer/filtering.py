"""Exact conditional inference and one-step prediction for partially observed SIS.

Valid whenever the observer set covers the moralized spreading graph.  Under
that condition every unobserved node has only observed in-neighbors and every
observed node has at most one unobserved in-neighbor, which is what lets the
per-node Bayes update below stay exact with a handful of products instead of
a joint distribution over all nodes.

The update for an unobserved node i combines three ingredients computed from
the previous estimates, the parameters applied at the previous step, and the
two most recent observation slices:

* the prior belief ``p`` carried from the previous step,
* the infection pressure on i from its (observed) in-neighbors, and
* likelihoods of the transitions of i's observed out-neighbors that were
  susceptible at the previous step, evaluated under both hypotheses about
  i's previous compartment.

Out-neighbors that were infected at the previous step transition on their
own healing draw and therefore carry no evidence about i; they are excluded
from the evidence sets by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CoverViolation, DegenerateEvidence
from .graphs import ObserverSet, SpreadingGraph, _frozen, unobserved_in_neighbor
from .simulate import SISParams


class TouchCounter:
    """Counts per-edge arithmetic touches for complexity instrumentation."""

    def __init__(self):
        self.touches = 0
        self.calls = 0
        self.max_per_call = 0

    def add(self, k: int = 1):
        self.touches += k

    def note_call(self, touches_in_call: int):
        self.calls += 1
        self.max_per_call = max(self.max_per_call, touches_in_call)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Per-node conditional infection probabilities at a fixed time.

    Sufficient statistic carried between steps: the estimates themselves,
    the parameters applied on the way here, and the two most recent
    observation slices (full-length vectors; only observed entries are
    meaningful).
    """

    xhat: np.ndarray
    observers: ObserverSet
    time_index: int = 0
    last_params: Optional[SISParams] = None
    obs_prev: Optional[np.ndarray] = None
    obs_cur: Optional[np.ndarray] = None

    def __post_init__(self):
        xhat = np.asarray(self.xhat, dtype=np.float64).copy()
        if xhat.ndim != 1 or xhat.size != self.observers.node_count:
            raise ValueError("belief length does not match the observer mask")
        if xhat.min() < 0.0 or xhat.max() > 1.0:
            raise ValueError("belief entries must lie in [0, 1]")
        if self.obs_cur is not None:
            obs = np.asarray(self.obs_cur)
            mask = self.observers.mask
            if not np.array_equal(xhat[mask], obs[mask].astype(np.float64)):
                raise ValueError("observed entries of the belief must equal the observation")
        object.__setattr__(self, "xhat", _frozen(xhat))


@dataclass(frozen=True, eq=False)
class EvidenceSets:
    """Observed out-neighbors of an unobserved node that were susceptible last step.

    Split by what they did next: ``healthy_again`` stayed susceptible,
    ``newly_infected`` transitioned to infected.
    """

    healthy_again: np.ndarray
    newly_infected: np.ndarray

    @property
    def all_members(self) -> np.ndarray:
        return np.concatenate([self.healthy_again, self.newly_infected])


def initial_belief(g: SpreadingGraph, observers: ObserverSet, prior,
                   obs0) -> BeliefState:
    """Bootstrap at time 0: observed entries from the observation, rest from the prior."""
    xhat = np.asarray(prior, dtype=np.float64).copy()
    if xhat.ndim == 0:
        xhat = np.full(g.node_count, float(xhat))
    if xhat.size != g.node_count:
        raise ValueError("prior length does not match the graph")
    obs0 = np.asarray(obs0)
    xhat[observers.mask] = obs0[observers.mask]
    return BeliefState(xhat=xhat, observers=observers, time_index=0,
                       last_params=None, obs_prev=None, obs_cur=obs0.copy())


def evidence_sets(g: SpreadingGraph, o: ObserverSet, i: int, prev_obs,
                  cur_obs) -> EvidenceSets:
    healthy_again, newly_infected = [], []
    for k in g.out_neighbors[int(i)]:
        k = int(k)
        if not o.mask[k] or prev_obs[k] != 0:
            continue
        (newly_infected if cur_obs[k] else healthy_again).append(k)
    return EvidenceSets(np.array(healthy_again, dtype=np.int64),
                        np.array(newly_infected, dtype=np.int64))


def infer_observed(i: int, obs) -> float:
    """An observed node's estimate is its observation."""
    return float(obs)


def likelihoods(g: SpreadingGraph, o: ObserverSet, prev_params: SISParams,
                prev_obs, cur_obs, i: int,
                counter: Optional[TouchCounter] = None):
    """Evidence likelihoods under both hypotheses about node i's last compartment.

    Returns ``(L1, L0)``: the probability of the observed transitions of the
    evidence set given that i was infected (L1) or susceptible (L0) at the
    previous step.  Empty evidence gives (1, 1).
    """
    i = int(i)
    ev = evidence_sets(g, o, i, prev_obs, cur_obs)
    beta = prev_params.beta
    l1 = 1.0
    l0 = 1.0
    for group, infected_now in ((ev.healthy_again, False), (ev.newly_infected, True)):
        for k in group:
            k = int(k)
            beta_ik = beta[g.edge_index[(i, k)]]
            p_k = 1.0
            for j, eid in zip(g.in_neighbors[k], g.in_edge_ids[k]):
                if counter is not None:
                    counter.add()
                j = int(j)
                if j == i:
                    continue
                if not o.mask[j]:
                    raise CoverViolation(
                        f"evidence node {k} has unobserved in-neighbor {j} "
                        f"besides {i}; observer set is not a cover", node=k)
                p_k *= 1.0 - beta[eid] * prev_obs[j]
            if infected_now:
                l1 *= 1.0 - (1.0 - beta_ik) * p_k
                l0 *= 1.0 - p_k
            else:
                l1 *= (1.0 - beta_ik) * p_k
                l0 *= p_k
    return l1, l0


def infer_unobserved(i: int, belief_prev: BeliefState, g: SpreadingGraph,
                     prev_params: SISParams, prev_obs, cur_obs,
                     counter: Optional[TouchCounter] = None) -> float:
    """Bayes update of an unobserved node's infection probability.

    Cost is a constant multiple of the squared maximum in-degree: one pass
    over i's in-edges for the infection pressure, plus one pass over the
    in-edges of each evidence node.
    """
    i = int(i)
    o = belief_prev.observers
    if o.mask[i]:
        raise ValueError(f"node {i} is observed; use infer_observed")
    touches_before = counter.touches if counter is not None else 0
    survival = 1.0
    for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
        if counter is not None:
            counter.add()
        j = int(j)
        if not o.mask[j]:
            raise CoverViolation(
                f"unobserved node {i} has unobserved in-neighbor {j}; "
                f"observer set is not a cover", node=i)
        survival *= 1.0 - prev_params.beta[eid] * prev_obs[j]
    q_inf = 1.0 - survival
    l1, l0 = likelihoods(g, o, prev_params, prev_obs, cur_obs, i, counter)
    p = float(belief_prev.xhat[i])
    denominator = l1 * p + l0 * (1.0 - p)
    if denominator < 1e-12:
        raise DegenerateEvidence(
            f"observed outcome has probability {denominator:.3e} under the "
            f"model while updating node {i}", node=i)
    numerator = (1.0 - prev_params.delta[i]) * l1 * p + q_inf * l0 * (1.0 - p)
    if counter is not None:
        counter.note_call(counter.touches - touches_before)
    return numerator / denominator


def predict_observed(i: int, belief: BeliefState, g: SpreadingGraph,
                     params: SISParams, cur_obs) -> float:
    """Next-step infection probability of an observed node under chosen params."""
    i = int(i)
    o = belief.observers
    if not o.mask[i]:
        raise ValueError(f"node {i} is unobserved; use predict_unobserved")
    x_i = float(cur_obs[i])
    jp = unobserved_in_neighbor(g, o, i)
    factor = 1.0
    if jp is not None:
        beta_jp = params.beta[g.edge_index[(jp, i)]]
        factor = 1.0 - beta_jp * float(belief.xhat[jp])
    survival = factor
    for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
        j = int(j)
        if not o.mask[j]:
            continue
        survival *= 1.0 - params.beta[eid] * cur_obs[j]
    return x_i * (1.0 - params.delta[i]) + (1.0 - x_i) * (1.0 - survival)


def predict_unobserved(i: int, belief: BeliefState, g: SpreadingGraph,
                       params: SISParams, cur_obs) -> float:
    """Next-step infection probability of an unobserved node under chosen params."""
    i = int(i)
    o = belief.observers
    if o.mask[i]:
        raise ValueError(f"node {i} is observed; use predict_observed")
    survival = 1.0
    for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
        j = int(j)
        if not o.mask[j]:
            raise CoverViolation(
                f"unobserved node {i} has unobserved in-neighbor {j}; "
                f"observer set is not a cover", node=i)
        survival *= 1.0 - params.beta[eid] * cur_obs[j]
    p = float(belief.xhat[i])
    return (1.0 - params.delta[i]) * p + (1.0 - survival) * (1.0 - p)


def predict_all(belief: BeliefState, g: SpreadingGraph, params: SISParams,
                cur_obs) -> np.ndarray:
    """Vector of next-step infection probabilities for every node."""
    out = np.empty(g.node_count)
    for i in range(g.node_count):
        if belief.observers.mask[i]:
            out[i] = predict_observed(i, belief, g, params, cur_obs)
        else:
            out[i] = predict_unobserved(i, belief, g, params, cur_obs)
    return out


def filter_step(belief_prev: BeliefState, g: SpreadingGraph,
                prev_params: SISParams, new_obs,
                counter: Optional[TouchCounter] = None) -> BeliefState:
    """Advance the belief one step given the new observation slice.

    Uses only the previous estimates and parameters plus the observations of
    the previous and current steps.
    """
    new_obs = np.asarray(new_obs)
    if new_obs.size != g.node_count:
        raise ValueError("observation length does not match the graph")
    if belief_prev.obs_cur is None:
        raise ValueError("previous belief carries no observation slice")
    prev_params.validate_for(g)
    o = belief_prev.observers
    prev_obs = belief_prev.obs_cur
    xhat = np.empty(g.node_count)
    for i in range(g.node_count):
        if o.mask[i]:
            xhat[i] = infer_observed(i, new_obs[i])
        else:
            xhat[i] = infer_unobserved(i, belief_prev, g, prev_params,
                                       prev_obs, new_obs, counter)
    return BeliefState(xhat=xhat, observers=o,
                       time_index=belief_prev.time_index + 1,
                       last_params=prev_params, obs_prev=prev_obs,
                       obs_cur=new_obs.copy())
