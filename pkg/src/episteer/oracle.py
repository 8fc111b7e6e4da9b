"""Brute-force exact filter over the full joint distribution.

Test-harness machinery for validating the per-node filter: propagates the
complete joint law of the process (state index ``s`` has node i infected iff
bit i of ``s`` is set), conditions on observation slices, and exposes the
conditional marginals.  Dense vectors throughout, so practical only for a
dozen or so nodes; a hard cap guards against accidental blowups.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroProbabilityEvidence
from .graphs import ObserverSet, SpreadingGraph, _frozen
from .simulate import SISParams

MAX_NODES = 20

_BITS_CACHE: dict = {}


def bits_matrix(n: int) -> np.ndarray:
    """(2^n, n) matrix of state bits as float64."""
    if n not in _BITS_CACHE:
        states = np.arange(1 << n, dtype=np.int64)
        bits = ((states[:, None] >> np.arange(n)) & 1).astype(np.float64)
        _BITS_CACHE[n] = _frozen(bits)
    return _BITS_CACHE[n]


@dataclass(frozen=True, eq=False)
class JointBelief:
    """Probability vector over all 2^n compartment combinations."""

    probs: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        if probs.ndim != 1 or probs.size & (probs.size - 1):
            raise ValueError("probability vector length must be a power of two")
        n = probs.size.bit_length() - 1
        if n > MAX_NODES:
            raise ValueError(f"joint distributions capped at {MAX_NODES} nodes, got {n}")
        if probs.min() < -1e-15:
            raise ValueError("probabilities must be nonnegative")
        np.clip(probs, 0.0, None, out=probs)
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def node_count(self) -> int:
        return self.probs.size.bit_length() - 1


def state_index(x) -> int:
    x = np.asarray(x)
    return int((x.astype(np.int64) << np.arange(x.size)).sum())


def point_mass(x, time_index: int = 0) -> JointBelief:
    x = np.asarray(x)
    probs = np.zeros(1 << x.size)
    probs[state_index(x)] = 1.0
    return JointBelief(probs, time_index)


def from_marginal_probs(p, time_index: int = 0) -> JointBelief:
    """Product distribution with the given per-node infection probabilities."""
    p = np.asarray(p, dtype=np.float64)
    probs = np.ones(1)
    for i in range(p.size):
        probs = np.concatenate([probs * (1.0 - p[i]), probs * p[i]])
    return JointBelief(probs, time_index)


def joint_pushforward(jb: JointBelief, g: SpreadingGraph,
                      params: SISParams) -> JointBelief:
    """Exact one-step transition of the joint law under the given parameters."""
    params.validate_for(g)
    n = jb.node_count
    if n != g.node_count:
        raise ValueError("joint belief size does not match the graph")
    size = 1 << n
    bits = bits_matrix(n)
    survival = np.ones((size, n))
    for i in range(n):
        for j, eid in zip(g.in_neighbors[i], g.in_edge_ids[i]):
            survival[:, i] *= 1.0 - params.beta[eid] * bits[:, int(j)]
    # conditional next-step infection probability of each node, per source state
    p_next = bits * (1.0 - params.delta) + (1.0 - bits) * (1.0 - survival)
    out = np.empty(size)
    block = max(1, (1 << 22) // size)
    for start in range(0, size, block):
        dest = np.arange(start, min(start + block, size))
        dest_bits = ((dest[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
        m = np.ones((size, dest.size))
        for i in range(n):
            m *= np.where(dest_bits[i], p_next[:, i:i + 1], 1.0 - p_next[:, i:i + 1])
        out[dest] = jb.probs @ m
    out /= out.sum()
    return JointBelief(out, jb.time_index + 1)


def condition_on_observation(jb: JointBelief, o: ObserverSet,
                             obs) -> JointBelief:
    """Bayes-condition on the observed slice; renormalizes the survivors."""
    n = jb.node_count
    if o.node_count != n:
        raise ValueError("observer mask length does not match the joint belief")
    members = o.members
    if members.size == 0:
        return JointBelief(jb.probs.copy(), jb.time_index)
    obs = np.asarray(obs, dtype=np.float64)
    bits = bits_matrix(n)
    consistent = np.all(bits[:, members] == obs[members], axis=1)
    mass = float(jb.probs[consistent].sum())
    if mass < 1e-15:
        raise ZeroProbabilityEvidence(
            f"observation has total mass {mass:.3e} under the joint belief")
    probs = np.where(consistent, jb.probs, 0.0) / mass
    return JointBelief(probs, jb.time_index)


def marginals(jb: JointBelief) -> np.ndarray:
    """Per-node infection probabilities of the joint law."""
    return jb.probs @ bits_matrix(jb.node_count)


def product_of_marginals_distance(jb: JointBelief, o: ObserverSet) -> float:
    """Largest pointwise gap between the unobserved joint and its marginal product.

    Zero exactly when the unobserved coordinates are independent under ``jb``.
    """
    n = jb.node_count
    unobserved = np.flatnonzero(~o.mask)
    k = unobserved.size
    if k == 0:
        return 0.0
    bits = bits_matrix(n)
    sub_index = (bits[:, unobserved] @ (1 << np.arange(k))).astype(np.int64)
    joint_u = np.bincount(sub_index, weights=jb.probs, minlength=1 << k)
    m = marginals(jb)[unobserved]
    product = np.ones(1)
    for i in range(k):
        product = np.concatenate([product * (1.0 - m[i]), product * m[i]])
    return float(np.abs(joint_u - product).max())
