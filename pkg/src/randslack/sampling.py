"""Greedy local proposal sampling and proposal-set construction.

A proposal draw starts at a uniform point of the output-latent product space
and repeatedly moves to the best strictly-improving neighbor until none
exists. Every branch is a score comparison, so the sampled point depends on
the weights only through the ordering they induce: any positive rescaling of
the weights yields the same draw from the same stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBeta, StepCapExceeded
from .features import _wvec
from .rng import Stream, derive_key
from .structures import (
    StructureSpace,
    StructuredPoint,
    neighbors,
    sample_uniform,
    space_cardinality,
)


@dataclass
class ProposalSet:
    """Sampled output-latent pairs for one training sample, with provenance."""

    points: list[StructuredPoint]
    seed: int
    n_prime: int
    beta: float | None = None
    gamma: float | None = None
    w_l2: float | None = None
    n: int | None = None


def proposal_set_size(beta: float, gamma: float, w_l2: float, n: int) -> int:
    """ceil(0.5 * max(1/log(1/beta), 128*gamma^2*||w||^2) * log n), at least 1."""
    if not 0.0 <= beta < 1.0:
        raise InvalidBeta(f"beta must lie in [0, 1), got {beta}")
    if n < 2:
        raise ValueError("the size formula needs n >= 2")
    beta_term = 0.0 if beta == 0.0 else 1.0 / math.log(1.0 / beta)
    raw = 0.5 * max(beta_term, 128.0 * gamma * gamma * w_l2 * w_l2) * math.log(n)
    return max(1, math.ceil(raw))


def _step_cap(space: StructureSpace, start_neighborhood: int) -> int:
    log_space = max(1.0, math.log2(space_cardinality(space)))
    return max(1, math.ceil(10 * max(1, start_neighborhood) * log_space))


def greedy_local_sample(
    w, x, space: StructureSpace, featmap, rng: Stream
) -> StructuredPoint:
    """One draw from the greedy local proposal distribution.

    Moves to the best strictly-improving neighbor each step (ties take the
    first in canonical neighbor order) until the point is locally optimal.
    """
    wv = _wvec(w)
    current = sample_uniform(space, rng)
    current_score = float(np.dot(wv, featmap.phi(x, current)))
    cap = None
    steps = 0
    while True:
        nbrs = neighbors(space, current)
        if cap is None:
            cap = _step_cap(space, len(nbrs))
        best = None
        best_score = current_score
        for q in nbrs:
            s = float(np.dot(wv, featmap.phi(x, q)))
            if s > best_score:
                best = q
                best_score = s
        if best is None:
            return current
        current, current_score = best, best_score
        steps += 1
        if steps > cap:
            raise StepCapExceeded(f"local search exceeded {cap} steps")


def build_proposal_set(
    w,
    x,
    space: StructureSpace,
    featmap,
    size: int,
    seed: int,
    *,
    beta: float | None = None,
    gamma: float | None = None,
    w_l2: float | None = None,
    n: int | None = None,
) -> ProposalSet:
    """``size`` independent greedy draws, each on its own sub-stream of seed.

    Draw k always uses the stream keyed by (seed, k), so building the set in
    any processing order yields the same sequence of points.
    """
    if size < 1:
        raise ValueError("proposal sets need size >= 1")
    points = [
        greedy_local_sample(w, x, space, featmap, Stream(derive_key(seed, k)))
        for k in range(size)
    ]
    return ProposalSet(
        points=points,
        seed=seed,
        n_prime=size,
        beta=beta,
        gamma=gamma,
        w_l2=w_l2,
        n=n,
    )
