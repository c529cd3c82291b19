"""Decoding: exact argmax over the full product space, or over a proposal set.

Exact decoding scans every output-latent pair in canonical order and keeps
the first maximum, so ties resolve to the lowest canonical index. Feature
maps may expose a ``score_table`` method to score the whole space in one
matrix product; pairs with identical feature vectors then receive bitwise
identical scores and the tie-break still matches the per-pair scan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyProposalSet
from .features import _wvec
from .structures import (
    StructureSpace,
    StructuredPoint,
    enumerate_outputs,
    latent_count,
)


@dataclass
class Decoding:
    point: StructuredPoint
    score: float
    search_size: int


def exact_decode(w, x, space: StructureSpace, featmap) -> Decoding:
    """Highest-scoring (output, latent) pair over the whole product space."""
    outputs = enumerate_outputs(space)
    n_h = latent_count(space)
    if hasattr(featmap, "score_table"):
        table = featmap.score_table(w, x)
        flat = int(np.argmax(table))
        iy, ih = divmod(flat, n_h)
        return Decoding(
            StructuredPoint(outputs[iy], ih), float(table[iy, ih]), table.size
        )
    wv = _wvec(w)
    best_point = None
    best_score = -np.inf
    for y in outputs:
        for h in range(n_h):
            s = float(np.dot(wv, featmap.phi(x, StructuredPoint(y, h))))
            if s > best_score:
                best_point = StructuredPoint(y, h)
                best_score = s
    return Decoding(best_point, best_score, len(outputs) * n_h)


def random_decode(w, x, proposal_set, featmap) -> Decoding:
    """Highest-scoring member of a proposal set; ties take the earliest draw."""
    points = getattr(proposal_set, "points", proposal_set)
    if len(points) == 0:
        raise EmptyProposalSet("random decoding needs at least one proposal")
    wv = _wvec(w)
    best_point = None
    best_score = -np.inf
    for p in points:
        s = float(np.dot(wv, featmap.phi(x, p)))
        if s > best_score:
            best_point = p
            best_score = s
    return Decoding(best_point, best_score, len(points))
