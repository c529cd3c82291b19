import math

import numpy as np
import pytest

from randslack.errors import EmptyProposalSet
from randslack.features import InputX, SyntheticFeatureMap
from randslack.inference import exact_decode, random_decode
from randslack.sampling import ProposalSet
from randslack.structures import (
    Kind,
    OneHotBit,
    StructureSpace,
    StructuredPoint,
    enumerate_latents,
    enumerate_outputs,
    space_cardinality,
)


def oracle_decode(w, x, space, featmap):
    """Independent exhaustive scan with exactly-rounded accumulation."""
    best = None
    best_score = -math.inf
    for y in enumerate_outputs(space):
        for h in enumerate_latents(space):
            phi = featmap.phi(x, StructuredPoint(y, h))
            s = math.fsum(float(a) * float(b) for a, b in zip(w, phi))
            if s > best_score:
                best, best_score = StructuredPoint(y, h), s
    return best, best_score


def _random_case(space, featmap, rng):
    w = rng.standard_normal(featmap.dim) * rng.uniform(0.2, 3.0)
    x = InputX(bits=rng.integers(0, 2, featmap.dim).astype(np.float64))
    return w, x


def test_exact_decode_matches_oracle(perm3):
    fm = SyntheticFeatureMap(perm3)
    rng = np.random.default_rng(10)
    for _ in range(50):
        w, x = _random_case(perm3, fm, rng)
        dec = exact_decode(w, x, perm3, fm)
        point, s = oracle_decode(w, x, perm3, fm)
        assert dec.point == point
        assert dec.score == pytest.approx(s, abs=1e-10)
        assert dec.search_size == space_cardinality(perm3)


def test_exact_decode_all_ties_takes_first(perm3):
    fm = SyntheticFeatureMap(perm3)
    x = InputX(bits=np.zeros(fm.dim))
    dec = exact_decode(np.zeros(fm.dim), x, perm3, fm)
    assert dec.point == StructuredPoint(enumerate_outputs(perm3)[0], 0)
    assert dec.score == 0.0


def test_exact_decode_structured_ties_match_oracle(set42):
    # sparse weights create large exact-tie classes; tie-break must agree
    fm = SyntheticFeatureMap(set42)
    rng = np.random.default_rng(11)
    for _ in range(30):
        w = np.zeros(fm.dim)
        hot = rng.choice(fm.dim, 3, replace=False)
        w[hot] = rng.standard_normal(3)
        x = InputX(bits=rng.integers(0, 2, fm.dim).astype(np.float64))
        dec = exact_decode(w, x, set42, fm)
        point, _ = oracle_decode(w, x, set42, fm)
        assert dec.point == point


def test_exact_decode_minimal_space():
    # the smallest family instance: two permutations, four latent bits
    single = StructureSpace(Kind.PERMUTATION, 2, OneHotBit(4))
    fm = SyntheticFeatureMap(single)
    rng = np.random.default_rng(12)
    w, x = _random_case(single, fm, rng)
    dec = exact_decode(w, x, single, fm)
    point, s = oracle_decode(w, x, single, fm)
    assert dec.point == point and dec.score == pytest.approx(s, abs=1e-12)


def test_exact_decode_scaling_invariance(perm3):
    fm = SyntheticFeatureMap(perm3)
    rng = np.random.default_rng(13)
    for _ in range(20):
        w, x = _random_case(perm3, fm, rng)
        base = exact_decode(w, x, perm3, fm).point
        for c in (1e-6, 5.0, 1e3):
            assert exact_decode(c * w, x, perm3, fm).point == base


def test_random_decode_full_space_equals_exact(perm3):
    fm = SyntheticFeatureMap(perm3)
    rng = np.random.default_rng(14)
    w, x = _random_case(perm3, fm, rng)
    points = [
        StructuredPoint(y, h)
        for y in enumerate_outputs(perm3)
        for h in enumerate_latents(perm3)
    ]
    pset = ProposalSet(points=points, seed=0, n_prime=len(points))
    dec = random_decode(w, x, pset, fm)
    assert dec.point == exact_decode(w, x, perm3, fm).point


def test_random_decode_singleton_and_empty(perm3):
    fm = SyntheticFeatureMap(perm3)
    rng = np.random.default_rng(15)
    w, x = _random_case(perm3, fm, rng)
    lone = StructuredPoint((2, 1, 0), 3)
    dec = random_decode(w, x, ProposalSet([lone], 0, 1), fm)
    assert dec.point == lone and dec.search_size == 1
    with pytest.raises(EmptyProposalSet):
        random_decode(w, x, ProposalSet([], 0, 0), fm)


def test_random_decode_dominance_and_monotonicity(perm3):
    fm = SyntheticFeatureMap(perm3)
    rng = np.random.default_rng(16)
    all_points = [
        StructuredPoint(y, h)
        for y in enumerate_outputs(perm3)
        for h in enumerate_latents(perm3)
    ]
    for _ in range(1000):
        w, x = _random_case(perm3, fm, rng)
        exact = exact_decode(w, x, perm3, fm)
        k = rng.integers(1, 20)
        chosen = [all_points[i] for i in rng.choice(len(all_points), k)]
        small = random_decode(w, x, ProposalSet(chosen, 0, k), fm)
        assert small.score <= exact.score + 1e-12
        grown = chosen + [all_points[i] for i in rng.choice(len(all_points), 5)]
        big = random_decode(w, x, ProposalSet(grown, 0, len(grown)), fm)
        assert big.score >= small.score
