import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from randslack.errors import CardinalityOverflow, InvalidPoint, InvalidSpaceParams
from randslack.rng import Stream
from randslack.structures import (
    AFFINE_IDENTITY_CELL,
    AffineGrid,
    Kind,
    OneHotBit,
    StructureSpace,
    StructuredPoint,
    affine_cell_matrix,
    beta_constant,
    beta_constant_exact,
    binary_distortion,
    candidates,
    distortion,
    distortion_matrix,
    enumerate_latents,
    enumerate_outputs,
    is_valid_output,
    is_valid_point,
    latent_count,
    neighbors,
    output_from_text,
    output_index,
    output_to_text,
    sample_uniform,
    space_cardinality,
)

SMALL_SPACES = [
    StructureSpace(Kind.SPANNING_TREE, 3, OneHotBit(36)),
    StructureSpace(Kind.DAG, 4, OneHotBit(36), b=2),
    StructureSpace(Kind.CARD_SET, 5, OneHotBit(25), b=2),
    StructureSpace(Kind.PERMUTATION, 3, OneHotBit(9)),
]


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def test_enumeration_counts(tree4, set93, perm3, dag4):
    assert len(enumerate_outputs(perm3)) == 6
    assert len(enumerate_outputs(tree4)) == 64  # 16 per root x 4 roots
    assert len(enumerate_outputs(set93)) == math.comb(9, 3)
    # forward-edge DAGs, in-degree <= 2: 1 * 2 * 4 * 7 choices per node
    assert len(enumerate_outputs(dag4)) == 56


def test_enumeration_no_duplicates_and_valid():
    for space in SMALL_SPACES:
        outs = enumerate_outputs(space)
        assert len(set(outs)) == len(outs)
        assert all(is_valid_output(space, y) for y in outs)


def test_tree_enumeration_against_bruteforce(tree4):
    # independent oracle: filter all 3-subsets of directed edges
    from itertools import combinations

    cands = candidates(tree4)
    count = 0
    for sub in combinations(range(len(cands)), 3):
        mask = sum(1 << k for k in sub)
        if is_valid_output(tree4, mask):
            count += 1
    assert count == 64


def test_latent_counts():
    assert len(list(enumerate_latents(StructureSpace(Kind.PERMUTATION, 4, OneHotBit(144))))) == 144
    assert len(list(enumerate_latents(StructureSpace(Kind.PERMUTATION, 4, AffineGrid())))) == 81
    assert len(list(enumerate_latents(StructureSpace(Kind.PERMUTATION, 4, OneHotBit(1))))) == 1


def test_enumeration_cap():
    big = StructureSpace(Kind.SPANNING_TREE, 9, OneHotBit(1))
    with pytest.raises(CardinalityOverflow):
        enumerate_outputs(big)


def test_space_param_validation():
    with pytest.raises(InvalidSpaceParams):
        StructureSpace(Kind.DAG, 4, OneHotBit(1), b=3)  # b > v-2
    with pytest.raises(InvalidSpaceParams):
        StructureSpace(Kind.CARD_SET, 5, OneHotBit(1), b=3)  # b > v/2
    with pytest.raises(InvalidSpaceParams):
        StructureSpace(Kind.PERMUTATION, 1, OneHotBit(1))


def test_affine_grid_cells():
    ident = affine_cell_matrix(AFFINE_IDENTITY_CELL)
    assert np.allclose(ident, np.eye(2))
    seen = {affine_cell_matrix(c).tobytes() for c in range(81)}
    assert len(seen) == 81
    corner = affine_cell_matrix(0)
    assert np.allclose(corner, [[0.8, -0.2], [-0.2, 0.8]])


# ---------------------------------------------------------------------------
# uniform sampling
# ---------------------------------------------------------------------------


def test_sample_uniform_determinism(tree4):
    a = sample_uniform(tree4, Stream(99))
    b = sample_uniform(tree4, Stream(99))
    assert a == b
    assert is_valid_point(tree4, a)


def test_sample_uniform_frequencies_perm3(perm3):
    outs = enumerate_outputs(perm3)
    idx = output_index(perm3)
    counts = np.zeros(len(outs))
    stream = Stream(2024)
    n = 60_000
    for _ in range(n):
        counts[idx[sample_uniform(perm3, stream).output]] += 1
    assert np.all(np.abs(counts / n - 1 / 6) < 0.01)


def test_sample_uniform_frequencies_set93(set93):
    idx = output_index(set93)
    counts = np.zeros(84)
    stream = Stream(7)
    n = 840_000
    for _ in range(n):
        counts[idx[sample_uniform(set93, stream).output]] += 1
    assert np.all(np.abs(counts / n - 1 / 84) < 0.002)


CHI_SQUARE_SPACES = [
    StructureSpace(Kind.SPANNING_TREE, 3, OneHotBit(4)),
    StructureSpace(Kind.DAG, 4, OneHotBit(4), b=2),
    StructureSpace(Kind.CARD_SET, 5, OneHotBit(4), b=2),
    StructureSpace(Kind.PERMUTATION, 3, OneHotBit(4)),
]


@pytest.mark.parametrize("space", CHI_SQUARE_SPACES, ids=lambda s: s.kind.value)
def test_sample_uniform_chi_square(space):
    # goodness of fit over the (output, latent) product at >= 1e4 * |space|
    card = space_cardinality(space)
    n_h = latent_count(space)
    idx = output_index(space)
    draws = 10_000 * card
    counts = np.zeros(card)
    stream = Stream(31337)
    for _ in range(draws):
        p = sample_uniform(space, stream)
        counts[idx[p.output] * n_h + p.latent] += 1
    result = stats.chisquare(counts)
    assert result.pvalue > 0.001


# ---------------------------------------------------------------------------
# neighborhoods
# ---------------------------------------------------------------------------


def test_neighbors_perm3_output_moves(perm3):
    pt = StructuredPoint((0, 1, 2), 4)
    out_moves = [q for q in neighbors(perm3, pt) if q.latent == 4]
    assert len(out_moves) == 3  # the three transpositions


def test_neighbors_onehot_clamps():
    space = StructureSpace(Kind.PERMUTATION, 3, OneHotBit(5))
    pt = StructuredPoint((0, 1, 2), 0)
    lat_moves = [q.latent for q in neighbors(space, pt) if q.output == pt.output]
    assert lat_moves == [1]
    pt = StructuredPoint((0, 1, 2), 4)
    lat_moves = [q.latent for q in neighbors(space, pt) if q.output == pt.output]
    assert lat_moves == [3]


def test_neighbors_cardset_count(set93):
    pt = StructuredPoint((0, 1, 2), 0)
    out_moves = [q for q in neighbors(set93, pt) if q.latent == 0]
    assert len(out_moves) == 18  # 3 removable x 6 addable


def test_neighbors_affine_grid_moves(perm4_grid):
    pt = StructuredPoint((0, 1, 2, 3), AFFINE_IDENTITY_CELL)
    lat_moves = [q.latent for q in neighbors(perm4_grid, pt) if q.output == pt.output]
    assert len(lat_moves) == 8  # four coordinates, two directions, no clamps
    corner = StructuredPoint((0, 1, 2, 3), 0)
    lat_moves = [q.latent for q in neighbors(perm4_grid, corner) if q.output == corner.output]
    assert len(lat_moves) == 4


def test_neighbors_rejects_invalid(perm3):
    with pytest.raises(InvalidPoint):
        neighbors(perm3, StructuredPoint((0, 0, 2), 0))


@pytest.mark.parametrize("space", SMALL_SPACES, ids=lambda s: s.kind.value)
def test_neighbor_symmetry_and_validity(space):
    # q in N(p) iff p in N(q), and every neighbor is valid
    points = [
        StructuredPoint(y, h)
        for y in enumerate_outputs(space)
        for h in (0, latent_count(space) - 1)
    ]
    nbr_map = {p: set(neighbors(space, p)) for p in points}
    for p in points:
        for q in nbr_map[p]:
            assert is_valid_point(space, q)
            if q in nbr_map:
                assert p in nbr_map[q]


def test_tree_swap_changes_root_is_reachable(tree3):
    # single-swap moves must connect trees with different roots
    star0 = output_from_text(tree3, "0->1,0->2")
    pt = StructuredPoint(star0, 0)
    moved = {output_to_text(tree3, q.output) for q in neighbors(tree3, pt)}
    assert "0->2,1->0" in moved


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("space", SMALL_SPACES, ids=lambda s: s.kind.value)
def test_distortion_identity_symmetry_range(space):
    outs = enumerate_outputs(space)
    for y in outs:
        assert distortion(space, y, y) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(200):
        y1, y2 = rng.choice(len(outs), 2)
        d12 = distortion(space, outs[y1], outs[y2])
        d21 = distortion(space, outs[y2], outs[y1])
        assert d12 == d21
        assert 0.0 <= d12 <= 1.0


def test_distortion_full_derangement(perm3):
    assert distortion(perm3, (0, 1, 2), (1, 2, 0)) == 1.0


def test_distortion_tree_hand_pair(tree4):
    # two trees sharing exactly one of three edges: (2+2)/(2*3) = 2/3
    y1 = output_from_text(tree4, "0->1,0->2,0->3")
    y2 = output_from_text(tree4, "0->1,1->2,2->3")
    assert is_valid_output(tree4, y1) and is_valid_output(tree4, y2)
    assert distortion(tree4, y1, y2) == pytest.approx(2 / 3, abs=1e-15)


def test_distortion_latent_is_ignored(perm3):
    assert distortion(perm3, (0, 1, 2), (1, 0, 2), 3) == distortion(
        perm3, (0, 1, 2), (1, 0, 2), 7
    )


def test_distortion_invalid_point(perm3):
    with pytest.raises(InvalidPoint):
        distortion(perm3, (0, 1, 2), (0, 0, 2))


def test_binary_distortion():
    assert binary_distortion((0, 1), (0, 1)) == 0.0
    assert binary_distortion((0, 1), (1, 0)) == 1.0


@pytest.mark.parametrize("space", SMALL_SPACES, ids=lambda s: s.kind.value)
def test_distortion_matrix_matches_pointwise(space):
    outs = enumerate_outputs(space)
    mat = distortion_matrix(space)
    rng = np.random.default_rng(1)
    for _ in range(100):
        i, j = rng.choice(len(outs), 2)
        assert mat[i, j] == distortion(space, outs[i], outs[j])


# ---------------------------------------------------------------------------
# family constants
# ---------------------------------------------------------------------------


def test_beta_constants(tree4, dag4, set93, perm3):
    assert beta_constant(tree4) == pytest.approx(2 / 3)
    assert beta_constant(dag4) == pytest.approx(10 / 12)
    assert beta_constant(set93) == 0.5
    assert beta_constant(perm3) == pytest.approx(2 / 3)
    assert beta_constant_exact(StructureSpace(Kind.PERMUTATION, 9, OneHotBit(1))) == Fraction(2, 3)
    assert beta_constant_exact(StructureSpace(Kind.SPANNING_TREE, 5, OneHotBit(1))) == Fraction(3, 4)


# ---------------------------------------------------------------------------
# text encodings
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("space", SMALL_SPACES, ids=lambda s: s.kind.value)
def test_text_round_trip(space):
    for y in enumerate_outputs(space):
        assert output_from_text(space, output_to_text(space, y)) == y


def test_text_formats(tree3, set93, perm3):
    star = output_from_text(tree3, "0->1,0->2")
    assert output_to_text(tree3, star) == "0->1,0->2"
    assert output_to_text(set93, (0, 4, 7)) == "0,4,7"
    assert output_to_text(perm3, (2, 0, 1)) == "2,0,1"
