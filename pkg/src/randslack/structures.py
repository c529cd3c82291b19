"""Structured-output families: trees, DAGs, cardinality sets, permutations.

Each family defines a canonical encoding, exhaustive enumeration in a fixed
order, uniform sampling, a single-change neighborhood, a normalized distortion
in [0, 1], and the distortion-mass constant used to size proposal sets.

Encodings:
  * spanning trees and DAGs: an integer bitmask over the space's candidate
    edge list (directed pairs in lexicographic order),
  * cardinality-constrained sets: a sorted tuple of element indices,
  * permutations: the image tuple (y[i] is the value at position i),
  * latent assignments: a flat integer index.

Spanning trees are arborescences over all possible roots: exactly one node
with in-degree zero, every other node with in-degree one, all nodes reachable
from the root. DAGs fix the natural node order 0 < 1 < ... < v-1, allow only
forward edges i -> j with i < j, and bound each node's in-degree by b.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from typing import Iterable, Sequence

import numpy as np

from .errors import CardinalityOverflow, InvalidPoint, InvalidSpaceParams
from .rng import Stream

ENUMERATION_CAP = 10**6

AFFINE_DIAG = (0.8, 1.0, 1.2)
AFFINE_OFFDIAG = (-0.2, 0.0, 0.2)
AFFINE_CELLS = 81


class Kind(Enum):
    SPANNING_TREE = "tree"
    DAG = "dag"
    CARD_SET = "set"
    PERMUTATION = "perm"


@dataclass(frozen=True)
class OneHotBit:
    """Latent space of one-hot vectors, encoded by the hot index."""

    dim: int


@dataclass(frozen=True)
class AffineGrid:
    """3^4 grid of 2x2 affine matrices, encoded by a flat cell index.

    Diagonal entries range over {0.8, 1, 1.2} and off-diagonal entries over
    {-0.2, 0, 0.2}; the flat index is base-3 over (h11, h12, h21, h22).
    """


LatentKind = OneHotBit | AffineGrid


@dataclass(frozen=True)
class StructureSpace:
    """One combinatorial family with its size parameters and latent space.

    ``b`` is the in-degree bound for DAGs and the cardinality for sets; it is
    ignored for trees and permutations.
    """

    kind: Kind
    v: int
    latent: LatentKind
    b: int = 0

    def __post_init__(self):
        if self.v < 1:
            raise InvalidSpaceParams("node/element count must be positive")
        if self.kind is Kind.SPANNING_TREE and self.v < 2:
            raise InvalidSpaceParams("spanning trees need at least 2 nodes")
        if self.kind is Kind.DAG and not (2 <= self.b <= self.v - 2):
            raise InvalidSpaceParams("DAGs require 2 <= b <= v-2")
        if self.kind is Kind.CARD_SET and not (1 <= self.b <= self.v / 2):
            raise InvalidSpaceParams("sets require 1 <= b <= v/2")
        if self.kind is Kind.PERMUTATION and self.v < 2:
            raise InvalidSpaceParams("permutations require v > 1")
        if isinstance(self.latent, OneHotBit) and self.latent.dim < 1:
            raise InvalidSpaceParams("one-hot latent dimension must be positive")


@dataclass(frozen=True)
class StructuredPoint:
    """One (output, latent) pair in a space's canonical encoding."""

    output: object
    latent: int


# ---------------------------------------------------------------------------
# candidate edge/element lists
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def candidates(space: StructureSpace) -> tuple:
    """Candidate edges/elements, in the order used by bitmask encodings.

    Trees use all v(v-1) directed pairs, DAGs the forward pairs i < j, sets
    and permutations the v ground elements/values.
    """
    v = space.v
    if space.kind is Kind.SPANNING_TREE:
        return tuple((i, j) for i in range(v) for j in range(v) if i != j)
    if space.kind is Kind.DAG:
        return tuple((i, j) for i in range(v) for j in range(i + 1, v))
    return tuple(range(v))


@lru_cache(maxsize=None)
def _candidate_index(space: StructureSpace) -> dict:
    return {c: k for k, c in enumerate(candidates(space))}


def candidate_mask(space: StructureSpace, output) -> np.ndarray:
    """0/1 vector over candidates marking which ones the output uses.

    Permutations use every value, so their mask is all ones.
    """
    n = len(candidates(space))
    mask = np.zeros(n, dtype=np.uint8)
    if space.kind in (Kind.SPANNING_TREE, Kind.DAG):
        bits = output
        k = 0
        while bits:
            if bits & 1:
                mask[k] = 1
            bits >>= 1
            k += 1
        return mask
    if space.kind is Kind.CARD_SET:
        mask[list(output)] = 1
        return mask
    mask[:] = 1
    return mask


def _edges_of(space: StructureSpace, mask: int) -> list:
    cands = candidates(space)
    return [cands[k] for k in range(len(cands)) if (mask >> k) & 1]


def _mask_of(space: StructureSpace, edges: Iterable) -> int:
    idx = _candidate_index(space)
    m = 0
    for e in edges:
        m |= 1 << idx[e]
    return m


# ---------------------------------------------------------------------------
# validity
# ---------------------------------------------------------------------------


def is_valid_output(space: StructureSpace, output) -> bool:
    v = space.v
    if space.kind is Kind.SPANNING_TREE:
        if not isinstance(output, int) or output < 0 or output >> (v * (v - 1)):
            return False
        edges = _edges_of(space, output)
        if len(edges) != v - 1:
            return False
        indeg = [0] * v
        children: list[list[int]] = [[] for _ in range(v)]
        for i, j in edges:
            indeg[j] += 1
            children[i].append(j)
        roots = [k for k in range(v) if indeg[k] == 0]
        if len(roots) != 1 or any(d > 1 for d in indeg):
            return False
        seen = {roots[0]}
        stack = [roots[0]]
        while stack:
            for t in children[stack.pop()]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return len(seen) == v
    if space.kind is Kind.DAG:
        ncand = len(candidates(space))
        if not isinstance(output, int) or output < 0 or output >> ncand:
            return False
        indeg = [0] * v
        for i, j in _edges_of(space, output):
            indeg[j] += 1
        return all(d <= space.b for d in indeg)
    if space.kind is Kind.CARD_SET:
        if not isinstance(output, tuple) or len(output) != space.b:
            return False
        return (
            all(isinstance(e, int) and 0 <= e < v for e in output)
            and tuple(sorted(set(output))) == output
        )
    if not isinstance(output, tuple) or len(output) != v:
        return False
    return sorted(output) == list(range(v))


def is_valid_point(space: StructureSpace, point: StructuredPoint) -> bool:
    return (
        is_valid_output(space, point.output)
        and 0 <= point.latent < latent_count(space)
    )


def _require_valid(space: StructureSpace, point: StructuredPoint) -> None:
    if not is_valid_point(space, point):
        raise InvalidPoint(f"invalid point for {space.kind.value}: {point}")


# ---------------------------------------------------------------------------
# counting and enumeration
# ---------------------------------------------------------------------------


def output_count(space: StructureSpace) -> int:
    v = space.v
    if space.kind is Kind.SPANNING_TREE:
        return v ** (v - 1)
    if space.kind is Kind.DAG:
        total = 1
        for j in range(v):
            total *= sum(math.comb(j, k) for k in range(min(j, space.b) + 1))
        return total
    if space.kind is Kind.CARD_SET:
        return math.comb(v, space.b)
    return math.factorial(v)


def latent_count(space: StructureSpace) -> int:
    if isinstance(space.latent, OneHotBit):
        return space.latent.dim
    return AFFINE_CELLS


def space_cardinality(space: StructureSpace) -> int:
    return output_count(space) * latent_count(space)


def _enumerate_trees(space: StructureSpace) -> list[int]:
    v = space.v
    masks = []
    for root in range(v):
        others = [k for k in range(v) if k != root]
        choices = [[p for p in range(v) if p != node] for node in others]

        def walk(pos: int, parent_of: dict):
            if pos == len(others):
                # every non-root has one parent; tree iff no cycles
                for node in others:
                    seen = set()
                    cur = node
                    while cur != root:
                        if cur in seen:
                            return
                        seen.add(cur)
                        cur = parent_of[cur]
                masks.append(_mask_of(space, ((parent_of[n], n) for n in others)))
                return
            node = others[pos]
            for p in choices[pos]:
                parent_of[node] = p
                walk(pos + 1, parent_of)
            del parent_of[node]

        walk(0, {})
    return sorted(masks)


def _enumerate_dags(space: StructureSpace) -> list[int]:
    v, b = space.v, space.b
    per_node = []
    for j in range(v):
        opts = []
        for k in range(min(j, b) + 1):
            opts.extend(combinations(range(j), k))
        per_node.append(opts)
    masks = [0]
    for j in range(v):
        idx = _candidate_index(space)
        grown = []
        for m in masks:
            for parents in per_node[j]:
                add = 0
                for i in parents:
                    add |= 1 << idx[(i, j)]
                grown.append(m | add)
        masks = grown
    return sorted(masks)


@lru_cache(maxsize=None)
def enumerate_outputs(space: StructureSpace) -> tuple:
    """All valid outputs exactly once, sorted by their canonical encoding."""
    n = output_count(space)
    if n > ENUMERATION_CAP:
        raise CardinalityOverflow(
            f"{space.kind.value} space has {n} outputs, cap is {ENUMERATION_CAP}"
        )
    if space.kind is Kind.SPANNING_TREE:
        return tuple(_enumerate_trees(space))
    if space.kind is Kind.DAG:
        return tuple(_enumerate_dags(space))
    if space.kind is Kind.CARD_SET:
        return tuple(combinations(range(space.v), space.b))
    return tuple(permutations(range(space.v)))


def enumerate_latents(space: StructureSpace) -> range:
    """Latent indices in canonical order."""
    return range(latent_count(space))


@lru_cache(maxsize=None)
def output_index(space: StructureSpace) -> dict:
    return {y: i for i, y in enumerate(enumerate_outputs(space))}


def affine_cell_matrix(cell: int) -> np.ndarray:
    """Decode a flat grid index into the 2x2 affine matrix it names."""
    if not 0 <= cell < AFFINE_CELLS:
        raise InvalidPoint(f"affine cell {cell} out of range")
    d22 = cell % 3
    d21 = (cell // 3) % 3
    d12 = (cell // 9) % 3
    d11 = cell // 27
    return np.array(
        [
            [AFFINE_DIAG[d11], AFFINE_OFFDIAG[d12]],
            [AFFINE_OFFDIAG[d21], AFFINE_DIAG[d22]],
        ]
    )


AFFINE_IDENTITY_CELL = 40  # digits (1,1,1,1): diag 1.0, off-diag 0.0


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_uniform(space: StructureSpace, rng: Stream) -> StructuredPoint:
    """Uniform draw from the output-latent product space."""
    outputs = enumerate_outputs(space)
    n_h = latent_count(space)
    flat = rng.uniform_index(len(outputs) * n_h)
    return StructuredPoint(outputs[flat // n_h], flat % n_h)


# ---------------------------------------------------------------------------
# neighborhoods
# ---------------------------------------------------------------------------


def _output_neighbors(space: StructureSpace, output) -> list:
    if space.kind in (Kind.SPANNING_TREE, Kind.DAG):
        cands = candidates(space)
        present = [k for k in range(len(cands)) if (output >> k) & 1]
        absent = [k for k in range(len(cands)) if not (output >> k) & 1]
        found = []
        for e in present:
            removed = output & ~(1 << e)
            for f in absent:
                cand = removed | (1 << f)
                if is_valid_output(space, cand):
                    found.append(cand)
        return sorted(found)
    if space.kind is Kind.CARD_SET:
        members = set(output)
        found = []
        for a in output:
            for c in range(space.v):
                if c not in members:
                    found.append(tuple(sorted(members - {a} | {c})))
        return sorted(found)
    found = []
    y = list(output)
    for i in range(space.v):
        for j in range(i + 1, space.v):
            y2 = list(y)
            y2[i], y2[j] = y2[j], y2[i]
            found.append(tuple(y2))
    return sorted(found)


def _latent_neighbors(space: StructureSpace, latent: int) -> list[int]:
    if isinstance(space.latent, OneHotBit):
        # hot-index adjacency, clamped at both ends (no wraparound)
        out = []
        if latent > 0:
            out.append(latent - 1)
        if latent < space.latent.dim - 1:
            out.append(latent + 1)
        return out
    digits = [latent // 27, (latent // 9) % 3, (latent // 3) % 3, latent % 3]
    weights = (27, 9, 3, 1)
    out = []
    for pos in range(4):
        for step in (-1, 1):
            d = digits[pos] + step
            if 0 <= d <= 2:
                out.append(latent + step * weights[pos])
    return sorted(out)


def neighbors(space: StructureSpace, point: StructuredPoint) -> list[StructuredPoint]:
    """All single-change moves: one edge/element swap (or transposition) with
    the latent fixed, plus one contiguous latent step with the output fixed."""
    _require_valid(space, point)
    moves = [
        StructuredPoint(y2, point.latent)
        for y2 in _output_neighbors(space, point.output)
    ]
    moves.extend(
        StructuredPoint(point.output, h2)
        for h2 in _latent_neighbors(space, point.latent)
    )
    return moves


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------


def _distortion_denominator(space: StructureSpace) -> int:
    if space.kind is Kind.SPANNING_TREE:
        return 2 * (space.v - 1)
    if space.kind is Kind.DAG:
        return space.b * (2 * space.v - space.b - 1)
    if space.kind is Kind.CARD_SET:
        return 2 * space.b
    return space.v


def _distortion_numerator(space: StructureSpace, y, y_hat) -> int:
    if space.kind in (Kind.SPANNING_TREE, Kind.DAG):
        return (y ^ y_hat).bit_count()
    if space.kind is Kind.CARD_SET:
        return len(set(y) ^ set(y_hat))
    return sum(1 for a, c in zip(y, y_hat) if a != c)


def distortion(space: StructureSpace, y, y_hat, h_hat: int | None = None) -> float:
    """Normalized dissimilarity in [0, 1]; the latent argument is ignored."""
    if not is_valid_output(space, y) or not is_valid_output(space, y_hat):
        raise InvalidPoint("distortion arguments must be valid outputs")
    return _distortion_numerator(space, y, y_hat) / _distortion_denominator(space)


def distortion_exact(space: StructureSpace, y, y_hat) -> Fraction:
    """Distortion as an exact rational, for enumeration-based certificates."""
    if not is_valid_output(space, y) or not is_valid_output(space, y_hat):
        raise InvalidPoint("distortion arguments must be valid outputs")
    return Fraction(
        _distortion_numerator(space, y, y_hat), _distortion_denominator(space)
    )


def binary_distortion(y, y_hat, h_hat: int | None = None) -> float:
    """Alternative 0/1 distortion: 1 whenever the outputs differ at all."""
    return 0.0 if y == y_hat else 1.0


def _usage_matrix(space: StructureSpace) -> np.ndarray:
    outputs = enumerate_outputs(space)
    if space.kind is Kind.PERMUTATION:
        return np.array(outputs, dtype=np.int16)
    return np.array([candidate_mask(space, y) for y in outputs], dtype=np.uint8)


@lru_cache(maxsize=None)
def distortion_matrix(space: StructureSpace) -> np.ndarray:
    """Pairwise distortions between all outputs, in enumeration order."""
    usage = _usage_matrix(space)
    n = usage.shape[0]
    denom = _distortion_denominator(space)
    out = np.empty((n, n), dtype=np.float64)
    block = max(1, (2**22) // max(1, n * usage.shape[1]))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        diff = usage[lo:hi, None, :] != usage[None, :, :]
        out[lo:hi] = diff.sum(axis=2, dtype=np.int64) / denom
    return out


@lru_cache(maxsize=None)
def output_neighbor_csr(space: StructureSpace) -> tuple[np.ndarray, np.ndarray]:
    """Output-move neighborhoods as a CSR index graph over enumeration order."""
    index = output_index(space)
    indptr = [0]
    idx: list[int] = []
    for y in enumerate_outputs(space):
        idx.extend(index[y2] for y2 in _output_neighbors(space, y))
        indptr.append(len(idx))
    return np.array(indptr, dtype=np.int64), np.array(idx, dtype=np.int64)


@lru_cache(maxsize=None)
def latent_neighbor_csr(space: StructureSpace) -> tuple[np.ndarray, np.ndarray]:
    """Latent-move neighborhoods as a CSR index graph."""
    indptr = [0]
    idx: list[int] = []
    for h in enumerate_latents(space):
        idx.extend(_latent_neighbors(space, h))
        indptr.append(len(idx))
    return np.array(indptr, dtype=np.int64), np.array(idx, dtype=np.int64)


# ---------------------------------------------------------------------------
# distortion-mass constants
# ---------------------------------------------------------------------------


def beta_constant_exact(space: StructureSpace) -> Fraction:
    """Claimed mass-off-maximal-distortion constant, as an exact rational."""
    if space.kind is Kind.SPANNING_TREE:
        if space.v < 2:
            raise InvalidSpaceParams("tree constant needs v >= 2")
        return Fraction(space.v - 2, space.v - 1)
    if space.kind is Kind.DAG:
        b = space.b
        return Fraction(b * b + 2 * b + 2, b * b + 3 * b + 2)
    if space.kind is Kind.CARD_SET:
        return Fraction(1, 2)
    return Fraction(2, 3)


def beta_constant(space: StructureSpace) -> float:
    """Per-family constant for the uniform proposal, as a float in [0, 1)."""
    return float(beta_constant_exact(space))


# ---------------------------------------------------------------------------
# canonical text encodings
# ---------------------------------------------------------------------------


def output_to_text(space: StructureSpace, output) -> str:
    """Stable textual key: sorted "i->j" edges, or comma-joined indices."""
    if space.kind in (Kind.SPANNING_TREE, Kind.DAG):
        return ",".join(f"{i}->{j}" for i, j in sorted(_edges_of(space, output)))
    return ",".join(str(e) for e in output)


def output_from_text(space: StructureSpace, text: str):
    if space.kind in (Kind.SPANNING_TREE, Kind.DAG):
        if not text:
            return 0
        edges = []
        for part in text.split(","):
            i, j = part.split("->")
            edges.append((int(i), int(j)))
        return _mask_of(space, edges)
    return tuple(int(e) for e in text.split(","))
