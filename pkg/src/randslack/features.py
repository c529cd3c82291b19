"""Feature maps, linear scores, and the latent-maximized margin.

Two concrete maps are provided. The synthetic map puts one coordinate on
every ordered pair (i, j) of candidate edges/elements and fires it when the
latent-corrected input bit is set and both candidates are used by the output.
The matching map compares descriptor vectors under a permutation and adds one
coordinate measuring geometric agreement after a 2x2 affine latent transform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPermutationOutput
from .structures import (
    Kind,
    OneHotBit,
    StructureSpace,
    StructuredPoint,
    affine_cell_matrix,
    candidate_mask,
    candidates,
    enumerate_latents,
    is_valid_output,
    latent_count,
)


@dataclass(frozen=True)
class Keypoints:
    """Two point clouds with per-point descriptors, equal length v."""

    coords_src: np.ndarray
    coords_dst: np.ndarray
    desc_src: np.ndarray
    desc_dst: np.ndarray


@dataclass(frozen=True)
class InputX:
    """One observed input: a bit vector, keypoint clouds, or both."""

    bits: np.ndarray | None = None
    keypoints: Keypoints | None = None


@dataclass
class ModelParams:
    """Weight vector with its norm bookkeeping."""

    w: np.ndarray
    cached_l2: float
    nnz: int

    @classmethod
    def from_vector(cls, w) -> "ModelParams":
        w = np.asarray(w, dtype=np.float64)
        return cls(w=w, cached_l2=float(np.linalg.norm(w)), nnz=int(np.count_nonzero(w)))

    def check(self) -> None:
        l2 = float(np.linalg.norm(self.w))
        if abs(l2 - self.cached_l2) > 1e-12 * max(1.0, l2):
            raise DimensionMismatch("cached norm out of date")
        if int(np.count_nonzero(self.w)) != self.nnz:
            raise DimensionMismatch("cached nonzero count out of date")


def _wvec(w) -> np.ndarray:
    return w.w if isinstance(w, ModelParams) else np.asarray(w, dtype=np.float64)


# ---------------------------------------------------------------------------
# synthetic map
# ---------------------------------------------------------------------------


def phi_synthetic(x: InputX, point: StructuredPoint, space: StructureSpace) -> np.ndarray:
    """Coordinate (i, j) is 1 iff (x bit xor latent bit) at (i, j) is set and
    candidates i and j are both used by the output."""
    n_cand = len(candidates(space))
    dim = n_cand * n_cand
    if x.bits is None or x.bits.shape != (dim,):
        raise DimensionMismatch(f"input bits must have shape ({dim},)")
    if not isinstance(space.latent, OneHotBit) or space.latent.dim != dim:
        raise DimensionMismatch("synthetic map needs a one-hot latent of dim |E|^2")
    xor = x.bits.astype(np.float64).copy()
    xor[point.latent] = 1.0 - xor[point.latent]
    active = candidate_mask(space, point.output).astype(np.float64)
    return xor * np.outer(active, active).ravel()


class SyntheticFeatureMap:
    """Pairwise xor-and map bound to one structure space.

    Precomputes the per-output pair masks so scoring a whole space reduces to
    one matrix product; the mask/xor factors stay 0/1 so equal feature vectors
    produce bitwise-equal scores and ties break canonically.
    """

    def __init__(self, space: StructureSpace):
        self.space = space
        n_cand = len(candidates(space))
        self.dim = n_cand * n_cand
        if not isinstance(space.latent, OneHotBit) or space.latent.dim != self.dim:
            raise DimensionMismatch("synthetic map needs a one-hot latent of dim |E|^2")
        self.gamma = float(np.sqrt(self.dim))
        self._pair_masks: np.ndarray | None = None

    def phi(self, x: InputX, point: StructuredPoint) -> np.ndarray:
        return phi_synthetic(x, point, self.space)

    def pair_masks(self) -> np.ndarray:
        """(n_outputs, dim) 0/1 matrix of flattened candidate pair masks."""
        if self._pair_masks is None:
            from .structures import enumerate_outputs

            rows = []
            for y in enumerate_outputs(self.space):
                active = candidate_mask(self.space, y).astype(np.float64)
                rows.append(np.outer(active, active).ravel())
            self._pair_masks = np.array(rows)
        return self._pair_masks

    def xor_table(self, x: InputX) -> np.ndarray:
        """(n_latents, dim) matrix whose h-th row is x with bit h flipped."""
        if x.bits is None or x.bits.shape != (self.dim,):
            raise DimensionMismatch(f"input bits must have shape ({self.dim},)")
        table = np.tile(x.bits.astype(np.float64), (self.dim, 1))
        idx = np.arange(self.dim)
        table[idx, idx] = 1.0 - table[idx, idx]
        return table

    def score_table(self, w, x: InputX) -> np.ndarray:
        """(n_outputs, n_latents) scores for every output-latent pair.

        Computed as (masks * w) @ xor.T; every product keeps one 0/1 factor,
        so pairs with identical feature vectors score bitwise-identically.
        """
        wm = self.pair_masks() * _wvec(w)
        return wm @ self.xor_table(x).T


# ---------------------------------------------------------------------------
# matching map
# ---------------------------------------------------------------------------


def phi_matching(x: InputX, point: StructuredPoint) -> np.ndarray:
    """Mean coordinate-wise squared descriptor differences under the matching,
    plus one coordinate of mean squared coordinate error after the affine
    latent transform. Coordinates are centered per cloud first."""
    kp = x.keypoints
    if kp is None:
        raise DimensionMismatch("matching map needs keypoints")
    v = kp.coords_src.shape[0]
    if kp.coords_dst.shape[0] != v or kp.desc_src.shape[0] != v or kp.desc_dst.shape[0] != v:
        raise DimensionMismatch("keypoint lists must have equal length")
    y = point.output
    if not isinstance(y, tuple) or sorted(y) != list(range(v)):
        raise NonPermutationOutput(f"output {y!r} is not a permutation of 0..{v - 1}")
    perm = list(y)
    desc_diff = kp.desc_src - kp.desc_dst[perm]
    desc_part = (desc_diff**2).mean(axis=0)
    h_mat = affine_cell_matrix(point.latent)
    src_c = kp.coords_src - kp.coords_src.mean(axis=0)
    dst_c = kp.coords_dst - kp.coords_dst.mean(axis=0)
    resid = src_c @ h_mat - dst_c[perm]
    coord_part = float((resid**2).sum(axis=1).mean())
    return np.concatenate([desc_part, [coord_part]])


class MatchingFeatureMap:
    """Descriptor-difference map with an affine-residual coordinate."""

    def __init__(self, descriptor_dim: int = 8, gamma: float | None = None):
        self.descriptor_dim = descriptor_dim
        self.dim = descriptor_dim + 1
        self.gamma = gamma

    def phi(self, x: InputX, point: StructuredPoint) -> np.ndarray:
        phi = phi_matching(x, point)
        if phi.shape != (self.dim,):
            raise DimensionMismatch(
                f"descriptor dimension mismatch: expected {self.descriptor_dim}"
            )
        return phi


# ---------------------------------------------------------------------------
# scores and margins
# ---------------------------------------------------------------------------


def score(w, phi: np.ndarray) -> float:
    """Inner product of the weights with a feature vector."""
    wv = _wvec(w)
    if wv.shape != phi.shape:
        raise DimensionMismatch(f"score: {wv.shape} vs {phi.shape}")
    return float(np.dot(wv, phi))


def best_latent(w, x: InputX, y, space: StructureSpace, featmap) -> tuple[int, float]:
    """Latent maximizing the score of (x, y, h); ties take the lowest index."""
    wv = _wvec(w)
    best_h = 0
    best_s = -np.inf
    for h in enumerate_latents(space):
        s = float(np.dot(wv, featmap.phi(x, StructuredPoint(y, h))))
        if s > best_s:
            best_h, best_s = h, s
    return best_h, best_s


def margin(w, x: InputX, y, y_prime, h_prime: int, space: StructureSpace, featmap) -> float:
    """Latent-maximized score of the true output minus the candidate's score."""
    from .errors import InvalidPoint

    if not is_valid_output(space, y) or not is_valid_output(space, y_prime):
        raise InvalidPoint("margin arguments must be valid outputs")
    if not 0 <= h_prime < latent_count(space):
        raise InvalidPoint(f"latent index {h_prime} out of range")
    _, top = best_latent(w, x, y, space, featmap)
    return top - score(w, featmap.phi(x, StructuredPoint(y_prime, h_prime)))
