"""Subgradient trainers for the three objectives.

All three losses share one shape: a per-sample maximum of a distortion-scaled
(or distortion-augmented) score gap, averaged over samples, plus an L2 term.
The randomized objective maximizes over a freshly drawn proposal set instead
of the whole output-latent space; the margin re-scaling objective adds the
distortion inside the loss-augmented maximization instead of multiplying.

The margin-violation indicator is replaced by the hinge max(0, 2 - m): the
violation event m <= 1 is 1 - m >= 0, and the hinge surrogate of 1[z >= 0]
is max(0, 1 + z) with z = 1 - m.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _fast
from .errors import DimensionMismatch, EmptyProposalSet, StepCapExceeded
from .features import ModelParams, SyntheticFeatureMap, _wvec, best_latent
from .rng import derive_key
from .sampling import ProposalSet, build_proposal_set, proposal_set_size
from .structures import (
    StructuredPoint,
    beta_constant,
    distortion,
    distortion_matrix,
    enumerate_outputs,
    latent_count,
    latent_neighbor_csr,
    output_index,
    output_neighbor_csr,
    space_cardinality,
)

INIT_EPSILON = 1e-6  # start at epsilon * ones: the zero vector is not a model


class Method(Enum):
    RANDOM_SLACK = "random"
    ALL_SLACK = "all"
    MARGIN_RESCALE = "lssvm"


@dataclass
class TrainConfig:
    method: Method
    iterations: int = 30
    lam: float | None = None  # None means 1/n at train time
    eta0: float = 1.0
    seed: int = 0
    loss_surrogate: str = "hinge"
    size_mode: str = "mass"  # "mass": distortion-mass branch; "norm": full formula

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("the regularization weight must be positive")
        if self.loss_surrogate != "hinge":
            raise ValueError("only the hinge surrogate is supported")
        if self.size_mode not in ("mass", "norm"):
            raise ValueError("size_mode must be 'mass' or 'norm'")


@dataclass
class TrainReport:
    w_final: ModelParams
    objective_trace: list[float]
    wall_time: float
    proposal_draw_count: int


# ---------------------------------------------------------------------------
# public objectives and subgradients (feature-map generic)
# ---------------------------------------------------------------------------


def _score_matrix(w, x, space, featmap) -> np.ndarray:
    """(n_outputs, n_latents) scores, via the map's table when it has one."""
    if hasattr(featmap, "score_table"):
        return featmap.score_table(w, x)
    wv = _wvec(w)
    outputs = enumerate_outputs(space)
    n_h = latent_count(space)
    table = np.empty((len(outputs), n_h))
    for i, y in enumerate(outputs):
        for h in range(n_h):
            table[i, h] = np.dot(wv, featmap.phi(x, StructuredPoint(y, h)))
    return table


def objective_random_slack(w, dataset, proposal_sets, featmap, lam: float) -> float:
    """Mean over samples of the proposal-set maximum of d * max(0, 2 - m),
    plus lam * ||w||^2."""
    wv = _wvec(w)
    samples = dataset.samples
    if len(proposal_sets) != len(samples):
        raise DimensionMismatch("one proposal set per training sample")
    space = dataset.space
    total = 0.0
    for (x, y), pset in zip(samples, proposal_sets):
        points = pset.points
        if not points:
            raise EmptyProposalSet("a training sample has an empty proposal set")
        _, top = best_latent(wv, x, y, space, featmap)
        best = 0.0
        for p in points:
            m = top - float(np.dot(wv, featmap.phi(x, p)))
            term = distortion(space, y, p.output, p.latent) * max(0.0, 2.0 - m)
            if term > best:
                best = term
        total += best
    return total / len(samples) + lam * float(np.dot(wv, wv))


def objective_all_slack(w, dataset, featmap, lam: float) -> float:
    """Same loss with the maximum taken over the whole product space."""
    wv = _wvec(w)
    space = dataset.space
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    total = 0.0
    for x, y in dataset.samples:
        table = _score_matrix(wv, x, space, featmap)
        top = table[oidx[y]].max()
        hinge = np.maximum(0.0, 2.0 - top + table)
        total += float((dmat[oidx[y]][:, None] * hinge).max())
    return total / len(dataset.samples) + lam * float(np.dot(wv, wv))


def objective_margin_rescale(w, dataset, featmap, lam: float) -> float:
    """lam * ||w||^2 plus the mean loss-augmented maximum minus the
    latent-best score of the true output."""
    wv = _wvec(w)
    space = dataset.space
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    total = 0.0
    for x, y in dataset.samples:
        table = _score_matrix(wv, x, space, featmap)
        top = table[oidx[y]].max()
        total += float((table + dmat[oidx[y]][:, None]).max() - top)
    return total / len(dataset.samples) + lam * float(np.dot(wv, wv))


def subgradient(
    w, method: Method, dataset, featmap, lam: float, proposal_sets=None
) -> np.ndarray:
    """A subgradient of the chosen objective at w.

    Maximizers and the margin latent are picked by canonical tie-break; at a
    hinge kink the zero branch is taken.
    """
    wv = _wvec(w)
    space = dataset.space
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    outputs = enumerate_outputs(space)
    n_h = latent_count(space)
    grad = 2.0 * lam * wv.copy()
    n = len(dataset.samples)
    for s, (x, y) in enumerate(dataset.samples):
        yi = oidx[y]
        table = _score_matrix(wv, x, space, featmap)
        hstar = int(np.argmax(table[yi]))
        top = float(table[yi, hstar])
        phi_true = featmap.phi(x, StructuredPoint(y, hstar))
        if method is Method.MARGIN_RESCALE:
            aug = table + dmat[yi][:, None]
            flat = int(np.argmax(aug))
            sy, sh = divmod(flat, n_h)
            phi_sel = featmap.phi(x, StructuredPoint(outputs[sy], sh))
            grad += (phi_sel - phi_true) / n
            continue
        if method is Method.ALL_SLACK:
            hinge = np.maximum(0.0, 2.0 - top + table)
            terms = dmat[yi][:, None] * hinge
            flat = int(np.argmax(terms))
            sy, sh = divmod(flat, n_h)
            if terms.flat[flat] > 0.0 and (2.0 - top + table[sy, sh]) > 0.0:
                phi_sel = featmap.phi(x, StructuredPoint(outputs[sy], sh))
                grad += dmat[yi, sy] * (phi_sel - phi_true) / n
            continue
        if proposal_sets is None:
            raise EmptyProposalSet("the randomized objective needs proposal sets")
        points = proposal_sets[s].points
        if not points:
            raise EmptyProposalSet("a training sample has an empty proposal set")
        best_k, best_term, best_arg = -1, 0.0, 0.0
        for k, p in enumerate(points):
            m = top - float(np.dot(wv, featmap.phi(x, p)))
            term = dmat[yi, oidx[p.output]] * max(0.0, 2.0 - m)
            if term > best_term:
                best_k, best_term, best_arg = k, term, 2.0 - m
        if best_k >= 0 and best_term > 0.0 and best_arg > 0.0:
            p = points[best_k]
            phi_sel = featmap.phi(x, p)
            grad += dmat[yi, oidx[p.output]] * (phi_sel - phi_true) / n
    return grad


# ---------------------------------------------------------------------------
# vectorized trainer engine for the synthetic map
# ---------------------------------------------------------------------------


class _SyntheticEngine:
    """Batched value/subgradient evaluation over one synthetic dataset."""

    def __init__(self, dataset, featmap: SyntheticFeatureMap):
        _fast.ensure_warm()
        space = dataset.space
        self.space = space
        self.featmap = featmap
        self.masks = featmap.pair_masks()
        self.xb = np.stack([x.bits.astype(np.float64) for x, _ in dataset.samples])
        self.xors = np.stack([featmap.xor_table(x) for x, _ in dataset.samples])
        oidx = output_index(space)
        self.y_idx = np.array([oidx[y] for _, y in dataset.samples], dtype=np.int64)
        self.dmat = distortion_matrix(space)
        self.dy = self.dmat[self.y_idx]
        self.n, self.ell = self.xb.shape
        self.n_y = self.masks.shape[0]
        self.n_h = latent_count(space)
        self.out_indptr, self.out_idx = output_neighbor_csr(space)
        self.lat_indptr, self.lat_idx = latent_neighbor_csr(space)
        nbh = (self.out_indptr[1] - self.out_indptr[0]) + (
            self.lat_indptr[1] - self.lat_indptr[0]
        )
        self.step_cap = max(
            1, math.ceil(10 * max(1, nbh) * math.log2(space_cardinality(space)))
        )

    def tables(self, w) -> np.ndarray:
        wm = self.masks * w
        return np.matmul(wm[None, :, :], self.xors.transpose(0, 2, 1))

    def _true_rows(self, w) -> np.ndarray:
        wm_true = self.masks[self.y_idx] * w
        return np.einsum("sk,shk->sh", wm_true, self.xors)

    def _phi(self, s_arr, y_arr, h_arr) -> np.ndarray:
        return self.masks[y_arr] * self.xors[s_arr, h_arr]

    def draw_members(self, w, seed: int, round_index: int, n_draws: int) -> np.ndarray:
        res = _fast.build_proposals_kernel(
            np.ascontiguousarray(w),
            self.masks,
            self.xb,
            self.out_indptr,
            self.out_idx,
            self.lat_indptr,
            self.lat_idx,
            self.n_h,
            n_draws,
            seed,
            round_index,
            self.step_cap,
        )
        if (res < 0).any():
            raise StepCapExceeded("local search exceeded its step cap")
        return res

    def all_slack(self, w, lam: float) -> tuple[float, np.ndarray]:
        tables = self.tables(w)
        rows = tables[np.arange(self.n), self.y_idx]
        top = rows.max(axis=1)
        hstar = rows.argmax(axis=1)
        hinge = np.maximum(0.0, 2.0 - top[:, None, None] + tables)
        terms = self.dy[:, :, None] * hinge
        flat = terms.reshape(self.n, -1)
        sel = flat.argmax(axis=1)
        vals = flat[np.arange(self.n), sel]
        sy, sh = np.divmod(sel, self.n_h)
        value = float(vals.mean()) + lam * float(np.dot(w, w))
        s_idx = np.arange(self.n)
        active = vals > 0.0
        grad = 2.0 * lam * w.copy()
        if active.any():
            diff = self._phi(s_idx, sy, sh) - self._phi(s_idx, self.y_idx, hstar)
            weights = np.where(active, self.dy[s_idx, sy], 0.0)
            grad += (weights[:, None] * diff).sum(axis=0) / self.n
        return value, grad

    def margin_rescale(self, w, lam: float) -> tuple[float, np.ndarray]:
        tables = self.tables(w)
        rows = tables[np.arange(self.n), self.y_idx]
        top = rows.max(axis=1)
        hstar = rows.argmax(axis=1)
        aug = tables + self.dy[:, :, None]
        flat = aug.reshape(self.n, -1)
        sel = flat.argmax(axis=1)
        sy, sh = np.divmod(sel, self.n_h)
        value = float((flat[np.arange(self.n), sel] - top).mean()) + lam * float(
            np.dot(w, w)
        )
        s_idx = np.arange(self.n)
        diff = self._phi(s_idx, sy, sh) - self._phi(s_idx, self.y_idx, hstar)
        grad = 2.0 * lam * w + diff.sum(axis=0) / self.n
        return value, grad

    def random_slack(self, w, lam: float, members: np.ndarray) -> tuple[float, np.ndarray]:
        rows = self._true_rows(w)
        top = rows.max(axis=1)
        hstar = rows.argmax(axis=1)
        ym = members[:, :, 0]
        hm = members[:, :, 1]
        s_col = np.arange(self.n)[:, None]
        phis = self.masks[ym] * self.xors[s_col, hm]
        scores = phis @ w
        hinge = np.maximum(0.0, 2.0 - (top[:, None] - scores))
        terms = self.dmat[self.y_idx[:, None], ym] * hinge
        sel = terms.argmax(axis=1)
        s_idx = np.arange(self.n)
        vals = terms[s_idx, sel]
        value = float(vals.mean()) + lam * float(np.dot(w, w))
        active = vals > 0.0
        grad = 2.0 * lam * w.copy()
        if active.any():
            phi_sel = phis[s_idx, sel]
            diff = phi_sel - self._phi(s_idx, self.y_idx, hstar)
            weights = np.where(active, self.dmat[self.y_idx, ym[s_idx, sel]], 0.0)
            grad += (weights[:, None] * diff).sum(axis=0) / self.n
        return value, grad

    def members_to_sets(self, members: np.ndarray, seed: int) -> list[ProposalSet]:
        outputs = enumerate_outputs(self.space)
        sets = []
        for s in range(self.n):
            pts = [
                StructuredPoint(outputs[int(yi)], int(hi))
                for yi, hi in members[s]
            ]
            sets.append(ProposalSet(points=pts, seed=seed, n_prime=len(pts)))
        return sets


class _GenericEngine:
    """Loop-based evaluation used for feature maps without a score table."""

    def __init__(self, dataset, featmap):
        self.dataset = dataset
        self.space = dataset.space
        self.featmap = featmap
        self.n = len(dataset.samples)

    def draw_members(self, w, seed: int, round_index: int, n_draws: int):
        sets = []
        for s, (x, _) in enumerate(self.dataset.samples):
            sets.append(
                build_proposal_set(
                    w,
                    x,
                    self.space,
                    self.featmap,
                    n_draws,
                    derive_key(seed, round_index, s),
                )
            )
        return sets

    def all_slack(self, w, lam):
        value = objective_all_slack(w, self.dataset, self.featmap, lam)
        grad = subgradient(w, Method.ALL_SLACK, self.dataset, self.featmap, lam)
        return value, grad

    def margin_rescale(self, w, lam):
        value = objective_margin_rescale(w, self.dataset, self.featmap, lam)
        grad = subgradient(w, Method.MARGIN_RESCALE, self.dataset, self.featmap, lam)
        return value, grad

    def random_slack(self, w, lam, members):
        value = objective_random_slack(w, self.dataset, members, self.featmap, lam)
        grad = subgradient(
            w, Method.RANDOM_SLACK, self.dataset, self.featmap, lam, members
        )
        return value, grad


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _proposal_size(config: TrainConfig, space, featmap, w, n: int) -> int:
    beta = beta_constant(space)
    if config.size_mode == "norm":
        gamma = featmap.gamma
        return proposal_set_size(beta, gamma, max(1.0, float(np.linalg.norm(w))), n)
    # distortion-mass branch only; the norm-dependent branch is dropped so the
    # drawn sets stay small enough for the sampler to pay off
    return proposal_set_size(beta, 0.0, 0.0, n)


def train(dataset, space, featmap, config: TrainConfig) -> TrainReport:
    """Projected-free subgradient descent with step eta0 / sqrt(t).

    The randomized method redraws every sample's proposal set at the start of
    each iteration, since the proposal distribution follows the ordering the
    current weights induce.
    """
    if dataset.space != space:
        raise DimensionMismatch("dataset was generated for a different space")
    n = len(dataset.samples)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    lam = config.lam if config.lam is not None else 1.0 / n
    if isinstance(featmap, SyntheticFeatureMap):
        engine = _SyntheticEngine(dataset, featmap)
    else:
        engine = _GenericEngine(dataset, featmap)
    w = np.full(featmap.dim, INIT_EPSILON)
    trace: list[float] = []
    draw_count = 0
    start = time.perf_counter()
    for t in range(1, config.iterations + 1):
        if config.method is Method.RANDOM_SLACK:
            size = _proposal_size(config, space, featmap, w, n)
            members = engine.draw_members(w, config.seed, t, size)
            draw_count += n * size
            value, grad = engine.random_slack(w, lam, members)
        elif config.method is Method.ALL_SLACK:
            value, grad = engine.all_slack(w, lam)
        else:
            value, grad = engine.margin_rescale(w, lam)
        trace.append(value)
        w = w - (config.eta0 / math.sqrt(t)) * grad
    wall = time.perf_counter() - start
    return TrainReport(
        w_final=ModelParams.from_vector(w),
        objective_trace=trace,
        wall_time=wall,
        proposal_draw_count=draw_count,
    )
