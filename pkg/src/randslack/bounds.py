"""PAC-Bayes diagnostics for Gaussian-perturbed decoders.

The perturbation posterior is a unit-variance Gaussian centered at alpha * w.
``gibbs_estimate`` Monte-Carlo-estimates the expected decoding distortion
under that posterior; ``rhs_bound_all`` and ``rhs_bound_sampled`` evaluate
the closed-form certificates that hold for the full-maximum and the
sampled-maximum training objectives. Certificates use the exact 0/1
margin-violation indicator, not the training hinge. All logarithms are
natural.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidBeta, InvalidScale, RangeWarning
from .features import _wvec
from .inference import exact_decode
from .learning import _score_matrix
from .sampling import ProposalSet, build_proposal_set, proposal_set_size
from .structures import (
    StructureSpace,
    beta_constant,
    distortion,
    distortion_matrix,
    enumerate_outputs,
    latent_count,
    output_index,
    space_cardinality,
)


@dataclass
class BoundReport:
    alpha: float
    gibbs_mean: float
    gibbs_stderr: float
    rhs_all: float
    rhs_sampled: float
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def alpha_scale(gamma: float, r: int, n: int, w_l2: float) -> float:
    """Posterior center scale gamma * sqrt(8 * ln(r n / ||w||^2))."""
    if w_l2 <= 0:
        raise InvalidScale("the weight norm must be positive")
    arg = r * n / (w_l2 * w_l2)
    if arg <= 1.0:
        raise InvalidScale(f"rn/||w||^2 must exceed 1, got {arg}")
    return gamma * math.sqrt(8.0 * math.log(arg))


class _Scorer:
    """Per-sample score tables with the xor factors cached across calls."""

    def __init__(self, space: StructureSpace, featmap, xs):
        self.space = space
        self.featmap = featmap
        self.xs = list(xs)
        self._fast = hasattr(featmap, "pair_masks") and hasattr(featmap, "xor_table")
        if self._fast:
            self.masks = featmap.pair_masks()
            self.xor_t = [
                np.ascontiguousarray(featmap.xor_table(x).T) for x in self.xs
            ]

    def table(self, w: np.ndarray, i: int) -> np.ndarray:
        if self._fast:
            return (self.masks * w) @ self.xor_t[i]
        return _score_matrix(w, self.xs[i], self.space, self.featmap)


def _decode_index(table: np.ndarray) -> tuple[int, int]:
    flat = int(np.argmax(table))
    return divmod(flat, table.shape[1])


def gibbs_estimate(
    w, dataset, space: StructureSpace, featmap, alpha: float, num_draws: int, seed: int
) -> tuple[float, float]:
    """Monte-Carlo mean training distortion of the perturbed decoder.

    Each draw perturbs the scaled center with unit-variance Gaussian noise,
    exactly decodes every training sample, and averages the distortions.
    Returns the mean and standard error over draws.
    """
    wv = _wvec(w)
    rng = np.random.default_rng(seed)
    scorer = _Scorer(space, featmap, (x for x, _ in dataset.samples))
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    y_rows = [dmat[oidx[y]] for _, y in dataset.samples]
    per_draw = np.empty(num_draws)
    for k in range(num_draws):
        w_pert = alpha * wv + rng.standard_normal(wv.shape[0])
        total = 0.0
        for i in range(len(dataset.samples)):
            iy, _ = _decode_index(scorer.table(w_pert, i))
            total += y_rows[i][iy]
        per_draw[k] = total / len(dataset.samples)
    mean = float(per_draw.mean())
    stderr = (
        float(per_draw.std(ddof=1) / math.sqrt(num_draws)) if num_draws > 1 else 0.0
    )
    return mean, stderr


# ---------------------------------------------------------------------------
# empirical terms (exact 0/1 indicator)
# ---------------------------------------------------------------------------


def empirical_term_all(w, dataset, space: StructureSpace, featmap) -> float:
    """(1/n) sum of the full-space maximum of d * 1[m <= 1]."""
    wv = _wvec(w)
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    scorer = _Scorer(space, featmap, (x for x, _ in dataset.samples))
    total = 0.0
    for i, (_, y) in enumerate(dataset.samples):
        table = scorer.table(wv, i)
        top = table[oidx[y]].max()
        violating = (top - table) <= 1.0
        total += float((dmat[oidx[y]][:, None] * violating).max())
    return total / len(dataset.samples)


def empirical_term_sampled(
    w, dataset, proposal_sets, space: StructureSpace, featmap
) -> float:
    """Same maximum restricted to each sample's proposal set."""
    wv = _wvec(w)
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    scorer = _Scorer(space, featmap, (x for x, _ in dataset.samples))
    total = 0.0
    for i, ((_, y), pset) in enumerate(zip(dataset.samples, proposal_sets)):
        table = scorer.table(wv, i)
        top = table[oidx[y]].max()
        best = 0.0
        for p in pset.points:
            m = top - table[oidx[p.output], p.latent]
            if m <= 1.0:
                best = max(best, dmat[oidx[y], oidx[p.output]])
        total += best
    return total / len(dataset.samples)


# ---------------------------------------------------------------------------
# closed-form certificates
# ---------------------------------------------------------------------------


def _tail_term(w_l2: float, gamma: float, r: int, n: int, delta: float) -> float:
    if n < 2:
        raise InvalidScale("the certificate needs n >= 2")
    if not 0.0 < delta < 1.0:
        raise InvalidScale("delta must lie in (0, 1)")
    arg = r * n / (w_l2 * w_l2)
    if arg <= 1.0:
        raise InvalidScale(f"rn/||w||^2 must exceed 1, got {arg}")
    num = 4.0 * w_l2 * w_l2 * gamma * gamma * math.log(arg) + math.log(2.0 * n / delta)
    return math.sqrt(num / (2.0 * (n - 1)))


def rhs_bound_all(
    w, dataset, space: StructureSpace, featmap, gamma: float, r: int, n: int, delta: float
) -> float:
    """Certificate for the full-maximum objective: empirical term plus
    ||w||^2/n plus the Gaussian-posterior tail."""
    w_l2 = float(np.linalg.norm(_wvec(w)))
    return (
        empirical_term_all(w, dataset, space, featmap)
        + w_l2 * w_l2 / n
        + _tail_term(w_l2, gamma, r, n, delta)
    )


def rhs_bound_sampled(
    w,
    dataset,
    proposal_sets,
    space: StructureSpace,
    featmap,
    gamma: float,
    r: int,
    ell: int,
    n: int,
    n_prime: int,
    s: int,
    delta: float,
    beta: float,
) -> float:
    """Certificate for the sampled-maximum objective.

    Adds to the full-maximum tail the sampling terms: sqrt(1/n), the
    ordering-count deviation term, and the sparse-classifier capacity term.
    Evaluating outside the stated sparsity range attaches a RangeWarning.
    """
    if not 0.0 <= beta < 1.0:
        raise InvalidBeta(f"beta must lie in [0, 1), got {beta}")
    w_l2 = float(np.linalg.norm(_wvec(w)))
    lo_ok = 3 <= 2 * s + 1
    hi_ok = 2 * s + 1 <= (9.0 / 20.0) * math.sqrt(ell * (r + 1) + 1)
    if not (lo_ok and hi_ok):
        warnings.warn(
            f"sparsity {s} outside the certificate's stated range", RangeWarning
        )
    empirical = empirical_term_sampled(w, dataset, proposal_sets, space, featmap)
    tail = _tail_term(w_l2, gamma, r, n, delta)
    dev = 3.0 * math.sqrt(
        (s * (math.log(ell) + 2.0 * math.log(n * r)) + math.log(4.0 / delta)) / n
    )
    beta_term = 0.0 if beta == 0.0 else 1.0 / math.log(1.0 / beta)
    capacity = (
        2.0
        * max(beta_term, 128.0 * gamma * gamma * w_l2 * w_l2)
        * math.sqrt(
            (2 * s + 1)
            * math.log(ell * (n * r + 1) + 1)
            * math.log(n + 1) ** 3
            / n
        )
    )
    return (
        empirical
        + w_l2 * w_l2 / n
        + tail
        + math.sqrt(1.0 / n)
        + dev
        + capacity
    )


def persample_gibbs_check(
    w,
    sample,
    space: StructureSpace,
    featmap,
    alpha: float,
    num_draws: int,
    seed: int,
    n: int,
) -> tuple[float, float, float]:
    """Monte-Carlo check of the per-sample perturbation inequality.

    lhs is the estimated expected distortion of the perturbed decoder on one
    sample; rhs is the full-space maximum of d * 1[m <= 1] plus ||w||^2/n.
    The inequality test is lhs_mean <= rhs + 3 * lhs_stderr.
    """
    x, y = sample
    wv = _wvec(w)
    scorer = _Scorer(space, featmap, [x])
    oidx = output_index(space)
    dmat = distortion_matrix(space)
    rng = np.random.default_rng(seed)
    draws = np.empty(num_draws)
    for k in range(num_draws):
        w_pert = alpha * wv + rng.standard_normal(wv.shape[0])
        iy, _ = _decode_index(scorer.table(w_pert, 0))
        draws[k] = dmat[oidx[y], iy]
    lhs_mean = float(draws.mean())
    lhs_stderr = (
        float(draws.std(ddof=1) / math.sqrt(num_draws)) if num_draws > 1 else 0.0
    )
    table = scorer.table(wv, 0)
    top = table[oidx[y]].max()
    violating = (top - table) <= 1.0
    w_l2 = float(np.linalg.norm(wv))
    rhs = float((dmat[oidx[y]][:, None] * violating).max()) + w_l2 * w_l2 / n
    return lhs_mean, lhs_stderr, rhs


def compute_bound_report(
    w,
    dataset,
    space: StructureSpace,
    featmap,
    delta: float = 0.05,
    draws: int = 1000,
    seed: int = 0,
    n_prime: int | None = None,
) -> BoundReport:
    """Evaluate every diagnostic at one parameter vector.

    r is the exact product-space cardinality, the sparsity input is the
    nonzero count of w, and the proposal sets for the sampled certificate are
    drawn fresh at w.
    """
    wv = _wvec(w)
    n = len(dataset.samples)
    gamma = featmap.gamma
    r = space_cardinality(space)
    ell = featmap.dim
    beta = beta_constant(space)
    w_l2 = float(np.linalg.norm(wv))
    s = int(np.count_nonzero(wv))
    if n_prime is None:
        n_prime = proposal_set_size(beta, 0.0, 0.0, n)
    proposal_sets = [
        build_proposal_set(wv, x, space, featmap, n_prime, seed=seed + 7919 * i)
        for i, (x, _) in enumerate(dataset.samples)
    ]
    alpha = alpha_scale(gamma, r, n, w_l2)
    gibbs_mean, gibbs_stderr = gibbs_estimate(
        wv, dataset, space, featmap, alpha, draws, seed
    )
    rhs1 = rhs_bound_all(wv, dataset, space, featmap, gamma, r, n, delta)
    rhs2 = rhs_bound_sampled(
        wv, dataset, proposal_sets, space, featmap, gamma, r, ell, n, n_prime, s,
        delta, beta,
    )
    return BoundReport(
        alpha=alpha,
        gibbs_mean=gibbs_mean,
        gibbs_stderr=gibbs_stderr,
        rhs_all=rhs1,
        rhs_sampled=rhs2,
        inputs={
            "gamma": gamma,
            "r": r,
            "ell": ell,
            "n": n,
            "n_prime": n_prime,
            "sparsity": s,
            "delta": delta,
            "beta": beta,
            "w_l2": w_l2,
        },
    )
