"""Latent-variable structured prediction with randomized slack re-scaling.

Train linear decoders over combinatorial outputs (spanning trees, DAGs,
cardinality-constrained sets, permutations) with latent variables, by
maximizing the hinge loss over either the whole output-latent space or a
small set of greedily sampled proposals. Ships exact decoding baselines,
PAC-Bayes perturbation diagnostics, and brute-force verification oracles.
"""

from .bounds import (
    BoundReport,
    alpha_scale,
    compute_bound_report,
    gibbs_estimate,
    persample_gibbs_check,
    rhs_bound_all,
    rhs_bound_sampled,
)
from .features import (
    InputX,
    Keypoints,
    MatchingFeatureMap,
    ModelParams,
    SyntheticFeatureMap,
    best_latent,
    margin,
    phi_matching,
    phi_synthetic,
    score,
)
from .inference import Decoding, exact_decode, random_decode
from .learning import (
    Method,
    TrainConfig,
    TrainReport,
    objective_all_slack,
    objective_margin_rescale,
    objective_random_slack,
    subgradient,
    train,
)
from .rng import Stream, derive_key
from .sampling import (
    ProposalSet,
    build_proposal_set,
    greedy_local_sample,
    proposal_set_size,
)
from .structures import (
    AffineGrid,
    Kind,
    OneHotBit,
    StructureSpace,
    StructuredPoint,
    beta_constant,
    binary_distortion,
    distortion,
    enumerate_latents,
    enumerate_outputs,
    neighbors,
    sample_uniform,
)
from .verification import (
    DiscreteDistribution,
    derangement_count,
    tv_distance,
    verify_beta,
    verify_change_of_measure,
    verify_low_norm,
    verify_ordering_invariance,
)

__version__ = "0.1.0"
