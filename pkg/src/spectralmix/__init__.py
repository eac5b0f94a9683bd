"""Continuous sparse Fourier transforms in one and d dimensions, plus the
Fourier-based estimators built on them: separation-free learning of
slow-Fourier-decay mixtures, consistent mean estimation under
noise-oblivious contamination, and a symmetric moment-tensor toolkit."""

__version__ = "0.1.0"

from .distributions import (
    ContaminatedSample,
    DistributionSpec,
    Kind,
    MixtureModel,
    SfdFfdParams,
    cf_eval,
    sample_mixture,
    sample_noise_oblivious,
    sfd_floor,
)
from .signal import (
    NoiseBudget,
    SignalOracle,
    Tone,
    empirical_cf_signal,
    exact_signal,
    inject_noise,
)
from .sft1d import (
    Permutation,
    Sft1Config,
    hash_to_bins,
    locate_k_signal,
    reference_tone_estimate,
    sft1,
)
from .sftd import (
    ProjectionFrame,
    boost,
    match_tones,
    order_preservation_check,
    sft_d,
    solve_means_from_projections,
)
from .learners import (
    SfdLearnConfig,
    learn_sfd_mixture,
    robust_mean_noise_oblivious,
    robust_mean_per_coordinate,
    rough_center,
)
from .moments import (
    SymTensor,
    empirical_moment_tensor,
    kron_identity_norm_check,
    laplace_moment_tensor,
    mixture_moment_tensor,
    moment_distance,
    sym,
)
