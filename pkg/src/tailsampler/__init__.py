"""Information-preserving DPP resampling and balanced contrastive losses for long-tailed data."""

from .bns import (
    BnsBatch,
    BnsConfig,
    bns_decomposition,
    bns_gradient,
    bns_loss,
    intra_class_distance,
    ns_loss,
    pair_score,
    train_toy_embeddings,
)
from .data_model import ClassManifest, DppSample, ItemRecord, Variant, parse_manifest, subset_csv, write_subset
from .dpp import (
    enumerate_all,
    expected_size,
    marginal_kernel,
    monte_carlo_marginals,
    partition,
    sample_standard,
    subset_probability,
)
from .errors import InputError, SamplerError, TailSamplerError
from .experiment import SyntheticConfig, TrainingSchedule, generate_synthetic, run_two_stage
from .infotheory import (
    DiscreteJoint,
    entropy,
    information_content,
    joint_entropy,
    mutual_information,
    nce_bound_check,
    variation_of_information,
)
from .ipdpp import SamplerConfig, balanced_resample, exact_kdpp_oracle, kdpp_table, sample_k
from .stochastic_matrix import SpectralDecomposition, StochasticMatrix, build_stochastic_matrix, spectral_decompose, validate_lemmas

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
