"""Nested sampling that treats likelihood plateaus correctly."""
from .compression import (CompressionMethod, EvidenceResult, VolumeSequence, assign_nlive,
                          binom_beta_moments, compression_factor, evaluate,
                          evidence_quadrature, naive_nlive, resum, volume_sequence)
from .run_record import (ChainFormatError, DeadPoint, RunMeta, RunRecord, StructureError,
                         TieGroup, canonical_order, deserialize, serialize)
from .samplers import (CapabilityError, ContourExhausted, LikelihoodModel, SamplerConfig,
                       StopCondition, run_modified, run_original, sample_constrained,
                       tie_break_wrap)
from .testbeds import (BasePlateauModel, GaussianModel, PeakPlateauModel,
                       PlateauGaussianModel, PlateauGaussianParams, ScenarioSpec,
                       WeddingCakeModel, WeddingCakeParams, base_plateau_bias,
                       model_from_id, peak_plateau_deficit, plateau_gaussian_log_like,
                       quadrature_evidence_oracle, scenario_model, wedding_cake_log_like,
                       wedding_cake_log_Z)
from .uncertainty import ErrorEstimate, classic_error, shannon_entropy, simulate_logZ

__version__ = "0.1.0"
