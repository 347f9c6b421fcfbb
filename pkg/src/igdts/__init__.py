"""Robust regression with sorted soft-threshold selection, and a particle-filter
tracker that scores candidates with the resulting distance."""

from igdts.noise_model import (
    NoiseParams,
    erfcx,
    gaussian_pdf,
    gl_pdf,
    lambda_from_noise,
    laplacian_pdf,
    sample_gl,
)
from igdts.slope import (
    LambdaSequence,
    SoftRule,
    SortedSoftRule,
    penalty_from_threshold,
    soft_threshold,
    sorted_l1_norm,
    sorted_soft_threshold,
    threshold_inverse,
)
from igdts.regression import (
    IgdtsSolution,
    RegressionProblem,
    d_igdts,
    d_lad,
    d_lss,
    d_ols,
    default_step_size,
    igdts_fit,
    lad_fit,
    objective_value,
    ols_fit,
)
from igdts.subspace import (
    IgdtsSubspaceSolution,
    SubspaceModel,
    clean_observation,
    igdts_subspace_solve,
    incremental_update,
    observation_likelihood,
    subspace_distance,
)
from igdts.geometry import AffineState, affine_to_bbox
from igdts.tracker import MotionModel, TrackResult, Tracker, TrackerConfig, track_sequence
from igdts.evaluation import SequenceReport, center_location_error, overlap_rate, summarize
from igdts.synth import synth_regression, synth_sequence
from igdts.errors import DimensionError, NumericError, TrackingLost

__version__ = "0.1.0"
