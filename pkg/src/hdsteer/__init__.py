"""High-dimensional steering, measurement simulability, and channel certification.

The package connects three pictures of dimension-bounded quantum resources:
assemblages produced by steering, measurement sets under compression, and
channels classified through their dual states.  It provides validated object
types, the structural maps between them, closed-form noise thresholds and a
dimension witness, and convex-weight quantifiers with dual certificates.
"""

from .qcore import (
    BipartiteState,
    DensityMatrix,
    MeasurementSet,
    ValidationError,
    fourier_mub_pair,
    haar_unitary,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    projector,
    psd_pinv_sqrt,
    psd_sqrt,
    rank_with_tol,
    tensor,
    transpose_in_basis,
)
from .steering import (
    Assemblage,
    NoisyPvmFamily,
    add_white_noise,
    assemblage_to_measurements,
    isotropic,
    max_entangled_state,
    measurements_to_assemblage,
    restrict_assemblage,
    steer,
)
from .witnesses import (
    CertificationResult,
    GhdsWitness,
    ThresholdReport,
    certify,
    entangled_fraction,
    iso_sn_threshold,
    mub_measurements,
    mub_nsim_threshold,
    pvm_nsim_threshold,
    region_table,
    region_table_csv,
    sn_lower_bound_from_fraction,
    witness_bound,
    witness_value,
)
from .channels import (
    ChoiState,
    KrausChannel,
    PebCertificate,
    PibWitnessCheck,
    apply,
    choi_of,
    depolarizing,
    dual_apply,
    peb_certificate,
    pib_witness_check,
    state_to_channel,
)
from .quantifiers import (
    ConicProblem,
    ConicSolution,
    DeskScaleError,
    DeterministicStrategySet,
    SolverError,
    WeightInequalityResult,
    WeightResult,
    check_weight_inequality,
    entanglement_weight_ppt,
    incompatibility_weight,
    solve_conic,
    steering_weight,
)

__version__ = "0.1.0"
