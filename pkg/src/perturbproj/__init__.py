"""Differentially private matrix and tensor releases via noise plus projection."""

from .mechanism import (
    NoiseSpec,
    PrivacyParams,
    RandomStream,
    calibrate_sigma,
    sample_gaussian,
    sample_symmetric_gaussian,
)
from .projections import (
    TOL_PROJ,
    ConvexSet,
    DiagClip,
    EigenFailure,
    EntryClip,
    FrobeniusBall,
    Intersection,
    PsdCone,
    PsdTrace,
    UnsupportedSetError,
    project_diag_clip,
    project_entry_clip,
    project_frobenius_ball,
    project_psd,
    project_psd_trace,
    project_simplex,
    residual,
    symmetrize,
)
from .engine import (
    DykstraConvergenceWarning,
    EngineConfig,
    ReleaseOutput,
    averaged_projection_step,
    default_iterations,
    dykstra_reference,
    perturb_and_alternately_project,
    perturb_and_project,
)
from .similarity import (
    MODE_EXACT,
    MODE_PRACTICAL,
    SimilarityRelease,
    UnitVectorSet,
    gram,
    gram_sensitivity,
    read_vectors_csv,
    release_cosine_exact,
    release_cosine_practical,
    write_release_csv,
)
from .marginals import (
    BinaryDataset,
    MarginalRelease,
    MarginalTensor,
    OracleResult,
    ParityQuery,
    SearchBudget,
    answer_parity_query,
    avg_query_sq_error,
    load_tensor,
    parity_tensor,
    read_dataset_csv,
    release_even_k,
    release_gaussian_only,
    release_threshold_baseline,
    save_release,
    sparse_injective_norm_oracle,
)
from .bench import (
    ComplexityEstimate,
    ScalingReport,
    StabilityResult,
    complexity_box_closed_form,
    complexity_monte_carlo,
    fit_power_law,
    scaling_experiment_cosine,
    scaling_experiment_marginals,
    stability_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "NoiseSpec",
    "PrivacyParams",
    "RandomStream",
    "calibrate_sigma",
    "sample_gaussian",
    "sample_symmetric_gaussian",
    "TOL_PROJ",
    "ConvexSet",
    "DiagClip",
    "EigenFailure",
    "EntryClip",
    "FrobeniusBall",
    "Intersection",
    "PsdCone",
    "PsdTrace",
    "UnsupportedSetError",
    "project_diag_clip",
    "project_entry_clip",
    "project_frobenius_ball",
    "project_psd",
    "project_psd_trace",
    "project_simplex",
    "residual",
    "symmetrize",
    "DykstraConvergenceWarning",
    "EngineConfig",
    "ReleaseOutput",
    "averaged_projection_step",
    "default_iterations",
    "dykstra_reference",
    "perturb_and_alternately_project",
    "perturb_and_project",
    "MODE_EXACT",
    "MODE_PRACTICAL",
    "SimilarityRelease",
    "UnitVectorSet",
    "gram",
    "gram_sensitivity",
    "read_vectors_csv",
    "release_cosine_exact",
    "release_cosine_practical",
    "write_release_csv",
    "BinaryDataset",
    "MarginalRelease",
    "MarginalTensor",
    "OracleResult",
    "ParityQuery",
    "SearchBudget",
    "answer_parity_query",
    "avg_query_sq_error",
    "load_tensor",
    "parity_tensor",
    "read_dataset_csv",
    "release_even_k",
    "release_gaussian_only",
    "release_threshold_baseline",
    "save_release",
    "sparse_injective_norm_oracle",
    "ComplexityEstimate",
    "ScalingReport",
    "StabilityResult",
    "complexity_box_closed_form",
    "complexity_monte_carlo",
    "fit_power_law",
    "scaling_experiment_cosine",
    "scaling_experiment_marginals",
    "stability_experiment",
    "__version__",
]
