"""Ensemble Kalman filtering on 1-D non-conservative adaptive moving meshes.

Two Lagrangian testbed solvers (diffusive Burgers, Kuramoto-Sivashinsky) move
their mesh nodes with the flow and keep node spacing inside [delta1, delta2]
by insertion/deletion.  Ensemble members therefore live on meshes of varying
size; before each stochastic EnKF analysis they are matched to a fixed
dimension either by projection onto a fixed reference mesh (hr) or by
augmenting the state with ghost nodes so node positions are updated too
(hra), and mapped back afterwards.
"""

from .dimension import (
    MatchedMember,
    ReferencePartition,
    match_hr,
    match_hra,
    reference_partition,
    return_hr,
    return_hra,
)
from .enkf import (
    FilterConfig,
    FilterDegeneracyError,
    MatchedEnsemble,
    analysis,
    anomaly_matrix,
    apply_jitter,
    forecast_anomalies,
    jitter_ensemble,
    perturb_observations,
    pooled_value_range,
)
from .experiment import (
    CycleInfo,
    ExperimentConfig,
    NatureBundle,
    RunRecord,
    SeedPack,
    SensitivityRow,
    SweepResult,
    build_model_spec,
    config_from_dict,
    init_ensemble,
    make_nature,
    run_twin,
    sensitivity_suite,
    sweep,
)
from .mesh import (
    AdaptiveMesh,
    MeshStructureError,
    MeshTolerances,
    RemeshError,
    RemeshLog,
    is_valid,
    remesh,
    wrap_into_domain,
)
from .metrics import (
    CovarianceBlocks,
    DiagnosticRecord,
    EnsembleFidelity,
    analysis_mean_on_reference,
    covariance_blocks,
    derivative_field,
    diagnose_snapshot,
    ensemble_fidelity,
    ensemble_spread,
    field_on_reference,
    rmse,
)
from .models import (
    ModelSpec,
    ModelState,
    SolverBlowUpError,
    bgm_initial_condition,
    bgm_spec,
    initial_state,
    integrate,
    ksm_initial_condition,
    ksm_spec,
    step,
)
from .observations import (
    ObservationSet,
    generate_observations,
    interp_periodic,
    make_observation_operator,
    observe_hr,
    observe_hra,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveMesh",
    "CovarianceBlocks",
    "CycleInfo",
    "DiagnosticRecord",
    "EnsembleFidelity",
    "ExperimentConfig",
    "FilterConfig",
    "FilterDegeneracyError",
    "MatchedEnsemble",
    "MatchedMember",
    "MeshStructureError",
    "MeshTolerances",
    "ModelSpec",
    "ModelState",
    "NatureBundle",
    "ObservationSet",
    "ReferencePartition",
    "RemeshError",
    "RemeshLog",
    "RunRecord",
    "SeedPack",
    "SensitivityRow",
    "SolverBlowUpError",
    "SweepResult",
    "analysis",
    "analysis_mean_on_reference",
    "anomaly_matrix",
    "apply_jitter",
    "bgm_initial_condition",
    "bgm_spec",
    "build_model_spec",
    "config_from_dict",
    "covariance_blocks",
    "derivative_field",
    "diagnose_snapshot",
    "ensemble_fidelity",
    "ensemble_spread",
    "field_on_reference",
    "forecast_anomalies",
    "generate_observations",
    "init_ensemble",
    "initial_state",
    "integrate",
    "interp_periodic",
    "is_valid",
    "jitter_ensemble",
    "ksm_initial_condition",
    "ksm_spec",
    "make_nature",
    "make_observation_operator",
    "match_hr",
    "match_hra",
    "observe_hr",
    "observe_hra",
    "perturb_observations",
    "pooled_value_range",
    "reference_partition",
    "remesh",
    "return_hr",
    "return_hra",
    "rmse",
    "run_twin",
    "sensitivity_suite",
    "step",
    "sweep",
    "wrap_into_domain",
]
