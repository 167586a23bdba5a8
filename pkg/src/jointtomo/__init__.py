"""Joint reconstruction of an unknown quantum state and detector from the
statistics of multiple known quantum processes."""

from .basis import (
    OperatorBasis,
    PovmCoordinates,
    StateCoordinates,
    build_basis,
    change_of_basis,
    coherence_to_state,
    coords_to_povm_element,
    coords_to_state,
    devectorize,
    povm_element_to_coords,
    state_to_coords,
    vectorize,
)
from .bench import (
    MseRow,
    MseTable,
    PRESET_NAMES,
    Scenario,
    fit_loglog_slope,
    preset,
    run_method_comparison,
    run_mse_experiment,
)
from .channels import (
    KrausChannel,
    ProcessEnsemble,
    RegressionMatrices,
    TransferMatrix,
    amplitude_damping,
    build_regression_matrices,
    discretize_hamiltonian,
    hamiltonian_generator,
    haar_unitary,
    is_generalized_unital,
    make_named_channel,
    min_hamiltonian_count,
    mixed_unitary_transfer,
    numerical_rank,
    pauli,
    pauli_sandwich_processes,
    rank_bound,
    superoperator,
    transfer_matrix,
)
from .errors import DegeneracyError, TomographyError, ValidationError
from .estimator import (
    EstimateResult,
    KroneckerFactorization,
    Stage1Config,
    build_targets_v1,
    combine_state_estimates,
    correct_povm,
    correct_state,
    estimate_joint_v1,
    estimate_joint_v2,
    fix_scale_v1,
    nearest_kronecker,
    project_pure,
    rearrange,
    stage1_solve,
)
from .measurement import (
    DensityMatrix,
    MeasurementDataset,
    Povm,
    born_probabilities,
    random_density_matrix,
    sample_frequencies,
    simulate_dataset,
)
from .refine import (
    SemialgebraicCert,
    SosProblem,
    export_sos_problem,
    in_physical_set,
    k_coefficients,
    load_sos_problem,
    povm_membership,
    refine_alternating,
)

__version__ = "0.1.0"
