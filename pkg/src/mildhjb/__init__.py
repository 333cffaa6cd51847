"""Simulation and verification toolkit for controlled semilinear SPDEs in a
spectrally truncated Hilbert space."""

from .control import (
    ClosedForm,
    CostEstimate,
    CostSpec,
    GridScan,
    Policy,
    admissibility_report,
    argmin_control,
    constant_policy,
    current_value_hamiltonian,
    estimate_value,
    evaluate_cost,
    evaluate_family,
    hamiltonian,
    open_loop_policy,
    synthesize_feedback,
)
from .covariation import (
    ChiFunctional,
    CovariationEstimate,
    ScalarPath,
    covariation_scan,
    covariation_scan_paths,
    epsilon_covariation,
    orthogonality_test,
    weak_dirichlet_split,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    DimensionError,
    DomainError,
    IdentityInapplicable,
    MildHJBError,
    ParameterError,
    PolicyRangeError,
    SimulationDiverged,
)
from .hjb import (
    ApproxTriple,
    HJBCandidate,
    KinkSet,
    ProbeSet,
    apply_L0,
    ball_probes,
    check_strong_solution,
    classical_residual,
    decomposition_residual,
    gradient_check,
    verification_gap,
)
from .sde import (
    ControlledSDE,
    ControlSet,
    MonteCarlo,
    NoiseModel,
    TimeGrid,
    Trajectory,
    WienerPath,
    probe_coefficient_hypotheses,
    sample_wiener,
    simulate_mild,
)
from .spectral import GraphNormed, SpectralOperator, adjoint_apply, basis, inner, norm, semigroup_apply

__version__ = "0.1.0"
