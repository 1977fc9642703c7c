"""Linear, mean-field and Lyapunov-controlled qubit dynamics and Bloch-sphere reachable sets."""

__version__ = "0.1.0"

from .qcore import (  # noqa: E402
    BlochVector,
    HamiltonianParams,
    Operator2,
    QubitState,
    TransformParams,
    bloch_from_state,
    conjugate_hamiltonian,
    expand_transformed_coefficients,
    expectation_sz,
    linear_hamiltonian,
    state_from_bloch,
    transform_f,
)
from .dynamics import (  # noqa: E402
    IntegratorConfig,
    Trajectory,
    nonlinear_rhs,
    propagate_linear,
    propagate_nonlinear,
    sample_trajectory,
)
from .lyapunov import (  # noqa: E402
    ControlLawConfig,
    H1Choice,
    SignConvention,
    TargetConfig,
    assemble_controlled_hamiltonian,
    control_f_closed,
    control_f_general,
    distance_v,
    run_controlled,
)
from .reach import (  # noqa: E402
    PointCloud,
    SpherePartition,
    SweepConfig,
    cell_index,
    compare_coverage,
    coverage,
    run_sweep,
)
