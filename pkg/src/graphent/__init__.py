"""Graph-state entanglement toolkit: simulation, tomography and certification."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    BootstrapConfig,
    PathAnalysis,
    QuadSelection,
    analyze_path,
    bootstrap_ci,
    negativity,
    path_chains,
    projected_pair_negativities,
    select_quads,
    witness_expectation,
)
from .errors import ContractViolation, CoverageError, GraphentError, UnreachableBranch, ValidationError  # noqa: E402
from .graphstate import (  # noqa: E402
    Circuit,
    PauliString,
    QubitGraph,
    build_graph_state_circuit,
    default_path_graph,
    reduce_to_cnot,
    stabilizer_generators,
)
from .linalg import Bipartition, DensityMatrix, StateVector, partial_trace, partial_transpose  # noqa: E402
from .simulator import NoiseModel, PauliFrameSampler, ShotPlan, run_density, run_statevector, run_trajectories  # noqa: E402
from .tomography import TomographyDataset, collect_dataset, project_to_physical, reconstruct, tomograph  # noqa: E402
