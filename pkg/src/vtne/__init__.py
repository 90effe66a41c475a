"""Bond-dimension-capped MPS simulation and pre-optimization of Hubbard-model circuits."""

from .ansatz import Circuit, build_noninteracting_ansatz, build_np_ansatz, circuit_to_mps, table1_layers
from .errors import CapacityError, CheckpointError, ConfigError, NumericalIntegrityError, ShapeError, VTNEError
from .experiments import RunConfig, RunRecord, __version__, run_vtne, run_warmstart_comparison
from .gradient import energy_chi, gradient_sweep
from .hubbard import LatticeConfig, hubbard_mpo, jordan_wigner_terms
from .optimizers import OptimizerConfig, OptimizerKind, bfgs_minimize, adam_minimize, minimize, vtne_protocol
from .oracle import exact_ground, statevector_simulate

__all__ = [
    "CapacityError",
    "CheckpointError",
    "Circuit",
    "ConfigError",
    "LatticeConfig",
    "NumericalIntegrityError",
    "OptimizerConfig",
    "OptimizerKind",
    "RunConfig",
    "RunRecord",
    "ShapeError",
    "VTNEError",
    "__version__",
    "adam_minimize",
    "bfgs_minimize",
    "build_noninteracting_ansatz",
    "build_np_ansatz",
    "circuit_to_mps",
    "energy_chi",
    "exact_ground",
    "gradient_sweep",
    "hubbard_mpo",
    "jordan_wigner_terms",
    "minimize",
    "run_vtne",
    "run_warmstart_comparison",
    "statevector_simulate",
    "table1_layers",
    "vtne_protocol",
]
