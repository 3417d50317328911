"""Sequential-emission photonic tensor-network states from one emitter and a delay-line queue."""

from .errors import CapExceededError, NonCliffordGateError, ProtocolError, QuadratureError
from .protocol import (
    EMITTER,
    RETURNING,
    FeasibilityParams,
    GateOp,
    LatticeGeometry,
    ProtocolProgram,
    QubitRef,
    build_cluster_program,
    build_toric_program,
    check_feasibility,
    fresh,
    gate,
    load_program,
)
from .runner import EngineState, disentangle_emitter, run, run_lossy_cluster
from .stabilizer import PauliString, StabilizerTableau, contains, verify_graph_state
from .statevector import MixedState, PureState
from .tensornet import (
    StepTensor,
    TensorNetwork,
    check_isometry,
    contract_protocol_network,
    contract_torus,
    extract_step_tensor,
    toric_tensor,
    verify_toric_stabilizers,
)

__version__ = "0.1.0"

__all__ = [
    "CapExceededError", "NonCliffordGateError", "ProtocolError", "QuadratureError",
    "EMITTER", "RETURNING", "FeasibilityParams", "GateOp", "LatticeGeometry", "ProtocolProgram",
    "QubitRef", "build_cluster_program", "build_toric_program", "check_feasibility", "fresh",
    "gate", "load_program", "EngineState", "disentangle_emitter", "run", "run_lossy_cluster",
    "PauliString", "StabilizerTableau", "contains", "verify_graph_state", "MixedState",
    "PureState", "StepTensor", "TensorNetwork", "check_isometry", "contract_protocol_network",
    "contract_torus", "extract_step_tensor", "toric_tensor", "verify_toric_stabilizers",
    "__version__",
]
