"""Simulation and analysis of heralded emit-then-add photonic graph states.

Submodules: ``tableau`` and ``pauli`` (stabilizer engine), ``graph`` (graph-state
rules), ``builder`` (emitter construction), ``channel`` and ``fock`` (hardware
noise models), ``mpc`` (two-party computation protocol), ``scaling`` and
``cli`` (experiment driver).
"""

from .pauli import PauliTerm
from .tableau import (
    CliffordGate,
    MeasurementError,
    ProtocolError,
    StabilizerState,
    apply_gate,
    from_generators,
    measure_pauli,
    new_state,
    states_equal,
    to_statevector,
)

__version__ = "0.1.0"

__all__ = [
    "CliffordGate",
    "MeasurementError",
    "PauliTerm",
    "ProtocolError",
    "StabilizerState",
    "apply_gate",
    "from_generators",
    "measure_pauli",
    "new_state",
    "states_equal",
    "to_statevector",
]
