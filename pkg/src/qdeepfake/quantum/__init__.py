from .fused import FunnelEvaluator
from .qcnn import (
    DEFAULT_TOPOLOGY,
    CircuitTopology,
    QcnnLayer,
    QcnnParams,
    conv_unit_U,
    funnel_topology,
    gate_sequence,
    pool_unit_P,
    qcnn_expectation,
    qcnn_grad_fd,
    qcnn_grad_shift,
    qcnn_state,
)
from .statevector import StateVector, amplitude_encode, apply_rotation, apply_two_qubit, expect_z

__all__ = [
    "DEFAULT_TOPOLOGY",
    "CircuitTopology",
    "FunnelEvaluator",
    "QcnnLayer",
    "QcnnParams",
    "StateVector",
    "amplitude_encode",
    "apply_rotation",
    "apply_two_qubit",
    "conv_unit_U",
    "expect_z",
    "funnel_topology",
    "gate_sequence",
    "pool_unit_P",
    "qcnn_expectation",
    "qcnn_grad_fd",
    "qcnn_grad_shift",
    "qcnn_state",
]
