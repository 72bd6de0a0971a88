"""Quantum convolutional circuit: rotation layer, conv/pool funnel and Z readout.

Flat parameter order (57 values for the 12-qubit funnel):
rotation angles per qubit (Ry angle, Rz angle), then conv angles layer by layer
(two per unit), then pool angles layer by layer (one per unit).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .statevector import (
    CZ,
    StateVector,
    amplitude_encode,
    apply_pair,
    apply_rotation,
    apply_single,
    cry_matrix,
    expect_z,
    ry_matrix,
    rz_matrix,
)

Pair = tuple[int, int]


@dataclass(frozen=True)
class QcnnLayer:
    conv_pairs: tuple[Pair, ...]
    pool_pairs: tuple[Pair, ...]  # (discard, keep)


@dataclass(frozen=True)
class CircuitTopology:
    n_qubits: int
    layers: tuple[QcnnLayer, ...]
    readout: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(
            QcnnLayer(tuple(map(tuple, l.conv_pairs)), tuple(map(tuple, l.pool_pairs))) for l in self.layers
        ))
        self.validate()

    def validate(self) -> None:
        active = set(range(1, self.n_qubits + 1))
        if self.readout not in active:
            raise ValueError(f"readout qubit {self.readout} out of range [1, {self.n_qubits}]")
        for li, layer in enumerate(self.layers, start=1):
            for a, b in layer.conv_pairs:
                if a == b:
                    raise ValueError(f"layer {li}: conv pair ({a},{b}) repeats a qubit")
                missing = {a, b} - active
                if missing:
                    raise ValueError(f"layer {li}: conv pair ({a},{b}) uses inactive qubit(s) {sorted(missing)}")
            for d, k in layer.pool_pairs:
                if d == k:
                    raise ValueError(f"layer {li}: pool pair ({d},{k}) repeats a qubit")
                missing = {d, k} - active
                if missing:
                    raise ValueError(f"layer {li}: pool pair ({d},{k}) uses discarded qubit(s) {sorted(missing)}")
                active.discard(d)
        if self.readout not in active:
            raise ValueError(f"readout qubit {self.readout} is discarded by pooling")

    def active_sets(self) -> list[frozenset[int]]:
        """Active qubits at the start of each layer, plus the final survivors."""
        active = set(range(1, self.n_qubits + 1))
        out = [frozenset(active)]
        for layer in self.layers:
            active -= {d for d, _ in layer.pool_pairs}
            out.append(frozenset(active))
        return out

    @property
    def conv_counts(self) -> tuple[int, ...]:
        return tuple(len(l.conv_pairs) for l in self.layers)

    @property
    def pool_counts(self) -> tuple[int, ...]:
        return tuple(len(l.pool_pairs) for l in self.layers)

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits + 2 * sum(self.conv_counts) + sum(self.pool_counts)


def funnel_topology(n_qubits: int = 12) -> CircuitTopology:
    """Halve the active set each layer, always keeping the highest qubit.

    An even number of active qubits is paired disjointly, (a1,a2)(a3,a4)...; an odd
    number is chained, (a1,a2)(a2,a3)..., which funnels everything into the last
    qubit. Pools discard the first qubit of each pair.
    """
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    active = list(range(1, n_qubits + 1))
    layers = []
    while len(active) > 1:
        if len(active) % 2 == 0:
            pairs = tuple((active[i], active[i + 1]) for i in range(0, len(active), 2))
        else:
            pairs = tuple((active[i], active[i + 1]) for i in range(len(active) - 1))
        layers.append(QcnnLayer(pairs, pairs))
        discarded = {d for d, _ in pairs}
        active = [q for q in active if q not in discarded]
    return CircuitTopology(n_qubits, tuple(layers), n_qubits)


DEFAULT_TOPOLOGY = funnel_topology(12)


@dataclass
class QcnnParams:
    rotation: np.ndarray  # (n_qubits, 2)
    conv: list[np.ndarray] = field(default_factory=list)  # per layer, (units, 2)
    pool: list[np.ndarray] = field(default_factory=list)  # per layer, (units,)

    def check(self, topology: CircuitTopology) -> None:
        if np.shape(self.rotation) != (topology.n_qubits, 2):
            raise ValueError(f"rotation angles must be {topology.n_qubits}x2, got {np.shape(self.rotation)}")
        conv = tuple(len(c) for c in self.conv)
        pool = tuple(len(p) for p in self.pool)
        if conv != topology.conv_counts or pool != topology.pool_counts:
            raise ValueError(
                f"layer group sizes conv={conv} pool={pool} do not match the topology "
                f"(conv={topology.conv_counts}, pool={topology.pool_counts})"
            )

    def flat(self) -> np.ndarray:
        parts = [np.ravel(self.rotation)]
        parts += [np.ravel(c) for c in self.conv]
        parts += [np.ravel(p) for p in self.pool]
        return np.concatenate(parts).astype(np.float64)

    @classmethod
    def from_flat(cls, vec, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> "QcnnParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (topology.n_params,):
            raise ValueError(f"expected {topology.n_params} parameters, got shape {vec.shape}")
        n = topology.n_qubits
        rotation = vec[: 2 * n].reshape(n, 2)
        pos = 2 * n
        conv = []
        for c in topology.conv_counts:
            conv.append(vec[pos : pos + 2 * c].reshape(c, 2))
            pos += 2 * c
        pool = []
        for c in topology.pool_counts:
            pool.append(vec[pos : pos + c])
            pos += c
        return cls(rotation, conv, pool)

    @classmethod
    def random(cls, rng: np.random.Generator, topology: CircuitTopology = DEFAULT_TOPOLOGY, scale=np.pi):
        return cls.from_flat(rng.uniform(-scale, scale, topology.n_params), topology)


class Gate(NamedTuple):
    kind: str  # ry | rz | cz | cry
    qubits: tuple[int, ...]
    param: int | None  # index into the flat parameter vector
    layer: int  # 0 for the rotation layer


def gate_sequence(topology: CircuitTopology = DEFAULT_TOPOLOGY) -> list[Gate]:
    gates = []
    for q in range(1, topology.n_qubits + 1):
        gates.append(Gate("ry", (q,), 2 * (q - 1), 0))
        gates.append(Gate("rz", (q,), 2 * (q - 1) + 1, 0))
    pos = 2 * topology.n_qubits
    for li, layer in enumerate(topology.layers, start=1):
        for a, b in layer.conv_pairs:
            gates.append(Gate("ry", (a,), pos, li))
            gates.append(Gate("ry", (b,), pos + 1, li))
            gates.append(Gate("cz", (a, b), None, li))
            pos += 2
    for li, layer in enumerate(topology.layers, start=1):
        for d, k in layer.pool_pairs:
            gates.append(Gate("cry", (d, k), pos, li))
            pos += 1
    # pools are numbered after all conv angles but act right after their own layer's convs
    return sorted(gates, key=lambda g: (g.layer, g.kind == "cry"))


def gate_matrix(kind: str, angle=None) -> np.ndarray:
    if kind == "ry":
        return ry_matrix(angle)
    if kind == "rz":
        return rz_matrix(angle)
    if kind == "cry":
        return cry_matrix(angle)
    if kind == "cz":
        return CZ
    raise ValueError(f"unsupported gate family '{kind}'")


def apply_gate(state: StateVector, kind: str, qubits, matrix: np.ndarray) -> StateVector:
    if len(qubits) == 1:
        return apply_single(state, matrix, qubits[0])
    return apply_pair(state, matrix, *qubits)


def _pair_in(topology, layer, pair, attr) -> None:
    layers = topology.layers if layer is None else [topology.layers[layer - 1]]
    if not any(tuple(pair) in getattr(l, attr) for l in layers):
        where = "any layer" if layer is None else f"layer {layer}"
        raise ValueError(f"pair {tuple(pair)} is not a {attr[:-6]} pair of {where} in the topology")


def conv_unit_U(state: StateVector, pair: Pair, phi1, phi2, topology: CircuitTopology | None = None,
                layer: int | None = None) -> StateVector:
    """Ry(phi1) on the first qubit, Ry(phi2) on the second, then CZ on both."""
    if topology is not None:
        _pair_in(topology, layer, pair, "conv_pairs")
    qa, qb = pair
    state = apply_rotation(state, "y", qa, phi1)
    state = apply_rotation(state, "y", qb, phi2)
    return apply_pair(state, CZ, qa, qb)


def pool_unit_P(state: StateVector, discard: int, keep: int, phi, topology: CircuitTopology | None = None,
                layer: int | None = None) -> StateVector:
    """Controlled-Ry(phi): the discarded qubit controls a rotation of the kept one."""
    if topology is not None:
        _pair_in(topology, layer, (discard, keep), "pool_pairs")
    return apply_pair(state, cry_matrix(phi), discard, keep)


def _flat(params, topology: CircuitTopology) -> np.ndarray:
    if isinstance(params, QcnnParams):
        params.check(topology)
        return params.flat()
    flat = np.asarray(params, dtype=np.float64)
    if flat.shape[-1] != topology.n_params:
        raise ValueError(f"expected {topology.n_params} parameters, got {flat.shape[-1]}")
    return flat


def run_circuit(state: StateVector, flat: np.ndarray, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> StateVector:
    """Apply every gate; ``flat`` may have leading batch axes that broadcast with the state's."""
    for g in gate_sequence(topology):
        angle = None if g.param is None else flat[..., g.param]
        state = apply_gate(state, g.kind, g.qubits, gate_matrix(g.kind, angle))
    return state


def _encode(pixels, topology: CircuitTopology) -> StateVector:
    if isinstance(pixels, StateVector):
        return pixels
    return amplitude_encode(pixels, topology.n_qubits)


def qcnn_state(pixels, params, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> StateVector:
    return run_circuit(_encode(pixels, topology), _flat(params, topology), topology)


def qcnn_expectation(pixels, params, topology: CircuitTopology = DEFAULT_TOPOLOGY):
    """<Z_readout> after the circuit; a float for one image and one parameter set."""
    out = expect_z(qcnn_state(pixels, params, topology), topology.readout)
    return float(out) if np.ndim(out) == 0 else out


def run_shifted(state: StateVector, flat: np.ndarray, shifts, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> StateVector:
    """Final states for each ``(param, delta)`` perturbation of one parameter vector.

    Rows that perturb a later gate share the unperturbed prefix, so each row only
    pays for the gates from its own perturbation onwards.
    """
    gates = gate_sequence(topology)
    position = {g.param: i for i, g in enumerate(gates) if g.param is not None}
    order = sorted(range(len(shifts)), key=lambda r: position[shifts[r][0]])
    n = topology.n_qubits
    rows = np.empty((len(shifts),) + state.batch_shape + (2**n,), dtype=np.complex128)
    base = state
    done = 0
    for i, g in enumerate(gates):
        angle = None if g.param is None else flat[g.param]
        matrix = gate_matrix(g.kind, angle)
        if done:
            rows[:done] = apply_gate(StateVector(n, rows[:done]), g.kind, g.qubits, matrix).amplitudes
        start = done
        while done < len(order) and shifts[order[done]][0] == g.param and g.param is not None:
            done += 1
        if done > start:
            deltas = np.array([shifts[order[r]][1] for r in range(start, done)])
            deltas = deltas.reshape(deltas.shape + (1,) * len(state.batch_shape))
            rows[start:done] = apply_gate(base, g.kind, g.qubits, gate_matrix(g.kind, angle + deltas)).amplitudes
        base = apply_gate(base, g.kind, g.qubits, matrix)
    out = np.empty_like(rows)
    out[order] = rows
    return StateVector(n, out)


def qcnn_grad_fd(pixels, params, epsilon: float = 1e-4, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> np.ndarray:
    """Central differences, one parameter at a time (2P circuit runs)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    flat = _flat(params, topology)
    shifts = [(p, d) for p in range(topology.n_params) for d in (epsilon, -epsilon)]
    values = expect_z(run_shifted(_encode(pixels, topology), flat, shifts, topology), topology.readout)
    return (values[0::2] - values[1::2]) / (2 * epsilon)


_C1 = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_C2 = (np.sqrt(2) - 1) / (4 * np.sqrt(2))

# (shift, coefficient) pairs; Ry and Rz have generator eigenvalues +-1/2, while the
# controlled rotation's generator has {0, +-1/2}, which needs four evaluations.
SHIFT_RULES = {
    "ry": ((np.pi / 2, 0.5), (-np.pi / 2, -0.5)),
    "rz": ((np.pi / 2, 0.5), (-np.pi / 2, -0.5)),
    "cry": ((np.pi / 2, _C1), (-np.pi / 2, -_C1), (3 * np.pi / 2, -_C2), (-3 * np.pi / 2, _C2)),
}


def qcnn_grad_shift(pixels, params, topology: CircuitTopology = DEFAULT_TOPOLOGY) -> np.ndarray:
    flat = _flat(params, topology)
    shifts, coeffs = [], []
    for g in gate_sequence(topology):
        if g.param is None:
            continue
        if g.kind not in SHIFT_RULES:
            raise ValueError(f"no shift rule for gate family '{g.kind}'")
        for shift, coeff in SHIFT_RULES[g.kind]:
            shifts.append((g.param, shift))
            coeffs.append(coeff)
    values = expect_z(run_shifted(_encode(pixels, topology), flat, shifts, topology), topology.readout)
    grad = np.zeros(topology.n_params)
    np.add.at(grad, [p for p, _ in shifts], np.asarray(coeffs) * values)
    return grad
