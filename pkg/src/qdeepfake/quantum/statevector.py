"""Dense statevector simulation.

Qubit ``k`` (1-based) is bit ``k-1`` of the basis index, so qubit 1 is the least
significant bit. Amplitude arrays may carry leading batch dimensions, and gate
matrices may too; the two broadcast against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNITARY_TOL = 1e-10


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape[-1] != 2**self.n_qubits:
            raise ValueError(
                f"{self.n_qubits} qubits need {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape[-1]}"
            )

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.amplitudes.shape[:-1]

    def norm_squared(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=-1)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginal(self, qubit: int) -> np.ndarray:
        """Probability that ``qubit`` reads 1."""
        _check_qubit(qubit, self.n_qubits)
        bit = (np.arange(2**self.n_qubits) >> (qubit - 1)) & 1
        return np.sum(self.probabilities() * bit, axis=-1)


def amplitude_encode(pixels, n_qubits: int = 12) -> StateVector:
    """L2-normalise a real vector into the leading amplitudes; the rest stay zero."""
    x = np.asarray(pixels, dtype=np.float64)
    size = 2**n_qubits
    if x.shape[-1] > size:
        raise ValueError(f"{x.shape[-1]} values do not fit in {n_qubits} qubits ({size} amplitudes)")
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot amplitude-encode an all-zero input (normalisation undefined)")
    amps = np.zeros(x.shape[:-1] + (size,), dtype=np.complex128)
    amps[..., : x.shape[-1]] = x / norm
    return StateVector(n_qubits, amps)


# -- gate matrices; angles may be arrays, giving (..., 2, 2) / (..., 4, 4) stacks


def ry_matrix(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64) / 2
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(np.complex128)


def rz_matrix(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64) / 2
    zero = np.zeros_like(t)
    return np.stack(
        [np.stack([np.exp(-1j * t), zero], -1), np.stack([zero, np.exp(1j * t)], -1)], -2
    )


def controlled(u: np.ndarray) -> np.ndarray:
    """4x4 gate in the |control target> basis applying ``u`` when control is 1."""
    u = np.asarray(u, dtype=np.complex128)
    out = np.zeros(u.shape[:-2] + (4, 4), dtype=np.complex128)
    out[..., 0, 0] = out[..., 1, 1] = 1.0
    out[..., 2:, 2:] = u
    return out


def cry_matrix(phi) -> np.ndarray:
    return controlled(ry_matrix(phi))


CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
CNOT = controlled(np.array([[0, 1], [1, 0]]))


def _check_qubit(q: int, n: int) -> None:
    if not 1 <= q <= n:
        raise ValueError(f"qubit {q} out of range [1, {n}]")


def check_unitary(gate: np.ndarray, tol: float = UNITARY_TOL) -> None:
    gate = np.asarray(gate)
    eye = np.eye(gate.shape[-1])
    dev = np.abs(gate @ np.conj(np.swapaxes(gate, -1, -2)) - eye).max()
    if dev > tol:
        raise ValueError(f"gate is not unitary (max deviation {dev:.3g} > {tol:g})")


def _two_by_two(state: StateVector, u: np.ndarray, target: int, control: int | None = None) -> StateVector:
    """Apply a (..., 2, 2) matrix to ``target``, only where ``control`` (if any) reads 1."""
    n = state.n_qubits
    amps = state.amplitudes
    u = np.asarray(u)
    gb = u.shape[:-2]
    batch = np.broadcast_shapes(amps.shape[:-1], gb)
    # view the flat index as blocks split at the one or two addressed bits
    bits = sorted({target} | ({control} if control else set()), reverse=True)
    shape, prev = [], n
    for q in bits:
        shape += [2 ** (prev - q), 2]
        prev = q - 1
    shape.append(2**prev)
    src = np.broadcast_to(amps, batch + (2**n,)).reshape(batch + tuple(shape))
    out = np.empty(src.shape, dtype=np.result_type(src, u))
    axis = {q: len(batch) + 2 * i + 1 for i, q in enumerate(bits)}
    sel = [slice(None)] * src.ndim
    if control is not None:
        off = list(sel)
        off[axis[control]] = 0
        out[tuple(off)] = src[tuple(off)]
        sel[axis[control]] = 1
    sel0, sel1 = list(sel), list(sel)
    sel0[axis[target]], sel1[axis[target]] = 0, 1
    sel0, sel1 = tuple(sel0), tuple(sel1)
    a, b = src[sel0], src[sel1]
    pad = (1,) * (a.ndim - len(batch))
    c = [[u[..., i, j].reshape(gb + pad) for j in range(2)] for i in range(2)]
    out[sel0] = c[0][0] * a + c[0][1] * b
    out[sel1] = c[1][0] * a + c[1][1] * b
    return StateVector(n, out.reshape(batch + (2**n,)))


def apply_single(state: StateVector, gate: np.ndarray, qubit: int) -> StateVector:
    """Apply a (..., 2, 2) matrix to ``qubit`` without a unitarity check."""
    _check_qubit(qubit, state.n_qubits)
    return _two_by_two(state, gate, qubit)


def apply_rotation(state: StateVector, axis: str, qubit: int, theta) -> StateVector:
    if axis == "y":
        return apply_single(state, ry_matrix(theta), qubit)
    if axis == "z":
        return apply_single(state, rz_matrix(theta), qubit)
    raise ValueError(f"unknown rotation axis '{axis}' (expected 'y' or 'z')")


def _is_diagonal(g: np.ndarray) -> bool:
    return not np.any(g * (1 - np.eye(4)))


def _is_controlled(g: np.ndarray) -> bool:
    return bool(np.all(g[..., :2, :2] == np.eye(2)) and not np.any(g[..., :2, 2:]) and not np.any(g[..., 2:, :2]))


def apply_pair(state: StateVector, gate: np.ndarray, qa: int, qb: int) -> StateVector:
    """Apply a (..., 4, 4) matrix in the |qa qb> basis without a unitarity check."""
    n = state.n_qubits
    _check_qubit(qa, n)
    _check_qubit(qb, n)
    if qa == qb:
        raise ValueError(f"two-qubit gate needs distinct qubits, got {qa} twice")
    g = np.asarray(gate)
    amps = state.amplitudes
    if g.ndim == 2 and _is_diagonal(g):
        idx = np.arange(2**n)
        diag = np.diagonal(g)[2 * ((idx >> (qa - 1)) & 1) + ((idx >> (qb - 1)) & 1)]
        return StateVector(n, amps * diag)
    if _is_controlled(g):
        return _two_by_two(state, g[..., 2:, 2:], qb, control=qa)
    psi = amps.reshape(amps.shape[:-1] + (2,) * n)
    # qubit q is tensor axis -q (last axis is qubit 1)
    ax = (-qa, -qb)
    psi = np.moveaxis(psi, ax, (-2, -1))
    psi = psi.reshape(psi.shape[:-2] + (4,))
    g = g.reshape(g.shape[:-2] + (1,) * (n - 2) + (4, 4))
    out = np.einsum("...ij,...j->...i", g, psi)
    out = np.moveaxis(out.reshape(out.shape[:-1] + (2, 2)), (-2, -1), ax)
    return StateVector(n, out.reshape(out.shape[:-n] + (2**n,)))


def apply_two_qubit(state: StateVector, gate: np.ndarray, qa: int, qb: int) -> StateVector:
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape[-2:] != (4, 4):
        raise ValueError(f"two-qubit gate must be 4x4, got {gate.shape[-2:]}")
    check_unitary(gate)
    return apply_pair(state, gate, qa, qb)


def expect_z(state: StateVector, qubit: int) -> np.ndarray:
    """<Z_qubit>: probability-weighted +1 for bit 0 and -1 for bit 1."""
    return 1.0 - 2.0 * state.marginal(qubit)


def operator_matrix(n_qubits: int, build, batch: tuple[int, ...] = ()) -> np.ndarray:
    """Dense matrix of ``build`` (a StateVector -> StateVector map) by acting on basis states."""
    dim = 2**n_qubits
    eye = np.broadcast_to(np.eye(dim, dtype=np.complex128), batch + (dim, dim))
    cols = build(StateVector(n_qubits, eye)).amplitudes
    return np.swapaxes(cols, -1, -2)
