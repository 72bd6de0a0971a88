import numpy as np
import pytest
from scipy.stats import unitary_group

from quantum_oracle import cry, dense_funnel4, dense_pair, dense_single, random_state, ry, rz
from qdeepfake.quantum.fused import FunnelEvaluator
from qdeepfake.quantum.qcnn import (
    DEFAULT_TOPOLOGY,
    CircuitTopology,
    QcnnLayer,
    QcnnParams,
    conv_unit_U,
    funnel_topology,
    pool_unit_P,
    qcnn_expectation,
    qcnn_grad_fd,
    qcnn_grad_shift,
    qcnn_state,
)
from qdeepfake.quantum.statevector import (
    CNOT,
    CZ,
    StateVector,
    amplitude_encode,
    apply_rotation,
    apply_two_qubit,
    expect_z,
)


# -- encoding ------------------------------------------------------------------


def test_encode_single_support():
    x = np.zeros(3072)
    x[0] = 5.0
    amps = amplitude_encode(x).amplitudes
    expected = np.zeros(4096)
    expected[0] = 1.0
    np.testing.assert_array_equal(amps, expected)


def test_encode_uniform():
    amps = amplitude_encode(np.ones(3072)).amplitudes
    np.testing.assert_allclose(amps[:3072], 1 / np.sqrt(3072), rtol=1e-14)
    assert abs(amps[0] - 0.0180422) < 1e-7
    assert not np.any(amps[3072:])


def test_encode_random_norm_and_ratios():
    x = np.random.default_rng(0).standard_normal(3072)
    amps = amplitude_encode(x).amplitudes.real
    assert abs(np.sum(amps**2) - 1) <= 1e-12
    np.testing.assert_allclose(amps[:3072] / amps[0], x / x[0], rtol=1e-12)


def test_encode_rejects_zero():
    with pytest.raises(ValueError, match="all-zero"):
        amplitude_encode(np.zeros(3072))


# -- single- and two-qubit gates ------------------------------------------------------


def test_zero_rotations_are_identity():
    s = random_state(np.random.default_rng(1), 5)
    assert np.array_equal(apply_rotation(s, "y", 3, 0.0).amplitudes, s.amplitudes)
    np.testing.assert_allclose(apply_rotation(s, "z", 3, 0.0).amplitudes, s.amplitudes, atol=0)


def test_ry_pi_flips():
    out = apply_rotation(StateVector.basis(3, 0), "y", 2, np.pi).amplitudes
    expected = np.zeros(8)
    expected[2] = 1.0
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_rotation_norm_and_range():
    rng = np.random.default_rng(2)
    s = random_state(rng, 12)
    for q in (1, 7, 12):
        for axis in "yz":
            assert abs(apply_rotation(s, axis, q, rng.uniform(-7, 7)).norm_squared() - 1) <= 1e-12
    with pytest.raises(ValueError, match="out of range"):
        apply_rotation(s, "y", 13, 0.1)
    with pytest.raises(ValueError, match="out of range"):
        apply_rotation(s, "y", 0, 0.1)


def test_two_qubit_identity_and_cnot():
    s = random_state(np.random.default_rng(3), 4)
    np.testing.assert_array_equal(apply_two_qubit(s, np.eye(4), 1, 3).amplitudes, s.amplitudes)
    # qubit 2 = 1, qubit 1 = 0  ->  CNOT(control 2, target 1) sets qubit 1
    out = apply_two_qubit(StateVector.basis(2, 0b10), CNOT, 2, 1).amplitudes
    np.testing.assert_array_equal(out, [0, 0, 0, 1])


def test_two_qubit_random_unitary_inverse():
    rng = np.random.default_rng(4)
    for _ in range(10):
        g = unitary_group.rvs(4, random_state=rng)
        qa, qb = rng.choice(np.arange(1, 13), 2, replace=False)
        s = random_state(rng, 12)
        out = apply_two_qubit(s, g, qa, qb)
        assert abs(out.norm_squared() - 1) <= 1e-10
        back = apply_two_qubit(out, g.conj().T, qa, qb)
        assert np.abs(back.amplitudes - s.amplitudes).max() <= 1e-10


def test_two_qubit_matches_dense():
    rng = np.random.default_rng(5)
    s = random_state(rng, 4)
    for qa, qb in ((1, 2), (2, 1), (1, 4), (4, 2), (3, 1)):
        g = unitary_group.rvs(4, random_state=rng)
        np.testing.assert_allclose(apply_two_qubit(s, g, qa, qb).amplitudes, dense_pair(g, qa, qb, 4) @ s.amplitudes, atol=1e-12)


def test_two_qubit_rejections():
    s = StateVector.basis(3)
    with pytest.raises(ValueError, match="not unitary"):
        apply_two_qubit(s, np.ones((4, 4)), 1, 2)
    with pytest.raises(ValueError, match="distinct"):
        apply_two_qubit(s, np.eye(4), 2, 2)


def test_gate_locality():
    rng = np.random.default_rng(6)
    s = random_state(rng, 8)
    before = [s.marginal(q) for q in range(1, 9)]
    out = apply_two_qubit(s, unitary_group.rvs(4, random_state=rng), 3, 6)
    for q in range(1, 9):
        if q not in (3, 6):
            assert abs(out.marginal(q) - before[q - 1]) <= 1e-12


def test_norm_over_many_gates():
    rng = np.random.default_rng(7)
    s = random_state(rng, 6)
    for _ in range(2000):
        if rng.random() < 0.5:
            s = apply_rotation(s, "yz"[rng.integers(2)], int(rng.integers(1, 7)), rng.uniform(-np.pi, np.pi))
        else:
            qa, qb = rng.choice(np.arange(1, 7), 2, replace=False)
            s = apply_two_qubit(s, cry(rng.uniform(-np.pi, np.pi)), qa, qb)
    assert abs(s.norm_squared() - 1) <= 1e-9


# -- conv and pool units ---------------------------------------------------------------


def test_conv_unit_examples():
    s = StateVector.basis(2, 0)
    np.testing.assert_array_equal(conv_unit_U(s, (1, 2), 0.0, 0.0).amplitudes, s.amplitudes)
    out = conv_unit_U(s, (1, 2), np.pi, 0.0).amplitudes
    np.testing.assert_allclose(out, [0, 1, 0, 0], atol=1e-15)  # qubit 1 flipped, CZ inactive


def test_conv_unit_inverse():
    rng = np.random.default_rng(8)
    s = random_state(rng, 12)
    out = conv_unit_U(s, (4, 8), 0.7, -1.3, DEFAULT_TOPOLOGY, layer=3)
    back = apply_two_qubit(out, CZ, 4, 8)
    back = apply_rotation(apply_rotation(back, "y", 8, 1.3), "y", 4, -0.7)
    assert np.abs(back.amplitudes - s.amplitudes).max() <= 1e-10


def test_conv_unit_rejects_foreign_pair():
    with pytest.raises(ValueError, match="conv pair"):
        conv_unit_U(StateVector.basis(12), (1, 3), 0.1, 0.2, DEFAULT_TOPOLOGY)
    with pytest.raises(ValueError, match="conv pair"):
        conv_unit_U(StateVector.basis(12), (1, 2), 0.1, 0.2, DEFAULT_TOPOLOGY, layer=2)


def test_pool_unit_examples():
    rng = np.random.default_rng(9)
    # control (qubit 1) in |0>: keep qubit untouched for any angle
    s = StateVector(2, np.array([0.6, 0, 0.8, 0], dtype=complex))
    np.testing.assert_allclose(pool_unit_P(s, 1, 2, 1.234).amplitudes, s.amplitudes, atol=0)
    r = random_state(rng, 12)
    np.testing.assert_array_equal(pool_unit_P(r, 5, 6, 0.0).amplitudes, r.amplitudes)
    assert abs(pool_unit_P(r, 5, 6, 2.1).norm_squared() - 1) <= 1e-12
    with pytest.raises(ValueError, match="pool pair"):
        pool_unit_P(r, 6, 5, 0.3, DEFAULT_TOPOLOGY)


# -- topology and parameters ---------------------------------------------------------


def test_default_topology_layout():
    t = funnel_topology(12)
    assert [l.conv_pairs for l in t.layers] == [
        ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12)),
        ((2, 4), (6, 8), (10, 12)),
        ((4, 8), (8, 12)),
    ]
    assert all(l.pool_pairs == l.conv_pairs for l in t.layers)
    assert [sorted(a) for a in t.active_sets()] == [list(range(1, 13)), [2, 4, 6, 8, 10, 12], [4, 8, 12], [12]]
    assert t.n_params == 24 + 2 * 11 + 11 == 57


def test_topology_validation():
    with pytest.raises(ValueError, match="readout"):
        CircuitTopology(2, (QcnnLayer(((1, 2),), ((2, 1),)),), readout=2)
    with pytest.raises(ValueError, match="inactive"):
        CircuitTopology(3, (QcnnLayer(((1, 2),), ((1, 2),)), QcnnLayer(((1, 3),), ())), readout=3)


def test_params_round_trip():
    rng = np.random.default_rng(10)
    p = QcnnParams.random(rng)
    assert p.flat().shape == (57,)
    assert [c.shape for c in p.conv] == [(6, 2), (3, 2), (2, 2)]
    assert [c.shape for c in p.pool] == [(6,), (3,), (2,)]
    np.testing.assert_array_equal(QcnnParams.from_flat(p.flat()).flat(), p.flat())
    bad = QcnnParams(p.rotation, p.conv[:2], p.pool)
    with pytest.raises(ValueError, match="group sizes"):
        qcnn_expectation(np.ones(3072), bad)


# -- expectation ---------------------------------------------------------------------


def test_identity_circuit_reads_plus_one():
    x = np.zeros(3072)
    x[0] = 1.0
    assert qcnn_expectation(x, np.zeros(57)) == 1.0


def test_expectation_bounds():
    rng = np.random.default_rng(11)
    for _ in range(5):
        v = qcnn_expectation(rng.standard_normal(3072), QcnnParams.random(rng))
        assert -1.0 <= v <= 1.0


def test_two_qubit_dense_oracle():
    rng = np.random.default_rng(12)
    topo = funnel_topology(2)
    theta = rng.uniform(-np.pi, np.pi, topo.n_params)
    x = rng.standard_normal(4)
    u = np.eye(4, dtype=complex)
    for m in (
        dense_single(ry(theta[0]), 1, 2), dense_single(rz(theta[1]), 1, 2),
        dense_single(ry(theta[2]), 2, 2), dense_single(rz(theta[3]), 2, 2),
        dense_single(ry(theta[4]), 1, 2), dense_single(ry(theta[5]), 2, 2),
        np.diag([1, 1, 1, -1]), dense_pair(cry(theta[6]), 1, 2, 2),
    ):
        u = m @ u
    psi = u @ (x / np.linalg.norm(x))
    z = np.array([1, 1, -1, -1])
    assert abs(qcnn_expectation(x, theta, topo) - np.sum(z * np.abs(psi) ** 2)) <= 1e-12


def test_four_qubit_dense_oracle():
    rng = np.random.default_rng(13)
    topo = funnel_topology(4)
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, topo.n_params)
        x = rng.standard_normal(16)
        layered = qcnn_state(x, theta, topo).amplitudes
        dense = dense_funnel4(theta) @ (x / np.linalg.norm(x))
        assert np.abs(layered - dense).max() <= 1e-10


# -- gradients ------------------------------------------------------------------------


def test_single_ry_shift_exact():
    topo = CircuitTopology(1, (), readout=1)
    grad = qcnn_grad_shift(np.array([1.0, 0.0]), np.array([np.pi / 3, 0.4]), topo)
    assert abs(grad[0] + np.sqrt(3) / 2) <= 1e-15
    assert abs(grad[1]) <= 1e-15


def test_dead_parameters_have_zero_gradient():
    # qubits 1 and 2 never interact with the readout qubit 3
    topo = CircuitTopology(3, (QcnnLayer(((1, 2),), ((1, 2),)),), readout=3)
    rng = np.random.default_rng(14)
    theta = rng.uniform(-np.pi, np.pi, topo.n_params)
    x = rng.standard_normal(8)
    dead = [0, 1, 2, 3, 6, 7, 8]  # rotations on qubits 1, 2, the conv pair and the pool
    g_shift = qcnn_grad_shift(x, theta, topo)
    g_fd = qcnn_grad_fd(x, theta, topology=topo)
    assert np.abs(g_shift[dead]).max() <= 1e-15
    assert np.abs(g_fd[dead]).max() <= 1e-11
    assert np.abs(g_shift[4]) > 1e-3  # the readout qubit's own Ry is live


def test_shift_matches_fd_full_circuit():
    rng = np.random.default_rng(15)
    for _ in range(3):
        x = rng.standard_normal(3072)
        p = QcnnParams.random(rng)
        assert np.abs(qcnn_grad_shift(x, p) - qcnn_grad_fd(x, p, 1e-4)).max() <= 1e-6


def test_fd_second_order_convergence():
    rng = np.random.default_rng(16)
    x = rng.standard_normal(3072)
    p = QcnnParams.random(rng)
    exact = qcnn_grad_shift(x, p)
    e1 = np.abs(qcnn_grad_fd(x, p, 1e-4) - exact).max()
    e2 = np.abs(qcnn_grad_fd(x, p, 5e-5) - exact).max()
    assert 3.5 <= e1 / e2 <= 4.5


def test_shift_rule_per_gate_family_on_small_circuit():
    # every family (Ry, Rz, controlled-Ry) against central differences on 4 qubits
    rng = np.random.default_rng(17)
    topo = funnel_topology(4)
    for _ in range(10):
        theta = rng.uniform(-np.pi, np.pi, topo.n_params)
        x = rng.standard_normal(16)
        assert np.abs(qcnn_grad_shift(x, theta, topo) - qcnn_grad_fd(x, theta, topology=topo)).max() <= 1e-6


# -- fused evaluator ------------------------------------------------------------------


def test_fused_matches_gate_level():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((3, 3072))
    flat = rng.uniform(-np.pi, np.pi, (2, 57))
    ev = FunnelEvaluator(chunk=2)
    out = ev.expectations(x, flat)
    ref = np.array([[qcnn_expectation(xi, f) for xi in x] for f in flat])
    assert np.abs(out - ref).max() <= 1e-12
    w = rng.standard_normal((2, 3))
    _, grad = ev.vjp(x, flat, w)
    ref_grad = np.array([sum(w[c, n] * qcnn_grad_shift(x[n], flat[c]) for n in range(3)) for c in range(2)])
    assert np.abs(grad - ref_grad).max() <= 1e-12


def test_fused_cached_backward_matches():
    rng = np.random.default_rng(19)
    x = rng.standard_normal((5, 3072))
    flat = rng.uniform(-np.pi, np.pi, (3, 57))
    w = rng.standard_normal((3, 5))
    ev = FunnelEvaluator(chunk=2)
    out, cache = ev.forward(x, flat, keep=True)
    np.testing.assert_array_equal(ev.backward(cache, w), ev.vjp(x, flat, w)[1])


def test_fused_rejects_other_topologies_and_zero_images():
    with pytest.raises(ValueError, match="default"):
        FunnelEvaluator(funnel_topology(4))
    with pytest.raises(ValueError, match="all zero"):
        FunnelEvaluator().expectations(np.zeros((1, 3072)), np.zeros(57))


def test_expect_z_sign_convention():
    # qubit 12 set (index 2048) reads -1
    assert expect_z(StateVector.basis(12, 2048), 12) == -1.0
    assert expect_z(StateVector.basis(12, 2047), 12) == 1.0
