"""Fast batched evaluation of the default 12-qubit funnel and its adjoint gradient.

The gate-level simulator costs one pass over 4096 amplitudes per gate. For
training, the circuit is regrouped into four stages acting on the amplitude
vector viewed as a 64x64 matrix X[high six qubits, low six qubits]:

* A: every single-qubit gate before the first CZ layer, a Kronecker product on
  each half, so X -> A_h X A_l^T;
* CZ1: a fixed sign pattern;
* B: first-layer pooling plus second-layer conv rotations, again one Kronecker
  product of 4x4 pair blocks on each half;
* W: everything else touches only the six even qubits, so with E[even, odd]
  the readout is sum over odd indices of E^H (W^T Z W) E.

All stage operators are built from the same gate matrices as the simulator, and
the gradient is a hand-written reverse pass through the four stages.
"""

from __future__ import annotations

import string

import numpy as np

from .qcnn import DEFAULT_TOPOLOGY, CircuitTopology, funnel_topology, gate_sequence
from .statevector import CZ, apply_pair, apply_single, controlled, operator_matrix, ry_matrix, rz_matrix

N_PIXELS = 3072


def _d_ry(theta):
    return 0.5 * ry_matrix(np.asarray(theta) + np.pi)


def _d_rz(theta):
    return 0.5 * rz_matrix(np.asarray(theta) + np.pi)


def _d_cry(theta):
    d = _d_ry(theta)
    out = np.zeros(d.shape[:-2] + (4, 4), dtype=np.complex128)
    out[..., 2:, 2:] = d
    return out


def kron_all(factors: list[np.ndarray]) -> np.ndarray:
    """Batched Kronecker product of (C, d, d) factors, most significant first."""
    out = factors[0]
    for f in factors[1:]:
        c, a, _ = out.shape
        d = f.shape[-1]
        out = (out[:, :, None, :, None] * f[:, None, :, None, :]).reshape(c, a * d, a * d)
    return out


def kron_factor_cotangents(g: np.ndarray, factors: list[np.ndarray]) -> list[np.ndarray]:
    """For G = dL/dK with K = kron(factors), the cotangent of each factor.

    Entry (i, j) of factor k's cotangent is the sum of G against the conjugated
    product of all other factors, which is the chain rule through the product.
    """
    m = len(factors)
    d = factors[0].shape[-1]
    c = g.shape[0]
    g = g.reshape((c,) + (d,) * (2 * m))
    letters = string.ascii_letters
    rows, cols = letters[:m], letters[m : 2 * m]
    out = []
    conj = [np.conj(f) for f in factors]
    for k in range(m):
        terms = ["z" + rows + cols]
        ops = [g]
        for j in range(m):
            if j != k:
                terms.append("z" + rows[j] + cols[j])
                ops.append(conj[j])
        spec = ",".join(terms) + "->z" + rows[k] + cols[k]
        out.append(np.einsum(spec, *ops, optimize="greedy"))
    return out


def _cz_signs(n_local: int, pairs) -> np.ndarray:
    idx = np.arange(2**n_local)
    sign = np.ones(2**n_local)
    for a, b in pairs:
        sign *= 1 - 2 * (((idx >> (a - 1)) & 1) * ((idx >> (b - 1)) & 1))
    return sign


def _real_left(r: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Real matrix times complex matrix, done as one real product on the float view."""
    x = np.ascontiguousarray(x)
    return (r @ x.view(np.float64)).view(np.complex128)


def _fold_left(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """sum over axis 1 of p[:, n]^T q[:, n], as one product per leading index."""
    c, n, i, j = p.shape
    # contiguous operands keep matmul on the BLAS path
    p = np.ascontiguousarray(p).reshape(c, n * i, j)
    q = np.ascontiguousarray(q).reshape(c, n * i, q.shape[-1])
    return np.swapaxes(p, -1, -2) @ q


def _fold_right(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """sum over axis 1 of p[:, n] q[:, n]^H."""
    return _fold_left(np.swapaxes(p, -1, -2), np.conj(np.swapaxes(q, -1, -2)))


class FunnelEvaluator:
    """<Z_12> for C parameter sets on N images, with vector-Jacobian products."""

    def __init__(self, topology: CircuitTopology = DEFAULT_TOPOLOGY, chunk: int = 16):
        if topology != funnel_topology(12):
            raise ValueError("the fused evaluator only supports the default 12-qubit funnel topology")
        self.chunk = chunk
        self.n_params = topology.n_params
        gates = gate_sequence(topology)
        conv1 = {g.qubits[0]: g.param for g in gates if g.layer == 1 and g.kind == "ry"}
        self.conv1 = [conv1[q] for q in range(1, 13)]
        pool1 = {g.qubits[1]: g.param for g in gates if g.layer == 1 and g.kind == "cry"}
        conv2 = {g.qubits[0]: g.param for g in gates if g.layer == 2 and g.kind == "ry"}
        # pair j of a half is (odd 2j-1, even 2j); B-stage params per even qubit
        self.pool1 = {q: pool1[q] for q in range(2, 13, 2)}
        self.conv2 = {q: conv2[q] for q in range(2, 13, 2)}
        # W stage: every remaining gate, on the even qubits renumbered q -> q/2
        self.w_gates = [
            g._replace(qubits=tuple(q // 2 for q in g.qubits))
            for g in gates
            if g.layer >= 3 or (g.layer == 2 and g.kind != "ry")
        ]
        self.w_params = [g.param for g in self.w_gates if g.param is not None]
        self.cz1 = np.outer(_cz_signs(6, [(1, 2), (3, 4), (5, 6)]), _cz_signs(6, [(1, 2), (3, 4), (5, 6)]))
        self.z_readout = 1.0 - 2.0 * ((np.arange(64) >> 5) & 1)

    # -- stage operators ---------------------------------------------------------

    def _qubit_factors(self, flat, half):
        """Per-qubit 2x2 A-stage factors and their three derivatives, for one half."""
        out = []
        for local in range(6, 0, -1):
            q = local + 6 * half
            r, z, c = flat[:, 2 * (q - 1)], flat[:, 2 * (q - 1) + 1], flat[:, self.conv1[q - 1]]
            mats = (ry_matrix(r), rz_matrix(z), ry_matrix(c))
            derivs = (_d_ry(r), _d_rz(z), _d_ry(c))
            a = mats[2] @ mats[1] @ mats[0]
            da = [
                mats[2] @ mats[1] @ derivs[0],
                mats[2] @ derivs[1] @ mats[0],
                derivs[2] @ mats[1] @ mats[0],
            ]
            out.append((q, a, da))
        return out

    def _pair_block(self, pool_angle, conv_angle, d_pool=False, d_conv=False):
        """4x4 B-stage block on |even odd>: CRY(odd -> even) then Ry on the even qubit."""
        cry = (_d_cry if d_pool else lambda t: controlled(ry_matrix(t)))(pool_angle)
        ry = (_d_ry if d_conv else ry_matrix)(conv_angle)

        def build(s):
            s = apply_pair(s, cry[:, None], 1, 2)
            return apply_single(s, ry[:, None], 2)

        return operator_matrix(2, build, batch=(len(pool_angle),)).real

    def _pair_factors(self, flat, half):
        out = []
        for j in range(3, 0, -1):
            q = 2 * j + 6 * half
            p, c = flat[:, self.pool1[q]], flat[:, self.conv2[q]]
            b = self._pair_block(p, c)
            db = [self._pair_block(p, c, d_pool=True), self._pair_block(p, c, d_conv=True)]
            out.append((q, b, db))
        return out

    def _w_matrix(self, flat, deriv_param=None):
        c = flat.shape[0]

        def build(s):
            for g in self.w_gates:
                if g.kind == "cz":
                    s = apply_pair(s, CZ, *g.qubits)
                    continue
                angle = flat[:, g.param][:, None]
                if g.kind == "ry":
                    m = _d_ry(angle) if g.param == deriv_param else ry_matrix(angle)
                    s = apply_single(s, m, g.qubits[0])
                else:
                    m = _d_cry(angle) if g.param == deriv_param else controlled(ry_matrix(angle))
                    s = apply_pair(s, m, *g.qubits)
            return s

        return operator_matrix(6, build, batch=(c,)).real

    def _stages(self, flat):
        flat = np.atleast_2d(np.asarray(flat, dtype=np.float64))
        if flat.shape[-1] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters per circuit, got {flat.shape[-1]}")
        qa = [self._qubit_factors(flat, h) for h in (0, 1)]
        pb = [self._pair_factors(flat, h) for h in (0, 1)]
        a = [kron_all([f[1] for f in qa[h]]) for h in (0, 1)]
        b = [kron_all([f[1] for f in pb[h]]) for h in (0, 1)]
        w = self._w_matrix(flat)
        m = np.swapaxes(w, -1, -2) @ (self.z_readout[:, None] * w)
        return flat, qa, pb, a, b, w, m

    # -- evaluation --------------------------------------------------------------

    @staticmethod
    def encode(pixels) -> np.ndarray:
        """(N, 3072) pixels -> (N, 64, 64) real encoded amplitudes."""
        x = np.asarray(pixels, dtype=np.float64).reshape(-1, N_PIXELS)
        norm = np.linalg.norm(x, axis=1, keepdims=True)
        if np.any(norm == 0):
            bad = int(np.flatnonzero(norm[:, 0] == 0)[0])
            raise ValueError(f"image {bad} is all zero; amplitude encoding is undefined")
        amps = np.zeros((x.shape[0], 4096))
        amps[:, :N_PIXELS] = x / norm
        return amps.reshape(-1, 64, 64)

    @staticmethod
    def _to_even_odd(x3):
        """(C, N, 64 high, 64 low) -> (C, 64 even, N * 64 odd)."""
        c, n = x3.shape[:2]
        t = x3.reshape((c, n) + (2,) * 12)
        # axes 2..7 are qubits 12..7, axes 8..13 are qubits 6..1
        ax = {q: 2 + (12 - q) for q in range(1, 13)}
        even = [ax[q] for q in (12, 10, 8, 6, 4, 2)]
        odd = [ax[q] for q in (11, 9, 7, 5, 3, 1)]
        return t.transpose([0] + even + [1] + odd).reshape(c, 64, n * 64)

    @staticmethod
    def _from_even_odd(e, n):
        c = e.shape[0]
        t = e.reshape((c,) + (2,) * 6 + (n,) + (2,) * 6)
        # position of each qubit in the (even, image, odd) layout
        pos = {q: 1 + i for i, q in enumerate((12, 10, 8, 6, 4, 2))}
        pos.update({q: 8 + i for i, q in enumerate((11, 9, 7, 5, 3, 1))})
        return t.transpose([0, 7] + [pos[q] for q in range(12, 0, -1)]).reshape(c, n, 64, 64)

    def _forward_chunk(self, x0, st):
        _, _, _, a, b, _, m = st
        n = x0.shape[0]
        t = x0[None] @ np.swapaxes(a[0], -1, -2)[:, None]  # X0 A_l^T
        x1 = a[1][:, None] @ t
        x2 = self.cz1 * x1
        z = _real_left(b[1][:, None], x2)  # B_h X2
        x3 = z @ np.swapaxes(b[0], -1, -2)[:, None].astype(np.complex128)
        e = self._to_even_odd(x3)
        me = _real_left(m, e)
        o = (e.real * me.real + e.imag * me.imag).reshape(-1, 64, n, 64).sum(axis=(1, 3))
        return o, (t, x2, z, e, me)

    def forward(self, pixels, flat, keep: bool = False):
        """(C, N) expectations, plus what :meth:`backward` needs.

        With ``keep`` the per-chunk intermediates are stored (about 10 MB per
        circuit per 16 images); otherwise backward recomputes them.
        """
        x0 = self.encode(pixels)
        st = self._stages(flat)
        outs, saved = [], []
        for i in range(0, len(x0), self.chunk):
            o, inter = self._forward_chunk(x0[i : i + self.chunk], st)
            outs.append(o)
            saved.append(inter if keep else None)
        return np.concatenate(outs, axis=1), (x0, st, saved)

    def expectations(self, pixels, flat) -> np.ndarray:
        """(C, N) array of <Z_12> for C parameter rows and N images."""
        return self.forward(pixels, flat)[0]

    def vjp(self, pixels, flat, weights) -> tuple[np.ndarray, np.ndarray]:
        """Expectations and sum over (c, n) of weights[c, n] * dO[c, n]/dflat[c]."""
        out, cache = self.forward(pixels, flat)
        return out, self.backward(cache, weights)

    def backward(self, cache, weights) -> np.ndarray:
        """Gradient (C, P) of sum(weights * O) with respect to each circuit's parameters."""
        x0_all, st, saved = cache
        flat, qa, pb, a, b, w, m = st
        weights = np.asarray(weights, dtype=np.float64)
        cdim = flat.shape[0]
        g_a = [np.zeros((cdim, 64, 64), complex) for _ in range(2)]
        g_b = [np.zeros((cdim, 64, 64)) for _ in range(2)]
        rho = np.zeros((cdim, 64, 64))
        for k, i in enumerate(range(0, len(x0_all), self.chunk)):
            x0 = x0_all[i : i + self.chunk]
            n = x0.shape[0]
            t, x2, z, e, me = saved[k] if saved[k] is not None else self._forward_chunk(x0, st)[1]
            wc = np.repeat(weights[:, i : i + n], 64, axis=1)[:, None, :]
            er, ei = np.ascontiguousarray(e.real), np.ascontiguousarray(e.imag)
            rho += (wc * er) @ np.swapaxes(er, -1, -2) + (wc * ei) @ np.swapaxes(ei, -1, -2)
            g_x3 = self._from_even_odd(2 * wc * me, n)
            p = g_x3 @ b[0][:, None].astype(np.complex128)  # G_X3 B_l
            g_b[1] += _fold_right(p, x2).real  # sum_n G_X3 (X2 B_l^T)^H
            g_b[0] += _fold_left(g_x3.real, z.real) + _fold_left(g_x3.imag, z.imag)
            g_x1 = self.cz1 * _real_left(np.swapaxes(b[1], -1, -2)[:, None], p)
            g_a[1] += _fold_right(g_x1, t)
            q = np.conj(np.swapaxes(a[1], -1, -2))[:, None] @ g_x1  # A_h^H G_X1
            # sum_n q[n]^T X0[n] for every circuit at once
            qs = np.ascontiguousarray(q.transpose(1, 2, 0, 3)).reshape(n * 64, cdim * 64)
            xs = x0.reshape(n * 64, 64)
            g_a[0] += (qs.T @ xs).reshape(cdim, 64, 64)

        grad = np.zeros_like(flat)
        for h in (0, 1):
            cot = kron_factor_cotangents(g_a[h], [f[1] for f in qa[h]])
            for (q, _, da), hq in zip(qa[h], cot):
                idx = (2 * (q - 1), 2 * (q - 1) + 1, self.conv1[q - 1])
                for p, d in zip(idx, da):
                    grad[:, p] += np.sum((np.conj(hq) * d).real, axis=(-1, -2))
            cot = kron_factor_cotangents(g_b[h], [f[1] for f in pb[h]])
            for (q, _, db), hq in zip(pb[h], cot):
                for p, d in zip((self.pool1[q], self.conv2[q]), db):
                    grad[:, p] += np.sum(hq * d, axis=(-1, -2))
        for p in self.w_params:
            dw = self._w_matrix(flat, deriv_param=p)
            grad[:, p] = 2 * np.sum(rho * (np.swapaxes(w, -1, -2) @ (self.z_readout[:, None] * dw)), axis=(-1, -2))
        return grad
