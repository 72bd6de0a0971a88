import numpy as np
import pytest
from scipy.signal import correlate

from gradcheck import numeric_grad, rel_error
from qdeepfake.tensor import Tensor, activation, conv2d, conv_transpose2d, flatten, grad, input_grad_norm, linear, no_grad
from qdeepfake.tensor import nn
from qdeepfake.tensor.checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_module,
    save_checkpoint,
    save_module,
    trainable_count,
)
from qdeepfake.tensor.engine import Col2Im, Im2Col
from test_tensor_engine import projected_check


def test_conv2d_matches_scipy_correlate():
    rng = np.random.default_rng(0)
    x, w, b = rng.standard_normal((2, 3, 6, 5)), rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.empty_like(out)
    for i in range(2):
        for o in range(4):
            ref[i, o] = correlate(xp[i], w[o], mode="valid")[0] + b[o]
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_conv2d_stride2_matches_scipy():
    rng = np.random.default_rng(1)
    x, w = rng.standard_normal((1, 2, 8, 8)), rng.standard_normal((3, 2, 4, 4))
    out = conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data
    xp = np.pad(x[0], ((0, 0), (1, 1), (1, 1)))
    for o in range(3):
        full = correlate(xp, w[o], mode="valid")[0]
        np.testing.assert_allclose(out[0, o], full[::2, ::2], atol=1e-12)


def test_im2col_col2im_adjoint():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 3, 7, 6))
    cols = Im2Col.apply(Tensor(x), kernel=3, stride=2, pad=1)
    y = rng.standard_normal(cols.shape)
    back = Col2Im.apply(Tensor(y), image_shape=x.shape, kernel=3, stride=2, pad=1)
    assert np.isclose((cols.data * y).sum(), (x * back.data).sum(), rtol=1e-12)


def test_conv_transpose_matches_scatter_oracle():
    rng = np.random.default_rng(3)
    x, w, b = rng.standard_normal((2, 3, 4, 4)), rng.standard_normal((3, 2, 4, 4)), rng.standard_normal(2)
    out = conv_transpose2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert out.shape == (2, 2, 8, 8)
    full = np.zeros((2, 2, 10, 10))
    for n in range(2):
        for ci in range(3):
            for i in range(4):
                for j in range(4):
                    full[n, :, 2 * i : 2 * i + 4, 2 * j : 2 * j + 4] += x[n, ci, i, j] * w[ci]
    ref = full[:, :, 1:9, 1:9] + b.reshape(1, 2, 1, 1)
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_conv_transpose_gradcheck():
    rng = np.random.default_rng(4)
    arrays = [rng.standard_normal((2, 3, 3, 3)), rng.standard_normal((3, 2, 4, 4)), rng.standard_normal(2)]
    assert projected_check(lambda x, w, b: conv_transpose2d(x, w, b), arrays) <= 1e-4


def test_gradient_penalty_through_conv_critic():
    rng = np.random.default_rng(5)
    w1, b1 = rng.standard_normal((2, 1, 3, 3)), rng.standard_normal(2)
    w2 = rng.standard_normal((2 * 4 * 4, 1))
    x = rng.standard_normal((3, 1, 4, 4))

    def penalty(*ps):
        ts = [Tensor(p, requires_grad=True) for p in ps]

        def critic(t):
            h = activation("leaky_relu", conv2d(t, ts[0], ts[1]))
            return linear(flatten(h), ts[2])

        norms = input_grad_norm(critic, Tensor(x))
        return ((norms - 1.0) ** 2).mean(), ts

    value, ts = penalty(w1, b1, w2)
    grads = grad(value, ts)
    arrays = [w1.copy(), b1.copy(), w2.copy()]
    analytic = np.concatenate([g.data.ravel() for g in grads])
    numeric = np.concatenate([numeric_grad(lambda *a: penalty(*a)[0].item(), arrays, i).ravel() for i in range(3)])
    assert rel_error(analytic, numeric) <= 1e-3


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 2).sum()
    assert y._ctx is None and not y.requires_grad


def _model(seed=0):
    rng = np.random.default_rng(seed)
    return nn.Sequential(nn.Conv2d(3, 4, rng=rng), nn.BatchNorm2d(4), nn.ReLU(), nn.Flatten(), nn.Linear(4 * 4 * 4, 2, rng=rng))


def test_checkpoint_round_trip(tmp_path):
    model = _model(0)
    model[1]._buffers["running_mean"][:] = [0.1, 0.2, 0.3, 0.4]
    save_module(model, tmp_path / "m")
    other = _model(1)
    load_module(other, tmp_path / "m")
    for (k, a), (_, b) in zip(model.state_dict().items(), other.state_dict().items()):
        np.testing.assert_array_equal(a, b, err_msg=k)
    assert trainable_count(tmp_path / "m") == model.num_parameters()
    x = Tensor(np.random.default_rng(2).standard_normal((2, 3, 4, 4)).astype(np.float32))
    model.eval(), other.eval()
    np.testing.assert_array_equal(model(x).data, other(x).data)


def test_checkpoint_manifest_layout(tmp_path):
    save_checkpoint(tmp_path / "c", {"a": (np.arange(6.0).reshape(2, 3), True), "s": (np.float32(2.5), False)})
    lines = (tmp_path / "c.manifest").read_text().splitlines()
    assert lines == ["qdeepfake-checkpoint 1", "a f32 2x3 0 24 param", "s f32 scalar 24 4 buffer"]
    assert (tmp_path / "c.bin").stat().st_size == 28
    loaded = load_checkpoint(tmp_path / "c")
    assert loaded["s"][0].shape == () and loaded["s"][0] == 2.5


def test_checkpoint_truncated(tmp_path):
    save_checkpoint(tmp_path / "c", {"a": (np.ones(10), True)})
    blob = (tmp_path / "c.bin").read_bytes()
    (tmp_path / "c.bin").write_bytes(blob[:20])
    with pytest.raises(CheckpointError, match="40"):
        load_checkpoint(tmp_path / "c")


def test_checkpoint_version_mismatch(tmp_path):
    save_checkpoint(tmp_path / "c", {"a": (np.ones(1), True)})
    text = (tmp_path / "c.manifest").read_text().replace("checkpoint 1", "checkpoint 7")
    (tmp_path / "c.manifest").write_text(text)
    with pytest.raises(CheckpointError, match="version 7"):
        load_checkpoint(tmp_path / "c")


def test_load_state_dict_shape_mismatch():
    model = _model()
    state = model.state_dict()
    state["layers.4.bias"] = np.zeros(3, dtype=np.float32)
    with pytest.raises(ValueError, match="layers.4.bias"):
        model.load_state_dict(state)


def test_dropout_module_reseed_reproduces():
    layer = nn.Dropout(0.5, seed=3)
    x = Tensor(np.ones((4, 4)))
    first = [layer(x).data for _ in range(2)]
    assert not np.array_equal(first[0], first[1])
    layer.reseed(3)
    np.testing.assert_array_equal(layer(x).data, first[0])


def test_module_adam_decreases_loss():
    rng = np.random.default_rng(6)
    model = nn.Sequential(nn.Linear(3, 1, rng=rng, dtype=np.float64))
    x, y = rng.standard_normal((20, 3)), rng.standard_normal((20, 1))
    opt = nn.Adam(model.named_parameters(), lr=0.05)
    losses = []
    for _ in range(100):
        opt.zero_grad()
        loss = ((model(Tensor(x)) - Tensor(y)) ** 2).mean()
        loss.backward()
        opt.step()
        losses.append(loss.item())
    ls = np.linalg.lstsq(np.c_[x, np.ones(20)], y, rcond=None)[0]
    best = float(((np.c_[x, np.ones(20)] @ ls - y) ** 2).mean())
    assert losses[-1] < losses[0] and losses[-1] - best < 1e-2
