"""Neural engine: layer semantics, gradients, optimizer, checkpoints.

Forward passes are checked against naive loop implementations written here;
gradients against central finite differences.
"""

import numpy as np
import pytest

from mrmtl import nn

# ---------------------------------------------------------------------------
# independent oracles


def naive_conv2d(x, w, b, relu: bool):
    """Direct same-padded stride-1 convolution by explicit loops."""
    B, C, H, W = x.shape
    F, _, k, _ = w.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.zeros((B, F, H, W))
    for bi in range(B):
        for f in range(F):
            for i in range(H):
                for j in range(W):
                    out[bi, f, i, j] = np.sum(xp[bi, :, i:i + k, j:j + k] * w[f]) + b[f]
    return np.maximum(out, 0.0) if relu else out


def naive_maxpool(x, p):
    B, C, H, W = x.shape
    out = np.zeros((B, C, H // p, W // p))
    for i in range(H // p):
        for j in range(W // p):
            out[:, :, i, j] = x[:, :, i * p:(i + 1) * p, j * p:(j + 1) * p].max(axis=(2, 3))
    return out


# ---------------------------------------------------------------------------
# layer forward semantics


def test_softmax_uniform_logits():
    probs = nn.softmax(np.zeros((3, 10)) + 7.0)
    assert np.allclose(probs, 0.1, atol=1e-12)


def test_softmax_sums_to_one_with_large_logits():
    rng = np.random.default_rng(0)
    z = rng.normal(0, 300.0, size=(20, 10))
    probs = nn.softmax(z)
    assert np.all(np.isfinite(probs))
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("activation", ["relu", "linear"])
def test_conv_matches_naive(activation):
    rng = np.random.default_rng(3)
    layer = nn.Conv2D(2, 3, 3, activation, rng=rng)
    x = rng.normal(size=(2, 2, 5, 5))
    got = layer.forward(x, False, None)
    want = naive_conv2d(x, layer.params["w"], layer.params["b"], activation == "relu")
    assert np.allclose(got, want, atol=1e-12)


def test_maxpool_matches_naive():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 3, 6, 6))
    layer = nn.MaxPool2D(2)
    assert np.allclose(layer.forward(x, False, None), naive_maxpool(x, 2), atol=1e-15)


def test_maxpool_two_by_two():
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    out = nn.MaxPool2D(2).forward(x, False, None)
    assert out.reshape(()) == 4.0


def test_maxpool_tie_routes_to_first():
    layer = nn.MaxPool2D(2)
    x = np.ones((1, 1, 2, 2))
    layer.forward(x, True, None)
    dx = layer.backward(np.ones((1, 1, 1, 1)))
    assert dx[0, 0, 0, 0] == 1.0
    assert dx.sum() == 1.0


def test_dropout_identity_at_inference():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 7))
    out = nn.Dropout(0.25).forward(x, False, None)
    assert out is x or np.array_equal(out, x)


def test_dropout_zero_fraction_binomial():
    rng = np.random.default_rng(1)
    rate = 0.25
    x = np.ones((100, 100))
    out = nn.Dropout(rate).forward(x, True, rng)
    n = x.size
    zeros = int(np.count_nonzero(out == 0.0))
    sigma = np.sqrt(n * rate * (1 - rate))
    assert abs(zeros - n * rate) < 3 * sigma
    # survivors rescaled by 1/(1-rate)
    kept = out[out != 0.0]
    assert np.allclose(kept, 1.0 / (1.0 - rate), atol=1e-12)


def test_dropout_needs_rng_in_training():
    with pytest.raises(ValueError, match="rng"):
        nn.Dropout(0.5).forward(np.ones((2, 2)), True, None)


def test_dropout_rate_validation():
    with pytest.raises(ValueError):
        nn.Dropout(1.0)
    with pytest.raises(ValueError):
        nn.Dropout(-0.1)


def test_dense_linear_weight_gradient_is_input():
    # scalar-output linear layer, loss = output: dL/dw = x
    rng = np.random.default_rng(5)
    layer = nn.Dense(4, 1, "linear", rng=rng)
    x = rng.normal(size=(1, 4))
    layer.forward(x, True, None)
    layer.backward(np.ones((1, 1)))
    assert np.allclose(layer.grads["w"], x.T, atol=1e-15)
    assert np.allclose(layer.grads["b"], 1.0, atol=1e-15)


# ---------------------------------------------------------------------------
# network container


def _tiny_net(seed=0, with_dropout=True):
    rng = np.random.default_rng(seed)
    layers = [
        nn.Conv2D(2, 3, 3, "relu", rng=rng),
        nn.MaxPool2D(2),
        nn.Flatten(),
        nn.Dense(12, 8, "relu", rng=rng),
    ]
    if with_dropout:
        layers.append(nn.Dropout(0.2))
    layers.append(nn.Dense(8, 5, "softmax", rng=rng))
    return nn.Network(layers, (2, 4, 4))


def test_network_rejects_bad_input_shape():
    net = _tiny_net()
    with pytest.raises(nn.ShapeError, match="expects input shape"):
        net.forward(np.zeros((1, 2, 5, 5)))


def test_network_names_offending_layer_at_construction():
    rng = np.random.default_rng(0)
    with pytest.raises(nn.ShapeError, match="layer 1"):
        nn.Network([nn.Flatten(), nn.Dense(5, 2, "linear", rng=rng)], (2, 2, 2))


def test_backward_requires_training_forward():
    net = _tiny_net()
    net.forward(np.zeros((1, 2, 4, 4)), train=False)
    with pytest.raises(RuntimeError, match="training forward"):
        net.backward(np.zeros((1, 5)))


def test_inference_forward_is_deterministic():
    net = _tiny_net()
    x = np.random.default_rng(9).normal(size=(3, 2, 4, 4))
    assert np.array_equal(net.forward(x), net.forward(x))


def test_network_output_is_probability_vector():
    net = _tiny_net()
    x = np.random.default_rng(2).normal(size=(6, 2, 4, 4))
    probs = net.forward(x)
    assert probs.shape == (6, 5)
    assert np.all(probs >= 0.0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


# ---------------------------------------------------------------------------
# loss


def test_cross_entropy_one_hot():
    probs = np.zeros(10)
    probs[3] = 1.0
    assert abs(nn.cross_entropy(probs, 3)) < 1e-9


def test_cross_entropy_uniform():
    probs = np.full(10, 0.1)
    assert abs(nn.cross_entropy(probs, 0) - np.log(10.0)) < 1e-9


def test_cross_entropy_zero_probability_is_finite():
    probs = np.zeros(10)
    probs[0] = 1.0
    value = nn.cross_entropy(probs, 5)
    assert np.isfinite(value)
    assert abs(value - (-np.log(1e-12))) < 1e-6


def test_cross_entropy_label_range():
    with pytest.raises(ValueError):
        nn.cross_entropy(np.full(10, 0.1), 10)
    with pytest.raises(ValueError):
        nn.cross_entropy(np.full((2, 10), 0.1), [0, -1])


def test_cross_entropy_batch_mean():
    rng = np.random.default_rng(7)
    probs = rng.random((4, 6))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = np.array([0, 2, 5, 1])
    want = np.mean([nn.cross_entropy(probs[i], labels[i]) for i in range(4)])
    assert abs(nn.cross_entropy(probs, labels) - want) < 1e-12


def test_cross_entropy_grad_matches_fd():
    rng = np.random.default_rng(8)
    probs = rng.random(6) + 0.05
    probs /= probs.sum()
    label = 2
    grad = nn.cross_entropy_grad(probs, label)
    step = 1e-7
    for i in range(6):
        p_plus = probs.copy(); p_plus[i] += step
        p_minus = probs.copy(); p_minus[i] -= step
        fd = (nn.cross_entropy(p_plus, label) - nn.cross_entropy(p_minus, label)) / (2 * step)
        assert abs(grad[i] - fd) < 1e-5


# ---------------------------------------------------------------------------
# optimizer


def _one_param_layer(value=0.5):
    layer = nn.Dense(1, 1, "linear", rng=np.random.default_rng(0))
    layer.params["w"][...] = value
    layer.params["b"][...] = 0.0
    return nn.Network([layer], (1,)), layer


def test_adam_zero_gradient_freezes_parameters():
    net, layer = _one_param_layer()
    layer.grads = {"w": np.zeros((1, 1)), "b": np.zeros(1)}
    before = layer.params["w"].copy()
    nn.Adam(lr=0.1).step(net)
    assert np.array_equal(layer.params["w"], before)


def test_adam_zero_lr_freezes_parameters():
    net, layer = _one_param_layer()
    layer.grads = {"w": np.ones((1, 1)), "b": np.ones(1)}
    before = layer.params["w"].copy()
    nn.Adam(lr=0.0).step(net)
    assert np.array_equal(layer.params["w"], before)


def test_adam_first_step_magnitude():
    # hand evaluation at t=1, g=1: m_hat=1, v_hat=1, step = lr/(1+eps)
    net, layer = _one_param_layer()
    layer.grads = {"w": np.ones((1, 1)), "b": np.zeros(1)}
    lr = 0.01
    before = float(layer.params["w"][0, 0])
    nn.Adam(lr=lr).step(net)
    delta = float(layer.params["w"][0, 0]) - before
    assert abs(delta + lr) < 1e-8 * lr + 1e-12


def test_adam_rejects_non_finite_gradient():
    net, layer = _one_param_layer()
    layer.grads = {"w": np.array([[np.nan]]), "b": np.zeros(1)}
    with pytest.raises(nn.NumericError, match="layer0.w"):
        nn.Adam().step(net)


# ---------------------------------------------------------------------------
# gradient checking


def test_gradcheck_linear_net_passes_tight():
    rng = np.random.default_rng(0)
    net = nn.Network([nn.Dense(3, 2, "softmax", rng=rng)], (3,))
    x = np.random.default_rng(1).normal(size=(2, 3))
    report = nn.gradcheck(net, x, np.array([0, 1]), tolerance=1e-5)
    assert report.passed, report.max_rel_error


def test_gradcheck_full_layer_mix():
    net = _tiny_net(seed=3)
    x = np.random.default_rng(4).normal(size=(2, 2, 4, 4))
    report = nn.gradcheck(net, x, np.array([1, 4]), tolerance=1e-4)
    assert report.passed, report.max_rel_error


def test_gradcheck_detects_corrupted_backward(monkeypatch):
    net = _tiny_net(seed=5, with_dropout=False)
    x = np.random.default_rng(6).normal(size=(2, 2, 4, 4))
    original = nn.Dense.backward

    def corrupted(self, dout):
        dx = original(self, dout)
        self.grads = {k: 2.0 * v for k, v in self.grads.items()}
        return dx

    monkeypatch.setattr(nn.Dense, "backward", corrupted)
    report = nn.gradcheck(net, x, np.array([1, 4]), tolerance=1e-4)
    assert not report.passed


def test_gradcheck_zero_tolerance_fails():
    rng = np.random.default_rng(0)
    net = nn.Network([nn.Dense(3, 2, "softmax", rng=rng)], (3,))
    x = np.random.default_rng(1).normal(size=(2, 3))
    report = nn.gradcheck(net, x, np.array([0, 1]), tolerance=0.0)
    assert not report.passed


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    net = _tiny_net(seed=11)
    path = tmp_path / "net.ckpt"
    nn.save_checkpoint(net, path, metadata={"note": "roundtrip"})
    loaded, header = nn.load_checkpoint(path)
    assert header["format_version"] == 1
    assert header["metadata"]["note"] == "roundtrip"
    for (n1, a), (n2, b) in zip(net.param_items(), loaded.param_items()):
        assert n1 == n2
        assert np.array_equal(a, b)
    x = np.random.default_rng(0).normal(size=(2, 2, 4, 4))
    assert np.array_equal(net.forward(x), loaded.forward(x))


def test_checkpoint_save_is_byte_deterministic(tmp_path):
    net = _tiny_net(seed=12)
    nn.save_checkpoint(net, tmp_path / "a.ckpt")
    nn.save_checkpoint(net, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_checkpoint_truncation_detected(tmp_path):
    net = _tiny_net(seed=13)
    path = tmp_path / "net.ckpt"
    nn.save_checkpoint(net, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(ValueError, match="truncated"):
        nn.load_checkpoint(path)


def test_checkpoint_version_guard(tmp_path):
    import json
    import struct

    net = _tiny_net(seed=14)
    path = tmp_path / "net.ckpt"
    nn.save_checkpoint(net, path)
    blob = path.read_bytes()
    (hlen,) = struct.unpack("<I", blob[:4])
    header = json.loads(blob[4:4 + hlen])
    header["format_version"] = 99
    new = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path.write_bytes(struct.pack("<I", len(new)) + new + blob[4 + hlen:])
    with pytest.raises(ValueError, match="format_version"):
        nn.load_checkpoint(path)
