import time

import numpy as np
import pytest

from graspsim.errors import ArchitectureError, InvalidArgumentError, ShapeError
from graspsim.nn import (
    PROPRIO_DIM,
    WeightStore,
    attention,
    conv2d,
    elu,
    init_student_weights,
    kd_loss,
    layer_norm,
    linear,
    max_pool2,
    positional_encoding,
    softmax,
    student_forward,
    student_manifest,
    transformer_encoder_layer,
)


# ---------------------------------------------------------------------------
# Brute-force oracles (independent of the implementations under test)
# ---------------------------------------------------------------------------

def naive_linear(x, w, b):
    out = np.zeros((x.shape[0], w.shape[1]))
    for i in range(x.shape[0]):
        for j in range(w.shape[1]):
            s = 0.0
            for k in range(w.shape[0]):
                s += float(x[i, k]) * float(w[k, j])
            out[i, j] = s + float(b[j])
    return out


def naive_conv2d(x, kern, stride=1, padding=0):
    c, h, w = x.shape
    oc, _, kh, kw = kern.shape
    if padding:
        xp = np.zeros((c, h + 2 * padding, w + 2 * padding))
        xp[:, padding:padding + h, padding:padding + w] = x
        x = xp
        h, w = x.shape[1:]
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.zeros((oc, oh, ow))
    for o in range(oc):
        for i in range(oh):
            for j in range(ow):
                s = 0.0
                for ch in range(c):
                    for a in range(kh):
                        for bb in range(kw):
                            s += float(x[ch, i * stride + a, j * stride + bb]) \
                                * float(kern[o, ch, a, bb])
                out[o, i, j] = s
    return out


def naive_softmax(v):
    e = np.exp(np.asarray(v, dtype=np.float64) - np.max(v))
    return e / e.sum()


def naive_attention(q, k, v):
    logits = np.array([float(np.dot(q[0], k[i])) for i in range(k.shape[0])])
    alpha = naive_softmax(logits)
    return np.array([float(np.dot(alpha, v[:, j])) for j in range(v.shape[1])])


def naive_layer_norm(x, g, b, eps=1e-5):
    out = np.zeros_like(x, dtype=np.float64)
    for i in range(x.shape[0]):
        row = x[i].astype(np.float64)
        mu = row.mean()
        var = row.var()
        out[i] = (row - mu) / np.sqrt(var + eps) * g + b
    return out


def naive_encoder_layer(tokens, weights, heads=2):
    t, d = tokens.shape
    dh = d // heads
    x = tokens.astype(np.float64)
    q = naive_linear(x, weights["attn.wq"], weights["attn.bq"])
    k = naive_linear(x, weights["attn.wk"], weights["attn.bk"])
    v = naive_linear(x, weights["attn.wv"], weights["attn.bv"])
    attn = np.zeros((t, d))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        for i in range(t):
            logits = np.array([
                float(np.dot(q[i, sl], k[j, sl])) / np.sqrt(dh) for j in range(t)
            ])
            alpha = naive_softmax(logits)
            for j in range(t):
                attn[i, sl] += alpha[j] * v[j, sl]
    attn = naive_linear(attn, weights["attn.wo"], weights["attn.bo"])
    x = naive_layer_norm(x + attn, weights["ln1.g"], weights["ln1.b"])
    hmid = naive_linear(x, weights["ff.w1"], weights["ff.b1"])
    hmid = np.where(hmid > 0, hmid, np.expm1(hmid))
    ff = naive_linear(hmid, weights["ff.w2"], weights["ff.b2"])
    return naive_layer_norm(x + ff, weights["ln2.g"], weights["ln2.b"])


def random_layer_weights(rng, d=64, ff=256):
    w = {}
    for part in ("wq", "wk", "wv", "wo"):
        w[f"attn.{part}"] = rng.uniform(-0.2, 0.2, (d, d)).astype(np.float32)
        w[f"attn.{part.replace('w', 'b')}"] = rng.uniform(-0.1, 0.1, d).astype(np.float32)
    w["ln1.g"] = np.ones(d, np.float32)
    w["ln1.b"] = np.zeros(d, np.float32)
    w["ff.w1"] = rng.uniform(-0.2, 0.2, (d, ff)).astype(np.float32)
    w["ff.b1"] = rng.uniform(-0.1, 0.1, ff).astype(np.float32)
    w["ff.w2"] = rng.uniform(-0.2, 0.2, (ff, d)).astype(np.float32)
    w["ff.b2"] = rng.uniform(-0.1, 0.1, d).astype(np.float32)
    w["ln2.g"] = np.ones(d, np.float32)
    w["ln2.b"] = np.zeros(d, np.float32)
    return w


# ---------------------------------------------------------------------------
# Op tests
# ---------------------------------------------------------------------------

def test_linear_identity_and_hand_case():
    x = np.array([[1.0, 2.0]], dtype=np.float32)
    assert np.allclose(linear(x, np.eye(2, dtype=np.float32),
                              np.zeros(2, np.float32)), x)
    y = linear(x, np.eye(2, dtype=np.float32), np.array([3.0, 4.0], np.float32))
    assert np.allclose(y, [[4.0, 6.0]])


def test_linear_matches_naive(rng):
    for _ in range(20):
        x = rng.standard_normal((4, 7)).astype(np.float32)
        w = rng.standard_normal((7, 5)).astype(np.float32)
        b = rng.standard_normal(5).astype(np.float32)
        assert np.max(np.abs(linear(x, w, b) - naive_linear(x, w, b))) < 1e-5


def test_linear_shape_error_names_shapes():
    with pytest.raises(ShapeError) as err:
        linear(np.zeros((2, 3), np.float32), np.zeros((4, 5), np.float32),
               np.zeros(5, np.float32))
    assert "(2, 3)" in str(err.value) and "(4, 5)" in str(err.value)


def test_elu_values():
    assert elu(np.float32(0.0)) == 0.0
    assert elu(np.float32(1.0)) == 1.0
    x = np.array([-2.0, -0.5, 0.0, 0.5], np.float32)
    expected = np.where(x > 0, x, np.expm1(x))
    assert np.allclose(elu(x), expected, atol=1e-7)


def test_softmax_uniform_and_normalized(rng):
    s = softmax(np.full(7, 3.3, np.float32))
    assert np.allclose(s, 1.0 / 7.0, atol=1e-7)
    for _ in range(20):
        x = rng.standard_normal((5, 9)).astype(np.float32) * 10
        s = softmax(x, axis=-1)
        assert np.max(np.abs(s.sum(axis=-1) - 1.0)) < 1e-6


def test_conv2d_identity_and_sum():
    x = np.arange(12, dtype=np.float32).reshape(1, 3, 4)
    ident = np.ones((1, 1, 1, 1), np.float32)
    assert np.allclose(conv2d(x, ident), x)
    ones = np.ones((1, 1, 3, 3), np.float32)
    out = conv2d(np.ones((1, 3, 3), np.float32), ones)
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == pytest.approx(9.0)


def test_conv2d_matches_naive(rng):
    for stride, padding in ((1, 0), (1, 1), (2, 0), (2, 1)):
        x = rng.standard_normal((3, 8, 9)).astype(np.float32)
        k = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        fast = conv2d(x, k, stride=stride, padding=padding)
        slow = naive_conv2d(x, k, stride=stride, padding=padding)
        assert fast.shape == slow.shape
        assert np.max(np.abs(fast - slow)) < 1e-5


def test_conv2d_shape_error():
    with pytest.raises(ShapeError):
        conv2d(np.zeros((2, 4, 4), np.float32), np.zeros((1, 3, 3, 3), np.float32))
    with pytest.raises(ShapeError):
        conv2d(np.zeros((1, 2, 2), np.float32), np.zeros((1, 1, 5, 5), np.float32))


def test_attention_single_key_passthrough(rng):
    q = rng.standard_normal((1, 4)).astype(np.float32)
    k = rng.standard_normal((1, 4)).astype(np.float32)
    v = rng.standard_normal((1, 6)).astype(np.float32)
    assert np.array_equal(attention(q, k, v), v)


def test_attention_equal_keys_mean(rng):
    q = rng.standard_normal((1, 4)).astype(np.float32)
    k = np.tile(rng.standard_normal((1, 4)).astype(np.float32), (5, 1))
    v = rng.standard_normal((5, 3)).astype(np.float32)
    assert np.allclose(attention(q, k, v)[0], v.mean(axis=0), atol=1e-6)


def test_attention_two_key_hand_case():
    # q.k1 = ln 2, q.k2 = 0  ->  alpha = (2/3, 1/3), unscaled logits
    q = np.array([[1.0, 0.0]], np.float32)
    k = np.array([[np.log(2.0), 0.0], [0.0, 5.0]], np.float32)
    v = np.array([[1.0], [0.0]], np.float32)
    out = attention(q, k, v)
    assert out[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_attention_matches_naive(rng):
    for _ in range(20):
        q = rng.standard_normal((1, 6)).astype(np.float32)
        k = rng.standard_normal((7, 6)).astype(np.float32)
        v = rng.standard_normal((7, 4)).astype(np.float32)
        assert np.max(np.abs(attention(q, k, v)[0] - naive_attention(q, k, v))) < 1e-5


def test_attention_output_in_value_hull(rng):
    for _ in range(20):
        q = rng.standard_normal((1, 3)).astype(np.float32) * 3
        k = rng.standard_normal((6, 3)).astype(np.float32)
        v = rng.standard_normal((6, 1)).astype(np.float32)
        out = attention(q, k, v)[0, 0]
        assert v.min() - 1e-6 <= out <= v.max() + 1e-6


def test_transformer_layer_shape_and_oracle(rng):
    w = random_layer_weights(rng)
    tokens = rng.standard_normal((4, 64)).astype(np.float32)
    out = transformer_encoder_layer(tokens, w)
    assert out.shape == (4, 64)
    ref = naive_encoder_layer(tokens, w)
    assert np.max(np.abs(out - ref)) < 1e-4


def test_transformer_layer_not_permutation_invariant(rng):
    w = random_layer_weights(rng)
    tokens = rng.standard_normal((4, 64)).astype(np.float32)
    tokens = tokens + positional_encoding(4, 64)
    perm = tokens[[1, 0, 2, 3]]
    a = transformer_encoder_layer(tokens, w)
    b = transformer_encoder_layer(perm, w)
    assert np.max(np.abs(a - b)) > 1e-6


def test_transformer_layer_reduced_to_attention_path(rng):
    # zero feed-forward + identity output projection leaves attention + norms
    w = random_layer_weights(rng)
    w["attn.wo"] = np.eye(64, dtype=np.float32)
    w["attn.bo"] = np.zeros(64, np.float32)
    w["ff.w1"] = np.zeros((64, 256), np.float32)
    w["ff.b1"] = np.zeros(256, np.float32)
    w["ff.w2"] = np.zeros((256, 64), np.float32)
    w["ff.b2"] = np.zeros(64, np.float32)
    tokens = rng.standard_normal((3, 64)).astype(np.float32)
    out = transformer_encoder_layer(tokens, w)

    # hand-built reduced oracle
    x = tokens.astype(np.float64)
    q = x @ w["attn.wq"] + w["attn.bq"]
    k = x @ w["attn.wk"] + w["attn.bk"]
    v = x @ w["attn.wv"] + w["attn.bv"]
    attn = np.zeros_like(x)
    for h in range(2):
        sl = slice(h * 32, (h + 1) * 32)
        logits = q[:, sl] @ k[:, sl].T / np.sqrt(32)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        alpha = e / e.sum(axis=1, keepdims=True)
        attn[:, sl] = alpha @ v[:, sl]
    y = naive_layer_norm(x + attn, w["ln1.g"], w["ln1.b"])
    ref = naive_layer_norm(y, w["ln2.g"], w["ln2.b"])
    assert np.max(np.abs(out - ref)) < 1e-4


def test_positional_encoding_values():
    pe = positional_encoding(4, 6)
    assert pe[0, 0] == pytest.approx(0.0)
    assert pe[0, 1] == pytest.approx(1.0)
    assert pe[2, 0] == pytest.approx(np.sin(2.0), abs=1e-6)
    assert pe[2, 1] == pytest.approx(np.cos(2.0), abs=1e-6)
    assert pe[1, 2] == pytest.approx(np.sin(1.0 / 10000.0 ** (2.0 / 6.0)), abs=1e-6)


def test_kd_loss_cases():
    a = np.zeros((3, 8))
    assert kd_loss(a, a) == 0.0
    b = np.zeros((1, 8))
    c = b.copy()
    c[0, 0] = 1.0
    assert kd_loss(b, c) == pytest.approx(1.0)
    s = np.zeros((2, 8))
    t = np.zeros((2, 8))
    t[0, 0] = 1.0
    t[1, 1] = 2.0
    assert kd_loss(s, t) == pytest.approx(2.5)
    with pytest.raises(ShapeError):
        kd_loss(np.zeros((2, 8)), np.zeros((3, 8)))


def test_layer_norm_matches_naive(rng):
    x = rng.standard_normal((5, 16)).astype(np.float32)
    g = rng.uniform(0.5, 1.5, 16).astype(np.float32)
    b = rng.uniform(-0.5, 0.5, 16).astype(np.float32)
    assert np.max(np.abs(layer_norm(x, g, b) - naive_layer_norm(x, g, b))) < 1e-5


def test_max_pool2():
    x = np.arange(16, dtype=np.float32).reshape(1, 4, 4)
    out = max_pool2(x)
    assert np.allclose(out[0], [[5, 7], [13, 15]])
    odd = max_pool2(np.arange(15, dtype=np.float32).reshape(1, 3, 5))
    assert odd.shape == (1, 1, 2)


# ---------------------------------------------------------------------------
# Weight store and student network
# ---------------------------------------------------------------------------

def test_weight_store_manifest_validation():
    manifest = [("a.w", (2, 3)), ("a.b", (3,))]
    params = {"a.w": np.zeros((2, 3), np.float32), "a.b": np.zeros(3, np.float32)}
    store = WeightStore("toy", manifest, dict(params))
    assert store.param_count() == 9
    with pytest.raises(ArchitectureError) as err:
        WeightStore("toy", manifest, {"a.w": params["a.w"],
                                      "a.b": np.zeros(4, np.float32)})
    assert "a.b" in str(err.value)
    with pytest.raises(ArchitectureError):
        WeightStore("toy", manifest, {"a.w": params["a.w"]})
    with pytest.raises(ArchitectureError):
        store.get("missing.w")


def test_weight_store_file_roundtrip(tmp_path, rng):
    store = init_student_weights(3)
    path = tmp_path / "student.weights"
    store.save(path)
    loaded = WeightStore.load(path)
    assert loaded.arch == store.arch
    assert loaded.manifest == store.manifest
    for name, _ in store.manifest:
        assert np.array_equal(loaded.get(name), store.get(name))


def test_weight_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.weights"
    path.write_bytes(b"not a weight file")
    with pytest.raises(ArchitectureError):
        WeightStore.load(path)
    store = init_student_weights(0)
    good = tmp_path / "good.weights"
    store.save(good)
    data = good.read_bytes()
    (tmp_path / "short.weights").write_bytes(data[:-100])
    with pytest.raises(ArchitectureError):
        WeightStore.load(tmp_path / "short.weights")


def test_student_parameter_count_near_reported_budget():
    count = init_student_weights(0).param_count()
    assert abs(count - 5.37e6) / 5.37e6 <= 0.15


def test_student_forward_contract(rng):
    w = init_student_weights(1)
    frames = rng.random((12, 54, 96)).astype(np.float32)
    proprio = rng.random(PROPRIO_DIM).astype(np.float32)
    out = student_forward(frames, proprio, w)
    assert out.shape == (8,)
    assert np.array_equal(out, student_forward(frames, proprio, w))
    with pytest.raises(ShapeError):
        student_forward(frames[:6], proprio, w)
    with pytest.raises(ShapeError):
        student_forward(frames, proprio[:10], w)
    bad = WeightStore("other-arch", [("x", (1,))], {"x": np.zeros(1, np.float32)})
    with pytest.raises(ArchitectureError):
        student_forward(frames, proprio, bad)


def test_student_forward_latency_budget(rng):
    w = init_student_weights(2)
    frames = rng.random((12, 54, 96)).astype(np.float32)
    proprio = rng.random(PROPRIO_DIM).astype(np.float32)
    student_forward(frames, proprio, w)
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        student_forward(frames, proprio, w)
        times.append(time.perf_counter() - t0)
    assert sorted(times)[2] < 0.050


def test_student_manifest_is_stable():
    names = [n for n, _ in student_manifest()]
    assert names[0] == "cnn.conv1.w"
    assert "wrist.enc0.attn.wq" in names
    assert "base.proj.w" in names
    assert names[-1] == "head.fc3.b"


def test_tensor_guards():
    with pytest.raises(InvalidArgumentError):
        elu(np.array([np.nan], np.float32))
    with pytest.raises(InvalidArgumentError):
        softmax(np.array([np.inf], np.float32))
