"""Minimal inference-only tensor ops and the student network forward pass.

Everything runs on float32 numpy arrays; there is no autograd, no training,
and no GPU path.  Weights come from files or seeded initialization (matrices
uniform in +-1/sqrt(fan_in), biases zero, norm gains one).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArchitectureError, InvalidArgumentError, ShapeError

FRAME_SHAPE = (54, 96)
STACK_CHANNELS = 12
PROPRIO_DIM = 24
MODEL_DIM = 64
FF_DIM = 256
NUM_HEADS = 2
NUM_LAYERS = 2
CNN_CH1 = 8
CNN_CH2 = 304
HEAD_DIMS = (128, 64, 8)
STUDENT_ARCH = "student-v1"
_LN_EPS = 1e-5


def as_tensor(x) -> np.ndarray:
    t = np.asarray(x, dtype=np.float32)
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("tensor contains non-finite values")
    return t


def _checked(y: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError(f"{op} produced non-finite values")
    return y


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------

def linear(x, w, b) -> np.ndarray:
    """y = x @ w + b over the last axis."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(
            f"linear shapes disagree: x {x.shape}, w {w.shape}, b {b.shape}"
        )
    return _checked((x @ w + b).astype(np.float32), "linear")


def elu(x) -> np.ndarray:
    """x if x > 0 else exp(x) - 1, evaluating expm1 only where needed."""
    x = as_tensor(x)
    out = x.astype(np.float32).copy()
    neg = x < 0
    out[neg] = np.expm1(x[neg])
    return out


def softmax(x, axis: int = -1) -> np.ndarray:
    x = as_tensor(x)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return (e / np.sum(e, axis=axis, keepdims=True)).astype(np.float32)


def conv2d(x, kernels, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation of x [c,h,w] with kernels [oc,c,kh,kw], zero padded.

    Output spatial size follows floor((n + 2p - k) / s) + 1.
    """
    x, k = as_tensor(x), as_tensor(kernels)
    if x.ndim != 3 or k.ndim != 4 or x.shape[0] != k.shape[1]:
        raise ShapeError(f"conv2d shapes disagree: x {x.shape}, kernels {k.shape}")
    c, h, w = x.shape
    oc, _, kh, kw = k.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(
            f"conv2d kernel {k.shape} does not fit input {x.shape} "
            f"(stride {stride}, padding {padding})"
        )
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride][:, :oh, :ow]          # c,oh,ow,kh,kw
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * kh * kw)
    out = cols @ k.reshape(oc, -1).T
    return _checked(out.reshape(oh, ow, oc).transpose(2, 0, 1).astype(np.float32),
                    "conv2d")


def max_pool2(x) -> np.ndarray:
    """2x2 max pooling with stride 2; trailing odd rows/cols are dropped."""
    x = as_tensor(x)
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    x = x[:, : h2 * 2, : w2 * 2].reshape(c, h2, 2, w2, 2)
    return x.max(axis=(2, 4))


def attention(q, k, v) -> np.ndarray:
    """Single-query attention with unscaled dot-product logits."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.ndim != 2 or q.shape[0] != 1 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError(f"attention expects q [1,d], k [n,d], v [n,d'], "
                         f"got {q.shape}, {k.shape}, {v.shape}")
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise ShapeError(f"attention shapes disagree: q {q.shape}, k {k.shape}, "
                         f"v {v.shape}")
    alpha = softmax(q @ k.T, axis=-1)
    return _checked((alpha @ v).astype(np.float32), "attention")


def layer_norm(x, gain, bias) -> np.ndarray:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return ((x - mean) / np.sqrt(var + _LN_EPS) * gain + bias).astype(np.float32)


def multi_head_self_attention(tokens, wq, bq, wk, bk, wv, bv, wo, bo,
                              num_heads: int = NUM_HEADS) -> np.ndarray:
    """Standard scaled dot-product self-attention over a token sequence."""
    t, d = tokens.shape
    dh = d // num_heads
    q = linear(tokens, wq, bq)
    k = linear(tokens, wk, bk)
    v = linear(tokens, wv, bv)
    out = np.empty((t, d), dtype=np.float32)
    for h in range(num_heads):
        sl = slice(h * dh, (h + 1) * dh)
        logits = (q[:, sl] @ k[:, sl].T) / np.float32(np.sqrt(dh))
        out[:, sl] = softmax(logits, axis=-1) @ v[:, sl]
    return linear(out, wo, bo)


def transformer_encoder_layer(tokens, weights: dict,
                              num_heads: int = NUM_HEADS) -> np.ndarray:
    """Post-norm encoder layer: self-attention + residual + norm, FF + residual + norm."""
    tokens = as_tensor(tokens)
    if tokens.ndim != 2:
        raise ShapeError(f"tokens must be 2-D, got {tokens.shape}")
    attn = multi_head_self_attention(
        tokens,
        weights["attn.wq"], weights["attn.bq"],
        weights["attn.wk"], weights["attn.bk"],
        weights["attn.wv"], weights["attn.bv"],
        weights["attn.wo"], weights["attn.bo"],
        num_heads=num_heads,
    )
    x = layer_norm(tokens + attn, weights["ln1.g"], weights["ln1.b"])
    ff = linear(elu(linear(x, weights["ff.w1"], weights["ff.b1"])),
                weights["ff.w2"], weights["ff.b2"])
    return layer_norm(x + ff, weights["ln2.g"], weights["ln2.b"])


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position codes, shape [length, dim]."""
    pos = np.arange(length, dtype=np.float32)[:, None]
    i = np.arange(dim, dtype=np.float32)[None, :]
    angles = pos / np.power(10000.0, (2.0 * np.floor(i / 2.0)) / dim)
    pe = np.where(i.astype(int) % 2 == 0, np.sin(angles), np.cos(angles))
    return pe.astype(np.float32)


def kd_loss(student_actions, teacher_actions) -> float:
    """Mean over steps of the squared L2 distance between action vectors."""
    s = np.asarray(student_actions, dtype=np.float64)
    t = np.asarray(teacher_actions, dtype=np.float64)
    if s.shape != t.shape or s.ndim != 2 or s.shape[0] < 1:
        raise ShapeError(f"kd_loss needs matching [T,d] sequences, "
                         f"got {s.shape} and {t.shape}")
    return float(np.mean(np.sum((s - t) ** 2, axis=1)))


# ---------------------------------------------------------------------------
# Weight store
# ---------------------------------------------------------------------------

@dataclass
class WeightStore:
    """Named parameter map validated against an architecture manifest."""

    arch: str
    manifest: list                      # ordered (name, shape) pairs
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        declared = dict(self.manifest)
        if set(declared) != set(self.params):
            missing = sorted(set(declared) - set(self.params))
            extra = sorted(set(self.params) - set(declared))
            raise ArchitectureError(
                f"parameters do not match manifest (missing {missing}, extra {extra})"
            )
        for name, shape in self.manifest:
            p = self.params[name]
            if tuple(p.shape) != tuple(shape):
                raise ArchitectureError(
                    f"parameter {name!r} has shape {tuple(p.shape)}, "
                    f"manifest says {tuple(shape)}"
                )
            self.params[name] = np.ascontiguousarray(p, dtype=np.float32)

    def get(self, name: str) -> np.ndarray:
        if name not in self.params:
            raise ArchitectureError(f"unknown parameter {name!r} for arch {self.arch}")
        return self.params[name]

    def param_count(self) -> int:
        return int(sum(int(np.prod(shape)) for _, shape in self.manifest))

    def layer(self, prefix: str) -> dict:
        """Sub-map of parameters under `prefix.`, keys relative to it."""
        plen = len(prefix) + 1
        sub = {n[plen:]: p for n, p in self.params.items()
               if n.startswith(prefix + ".")}
        if not sub:
            raise ArchitectureError(f"no parameters under prefix {prefix!r}")
        return sub

    def save(self, path) -> None:
        lines = [f"weights-v1 {self.arch}"]
        for name, shape in self.manifest:
            lines.append(f"{name} {','.join(str(int(d)) for d in shape)}")
        header = ("\n".join(lines) + "\n---\n").encode("ascii")
        blob = b"".join(
            self.params[name].astype("<f4").tobytes() for name, _ in self.manifest
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(blob)

    @staticmethod
    def load(path) -> "WeightStore":
        with open(path, "rb") as fh:
            data = fh.read()
        sep = b"\n---\n"
        cut = data.find(sep)
        if cut < 0:
            raise ArchitectureError(f"{path}: missing manifest separator")
        head = data[:cut].decode("ascii").splitlines()
        blob = data[cut + len(sep):]
        magic = head[0].split()
        if len(magic) != 2 or magic[0] != "weights-v1":
            raise ArchitectureError(f"{path}: bad header line {head[0]!r}")
        arch = magic[1]
        manifest, params, offset = [], {}, 0
        raw = np.frombuffer(blob, dtype="<f4")
        for line in head[1:]:
            name, shape_s = line.split()
            shape = tuple(int(d) for d in shape_s.split(","))
            size = int(np.prod(shape))
            if offset + size > raw.size:
                raise ArchitectureError(f"{path}: blob too short at {name!r}")
            params[name] = raw[offset:offset + size].reshape(shape).copy()
            manifest.append((name, shape))
            offset += size
        if offset != raw.size:
            raise ArchitectureError(f"{path}: {raw.size - offset} trailing floats")
        return WeightStore(arch, manifest, params)


def init_weights(arch: str, manifest: list, seed: int) -> WeightStore:
    """Seeded init: matrices uniform +-1/sqrt(fan_in); biases 0; norm gains 1."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}
    for name, shape in manifest:
        if len(shape) >= 2:
            bound = 1.0 / np.sqrt(shape[0] if len(shape) == 2 else np.prod(shape[1:]))
            params[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        elif name.endswith(".g"):
            params[name] = np.ones(shape, dtype=np.float32)
        else:
            params[name] = np.zeros(shape, dtype=np.float32)
    return WeightStore(arch, manifest, params)


# ---------------------------------------------------------------------------
# Student network
# ---------------------------------------------------------------------------

def _cnn_flat_dim() -> int:
    h, w = FRAME_SHAPE
    h, w = (h - 5 + 1) // 2, (w - 5 + 1) // 2        # conv k5 + pool
    h, w = (h - 3 + 1) // 2, (w - 3 + 1) // 2        # conv k3 + pool
    return CNN_CH2 * h * w


def student_manifest() -> list:
    """Ordered (name, shape) pairs for the student policy network."""
    m = [
        ("cnn.conv1.w", (CNN_CH1, 2, 5, 5)), ("cnn.conv1.b", (CNN_CH1,)),
        ("cnn.conv2.w", (CNN_CH2, CNN_CH1, 3, 3)), ("cnn.conv2.b", (CNN_CH2,)),
        ("cnn.fc.w", (_cnn_flat_dim(), MODEL_DIM)), ("cnn.fc.b", (MODEL_DIM,)),
        ("proprio.w", (PROPRIO_DIM, MODEL_DIM)), ("proprio.b", (MODEL_DIM,)),
    ]
    for stream in ("wrist", "base"):
        for l in range(NUM_LAYERS):
            p = f"{stream}.enc{l}"
            for part in ("wq", "wk", "wv", "wo"):
                m.append((f"{p}.attn.{part}", (MODEL_DIM, MODEL_DIM)))
                m.append((f"{p}.attn.{part.replace('w', 'b')}", (MODEL_DIM,)))
            m += [(f"{p}.ln1.g", (MODEL_DIM,)), (f"{p}.ln1.b", (MODEL_DIM,)),
                  (f"{p}.ff.w1", (MODEL_DIM, FF_DIM)), (f"{p}.ff.b1", (FF_DIM,)),
                  (f"{p}.ff.w2", (FF_DIM, MODEL_DIM)), (f"{p}.ff.b2", (MODEL_DIM,)),
                  (f"{p}.ln2.g", (MODEL_DIM,)), (f"{p}.ln2.b", (MODEL_DIM,))]
        m += [(f"{stream}.proj.w", (MODEL_DIM, MODEL_DIM)),
              (f"{stream}.proj.b", (MODEL_DIM,))]
    m += [
        ("head.fc1.w", (2 * MODEL_DIM, HEAD_DIMS[0])), ("head.fc1.b", (HEAD_DIMS[0],)),
        ("head.fc2.w", (HEAD_DIMS[0], HEAD_DIMS[1])), ("head.fc2.b", (HEAD_DIMS[1],)),
        ("head.fc3.w", (HEAD_DIMS[1], HEAD_DIMS[2])), ("head.fc3.b", (HEAD_DIMS[2],)),
    ]
    return m


def init_student_weights(seed: int = 0) -> WeightStore:
    return init_weights(STUDENT_ARCH, student_manifest(), seed)


def _conv_batch(x, kernels) -> np.ndarray:
    """Valid cross-correlation over a batch [n,c,h,w] via one im2col GEMM."""
    n, c, h, wd = x.shape
    oc, _, kh, kw = kernels.shape
    oh, ow = h - kh + 1, wd - kw + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ kernels.reshape(oc, -1).T
    return out.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2)


def _pool_batch(x) -> np.ndarray:
    n, c, h, wd = x.shape
    h2, w2 = h // 2, wd // 2
    return x[:, :, : h2 * 2, : w2 * 2].reshape(n, c, h2, 2, w2, 2).max(axis=(3, 5))


def _encode_frames(imgs, w: WeightStore) -> np.ndarray:
    """Shared CNN over a batch of [2,54,96] mask+depth pairs -> [n,64] tokens.

    ELU is monotone, so conv -> ELU -> maxpool equals conv -> maxpool -> ELU
    exactly; pooling first quarters the activation work.
    """
    x = _conv_batch(imgs, w.get("cnn.conv1.w"))
    x = elu(_pool_batch(x) + w.get("cnn.conv1.b")[None, :, None, None])
    x = _conv_batch(x, w.get("cnn.conv2.w"))
    x = elu(_pool_batch(x) + w.get("cnn.conv2.b")[None, :, None, None])
    return linear(x.reshape(x.shape[0], -1), w.get("cnn.fc.w"), w.get("cnn.fc.b"))


def _encode_stream(tokens3, state_token, w: WeightStore, stream: str) -> np.ndarray:
    seq = np.vstack([state_token[None, :], tokens3]).astype(np.float32)
    seq = seq + positional_encoding(seq.shape[0], MODEL_DIM)
    for l in range(NUM_LAYERS):
        seq = transformer_encoder_layer(seq, w.layer(f"{stream}.enc{l}"))
    visual = seq[1:].mean(axis=0, keepdims=True)
    return linear(visual, w.get(f"{stream}.proj.w"), w.get(f"{stream}.proj.b"))[0]


def student_forward(frames, proprio, w: WeightStore) -> np.ndarray:
    """Map stacked dual-view observations + proprioception to 8 action values.

    frames: [12,54,96] stacked as produced by the perception pipeline
    (wrist masks x3, wrist depths x3, base masks x3, base depths x3).
    """
    if w.arch != STUDENT_ARCH:
        raise ArchitectureError(f"expected arch {STUDENT_ARCH!r}, got {w.arch!r}")
    frames = as_tensor(frames)
    proprio = as_tensor(proprio)
    if frames.shape != (STACK_CHANNELS, *FRAME_SHAPE):
        raise ShapeError(f"frames must be {(STACK_CHANNELS, *FRAME_SHAPE)}, "
                         f"got {frames.shape}")
    if proprio.shape != (PROPRIO_DIM,):
        raise ShapeError(f"proprio must be ({PROPRIO_DIM},), got {proprio.shape}")

    state_token = linear(proprio[None, :], w.get("proprio.w"), w.get("proprio.b"))[0]
    imgs = np.stack([
        np.stack([frames[view + t], frames[view + 3 + t]])
        for view in (0, 6) for t in range(3)
    ])
    tokens = _encode_frames(imgs, w)
    streams = [
        _encode_stream(tokens[0:3], state_token, w, "wrist"),
        _encode_stream(tokens[3:6], state_token, w, "base"),
    ]
    z = np.concatenate(streams)[None, :]
    z = elu(linear(z, w.get("head.fc1.w"), w.get("head.fc1.b")))
    z = elu(linear(z, w.get("head.fc2.w"), w.get("head.fc2.b")))
    out = linear(z, w.get("head.fc3.w"), w.get("head.fc3.b"))[0]
    return _checked(out, "student_forward")


# ---------------------------------------------------------------------------
# Self test (used by the CLI)
# ---------------------------------------------------------------------------

def _naive_linear(x, w, b):
    out = np.zeros((x.shape[0], w.shape[1]), dtype=np.float64)
    for i in range(x.shape[0]):
        for j in range(w.shape[1]):
            acc = 0.0
            for k in range(w.shape[0]):
                acc += float(x[i, k]) * float(w[k, j])
            out[i, j] = acc + float(b[j])
    return out


def _naive_conv2d(x, kern):
    oc, c, kh, kw = kern.shape
    oh, ow = x.shape[1] - kh + 1, x.shape[2] - kw + 1
    out = np.zeros((oc, oh, ow), dtype=np.float64)
    for o in range(oc):
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for ch in range(c):
                    for a in range(kh):
                        for bb in range(kw):
                            acc += float(x[ch, i + a, j + bb]) * float(kern[o, ch, a, bb])
                out[o, i, j] = acc
    return out


def selftest(cases: int = 20, seed: int = 0) -> list:
    """Compare the fast ops against naive loops; returns (name, max_err) pairs."""
    rng = np.random.Generator(np.random.PCG64(seed))
    results = []
    err = 0.0
    for _ in range(cases):
        x = rng.standard_normal((3, 5)).astype(np.float32)
        w_ = rng.standard_normal((5, 4)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        err = max(err, float(np.max(np.abs(linear(x, w_, b) - _naive_linear(x, w_, b)))))
    results.append(("linear", err))
    err = 0.0
    for _ in range(cases):
        x = rng.standard_normal((2, 7, 8)).astype(np.float32)
        k = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
        err = max(err, float(np.max(np.abs(conv2d(x, k) - _naive_conv2d(x, k)))))
    results.append(("conv2d", err))
    err = 0.0
    for _ in range(cases):
        q = rng.standard_normal((1, 6)).astype(np.float32)
        k = rng.standard_normal((5, 6)).astype(np.float32)
        v = rng.standard_normal((5, 3)).astype(np.float32)
        logits = np.array([float(np.dot(q[0], k[i])) for i in range(5)])
        e = np.exp(logits - logits.max())
        alpha = e / e.sum()
        ref = np.array([float(np.dot(alpha, v[:, j])) for j in range(3)])
        err = max(err, float(np.max(np.abs(attention(q, k, v)[0] - ref))))
    results.append(("attention", err))
    err = 0.0
    for _ in range(cases):
        x = rng.standard_normal((4, 9)).astype(np.float32)
        s = softmax(x, axis=-1)
        err = max(err, float(np.max(np.abs(s.sum(axis=-1) - 1.0))))
    results.append(("softmax", err))
    return results
