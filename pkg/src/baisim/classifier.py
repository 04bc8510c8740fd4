"""Per-frame on/off prediction from 250 ms EEG windows.

Two model kinds share one training loop and one flat parameter vector:

* ``cnn``: three convolution + max-pool stages (one spatial across all
  channels, two temporal) followed by two dense stages with a logistic
  output.  Forward and backward passes are hand-written numpy so the
  gradients can be audited against finite differences.
* ``linear``: logistic regression on the flattened window, used as a fast
  baseline and as a closed-form gradient reference.

Each window is standardized per channel (zero mean, unit variance over its
250 samples) as a fixed preprocessing step.  This keeps the features scale
free, so a model trained at one noise level transfers to cleaner signals.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateLabels, OutOfRange, ParseError, ShapeMismatch

WINDOW_SAMPLES = 250

CLF_MAGIC = b"BAICLF1"

DEFAULT_CNN_HYPER = {
    "kind": "cnn",
    "channels": 6,
    "window": WINDOW_SAMPLES,
    "filters": 8,
    "spatial_kernel": 16,
    "temporal_kernel": 8,
    "pool": 2,
    "dense": 128,
    "standardize": True,
    "lr": 1e-3,
    "epochs": 15,
    "batch": 32,
    "patience": 3,
    "seed": 0,
}

DEFAULT_LINEAR_HYPER = {
    "kind": "linear",
    "channels": 6,
    "window": WINDOW_SAMPLES,
    "standardize": True,
    "lr": 1e-2,
    "epochs": 30,
    "batch": 32,
    "patience": 5,
    "seed": 0,
}


@dataclass(frozen=True)
class FrameWindow:
    data: np.ndarray  # (channels, samples)
    frame_index: int


@dataclass(frozen=True)
class TrainingSet:
    windows: np.ndarray  # (N, channels, samples)
    labels: np.ndarray  # (N,) of 0/1
    sources: tuple = ()

    def __post_init__(self):
        if len(self.windows) != len(self.labels):
            raise ShapeMismatch("windows and labels differ in length")


@dataclass
class ClassifierModel:
    kind: str
    parameters: np.ndarray  # flat float64
    hyper: dict
    history: list = field(default_factory=list)  # epoch losses, not serialized

    def param_views(self):
        return _unpack(self.parameters, _layout(self.hyper))


def extract_window(segment, frame, window_samples=WINDOW_SAMPLES):
    """Samples [onset, onset + window) per channel: the frame plus its tail."""
    onset = int(round(frame.onset_ms * segment.sample_rate_hz / 1000.0))
    if onset + window_samples > segment.n_samples:
        raise OutOfRange(
            f"window [{onset}, {onset + window_samples}) past segment of {segment.n_samples}"
        )
    return FrameWindow(data=segment.samples[:, onset : onset + window_samples], frame_index=frame.frame_index)


def windows_from_segment(segment, timeline, window_samples=WINDOW_SAMPLES):
    """Stack one window per timeline frame, shape (frames, channels, window).

    Frames are spaced a whole number of samples apart for the default 20 Hz /
    1 kHz geometry, so a strided view covers all of them at once.
    """
    hop = int(round(timeline.frame_duration_ms * segment.sample_rate_hz / 1000.0))
    n_frames = len(timeline.frames)
    last_onset = (n_frames - 1) * hop
    if last_onset + window_samples > segment.n_samples:
        raise OutOfRange("segment too short for the timeline's last frame window")
    view = sliding_window_view(segment.samples, window_samples, axis=1)
    return np.ascontiguousarray(view[:, ::hop, :][:, :n_frames, :].transpose(1, 0, 2))


# ---------------------------------------------------------------------------
# parameter layout

def _layout(hyper):
    """Ordered (name, shape) pairs; the flat vector concatenates them."""
    if hyper["kind"] == "linear":
        n_in = hyper["channels"] * hyper["window"]
        return [("w", (1, n_in)), ("b", (1,))]
    c = hyper["channels"]
    w = hyper["window"]
    f = hyper["filters"]
    ks = hyper["spatial_kernel"]
    kt = hyper["temporal_kernel"]
    pool = hyper["pool"]
    t1 = (w - ks + 1) // pool
    t2 = (t1 - kt + 1) // pool
    t3 = (t2 - kt + 1) // pool
    flat = f * t3
    return [
        ("conv1_w", (f, c, ks)),
        ("conv1_b", (f,)),
        ("conv2_w", (f, f, kt)),
        ("conv2_b", (f,)),
        ("conv3_w", (f, f, kt)),
        ("conv3_b", (f,)),
        ("dense1_w", (hyper["dense"], flat)),
        ("dense1_b", (hyper["dense"],)),
        ("dense2_w", (1, hyper["dense"])),
        ("dense2_b", (1,)),
    ]


def param_count(hyper):
    return sum(int(np.prod(shape)) for _, shape in _layout(hyper))


def _unpack(flat, layout):
    views = {}
    offset = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        views[name] = flat[offset : offset + size].reshape(shape)
        offset += size
    if offset != flat.size:
        raise ShapeMismatch(f"parameter vector has {flat.size} values, layout needs {offset}")
    return views


def _init_parameters(hyper, rng):
    chunks = []
    for name, shape in _layout(hyper):
        if name.endswith("_b") or name == "b":
            chunks.append(np.zeros(int(np.prod(shape))))
        else:
            fan_in = int(np.prod(shape[1:]))
            chunks.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=int(np.prod(shape))))
    return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# numpy layers

def _standardize(x):
    """Zero mean, unit variance per channel within each window."""
    mu = x.mean(axis=2, keepdims=True)
    sd = x.std(axis=2, keepdims=True)
    return (x - mu) / (sd + 1e-6)


def _conv(x, w, b):
    # x (B, C, T), w (F, C, K) -> (B, F, T - K + 1)
    win = sliding_window_view(x, w.shape[2], axis=2)
    return np.einsum("bctk,fck->bft", win, w, optimize=True) + b[None, :, None]


def _conv_grad_w(x, gy, k):
    win = sliding_window_view(x, k, axis=2)
    return np.einsum("bft,bctk->fck", gy, win, optimize=True)


def _conv_grad_x(gy, w, t_in):
    # Full correlation of gy with the flipped kernel recovers dL/dx.
    k = w.shape[2]
    pad = np.pad(gy, ((0, 0), (0, 0), (k - 1, k - 1)))
    win = sliding_window_view(pad, k, axis=2)[:, :, :t_in, :]
    return np.einsum("bftk,fck->bct", win, w[:, :, ::-1], optimize=True)


def _pool(x):
    b, f, t = x.shape
    t2 = t // 2
    xr = x[:, :, : t2 * 2].reshape(b, f, t2, 2)
    return xr.max(axis=3), xr.argmax(axis=3)


def _unpool(g, idx, t):
    b, f, t2 = g.shape
    out = np.zeros((b, f, t))
    bi, fi, ti = np.meshgrid(np.arange(b), np.arange(f), np.arange(t2), indexing="ij")
    out[bi, fi, 2 * ti + idx] = g
    return out


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(kind, views, x, hyper):
    """Probability per input window plus the cache the backward pass needs."""
    if hyper.get("standardize", True):
        x = _standardize(x)
    if kind == "linear":
        flat = x.reshape(x.shape[0], -1)
        z = flat @ views["w"].T + views["b"]
        return _sigmoid(z)[:, 0], {"flat": flat, "z": z}
    cache = {"x": x}
    z1 = _conv(x, views["conv1_w"], views["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    p1, i1 = _pool(a1)
    z2 = _conv(p1, views["conv2_w"], views["conv2_b"])
    a2 = np.maximum(z2, 0.0)
    p2, i2 = _pool(a2)
    z3 = _conv(p2, views["conv3_w"], views["conv3_b"])
    a3 = np.maximum(z3, 0.0)
    p3, i3 = _pool(a3)
    flat = p3.reshape(x.shape[0], -1)
    h_pre = flat @ views["dense1_w"].T + views["dense1_b"]
    h = np.maximum(h_pre, 0.0)
    o = h @ views["dense2_w"].T + views["dense2_b"]
    prob = _sigmoid(o)[:, 0]
    cache.update(
        z1=z1, i1=i1, p1=p1, z2=z2, i2=i2, p2=p2, z3=z3, i3=i3,
        flat=flat, h_pre=h_pre, h=h,
    )
    return prob, cache


def _loss_and_grads(kind, views, x, y, hyper):
    """Mean binary cross-entropy and its gradient in layout order."""
    prob, cache = _forward(kind, views, x, hyper)
    eps = 1e-12
    loss = -float(np.mean(y * np.log(prob + eps) + (1 - y) * np.log(1 - prob + eps)))
    b = x.shape[0]
    go = ((prob - y) / b)[:, None]
    grads = {}
    if kind == "linear":
        grads["w"] = go.T @ cache["flat"]
        grads["b"] = go.sum(axis=0)
        return loss, grads
    grads["dense2_w"] = go.T @ cache["h"]
    grads["dense2_b"] = go.sum(axis=0)
    gh = (go @ views["dense2_w"]) * (cache["h_pre"] > 0)
    grads["dense1_w"] = gh.T @ cache["flat"]
    grads["dense1_b"] = gh.sum(axis=0)
    gflat = gh @ views["dense1_w"]
    f = views["conv3_w"].shape[0]
    gp3 = gflat.reshape(b, f, -1)
    gz3 = _unpool(gp3, cache["i3"], cache["z3"].shape[2]) * (cache["z3"] > 0)
    grads["conv3_w"] = _conv_grad_w(cache["p2"], gz3, views["conv3_w"].shape[2])
    grads["conv3_b"] = gz3.sum(axis=(0, 2))
    gp2 = _conv_grad_x(gz3, views["conv3_w"], cache["p2"].shape[2])
    gz2 = _unpool(gp2, cache["i2"], cache["z2"].shape[2]) * (cache["z2"] > 0)
    grads["conv2_w"] = _conv_grad_w(cache["p1"], gz2, views["conv2_w"].shape[2])
    grads["conv2_b"] = gz2.sum(axis=(0, 2))
    gp1 = _conv_grad_x(gz2, views["conv2_w"], cache["p1"].shape[2])
    gz1 = _unpool(gp1, cache["i1"], cache["z1"].shape[2]) * (cache["z1"] > 0)
    grads["conv1_w"] = _conv_grad_w(cache["x"], gz1, views["conv1_w"].shape[2])
    grads["conv1_b"] = gz1.sum(axis=(0, 2))
    return loss, grads


def _flat_grads(grads, layout):
    return np.concatenate([grads[name].ravel() for name, _ in layout])


# ---------------------------------------------------------------------------
# operations

def train(data, hyper=None):
    """Fit a model with Adam on shuffled mini-batches; plateau early stop.

    Deterministic for a fixed hyper seed: the same generator drives the
    initialization and every epoch's batch order.
    """
    if hyper is None:
        hyper = DEFAULT_CNN_HYPER
    hyper = dict(hyper)
    kind = hyper["kind"]
    x = np.asarray(data.windows, dtype=float)
    y = np.asarray(data.labels, dtype=float)
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")

    rng = np.random.default_rng(hyper["seed"])
    layout = _layout(hyper)
    params = _init_parameters(hyper, rng)
    views = _unpack(params, layout)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    lr = hyper["lr"]
    batch = hyper["batch"]
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    step = 0
    best = np.inf
    stale = 0
    history = []
    for _ in range(hyper["epochs"]):
        perm = rng.permutation(len(x))
        total = 0.0
        n_batches = 0
        for start in range(0, len(x), batch):
            idx = perm[start : start + batch]
            loss, grads = _loss_and_grads(kind, views, x[idx], y[idx], hyper)
            g = _flat_grads(grads, layout)
            step += 1
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g**2
            params -= lr * (m / (1 - beta1**step)) / (np.sqrt(v / (1 - beta2**step)) + adam_eps)
            total += loss
            n_batches += 1
        epoch_loss = total / n_batches
        history.append(epoch_loss)
        if epoch_loss < best - 1e-5:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= hyper["patience"]:
                break
    return ClassifierModel(kind=kind, parameters=params, hyper=hyper, history=history)


def zero_model(hyper=None):
    """Model with all parameters at zero; predicts exactly 0.5 everywhere."""
    if hyper is None:
        hyper = DEFAULT_LINEAR_HYPER
    hyper = dict(hyper)
    return ClassifierModel(
        kind=hyper["kind"], parameters=np.zeros(param_count(hyper)), hyper=hyper
    )


def predict(model, window):
    """Probability the frame was ON; accepts one window or a batch."""
    if isinstance(window, FrameWindow):
        data = window.data
    else:
        data = np.asarray(window, dtype=float)
    single = data.ndim == 2
    if single:
        data = data[None, :, :]
    expected = (model.hyper["channels"], model.hyper["window"])
    if data.ndim != 3 or data.shape[1:] != expected:
        raise ShapeMismatch(f"window shape {data.shape[1:]} does not match {expected}")
    prob, _ = _forward(model.kind, model.param_views(), data, model.hyper)
    return float(prob[0]) if single else prob


def gradient_check(model, window, label, n_coords=120, step=1e-5, seed=0):
    """Max relative error of analytic gradients vs central finite differences.

    Checks a random subset of at least 100 coordinates in double precision.
    """
    if isinstance(window, FrameWindow):
        data = window.data
    else:
        data = np.asarray(window, dtype=float)
    x = data[None, :, :].astype(float)
    y = np.array([float(label)])
    layout = _layout(model.hyper)
    params = model.parameters.astype(float).copy()
    _, grads = _loss_and_grads(model.kind, _unpack(params, layout), x, y, model.hyper)
    analytic = _flat_grads(grads, layout)

    views = _unpack(params, layout)  # views alias params, so edits show through

    def loss_at():
        prob, _ = _forward(model.kind, views, x, model.hyper)
        eps = 1e-12
        return -float(np.mean(y * np.log(prob + eps) + (1 - y) * np.log(1 - prob + eps)))

    rng = np.random.default_rng(seed)
    n_coords = max(100, n_coords)
    coords = rng.choice(params.size, size=min(n_coords, params.size), replace=False)
    worst = 0.0
    for c in coords:
        saved = params[c]
        params[c] = saved + step
        up = loss_at()
        params[c] = saved - step
        down = loss_at()
        params[c] = saved
        numeric = (up - down) / (2 * step)
        err = abs(analytic[c] - numeric) / max(abs(analytic[c]) + abs(numeric), 1e-12)
        worst = max(worst, err)
    return worst


def save_model(model, path):
    """BAICLF1 container: magic, kind, JSON descriptor, float64 LE parameters."""
    kind_b = model.kind.encode("utf-8")
    desc_b = json.dumps(model.hyper, sort_keys=True).encode("utf-8")
    body = model.parameters.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(CLF_MAGIC)
        fh.write(struct.pack("<I", len(kind_b)))
        fh.write(kind_b)
        fh.write(struct.pack("<I", len(desc_b)))
        fh.write(desc_b)
        fh.write(struct.pack("<Q", model.parameters.size))
        fh.write(body)


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CLF_MAGIC):
        raise ParseError(f"{path}: bad magic")
    offset = len(CLF_MAGIC)
    (kind_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    kind = blob[offset : offset + kind_len].decode("utf-8")
    offset += kind_len
    (desc_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    hyper = json.loads(blob[offset : offset + desc_len].decode("utf-8"))
    offset += desc_len
    (n_params,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    if len(blob) - offset < n_params * 8:
        raise ParseError(f"{path}: truncated parameter block")
    params = np.frombuffer(blob, dtype="<f8", offset=offset, count=n_params).astype(float)
    if params.size != param_count(hyper):
        raise ParseError(f"{path}: parameter count does not match descriptor")
    return ClassifierModel(kind=kind, parameters=params, hyper=hyper)
