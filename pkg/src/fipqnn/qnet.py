"""Runnable quantized networks: decoding, inference, reports and classical baselines."""
from __future__ import annotations

import logging
import platform
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError, ModelBuildError, OutOfRangeError, TrainingDivergedError
from .pwl import round_half_away
from .qcbo.fip import NetSpec, exact_forward, parameters_from_bits

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuantNet:
    """Integer weights and biases per layer plus the network spec."""

    spec: NetSpec
    weights: tuple
    biases: tuple

    def __post_init__(self):
        W = tuple(np.asarray(w, dtype=np.int64) for w in self.weights)
        B = tuple(np.asarray(b, dtype=np.int64) for b in self.biases)
        dims = self.spec.dims
        if len(W) != len(dims) - 1 or len(B) != len(W):
            raise InvalidInputError(f"{len(W)} weight layers for dims {dims}")
        wv, bv = set(self.spec.weight_values()), set(self.spec.bias_values())
        for l, (w, b) in enumerate(zip(W, B), start=1):
            if w.shape != (dims[l], dims[l - 1]) or b.shape != (dims[l],):
                raise InvalidInputError(f"layer {l}: shapes {w.shape}, {b.shape} do not match dims {dims}")
            if not set(w.ravel().tolist()) <= wv or not set(b.tolist()) <= bv:
                raise InvalidInputError(f"layer {l}: parameters outside the code set")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", B)

    @property
    def dims(self):
        return self.spec.dims

    @property
    def activation(self):
        return self.spec.effective_activation()

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(),
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "bits": {"weight": self.spec.weight_bits, "bias": self.spec.bias_bits}}

    @classmethod
    def from_json(cls, d: dict) -> "QuantNet":
        return cls(NetSpec.from_json(d["spec"]), tuple(d["weights"]), tuple(d["biases"]))


def decode(bits, model, spec: NetSpec | None = None) -> QuantNet:
    """Rebuild the network from a solution over the model's variables."""
    bits = np.asarray(bits)
    if bits.shape != (model.n_vars,):
        raise InvalidInputError(f"solution has {bits.size} bits, model has {model.n_vars} variables")
    spec = NetSpec.from_json(model.meta["spec"]) if spec is None else spec
    W, B = parameters_from_bits(model, bits)
    return QuantNet(spec, tuple(W), tuple(B))


def forward_many(net: QuantNet, X) -> np.ndarray:
    """Raw outputs ``(N, d_L)``; exact rational arithmetic under the hood."""
    X = np.atleast_2d(np.asarray(X))
    if X.shape[1] != net.dims[0]:
        raise InvalidInputError(f"inputs have {X.shape[1]} features, net expects {net.dims[0]}")
    try:
        _, out = exact_forward(net.spec, X, net.weights, net.biases)
    except ModelBuildError as exc:
        raise OutOfRangeError(str(exc)) from exc
    return out


def forward(net: QuantNet, x):
    """Output of one sample (a float when the last layer has one neuron)."""
    out = forward_many(net, np.asarray(x)[None, :])[0]
    return float(out[0]) if out.size == 1 else out


def accuracy(net: QuantNet, X, y, threshold: float = 0.5, weights=None) -> float:
    """Fraction of samples with ``(output >= threshold) == label`` (optionally weighted)."""
    y = np.asarray(y).astype(int).ravel()
    if y.size == 0:
        raise InvalidInputError("empty dataset")
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise InvalidInputError("labels must be binary")
    pred = forward_many(net, X)[:, 0] >= threshold
    hit = (pred == y.astype(bool)).astype(float)
    if weights is None:
        return float(hit.mean())
    w = np.asarray(weights, dtype=float)
    return float((hit * w).sum() / w.sum())


@dataclass
class ResourceReport:
    bytes: Fraction
    bits: int
    n_params: int
    macs: int
    lookups: int
    ops: int
    latency_s: float
    env: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"bytes": float(self.bytes), "bytes_exact": str(self.bytes), "bits": self.bits,
                "n_params": self.n_params, "macs": self.macs, "lookups": self.lookups, "ops": self.ops,
                "latency_median_s": self.latency_s, "env": self.env}


def resource_report(net: QuantNet, bits_per_param: int | None = None, n_latency: int = 10_000,
                    sample=None) -> ResourceReport:
    """Parameter memory, operation count and median single-sample latency.

    Args:
        bits_per_param: overrides the NetSpec weight/bias widths when given.
        n_latency: forward passes timed (0 skips the measurement).
        sample: input used for timing (zeros by default).
    """
    dims = net.dims
    n_w = sum(dims[l] * dims[l - 1] for l in range(1, len(dims)))
    n_b = sum(dims[1:])
    if bits_per_param is None:
        bits = n_w * net.spec.weight_bits + n_b * net.spec.bias_bits
    else:
        bits = (n_w + n_b) * int(bits_per_param)
    lookups = n_b
    x = np.zeros(dims[0], dtype=np.int64) if sample is None else np.asarray(sample)
    times = []
    for _ in range(n_latency):
        t0 = time.perf_counter_ns()
        forward_many(net, x[None, :])
        times.append(time.perf_counter_ns() - t0)
    lat = statistics.median(times) * 1e-9 if times else float("nan")
    env = {"python": platform.python_version(), "machine": platform.machine(),
           "numpy": np.__version__, "n_latency": n_latency}
    return ResourceReport(Fraction(bits, 8), bits, n_w + n_b, n_w, lookups, n_w + lookups, lat, env)


# classical baselines -----------------------------------------------------

def quantize(x, s: float = 1.0, qmin: float = -1.0, qmax: float = 1.0):
    """``s * clamp(round(x / s), qmin, qmax)`` with rounding half away from zero."""
    x = np.asarray(x, dtype=float)
    r = np.sign(x / s) * np.floor(np.abs(x / s) + 0.5)
    return s * np.clip(r, qmin, qmax)


def quantize_to_codes(x, values):
    """Nearest value of an evenly spaced code set (ties away from the lowest code)."""
    v = np.asarray(sorted(values), dtype=float)
    if len(v) == 1:
        return np.full(np.shape(x), v[0])
    step = v[1] - v[0]
    k = quantize(np.asarray(x, dtype=float) - v[0], step, 0, len(v) - 1)
    return v[0] + k


def binarize(w):
    """``sign(w)`` with ``sign(0) = +1``."""
    return np.where(np.asarray(w) >= 0, 1.0, -1.0)


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 500
    seed: int = 0
    init_scale: float = 0.5
    s: float | None = None        # quantizer step; the code-set spacing by default
    qmin: float | None = None
    qmax: float | None = None


def _sigmoid_grad(h):
    e = np.exp(-np.abs(h))
    return e / (1.0 + e) ** 2


def _train(spec: NetSpec, X, y, w, cfg: TrainConfig, project, val):
    rng = np.random.default_rng(cfg.seed)
    dims = spec.dims
    Ws = [rng.normal(0, cfg.init_scale, (dims[l], dims[l - 1])) for l in range(1, len(dims))]
    Bs = [rng.normal(0, cfg.init_scale, dims[l]) for l in range(1, len(dims))]
    act = spec.effective_activation()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    w = w / w.sum()
    Xv, yv, wv = val if val is not None else (X, y, w)
    best, best_acc = None, -1.0
    for epoch in range(cfg.epochs):
        Wq = [project(W, "w") for W in Ws]
        Bq = [project(B, "b") for B in Bs]
        net = QuantNet(spec, tuple(np.rint(v).astype(np.int64) for v in Wq),
                       tuple(np.rint(v).astype(np.int64) for v in Bq))
        acc = accuracy(net, Xv, yv, weights=wv)
        if acc > best_acc:
            best, best_acc = net, acc
        a, hs, As = X, [], [X]
        for Wl, bl in zip(Wq, Bq):
            h = a @ Wl.T + bl
            hs.append(h)
            a = act(np.clip(h, act.lo, act.hi))
            As.append(a)
        err = a[:, 0] - y
        loss = float((w * err ** 2).sum())
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch)
        # piecewise-constant activations get the sigmoid derivative as surrogate
        g = (2 * w * err)[:, None] * _sigmoid_grad(hs[-1])
        for l in range(len(Ws) - 1, -1, -1):
            gW = g.T @ As[l]
            gB = g.sum(axis=0)
            if l > 0:
                g = (g @ Wq[l]) * _sigmoid_grad(hs[l - 1])
            Ws[l] -= cfg.lr * gW
            Bs[l] -= cfg.lr * gB
        if not all(np.isfinite(W).all() for W in Ws):
            raise TrainingDivergedError(epoch)
    return best, best_acc


def ste_train(spec: NetSpec, X, y, config: TrainConfig = TrainConfig(), weights=None, val=None) -> QuantNet:
    """Quantization-aware training with a straight-through rounding gradient.

    The forward pass uses ``s * clamp(round(w / s), qmin, qmax)`` relative to
    the lowest code value; the backward pass treats the quantizer as the
    identity. Returns the snapshot with the best validation accuracy
    (training data when ``val`` is ``None``).
    """
    if config.epochs < 1 or config.lr <= 0:
        raise InvalidInputError("epochs must be >= 1 and lr > 0")

    def project(v, kind):
        codes = spec.weight_values() if kind == "w" else spec.bias_values()
        if config.s is None:
            return quantize_to_codes(v, codes)
        q = quantize(v, config.s, config.qmin, config.qmax)
        return quantize_to_codes(q, codes)

    net, _ = _train(spec, X, y, weights, config, project, val)
    return net


def binaryconnect_train(spec: NetSpec, X, y, config: TrainConfig = TrainConfig(), weights=None,
                        val=None) -> QuantNet:
    """BinaryConnect: ``sign`` binarization forward, real-valued accumulation backward.

    Needs one-bit ``pm1`` codes for weights and biases.
    """
    if config.epochs < 1 or config.lr <= 0:
        raise InvalidInputError("epochs must be >= 1 and lr > 0")
    if set(spec.weight_values()) != {-1, 1} or set(spec.bias_values()) != {-1, 1}:
        raise InvalidInputError("BinaryConnect needs +-1 weight and bias codes")

    def project(v, kind):
        np.clip(v, -1.0, 1.0, out=v)
        return binarize(v)

    net, _ = _train(spec, X, y, weights, config, project, val)
    return net
