"""Two-layer leaky integrate-and-fire network with surrogate-gradient backprop.

Each step a layer integrates ``u' = decay * u + I``, emits ``s = [u' > threshold]``
and subtracts the threshold from neurons that fired. A static input vector is
injected as the same current at every one of ``time_steps`` steps, and the
class scores are the output layer's spike rates over time.

In the backward pass the membrane carried over from the previous step and
the reset term are constants, so each step's spike only sees the gradient of
its own input current. The hard spike is differentiated with a triangular
surrogate ``max(0, 1 - |u' - threshold| / width)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .seqio import derive_seed

PARAM_NAMES = ("w1", "b1", "w2", "b2")
CHECKPOINT_MAGIC = b"SPIKESEQ-CKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LifConfig:
    decay_multiplier: float = 0.9
    threshold: float = 1.0
    time_steps: int = 10
    surrogate_width: float = 1.0
    reset: str = "subtract"     # "subtract" | "zero"
    readout: str = "rate"       # "rate" | "membrane"
    spike_mode: str = "hard"    # "hard" | "smooth" (gradient checking)

    def __post_init__(self):
        if not 0.0 < self.decay_multiplier < 1.0:
            raise ValueError(f"decay_multiplier must be in (0, 1), got {self.decay_multiplier}")
        if self.threshold <= 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.time_steps < 1:
            raise ValueError(f"time_steps must be >= 1, got {self.time_steps}")
        if self.surrogate_width <= 0:
            raise ValueError(f"surrogate_width must be > 0, got {self.surrogate_width}")
        if self.reset not in ("subtract", "zero"):
            raise ValueError(f"reset must be 'subtract' or 'zero', got {self.reset!r}")
        if self.readout not in ("rate", "membrane"):
            raise ValueError(f"readout must be 'rate' or 'membrane', got {self.readout!r}")
        if self.spike_mode not in ("hard", "smooth"):
            raise ValueError(f"spike_mode must be 'hard' or 'smooth', got {self.spike_mode!r}")


@dataclass(frozen=True)
class LifState:
    u: np.ndarray
    s: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "LifState":
        return cls(np.zeros(shape), np.zeros(shape))


def spike_fn(u: np.ndarray, cfg: LifConfig) -> np.ndarray:
    if cfg.spike_mode == "smooth":
        return np.clip((u - cfg.threshold) / cfg.surrogate_width + 0.5, 0.0, 1.0)
    return (u > cfg.threshold).astype(np.float64)


def spike_grad(u: np.ndarray, cfg: LifConfig) -> np.ndarray:
    """d(spike)/du: triangular surrogate, or the exact ramp slope in smooth mode."""
    if cfg.spike_mode == "smooth":
        z = (u - cfg.threshold) / cfg.surrogate_width + 0.5
        return np.where((z > 0.0) & (z < 1.0), 1.0 / cfg.surrogate_width, 0.0)
    return np.maximum(0.0, 1.0 - np.abs(u - cfg.threshold) / cfg.surrogate_width)


def integrate(u_prev: np.ndarray, current: np.ndarray, cfg: LifConfig) -> np.ndarray:
    return cfg.decay_multiplier * u_prev + current


def reset(u_pre: np.ndarray, s: np.ndarray, cfg: LifConfig) -> np.ndarray:
    if cfg.reset == "zero":
        return u_pre * (1.0 - s)
    return u_pre - cfg.threshold * s


def lif_step(state: LifState, current, cfg: LifConfig) -> tuple[LifState, np.ndarray]:
    current = np.asarray(current, dtype=np.float64)
    if current.shape != state.u.shape:
        raise ValueError(f"current shape {current.shape} does not match state shape {state.u.shape}")
    if not np.all(np.isfinite(current)):
        raise ValueError("input current contains non-finite values")
    u_pre = integrate(state.u, current, cfg)
    s = spike_fn(u_pre, cfg)
    return LifState(reset(u_pre, s, cfg), s), s


@dataclass
class SnnModel:
    """Parameters ``w1`` (input_dim x hidden), ``b1``, ``w2`` (hidden x C), ``b2``.

    ``meta`` carries whatever is needed to re-encode inputs (alphabet,
    L_max, class names) and travels with checkpoints.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    lif: LifConfig = field(default_factory=LifConfig)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d, h = self.w1.shape
        h2, c = self.w2.shape
        if self.b1.shape != (h,) or h2 != h or self.b2.shape != (c,):
            raise ValueError(
                f"inconsistent shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @classmethod
    def init(cls, input_dim: int, hidden: int, n_classes: int, lif: LifConfig | None = None,
             seed: int = 0, meta: dict | None = None) -> "SnnModel":
        rng = np.random.default_rng(derive_seed(seed, "init"))
        lim1 = np.sqrt(1.0 / input_dim)
        lim2 = np.sqrt(1.0 / hidden)
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(input_dim, hidden)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-lim2, lim2, size=(hidden, n_classes)),
            b2=np.zeros(n_classes),
            lif=lif or LifConfig(),
            meta=dict(meta or {}),
        )

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> "SnnModel":
        return SnnModel(**{n: params[n] for n in PARAM_NAMES}, lif=self.lif, meta=dict(self.meta))

    def copy(self) -> "SnnModel":
        return self.with_params({n: p.copy() for n, p in self.params().items()})


@dataclass
class Trace:
    """Per-step quantities of one forward pass, each a list of length T.

    ``carry1``/``carry2`` hold the membrane entering each step; backward
    treats them as constants.
    """

    carry1: list
    pre1: list
    spikes1: list
    carry2: list
    pre2: list
    spikes2: list


def _as_batch(model: SnnModel, x) -> np.ndarray:
    if hasattr(x, "flat") and hasattr(x, "matrix"):
        x = x.flat
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"input of shape {x.shape} does not match model input_dim {model.input_dim}")
    return x


def forward_batch(model: SnnModel, x, carry: Trace | None = None) -> tuple[np.ndarray, Trace]:
    """Scores (B x C) and the step trace.

    With ``carry`` given, each step starts from the recorded membrane of that
    trace instead of the live one. This evaluates the gradient-blocked graph
    exactly, which is what finite-difference checks need.
    """
    cfg = model.lif
    x = _as_batch(model, x)
    batch = x.shape[0]
    current1 = x @ model.w1 + model.b1
    u1 = np.zeros((batch, model.hidden))
    u2 = np.zeros((batch, model.n_classes))
    trace = Trace([], [], [], [], [], [])
    acc = np.zeros((batch, model.n_classes))
    for t in range(cfg.time_steps):
        if carry is not None:
            u1, u2 = carry.carry1[t], carry.carry2[t]
        trace.carry1.append(u1)
        pre1 = integrate(u1, current1, cfg)
        s1 = spike_fn(pre1, cfg)
        u1 = reset(pre1, s1, cfg)

        trace.carry2.append(u2)
        pre2 = integrate(u2, s1 @ model.w2 + model.b2, cfg)
        s2 = spike_fn(pre2, cfg)
        u2 = reset(pre2, s2, cfg)

        trace.pre1.append(pre1)
        trace.spikes1.append(s1)
        trace.pre2.append(pre2)
        trace.spikes2.append(s2)
        acc += pre2 if cfg.readout == "membrane" else s2
    return acc / cfg.time_steps, trace


def forward(model: SnnModel, x, record: bool = False):
    """Class scores for one input; with ``record`` also the per-step spike trains.

    The record maps ``"hidden"`` and ``"output"`` to (T x n) spike arrays.
    """
    scores, trace = forward_batch(model, x)
    if scores.shape[0] != 1:
        raise ValueError("forward takes a single input; use forward_batch for batches")
    if not record:
        return scores[0]
    spikes = {
        "hidden": np.stack([s[0] for s in trace.spikes1]),
        "output": np.stack([s[0] for s in trace.spikes2]),
    }
    return scores[0], spikes


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def backward_from_scores(model: SnnModel, x: np.ndarray, trace: Trace, d_scores: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given dLoss/dScores (B x C) and a forward trace."""
    cfg = model.lif
    inv_t = 1.0 / cfg.time_steps
    d_w2 = np.zeros_like(model.w2)
    d_b2 = np.zeros_like(model.b2)
    d_current1 = np.zeros((x.shape[0], model.hidden))
    for t in range(cfg.time_steps):
        d_out = d_scores * inv_t
        if cfg.readout == "rate":
            d_out = d_out * spike_grad(trace.pre2[t], cfg)
        d_w2 += trace.spikes1[t].T @ d_out
        d_b2 += d_out.sum(axis=0)
        d_current1 += (d_out @ model.w2.T) * spike_grad(trace.pre1[t], cfg)
    return {
        "w1": x.T @ d_current1,
        "b1": d_current1.sum(axis=0),
        "w2": d_w2,
        "b2": d_b2,
    }


def cross_entropy_batch(scores: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-example loss and dLoss/dScores for softmax cross-entropy."""
    p = softmax(scores)
    rows = np.arange(len(targets))
    z = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = log_norm - z[rows, targets]
    grad = p.copy()
    grad[rows, targets] -= 1.0
    return loss, grad


def loss_and_grads(model: SnnModel, x, targets) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Mean cross-entropy over a batch, its parameter gradients, and the scores."""
    x = _as_batch(model, x)
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if len(targets) != x.shape[0]:
        raise ValueError(f"{len(targets)} targets for a batch of {x.shape[0]}")
    if np.any(targets < 0) or np.any(targets >= model.n_classes):
        raise ValueError(f"target outside 0..{model.n_classes - 1}")
    scores, trace = forward_batch(model, x)
    loss, d_scores = cross_entropy_batch(scores, targets)
    grads = backward_from_scores(model, x, trace, d_scores / x.shape[0])
    return float(loss.mean()), grads, scores


def backward(model: SnnModel, x, target: int) -> dict[str, np.ndarray]:
    """Gradients of softmax cross-entropy on one input's class scores."""
    return loss_and_grads(model, x, [target])[1]


# checkpoint: magic + version line, one JSON header line, then raw little-endian float64 row-major

def save_checkpoint(model: SnnModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def checkpoint_bytes(model: SnnModel) -> bytes:
    header = {
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "n_classes": model.n_classes,
        "lif": asdict(model.lif),
        "meta": model.meta,
        "params": [[n, list(getattr(model, n).shape)] for n in PARAM_NAMES],
        "dtype": "<f8",
    }
    blob = b"".join(np.ascontiguousarray(getattr(model, n), dtype="<f8").tobytes() for n in PARAM_NAMES)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return (CHECKPOINT_MAGIC + b" " + str(CHECKPOINT_VERSION).encode() + b"\n"
            + head + b"\n" + struct.pack("<Q", len(blob)) + blob)


def load_checkpoint(path) -> SnnModel:
    return checkpoint_from_bytes(Path(path).read_bytes())


def checkpoint_from_bytes(data: bytes) -> SnnModel:
    first, _, rest = data.partition(b"\n")
    magic, _, version = first.partition(b" ")
    if magic != CHECKPOINT_MAGIC:
        raise ValueError("not a spikeseq checkpoint")
    if int(version) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {int(version)}")
    head, _, rest = rest.partition(b"\n")
    header = json.loads(head)
    (n_bytes,) = struct.unpack("<Q", rest[:8])
    blob = rest[8:]
    if len(blob) != n_bytes:
        raise ValueError(f"checkpoint truncated: expected {n_bytes} parameter bytes, got {len(blob)}")
    params = {}
    offset = 0
    for name, shape in header["params"]:
        size = int(np.prod(shape)) * 8
        params[name] = np.frombuffer(blob[offset:offset + size], dtype="<f8").reshape(shape).astype(np.float64)
        offset += size
    return SnnModel(**params, lif=LifConfig(**header["lif"]), meta=header["meta"])
