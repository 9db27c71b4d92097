"""Softmax cross-entropy, ADAM, mini-batch training and repeated-split evaluation."""

from __future__ import annotations

import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .encode import DEFAULT_ALPHABET, Alphabet, max_length, one_hot_batch
from .metrics import ConfusionMatrix, MetricsReport, build_report, mean_report
from .seqio import Dataset, SplitPlan, derive_seed, stratified_split
from .snn import PARAM_NAMES, LifConfig, SnnModel, loss_and_grads, forward_batch, softmax

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def fresh(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    seconds: float = 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(self.losses, 1):
            out.write(f"{epoch},{loss!r}\n")
        out.write(f"# total_seconds,{self.seconds!r}\n")
        return out.getvalue()


def softmax_cross_entropy(scores, target: int) -> tuple[float, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= target < len(scores):
        raise ValueError(f"target {target} outside 0..{len(scores) - 1}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    z = scores - scores.max()
    log_norm = np.log(np.exp(z).sum())
    p = np.exp(z - log_norm)
    grad = p.copy()
    grad[target] -= 1.0
    return float(log_norm - z[target]), grad


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
                cfg: TrainConfig) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected ADAM step; returns new arrays and a new state."""
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name!r} {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")
    t = state.t + 1
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = cfg.beta1 * state.m.get(name, np.zeros_like(p)) + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v.get(name, np.zeros_like(p)) + (1.0 - cfg.beta2) * (g * g)
        new_params[name] = p - cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(new_m, new_v, t)


def encoding_of(model: SnnModel) -> tuple[Alphabet, int]:
    alphabet = Alphabet(model.meta.get("alphabet", DEFAULT_ALPHABET.symbols),
                        model.meta.get("catch_all", DEFAULT_ALPHABET.catch_all))
    l_max = int(model.meta.get("l_max", model.input_dim // len(alphabet)))
    return alphabet, l_max


def encode_dataset(model: SnnModel, dataset: Dataset) -> np.ndarray:
    alphabet, l_max = encoding_of(model)
    return one_hot_batch([r.residues for r in dataset.records], alphabet, l_max)


def build_model(train_set: Dataset, lif: LifConfig | None = None, hidden: int = 128, seed: int = 0,
                alphabet: Alphabet = DEFAULT_ALPHABET, l_max: int | None = None) -> SnnModel:
    """Fresh model sized for ``train_set``; L_max defaults to its longest sequence."""
    l_max = max_length(r.residues for r in train_set.records) if l_max is None else l_max
    meta = {
        "alphabet": alphabet.symbols,
        "catch_all": alphabet.catch_all,
        "l_max": l_max,
        "classes": list(train_set.classes),
    }
    return SnnModel.init(l_max * len(alphabet), hidden, len(train_set.classes), lif, seed=seed, meta=meta)


def train(model: SnnModel, train_set: Dataset, cfg: TrainConfig) -> tuple[SnnModel, TrainHistory]:
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if len(train_set.classes) != model.n_classes:
        raise ValueError(f"dataset has {len(train_set.classes)} classes, model has {model.n_classes}")
    x = encode_dataset(model, train_set)
    y = train_set.targets
    return train_arrays(model, x, y, cfg)


def train_arrays(model: SnnModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> tuple[SnnModel, TrainHistory]:
    params = {n: p.copy() for n, p in model.params().items()}
    state = AdamState.fresh(params)
    history = TrainHistory()
    n = len(y)
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(derive_seed(cfg.seed, "shuffle", epoch)).permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            current = model.with_params(params)
            loss, grads, _ = loss_and_grads(current, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss became non-finite at epoch {epoch + 1}, batch {b + 1}")
            params, state = adam_update(params, grads, state, cfg)
            total += loss * len(idx)
        history.losses.append(total / n)
        log.debug("epoch %d mean loss %.6f", epoch + 1, total / n)
    history.seconds = time.perf_counter() - start
    return model.with_params(params), history


def predict_scores(model: SnnModel, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Softmax of the time-averaged output rates, one row per input."""
    rows = [forward_batch(model, x[lo:lo + batch_size])[0] for lo in range(0, len(x), batch_size)]
    rates = np.concatenate(rows) if rows else np.zeros((0, model.n_classes))
    return softmax(rates)


def evaluate_model(model: SnnModel, dataset: Dataset, train_time_seconds: float = 0.0):
    """(MetricsReport, ConfusionMatrix) of ``model`` on ``dataset``."""
    classes = model.meta.get("classes", list(dataset.classes))
    if list(dataset.classes) != list(classes):
        # score against the model's class order; labels it never saw are rejected
        unknown = set(r.label for r in dataset.records) - set(classes)
        if unknown:
            raise ValueError(f"dataset labels unknown to the model: {sorted(unknown)}")
        dataset = Dataset(dataset.records, tuple(classes))
    scores = predict_scores(model, encode_dataset(model, dataset))
    return build_report(dataset.targets, scores, model.n_classes, classes, train_time_seconds)


@dataclass
class RepeatResult:
    repeat_index: int
    report: MetricsReport
    history: TrainHistory
    model: SnnModel
    confusion: ConfusionMatrix


def run_repeat(dataset: Dataset, plan: SplitPlan, cfg: TrainConfig, repeat_index: int,
               lif: LifConfig | None = None, hidden: int = 128, alphabet: Alphabet = DEFAULT_ALPHABET,
               l_max: int | None = None) -> RepeatResult:
    train_set, test_set = stratified_split(dataset, plan, repeat_index)
    model = build_model(train_set, lif, hidden, derive_seed(cfg.seed, "model", repeat_index), alphabet, l_max)
    run_cfg = replace(cfg, seed=derive_seed(cfg.seed, "train", repeat_index))
    model, history = train(model, train_set, run_cfg)
    report, cm = evaluate_model(model, test_set, history.seconds)
    return RepeatResult(repeat_index, report, history, model, cm)


def evaluate_repeated(dataset: Dataset, plan: SplitPlan, cfg: TrainConfig, lif: LifConfig | None = None,
                      hidden: int = 128, alphabet: Alphabet = DEFAULT_ALPHABET, l_max: int | None = None,
                      workers: int = 1) -> tuple[MetricsReport, list[RepeatResult]]:
    """Train a fresh model per stratified resample and average the test-side reports."""
    if len(dataset.classes) < 2:
        raise ValueError("evaluation needs at least 2 classes")
    if l_max is None:
        l_max = max_length(r.residues for r in dataset.records)

    def one(i: int) -> RepeatResult:
        result = run_repeat(dataset, plan, cfg, i, lif, hidden, alphabet, l_max)
        log.info("repeat %d: accuracy %.4f, f1_macro %.4f", i, result.report.accuracy, result.report.f1_macro)
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(plan.repeats)))
    else:
        results = [one(i) for i in range(plan.repeats)]
    return mean_report([r.report for r in results]), results


__all__ = [
    "AdamState", "TrainConfig", "TrainHistory", "TrainingError", "adam_update", "build_model",
    "encode_dataset", "evaluate_model", "evaluate_repeated", "predict_scores", "run_repeat",
    "softmax_cross_entropy", "train", "train_arrays", "PARAM_NAMES",
]
