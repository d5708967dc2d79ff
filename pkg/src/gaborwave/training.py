"""SGD training with validation-loss-triggered learning-rate annealing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from . import layers as ly
from .autodiff import Tape
from .data import LabeledWaveforms, SplitData
from .errors import ContractError, NumericError, ParameterError
from .model import Model


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 20
    lr: float = 0.2
    anneal_factor: float = 0.5
    anneal_threshold: float = 0.001  # minimum relative validation-loss improvement
    dropout_p: float = 0.15
    seed: int = 0
    chunk_ms: float = 200.0
    overlap_ms: float = 10.0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ParameterError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ParameterError(f"lr must be >= 0, got {self.lr}")
        if not (0.0 < self.anneal_factor < 1.0):
            raise ParameterError(
                f"anneal_factor must be in (0, 1), got {self.anneal_factor}")
        if self.anneal_threshold < 0:
            raise ParameterError(
                f"anneal_threshold must be >= 0, got {self.anneal_threshold}")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ParameterError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.chunk_ms <= 0 or self.overlap_ms < 0:
            raise ParameterError("chunk_ms must be positive and overlap_ms >= 0")

    def config_hash(self) -> str:
        text = "\n".join(f"{k} = {v}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class RunReport:
    seed: int
    config_hash: str
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    valid_acc: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    final_test_acc: float = float("nan")
    learned_cutoffs_hz: list[tuple[float, float]] = field(default_factory=list)


def anneal_lr(prev_valid_loss: float, new_valid_loss: float, lr: float,
              cfg: TrainConfig) -> float:
    """Shrink lr when the relative validation-loss improvement stalls."""
    if not (np.isfinite(prev_valid_loss) and np.isfinite(new_valid_loss)):
        raise ContractError("validation losses must be finite")
    if prev_valid_loss <= 0:
        raise ContractError(f"previous validation loss must be positive, got {prev_valid_loss}")
    improvement = (prev_valid_loss - new_valid_loss) / prev_valid_loss
    if improvement < cfg.anneal_threshold:
        return lr * cfg.anneal_factor
    return lr


def evaluate(model: Model, split: LabeledWaveforms,
             batch_size: int = 256) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) over a split, eval mode, no tape."""
    n = split.x.shape[0]
    total_nll = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        xb = split.x[start:start + batch_size]
        yb = split.y[start:start + batch_size]
        probs = model.predict_proba(xb)
        picked = probs[np.arange(len(yb)), yb]
        total_nll += float(-np.log(np.maximum(picked, 1e-300)).sum())
        correct += int((probs.argmax(axis=1) == yb).sum())
    return total_nll / n, correct / n


def sgd_step(model: Model, xb: np.ndarray, yb: np.ndarray, lr: float,
             dropout_p: float, drop_rng: np.random.Generator | None,
             epoch: int, batch_index: int) -> float:
    """One minibatch forward/backward/update; returns the batch loss."""
    tape = Tape()
    ctx = ly.Context(tape=tape, train=True, rng=drop_rng)
    loss = model.loss(xb, yb, ctx, dropout_p)
    loss_val = loss.item()
    if not np.isfinite(loss_val):
        norms = {name: float(np.sqrt((re ** 2).sum() + (0 if im is None else (im ** 2).sum())))
                 for name, re, im in model.named_params()}
        raise NumericError(
            f"non-finite loss {loss_val} at epoch {epoch}, batch {batch_index}; "
            f"parameter norms: {norms}"
        )
    grads = tape.backward(loss)
    if lr != 0.0:
        for name, re, im in model.named_params():
            g = grads[name]
            re -= lr * g.re
            if im is not None:
                im -= lr * g.im
    return loss_val


def train(model: Model, data: SplitData, cfg: TrainConfig) -> RunReport:
    """Minibatch SGD on cross-entropy with per-epoch validation and annealing.

    Deterministic for a fixed config and seed under single-threaded
    execution: batch order and dropout masks come from generators derived
    from cfg.seed.
    """
    n = data.train.x.shape[0]
    if n == 0:
        raise ParameterError("training split is empty")
    order_rng, drop_rng = (np.random.default_rng(s)
                           for s in np.random.SeedSequence(cfg.seed).spawn(2))
    report = RunReport(seed=cfg.seed, config_hash=cfg.config_hash())
    lr = cfg.lr
    prev_valid = None
    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(n)
        losses = []
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start:start + cfg.batch_size]
            if sel.size < 2:
                continue  # batch norm cannot run on a singleton remainder
            losses.append(sgd_step(model, data.train.x[sel], data.train.y[sel],
                                   lr, cfg.dropout_p, drop_rng, epoch, bi))
        valid_loss, valid_acc = evaluate(model, data.valid)
        report.epochs.append(epoch)
        report.train_loss.append(float(np.mean(losses)))
        report.valid_loss.append(valid_loss)
        report.valid_acc.append(valid_acc)
        report.lr.append(lr)
        if prev_valid is not None:
            lr = anneal_lr(prev_valid, valid_loss, lr, cfg)
        prev_valid = valid_loss
    _, report.final_test_acc = evaluate(model, data.test)
    report.learned_cutoffs_hz = export_cutoffs(model)
    return report


def export_cutoffs(model: Model) -> list[tuple[float, float]]:
    """Current constrained (f1, f2) per filter, in Hz, ordered by filter index."""
    sr = model.graph.sample_rate
    return [(c.f1 * sr, c.f2 * sr) for c in model.front.cutoffs()]
