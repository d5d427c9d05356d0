"""Mini-batch training with gradient clipping, ADAM, and epoch selection
on a held-out set, plus the two-step schedule (pretrain on pseudo
samples, then adapt on task samples starting from the best pretrained
weights with fresh optimizer state).
"""

import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import reader
from .errors import NonFiniteError, ValidationError
from .reader import ReaderConfig, ReaderParams
from .tensorcore import Tape, no_grad
from .vocab import MappedTriple


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    clip_norm: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 10
    patience: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValidationError("batch_size, max_epochs and patience must be >= 1")
        if self.clip_norm <= 0:
            raise ValidationError("clip_norm must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")


def clip_gradients(tensors, max_norm: float) -> Tuple[float, float]:
    """Scale the joint gradient so its global L2 norm is at most
    ``max_norm``; returns (pre_clip_norm, post_clip_norm)."""
    total = 0.0
    for t in tensors:
        if t.grad is not None:
            total += float(np.sum(t.grad * t.grad))
    norm = float(np.sqrt(total))
    if not np.isfinite(norm):
        raise NonFiniteError("gradient norm is not finite")
    if norm <= max_norm:
        return norm, norm
    scale = max_norm / norm
    post = 0.0
    for t in tensors:
        if t.grad is not None:
            t.grad *= scale
            post += float(np.sum(t.grad * t.grad))
    return norm, float(np.sqrt(post))


class Adam:
    """Per-tensor adaptive moments; reads each tensor's ``grad`` buffer
    and updates ``data`` in place."""

    def __init__(self, tensors, cfg: TrainConfig):
        self.tensors = list(tensors)
        self.cfg = cfg
        self.t = 0
        self._m = [np.zeros_like(t.data) for t in self.tensors]
        self._v = [np.zeros_like(t.data) for t in self.tensors]

    def step(self) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for t, m, v in zip(self.tensors, self._m, self._v):
            g = t.grad
            if g is None:
                continue
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            t.data -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    improved: bool


@dataclass
class TrainReport:
    epochs: List[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    clip_norms: List[float] = field(default_factory=list)   # post-clip, per step
    steps: int = 0
    wall_seconds: float = 0.0


def _check_samples(data: Sequence[MappedTriple], label: str) -> None:
    if not data:
        raise ValidationError(f"{label} set is empty")
    for i, s in enumerate(data):
        if s.answer_id is None:
            raise ValidationError(f"{label} sample {i} has no answer id")
        if not s.doc_ids or not s.query_ids:
            raise ValidationError(f"{label} sample {i} has an empty sequence")


def mean_loss(params: ReaderParams, data: Sequence[MappedTriple]) -> float:
    """Average negative log probability of the answers, off-tape."""
    total = 0.0
    with no_grad():
        for s in data:
            l, _ = reader.loss(params, s.doc_ids, s.query_ids, s.answer_id)
            total += l.item()
    return total / len(data)


def accuracy(params: ReaderParams, data: Sequence[MappedTriple],
             restrict_to_context: bool = True) -> float:
    hits = 0
    for s in data:
        pred, _ = reader.predict(params, s.doc_ids, s.query_ids,
                                 restrict_to_context=restrict_to_context)
        hits += int(pred == s.answer_id)
    return hits / len(data)


def train(params: ReaderParams, train_data: Sequence[MappedTriple],
          val_data: Sequence[MappedTriple], cfg: TrainConfig,
          ) -> Tuple[ReaderParams, TrainReport]:
    """Optimize ``params`` in place and return (best_params, report).

    Epochs are scored on the validation set; the best-so-far weights are
    kept as a copy, and training stops once ``patience`` consecutive
    epochs fail to improve strictly.  ``best_params`` is that copy, not
    the final in-place state.
    """
    _check_samples(train_data, "training")
    if val_data:
        _check_samples(val_data, "validation")
    else:
        warnings.warn("validation set is empty; selecting epochs on training loss")
    tensors = params.tensors()
    adam = Adam(tensors, cfg)
    report = TrainReport()
    best_params = params.clone()
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = np.random.default_rng([cfg.rng_seed, epoch]).permutation(len(train_data))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_data[i] for i in order[start:start + cfg.batch_size]]
            params.zero_grads()
            for s in batch:
                with Tape() as tape:
                    l, _ = reader.loss(params, s.doc_ids, s.query_ids, s.answer_id)
                    tape.backward(l)
                epoch_loss += l.item()
            inv = 1.0 / len(batch)
            for t in tensors:
                t.grad *= inv
            _, post = clip_gradients(tensors, cfg.clip_norm)
            report.clip_norms.append(post)
            adam.step()
            report.steps += 1
        train_loss = epoch_loss / len(train_data)
        val_loss = mean_loss(params, val_data) if val_data else train_loss
        improved = val_loss < report.best_val_loss
        report.epochs.append(EpochStats(epoch, train_loss, val_loss, improved))
        if improved:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_params = params.clone()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    report.wall_seconds = time.perf_counter() - t0
    return best_params, report


@dataclass
class TwoStepResult:
    params: ReaderParams
    pretrain_report: TrainReport
    adapt_report: TrainReport


def two_step_train(reader_cfg: ReaderConfig,
                   pseudo_train: Sequence[MappedTriple],
                   pseudo_val: Sequence[MappedTriple],
                   task_train: Sequence[MappedTriple],
                   task_val: Sequence[MappedTriple],
                   pretrain_cfg: TrainConfig,
                   adapt_cfg: TrainConfig) -> TwoStepResult:
    """Pretrain on pseudo samples, then continue from the best
    pretrained weights on task samples with fresh optimizer moments."""
    if not task_train:
        raise ValidationError("two-step training requires task samples to adapt on")
    params = reader.init_params(reader_cfg)
    best_pre, pre_report = train(params, pseudo_train, pseudo_val, pretrain_cfg)
    adapted = best_pre.clone()
    best_adapt, adapt_report = train(adapted, task_train, task_val, adapt_cfg)
    return TwoStepResult(params=best_adapt, pretrain_report=pre_report,
                         adapt_report=adapt_report)
