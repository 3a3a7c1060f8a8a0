"""Training loops: base training, generic training and per-dialect transfer.

Sentences are chunked into three-word pieces and spelled out as character
sequences before batching.  A flagged model additionally gets the dialect
flag prepended to every source chunk.  Transfer training clones a base
model, freezes the source embedding and the first encoder layer, and
continues on a single dialect's data; frozen tensors are never touched, so
they stay byte-identical to the base model's.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import ParallelExample
from .errors import (
    NonFiniteGradientError,
    TrainingDivergedError,
    TrainingError,
    UnknownDialectError,
)
from .model import (
    PARAM_GROUPS,
    TRANSFER_FROZEN_GROUPS,
    Batch,
    ModelMeta,
    ModelParams,
    Seq2SeqModel,
    make_batch,
    save_checkpoint,
)
from .textcodec import add_flag, chunk_sentence, encode
from .vocab import Vocabulary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs for one training run; `freeze` names parameter groups."""

    steps: int
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 0.002
    lr_decay: float = 1.0
    dropout: float = 0.0
    grad_clip: float = 5.0
    seed: int = 1
    checkpoint_every: int = 200
    log_every: int = 100
    freeze: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.steps < 1:
            raise TrainingError(f"steps must be positive, got {self.steps}")
        if self.batch_size < 1:
            raise TrainingError(f"batch_size must be positive, got {self.batch_size}")
        if self.optimizer not in ("sgd", "adam"):
            raise TrainingError(f"unknown optimizer {self.optimizer!r}; use 'sgd' or 'adam'")
        if self.learning_rate <= 0:
            raise TrainingError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.lr_decay <= 1:
            raise TrainingError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if not 0 <= self.dropout < 1:
            raise TrainingError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise TrainingError(f"grad_clip must be positive or None, got {self.grad_clip}")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise TrainingError("checkpoint_every and log_every must be positive")
        unknown = set(self.freeze) - set(PARAM_GROUPS)
        if unknown:
            raise TrainingError(
                f"unknown parameter groups in freeze: {sorted(unknown)}; known: {sorted(PARAM_GROUPS)}"
            )
        object.__setattr__(self, "freeze", frozenset(self.freeze))


PRESETS = {
    "reference-base": TrainingConfig(
        steps=100_000, optimizer="sgd", learning_rate=1.0, lr_decay=0.5,
        dropout=0.3, checkpoint_every=5000, log_every=500,
    ),
    "reference-transfer": TrainingConfig(
        steps=20_000, optimizer="sgd", learning_rate=1.0, lr_decay=0.5,
        dropout=0.3, checkpoint_every=5000, log_every=500,
        freeze=TRANSFER_FROZEN_GROUPS,
    ),
    "desk": TrainingConfig(steps=3000, optimizer="adam", learning_rate=0.002),
}


def get_preset(name: str, **overrides) -> TrainingConfig:
    if name not in PRESETS:
        raise TrainingError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides) if overrides else PRESETS[name]


def make_training_pairs(
    examples: list[ParallelExample],
    vocab: Vocabulary,
    mode: str = "flagged",
    dialect: str | None = None,
) -> list[tuple[list[int], list[int]]]:
    """Chunk, spell out and index sentence pairs.

    Word alignment guarantees source and target sentences split into the
    same number of chunks, which keeps every pair a self-contained unit.
    """
    if mode not in ("flagged", "plain"):
        raise TrainingError(f"unknown mode {mode!r}; use 'flagged' or 'plain'")
    pairs: list[tuple[list[int], list[int]]] = []
    for ex in examples:
        if dialect is not None and ex.dialect_id != dialect:
            continue
        if mode == "flagged":
            vocab.flag_id(ex.dialect_id)
        src_chunks = chunk_sentence(ex.source_words)
        tgt_chunks = chunk_sentence(ex.target_words)
        for src_chunk, tgt_chunk in zip(src_chunks, tgt_chunks):
            src_seq = encode(src_chunk.words)
            if mode == "flagged":
                src_seq = add_flag(src_seq, ex.dialect_id)
            pairs.append((vocab.ids(src_seq), vocab.ids(encode(tgt_chunk.words))))
    return pairs


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def update(self, tensors, grads, frozen):
        for name, grad in grads.items():
            if name not in frozen:
                tensors[name] -= self.lr * grad


class _Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def update(self, tensors, grads, frozen):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, grad in grads.items():
            if name in frozen:
                continue
            if name not in self.m:
                self.m[name] = np.zeros_like(grad)
                self.v[name] = np.zeros_like(grad)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            tensors[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for grad in grads.values():
        total += float(np.vdot(grad, grad))
    norm = math.sqrt(total)
    if not math.isfinite(norm):
        raise NonFiniteGradientError(f"gradient norm is {norm}")
    if norm > max_norm:
        scale = max_norm / norm
        for grad in grads.values():
            grad *= scale
    return norm


def _frozen_tensor_names(freeze: frozenset[str]) -> frozenset[str]:
    names: set[str] = set()
    for group in freeze:
        names.update(PARAM_GROUPS[group])
    return frozenset(names)


def _batch_stream(pairs, batch_size: int, seed: int):
    rng = random.Random(seed)
    order = list(range(len(pairs)))
    while True:
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            yield [pairs[i] for i in order[start : start + batch_size]]


def evaluate_loss(model: Seq2SeqModel, pairs, batch_size: int = 64) -> float:
    """Token-weighted mean cross-entropy over a pair list, fixed order."""
    if not pairs:
        raise TrainingError("cannot evaluate loss on an empty pair list")
    total_nll = 0.0
    total_tokens = 0.0
    for start in range(0, len(pairs), batch_size):
        batch = make_batch(pairs[start : start + batch_size], dtype=model.params.dtype)
        pooled, _ = model.loss(batch)
        total_nll += pooled * batch.n_target_tokens
        total_tokens += batch.n_target_tokens
    return total_nll / total_tokens


@dataclass
class TrainingRun:
    """Everything a finished run produced, logs included."""

    config: TrainingConfig
    model: Seq2SeqModel
    loss_log: list[tuple[int, float]] = field(default_factory=list)
    valid_log: list[tuple[int, float]] = field(default_factory=list)
    best_valid: float | None = None
    best_params: ModelParams | None = None
    out_dir: Path | None = None
    final_path: Path | None = None
    best_path: Path | None = None

    def best_model(self) -> Seq2SeqModel:
        if self.best_params is None:
            return self.model
        return Seq2SeqModel(self.best_params, self.model.vocab, self.model.meta)


def train_on_pairs(
    model: Seq2SeqModel,
    train_pairs,
    valid_pairs,
    config: TrainingConfig,
    out_dir: str | Path | None = None,
) -> TrainingRun:
    """Run the optimization loop, mutating the model's parameters in place."""
    if not train_pairs:
        raise TrainingError("no training pairs")
    frozen = _frozen_tensor_names(config.freeze)
    optimizer = _Adam(config.learning_rate) if config.optimizer == "adam" else _Sgd(config.learning_rate)
    dropout_rng = np.random.default_rng(config.seed)
    batches = _batch_stream(train_pairs, config.batch_size, config.seed)
    run = TrainingRun(config=config, model=model)
    if out_dir is not None:
        run.out_dir = Path(out_dir)
        run.out_dir.mkdir(parents=True, exist_ok=True)
    start_step = model.meta.steps
    logger.info(
        "training: %d pairs, %d steps, optimizer=%s lr=%g freeze=%s",
        len(train_pairs), config.steps, config.optimizer, config.learning_rate,
        sorted(config.freeze) or "-",
    )

    window: list[float] = []
    for step in range(1, config.steps + 1):
        batch = make_batch(next(batches), dtype=model.params.dtype)
        try:
            loss, _, grads = model.loss_and_grads(batch, dropout=config.dropout, rng=dropout_rng)
        except FloatingPointError as err:
            raise TrainingDivergedError(step, str(err)) from None
        if not math.isfinite(loss):
            raise TrainingDivergedError(step, f"training loss is {loss}")
        if config.grad_clip is not None:
            try:
                clip_gradients(grads, config.grad_clip)
            except NonFiniteGradientError as err:
                raise TrainingDivergedError(step, str(err)) from None
        optimizer.update(model.params.tensors, grads, frozen)
        model.meta.steps = start_step + step
        run.loss_log.append((step, loss))
        window.append(loss)
        if step % config.log_every == 0:
            logger.info("step %d: train loss %.4f", step, sum(window) / len(window))
            window.clear()

        if step % config.checkpoint_every == 0 or step == config.steps:
            if valid_pairs:
                vloss = evaluate_loss(model, valid_pairs, config.batch_size)
                run.valid_log.append((step, vloss))
                logger.info("step %d: valid loss %.4f", step, vloss)
                if run.best_valid is None or vloss < run.best_valid:
                    run.best_valid = vloss
                    run.best_params = model.params.clone()
                    if run.out_dir is not None:
                        run.best_path = run.out_dir / "best.ckpt"
                        save_checkpoint(run.best_model(), run.best_path)
                elif config.lr_decay < 1.0:
                    optimizer.lr *= config.lr_decay
                    logger.info("step %d: no improvement, lr now %g", step, optimizer.lr)
            if run.out_dir is not None:
                save_checkpoint(model, run.out_dir / "latest.ckpt")

    if run.out_dir is not None:
        run.final_path = run.out_dir / "final.ckpt"
        save_checkpoint(model, run.final_path)
        with open(run.out_dir / "train_log.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "train_loss", "valid_loss"])
            valid_at = dict(run.valid_log)
            for step, loss in run.loss_log:
                writer.writerow([step, f"{loss:.6f}", f"{valid_at[step]:.6f}" if step in valid_at else ""])
    return run


def train_model(
    model: Seq2SeqModel,
    train_examples: list[ParallelExample],
    valid_examples: list[ParallelExample],
    config: TrainingConfig,
    out_dir: str | Path | None = None,
) -> TrainingRun:
    """Train on sentence pairs, deriving the input style from model.meta."""
    mode = model.meta.mode
    dialect = model.meta.dialect
    train_pairs = make_training_pairs(train_examples, model.vocab, mode, dialect)
    valid_pairs = make_training_pairs(valid_examples, model.vocab, mode, dialect) if valid_examples else []
    if not train_pairs:
        raise TrainingError(
            "no training pairs" + (f" for dialect {dialect!r}" if dialect is not None else "")
        )
    return train_on_pairs(model, train_pairs, valid_pairs, config, out_dir)


def transfer_train(
    base: Seq2SeqModel,
    dialect: str,
    train_examples: list[ParallelExample],
    valid_examples: list[ParallelExample],
    config: TrainingConfig,
    out_dir: str | Path | None = None,
) -> TrainingRun:
    """Specialize a base model to one dialect.

    The source embedding and the first encoder layer stay frozen on top of
    whatever `config.freeze` already names.  The base model is not modified;
    the run works on a clone tagged as a plain single-dialect model.
    """
    if dialect not in base.vocab.flags:
        raise UnknownDialectError(
            f"dialect {dialect!r} unknown to the base model (known: {list(base.vocab.flags)})"
        )
    meta = ModelMeta(mode="plain", dialect=dialect, steps=base.meta.steps)
    clone = Seq2SeqModel(base.params.clone(), base.vocab, meta)
    config = replace(config, freeze=frozenset(config.freeze) | TRANSFER_FROZEN_GROUPS)
    return train_model(clone, train_examples, valid_examples, config, out_dir)
