"""Training: grid cross-entropy, Adam updates, early stopping, ablation.

The loss is the plain sum of per-cell negative log likelihoods over the
upper triangle, summed again over the sentences of a batch (an optional
config switch divides by batch size instead).  Sentences are processed
one by one with gradient accumulation, so no grid padding exists
anywhere.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .config import TrainConfig
from .corpus import AnnotatedSentence, DatasetSplit
from .encoders import build_vocab
from .grid import TagGrid, Task, encode_grid
from .model import GridTagger, predict_sentences
from .scoring import ScoreReport, score

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class TrainingError(RuntimeError):
    pass


def grid_loss(
    p: Tensor,
    gold: TagGrid | np.ndarray,
    clamp_counter: list[int] | None = None,
) -> Tensor:
    """Summed cross entropy of the gold tag at every cell.

    Gold-tag probabilities below PROB_FLOOR are clamped before the log;
    each clamped cell bumps ``clamp_counter[0]`` when a counter is given.
    """
    classes = gold.class_indices() if isinstance(gold, TagGrid) else np.asarray(gold)
    if p.shape[0] != classes.shape[0]:
        raise TrainingError(
            f"{p.shape[0]} predicted cells for {classes.shape[0]} gold cells"
        )
    picked = ad.take_per_row(p, classes)
    clamped = int((picked.data < PROB_FLOOR).sum())
    if clamped:
        if clamp_counter is not None:
            clamp_counter[0] += clamped
        log.warning("clamped %d zero probabilities at gold tags", clamped)
    return ad.mul(ad.total(ad.log(ad.clamp_min(picked, PROB_FLOOR))), -1.0)


class Adam:
    """Adaptive-moment updates with the standard constants."""

    def __init__(
        self,
        store: ParamStore,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.store = store
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, param in self.store.items():
            g = param.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_f1: float
    seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "dev_f1": self.dev_f1,
            "seconds": self.seconds,
        }


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_f1: float = 0.0
    wall_time: float = 0.0
    clamp_events: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict()) for r in self.epochs]
        lines.append(
            json.dumps(
                {
                    "best_epoch": self.best_epoch,
                    "best_dev_f1": self.best_dev_f1,
                    "wall_time": self.wall_time,
                    "clamp_events": self.clamp_events,
                }
            )
        )
        return "\n".join(lines) + "\n"


def evaluate_model(
    model: GridTagger, sentences: list[AnnotatedSentence], threads: int = 1
) -> ScoreReport:
    predictions = predict_sentences(model, sentences, threads=threads)
    return score(predictions, sentences, model.task)


def train(
    config: TrainConfig,
    train_split: DatasetSplit,
    dev_split: DatasetSplit,
    model: GridTagger | None = None,
) -> tuple[GridTagger, TrainReport]:
    """Optimize a model; keep the parameters of the best dev-F1 epoch.

    Stops after ``patience`` epochs without dev improvement, when
    ``stop_f1`` is reached, or at ``max_epochs``.  Fully deterministic
    given the seed.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = GridTagger(config, build_vocab(train_split.sentences), rng)
    task = Task(config.task)

    examples = [
        (model.ids(s.tokens), encode_grid(s, task).class_indices())
        for s in train_split.sentences
    ]
    dev_sentences = list(dev_split.sentences)

    optimizer = Adam(model.store, config.learning_rate)
    report = TrainReport()
    clamp_counter = [0]
    best_snapshot = model.snapshot()
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        epoch_started = time.perf_counter()
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start : start + config.batch_size]
            scale = 1.0 / len(batch) if config.normalize_loss else 1.0
            model.store.zero_grad()
            for pos in batch:
                token_ids, gold_classes = examples[pos]
                p = model.forward_cells(token_ids, train=True, rng=rng)
                loss = grid_loss(p, gold_classes, clamp_counter)
                if scale != 1.0:
                    loss = ad.mul(loss, scale)
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss {value} at epoch {epoch}, "
                        f"batch {batch_no}, sentence index {int(pos)}"
                    )
                ad.backward(loss)
                epoch_loss += value
            optimizer.step()

        dev_f1 = evaluate_model(model, dev_sentences).headline_f1
        record = EpochRecord(
            epoch, epoch_loss, dev_f1, time.perf_counter() - epoch_started
        )
        report.epochs.append(record)
        log.info(
            "epoch %d loss %.4f dev_f1 %.4f (%.2fs)",
            epoch,
            epoch_loss,
            dev_f1,
            record.seconds,
        )

        if dev_f1 > report.best_dev_f1 or report.best_epoch == 0:
            report.best_dev_f1 = dev_f1
            report.best_epoch = epoch
            best_snapshot = model.snapshot()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if config.stop_f1 is not None and report.best_dev_f1 >= config.stop_f1:
            break
        if epochs_since_best >= config.patience:
            break

    model.restore(best_snapshot)
    report.wall_time = time.perf_counter() - started
    report.clamp_events = clamp_counter[0]
    return model, report


def ablate_inference_times(
    config: TrainConfig,
    train_split: DatasetSplit,
    dev_split: DatasetSplit,
    turn_values: list[int],
) -> list[dict]:
    """Train one model per turn count (shared seed); tabulate dev F1."""
    if not turn_values:
        raise ValueError("need at least one turn count")
    rows = []
    for turns in turn_values:
        run_config = config.replace(inference_turns=turns)
        _, report = train(run_config, train_split, dev_split)
        rows.append(
            {
                "inference_turns": turns,
                "best_dev_f1": report.best_dev_f1,
                "best_epoch": report.best_epoch,
                "epochs_run": len(report.epochs),
                "final_train_loss": report.epochs[-1].train_loss,
                "epoch_losses": [r.train_loss for r in report.epochs],
            }
        )
    return rows
