# -*- coding: utf-8 -*-
"""Minibatch training with AdamW, per-epoch validation and best-checkpoint selection."""
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy

from aiida_csi_positioning.exceptions import TrainingDivergedError
from aiida_csi_positioning.utils.log import get_logger

from . import functional as F
from .network import Network
from .optim import AdamWState, adamw_step

LOGGER = get_logger('nn.training')

#: Columns of one history row.
HISTORY_COLUMNS = ('epoch', 'train_loss', 'train_acc', 'val_loss', 'val_acc')

EVAL_BATCH_SIZE = 256


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults reproduce the published reference configuration."""

    epochs: int = 150
    batch_size: int = 20
    learning_rate: float = 1e-6
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError('epochs and batch size must be positive')
        if not (self.learning_rate > 0 and self.epsilon > 0 and self.weight_decay >= 0):
            raise ValueError('learning rate and epsilon must be positive, weight decay non-negative')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError('betas must lie in [0, 1)')
        if self.shuffle_seed < 0:
            raise ValueError('the shuffle seed must be non-negative')

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, content: dict) -> 'TrainConfig':
        return cls(**content)


@dataclass
class TrainingHistory:
    """Per-epoch metrics (1-based epochs), optional per-epoch mean test error and the pre-training baseline."""

    rows: List[Tuple[int, float, float, float, float]] = field(default_factory=list)
    test_errors: List[float] = field(default_factory=list)
    baseline: Optional[Tuple[float, float]] = None

    def as_array(self) -> numpy.ndarray:
        return numpy.array(self.rows, dtype=numpy.float64).reshape(-1, len(HISTORY_COLUMNS))

    @classmethod
    def from_arrays(cls, rows, test_errors, baseline=None) -> 'TrainingHistory':
        rows = numpy.asarray(rows, dtype=numpy.float64).reshape(-1, len(HISTORY_COLUMNS))
        return cls(
            rows=[(int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4])) for row in rows],
            test_errors=[float(value) for value in numpy.asarray(test_errors, dtype=numpy.float64)],
            baseline=None if baseline is None else (float(baseline[0]), float(baseline[1])),
        )

    @property
    def epochs(self) -> int:
        return len(self.rows)

    def best(self) -> Tuple[int, float]:
        """Epoch with the highest validation accuracy, earliest on ties, and that accuracy."""
        best_epoch, best_accuracy = 0, -math.inf
        for epoch, _, _, _, accuracy in self.rows:
            if accuracy > best_accuracy:
                best_epoch, best_accuracy = epoch, accuracy
        return best_epoch, best_accuracy


@dataclass
class TrainingResult:
    history: TrainingHistory
    best_state: dict
    best_epoch: int
    best_val_acc: float


def minibatches(order: numpy.ndarray, batch_size: int) -> List[numpy.ndarray]:
    """Consecutive chunks of ``order``; a trailing chunk of a single sample joins the previous one.

    Batch normalization in train mode needs at least two samples per batch.
    """
    batches = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = numpy.concatenate([batches[-2], batches.pop()])
    return batches


def evaluate_split(network: Network, tensors: numpy.ndarray, labels: numpy.ndarray) -> Tuple[float, float]:
    """Eval-mode mean NLL and accuracy over a labeled set, in fixed chunks."""
    if len(labels) == 0:
        return math.nan, math.nan
    total_loss, correct = 0.0, 0
    for start in range(0, len(labels), EVAL_BATCH_SIZE):
        chunk = slice(start, start + EVAL_BATCH_SIZE)
        logits = network.forward(tensors[chunk], F.EVAL)
        loss, _, probs = F.softmax_nll(logits, labels[chunk])
        total_loss += loss * len(probs)
        correct += int(numpy.sum(probs.argmax(axis=1) == labels[chunk]))
    return total_loss / len(labels), correct / len(labels)


class Trainer:
    """Owns the training state: network, optimizer, shuffle generator, history and best snapshot.

    Args:
        network: the network to train in place
        train: training samples (``tensors``, ``class_ids``)
        validation: validation samples
        config: hyperparameters
        epoch_callback: called as ``callback(epoch, network)`` after each epoch; a returned float is recorded as the
            mean test error of that epoch
        dump_path: file receiving a JSON state dump when the loss diverges
    """

    def __init__(
        self,
        network: Network,
        train,
        validation,
        config: TrainConfig,
        epoch_callback: Optional[Callable[[int, Network], Optional[float]]] = None,
        dump_path=None,
    ) -> None:
        if len(train) < 2 or len(validation) < 1:
            raise ValueError('training needs at least two training samples and one validation sample')
        self.network = network
        self.train = train
        self.validation = validation
        self.config = config
        self.epoch_callback = epoch_callback
        self.dump_path = dump_path
        self.optimizer = AdamWState.create(
            network.parameters(),
            lr=config.learning_rate,
            weight_decay=config.weight_decay,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.epsilon,
        )
        self.rng = numpy.random.default_rng(config.shuffle_seed)
        self.history = TrainingHistory()
        self.epoch = 0
        self.best_state: Optional[dict] = None
        self.best_epoch = 0
        self.best_val_acc = -math.inf

    def restore(self, epoch: int, network_state: dict, optimizer: AdamWState, rng_state: dict, history: TrainingHistory,
                best_state: dict, best_epoch: int, best_val_acc: float) -> None:
        """Continue from a saved state so that the remaining epochs match an uninterrupted run bitwise."""
        self.network.load_state_dict(network_state)
        optimizer.lr = self.config.learning_rate
        self.optimizer = optimizer
        self.rng.bit_generator.state = rng_state
        self.history = history
        self.epoch = epoch
        self.best_state = best_state
        self.best_epoch = best_epoch
        self.best_val_acc = best_val_acc

    def baseline(self) -> Tuple[float, float]:
        """Validation loss and accuracy before any update."""
        loss, accuracy = evaluate_split(self.network, self.validation.tensors, self.validation.class_ids)
        self.history.baseline = (loss, accuracy)
        LOGGER.info(f'epoch 0 baseline: val_loss={loss:.4f} val_acc={accuracy:.4f}')
        return loss, accuracy

    def _diverged(self, batch_index: int, loss: float) -> TrainingDivergedError:
        message = f'non-finite training loss {loss} in epoch {self.epoch + 1}, batch {batch_index}'
        LOGGER.error(message)
        if self.dump_path is not None:
            parameters = self.network.parameters()
            dump = {
                'epoch': self.epoch + 1,
                'batch': batch_index,
                'loss': repr(loss),
                'learning_rate': self.config.learning_rate,
                'optimizer_step': self.optimizer.step,
                'non_finite_parameters': [
                    name for name, value in parameters.items() if not numpy.all(numpy.isfinite(value))
                ],
                'history': [list(row) for row in self.history.rows],
            }
            with open(self.dump_path, 'w', encoding='utf-8') as handle:
                json.dump(dump, handle, indent=2, sort_keys=True)
        return TrainingDivergedError(message, epoch=self.epoch + 1, batch=batch_index, dump=self.dump_path)

    def train_epoch(self) -> Tuple[float, float]:
        """One pass over the shuffled training set; returns the sample-weighted loss and accuracy."""
        order = self.rng.permutation(len(self.train))
        total_loss, correct = 0.0, 0
        for batch_index, indices in enumerate(minibatches(order, self.config.batch_size)):
            labels = self.train.class_ids[indices]
            logits = self.network.forward(self.train.tensors[indices], F.TRAIN)
            loss, logit_grads, probs = F.softmax_nll(logits, labels)
            if not math.isfinite(loss):
                raise self._diverged(batch_index, loss)
            grads = self.network.backward(logit_grads)
            adamw_step(self.network.parameters(), grads, self.optimizer)
            total_loss += loss * len(indices)
            correct += int(numpy.sum(probs.argmax(axis=1) == labels))
        return total_loss / len(self.train), correct / len(self.train)

    def run_epoch(self) -> Tuple[int, float, float, float, float]:
        train_loss, train_acc = self.train_epoch()
        self.epoch += 1
        val_loss, val_acc = evaluate_split(self.network, self.validation.tensors, self.validation.class_ids)
        row = (self.epoch, train_loss, train_acc, val_loss, val_acc)
        self.history.rows.append(row)

        message = (
            f'epoch {self.epoch}/{self.config.epochs}: train_loss={train_loss:.4f} train_acc={train_acc:.4f} '
            f'val_loss={val_loss:.4f} val_acc={val_acc:.4f}'
        )
        if self.epoch_callback is not None:
            test_error = self.epoch_callback(self.epoch, self.network)
            if test_error is not None:
                self.history.test_errors.append(float(test_error))
                message += f' test_mean_error={test_error:.3f} m'
        LOGGER.info(message)

        if val_acc > self.best_val_acc:
            self.best_val_acc = val_acc
            self.best_epoch = self.epoch
            self.best_state = self.network.state_dict()
        return row

    def run(self, until: Optional[int] = None) -> TrainingResult:
        """Train up to epoch ``until`` (default: the configured number of epochs)."""
        until = self.config.epochs if until is None else min(until, self.config.epochs)
        if self.epoch == 0 and self.history.baseline is None:
            self.baseline()
        LOGGER.info(
            f'training {self.network.n_parameters} parameters with lr={self.config.learning_rate:g} '
            f'weight_decay={self.config.weight_decay:g} batch_size={self.config.batch_size}'
        )
        while self.epoch < until:
            self.run_epoch()
        return TrainingResult(self.history, self.best_state, self.best_epoch, self.best_val_acc)
