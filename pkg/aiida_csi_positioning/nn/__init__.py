# -*- coding: utf-8 -*-
"""From-scratch convolutional classifier: kernels, layers, network, AdamW, training and checkpoints."""
from .checkpoint import (
    Checkpoint, apply_checkpoint, load_checkpoint, make_checkpoint, restore_network, save_checkpoint
)
from .functional import EVAL, TRAIN, nll_loss, softmax, softmax_nll
from .network import Network, NetworkConfig, flatten_length, trace_shapes
from .optim import AdamWState, adamw_step
from .training import HISTORY_COLUMNS, Trainer, TrainConfig, TrainingHistory, TrainingResult

__all__ = (
    'AdamWState', 'Checkpoint', 'EVAL', 'HISTORY_COLUMNS', 'Network', 'NetworkConfig', 'TRAIN', 'TrainConfig',
    'Trainer', 'TrainingHistory', 'TrainingResult', 'adamw_step', 'apply_checkpoint', 'flatten_length',
    'load_checkpoint', 'make_checkpoint', 'nll_loss', 'restore_network', 'save_checkpoint', 'softmax', 'softmax_nll',
    'trace_shapes'
)
