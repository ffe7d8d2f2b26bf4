# -*- coding: utf-8 -*-
"""Real-valued CSI tensors, labeled sample generation, splitting and the dataset file."""
from .generation import (
    FingerprintDataset, LabeledSample, Purpose, SampleSet, TestRecord, TestSet, build_dataset, generate_reference_set,
    generate_test_set, sample_rng, sample_snrs, split
)
from .storage import load_dataset, load_dataset_provenance, save_dataset
from .tensors import from_real_tensor, to_real_tensor

__all__ = (
    'FingerprintDataset', 'LabeledSample', 'Purpose', 'SampleSet', 'TestRecord', 'TestSet', 'build_dataset',
    'from_real_tensor', 'generate_reference_set', 'generate_test_set', 'load_dataset', 'load_dataset_provenance',
    'sample_rng', 'sample_snrs', 'save_dataset', 'split', 'to_real_tensor'
)
