# -*- coding: utf-8 -*-
"""Geometric channel simulation: scenes, propagation paths, beam codebooks and beamformed CSI."""
from .beams import BeamCodebook, array_response, array_responses, build_codebook
from .csi import (
    NO_SIGNAL, LinkBudget, add_noise, beam_snrs, beamformed_csi, best_beam_snr, calibrate_noise, snr_per_beam
)
from .geometry import SPEED_OF_LIGHT, ArrayGeometry, Building, Path, PathSet, Scene, Wall, is_los, trace_paths
from .scene_file import read_scene, scene_from_sections, scene_to_sections, write_scene

__all__ = (
    'ArrayGeometry', 'BeamCodebook', 'Building', 'LinkBudget', 'NO_SIGNAL', 'Path', 'PathSet', 'SPEED_OF_LIGHT',
    'Scene', 'Wall', 'add_noise', 'array_response', 'array_responses', 'beam_snrs', 'beamformed_csi', 'best_beam_snr',
    'build_codebook', 'calibrate_noise', 'is_los', 'read_scene', 'scene_from_sections', 'scene_to_sections',
    'snr_per_beam', 'trace_paths', 'write_scene'
)
