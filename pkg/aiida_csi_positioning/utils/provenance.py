# -*- coding: utf-8 -*-
"""Configuration hashes and artifact digests forming the provenance chain of a run.

Every stage hashes the configuration sections it depends on. Each artifact stores that hash together with the digest
of the artifact it was derived from, so ``verify`` can recompute the whole chain from the configuration and the files.
"""
import hashlib
from typing import Dict, Optional

from aiida.common.hashing import chunked_file_hash, make_hash

SCENE_SECTIONS = ('scene', 'array', 'buildings', 'reference_grid', 'reference_points', 'test_points')

STAGE_SECTIONS = {
    'scene': SCENE_SECTIONS,
    'dataset': SCENE_SECTIONS + ('beams', 'dataset'),
    'train': SCENE_SECTIONS + ('beams', 'dataset', 'network', 'training'),
    'eval': SCENE_SECTIONS + ('beams', 'dataset', 'network', 'training', 'positioning'),
}

STAGES = tuple(STAGE_SECTIONS)


def sections_hash(sections: Dict[str, Dict[str, str]], names) -> str:
    """Hash the named sections of a configuration; missing sections hash as empty."""
    selected = {name: {key: str(value) for key, value in sections.get(name, {}).items()} for name in names}
    return make_hash(selected)


def stage_hash(sections: Dict[str, Dict[str, str]], stage: str) -> str:
    """Hash of the configuration a pipeline stage depends on."""
    try:
        names = STAGE_SECTIONS[stage]
    except KeyError:
        raise ValueError(f'unknown stage {stage!r}, expected one of {STAGES}')
    return sections_hash(sections, names)


def digest_bytes(data: bytes) -> str:
    """sha256 hex digest of ``data``."""
    return hashlib.sha256(data).hexdigest()


def digest_file(path) -> str:
    """sha256 hex digest of the file at ``path``."""
    with open(path, 'rb') as handle:
        return chunked_file_hash(handle, hashlib.sha256)


def make_provenance(stage: str, config_hash: str, parent: Optional[str] = None, seeds: Optional[dict] = None) -> dict:
    """Provenance record embedded into an artifact."""
    record = {'stage': stage, 'config_hash': config_hash, 'parent': parent or ''}
    for key, value in (seeds or {}).items():
        record[key] = int(value)
    return record
