# -*- coding: utf-8 -*-
"""aiida-csi-positioning output parser"""
import io
import json

import numpy as np

from aiida.common import NotExistent
from aiida.engine import ExitCode
from aiida.orm import ArrayData, Dict, SinglefileData
from aiida.parsers import Parser

#: Exit status of the ``csi-positioning`` command mapped to the exit code label of the calculation.
FAILURE_EXIT_CODES = {
    2: 'ERROR_INVALID_CONFIGURATION',
    3: 'ERROR_DATA',
    4: 'ERROR_TRAINING_DIVERGED',
    5: 'ERROR_VERIFICATION',
}


class FingerprintParser(Parser):
    """Parser for the artifacts of a ``csi-positioning pipeline`` run"""

    def parse(self, **kwargs):
        """
        Reads the evaluation summary into ``output_parameters``, the per-epoch metrics (and per-epoch mean test error)
        into ``metrics``, and attaches the best checkpoint and the per-sample error report as files.
        A ``failure.json`` left by the command is mapped onto the matching exit code; metrics written before the
        failure are still attached.
        """
        try:
            out_folder = self.retrieved
        except NotExistent:
            return self.exit_codes.ERROR_NO_RETRIEVED_FOLDER

        names = out_folder.base.repository.list_object_names()

        metrics = None
        if self._filename('_METRICS_FILE') in names:
            try:
                metrics = self._parse_metrics(names)
            except ValueError:
                return self.exit_codes.ERROR_UNREADABLE_METRICS

        if self._filename('_FAILURE_FILE') in names:
            if metrics is not None:
                self.out('metrics', metrics)
            return self._parse_failure()

        if self._filename('_SUMMARY_FILE') not in names or metrics is None:
            return self.exit_codes.ERROR_MISSING_OUTPUT

        try:
            summary = json.loads(out_folder.base.repository.get_object_content(self._filename('_SUMMARY_FILE')))
        except ValueError:
            return self.exit_codes.ERROR_UNREADABLE_METRICS

        self.out('metrics', metrics)
        self.out('output_parameters', Dict(summary))

        for label, attribute in (('checkpoint', '_BEST_CHECKPOINT'), ('error_report', '_ERRORS_FILE')):
            filename = self._filename(attribute)
            if filename in names:
                content = out_folder.base.repository.get_object_content(filename, mode='rb')
                self.out(label, SinglefileData(io.BytesIO(content), filename=filename))

        return ExitCode(0)

    def _filename(self, attribute: str) -> str:
        """Name of an artifact as declared on the calculation class."""
        return getattr(self.node.process_class, attribute)

    def _read_table(self, filename: str) -> np.ndarray:
        """Comma separated table with one header line, as a two-dimensional float array."""
        lines = self.retrieved.base.repository.get_object_content(filename).splitlines()
        if not lines:
            raise ValueError(f'{filename} is empty')
        rows = [[float(value) for value in line.split(',')] for line in lines[1:] if line.strip()]
        if not rows:
            return np.zeros((0, len(lines[0].split(','))))
        return np.array(rows)

    def _parse_metrics(self, names) -> ArrayData:
        metrics = ArrayData()
        history = self._read_table(self._filename('_METRICS_FILE'))
        if history.ndim != 2 or history.shape[1] != 5:
            raise ValueError(f'metrics table has shape {history.shape}')
        metrics.set_array('history', history)
        if self._filename('_TEST_ERROR_FILE') in names:
            metrics.set_array('test_error', self._read_table(self._filename('_TEST_ERROR_FILE')))
        return metrics

    def _parse_failure(self) -> ExitCode:
        content = self.retrieved.base.repository.get_object_content(self._filename('_FAILURE_FILE'))
        try:
            failure = json.loads(content)
            label = FAILURE_EXIT_CODES[int(failure['exit_status'])]
        except (ValueError, KeyError, TypeError):
            return self.exit_codes.ERROR_MISSING_OUTPUT
        self.logger.error(f"{failure.get('stage', 'run')} failed: {failure.get('message', '')}")
        return getattr(self.exit_codes, label)


#EOF
