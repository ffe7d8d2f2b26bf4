# -*- coding: utf-8 -*-
"""aiida-csi-positioning plugin -- pipeline calculation"""

from aiida.common import CalcInfo, CodeInfo
from aiida.common.folders import Folder
from aiida.engine import CalcJob
from aiida.orm import ArrayData, Dict, SinglefileData


def validate_parameters(value, _):
    """Validate the ``parameters`` input: sections of plain key-value pairs, no external scene file."""
    if value is None:
        return None
    parameters = value.get_dict()
    for section, entries in parameters.items():
        if not isinstance(entries, dict):
            return f'section `{section}` must be a dictionary of key-value pairs'
    if parameters.get('run', {}).get('scene_file'):
        return 'the scene must be given inline: `run.scene_file` is not supported'
    return None


class FingerprintCalculation(CalcJob):
    """
    Runs the complete fingerprint positioning pipeline, scene to evaluation, through the ``csi-positioning``
    executable. The run configuration is rendered from the ``parameters`` input; all artifacts are written to the
    working directory and the small ones are retrieved.
    """

    # Defaults
    _INPUT_FILE = 'aiida.ini'
    _OUTPUT_FILE = 'aiida.out'
    _PARSER = 'csi_positioning.pipeline'
    _METRICS_FILE = 'metrics.csv'
    _TEST_ERROR_FILE = 'test_error.csv'
    _ERRORS_FILE = 'errors.csv'
    _SUMMARY_FILE = 'summary.json'
    _REPORT_FILE = 'report.txt'
    _SWEEP_FILE = 'r_sweep.csv'
    _SCENE_FILE = 'scene.ini'
    _BEST_CHECKPOINT = 'checkpoint_best.bin'
    _LAST_CHECKPOINT = 'checkpoint_last.bin'
    _FAILURE_FILE = 'failure.json'
    _DIVERGENCE_FILE = 'divergence.json'

    @classmethod
    def define(cls, spec):
        super().define(spec)

        # Input parameters
        spec.input(
            'parameters',
            valid_type=Dict,
            required=True,
            validator=validate_parameters,
            help='Run configuration: mapping of section name to key-value pairs.'
        )
        spec.input('settings', valid_type=Dict, required=False, help='additional input parameters')
        spec.input_namespace(
            'checkpoints',
            valid_type=SinglefileData,
            required=False,
            help='checkpoints `last` (and `best`) of an interrupted run to resume the training from',
            dynamic=True
        )

        # Specify default parser
        spec.input('metadata.options.parser_name', valid_type=str, default=cls._PARSER, non_db=True)

        # Specify default input file
        spec.input('metadata.options.input_filename', valid_type=str, default=cls._INPUT_FILE)

        # Specify default output file
        spec.input('metadata.options.output_filename', valid_type=str, default=cls._OUTPUT_FILE)

        spec.input('metadata.options.withmpi', valid_type=bool, default=False)

        # Exit codes
        spec.exit_code(300, 'ERROR_MISSING_OUTPUT', message='The summary or the metrics file was not retrieved.')
        spec.exit_code(301, 'ERROR_UNREADABLE_METRICS', message='The metrics or summary files could not be parsed.')
        spec.exit_code(310, 'ERROR_INVALID_CONFIGURATION', message='The run configuration was rejected.')
        spec.exit_code(311, 'ERROR_DATA', message='A data file was missing, corrupted or inconsistent.')
        spec.exit_code(312, 'ERROR_TRAINING_DIVERGED', message='The training loss became non-finite.')
        spec.exit_code(313, 'ERROR_VERIFICATION', message='The provenance chain of the artifacts is broken.')

        # Output parameters
        spec.output('output_parameters', valid_type=Dict, required=True, help='summary of the evaluation')
        spec.output('metrics', valid_type=ArrayData, required=False, help='per-epoch training metrics')
        spec.output('checkpoint', valid_type=SinglefileData, required=False, help='best validation checkpoint')
        spec.output('error_report', valid_type=SinglefileData, required=False, help='per-sample positioning errors')
        spec.default_output_node = 'output_parameters'

    def prepare_for_submission(self, folder: Folder) -> CalcInfo:
        """Create the input files from the input nodes passed to this instance of the `CalcJob`.

        Args:
            folder (Folder): ``AiiDA`` folder to temporarily write files on disk

        Returns:
            CalcInfo: ``AiiDA`` CalcInfo Instance
        """
        from aiida_csi_positioning.utils import FingerprintInput  #pylint: disable=import-outside-toplevel

        settings = self.inputs.settings.get_dict() if 'settings' in self.inputs else {}

        arguments = ['pipeline', self._INPUT_FILE]
        if 'checkpoints' in self.inputs and self.inputs.checkpoints:
            arguments.append('--resume')

        # create code info
        codeinfo = CodeInfo()
        codeinfo.cmdline_params = settings.pop('cmdline', []) + arguments
        codeinfo.stdout_name = self._OUTPUT_FILE
        codeinfo.join_files = True
        codeinfo.code_uuid = self.inputs.code.uuid

        # create calc info
        calcinfo = CalcInfo()
        calcinfo.uuid = self.uuid
        calcinfo.cmdline_params = codeinfo.cmdline_params
        calcinfo.stdout_name = self._OUTPUT_FILE
        calcinfo.codes_info = [codeinfo]

        # checkpoints to resume from
        calcinfo.local_copy_list = []
        if 'checkpoints' in self.inputs:
            targets = {'last': self._LAST_CHECKPOINT, 'best': self._BEST_CHECKPOINT}
            for name, obj in self.inputs.checkpoints.items():
                calcinfo.local_copy_list.append((obj.uuid, obj.filename, targets.get(name, obj.filename)))

        # Retrieve list
        calcinfo.retrieve_list = [
            self._OUTPUT_FILE, self._METRICS_FILE, self._TEST_ERROR_FILE, self._ERRORS_FILE, self._SUMMARY_FILE,
            self._REPORT_FILE, self._SWEEP_FILE, self._SCENE_FILE, self._BEST_CHECKPOINT, self._LAST_CHECKPOINT,
            self._FAILURE_FILE, self._DIVERGENCE_FILE
        ]
        calcinfo.retrieve_list += settings.pop('additional_retrieve_list', [])

        # create the run configuration, artifacts go to the working directory
        parameters = self.inputs.parameters.get_dict()
        parameters['run'] = dict(parameters.get('run', {}), output_dir='.')
        inp = FingerprintInput(parameters, header=f'calculation {self.uuid}')

        with open(folder.get_abs_path(self._INPUT_FILE), mode='w', encoding='utf-8') as fobj:
            fobj.write(inp.render())

        return calcinfo


#EOF
