# -*- coding: utf-8 -*-
"""Base work chain to run a fingerprint positioning pipeline calculation"""

from aiida.common import AttributeDict
from aiida.engine import BaseRestartWorkChain, ProcessHandlerReport, process_handler, while_
from aiida.orm import Dict, Float, to_aiida_type
from aiida.plugins import CalculationFactory

from aiida_csi_positioning.nn.training import TrainConfig

FingerprintCalculation = CalculationFactory('csi_positioning.pipeline')  # pylint: disable=invalid-name


def reduce_learning_rate(parameters: dict, factor: float = 10.0) -> dict:
    """Copy of the run parameters with ``training.learning_rate`` divided by ``factor``.

    Args:
        parameters (dict): run parameters, section to key-value pairs
        factor (float): divisor, larger than one

    Returns:
        dict: the updated parameters
    """
    if not factor > 1.0:
        raise ValueError(f'the reduction factor must exceed one, got {factor}')
    training = dict(parameters.get('training', {}))
    current = float(training.get('learning_rate', TrainConfig.learning_rate))
    training['learning_rate'] = current / factor
    return dict(parameters, training=training)


class FingerprintBaseWorkChain(BaseRestartWorkChain):
    """Workchain to run a fingerprint positioning calculation with automated error handling and restarts."""

    _process_class = FingerprintCalculation

    #: Learning rates are not reduced below this value.
    _MINIMUM_LEARNING_RATE = 1e-12

    @classmethod
    def define(cls, spec):
        super().define(spec)
        spec.expose_inputs(FingerprintCalculation, namespace='fingerprint')
        spec.input(
            'learning_rate_factor',
            valid_type=Float,
            default=lambda: Float(10.0),
            serializer=to_aiida_type,
            help='divisor applied to the learning rate after a diverged training'
        )
        spec.outline(
            cls.setup,
            while_(cls.should_run_process)(
                cls.run_process,
                cls.inspect_process,
            ),
            cls.results,
        )
        spec.expose_outputs(FingerprintCalculation)
        spec.exit_code(
            320,
            'ERROR_LEARNING_RATE_EXHAUSTED',
            message='The training kept diverging down to the smallest allowed learning rate.'
        )

    def setup(self):
        """Call the `setup` of the `BaseRestartWorkChain` and then create the inputs dictionary in `self.ctx.inputs`.
        This `self.ctx.inputs` dictionary will be used by the `BaseRestartWorkChain` to submit the calculations in the
        internal loop."""

        super().setup()

        self.ctx.inputs = AttributeDict(self.exposed_inputs(FingerprintCalculation, 'fingerprint'))

    def report_error_handled(self, calculation, action):
        """Report an action taken for a calculation that has failed.
        This should be called in a registered error handler if its condition is met and an action was taken.
        :param calculation: the failed calculation node
        :param action: a string message with the action taken"""

        arguments = [calculation.process_label, calculation.pk, calculation.exit_status, calculation.exit_message]
        self.report('{}<{}> failed with exit status {}: {}'.format(*arguments))
        self.report('Action taken: {}'.format(action))

    @process_handler(priority=500, exit_codes=[FingerprintCalculation.exit_codes.ERROR_TRAINING_DIVERGED])
    def handle_training_diverged(self, calculation):
        """Reduce the learning rate and restart the training from scratch."""
        factor = self.inputs.learning_rate_factor.value
        parameters = reduce_learning_rate(self.ctx.inputs.parameters.get_dict(), factor)
        learning_rate = parameters['training']['learning_rate']

        if learning_rate < self._MINIMUM_LEARNING_RATE:
            self.report_error_handled(calculation, 'learning rate exhausted, aborting')
            return ProcessHandlerReport(True, self.exit_codes.ERROR_LEARNING_RATE_EXHAUSTED)

        self.ctx.inputs.parameters = Dict(parameters)
        self.ctx.inputs.pop('checkpoints', None)
        self.report_error_handled(calculation, f'restarting from scratch with learning rate {learning_rate:g}')
        return ProcessHandlerReport(True)


#EOF
