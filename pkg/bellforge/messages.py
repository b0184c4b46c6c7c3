from string import Template

"""
Declares the fixed messages or templates to be used in bellforge package.
"""

TEMPLATE_INVALID_PARAMETER = Template('Invalid $name: $value ($reason)')
TEMPLATE_SHAPE_MISMATCH = Template(
    'Measurement setup has $parties parties but the state has $qubits qubits')
TEMPLATE_CAPACITY_EXCEEDED = Template(
    'Scenario $shape needs $strategies deterministic strategies, above the cap of $cap')
TEMPLATE_LP_INFEASIBLE = Template('Linear program is infeasible: $detail')
TEMPLATE_LP_NOT_CONVERGED = Template(
    'Linear program did not converge within $iterations iterations')
TEMPLATE_LP_FAILED = Template('Linear program failed with status $status: $detail')
TEMPLATE_FAMILY_NOT_EMBEDDABLE = Template(
    'Family $family needs settings $needed but the scenario has $available')
TEMPLATE_ACCUMULATOR_MISMATCH = Template(
    'Cannot merge accumulators for $left and $right')
TEMPLATE_PARTIAL_RESULT = Template(
    'Trial cap of $cap reached with $violations of $required violations collected')
TEMPLATE_CHUNK_ERROR = Template('Error encountered in chunk $chunk of $experiment.')
MESSAGE_NO_VIOLATIONS = 'No violating trials were observed'
