"""Exception hierarchy.

Every error carries a ``category`` string and an ``exit_code`` so the CLI can
map failures to distinct process exit statuses without inspecting messages.
Code 2 is left to argparse for command-line usage errors.
"""


class RtmError(Exception):
    category = "internal"
    exit_code = 1


class InvalidSpec(RtmError, ValueError):
    category = "invalid_spec"
    exit_code = 3


class ConfigError(RtmError, ValueError):
    category = "config"
    exit_code = 4


class MeshFailure(RtmError):
    category = "mesh"
    exit_code = 5


class MissingProperties(RtmError, KeyError):
    category = "missing_properties"
    exit_code = 6

    def __str__(self):
        return Exception.__str__(self)


class SingularElement(RtmError):
    category = "singular_element"
    exit_code = 7


class SolverDiverged(RtmError):
    category = "solver_diverged"
    exit_code = 8


class NotConverged(RtmError):
    category = "not_converged"
    exit_code = 9


class NotStationary(RtmError):
    category = "not_stationary"
    exit_code = 10


class ResolutionGateFailed(RtmError):
    category = "resolution_gate"
    exit_code = 11


class ZeroWeight(RtmError):
    category = "zero_weight"
    exit_code = 12


class SchemaMismatch(RtmError):
    category = "schema_mismatch"
    exit_code = 13


class ValidationError(RtmError, ValueError):
    category = "validation"
    exit_code = 14


class IOFailure(RtmError, OSError):
    category = "io"
    exit_code = 15


class GroupUndefined(RtmError, ValueError):
    category = "group_undefined"
    exit_code = 16


class DegenerateTraining(RtmError):
    category = "degenerate_training"
    exit_code = 17


class DimensionMismatch(RtmError, ValueError):
    category = "dimension_mismatch"
    exit_code = 18


class LengthMismatch(RtmError, ValueError):
    category = "length_mismatch"
    exit_code = 19


class UndefinedMetric(RtmError):
    category = "undefined_metric"
    exit_code = 20


class SimulationFailure(RtmError):
    """A per-patient simulation failed; ``patient_id`` identifies which one."""

    category = "simulation"
    exit_code = 21

    def __init__(self, patient_id, cause):
        super().__init__(f"patient {patient_id}: {cause}")
        self.patient_id = patient_id
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.patient_id, self.cause))


EXIT_CODES = {
    cls.category: cls.exit_code
    for cls in (
        RtmError, InvalidSpec, ConfigError, MeshFailure, MissingProperties,
        SingularElement, SolverDiverged, NotConverged, NotStationary,
        ResolutionGateFailed, ZeroWeight, SchemaMismatch, ValidationError,
        IOFailure, GroupUndefined, DegenerateTraining, DimensionMismatch,
        LengthMismatch, UndefinedMetric, SimulationFailure,
    )
}
