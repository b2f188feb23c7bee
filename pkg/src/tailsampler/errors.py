"""Exception hierarchy.

Errors fall in two families so the CLI can map them onto exit codes:
``InputError`` (bad files, bad configuration) and ``SamplerError``
(failures while sampling, training, or decomposing).
"""


class TailSamplerError(Exception):
    """Base class for every error raised by this package."""


class InputError(TailSamplerError):
    pass


class SamplerError(TailSamplerError):
    pass


# -- manifests ---------------------------------------------------------------

class MalformedRow(InputError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DuplicateId(InputError):
    pass


class ProbabilityOutOfRange(InputError, ValueError):
    pass


class EmptyManifest(InputError):
    pass


class MissingProbability(InputError):
    pass


class EmptyClass(InputError):
    pass


class IoFailure(InputError, OSError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class DegenerateConfig(InputError, ValueError):
    pass


# -- numerics ----------------------------------------------------------------

class NotNormalized(TailSamplerError, ValueError):
    pass


class OutOfRange(TailSamplerError, ValueError):
    pass


class EmptyInput(TailSamplerError, ValueError):
    pass


class DimensionMismatch(TailSamplerError, ValueError):
    pass


class ConfigMismatch(TailSamplerError, ValueError):
    pass


class EigenvalueOutOfBound(SamplerError):
    pass


class DecompositionFailure(SamplerError):
    pass


class SingularPartition(SamplerError):
    pass


class GroundSetTooLarge(SamplerError):
    pass


class OrthogonalizationCollapse(SamplerError):
    pass


class KTooLarge(SamplerError, ValueError):
    pass


class DegenerateSupport(SamplerError):
    pass


class ClassTooSmall(SamplerError):
    pass


class NonFiniteLoss(SamplerError, FloatingPointError):
    pass
