"""Exceptions raised by fluxqec.

Every exception derives from FluxQecError, which is itself a ValueError so
that callers catching ValueError keep working. The ``exit_code`` class
attribute is what the command line returns when the error is not caught.
"""


class FluxQecError(ValueError):
    "Base class for all fluxqec errors."

    exit_code = 1


class ConfigError(FluxQecError):
    "Experiment configuration is malformed or incomplete."

    exit_code = 2


class PhysicsError(FluxQecError):
    "The simulated device left the regime where our models are valid."

    exit_code = 3


class LabelingError(PhysicsError):
    """Could not match eigenvectors to computational bitstrings.

    :param bitstring:  The label that matched zero or several eigenvectors.
    """

    def __init__(self, msg: str, bitstring: str):
        super().__init__(msg)
        self.bitstring = bitstring


class LeakageError(PhysicsError):
    "Too much population left the computational subspace."

    def __init__(self, msg: str, p_leak: float):
        super().__init__(msg)
        self.p_leak = p_leak


class NumericalError(FluxQecError):
    "A numerical procedure failed or produced unusable output."

    exit_code = 4


class ConvergenceError(NumericalError):
    "Basis truncation did not converge."


class StabilityError(NumericalError):
    "Norm drift during time evolution exceeded tolerance."


class FidelityOverflowError(NumericalError):
    "Fidelity objective would take the log of a non-positive number."


class GraphConstructionError(NumericalError):
    "A single fault excited more detectors than a graph edge can hold."


class DecoderError(NumericalError):
    "Decoder output does not annihilate the syndrome."


class InfeasibleSizeError(NumericalError):
    "Problem is too large for the requested dense or exhaustive method."


class InvalidRateError(NumericalError):
    "A probability or rate fell outside its valid range."


class StaleCoefficientsError(NumericalError):
    "Cached finite-difference coefficients belong to another operating point."


class RejectedStepError(NumericalError):
    "A parameter update would leave the valid parameter domain."


class InputCorruptionError(NumericalError):
    "Syndrome is inconsistent with the assumed noise model."
