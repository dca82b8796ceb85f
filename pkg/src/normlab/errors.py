"""Exception hierarchy shared by all normlab modules."""


class NormLabError(Exception):
    """Base class for every error raised by normlab."""


# function_space
class EmptyGrid(NormLabError):
    pass


class InvalidGrid(NormLabError):
    pass


class NonFiniteValue(NormLabError):
    pass


class GridTooSmall(NormLabError):
    pass


class DegenerateDenominator(NormLabError):
    pass


class TailNotNegligible(NormLabError):
    """A truncated integral omits a head or tail larger than the tolerance."""


class DivergentIntegrand(NormLabError):
    """Local power behaviour at a grid end indicates a non-integrable integrand."""


# inequality_catalog
class UnknownConstant(NormLabError):
    pass


class NonpositiveD(NormLabError):
    pass


class ZeroFunction(NormLabError):
    pass


class WidthTooLarge(NormLabError):
    pass


class BudgetTooSmall(NormLabError):
    pass


# operator_lab
class NotDissipative(NormLabError):
    pass


class NotSymmetric(NormLabError):
    pass


class NotPSD(NormLabError):
    pass


# special_functions
class PoleAtNonpositiveInteger(NormLabError):
    pass


class ArgumentTooLarge(NormLabError):
    pass


class ZeroArgument(NormLabError):
    pass


class UnsupportedOrder(NormLabError):
    pass


# sturm_liouville
class StepUnderflow(NormLabError):
    pass


class CoefficientEvaluationFailure(NormLabError):
    pass


class DiskTooLarge(NormLabError):
    pass


class AngleToleranceTooSmall(NormLabError):
    pass


# bessel_example
class NonConvergentLimit(NormLabError):
    pass


class OnBranchCut(NormLabError):
    pass


class NotInFriedrichsDomain(NormLabError):
    pass


class HypothesisViolated(NormLabError):
    pass


class ProvisoViolated(NormLabError):
    pass


class InvalidParameters(NormLabError):
    pass
