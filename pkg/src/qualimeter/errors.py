"""Exception hierarchy shared by all qualimeter modules."""

from __future__ import annotations


class QualimeterError(Exception):
    """Base class for every error raised by qualimeter."""


# -- model construction -----------------------------------------------------


class ModelError(QualimeterError, ValueError):
    """A quality model violates a structural invariant.

    ``path`` names the offending characteristic (slash-joined from the root's
    children) when the error can be located, ``"@model"`` for model-level
    problems.
    """

    def __init__(self, message: str, path: str | None = None) -> None:
        super().__init__(message)
        self.path = path


class EmptyTree(ModelError):
    pass


class DuplicateSiblingName(ModelError):
    pass


class NonPositiveWeight(ModelError):
    pass


class MissingAttribute(ModelError):
    pass


class InvalidName(ModelError):
    pass


class MixedNode(ModelError):
    """A characteristic declares both children and metrics."""


class UnsupportedOrganization(QualimeterError):
    """Only hierarchical models can be evaluated or compared."""


# -- metrics & thresholds ---------------------------------------------------


class MetricError(QualimeterError, ValueError):
    pass


class NominalNormalization(MetricError):
    pass


class DegenerateNormalization(MetricError):
    pass


class DirectionMismatch(MetricError):
    pass


class ThresholdError(MetricError):
    pass


class ThresholdOrder(ThresholdError):
    pass


class ThresholdRange(ThresholdError):
    pass


class IndicatorRange(MetricError):
    pass


# -- aggregation ------------------------------------------------------------


class AggregationError(QualimeterError, ValueError):
    pass


class EmptyInput(AggregationError):
    pass


class LengthMismatch(AggregationError):
    pass


class UnknownOperator(AggregationError):
    pass


class UnknownLeafPath(AggregationError):
    pass


# -- rules ------------------------------------------------------------------


class RulesetError(QualimeterError, ValueError):
    pass


class UnknownRuleId(RulesetError):
    pass


class ModelRuleViolations(QualimeterError):
    """Raised when a model with Error-severity violations is used for evaluation."""

    def __init__(self, violations) -> None:
        self.violations = list(violations)
        errors = [v for v in self.violations if v.severity.value == "error"]
        summary = "; ".join(f"{v.rule_id} {v.path}: {v.message}" for v in errors[:5])
        super().__init__(f"{len(errors)} rule error(s): {summary}")


# -- diversity --------------------------------------------------------------


class PopulationError(QualimeterError, ValueError):
    pass


# -- process ----------------------------------------------------------------


class ProcessError(QualimeterError):
    pass


class NoObjectives(ProcessError, ValueError):
    pass


class DuplicateObjectiveId(ProcessError, ValueError):
    pass


class InvalidFrequency(ProcessError, ValueError):
    pass


class ModelHashMismatch(ProcessError):
    pass


class StoreUnwritable(ProcessError, OSError):
    pass


class InsufficientHistory(ProcessError, ValueError):
    pass


class PlanError(ProcessError, ValueError):
    pass
