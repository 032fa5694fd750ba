import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qualimeter.errors import DegenerateNormalization, DirectionMismatch, NominalNormalization, ThresholdOrder, ThresholdRange
from qualimeter.metrics import (
    Direction,
    LinearNormalization,
    MetricSpec,
    ReferenceComparison,
    Scale,
    ThresholdSet,
    VerdictLevel,
    admissible_stats,
    evaluate_thresholds,
    normalize_value,
    validate_thresholds,
)

DEFECT_DENSITY = MetricSpec("defect-density", Scale.RATIO, "defects/kloc", Direction.LOWER_BETTER, LinearNormalization(5.0, 0.0))


@pytest.mark.parametrize("raw,expected", [(5.0, 0.0), (2.5, 0.5), (7.0, 0.0), (0.0, 1.0), (-3.0, 1.0)])
def test_lower_better_normalization(raw, expected):
    assert normalize_value(DEFECT_DENSITY, raw) == expected


def test_nominal_cannot_be_normalized():
    spec = MetricSpec("colour", Scale.NOMINAL, "", Direction.HIGHER_BETTER, LinearNormalization(0, 1))
    with pytest.raises(NominalNormalization):
        normalize_value(spec, 0.5)


def test_degenerate_and_direction_checks():
    with pytest.raises(DegenerateNormalization):
        LinearNormalization(1.0, 1.0)
    with pytest.raises(DirectionMismatch):
        MetricSpec("x", Scale.RATIO, "", Direction.HIGHER_BETTER, LinearNormalization(5.0, 0.0))


def test_threshold_validation_examples():
    validate_thresholds(ThresholdSet(0.2, 0.4, 0.8, 0.6))
    with pytest.raises(ThresholdOrder):
        validate_thresholds(ThresholdSet(0.5, 0.4, 0.8))
    with pytest.raises(ThresholdRange):
        validate_thresholds(ThresholdSet(0.2, 0.4, 1.2))
    with pytest.raises(ThresholdOrder):
        validate_thresholds(ThresholdSet(0.4, 0.4, 0.8))
    validate_thresholds(ThresholdSet(0.2, 0.5, 0.5))


def test_threshold_examples():
    t = ThresholdSet(0.2, 0.4, 0.8, 0.6)
    v = evaluate_thresholds(t, 0.5)
    assert v.level is VerdictLevel.ACCEPTED and v.vs_reference is ReferenceComparison.BELOW
    assert evaluate_thresholds(t, 0.2).level is VerdictLevel.REJECTED
    assert evaluate_thresholds(t, 0.8).level is VerdictLevel.TARGET_MET
    assert evaluate_thresholds(t, 0.3).level is VerdictLevel.MARGINAL
    assert evaluate_thresholds(t, 0.6).vs_reference is ReferenceComparison.AT_OR_ABOVE
    assert evaluate_thresholds(ThresholdSet(0.2, 0.4, 0.8), 0.5).vs_reference is None


def test_verdict_labels():
    assert [lv.label for lv in VerdictLevel] == ["rejected", "marginal", "accepted", "target-met"]


def test_admissible_stats_chain():
    assert admissible_stats(Scale.NOMINAL) == {"mode", "count"}
    ordinal = admissible_stats(Scale.ORDINAL)
    assert "median" in ordinal and "arithmetic-mean" not in ordinal
    assert admissible_stats(Scale.RATIO) >= admissible_stats(Scale.INTERVAL) >= ordinal
    assert admissible_stats(Scale.RATIO) - admissible_stats(Scale.INTERVAL) == {"geometric-mean", "harmonic-mean", "ratio"}


unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def threshold_sets(draw):
    a, b, c = sorted(draw(st.lists(unit, min_size=3, max_size=3)))
    if a == b:
        if b < 1.0:
            b = min(1.0, a + 1e-6)
            c = max(b, c)
        else:
            a = b - 1e-6
    ref = draw(st.one_of(st.none(), unit))
    return ThresholdSet(a, b, c, ref)


@settings(max_examples=300, deadline=None)
@given(threshold_sets(), unit, unit)
def test_verdicts_monotone(t, x, y):
    validate_thresholds(t)
    lo, hi = min(x, y), max(x, y)
    assert evaluate_thresholds(t, lo).level <= evaluate_thresholds(t, hi).level


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), st.floats(allow_nan=False, allow_infinity=False))
def test_normalized_value_in_unit_interval(a, b, raw):
    if a == b:
        return
    direction = Direction.HIGHER_BETTER if b > a else Direction.LOWER_BETTER
    spec = MetricSpec("x", Scale.INTERVAL, "", direction, LinearNormalization(a, b))
    assert 0.0 <= normalize_value(spec, raw) <= 1.0
