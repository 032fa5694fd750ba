import dataclasses

import pytest

from qualimeter.errors import RulesetError, UnknownRuleId
from qualimeter.metrics import Scale
from qualimeter.model import Characteristic, build_model
from qualimeter.rules import (
    Rule,
    Severity,
    apply_overrides,
    check,
    default_ruleset,
    extended_ruleset,
    has_errors,
    load_overrides,
)
from treegen import attrs, leaf, metric, node


def chain(length: int) -> Characteristic:
    """Root plus ``length - 1`` single-child descendants, the last one a leaf."""
    cur = leaf(f"c{length - 1}")
    for i in range(length - 2, -1, -1):
        cur = node(f"c{i}", 1, cur)
    return cur


def test_default_ruleset_ids():
    rs = default_ruleset()
    assert [r.id for r in rs] == ["R1", "R2", "R3", "R4", "R5", "R6"]
    assert rs[0].params == {"max_height": 5}
    assert [r.id for r in extended_ruleset()][-1] == "M1"


def test_conforming_two_level_model():
    m = build_model(attrs(), node("q", 1, node("a", 1, leaf("x"), leaf("y")), node("b", 1, leaf("z"), leaf("w"))))
    assert check(m, default_ruleset()) == []
    assert check(m, extended_ruleset()) == []


def test_chain_violates_max_height_once_at_deepest_path():
    m = build_model(attrs(), chain(8))
    r1 = [v for v in check(m, default_ruleset()) if v.rule_id == "R1"]
    assert len(r1) == 1
    assert r1[0].path == "c1/c2/c3/c4/c5/c6/c7"
    assert r1[0].severity is Severity.ERROR


def test_bare_leaf_under_assessment_is_error():
    m = build_model(attrs(), node("q", 1, leaf("a", 1, []), leaf("b")))
    r3 = [v for v in check(m, default_ruleset()) if v.rule_id == "R3"]
    assert [(v.path, v.severity) for v in r3] == [("a", Severity.ERROR)]


def test_bare_leaf_allowed_for_definition_purpose():
    m = build_model(attrs(purpose="definition"), node("q", 1, leaf("a", 1, []), leaf("b", 1, [])))
    assert check(m, default_ruleset()) == []


def test_single_child_warns_division_arity():
    m = build_model(attrs(), node("q", 1, node("a", 1, leaf("only")), leaf("b")))
    r4 = [v for v in check(m, default_ruleset()) if v.rule_id == "R4"]
    assert [(v.path, v.severity) for v in r4] == [("a", Severity.WARNING)]
    assert not has_errors(r4)


def test_wide_node_warns():
    m = build_model(attrs(), node("q", 1, *(leaf(f"l{i}") for i in range(10))))
    assert [v.rule_id for v in check(m, default_ruleset())] == ["R4"]


def test_unnormalized_weights_violate_sibling_sum():
    m = build_model(attrs(), node("q", 1, leaf("a"), leaf("b")))
    skewed = dataclasses.replace(m.root, children=(dataclasses.replace(m.root.children[0], weight=0.9), m.root.children[1]))
    bad = dataclasses.replace(m, root=skewed)
    r2 = [v for v in check(bad, default_ruleset()) if v.rule_id == "R2"]
    assert len(r2) == 1 and r2[0].path == "@model"


def test_duplicate_paths_violate_unique_paths():
    m = build_model(attrs(), node("q", 1, leaf("a"), leaf("b")))
    dup = dataclasses.replace(m, root=dataclasses.replace(m.root, children=(m.root.children[0], m.root.children[0])))
    assert any(v.rule_id == "R5" for v in check(dup, default_ruleset()))


def test_missing_thresholds_warn():
    m = build_model(attrs(), node("q", 1, leaf("a", 1, [metric(thresholds=None)]), leaf("b")))
    assert [(v.rule_id, v.path) for v in check(m, default_ruleset())] == [("R6", "a")]


def test_median_on_ordinal_passes_but_mean_warns():
    ordinal = [metric(scale=Scale.ORDINAL)]
    tree = node("q", 1, leaf("a", 1, ordinal), leaf("b"))
    ok = build_model(attrs(aggregation="weighted-median"), tree)
    assert check(ok, extended_ruleset()) == []
    bad = build_model(attrs(aggregation="weighted-arithmetic-mean"), tree)
    assert [v.rule_id for v in check(bad, extended_ruleset())] == ["M1"]


def test_check_is_deterministic():
    m = build_model(attrs(), chain(8))
    a = [v.to_dict() for v in check(m, extended_ruleset())]
    b = [v.to_dict() for v in check(m, list(reversed(extended_ruleset())))]
    assert a == b


def test_ruleset_errors():
    m = build_model(attrs(), leaf("q"))
    with pytest.raises(UnknownRuleId):
        check(m, [Rule("R99", "Nope", Severity.ERROR, {})])
    with pytest.raises(RulesetError):
        check(m, default_ruleset() + [default_ruleset()[0]])


def test_overrides():
    rs = apply_overrides(default_ruleset(), load_overrides("# tighter\nR1.max_height=4\nR4.severity = error\n"))
    assert rs[0].params["max_height"] == 4
    assert rs[3].severity is Severity.ERROR
    m = build_model(attrs(), chain(6))
    assert [v.rule_id for v in check(m, rs) if v.severity is Severity.ERROR] == ["R1"] + ["R4"] * 5
    with pytest.raises(RulesetError):
        apply_overrides(default_ruleset(), {"R1.depth": "3"})
    with pytest.raises(RulesetError):
        apply_overrides(default_ruleset(), {"R9.max_height": "3"})
    with pytest.raises(RulesetError):
        apply_overrides(default_ruleset(), {"R1.max_height": "tall"})
    with pytest.raises(RulesetError):
        load_overrides("no equals sign")
