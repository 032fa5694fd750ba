"""Qualimeter: hierarchical quality models from declaration to evaluation report.

Models are written in QMDL and checked against derivation rules.  Leaf
measurements roll up the weighted characteristic tree and are judged against
four-level thresholds; the three-phase measurement process turns this into
plans, record stores and reports.  Model variants can be compared by their
polymorphism degree.
"""

from .aggregation import ScoredNode, aggregate, dispersion, rollup
from .diversity import ModelPopulation, PopulationMember, model_distance, polymorphism_degree
from .kernels import BACKEND
from .metrics import (
    Direction,
    LinearNormalization,
    MetricSpec,
    Scale,
    ThresholdSet,
    Verdict,
    VerdictLevel,
    admissible_stats,
    evaluate_thresholds,
    normalize_value,
    validate_thresholds,
)
from .model import (
    AssessmentMethod,
    Characteristic,
    InformationSource,
    Organization,
    Purpose,
    QualityModel,
    build_model,
    model_paths,
    normalize_weights,
    purpose_capabilities,
    tree_height,
)
from .process import (
    EvaluationPlan,
    EvaluationReport,
    MeasurementContext,
    MeasurementRecord,
    RecordStore,
    execute_cycle,
    ingest,
    init_phase,
    iso25040_coverage,
    plan_phase,
    predict_trend,
)
from .qmdl import parse_qmdl, serialize_qmdl
from .rules import check, default_ruleset

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AssessmentMethod",
    "Characteristic",
    "Direction",
    "EvaluationPlan",
    "EvaluationReport",
    "InformationSource",
    "LinearNormalization",
    "MeasurementContext",
    "MeasurementRecord",
    "MetricSpec",
    "ModelPopulation",
    "Organization",
    "PopulationMember",
    "Purpose",
    "QualityModel",
    "RecordStore",
    "Scale",
    "ScoredNode",
    "ThresholdSet",
    "Verdict",
    "VerdictLevel",
    "admissible_stats",
    "aggregate",
    "build_model",
    "check",
    "default_ruleset",
    "dispersion",
    "evaluate_thresholds",
    "execute_cycle",
    "ingest",
    "init_phase",
    "iso25040_coverage",
    "model_distance",
    "model_paths",
    "normalize_value",
    "normalize_weights",
    "parse_qmdl",
    "plan_phase",
    "polymorphism_degree",
    "predict_trend",
    "purpose_capabilities",
    "rollup",
    "serialize_qmdl",
    "tree_height",
    "validate_thresholds",
]
