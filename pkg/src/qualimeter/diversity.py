"""Polymorphism degree of a population of quality models.

The degree is the frequency-weighted mean pairwise distance over a
population, summed over ordered pairs with a zero diagonal, in the manner of
nucleotide diversity::

    pi = sum_i sum_j x_i * x_j * d(i, j)

Frequencies ``x_i`` are user-supplied shares of each model variant in the
population under study.  Two distances are provided, both bounded in [0, 1]:

``structural``
    Jaccard distance between the sets of characteristic paths.
``weighted``
    Mean absolute difference of path weights (product of the weights from the
    root) over the union of paths, a path absent from one model counting as
    weight 0 there.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import kernels
from .errors import PopulationError, UnsupportedOrganization
from .model import Organization, QualityModel, join_path, model_paths

__all__ = [
    "MODES",
    "PopulationMember",
    "ModelPopulation",
    "model_distance",
    "distance_matrix",
    "polymorphism_degree",
    "parse_population",
]

MODES = ("structural", "weighted")
FREQUENCY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PopulationMember:
    model_id: str
    frequency: float
    model: QualityModel


@dataclass(frozen=True)
class ModelPopulation:
    members: tuple[PopulationMember, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise PopulationError("population has no members")
        ids = [m.model_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise PopulationError(f"duplicate member ids: {sorted({i for i in ids if ids.count(i) > 1})}")
        total = 0.0
        for m in self.members:
            if not 0.0 <= m.frequency <= 1.0:
                raise PopulationError(f"frequency of {m.model_id!r} is {m.frequency}, outside [0, 1]")
            total += m.frequency
        if abs(total - 1.0) > FREQUENCY_TOLERANCE:
            raise PopulationError(f"frequencies sum to {total!r}, expected 1")

    @classmethod
    def from_weights(cls, entries: Sequence[tuple[str, float, QualityModel]]) -> ModelPopulation:
        """Build a population after dividing raw frequencies by their sum."""
        total = sum(f for _, f, _ in entries)
        if not entries or total <= 0:
            raise PopulationError("population frequencies must have a positive sum")
        return cls(tuple(PopulationMember(i, f / total, m) for i, f, m in entries))


def _require_hierarchical(model: QualityModel) -> None:
    if model.organization is not Organization.HIERARCHICAL:
        raise UnsupportedOrganization(
            f"model {model.id!r} uses {model.organization.value} organization; distances need hierarchical models"
        )


def path_weights(model: QualityModel) -> dict[str, float]:
    """Product of weights from the root's children down to each node."""
    out: dict[str, float] = {}
    stack = [(c, c.name, c.weight) for c in reversed(model.root.children)]
    while stack:
        node, path, w = stack.pop()
        out[path] = w
        stack.extend((c, join_path(path, c.name), w * c.weight) for c in reversed(node.children))
    return out


def model_distance(a: QualityModel, b: QualityModel, mode: str = "structural") -> float:
    _require_hierarchical(a)
    _require_hierarchical(b)
    if mode == "structural":
        pa, pb = model_paths(a), model_paths(b)
        union = pa | pb
        if not union:
            return 0.0
        return 1.0 - len(pa & pb) / len(union)
    if mode == "weighted":
        wa, wb = path_weights(a), path_weights(b)
        union = sorted(wa.keys() | wb.keys())
        if not union:
            return 0.0
        acc = 0.0
        for p in union:
            acc += abs(wa.get(p, 0.0) - wb.get(p, 0.0))
        return acc / len(union)
    raise ValueError(f"unknown distance mode {mode!r} (expected one of {MODES})")


def distance_matrix(models: Sequence[QualityModel], mode: str = "structural") -> list[list[float]]:
    """Symmetric matrix of pairwise distances with a zero diagonal."""
    n = len(models)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d[i][j] = d[j][i] = model_distance(models[i], models[j], mode)
    return d


def polymorphism_degree(pop: ModelPopulation, mode: str = "structural") -> float:
    """Frequency-weighted pairwise diversity of the population, in [0, 1]."""
    n = len(pop.members)
    matrix = distance_matrix([m.model for m in pop.members], mode)
    flat = [v for row in matrix for v in row]
    return kernels.pair_sum([m.frequency for m in pop.members], flat, n)


def parse_population(text: str, base_dir: Path | str = ".", loader=None) -> ModelPopulation:
    """Read ``<frequency> <model-file>`` lines into a population.

    Frequencies summing to within [0.99, 1.01] are renormalized; any other
    total is rejected.  ``loader`` maps a path to a QualityModel and defaults
    to reading and parsing the QMDL file.  A file listed more than once
    yields distinct members ``path``, ``path#2``, ...
    """
    if loader is None:
        from .qmdl import parse_qmdl

        def loader(path: Path) -> QualityModel:
            return parse_qmdl(path.read_text(encoding="utf-8"))

    base = Path(base_dir)
    entries = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise PopulationError(f"line {lineno}: expected '<frequency> <model-file-path>'")
        try:
            freq = float(parts[0])
        except ValueError:
            raise PopulationError(f"line {lineno}: frequency {parts[0]!r} is not a number") from None
        if not 0.0 <= freq <= 1.0:
            raise PopulationError(f"line {lineno}: frequency {freq} outside [0, 1]")
        path = Path(parts[1].strip())
        if not path.is_absolute():
            path = base / path
        member_id = parts[1].strip()
        seen[member_id] = seen.get(member_id, 0) + 1
        if seen[member_id] > 1:
            member_id = f"{member_id}#{seen[member_id]}"
        entries.append((member_id, freq, loader(path)))
    if not entries:
        raise PopulationError("population file lists no members")
    total = sum(f for _, f, _ in entries)
    if not 0.99 <= total <= 1.01:
        raise PopulationError(f"frequencies sum to {total:g}; expected 1 (renormalization only within [0.99, 1.01])")
    return ModelPopulation.from_weights(entries)
