"""QMDL: plain-text quality model definition language.

Grammar (whitespace insignificant, ``#`` comments to end of line)::

    model      := "model" STRING "{" header char agg? "}"
    header     := "purpose:" PURPOSE  "qem_method:" QMETHOD  "qem_source:" QSOURCE
                  "organization:" ORG  ("ruleset:" TOKEN)? ("derives_from:" TOKEN ("," TOKEN)*)?
                  ("context:" STRING)?
    char       := "characteristic" STRING "weight" NUMBER "{" (char+ | metric+ | ) "}"
    metric     := "metric" STRING "scale" SCALE "unit" STRING "direction" DIR
                  "{" "normalize" "linear" "from" NUMBER "to" NUMBER
                      ("thresholds" "reject" NUMBER "accept" NUMBER "target" NUMBER ("reference" NUMBER)?)? "}"
    agg        := "aggregation" AGGOP

The header order is fixed: it follows the sequence in which a model's
attributes are decided.  Omitted optional attributes default to ruleset
``default``, no lineage, empty context and ``weighted-arithmetic-mean``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import MetricError, ModelError, QualimeterError
from .metrics import Direction, LinearNormalization, MetricSpec, Scale, ThresholdSet
from .model import (
    AssessmentMethod,
    Characteristic,
    InformationSource,
    Organization,
    Purpose,
    QualityModel,
    build_model,
    join_path,
)

__all__ = [
    "SourceSpan",
    "QmdlError",
    "QmdlSyntaxError",
    "QmdlSemanticError",
    "parse_qmdl",
    "serialize_qmdl",
    "format_number",
]

MAX_DEPTH = 64
_FRACTION_DIGITS = 9
_UNITS = 10**_FRACTION_DIGITS


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class QmdlError(QualimeterError, ValueError):
    def __init__(self, span: SourceSpan, message: str) -> None:
        super().__init__(f"{span}: {message}")
        self.span = span
        self.detail = message


class QmdlSyntaxError(QmdlError):
    def __init__(self, span: SourceSpan, expected: str, found: str) -> None:
        super().__init__(span, f"expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class QmdlSemanticError(QmdlError):
    pass


# -- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+|\#[^\n]*)
  | (?P<number>-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)(?![A-Za-z0-9_.\-])
  | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.\-]*)
  | (?P<string>")
  | (?P<punct>[{}:,])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # word, number, string, punct, eof
    text: str
    value: object
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "string":
            return f"string {self.text}"
        return repr(self.text)


class _Lexer:
    def __init__(self, text: str) -> None:
        self.text = text
        self.line_starts = [0]
        for m in re.finditer("\n", text):
            self.line_starts.append(m.end())

    def span(self, pos: int) -> SourceSpan:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return SourceSpan(lo + 1, pos - self.line_starts[lo] + 1)

    def tokens(self) -> list[_Tok]:
        text, pos, out = self.text, 0, []
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise QmdlSyntaxError(self.span(pos), "a token", repr(text[pos]))
            kind = m.lastgroup
            if kind == "ws":
                pos = m.end()
            elif kind == "string":
                tok, pos = self._string(pos)
                out.append(tok)
            elif kind == "number":
                value = float(m.group())
                if not math.isfinite(value):
                    raise QmdlSemanticError(self.span(pos), f"number {m.group()} is out of range")
                out.append(_Tok("number", m.group(), value, self.span(pos)))
                pos = m.end()
            else:
                out.append(_Tok(kind, m.group(), m.group(), self.span(pos)))
                pos = m.end()
        out.append(_Tok("eof", "", None, self.span(len(text))))
        return out

    def _string(self, start: int) -> tuple[_Tok, int]:
        text, pos, chars = self.text, start + 1, []
        while pos < len(text):
            c = text[pos]
            if c == '"':
                return _Tok("string", text[start : pos + 1], "".join(chars), self.span(start)), pos + 1
            if c == "\\":
                if pos + 1 >= len(text):
                    break
                nxt = text[pos + 1]
                chars.append(_ESCAPES.get(nxt, nxt))
                pos += 2
                continue
            if c == "\n":
                raise QmdlSyntaxError(self.span(pos), 'closing \'"\'', "end of line")
            chars.append(c)
            pos += 1
        raise QmdlSyntaxError(self.span(start), 'closing \'"\'', "end of input")


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Tok]) -> None:
        self.toks = tokens
        self.i = 0
        self.char_spans: dict[str, SourceSpan] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("word", "punct") and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise QmdlSyntaxError(self.tok.span, repr(text), self.tok.describe())
        return self.advance()

    def expect_key(self, key: str) -> None:
        self.expect(key)
        self.expect(":")

    def at_key(self, key: str) -> bool:
        nxt = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else self.tok
        return self.at(key) and nxt.kind == "punct" and nxt.text == ":"

    def expect_kind(self, kind: str, what: str) -> _Tok:
        if self.tok.kind != kind:
            raise QmdlSyntaxError(self.tok.span, what, self.tok.describe())
        return self.advance()

    def string(self) -> str:
        return self.expect_kind("string", "a string").value

    def number(self) -> float:
        return self.expect_kind("number", "a number").value

    def token(self) -> str:
        if self.tok.kind not in ("word", "number"):
            raise QmdlSyntaxError(self.tok.span, "a token", self.tok.describe())
        return self.advance().text

    def enum(self, kind, what: str):
        tok = self.tok
        if tok.kind != "word":
            raise QmdlSyntaxError(tok.span, what, tok.describe())
        self.advance()
        try:
            return kind(tok.text)
        except ValueError:
            allowed = ", ".join(m.value for m in kind)
            raise QmdlSemanticError(tok.span, f"invalid {what} {tok.text!r} (expected one of: {allowed})") from None

    # model := "model" STRING "{" header char agg? "}"
    def model(self):
        self.expect("model")
        id_tok = self.tok
        model_id = self.string()
        if not re.fullmatch(r"[A-Za-z0-9_][A-Za-z0-9_.\-]*", model_id):
            raise QmdlSemanticError(id_tok.span, f"model id {model_id!r} must be a token ([A-Za-z0-9_.-], not starting with '.' or '-')")
        self.expect("{")
        self.char_spans["@model"] = id_tok.span
        attrs = {"id": model_id, **self.header()}
        root = self.characteristic("", 0, root=True)
        if self.at("aggregation"):
            self.advance()
            from .aggregation import OPERATORS

            tok = self.expect_kind("word", "an aggregation operator")
            op = tok.text
            if op not in OPERATORS:
                raise QmdlSemanticError(tok.span, f"unknown aggregation operator {op!r} (expected one of: {', '.join(OPERATORS)})")
            attrs["aggregation"] = op
        else:
            attrs["aggregation"] = "weighted-arithmetic-mean"
        self.expect("}")
        if self.tok.kind != "eof":
            raise QmdlSyntaxError(self.tok.span, "end of input", self.tok.describe())
        return attrs, root

    def header(self) -> dict:
        attrs: dict = {}
        self.expect_key("purpose")
        attrs["purpose"] = self.enum(Purpose, "purpose")
        self.expect_key("qem_method")
        attrs["assessment_method"] = self.enum(AssessmentMethod, "qem_method")
        self.expect_key("qem_source")
        attrs["information_source"] = self.enum(InformationSource, "qem_source")
        self.expect_key("organization")
        attrs["organization"] = self.enum(Organization, "organization")
        attrs["ruleset"] = "default"
        if self.at_key("ruleset"):
            self.expect_key("ruleset")
            attrs["ruleset"] = self.token()
        lineage: list[str] = []
        if self.at_key("derives_from"):
            self.expect_key("derives_from")
            lineage.append(self.token())
            while self.at(","):
                self.advance()
                lineage.append(self.token())
        attrs["lineage"] = lineage
        attrs["context"] = ""
        if self.at_key("context"):
            self.expect_key("context")
            attrs["context"] = self.string()
        return attrs

    def characteristic(self, parent: str, depth: int, root: bool = False) -> Characteristic:
        start = self.expect("characteristic")
        name_tok = self.tok
        name = self.string()
        path = "" if root else join_path(parent, name)
        self.char_spans[path] = name_tok.span
        if depth > MAX_DEPTH:
            raise QmdlSemanticError(start.span, f"characteristics nested deeper than {MAX_DEPTH} levels")
        self.expect("weight")
        weight_tok = self.tok
        weight = self.number()
        if weight <= 0:
            raise QmdlSemanticError(weight_tok.span, f"weight of {name!r} must be positive, got {weight_tok.text}")
        self.expect("{")
        children: list[Characteristic] = []
        metrics: list[MetricSpec] = []
        if self.at("characteristic"):
            while self.at("characteristic"):
                children.append(self.characteristic(path, depth + 1))
        elif self.at("metric"):
            while self.at("metric"):
                metrics.append(self.metric())
        if not self.at("}"):
            expected = "'characteristic' or '}'" if children else "'metric' or '}'" if metrics else "'characteristic', 'metric' or '}'"
            raise QmdlSyntaxError(self.tok.span, expected, self.tok.describe())
        self.advance()
        return Characteristic(name, weight, tuple(children), tuple(metrics))

    def metric(self) -> MetricSpec:
        start = self.expect("metric")
        name = self.string()
        self.expect("scale")
        scale = self.enum(Scale, "scale")
        self.expect("unit")
        unit = self.string()
        self.expect("direction")
        direction = self.enum(Direction, "direction")
        self.expect("{")
        self.expect("normalize")
        self.expect("linear")
        self.expect("from")
        lo = self.number()
        self.expect("to")
        hi = self.number()
        thresholds = None
        if self.at("thresholds"):
            self.advance()
            self.expect("reject")
            reject = self.number()
            self.expect("accept")
            accept = self.number()
            self.expect("target")
            target = self.number()
            reference = None
            if self.at("reference"):
                self.advance()
                reference = self.number()
            thresholds = ThresholdSet(reject, accept, target, reference)
        self.expect("}")
        try:
            return MetricSpec(name, scale, unit, direction, LinearNormalization(lo, hi), thresholds)
        except MetricError as exc:
            raise QmdlSemanticError(start.span, str(exc)) from exc


def parse_qmdl(text: str | bytes) -> QualityModel:
    """Parse QMDL source into a validated :class:`QualityModel`.

    Raises QmdlSyntaxError or QmdlSemanticError, both carrying ``span``.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            prefix = bytes(text[: exc.start]).decode("utf-8", errors="replace")
            raise QmdlSyntaxError(_Lexer(prefix).span(len(prefix)), "UTF-8 text", f"byte 0x{text[exc.start]:02x}") from None
    if text.startswith("\ufeff"):
        text = text[1:]
    lexer = _Lexer(text)
    parser = _Parser(lexer.tokens())
    attrs, root = parser.model()
    try:
        return build_model(attrs, root)
    except ModelError as exc:
        span = parser.char_spans.get(exc.path or "", SourceSpan(1, 1))
        raise QmdlSemanticError(span, str(exc)) from exc


# -- serializer -------------------------------------------------------------


def format_number(x: float) -> str:
    """Fixed-point with up to 9 fractional digits, trailing zeros trimmed."""
    s = f"{x:.{_FRACTION_DIGITS}f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def _round_group(weights: list[float]) -> list[str]:
    # largest-remainder rounding: the printed group sums to exactly 1
    scaled = [w * _UNITS for w in weights]
    units = [math.floor(s) for s in scaled]
    short = _UNITS - sum(units)
    order = sorted(range(len(weights)), key=lambda i: (-(scaled[i] - units[i]), i))
    for i in order[: max(0, short)]:
        units[i] += 1
    out = []
    for u in units:
        u = max(u, 1)
        whole, frac = divmod(u, _UNITS)
        s = f"{whole}.{frac:0{_FRACTION_DIGITS}d}".rstrip("0").rstrip(".")
        out.append(s)
    return out


def _quote(s: str) -> str:
    s = s.replace("\\", "\\\\").replace('"', '\\"')
    return '"' + s.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t") + '"'


def serialize_qmdl(model: QualityModel) -> str:
    """Canonical QMDL text for ``model`` (LF line endings, two-space indent)."""
    lines = [f"model {_quote(model.id)} {{"]
    ind = "  "
    lines.append(f"{ind}purpose: {model.purpose.value}")
    lines.append(f"{ind}qem_method: {model.qem.assessment_method.value}")
    lines.append(f"{ind}qem_source: {model.qem.information_source.value}")
    lines.append(f"{ind}organization: {model.organization.value}")
    lines.append(f"{ind}ruleset: {model.ruleset_ref}")
    if model.lineage:
        lines.append(f"{ind}derives_from: {', '.join(model.lineage)}")
    if model.context:
        lines.append(f"{ind}context: {_quote(model.context)}")
    _emit_char(model.root, "1", 1, lines)
    lines.append(f"{ind}aggregation {model.aggregation_operator}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _emit_char(node: Characteristic, weight: str, depth: int, lines: list[str]) -> None:
    ind = "  " * depth
    lines.append(f"{ind}characteristic {_quote(node.name)} weight {weight} {{")
    if node.children:
        weights = _round_group([c.weight for c in node.children])
        for child, w in zip(node.children, weights):
            _emit_char(child, w, depth + 1, lines)
    for m in node.metrics:
        _emit_metric(m, depth + 1, lines)
    lines.append(f"{ind}}}")


def _emit_metric(m: MetricSpec, depth: int, lines: list[str]) -> None:
    ind = "  " * depth
    lines.append(
        f"{ind}metric {_quote(m.name)} scale {m.scale.value} unit {_quote(m.unit)} direction {m.direction.value} {{"
    )
    n = m.normalization
    lines.append(f"{ind}  normalize linear from {format_number(n.from_raw)} to {format_number(n.to_raw)}")
    t = m.thresholds
    if t is not None:
        line = (
            f"{ind}  thresholds reject {format_number(t.reject)} accept {format_number(t.accept)} "
            f"target {format_number(t.target)}"
        )
        if t.reference is not None:
            line += f" reference {format_number(t.reference)}"
        lines.append(line)
    lines.append(f"{ind}}}")
