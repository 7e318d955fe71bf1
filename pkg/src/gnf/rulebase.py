"""Line-oriented ``.gnf`` rule-base format.

Grammar (one declaration per line, ``#`` starts a comment)::

    file     := system-line { decl-line }
    system   := "system" NAME
    input    := "input" NAME NUMBER NUMBER
    output   := "output" NAME NUMBER NUMBER
    set      := "set" NAME LABEL KIND NUMBER { NUMBER }
    rule     := "rule" "if" clause { ("and" | "or") clause }
                "then" NAME "is" LABEL [ "weight" NUMBER ]
    clause   := NAME "is" [ "not" ] LABEL
    norms    := "norms" { KEY "=" VALUE }
    KIND     := "triangular" | "trapezoidal" | "gaussian" | "crisp_threshold"
    KEY      := "t_norm" | "s_norm" | "complement" | "implication"
              | "aggregation" | "defuzzifier" | "resolution"

A rule uses a single connective throughout. Names match
``[A-Za-z_][A-Za-z0-9_]*`` and may not be one of the keywords above.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Literal, NamedTuple

from .fuzzy import (
    MF_ARITY,
    Clause,
    FuzzySet,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    NormConfig,
    Rule,
    Universe,
)

__all__ = ["SourceSpan", "ParseError", "parse", "serialize", "load", "tipper_text"]

ErrorKind = Literal[
    "syntax",
    "unknown_keyword",
    "bad_number",
    "duplicate_label",
    "unresolved_reference",
    "range_violation",
]

KEYWORDS = frozenset(
    {"system", "input", "output", "set", "rule", "norms", "if", "is", "not", "and", "or", "then", "weight"}
)
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_TOKEN = re.compile(r"[^ \t]+")
_NORM_KEYS = ("t_norm", "s_norm", "complement", "implication", "aggregation", "defuzzifier", "resolution")


class SourceSpan(NamedTuple):
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(ValueError):
    def __init__(self, kind: ErrorKind, span: SourceSpan, message: str):
        super().__init__(f"{span}: {kind}: {message}")
        self.kind = kind
        self.span = span
        self.message = message


class _Tok(NamedTuple):
    text: str
    span: SourceSpan


class _Line:
    def __init__(self, number: int, raw: str):
        body = raw.split("#", 1)[0]
        self.lineno = number
        self.end = SourceSpan(number, len(body) + 1)
        self.toks = [_Tok(m.group(), SourceSpan(number, m.start() + 1)) for m in _TOKEN.finditer(body)]
        self.pos = 0

    def next(self, what: str) -> _Tok:
        if self.pos >= len(self.toks):
            raise ParseError("syntax", self.end, f"expected {what}, found end of line")
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def expect(self, word: str) -> _Tok:
        tok = self.next(repr(word))
        if tok.text != word:
            raise ParseError("syntax", tok.span, f"expected {word!r}, found {tok.text!r}")
        return tok

    def name(self, what: str) -> _Tok:
        tok = self.next(what)
        if not _NAME.match(tok.text) or tok.text in KEYWORDS:
            raise ParseError("syntax", tok.span, f"expected {what}, found {tok.text!r}")
        return tok

    def number(self, what: str) -> tuple[float, _Tok]:
        tok = self.next(what)
        if not _NUMBER.match(tok.text):
            raise ParseError("bad_number", tok.span, f"{what}: {tok.text!r} is not a number")
        value = float(tok.text)
        if not math.isfinite(value):
            raise ParseError("bad_number", tok.span, f"{what}: {tok.text!r} is out of range")
        return value, tok

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise ParseError("syntax", tok.span, f"unexpected trailing token {tok.text!r}")


@dataclass
class _VarDecl:
    name: _Tok
    lo: float
    hi: float
    role: str


@dataclass
class _SetDecl:
    var: _Tok
    label: _Tok
    kind: _Tok
    params: list[tuple[float, _Tok]]


@dataclass
class _RuleDecl:
    clauses: list[tuple[_Tok, _Tok, bool]]
    connective: str
    out_var: _Tok
    out_label: _Tok
    weight: tuple[float, _Tok] | None


def _parse_rule(line: _Line) -> _RuleDecl:
    line.expect("if")
    clauses, connective = [], None
    while True:
        var = line.name("variable name")
        line.expect("is")
        negated = False
        if (tok := line.peek()) is not None and tok.text == "not":
            line.pos += 1
            negated = True
        clauses.append((var, line.name("set label"), negated))
        tok = line.next("'and', 'or' or 'then'")
        if tok.text == "then":
            break
        if tok.text not in ("and", "or"):
            raise ParseError("syntax", tok.span, f"expected 'and', 'or' or 'then', found {tok.text!r}")
        if connective is not None and tok.text != connective:
            raise ParseError("syntax", tok.span, f"rule mixes connectives {connective!r} and {tok.text!r}")
        connective = tok.text
    out_var = line.name("output variable name")
    line.expect("is")
    out_label = line.name("output set label")
    weight = None
    if line.peek() is not None:
        line.expect("weight")
        weight = line.number("rule weight")
    line.done()
    return _RuleDecl(clauses, connective or "and", out_var, out_label, weight)


def _parse_norms(line: _Line, seen: dict) -> None:
    while (tok := line.peek()) is not None:
        line.pos += 1
        key, sep, value = tok.text.partition("=")
        if not sep:
            raise ParseError("syntax", tok.span, f"expected key=value, found {tok.text!r}")
        if key not in _NORM_KEYS:
            raise ParseError("unknown_keyword", tok.span, f"unknown norms key {key!r}")
        if key in seen:
            raise ParseError("syntax", tok.span, f"norms key {key!r} given twice")
        value_span = SourceSpan(tok.span.line, tok.span.column + len(key) + 1)
        if key == "resolution":
            if not re.fullmatch(r"\d+", value):
                raise ParseError("bad_number", value_span, f"resolution {value!r} is not an integer")
            n = int(value)
            if n < 2:
                raise ParseError("range_violation", value_span, f"resolution {value!r} must be >= 2")
            seen[key] = n
        else:
            if value not in NormConfig.SUPPORTED[key]:
                raise ParseError("unknown_keyword", value_span, f"unsupported {key} {value!r}")
            seen[key] = value


def _decode(text) -> str:
    if isinstance(text, str):
        return text
    try:
        return bytes(text).decode("utf-8")
    except UnicodeDecodeError as exc:
        head = bytes(text)[: exc.start]
        line = head.count(b"\n") + 1
        col = exc.start - (head.rfind(b"\n") + 1) + 1
        raise ParseError("syntax", SourceSpan(line, col), "input is not valid UTF-8") from None


def parse(text: str | bytes) -> FuzzySystem:
    """Parse ``.gnf`` text into a :class:`FuzzySystem`.

    Raises :class:`ParseError` (and only that) for any malformed input.
    """
    lines = _decode(text).split("\n")
    system_name = None
    variables: list[_VarDecl] = []
    sets: list[_SetDecl] = []
    rules: list[_RuleDecl] = []
    norms: dict | None = None
    last = SourceSpan(len(lines), 1)

    for number, raw in enumerate(lines, start=1):
        line = _Line(number, raw.rstrip("\r"))
        if not line.toks:
            continue
        head = line.next("declaration")
        if system_name is None and head.text != "system":
            raise ParseError("syntax", head.span, f"expected 'system' header, found {head.text!r}")
        if head.text == "system":
            if system_name is not None:
                raise ParseError("syntax", head.span, "duplicate 'system' header")
            system_name = line.name("system name").text
            line.done()
        elif head.text in ("input", "output"):
            name = line.name(f"{head.text} variable name")
            lo, lo_tok = line.number("universe lower bound")
            hi, _ = line.number("universe upper bound")
            line.done()
            if head.text == "output" and any(v.role == "output" for v in variables):
                raise ParseError("syntax", head.span, "only one 'output' variable is allowed")
            if any(v.name.text == name.text for v in variables):
                raise ParseError("duplicate_label", name.span, f"variable {name.text!r} declared twice")
            if not lo < hi:
                raise ParseError("range_violation", lo_tok.span, f"universe of {name.text!r} needs lo < hi")
            variables.append(_VarDecl(name, lo, hi, head.text))
        elif head.text == "set":
            var = line.name("variable name")
            label = line.name("set label")
            kind = line.next("membership function kind")
            if kind.text not in MF_ARITY:
                raise ParseError("unknown_keyword", kind.span, f"unknown membership function {kind.text!r}")
            params = []
            while line.peek() is not None:
                params.append(line.number(f"{kind.text} parameter"))
            if len(params) != MF_ARITY[kind.text]:
                raise ParseError(
                    "syntax",
                    kind.span,
                    f"{kind.text} takes {MF_ARITY[kind.text]} parameters, got {len(params)}",
                )
            sets.append(_SetDecl(var, label, kind, params))
        elif head.text == "rule":
            rules.append(_parse_rule(line))
        elif head.text == "norms":
            if norms is not None:
                raise ParseError("syntax", head.span, "duplicate 'norms' line")
            norms = {}
            _parse_norms(line, norms)
        else:
            raise ParseError("unknown_keyword", head.span, f"unknown declaration {head.text!r}")

    if system_name is None:
        raise ParseError("syntax", SourceSpan(1, 1), "expected 'system' header, found end of input")
    return _resolve(system_name, variables, sets, rules, norms or {}, last)


def _build_mf(decl: _SetDecl) -> MembershipFunction:
    values = tuple(v for v, _ in decl.params)
    kind = decl.kind.text
    if kind in ("triangular", "trapezoidal"):
        for (a, _), (b, tok) in zip(decl.params, decl.params[1:]):
            if a > b:
                raise ParseError("range_violation", tok.span, f"{kind} parameters must be non-decreasing")
    if kind == "gaussian" and not values[1] > 0:
        raise ParseError("range_violation", decl.params[1][1].span, "gaussian sigma must be positive")
    return MembershipFunction(kind, values)


def _resolve(name, variables, sets, rules, norms, last) -> FuzzySystem:
    by_name = {v.name.text: v for v in variables}
    members: dict[str, list[FuzzySet]] = {v.name.text: [] for v in variables}
    for decl in sets:
        if decl.var.text not in by_name:
            raise ParseError("unresolved_reference", decl.var.span, f"set for undeclared variable {decl.var.text!r}")
        bucket = members[decl.var.text]
        if any(s.label == decl.label.text for s in bucket):
            raise ParseError(
                "duplicate_label", decl.label.span, f"set {decl.label.text!r} defined twice for {decl.var.text!r}"
            )
        bucket.append(FuzzySet(decl.label.text, _build_mf(decl)))

    inputs = [v for v in variables if v.role == "input"]
    outputs = [v for v in variables if v.role == "output"]
    if not inputs:
        raise ParseError("syntax", last, "system declares no 'input' variable")
    if not outputs:
        raise ParseError("syntax", last, "system declares no 'output' variable")
    if not rules:
        raise ParseError("syntax", last, "system declares no 'rule'")
    for v in variables:
        if not members[v.name.text]:
            raise ParseError("syntax", v.name.span, f"variable {v.name.text!r} has no sets")

    def lingvar(decl: _VarDecl) -> LinguisticVariable:
        n = decl.name.text
        return LinguisticVariable(n, Universe(decl.lo, decl.hi, n), tuple(members[n]))

    input_vars = tuple(lingvar(v) for v in inputs)
    output_var = lingvar(outputs[0])
    out_name = output_var.name

    def check_ref(var_tok, label_tok, role):
        decl = by_name.get(var_tok.text)
        if decl is None or decl.role != role:
            raise ParseError("unresolved_reference", var_tok.span, f"no {role} variable named {var_tok.text!r}")
        if all(s.label != label_tok.text for s in members[var_tok.text]):
            raise ParseError(
                "unresolved_reference", label_tok.span, f"variable {var_tok.text!r} has no set {label_tok.text!r}"
            )

    built = []
    for r in rules:
        for var, label, _ in r.clauses:
            check_ref(var, label, "input")
        check_ref(r.out_var, r.out_label, "output")
        weight = 1.0
        if r.weight is not None:
            weight, tok = r.weight
            if not 0.0 <= weight <= 1.0:
                raise ParseError("range_violation", tok.span, f"rule weight {tok.text!r} must lie in [0, 1]")
        clauses = tuple(Clause(v.text, lab.text, neg) for v, lab, neg in r.clauses)
        built.append(Rule(clauses, (out_name, r.out_label.text), r.connective, weight))
    return FuzzySystem(input_vars, output_var, tuple(built), NormConfig(**norms), name=name)


def format_number(x: float) -> str:
    """Shortest decimal that round-trips to ``x``; integral values drop ``.0``."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def serialize(system: FuzzySystem) -> str:
    """Canonical ``.gnf`` text for ``system``."""
    out = [f"system {system.name}"]
    for v in system.inputs:
        out.append(f"input {v.name} {format_number(v.universe.lo)} {format_number(v.universe.hi)}")
    o = system.output
    out.append(f"output {o.name} {format_number(o.universe.lo)} {format_number(o.universe.hi)}")
    for v in (*system.inputs, o):
        for s in v.sets:
            params = " ".join(format_number(p) for p in s.mf.params)
            out.append(f"set {v.name} {s.label} {s.mf.kind} {params}")
    for rule in system.rules:
        line = f"rule {rule.describe()}"
        if rule.weight != 1.0:
            line += f" weight {format_number(rule.weight)}"
        out.append(line)
    n = system.norms
    out.append("norms " + " ".join(f"{k}={getattr(n, k)}" for k in _NORM_KEYS))
    return "\n".join(out) + "\n"


def load(path) -> FuzzySystem:
    with open(path, "rb") as fh:
        return parse(fh.read())


def tipper_text() -> str:
    """Text of the bundled tipper rule base."""
    return resources.files("gnf").joinpath("data", "tipper.gnf").read_text(encoding="utf-8")
