"""Mamdani fuzzy inference with min/max norms and centroid defuzzification.

Every type here is an immutable value; :func:`infer` is a pure function of
its arguments and can be called from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Mapping, Sequence

import numpy as np

__all__ = [
    "Universe",
    "MembershipFunction",
    "FuzzySet",
    "LinguisticVariable",
    "NormConfig",
    "Clause",
    "Rule",
    "FuzzySystem",
    "RuleTrace",
    "FuzzyError",
    "RuleReferenceError",
    "InferenceError",
    "MissingInputError",
    "NoRuleFiredError",
    "evaluate_mf",
    "t_norm",
    "s_norm",
    "complement",
    "fire_rule",
    "infer",
    "builtin_tipper",
]

MF_ARITY = {"triangular": 3, "trapezoidal": 4, "gaussian": 2, "crisp_threshold": 1}


class FuzzyError(Exception):
    """Base class for fuzzy-system errors."""


class RuleReferenceError(FuzzyError, ValueError):
    """A rule names a variable or set label that does not exist."""


class InferenceError(FuzzyError):
    """Inference could not produce a crisp value."""


class MissingInputError(InferenceError):
    def __init__(self, variable: str):
        super().__init__(f"no value supplied for input variable {variable!r}")
        self.variable = variable


class NoRuleFiredError(InferenceError):
    """Every rule fired at zero so the aggregate has no mass."""


@dataclass(frozen=True)
class Universe:
    lo: float
    hi: float
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"universe bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"universe requires lo < hi, got [{self.lo}, {self.hi}]")

    def clamp(self, x: float) -> float:
        return min(max(float(x), self.lo), self.hi)


@dataclass(frozen=True)
class MembershipFunction:
    """Parametric membership curve.

    ``kind`` is one of ``triangular(a, b, c)``, ``trapezoidal(a, b, c, d)``,
    ``gaussian(center, sigma)`` or ``crisp_threshold(t)``; the last is the
    classical set ``{x | x > t}``.
    """

    kind: Literal["triangular", "trapezoidal", "gaussian", "crisp_threshold"]
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in MF_ARITY:
            raise ValueError(f"unknown membership function kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != MF_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {MF_ARITY[self.kind]} parameters, got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise ValueError(f"{self.kind} parameters must be finite")
        if self.kind in ("triangular", "trapezoidal"):
            if any(p > q for p, q in zip(params, params[1:])):
                raise ValueError(f"{self.kind} parameters must be non-decreasing: {params}")
        elif self.kind == "gaussian" and not params[1] > 0:
            raise ValueError(f"gaussian sigma must be positive, got {params[1]}")

    @classmethod
    def triangular(cls, a, b, c):
        return cls("triangular", (a, b, c))

    @classmethod
    def trapezoidal(cls, a, b, c, d):
        return cls("trapezoidal", (a, b, c, d))

    @classmethod
    def gaussian(cls, center, sigma):
        return cls("gaussian", (center, sigma))

    @classmethod
    def crisp_threshold(cls, t):
        return cls("crisp_threshold", (t,))

    def __call__(self, x):
        return evaluate_mf(self, x)


def _trapezoid(x, a, b, c, d):
    # Shoulders (a == b or c == d) evaluate to 1 at the shared point.
    # The unselected branch of np.where may divide by a zero or subnormal width.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rise = np.where(x < a, 0.0, np.where(x < b, (x - a) / (b - a), 1.0))
        fall = np.where(x > d, 0.0, np.where(x > c, (d - x) / (d - c), 1.0))
    return np.minimum(rise, fall)


def evaluate_mf(mf: MembershipFunction, x):
    """Degree of membership of ``x`` (scalar or array) in ``mf``."""
    xa = np.asarray(x, dtype=float)
    p = mf.params
    if mf.kind == "triangular":
        y = _trapezoid(xa, p[0], p[1], p[1], p[2])
    elif mf.kind == "trapezoidal":
        y = _trapezoid(xa, *p)
    elif mf.kind == "gaussian":
        with np.errstate(over="ignore", under="ignore"):
            y = np.exp(-((xa - p[0]) ** 2) / (2.0 * p[1] ** 2))
    else:
        y = np.where(xa > p[0], 1.0, 0.0)
    y = np.clip(y, 0.0, 1.0)
    return float(y) if y.ndim == 0 else y


def t_norm(a, b):
    return np.minimum(a, b)


def s_norm(a, b):
    return np.maximum(a, b)


def complement(a):
    return 1.0 - a


@dataclass(frozen=True)
class FuzzySet:
    label: str
    mf: MembershipFunction


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: Universe
    sets: tuple[FuzzySet, ...]

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if not self.sets:
            raise ValueError(f"variable {self.name!r} needs at least one fuzzy set")
        labels = [s.label for s in self.sets]
        dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
        if dupes:
            raise ValueError(f"variable {self.name!r} has duplicate set labels {dupes}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sets)

    def get(self, label: str) -> FuzzySet:
        for s in self.sets:
            if s.label == label:
                return s
        raise RuleReferenceError(f"variable {self.name!r} has no set labelled {label!r}")


@dataclass(frozen=True)
class NormConfig:
    t_norm: Literal["min"] = "min"
    s_norm: Literal["max"] = "max"
    complement: Literal["one_minus"] = "one_minus"
    implication: Literal["min"] = "min"
    aggregation: Literal["max"] = "max"
    defuzzifier: Literal["centroid"] = "centroid"
    resolution: int = 101

    SUPPORTED = {
        "t_norm": ("min",),
        "s_norm": ("max",),
        "complement": ("one_minus",),
        "implication": ("min",),
        "aggregation": ("max",),
        "defuzzifier": ("centroid",),
    }

    def __post_init__(self):
        for key, allowed in self.SUPPORTED.items():
            if getattr(self, key) not in allowed:
                raise ValueError(f"unsupported {key} {getattr(self, key)!r}; expected one of {allowed}")
        if isinstance(self.resolution, bool) or not isinstance(self.resolution, (int, np.integer)):
            raise ValueError(f"resolution must be an integer, got {self.resolution!r}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")


@dataclass(frozen=True)
class Clause:
    variable: str
    label: str
    negated: bool = False


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[Clause, ...]
    consequent: tuple[str, str]
    connective: Literal["and", "or"] = "and"
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "consequent", tuple(self.consequent))
        object.__setattr__(self, "weight", float(self.weight))
        if not self.antecedent:
            raise ValueError("rule antecedent must not be empty")
        if self.connective not in ("and", "or"):
            raise ValueError(f"connective must be 'and' or 'or', got {self.connective!r}")
        if len(self.antecedent) == 1:
            # Irrelevant for one clause; fixed so equal rules compare equal.
            object.__setattr__(self, "connective", "and")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"rule weight must lie in [0, 1], got {self.weight}")

    def describe(self) -> str:
        parts = [
            f"{c.variable} is {'not ' if c.negated else ''}{c.label}" for c in self.antecedent
        ]
        out_var, out_label = self.consequent
        return f"if {f' {self.connective} '.join(parts)} then {out_var} is {out_label}"


@dataclass(frozen=True)
class FuzzySystem:
    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[Rule, ...]
    norms: NormConfig = field(default_factory=NormConfig)
    name: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.inputs:
            raise ValueError("a fuzzy system needs at least one input variable")
        if not self.rules:
            raise ValueError("a fuzzy system needs at least one rule")
        names = [v.name for v in self.inputs] + [self.output.name]
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be unique, got {names}")
        for rule in self.rules:
            self._check_rule(rule)

    def _check_rule(self, rule: Rule):
        for clause in rule.antecedent:
            self.input(clause.variable).get(clause.label)
        out_var, out_label = rule.consequent
        if out_var != self.output.name:
            raise RuleReferenceError(
                f"rule consequent names {out_var!r}, expected output {self.output.name!r}"
            )
        self.output.get(out_label)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    def input(self, name: str) -> LinguisticVariable:
        for v in self.inputs:
            if v.name == name:
                return v
        raise RuleReferenceError(f"no input variable named {name!r}")


@dataclass(frozen=True, eq=False)
class RuleTrace:
    """Per-rule record of one inference.

    ``degrees`` are antecedent truth values before the rule weight,
    ``strengths`` the weighted firing strengths used as clip levels.
    """

    degrees: tuple[float, ...]
    strengths: tuple[float, ...]
    grid: np.ndarray
    aggregate: np.ndarray


def fire_rule(system: FuzzySystem, rule: Rule, inputs: Mapping[str, float]) -> float:
    """Weighted firing strength of ``rule`` for crisp ``inputs``."""
    return _fire(system, rule, inputs)[1]


def _fire(system, rule, inputs):
    degree = None
    for clause in rule.antecedent:
        var = system.input(clause.variable)
        if clause.variable not in inputs:
            raise MissingInputError(clause.variable)
        x = var.universe.clamp(inputs[clause.variable])
        mu = evaluate_mf(var.get(clause.label).mf, x)
        if clause.negated:
            mu = complement(mu)
        if degree is None:
            degree = mu
        elif rule.connective == "and":
            degree = t_norm(degree, mu)
        else:
            degree = s_norm(degree, mu)
    degree = float(degree)
    return degree, degree * rule.weight


@lru_cache(maxsize=256)
def _output_curves(output: LinguisticVariable, resolution: int):
    grid = np.linspace(output.universe.lo, output.universe.hi, resolution)
    curves = {s.label: evaluate_mf(s.mf, grid) for s in output.sets}
    return grid, curves


def infer(
    system: FuzzySystem,
    inputs: Mapping[str, float],
    resolution: int | None = None,
) -> tuple[float, RuleTrace]:
    """Crisp output of ``system`` at ``inputs`` plus a per-rule trace.

    Inputs outside a variable's universe are clamped to it. Raises
    :class:`NoRuleFiredError` when the aggregate curve is identically zero.
    """
    n = system.norms.resolution if resolution is None else int(resolution)
    if n < 2:
        raise ValueError(f"resolution must be >= 2, got {n}")
    unknown = set(inputs) - set(system.input_names)
    if unknown:
        raise RuleReferenceError(f"unknown input variable(s) {sorted(unknown)}")
    grid, curves = _output_curves(system.output, n)
    aggregate = np.zeros_like(grid)
    degrees, strengths = [], []
    for rule in system.rules:
        degree, strength = _fire(system, rule, inputs)
        degrees.append(degree)
        strengths.append(strength)
        clipped = np.minimum(strength, curves[rule.consequent[1]])
        aggregate = np.maximum(aggregate, clipped)
    mass = aggregate.sum()
    if not mass > 0.0:
        raise NoRuleFiredError(
            f"no rule fired for inputs {dict(inputs)}; the aggregate output set is empty"
        )
    crisp = float((grid * aggregate).sum() / mass)
    return crisp, RuleTrace(tuple(degrees), tuple(strengths), grid, aggregate)


def builtin_tipper() -> FuzzySystem:
    """The two-input restaurant tipping system (service, food -> tip %)."""
    mf = MembershipFunction
    service = LinguisticVariable(
        "service",
        Universe(0.0, 10.0, "service"),
        (
            FuzzySet("poor", mf.gaussian(0.0, 1.5)),
            FuzzySet("good", mf.gaussian(5.0, 1.5)),
            FuzzySet("excellent", mf.gaussian(10.0, 1.5)),
        ),
    )
    food = LinguisticVariable(
        "food",
        Universe(0.0, 10.0, "food"),
        (
            FuzzySet("rancid", mf.trapezoidal(0.0, 0.0, 1.0, 3.0)),
            FuzzySet("delicious", mf.trapezoidal(7.0, 9.0, 10.0, 10.0)),
        ),
    )
    tip = LinguisticVariable(
        "tip",
        Universe(0.0, 30.0, "tip"),
        (
            FuzzySet("cheap", mf.triangular(0.0, 5.0, 10.0)),
            FuzzySet("average", mf.triangular(10.0, 15.0, 20.0)),
            FuzzySet("generous", mf.triangular(20.0, 25.0, 30.0)),
        ),
    )
    rules = (
        Rule((Clause("service", "poor"), Clause("food", "rancid")), ("tip", "cheap"), "or"),
        Rule((Clause("service", "good"),), ("tip", "average")),
        Rule((Clause("service", "excellent"), Clause("food", "delicious")), ("tip", "generous"), "or"),
    )
    return FuzzySystem((service, food), tip, rules, NormConfig(), name="tipper")
