import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnf.fuzzy import (
    Clause,
    FuzzySet,
    FuzzySystem,
    LinguisticVariable,
    MembershipFunction,
    MissingInputError,
    NoRuleFiredError,
    NormConfig,
    Rule,
    RuleReferenceError,
    Universe,
    complement,
    evaluate_mf,
    fire_rule,
    infer,
    s_norm,
    t_norm,
)

from oracles import gauss, tipper_oracle, trap, tri

MF = MembershipFunction
degrees = st.floats(0.0, 1.0, allow_nan=False)
reals = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def membership_functions(draw):
    kind = draw(st.sampled_from(["triangular", "trapezoidal", "gaussian", "crisp_threshold"]))
    if kind == "gaussian":
        return MF.gaussian(draw(reals), draw(st.floats(1e-3, 1e3)))
    if kind == "crisp_threshold":
        return MF.crisp_threshold(draw(reals))
    n = 3 if kind == "triangular" else 4
    return MF(kind, tuple(sorted(draw(st.lists(reals, min_size=n, max_size=n)))))


def single_rule_system(consequent_mf, weight=1.0, lo=0.0, hi=30.0, resolution=101):
    x = LinguisticVariable("x", Universe(0.0, 1.0, "x"), (FuzzySet("any", MF.trapezoidal(0, 0, 1, 1)),))
    y = LinguisticVariable("y", Universe(lo, hi, "y"), (FuzzySet("out", consequent_mf),))
    rule = Rule((Clause("x", "any"),), ("y", "out"), weight=weight)
    return FuzzySystem((x,), y, (rule,), NormConfig(resolution=resolution))


class TestMembership:
    def test_triangle_peak_and_midpoint(self):
        tri_mf = MF.triangular(0, 5, 10)
        assert evaluate_mf(tri_mf, 5) == 1.0
        assert evaluate_mf(tri_mf, 2.5) == 0.5

    def test_gaussian_centre(self):
        assert evaluate_mf(MF.gaussian(5, 1.5), 5) == 1.0

    def test_crisp_threshold_is_classical_set(self):
        mf = MF.crisp_threshold(6)
        assert [evaluate_mf(mf, x) for x in (5.9, 6.0, 6.1)] == [0.0, 0.0, 1.0]

    def test_shoulders(self):
        rancid = MF.trapezoidal(0, 0, 1, 3)
        assert evaluate_mf(rancid, 0) == 1.0
        assert evaluate_mf(rancid, 2) == 0.5
        delicious = MF.trapezoidal(7, 9, 10, 10)
        assert evaluate_mf(delicious, 10) == 1.0
        assert evaluate_mf(delicious, 8) == 0.5

    def test_vectorised_matches_scalar(self):
        xs = np.linspace(-2, 12, 57)
        for mf in (MF.triangular(0, 5, 10), MF.trapezoidal(0, 0, 1, 3), MF.gaussian(5, 1.5)):
            np.testing.assert_array_equal(evaluate_mf(mf, xs), [evaluate_mf(mf, x) for x in xs])

    @given(st.floats(-5, 15))
    def test_against_scalar_oracle(self, x):
        assert evaluate_mf(MF.triangular(0, 5, 10), x) == pytest.approx(tri(x, 0, 5, 10), abs=1e-15)
        assert evaluate_mf(MF.trapezoidal(0, 0, 1, 3), x) == pytest.approx(trap(x, 0, 0, 1, 3), abs=1e-15)
        assert evaluate_mf(MF.gaussian(5, 1.5), x) == pytest.approx(gauss(x, 5, 1.5), rel=1e-15)

    @pytest.mark.parametrize(
        "kind, params",
        [("triangular", (0, 5)), ("triangular", (5, 0, 10)), ("gaussian", (0, 0)), ("trapezoidal", (0, 2, 1, 3)), ("blob", (1,))],
    )
    def test_invalid_parameters(self, kind, params):
        with pytest.raises(ValueError):
            MF(kind, params)


class TestNorms:
    def test_examples(self):
        assert t_norm(0.3, 0.7) == 0.3
        assert s_norm(0.3, 0.7) == 0.7
        assert complement(0.0) == 1.0
        assert complement(1.0) == 0.0
        assert complement(0.25) == 0.75

    @given(degrees)
    def test_identity_and_annihilator(self, x):
        assert t_norm(x, 1.0) == x
        assert t_norm(0.0, x) == 0.0
        assert s_norm(x, 0.0) == x
        assert s_norm(1.0, x) == 1.0


class TestRules:
    def test_single_clause_and_conjunction(self, tipper):
        service = tipper.input("service")
        # service=5 gives good=1; pick a point where good == 0.6
        x = 5 + 1.5 * math.sqrt(-2 * math.log(0.6))
        rule = Rule((Clause("service", "good"),), ("tip", "average"))
        assert fire_rule(tipper, rule, {"service": x}) == pytest.approx(0.6, abs=1e-12)
        both = Rule((Clause("service", "good"), Clause("food", "rancid")), ("tip", "cheap"), "and")
        # rancid at food=2.6 is 0.2
        assert fire_rule(tipper, both, {"service": x, "food": 2.6}) == pytest.approx(0.2, abs=1e-12)
        assert service.get("good").mf.params == (5.0, 1.5)

    def test_tipper_rule3_at_top_corner(self, tipper):
        assert fire_rule(tipper, tipper.rules[2], {"service": 10, "food": 10}) == 1.0

    def test_negation_and_weight(self, tipper):
        rule = Rule((Clause("service", "good", negated=True),), ("tip", "cheap"), weight=0.5)
        assert fire_rule(tipper, rule, {"service": 5}) == 0.0
        assert fire_rule(tipper, rule, {"service": 0}) == pytest.approx(0.5 * (1 - gauss(0, 5, 1.5)))

    def test_unknown_references(self, tipper):
        with pytest.raises(RuleReferenceError):
            fire_rule(tipper, Rule((Clause("ambience", "nice"),), ("tip", "cheap")), {"ambience": 1})
        with pytest.raises(RuleReferenceError):
            fire_rule(tipper, Rule((Clause("service", "superb"),), ("tip", "cheap")), {"service": 1})
        with pytest.raises(RuleReferenceError):
            FuzzySystem(tipper.inputs, tipper.output, (Rule((Clause("service", "poor"),), ("tip", "huge")),))

    def test_missing_input(self, tipper):
        with pytest.raises(MissingInputError, match="food"):
            infer(tipper, {"service": 3})

    def test_rule_weight_range(self):
        with pytest.raises(ValueError):
            Rule((Clause("x", "a"),), ("y", "b"), weight=1.5)


class TestTipper:
    def test_structure(self, tipper):
        assert len(tipper.rules) == 3
        assert {c.variable for c in tipper.rules[1].antecedent} == {"service"}
        assert tipper.output.labels == ("cheap", "average", "generous")
        centres = [s.mf.params[1] for s in tipper.output.sets]
        assert centres == [5.0, 15.0, 25.0]

    def test_golden_corners(self, tipper):
        # Frozen from tests/oracles.tipper_oracle at resolution 10001.
        low, high = 5.0765783879840285, 24.9234216120159
        assert infer(tipper, {"service": 0, "food": 0}, 10001)[0] == pytest.approx(low, abs=1e-9)
        assert infer(tipper, {"service": 10, "food": 10}, 10001)[0] == pytest.approx(high, abs=1e-9)
        assert infer(tipper, {"service": 0, "food": 0})[0] < 10
        assert infer(tipper, {"service": 10, "food": 10})[0] > 20

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10))
    def test_dense_resolution_matches_oracle(self, tipper, s, f):
        assert infer(tipper, {"service": s, "food": f}, 10001)[0] == pytest.approx(tipper_oracle(s, f), abs=1e-9)

    def test_out_of_universe_inputs_are_clamped(self, tipper):
        assert infer(tipper, {"service": -4, "food": 25})[0] == infer(tipper, {"service": 0, "food": 10})[0]

    def test_trace(self, tipper):
        crisp, trace = infer(tipper, {"service": 5, "food": 5})
        assert len(trace.strengths) == 3
        assert trace.strengths[1] == 1.0
        assert trace.grid.shape == trace.aggregate.shape == (101,)
        assert crisp == pytest.approx(15.0, abs=1e-12)

    def test_deterministic(self, tipper):
        a = infer(tipper, {"service": 3.3, "food": 7.7})
        b = infer(tipper, {"service": 3.3, "food": 7.7})
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1].aggregate, b[1].aggregate)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10))
    def test_discretisation_convergence(self, tipper, s, f):
        coarse = infer(tipper, {"service": s, "food": f}, 101)[0]
        fine = infer(tipper, {"service": s, "food": f}, 10100)[0]
        assert abs(coarse - fine) <= 30.0 / 100


class TestInferenceEdges:
    def test_symmetric_consequent_centroid(self):
        system = single_rule_system(MF.triangular(10, 15, 20))
        assert infer(system, {"x": 0.5})[0] == pytest.approx(15.0, abs=1e-12)

    def test_no_rule_fired(self):
        system = single_rule_system(MF.triangular(10, 15, 20), weight=0.0)
        with pytest.raises(NoRuleFiredError):
            infer(system, {"x": 0.5})

    def test_unknown_input_name(self, tipper):
        with pytest.raises(RuleReferenceError):
            infer(tipper, {"service": 1, "food": 1, "ambience": 3})

    def test_universe_requires_order(self):
        with pytest.raises(ValueError):
            Universe(1.0, 1.0)

    def test_duplicate_labels(self):
        with pytest.raises(ValueError):
            LinguisticVariable("v", Universe(0, 1), (FuzzySet("a", MF.crisp_threshold(0)), FuzzySet("a", MF.crisp_threshold(1))))

    def test_norms_reject_unsupported(self):
        with pytest.raises(ValueError):
            NormConfig(t_norm="product")
        with pytest.raises(ValueError):
            NormConfig(resolution=1)
