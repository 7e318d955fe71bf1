import dataclasses

import numpy as np
import pytest

from gnf.fuzzy import FuzzySystem, infer
from gnf.genetic import GAConfig, fitness, flatten
from gnf.network import Dataset, TrainConfig, forward
from gnf.pipeline import (
    PipelineConfig,
    PipelineStageError,
    SamplingPlan,
    benchmark_inference,
    build_network,
    distill,
    evaluate_nets,
    refine,
    run_pipeline,
    sample_system,
)

SMALL = PipelineConfig(
    sampling=SamplingPlan(2.0),
    holdout=SamplingPlan(2.0, 1.0),
    hidden_sizes=(6,),
    train=TrainConfig(max_epochs=40),
    ga=GAConfig(population_size=12, max_generations=15),
    rng_seed=5,
)


class TestSamplingPlan:
    def test_default_axis(self):
        axis = SamplingPlan().axis(0, 10)
        assert len(axis) == 21 and axis[0] == 0 and axis[-1] == 10

    def test_offset_axis(self):
        np.testing.assert_array_equal(SamplingPlan(0.5, 0.25).axis(0, 10), 0.25 + 0.5 * np.arange(20))

    def test_step_not_dividing_span(self):
        np.testing.assert_array_equal(SamplingPlan(3).axis(0, 10), [0, 3, 6, 9])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            SamplingPlan(20).axis(0, 10)

    @pytest.mark.parametrize("kwargs", [{"step": 0}, {"step": -1}, {"offset": -0.5}])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SamplingPlan(**kwargs)


class TestSampling:
    def test_default_grid(self, tipper):
        data = sample_system(tipper)
        assert data.X.shape == (441, 2) and data.T.shape == (441, 1)
        assert data.input_names == ("service", "food") and data.target_names == ("tip",)
        assert np.all((data.T >= 0) & (data.T <= 30))

    def test_lexicographic_order(self, tipper):
        data = sample_system(tipper, SamplingPlan(5))
        assert data.X.tolist() == [[a, b] for a in (0, 5, 10) for b in (0, 5, 10)]

    def test_targets_equal_inference(self, tipper):
        data = sample_system(tipper, SamplingPlan(5))
        for x, t in zip(data.X, data.T):
            assert t[0] == infer(tipper, {"service": x[0], "food": x[1]})[0]

    def test_resolution_passed_through(self, tipper):
        data = sample_system(tipper, SamplingPlan(10), resolution=10001)
        assert data.T[0, 0] == infer(tipper, {"service": 0.0, "food": 0.0}, 10001)[0]


class TestDistill:
    def test_topology(self, tipper):
        net = build_network(tipper, PipelineConfig())
        assert net.layer_sizes == (2, 50, 1)
        assert net.activations == ("tan_sigmoid", "linear")
        assert net.n_params == 201
        np.testing.assert_array_equal(net.input_range[0], [0, 0])
        np.testing.assert_array_equal(net.input_range[1], [10, 10])

    def test_deterministic_and_seed_sensitive(self, tipper):
        a, ta, _ = distill(tipper, SMALL)
        b, tb, _ = distill(tipper, SMALL)
        c, _, _ = distill(tipper, dataclasses.replace(SMALL, rng_seed=6))
        assert a == b and ta.mse == tb.mse
        assert a != c

    def test_training_reduces_error(self, tipper):
        _, trace, _ = distill(tipper, SMALL)
        assert trace.final_mse < trace.initial_mse


class TestRefine:
    def test_never_worse_than_seed(self, tipper):
        nf, _, data = distill(tipper, SMALL)
        gnf, trace = refine(nf, data, SMALL)
        seed_fitness = fitness(flatten(nf), nf, data)
        assert trace.best[0] <= seed_fitness
        assert fitness(flatten(gnf), nf, data) == trace.best_fitness <= seed_fitness

    def test_accepts_bare_ga_config(self, tipper):
        nf, _, data = distill(tipper, SMALL)
        _, t1 = refine(nf, data, SMALL)
        _, t2 = refine(nf, data, SMALL.seeded().ga)
        assert t1.best == t2.best


class TestReport:
    def test_aggregates_are_consistent(self, tipper):
        result = run_pipeline(tipper, SMALL)
        report = result.report
        agg = report.aggregates()
        assert len(report) == 36
        for key, err in (("error1", report.error1), ("error2", report.error2)):
            assert agg[key]["sum"] == pytest.approx(err.sum(), rel=1e-12)
            assert agg[key]["mean"] == pytest.approx(err.mean(), rel=1e-12)
            assert agg[key]["max"] == err.max()
        assert agg["error2"]["sum"] <= agg["error1"]["sum"]
        assert agg["error1"]["sum"] == fitness(flatten(result.nf_net), result.nf_net, result.dataset)
        assert agg["error2"]["sum"] == result.ga_trace.best_fitness
        assert len(result.holdout_report) == 25

    def test_errors_are_absolute_differences(self):
        from gnf.network import Network

        net = Network([[[1.0]]], [[0.0]], ("linear",))
        other = Network([[[1.0]]], [[1.0]], ("linear",))
        data = Dataset([[0.0], [2.0]], [[0.5], [1.0]])
        r = evaluate_nets(net, other, data)
        np.testing.assert_array_equal(r.error1, [0.5, 1.0])
        np.testing.assert_array_equal(r.error2, [0.5, 2.0])

    def test_no_holdout(self, tipper):
        result = run_pipeline(tipper, dataclasses.replace(SMALL, holdout=None))
        assert result.holdout_report is None


class TestStages:
    def test_distill_failure_is_wrapped(self, tipper):
        bad = dataclasses.replace(SMALL, train=TrainConfig(method="gd", learning_rate=1e12, max_epochs=30))
        with pytest.raises(PipelineStageError) as info:
            run_pipeline(tipper, bad)
        assert info.value.stage == "distill"

    def test_sampling_failure_is_wrapped(self):
        from gnf.rulebase import parse

        gappy = parse(
            "system gap\ninput x 0 10\noutput y 0 1\n"
            "set x low triangular 0 0 2\nset y one triangular 0 0.5 1\n"
            "rule if x is low then y is one\n"
        )
        assert isinstance(gappy, FuzzySystem)
        with pytest.raises(PipelineStageError) as info:
            run_pipeline(gappy, SMALL)
        assert info.value.stage == "sample"


def test_network_inference_is_faster(tipper):
    result = run_pipeline(tipper, SMALL)
    timing = benchmark_inference(tipper, result.nf_net, sample_system(tipper), repeats=2)
    assert timing["speedup"] >= 1
    assert forward(result.nf_net, result.dataset.X).shape == (36, 1)
