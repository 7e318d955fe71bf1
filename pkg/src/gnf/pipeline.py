"""Fuzzy system -> neural network -> GA-refined network.

:func:`run_pipeline` samples a fuzzy system on a grid, distills the samples
into a feedforward network with backpropagation, refines that network's
weights with the genetic optimizer and compares both networks against the
fuzzy targets.
"""

from __future__ import annotations

import dataclasses
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .fuzzy import FuzzySystem, InferenceError, infer
from .genetic import GAConfig, GATrace, evolve, flatten
from .network import Dataset, Network, TrainConfig, TrainTrace, forward, init_network, train_backprop

__all__ = [
    "SamplingPlan",
    "PipelineConfig",
    "ErrorReport",
    "PipelineResult",
    "PipelineStageError",
    "SamplingError",
    "sample_system",
    "build_network",
    "distill",
    "refine",
    "evaluate_nets",
    "run_pipeline",
    "benchmark_inference",
]


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


class SamplingError(InferenceError):
    def __init__(self, point: dict, cause: BaseException):
        super().__init__(f"cannot sample at {point}: {cause}")
        self.point = point


@dataclass(frozen=True)
class SamplingPlan:
    """Cartesian grid ``lo + offset + k * step`` over each input universe.

    With ``clamp`` set, points are clipped into the universe; otherwise
    only points inside it are kept.
    """

    step: float = 0.5
    offset: float = 0.0
    clamp: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("sampling step must be positive")
        if not self.offset >= 0:
            raise ValueError("sampling offset must be non-negative")

    def axis(self, lo: float, hi: float) -> np.ndarray:
        span = hi - lo - self.offset
        count = int(np.floor(span / self.step + 1e-9)) + 1 if span >= 0 else 0
        points = lo + self.offset + self.step * np.arange(count)
        points = np.clip(points, lo, hi) if self.clamp else points[points <= hi]
        if len(points) < 2:
            raise ValueError(f"sampling plan gives {len(points)} point(s) on [{lo}, {hi}]; need >= 2")
        return points


def sample_system(system: FuzzySystem, plan: SamplingPlan = SamplingPlan(), resolution: int | None = None) -> Dataset:
    """Fuzzy-system targets on the plan's grid, in lexicographic grid order."""
    axes = [plan.axis(v.universe.lo, v.universe.hi) for v in system.inputs]
    names = system.input_names
    X = np.array(list(itertools.product(*axes)), dtype=float)
    T = np.empty(len(X))
    for i, row in enumerate(X):
        point = dict(zip(names, row.tolist()))
        try:
            T[i] = infer(system, point, resolution)[0]
        except InferenceError as exc:
            raise SamplingError(point, exc) from exc
    return Dataset(X, T, names, (system.output.name,))


@dataclass
class PipelineConfig:
    sampling: SamplingPlan = SamplingPlan()
    holdout: SamplingPlan | None = SamplingPlan(0.5, 0.25)
    hidden_sizes: tuple[int, ...] = (50,)
    hidden_activation: str = "tan_sigmoid"
    output_activation: str = "linear"
    train: TrainConfig = field(default_factory=TrainConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    rng_seed: int = 0
    resolution: int | None = None

    def seeded(self) -> "PipelineConfig":
        """Copy whose training and GA configs take their seed from ``rng_seed``."""
        return dataclasses.replace(
            self,
            train=dataclasses.replace(self.train, rng_seed=self.rng_seed),
            ga=dataclasses.replace(self.ga, rng_seed=self.rng_seed),
        )


def build_network(system: FuzzySystem, config: PipelineConfig) -> Network:
    sizes = [len(system.inputs), *config.hidden_sizes, 1]
    acts = [config.hidden_activation] * len(config.hidden_sizes) + [config.output_activation]
    lo = [v.universe.lo for v in system.inputs]
    hi = [v.universe.hi for v in system.inputs]
    return init_network(sizes, acts, config.train.rng_seed, input_range=(lo, hi))


def distill(system: FuzzySystem, config: PipelineConfig) -> tuple[Network, TrainTrace, Dataset]:
    config = config.seeded()
    data = sample_system(system, config.sampling, config.resolution)
    net, trace = train_backprop(build_network(system, config), data, config.train)
    return net, trace, data


def refine(net: Network, data: Dataset, config: PipelineConfig | GAConfig) -> tuple[Network, GATrace]:
    """GA refinement seeded with ``net``.

    The population starts as ``net``'s genome plus gaussian perturbations
    of it with standard deviation ``mutation_sigma``.
    """
    ga = config.seeded().ga if isinstance(config, PipelineConfig) else config
    seed = flatten(net)
    rng = np.random.default_rng([ga.rng_seed, 1])
    perturbed = seed + rng.normal(0.0, ga.mutation_sigma, size=(ga.population_size - 1, seed.size))
    return evolve(net, data, ga, [seed, *perturbed])


@dataclass(eq=False)
class ErrorReport:
    """Per-sample comparison of both networks against fuzzy targets.

    ``error1`` is the neuro-fuzzy network's absolute error, ``error2`` the
    GA-refined network's; for several outputs the errors are summed across
    them.
    """

    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    X: np.ndarray
    target: np.ndarray
    nf_out: np.ndarray
    gnf_out: np.ndarray

    @property
    def error1(self) -> np.ndarray:
        return np.abs(self.target - self.nf_out).sum(axis=1)

    @property
    def error2(self) -> np.ndarray:
        return np.abs(self.target - self.gnf_out).sum(axis=1)

    def __len__(self):
        return len(self.X)

    def aggregates(self) -> dict:
        out = {}
        for name, y in (("error1", self.nf_out), ("error2", self.gnf_out)):
            residual = np.abs(self.target - y)
            per_sample = residual.sum(axis=1)
            out[name] = {
                # Same reduction as the GA fitness, so sums compare exactly.
                "sum": float(np.sum(residual)),
                "mean": float(np.mean(per_sample)),
                "max": float(np.max(per_sample)),
            }
        return out


def evaluate_nets(nf_net: Network, gnf_net: Network, data: Dataset) -> ErrorReport:
    return ErrorReport(
        data.input_names,
        data.target_names,
        data.X,
        data.T,
        forward(nf_net, data.X),
        forward(gnf_net, data.X),
    )


@dataclass(eq=False)
class PipelineResult:
    config: PipelineConfig
    dataset: Dataset
    nf_net: Network
    gnf_net: Network
    train_trace: TrainTrace
    ga_trace: GATrace
    report: ErrorReport
    holdout_report: ErrorReport | None


def run_pipeline(system: FuzzySystem, config: PipelineConfig | None = None) -> PipelineResult:
    """Distill, refine and report; failures are wrapped in :class:`PipelineStageError`."""
    config = (config or PipelineConfig()).seeded()
    try:
        data = sample_system(system, config.sampling, config.resolution)
    except Exception as exc:
        raise PipelineStageError("sample", exc) from exc
    try:
        nf_net, train_trace = train_backprop(build_network(system, config), data, config.train)
    except Exception as exc:
        raise PipelineStageError("distill", exc) from exc
    try:
        gnf_net, ga_trace = refine(nf_net, data, config.ga)
    except Exception as exc:
        raise PipelineStageError("refine", exc) from exc
    try:
        report = evaluate_nets(nf_net, gnf_net, data)
        holdout = None
        if config.holdout is not None:
            held = sample_system(system, config.holdout, config.resolution)
            holdout = evaluate_nets(nf_net, gnf_net, held)
    except Exception as exc:
        raise PipelineStageError("report", exc) from exc
    return PipelineResult(config, data, nf_net, gnf_net, train_trace, ga_trace, report, holdout)


def benchmark_inference(system: FuzzySystem, net: Network, data: Dataset, repeats: int = 3) -> dict:
    """Best-of-``repeats`` wall time for fuzzy inference vs the network on ``data``."""
    names = system.input_names
    points = [dict(zip(names, row.tolist())) for row in data.X]

    def fis():
        for p in points:
            infer(system, p)

    def nn():
        forward(net, data.X)

    timings = {}
    for label, fn in (("fis_seconds", fis), ("net_seconds", nn)):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        timings[label] = best
    timings["speedup"] = timings["fis_seconds"] / max(timings["net_seconds"], 1e-12)
    return timings
