"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 parse (rule base, run file, model file),
3 evaluation, 4 pipeline stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import jsonschema

from . import reports
from .fuzzy import FuzzyError, FuzzySystem, InferenceError, infer
from .genetic import GAConfig
from .network import ACTIVATIONS, TrainConfig, load_model, model_to_dict, train_backprop
from .pipeline import (
    PipelineConfig,
    PipelineStageError,
    SamplingPlan,
    benchmark_inference,
    build_network,
    evaluate_nets,
    refine,
    run_pipeline,
    sample_system,
)
from .rulebase import ParseError, SourceSpan, load, serialize

log = logging.getLogger("gnf")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_EVAL, EXIT_STAGE = 0, 1, 2, 3, 4
U64_MAX = 2**64 - 1
FILE_START = SourceSpan(1, 1)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64), got {text}")
    return value


def _resolution(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("resolution must be >= 2")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


_PLAN = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"step": {"type": "number", "exclusiveMinimum": 0}, "offset": {"type": "number", "minimum": 0}},
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["rulebase"],
    "properties": {
        "rulebase": {"type": "string"},
        "out_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": U64_MAX},
        "resolution": {"type": ["integer", "null"], "minimum": 2},
        "sampling": _PLAN,
        "holdout": {"oneOf": [_PLAN, {"type": "null"}]},
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "hidden_activation": {"enum": list(ACTIVATIONS)},
                "output_activation": {"enum": list(ACTIVATIONS)},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["lm", "gd"]},
                "learning_rate": {"type": "number", "minimum": 0},
                "max_epochs": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "mu_decrease": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "mu_increase": {"type": "number", "exclusiveMinimum": 1},
                "mu_max": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "ga": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "population_size": {"type": "integer", "minimum": 2},
                "elite_count": {"type": "integer", "minimum": 1},
                "crossover_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "mutation_sigma": {"type": "number", "exclusiveMinimum": 0},
                "sigma_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "max_generations": {"type": "integer", "minimum": 1},
                "fitness_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "init_scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


@dataclasses.dataclass
class RunFile:
    rulebase: Path
    out_dir: Path
    config: PipelineConfig
    document: dict


def load_run_file(path) -> RunFile:
    """Read and validate a JSON run file; raises ``ValueError`` on any problem.

    Relative ``rulebase`` and ``out_dir`` paths resolve against the run
    file's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read run file {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValueError(f"run file {path}: {where}: {exc.message}") from None
    net = doc.get("network", {})
    try:
        holdout = SamplingPlan(0.5, 0.25)
        if "holdout" in doc:
            holdout = None if doc["holdout"] is None else SamplingPlan(**doc["holdout"])
        config = PipelineConfig(
            sampling=SamplingPlan(**doc.get("sampling", {})),
            holdout=holdout,
            hidden_sizes=tuple(net.get("hidden_sizes", (50,))),
            hidden_activation=net.get("hidden_activation", "tan_sigmoid"),
            output_activation=net.get("output_activation", "linear"),
            train=TrainConfig(**doc.get("train", {})),
            ga=GAConfig(**doc.get("ga", {})),
            rng_seed=doc.get("seed", 0),
            resolution=doc.get("resolution"),
        )
    except ValueError as exc:
        raise ValueError(f"run file {path}: {exc}") from None
    base = path.parent
    return RunFile(base / doc["rulebase"], base / doc.get("out_dir", "out"), config, doc)


def config_echo(config: PipelineConfig) -> dict:
    def plan(p):
        return None if p is None else {"step": p.step, "offset": p.offset, "clamp": p.clamp}

    return {
        "seed": config.rng_seed,
        "resolution": config.resolution,
        "sampling": plan(config.sampling),
        "holdout": plan(config.holdout),
        "network": {
            "hidden_sizes": list(config.hidden_sizes),
            "hidden_activation": config.hidden_activation,
            "output_activation": config.output_activation,
        },
        "train": dataclasses.asdict(config.train),
        "ga": dataclasses.asdict(config.ga),
    }


def _load_rulebase(path) -> FuzzySystem:
    try:
        return load(path)
    except OSError as exc:
        raise ParseError("syntax", FILE_START, f"cannot read {path}: {exc.strerror or exc}") from None


def _parse_inputs(pairs) -> dict:
    values = {}
    for pair in pairs or []:
        name, sep, raw = pair.partition("=")
        if not sep or not name:
            raise UsageError(f"--in expects NAME=VALUE, got {pair!r}")
        try:
            values[name] = float(raw)
        except ValueError:
            raise UsageError(f"--in {name}: {raw!r} is not a number") from None
    return values


def cmd_eval(args) -> int:
    system = _load_rulebase(args.rulebase)
    inputs = _parse_inputs(args.inputs)
    crisp, trace = infer(system, inputs, args.resolution)
    print(f"{system.output.name} = {crisp!r}")
    for i, (rule, degree, clip) in enumerate(zip(system.rules, trace.degrees, trace.strengths), start=1):
        print(f"rule {i}: {rule.describe()} | firing={degree:.6g} clip={clip:.6g}")
    return EXIT_OK


def cmd_fmt(args) -> int:
    sys.stdout.write(serialize(_load_rulebase(args.rulebase)))
    return EXIT_OK


def _plan(args) -> SamplingPlan:
    return SamplingPlan(step=args.step, offset=args.offset)


def cmd_sample(args) -> int:
    system = _load_rulebase(args.rulebase)
    text = reports.dataset_csv(sample_system(system, _plan(args), args.resolution))
    if args.out:
        reports.atomic_write(Path(args.out) / "dataset.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _train_config(args) -> PipelineConfig:
    return PipelineConfig(
        sampling=_plan(args),
        hidden_sizes=tuple(args.hidden),
        train=TrainConfig(method=args.method, max_epochs=args.max_epochs, tolerance=args.tolerance),
        ga=GAConfig(max_generations=args.generations),
        rng_seed=args.seed,
        resolution=args.resolution,
    ).seeded()


def cmd_train(args) -> int:
    system = _load_rulebase(args.rulebase)
    config = _train_config(args)
    try:
        data = sample_system(system, config.sampling, config.resolution)
        net, trace = train_backprop(build_network(system, config), data, config.train)
    except InferenceError:
        raise
    except Exception as exc:
        raise PipelineStageError("distill", exc) from exc
    out = Path(args.out)
    reports.atomic_write(out / "dataset.csv", reports.dataset_csv(data))
    reports.atomic_write(out / "nf_model.json", reports.dumps_json(model_to_dict(net)))
    reports.atomic_write(out / "train_trace.csv", reports.train_trace_csv(trace))
    print(f"epochs={trace.epochs_run} final_mse={trace.final_mse!r} converged={str(trace.converged).lower()}")
    return EXIT_OK


def cmd_refine(args) -> int:
    system = _load_rulebase(args.rulebase)
    try:
        nf_net = load_model(args.model)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ParseError("syntax", FILE_START, f"cannot load model {args.model}: {exc}") from None
    config = _train_config(args)
    data = sample_system(system, config.sampling, config.resolution)
    try:
        gnf_net, ga_trace = refine(nf_net, data, config.ga)
    except Exception as exc:
        raise PipelineStageError("refine", exc) from exc
    report = evaluate_nets(nf_net, gnf_net, data)
    out = Path(args.out)
    reports.atomic_write(out / "gnf_model.json", reports.dumps_json(model_to_dict(gnf_net)))
    reports.atomic_write(out / "ga_trace.csv", reports.ga_trace_csv(ga_trace))
    reports.atomic_write(out / "error_report.csv", reports.report_csv(report))
    _print_summary(report, None, ga_trace.generations_run)
    return EXIT_OK


def _print_summary(report, train_trace, generations):
    agg = report.aggregates()
    parts = [f"sum_error1={agg['error1']['sum']!r}", f"sum_error2={agg['error2']['sum']!r}"]
    parts += [f"mean_error1={agg['error1']['mean']!r}", f"mean_error2={agg['error2']['mean']!r}"]
    if train_trace is not None:
        parts.append(f"epochs={train_trace.epochs_run}")
    parts.append(f"generations={generations}")
    print(" ".join(parts))


def cmd_pipeline(args) -> int:
    try:
        run = load_run_file(args.runfile)
    except ValueError as exc:
        raise ParseError("syntax", FILE_START, str(exc)) from None
    config = run.config
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.resolution is not None:
        overrides["resolution"] = args.resolution
    config = dataclasses.replace(config, **overrides).seeded()
    out = Path(args.out) if args.out else run.out_dir
    system = _load_rulebase(run.rulebase)

    result = run_pipeline(system, config)
    files = {
        "rulebase.gnf": serialize(system),
        "dataset.csv": reports.dataset_csv(result.dataset),
        "nf_model.json": reports.dumps_json(model_to_dict(result.nf_net)),
        "gnf_model.json": reports.dumps_json(model_to_dict(result.gnf_net)),
        "train_trace.csv": reports.train_trace_csv(result.train_trace),
        "ga_trace.csv": reports.ga_trace_csv(result.ga_trace),
        "error_report.csv": reports.report_csv(result.report),
    }
    summary = {
        "seed": config.rng_seed,
        "config": config_echo(config),
        "train": {
            "epochs_run": result.train_trace.epochs_run,
            "converged": result.train_trace.converged,
            "final_mse": result.train_trace.final_mse,
            "stop_reason": result.train_trace.stop_reason,
        },
        "ga": {
            "generations_run": result.ga_trace.generations_run,
            "converged": result.ga_trace.converged,
            "best_fitness": result.ga_trace.best_fitness,
        },
    }
    if result.holdout_report is not None:
        files["holdout_report.csv"] = reports.report_csv(result.holdout_report)
        summary["holdout_aggregates"] = result.holdout_report.aggregates()
    files["error_report.json"] = reports.dumps_json(reports.report_dict(result.report, **summary))
    for name, text in files.items():
        reports.atomic_write(out / name, text)

    _print_summary(result.report, result.train_trace, result.ga_trace.generations_run)
    if args.benchmark:
        bench = benchmark_inference(system, result.nf_net, result.dataset)
        log.info(
            "inference over %d points: fuzzy %.4fs, network %.6fs (%.0fx)",
            len(result.dataset), bench["fis_seconds"], bench["net_seconds"], bench["speedup"],
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gnf", description="Genetic neuro-fuzzy toolkit: fuzzy inference, distillation, GA refinement.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate a rule base at one input point and print the rule trace")
    p.add_argument("rulebase")
    p.add_argument("--in", dest="inputs", action="append", metavar="NAME=VALUE", help="input value (repeatable)")
    p.add_argument("--resolution", type=_resolution, help="output grid points for defuzzification")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fmt", help="print the canonical form of a rule base")
    p.add_argument("rulebase")
    p.set_defaults(func=cmd_fmt)

    def grid_args(p):
        p.add_argument("rulebase")
        p.add_argument("--step", type=_positive, default=0.5, help="grid step per input (default 0.5)")
        p.add_argument("--offset", type=float, default=0.0, help="grid offset from each lower bound")
        p.add_argument("--resolution", type=_resolution, help="output grid points for defuzzification")

    p = sub.add_parser("sample", help="sample a rule base on a grid and emit dataset CSV")
    grid_args(p)
    p.add_argument("--out", help="directory for dataset.csv (default: stdout)")
    p.set_defaults(func=cmd_sample)

    def train_args(p):
        grid_args(p)
        p.add_argument("--seed", type=_seed, default=0, help="seed for every random choice (u64)")
        p.add_argument("--hidden", type=int, nargs="+", default=[50], help="hidden layer sizes")
        p.add_argument("--method", choices=["lm", "gd"], default="lm")
        p.add_argument("--max-epochs", type=int, default=5000)
        p.add_argument("--tolerance", type=_positive, default=1e-3)
        p.add_argument("--generations", type=int, default=2000, help="GA generation budget")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="distill a rule base into a backprop-trained network")
    train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("refine", help="GA-refine a trained network against a rule base")
    train_args(p)
    p.add_argument("--model", required=True, help="nf_model.json from `gnf train`")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("pipeline", help="run sample -> train -> refine -> report from a run file")
    p.add_argument("runfile")
    p.add_argument("--seed", type=_seed, help="override the run file's seed")
    p.add_argument("--out", help="override the run file's out_dir")
    p.add_argument("--resolution", type=_resolution, help="override the defuzzification resolution")
    p.add_argument("--benchmark", action="store_true", help="log fuzzy vs network inference timing to stderr")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose or getattr(args, "benchmark", False))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gnf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"gnf: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PipelineStageError as exc:
        print(f"gnf: stage {exc.stage!r} failed: {exc.cause}", file=sys.stderr)
        return EXIT_STAGE
    except (InferenceError, FuzzyError) as exc:
        print(f"gnf: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
