"""Command-line interface: dataset generation, training, gradient
verification, and the four-panel benchmark reproduction.

Subcommands:
    gen-data    write a Tetris dataset file (JSON lines)
    train       train one model/architecture/label combination, write a
                metrics CSV and a summary JSON
    gradcheck   compare parameter-shift gradients against central finite
                differences on randomized circuits
    repro       run every model/architecture combination for the selected
                panels and write one CSV per panel plus a summary JSON

Settings resolve in precedence order: built-in defaults, then a
``--config`` file of flat ``key = value`` lines (``#`` comments allowed,
unknown keys rejected), then command-line flags.

Exit codes: 0 success, 1 configuration error, 2 runtime/divergence
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pqc import PARAM_SHIFT, build_circuit, input_grad, param_shift_grad, quantum_feature
from .tetris import CLASS_NAMES, enumerate_configurations, filter_labels, generate_dataset, save_dataset
from .training import (
    ARCHITECTURES,
    DEFAULT_SEEDS,
    LABEL_CHOICES,
    MODELS,
    ExperimentResult,
    TrainConfig,
    TrainingDivergedError,
    run_experiment,
)

GRADCHECK_TOLERANCE = 1e-6

# Fig-style panels: (metric, label count).  Accuracy panels plot the mean
# test accuracy, loss panels the mean training loss.
PANELS = {
    "a": ("accuracy", 2),
    "b": ("accuracy", 5),
    "c": ("loss", 2),
    "d": ("loss", 5),
}

_CONFIG_COERCERS = {
    "model": str,
    "architecture": str,
    "labels": int,
    "images": int,
    "iterations": int,
    "learning_rate": float,
    "batch_size": int,
    "eval_every": int,
    "seeds": str,
    "out_dir": str,
}

DEFAULTS = {
    "model": "qccnn",
    "architecture": "one-layer",
    "labels": 2,
    "images": 1000,
    "iterations": 1000,
    "learning_rate": 0.01,
    "batch_size": 0,
    "eval_every": 10,
    "seeds": ",".join(str(s) for s in DEFAULT_SEEDS),
    "out_dir": "results",
}


class ConfigError(ValueError):
    """Invalid configuration value, file, or flag."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    architecture: str
    labels: int
    images: int
    iterations: int
    learning_rate: float
    batch_size: int
    eval_every: int
    seeds: tuple[int, ...]
    out_dir: str

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            eval_every=self.eval_every,
            seeds=self.seeds,
        )

    def echo(self) -> dict:
        return {
            "model": self.model,
            "architecture": self.architecture,
            "labels": self.labels,
            "images": self.images,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "eval_every": self.eval_every,
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
        }


def parse_seeds(value: str) -> tuple[int, ...]:
    """Either a count ("10" -> seeds 0..9) or an explicit list ("0,3,7")."""
    text = str(value).strip()
    try:
        if "," in text:
            seeds = tuple(int(part) for part in text.split(",") if part.strip())
        else:
            count = int(text)
            if count < 1:
                raise ConfigError(f"seeds: need a positive count, got {count}")
            seeds = tuple(range(count))
    except ValueError as exc:
        raise ConfigError(f"seeds: cannot parse {value!r}") from exc
    if not seeds:
        raise ConfigError(f"seeds: empty seed list from {value!r}")
    return seeds


def parse_config_file(path: str) -> dict:
    """Flat key = value lines; unknown keys are rejected by name."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {line_no}: expected 'key = value'")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_COERCERS:
            raise ConfigError(f"{path}: line {line_no}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_COERCERS[key](text.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: line {line_no}: bad value for {key}: {text.strip()!r}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then config file, then explicit command-line flags."""
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in _CONFIG_COERCERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values["model"] not in MODELS:
        raise ConfigError(f"model: expected one of {MODELS}, got {values['model']!r}")
    if values["architecture"] not in ARCHITECTURES:
        raise ConfigError(
            f"architecture: expected one of {ARCHITECTURES}, got {values['architecture']!r}"
        )
    if values["labels"] not in LABEL_CHOICES:
        raise ConfigError(f"labels: expected one of {LABEL_CHOICES}, got {values['labels']}")
    if values["images"] < 2:
        raise ConfigError(f"images: need at least 2, got {values['images']}")
    if values["iterations"] < 1:
        raise ConfigError(f"iterations: must be >= 1, got {values['iterations']}")
    if values["learning_rate"] <= 0:
        raise ConfigError(f"learning_rate: must be > 0, got {values['learning_rate']}")
    if values["batch_size"] < 0:
        raise ConfigError(f"batch_size: must be >= 0, got {values['batch_size']}")
    if values["eval_every"] < 1:
        raise ConfigError(f"eval_every: must be >= 1, got {values['eval_every']}")
    return ExperimentConfig(
        model=values["model"],
        architecture=values["architecture"],
        labels=values["labels"],
        images=values["images"],
        iterations=values["iterations"],
        learning_rate=values["learning_rate"],
        batch_size=values["batch_size"],
        eval_every=values["eval_every"],
        seeds=parse_seeds(values["seeds"]),
        out_dir=values["out_dir"],
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_metrics_csv(path: Path, result: ExperimentResult) -> None:
    """Per-seed and mean series, 17 significant digits, stable schema."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["iteration"]
        for seed in result.seeds:
            header += [f"seed{seed}_train_loss", f"seed{seed}_test_loss", f"seed{seed}_test_accuracy"]
        header += ["mean_train_loss", "mean_test_loss", "mean_test_accuracy"]
        writer.writerow(header)
        for i, mean in enumerate(result.mean):
            row = [str(mean.iteration)]
            for run in result.per_seed:
                row += [_fmt(run[i].train_loss), _fmt(run[i].test_loss), _fmt(run[i].test_accuracy)]
            row += [_fmt(mean.train_loss), _fmt(mean.test_loss), _fmt(mean.test_accuracy)]
            writer.writerow(row)


def _final_summary(result: ExperimentResult) -> dict:
    final = result.mean[-1]
    return {
        "iteration": final.iteration,
        "mean_train_loss": final.train_loss,
        "mean_test_loss": final.test_loss,
        "mean_test_accuracy": final.test_accuracy,
    }


def cmd_gen_data(args: argparse.Namespace) -> int:
    if args.n < 1:
        raise ConfigError(f"n: must be >= 1, got {args.n}")
    dataset = generate_dataset(args.n, args.seed)
    if args.labels != "all":
        names = tuple(part.strip() for part in args.labels.split(",") if part.strip())
        try:
            dataset = filter_labels(dataset, names)
        except ValueError as exc:
            raise ConfigError(f"labels: {exc}") from exc
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} samples to {args.out}")
    for name in CLASS_NAMES:
        print(f"  class {name}: {len(enumerate_configurations(name))} configurations")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    started = time.perf_counter()
    result = run_experiment(
        config.architecture, config.model, config.labels,
        config.train_config(), n_images=config.images,
    )
    wall = time.perf_counter() - started
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{config.model}_{config.architecture}_{config.labels}label"
    csv_path = out_dir / f"metrics_{stem}.csv"
    write_metrics_csv(csv_path, result)
    summary = {
        "config": config.echo(),
        "final": _final_summary(result),
        "wall_time_seconds": wall,
    }
    json_path = out_dir / f"summary_{stem}.json"
    json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    final = result.mean[-1]
    print(f"{stem}: final mean test accuracy {final.test_accuracy:.4f}, "
          f"mean test loss {final.test_loss:.6f} ({wall:.1f}s)")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _central_difference(fn, values: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.empty(values.size)
    for j in range(values.size):
        shifted = values.copy()
        shifted[j] = values[j] + h
        up = fn(shifted)
        shifted[j] = values[j] - h
        down = fn(shifted)
        grad[j] = (up - down) / (2.0 * h)
    return grad


def run_gradient_check(cases: int, seed: int, depth: int | None = None,
                       inject_shift: float | None = None,
                       tolerance: float = GRADCHECK_TOLERANCE) -> dict:
    """Randomized parameter-shift vs finite-difference comparison.

    ``inject_shift`` deliberately replaces the quarter-turn shift in the
    checked rule, for verifying that the check itself catches a wrong
    shift; production gradients always use the exact value.
    """
    rng = np.random.default_rng(seed)
    worst = {"deviation": 0.0, "case": None, "n_qubits": None, "depth": None, "kind": None}

    def shifted_rule(spec, params, window, shift):
        grads_p = np.empty(spec.param_count)
        for j in range(spec.param_count):
            p = params.copy()
            p[j] = params[j] + shift
            up = quantum_feature(spec, p, window)
            p[j] = params[j] - shift
            down = quantum_feature(spec, p, window)
            grads_p[j] = up - down
        grads_w = np.empty(spec.n_qubits)
        for q in range(spec.n_qubits):
            w = window.copy()
            w[q] = window[q] + shift
            up = quantum_feature(spec, params, w)
            w[q] = window[q] - shift
            down = quantum_feature(spec, params, w)
            grads_w[q] = up - down
        return grads_p, grads_w

    for case in range(cases):
        n = int(rng.choice([2, 4]))
        d = depth if depth is not None else int(rng.integers(1, 5))
        spec = build_circuit(n, d)
        params = rng.uniform(0.0, 2.0 * np.pi, spec.param_count)
        window = rng.uniform(0.0, 2.0 * np.pi, n)
        if inject_shift is None:
            got_p = param_shift_grad(spec, params, window)
            got_w = input_grad(spec, params, window)
        else:
            got_p, got_w = shifted_rule(spec, params, window, inject_shift)
        fd_p = _central_difference(lambda p: quantum_feature(spec, p, window), params)
        fd_w = _central_difference(lambda w: quantum_feature(spec, params, w), window)
        for kind, got, want in (("parameter", got_p, fd_p), ("input", got_w, fd_w)):
            if got.size == 0:
                continue
            deviation = float(np.max(np.abs(got - want)))
            if deviation > worst["deviation"]:
                worst = {"deviation": deviation, "case": case, "n_qubits": n, "depth": d,
                         "kind": kind}
    return {
        "cases": cases,
        "tolerance": tolerance,
        "shift": PARAM_SHIFT if inject_shift is None else inject_shift,
        "max_deviation": worst["deviation"],
        "worst": worst,
        "passed": worst["deviation"] <= tolerance,
    }


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.cases < 1:
        raise ConfigError(f"cases: must be >= 1, got {args.cases}")
    if args.depth is not None and args.depth < 0:
        raise ConfigError(f"depth: must be >= 0, got {args.depth}")
    report = run_gradient_check(args.cases, args.seed, depth=args.depth,
                                inject_shift=args.inject_shift)
    print(f"gradcheck: {report['cases']} random circuits, shift {report['shift']:.6f} rad")
    print(f"max deviation vs central finite differences: {report['max_deviation']:.3e} "
          f"(tolerance {report['tolerance']:.1e})")
    if report["passed"]:
        print("gradcheck: PASS")
        return 0
    worst = report["worst"]
    print(f"gradcheck: FAIL at case {worst['case']} "
          f"(n_qubits={worst['n_qubits']}, depth={worst['depth']}, {worst['kind']} gradient, "
          f"deviation {worst['deviation']:.3e})")
    return 2


def cmd_repro(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    panels = sorted(PANELS) if args.panel == "all" else [args.panel]
    label_counts = sorted({PANELS[p][1] for p in panels})
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.seeds != DEFAULT_SEEDS:
        print(f"note: reduced/custom seed set {list(config.seeds)} "
              f"(default is {list(DEFAULT_SEEDS)})")

    started = time.perf_counter()
    results: dict[tuple[str, str, int], ExperimentResult] = {}
    for labels in label_counts:
        for model in MODELS:
            for architecture in ARCHITECTURES:
                print(f"running {model} {architecture} {labels}-label "
                      f"({len(config.seeds)} seeds, {config.iterations} iterations)...")
                results[(model, architecture, labels)] = run_experiment(
                    architecture, model, labels, config.train_config(),
                    n_images=config.images,
                )

    written = []
    for panel in panels:
        metric, labels = PANELS[panel]
        path = out_dir / f"panel_{panel}_{metric}_{labels}label.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            columns = [(m, a) for m in ("cnn", "qccnn") for a in ARCHITECTURES]
            writer.writerow(["iteration"] + [f"{m}_{a.replace('-', '_')}" for m, a in columns])
            series = [results[(m, a, labels)].mean for m, a in columns]
            for i in range(len(series[0])):
                row = [str(series[0][i].iteration)]
                for mean in series:
                    value = mean[i].test_accuracy if metric == "accuracy" else mean[i].train_loss
                    row.append(_fmt(value))
                writer.writerow(row)
        written.append(path)
        print(f"wrote {path}")

    loss_ordering = {}
    for labels in label_counts:
        for architecture in ARCHITECTURES:
            q = results[("qccnn", architecture, labels)].mean[-1].train_loss
            c = results[("cnn", architecture, labels)].mean[-1].train_loss
            key = f"{architecture}_{labels}label"
            loss_ordering[key] = {
                "qccnn_final_train_loss": q,
                "cnn_final_train_loss": c,
                "qccnn_below_cnn": bool(q < c),
            }
    reproduced = all(v["qccnn_below_cnn"] for v in loss_ordering.values())
    if not reproduced:
        print("reproduction discrepancy: QCCNN final loss is not below the CNN baseline "
              "for every pair under this seed set")
    summary = {
        "config": config.echo(),
        "panels": [str(p) for p in written],
        "runs": {
            f"{m}_{a}_{l}label": _final_summary(r) for (m, a, l), r in sorted(results.items())
        },
        "loss_ordering": loss_ordering,
        "loss_ordering_reproduced": reproduced,
        "wall_time_seconds": time.perf_counter() - started,
    }
    summary_path = out_dir / "repro_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {summary_path}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are config errors (exit 1)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qconv", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a Tetris dataset file")
    gen.add_argument("--n", type=int, default=1000, help="number of images (default 1000)")
    gen.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    gen.add_argument("--labels", default="all",
                     help="'all' or comma-separated class names, e.g. S,T (default all)")
    gen.add_argument("--out", default="tetris_dataset.jsonl",
                     help="output path (default tetris_dataset.jsonl)")
    gen.set_defaults(func=cmd_gen_data)

    def add_experiment_flags(p, with_model=True):
        p.add_argument("--config", help="flat key = value config file")
        if with_model:
            p.add_argument("--model", choices=MODELS, help="default qccnn")
            p.add_argument("--arch", dest="architecture", choices=ARCHITECTURES,
                           help="default one-layer")
            p.add_argument("--labels", type=int, choices=LABEL_CHOICES, help="default 2")
        p.add_argument("--images", type=int, help="dataset size per seed (default 1000)")
        p.add_argument("--iterations", type=int, help="training iterations (default 1000)")
        p.add_argument("--lr", dest="learning_rate", type=float,
                       help="ADAM learning rate (default 0.01)")
        p.add_argument("--batch-size", dest="batch_size", type=int,
                       help="mini-batch size, 0 = full batch (default 0)")
        p.add_argument("--eval-every", dest="eval_every", type=int,
                       help="record metrics every this many iterations (default 10)")
        p.add_argument("--seeds", help="seed count or comma list (default 0..9)")
        p.add_argument("--out-dir", dest="out_dir", help="output directory (default results)")

    tr = sub.add_parser("train", help="train one combination, write CSV + summary JSON")
    add_experiment_flags(tr)
    tr.set_defaults(func=cmd_train)

    gc = sub.add_parser("gradcheck", help="parameter-shift vs finite differences")
    gc.add_argument("--cases", type=int, default=200, help="random circuits (default 200)")
    gc.add_argument("--seed", type=int, default=0, help="case generator seed (default 0)")
    gc.add_argument("--depth", type=int, default=None,
                    help="fix the circuit depth (default: random 1..4)")
    gc.add_argument("--inject-shift", dest="inject_shift", type=float, default=None,
                    help="fault injection: replace the exact pi/4 shift in the checked rule")
    gc.set_defaults(func=cmd_gradcheck)

    rp = sub.add_parser("repro", help="reproduce the four benchmark panels")
    add_experiment_flags(rp, with_model=False)
    rp.add_argument("--panel", choices=[*sorted(PANELS), "all"], default="all",
                    help="which panel to produce (default all)")
    rp.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())
