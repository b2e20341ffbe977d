"""Experiment presets: config files, run orchestration, and trace/CSV emission.

Config files are INI-style (sections of key = value pairs); every default
mirrors the experiment conventions used throughout the library (16 walkers,
initialization spread 0.1, stop threshold 1e-8, dimension-derived learning
rates). Traces are CSV with a commented header (schema version, config echo,
seed, code version) and contain no timestamps, so re-running a config with the
same seeds reproduces the files byte for byte.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import AnsatzSpec, template_to_text
from .batching import PartitionStrategy, batch_optimize, make_partition
from .gradients import (
    GdConfig,
    VarianceScanConfig,
    energy_loss_gradient,
    gradient_descent,
    hybrid_optimize,
    local_cost_observable,
    stateprep_loss_gradient,
    surrogate_gradient_variance_scan,
)
from .hamiltonian import (
    bundled_hamiltonian_path,
    exact_ground_energy,
    load_pauli_file,
    vqe_fitness,
    vqe_fitness_batch,
)
from .nes import (
    FullDistribution,
    IsotropicDistribution,
    NesConfig,
    SeparableDistribution,
    optimize,
)
from .numerics import SeededRng
from .simulator import stateprep_fitness, stateprep_fitness_batch
from .trace import RunTrace

EXPERIMENT_KINDS = ("stateprep", "vqe", "variance_scan", "batch", "hybrid", "compare_gd")
OPTIMIZER_KINDS = ("canonical", "snes", "xnes", "gd")

TRACE_SCHEMA = "iteration,evaluations,loss,spread_max,batch_cursor"
SUMMARY_SCHEMA = "iteration,loss_mean,loss_min,loss_max"
SCAN_SCHEMA = "sigma_init,k,variance_surrogate,variance_exact"
SNAPSHOT_SCHEMA = "iteration,param_index,gradient"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    experiment: str
    seeds: tuple[int, ...]
    out_dir: Path
    max_iterations: int
    ansatz: AnsatzSpec | None
    optimizer: str = "snes"
    walkers: int = 16
    sigma_init: float = 0.1
    stop_threshold: float = 1e-8
    workers: int = 0
    gd_learning_rate: float | None = None
    gd_max_iterations: int | None = None
    gd_tolerance: float = 1e-8
    batch_strategy: str = "random"
    batch_size: int | None = None
    scan_num_inits: int = 500
    scan_sigma_values: tuple[float, ...] = ()
    scan_walker_counts: tuple[int, ...] = ()
    hybrid_warmup: int = 5
    hybrid_snapshot_interval: int = 0
    hamiltonian_path: Path | None = None
    echo: dict = field(default_factory=dict)


def _parse_angle_token(token: str) -> float:
    if token == "pi":
        return math.pi
    if token.startswith("pi/"):
        return math.pi / float(token[3:])
    return float(token)


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    def require(section, key):
        value = get(section, key)
        if value is None:
            raise ConfigError(f"missing required config key [{section}] {key}")
        return value

    experiment = require("experiment", "kind")
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {experiment!r}")
    try:
        seeds = tuple(int(s) for s in require("experiment", "seeds").split())
    except ValueError as exc:
        raise ConfigError(f"invalid seeds list: {exc}") from exc
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    out_dir = base_dir / get("experiment", "out", "runs/out")
    max_iterations = int(get("experiment", "max_iterations", "500"))

    ansatz = None
    if parser.has_section("ansatz"):
        family = require("ansatz", "family")
        ansatz = AnsatzSpec(
            family=family,
            num_qubits=int(require("ansatz", "qubits")),
            num_layers=int(require("ansatz", "layers")),
            structure_seed=int(get("ansatz", "structure_seed", "0")),
        )
    elif experiment != "variance_scan":
        raise ConfigError("missing [ansatz] section")

    optimizer = get("optimizer", "kind", "snes")
    if optimizer not in OPTIMIZER_KINDS:
        raise ConfigError(f"unknown optimizer kind {optimizer!r}")

    config = ExperimentConfig(
        experiment=experiment,
        seeds=seeds,
        out_dir=out_dir,
        max_iterations=max_iterations,
        ansatz=ansatz,
        optimizer=optimizer,
        walkers=int(get("optimizer", "walkers", "16")),
        sigma_init=float(get("optimizer", "sigma_init", "0.1")),
        stop_threshold=float(get("optimizer", "stop_threshold", "1e-8")),
        workers=int(get("optimizer", "workers", "0")),
        gd_tolerance=float(get("gradient_descent", "tolerance", "1e-8")),
        batch_strategy=get("batch", "strategy", "random"),
        scan_num_inits=int(get("variance_scan", "num_inits", "500")),
        hybrid_warmup=int(get("hybrid", "warmup", "5")),
        hybrid_snapshot_interval=int(get("hybrid", "snapshot_interval", "0")),
    )
    if get("gradient_descent", "learning_rate") is not None:
        config.gd_learning_rate = float(get("gradient_descent", "learning_rate"))
    if get("gradient_descent", "max_iterations") is not None:
        config.gd_max_iterations = int(get("gradient_descent", "max_iterations"))
    if get("batch", "size") is not None:
        config.batch_size = int(get("batch", "size"))
    config.scan_sigma_values = tuple(
        _parse_angle_token(t) for t in get("variance_scan", "sigma_values", "pi/8 pi/16 pi/32").split()
    )
    config.scan_walker_counts = tuple(
        int(t) for t in get("variance_scan", "walker_counts", "1 2 4 8").split()
    )
    ham = get("vqe", "hamiltonian")
    if ham is not None:
        if ham.startswith("bundled:"):
            config.hamiltonian_path = bundled_hamiltonian_path(ham.split(":", 1)[1])
        else:
            config.hamiltonian_path = base_dir / ham

    config.echo = {
        f"{section}.{key}": value
        for section in parser.sections()
        for key, value in parser.items(section)
    }
    _validate(config)
    return config


def _validate(config: ExperimentConfig) -> None:
    if config.walkers < 1:
        raise ConfigError("walkers must be >= 1")
    if config.optimizer in ("snes", "xnes") and config.walkers < 2:
        raise ConfigError("snes/xnes need at least 2 walkers")
    if not config.sigma_init > 0:
        raise ConfigError("sigma_init must be positive")
    needs_gd = config.experiment in ("compare_gd", "hybrid") or config.optimizer == "gd"
    if needs_gd and config.gd_learning_rate is None:
        raise ConfigError("[gradient_descent] learning_rate is required for this experiment")
    if config.experiment == "vqe":
        if config.hamiltonian_path is None:
            raise ConfigError("[vqe] hamiltonian is required for the vqe experiment")
        if not config.hamiltonian_path.exists():
            raise ConfigError(f"hamiltonian file not found: {config.hamiltonian_path}")
    if config.experiment == "batch":
        if config.batch_strategy not in ("random", "layer_wise", "qubit_wise",
                                         "layer_block", "qubit_block"):
            raise ConfigError(f"unknown batch strategy {config.batch_strategy!r}")
        if config.optimizer not in ("snes", "xnes"):
            raise ConfigError("batch experiment needs optimizer snes or xnes")
    if config.experiment == "variance_scan":
        if config.scan_num_inits < 2:
            raise ConfigError("variance_scan num_inits must be >= 2")
        if config.ansatz is None:
            raise ConfigError("missing [ansatz] section")


def load_config(path, overrides: dict[str, str] | None = None, seeds=None,
                out_dir=None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if overrides:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        for dotted, value in overrides.items():
            if "." not in dotted:
                raise ConfigError(f"override key must look like section.key, got {dotted!r}")
            section, key = dotted.split(".", 1)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, value)
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser.items(section))
        text = "\n".join(lines)
    config = parse_config_text(text, base_dir=path.parent)
    if seeds is not None:
        config.seeds = tuple(int(s) for s in seeds)
        config.echo["experiment.seeds"] = " ".join(str(s) for s in config.seeds)
    if out_dir is not None:
        config.out_dir = Path(out_dir)
        config.echo["experiment.out"] = str(out_dir)
    _validate(config)
    return config


def _header_lines(kind: str, config: ExperimentConfig, seed: int | None = None,
                  extra: dict | None = None) -> list[str]:
    lines = [
        f"# qnes-{kind} v1",
        f"# config: {json.dumps(config.echo, sort_keys=True)}",
    ]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    lines.append(f"# version: {__version__}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_trace_csv(path: Path, trace: RunTrace, config: ExperimentConfig, seed: int,
                    extra: dict | None = None) -> None:
    lines = _header_lines("trace", config, seed, extra)
    lines.append(TRACE_SCHEMA)
    for it, evals, loss, spread, cursor in trace.rows():
        lines.append(f"{it},{evals},{loss!r},{spread!r},{cursor}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_snapshot_csv(path: Path, trace: RunTrace, config: ExperimentConfig, seed: int) -> None:
    lines = _header_lines("gradient-snapshots", config, seed)
    lines.append(SNAPSHOT_SCHEMA)
    for snap in trace.gradient_snapshots:
        for j, g in enumerate(snap.components):
            lines.append(f"{snap.iteration},{j},{float(g)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("iteration"):
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"trace {path} has no data rows")
    data = np.asarray(rows)
    return {
        "iteration": data[:, 0].astype(int),
        "evaluations": data[:, 1].astype(int),
        "loss": data[:, 2],
        "spread_max": data[:, 3],
        "batch_cursor": data[:, 4].astype(int),
    }


def summarize(trace_paths) -> list[tuple[int, float, float, float]]:
    """Per-iteration mean/min/max of the loss across trace files.

    All traces must share an identical iteration grid.
    """
    traces = [read_trace_csv(p) for p in trace_paths]
    if not traces:
        raise ValueError("summarize needs at least one trace")
    grid = traces[0]["iteration"]
    for t in traces[1:]:
        if not np.array_equal(t["iteration"], grid):
            raise ValueError("traces have mismatched iteration grids")
    losses = np.stack([t["loss"] for t in traces])
    return [
        (int(it), float(m), float(lo), float(hi))
        for it, m, lo, hi in zip(grid, losses.mean(axis=0), losses.min(axis=0), losses.max(axis=0))
    ]


def write_summary_csv(path: Path, rows, config: ExperimentConfig,
                      extra: dict | None = None) -> None:
    lines = _header_lines("summary", config, None, extra)
    lines.append(SUMMARY_SCHEMA)
    for it, mean, lo, hi in rows:
        lines.append(f"{it},{mean!r},{lo!r},{hi!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _truncate_to_common_grid(traces: list[RunTrace]) -> None:
    # early stopping can desynchronize seeds; summaries use the shared prefix
    shortest = min(len(t) for t in traces)
    for t in traces:
        del t.iterations[shortest:], t.evaluations[shortest:], t.losses[shortest:]
        del t.spreads[shortest:], t.batch_cursors[shortest:]


def _nes_config(config: ExperimentConfig) -> NesConfig:
    return NesConfig(
        population=config.walkers,
        max_iterations=config.max_iterations,
        stop_threshold=config.stop_threshold,
    )


def _initial_distribution(config: ExperimentConfig, mu0: np.ndarray):
    if config.optimizer == "snes":
        return SeparableDistribution(mu=mu0, sigma=np.full(mu0.size, config.sigma_init))
    if config.optimizer == "xnes":
        return FullDistribution.isotropic(mu0, config.sigma_init)
    return IsotropicDistribution(mu=mu0, sigma=config.sigma_init)


def _stateprep_functions(template):
    return (lambda z: stateprep_fitness(template, z),
            lambda rows: stateprep_fitness_batch(template, rows))


def _run_nes(config: ExperimentConfig, template, fitness, fitness_batch, seed: int) -> RunTrace:
    rng = SeededRng(seed)
    mu0 = rng.uniform(template.num_params, 0.0, 2.0 * np.pi)
    dist = _initial_distribution(config, mu0)
    trace = RunTrace()
    optimize(fitness, dist, _nes_config(config), rng, trace=trace,
             fitness_batch=None if config.workers else fitness_batch,
             n_workers=config.workers)
    return trace


def _run_gd(config: ExperimentConfig, template, loss_fn, grad_fn, seed: int) -> RunTrace:
    rng = SeededRng(seed)
    x0 = rng.uniform(template.num_params, 0.0, 2.0 * np.pi)
    gd = GdConfig(
        learning_rate=config.gd_learning_rate,
        max_iterations=config.gd_max_iterations or config.max_iterations,
        tolerance=config.gd_tolerance,
    )
    trace = RunTrace()
    gradient_descent(loss_fn, grad_fn, x0, gd, trace)
    return trace


def _run_seeds(config: ExperimentConfig, runner, suffix: str = "",
               extra: dict | None = None) -> dict[int, RunTrace]:
    # traces are written as each seed finishes, so a runtime failure mid-way
    # leaves the completed seeds' files on disk
    traces = {}
    for seed in config.seeds:
        traces[seed] = runner(seed)
        write_trace_csv(config.out_dir / f"trace_seed{seed}{suffix}.csv",
                        traces[seed], config, seed, extra)
    return traces


def _emit_summary(config: ExperimentConfig, traces: dict[int, RunTrace], suffix: str = "",
                  extra: dict | None = None) -> None:
    pool = list(traces.values())
    _truncate_to_common_grid(pool)
    rows = [
        (it, float(np.mean(vals)), float(np.min(vals)), float(np.max(vals)))
        for it, vals in zip(
            pool[0].iterations,
            np.stack([t.losses for t in pool]).T,
        )
    ]
    write_summary_csv(config.out_dir / f"summary{suffix}.csv", rows, config, extra)


def run_experiment(config: ExperimentConfig) -> None:
    """Execute the configured experiment once per seed and write trace/summary CSVs."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    if config.ansatz is not None:
        # provenance: the exact gate list the run used
        (config.out_dir / "circuit.txt").write_text(
            template_to_text(config.ansatz.build()), encoding="utf-8"
        )
    runner = {
        "stateprep": _run_stateprep,
        "vqe": _run_vqe,
        "variance_scan": _run_variance_scan,
        "batch": _run_batch,
        "hybrid": _run_hybrid,
        "compare_gd": _run_compare_gd,
    }[config.experiment]
    runner(config)


def _run_stateprep(config: ExperimentConfig) -> None:
    template = config.ansatz.build()
    fitness, fitness_batch = _stateprep_functions(template)

    def runner(seed):
        if config.optimizer == "gd":
            return _run_gd(config, template, fitness,
                           lambda z: stateprep_loss_gradient(template, z), seed)
        return _run_nes(config, template, fitness, fitness_batch, seed)

    _emit_summary(config, _run_seeds(config, runner))


def _run_compare_gd(config: ExperimentConfig) -> None:
    template = config.ansatz.build()
    fitness, fitness_batch = _stateprep_functions(template)
    nes_traces = _run_seeds(
        config, lambda seed: _run_nes(config, template, fitness, fitness_batch, seed),
        suffix="_nes",
    )
    gd_traces = _run_seeds(
        config,
        lambda seed: _run_gd(config, template, fitness,
                             lambda z: stateprep_loss_gradient(template, z), seed),
        suffix="_gd",
    )
    _emit_summary(config, nes_traces, suffix="_nes")
    _emit_summary(config, gd_traces, suffix="_gd")


def _run_vqe(config: ExperimentConfig) -> None:
    template = config.ansatz.build()
    h = load_pauli_file(config.hamiltonian_path)
    reference = exact_ground_energy(h) if h.num_qubits <= 12 else None
    extra = {} if reference is None else {"exact_ground_energy": repr(reference)}
    if reference is not None:
        print(f"exact_ground_energy = {reference!r}")
    fitness = lambda z: vqe_fitness(template, z, h)
    fitness_batch = lambda rows: vqe_fitness_batch(template, rows, h)

    def runner(seed):
        if config.optimizer == "gd":
            return _run_gd(config, template, fitness,
                           lambda z: energy_loss_gradient(template, z, h), seed)
        return _run_nes(config, template, fitness, fitness_batch, seed)

    _emit_summary(config, _run_seeds(config, runner, extra=extra), extra=extra)


def _run_variance_scan(config: ExperimentConfig) -> None:
    ansatz = config.ansatz
    scan = VarianceScanConfig(
        num_qubits=ansatz.num_qubits,
        num_layers=ansatz.num_layers,
        structure_seed=ansatz.structure_seed,
        num_inits=config.scan_num_inits,
        sigma_values=config.scan_sigma_values,
        walker_counts=config.scan_walker_counts,
        observable=local_cost_observable(ansatz.num_qubits),
    )
    rows = surrogate_gradient_variance_scan(scan, SeededRng(config.seeds[0]))
    lines = _header_lines("variance-scan", config, config.seeds[0])
    lines.append(SCAN_SCHEMA)
    for row in rows:
        lines.append(f"{row.sigma_init!r},{row.walkers},"
                     f"{row.variance_surrogate!r},{row.variance_exact!r}")
    (config.out_dir / "variance_scan.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_batch(config: ExperimentConfig) -> None:
    template = config.ansatz.build()
    fitness, fitness_batch = _stateprep_functions(template)
    strategy = PartitionStrategy(kind=config.batch_strategy, batch_size=config.batch_size)

    def runner(seed):
        rng = SeededRng(seed)
        mu0 = rng.uniform(template.num_params, 0.0, 2.0 * np.pi)
        schedule = make_partition(template, strategy, rng)
        trace = RunTrace()
        batch_optimize(
            fitness, schedule, mu0, config.sigma_init, _nes_config(config), rng,
            variant=config.optimizer, trace=trace,
            fitness_batch=None if config.workers else fitness_batch,
            n_workers=config.workers,
        )
        return trace

    _emit_summary(config, _run_seeds(config, runner))


def _run_hybrid(config: ExperimentConfig) -> None:
    template = config.ansatz.build()
    gd = GdConfig(
        learning_rate=config.gd_learning_rate,
        max_iterations=config.gd_max_iterations or config.max_iterations,
        tolerance=config.gd_tolerance,
    )

    def runner(seed):
        rng = SeededRng(seed)
        _, trace = hybrid_optimize(
            template, config.hybrid_warmup, _nes_config(config), gd, rng,
            sigma_init=config.sigma_init,
            snapshot_interval=config.hybrid_snapshot_interval or None,
        )
        write_snapshot_csv(config.out_dir / f"trace_seed{seed}_gradients.csv",
                           trace, config, seed)
        return trace

    _emit_summary(config, _run_seeds(config, runner))
