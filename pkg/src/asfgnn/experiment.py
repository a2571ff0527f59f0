"""Experiment orchestration: tuner loop, baselines, sweeps, report emission.

One ExperimentConfig describes a dataset, a training mode, a Non-IID split,
and a tuner. The tuner treats a whole federated training run as a black box
whose value is the best round-averaged validation accuracy; the chosen
configuration's test accuracy (taken at its best validation round) fills the
final report. All randomness fans out from the single config seed.

Modes: SFGNN / ASFGNN (separated encoders, federated discriminator with JS
blending), FL (plain federated averaging of the whole stack), SP (local-only
training), CM (one model trained on the full undivided dataset).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import bayesopt
from .bayesopt import SearchSpace, Trial, build_space, theta_assignments
from .fgnn import ClientState, RoundReport, run_fedavg, run_fgnn, run_local
from .graphs import (
    ClientDataset,
    DatasetError,
    Graph,
    derive_masks,
    load_dataset,
    load_masks,
    partition_classes,
    split_by_classes,
    split_by_degree,
    split_by_label_ratio,
    split_disjoint_labels,
    SplitSpec,
    DEFAULT_MASK_FRACTIONS,
)
from .model import GraphCache, init_model_params
from .nn import NumericError, TrainConfig
from .seeds import derive_rng
from .sharing import Transport
from .synthetic import write_benchmark

MODES = ("ASFGNN", "SFGNN", "FL", "SP", "CM")
TUNERS = ("bo", "grid", "fixed")
SPLITS = ("label-ratio", "degree", "label+degree")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    mode: str = "SFGNN"
    num_clients: int = 2
    alpha: float = 1.0
    split: str = "label-ratio"
    rounds: int = 200
    budget: int = 30
    n0: int = 5
    tuner: str = "bo"
    seed: int = 0
    out: str | None = None
    local_epochs: int = 1
    use_js: bool = True
    dtype: str = "float64"
    degree_threshold: int = 3
    tied: bool | None = None
    dropouts: tuple = bayesopt.DROPOUT_CHOICES
    l2s: tuple = bayesopt.L2_CHOICES
    depths: tuple = bayesopt.DEPTH_CHOICES
    lrs: tuple = bayesopt.LR_CHOICES
    dims: tuple = bayesopt.DIM_CHOICES
    fixed_theta: tuple | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.tuner not in TUNERS:
            raise ConfigError(f"unknown tuner {self.tuner!r}; expected one of {TUNERS}")
        if self.split not in SPLITS:
            raise ConfigError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if not 0.5 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0.5, 1.0]")

    @property
    def protocol(self) -> str:
        return "SFGNN" if self.mode == "ASFGNN" else self.mode

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        coerced = dict(raw)
        for key in ("dropouts", "l2s", "depths", "lrs", "dims", "fixed_theta"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        try:
            return cls(**coerced)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("dropouts", "l2s", "depths", "lrs", "dims", "fixed_theta"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out


def search_space_for(cfg: ExperimentConfig) -> SearchSpace:
    """Per-client knob groups for SFGNN/SP; one shared group for FL/CM."""
    if cfg.tied is None:
        tied = cfg.protocol in ("FL", "CM")
    else:
        tied = cfg.tied
    groups = 1 if (tied or cfg.protocol == "CM") else cfg.num_clients
    return build_space(
        groups,
        dropouts=cfg.dropouts,
        l2s=cfg.l2s,
        depths=cfg.depths,
        lrs=cfg.lrs,
        dims=cfg.dims,
    )


def default_theta(space: SearchSpace) -> tuple:
    """A sensible fixed configuration: mid-depth, high lr, light l2, no dropout."""
    prefer = {"dropout": 0.0, "l2": 5e-4, "depth": 2, "lr": 1e-2, "dim": 64}
    theta = []
    for dim in space.dims:
        kind = dim.name.split(".")[-1]
        want = prefer.get(kind)
        theta.append(want if want in dim.values else dim.values[len(dim.values) // 2])
    return tuple(theta)


# ---------------------------------------------------------------------------
# Data preparation


def _dataset_dirs(root: Path) -> dict[str, Path]:
    if (root / "meta.json").exists():
        return {"full": root}
    dirs = {}
    for name in ("full", "part1", "part2"):
        if (root / name / "meta.json").exists():
            dirs[name] = root / name
    if "full" not in dirs:
        raise DatasetError(f"{root} holds neither a dataset nor a full/ subdirectory")
    return dirs


def load_parts(cfg: ExperimentConfig) -> tuple[Graph, dict | None, Graph, dict | None, tuple, tuple]:
    """The two label parts plus their masks and global class id sets."""
    dirs = _dataset_dirs(Path(cfg.dataset))
    full = load_dataset(dirs["full"])
    groups = partition_classes(full.num_classes, 2)
    if cfg.split == "label-ratio" and "part1" in dirs and "part2" in dirs:
        g1, m1 = load_dataset(dirs["part1"]), load_masks(dirs["part1"])
        g2, m2 = load_dataset(dirs["part2"]), load_masks(dirs["part2"])
        return g1, m1, g2, m2, groups[0], groups[1]
    if cfg.split == "label-ratio":
        base_low, base_high = full, full
    else:
        base_low, base_high = split_by_degree(full, cfg.degree_threshold)
        if cfg.split == "degree":
            return base_low, None, base_high, None, (), ()
    g1 = split_by_classes(base_low, set(groups[0]))
    g2 = split_by_classes(base_high, set(groups[1]))
    return g1, None, g2, None, groups[0], groups[1]


def make_clients(cfg: ExperimentConfig) -> list[ClientDataset]:
    """Build per-client datasets for the configured split (CM handled apart)."""
    dirs = _dataset_dirs(Path(cfg.dataset))
    if cfg.protocol == "CM" or cfg.num_clients == 1:
        full = load_dataset(dirs["full"])
        masks = load_masks(dirs["full"])
        if masks is None:
            rng = derive_rng(cfg.seed, "full-masks")
            train, val, test = derive_masks(full.num_nodes, DEFAULT_MASK_FRACTIONS, rng)
        else:
            train, val, test = masks["train"], masks["val"], masks["test"]
        return [
            ClientDataset(
                graph=full, train_mask=train, val_mask=val, test_mask=test, client_id=0
            )
        ]
    if cfg.num_clients > 2:
        full = load_dataset(dirs["full"])
        return split_disjoint_labels(full, cfg.num_clients, cfg.seed, load_masks(dirs["full"]))

    g1, m1, g2, m2, p1, p2 = load_parts(cfg)
    if cfg.split == "degree":
        # Two clients = the two degree parts; masks re-derived per client.
        clients = []
        for cid, g in enumerate((g1, g2)):
            rng = derive_rng(cfg.seed, "client-masks", cid)
            train, val, test = derive_masks(g.num_nodes, DEFAULT_MASK_FRACTIONS, rng)
            clients.append(
                ClientDataset(graph=g, train_mask=train, val_mask=val, test_mask=test, client_id=cid)
            )
        return clients
    spec = SplitSpec(alpha=cfg.alpha, part1_classes=p1, part2_classes=p2, seed=cfg.seed)
    return split_by_label_ratio(g1, g2, spec, m1, m2)


# ---------------------------------------------------------------------------
# One black-box evaluation


@dataclass
class RunResult:
    """Outcome of training one configuration end to end."""

    value: float  # best round-averaged validation accuracy, M(theta)
    best_round: int
    test_accuracy: float
    per_client_test: list[float]
    per_client_metric: list[float]
    reports: list[RoundReport]
    failed: bool = False


def _build_states(
    cfg: ExperimentConfig,
    clients: list[ClientDataset],
    space: SearchSpace,
    theta: tuple,
) -> list[ClientState]:
    assignments = theta_assignments(space, theta)
    per_client_groups = any(d.name.startswith("c1.") for d in space.dims)
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    states = []
    for ds in clients:
        g = ds.client_id if per_client_groups else 0
        depth = int(assignments[f"c{g}.depth"])
        dim = int(assignments["dim"])
        train_cfg = TrainConfig(
            lr=float(assignments[f"c{g}.lr"]),
            l2=float(assignments[f"c{g}.l2"]),
            dropout=float(assignments[f"c{g}.dropout"]),
            seed=cfg.seed,
        )
        init_rng = derive_rng(cfg.seed, "init", ds.client_id)
        params = init_model_params(
            init_rng, ds.graph.num_features, dim, depth, ds.graph.num_classes, dtype
        )
        states.append(
            ClientState(
                dataset=ds,
                cache=GraphCache.from_graph(ds.graph, dtype),
                params=params,
                cfg=train_cfg,
                rng=derive_rng(cfg.seed, "dropout", ds.client_id),
            )
        )
    return states


def evaluate_theta(
    cfg: ExperimentConfig,
    clients: list[ClientDataset],
    space: SearchSpace,
    theta: tuple,
    transport: Transport | None = None,
) -> RunResult:
    states = _build_states(cfg, clients, space, theta)
    protocol = cfg.protocol
    if protocol in ("SFGNN",):
        reports = run_fgnn(
            states,
            cfg.rounds,
            use_js=cfg.use_js,
            transport=transport,
            seed=cfg.seed,
            local_epochs=cfg.local_epochs,
        )
    elif protocol == "FL":
        reports = run_fedavg(
            states,
            cfg.rounds,
            transport=transport,
            seed=cfg.seed,
            local_epochs=cfg.local_epochs,
        )
    elif protocol in ("SP", "CM"):
        reports = run_local(states, cfg.rounds, local_epochs=cfg.local_epochs)
    else:  # pragma: no cover
        raise ConfigError(f"unhandled protocol {protocol}")

    metrics = np.array([r.global_metric for r in reports])
    best_idx = int(np.argmax(metrics))
    best = reports[best_idx]
    return RunResult(
        value=float(metrics[best_idx]),
        best_round=best.round_index,
        test_accuracy=float(np.mean(best.per_client_test)),
        per_client_test=list(best.per_client_test),
        per_client_metric=list(best.per_client_metric),
        reports=reports,
    )


# ---------------------------------------------------------------------------
# Experiment driver


@dataclass
class ExperimentReport:
    mode: str
    dataset: str
    seed: int
    best_value: float
    best_theta: dict
    best_round: int
    test_accuracy: float
    per_client_test: list[float]
    per_client_metric: list[float]
    trial_count: int
    failed_trials: int
    num_messages: int
    message_bytes: int
    tuning_wall_time_s: float
    config: dict = field(default_factory=dict)

    def result_dict(self) -> dict:
        """Deterministic portion (timing excluded) used for report.json."""
        out = asdict(self)
        out.pop("tuning_wall_time_s")
        return out


@dataclass
class ExperimentOutput:
    report: ExperimentReport
    trials: list[Trial]
    best_result: RunResult
    transport: Transport


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    clients = make_clients(cfg)
    space = search_space_for(cfg)
    transport = Transport()
    results: dict[tuple, RunResult] = {}
    failed: list[tuple] = []

    def objective(theta: tuple) -> float:
        try:
            result = evaluate_theta(cfg, clients, space, theta, transport)
        except NumericError:
            result = RunResult(
                value=0.0,
                best_round=0,
                test_accuracy=0.0,
                per_client_test=[],
                per_client_metric=[],
                reports=[],
                failed=True,
            )
            failed.append(theta)
        results[theta] = result
        return result.value

    t_start = time.process_time()
    if cfg.tuner == "fixed":
        theta = cfg.fixed_theta if cfg.fixed_theta is not None else default_theta(space)
        theta = tuple(theta)
        if len(theta) != space.num_dims:
            raise ConfigError(
                f"fixed_theta has {len(theta)} entries, space needs {space.num_dims}"
            )
        t0 = time.process_time()
        value = objective(theta)
        trials = [Trial(theta=theta, value=value, wall_time_s=time.process_time() - t0)]
    elif cfg.tuner == "grid":
        trials = bayesopt.grid_search(objective, space, budget=cfg.budget or None)
    else:
        trials = bayesopt.run_bo(
            objective, space, budget=cfg.budget, n0=cfg.n0, seed=cfg.seed
        )
    wall = time.process_time() - t_start

    if all(results[t.theta].failed for t in trials):
        raise NumericError("every trial diverged")
    best_trial = max(
        (t for t in trials if not results[t.theta].failed), key=lambda t: t.value
    )
    best_result = results[best_trial.theta]
    report = ExperimentReport(
        mode=cfg.mode,
        dataset=cfg.dataset,
        seed=cfg.seed,
        best_value=best_trial.value,
        best_theta=theta_assignments(space, best_trial.theta),
        best_round=best_result.best_round,
        test_accuracy=best_result.test_accuracy,
        per_client_test=best_result.per_client_test,
        per_client_metric=best_result.per_client_metric,
        trial_count=len(trials),
        failed_trials=len(failed),
        num_messages=transport.count(),
        message_bytes=transport.total_bytes,
        tuning_wall_time_s=wall,
        config=cfg.to_dict(),
    )
    return ExperimentOutput(
        report=report, trials=trials, best_result=best_result, transport=transport
    )


def run_asfgnn(cfg: ExperimentConfig) -> ExperimentOutput:
    """The automated pipeline: separated-federated training under a tuner."""
    if cfg.protocol != "SFGNN":
        raise ConfigError(f"run_asfgnn expects an SFGNN-family mode, got {cfg.mode}")
    return run_experiment(cfg)


def run_baseline(cfg: ExperimentConfig) -> ExperimentOutput:
    if cfg.protocol not in ("FL", "SP", "CM"):
        raise ConfigError(f"run_baseline expects FL/SP/CM, got {cfg.mode}")
    return run_experiment(cfg)


SWEEP_VARIABLES = ("alpha", "num_clients", "js_on_off")


def sweep(cfg: ExperimentConfig, variable: str, values) -> list[tuple[object, ExperimentOutput]]:
    """Repeat the experiment across one varying knob."""
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    rows = []
    for value in values:
        if variable == "alpha":
            sub = replace(cfg, alpha=float(value))
        elif variable == "num_clients":
            sub = replace(cfg, num_clients=int(value))
        else:
            sub = replace(cfg, use_js=bool(value))
        rows.append((value, run_experiment(sub)))
    return rows


# ---------------------------------------------------------------------------
# Report emission


def emit_report(output: ExperimentOutput, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, trials.jsonl, rounds.jsonl, summary.csv, timing.json.

    Every file except timing.json (and the wall_time_s field of trials.jsonl)
    is byte-deterministic for a fixed config and seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["report"] = out_dir / "report.json"
    paths["report"].write_text(json.dumps(output.report.result_dict(), indent=1) + "\n")

    paths["timing"] = out_dir / "timing.json"
    paths["timing"].write_text(
        json.dumps({"tuning_wall_time_s": output.report.tuning_wall_time_s}) + "\n"
    )

    paths["trials"] = out_dir / "trials.jsonl"
    with open(paths["trials"], "w") as fh:
        for i, trial in enumerate(output.trials):
            fh.write(
                json.dumps(
                    {
                        "trial_index": i,
                        "theta": list(trial.theta),
                        "value": trial.value,
                        "wall_time_s": trial.wall_time_s,
                    }
                )
                + "\n"
            )

    paths["rounds"] = out_dir / "rounds.jsonl"
    with open(paths["rounds"], "w") as fh:
        for report in output.best_result.reports:
            fh.write(json.dumps(report.to_json_dict()) + "\n")

    paths["summary"] = out_dir / "summary.csv"
    dim_names = [d for d in output.report.best_theta]
    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_index", "value", *dim_names])
        for i, trial in enumerate(output.trials):
            writer.writerow([i, f"{trial.value:.10g}", *trial.theta])
    return paths


def load_trials(path: str | Path) -> list[Trial]:
    """Rebuild tuner history from a trials.jsonl file."""
    trials = []
    for line in Path(path).read_text().splitlines():
        raw = json.loads(line)
        trials.append(
            Trial(
                theta=tuple(raw["theta"]),
                value=float(raw["value"]),
                wall_time_s=float(raw.get("wall_time_s", 0.0)),
            )
        )
    return trials


def generate_benchmark(out_dir: str | Path, seed: int = 7) -> dict[str, Path]:
    """Materialize the bundled citation-style benchmark dataset."""
    return write_benchmark(out_dir, seed)
