"""Experiment driver: the adaptive method against its two baselines.

A run trains the shared initial classifier/controller pair from the
pre-collected neighborhood datasets, replays a pre-generated benchmark
trace, applies the selected method, and persists metrics, per-period
series, the monitor trace, the event log and a JSON metadata record.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import perception, pmc, simenv, synthesis, uq
from .monitor import Monitor, MonitorConfig, Observation
from .pdtmc import ModelConstants, reference_model
from .perception import Dataset, MLPPredictor, TrainConfig, random_guess_predictor
from .runtime import DualRuntime, RepairConfig, SystemState
from .simenv import ColliderState, EnvGenerator, OracleConfig, World
from .synthesis import ParamSpace


class HarnessError(Exception):
    pass


#: Training-neighborhood center: a mixed-label region near the oracle's
#: decision boundary, so the initial confusion matrix has both classes.
DEFAULT_C0 = ColliderState(-0.442, 4.169, 1.461, 0.735, -0.42)

METHODS = ("sa", "no", "random")
ENVIRONMENTS = ("us", "rw")


@dataclass
class ExperimentConfig:
    method: str = "sa"
    environment: str = "us"
    steps: int = 15000                  # perception-query budget
    seed: int = 0
    out_dir: str = "runs/out"
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    constants: ModelConstants = field(default_factory=ModelConstants)
    param_space: ParamSpace = field(default_factory=ParamSpace)
    oracle: OracleConfig = field(
        default_factory=lambda: OracleConfig(radius=simenv.CALIBRATED_RADIUS))
    train_config: TrainConfig = field(default_factory=TrainConfig)
    dataset_sizes: tuple = (4000, 1000, 1000, 1000)
    c0: ColliderState = DEFAULT_C0
    eps0: float = 0.1
    trace_path: str = None              # shared benchmark trace (CSV)
    threaded: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise HarnessError(f"unknown method {self.method!r}")
        if self.environment not in ENVIRONMENTS:
            raise HarnessError(f"unknown environment {self.environment!r}")
        if self.method == "sa" and self.steps < self.monitor.t_monitor:
            raise HarnessError("step budget must cover at least one monitoring period")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        kwargs = {}
        for key in ("method", "environment", "steps", "seed", "out_dir",
                    "eps0", "trace_path", "threaded"):
            if key in raw:
                kwargs[key] = raw[key]
        if "dataset_sizes" in raw:
            kwargs["dataset_sizes"] = tuple(raw["dataset_sizes"])
        if "c0" in raw:
            kwargs["c0"] = ColliderState(*raw["c0"])
        if "monitor" in raw:
            kwargs["monitor"] = MonitorConfig(**raw["monitor"])
        if "constants" in raw:
            kwargs["constants"] = ModelConstants(**raw["constants"])
        if "oracle" in raw:
            kwargs["oracle"] = OracleConfig(**raw["oracle"])
        if "train" in raw:
            kwargs["train_config"] = TrainConfig(**raw["train"])
        return cls(**kwargs)


@dataclass
class Metrics:
    accuracy: float
    safety_rate: float
    mean_step_time: float
    queries: int
    attempts: int
    collisions: int
    completed: int
    repairs_signalled: int
    repairs_accepted: int
    unserved: int
    series: list                 # (period, accuracy, safety, mean_time)


class StaticRuntime:
    """Fixed predictor/controller pair for the non-adaptive baselines."""

    def __init__(self, predictor, kappa):
        self._predictor = predictor
        self.kappa = kappa
        self.queries = 0

    def predict(self, x):
        self.queries += 1
        return self._predictor.predict(x)

    def move_probability(self, prediction):
        return self.kappa[0] if prediction == 0 else self.kappa[1]


def derive_seeds(seed):
    """Stable per-subsystem seed split."""
    root = np.random.SeedSequence(seed)
    names = ("data", "train", "trace", "action", "random_pred")
    children = root.spawn(len(names))
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def default_specs():
    state = (pmc.StateSpec(avoid="collision", target="done", bound=0.9),)
    reward = (pmc.RewardSpec(targets=frozenset({"done", "collision"}), bound=15.0),)
    return state, reward


def initial_system(cfg, seeds):
    """Shared starting point of every method: datasets, phi_0, kappa_0."""
    datasets = simenv.gen_initial_datasets(
        cfg.c0, cfg.eps0, cfg.dataset_sizes, seeds["data"], oracle=cfg.oracle)
    train_set, val_set, confusion_set, test_set = datasets
    tc = TrainConfig(learning_rate=cfg.train_config.learning_rate,
                     epochs=cfg.train_config.epochs,
                     batch_size=cfg.train_config.batch_size,
                     seed=seeds["train"])
    phi0 = perception.train(seeds["train"], train_set, val_set, tc)
    matrix = uq.evaluate_confusion(MLPPredictor(phi0), confusion_set)
    u0 = uq.quantify(matrix)
    model = reference_model(cfg.constants)
    state_specs, reward_specs = default_specs()
    kappa0, qr, feasible = synthesis.synthesize(
        u0, model, cfg.param_space, state_specs, reward_specs,
        base_valuation=cfg.constants.valuation())
    role_map = {"train": train_set, "val": val_set,
                "confusion": confusion_set, "test": test_set}
    return {
        "datasets": role_map, "phi0": phi0, "u0": u0, "kappa0": kappa0,
        "qr": qr, "feasible": feasible, "model": model,
        "state_specs": state_specs, "reward_specs": reward_specs, "tc": tc,
    }


def load_or_generate_trace(cfg, seeds):
    if cfg.trace_path and os.path.exists(cfg.trace_path):
        return simenv.read_trace(cfg.trace_path)
    gen = EnvGenerator(mode="uniform" if cfg.environment == "us" else "random_walk",
                       seed=seeds["trace"],
                       center=cfg.c0 if cfg.environment == "rw" else None)
    # generous margin: waits and free moves consume extra situations
    entries = simenv.generate_trace(cfg.steps * 8 + 1000, cfg.constants.p_collider,
                                    gen, seeds["trace"], oracle=cfg.oracle)
    if cfg.trace_path:
        os.makedirs(os.path.dirname(cfg.trace_path) or ".", exist_ok=True)
        simenv.write_trace(cfg.trace_path, entries)
    return entries


def run_experiment(cfg):
    """Execute one method on one environment; returns Metrics and writes
    all run artifacts into cfg.out_dir."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    seeds = derive_seeds(cfg.seed)
    init = initial_system(cfg, seeds)
    trace = load_or_generate_trace(cfg, seeds)

    if cfg.method == "random":
        rt = StaticRuntime(random_guess_predictor(seeds["random_pred"]), init["kappa0"])
    elif cfg.method == "no":
        rt = StaticRuntime(MLPPredictor(init["phi0"]), init["kappa0"])
    else:
        repair_cfg = RepairConfig(
            sample_sizes={"train": cfg.dataset_sizes[0], "val": cfg.dataset_sizes[1],
                          "confusion": cfg.dataset_sizes[2], "test": cfg.dataset_sizes[3]},
            train_config=init["tc"], test_gate=cfg.monitor.threshold_2,
            param_space=cfg.param_space, model=init["model"],
            state_specs=init["state_specs"], reward_specs=init["reward_specs"],
            base_valuation=cfg.constants.valuation())
        rt = DualRuntime(SystemState(init["phi0"], init["kappa0"], 0),
                         init["datasets"], repair_cfg, threaded=cfg.threaded)

    world = World(trace, t_move=cfg.constants.t_move, t_wait=cfg.constants.t_wait)
    monitor = Monitor(cfg.monitor)
    rng_action = np.random.default_rng(seeds["action"])

    queries = correct = 0
    attempts = collisions = completed = 0
    total_done_time = 0.0
    period_queries = period_correct = 0
    series = []
    repairs_signalled = repairs_accepted = 0
    next_boundary = cfg.monitor.t_monitor
    step_rows = []
    step_index = 0

    while queries < cfg.steps:
        rec = world.step(rt, rng_action)
        for (x, pred, truth) in rec.observations:
            step_index += 1
            monitor.observe(Observation(tuple(x), pred, truth, step_index))
            queries += 1
            period_queries += 1
            if pred == truth:
                correct += 1
                period_correct += 1
        collided = rec.outcome == "collision"
        attempts += 1
        collisions += 1 if collided else 0
        if not collided:
            completed += 1
            total_done_time += rec.elapsed
        monitor.record_outcome(collided, rec.elapsed)
        monitor.log_trace_row(step_index, rec.observations[-1][1] if rec.observations else "",
                              rec.observations[-1][2] if rec.observations else "", False)
        step_rows.append([step_index, rec.outcome, rec.elapsed, rec.waits, rec.queries])

        if isinstance(rt, DualRuntime):
            rt.assert_invariants()

        # first step boundary at/after each monitoring-period boundary
        if queries >= next_boundary:
            period_acc = period_correct / period_queries if period_queries else float("nan")
            decision = monitor.evaluate()
            series.append([len(series), period_acc, monitor.stats.safety_rate,
                           monitor.stats.mean_time])
            if cfg.method == "sa" and decision.repair and not decision.skipped:
                ce = monitor.drain_counterexamples()
                if len(ce):
                    repairs_signalled += 1
                    rt.signal_repair(ce, decision.reasons, step_index)
                    accepted = rt.finish_repair(step_index)
                    repairs_accepted += 1 if accepted else 0
            else:
                monitor.reset_period()
            period_queries = period_correct = 0
            next_boundary += cfg.monitor.t_monitor

    metrics = Metrics(
        accuracy=correct / queries if queries else float("nan"),
        safety_rate=1.0 - collisions / attempts if attempts else 1.0,
        mean_step_time=total_done_time / completed if completed else float("nan"),
        queries=queries, attempts=attempts, collisions=collisions,
        completed=completed, repairs_signalled=repairs_signalled,
        repairs_accepted=repairs_accepted,
        unserved=rt.unserved if isinstance(rt, DualRuntime) else 0,
        series=series)

    _write_outputs(cfg, seeds, init, trace, monitor, rt, metrics, step_rows)
    return metrics


def _config_hash(cfg):
    payload = json.dumps({
        "method": cfg.method, "environment": cfg.environment, "steps": cfg.steps,
        "seed": cfg.seed, "dataset_sizes": list(cfg.dataset_sizes),
        "c0": list(cfg.c0.as_tuple()), "eps0": cfg.eps0,
        "monitor": asdict(cfg.monitor), "constants": asdict(cfg.constants),
        "oracle": asdict(cfg.oracle),
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_outputs(cfg, seeds, init, trace, monitor, rt, metrics, step_rows):
    out = cfg.out_dir
    with open(os.path.join(out, "metrics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in ("accuracy", "safety_rate", "mean_step_time", "queries",
                    "attempts", "collisions", "completed", "repairs_signalled",
                    "repairs_accepted", "unserved"):
            writer.writerow([key, getattr(metrics, key)])
    with open(os.path.join(out, "periods.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "accuracy", "safety_rate", "mean_time"])
        writer.writerows(metrics.series)
    with open(os.path.join(out, "steps.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "outcome", "elapsed", "waits", "queries"])
        writer.writerows(step_rows)
    monitor.write_trace(os.path.join(out, "monitor_trace.csv"))
    if isinstance(rt, DualRuntime):
        rt.write_event_log(os.path.join(out, "events.csv"))
    meta = {
        "method": cfg.method, "environment": cfg.environment,
        "steps": cfg.steps, "seed": cfg.seed, "seeds": seeds,
        "config_hash": _config_hash(cfg),
        "trace_hash": simenv.trace_hash(trace),
        "kappa0": list(init["kappa0"]),
        "u0": [init["u0"].p00, init["u0"].p01, init["u0"].p10, init["u0"].p11],
        "initial_feasible": bool(init["feasible"]),
    }
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def summarize(run_dirs):
    """Comparison table over completed run directories.

    Returns (header, rows); every value is re-read from the run artifacts.
    """
    if not run_dirs:
        raise HarnessError("no run directories given")
    header = ["run", "method", "environment", "accuracy", "safety_rate",
              "mean_step_time", "repairs_accepted"]
    rows = []
    for d in run_dirs:
        metrics_path = os.path.join(d, "metrics.csv")
        meta_path = os.path.join(d, "metadata.json")
        if not (os.path.exists(metrics_path) and os.path.exists(meta_path)):
            raise HarnessError(f"incomplete run directory: {d}")
        with open(meta_path) as fh:
            meta = json.load(fh)
        values = {}
        with open(metrics_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for key, value in reader:
                values[key] = value
        rows.append([os.path.basename(os.path.normpath(d)), meta["method"],
                     meta["environment"], values["accuracy"], values["safety_rate"],
                     values["mean_step_time"], values["repairs_accepted"]])
    return header, rows


def format_table(header, rows):
    widths = [max(len(str(x)) for x in [h] + [r[i] for r in rows])
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)
