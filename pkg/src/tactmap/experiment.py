"""Prior -> exploration -> mapping experiment loop and policy comparison."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tactmap import acquisition as acq
from tactmap.domain import (
    BeadLayout,
    GroundTruth,
    TrainingSet,
    Workspace,
    generate_layout,
    ground_truth,
    load_layout,
)
from tactmap.gp import FittedModel, KernelParams, ProbabilityField, optimize_hyperparams
from tactmap.mapper import HeightGrid, MetricsRow, cross_entropy, fuse, mse, uncertainty_stats
from tactmap.sampling import sobol_2d, to_workspace
from tactmap.sensor import SensorConfig, press
from tactmap.tactile import ProcConfig, labels_from_sample, threshold, to_point_cloud

log = logging.getLogger(__name__)

POLICIES = ("proposed", "random")
CSV_COLUMNS = ("policy", "seed", "sample_index", "ce", "mse", "max_var", "mean_var")


@dataclass
class ExperimentConfig:
    # workspace and layout
    width_mm: float = 300.0
    height_mm: float = 90.4
    n_clusters: int = 3
    beads_per_cluster: int = 34
    bead_radius_mm: float = 3.0
    layout_path: str = ""
    # sensor
    footprint_mm: float = 25.6
    resolution_px: int = 128
    plunge_depth_mm: float = 12.0
    foam_thickness_mm: float = 12.7
    attenuation: float = 0.8
    noise_sigma_mm: float = 0.05
    # image processing
    epsilon_mm: float = 1.55
    min_cluster_px: int = 8
    # classifier and acquisition
    theta1: float = 30.0
    theta2: float = 15.0
    optimize_theta: bool = True
    refit_every: int = 8
    merge_radius_mm: float = 3.0  # repeat sightings of one bead within this radius fold into one label
    lambda_weight: float = 0.5
    candidate_pitch_mm: float = 2.5
    eval_pitch_mm: float = 0.5
    # protocol
    n_prior: int = 8
    n_explore: int = 16
    n_map: int = 128
    ce_switch: float = 0.0  # > 0: leave exploration early once CE drops to this value
    policies: tuple = POLICIES
    seeds: tuple = (1,)

    def __post_init__(self):
        self.policies = tuple(self.policies)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.n_prior < 1:
            raise ValueError("n_prior must be at least 1")
        if min(self.n_explore, self.n_map) < 0:
            raise ValueError("sample counts must be non-negative")
        if self.refit_every < 1:
            raise ValueError("refit_every must be at least 1")
        bad = set(self.policies) - set(POLICIES)
        if bad or not self.policies:
            raise ValueError(f"unknown policies {sorted(bad)}; choose from {POLICIES}")

    @property
    def workspace(self) -> Workspace:
        return Workspace(self.width_mm, self.height_mm)

    def sensor(self, seed: int) -> SensorConfig:
        return SensorConfig(
            self.footprint_mm,
            self.resolution_px,
            self.plunge_depth_mm,
            self.foam_thickness_mm,
            self.attenuation,
            self.noise_sigma_mm,
            noise_seed=seed,
            workspace=self.workspace,
        )

    @property
    def proc(self) -> ProcConfig:
        return ProcConfig(self.epsilon_mm, self.min_cluster_px)

    def layout(self, seed: int) -> BeadLayout:
        if self.layout_path:
            return load_layout(self.layout_path)
        return generate_layout(
            seed, self.n_clusters, self.beads_per_cluster, self.workspace, bead_radius_mm=self.bead_radius_mm
        )


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        items = [v.strip() for v in value.replace(",", " ").split()]
        return tuple(items)
    return value.strip()


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    base = base or ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(value, getattr(base, key))
    return dataclasses.replace(base, **updates)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base)


@dataclass
class RunResult:
    policy: str
    seed: int
    rows: list
    locations: np.ndarray
    train: TrainingSet
    params_history: list
    model: FittedModel
    field: ProbabilityField
    height: HeightGrid
    truth: GroundTruth
    layout: BeadLayout
    clouds: list = field(default_factory=list, repr=False)


class _Trainer:
    """Accumulates labels, optionally folding repeat sightings of the same bead into one point."""

    def __init__(self, merge_radius_mm: float):
        self.merge_radius = merge_radius_mm
        self.X: list = []
        self.Y: list = []
        self.support: list = []

    def add(self, labeled) -> None:
        for p, y, s in zip(labeled.points, labeled.labels, labeled.support_px):
            if y == 1 and self.merge_radius > 0:
                j = self._near_positive(p)
                if j is not None:
                    if s > self.support[j]:
                        self.X[j], self.support[j] = tuple(p), int(s)
                    continue
            self.X.append(tuple(p))
            self.Y.append(float(y))
            self.support.append(int(s))

    def _near_positive(self, p):
        best, best_d = None, self.merge_radius
        for j, (q, y) in enumerate(zip(self.X, self.Y)):
            if y != 1:
                continue
            d = np.hypot(q[0] - p[0], q[1] - p[1])
            if d <= best_d:
                best, best_d = j, d
        return best

    def training_set(self) -> TrainingSet:
        return TrainingSet(np.array(self.X).reshape(-1, 2), np.array(self.Y))


def run_single(cfg: ExperimentConfig, policy: str, seed: int, layout: BeadLayout | None = None,
               keep_clouds: bool = False) -> RunResult:
    """One active-sampling run; every press after the prior adds a metrics row."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    ws = cfg.workspace
    layout = layout if layout is not None else cfg.layout(seed)
    truth = ground_truth(layout, ws, cfg.eval_pitch_mm)
    raster = truth.raster
    sensor = cfg.sensor(seed)
    proc = cfg.proc
    grid = acq.CandidateGrid(ws, cfg.candidate_pitch_mm)
    acq_cfg = acq.AcquisitionConfig(cfg.lambda_weight, "exploration", seed)
    rng = np.random.default_rng(seed)

    height = HeightGrid.empty(raster)
    trainer = _Trainer(cfg.merge_radius_mm)
    history: list = []
    clouds: list = []

    def take(location) -> None:
        image = threshold(press(layout, sensor, location), proc)
        trainer.add(labels_from_sample(image, proc, thresholded=True))
        cloud = to_point_cloud(image)
        fuse(height, cloud, image.center, sensor.footprint_mm)
        history.append(tuple(image.center))
        if keep_clouds:
            clouds.append(cloud)

    if policy == "proposed":
        for loc in to_workspace(sobol_2d(cfg.n_prior), ws):
            take(loc)
    else:
        for _ in range(cfg.n_prior):
            take(acq.next_sample_random(grid, np.array(history), rng))

    params = KernelParams(cfg.theta1, cfg.theta2)
    params_history = []

    def refresh(index: int, refit: bool):
        nonlocal params
        train = trainer.training_set()
        if refit and cfg.optimize_theta:
            params = optimize_hyperparams(train, params)
            params_history.append((index, params))
        model = FittedModel.fit(train, params)
        if not model.state.converged:
            log.warning("Laplace iteration hit the cap at sample %d (%s, seed %d)", index, policy, seed)
        fld = model.field(raster)
        max_var, mean_var = uncertainty_stats(fld)
        row = MetricsRow(index, cross_entropy(fld, truth), mse(height, truth), max_var, mean_var)
        return model, fld, row

    model, fld, row = refresh(0, refit=True)
    rows = [row]
    n_explore = cfg.n_explore
    total = cfg.n_explore + cfg.n_map
    i = 0
    while i < total:
        i += 1
        exploring = i <= n_explore
        past = np.array(history)
        if policy == "random":
            loc = acq.next_sample_random(grid, past, rng)
        elif exploring:
            sigma2 = model.predict(grid.points).sigma2
            loc = acq.next_sample_exploration(sigma2, past, grid, acq_cfg)
        else:
            prob = model.predict(grid.points).prob
            loc = acq.next_sample_mapping(prob, past, grid, acq_cfg)
        take(loc)
        model, fld, row = refresh(i, refit=(i % cfg.refit_every == 0))
        rows.append(row)
        if exploring and cfg.ce_switch > 0 and row.ce_loss <= cfg.ce_switch and i < n_explore:
            # the unused exploration budget goes to mapping, so the press count is unchanged
            log.info("CE %.3f reached the switch threshold after %d samples", row.ce_loss, i)
            n_explore = i

    return RunResult(policy, seed, rows, np.array(history), trainer.training_set(), params_history,
                     model, fld, height, truth, layout, clouds)


def run_experiment(cfg: ExperimentConfig, layouts: dict | None = None) -> list[RunResult]:
    """All (seed, policy) runs of ``cfg``; ``layouts`` optionally maps seed -> layout."""
    results = []
    for seed in cfg.seeds:
        layout = (layouts or {}).get(seed) or cfg.layout(seed)
        for policy in cfg.policies:
            log.info("running policy=%s seed=%d", policy, seed)
            results.append(run_single(cfg, policy, seed, layout))
    return results


def metrics_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for res in results:
        for r in res.rows:
            writer.writerow([res.policy, res.seed, r.samples_after_prior,
                             repr(r.ce_loss), repr(r.mse_loss), repr(r.max_sigma2), repr(r.mean_sigma2)])
    return buf.getvalue()


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"] = int(r["seed"])
        r["sample_index"] = int(r["sample_index"])
        for k in ("ce", "mse", "max_var", "mean_var"):
            r[k] = float(r[k])
    return rows


def _as_records(tables) -> list[dict]:
    records = []
    for t in tables:
        if isinstance(t, RunResult):
            records += [
                {"policy": t.policy, "seed": t.seed, "sample_index": r.samples_after_prior, "ce": r.ce_loss,
                 "mse": r.mse_loss, "max_var": r.max_sigma2, "mean_var": r.mean_sigma2}
                for r in t.rows
            ]
        else:
            records.append(t)
    return records


@dataclass
class PolicySummary:
    sample_index: np.ndarray
    mean: dict  # (policy, metric) -> array over sample_index
    std: dict
    n_runs: dict  # policy -> number of runs

    def delta(self, metric: str, a: str = "proposed", b: str = "random") -> np.ndarray:
        return self.mean[(a, metric)] - self.mean[(b, metric)]

    def at(self, policy: str, metric: str, index: int, stat: str = "mean") -> float:
        pos = int(np.searchsorted(self.sample_index, index))
        return float(getattr(self, stat)[(policy, metric)][pos])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        policies = sorted(self.n_runs)
        metrics = ("ce", "mse", "max_var", "mean_var")
        header = ["sample_index"]
        for m in metrics:
            for p in policies:
                header += [f"{p}_{m}_mean", f"{p}_{m}_std"]
            if {"proposed", "random"} <= set(policies):
                header.append(f"delta_{m}")
        writer.writerow(header)
        for k, idx in enumerate(self.sample_index):
            line = [int(idx)]
            for m in metrics:
                for p in policies:
                    line += [repr(float(self.mean[(p, m)][k])), repr(float(self.std[(p, m)][k]))]
                if {"proposed", "random"} <= set(policies):
                    line.append(repr(float(self.delta(m)[k])))
            writer.writerow(line)
        return buf.getvalue()


def compare_policies(tables) -> PolicySummary:
    """Mean and population std of every metric across layouts, per policy and sample index.

    ``tables`` is a sequence of :class:`RunResult` or metric-row dicts as
    read from the CSV.  All runs must cover the same sample indices.
    """
    records = _as_records(tables)
    runs: dict = {}
    for r in records:
        runs.setdefault((r["policy"], r["seed"]), []).append(r)
    if not runs:
        raise ValueError("no metric rows to compare")
    index_sets = {k: tuple(sorted(r["sample_index"] for r in v)) for k, v in runs.items()}
    reference = next(iter(index_sets.values()))
    for key, idx in index_sets.items():
        if idx != reference:
            raise ValueError(f"run {key} has {len(idx)} rows, expected {len(reference)}")
    sample_index = np.array(reference)
    mean, std, counts = {}, {}, {}
    for policy in sorted({p for p, _ in runs}):
        keys = sorted(k for k in runs if k[0] == policy)
        counts[policy] = len(keys)
        for metric in ("ce", "mse", "max_var", "mean_var"):
            stack = np.array([[r[metric] for r in sorted(runs[k], key=lambda r: r["sample_index"])] for k in keys])
            mean[(policy, metric)] = stack.mean(axis=0)
            std[(policy, metric)] = stack.std(axis=0)
    return PolicySummary(sample_index, mean, std, counts)
