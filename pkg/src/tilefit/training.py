"""Ensemble training: one sub-network per grid cell, trained full-batch.

Every cell trains independently on its own samples with Adam; the RNG
stream of cell ``m`` is derived from ``(seed, m)``, so results are
identical for any worker count or scheduling order.  Progress is measured
on the aggregated whole-signal reconstruction: clamped to [-1, 1] for
MSE/PSNR, unclamped for the literal summed-residual-norm loss.

PSNR uses peak = 2.0, the full range of [-1, 1]-normalized signals, and is
capped at 200 dB for exact reconstructions.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .flops import FlopCount, total_flops
from .nets import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPS,
    DEFAULT_LR,
    Activation,
    SubNetwork,
    SubNetworkConfig,
    _act_code,
    init_subnetwork,
    seed_sequence,
)
from .partition import (
    GridSpec,
    SignalTensor,
    SourceInfo,
    aggregate_outputs,
    cell_id_from_m,
    partition_coords,
    partition_signal,
)

PSNR_PEAK = 2.0
PSNR_CAP_DB = 200.0


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; carries the offending step and cell."""

    def __init__(self, step: int, cell_m: int):
        super().__init__(f"non-finite loss at step {step} in cell m={cell_m}")
        self.step = step
        self.cell_m = cell_m


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    seed: int = 0
    eval_every: int | None = None  # None: only evaluate at the final step
    learning_rate: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.eval_every is None:
            object.__setattr__(self, "eval_every", self.steps)
        if not 1 <= self.eval_every <= self.steps:
            raise ValueError("eval_every must be in 1..steps")

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "seed": self.seed,
            "eval_every": self.eval_every,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        eval_every = d.get("eval_every")
        return cls(
            steps=int(d["steps"]),
            seed=int(d.get("seed", 0)),
            eval_every=None if eval_every is None else int(eval_every),
            learning_rate=float(d.get("learning_rate", DEFAULT_LR)),
            beta1=float(d.get("beta1", DEFAULT_BETA1)),
            beta2=float(d.get("beta2", DEFAULT_BETA2)),
            epsilon=float(d.get("epsilon", DEFAULT_EPS)),
        )


@dataclass
class EnsembleModel:
    """All sub-networks of one grid, indexed by linear cell index."""

    grid: GridSpec
    subnets: list[SubNetwork]
    input_dim: int
    output_dim: int

    def __post_init__(self):
        if len(self.subnets) != self.grid.num_cells:
            raise ValueError(
                f"expected {self.grid.num_cells} sub-networks, got {len(self.subnets)}"
            )

    @property
    def config(self) -> SubNetworkConfig:
        return self.subnets[0].config


@dataclass(frozen=True)
class StepRecord:
    step: int
    mse: float
    res_norm_sum: float  # summed per-sample residual norms, not averaged
    psnr_db: float


@dataclass
class TrainReport:
    records: list[StepRecord]
    reconstruction: SignalTensor
    flops: FlopCount
    wall_time: float
    backend: str
    train_config: TrainConfig
    grid_m: int

    @property
    def final_psnr(self) -> float:
        return self.records[-1].psnr_db

    @property
    def final_mse(self) -> float:
        return self.records[-1].mse


def psnr(reconstruction: SignalTensor, target: SignalTensor) -> float:
    """Peak signal-to-noise ratio in dB, peak = 2.0, capped at 200."""
    if reconstruction.values.shape != target.values.shape:
        raise ValueError(
            f"shape mismatch: {reconstruction.values.shape} vs {target.values.shape}"
        )
    mse = float(
        np.mean((reconstruction.values.astype(np.float64) - target.values.astype(np.float64)) ** 2)
    )
    return psnr_from_mse(mse)


def psnr_from_mse(mse: float, peak: float = PSNR_PEAK) -> float:
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB))


def residual_norm_sum(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Sum over samples of the Euclidean channel-residual norm."""
    r = outputs.astype(np.float64) - targets.astype(np.float64)
    return float(np.sqrt((r * r).sum(axis=1)).sum())


def residual_loss(model: EnsembleModel, signal: SignalTensor, backend=None) -> float:
    """Summed (not averaged) residual norms of the ensemble over a signal."""
    be = kernels.get_backend(backend)
    total = 0.0
    for (cell, batch, targets), net in zip(partition_signal(signal, model.grid), model.subnets):
        x = net.encode(batch.local_coords)
        out = be.forward(net.theta, net.dims, _act_code(net.config.activation),
                         net.config.omega0, x)
        total += residual_norm_sum(out, targets)
    return total


def reconstruct(model: EnsembleModel, n: int, *, clamp: bool = True,
                source: SourceInfo | None = None, backend=None) -> SignalTensor:
    """Evaluate every sub-network on its own cell and reassemble the signal."""
    be = kernels.get_backend(backend)
    outputs = []
    for (cell, batch), net in zip(partition_coords(model.grid, n), model.subnets):
        x = net.encode(batch.local_coords)
        out = be.forward(net.theta, net.dims, _act_code(net.config.activation),
                         net.config.omega0, x)
        outputs.append((cell, out.astype(np.float64)))
    signal = aggregate_outputs(outputs, model.grid, n,
                               channels=model.output_dim, source=source)
    return signal.clamped() if clamp else signal


@dataclass
class _CellTask:
    cell_m: int
    net: SubNetwork
    x: np.ndarray
    targets: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def _eval_step(tasks, signal, grid, be, step):
    outputs = []
    raw_sum = 0.0
    for task in tasks:
        out = be.forward(task.net.theta, task.net.dims,
                         _act_code(task.net.config.activation),
                         task.net.config.omega0, task.x)
        raw_sum += residual_norm_sum(out, task.targets)
        outputs.append((cell_id_from_m(grid, task.cell_m), out.astype(np.float64)))
    recon = aggregate_outputs(outputs, grid, signal.n,
                              channels=signal.channels, source=signal.source).clamped()
    mse = float(np.mean((recon.values - signal.values) ** 2))
    if not np.isfinite(mse):
        raise TrainingDivergedError(step, -1)
    return recon, StepRecord(step, mse, raw_sum, psnr_from_mse(mse))


def train_ensemble(signal: SignalTensor, grid: GridSpec, config: SubNetworkConfig,
                   tcfg: TrainConfig, *, workers: int = 1,
                   backend=None) -> tuple[EnsembleModel, TrainReport]:
    """Train one sub-network per cell; returns the model and its report.

    Evaluation records land every ``eval_every`` steps plus at the final
    step.  Raises :class:`TrainingDivergedError` with the step index and
    cell if any cell's loss goes non-finite.
    """
    be = kernels.get_backend(backend)
    if grid.rank != signal.rank:
        raise ValueError(f"grid rank {grid.rank} does not match signal rank {signal.rank}")
    grid.check_divides(signal.n)

    start = time.perf_counter()
    tasks = []
    for cell, batch, targets in partition_signal(signal, grid):
        net = init_subnetwork(config, signal.rank, signal.channels,
                              seed_sequence(tcfg.seed, cell.m), dtype=np.float32)
        x = net.encode(batch.local_coords.astype(np.float32))
        tasks.append(_CellTask(cell.m, net, x,
                               np.ascontiguousarray(targets, dtype=np.float32),
                               np.zeros_like(net.theta), np.zeros_like(net.theta)))

    eval_steps = list(range(tcfg.eval_every, tcfg.steps + 1, tcfg.eval_every))
    if not eval_steps or eval_steps[-1] != tcfg.steps:
        eval_steps.append(tcfg.steps)

    def run_window(task: _CellTask, start_step: int, nsteps: int):
        losses = np.empty(nsteps)
        done, task.t = be.train_steps(
            task.net.theta, task.m, task.v, task.t, task.net.dims,
            _act_code(task.net.config.activation), task.net.config.omega0,
            task.x, task.targets, nsteps,
            tcfg.learning_rate, tcfg.beta1, tcfg.beta2, tcfg.epsilon, losses)
        if done < nsteps:
            raise TrainingDivergedError(start_step + done + 1, task.cell_m)

    records = []
    recon = None
    prev = 0
    for stop in eval_steps:
        nsteps = stop - prev
        if workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda task: run_window(task, prev, nsteps), tasks))
        else:
            for task in tasks:
                run_window(task, prev, nsteps)
        recon, record = _eval_step(tasks, signal, grid, be, stop)
        records.append(record)
        prev = stop

    model = EnsembleModel(grid, [task.net for task in tasks], signal.rank, signal.channels)
    report = TrainReport(
        records=records,
        reconstruction=recon,
        flops=total_flops(config, grid, signal.n, signal.rank, signal.channels),
        wall_time=time.perf_counter() - start,
        backend=be.NAME,
        train_config=tcfg,
        grid_m=grid.m,
    )
    return model, report


@dataclass
class WidthResult:
    width: int
    flops: FlopCount
    runs: list[tuple[int, int, float]]  # (image index, repeat, psnr_db)
    mean_psnr: float


def divergence_experiment(images: list[SignalTensor], widths: list[int], depth: int,
                          grid_m: int, repeats: int, tcfg: TrainConfig, *,
                          activation=None, workers: int = 1,
                          backend=None) -> list[WidthResult]:
    """Mean PSNR per sub-network width over an image set, at fixed depth.

    Each (image, width, repeat) run gets its own derived seed, so the
    table is reproducible and the mean equals the mean of the logged runs.
    """
    if not images:
        raise ValueError("need at least one image")
    n = images[0].n
    if any(img.n != n or img.rank != images[0].rank for img in images):
        raise ValueError("all images must share the same shape")
    grid = GridSpec(grid_m, images[0].rank)
    results = []
    for width in widths:
        config = SubNetworkConfig(depth_d=depth, width_w=width,
                                  activation=activation or Activation.SINE)
        runs = []
        for img_idx, img in enumerate(images):
            for rep in range(repeats):
                run_seed = int(seed_sequence(tcfg.seed, img_idx, width, rep).generate_state(1)[0])
                _, report = train_ensemble(img, grid, config, replace(tcfg, seed=run_seed),
                                           workers=workers, backend=backend)
                runs.append((img_idx, rep, report.final_psnr))
        fc = total_flops(config, grid, n, images[0].rank, images[0].channels)
        results.append(WidthResult(width, fc, runs, float(np.mean([r[2] for r in runs]))))
    return results
