"""Alternating width/depth search under a FLOP budget.

Each iteration first picks the best width at the current depth, then the
best depth at that width, maximizing

    score = mean_psnr - alpha * log10(FC)      subject to  FC <= f_max

where FC is the forward-pass FLOP count over the whole signal and
``mean_psnr`` is averaged over repeated trainings with per-candidate
seeds.  The PSNR fed to the score uses peak 1 (i.e. ``-10*log10(mse)``,
equivalently ``20*log10(1/rmse)``), so the score is a pure function of the
reconstruction error; the constant offset to the peak-2 PSNR reported by
the trainer shifts all candidates equally and never changes an argmax.

The search starts from the incumbent (depth 3, width 256) even when that
point violates the budget: the incumbent is only a coordinate, it is
never returned unless a phase re-selects it from the feasible set.
Candidate evaluations are memoized on (depth, width) - seeds depend only
on the candidate and repeat index, so re-evaluating is redundant.  This
also makes the accepted score non-decreasing across iterations whenever
the incumbent is feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .flops import FlopCount, total_flops
from .nets import Activation, SubNetworkConfig, seed_sequence
from .partition import GridSpec, SignalTensor
from .training import PSNR_CAP_DB, TrainConfig, train_ensemble


class BudgetInfeasibleError(ValueError):
    """No candidate in the search set satisfies the FLOP budget."""


@dataclass(frozen=True)
class SearchSpace:
    depths: tuple[int, ...] = (1, 2, 3, 4, 5)
    widths: tuple[int, ...] = (16, 32, 64, 128, 256, 512)

    def __post_init__(self):
        for name, values in (("depths", self.depths), ("widths", self.widths)):
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class SearchConfig:
    iter_max: int
    f_max: FlopCount
    alpha: float = 7.0
    repeats: int = 1
    m: int = 1
    train: TrainConfig = TrainConfig(steps=500)
    init_depth: int = 3
    init_width: int = 256
    activation: Activation = Activation.SINE
    omega0: float = 30.0
    mapping_size: int = 65
    mapping_scale: float = 10.0

    def __post_init__(self):
        if self.iter_max < 1:
            raise ValueError("iter_max must be >= 1")
        if self.f_max <= 0:
            raise ValueError("f_max must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def subnet_config(self, depth: int, width: int) -> SubNetworkConfig:
        return SubNetworkConfig(depth_d=depth, width_w=width, activation=self.activation,
                                omega0=self.omega0, mapping_size=self.mapping_size,
                                mapping_scale=self.mapping_scale)


@dataclass(frozen=True)
class CandidateRecord:
    iteration: int
    phase: str  # "width" or "depth"
    depth: int
    width: int
    mean_psnr: float
    flops: FlopCount
    score: float
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "depth": self.depth,
            "width": self.width,
            "mean_psnr": self.mean_psnr,
            "flops": self.flops,
            "score": self.score,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    depth: int
    width: int
    score: float


@dataclass
class SearchTrace:
    candidates: list[CandidateRecord] = field(default_factory=list)
    iterations: list[IterationRecord] = field(default_factory=list)
    final_depth: int = 0
    final_width: int = 0
    termination: str = ""  # "converged" or "iter_max"

    def to_dict(self) -> dict:
        return {
            "candidates": [c.to_dict() for c in self.candidates],
            "iterations": [
                {"iteration": r.iteration, "depth": r.depth, "width": r.width, "score": r.score}
                for r in self.iterations
            ],
            "final_depth": self.final_depth,
            "final_width": self.final_width,
            "termination": self.termination,
        }


def objective_score(mean_psnr_db: float, fc: FlopCount, alpha: float) -> float:
    """PSNR regularized by the log of the FLOP count."""
    if fc <= 0:
        raise ValueError("FLOP count must be positive")
    return float(mean_psnr_db - alpha * math.log10(fc))


def error_psnr(mse: float) -> float:
    """Peak-1 PSNR of a mean squared error, capped like the trainer's."""
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(-10.0 * math.log10(mse), PSNR_CAP_DB))


def make_training_evaluator(cfg: SearchConfig, signal: SignalTensor, *,
                            workers: int = 1, backend=None):
    """Default candidate evaluator: train ``repeats`` times, average PSNR.

    Seeds derive from (seed, depth, width, repeat) only, so a candidate's
    mean is a pure function of the candidate - independent of when or in
    which phase it is evaluated.
    """

    def evaluate(depth: int, width: int) -> float:
        psnrs = []
        for k in range(cfg.repeats):
            run_seed = int(seed_sequence(cfg.train.seed, depth, width, k).generate_state(1)[0])
            _, report = train_ensemble(
                signal, GridSpec(cfg.m, signal.rank), cfg.subnet_config(depth, width),
                replace(cfg.train, seed=run_seed), workers=workers, backend=backend)
            psnrs.append(error_psnr(report.final_mse))
        return float(np.mean(psnrs))

    return evaluate


def _phase(iteration: int, phase: str, fixed: int, candidates, cfg: SearchConfig,
           signal: SignalTensor, evaluate) -> tuple[int, list[CandidateRecord]]:
    grid = GridSpec(cfg.m, signal.rank)
    records = []
    best = None  # (score, fc, candidate)
    for cand in candidates:
        depth, width = (fixed, cand) if phase == "width" else (cand, fixed)
        fc = total_flops(cfg.subnet_config(depth, width), grid, signal.n,
                         signal.rank, signal.channels)
        if fc > cfg.f_max:
            continue
        mean_psnr = evaluate(depth, width)
        score = objective_score(mean_psnr, fc, cfg.alpha)
        records.append(CandidateRecord(iteration, phase, depth, width,
                                       mean_psnr, fc, score, False))
        key = (-score, fc, cand)
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise BudgetInfeasibleError(
            f"no {phase} candidate fits the budget f_max={cfg.f_max} "
            f"(fixed {'depth' if phase == 'width' else 'width'}={fixed})"
        )
    chosen = best[1]
    records = [replace(r, accepted=(r.width == chosen) if phase == "width" else (r.depth == chosen))
               for r in records]
    return chosen, records


def argmax_width(d_fixed: int, space: SearchSpace, cfg: SearchConfig,
                 signal: SignalTensor, evaluate=None, iteration: int = 0):
    """Best budget-feasible width at a fixed depth; ties prefer lower cost."""
    if evaluate is None:
        evaluate = make_training_evaluator(cfg, signal)
    return _phase(iteration, "width", d_fixed, space.widths, cfg, signal, evaluate)


def argmax_depth(w_fixed: int, space: SearchSpace, cfg: SearchConfig,
                 signal: SignalTensor, evaluate=None, iteration: int = 0):
    """Best budget-feasible depth at a fixed width; ties prefer lower cost."""
    if evaluate is None:
        evaluate = make_training_evaluator(cfg, signal)
    return _phase(iteration, "depth", w_fixed, space.depths, cfg, signal, evaluate)


def run_search(space: SearchSpace, cfg: SearchConfig, signal: SignalTensor,
               evaluate=None, *, workers: int = 1,
               backend=None) -> tuple[SubNetworkConfig, SearchTrace]:
    """Alternate width and depth phases until a fixed point or iter_max."""
    if evaluate is None:
        evaluate = make_training_evaluator(cfg, signal, workers=workers, backend=backend)

    memo: dict[tuple[int, int], float] = {}

    def cached(depth: int, width: int) -> float:
        key = (depth, width)
        if key not in memo:
            memo[key] = evaluate(depth, width)
        return memo[key]

    trace = SearchTrace()
    d_cur, w_cur = cfg.init_depth, cfg.init_width
    for iteration in range(1, cfg.iter_max + 1):
        w_next, wrecs = _phase(iteration, "width", d_cur, space.widths, cfg, signal, cached)
        d_next, drecs = _phase(iteration, "depth", w_next, space.depths, cfg, signal, cached)
        trace.candidates.extend(wrecs + drecs)
        accepted = next(r for r in drecs if r.accepted)
        trace.iterations.append(IterationRecord(iteration, d_next, w_next, accepted.score))
        if w_next == w_cur and d_next == d_cur:
            trace.termination = "converged"
            break
        d_cur, w_cur = d_next, w_next
    else:
        trace.termination = "iter_max"

    trace.final_depth, trace.final_width = d_cur, w_cur
    return cfg.subnet_config(d_cur, w_cur), trace
