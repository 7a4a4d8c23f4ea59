"""Monte Carlo evaluation: trials, threshold sweeps, timing and search oracles."""

from __future__ import annotations

import hashlib
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .async_detector import AsyncDetector
from .complexity import flops_direct_per_device, flops_fft_per_device, recommend_strategy
from .config import RunConfig
from .likelihood import NumericalError, Problem
from .model import (CaseId, ChannelStatistics, gen_los, gen_pilots, gen_scenario, offset_grid,
                    synthesize_received)
from .sync_detector import SyncDetector

THETA_GRID = np.round(np.arange(1, 101) / 100.0, 2)
MAX_FAILURE_RATE = 0.05


class HarnessError(RuntimeError):
    pass


def binarize(a_hat, theta: float) -> np.ndarray:
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    return (np.asarray(a_hat) >= theta).astype(np.int64)


def error_probability(a_true, a_bin) -> float:
    a_true, a_bin = np.asarray(a_true), np.asarray(a_bin)
    if a_true.shape != a_bin.shape:
        raise ValueError("length mismatch")
    return float(np.mean(a_true != a_bin))


@dataclass
class Instance:
    problem: Problem
    a_true: np.ndarray
    t_true: np.ndarray
    omega_true: np.ndarray


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


def make_instance(cfg: RunConfig, rng: np.random.Generator) -> Instance:
    params = cfg.system_params()
    P = gen_pilots(rng, params.L, params.N)
    Hbar = gen_los(rng, params.M, params.N)
    stats = ChannelStatistics.uniform(Hbar, cfg.g, cfg.kappa)
    sc = gen_scenario(rng, params, stats)
    Y = synthesize_received(params, P, stats, sc).Y
    grid = offset_grid(params.case, params.D, params.Omega, params.Q)
    return Instance(Problem(params.case, Y, P, stats, params.noise_var, grid),
                    sc.a_true, sc.t_true, sc.omega_true)


def resolve_strategy(cfg: RunConfig, selector=None) -> str:
    if selector is not None:
        return selector(cfg) if callable(selector) else str(selector)
    if cfg.case is CaseId.SYNC:
        return "direct"
    if cfg.strategy == "auto":
        return recommend_strategy(cfg.case, cfg.L, cfg.M, cfg.D, cfg.Omega, cfg.Q).strategy
    return cfg.strategy


def detect(problem: Problem, strategy: str, epsilon: float, max_iters: int):
    """Run the matching detector; returns (result, wall_time_ns) including init."""
    t0 = time.perf_counter_ns()
    if problem.case is CaseId.SYNC:
        res = SyncDetector(problem).run(epsilon, max_iters)
    else:
        res = AsyncDetector(problem, strategy).run(epsilon, max_iters)
    return res, time.perf_counter_ns() - t0


@dataclass
class TrialRecord:
    trial: int
    seed: tuple
    a_true: np.ndarray
    t_true: np.ndarray
    omega_true: np.ndarray
    a_hat: np.ndarray | None = None
    x_hat: np.ndarray | None = None
    t_hat: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    converged: bool = False
    wall_time_ns: int = 0
    strategy: str = "direct"
    failure: str | None = None

    @property
    def n_active(self) -> int:
        return int(np.sum(self.a_true))

    def errors(self, thetas=THETA_GRID) -> np.ndarray:
        """Per-device mismatch rate at each threshold."""
        dec = self.a_hat[None, :] >= np.asarray(thetas)[:, None]
        return np.mean(dec != self.a_true.astype(bool)[None, :], axis=1)


@dataclass
class SweepResult:
    theta_grid: np.ndarray
    error_prob: np.ndarray
    std_err: np.ndarray
    theta_star: float
    error_star: float
    std_star: float
    n_trials: int
    n_failed: int = 0
    median_iters: float = float("nan")
    median_time_ns: float = float("nan")
    records: list = field(default_factory=list, repr=False)


def run_one(cfg: RunConfig, trial: int, selector=None) -> TrialRecord:
    rng = trial_rng(cfg.master_seed, trial)
    inst = make_instance(cfg, rng)
    strategy = resolve_strategy(cfg, selector)
    rec = TrialRecord(trial, (cfg.master_seed, trial), inst.a_true, inst.t_true, inst.omega_true,
                      strategy=strategy)
    try:
        res, ns = detect(inst.problem, strategy, cfg.epsilon, cfg.max_iters)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        rec.failure = f"{type(exc).__name__}: {exc}"
        return rec
    rec.a_hat = res.a_hat
    if cfg.case is CaseId.SYNC:
        rec.x_hat = np.zeros(cfg.N, dtype=np.int64)
        rec.t_hat = rec.x_hat
    else:
        rec.x_hat = res.x_hat
        rec.t_hat = res.t_hat
    rec.objective = res.objective_trace[-1]
    rec.iterations = res.iterations
    rec.converged = res.converged
    rec.wall_time_ns = ns
    return rec


def aggregate(records, thetas=THETA_GRID) -> SweepResult:
    ok = sorted((r for r in records if r.failure is None), key=lambda r: r.trial)
    n = len(ok)
    if n == 0:
        raise HarnessError("no successful trials")
    E = np.stack([r.errors(thetas) for r in ok])          # trials x thetas
    mean = np.array([math.fsum(col) / n for col in E.T])
    if n > 1:
        var = np.array([math.fsum((col - m) ** 2) / (n - 1) for col, m in zip(E.T, mean)])
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    k = int(np.argmin(mean))
    return SweepResult(np.asarray(thetas), mean, se, float(thetas[k]), float(mean[k]), float(se[k]),
                       n, len(records) - n,
                       float(statistics.median(r.iterations for r in ok)),
                       float(statistics.median(r.wall_time_ns for r in ok)), ok)


def run_trials(cfg: RunConfig, n_trials: int | None = None, detector_selector=None,
               threads: int | None = None):
    """Run independent trials and aggregate the threshold sweep.

    Each trial draws from its own seed-split stream, so results do not depend
    on scheduling or the thread count.
    """
    n_trials = cfg.n_trials if n_trials is None else n_trials
    threads = cfg.threads if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(lambda t: run_one(cfg, t, detector_selector), range(n_trials)))
    else:
        records = [run_one(cfg, t, detector_selector) for t in range(n_trials)]
    failed = [r for r in records if r.failure is not None]
    if len(failed) > MAX_FAILURE_RATE * n_trials:
        detail = "; ".join(f"trial {r.trial}: {r.failure}" for r in failed[:5])
        raise HarnessError(f"{len(failed)} of {n_trials} trials failed ({detail})")
    return records, aggregate(records)


def run_digest(records) -> str:
    h = hashlib.sha256()
    for r in sorted(records, key=lambda r: r.trial):
        h.update(str(r.trial).encode())
        if r.a_hat is not None:
            h.update(np.ascontiguousarray(r.a_hat).tobytes())
            h.update(np.ascontiguousarray(r.x_hat).tobytes())
        h.update(str(r.failure).encode())
    return h.hexdigest()


def offset_accuracy(records, a_threshold: float = 0.9) -> float:
    """Fraction of true-active devices with a_hat >= threshold whose delay is exact."""
    hit = tot = 0
    for r in records:
        if r.failure is not None:
            continue
        sel = (r.a_true == 1) & (r.a_hat >= a_threshold)
        tot += int(sel.sum())
        hit += int(np.sum(r.t_hat[sel] == r.t_true[sel]))
    return hit / tot if tot else float("nan")


def oracle_block_search(objective_closure, n_candidates: int, a_resolution: float = 1e-3,
                        a_range=(0.0, 1.0)):
    """Exhaustive minimization over an activity grid times all candidates.

    ``objective_closure(a_values, k)`` returns the objective for every value
    in ``a_values`` at candidate ``k``. Returns ``(a, k, value)``.
    """
    lo, hi = a_range
    n = int(round((hi - lo) / a_resolution))
    grid = np.linspace(lo, hi, n + 1)
    best = (None, None, math.inf)
    for k in range(n_candidates):
        vals = np.asarray(objective_closure(grid, k), dtype=float)
        j = int(np.argmin(vals))
        if vals[j] < best[2]:
            best = (float(grid[j]), k, float(vals[j]))
    return best


def timing_compare(config_grid, n_trials: int = 5, strategies=("direct", "fft")):
    """Median wall time per strategy; the same instances are timed for each."""
    rows = []
    for cfg in config_grid:
        times = {s: [] for s in strategies}
        identical = True
        for trial in range(n_trials):
            inst = make_instance(cfg, trial_rng(cfg.master_seed, trial))
            out = {}
            for s in strategies:
                res, ns = detect(inst.problem, s, cfg.epsilon, cfg.max_iters)
                times[s].append(ns)
                out[s] = res
            ref = out[strategies[0]]
            for s in strategies[1:]:
                o = out[s]
                identical &= bool(np.max(np.abs(o.a_hat - ref.a_hat)) <= 1e-7
                                  and np.array_equal(getattr(o, "x_hat", 0), getattr(ref, "x_hat", 0)))
        for s in strategies:
            flops = (flops_direct_per_device if s == "direct" else flops_fft_per_device)(
                cfg.case, cfg.L, cfg.M, cfg.D, cfg.Omega, cfg.Q)
            rows.append({"case": cfg.case.value, "D": cfg.D, "omega_over_pi": cfg.Omega / math.pi,
                         "Q": cfg.Q, "strategy": s, "median_time_ns": float(statistics.median(times[s])),
                         "flops_model": float(flops), "identical": identical})
    return rows
