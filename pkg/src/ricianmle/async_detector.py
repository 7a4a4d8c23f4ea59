"""Block coordinate descent over (activity, offset) for the asynchronous cases.

Each device step removes the device from the state, scores every offset
candidate with its (alpha, beta, eta) statistics, picks the best block by the
closed-form update and re-inserts the device. The statistics come either from
direct matrix products or from the FFT forms in :mod:`fft_kernels`; both must
produce the same iterates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import (CandidateStats, DetectorState, LeaveOneOut, NumericalError, Problem,
                         coordinate_gain, remove_device, restore_device)
from .fft_kernels import FFTPrecompute, candidate_stats_fft
from .model import CaseId, OffsetGrid
from .sync_detector import stationary_point


class Strategy(str, enum.Enum):
    DIRECT = "direct"
    FFT = "fft"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, Strategy):
            return value
        return cls(str(value).strip().lower())


@dataclass
class BlockUpdate:
    a_star: float
    x_star: int
    h_values: np.ndarray
    d_values: np.ndarray


@dataclass
class AsyncResult:
    a_hat: np.ndarray
    x_hat: np.ndarray               # candidate indices into the grid
    objective_trace: list
    iterations: int
    converged: bool
    strategy_used: Strategy
    grid: OffsetGrid = field(repr=False)
    state: DetectorState | None = field(default=None, repr=False)

    @property
    def t_hat(self) -> np.ndarray:
        return self.grid.t_of(self.x_hat)

    @property
    def omega_hat(self) -> np.ndarray:
        return self.grid.omega_of(self.x_hat)

    def informative(self, threshold: float = 0.5) -> np.ndarray:
        """Offsets of devices detected as inactive carry no information."""
        return self.a_hat >= threshold


def candidate_stats_direct(views: LeaveOneOut, problem: Problem, n: int) -> CandidateStats:
    P = problem.candidate_pilots(n)
    C = views.sigma_inv @ P
    alpha = np.einsum("lk,lk->k", P.conj(), C).real
    Dm = views.ytilde.conj().T @ C
    beta = np.einsum("mk,mk->k", Dm.conj(), Dm).real / problem.M
    eta = (2.0 * problem.sqrt_kappa[n] / problem.M) * (problem.stats.Hbar[:, n] @ Dm).real
    return CandidateStats(alpha, beta, eta, problem.grid.shape)


def block_update(stats: CandidateStats, kappa_n: float) -> BlockUpdate:
    dhat = stationary_point(stats.alpha, stats.beta, stats.eta, kappa_n)
    d = np.where(np.isnan(dhat), 0.0, np.clip(np.nan_to_num(dhat), 0.0, 1.0))
    h = coordinate_gain(d, stats.alpha, stats.beta, stats.eta, kappa_n)
    k = int(np.argmin(h))
    return BlockUpdate(float(d[k]), k, h, d)


class AsyncDetector:
    def __init__(self, problem: Problem, strategy="direct"):
        if problem.case is CaseId.SYNC:
            raise ValueError("use SyncDetector for the synchronous case")
        self.problem = problem
        self.strategy = Strategy.parse(strategy)
        self.state = DetectorState.initial(problem, track_phi=self.strategy is Strategy.FFT)
        self.f = problem.initial_objective()
        self._pre = None
        if self.strategy is Strategy.FFT:
            self._pre = FFTPrecompute(problem)

    def stats(self, views: LeaveOneOut, n: int) -> CandidateStats:
        if self.strategy is Strategy.FFT:
            return candidate_stats_fft(self._pre, views, n)
        return candidate_stats_direct(views, self.problem, n)

    def step(self, n: int, hook=None) -> BlockUpdate:
        st = self.state
        kappa = self.problem.stats.kappa[n]
        views = remove_device(st, n)
        cs = self.stats(views, n)
        upd = block_update(cs, kappa)
        a_old, x_old = float(st.a[n]), int(st.x[n])
        g_old = float(coordinate_gain(a_old, cs.alpha[x_old], cs.beta[x_old], cs.eta[x_old], kappa))
        if hook is not None:
            hook(n, views, cs, upd)
        self.f += float(upd.h_values[upd.x_star]) - g_old
        restore_device(st, views, n, upd.a_star, upd.x_star)
        return upd

    def sweep(self, hook=None) -> float:
        for n in range(self.problem.N):
            self.step(n, hook)
        return self.f

    def run(self, epsilon: float = 1e-7, max_iters: int = 1000, hook=None) -> AsyncResult:
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        trace = [self.f]
        converged = False
        it = 0
        while it < max_iters:
            f_last = self.f
            self.sweep(hook)
            it += 1
            if not math.isfinite(self.f):
                raise NumericalError(f"objective became non-finite at iteration {it}")
            trace.append(self.f)
            if abs(self.f - f_last) < epsilon * abs(f_last):
                converged = True
                break
        st = self.state
        return AsyncResult(st.a.copy(), st.x.copy(), trace, it, converged, self.strategy,
                           self.problem.grid, st)


def run_async(case, strategy, Y, pilots, stats, grid: OffsetGrid, noise_var: float,
              epsilon: float = 1e-7, max_iters: int = 1000) -> AsyncResult:
    problem = Problem(case, Y, pilots, stats, noise_var, grid)
    return AsyncDetector(problem, strategy).run(epsilon, max_iters)
