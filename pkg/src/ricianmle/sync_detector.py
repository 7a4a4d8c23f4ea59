"""Coordinate descent for the synchronous detection problem."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import (DetectorState, NumericalError, Problem, _rank_one,
                         coordinate_gain, update_ytilde)
from .model import CaseId


@dataclass(frozen=True)
class CoordStatsSync:
    alpha: float
    beta: float
    eta: float


@dataclass
class SyncResult:
    a_hat: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    state: DetectorState | None = field(default=None, repr=False)


def _terms(state: DetectorState, n: int):
    pr = state.problem
    pbar = pr.scaled_pilot(n, 0)
    c = state.sigma_inv @ pbar
    d = state.ytilde.conj().T @ c
    alpha = float(np.vdot(pbar, c).real)
    beta = float(np.vdot(d, d).real) / pr.M
    eta = 2.0 * pr.sqrt_kappa[n] / pr.M * float((pr.stats.Hbar[:, n] @ d).real)
    return CoordStatsSync(alpha, beta, eta), pbar, c


def coord_stats_sync(state: DetectorState, n: int) -> CoordStatsSync:
    return _terms(state, n)[0]


def stationary_point(alpha, beta, eta, kappa):
    """Unconstrained stationary point of the coordinate gain, or nan.

    Written in rationalized form, 2(beta+eta-alpha) / (alpha (sqrt(Delta) + alpha + 2 kappa)),
    which stays accurate as kappa -> 0 and equals the Rayleigh increment
    (beta - alpha)/alpha^2 at kappa = 0. Returns nan where the discriminant
    is not positive.
    """
    alpha = np.asarray(alpha, dtype=float)
    disc = 4.0 * kappa * (kappa + beta + eta) + alpha * alpha
    ok = disc > 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    dhat = 2.0 * (beta + eta - alpha) / (alpha * (root + alpha + 2.0 * kappa))
    return np.where(ok, dhat, np.nan)


def optimal_increment(stats: CoordStatsSync, kappa_n: float, a_n: float) -> float:
    """Minimizer of the coordinate gain over d in [-a_n, 1 - a_n]."""
    if not stats.alpha > 0:
        raise ValueError("alpha must be positive")
    dhat = float(stationary_point(stats.alpha, stats.beta, stats.eta, kappa_n))
    if math.isnan(dhat):
        return -a_n
    return min(max(dhat, -a_n), 1.0 - a_n)


class SyncDetector:
    def __init__(self, problem: Problem):
        if problem.case is not CaseId.SYNC:
            raise ValueError("SyncDetector needs a synchronous problem")
        self.problem = problem
        self.state = DetectorState.initial(problem)
        self.f = problem.initial_objective()

    def step(self, n: int) -> float:
        st = self.state
        pr = self.problem
        stats, pbar, c = _terms(st, n)
        a_n = float(st.a[n])
        d = optimal_increment(stats, pr.stats.kappa[n], a_n)
        if d == 0.0:
            return 0.0
        self.f += float(coordinate_gain(d, stats.alpha, stats.beta, stats.eta, pr.stats.kappa[n]))
        st.a[n] = min(max(a_n + d, 0.0), 1.0)
        st.sigma_inv = _rank_one(st.sigma_inv, c, stats.alpha, d)
        st.ytilde = update_ytilde(st.ytilde, pbar, pr.stats.kappa[n], d, pr.stats.Hbar[:, n])
        return d

    def sweep(self) -> float:
        for n in range(self.problem.N):
            self.step(n)
        return self.f

    def run(self, epsilon: float = 1e-7, max_iters: int = 1000) -> SyncResult:
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        trace = [self.f]
        converged = False
        it = 0
        while it < max_iters:
            f_last = self.f
            self.sweep()
            it += 1
            if not math.isfinite(self.f):
                raise NumericalError(f"objective became non-finite at iteration {it}")
            trace.append(self.f)
            if abs(self.f - f_last) < epsilon * abs(f_last):
                converged = True
                break
        return SyncResult(self.state.a.copy(), trace, it, converged, self.state)


def run_sync(Y, pilots, stats, noise_var: float, epsilon: float = 1e-7,
             max_iters: int = 1000) -> SyncResult:
    problem = Problem(CaseId.SYNC, Y, pilots, stats, noise_var)
    return SyncDetector(problem).run(epsilon, max_iters)
