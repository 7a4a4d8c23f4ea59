"""Oracle suites: each check compares the fast path against an independent one.

Every suite returns a :class:`CheckResult`. ``run_suites(quick=True)`` runs
reduced instance counts; the full sizes are what the acceptance tests use.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .async_detector import AsyncDetector, block_update, candidate_stats_direct
from .complexity import crossover_thresholds
from .fft_kernels import psi, tone_multiply, tone_spec, xi
from .harness import oracle_block_search
from .likelihood import (DetectorState, LeaveOneOut, Problem, dense_state, likelihood_decomposition,
                         negloglik, objective, remove_device, restore_device)
from .model import (ChannelStatistics, SystemParams, gen_los, gen_pilots, gen_scenario, offset_grid,
                    synthesize_received, tau)
from .sync_detector import CoordStatsSync, SyncDetector, coord_stats_sync, optimal_increment


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    count: int
    elapsed: float = 0.0
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst = float(self.worst)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.name}: worst={self.worst:.3e} tol={self.tol:.1e} "
                f"n={self.count} t={self.elapsed:.1f}s {self.detail}").rstrip()


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.elapsed = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_problem(rng, case, N=24, L=16, M=8, D=0, Omega=0.0, Q=1, noise_var=0.5,
                   active_prob=0.25, kappa=None, heterogeneous=True) -> tuple:
    params = SystemParams(case, N, M, L, D, Omega, Q, noise_var, active_prob)
    P = gen_pilots(rng, L, N)
    Hbar = gen_los(rng, M, N)
    if kappa is not None:
        g = rng.uniform(0.5, 2.0, N) if heterogeneous else np.ones(N)
        stats = ChannelStatistics(g, np.full(N, float(kappa)), Hbar)
    elif heterogeneous:
        stats = ChannelStatistics(rng.uniform(0.5, 2.0, N), rng.uniform(0.05, 3.0, N), Hbar)
    else:
        stats = ChannelStatistics.uniform(Hbar, 1.0, 0.1)
    sc = gen_scenario(rng, params, stats)
    Y = synthesize_received(params, P, stats, sc).Y
    grid = offset_grid(case, D, Omega, Q)
    return Problem(case, Y, P, stats, noise_var, grid), sc


def randomize_state(rng, state: DetectorState, frac_active: float = 0.5) -> DetectorState:
    pr = state.problem
    for n in range(pr.N):
        a = rng.uniform(0.0, 1.0) if rng.random() < frac_active else 0.0
        v = remove_device(state, n)
        restore_device(state, v, n, a, int(rng.integers(pr.K)))
    return state


def _relerr(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b), initial=0.0)), 1e-300)
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


_ASYNC_SMALL = {
    "t": dict(D=2),
    "f": dict(Omega=math.pi, Q=16),
    "tf": dict(D=2, Omega=math.pi, Q=16),
}


@_timed
def strategy_equivalence(n_instances: int = 30, seed: int = 11, tol_step: float = 1e-9,
                         tol_final: float = 1e-7) -> CheckResult:
    """Direct and FFT statistics at every device step, and final iterates."""
    rng = np.random.default_rng(seed)
    worst_step = worst_final = 0.0
    mismatched_x = 0
    for case, extra in _ASYNC_SMALL.items():
        for _ in range(n_instances):
            pr, _ = random_problem(rng, case, N=24, L=16, M=8, **extra)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)   # Q < L_i is part of this setup
                det = AsyncDetector(pr, "fft")
            errs = []

            def hook(n, views, cs, upd):
                ref = candidate_stats_direct(views, pr, n)
                errs.append(max(_relerr(cs.alpha, ref.alpha), _relerr(cs.beta, ref.beta),
                                _relerr(cs.eta, ref.eta)))

            r_fft = det.run(hook=hook)
            r_dir = AsyncDetector(pr, "direct").run()
            worst_step = max(worst_step, max(errs))
            n_tr = min(len(r_fft.objective_trace), len(r_dir.objective_trace))
            worst_final = max(worst_final, float(np.max(np.abs(r_fft.a_hat - r_dir.a_hat))),
                              _relerr(r_fft.objective_trace[:n_tr], r_dir.objective_trace[:n_tr]))
            mismatched_x += int(np.sum(r_fft.x_hat != r_dir.x_hat))
            mismatched_x += int(len(r_fft.objective_trace) != len(r_dir.objective_trace))
    ok = worst_step <= tol_step and worst_final <= tol_final and mismatched_x == 0
    return CheckResult("strategy equivalence", ok, worst_step, tol_step, 3 * n_instances,
                       detail=f"final={worst_final:.2e} x_mismatch={mismatched_x}")


def scalar_gain(d, alpha, beta, eta, kappa):
    d = np.asarray(d, dtype=float)
    return np.log1p(alpha * d) + (kappa * alpha * d ** 2 - (beta + eta) * d) / (1.0 + alpha * d)


@_timed
def increment_optimality(n_tuples: int = 1000, seed: int = 12, step: float = 1e-4) -> CheckResult:
    """Closed-form increment against a dense grid of the scalar objective."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    bad = 0
    n_degenerate = 0
    for i in range(n_tuples):
        alpha = 10 ** rng.uniform(-2, 1)
        kappa = 10 ** rng.uniform(-3, 1)
        beta = rng.uniform(0, 4) * alpha * (1 + alpha)
        eta = rng.normal(0, 1 + alpha)
        if i % 10 == 0:          # push some tuples into the non-positive discriminant branch
            eta = -(kappa + beta) - alpha ** 2 / (4 * kappa) - rng.uniform(0, 1)
        a_n = rng.uniform(0, min(1.0, 0.999 / alpha))
        d_star = optimal_increment(CoordStatsSync(alpha, beta, eta), kappa, a_n)
        n_degenerate += int(4 * kappa * (kappa + beta + eta) + alpha ** 2 <= 0)
        grid = np.arange(-a_n, 1 - a_n + 0.5 * step, step)
        grid = np.clip(grid, -a_n, 1 - a_n)
        vals = scalar_gain(grid, alpha, beta, eta, kappa)
        f_star = float(scalar_gain(d_star, alpha, beta, eta, kappa))
        j = int(np.argmin(vals))
        excess = f_star - float(vals[j])
        worst = max(worst, excess)
        near = abs(d_star - grid[j]) <= step * (1 + 1e-9) or abs(excess) <= 1e-10
        if excess > 1e-12 * (1 + abs(vals[j])) or not near:
            bad += 1
    return CheckResult("scalar increment optimality", bad == 0, worst, 1e-12, n_tuples,
                       detail=f"failures={bad} degenerate={n_degenerate}")


def _block_objective(pr: Problem, Sn, Yn, n, k, a_vals):
    """Dense f_i over activity values for device n at candidate k (batched)."""
    Sigma_n = np.linalg.inv(Sn)
    pbar = pr.scaled_pilot(n, k)
    sk = math.sqrt(pr.stats.kappa[n])
    hb = pr.stats.Hbar[:, n]
    a = np.asarray(a_vals, dtype=float)[:, None, None]
    S = Sigma_n[None] + a * np.outer(pbar, pbar.conj())[None]
    R = Yn[None] - a * sk * np.outer(pbar, hb)[None]
    _, logdet = np.linalg.slogdet(S)
    W = np.linalg.solve(S, R)
    tr = np.einsum("bij,bij->b", R.conj(), W).real
    return logdet + tr / pr.M


@_timed
def block_optimality(n_instances: int = 100, seed: int = 13, a_step: float = 1e-3,
                        tol: float = 1e-8) -> CheckResult:
    """Block update vs exhaustive (a, x) search, and the h-value identity."""
    rng = np.random.default_rng(seed)
    worst_h = 0.0
    bad = 0
    n_active = 0
    cases = [("t", dict(D=3)), ("f", dict(Omega=math.pi, Q=8)), ("f", dict(Omega=0.6 * math.pi, Q=8)),
             ("tf", dict(D=2, Omega=math.pi, Q=6))]
    for i in range(n_instances):
        case, extra = cases[i % len(cases)]
        pr, sc = random_problem(rng, case, N=6, L=6, M=4, noise_var=0.1, active_prob=0.5, **extra)
        st = randomize_state(rng, DetectorState.initial(pr))
        n = int(rng.integers(pr.N))
        a_mn = st.a.copy()
        x = st.x.copy()
        Sn, Yn, _ = dense_state(pr, a_mn, x, exclude=n)
        cs = candidate_stats_direct(LeaveOneOut(n, Sn, Yn, None, None), pr, n)
        upd = block_update(cs, pr.stats.kappa[n])
        n_active += int(upd.a_star > 0)
        a0 = a_mn.copy()
        a0[n] = 0.0
        x0 = x.copy()
        x0[n] = 0
        f0 = objective(pr, a0, x0)
        for k in range(pr.K):
            a1, x1 = a0.copy(), x0.copy()
            a1[n], x1[n] = upd.d_values[k], k
            worst_h = max(worst_h, abs(objective(pr, a1, x1) - f0 - upd.h_values[k]))
        a_g, k_g, f_g = _grid_search(pr, Sn, Yn, n, a_step)
        f_star = float(_block_objective(pr, Sn, Yn, n, upd.x_star, [upd.a_star])[0])
        ok = f_star <= f_g + 1e-10 * (1 + abs(f_g))
        if k_g == upd.x_star:
            ok &= abs(a_g - upd.a_star) <= a_step * (1 + 1e-9) or abs(f_star - f_g) <= 1e-9
        else:
            ok &= abs(f_star - f_g) <= 1e-6
        bad += int(not ok)
    return CheckResult("block update optimality", bad == 0 and worst_h <= tol, worst_h, tol,
                       n_instances, detail=f"search_failures={bad} nonzero_updates={n_active}")


def _grid_search(pr, Sn, Yn, n, a_step):
    return oracle_block_search(lambda av, k: _block_objective(pr, Sn, Yn, n, k, av), pr.K, a_step)


@_timed
def convergence(n_instances: int = 50, seed: int = 14, slack: float = 1e-9,
                epsilon: float = 1e-7, max_iters: int = 1000) -> CheckResult:
    """Monotone objective traces and termination within the iteration budget."""
    rng = np.random.default_rng(seed)
    worst_rise = -math.inf
    worst_track = 0.0
    not_conv = 0
    specs = [("sync", {})] + list(_ASYNC_SMALL.items())
    for case, extra in specs:
        for _ in range(n_instances):
            pr, _ = random_problem(rng, case, N=24, L=16, M=8, **extra)
            if case == "sync":
                det = SyncDetector(pr)
                res = det.run(epsilon, max_iters)
                x_hat = None
            else:
                res = AsyncDetector(pr, "direct").run(epsilon, max_iters)
                x_hat = res.x_hat
            tr = np.asarray(res.objective_trace)
            worst_rise = max(worst_rise, float(np.max(np.diff(tr))))
            not_conv += int(not res.converged)
            dense = objective(pr, res.a_hat, x_hat)
            worst_track = max(worst_track, abs(dense - tr[-1]) / abs(dense))
    ok = worst_rise <= slack and not_conv == 0 and worst_track <= 1e-7
    return CheckResult("monotone convergence", ok, max(worst_rise, 0.0), slack, 4 * n_instances,
                       detail=f"not_converged={not_conv} tracked_vs_dense={worst_track:.2e}")


@_timed
def rayleigh_limits(n_instances: int = 20, seed: int = 15, kappa: float = 1e-10,
                    tol: float = 1e-4) -> CheckResult:
    """Near-zero Rician factor reproduces the Rayleigh increments."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_exact = 0.0
    count = 0
    for i in range(n_instances):
        for kap, bucket in ((kappa, "near"), (0.0, "exact")):
            sub = np.random.default_rng(rng.integers(2 ** 32))
            # synchronous coordinate
            pr, _ = random_problem(sub, "sync", N=20, L=10, M=6, kappa=kap, noise_var=0.3)
            st = randomize_state(sub, DetectorState.initial(pr))
            Sinv, _, _ = dense_state(pr, st.a)
            for n in range(pr.N):
                p = pr.pilots[:, n]
                g = pr.stats.g[n]
                Sp = Sinv @ p
                ar = g * float(np.vdot(p, Sp).real)
                br = g / pr.M * float(np.vdot(pr.Y.conj().T @ Sp, pr.Y.conj().T @ Sp).real)
                d_ray = min(max((br - ar) / ar ** 2, -st.a[n]), 1 - st.a[n])
                d = optimal_increment(coord_stats_sync(st, n), pr.stats.kappa[n], st.a[n])
                err = abs(d - d_ray)
                if bucket == "near":
                    worst = max(worst, err)
                else:
                    worst_exact = max(worst_exact, err / max(1.0, abs(d_ray)))
                count += 1
            # asynchronous block
            case, extra = list(_ASYNC_SMALL.items())[i % 3]
            pr, _ = random_problem(sub, case, N=12, L=6, M=4, kappa=kap, noise_var=0.3, **extra)
            st = randomize_state(sub, DetectorState.initial(pr))
            n = int(sub.integers(pr.N))
            Sn, Yn, _ = dense_state(pr, st.a, st.x, exclude=n)
            upd = block_update(candidate_stats_direct(LeaveOneOut(n, Sn, Yn, None, None), pr, n),
                               pr.stats.kappa[n])
            P = pr.candidate_pilots(n) / pr.scale[n]
            g = pr.stats.g[n]
            SP = Sn @ P
            ar = g * np.einsum("lk,lk->k", P.conj(), SP).real
            YS = pr.Y.conj().T @ SP
            br = g / pr.M * np.einsum("mk,mk->k", YS.conj(), YS).real
            d_ray = np.clip((br - ar) / ar ** 2, 0.0, 1.0)
            h_ray = np.log1p(ar * d_ray) - br * d_ray / (1 + ar * d_ray)
            err = max(float(np.max(np.abs(upd.d_values - d_ray))),
                      float(np.max(np.abs(upd.h_values - h_ray))))
            if bucket == "near":
                worst = max(worst, err)
            else:
                worst_exact = max(worst_exact, err)
            count += 1
    ok = worst <= tol and worst_exact <= 1e-9
    return CheckResult("rayleigh limits", ok, worst, tol, count,
                       detail=f"kappa=0 worst={worst_exact:.2e}")


@_timed
def incremental_integrity(seed: int = 16, tol: float = 1e-7, tol_rt: float = 1e-9) -> CheckResult:
    """One full sweep of rank-one updates vs dense recomputation, and round trips."""
    rng = np.random.default_rng(seed)
    worst = worst_rt = 0.0
    specs = [("t", dict(D=3)), ("f", dict(Omega=math.pi, Q=32)), ("tf", dict(D=3, Omega=0.5 * math.pi, Q=40))]
    for case, extra in specs:
        pr, _ = random_problem(rng, case, N=64, L=32, M=8, noise_var=0.5, active_prob=0.2, **extra)
        det = AsyncDetector(pr, "fft")
        det.sweep()
        st = det.state
        S, Yt, Phi = dense_state(pr, st.a, st.x)
        worst = max(worst, _relerr(st.sigma_inv, S), _relerr(st.ytilde, Yt), _relerr(st.phi, Phi))
        st = randomize_state(rng, st, 0.8)
        for n in rng.choice(pr.N, 8, replace=False):
            before = (st.sigma_inv.copy(), st.ytilde.copy(), st.phi.copy())
            v = remove_device(st, int(n))
            Sn, Yn, Phin = dense_state(pr, st.a, st.x, exclude=int(n))
            worst = max(worst, _relerr(v.sigma_inv, Sn), _relerr(v.ytilde, Yn), _relerr(v.phi, Phin))
            restore_device(st, v, int(n), float(st.a[n]), int(st.x[n]))
            after = (st.sigma_inv, st.ytilde, st.phi)
            worst_rt = max(worst_rt, *(_relerr(x, y) for x, y in zip(after, before)))
    ok = worst <= tol and worst_rt <= tol_rt
    return CheckResult("incremental integrity", ok, worst, tol, len(specs),
                       detail=f"round_trip={worst_rt:.2e}")


@_timed
def fft_identities(n_inputs: int = 100, seed: int = 17, tol: float = 1e-10) -> CheckResult:
    """Psi reconstruction, circulant diagonalization, tone products and Xi."""
    rng = np.random.default_rng(seed)
    w_psi = w_circ = w_tone = w_xi = 0.0
    for _ in range(n_inputs):
        K = int(rng.integers(2, 24))
        A = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
        B = A + A.conj().T
        Ps = psi(B)
        R = np.zeros_like(B)
        for k in range(K):
            for l in range(K - k):
                R[l, l + k] = Ps[l, k] * (math.sqrt(2) if k == 0 else 1.0)
        iu = np.triu_indices(K)
        w_psi = max(w_psi, float(np.max(np.abs(R[iu] - B[iu]))))

        c = rng.normal(size=K) + 1j * rng.normal(size=K)
        C = scipy.linalg.circulant(c)
        F = scipy.linalg.dft(K)
        w_circ = max(w_circ, float(np.max(np.abs(F.conj().T @ np.diag(F @ c) @ F / K - C))))

        Q = int(rng.integers(2, 40))
        Li = int(rng.integers(1, 40))
        T = np.stack([tau(2 * math.pi * q / Q, Li) for q in range(Q)])
        Bc = rng.normal(size=(Li, 3)) + 1j * rng.normal(size=(Li, 3))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            spec = tone_spec(Q, Li)
        w_tone = max(w_tone, _relerr(tone_multiply(spec, Bc), T @ Bc))

        p = rng.normal(size=K) + 1j * rng.normal(size=K)
        PP = psi(np.outer(p.conj(), p))
        dense = (F.conj().T @ Ps) * (F @ PP)
        w_xi = max(w_xi, _relerr(xi("t", B, p), dense))
    worst = max(w_psi, w_circ, w_tone, w_xi)
    return CheckResult("fft identities", worst <= tol, worst, tol, n_inputs,
                       detail=f"psi={w_psi:.1e} circ={w_circ:.1e} tone={w_tone:.1e} xi={w_xi:.1e}")


CROSSOVER_TARGETS = {
    "Dunder_t": (29.5, 0.1),
    "Omegaunder_f": (0.27 * math.pi, 0.01 * math.pi),
    "Dunder_tf": (-0.695, 0.01),
    "Omegaunder_tf": (0.06 * math.pi, 0.01 * math.pi),
}


@_timed
def crossover_regression() -> CheckResult:
    th = crossover_thresholds(60, 48, 128, 4, math.pi)
    gaps = {k: abs(getattr(th, k) - v) / tol for k, (v, tol) in CROSSOVER_TARGETS.items()}
    worst = max(gaps.values())
    detail = " ".join(f"{k}={getattr(th, k) / math.pi:.4f}pi" if k.startswith("Omega")
                      else f"{k}={getattr(th, k):.4f}" for k in CROSSOVER_TARGETS)
    return CheckResult("crossover thresholds", worst <= 1.0, worst, 1.0, len(gaps), detail=detail)


@_timed
def decomposition(n_instances: int = 50, seed: int = 18, tol: float = 1e-10) -> CheckResult:
    """f = f_Ray / M + Delta on random synchronous instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        pr, _ = random_problem(rng, "sync", N=20, L=10, M=6)
        a = rng.uniform(0, 1, pr.N) * (rng.random(pr.N) < 0.5)
        f = negloglik("sync", a, None, pr.pilots, pr.stats, pr.Y, pr.noise_var)
        f_ray, delta = likelihood_decomposition("sync", a, None, pr.pilots, pr.stats, pr.Y, pr.noise_var)
        worst = max(worst, abs(f - (f_ray / pr.M + delta)) / abs(f))
    return CheckResult("likelihood decomposition", worst <= tol, worst, tol, n_instances)


SUITES = {
    "strategy_equivalence": (strategy_equivalence, dict(n_instances=5)),
    "increment": (increment_optimality, dict(n_tuples=200)),
    "block": (block_optimality, dict(n_instances=12)),
    "convergence": (convergence, dict(n_instances=5)),
    "rayleigh": (rayleigh_limits, dict(n_instances=4)),
    "incremental": (incremental_integrity, {}),
    "fft_identities": (fft_identities, dict(n_inputs=20)),
    "crossover": (crossover_regression, {}),
    "decomposition": (decomposition, dict(n_instances=10)),
}


def run_suites(quick: bool = False, names=None) -> list:
    out = []
    for name, (fn, quick_kw) in SUITES.items():
        if names and name not in names:
            continue
        out.append(fn(**(quick_kw if quick else {})))
    return out
