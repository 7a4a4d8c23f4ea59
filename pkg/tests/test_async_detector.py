import math

import numpy as np
import pytest

from ricianmle.async_detector import (AsyncDetector, Strategy, block_update, candidate_stats_direct,
                                      run_async)
from ricianmle.harness import oracle_block_search
from ricianmle.likelihood import (CandidateStats, DetectorState, Problem, coordinate_gain,
                                  dense_state, objective, remove_device, restore_device)
from ricianmle.model import (ChannelStatistics, Scenario, SystemParams, complex_normal, gen_los,
                             gen_pilots, offset_grid, synthesize_received)
from ricianmle.sync_detector import coord_stats_sync
from ricianmle.verify import random_problem, randomize_state


def _dense_candidate_stats(pr, a, x, n):
    Sinv, Yt, _ = dense_state(pr, a, x, exclude=n)
    out = []
    for k in range(pr.K):
        pbar = pr.scaled_pilot(n, k)
        c = Sinv @ pbar
        d = Yt.conj().T @ c
        out.append((np.vdot(pbar, c).real, np.vdot(d, d).real / pr.M,
                    2 * pr.sqrt_kappa[n] / pr.M * (pr.stats.Hbar[:, n] @ d).real))
    return np.array(out).T


@pytest.mark.parametrize("case,kw", [("t", dict(D=3)), ("f", dict(Omega=math.pi, Q=16)),
                                     ("tf", dict(D=2, Omega=0.5 * math.pi, Q=16))])
def test_candidate_stats_vs_dense(rng, case, kw):
    pr, _ = random_problem(rng, case, N=12, L=8, M=4, **kw)
    st = randomize_state(rng, DetectorState.initial(pr), 0.6)
    for n in (0, 5, 11):
        cs = candidate_stats_direct(remove_device(st, n), pr, n)
        ref = _dense_candidate_stats(pr, st.a, st.x, n)
        for got, exp in zip((cs.alpha, cs.beta, cs.eta), ref):
            assert np.max(np.abs(got - exp)) <= 1e-9 * np.max(np.abs(exp))


def test_t_without_delay_reduces_to_sync(rng):
    prs, _ = random_problem(rng, "sync", N=10, L=8, M=4)
    prt = Problem("t", prs.Y, prs.pilots, prs.stats, prs.noise_var, offset_grid("t", 0, 0.0, 1))
    assert prt.K == 1
    a = np.where(rng.random(10) < 0.5, rng.uniform(0, 1, 10), 0.0)
    a[4] = 0.0
    sts, stt = DetectorState.initial(prs), DetectorState.initial(prt)
    for st in (sts, stt):
        for n in range(10):
            restore_device(st, remove_device(st, n), n, a[n], 0)
    cs = candidate_stats_direct(remove_device(stt, 4), prt, 4)
    ref = coord_stats_sync(sts, 4)
    assert cs.alpha.shape == (1,)
    assert cs.alpha[0] == pytest.approx(ref.alpha, rel=1e-12)
    assert cs.beta[0] == pytest.approx(ref.beta, rel=1e-12)
    assert cs.eta[0] == pytest.approx(ref.eta, rel=1e-10, abs=1e-14)


def test_zero_residual_zero_beta_eta(rng):
    pr, _ = random_problem(rng, "tf", N=6, L=6, M=3, D=2, Omega=math.pi, Q=8)
    st = DetectorState.initial(pr)
    st.ytilde = np.zeros_like(st.ytilde)
    cs = candidate_stats_direct(remove_device(st, 1), pr, 1)
    assert np.all(cs.beta == 0) and np.all(cs.eta == 0)


def test_all_nonpositive_discriminants_pick_first_candidate():
    K = 5
    cs = CandidateStats(np.full(K, 0.1), np.zeros(K), np.full(K, -5.0), (K,))
    upd = block_update(cs, 1.0)
    assert upd.a_star == 0.0 and upd.x_star == 0
    assert np.all(upd.d_values == 0)


def test_ties_pick_first_minimum():
    cs = CandidateStats(np.ones(4), np.array([1.0, 3.0, 3.0, 2.0]), np.zeros(4), (4,))
    assert block_update(cs, 0.5).x_star == 1


def test_rayleigh_block_limit():
    rng = np.random.default_rng(4)
    K = 50
    alpha, beta = rng.uniform(0.2, 3, K), rng.uniform(0, 8, K)
    cs = CandidateStats(alpha, beta, np.zeros(K), (K,))
    upd = block_update(cs, 1e-10)
    d_ray = np.clip((beta - alpha) / alpha ** 2, 0, 1)
    h_ray = np.log1p(alpha * d_ray) - beta * d_ray / (1 + alpha * d_ray)
    assert np.max(np.abs(upd.d_values - d_ray)) < 1e-4
    assert np.max(np.abs(upd.h_values - h_ray)) < 1e-4


@pytest.mark.parametrize("case,kw", [("t", dict(D=3)), ("tf", dict(D=1, Omega=math.pi, Q=4))])
def test_block_gain_and_exhaustive_search(rng, case, kw):
    pr, _ = random_problem(rng, case, N=8, L=6, M=3, **kw)
    st = randomize_state(rng, DetectorState.initial(pr), 0.6)
    n = 2
    views = remove_device(st, n)
    cs = candidate_stats_direct(views, pr, n)
    upd = block_update(cs, pr.stats.kappa[n])
    a0 = st.a.copy()
    a0[n] = 0.0
    x0 = st.x.copy()
    x0[n] = 0
    base = objective(pr, a0, x0)
    for k in range(pr.K):
        a1, x1 = a0.copy(), x0.copy()
        a1[n], x1[n] = upd.d_values[k], k
        assert objective(pr, a1, x1) - base == pytest.approx(upd.h_values[k], abs=1e-8)

    def closure(a_vals, k):
        return coordinate_gain(a_vals, cs.alpha[k], cs.beta[k], cs.eta[k], pr.stats.kappa[n])

    a_or, k_or, v_or = oracle_block_search(closure, pr.K, 1e-3)
    assert v_or >= upd.h_values[upd.x_star] - 1e-12
    assert abs(a_or - upd.a_star) <= 2e-3 or abs(v_or - upd.h_values[upd.x_star]) < 1e-6


@pytest.mark.parametrize("case,kw", [("t", dict(D=2)), ("f", dict(Omega=math.pi, Q=16)),
                                     ("tf", dict(D=2, Omega=math.pi, Q=16))])
def test_direct_and_fft_agree(rng, case, kw):
    import warnings
    pr, _ = random_problem(rng, case, N=24, L=16, M=8, **kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r1 = AsyncDetector(pr, "direct").run(max_iters=50)
        r2 = AsyncDetector(pr, "fft").run(max_iters=50)
    assert np.max(np.abs(r1.a_hat - r2.a_hat)) < 1e-7
    assert np.array_equal(r1.x_hat, r2.x_hat)
    assert np.allclose(r1.objective_trace, r2.objective_trace, rtol=1e-7, atol=0)


def test_noiseless_single_device_recovers_offsets():
    rng = np.random.default_rng(21)
    N, L, M, D, Q, s2 = 8, 16, 16, 3, 16, 1e-4
    params = SystemParams("tf", N, M, L, D, math.pi, Q, s2, 0.1)
    P = gen_pilots(rng, L, N)
    stats = ChannelStatistics.uniform(gen_los(rng, M, N), 1.0, 1.0)
    a = np.zeros(N, dtype=np.int64)
    a[5] = 1
    t = np.zeros(N, dtype=np.int64)
    t[5] = 2
    om = np.zeros(N)
    om[5] = 2 * math.pi * 3 / Q
    sc = Scenario(a, t, om, complex_normal(rng, (M, N)), complex_normal(rng, (L + D, M), s2))
    Y = synthesize_received(params, P, stats, sc).Y
    grid = offset_grid("tf", D, math.pi, Q)
    res = run_async("tf", "direct", Y, P, stats, grid, s2)
    assert int(np.argmax(res.a_hat)) == 5 and res.a_hat[5] > 0.9
    assert np.all(np.delete(res.a_hat, 5) < 0.1)
    assert res.t_hat[5] == 2
    assert res.x_hat[5] == grid.index_of(2, 3)


def test_tf_without_delay_matches_f(rng):
    pr_f, _ = random_problem(rng, "f", N=12, L=8, M=4, Omega=math.pi, Q=8)
    pr_tf = Problem("tf", pr_f.Y, pr_f.pilots, pr_f.stats, pr_f.noise_var,
                    offset_grid("tf", 0, math.pi, 8))
    r_f = AsyncDetector(pr_f).run()
    r_tf = AsyncDetector(pr_tf).run()
    assert np.allclose(r_f.objective_trace, r_tf.objective_trace, rtol=1e-12)
    assert np.array_equal(r_f.x_hat, r_tf.x_hat)


def test_trace_monotone_and_tracked(rng):
    pr, _ = random_problem(rng, "tf", N=20, L=8, M=4, D=2, Omega=math.pi, Q=8)
    res = AsyncDetector(pr).run(epsilon=1e-10, max_iters=100)
    tr = np.array(res.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12 * np.abs(tr[1:]))
    assert tr[-1] == pytest.approx(objective(pr, res.a_hat, res.x_hat), rel=1e-10)


def test_hook_sees_every_step(rng):
    pr, _ = random_problem(rng, "t", N=7, L=6, M=3, D=1)
    seen = []
    AsyncDetector(pr).run(max_iters=2, hook=lambda n, v, cs, u: seen.append(n))
    assert seen[:7] == list(range(7))


def test_strategy_parse_and_sync_rejected(rng):
    assert Strategy.parse("FFT") is Strategy.FFT
    with pytest.raises(ValueError):
        Strategy.parse("gpu")
    with pytest.raises(ValueError):
        AsyncDetector(random_problem(rng, "sync", N=4, L=6, M=2)[0])
