import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ricianmle.model import (CaseId, ChannelStatistics, SystemParams, equivalent_pilot, gen_los,
                             gen_pilots, gen_scenario, grid_cardinality, nearest_cfo_index,
                             offset_grid, pilot_matrix, small_scale_fading, synthesize_received,
                             tau, wrap_cfo)

from conftest import crandn


def test_pilots_shape_and_determinism():
    P = gen_pilots(np.random.default_rng(0), 1, 1)
    assert P.shape == (1, 1) and np.isfinite(P).all()
    a = gen_pilots(np.random.default_rng(5), 20, 100)
    b = gen_pilots(np.random.default_rng(5), 20, 100)
    assert np.array_equal(a, b)


def test_pilot_variance():
    P = gen_pilots(np.random.default_rng(1), 20, 100)
    assert abs(np.mean(np.abs(P) ** 2) - 1.0) < 0.2


def test_los_structure():
    H = gen_los(np.random.default_rng(2), 6, 9)
    assert np.allclose(np.abs(H), 1.0, atol=1e-12)
    ratio = H[1:] / H[:-1]
    assert np.allclose(ratio, ratio[0:1], atol=1e-12)
    assert np.allclose(gen_los(np.random.default_rng(3), 1, 5), 1.0)


def test_channel_statistics_validation():
    H = gen_los(np.random.default_rng(0), 3, 4)
    with pytest.raises(ValueError):
        ChannelStatistics(np.zeros(4), np.ones(4), H)
    with pytest.raises(ValueError):
        ChannelStatistics(np.ones(4), -np.ones(4), H)
    with pytest.raises(ValueError):
        ChannelStatistics(np.ones(4), np.ones(4), 2 * H)
    stats = ChannelStatistics.uniform(H, 2.0, 3.0)
    assert np.allclose(stats.gamma, 0.5)


@pytest.mark.parametrize("case,kw", [
    ("sync", dict(D=1)), ("t", dict(Omega=0.1)), ("f", dict(Omega=0.0)), ("f", dict(D=2, Omega=1.0)),
])
def test_params_case_constraints(case, kw):
    with pytest.raises(ValueError):
        SystemParams(case, 10, 4, 8, **kw)


def test_params_signal_length():
    assert SystemParams("t", 10, 4, 8, D=3).L_i == 11
    assert SystemParams("tf", 10, 4, 8, D=3, Omega=1.0, Q=8).L_i == 11
    assert SystemParams("f", 10, 4, 8, Omega=1.0, Q=8).L_i == 8


def test_scenario_sync_has_no_offsets(rng):
    params = SystemParams("sync", 50, 4, 8, active_prob=0.3)
    stats = ChannelStatistics.uniform(gen_los(rng, 4, 50))
    sc = gen_scenario(rng, params, stats)
    assert not sc.t_true.any() and not sc.omega_true.any()


def test_scenario_all_active(rng):
    params = SystemParams("tf", 30, 4, 8, D=3, Omega=0.5, Q=8, active_prob=1.0)
    stats = ChannelStatistics.uniform(gen_los(rng, 4, 30))
    sc = gen_scenario(rng, params, stats)
    assert sc.a_true.all()
    assert sc.t_true.min() >= 0 and sc.t_true.max() <= 3
    assert np.all(np.abs(sc.omega_true) <= 0.5)


def test_scenario_activity_rate():
    rng = np.random.default_rng(9)
    p, N = 0.08, 10_000
    params = SystemParams("sync", N, 1, 2, active_prob=p)
    stats = ChannelStatistics.uniform(np.ones((1, N)))
    rate = gen_scenario(rng, params, stats).a_true.mean()
    assert abs(rate - p) < 3 * math.sqrt(p * (1 - p) / N)


def test_tau_values():
    assert np.allclose(tau(0.0, 5), 1.0)
    assert np.allclose(tau(math.pi, 4), [1, -1, 1, -1], atol=1e-15)


@given(st.floats(-10, 10), st.integers(1, 40))
def test_tau_periodic(omega, n):
    assert np.allclose(tau(omega + 2 * math.pi, n), tau(omega, n), atol=1e-12)


def test_equivalent_pilot_examples(rng):
    p = crandn(rng, 4)
    v = equivalent_pilot("t", p, 0, D=2)
    assert np.array_equal(v, np.r_[p, 0, 0])
    assert np.array_equal(equivalent_pilot("f", p, 0, 0.0), p)
    assert equivalent_pilot("sync", p).tolist() == p.tolist()
    v = equivalent_pilot("tf", np.array([1, 1j]), t=1, omega=math.pi, D=1)
    assert np.allclose(v, [0, -1, 1j], atol=1e-15)
    with pytest.raises(ValueError):
        equivalent_pilot("t", p, 3, D=2)


@given(st.floats(-7, 7), st.integers(0, 2 ** 31 - 1))
def test_cfo_pilot_periodic_and_energy(omega, seed):
    p = crandn(np.random.default_rng(seed), 9)
    a = equivalent_pilot("f", p, 0, omega)
    assert np.allclose(equivalent_pilot("f", p, 0, omega + 2 * math.pi), a, atol=1e-12)
    assert abs(np.linalg.norm(a) - np.linalg.norm(p)) < 1e-12


def test_pilot_matrix_matches_columns(rng):
    P = crandn(rng, 5, 7)
    t = rng.integers(0, 3, 7)
    w = rng.uniform(-1, 1, 7)
    M = pilot_matrix("tf", P, t, w, 2)
    for n in range(7):
        assert np.allclose(M[:, n], equivalent_pilot("tf", P[:, n], t[n], w[n], 2))


@pytest.mark.parametrize("case,D,Omega,Q,card", [
    ("t", 4, 0.0, 1, 5),
    ("f", 0, math.pi, 128, 128),
    ("f", 0, math.pi / 2, 16, 9),
    ("tf", 2, math.pi / 2, 16, 27),
    ("sync", 0, 0.0, 1, 1),
])
def test_offset_grid_cardinality(case, D, Omega, Q, card):
    g = offset_grid(case, D, Omega, Q)
    assert g.cardinality == card == grid_cardinality(case, D, Omega, Q)


@given(st.integers(1, 64), st.floats(0.01, math.pi))
def test_grid_matches_range_enumeration(Q, Omega):
    g = offset_grid("f", 0, Omega, Q)
    w = 2 * math.pi * np.arange(Q) / Q
    inside = (w <= Omega + 1e-9) | (w >= 2 * math.pi - Omega - 1e-9)
    assert sorted(g.cfo_indices) == np.flatnonzero(inside).tolist()
    assert g.cardinality == grid_cardinality("f", 0, Omega, Q)


def test_grid_ordering():
    g = offset_grid("tf", 2, math.pi / 2, 8)
    c = g.candidates
    assert c[:, 0].tolist() == sorted(c[:, 0].tolist())
    assert g.index_of(1, 7) == 1 * len(g.cfo_indices) + g.cfo_indices.index(7)
    assert c[0].tolist() == [0, 0]


def test_wrap_and_nearest():
    assert np.allclose(wrap_cfo([-0.1, 0.2]), [2 * math.pi - 0.1, 0.2])
    assert nearest_cfo_index(-2 * math.pi / 16, 16) == 15
    assert nearest_cfo_index(math.pi - 1e-9, 16) == 8


def _instance(rng, case, **kw):
    params = SystemParams(case, 12, 5, 6, noise_var=0.3, active_prob=0.5, **kw)
    P = gen_pilots(rng, 6, 12)
    stats = ChannelStatistics(rng.uniform(0.5, 2, 12), rng.uniform(0, 3, 12), gen_los(rng, 5, 12))
    return params, P, stats, gen_scenario(rng, params, stats)


@pytest.mark.parametrize("case,kw", [("sync", {}), ("t", dict(D=2)), ("f", dict(Omega=1.0, Q=8)),
                                     ("tf", dict(D=2, Omega=1.0, Q=8))])
def test_received_compact_equals_sum(rng, case, kw):
    params, P, stats, sc = _instance(rng, case, **kw)
    Y = synthesize_received(params, P, stats, sc).Y
    h = small_scale_fading(stats, sc.Htilde)
    Ysum = sc.Z.copy()
    for n in range(params.N):
        p = equivalent_pilot(case, P[:, n], int(sc.t_true[n]), float(sc.omega_true[n]), params.D)
        Ysum = Ysum + sc.a_true[n] * math.sqrt(stats.g[n]) * np.outer(p, h[:, n])
    assert np.linalg.norm(Y - Ysum) <= 1e-10 * np.linalg.norm(Ysum)


def test_received_inactive_is_noise(rng):
    params, P, stats, sc = _instance(rng, "t", D=2)
    sc.a_true[:] = 0
    assert np.array_equal(synthesize_received(params, P, stats, sc).Y, sc.Z)


def test_received_los_limit(rng):
    params, P, stats, sc = _instance(rng, "sync")
    stats = ChannelStatistics(stats.g, np.full(12, 1e12), stats.Hbar)
    sc.a_true[:] = 0
    sc.a_true[3] = 1
    sc.Z[:] = 0
    Y = synthesize_received(params, P, stats, sc).Y
    ref = math.sqrt(stats.g[3]) * np.outer(P[:, 3], stats.Hbar[:, 3])
    assert np.linalg.norm(Y - ref) <= 1e-5 * np.linalg.norm(ref)


def test_received_dimension_check(rng):
    params, P, stats, sc = _instance(rng, "sync")
    with pytest.raises(ValueError):
        synthesize_received(params, P[:, :5], stats, sc)


def test_case_parse():
    assert CaseId.parse("(t,f)") is CaseId.TF
    with pytest.raises(ValueError):
        CaseId.parse("x")
