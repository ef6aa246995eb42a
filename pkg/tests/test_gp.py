import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddace.demo import NodeDescriptor, extract_segments
from ddace.errors import AdaptationError, CanonicalizationError, GPFitError, ResampleError
from ddace.gp import (adapt, canonical_mean, canonicalize, chord_frame, fit_gp, fit_gp_1d,
                      fit_trajectory_model, gp_predict, load_trajectory_model,
                      log_marginal_likelihood, resample, resample_arclength, save_trajectory_model,
                      to_canonical, write_trajectory_csv, _build, _collapse)
from ddace.taskgen import catalog, gen_task


def line_pair(n=3, M=100):
    t = np.linspace(0, 1, M)
    return fit_gp([np.column_stack([t, np.zeros(M)])] * n)


def arc(n=201):
    s = np.linspace(0, math.pi, n)
    return np.column_stack([1 - np.cos(s), np.sin(s)])


def test_canonical_examples():
    assert np.allclose(to_canonical([(2, 3), (2, 4), (2, 5)]), [(0, 0), (0.5, 0), (1, 0)], atol=1e-15)
    C = to_canonical(arc())
    j = len(C) // 2
    assert np.allclose(C[j], (0.5, 0.5), atol=1e-12)
    with pytest.raises(CanonicalizationError):
        to_canonical([(1, 1), (2, 2), (1, 1)])


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 20), st.floats(-math.pi, math.pi),
       st.lists(st.floats(0.05, 0.95), min_size=1, max_size=8, unique=True))
def test_straight_lines_stay_on_axis(x, y, L, th, fr):
    d = np.array([math.cos(th), math.sin(th)])
    pts = np.array([(x, y)] + [(x, y) + L * f * d for f in sorted(fr)] + [(x, y) + L * d])
    C = to_canonical(pts)
    assert np.allclose(C[:, 1], 0, atol=1e-9)
    assert tuple(C[0]) == (0, 0) and tuple(C[-1]) == (1, 0)


def test_resample_examples():
    assert np.allclose(resample([(0, 0), (2, 0)], 5), [(0, 0), (0.5, 0), (1, 0), (1.5, 0), (2, 0)])
    P = np.random.default_rng(0).normal(size=(7, 2))
    assert np.array_equal(resample(P, 2), P[[0, -1]])
    assert np.max(np.abs(resample(P, 7) - P)) < 1e-12
    Q = resample_arclength([(0, 0), (1, 0), (1, 3)], 5)
    assert np.allclose(Q, [(0, 0), (1, 0), (1, 1), (1, 2), (1, 3)])
    with pytest.raises(ResampleError):
        resample([(0, 0)], 5)
    with pytest.raises(ResampleError):
        resample(P, 1)


def test_single_point_closed_form():
    y0, sf2, sn2 = 0.7, 1.3, 0.2
    lml = log_marginal_likelihood(np.array([0.0]), np.array([y0]), np.array([1]), 0.0, sf2, 0.4, sn2)
    want = -0.5 * y0 ** 2 / (sf2 + sn2) - 0.5 * math.log(2 * math.pi * (sf2 + sn2))
    assert lml == pytest.approx(want, abs=1e-12)


def dense_lml(T, Y, sf2, ell, sn2):
    C = sf2 * np.exp(-0.5 * np.subtract.outer(T, T) ** 2 / ell ** 2) + sn2 * np.eye(len(T))
    sign, logdet = np.linalg.slogdet(C)
    return -0.5 * Y @ np.linalg.solve(C, Y) - 0.5 * logdet - 0.5 * len(T) * math.log(2 * math.pi)


def noisy_lines(n=3, M=40, seed=0):
    rng = np.random.default_rng(seed)
    T = np.tile(np.linspace(0, 1, M), n)
    return T, 0.3 * T + rng.normal(0, 0.01, T.size)


def test_collapsed_likelihood_equals_pooled():
    T, Y = noisy_lines()
    u, yb, k, ss = _collapse(T, Y)
    for h in [(1.0, 0.3, 1e-3), (0.2, 0.05, 1e-2), (3.0, 0.9, 1e-4)]:
        assert log_marginal_likelihood(u, yb, k, ss, *h) == pytest.approx(dense_lml(T, Y, *h), rel=1e-10)


def test_likelihood_gradient_matches_differences():
    u, yb, k, ss = _collapse(*noisy_lines(seed=3))
    z = np.log([0.5, 0.2, 1e-3])
    _, g = log_marginal_likelihood(u, yb, k, ss, *np.exp(z), grad=True)
    for i in range(3):
        dz = np.zeros(3)
        dz[i] = 1e-6
        fd = (log_marginal_likelihood(u, yb, k, ss, *np.exp(z + dz))
              - log_marginal_likelihood(u, yb, k, ss, *np.exp(z - dz))) / 2e-6
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-4)


def test_zero_outputs_give_zero_mean():
    gp = fit_gp_1d(np.linspace(0, 1, 20), np.zeros(20))
    assert np.all(gp.predict(np.linspace(0, 1, 33))[0] == 0)


def test_identical_lines_fit_the_axis():
    gp = line_pair()
    t = np.linspace(0, 1, 57)
    mx, my, _, _ = gp_predict(gp, t)
    assert np.max(np.abs(mx - t)) < 1e-3 and np.max(np.abs(my)) < 2e-2


def test_posterior_mean_matches_dense_solve():
    T, Y = noisy_lines(seed=5)
    g = fit_gp_1d(T, Y)
    t = np.linspace(-0.1, 1.1, 31)
    C = g.sf2 * np.exp(-0.5 * np.subtract.outer(T, T) ** 2 / g.ell ** 2) + g.sn2 * np.eye(T.size)
    Ks = g.sf2 * np.exp(-0.5 * np.subtract.outer(t, T) ** 2 / g.ell ** 2)
    assert np.max(np.abs(g.predict(t)[0] - Ks @ np.linalg.solve(C, Y))) < 1e-9


def test_near_interpolation():
    T = np.linspace(0, 1, 9)
    Y = np.sin(3 * T)
    u, yb, k, ss = _collapse(T, Y)
    g = _build(u, yb, k, ss, 1.0, 0.3, 1e-8)
    assert np.max(np.abs(g.predict(T)[0] - Y)) < 1e-3


def test_variance_grows_away_from_data():
    T = np.concatenate([np.linspace(0, 0.3, 10), np.linspace(0.7, 1.0, 10)])
    g = fit_gp_1d(T, np.sin(4 * T))
    _, v = g.predict([0.5, 0.0, 0.3, 0.7])
    assert np.all(v[0] >= v[1:])


def test_restarts_never_lose_to_a_single_start():
    T, Y = noisy_lines(seed=11)
    u, yb, k, ss = _collapse(T, Y)

    def lml(g):
        return log_marginal_likelihood(u, yb, k, ss, g.sf2, g.ell, g.sn2)

    best = lml(fit_gp_1d(T, Y))
    for s in [(0.1, 0.05, 1e-4), (1.0, 0.5, 1e-2)]:
        assert best >= lml(fit_gp_1d(T, Y, [s])) - 1e-6


def test_fit_errors():
    with pytest.raises(GPFitError):
        fit_gp([])
    with pytest.raises(GPFitError):
        fit_gp_1d([], [])


def test_adapt_examples():
    gp = line_pair()
    P = adapt(gp, (2, 3), (2, 5), 101)
    assert chord_frame((2, 3), (2, 5))[1] == pytest.approx(math.pi / 2)
    assert tuple(P[0]) == (2, 3) and tuple(P[-1]) == (2, 5)
    assert np.allclose(P[50], (2, 4), atol=1e-3)
    assert chord_frame((0, 0), (1, 1))[1] == pytest.approx(math.pi / 4)
    with pytest.raises(AdaptationError):
        adapt(gp, (1, 1), (1, 1))


def test_adapted_arc_peak():
    C = resample(to_canonical(arc()), 101)
    P = adapt(fit_gp([C] * 3), (0, 0), (4, 0), 101)
    assert np.allclose(P[50], (2, 2), atol=1e-3)


@pytest.fixture(scope="module")
def curves():
    demos, scenario, _ = gen_task(replace(catalog()["task4"], n_demos=6, seed=2))
    segs = [s for k, d in enumerate(demos) for s in extract_segments(d, None)]
    return demos, scenario, segs


def test_trajectory_model_round_trip(tmp_path, curves):
    _, scenario, segs = curves
    nodes = {n.id: n for n in scenario.nodes}
    tm = fit_trajectory_model(segs, nodes)
    assert sum(tm.counts.values()) == len(segs)
    save_trajectory_model(tm, tmp_path / "gp.json")
    back = load_trajectory_model(tmp_path / "gp.json")
    assert list(back.pairs) == list(tm.pairs)
    for key, p in tm.pairs.items():
        assert np.array_equal(canonical_mean(p), canonical_mean(back.pairs[key]))
    save_trajectory_model(back, tmp_path / "gp2.json")
    assert (tmp_path / "gp.json").read_bytes() == (tmp_path / "gp2.json").read_bytes()
    write_trajectory_csv(canonical_mean(next(iter(tm.pairs.values()))), tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "idx,t_prime,x,y"


def test_pairs_keyed_by_kind_or_id(curves):
    _, scenario, segs = curves
    nodes = {n.id: n for n in scenario.nodes}
    by_kind = fit_trajectory_model(segs, nodes, "kind")
    by_id = fit_trajectory_model(segs, nodes, "id")
    assert len(by_id.pairs) >= len(by_kind.pairs)
    r, g = NodeDescriptor(2, "robot"), NodeDescriptor(4, "goal")
    assert by_id.get(r, g) is not None and by_id.get(g, r) is None
    assert by_kind.get(NodeDescriptor(9, "robot"), g) is not None


def test_gp_prediction_clamps_query_times(caplog):
    gp = line_pair()
    mx, my, vx, vy = gp_predict(gp, np.array([-0.5, 1.5]))
    assert np.allclose(mx, [0, 1], atol=1e-3)
    assert "clamped" in caplog.text
