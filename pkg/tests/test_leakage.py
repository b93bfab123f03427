import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import QS, ext_best, leak, leak_ternary, ternary_ext
from ehcap import closed_form as cf
from ehcap.leakage import (LeakageSolution, capped_gibbs, column_entropies, inner_value,
                           leakage_ub, leakage_ub_ternary, entropy_map_spot_check, perturbed,
                           prefix_caps, verify_kkt)
from ehcap.prob import Pmf, truncated_geom_gaps
from oracles import capped_full_grid_max, capped_grid_max

LOG2_3 = math.log2(3)


def test_full_grid_small_support():
    q, lam = 0.4, 0.5
    w = truncated_geom_gaps(q, 3) + lam * np.arange(1, 4)
    caps = prefix_caps(q, 3)
    p, _ = capped_gibbs(w, caps)
    grid = capped_full_grid_max(w, caps)
    assert inner_value(p, w) >= grid - 1e-12
    assert inner_value(p, w) - grid < 2e-3


@pytest.mark.parametrize("q,lam,n", [(0.1, 0.25, 6), (0.3, 0.45, 6), (0.5, 0.6, 5),
                                     (0.05, 0.2, 6)])
def test_inner_solver_matches_zoom_grid(q, lam, n):
    t = np.arange(1, n + 1)
    w = truncated_geom_gaps(q, n) + lam * t
    caps = prefix_caps(q, n)
    p, gamma = capped_gibbs(w, caps)
    grid = capped_grid_max(w, caps)
    assert abs(inner_value(p, w) - grid) < 2e-3
    assert inner_value(p, w) >= grid - 1e-9


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12), st.data())
@settings(max_examples=60, deadline=None)
def test_capped_gibbs_kkt(w, data):
    w = np.array(w)
    n = w.size
    raw = np.sort(np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=n - 1,
                                              max_size=n - 1))))
    p, gamma = capped_gibbs(w, raw)
    P = np.cumsum(p)[:-1]
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(P <= raw + 1e-12)
    assert np.all(gamma >= -1e-12)
    assert np.all(np.abs(gamma * (raw - P)) < 1e-9)
    # stationarity: log2 p + w + multipliers of prefixes covering t is flat
    tail = np.concatenate([np.cumsum(gamma[::-1])[::-1], [0.0]])
    s = np.log2(p) + w + tail
    assert np.ptp(s) < 1e-8


@pytest.mark.parametrize("q,ref", [(0.3, 0.4740), (0.4, 0.5485), (0.5, 0.6164), (0.6, 0.6807),
                                   (0.7, 0.7442), (0.8, 0.8101), (0.9, 0.8846)])
def test_reference_values_without_active_caps(q, ref):
    assert leak(q).rate == pytest.approx(ref, abs=1e-3)


@pytest.mark.parametrize("q", [0.1, 0.2])
def test_low_q_against_convex_solver(q):
    cp = pytest.importorskip("cvxpy")
    sol = leak(q)
    T = math.ceil(math.log(1e-12) / math.log1p(-q))
    t = np.arange(1, T + 1)
    gaps = truncated_geom_gaps(q, T)
    caps = prefix_caps(q, T)

    def inner(lam):
        p = cp.Variable(T)
        obj = cp.Maximize(cp.sum(cp.entr(p)) / math.log(2) - (gaps + lam * t) @ p)
        prob = cp.Problem(obj, [cp.sum(p) == 1, cp.cumsum(p)[:-1] <= caps])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # solver accuracy notes
            prob.solve(solver="CLARABEL")
        return prob.value

    # the Dinkelbach fixed point: inner optimum vanishes at the returned rate
    assert abs(inner(sol.rate)) < 1e-4
    assert inner(sol.rate - 0.01) > 0
    assert inner(sol.rate + 0.01) < 0


@pytest.mark.parametrize("q", QS)
def test_solution_feasible_and_stationary(q):
    sol = leak(q)
    p = sol.p_t.mass
    s = np.arange(1, p.size)
    assert np.all(np.cumsum(p)[:-1] <= 1 - (1 - q) ** s + 1e-9)
    assert np.all(sol.gamma >= 0)
    assert sol.kkt_residual < 1e-6
    assert verify_kkt(sol, q) < 1e-6
    assert sol.converged


def test_verify_kkt_examples():
    sol = leak(0.5)
    assert verify_kkt(sol, 0.5) < 1e-6
    assert verify_kkt(perturbed(sol), 0.5) > 1e-4
    assert verify_kkt(perturbed(leak(0.1), 3, 7), 0.1) > 1e-4


def test_unconstrained_regime_is_gibbs():
    q = 0.5
    sol = leak(q)
    assert np.all(sol.gamma == 0)
    p = sol.p_t.mass
    t = np.arange(1, p.size + 1)
    w = np.exp2(-truncated_geom_gaps(q, p.size) - sol.lam * t)
    assert np.allclose(p, w / w.sum(), rtol=1e-12, atol=0)
    gibbs = LeakageSolution(Pmf(1, w / w.sum()), sol.rate, sol.lam, np.zeros(p.size - 1),
                            sol.lam, 0.0)
    assert verify_kkt(gibbs, q) < 1e-9


def test_endpoints():
    assert leakage_ub(0.0).rate == 0.0
    assert leakage_ub(1.0).rate == 1.0
    assert leakage_ub_ternary(0.0).rate == 0.0
    assert leakage_ub_ternary(1.0).rate >= LOG2_3


def test_ternary_dominates_extended():
    assert leak_ternary(0.5).rate >= ternary_ext(0.5).rate - 1e-6
    assert leak_ternary(0.5).rate > leak(0.5).rate


@pytest.mark.parametrize("q", QS)
def test_upper_bound_property(q):
    assert leak(q).rate >= ext_best(q).rate - 1e-6


def test_tighter_than_genie_for_large_q():
    for q in (0.3, 0.5, 0.7, 0.9):
        assert leak(q).rate < cf.genie_ub_binary(q).rate
    assert leak(0.3).rate == pytest.approx(0.4740, abs=1e-3)


def test_bad_support():
    with pytest.raises(ValueError):
        leakage_ub(0.1, t_max=10)
    with pytest.raises(ValueError):
        leakage_ub(1.5)


@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_truncated_geometric_entropy_bound(q):
    r = entropy_map_spot_check(q)
    assert r["maps"] == 8 * 7 * 6 * 5 * 4 * 3 * 2
    assert r["max_excess"] <= 1e-12
    assert r["equality_gap"] <= 1e-12


def test_column_entropy_full_map():
    # every state z < t lands on column t: the column law is the truncated geometric
    q, t = 0.3, 5
    targets = np.full((1, 5), t)
    h = column_entropies(q, targets)[0, t - 1]
    z = np.arange(t)
    w = q * (1 - q) ** z
    w /= w.sum()
    assert h == pytest.approx(-np.sum(w * np.log2(w)), abs=1e-14)
