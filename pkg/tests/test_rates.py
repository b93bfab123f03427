import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import QS, ext_best, leak, mod_best
from ehcap import closed_form as cf
from ehcap.prob import entropy_of
from ehcap.rates import (asymptotic_ratio, extended_rate, gibbs, gibbs_value, modulo_rate,
                         modulo_rate_best, ternary_timing_rate, uniform_witness)
from ehcap.timing import modulo_costs
from oracles import gibbs_grid_max

LOG2_3 = math.log2(3)


def test_single_symbol_rate_is_zero():
    assert modulo_rate(0.4, 1).rate == 0.0


def test_uniform_rate_formula():
    # uniform U makes V uniform on {1..N}: E[T] = (N+1)/2 + E[Z]
    q, N = 0.5, 4
    c = modulo_costs(q, N)
    p = np.full(N, 0.25)
    assert p @ c == pytest.approx(2.5 + 1.0, abs=1e-12)
    assert entropy_of(p) / (p @ c) == pytest.approx(2 / 3.5, abs=1e-12)
    assert modulo_rate(q, N).rate >= 2 / 3.5


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_modulo_best_by_brute_force(q):
    # independent oracle: full scan of N with a fine grid over the Dinkelbach multiplier
    best = 0.0
    for N in range(1, 40):
        c = modulo_costs(q, N)
        lo, hi = 0.0, 1.0
        for _ in range(200):
            lam = (lo + hi) / 2
            w = np.exp2(-lam * c)
            val = np.log2(w.sum())  # max_p H(p) - lam p.c
            lo, hi = (lam, hi) if val > 0 else (lo, lam)
        best = max(best, lo)
    assert mod_best(q).rate == pytest.approx(best, abs=1e-9)


def test_modulo_best_reference_small_q():
    assert mod_best(0.1).rate == pytest.approx(0.2313, abs=1e-3)


def test_modulo_endpoints():
    assert modulo_rate_best(1.0).rate == 1.0
    assert modulo_rate_best(0.0).rate == 0.0
    assert ternary_timing_rate(1.0, "modulo").rate == LOG2_3


@pytest.mark.parametrize("q,N", [(0.2, 3), (0.5, 4), (0.8, 6), (0.5, 12)])
def test_dinkelbach_certificate(q, N):
    r = modulo_rate(q, N)
    assert abs(r.diagnostics["certificate"]) < 1e-8
    assert r.converged
    assert r.rate == pytest.approx(entropy_of(r.p_u.mass) / (r.p_u.mass @ modulo_costs(q, N)),
                                   abs=1e-12)


@given(st.floats(0.05, 0.95), st.integers(2, 4), st.floats(0.0, 2.0))
@settings(max_examples=25, deadline=None)
def test_gibbs_matches_simplex_grid(q, N, lam):
    c = modulo_costs(q, N)
    best = gibbs_grid_max(c, lam)
    p = gibbs(c, lam)
    closed = entropy_of(p) - lam * (p @ c)
    assert closed == pytest.approx(gibbs_value(c, lam), abs=1e-12)
    assert closed >= best - 1e-12
    assert closed - best < 1e-3


@pytest.mark.parametrize("q,ref", [(0.2, 0.3546), (0.5, 0.6033), (0.7, 0.7403), (0.9, 0.8845)])
def test_extended_reference(q, ref):
    assert ext_best(q).rate == pytest.approx(ref, abs=1.5e-3)


@pytest.mark.parametrize("q,N", [(0.3, 3), (0.5, 5), (0.8, 4)])
def test_extended_restriction_is_modulo(q, N):
    a = extended_rate(q, N, u_max=N - 1, grow=False).rate
    assert a == pytest.approx(modulo_rate(q, N).rate, abs=1e-6)


def test_extended_certificate():
    r = extended_rate(0.5, 4)
    assert abs(r.diagnostics["certificate"]) < 1e-7
    assert r.diagnostics["tail"] < 1e-9


@pytest.mark.parametrize("q", QS)
def test_sandwich(q):
    mod, ext, lk = mod_best(q).rate, ext_best(q).rate, leak(q).rate
    g = cf.genie_ub_binary(q).rate
    assert mod <= ext + 1e-6
    assert ext <= lk + 1e-6
    assert ext <= g + 1e-6


def test_ternary_timing():
    assert ternary_timing_rate(0.0, "extended").rate == 0.0
    assert ternary_timing_rate(1.0, "extended").rate == LOG2_3
    ext = ternary_timing_rate(0.5, "extended").rate
    mod = ternary_timing_rate(0.5, "modulo").rate
    assert ext >= mod - 1e-9
    assert mod > mod_best(0.5).rate
    with pytest.raises(ValueError):
        ternary_timing_rate(0.5, "other")


def test_ternary_frame_differs_from_binary():
    # a send is worth an extra bit, so shorter frames (more sends) pay off
    assert ternary_timing_rate(0.5, "modulo").N < mod_best(0.5).N


def test_asymptotic_ratio_small_q():
    d = asymptotic_ratio(0.1)
    assert d["ratio"] == pytest.approx(0.2600 / 0.2313, abs=5e-3)
    prev = math.inf
    for q in (0.1, 0.03, 0.01):
        r = asymptotic_ratio(q)["ratio"]
        assert 1.0 <= r < prev
        prev = r


@pytest.mark.parametrize("q", [0.01, 0.005, 0.001])
def test_uniform_witness(q):
    N, rate, bound = uniform_witness(q)
    assert rate >= bound
    assert mod_best(q).rate >= rate if q > 0.005 else True


def test_modulo_ties_prefer_small_frames():
    r = modulo_rate_best(0.5, range(1, 40))
    r2 = modulo_rate_best(0.5, range(r.N, 60))
    assert r2.N == r.N


@pytest.mark.parametrize("get", [mod_best, ext_best, leak])
def test_monotone_in_q(get):
    vals = [get(q).rate for q in QS]
    assert vals == sorted(vals)
