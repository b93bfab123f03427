import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehcap.prob import Pmf, entropy_of
from ehcap.simulator import (drive, idle_times, plugin_mutual_information, run_extended,
                             run_modulo, run_ternary, write_trace)
from ehcap.timing import StrategyMap, build_channel, modulo_costs, mutual_information


def check_dynamics(tr):
    e, s, x, y = tr.arrivals, tr.battery, tr.inputs, tr.outputs
    assert np.all(s[x != 0] == 1)
    assert np.array_equal(x, y)
    nxt = np.minimum(s[:-1] - np.abs(x[:-1]) + e[:-1], 1)
    assert np.array_equal(s[1:], nxt)
    sends = np.cumsum(np.abs(x))
    assert np.all(sends <= np.cumsum(e) + s[0])


def test_hand_trace_back_to_back_arrival():
    # use 1 sends and harvests at once, so the next symbol waits zero uses
    arrivals = [0, 1, 0, 0, 1, 0, 0]
    tr = drive(arrivals, [1, 0, 2], N=4, initial_battery=1)
    assert list(tr.inputs) == [0, 1, 1, 0, 0, 1]
    assert list(tr.symbol_times) == [2, 1, 3]
    z = idle_times(tr)
    assert list(z) == [0, 0, 2]
    # T = V + Z with V = ((u - z) mod N) + 1
    assert all(t == (u - zz) % 4 + 1 + zz for t, u, zz in zip(tr.symbol_times, [1, 0, 2], z))
    assert tr.stats["energy_violations"] == 0
    check_dynamics(tr)


def test_hand_trace_waiting_for_energy():
    # battery empty after the first send; energy arrives in use 3 of the new symbol
    arrivals = [0, 0, 0, 1, 0, 0, 0, 0]
    tr = drive(arrivals, [0, 1], N=3, initial_battery=1)
    assert list(tr.symbol_times) == [1, 5]
    assert list(idle_times(tr)) == [0, 3]
    # T = V + Z with V = ((u - z) mod N) + 1
    assert 5 - 3 == (1 - 3) % 3 + 1


def test_wasted_arrivals_only_when_full():
    tr = drive([1, 1, 1, 0], [3], N=4, initial_battery=1)
    assert tr.stats["wasted_arrivals"] == 3
    check_dynamics(tr)


def test_certain_harvest():
    p = Pmf.uniform(0, 5)
    tr = run_modulo(1.0, 6, p, 2000, seed=3)
    assert np.array_equal(tr.symbol_times, tr.symbols + 1)
    te = run_extended(1.0, 3, Pmf.uniform(0, 9), 2000, seed=3)
    assert np.array_equal(te.symbol_times, te.symbols + 1)
    assert te.stats["decode_errors"] == 0
    assert te.stats["w2_errors"] == 0


def test_modulo_reference_run():
    tr = run_modulo(0.5, 4, Pmf.uniform(0, 3), 100_000, seed=0)
    assert tr.stats["decode_errors"] == 0
    assert tr.stats["energy_violations"] == 0
    assert tr.stats["analytic_mean_T"] == pytest.approx(3.5, abs=1e-12)
    assert abs(tr.mean_time - 3.5) <= 3 * tr.mean_time_stderr
    check_dynamics(tr)


@given(st.floats(0.05, 0.95), st.integers(1, 9), st.integers(0, 2 ** 31))
@settings(max_examples=25, deadline=None)
def test_modulo_never_errs(q, N, seed):
    tr = run_modulo(q, N, Pmf.uniform(0, N - 1), 2000, seed=seed)
    assert tr.stats["decode_errors"] == 0
    assert tr.stats["energy_violations"] == 0
    check_dynamics(tr)


def test_extended_restricted_matches_modulo():
    p = Pmf(0, [0.4, 0.3, 0.2, 0.1])
    a = run_modulo(0.5, 4, p, 50_000, seed=11)
    b = run_extended(0.5, 4, p, 50_000, seed=11)
    assert np.array_equal(a.symbol_times, b.symbol_times)
    assert b.stats["decode_errors"] == 0
    assert a.stats["analytic_mean_T"] == pytest.approx(b.stats["analytic_mean_T"], abs=1e-12)


def test_extended_information():
    q, N = 0.5, 4
    w = 0.8 ** np.arange(16)
    p = Pmf(0, w / w.sum())
    tr = run_extended(q, N, p, 100_000, seed=5)
    ch = build_channel(StrategyMap.extended(N), q, 15)
    exact = mutual_information(p, ch)
    est = plugin_mutual_information(tr.symbols, tr.symbol_times)
    assert abs(est - exact) < 0.01
    assert abs(tr.mean_time - tr.stats["analytic_mean_T"]) <= 3 * tr.mean_time_stderr


def test_empirical_rate_converges():
    q, N = 0.3, 5
    p = Pmf.uniform(0, N - 1)
    tr = run_modulo(q, N, p, 200_000, seed=2)
    h = entropy_of(p.mass)
    et = tr.stats["analytic_mean_T"]
    sigma = h * tr.mean_time_stderr / et ** 2
    assert abs(tr.stats["empirical_rate"] - h / et) <= 3 * sigma


def test_reproducible():
    p = Pmf.uniform(0, 3)
    a = run_modulo(0.4, 4, p, 10_000, seed=42)
    b = run_modulo(0.4, 4, p, 10_000, seed=42)
    c = run_modulo(0.4, 4, p, 10_000, seed=43)
    assert np.array_equal(a.arrivals, b.arrivals) and np.array_equal(a.symbols, b.symbols)
    assert not np.array_equal(a.symbol_times, c.symbol_times)


def test_ternary_plus_signs_match_binary():
    p = Pmf.uniform(0, 3)
    a = run_modulo(0.5, 4, p, 20_000, seed=9)
    b = run_ternary(0.5, 4, p, 20_000, seed=9, sign_bits=[1])
    assert np.array_equal(a.symbol_times, b.symbol_times)
    assert np.array_equal(a.inputs, b.inputs)


def test_ternary_alternating_signs_at_certain_harvest():
    tr = run_ternary(1.0, 3, Pmf.uniform(0, 2), 1000, seed=1, sign_bits=[1, -1])
    assert tr.stats["sign_errors"] == 0
    assert np.array_equal(tr.decoded_signs, np.resize([1, -1], 1000))


def test_ternary_rate():
    q, N = 0.5, 4
    p = Pmf.uniform(0, N - 1)
    tr = run_ternary(q, N, p, 100_000, seed=4)
    assert tr.stats["sign_errors"] == 0
    assert tr.stats["decode_errors"] == 0
    exact = (entropy_of(p.mass) + 1) / float(p.mass @ modulo_costs(q, N))
    assert abs(tr.stats["empirical_rate"] - exact) < 0.01


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_modulo(0.5, 3, Pmf.uniform(0, 3), 10)
    with pytest.raises(ValueError):
        run_ternary(0.5, 3, Pmf.uniform(0, 2), 10, sign_bits=[2])


def test_write_trace(tmp_path):
    tr = run_modulo(0.5, 2, Pmf.uniform(0, 1), 50, seed=0)
    path = tmp_path / "trace.txt"
    write_trace(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index E S X Y"
    assert len(lines) == tr.arrivals.size + 1
    data = np.loadtxt(path, skiprows=1, dtype=int)
    assert np.array_equal(data[:, 3], tr.inputs)
