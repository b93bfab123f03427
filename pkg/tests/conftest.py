"""Session-wide caches for the slower solvers, shared by unit and acceptance tests."""

from functools import lru_cache

from ehcap.leakage import leakage_ub, leakage_ub_ternary
from ehcap.rates import extended_rate_best, modulo_rate_best, ternary_timing_rate

QS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@lru_cache(maxsize=None)
def ext_best(q):
    return extended_rate_best(q)


@lru_cache(maxsize=None)
def mod_best(q):
    return modulo_rate_best(q)


@lru_cache(maxsize=None)
def leak(q):
    return leakage_ub(q)


@lru_cache(maxsize=None)
def leak_ternary(q):
    return leakage_ub_ternary(q)


@lru_cache(maxsize=None)
def ternary_ext(q):
    return ternary_timing_rate(q, "extended")


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
