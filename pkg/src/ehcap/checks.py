"""Cross-module consistency checks run by ``ehcap verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ehcap import closed_form as cf
from ehcap.hmm_rate import build_kernel, iid_codebook, info_rate
from ehcap.leakage import leakage_ub, entropy_map_spot_check, perturbed, verify_kkt
from ehcap.prob import Pmf
from ehcap.rates import extended_rate_best, modulo_rate, modulo_rate_best
from ehcap.simulator import run_extended, run_modulo
from ehcap.timing import StrategyMap, apply_map, decode_modulo

SLACK = 1e-6


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _bounds(qs, with_ext):
    out = []
    for q in qs:
        g = cf.genie_ub_binary(q).rate
        lk = leakage_ub(q).rate
        mod = modulo_rate_best(q).rate
        niid = cf.niid_binary(q).rate
        ach = {"R_A_mod": mod, "R_NIID": niid}
        if with_ext:
            ext = extended_rate_best(q).rate
            ach["R_A_ext"] = ext
            if mod > ext + SLACK:
                out.append(Check(f"mod<=ext q={q}", False, f"{mod:.6f} > {ext:.6f}"))
        worst = max(v - min(g, lk) for v in ach.values())
        out.append(Check(f"achievable<=bounds q={q}", worst <= SLACK,
                         f"max excess {worst:.2e} (genie {g:.4f}, leakage {lk:.4f})"))
        zs, is_ = cf.zero_storage_binary(q), cf.infinite_storage_binary(q)
        out.append(Check(f"C_ZS<=C_IS q={q}", zs <= is_ + SLACK, f"{zs:.4f} <= {is_:.4f}"))
    return out


def run_checks(quick: bool = False, inject_fault: bool = False) -> list[Check]:
    checks: list[Check] = []
    qs = [0.2, 0.5, 0.8] if quick else [round(0.1 * i, 1) for i in range(1, 10)]

    checks += _bounds(qs, with_ext=not quick)

    for q in qs:
        sol = leakage_ub(q)
        if inject_fault:
            sol = perturbed(sol)
        res = verify_kkt(sol, q)
        checks.append(Check(f"leakage KKT q={q}", res < SLACK, f"residual {res:.2e}"))
        g = cf.genie_ub_binary(q)
        r = g.diagnostics["stationarity"]
        checks.append(Check(f"genie stationarity q={q}", r < SLACK, f"residual {r:.2e}"))
        m = modulo_rate(q, 4)
        cert = abs(m.diagnostics["certificate"])
        checks.append(Check(f"modulo Dinkelbach certificate q={q}", cert < 1e-8, f"{cert:.2e}"))

    ends = {
        "genie": (cf.genie_ub_binary(0).rate, cf.genie_ub_binary(1).rate),
        "leakage": (leakage_ub(0).rate, leakage_ub(1).rate),
        "modulo": (modulo_rate_best(0).rate, modulo_rate_best(1).rate),
        "extended": (extended_rate_best(0).rate, extended_rate_best(1).rate),
        "niid": (cf.niid_binary(0).rate, cf.niid_binary(1).rate),
    }
    bad = {k: v for k, v in ends.items() if v != (0.0, 1.0)}
    checks.append(Check("endpoints q=0 -> 0, q=1 -> 1", not bad, str(bad) if bad else "all exact"))

    ok = all(decode_modulo(apply_map(StrategyMap.modulo(N), u, z) + z, N) == u
             for N in range(1, 11) for u in range(N) for z in range(51))
    checks.append(Check("modulo decode round trip", ok, "N<=10, z<=50"))

    for q in ([0.5] if quick else [0.2, 0.5, 0.8]):
        spot = entropy_map_spot_check(q)
        checks.append(Check(f"truncated-geometric entropy bound q={q}",
                            spot["max_excess"] <= 1e-12 and spot["equality_gap"] <= 1e-12,
                            f"{spot['maps']} maps, excess {spot['max_excess']:.1e}, "
                            f"equality gap {spot['equality_gap']:.1e}"))

    m = 20_000 if quick else 100_000
    tr = run_modulo(0.5, 4, Pmf.uniform(0, 3), m, seed=1)
    z = abs(tr.mean_time - tr.stats["analytic_mean_T"]) / tr.mean_time_stderr
    checks.append(Check("simulator modulo decoding", tr.stats["decode_errors"] == 0,
                        f"{tr.stats['decode_errors']} errors in {m} symbols"))
    checks.append(Check("simulator mean duration", z <= 3.0, f"{z:.2f} sigma"))
    checks.append(Check("simulator energy feasibility", tr.stats["energy_violations"] == 0,
                        f"{tr.stats['energy_violations']} violations"))
    te = run_extended(0.5, 4, Pmf.uniform(0, 3), m, seed=1)
    same = np.array_equal(te.symbol_times, tr.symbol_times)
    checks.append(Check("extended code restricted to u<N equals modulo", same,
                        "identical symbol times" if same else "traces differ"))

    if not quick:
        for q in (0.2, 0.5, 0.8):
            for p in (0.2, 0.5, 0.8):
                est = info_rate(iid_codebook("binary", p), build_kernel(q), 400_000, seed=3)
                niid = cf.niid_binary_objective(p, q)
                checks.append(Check(f"NIID<=OIID estimate q={q} p={p}",
                                    niid <= est.rate + 2 * est.stderr,
                                    f"{niid:.4f} <= {est.rate:.4f} +/- {est.stderr:.4f}"))
    return checks


def report(checks: list[Check], elapsed: float) -> str:
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in checks]
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks)} checks, {n_fail} failed, {elapsed:.1f}s")
    return "\n".join(lines) + "\n"


def timed_checks(quick=False, inject_fault=False):
    t0 = time.perf_counter()
    checks = run_checks(quick, inject_fault)
    return checks, time.perf_counter() - t0
