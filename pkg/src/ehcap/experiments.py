"""Row and curve builders shared by the CLI, the report writer and the checks."""

from __future__ import annotations

from dataclasses import dataclass, field

from ehcap import closed_form as cf
from ehcap.hmm_rate import DEFAULT_N, DEFAULT_SEEDS, markov_rate, oiid_rate
from ehcap.leakage import leakage_ub, leakage_ub_ternary
from ehcap.rates import N_RANGE, extended_rate_best, modulo_rate_best, ternary_timing_rate

TABLE_COLUMNS = ["q", "C_UB_genie", "C_UB_leakage", "R_A_ext", "R_A_mod", "R_M2", "R_M1",
                 "R_OIID", "R_NIID", "C_ZS", "C_IS"]
SIM_COLUMNS = {"R_M2", "R_M1", "R_OIID"}

# solver tolerance reported next to deterministic columns
DET_TOL = {"C_UB_genie": 1e-9, "C_UB_leakage": 1e-9, "R_A_ext": 1e-5, "R_A_mod": 1e-12,
           "R_NIID": 1e-9, "C_ZS": 1e-9, "C_IS": 0.0}


@dataclass
class Cell:
    value: float
    stderr: float = 0.0
    tol: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class SimConfig:
    n: int = DEFAULT_N
    seeds: int = DEFAULT_SEEDS
    search_n: int = 400_000
    enabled: bool = True


def table_row(q: float, sim: SimConfig | None = None, n_range=N_RANGE) -> dict:
    """One reference-table row for the binary channel, plus NIID and the storage extremes."""
    sim = sim or SimConfig()
    row = {"q": Cell(q)}
    row["C_UB_genie"] = Cell(cf.genie_ub_binary(q).rate, tol=DET_TOL["C_UB_genie"])
    leak = leakage_ub(q)
    row["C_UB_leakage"] = Cell(leak.rate, tol=DET_TOL["C_UB_leakage"],
                               extra={"kkt_residual": leak.kkt_residual})
    ext = extended_rate_best(q, n_range)
    row["R_A_ext"] = Cell(ext.rate, tol=DET_TOL["R_A_ext"], extra={"N": ext.N})
    mod = modulo_rate_best(q, n_range)
    row["R_A_mod"] = Cell(mod.rate, tol=DET_TOL["R_A_mod"], extra={"N": mod.N})
    if sim.enabled:
        seeds = range(sim.seeds)
        m2 = markov_rate(q, "binary", 2, n=sim.n, seeds=seeds, search_n=sim.search_n)
        m1 = markov_rate(q, "binary", 1, n=sim.n, seeds=seeds, search_n=sim.search_n)
        oi = oiid_rate(q, "binary", n=sim.n, seeds=seeds, search_n=sim.search_n)
        for key, r in (("R_M2", m2), ("R_M1", m1), ("R_OIID", oi)):
            row[key] = Cell(r.rate, stderr=r.stderr, extra=_plain(r.diagnostics))
    else:
        for key in SIM_COLUMNS:
            row[key] = Cell(float("nan"))
    row["R_NIID"] = Cell(cf.niid_binary(q).rate, tol=DET_TOL["R_NIID"])
    row["C_ZS"] = Cell(cf.zero_storage_binary(q), tol=DET_TOL["C_ZS"])
    row["C_IS"] = Cell(cf.infinite_storage_binary(q), tol=DET_TOL["C_IS"])
    return row


def _plain(d):
    return {k: v for k, v in d.items() if isinstance(v, (int, float, str, bool, list))}


QUANTITIES = {
    "binary": {
        "bounds": ["C_UB_genie", "C_UB_leakage", "R_A_ext", "R_A_mod", "C_ZS", "C_IS"],
        "achievable": ["R_A_ext", "R_A_mod", "R_M2", "R_M1", "R_OIID", "R_NIID"],
    },
    "ternary": {
        "bounds": ["C_UB_genie", "C_UB_leakage", "R_A_ext", "R_A_mod", "C_ZS", "C_IS"],
        "achievable": ["R_A_ext", "R_A_mod", "R_M1", "R_OIID", "R_NIID"],
    },
}


def sweep_row(q: float, arity: str, quantity_set: str, sim: SimConfig | None = None,
              n_range=N_RANGE) -> dict:
    """Curve data for one q: bounds/achievable rates, or the best modulo frame length."""
    sim = sim or SimConfig()
    if quantity_set == "nopt":
        r = modulo_rate_best(q, n_range, sign_bit=arity == "ternary") if 0 < q < 1 else None
        return {"q": Cell(q), "N_opt": Cell(r.N if r and r.N else float("nan")),
                "R_A_mod": Cell(r.rate if r else float(q))}
    names = QUANTITIES[arity][quantity_set]
    row = {"q": Cell(q)}
    for name in names:
        row[name] = _quantity(name, q, arity, sim, n_range)
    return row


def _quantity(name, q, arity, sim, n_range=N_RANGE):
    tern = arity == "ternary"
    seeds = range(sim.seeds)
    if name == "C_UB_genie":
        return Cell((cf.genie_ub_ternary if tern else cf.genie_ub_binary)(q).rate, tol=1e-9)
    if name == "C_UB_leakage":
        return Cell((leakage_ub_ternary if tern else leakage_ub)(q).rate, tol=1e-9)
    if name == "R_A_ext":
        r = ternary_timing_rate(q, "extended", n_range) if tern else extended_rate_best(q, n_range)
        return Cell(r.rate, tol=1e-5, extra={"N": r.N})
    if name == "R_A_mod":
        r = ternary_timing_rate(q, "modulo", n_range) if tern else modulo_rate_best(q, n_range)
        return Cell(r.rate, tol=1e-12, extra={"N": r.N})
    if name == "C_ZS":
        return Cell((cf.zero_storage_ternary if tern else cf.zero_storage_binary)(q), tol=1e-9)
    if name == "C_IS":
        return Cell((cf.infinite_storage_ternary if tern else cf.infinite_storage_binary)(q))
    if name == "R_NIID":
        return Cell((cf.niid_ternary if tern else cf.niid_binary)(q).rate, tol=1e-9)
    if not sim.enabled:
        return Cell(float("nan"))
    if name == "R_OIID":
        r = oiid_rate(q, arity, n=sim.n, seeds=seeds, search_n=sim.search_n)
    elif name == "R_M1":
        r = markov_rate(q, arity, 1, n=sim.n, seeds=seeds, search_n=sim.search_n)
    elif name == "R_M2":
        r = markov_rate(q, arity, 2, n=sim.n, seeds=seeds, search_n=sim.search_n)
    else:
        raise KeyError(name)
    return Cell(r.rate, stderr=r.stderr, extra=_plain(r.diagnostics))


def optimal_n_curve(qs) -> list[tuple[float, int]]:
    """(q, N*) pairs for the modulo code, q strictly inside (0, 1)."""
    return [(q, modulo_rate_best(q).N) for q in qs if 0 < q < 1]


def argmin_plateau_centre(curve) -> float:
    """Midpoint of the q-range where N* attains its minimum."""
    n_min = min(n for _, n in curve)
    qs = [q for q, n in curve if n == n_min]
    return (min(qs) + max(qs)) / 2
