"""ehcap: bounds, achievable rates and simulations for unit-battery harvesting channels.

Usage:
    ehcap table [--q 0.1,0.5] [--sim-n 2000000] [--seeds 8] [--out table.csv]
    ehcap sweep --arity ternary --set bounds --q-range 0.05:0.95:0.05 --out fig.csv
    ehcap verify [--quick]
    ehcap simulate --q 0.5 --sim-n 100000 --seeds 4 [--trace trace.txt]
    ehcap asymptotic [--q 0.1,0.01,0.001]

Every flag may also be set in a config file (``--config run.cfg``), one
``key = value`` per line or a JSON object; flags given on the command line win.
When --out names a file, table/sweep/asymptotic also write a PNG next to it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

from ehcap import report
from ehcap.checks import report as check_report
from ehcap.checks import timed_checks
from ehcap.experiments import (QUANTITIES, TABLE_COLUMNS, Cell, SimConfig, sweep_row,
                               table_row)
from ehcap.rates import N_RANGE, asymptotic_ratio, extended_rate, modulo_rate, modulo_rate_best
from ehcap.simulator import run_extended, run_modulo, run_ternary, write_trace

log = logging.getLogger("ehcap")

DEFAULT_QS = {
    "table": "0:1:0.1",
    "sweep": "0.05:0.95:0.05",
    "simulate": "0.5",
    "asymptotic": "0.1,0.03,0.01,0.003,0.001",
}

DEFAULTS = {
    "arity": "binary",
    "set": "bounds",
    "n_range": None,
    "sim_n": 2_000_000,
    "seeds": 8,
    "search_n": 400_000,
    "out": None,
    "format": "csv",
    "quick": False,
    "jobs": 1,
    "plot": True,
    "scheme": "modulo",
    "N": None,
    "trace": None,
    "inject_fault": False,
}

# --quick shrinks the Monte Carlo work so a whole subcommand fits in about a minute
QUICK_SIM = {"sim_n": 100_000, "seeds": 2, "search_n": 50_000}


@dataclass
class RunConfig:
    command: str
    qs: list[float]
    arity: str = "binary"
    quantity_set: str = "bounds"
    n_range: tuple[int, int] | None = None
    sim_n: int = 2_000_000
    seeds: int = 8
    search_n: int = 400_000
    out: str | None = None
    format: str = "csv"
    quick: bool = False
    jobs: int = 1
    plot: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.qs:
            raise ValueError("no q values")
        if any(not 0.0 <= q <= 1.0 for q in self.qs):
            raise ValueError("q values must lie in [0, 1]")
        if self.sim_n <= 0 or self.seeds <= 0 or self.search_n <= 0:
            raise ValueError("simulation sizes must be positive")
        if self.n_range is not None and not 1 <= self.n_range[0] <= self.n_range[1]:
            raise ValueError("N range must satisfy 1 <= lo <= hi")

    @property
    def frames(self) -> range:
        if self.n_range is None:
            return N_RANGE
        return range(self.n_range[0], self.n_range[1] + 1)

    @property
    def sim(self) -> SimConfig:
        return SimConfig(n=self.sim_n, seeds=self.seeds, search_n=self.search_n)


def parse_qs(text: str) -> list[float]:
    """'0.1,0.5' or 'start:stop:step' (stop inclusive)."""
    text = str(text).strip()
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(f"bad q range {text!r}")
        k = int(round((hi - lo) / step))
        return [round(lo + i * step, 10) for i in range(k + 1)]
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def parse_n_range(text) -> tuple[int, int]:
    lo, hi = (int(x) for x in str(text).split(":"))
    return lo, hi


def read_config(path) -> dict:
    """key = value lines (# comments) or a JSON object; keys use - or _."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key = value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    return {k.replace("-", "_"): v for k, v in raw.items()}


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).lower() in ("1", "true", "yes", "on")


_CASTS = {"sim_n": lambda v: int(float(v)), "seeds": int, "search_n": lambda v: int(float(v)),
          "jobs": int, "N": int, "quick": _bool, "plot": _bool, "inject_fault": _bool}


def build_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = read_config(args.config) if args.config else {}
    unknown = set(file_cfg) - set(DEFAULTS) - {"q", "q_range"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def pick(key):
        v = getattr(args, key, None)
        if v is None:
            v = file_cfg.get(key, DEFAULTS[key])
        return _CASTS[key](v) if key in _CASTS and v is not None else v

    vals = {k: pick(k) for k in DEFAULTS}
    if vals["quick"]:
        for k, v in QUICK_SIM.items():
            if getattr(args, k, None) is None and k not in file_cfg:
                vals[k] = v

    if args.q is not None:
        qs = parse_qs(args.q)
    elif args.q_range is not None:
        qs = parse_qs(args.q_range)
    elif "q" in file_cfg:
        qs = parse_qs(file_cfg["q"])
    elif "q_range" in file_cfg:
        qs = parse_qs(file_cfg["q_range"])
    else:
        qs = parse_qs(DEFAULT_QS.get(args.command, "0.5"))

    n_range = parse_n_range(vals["n_range"]) if vals["n_range"] else None
    return RunConfig(
        command=args.command, qs=qs, arity=vals["arity"], quantity_set=vals["set"],
        n_range=n_range, sim_n=vals["sim_n"], seeds=vals["seeds"],
        search_n=vals["search_n"], out=vals["out"], format=vals["format"],
        quick=vals["quick"], jobs=max(1, vals["jobs"]), plot=vals["plot"],
        extras={k: vals[k] for k in ("scheme", "N", "trace", "inject_fault")},
    )


def _map(fn, items, jobs):
    """Evaluate fn over items, possibly in worker processes; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _emit(cfg: RunConfig, rows, columns, title="", ylabel="bits / channel use",
          plot_columns=None):
    if cfg.format == "json":
        meta = {k: v for k, v in asdict(cfg).items() if k not in ("command",)}
        text = report.to_json(rows, columns, cfg.command, meta)
    else:
        text = report.to_csv(rows, columns)
    report.write(text, cfg.out)
    if cfg.plot and cfg.out not in (None, "-"):
        path = report.figure_path(cfg.out)
        report.plot_curves(rows, plot_columns or columns, path, title=title, ylabel=ylabel)
        log.info("figure written to %s", path)


def cmd_table(cfg: RunConfig) -> int:
    sim = cfg.sim
    if cfg.quick:
        sim.enabled = False
    rows = _map(partial(table_row, sim=sim, n_range=cfg.frames), cfg.qs, cfg.jobs)
    _emit(cfg, rows, TABLE_COLUMNS, title="binary channel")
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    sim = cfg.sim
    if cfg.quick:
        sim.enabled = False
    fn = partial(sweep_row, arity=cfg.arity, quantity_set=cfg.quantity_set, sim=sim,
                 n_range=cfg.frames)
    rows = _map(fn, cfg.qs, cfg.jobs)
    if cfg.quantity_set == "nopt":
        _emit(cfg, rows, ["q", "N_opt", "R_A_mod"], ylabel="optimal frame length N",
              plot_columns=["q", "N_opt"])
        return 0
    columns = ["q"] + QUANTITIES[cfg.arity][cfg.quantity_set]
    _emit(cfg, rows, columns, title=f"{cfg.arity} channel")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    checks, elapsed = timed_checks(quick=cfg.quick, inject_fault=cfg.extras["inject_fault"])
    text = check_report(checks, elapsed)
    report.write(text, cfg.out)
    if cfg.out not in (None, "-"):
        sys.stdout.write(text.splitlines()[-1] + "\n")
    return 0 if all(c.passed for c in checks) else 1


def _asymptotic_row(q, n_range):
    d = asymptotic_ratio(q, n_range)
    return {k: Cell(v) for k, v in d.items()}


def cmd_asymptotic(cfg: RunConfig) -> int:
    if any(not 0 < q < 1 for q in cfg.qs):
        raise ValueError("asymptotic needs 0 < q < 1")
    n_range = cfg.frames if cfg.n_range else None
    rows = _map(partial(_asymptotic_row, n_range=n_range), cfg.qs, cfg.jobs)
    columns = ["q", "genie", "modulo", "ratio", "N", "witness_N", "witness_rate",
               "witness_bound"]
    _emit(cfg, rows, columns, ylabel="rate (bits / channel use)")
    return 0


SIM_COLUMNS = ["q", "N", "seed", "symbols", "mean_T", "mean_T_stderr", "analytic_mean_T",
               "decode_errors", "energy_violations", "empirical_rate", "analytic_rate"]


def _design(q, cfg):
    """Frame length and input law for the simulator: the rate-optimal code at q."""
    scheme = cfg.extras["scheme"]
    sign = cfg.arity == "ternary"
    N = cfg.extras["N"] or modulo_rate_best(q, cfg.frames, sign_bit=sign).N
    r = modulo_rate(q, N, sign_bit=sign) if scheme == "modulo" else \
        extended_rate(q, N, sign_bit=sign)
    return N, r.p_u, r.rate


def _simulate_cell(item, cfg):
    q, seed = item
    N, p_u, rate = _design(q, cfg)
    if cfg.arity == "ternary":
        tr = run_ternary(q, N, p_u, cfg.sim_n, seed=seed, scheme=cfg.extras["scheme"])
    elif cfg.extras["scheme"] == "modulo":
        tr = run_modulo(q, N, p_u, cfg.sim_n, seed=seed)
    else:
        tr = run_extended(q, N, p_u, cfg.sim_n, seed=seed)
    s = tr.stats
    row = {"q": Cell(q), "N": Cell(N), "seed": Cell(seed), "symbols": Cell(cfg.sim_n),
           "mean_T": Cell(tr.mean_time, stderr=tr.mean_time_stderr),
           "mean_T_stderr": Cell(tr.mean_time_stderr),
           "analytic_mean_T": Cell(s.get("analytic_mean_T", float("nan"))),
           "decode_errors": Cell(int(s["decode_errors"])),
           "energy_violations": Cell(int(s["energy_violations"])),
           "empirical_rate": Cell(s["empirical_rate"]),
           "analytic_rate": Cell(rate)}
    return row, tr


def cmd_simulate(cfg: RunConfig) -> int:
    if any(not 0 < q < 1 for q in cfg.qs):
        raise ValueError("simulate needs 0 < q < 1")
    items = [(q, seed) for q in cfg.qs for seed in range(cfg.seeds)]
    trace_path = cfg.extras["trace"]
    rows = []
    for i, (row, tr) in enumerate(_map(partial(_simulate_cell, cfg=cfg), items, cfg.jobs)):
        rows.append(row)
        if trace_path and i == 0:
            write_trace(tr, trace_path)
    cfg.plot = False
    _emit(cfg, rows, SIM_COLUMNS)
    return 0


COMMANDS = {"table": cmd_table, "sweep": cmd_sweep, "verify": cmd_verify,
            "simulate": cmd_simulate, "asymptotic": cmd_asymptotic}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file (or JSON); flags override it")
    qg = common.add_mutually_exclusive_group()
    qg.add_argument("--q", help="comma separated harvest probabilities")
    qg.add_argument("--q-range", help="start:stop:step, stop inclusive")
    common.add_argument("--arity", choices=["binary", "ternary"])
    common.add_argument("--n-range", help="lo:hi range of frame lengths N to search")
    common.add_argument("--sim-n", type=lambda v: int(float(v)), help="simulation length")
    common.add_argument("--seeds", type=int, help="number of simulation seeds")
    common.add_argument("--search-n", type=lambda v: int(float(v)),
                        help="simulation length used while searching strategies")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--quick", action="store_true", default=None,
                        help="reduced workload (about a minute)")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--no-plot", dest="plot", action="store_false", default=None,
                        help="skip the PNG written next to --out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="ehcap",
        description="Capacity bounds and achievable rates for energy-harvesting channels "
                    "with a unit battery.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table", parents=[common], help="binary bounds and rates, one row per q")
    sw = sub.add_parser("sweep", parents=[common], help="curve data over a q grid")
    sw.add_argument("--set", choices=["bounds", "achievable", "nopt"])
    v = sub.add_parser("verify", parents=[common], help="cross-module consistency checks")
    v.add_argument("--inject-fault", action="store_true", default=None,
                   help="perturb the leakage solution so the KKT checks must fail")
    sim = sub.add_parser("simulate", parents=[common], help="run the timing codes slot by slot")
    sim.add_argument("--scheme", choices=["modulo", "extended"])
    sim.add_argument("--N", type=int, help="frame length (default: rate-optimal)")
    sim.add_argument("--trace", help="write the first run's slot trace here")
    sub.add_parser("asymptotic", parents=[common], help="genie bound / modulo rate as q -> 0")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except (ValueError, OSError) as e:
        parser.error(str(e))
    log.info("config: %s", cfg)
    try:
        return COMMANDS[cfg.command](cfg)
    except ValueError as e:
        print(f"ehcap: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
