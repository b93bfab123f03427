"""Delimited and JSON output, plus figures rendered next to the data files."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from ehcap.experiments import Cell

SCHEMA = "ehcap/1"

_STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.4,
    "figure.figsize": (5.0, 3.4),
    "savefig.dpi": 150,
}

LABELS = {
    "C_UB_genie": r"$C_{UB}^{genie}$",
    "C_UB_leakage": r"$C_{UB}^{leakage}$",
    "R_A_ext": r"$R_A^{ext}$",
    "R_A_mod": r"$R_A^{mod}$",
    "R_M2": r"$R_{M2}$",
    "R_M1": r"$R_{M1}$",
    "R_OIID": r"$R_{OIID}$",
    "R_NIID": r"$R_{NIID}$",
    "C_ZS": r"$C_{ZS}$",
    "C_IS": r"$C_{IS}$",
    "N_opt": r"$N^*$",
}


def _fmt(v: float) -> str:
    if isinstance(v, (int, bool)) and not isinstance(v, float):
        return str(int(v))
    if math.isnan(v):
        return "nan"
    return f"{v:.4f}"


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row[c].value
            out.append(_fmt(v) if c != "q" else f"{v:g}")
        w.writerow(out)
    return buf.getvalue()


def _cell_json(c: Cell) -> dict:
    d = {"value": None if math.isnan(c.value) else c.value, "tol": c.tol, "stderr": c.stderr}
    if c.extra:
        d["extra"] = c.extra
    return d


def to_json(rows: list[dict], columns: list[str], command: str, config: dict) -> str:
    doc = {
        "schema": SCHEMA,
        "command": command,
        "config": config,
        "columns": columns,
        "rows": [{c: _cell_json(r[c]) for c in columns} for r in rows],
    }
    return json.dumps(doc, indent=2, default=str)


def write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        print(text, end="")
    else:
        Path(out).write_text(text)


def figure_path(out: str, suffix: str = ".png") -> Path:
    return Path(out).with_suffix(suffix)


def plot_curves(rows: list[dict], columns: list[str], path, title: str = "",
                ylabel: str = "bits / channel use"):
    """Line plot of every non-q column against q."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    qs = [r["q"].value for r in rows]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for c in columns:
            if c == "q":
                continue
            ys = [r[c].value for r in rows]
            if all(math.isnan(y) for y in ys):
                continue
            if c == "N_opt":
                ax.step(qs, ys, where="mid", label=LABELS.get(c, c))
            else:
                ax.plot(qs, ys, marker=".", label=LABELS.get(c, c))
        ax.set_xlabel("harvest probability $q$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
