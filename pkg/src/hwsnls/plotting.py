"""Figures and gnuplot-ready data files from a run directory.

``emit_plot_data(run_dir)`` reads ``report.json`` and the CSV series of a
finished run and writes whitespace-separated ``.dat`` files (``#`` header,
blank line between blocks) next to PNG figures rendered with matplotlib.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

REQUIRED_FILES = ("report.json", "series.csv")


class PlotDataError(FileNotFoundError):
    """The run directory lacks files needed for plotting."""

    def __init__(self, run_dir: Path, missing: list[str]):
        self.missing = missing
        super().__init__(f"{run_dir}: missing {', '.join(missing)}")


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def _float(x: str) -> float:
    try:
        return float(x)
    except ValueError:
        return math.nan


def numeric_columns(header: list[str], rows: list[list[str]]) -> dict[str, np.ndarray]:
    return {name: np.array([_float(r[i]) for r in rows]) for i, name in enumerate(header)}


def _dat_cell(x) -> str:
    """One whitespace-free token; empty CSV cells become NaN so columns stay aligned."""
    if isinstance(x, str):
        return x if x.strip() else "NaN"
    return f"{float(x):.17g}"


def write_dat(path: str | Path, header: list[str], blocks: list[list[tuple]], comment: str = "") -> Path:
    """Write gnuplot blocks; each block is a list of rows, blocks are separated by a blank line."""
    path = Path(path)
    with path.open("w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("# " + " ".join(header) + "\n")
        for b, block in enumerate(blocks):
            if b:
                fh.write("\n\n")
            for row in block:
                fh.write(" ".join(_dat_cell(x) for x in row) + "\n")
    return path


def _save(fig: Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def _series_figure(cols: dict[str, np.ndarray], xname: str, names: list[str], title: str,
                   logy: bool = False) -> Figure:
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot()
    x = cols[xname]
    for name in names:
        y = cols[name]
        if np.all(np.isnan(y)):
            continue
        ax.plot(x, np.abs(y) if logy else y, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xname)
    ax.set_title(title)
    ax.legend(fontsize="small")
    return fig


def _plot_instability(run_dir: Path, report: dict, cols: dict[str, np.ndarray], out: list[Path]) -> None:
    t, hom = cols["t"], cols["H_half_hom"]
    a, b = report.get("rate"), report.get("intercept")
    fitted = [isinstance(a, float) and isinstance(b, float) and math.isfinite(a) and math.isfinite(b)]
    rows = [(ti, hi, math.exp(a * ti + b) if fitted[0] else math.nan) for ti, hi in zip(t, hom)]
    out.append(write_dat(run_dir / "inflation.dat", ["t", "H_half_hom", "fit"], [rows],
                         comment=f"fit window {report.get('fit_window')}"))
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot()
    ax.semilogy(t, hom, label="||u(t)||_{H^1/2 hom}")
    if fitted[0]:
        ax.semilogy(t, np.exp(a * t + b), "--", label=f"exp({a:.3g} t + {b:.3g})")
    ax.set_xlabel("t")
    ax.set_title(f"status: {report.get('status')}")
    ax.legend(fontsize="small")
    out.append(_save(fig, run_dir / "inflation.png"))


def _plot_landscape(run_dir: Path, out: list[Path]) -> None:
    """Energy minus mass/2 against the kinetic norm; symlog keeps the shallow sNLS well visible."""
    path = run_dir / "curves.csv"
    if not path.exists():
        raise PlotDataError(run_dir, ["curves.csv"])
    cols = numeric_columns(*read_csv(path))
    blocks = []
    fig = Figure(figsize=(6.4, 4.0))
    ax = fig.add_subplot()
    nonzero = np.abs(cols["excess"][cols["excess"] != 0])
    for code, name in ((0, "sNLS"), (1, "HW")):
        sel = cols["curve"] == code
        blocks.append(list(zip(cols["kinetic_norm"][sel], cols["energy"][sel], cols["excess"][sel],
                               cols["lambda"][sel])))
        ax.plot(cols["kinetic_norm"][sel], cols["excess"][sel], label=name)
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=float(nonzero.min()) if nonzero.size else 1e-12)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("homogeneous H^1/2 seminorm")
    ax.set_ylabel("energy - mass/2")
    ax.legend()
    out.append(write_dat(run_dir / "landscape_curves.dat", ["kinetic_norm", "energy", "excess", "lambda"],
                         blocks, comment="block 0: sNLS, block 1: HW"))
    out.append(_save(fig, run_dir / "landscape_curves.png"))


GENERIC_PLOTS = {
    "simulate": ("t", ["mass", "E", "H_half_hom", "P"], False),
    "stability": ("t", ["orbit_distance"], False),
    "virial-check": ("t", ["dMdt", "four_P", "bound"], False),
    "landscape": ("lambda", ["E_s_minus_half_mass"], False),
    "modified-energy": ("t", ["dEdt_fd", "dEdt_rhs"], False),
    "groundstate": ("iteration", ["stationarity"], True),
}


def emit_plot_data(run_dir: str | Path) -> list[Path]:
    """Write .dat files and PNG figures for a run directory; returns the written paths."""
    run_dir = Path(run_dir)
    missing = [f for f in REQUIRED_FILES if not (run_dir / f).exists()]
    if missing:
        raise PlotDataError(run_dir, missing)
    report = json.loads((run_dir / "report.json").read_text())
    sub = report.get("subcommand", "")
    header, rows = read_csv(run_dir / "series.csv")
    out: list[Path] = []
    if header and rows:
        out.append(write_dat(run_dir / "series.dat", header, [rows]))
    if not rows:
        return out
    if sub == "inequalities":
        fams: dict[str, list] = {}
        for r in rows:
            fams.setdefault(r[0], []).append(r)
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot()
        for fam, rs in fams.items():
            if len(rs) > 1:
                ax.plot([_float(r[1]) for r in rs], [_float(r[4]) for r in rs], "o-", label=fam)
        ax.set_xlabel("parameter")
        ax.set_ylabel("LHS / RHS")
        ax.legend(fontsize="x-small")
        out.append(_save(fig, run_dir / "ratios.png"))
        return out
    cols = numeric_columns(header, rows)
    if sub == "instability":
        _plot_instability(run_dir, report, cols, out)
    if sub == "landscape":
        _plot_landscape(run_dir, out)
    spec = GENERIC_PLOTS.get(sub)
    if spec and spec[0] in cols:
        xname, names, logy = spec
        names = [n for n in names if n in cols]
        fig = _series_figure(cols, xname, names, sub, logy)
        if sub == "landscape":
            fig.axes[0].set_xscale("log")
        out.append(_save(fig, run_dir / "series.png"))
    return out
