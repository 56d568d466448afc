"""CSV, manifest, figure and plot-script emission for experiment results.

The CSV schema is fixed: regime, n, replication, radius_direct,
radius_inverse, sn_mass, implied_radius, seed, with reals rendered to 12
significant digits, so identical runs produce byte-identical files.  The
report path also renders a log-log figure next to the CSV and writes a
self-contained plotting script that reads the CSV by relative name.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from . import __version__
from .config import config_items
from .experiments import ExperimentConfig, RateFitResult, ResultRow

CSV_COLUMNS = ("regime", "n", "replication", "radius_direct", "radius_inverse",
               "sn_mass", "implied_radius", "seed")


class IoError(OSError):
    pass


def _render_real(x: float) -> str:
    if np.isnan(x):
        return "nan"
    return f"{x:.11e}"  # 12 significant digits


def emit_csv(rows: Iterable[ResultRow], path: Union[str, Path]) -> None:
    """Write result rows in the fixed schema, newline-terminated."""
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join([
            r.regime,
            str(int(r.n)),
            str(int(r.replication)),
            _render_real(r.radius_direct),
            _render_real(r.radius_inverse),
            _render_real(r.sn_mass),
            _render_real(r.implied_radius),
            str(int(r.seed)),
        ]))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_csv_rows(path: Union[str, Path]) -> list[ResultRow]:
    """Parse a file produced by emit_csv back into result rows."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != ",".join(CSV_COLUMNS):
        raise IoError(f"unexpected header in {path}")
    rows = []
    for line in text[1:]:
        regime, n, rep, rd, ri, sn, imp, seed = line.split(",")
        rows.append(ResultRow(regime, int(n), int(rep), float(rd), float(ri),
                              float(sn), float(imp), int(seed)))
    return rows


def write_manifest(path: Union[str, Path], cfg: ExperimentConfig,
                   extra: Optional[dict] = None) -> None:
    """Config echo + seed + version, one ``key = value`` per line."""
    lines = [f"version = {__version__}"]
    lines += [f"{k} = {v}" for k, v in config_items(cfg)]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def render_figure(result: RateFitResult, path: Union[str, Path]) -> None:
    """Log-log radius-vs-n figure with fitted and theoretical lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = np.array([d["n"] for d in result.per_n], dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, mean_key, se_key, fit in (
        ("inverse", "mean_inverse", "se_inverse", result.inverse_fit),
        ("direct", "mean_direct", "se_direct", result.direct_fit),
    ):
        means = np.array([d[mean_key] for d in result.per_n])
        ses = np.array([d[se_key] for d in result.per_n])
        ax.errorbar(ns, means, yerr=ses, marker="o", ls="none", label=f"{label} radius")
        anchor = means[0]
        ax.plot(ns, anchor * (ns / ns[0]) ** fit.slope, ls="-",
                label=f"{label} fit slope {fit.slope:.3f}")
        ax.plot(ns, anchor * (ns / ns[0]) ** (-fit.theoretical_exponent), ls="--",
                label=f"{label} theory {-fit.theoretical_exponent:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("credible radius")
    ax.set_title(f"{result.config.regime}: contraction radii")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


PLOT_TEMPLATE = '''"""Self-contained plot of a contraction-rate run; reads {csv_name}."""

import csv
import math
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_PATH = "{csv_name}"
FITTED_SLOPE_INVERSE = {slope_inv!r}
FITTED_SLOPE_DIRECT = {slope_dir!r}
THEORY_SLOPE_INVERSE = {theory_inv!r}
THEORY_SLOPE_DIRECT = {theory_dir!r}

by_n = defaultdict(lambda: ([], []))
with open(CSV_PATH) as fh:
    for row in csv.DictReader(fh):
        pair = by_n[int(row["n"])]
        pair[0].append(float(row["radius_inverse"]))
        pair[1].append(float(row["radius_direct"]))

ns = sorted(by_n)
inv = [sum(by_n[n][0]) / len(by_n[n][0]) for n in ns]
dire = [sum(by_n[n][1]) / len(by_n[n][1]) for n in ns]

fig, ax = plt.subplots(figsize=(6.0, 4.2))
ax.plot(ns, inv, "o", label="inverse radius")
ax.plot(ns, dire, "s", label="direct radius")
for anchor, slope, label in (
    (inv[0], FITTED_SLOPE_INVERSE, "inverse fit"),
    (inv[0], THEORY_SLOPE_INVERSE, "inverse theory"),
    (dire[0], FITTED_SLOPE_DIRECT, "direct fit"),
    (dire[0], THEORY_SLOPE_DIRECT, "direct theory"),
):
    line = [anchor * (n / ns[0]) ** slope for n in ns]
    ax.plot(ns, line, "--", lw=1, label=f"{{label}} ({{slope:.3f}})")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("n")
ax.set_ylabel("credible radius")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("rates_replot.png", dpi=150)
print("wrote rates_replot.png")
'''


def emit_plot_script(result: RateFitResult, path: Union[str, Path],
                     csv_name: str) -> None:
    """Write a standalone script that re-plots the run from its CSV.

    Only the referenced CSV name depends on the output location; the data
    lines (slopes) depend on the run alone.
    """
    script = PLOT_TEMPLATE.format(
        csv_name=csv_name,
        slope_inv=result.inverse_fit.slope,
        slope_dir=result.direct_fit.slope,
        theory_inv=-result.inverse_fit.theoretical_exponent,
        theory_dir=-result.direct_fit.theoretical_exponent,
    )
    try:
        Path(path).write_text(script)
    except OSError as exc:
        raise IoError(str(exc)) from exc
