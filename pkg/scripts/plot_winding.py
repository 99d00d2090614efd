#!/usr/bin/env python3
"""Quick-look plots for a finished run directory.

Reads report.json / series.csv / tracers.csv produced by `patchwind run`
and writes winding-rate histogram + diagnostics time series as PNGs.
Matplotlib is an optional dependency of this script only.

Usage: python scripts/plot_winding.py out/disk_baseline
"""

from __future__ import annotations

import argparse
import csv
import json
import math
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("run_dir", type=Path)
    args = ap.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report = json.loads((args.run_dir / "report.json").read_text())
    disk_rate = 1.0 / (4.0 * math.pi)

    tracer_file = args.run_dir / "tracers.csv"
    if tracer_file.exists():
        with tracer_file.open() as fh:
            rows = list(csv.DictReader(fh))
        rates = [float(r["N_over_T"]) for r in rows]
        good = [bool(int(r["good_set"])) for r in rows]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist([r for r, g in zip(rates, good) if g], bins=80,
                alpha=0.8, label="good set")
        ax.hist([r for r, g in zip(rates, good) if not g], bins=80,
                alpha=0.6, label="excluded")
        ax.axvline(disk_rate, color="k", ls="--", lw=1, label="1/(4π)")
        ax.set_xlabel("winding rate N/T")
        ax.set_ylabel("tracers")
        ax.legend()
        ax.set_title(f"δ = {report['delta']:.3g}, "
                     f"good fraction = {report['good_set_fraction']:.3f}")
        fig.tight_layout()
        fig.savefig(args.run_dir / "winding_hist.png", dpi=150)
        print(f"wrote {args.run_dir / 'winding_hist.png'}")

    with (args.run_dir / "series.csv").open() as fh:
        series = list(csv.DictReader(fh))
    t = [float(r["t"]) for r in series]
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    a0 = float(series[0]["area"])
    axes[0].plot(t, [float(r["area"]) / a0 - 1.0 for r in series])
    axes[0].set_ylabel("rel. area drift")
    axes[1].plot(t, [float(r["sym_diff_vs_D"]) for r in series])
    axes[1].set_ylabel("|Ω_t △ D|")
    axes[2].plot(t, [float(r["vel_dev_max"]) for r in series])
    axes[2].set_ylabel("max |u − u_D|")
    axes[2].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(args.run_dir / "series.png", dpi=150)
    print(f"wrote {args.run_dir / 'series.png'}")


if __name__ == "__main__":
    main()
