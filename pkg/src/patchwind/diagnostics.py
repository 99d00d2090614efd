"""Stability functionals, conserved quantities, and the theorem report.

The report packages what the experiment actually measures: the initial
disk-likeness delta, the occupancy scale epsilon, the good-set fraction, the
quantiles of the winding-rate deviation from the disk value 1/(4 pi), and
the empirical constants of the stability bounds (reported, never asserted
against invented thresholds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from patchwind import tracers as tr
from patchwind.geometry import (
    DiskSpec,
    PatchBoundary,
    conserved_moments,
    contains,
    symmetric_difference_area,
)

FloatArray = NDArray[np.float64]


class InconsistencyError(RuntimeError):
    """A quantity that is exactly zero in theory came out nonzero."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-snapshot monitors of one run."""

    t: float
    area: float
    centroid: tuple[float, float]
    angular_impulse: float
    sym_diff_vs_D: float
    vel_dev_max: float
    sv_rhs: float
    delta: float
    epsilon: float
    disk_limit: bool


SERIES_HEADER = ("t,area,centroid_x,centroid_y,angular_impulse,"
                 "sym_diff_vs_D,vel_dev_max,sv_rhs")


def series_row(r: DiagnosticsRecord) -> str:
    vals = (r.t, r.area, r.centroid[0], r.centroid[1], r.angular_impulse,
            r.sym_diff_vs_D, r.vel_dev_max, r.sv_rhs)
    return ",".join(f"{v:.17g}" for v in vals)


def conserved_quantities(b: PatchBoundary) -> dict:
    """Area, center of vorticity, and angular impulse of the patch."""
    area, centroid, impulse = conserved_moments(b)
    return {"area": area, "centroid": centroid, "angular_impulse": impulse}


def sideris_vega_rhs(b0: PatchBoundary, r: float) -> float:
    """Right-hand side of the L1 stability bound for the initial patch.

    4 pi * sup_{x in Omega_0 sym-diff B_r} | |x|^2 - r^2 | * |Omega_0 sym-diff B_r|,
    with the sup taken over the clipped region's extrema: polygon vertices
    outside B_r and the closest approach of the complement of Omega_0 to the
    origin inside B_r.
    """
    delta = symmetric_difference_area(b0, DiskSpec(r))
    if delta == 0.0:
        return 0.0
    v = b0.nodes
    rho2 = np.einsum("ij,ij->i", v, v)
    outer = float(np.maximum(rho2 - r * r, 0.0).max())
    if contains(b0, np.zeros(2)):
        a = v
        d = np.roll(a, -1, axis=0) - a
        L2 = np.einsum("ij,ij->i", d, d)
        t = np.clip(-np.einsum("ij,ij->i", a, d) / L2, 0.0, 1.0)
        near = a + t[:, None] * d
        d0 = float(np.sqrt(np.einsum("ij,ij->i", near, near).min()))
        inner = r * r - d0 * d0 if d0 < r else 0.0
    else:
        inner = r * r
    return 4.0 * math.pi * max(outer, inner) * delta


def check_sv_inequality(
    records: list[DiagnosticsRecord], rhs: float, tol: float = 0.05
) -> tuple[bool, float]:
    """Does |Omega_t sym-diff D|^2 <= rhs hold along the run, and how tightly.

    Returns (ok, max ratio).  A zero rhs with a genuinely nonzero symmetric
    difference means the run contradicts the bound's hypotheses and raises.
    """
    if not records:
        raise InconsistencyError("empty diagnostics series")
    worst = max(r.sym_diff_vs_D for r in records)
    if rhs == 0.0:
        if worst * worst > 1e-6:
            raise InconsistencyError(
                f"sv rhs is 0 but sym_diff reached {worst:.3g}")
        return True, 0.0
    ratio = worst * worst / rhs
    return ratio <= 1.0 + tol, ratio


def deviation_probes(count: int, seed: int = 11) -> FloatArray:
    """Fixed low-discrepancy probe points for the velocity-deviation monitor.

    Probes live in the box [-1.5, 1.5]^2 but avoid a thin band around the
    unit circle where polygonal discretization of the boundary dominates the
    comparison against the exact disk field.
    """
    from scipy.stats import qmc

    halton = qmc.Halton(2, seed=seed)
    out: list[FloatArray] = []
    have = 0
    while have < count:
        pts = halton.random(2 * count) * 3.0 - 1.5
        rho = np.hypot(pts[:, 0], pts[:, 1])
        keep = np.abs(rho - 1.0) > 0.05
        out.append(pts[keep])
        have += int(keep.sum())
    return np.vstack(out)[:count]


@dataclass(frozen=True)
class TheoremReport:
    """Everything the winding-rate experiment concludes."""

    delta: float
    epsilon: float
    T: float
    good_set_fraction: float | None
    deviation_quantiles: dict[int, float] | None
    flagged_tracer_count: int
    mean_rate: float | None
    c_sqrt_delta: float
    c_quarter: float
    c_twelfth: float
    sv_max_ratio: float
    sv_ok: bool
    records: tuple[DiagnosticsRecord, ...]
    histogram_counts: tuple[int, ...] | None
    histogram_edges: tuple[float, ...] | None

    def json_dict(self) -> dict:
        q = self.deviation_quantiles or {}
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "T": self.T,
            "good_set_fraction": self.good_set_fraction,
            "dev_q50": q.get(50),
            "dev_q90": q.get(90),
            "dev_q99": q.get(99),
            "c_sqrt_delta": self.c_sqrt_delta,
            "c_quarter": self.c_quarter,
            "c_twelfth": self.c_twelfth,
            "sv_max_ratio": self.sv_max_ratio,
            "flagged": self.flagged_tracer_count,
        }


def assemble_report(
    records: list[DiagnosticsRecord],
    tracer_set: tr.TracerSet | None,
    T: float,
) -> TheoremReport:
    """Fold a completed run into a TheoremReport; deterministic."""
    first = records[0]
    delta, epsilon, disk_limit = first.delta, first.epsilon, first.disk_limit
    sv_ok, sv_ratio = check_sv_inequality(records, first.sv_rhs)

    max_sym = max(r.sym_diff_vs_D for r in records)
    max_dev = max(r.vel_dev_max for r in records)
    c_sqrt = max_sym / math.sqrt(delta) if not disk_limit else 0.0
    c_quarter = max_dev / delta ** 0.25 if not disk_limit else 0.0

    stats = None
    if tracer_set is not None and T > 0.0:
        stats = tr.winding_statistics(tracer_set, T, disk_limit=disk_limit)
    c_twelfth = 0.0
    if stats is not None and not disk_limit:
        c_twelfth = stats.deviation_quantiles[90] / delta ** (1.0 / 12.0)

    return TheoremReport(
        delta=delta,
        epsilon=epsilon,
        T=T,
        good_set_fraction=None if stats is None else stats.good_set_fraction,
        deviation_quantiles=None if stats is None else stats.deviation_quantiles,
        flagged_tracer_count=0 if stats is None else stats.flagged_count,
        mean_rate=None if stats is None else stats.mean_rate,
        c_sqrt_delta=c_sqrt,
        c_quarter=c_quarter,
        c_twelfth=c_twelfth,
        sv_max_ratio=sv_ratio,
        sv_ok=sv_ok,
        records=tuple(records),
        histogram_counts=None if stats is None else tuple(int(c) for c in stats.histogram_counts),
        histogram_edges=None if stats is None else tuple(float(e) for e in stats.histogram_edges),
    )


def tracer_report_rows(ts: tr.TracerSet, T: float, disk_limit: bool) -> list[str]:
    """CSV rows for the per-tracer report, header included."""
    G = tr.occupancy_fractions(ts, T)
    if disk_limit:
        good = ~ts.flagged
    else:
        good = tr.good_set_mask(G, ts.ledger.epsilon, ts.flagged)
    header = ("id,x0x,x0y,N_over_T,dev,d_total,good_set,flagged,G_minus1,"
              + ",".join(f"G_{i}" for i in range(ts.ledger.i_max + 1)))
    rows = [header]
    rate = ts.N / T
    dev = np.abs(rate - tr.DISK_RATE)
    for i in range(ts.count):
        cells = [str(i),
                 f"{ts.x0[i, 0]:.17g}", f"{ts.x0[i, 1]:.17g}",
                 f"{rate[i]:.17g}", f"{dev[i]:.17g}", f"{ts.d[i]:.17g}",
                 str(int(good[i])), str(int(ts.flagged[i]))]
        cells += [f"{g:.17g}" for g in G[i]]
        rows.append(",".join(cells))
    return rows
