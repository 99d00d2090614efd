"""Time integration of the coupled boundary + tracer system.

Everything moves with the same velocity field: boundary nodes define the
field (contour dynamics) and are advected by it, tracers ride along.  One
fixed-step RK4 advances both together, re-evaluating the field from the
stage boundary at every substage.  The 'exact_disk' field mode freezes the
field to the analytic disk solution, which separates integrator testing from
field testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from patchwind import tracers as tr
from patchwind.config import ConfigError, SimConfig
from patchwind.diagnostics import DiagnosticsRecord, deviation_probes, sideris_vega_rhs
from patchwind.geometry import (
    DiskSpec,
    PatchBoundary,
    conserved_moments,
    shoelace_area,
    symmetric_difference_area,
)
from patchwind.velocity import (
    boundary_and_tracer_velocity,
    exact_disk_velocity,
    velocity_deviation_from_disk,
)

FloatArray = NDArray[np.float64]


class DivergenceError(RuntimeError):
    """A position left the guard disk; the run is not trustworthy."""

    def __init__(self, t: float, r_max: float):
        super().__init__(f"blow-up guard tripped at t={t:.6g} (|x| = {r_max:.3g})")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 parameters; scheme choice is not configurable."""

    dt: float
    t_end: float
    snapshot_dt: float
    h_min: float
    h_max: float
    cfl: float = 20.0
    field_mode: str = "contour"
    r_guard: float = 10.0
    remesh_enabled: bool = True


@dataclass
class SimState:
    """Time, boundary, and tracer cloud evolved jointly.

    The tracer set is updated in place by `step`; consumers that keep
    snapshots must copy what they need.
    """

    t: float
    boundary: PatchBoundary
    tracers: tr.TracerSet | None


def _field(nodes: FloatArray, tracer_x: FloatArray | None, mode: str):
    if mode == "exact_disk":
        un = exact_disk_velocity(nodes, 1.0)
        ut = None if tracer_x is None else exact_disk_velocity(tracer_x, 1.0)
        return un, ut
    return boundary_and_tracer_velocity(PatchBoundary(nodes), tracer_x)


def step(state: SimState, cfg: IntegratorConfig) -> SimState:
    """One RK4 step of boundary and tracers, with tracer accumulators."""
    dt = cfg.dt
    n0 = state.boundary.nodes
    t0 = None if state.tracers is None else state.tracers.x

    k1n, k1t = _field(n0, t0, cfg.field_mode)
    n2 = n0 + 0.5 * dt * k1n
    t2 = None if t0 is None else t0 + 0.5 * dt * k1t
    k2n, k2t = _field(n2, t2, cfg.field_mode)
    n3 = n0 + 0.5 * dt * k2n
    t3 = None if t0 is None else t0 + 0.5 * dt * k2t
    k3n, k3t = _field(n3, t3, cfg.field_mode)
    n4 = n0 + dt * k3n
    t4 = None if t0 is None else t0 + dt * k3t
    k4n, k4t = _field(n4, t4, cfg.field_mode)

    new_nodes = n0 + (dt / 6.0) * (k1n + 2.0 * k2n + 2.0 * k3n + k4n)
    r_max = float(np.hypot(new_nodes[:, 0], new_nodes[:, 1]).max())

    ts = state.tracers
    if ts is not None:
        new_x = t0 + (dt / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        tr.accumulate(ts, np.stack([t0, t2, t3, t4]),
                      np.stack([k1t, k2t, k3t, k4t]), new_x, dt)
        r_max = max(r_max, float(np.hypot(new_x[:, 0], new_x[:, 1]).max()))

    if r_max > cfg.r_guard:
        raise DivergenceError(state.t + dt, r_max)

    boundary = PatchBoundary(new_nodes)
    if cfg.remesh_enabled:
        boundary = remesh(boundary, cfg.h_min, cfg.h_max)
    return SimState(state.t + dt, boundary, ts)


def remesh(b: PatchBoundary, h_min: float, h_max: float) -> PatchBoundary:
    """Restore node spacing to [h_min, h_max]; no-op when already there.

    Long edges are subdivided on a periodic cubic spline through the current
    nodes; short edges are merged greedily.  A Newton correction along the
    outward normals removes the area change of the interpolation.
    """
    sp = b.spacings
    if sp.min() >= h_min and sp.max() <= h_max:
        return b
    from scipy.interpolate import CubicSpline

    nodes = b.nodes
    n = nodes.shape[0]
    s = np.concatenate([[0.0], np.cumsum(sp)])
    spline = CubicSpline(s, np.vstack([nodes, nodes[:1]]), bc_type="periodic", axis=0)

    h_target = math.sqrt(h_min * h_max)
    params: list[float] = []
    for k in range(n):
        params.append(s[k])
        if sp[k] > h_max:
            pieces = int(math.ceil(sp[k] / h_target))
            for j in range(1, pieces):
                params.append(s[k] + sp[k] * j / pieces)
    pts = spline(np.asarray(params))

    keep = [0]
    for i in range(1, len(params)):
        gap = np.hypot(*(pts[i] - pts[keep[-1]]))
        nxt = pts[(i + 1) % len(params)]
        if gap >= h_min or np.hypot(*(nxt - pts[keep[-1]])) > h_max:
            keep.append(i)
    # closing edge: drop the last kept node if it crowds the first
    if len(keep) > 8 and np.hypot(*(pts[keep[-1]] - pts[0])) < h_min:
        keep.pop()
    new = pts[keep]

    target = shoelace_area(nodes)
    for _ in range(3):
        err = target - shoelace_area(new)
        if abs(err) <= 1e-14 * abs(target):
            break
        tang = np.roll(new, -1, axis=0) - np.roll(new, 1, axis=0)
        tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
        normals = np.column_stack([tang[:, 1], -tang[:, 0]])
        perim = PatchBoundary.edge_lengths(new).sum()
        new = new + (err / perim) * normals
    return PatchBoundary(new)


def run(cfg: SimConfig) -> Iterator[tuple[SimState, DiagnosticsRecord]]:
    """Run one experiment, yielding (state, diagnostics) at every snapshot.

    Deterministic for a fixed config (seeded quasi-random tracers and
    probes, fixed-step integration).  Raises ConfigError when dt violates
    the measured CFL bound and DivergenceError when the guard trips.
    """
    cfg.validate()
    b0 = cfg.initial_shape.build(cfg.nodes)
    delta = symmetric_difference_area(b0, DiskSpec(1.0))
    disk_limit = delta < cfg.delta_zero_tol
    if cfg.epsilon_override is not None:
        epsilon = cfg.epsilon_override
    else:
        # the theorem's scaling, clamped into the admissible range
        epsilon = min(delta ** (1.0 / 6.0), 0.5) if delta > 0.0 else 0.5

    ledger = tr.OccupancyLedger(epsilon, cfg.rho_min)
    ts = tr.place_tracers(b0, cfg.tracers, ledger, cfg.seed) if cfg.tracers else None

    h0 = b0.perimeter / cfg.nodes
    h_min, h_max = cfg.h_min_factor * h0, cfg.h_max_factor * h0
    u0, _ = _field(b0.nodes, None, cfg.field_mode)
    u_max = float(np.hypot(u0[:, 0], u0[:, 1]).max())
    if u_max > 0.0 and cfg.dt > cfg.cfl * h_min / u_max:
        raise ConfigError(
            f"dt={cfg.dt} violates the CFL bound {cfg.cfl * h_min / u_max:.3g} "
            f"(cfl={cfg.cfl}, h_min={h_min:.3g}, U_max={u_max:.3g})")

    sv_rhs = sideris_vega_rhs(b0, 1.0)
    probes = deviation_probes(cfg.probe_count)

    def record(state: SimState) -> DiagnosticsRecord:
        area, centroid, impulse = conserved_moments(state.boundary)
        return DiagnosticsRecord(
            t=state.t,
            area=area,
            centroid=(float(centroid[0]), float(centroid[1])),
            angular_impulse=impulse,
            sym_diff_vs_D=symmetric_difference_area(state.boundary, DiskSpec(1.0)),
            vel_dev_max=velocity_deviation_from_disk(state.boundary, probes),
            sv_rhs=sv_rhs,
            delta=delta,
            epsilon=epsilon,
            disk_limit=disk_limit,
        )

    state = SimState(0.0, b0, ts)
    yield state, record(state)
    if cfg.t_end <= 0.0:
        return

    n_steps = max(1, round(cfg.t_end / cfg.dt))
    dt_eff = cfg.t_end / n_steps
    snap_every = max(1, round(cfg.snapshot_dt / dt_eff))
    icfg = IntegratorConfig(
        dt=dt_eff, t_end=cfg.t_end, snapshot_dt=cfg.snapshot_dt,
        h_min=h_min, h_max=h_max, cfl=cfg.cfl, field_mode=cfg.field_mode,
        r_guard=cfg.r_guard, remesh_enabled=cfg.remesh)
    for k in range(1, n_steps + 1):
        state = step(state, icfg)
        state.t = k * dt_eff  # avoid accumulated roundoff in t
        if k % snap_every == 0 or k == n_steps:
            yield state, record(state)
