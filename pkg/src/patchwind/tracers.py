"""Lagrangian tracer diagnostics: winding number, travel distance, unwrapped
angle, and dyadic-annulus occupancy times.

Tracers live in a structure-of-arrays TracerSet; every accumulator update is
vectorized over the whole set and uses the same RK4 stage values as the time
integrator, so the winding quadrature shares the integrator's time grid.  The
unwrapped angle provides an independent second definition of winding that the
test suite checks against the integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from patchwind.geometry import GeometryError, PatchBoundary, contains_points

FloatArray = NDArray[np.float64]

DISK_RATE = 1.0 / (4.0 * math.pi)

#: RK4 quadrature weights shared with the integrator stages
RK4_WEIGHTS = np.array([1.0, 2.0, 2.0, 1.0]) / 6.0


class EmptyStatisticsError(RuntimeError):
    """All tracers were flagged; no winding statistics exist."""


@dataclass
class OccupancyLedger:
    """Bookkeeping for time spent in dyadic balls around the origin.

    Annulus i (0 <= i <= i_max) is B_{2^-i eps} minus B_{2^-(i+1) eps}; time
    below the deepest annulus is merged into bucket i_max.  Bucket -1 tracks
    time outside the unit disk.  Time inside D but outside B_eps is the
    complement column, so the columns always partition the elapsed time.
    """

    epsilon: float
    rho_min: float = 1e-8
    elapsed: float = 0.0
    i_max: int = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 0.5:
            raise GeometryError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        self.i_max = int(math.ceil(math.log2(self.epsilon / self.rho_min)))

    def annulus_of(self, rho: FloatArray) -> NDArray[np.int64]:
        """Annulus index per radius: -1 outside D, -2 in D beyond B_eps."""
        rho = np.maximum(rho, self.rho_min * 1e-3)
        with np.errstate(divide="ignore"):
            i = np.floor(np.log2(self.epsilon / rho)).astype(np.int64)
        i = np.minimum(i, self.i_max)
        i = np.where(rho >= self.epsilon, -2, i)
        return np.where(rho >= 1.0, -1, i)


@dataclass
class TracerSet:
    """Positions and per-particle accumulators for a cloud of tracers.

    ``buckets`` has one column per ledger bucket: column 0 is bucket -1
    (outside D), column 1 + i is annulus i, and ``complement`` holds the
    in-D-outside-B_eps time.
    """

    x0: FloatArray
    ledger: OccupancyLedger
    x: FloatArray = field(init=False)
    theta0: FloatArray = field(init=False)
    theta: FloatArray = field(init=False)
    N: FloatArray = field(init=False)
    d: FloatArray = field(init=False)
    buckets: FloatArray = field(init=False)
    complement: FloatArray = field(init=False)
    flagged: NDArray[np.bool_] = field(init=False)
    origin_floor_hits: NDArray[np.int64] = field(init=False)

    def __post_init__(self) -> None:
        self.x0 = np.atleast_2d(np.asarray(self.x0, dtype=np.float64)).copy()
        m = self.x0.shape[0]
        self.x = self.x0.copy()
        self.theta0 = np.arctan2(self.x0[:, 1], self.x0[:, 0])
        self.theta = self.theta0.copy()
        self.N = np.zeros(m)
        self.d = np.zeros(m)
        self.buckets = np.zeros((m, self.ledger.i_max + 2))
        self.complement = np.zeros(m)
        self.flagged = np.zeros(m, dtype=bool)
        self.origin_floor_hits = np.zeros(m, dtype=np.int64)

    @property
    def count(self) -> int:
        return self.x0.shape[0]

    @property
    def winding_rate(self) -> FloatArray:
        """N / elapsed time (turns per unit time)."""
        return self.N / self.ledger.elapsed

    @property
    def delta_theta(self) -> FloatArray:
        return self.theta - self.theta0


def place_tracers(
    b: PatchBoundary,
    count: int,
    ledger: OccupancyLedger,
    seed: int = 0,
) -> TracerSet:
    """Low-discrepancy tracer cloud inside the patch (Halton + rejection)."""
    from scipy.stats import qmc

    if count < 1:
        raise GeometryError(f"tracer count must be >= 1, got {count}")
    lo = b.nodes.min(axis=0)
    span = b.nodes.max(axis=0) - lo
    halton = qmc.Halton(2, seed=seed)
    accepted: list[FloatArray] = []
    have = 0
    while have < count:
        pts = halton.random(max(2 * (count - have), 64)) * span + lo
        inside = contains_points(b, pts)
        accepted.append(pts[inside])
        have += int(inside.sum())
    return TracerSet(np.vstack(accepted)[:count], ledger)


def accumulate(
    ts: TracerSet,
    x_stages: FloatArray,
    u_stages: FloatArray,
    x_new: FloatArray,
    dt: float,
) -> None:
    """Advance all per-tracer accumulators by one RK4 step.

    ``x_stages`` and ``u_stages`` have shape (4, m, 2): the four stage
    positions and velocities of the step that moved tracers from
    ``x_stages[0]`` to ``x_new``.  Winding and travel distance use the RK4
    weights; the unwrapped angle uses the principal-branch increment of the
    full step (< pi per step under the CFL bound); the occupancy bucket is
    chosen from the mid-step stage position.
    """
    if dt <= 0.0:
        raise GeometryError(f"dt must be positive, got {dt}")
    led = ts.ledger
    rho = np.hypot(x_stages[..., 0], x_stages[..., 1])
    breach = (rho < led.rho_min).any(axis=0)
    if breach.any():
        ts.origin_floor_hits[breach] += 1
        ts.flagged |= breach
    rho_safe = np.maximum(rho, led.rho_min)
    u_tan = (-u_stages[..., 0] * x_stages[..., 1]
             + u_stages[..., 1] * x_stages[..., 0]) / rho_safe
    speed = np.hypot(u_stages[..., 0], u_stages[..., 1])
    ts.N += dt / (2.0 * math.pi) * np.einsum("s,sm->m", RK4_WEIGHTS, u_tan / rho_safe)
    ts.d += dt * np.einsum("s,sm->m", RK4_WEIGHTS, speed)

    ang_new = np.arctan2(x_new[:, 1], x_new[:, 0])
    ang_old = np.arctan2(x_stages[0, :, 1], x_stages[0, :, 0])
    incr = ang_new - ang_old
    incr -= 2.0 * math.pi * np.round(incr / (2.0 * math.pi))
    ts.theta += incr

    rho_mid = np.hypot(x_stages[1, :, 0], x_stages[1, :, 1])
    idx = led.annulus_of(rho_mid)
    in_comp = idx == -2
    ts.complement[in_comp] += dt
    col = np.where(idx == -1, 0, idx + 1)
    rows = np.nonzero(~in_comp)[0]
    np.add.at(ts.buckets, (rows, col[rows]), dt)

    ts.x = np.asarray(x_new, dtype=np.float64).copy()
    led.elapsed += dt


def occupancy_fractions(ts: TracerSet, T: float) -> FloatArray:
    """G values per tracer, shape (m, i_max + 2).

    Column 0 is G_-1 (fraction of time outside D); column 1 + i is G_i, the
    fraction of time in the ball B_{2^-i eps}, i.e. the cumulative sum of
    annulus buckets from the deepest one up.
    """
    if not math.isclose(T, ts.ledger.elapsed, rel_tol=1e-9, abs_tol=1e-12):
        raise GeometryError(
            f"T={T} does not match the ledger's elapsed time {ts.ledger.elapsed}")
    if T <= 0.0:
        raise GeometryError("occupancy fractions need T > 0")
    G = np.empty_like(ts.buckets)
    G[:, 0] = ts.buckets[:, 0] / T
    G[:, 1:] = np.cumsum(ts.buckets[:, :0:-1], axis=1)[:, ::-1] / T
    return G


def good_set_mask(
    G: FloatArray, epsilon: float, flagged: NDArray[np.bool_] | None = None
) -> NDArray[np.bool_]:
    """Membership in the well-behaved particle set, vectorized.

    A tracer belongs iff G_i < (2^-i eps)^(3/2) for every tracked i >= 0,
    G_-1 < 2 eps (both strict), and its trajectory never breached the radial
    floor standing in for origin avoidance.
    """
    if not 0.0 < epsilon <= 0.5:
        raise GeometryError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    i = np.arange(G.shape[1] - 1)
    thresholds = (epsilon * 0.5**i) ** 1.5
    ok = (G[:, 1:] < thresholds[None, :]).all(axis=1) & (G[:, 0] < 2.0 * epsilon)
    if flagged is not None:
        ok &= ~flagged
    return ok


def good_set_membership(fractions: FloatArray, epsilon: float,
                        flagged: bool = False) -> bool:
    """Single-tracer variant of `good_set_mask`."""
    G = np.atleast_2d(np.asarray(fractions, dtype=np.float64))
    return bool(good_set_mask(G, epsilon, np.array([flagged]))[0])


@dataclass(frozen=True)
class WindingStatistics:
    histogram_counts: NDArray[np.int64]
    histogram_edges: FloatArray
    deviation_quantiles: dict[int, float]
    good_set_fraction: float
    flagged_count: int
    mean_rate: float


def winding_statistics(ts: TracerSet, T: float, disk_limit: bool = False,
                       bins: int = 64) -> WindingStatistics:
    """Histogram of N/T, deviation quantiles, and the good-set area fraction.

    ``disk_limit`` selects the degenerate delta = 0 case where the good set
    is every unflagged tracer (the occupancy thresholds only apply to
    genuinely perturbed patches).
    """
    ok = ~ts.flagged
    if not ok.any():
        raise EmptyStatisticsError("all tracers breached the radial floor")
    rates = ts.N[ok] / T
    devs = np.abs(rates - DISK_RATE)
    counts, edges = np.histogram(rates, bins=bins)
    quantiles = {q: float(np.quantile(devs, q / 100.0)) for q in (50, 90, 99)}
    if disk_limit:
        good = ok
    else:
        good = good_set_mask(occupancy_fractions(ts, T), ts.ledger.epsilon, ts.flagged)
    return WindingStatistics(
        histogram_counts=counts,
        histogram_edges=edges,
        deviation_quantiles=quantiles,
        good_set_fraction=float(good.mean()),
        flagged_count=int(ts.flagged.sum()),
        mean_rate=float(rates.mean()),
    )
