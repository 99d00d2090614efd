"""Planar patch domains represented by closed polygonal boundary curves.

All boundaries are counterclockwise closed polylines; the edge from the last
node back to the first is implicit.  Geometry here is pure: no function
mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

MIN_NODES = 8


class GeometryError(ValueError):
    """Invalid argument or broken boundary invariant."""


@dataclass(frozen=True)
class DiskSpec:
    """Origin-centered open disk of radius ``r``."""

    r: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise GeometryError(f"disk radius must be positive, got {self.r}")

    @property
    def area(self) -> float:
        return math.pi * self.r**2


@dataclass(frozen=True)
class PatchBoundary:
    """Ordered closed polyline of boundary nodes, counterclockwise.

    Invariants checked at construction: at least MIN_NODES nodes, consecutive
    nodes distinct, positive signed area (CCW).  Simplicity of the curve is
    not verified here (O(n^2)); the dynamics monitors catch self-intersection
    indirectly through area drift.
    """

    nodes: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise GeometryError(f"nodes must have shape (n, 2), got {nodes.shape}")
        if nodes.shape[0] < MIN_NODES:
            raise GeometryError(f"need at least {MIN_NODES} nodes, got {nodes.shape[0]}")
        if not np.isfinite(nodes).all():
            raise GeometryError("nodes contain non-finite values")
        if (self.edge_lengths(nodes) <= 0.0).any():
            raise GeometryError("consecutive nodes must be distinct")
        if shoelace_area(nodes) <= 0.0:
            raise GeometryError("boundary must be counterclockwise (signed area > 0)")
        object.__setattr__(self, "nodes", nodes)

    @staticmethod
    def edge_lengths(nodes: FloatArray) -> FloatArray:
        d = np.roll(nodes, -1, axis=0) - nodes
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacings(self) -> FloatArray:
        return self.edge_lengths(self.nodes)

    @property
    def perimeter(self) -> float:
        return float(self.spacings.sum())


def shoelace_area(nodes: FloatArray) -> float:
    """Signed polygon area; positive for counterclockwise node order."""
    x, y = nodes[:, 0], nodes[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y1 - x1 * y))


def signed_area(b: PatchBoundary) -> float:
    return shoelace_area(b.nodes)


def reverse(b: PatchBoundary) -> FloatArray:
    """Node array with reversed orientation (not a valid PatchBoundary)."""
    return b.nodes[::-1].copy()


def rotate(b: PatchBoundary, angle: float) -> PatchBoundary:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return PatchBoundary(b.nodes @ rot.T)


def make_disk(r: float, n: int) -> PatchBoundary:
    """Regular n-gon inscribed in the circle of radius r, counterclockwise."""
    if not (r > 0.0):
        raise GeometryError(f"radius must be positive, got {r}")
    if n < MIN_NODES:
        raise GeometryError(f"node count must be >= {MIN_NODES}, got {n}")
    theta = 2.0 * np.pi * np.arange(n) / n
    return PatchBoundary(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))


def make_ellipse(a: float, b: float, n: int) -> PatchBoundary:
    """Ellipse boundary sampled at equispaced parameter angles."""
    if not (a > 0.0 and b > 0.0):
        raise GeometryError(f"semi-axes must be positive, got ({a}, {b})")
    if n < MIN_NODES:
        raise GeometryError(f"node count must be >= {MIN_NODES}, got {n}")
    theta = 2.0 * np.pi * np.arange(n) / n
    return PatchBoundary(np.column_stack([a * np.cos(theta), b * np.sin(theta)]))


def make_perturbed_disk(m: int, eta: float, n: int) -> PatchBoundary:
    """Boundary r(theta) = 1 + eta*cos(m*theta) at n equispaced angles."""
    if m < 2:
        raise GeometryError(f"perturbation mode must be >= 2, got {m}")
    if not abs(eta) < 0.5:
        raise GeometryError(f"perturbation amplitude must satisfy |eta| < 1/2, got {eta}")
    if n < MIN_NODES:
        raise GeometryError(f"node count must be >= {MIN_NODES}, got {n}")
    theta = 2.0 * np.pi * np.arange(n) / n
    r = 1.0 + eta * np.cos(m * theta)
    return PatchBoundary(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))


# ---------------------------------------------------------------------------
# point membership

_ON_BOUNDARY_TOL = 1e-12


@njit(cache=True)
def _contains_kernel(nodes, px, py, out):  # pragma: no cover - compiled
    n = nodes.shape[0]
    m = px.shape[0]
    for i in range(m):
        x = px[i]
        y = py[i]
        inside = False
        ax = nodes[n - 1, 0]
        ay = nodes[n - 1, 1]
        for k in range(n):
            bx = nodes[k, 0]
            by = nodes[k, 1]
            if (ay > y) != (by > y):
                xc = ax + (y - ay) * (bx - ax) / (by - ay)
                if x < xc:
                    inside = not inside
            ax = bx
            ay = by
        out[i] = inside


def contains_points(b: PatchBoundary, points: FloatArray) -> NDArray[np.bool_]:
    """Even-odd membership test for an array of points, shape (m, 2).

    Points exactly on the boundary resolve by the crossing rule; the scalar
    `contains` additionally treats on-boundary points as inside.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty(pts.shape[0], dtype=np.bool_)
    _contains_kernel(b.nodes, np.ascontiguousarray(pts[:, 0]),
                     np.ascontiguousarray(pts[:, 1]), out)
    return out


def _on_boundary(b: PatchBoundary, x: FloatArray, tol: float) -> bool:
    a = b.nodes
    c = np.roll(a, -1, axis=0)
    d = c - a
    w = x[None, :] - a
    L2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", w, d) / L2, 0.0, 1.0)
    near = w - t[:, None] * d
    dist2 = np.einsum("ij,ij->i", near, near)
    return bool(dist2.min() <= tol * tol)


def contains(b: PatchBoundary, x) -> bool:
    """Point-in-polygon; boundary points tie-break as inside."""
    x = np.asarray(x, dtype=np.float64)
    if _on_boundary(b, x, _ON_BOUNDARY_TOL):
        return True
    return bool(contains_points(b, x[None, :])[0])


# ---------------------------------------------------------------------------
# polygon vs origin-centered circle

def circle_polygon_intersection_area(b: PatchBoundary, r: float) -> float:
    """Exact area of the intersection of the polygon with the disk B_r.

    Sums, over directed edges (a, c), the signed area of triangle (0, a, c)
    clipped to the disk: straight sub-segments inside the circle contribute
    triangle areas, sub-segments outside contribute circular sectors.
    """
    a = b.nodes
    c = np.roll(a, -1, axis=0)
    d = c - a
    # quadratic |a + t d|^2 = r^2  ->  A t^2 + 2 B t + C = 0
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", a, d)
    C = np.einsum("ij,ij->i", a, a) - r * r
    disc = B * B - A * C
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = np.clip((-B - sq) / A, 0.0, 1.0)
    t2 = np.clip((-B + sq) / A, 0.0, 1.0)
    t1 = np.where(disc > 0.0, t1, 0.0)
    t2 = np.where(disc > 0.0, t2, 0.0)

    total = 0.0
    r2 = r * r
    for s0, s1 in ((np.zeros_like(t1), t1), (t1, t2), (t2, np.ones_like(t2))):
        keep = s1 > s0
        if not keep.any():
            continue
        p0 = a[keep] + s0[keep, None] * d[keep]
        p1 = a[keep] + s1[keep, None] * d[keep]
        mid = a[keep] + (0.5 * (s0[keep] + s1[keep]))[:, None] * d[keep]
        inside = np.einsum("ij,ij->i", mid, mid) < r2
        cross = p0[:, 0] * p1[:, 1] - p0[:, 1] * p1[:, 0]
        dot = np.einsum("ij,ij->i", p0, p1)
        tri = 0.5 * cross
        sector = 0.5 * r2 * np.arctan2(cross, dot)
        total += float(np.sum(np.where(inside, tri, sector)))
    return total


def symmetric_difference_area(
    b: PatchBoundary,
    d: DiskSpec,
    method: str = "clipping",
    samples: int = 200_000,
    seed: int = 0,
) -> float:
    """Area of the symmetric difference between the polygon and the disk.

    ``clipping`` is exact for the polygon; ``montecarlo`` is the independent
    quasi-random estimate (see `symmetric_difference_area_mc` for the error
    bar).
    """
    if method == "clipping":
        inter = circle_polygon_intersection_area(b, d.r)
        return abs(signed_area(b) + d.area - 2.0 * inter)
    if method == "montecarlo":
        return symmetric_difference_area_mc(b, d, samples, seed)[0]
    raise GeometryError(f"unknown symmetric-difference method: {method!r}")


def symmetric_difference_area_mc(
    b: PatchBoundary, d: DiskSpec, samples: int, seed: int = 0
) -> tuple[float, float]:
    """Quasi-Monte Carlo symmetric difference area and its standard error.

    Samples a low-discrepancy point set on the bounding box of both sets and
    averages the xor of the two indicators.  The reported error is the
    binomial standard error; the Halton bias is typically far smaller.
    """
    from scipy.stats import qmc

    lo = np.minimum(b.nodes.min(axis=0), -d.r)
    hi = np.maximum(b.nodes.max(axis=0), d.r)
    box = float(np.prod(hi - lo))
    pts = qmc.Halton(2, seed=seed).random(samples) * (hi - lo) + lo
    in_poly = contains_points(b, pts)
    in_disk = np.einsum("ij,ij->i", pts, pts) < d.r * d.r
    hits = in_poly ^ in_disk
    p = float(hits.mean())
    stderr = box * math.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples)
    return box * p, stderr


# ---------------------------------------------------------------------------
# grid occupancy (scanline), used by the area-quadrature velocity oracle

def grid_occupancy(b: PatchBoundary, xs: FloatArray, ys: FloatArray) -> NDArray[np.bool_]:
    """Boolean mask, shape (len(ys), len(xs)): which grid points lie inside.

    Scanline variant of the even-odd rule: exact for points not on an edge,
    O(rows * edges) instead of O(points * edges).
    """
    a = b.nodes
    c = np.roll(a, -1, axis=0)
    mask = np.zeros((ys.size, xs.size), dtype=bool)
    for j, y in enumerate(ys):
        hit = (a[:, 1] > y) != (c[:, 1] > y)
        if not hit.any():
            continue
        ah, ch = a[hit], c[hit]
        xc = np.sort(ah[:, 0] + (y - ah[:, 1]) * (ch[:, 0] - ah[:, 0]) / (ch[:, 1] - ah[:, 1]))
        idx = np.searchsorted(xc, xs, side="right")
        mask[j] = (idx % 2) == 1
    return mask


def conserved_moments(b: PatchBoundary) -> tuple[float, FloatArray, float]:
    """(area, centroid, angular impulse) of the polygon by shoelace formulas.

    Angular impulse is the second moment about the origin, int_Omega |x|^2 dx.
    """
    v = b.nodes
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    area = 0.5 * float(cross.sum())
    centroid = np.asarray((v + w).T @ cross / (6.0 * area))
    sq = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", v, w) + np.einsum("ij,ij->i", w, w)
    impulse = float(np.sum(cross * sq)) / 12.0
    return area, centroid, impulse
