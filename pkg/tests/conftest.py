"""Shared fixtures and independent analytic oracles for the test suite.

The indicator-function oracles here deliberately avoid the package's own
polygon clipping so that Monte Carlo cross-checks are independent of the
code under test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import qmc


def disk_indicator(pts: np.ndarray, r: float = 1.0) -> np.ndarray:
    return np.hypot(pts[:, 0], pts[:, 1]) < r


def ellipse_indicator(pts: np.ndarray, a: float, b: float) -> np.ndarray:
    return (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 < 1.0


def perturbed_indicator(pts: np.ndarray, m: int, eta: float) -> np.ndarray:
    rho = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    return rho < 1.0 + eta * np.cos(m * th)


def mc_area(indicator, box_lo, box_hi, n: int = 200_000, seed: int = 42):
    """Quasi-random area of {indicator} inside a box, with a stderr estimate."""
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    pts = qmc.Halton(2, seed=seed).random(n) * (hi - lo) + lo
    inside = indicator(pts)
    box = float(np.prod(hi - lo))
    p = inside.mean()
    # Halton beats the iid rate; the iid stderr is a safe (loose) bound
    return box * p, box * math.sqrt(max(p * (1 - p), 1e-12) / n)


def mc_symmetric_difference(ind_a, ind_b, box_lo, box_hi, n: int = 200_000,
                            seed: int = 42):
    return mc_area(lambda p: ind_a(p) ^ ind_b(p), box_lo, box_hi, n, seed)


@pytest.fixture(scope="session")
def probe_radii():
    """The fixed 17-point radial probe set used by convergence checks."""
    return np.array([0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85,
                     1.05, 1.15, 1.3, 1.5, 1.8, 2.2, 2.6, 3.0])
