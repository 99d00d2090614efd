"""Contour dynamics for 2D Euler vortex patches with winding-number diagnostics."""

from patchwind.geometry import (
    DiskSpec,
    PatchBoundary,
    make_disk,
    make_ellipse,
    make_perturbed_disk,
    signed_area,
    symmetric_difference_area,
)
from patchwind.velocity import (
    area_quadrature_velocity,
    contour_velocity,
    decompose_polar,
    exact_disk_velocity,
    velocity_deviation_from_disk,
)

__all__ = [
    "DiskSpec",
    "PatchBoundary",
    "make_disk",
    "make_ellipse",
    "make_perturbed_disk",
    "signed_area",
    "symmetric_difference_area",
    "exact_disk_velocity",
    "contour_velocity",
    "area_quadrature_velocity",
    "decompose_polar",
    "velocity_deviation_from_disk",
]

__version__ = "0.1.0"
