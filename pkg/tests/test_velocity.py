import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchwind import fastsum
from patchwind import velocity as vel
from patchwind.geometry import (
    GeometryError,
    make_disk,
    make_ellipse,
    make_perturbed_disk,
    signed_area,
)


class TestExactDisk:
    def test_interior_rigid_rotation(self):
        u = vel.exact_disk_velocity(np.array([0.3, -0.4]))
        assert u == pytest.approx([0.2, 0.15], abs=1e-15)

    def test_exterior_point_vortex(self):
        x = np.array([2.0, 0.0])
        u = vel.exact_disk_velocity(x, 1.0)
        assert u == pytest.approx([0.0, 1.0 / 4.0], abs=1e-15)

    def test_origin_is_stagnant(self):
        assert np.all(vel.exact_disk_velocity(np.zeros(2)) == 0.0)

    def test_continuity_across_boundary(self):
        inner = vel.exact_disk_velocity(np.array([1.0 - 1e-12, 0.0]))
        outer = vel.exact_disk_velocity(np.array([1.0 + 1e-12, 0.0]))
        assert np.abs(inner - outer).max() < 1e-11

    def test_radius_scaling(self):
        u = vel.exact_disk_velocity(np.array([3.0, 0.0]), 2.0)
        assert u[1] == pytest.approx(4.0 / (2 * 3.0), rel=1e-15)


class TestPolar:
    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3),
           st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip(self, x, y, ux, uy):
        pos = np.array([x, y])
        if math.hypot(x, y) < 1e-6:
            return
        u = np.array([ux, uy])
        pv = vel.decompose_polar(pos, u)
        back = vel.polar_reconstruct(pos, pv)
        scale = max(1.0, np.abs(u).max())
        assert np.abs(back - u).max() <= 4 * np.finfo(float).eps * scale

    def test_origin_raises(self):
        with pytest.raises(vel.OriginSingularityError):
            vel.decompose_polar(np.zeros(2), np.ones(2))

    def test_pure_rotation_has_no_radial_part(self):
        x = np.array([0.6, 0.8])
        pv = vel.decompose_polar(x, vel.perp(x) * 0.5)
        assert pv.u_rad == pytest.approx(0.0, abs=1e-15)
        assert pv.u_tan == pytest.approx(0.5, rel=1e-14)


class TestContourVelocity:
    def test_matches_exact_disk(self, probe_radii):
        b = make_disk(1.0, 1024)
        pts = np.column_stack([probe_radii, np.zeros_like(probe_radii)])
        err = np.abs(vel.contour_velocity(b, pts)
                     - vel.exact_disk_velocity(pts)).max()
        assert err < 2e-5

    def test_convergence_order(self, probe_radii):
        pts = np.column_stack([probe_radii, np.zeros_like(probe_radii)])
        errs = []
        for n in (256, 512):
            b = make_disk(1.0, n)
            errs.append(np.abs(vel.contour_velocity(b, pts)
                               - vel.exact_disk_velocity(pts)).max())
        assert errs[0] / errs[1] >= 3.5

    @pytest.mark.parametrize("maker", [
        lambda: make_disk(1.0, 512),
        lambda: make_perturbed_disk(3, 0.1, 513),
        lambda: make_ellipse(1.2, 1.0 / 1.2, 512),
    ])
    def test_symmetric_patch_fixes_origin(self, maker):
        b = maker()
        assert np.hypot(*vel.contour_velocity(b, np.zeros(2))) <= 1e-6

    def test_valid_on_boundary_itself(self):
        b = make_disk(1.0, 2048)
        u = vel.contour_velocity(b, b.nodes[17])
        want = vel.exact_disk_velocity(b.nodes[17])
        assert np.abs(u - want).max() < 1e-4

    def test_sup_bound_interpolation_inequality(self):
        # max |u| <= C sqrt(|Omega|); the kernel's constant is 2/sqrt(pi)
        xs = np.linspace(-3.0, 3.0, 64)
        X, Y = np.meshgrid(xs, xs)
        grid = np.column_stack([X.ravel(), Y.ravel()])
        worst = 0.0
        for b in (make_disk(1.0, 256), make_ellipse(1.5, 0.5, 256),
                  make_perturbed_disk(2, 0.2, 256), make_disk(0.3, 256)):
            speed = np.hypot(*vel.contour_velocity(b, grid).T).max()
            worst = max(worst, speed / math.sqrt(signed_area(b)))
        assert worst < 1.2

    def test_sign_flip_breaks_rotation(self, monkeypatch):
        monkeypatch.setattr(vel, "_KERNEL_SIGN", 1.0)
        u = vel.contour_velocity(make_disk(1.0, 256), np.array([0.5, 0.0]))
        assert u[1] < 0.0  # the verify battery catches exactly this


class TestFastPath:
    def test_nodes_match_exact_disk(self):
        b = make_disk(1.0, 1024)
        u, _ = vel.boundary_and_tracer_velocity(b)
        # polygon-vs-circle discretization dominates at the nodes
        err = np.abs(u - vel.exact_disk_velocity(b.nodes)).max()
        assert err < 5e-5

    def test_tracers_match_slow_path(self):
        b = make_perturbed_disk(2, 0.05, 512)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.9, 0.9, size=(200, 2))
        pts = np.vstack([pts, [[0.99, 0.0], [1.01, 0.0], [0.0, 1.04]]])
        _, u_fast = vel.boundary_and_tracer_velocity(b, pts)
        u_slow = vel.contour_velocity(b, pts)
        # midpoint-rule tail just outside the exact-repair cutoff dominates
        assert np.abs(u_fast - u_slow).max() < 2e-5

    def test_backend_fallback_agrees(self, monkeypatch):
        b = make_perturbed_disk(3, 0.08, 256)
        pts = np.array([[0.4, 0.1], [0.0, 0.8], [1.5, -0.2]])
        _, u1 = vel.boundary_and_tracer_velocity(b, pts)
        monkeypatch.setenv("PATCHWIND_NO_CKERNEL", "1")
        monkeypatch.setattr(fastsum, "_backend", "unbuilt")
        monkeypatch.setattr(fastsum, "_lib", None)
        _, u2 = vel.boundary_and_tracer_velocity(b, pts)
        assert fastsum.backend() == "numba"
        assert np.abs(u1 - u2).max() < 1e-7


class TestAreaQuadratureOracle:
    def test_matches_exact_disk(self):
        b = make_disk(1.0, 1024)
        for p in ([0.5, 0.0], [0.0, -0.7], [1.5, 0.4]):
            u, bound = vel.area_quadrature_velocity(b, np.array(p), 512)
            err = np.abs(u - vel.exact_disk_velocity(np.array(p))).max()
            assert err < max(5e-3, bound)

    def test_resolution_floor(self):
        with pytest.raises(GeometryError):
            vel.AreaQuadratureEvaluator(make_disk(1.0, 64), 32)

    def test_evaluator_is_pure(self):
        ev = vel.AreaQuadratureEvaluator(make_disk(1.0, 256), 128)
        before = ev.cells.copy()
        ev.velocity(np.array([0.3, 0.3]))
        ev.velocity(np.array([-1.2, 0.1]))
        assert np.array_equal(ev.cells, before)
