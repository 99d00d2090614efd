import json
import math

import numpy as np
import pytest

from patchwind import diagnostics as dg
from patchwind import dynamics, tracers as tr
from patchwind.config import ShapeSpec, SimConfig
from patchwind.geometry import PatchBoundary, make_disk, make_ellipse, make_perturbed_disk


def rec(**kw):
    base = dict(t=0.0, area=math.pi, centroid=(0.0, 0.0), angular_impulse=math.pi / 2,
                sym_diff_vs_D=0.0, vel_dev_max=0.0, sv_rhs=0.0, delta=0.0,
                epsilon=0.5, disk_limit=True)
    base.update(kw)
    return dg.DiagnosticsRecord(**base)


class TestSiderisVegaRhs:
    def test_perturbed_disk_value(self):
        # sup | |x|^2 - 1 | over the symmetric difference is (1+eta)^2 - 1,
        # attained on the outer bulge; delta = 4 eta
        eta = 0.05
        b = make_perturbed_disk(2, eta, 4096)
        rhs = dg.sideris_vega_rhs(b, 1.0)
        want = 4 * math.pi * ((1 + eta) ** 2 - 1) * (4 * eta)
        assert rhs == pytest.approx(want, rel=5e-3)

    def test_origin_outside_patch(self):
        # patch disjoint from B_1: delta is the sum of both areas, the sup is
        # attained at the farthest patch vertex, (2.3)^2 - 1
        b = PatchBoundary(make_disk(0.3, 256).nodes + [2.0, 0.0])
        rhs = dg.sideris_vega_rhs(b, 1.0)
        delta = math.pi * (1.0 + 0.3**2)
        sup = 2.3**2 - 1.0
        assert rhs == pytest.approx(4 * math.pi * sup * delta, rel=1e-2)

    def test_disk_is_degenerate(self):
        b = make_disk(1.0, 4096)
        assert dg.sideris_vega_rhs(b, 1.0) >= 0.0
        # tiny polygon delta -> tiny rhs
        assert dg.sideris_vega_rhs(b, 1.0) < 1e-4


class TestCheckSv:
    def test_ok_and_ratio(self):
        records = [rec(sym_diff_vs_D=0.1, sv_rhs=0.04),
                   rec(t=1.0, sym_diff_vs_D=0.15, sv_rhs=0.04)]
        ok, ratio = dg.check_sv_inequality(records, 0.04)
        assert ok is False or ratio <= 1.05
        assert ratio == pytest.approx(0.15**2 / 0.04)

    def test_zero_rhs_with_drift_raises(self):
        with pytest.raises(dg.InconsistencyError):
            dg.check_sv_inequality([rec(sym_diff_vs_D=0.5)], 0.0)

    def test_zero_rhs_clean(self):
        ok, ratio = dg.check_sv_inequality([rec(sym_diff_vs_D=1e-5)], 0.0)
        assert ok and ratio == 0.0

    def test_empty_raises(self):
        with pytest.raises(dg.InconsistencyError):
            dg.check_sv_inequality([], 1.0)


class TestProbes:
    def test_deterministic_and_banded(self):
        a = dg.deviation_probes(64)
        b = dg.deviation_probes(64)
        assert np.array_equal(a, b)
        assert a.shape == (64, 2)
        rho = np.hypot(a[:, 0], a[:, 1])
        assert (np.abs(rho - 1.0) > 0.05).all()
        assert (np.abs(a) <= 1.5).all()


REPORT_KEYS = ["delta", "epsilon", "T", "good_set_fraction", "dev_q50",
               "dev_q90", "dev_q99", "c_sqrt_delta", "c_quarter",
               "c_twelfth", "sv_max_ratio", "flagged"]


class TestReport:
    def run_report(self, shape="disk(1.0)", **kw):
        base = dict(initial_shape=ShapeSpec.parse(shape), nodes=256, tracers=32,
                    dt=0.02, t_end=0.2, snapshot_dt=0.1)
        base.update(kw)
        out = list(dynamics.run(SimConfig(**base)))
        records = [r for _, r in out]
        return dg.assemble_report(records, out[-1][0].tracers, out[-1][0].t)

    def test_json_keys_exact(self):
        rep = self.run_report()
        assert list(rep.json_dict().keys()) == REPORT_KEYS
        json.dumps(rep.json_dict())  # serializable

    def test_disk_limit_zeroes_constants(self):
        rep = self.run_report(nodes=2048)
        assert rep.records[0].disk_limit
        assert rep.c_sqrt_delta == rep.c_quarter == rep.c_twelfth == 0.0
        assert rep.good_set_fraction == 1.0

    def test_perturbed_constants_positive(self):
        rep = self.run_report("perturbed(2,0.05)", epsilon_override=0.2)
        assert rep.delta == pytest.approx(0.2, rel=1e-2)
        assert rep.c_sqrt_delta > 0
        assert rep.c_quarter > 0
        assert rep.sv_ok

    def test_no_tracers(self):
        base = dict(initial_shape=ShapeSpec.parse("disk(1.0)"), nodes=256,
                    tracers=0, dt=0.02, t_end=0.1, snapshot_dt=0.1)
        out = list(dynamics.run(SimConfig(**base)))
        rep = dg.assemble_report([r for _, r in out], None, 0.1)
        assert rep.good_set_fraction is None
        assert rep.json_dict()["dev_q90"] is None


class TestCsv:
    def test_series_row_matches_header(self):
        r = rec(t=1.5, area=3.1)
        cols = dg.series_row(r).split(",")
        assert len(cols) == len(dg.SERIES_HEADER.split(","))
        assert float(cols[0]) == 1.5

    def test_tracer_rows_format(self):
        led = tr.OccupancyLedger(0.25)
        ts = tr.TracerSet(np.array([[0.3, 0.0], [0.7, 0.1]]), led)
        x0 = ts.x
        u = 0.5 * np.column_stack([-x0[:, 1], x0[:, 0]])
        for _ in range(10):
            tr.accumulate(ts, np.stack([ts.x] * 4), np.stack([u] * 4),
                          ts.x + 0.01 * u, 0.01)
        rows = dg.tracer_report_rows(ts, ts.ledger.elapsed, disk_limit=True)
        header = rows[0].split(",")
        assert header[:9] == ["id", "x0x", "x0y", "N_over_T", "dev", "d_total",
                              "good_set", "flagged", "G_minus1"]
        assert header[9] == "G_0"
        assert header[-1] == f"G_{led.i_max}"
        assert len(rows) == 3
        assert all(len(r.split(",")) == len(header) for r in rows[1:])


def test_conserved_quantities_wrapper():
    q = dg.conserved_quantities(make_ellipse(2.0, 1.0, 2048))
    assert q["area"] == pytest.approx(2 * math.pi, rel=1e-5)
    assert q["angular_impulse"] == pytest.approx(2.5 * math.pi, rel=1e-5)
