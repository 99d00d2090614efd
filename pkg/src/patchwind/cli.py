"""Command-line front end: single runs, amplitude sweeps, and verification.

`patchwind run cfg` executes one experiment and writes report.json plus the
snapshot/series/tracer CSVs.  `patchwind sweep cfg --deltas ...` repeats the
run across perturbation amplitudes and emits the combined scaling verdicts.
`patchwind verify` is the built-in oracle cross-check battery.

All outputs are written atomically (temp file + rename) and only after the
producing computation has fully succeeded, so failures leave no partial
files.  PATCHWIND_THREADS caps the number of sweep worker processes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from patchwind import diagnostics as dg
from patchwind import dynamics, tracers, velocity
from patchwind.config import ConfigError, ShapeSpec, SimConfig, parse_config, serialize_config
from patchwind.geometry import make_disk, make_ellipse

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _snapshot_rows(snapshots) -> list[str]:
    rows = ["t,kind,id,x,y"]
    for state, _ in snapshots:
        t = f"{state.t:.17g}"
        for i, (x, y) in enumerate(state.nodes):
            rows.append(f"{t},node,{i},{x:.17g},{y:.17g}")
        if state.tracer_x is not None:
            for i, (x, y) in enumerate(state.tracer_x):
                rows.append(f"{t},tracer,{i},{x:.17g},{y:.17g}")
    return rows


class _Snapshot:
    """Frozen copy of the pieces of a SimState that outlive the run loop."""

    __slots__ = ("t", "nodes", "tracer_x")

    def __init__(self, state: dynamics.SimState):
        self.t = state.t
        self.nodes = state.boundary.nodes.copy()
        self.tracer_x = None if state.tracers is None else state.tracers.x.copy()


def execute(cfg: SimConfig) -> tuple[dg.TheoremReport, dict[str, str]]:
    """Run one experiment and render every output artifact as text.

    Returns the report and a {filename: contents} map; nothing touches the
    filesystem, which is what makes write-after-success and byte-identical
    determinism easy to guarantee.
    """
    snapshots: list[tuple[_Snapshot, dg.DiagnosticsRecord]] = []
    final_tracers: tracers.TracerSet | None = None
    for state, rec in dynamics.run(cfg):
        snapshots.append((_Snapshot(state), rec))
        final_tracers = state.tracers
    records = [r for _, r in snapshots]
    report = dg.assemble_report(records, final_tracers, snapshots[-1][0].t)

    files = {
        "config.txt": serialize_config(cfg),
        "report.json": json.dumps(report.json_dict(), indent=2) + "\n",
        "series.csv": "\n".join([dg.SERIES_HEADER]
                                + [dg.series_row(r) for r in records]) + "\n",
        "snapshots.csv": "\n".join(_snapshot_rows(snapshots)) + "\n",
    }
    if final_tracers is not None and snapshots[-1][0].t > 0.0:
        rows = dg.tracer_report_rows(final_tracers, snapshots[-1][0].t,
                                     records[0].disk_limit)
        files["tracers.csv"] = "\n".join(rows) + "\n"
    return report, files


def _emit(out_dir: Path, files: dict[str, str]) -> None:
    for name, text in files.items():
        _write_atomic(out_dir / name, text)


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args.config, args.set or [])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, files = execute(cfg)
    except dynamics.DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(Path(cfg.output_dir), files)
    j = report.json_dict()
    print(f"delta = {j['delta']:.6g}  epsilon = {j['epsilon']:.6g}  T = {j['T']:g}")
    if j["good_set_fraction"] is not None:
        print(f"good_set_fraction = {j['good_set_fraction']:.4f}  "
              f"dev_q90 = {j['dev_q90']:.6g}  flagged = {j['flagged']}")
    print(f"wrote {cfg.output_dir}/report.json")
    return EXIT_OK


def _load_config(path: str, overrides: list[str]) -> SimConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config(p.read_text())
    if overrides:
        text = "\n".join(overrides)
        merged = dict(_cfg_pairs(serialize_config(cfg)))
        merged.update(_cfg_pairs(text))
        cfg = parse_config("\n".join(f"{k} = {v}" for k, v in merged.items()))
    return cfg


def _cfg_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"override must be key=value, got {line!r}")
        k, _, v = line.partition("=")
        pairs.append((k.strip(), v.strip()))
    return pairs


def _sweep_point(payload: tuple[str, float]) -> tuple[float, dict, dict[str, str]]:
    cfg_text, eta = payload
    cfg = parse_config(cfg_text)
    shape = ShapeSpec.parse("disk(1.0)" if eta == 0.0 else f"perturbed(2,{eta!r})")
    cfg = cfg.with_overrides(initial_shape=shape,
                             output_dir=str(Path(cfg.output_dir) / f"eta_{eta:g}"))
    report, files = execute(cfg)
    _emit(Path(cfg.output_dir), files)
    return eta, report.json_dict(), {"dir": cfg.output_dir}


def cmd_sweep(args) -> int:
    try:
        cfg = _load_config(args.config, args.set or [])
        etas = [float(s) for s in args.deltas]
        if len(etas) < 2:
            raise ConfigError("a sweep needs at least 2 amplitude points")
        if any(e < 0.0 for e in etas):
            raise ConfigError("sweep amplitudes must be >= 0")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    workers = int(os.environ.get("PATCHWIND_THREADS", "0") or 0)
    if workers <= 0:
        workers = min(len(etas), os.cpu_count() or 1)
    payloads = [(serialize_config(cfg), e) for e in etas]
    try:
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_point, payloads))
        else:
            results = [_sweep_point(p) for p in payloads]
    except dynamics.DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    results.sort(key=lambda r: r[1]["delta"])
    deltas = [r[1]["delta"] for r in results]
    degenerate = all(d < cfg.delta_zero_tol for d in deltas)
    if degenerate:
        verdicts = {"verdict": "degenerate: all deviations ≈ 0"}
    else:
        q90 = [r[1]["dev_q90"] for r in results]
        gsf = [r[1]["good_set_fraction"] for r in results]
        verdicts = {
            "delta_strictly_increasing": all(a < b for a, b in zip(deltas, deltas[1:])),
            "dev_q90_strictly_increasing_with_delta":
                all(v is not None for v in q90)
                and all(a < b for a, b in zip(q90, q90[1:])),
            "good_set_fraction_at_smallest_delta": gsf[0],
            "c_sqrt_delta_max": max(r[1]["c_sqrt_delta"] for r in results),
            "c_quarter_max": max(r[1]["c_quarter"] for r in results),
            "c_twelfth_max": max(r[1]["c_twelfth"] for r in results),
            "sv_max_ratio": max(r[1]["sv_max_ratio"] for r in results),
        }
    combined = {
        "points": [{"eta": eta, "output_dir": meta["dir"], **rep}
                   for eta, rep, meta in results],
        "verdicts": verdicts,
    }
    out = Path(cfg.output_dir) / "sweep.json"
    _write_atomic(out, json.dumps(combined, indent=2) + "\n")
    print(json.dumps(verdicts, indent=2))
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification battery

class CheckFailure(RuntimeError):
    pass


def _check_disk_rotation(fast: bool) -> dict:
    """The sign convention: a counterclockwise patch rotates tracers
    counterclockwise.  This is the check the kernel sign-flip hook trips."""
    b = make_disk(1.0, 256 if fast else 1024)
    u = velocity.contour_velocity(b, np.array([0.5, 0.0]))
    if not u[1] > 0.0:
        raise CheckFailure(f"disk does not rotate counterclockwise (u_y = {u[1]:.3g})")
    err = abs(u[1] - 0.25) + abs(u[0])
    tol = 2e-4 if fast else 2e-5
    if err > tol:
        raise CheckFailure(f"disk interior speed off by {err:.3g} (tol {tol:g})")
    return {"disk_speed_error": err, "tol": tol}


def _check_exact_disk(fast: bool) -> dict:
    pts = np.array([[0.3, 0.4], [-1.2, 0.9], [0.0, 0.0]])
    u = velocity.exact_disk_velocity(pts, 1.0)
    want = np.array([[-0.2, 0.15],
                     [-0.9 / (2 * 2.25), -1.2 / (2 * 2.25)], [0.0, 0.0]])
    err = float(np.abs(u - want).max())
    if err > 1e-14:
        raise CheckFailure(f"closed-form disk field error {err:.3g}")
    return {"exact_disk_error": err, "tol": 1e-14}


def _check_oracle(fast: bool) -> dict:
    res = 256 if fast else 1024
    tol = 2e-2 if fast else 5e-3
    worst = 0.0
    b = make_ellipse(1.05, 1.0 / 1.05, 256 if fast else 1024)
    for p in ([0.4, 0.2], [1.6, -0.3], [-0.7, 0.9]):
        u_c = velocity.contour_velocity(b, np.array(p))
        u_o, bound = velocity.area_quadrature_velocity(b, np.array(p), res)
        worst = max(worst, float(np.hypot(*(u_c - u_o))) - bound)
    if worst > tol:
        raise CheckFailure(f"contour vs area-quadrature gap {worst:.3g} (tol {tol:g})")
    return {"oracle_excess_gap": worst, "tol": tol}


def _theorem_smoke_cfg(fast: bool) -> SimConfig:
    return SimConfig(
        initial_shape=ShapeSpec.parse("perturbed(2,0.05)"),
        nodes=256 if fast else 512,
        tracers=64, dt=0.02, t_end=1.0 if fast else 4.0,
        snapshot_dt=0.5, epsilon_override=0.2,
    ).validate()


def _check_theorem_run(fast: bool) -> dict:
    cfg = _theorem_smoke_cfg(fast)
    out = list(dynamics.run(cfg))
    records = [r for _, r in out]
    state = out[-1][0]
    ok, ratio = dg.check_sv_inequality(records, records[0].sv_rhs)
    if not ok:
        raise CheckFailure(f"stability inequality ratio {ratio:.3g} > 1.05")
    a0, aT = records[0].area, records[-1].area
    drift = abs(aT - a0) / a0
    tol = 1e-4 * cfg.t_end
    if drift > tol:
        raise CheckFailure(f"area drift {drift:.3g} (tol {tol:g})")
    ts = state.tracers
    gap = float(np.abs(2 * math.pi * ts.N - ts.delta_theta)[~ts.flagged].max())
    wtol = 1e-3 * (1 + cfg.t_end)
    if gap > wtol:
        raise CheckFailure(f"winding vs unwrapped angle gap {gap:.3g} (tol {wtol:g})")
    return {"sv_ratio": ratio, "area_drift": drift, "winding_gap": gap,
            "tol": max(tol, wtol)}


_CHECKS = [
    ("disk-rotation", _check_disk_rotation),
    ("exact-disk-identities", _check_exact_disk),
    ("oracle-cross-check", _check_oracle),
    ("theorem-smoke-run", _check_theorem_run),
]


def cmd_verify(args) -> int:
    fast = bool(args.fast)
    print(f"verification battery ({'fast' if fast else 'full'} tolerances)")
    constants: list[tuple[str, str, float]] = []
    for name, fn in _CHECKS:
        try:
            result = fn(fast)
        except CheckFailure as exc:
            print(f"FAIL {name}: {exc}")
            return 1
        tol = result.pop("tol", float("nan"))
        for k, v in result.items():
            constants.append((name, k, v))
        print(f"ok   {name} (tol {tol:g})")
    width = max(len(f"{n}/{k}") for n, k, _ in constants)
    print("\nempirical constants:")
    for n, k, v in constants:
        print(f"  {f'{n}/{k}':<{width}}  {v:.6g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="patchwind",
        description="vortex-patch contour dynamics with tracer winding diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run across perturbation amplitudes")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--deltas", nargs="+", required=True, metavar="ETA",
                         help="perturbation amplitudes (0 means the exact disk)")
    p_sweep.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="built-in oracle cross-checks")
    p_verify.add_argument("--fast", action="store_true",
                          help="smaller resolutions, widened tolerances")
    p_verify.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
