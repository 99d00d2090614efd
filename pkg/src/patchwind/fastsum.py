"""Fast direct summation backend for the contour-dynamics boundary integral.

The hot loop (every RK4 stage touches every target x segment pair) lives in a
small C kernel compiled on first use with the system compiler; a numba kernel
with identical semantics is the fallback when no compiler is available.  Set
PATCHWIND_NO_CKERNEL=1 to force the fallback.
"""

from __future__ import annotations

import ctypes
import hashlib
import math
import os
import subprocess
import tempfile
from pathlib import Path

import numpy as np
from numba import njit

_KERNEL_SRC = Path(__file__).with_name("_kernel.c")
_lib = None
_backend = "unbuilt"


# fast-math only at the *compile* step.  Linking with -ffast-math would pull
# in crtfastmath.o, whose constructor silently flips the whole process into
# flush-to-zero mode the moment ctypes loads the library.
_COMPILE_FLAGS = ["-O3", "-march=native", "-ffast-math", "-funroll-loops", "-fPIC"]


def _build_ckernel() -> ctypes.CDLL | None:
    src = _KERNEL_SRC.read_text()
    tag = hashlib.sha256((src + " ".join(_COMPILE_FLAGS)).encode()).hexdigest()[:16]
    cache = Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "patchwind"
    sofile = cache / f"kernel_{tag}.so"
    if not sofile.exists():
        cache.mkdir(parents=True, exist_ok=True)
        for cc in (os.environ.get("CC"), "cc", "gcc", "clang"):
            if not cc:
                continue
            with tempfile.NamedTemporaryFile(suffix=".so", dir=cache, delete=False) as tmp:
                tmppath = Path(tmp.name)
            obj = tmppath.with_suffix(".o")
            compile_cmd = [cc, *_COMPILE_FLAGS, "-c", str(_KERNEL_SRC), "-o", str(obj)]
            link_cmd = [cc, "-shared", "-o", str(tmppath), str(obj), "-lm"]
            try:
                subprocess.run(compile_cmd, check=True, capture_output=True, timeout=120)
                subprocess.run(link_cmd, check=True, capture_output=True, timeout=120)
            except (OSError, subprocess.SubprocessError):
                tmppath.unlink(missing_ok=True)
                obj.unlink(missing_ok=True)
                continue
            obj.unlink(missing_ok=True)
            tmppath.replace(sofile)
            break
        else:
            return None
    try:
        lib = ctypes.CDLL(str(sofile))
    except OSError:
        return None
    lib.log_layer_sum.argtypes = [ctypes.c_long, ctypes.c_long] + \
        [ctypes.POINTER(ctypes.c_double)] * 8
    lib.log_layer_sum.restype = None
    return lib


@njit(cache=True, fastmath=True)
def _log_layer_sum_numba(tx, ty, mx, my, dx, dy, out, minr2):  # pragma: no cover
    m = tx.shape[0]
    n = mx.shape[0]
    for i in range(m):
        sx = 0.0
        sy = 0.0
        px = tx[i]
        py = ty[i]
        mr = 1e300
        for k in range(n):
            ax = px - mx[k]
            ay = py - my[k]
            r2 = ax * ax + ay * ay
            if r2 < mr:
                mr = r2
            if r2 < 1e-300:
                r2 = 1e-300
            L = math.log(r2)
            sx += L * dx[k]
            sy += L * dy[k]
        out[2 * i] = sx
        out[2 * i + 1] = sy
        minr2[i] = mr


def backend() -> str:
    """Which summation backend is active: 'c', 'numba', or 'unbuilt'."""
    return _backend


def log_layer_sum(targets, midpoints, seg_vectors):
    """S_i = sum_k log(|x_i - m_k|^2) * d_k and min_k |x_i - m_k|^2.

    Returns (sums, minr2) with sums of shape (m, 2).  Accurate to roughly
    1e-7 in each log term (single-precision log); callers repair near-field
    pairs where the midpoint rule itself is the larger error.
    """
    global _lib, _backend
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    m = targets.shape[0]
    n = midpoints.shape[0]
    tx = np.ascontiguousarray(targets[:, 0])
    ty = np.ascontiguousarray(targets[:, 1])
    mx = np.ascontiguousarray(midpoints[:, 0])
    my = np.ascontiguousarray(midpoints[:, 1])
    dx = np.ascontiguousarray(seg_vectors[:, 0])
    dy = np.ascontiguousarray(seg_vectors[:, 1])
    out = np.empty(2 * m)
    minr2 = np.empty(m)
    if _backend == "unbuilt":
        _lib = None if os.environ.get("PATCHWIND_NO_CKERNEL") else _build_ckernel()
        _backend = "c" if _lib is not None else "numba"
    if _lib is not None:
        ptr = lambda a: a.ctypes.data_as(ctypes.POINTER(ctypes.c_double))  # noqa: E731
        _lib.log_layer_sum(m, n, ptr(tx), ptr(ty), ptr(mx), ptr(my),
                           ptr(dx), ptr(dy), ptr(out), ptr(minr2))
    else:
        _log_layer_sum_numba(tx, ty, mx, my, dx, dy, out, minr2)
    return out.reshape(m, 2), minr2
