"""Biot-Savart hot loops: numba kernels plus a vectorised numpy fallback.

Both paths use the same closed form for a straight segment a->b carrying I,
with r1 = P - a and r2 = P - b:

    B = mu0 I / 4pi * (r1 x r2) (|r1| + |r2|) / (|r1||r2| (|r1||r2| + r1.r2))

which stays finite on the axis extension beyond the segment and is singular
only on the segment itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._accel import njit, use_numba
from .constants import MU0

_K = MU0 / (4.0 * math.pi)
CHUNK = 1 << 18


def _segment_distance_np(a, b, pts):
    ab = b - a
    t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
    d = pts - (a + t[:, None] * ab)
    return np.sqrt((d * d).sum(axis=1))


def field_numpy(starts, ends, currents, pts, reg):
    """Total field (N,3) at ``pts`` and a boolean mask of singular points."""
    pts = np.ascontiguousarray(pts, dtype=float)
    out = np.zeros_like(pts)
    singular = np.zeros(len(pts), dtype=bool)
    for a, b, cur in zip(starts, ends, currents):
        singular |= _segment_distance_np(a, b, pts) < reg
        if cur == 0.0:
            continue
        r1 = pts - a
        r2 = pts - b
        n1 = np.sqrt((r1 * r1).sum(axis=1))
        n2 = np.sqrt((r2 * r2).sum(axis=1))
        dot = (r1 * r2).sum(axis=1)
        denom = n1 * n2 * (n1 * n2 + dot)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(denom > 0.0, _K * cur * (n1 + n2) / denom, 0.0)
        out += np.cross(r1, r2) * fac[:, None]
    out[singular] = np.nan
    return out, singular


@njit(cache=True, nogil=True)
def _field_point(starts, ends, currents, x, y, z, reg, res):
    """Field at one point into ``res``; returns True if the point is singular."""
    bx = 0.0
    by = 0.0
    bz = 0.0
    sing = False
    for s in range(starts.shape[0]):
        ax = starts[s, 0]
        ay = starts[s, 1]
        az = starts[s, 2]
        lx = ends[s, 0] - ax
        ly = ends[s, 1] - ay
        lz = ends[s, 2] - az
        r1x = x - ax
        r1y = y - ay
        r1z = z - az
        ll = lx * lx + ly * ly + lz * lz
        t = (r1x * lx + r1y * ly + r1z * lz) / ll
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx = r1x - t * lx
        dy = r1y - t * ly
        dz = r1z - t * lz
        if dx * dx + dy * dy + dz * dz < reg * reg:
            sing = True
            continue
        cur = currents[s]
        if cur == 0.0:
            continue
        r2x = r1x - lx
        r2y = r1y - ly
        r2z = r1z - lz
        n1 = math.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
        n2 = math.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
        dot = r1x * r2x + r1y * r2y + r1z * r2z
        denom = n1 * n2 * (n1 * n2 + dot)
        if denom <= 0.0:
            continue
        fac = _K * cur * (n1 + n2) / denom
        bx += (r1y * r2z - r1z * r2y) * fac
        by += (r1z * r2x - r1x * r2z) * fac
        bz += (r1x * r2y - r1y * r2x) * fac
    res[0] = bx
    res[1] = by
    res[2] = bz
    return sing


@njit(cache=True, nogil=True)
def _field_nb(starts, ends, currents, pts, reg, out, singular):
    res = np.empty(3)
    for i in range(pts.shape[0]):
        sing = _field_point(starts, ends, currents, pts[i, 0], pts[i, 1], pts[i, 2], reg, res)
        singular[i] = sing
        if sing:
            out[i, 0] = np.nan
            out[i, 1] = np.nan
            out[i, 2] = np.nan
        else:
            out[i, 0] = res[0]
            out[i, 1] = res[1]
            out[i, 2] = res[2]


@njit(cache=True, nogil=True)
def _transverse_sq_nb(starts, ends, currents, pts, axis_table, axis_idx, reg, out):
    """Per-point |B_perp|^2 and B_par w.r.t. the NV axis; returns the singular count."""
    res = np.empty(3)
    nsing = 0
    for i in range(pts.shape[0]):
        sing = _field_point(starts, ends, currents, pts[i, 0], pts[i, 1], pts[i, 2], reg, res)
        if sing:
            nsing += 1
            out[i, 0] = np.nan
            out[i, 1] = np.nan
            continue
        k = axis_idx[i]
        par = res[0] * axis_table[k, 0] + res[1] * axis_table[k, 1] + res[2] * axis_table[k, 2]
        tot = res[0] * res[0] + res[1] * res[1] + res[2] * res[2]
        perp = tot - par * par
        if perp < 0.0:
            perp = 0.0
        out[i, 0] = perp
        out[i, 1] = par
    return nsing


def _as_arrays(starts, ends, currents):
    return (
        np.ascontiguousarray(starts, dtype=float),
        np.ascontiguousarray(ends, dtype=float),
        np.ascontiguousarray(currents, dtype=float),
    )


def field(starts, ends, currents, pts, reg, numba: bool | None = None):
    """Summed segment field at ``pts`` (N,3); singular rows are NaN."""
    starts, ends, currents = _as_arrays(starts, ends, currents)
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=float)
    if use_numba() if numba is None else numba:
        out = np.empty_like(pts)
        singular = np.empty(len(pts), dtype=np.bool_)
        _field_nb(starts, ends, currents, pts, float(reg), out, singular)
        return out, singular
    return field_numpy(starts, ends, currents, pts, reg)


def transverse_sq(
    starts, ends, currents, pts, axis_table, axis_idx, reg, numba: bool | None = None, threads: int = 1
):
    """(N,2) array of [|B_perp|^2, B_par] per point, and the singular count.

    Points are processed in fixed-size chunks, each written to its own slice,
    so the result is identical for any thread count.
    """
    starts, ends, currents = _as_arrays(starts, ends, currents)
    pts = np.ascontiguousarray(pts, dtype=float)
    axis_table = np.ascontiguousarray(axis_table, dtype=float)
    axis_idx = np.ascontiguousarray(axis_idx, dtype=np.int64)
    out = np.empty((len(pts), 2))
    jit = use_numba() if numba is None else numba

    def run(lo):
        hi = min(lo + CHUNK, len(pts))
        if jit:
            return _transverse_sq_nb(
                starts, ends, currents, pts[lo:hi], axis_table, axis_idx[lo:hi], float(reg), out[lo:hi]
            )
        b, sing = field_numpy(starts, ends, currents, pts[lo:hi], reg)
        ax = axis_table[axis_idx[lo:hi]]
        par = (b * ax).sum(axis=1)
        out[lo:hi, 0] = np.maximum((b * b).sum(axis=1) - par * par, 0.0)
        out[lo:hi, 1] = par
        return int(sing.sum())

    starts_lo = range(0, len(pts), CHUNK)
    if threads > 1 and len(pts) > CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(run, starts_lo))
    else:
        counts = [run(lo) for lo in starts_lo]
    return out, int(sum(counts))
