"""Transmon magnetic field and spin couplings from a thin-wire current model.

Lab frame: the junction (single-JJ) or the loop centre (double-JJ) sits at the
origin, wires lie in the z = 0 plane and the transmon top surface is at
z = h/2. The field is reported per unit tau_x, i.e. for the zero-point current
amplitude ``I_c * phase_zpf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .constants import GAMMA_NV, TWO_PI
from .errors import PreconditionError, SingularPointError, ValidationError
from .transmon import DoubleJJParams, SingleJJParams, coupling_currents, phase_zpf

REGULARIZATION = 1e-9

# NV axes in the crystal frame, crystal [100] along lab x
NV_AXES = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3.0)


def _vec3(v, name: str) -> tuple[float, float, float]:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be a finite 3-vector, got {v!r}")
    return tuple(float(x) for x in a)


@dataclass(frozen=True)
class WireSegment:
    start: tuple[float, float, float]
    end: tuple[float, float, float]
    current_fraction: float = 1.0
    # 0: single-junction path; 1 / 2: the arm carrying junction 1 / 2 current
    arm: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", _vec3(self.start, "segment start"))
        object.__setattr__(self, "end", _vec3(self.end, "segment end"))
        if self.start == self.end:
            raise ValidationError("segment start and end coincide")
        if self.arm not in (0, 1, 2):
            raise ValidationError(f"arm must be 0, 1 or 2, got {self.arm}")

    def reversed(self) -> "WireSegment":
        return WireSegment(self.end, self.start, self.current_fraction, self.arm)


@dataclass(frozen=True)
class Geometry:
    segments: tuple[WireSegment, ...]
    kind: str = "single-JJ"
    L: float = 3e-6
    h: float = 0.1e-6

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.kind not in ("single-JJ", "double-JJ"):
            raise ValidationError(f"geometry kind must be 'single-JJ' or 'double-JJ', got {self.kind!r}")
        if not (self.L > 0 and self.h > 0):
            raise ValidationError("L and h must be positive")
        if not self.segments:
            raise ValidationError("geometry has no segments")
        arms = {s.arm for s in self.segments}
        if self.kind == "single-JJ":
            if arms != {0}:
                raise ValidationError("single-JJ segments must all use arm 0")
            for s0, s1 in zip(self.segments, self.segments[1:]):
                if not np.allclose(s0.end, s1.start, rtol=0, atol=1e-15):
                    raise ValidationError("single-JJ path must be one connected polyline")
        elif arms != {1, 2}:
            raise ValidationError("double-JJ geometry needs segments on arms 1 and 2")

    @property
    def top_surface(self) -> float:
        return 0.5 * self.h

    @classmethod
    def single_jj(cls, L: float = 3e-6, h: float = 0.1e-6) -> "Geometry":
        """Straight wire of length 2L along x, centred on the junction."""
        return cls((WireSegment((-L, 0.0, 0.0), (L, 0.0, 0.0)),), "single-JJ", L, h)

    @classmethod
    def double_jj(cls, L: float = 3e-6, h: float = 0.1e-6) -> "Geometry":
        """Rectangular SQUID loop, junctions a distance L apart.

        Junction wires run along x at y = +-L/2 with length L/2 (loop aspect
        L x L/2); each arm runs from the left node (-L/4, 0) to the right node
        (+L/4, 0) through its junction, so equal arm currents flow in parallel.
        """
        w, y = 0.25 * L, 0.5 * L
        segs = []
        for arm, sy in ((1, y), (2, -y)):
            path = [(-w, 0.0, 0.0), (-w, sy, 0.0), (w, sy, 0.0), (w, 0.0, 0.0)]
            segs += [WireSegment(p, q, 1.0, arm) for p, q in zip(path, path[1:])]
        return cls(tuple(segs), "double-JJ", L, h)

    @property
    def junctions(self) -> np.ndarray:
        if self.kind == "single-JJ":
            return np.zeros((1, 3))
        return np.array([[0.0, 0.5 * self.L, 0.0], [0.0, -0.5 * self.L, 0.0]])

    def reversed(self) -> "Geometry":
        return Geometry(tuple(s.reversed() for s in self.segments), self.kind, self.L, self.h)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        starts = np.array([s.start for s in self.segments])
        ends = np.array([s.end for s in self.segments])
        frac = np.array([s.current_fraction for s in self.segments])
        arm = np.array([s.arm for s in self.segments])
        return starts, ends, frac, arm


def segment_currents(g: Geometry, p) -> np.ndarray:
    """Current per segment (A) for one unit of tau_x."""
    starts, ends, frac, arm = g.arrays()
    if g.kind == "single-JJ":
        if not isinstance(p, SingleJJParams):
            raise ValidationError("single-JJ geometry needs SingleJJParams")
        return frac * p.I_c * phase_zpf(p)
    if not isinstance(p, DoubleJJParams):
        raise ValidationError("double-JJ geometry needs DoubleJJParams")
    i1, i2 = coupling_currents(p)
    return frac * np.where(arm == 1, i1, i2)


def segment_field(seg: WireSegment, current: float, point, reg: float = REGULARIZATION) -> np.ndarray:
    """Field (T) of one straight segment carrying ``current`` amperes."""
    pt = np.asarray(_vec3(point, "point"))[None, :]
    b, sing = _kernels.field_numpy(
        np.array([seg.start]), np.array([seg.end]), np.array([float(current)]), pt, reg
    )
    if sing[0]:
        raise SingularPointError(f"point {tuple(pt[0])} is within {reg:g} m of the segment")
    return b[0]


def transmon_field_many(g: Geometry, p, points, reg: float = REGULARIZATION):
    """Field B0 (N,3) per unit tau_x at ``points`` plus the singular-point mask."""
    starts, ends, _, _ = g.arrays()
    return _kernels.field(starts, ends, segment_currents(g, p), np.atleast_2d(points), reg)


def transmon_field(g: Geometry, p, point, reg: float = REGULARIZATION) -> np.ndarray:
    b, sing = transmon_field_many(g, p, np.asarray(_vec3(point, "point"))[None, :], reg)
    if sing[0]:
        raise SingularPointError(f"point {tuple(point)} is within {reg:g} m of a wire segment")
    return b[0]


def _transverse_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.eye(3)[int(np.argmin(np.abs(axis)))]
    x = ref - (ref @ axis) * axis
    x /= np.linalg.norm(x)
    return x, np.cross(axis, x)


@dataclass(frozen=True)
class SpinSite:
    """Spin position and its NV frame: ``axis`` is z, (x_axis, y_axis, axis) right-handed."""

    position: tuple[float, float, float]
    axis: tuple[float, float, float]
    x_axis: tuple[float, float, float] = dc_field(default=None)
    y_axis: tuple[float, float, float] = dc_field(default=None)

    def __post_init__(self):
        pos = _vec3(self.position, "position")
        z = np.asarray(_vec3(self.axis, "axis"))
        if np.linalg.norm(z) == 0:
            raise ValidationError("NV axis must be nonzero")
        z = z / np.linalg.norm(z)
        if self.x_axis is None:
            x, y = _transverse_frame(z)
        else:
            x = np.asarray(_vec3(self.x_axis, "x_axis"))
            y = np.cross(z, x)
        frame = np.array([x, y, z])
        if np.abs(frame @ frame.T - np.eye(3)).max() > 1e-12 or np.linalg.det(frame) < 0:
            raise ValidationError("NV frame is not a right-handed orthonormal triad")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "axis", tuple(z))
        object.__setattr__(self, "x_axis", tuple(x))
        object.__setattr__(self, "y_axis", tuple(y))

    def rotated(self, alpha: float) -> "SpinSite":
        """Same site with the transverse frame rotated by ``alpha`` about the axis."""
        x, y = np.asarray(self.x_axis), np.asarray(self.y_axis)
        xr = math.cos(alpha) * x + math.sin(alpha) * y
        return SpinSite(self.position, self.axis, tuple(xr))


def coupling_terms(g: Geometry, p, site: SpinSite) -> tuple[complex, float]:
    """(g_ts, g_z): transverse coupling and the longitudinal sigma_z tau_x coefficient.

    g_ts = (M_x - i M_y) / (sqrt(2) hbar) with M_i = mu_B g_e B0_i in the NV frame;
    g_z = M_z / (2 hbar) is the term the rotating-wave Hamiltonian drops.
    """
    b = transmon_field(g, p, site.position)
    bx, by, bz = b @ np.asarray(site.x_axis), b @ np.asarray(site.y_axis), b @ np.asarray(site.axis)
    return complex(GAMMA_NV * (bx - 1j * by) / math.sqrt(2.0)), float(GAMMA_NV * bz / 2.0)


def single_spin_coupling(g: Geometry, p, site: SpinSite) -> complex:
    """Transmon-spin coupling g_ts (angular frequency, complex)."""
    return coupling_terms(g, p, site)[0]


@dataclass(frozen=True)
class CouplingMap:
    points: np.ndarray  # (N, 3) metres, row order x-major then y then z
    g_abs: np.ndarray  # (N,) angular frequency, NaN where singular
    singular: np.ndarray  # (N,) bool
    shape: tuple[int, int, int]

    @property
    def g_abs_hz(self) -> np.ndarray:
        return self.g_abs / TWO_PI

    def argmax(self) -> int:
        return int(np.nanargmax(self.g_abs))

    def grid(self) -> np.ndarray:
        return self.g_abs.reshape(self.shape)


def coupling_map(g: Geometry, p, xs, ys, zs, nv_axis=(1.0, 0.0, 0.0), reg: float = REGULARIZATION) -> CouplingMap:
    """|g_ts| on the product grid xs x ys x zs for a fixed NV axis.

    Singular grid points are masked (NaN) and flagged rather than raising.
    """
    xs, ys, zs = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (xs, ys, zs))
    grid = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    b, sing = transmon_field_many(g, p, grid, reg)
    axis = np.asarray(nv_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    par = b @ axis
    perp = np.sqrt(np.maximum((b * b).sum(axis=1) - par * par, 0.0))
    gabs = GAMMA_NV * perp / math.sqrt(2.0)
    gabs[sing] = np.nan
    return CouplingMap(grid, gabs, sing, (len(xs), len(ys), len(zs)))


@dataclass(frozen=True)
class EnsembleSpec:
    """Diamond cube of edge L_N above the transmon, ``density`` spins per m^3.

    The cube is centred on (center_x, center_y) and its bottom face sits
    ``offset`` above the transmon top surface.
    """

    L_N: float
    density: float
    offset: float = 0.0
    seed: int = 0
    center_x: float = 0.0
    center_y: float = 0.0

    def __post_init__(self):
        if not (self.L_N > 0 and self.density > 0):
            raise ValidationError("L_N and density must be positive")
        if self.n_spins < 1:
            raise ValidationError(
                f"ensemble holds no spins: density {self.density:g} m^-3 x L_N^3 rounds to 0"
            )

    @property
    def n_spins(self) -> int:
        return int(round(self.density * self.L_N**3))

    def bounds(self, g: Geometry) -> tuple[np.ndarray, np.ndarray]:
        z0 = g.top_surface + self.offset
        lo = np.array([self.center_x - 0.5 * self.L_N, self.center_y - 0.5 * self.L_N, z0])
        return lo, lo + self.L_N


def place_spins(spec: EnsembleSpec, g: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic spin positions (N,3) and NV-axis indices (N,).

    The cube is divided into m^3 cells with m = ceil(N^(1/3)); N distinct cells
    are drawn with the seeded generator, each spin is jittered uniformly inside
    its cell, and the four <111> axes are dealt out in equal shares.
    """
    n = spec.n_spins
    rng = np.random.default_rng(spec.seed)
    m = max(1, int(math.ceil(round(n ** (1.0 / 3.0), 9))))
    while m**3 < n:
        m += 1
    cells = np.sort(rng.choice(m**3, size=n, replace=False)) if m**3 > n else np.arange(n)
    ijk = np.stack(np.unravel_index(cells, (m, m, m)), axis=1).astype(float)
    lo, _ = spec.bounds(g)
    pos = lo + (ijk + rng.random((n, 3))) * (spec.L_N / m)
    axes = rng.permutation(np.arange(n) % 4)
    return pos, axes


def _segment_hits_box(a, b, lo, hi) -> bool:
    """Slab test for segment a->b against the closed box [lo, hi]."""
    t0, t1 = 0.0, 1.0
    d = b - a
    for k in range(3):
        if abs(d[k]) < 1e-300:
            if a[k] < lo[k] or a[k] > hi[k]:
                return False
            continue
        ta, tb = (lo[k] - a[k]) / d[k], (hi[k] - a[k]) / d[k]
        t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
        if t0 > t1:
            return False
    return True


@dataclass(frozen=True)
class EnsembleResult:
    g_ens: float  # angular frequency
    n_spins: int
    seed: int
    g_rms: float  # per-spin rms |g_j|, angular
    longitudinal_spread: float  # std of per-spin M_z/2hbar, angular

    @property
    def g_ens_hz(self) -> float:
        return self.g_ens / TWO_PI


def ensemble_coupling(
    g: Geometry, p, spec: EnsembleSpec, reg: float = REGULARIZATION, threads: int = 1, numba: bool | None = None
) -> EnsembleResult:
    """Collective coupling sqrt(sum_j |g_j|^2) over the spins in the cube."""
    lo, hi = spec.bounds(g)
    starts, ends, _, _ = g.arrays()
    for a, b in zip(starts, ends):
        if _segment_hits_box(a, b, lo - reg, hi + reg):
            raise PreconditionError("diamond cube intersects a transmon wire segment")
    pos, axes = place_spins(spec, g)
    vals, nsing = _kernels.transverse_sq(
        starts, ends, segment_currents(g, p), pos, NV_AXES, axes, reg, numba=numba, threads=threads
    )
    if nsing:
        raise SingularPointError(f"{nsing} spins lie within {reg:g} m of a wire")
    g2 = 0.5 * GAMMA_NV**2 * vals[:, 0]
    total = float(np.sum(g2))
    gz = 0.5 * GAMMA_NV * vals[:, 1]
    return EnsembleResult(
        g_ens=math.sqrt(total),
        n_spins=len(pos),
        seed=spec.seed,
        g_rms=math.sqrt(total / len(pos)),
        longitudinal_spread=float(np.std(gz)),
    )
