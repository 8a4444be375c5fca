import math

import numpy as np
import pytest

from hybridsim import _kernels
from hybridsim._accel import HAVE_NUMBA
from hybridsim.constants import GAMMA_NV, TWO_PI
from hybridsim.errors import PreconditionError, SingularPointError, ValidationError
from hybridsim.magnetostatics import (
    EnsembleSpec,
    Geometry,
    SpinSite,
    WireSegment,
    coupling_map,
    coupling_terms,
    ensemble_coupling,
    place_spins,
    segment_field,
    single_spin_coupling,
    transmon_field,
)
from hybridsim.transmon import DoubleJJParams, SingleJJParams, phase_zpf

from .oracles import MU0, biot_savart_quad

EC = TWO_PI * 92e6


def sj(I_c=500e-9):
    return SingleJJParams.from_ratio(100, EC, I_c=I_c)


def dj(I_c1=500e-9, I_c2=500e-9):
    return DoubleJJParams(E_J1=50 * EC, E_J2=50 * EC, E_C=EC, I_c1=I_c1, I_c2=I_c2)


def random_case(rng):
    a = rng.uniform(-5e-6, 5e-6, 3)
    b = a + rng.uniform(-5e-6, 5e-6, 3)
    while True:
        p = rng.uniform(-8e-6, 8e-6, 3)
        t = np.clip((p - a) @ (b - a) / ((b - a) @ (b - a)), 0, 1)
        if np.linalg.norm(p - (a + t * (b - a))) > 5e-8:
            return a, b, p


def test_closed_form_matches_quadrature_100_cases():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        a, b, p = random_case(rng)
        cur = rng.uniform(-1e-6, 1e-6)
        got = segment_field(WireSegment(a, b), cur, p)
        ref = biot_savart_quad(a, b, cur, p)
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    assert worst < 1e-9


def test_axis_extension_is_regular():
    # beyond the segment end on its own axis the field is zero, not singular
    b = segment_field(WireSegment((0, 0, 0), (1e-6, 0, 0)), 1.0, (2e-6, 0, 0))
    assert np.all(b == 0)


def test_infinite_wire_limit():
    n = 20
    xs = np.linspace(-0.5e-3, 0.5e-3, n + 1)
    segs = [WireSegment((x0, 0, 0), (x1, 0, 0)) for x0, x1 in zip(xs, xs[1:])]
    b = sum(segment_field(s, 1.0, (1e-7, 1e-6, 0)) for s in segs)
    assert abs(np.linalg.norm(b) / (MU0 / (2 * math.pi * 1e-6)) - 1) < 1e-3


def test_bisector_field_is_azimuthal():
    b = segment_field(WireSegment((-1e-6, 0, 0), (1e-6, 0, 0)), 1.0, (0, 0.3e-6, 0.2e-6))
    assert abs(b[0]) < 1e-15 * np.linalg.norm(b)


def test_singular_point_raises():
    seg = WireSegment((0, 0, 0), (1e-6, 0, 0))
    with pytest.raises(SingularPointError):
        segment_field(seg, 1.0, (0.5e-6, 0.5e-9, 0))


def test_segment_validation():
    with pytest.raises(ValidationError):
        WireSegment((0, 0, 0), (0, 0, 0))
    with pytest.raises(ValidationError):
        WireSegment((0, 0, float("inf")), (1, 0, 0))


def test_reversal_negates_field():
    g = Geometry.double_jj()
    pt = (0.3e-6, 1.1e-6, 0.4e-6)
    b = transmon_field(g, dj(), pt)
    b_rev = transmon_field(g.reversed(), dj(), pt)
    assert np.array_equal(b_rev, -b) or np.allclose(b_rev, -b, rtol=1e-15, atol=0)


def test_loop_center_circulating_current_is_out_of_plane():
    g = Geometry.double_jj()
    circ = Geometry(tuple(s if s.arm == 1 else s.reversed() for s in g.segments), "double-JJ")
    b = transmon_field(circ, dj(), (0, 0, 0.5e-6))
    assert np.hypot(b[0], b[1]) < 1e-10 * np.linalg.norm(b)


def test_loop_center_parallel_current_symmetry():
    # the coupling currents run through both arms in parallel: B_x and B_z cancel
    b = transmon_field(Geometry.double_jj(), dj(), (0, 0, 0.5e-6))
    assert abs(b[0]) < 1e-10 * abs(b[1]) and abs(b[2]) < 1e-10 * abs(b[1])


def test_field_linear_in_ic():
    pt = (0.2e-6, 0.1e-6, 0.1e-6)
    b1 = transmon_field(Geometry.single_jj(), sj(500e-9), pt)
    b2 = transmon_field(Geometry.single_jj(), sj(1000e-9), pt)
    assert np.allclose(b2, 2 * b1, rtol=1e-14, atol=0)


def test_single_jj_current_amplitude():
    # one straight segment: the package field equals the quadrature field of I_c * phi_zpf
    p = sj()
    pt = (0.4e-6, 0.2e-6, 0.1e-6)
    ref = biot_savart_quad((-3e-6, 0, 0), (3e-6, 0, 0), p.I_c * phase_zpf(p), pt)
    assert np.allclose(transmon_field(Geometry.single_jj(), p, pt), ref, rtol=1e-9, atol=0)


def test_geometry_validation():
    with pytest.raises(ValidationError):
        Geometry((WireSegment((0, 0, 0), (1, 0, 0)), WireSegment((2, 0, 0), (3, 0, 0))))
    with pytest.raises(ValidationError):
        Geometry((WireSegment((0, 0, 0), (1, 0, 0), arm=1),), kind="double-JJ")
    with pytest.raises(ValidationError):
        Geometry.single_jj(L=-1.0)


# ---- spin couplings


def test_spin_frame_orthonormal():
    s = SpinSite((0, 0, 1e-7), (1, 1, 1))
    m = np.array([s.x_axis, s.y_axis, s.axis])
    assert np.abs(m @ m.T - np.eye(3)).max() < 1e-12
    assert np.linalg.det(m) > 0


def test_spin_frame_rejects_bad_x_axis():
    with pytest.raises(ValidationError):
        SpinSite((0, 0, 0), (0, 0, 1), x_axis=(1, 1, 0))


def test_single_spin_reference_value():
    site = SpinSite((0, 0, 0.1e-6), (1, 0, 0))
    g = abs(single_spin_coupling(Geometry.single_jj(), sj(), site)) / TWO_PI
    assert 4e3 <= g <= 16e3


def test_field_along_axis_gives_zero_coupling():
    pt = (0.1e-6, 0.3e-6, 0.2e-6)
    b = transmon_field(Geometry.single_jj(), sj(), pt)
    site = SpinSite(pt, tuple(b))
    g_ts, g_z = coupling_terms(Geometry.single_jj(), sj(), site)
    assert abs(g_ts) < 1e-12 * abs(g_z)
    assert math.isclose(g_z, GAMMA_NV * np.linalg.norm(b) / 2, rel_tol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 1.7, -2.5])
def test_frame_rotation_phase(alpha):
    site = SpinSite((0.2e-6, 0.1e-6, 0.15e-6), (1, 1, 1))
    g0 = single_spin_coupling(Geometry.single_jj(), sj(), site)
    g1 = single_spin_coupling(Geometry.single_jj(), sj(), site.rotated(alpha))
    assert abs(g1 - g0 * np.exp(1j * alpha)) < 1e-12 * abs(g0)


def test_coupling_map_decays_with_height():
    m = coupling_map(Geometry.single_jj(), sj(), [0.0], [0.0], [0.1e-6, 0.4e-6])
    assert m.g_abs[1] < m.g_abs[0]


def test_coupling_map_mirror_symmetry():
    ys = np.linspace(-2e-6, 2e-6, 41)
    m = coupling_map(Geometry.double_jj(), dj(), [0.0], ys, [0.1e-6])
    v = m.g_abs
    assert np.abs(v - v[::-1]).max() < 1e-9 * v.max()


def test_double_jj_maxima_near_junctions():
    ys = np.linspace(-3e-6, 3e-6, 121)
    v = coupling_map(Geometry.double_jj(), dj(), [0.0], ys, [0.1e-6]).g_abs
    y_pos = ys[ys > 0][np.argmax(v[ys > 0])]
    y_neg = ys[ys < 0][np.argmax(v[ys < 0])]
    assert abs(y_pos - 1.5e-6) < 0.2e-6 and abs(y_neg + 1.5e-6) < 0.2e-6


def test_coupling_map_masks_singular_points():
    m = coupling_map(Geometry.single_jj(), sj(), [0.0, 0.5e-6], [0.0], [0.0, 0.1e-6])
    assert m.singular.sum() == 2
    assert np.isnan(m.g_abs[m.singular]).all()
    assert np.isfinite(m.g_abs[~m.singular]).all()


def test_coupling_map_linear_in_ic():
    a = coupling_map(Geometry.single_jj(), sj(500e-9), [0.1e-6], [0.2e-6], [0.1e-6]).g_abs
    b = coupling_map(Geometry.single_jj(), sj(1000e-9), [0.1e-6], [0.2e-6], [0.1e-6]).g_abs
    assert np.allclose(b, 2 * a, rtol=1e-14)


# ---- ensembles


def test_spin_count_and_validation():
    assert EnsembleSpec(4e-6, 5e22).n_spins == 3_200_000
    with pytest.raises(ValidationError):
        EnsembleSpec(0.1e-6, 1e10)
    with pytest.raises(ValidationError):
        EnsembleSpec(-1e-6, 1e22)


def test_placement_deterministic_and_inside():
    spec = EnsembleSpec(2e-6, 1e21, seed=7)
    g = Geometry.double_jj()
    p1, a1 = place_spins(spec, g)
    p2, a2 = place_spins(spec, g)
    assert np.array_equal(p1, p2) and np.array_equal(a1, a2)
    lo, hi = spec.bounds(g)
    assert np.all(p1 >= lo) and np.all(p1 <= hi)
    assert np.bincount(a1, minlength=4).tolist() == [2000, 2000, 2000, 2000]


def test_single_spin_ensemble_equals_site_coupling():
    g = Geometry.double_jj()
    spec = EnsembleSpec(1e-6, 1.0 / (1e-6) ** 3, seed=3)
    pos, axes = place_spins(spec, g)
    from hybridsim.magnetostatics import NV_AXES

    site = SpinSite(pos[0], NV_AXES[axes[0]])
    r = ensemble_coupling(g, dj(), spec)
    assert r.n_spins == 1
    assert math.isclose(r.g_ens, abs(single_spin_coupling(g, dj(), site)), rel_tol=1e-12)


def test_cube_wire_intersection():
    spec = EnsembleSpec(2e-6, 1e20, offset=0.0)
    g = Geometry(Geometry.double_jj().segments, "double-JJ", 3e-6, 0.1e-6)
    lifted = Geometry(
        tuple(WireSegment((s.start[0], s.start[1], 1e-6), (s.end[0], s.end[1], 1e-6), 1.0, s.arm) for s in g.segments),
        "double-JJ",
    )
    with pytest.raises(PreconditionError):
        ensemble_coupling(lifted, dj(), spec)


def test_sqrt_density_scaling():
    g = Geometry.double_jj()
    a = ensemble_coupling(g, dj(), EnsembleSpec(2e-6, 5e21)).g_ens
    b = ensemble_coupling(g, dj(), EnsembleSpec(2e-6, 2e22)).g_ens
    assert abs(b / a / 2 - 1) < 0.05


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")
def test_numba_and_numpy_agree():
    g = Geometry.double_jj()
    spec = EnsembleSpec(2e-6, 5e21, seed=1)
    a = ensemble_coupling(g, dj(), spec, numba=True)
    b = ensemble_coupling(g, dj(), spec, numba=False)
    assert math.isclose(a.g_ens, b.g_ens, rel_tol=1e-12)


def test_thread_count_does_not_change_result():
    g = Geometry.double_jj()
    spec = EnsembleSpec(2e-6, 1.2 * (_kernels.CHUNK * 3) / (2e-6) ** 3, seed=2)
    r1 = ensemble_coupling(g, dj(), spec, threads=1)
    r3 = ensemble_coupling(g, dj(), spec, threads=3)
    assert r1.g_ens == r3.g_ens


@pytest.mark.parametrize("jit", [False] + ([True] if HAVE_NUMBA else []))
def test_kernel_field_matches_quadrature(jit):
    rng = np.random.default_rng(5)
    starts = rng.uniform(-2e-6, 2e-6, (3, 3))
    ends = starts + rng.uniform(-2e-6, 2e-6, (3, 3))
    cur = rng.uniform(-1e-6, 1e-6, 3)
    pts = rng.uniform(-3e-6, 3e-6, (10, 3)) + np.array([0, 0, 4e-6])
    b, sing = _kernels.field(starts, ends, cur, pts, 1e-9, numba=jit)
    assert not sing.any()
    for k in range(len(pts)):
        ref = sum(biot_savart_quad(starts[s], ends[s], cur[s], pts[k]) for s in range(3))
        assert np.linalg.norm(b[k] - ref) < 1e-9 * np.linalg.norm(ref)


@pytest.mark.parametrize("jit", [False] + ([True] if HAVE_NUMBA else []))
def test_kernel_flags_singular(jit):
    b, sing = _kernels.field(
        np.array([[0.0, 0, 0]]), np.array([[1e-6, 0, 0]]), np.array([1.0]), np.array([[5e-7, 0, 0], [5e-7, 1e-6, 0]]), 1e-9, numba=jit
    )
    assert sing.tolist() == [True, False]
    assert np.isnan(b[0]).all()
