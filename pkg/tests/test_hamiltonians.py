import math
import warnings

import numpy as np
import pytest

from hybridsim.errors import NotDispersiveError, ValidationError
from hybridsim.hamiltonians import (
    SystemSpec,
    build_dispersive_H_t_ens,
    build_effective_H,
    build_H,
    build_H_c_t_ens,
    build_H_s_t_s,
    build_H_t_ens,
    build_H_ts,
    check_dispersive,
    commutator_table_check,
    dispersive_params,
    exact_transmon_transitions,
    excitation_commutator,
    qnd_invariant_check,
    spectrum_comparison,
    sw_transform,
    transmon_ladder,
    virtual_coupling,
)
from hybridsim.quantum import basis_state

GHZ = 2 * math.pi * 1e9
MHZ = 2 * math.pi * 1e6


def ref_ctens(**kw):
    base = dict(omega_t=3.27 * GHZ, omega_s=2.88 * GHZ, omega_r=5.0 * GHZ, g_tens=15 * MHZ, g_tc=80 * MHZ)
    base.update(kw)
    return SystemSpec("c-t-ens", **base)


def t_ens(delta=390 * MHZ, g=15 * MHZ, n=5):
    return SystemSpec("t-ens", omega_t=2.88 * GHZ + delta, omega_s=2.88 * GHZ, g_tens=g, n_ensemble=n)


def sts(g=5 * MHZ, delta=50 * MHZ, g2=None):
    return SystemSpec(
        "s-t-s", omega_t=2.88 * GHZ + delta, omega_s1=2.88 * GHZ, omega_s2=2.88 * GHZ, g_ts1=g, g_ts2=g if g2 is None else g2
    )


# ---- construction


def test_spec_validation():
    with pytest.raises(ValidationError):
        SystemSpec("bogus", omega_t=1.0)
    with pytest.raises(ValidationError):
        SystemSpec("t-ens", omega_t=1.0)
    with pytest.raises(ValidationError):
        SystemSpec("t-ens", omega_t=1.0, omega_s=1.0, n_ensemble=2)


def test_spaces():
    assert t_ens().space().labels == ("transmon", "ensemble")
    assert sts().space().labels == ("transmon", "spin1", "spin2")
    assert ref_ctens().space().labels == ("cavity", "transmon", "ensemble")


def test_ts_matrix_by_hand():
    wt, ws, g = 3.0, 2.0, 0.1 + 0.05j
    h = build_H_ts(SystemSpec("ts", omega_t=wt, omega_s=ws, g_ts=g)).matrix
    # basis |t s> with t, s in {0, 1}; sigma_z = diag(-1, +1)
    ref = np.diag([-(wt + ws) / 2, (ws - wt) / 2, (wt - ws) / 2, (wt + ws) / 2]).astype(complex)
    ref[1, 2] = g  # |0 1> <- |1 0>: s^dag tau_-
    ref[2, 1] = np.conj(g)
    assert np.allclose(h, ref, atol=1e-15)


def test_counter_rotating_terms():
    spec = SystemSpec("ts", omega_t=3.0, omega_s=2.0, g_ts=0.1)
    h = build_H_ts(spec, rwa=False).matrix
    assert np.isclose(h[0, 3], 0.1) and np.isclose(h[3, 0], 0.1)
    assert excitation_commutator(build_H_ts(spec, rwa=False)) > 0


@pytest.mark.parametrize("spec", [t_ens(), sts(), ref_ctens(), SystemSpec("ts", omega_t=3.0, omega_s=2.0, g_ts=0.1)])
def test_hermitian_and_conserving(spec):
    h = build_H(spec)
    assert h.is_hermitian()
    assert excitation_commutator(h) < 1e-9 * h.norm_max()


def test_builders_check_kind():
    with pytest.raises(ValidationError):
        build_H_t_ens(sts())
    with pytest.raises(ValidationError):
        build_H_s_t_s(t_ens())
    assert build_H_c_t_ens(ref_ctens()).space.dim == 50


# ---- dispersive parameters


def test_chi_value_and_sign():
    p = dispersive_params(t_ens())
    assert math.isclose(2 * p.chi / MHZ, 1.1538461538, rel_tol=1e-9)
    assert dispersive_params(t_ens(delta=-390 * MHZ)).chi < 0


def test_virtual_coupling_value():
    spec = ref_ctens(omega_t=3.0 * GHZ, omega_s=2.9 * GHZ, omega_r=2.9 * GHZ, g_tens=10 * MHZ, g_tc=10 * MHZ)
    assert math.isclose(abs(dispersive_params(spec).g_virtual) / MHZ, 1.0, rel_tol=1e-12)


def test_exchange_formula_symmetry():
    g1, g2, d1, d2 = 1 + 2j, 0.5 - 1j, 7.0, -3.0
    assert np.isclose(virtual_coupling(g1, g2, d1, d2), np.conj(virtual_coupling(g2, g1, d2, d1)))
    assert np.isclose(virtual_coupling(2.0, 3.0, d1, d2), virtual_coupling(3.0, 2.0, d2, d1))


def test_not_dispersive_raises():
    with pytest.raises(NotDispersiveError):
        dispersive_params(t_ens(delta=50 * MHZ, g=15 * MHZ))
    with pytest.raises(NotDispersiveError):
        check_dispersive(t_ens(delta=0.0))


def test_warns_between_limits():
    with pytest.warns(UserWarning):
        check_dispersive(t_ens(delta=100 * MHZ, g=15 * MHZ))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_dispersive(sts(g=5 * MHZ, delta=50 * MHZ))


def test_transmon_ladder():
    lad = transmon_ladder(10.0, 0.5, 2)
    assert lad == [10.5, 11.5, 12.5]


def test_exact_transitions_split_by_two_chi():
    spec = t_ens()
    tr = exact_transmon_transitions(spec, 2)
    chi = dispersive_params(spec).chi
    assert abs((tr[1] - tr[0]) / (2 * chi) - 1) < 0.03
    assert abs((tr[2] - tr[1]) / (2 * chi) - 1) < 0.03


def test_dispersive_matrix_diagonal():
    h = build_dispersive_H_t_ens(t_ens()).matrix
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0


def test_spectrum_matches_dispersive():
    spec = t_ens()
    ex, di = spectrum_comparison(spec, 2)
    g, d = 15 * MHZ, 390 * MHZ
    # fourth-order bound with a generous prefactor
    assert np.abs(ex - di).max() < 50 * g**4 / d**3


def test_spectrum_zero_coupling():
    ex, di = spectrum_comparison(t_ens(g=0.0))
    assert np.abs(ex - di).max() < 1e-3


# ---- Schrieffer-Wolff and commutator tables


@pytest.mark.parametrize("kind", ["s-t-s", "c-t-ens"])
def test_commutator_tables(kind):
    rows = commutator_table_check(kind)
    assert len(rows) == 10
    assert all(r.passed for r in rows), [(r.identity, r.max_error) for r in rows if not r.passed]


def test_commutator_table_rejects_kind():
    with pytest.raises(ValidationError):
        commutator_table_check("ts")


def test_sw_zero_coupling_residual():
    assert sw_transform(t_ens(g=0.0)).residual < 1e-6


def test_sw_third_order_scaling():
    d = 500 * MHZ
    r1 = sw_transform(sts(g=0.1 * d, delta=d)).residual
    r2 = sw_transform(sts(g=0.05 * d, delta=d)).residual
    assert 6 <= r1 / r2 <= 10


def test_sw_ctens_low_sectors():
    r = sw_transform(ref_ctens())
    assert r.residual_low < 0.5 * MHZ


def test_effective_with_constant_shifts_energy():
    a = build_effective_H(t_ens(), with_constant=False).matrix
    b = build_effective_H(t_ens(), with_constant=True).matrix
    diff = np.diag(b - a)
    assert np.allclose(diff, diff[0]) and diff[0] != 0


# ---- QND algebra


def test_qnd_invariant():
    q = qnd_invariant_check(t_ens())
    assert q.dispersive_norm < 1e-12
    assert q.full_norm > 1.0


def test_qnd_needs_t_ens():
    with pytest.raises(ValidationError):
        qnd_invariant_check(sts())


def test_dispersive_dynamics_preserve_bright_population():
    from hybridsim.quantum import evolve_unitary

    spec = t_ens()
    h = build_dispersive_H_t_ens(spec)
    psi = basis_state(h.space, {"transmon": 1, "ensemble": 1})
    out = evolve_unitary(h, psi, 3e-6)
    k = np.ravel_multi_index((1, 1), h.space.dims)
    assert abs(abs(out.amplitudes[k]) ** 2 - 1) < 1e-12


def test_qnd_full_commutator_vanishes_without_coupling():
    assert qnd_invariant_check(t_ens(g=0.0)).full_norm == 0.0


@pytest.mark.parametrize("ratio", [0.05, 0.1])
def test_low_sector_eigenvalues_within_third_order(ratio):
    d = 390 * MHZ
    g = ratio * d
    ex, di = spectrum_comparison(t_ens(delta=d, g=g), 1)
    assert np.abs(ex - di).max() <= 2 * g**3 / d**2


def test_results_stable_under_larger_truncation():
    small, big = ref_ctens(), ref_ctens(n_cavity=7, n_ensemble=7)
    a, b = spectrum_comparison(small, 2), spectrum_comparison(big, 2)
    for x, y in zip(a, b):
        assert np.abs(x - y).max() <= 1e-8 * np.abs(y).max()
    ra, rb = sw_transform(small).residual_low, sw_transform(big).residual_low
    assert abs(ra - rb) <= 1e-8 * max(rb, 1.0)
    rows = commutator_table_check("c-t-ens", n_cavity=7, n_ensemble=7)
    assert all(r.passed for r in rows)
