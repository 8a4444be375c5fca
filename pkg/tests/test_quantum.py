import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsim.errors import ValidationError
from hybridsim.quantum import (
    HilbertSpace,
    Operator,
    StateVector,
    basis_state,
    check_density,
    commutator,
    embed,
    evolve_damped,
    evolve_trace,
    evolve_unitary,
    excitation_number,
    identity,
    ladder,
    number,
    partial_trace,
    propagator,
    sigma_minus,
    sigma_plus,
    sigma_x,
    sigma_z,
    single,
)

from .oracles import amplitude_damping, expm_series, jc_single_excitation, kron_by_index


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


# ---- spaces and basic operators


def test_space_order_and_levels():
    sp = HilbertSpace.of(a=2, b=3)
    assert sp.labels == ("a", "b")
    assert sp.dim == 6
    assert sp.levels()[4].tolist() == [1, 1]


@pytest.mark.parametrize("factors", [(), (("a", 2), ("a", 3)), (("a", 1),)])
def test_space_rejects_bad_factors(factors):
    with pytest.raises(ValidationError):
        HilbertSpace(factors)


def test_ladder_entries():
    b = ladder(4).matrix
    assert np.allclose(np.diag(b, 1), np.sqrt([1, 2, 3]))
    assert np.count_nonzero(b) == 3


def test_ladder_rejects_bad_dimension():
    with pytest.raises(ValidationError):
        ladder(1)
    with pytest.raises(ValidationError):
        ladder(2.5)


def test_pauli_conventions():
    assert np.allclose(sigma_z().matrix, np.diag([-1, 1]))
    assert np.allclose(sigma_minus().matrix, [[0, 1], [0, 0]])
    assert np.allclose(sigma_x().matrix, [[0, 1], [1, 0]])
    assert np.allclose(commutator(sigma_plus(), sigma_minus()).matrix, sigma_z().matrix)


def test_number_operator():
    assert np.allclose(number(5).matrix, np.diag(np.arange(5)))


def test_truncated_canonical_commutator():
    b = ladder(6)
    c = commutator(b, b.dag()).matrix
    assert np.allclose(np.diag(c)[:-1], 1.0)
    assert np.isclose(c[-1, -1], -5.0)


def test_operator_is_immutable():
    op = sigma_z()
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 3


def test_operator_space_mismatch():
    with pytest.raises(ValidationError):
        sigma_z("a") + sigma_z("b")


def test_hermiticity():
    assert sigma_x().is_hermitian()
    assert not sigma_minus().is_hermitian()


# ---- embed against the index-loop oracle


@pytest.mark.parametrize("dims,k", [((2, 3), 0), ((2, 3), 1), ((3, 2, 4), 1), ((2, 2, 2), 2)])
def test_embed_matches_index_oracle(dims, k):
    rng = np.random.default_rng(k + sum(dims))
    labels = [f"f{i}" for i in range(len(dims))]
    sp = HilbertSpace(tuple(zip(labels, dims)))
    op = rng.normal(size=(dims[k], dims[k])) + 1j * rng.normal(size=(dims[k], dims[k]))
    got = embed(Operator(single(dims[k], labels[k]), op), labels[k], sp).matrix
    assert np.allclose(got, kron_by_index(dims, k, op), atol=0, rtol=0)


def test_embed_spin_transmon_order():
    # space order (spin, transmon): sigma_z on the spin is diag(-1,-1,+1,+1)
    sp = HilbertSpace.of(spin=2, transmon=2)
    z = embed(sigma_z("spin"), "spin", sp)
    assert np.allclose(np.diag(z.matrix), [-1, -1, 1, 1])
    zt = embed(sigma_z("transmon"), "transmon", sp)
    assert np.allclose(np.diag(zt.matrix), [-1, 1, -1, 1])


def test_embed_dimension_mismatch():
    with pytest.raises(ValidationError):
        embed(ladder(3), "spin", HilbertSpace.of(spin=2))


def test_excitation_number():
    sp = HilbertSpace.of(a=3, q=2)
    assert np.allclose(np.diag(excitation_number(sp).matrix), [0, 1, 1, 2, 2, 3])
    assert np.allclose(np.diag(excitation_number(sp, ["q"]).matrix), [0, 1, 0, 1, 0, 1])


def test_basis_state_and_labels():
    sp = HilbertSpace.of(a=3, q=2)
    psi = basis_state(sp, {"a": 2, "q": 1})
    assert psi.amplitudes[5] == 1
    with pytest.raises(ValidationError):
        basis_state(sp, {"x": 1})
    with pytest.raises(ValidationError):
        basis_state(sp, [3, 0])


def test_state_normalisation():
    sp = single(2)
    assert math.isclose(StateVector(sp, [3, 4]).norm(), 1.0)
    with pytest.raises(ValidationError):
        StateVector(sp, [0, 0])


# ---- unitary evolution against the series oracle


@pytest.mark.parametrize("n,t", [(2, 0.3), (4, 1.7), (8, 5.0)])
def test_propagator_matches_series(n, t):
    rng = np.random.default_rng(n)
    h = random_hermitian(rng, n)
    u = propagator(Operator(single(n), h), t)
    assert np.abs(u - expm_series(-1j * h * t)).max() < 1e-10


def test_evolve_unitary_and_trace_agree():
    rng = np.random.default_rng(1)
    sp = single(5)
    h = Operator(sp, random_hermitian(rng, 5))
    psi = StateVector(sp, rng.normal(size=5) + 1j * rng.normal(size=5))
    times = [0.0, 0.4, 2.2]
    tr = evolve_trace(h, psi, times)
    for t, row in zip(times, tr):
        assert np.allclose(evolve_unitary(h, psi, t).amplitudes, row, atol=1e-12)


def test_evolution_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        propagator(sigma_minus(), 1.0)


def test_jaynes_cummings_survival():
    g, delta = 0.7, 0.9
    sp = HilbertSpace.of(q=2, c=3)
    sm = embed(sigma_minus("q"), "q", sp)
    a = embed(ladder(3, "c"), "c", sp)
    h = (0.5 * delta) * embed(sigma_z("q"), "q", sp) + g * (sm.dag() @ a + a.dag() @ sm)
    psi = basis_state(sp, {"q": 1})
    for t in (0.3, 1.1, 4.0):
        amp = evolve_unitary(h, psi, t).amplitudes[np.ravel_multi_index((1, 0), (2, 3))]
        assert abs(abs(amp) ** 2 - jc_single_excitation(g, delta, t)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.floats(0.0, 10.0), st.integers(0, 2**31 - 1))
def test_unitarity_property(n, t, seed):
    rng = np.random.default_rng(seed)
    u = propagator(Operator(single(n), random_hermitian(rng, n)), t)
    assert np.abs(u @ u.conj().T - np.eye(n)).max() < 1e-10


# ---- Lindblad


@pytest.mark.parametrize("method", ["expm", "rk4"])
def test_amplitude_damping_matches_analytic(method):
    omega, gamma = 2.0, 0.35
    sp = single(2, "q")
    h = omega * number(2, "q")
    psi = StateVector(sp, [1.0, 1.0 + 0.5j])
    rho0 = psi.density()
    for t in (0.0, 0.7, 3.0):
        rho = evolve_damped(h, [(sigma_minus("q"), gamma)], rho0, t, method=method)
        p, coh = amplitude_damping(rho0[1, 1].real, rho0[0, 1], gamma, omega, t)
        assert abs(rho[1, 1] - p) < 1e-6
        assert abs(rho[0, 1] - coh) < 1e-6


def test_damping_zero_rate_is_unitary():
    rng = np.random.default_rng(3)
    sp = single(3)
    h = Operator(sp, random_hermitian(rng, 3))
    psi = StateVector(sp, [1, 1j, 0.5])
    rho = evolve_damped(h, [(ladder(3), 0.0)], psi, 1.3)
    amps = evolve_unitary(h, psi, 1.3).amplitudes
    assert np.abs(rho - np.outer(amps, amps.conj())).max() < 1e-10


def test_damping_validation():
    sp = single(2, "q")
    h = number(2, "q")
    rho = basis_state(sp, [1]).density()
    with pytest.raises(ValidationError):
        evolve_damped(h, [(sigma_minus("q"), -1.0)], rho, 1.0)
    with pytest.raises(ValidationError):
        evolve_damped(h, [], 2 * rho, 1.0)
    with pytest.raises(ValidationError):
        evolve_damped(h, [], rho, -1.0)
    with pytest.raises(ValidationError):
        evolve_damped(h, [], rho, 1.0, method="euler")


def test_damped_trace_and_positivity():
    sp = HilbertSpace.of(q=2, c=3)
    sm = embed(sigma_minus("q"), "q", sp)
    a = embed(ladder(3, "c"), "c", sp)
    h = 1.3 * (sm.dag() @ a + a.dag() @ sm)
    rho = evolve_damped(h, [(sm, 0.2), (a, 0.1)], basis_state(sp, {"q": 1, "c": 1}), 4.0)
    check_density(rho, 1e-9)


def test_check_density():
    check_density(np.diag([0.25, 0.75]))
    with pytest.raises(ValidationError):
        check_density(np.diag([1.2, -0.2]))
    with pytest.raises(ValidationError):
        check_density(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_partial_trace():
    sp = HilbertSpace.of(a=2, b=3)
    pa = StateVector(single(2), [1, 1j]).density()
    pb = np.diag([0.2, 0.3, 0.5])
    rho = np.kron(pa, pb)
    assert np.allclose(partial_trace(rho, sp, ["a"]), pa)
    assert np.allclose(partial_trace(rho, sp, ["b"]), pb)
    sp3 = HilbertSpace.of(a=2, b=3, c=2)
    pc = np.diag([0.9, 0.1])
    rho3 = np.kron(np.kron(pa, pb), pc)
    assert np.allclose(partial_trace(rho3, sp3, ["a", "c"]), np.kron(pa, pc))


def test_identity_commutes():
    sp = HilbertSpace.of(a=3)
    assert commutator(identity(sp), embed(ladder(3, "a"), "a", sp)).norm_max() == 0.0
