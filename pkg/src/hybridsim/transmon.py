"""Transmon physics in the number (Fock) basis of the plasma oscillator.

Energies are angular frequencies (hbar = 1). The offset charge never appears:
it is removed by a gauge transformation before expanding the cosine potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .quantum import Operator, ladder

TRANSMON_MIN_RATIO = 20.0
MIN_LEVELS = 6


def _check_ratio(ratio: float) -> None:
    if not np.isfinite(ratio) or ratio < TRANSMON_MIN_RATIO:
        raise ValidationError(f"E_J/E_C below transmon regime: {ratio:g} < {TRANSMON_MIN_RATIO:g}")


@dataclass(frozen=True)
class SingleJJParams:
    E_J: float
    E_C: float
    I_c: float = 500e-9
    n_levels: int = 30

    def __post_init__(self):
        if self.E_J <= 0 or self.E_C <= 0 or self.I_c <= 0:
            raise ValidationError("E_J, E_C and I_c must be positive")
        if self.n_levels < MIN_LEVELS:
            raise ValidationError(
                f"n_levels={self.n_levels} too small: the quartic term couples |n> to |n+-4>, need >= {MIN_LEVELS}"
            )
        _check_ratio(self.E_J / self.E_C)

    @property
    def ratio(self) -> float:
        return self.E_J / self.E_C

    @classmethod
    def from_ratio(cls, ratio: float, E_C: float, **kw) -> "SingleJJParams":
        return cls(E_J=ratio * E_C, E_C=E_C, **kw)


@dataclass(frozen=True)
class DoubleJJParams:
    """Two-junction (SQUID) transmon; ``flux`` is in units of the flux quantum."""

    E_J1: float
    E_J2: float
    E_C: float
    I_c1: float = 500e-9
    I_c2: float = 500e-9
    flux: float = 0.0
    n_levels: int = 30

    def __post_init__(self):
        if min(self.E_J1, self.E_J2, self.E_C, self.I_c1, self.I_c2) <= 0:
            raise ValidationError("junction energies, E_C and critical currents must be positive")
        if not np.isfinite(self.flux):
            raise ValidationError("flux must be finite")
        if self.n_levels < MIN_LEVELS:
            raise ValidationError(f"n_levels={self.n_levels} < {MIN_LEVELS}")
        _check_ratio(self.E_J / self.E_C)

    @property
    def asymmetry(self) -> float:
        return (self.E_J2 - self.E_J1) / (self.E_J1 + self.E_J2)

    @property
    def E_J(self) -> float:
        """Effective Josephson energy of the equivalent single junction.

        Only the cos(pi*flux) term is kept; at integer flux the asymmetric
        sin term vanishes.
        """
        return (self.E_J1 + self.E_J2) * abs(math.cos(math.pi * self.flux))

    @property
    def ratio(self) -> float:
        return self.E_J / self.E_C


def plasma_frequency(p) -> float:
    return math.sqrt(8.0 * p.E_J * p.E_C)


def phase_zpf(p) -> float:
    """Zero-point phase amplitude: phi = phase_zpf * (b + b^dagger)."""
    return (8.0 * p.E_C / p.E_J) ** 0.25 / math.sqrt(2.0)


def cubic_coefficient(p) -> float:
    """Coefficient of tau_x^3 from the dropped phi^3/6 term of sin(phi)."""
    return phase_zpf(p) ** 3 / 6.0


def build_transmon_hamiltonian(p) -> Operator:
    """omega_p (b^dag b + 1/2) - (E_C/12)(b + b^dag)^4 on ``p.n_levels`` Fock states."""
    if p.n_levels < MIN_LEVELS:
        raise ValidationError(f"n_levels={p.n_levels} < {MIN_LEVELS}")
    b = ladder(p.n_levels, "transmon")
    x = b + b.dag()
    x2 = x @ x
    wp = plasma_frequency(p)
    n = b.dag() @ b
    h = wp * n + (0.5 * wp) * Operator(b.space, np.eye(p.n_levels)) - (p.E_C / 12.0) * (x2 @ x2)
    return h


def transmon_levels(p, count: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Energies and eigenvectors adiabatically connected to Fock states |0>..|count-1>.

    The truncated quartic is unbounded below, so states near the truncation
    edge can fall under the physical ground state; eigenvectors are therefore
    picked by their largest overlap with the low Fock states, not by energy
    order. Vectors are phased so the dominant Fock amplitude is positive.
    """
    w, v = build_transmon_hamiltonian(p).eigh()
    energies = np.empty(count)
    vecs = np.empty((p.n_levels, count))
    taken: set[int] = set()
    for k in range(count):
        order = np.argsort(-np.abs(v[k]))
        j = next(int(i) for i in order if int(i) not in taken)
        taken.add(j)
        vec = v[:, j].real * np.sign(v[k, j].real)
        energies[k] = w[j]
        vecs[:, k] = vec
    return energies, vecs


def anharmonicity(p) -> float:
    """(E_2 - E_1) - (E_1 - E_0) from exact diagonalisation."""
    e, _ = transmon_levels(p, 3)
    return float((e[2] - e[1]) - (e[1] - e[0]))


@dataclass(frozen=True)
class PerturbedQubit:
    """Renormalised first-order qubit states.

    ``down_coeffs`` are the amplitudes on |0>,|2>,|4>; ``up_coeffs`` on |1>,|3>,|5>.
    """

    down_coeffs: tuple[float, float, float]
    up_coeffs: tuple[float, float, float]
    x_element: float

    def down_vector(self, n: int = 6) -> np.ndarray:
        v = np.zeros(n)
        v[[0, 2, 4]] = self.down_coeffs
        return v

    def up_vector(self, n: int = 6) -> np.ndarray:
        v = np.zeros(n)
        v[[1, 3, 5]] = self.up_coeffs
        return v


# first-order admixture prefactors, each multiplied by sqrt(E_C / 8 E_J)
_C2 = 6.0 * math.sqrt(2.0) / 24.0
_C4 = math.sqrt(24.0) / 48.0
_C3 = 10.0 * math.sqrt(6.0) / 24.0
_C5 = math.sqrt(120.0) / 48.0


def perturbed_states(ratio: float, sign: int = -1) -> PerturbedQubit:
    """First-order perturbed qubit states for E_J/E_C = ``ratio``.

    ``sign=-1`` (default) gives the commonly quoted closed forms, in which every
    admixture enters with a minus sign. Standard Rayleigh-Schroedinger theory
    with the negative quartic term gives positive admixtures; pass ``sign=+1``
    for that version, which is the one exact diagonalisation agrees with.
    """
    _check_ratio(ratio)
    if sign not in (-1, 1):
        raise ValidationError("sign must be -1 or +1")
    eps = math.sqrt(1.0 / (8.0 * ratio))
    down = np.array([1.0, sign * _C2 * eps, sign * _C4 * eps])
    up = np.array([1.0, sign * _C3 * eps, sign * _C5 * eps])
    down /= np.linalg.norm(down)
    up /= np.linalg.norm(up)
    # (b + b^dag) restricted to |0..5>: <n|x|n+1> = sqrt(n+1)
    x = np.diag(np.sqrt(np.arange(1.0, 6.0)), 1)
    x = x + x.T
    dv = np.zeros(6)
    uv = np.zeros(6)
    dv[[0, 2, 4]] = down
    uv[[1, 3, 5]] = up
    return PerturbedQubit(tuple(down), tuple(up), float(dv @ x @ uv))


def substitution_error(ratio: float, sign: int = -1) -> float:
    """Relative error of replacing (b + b^dag) by tau_x in the perturbed qubit basis."""
    return abs(perturbed_states(ratio, sign).x_element - 1.0)


def junction_currents(p: DoubleJJParams, phase: float) -> tuple[float, float]:
    """Currents through the two junctions with the phase expanded to first order.

    Returns (I1, I2) in amperes; ``phase`` is the equivalent-junction phase value.
    The static circulating part follows sin(pi*flux) and the phase-linear part
    cos(pi*flux); the sign of cos is kept as is (no +- convention is imposed
    at odd-integer flux).
    """
    s = math.sin(math.pi * p.flux)
    c = math.cos(math.pi * p.flux)
    return (p.I_c1 * s + phase * p.I_c1 * c, -p.I_c2 * s + phase * p.I_c2 * c)


def coupling_currents(p: DoubleJJParams) -> tuple[float, float]:
    """Phase-linear part of the junction currents for phase = phase_zpf (per unit tau_x)."""
    zpf = phase_zpf(p)
    i1, i2 = junction_currents(p, zpf)
    s1, s2 = junction_currents(p, 0.0)
    return i1 - s1, i2 - s2
