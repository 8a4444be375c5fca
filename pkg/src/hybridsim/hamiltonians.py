"""Hybrid transmon / spin / ensemble / cavity Hamiltonians and their dispersive limits.

The transmon is a two-level system (tau) throughout; the ensemble bright mode
(s) and the cavity (a) are truncated bosonic modes. Factor orders:

    ts      (transmon, spin)
    t-ens   (transmon, ensemble)
    s-t-s   (transmon, spin1, spin2)
    c-t-ens (cavity, transmon, ensemble)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotDispersiveError, ValidationError
from .quantum import (
    HilbertSpace,
    Operator,
    commutator,
    embed,
    excitation_number,
    identity,
    ladder,
    sigma_z,
)

KINDS = ("ts", "t-ens", "s-t-s", "c-t-ens")
DISPERSIVE_LIMIT = 0.2
DISPERSIVE_WARN = 0.1


@dataclass(frozen=True)
class SystemSpec:
    """Frequencies and couplings (angular) for one of the four hybrid systems."""

    kind: str
    omega_t: float
    omega_s: float | None = None
    omega_s1: float | None = None
    omega_s2: float | None = None
    omega_r: float | None = None
    g_ts: complex = 0.0
    g_ts1: complex = 0.0
    g_ts2: complex = 0.0
    g_tens: complex = 0.0
    g_tc: complex = 0.0
    n_cavity: int = 5
    n_ensemble: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown system kind {self.kind!r}; expected one of {KINDS}")
        need = {
            "ts": ("omega_t", "omega_s"),
            "t-ens": ("omega_t", "omega_s"),
            "s-t-s": ("omega_t", "omega_s1", "omega_s2"),
            "c-t-ens": ("omega_t", "omega_s", "omega_r"),
        }[self.kind]
        for name in need:
            v = getattr(self, name)
            if v is None or not np.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be a positive frequency for kind {self.kind!r}")
        if self.kind in ("t-ens", "c-t-ens") and self.n_ensemble < 3:
            raise ValidationError(f"ensemble truncation {self.n_ensemble} < 3")
        if self.kind == "c-t-ens" and self.n_cavity < 3:
            raise ValidationError(f"cavity truncation {self.n_cavity} < 3")

    def replace(self, **changes) -> "SystemSpec":
        from dataclasses import replace

        return replace(self, **changes)

    def space(self) -> HilbertSpace:
        if self.kind == "ts":
            return HilbertSpace.of(transmon=2, spin=2)
        if self.kind == "t-ens":
            return HilbertSpace.of(transmon=2, ensemble=self.n_ensemble)
        if self.kind == "s-t-s":
            return HilbertSpace.of(transmon=2, spin1=2, spin2=2)
        return HilbertSpace.of(cavity=self.n_cavity, transmon=2, ensemble=self.n_ensemble)

    def pairs(self) -> list[tuple[str, complex, float]]:
        """(partner label, coupling, detuning omega_t - omega_partner) for every coupled pair."""
        if self.kind == "ts":
            return [("spin", self.g_ts, self.omega_t - self.omega_s)]
        if self.kind == "t-ens":
            return [("ensemble", self.g_tens, self.omega_t - self.omega_s)]
        if self.kind == "s-t-s":
            return [
                ("spin1", self.g_ts1, self.omega_t - self.omega_s1),
                ("spin2", self.g_ts2, self.omega_t - self.omega_s2),
            ]
        return [
            ("cavity", self.g_tc, self.omega_t - self.omega_r),
            ("ensemble", self.g_tens, self.omega_t - self.omega_s),
        ]


class _Ops:
    """Embedded single-factor operators for a spec's space."""

    def __init__(self, space: HilbertSpace):
        self.space = space
        self.I = identity(space)

    def lower(self, label: str) -> Operator:
        return embed(ladder(self.space.factor_dim(label), label), label, self.space)

    def z(self, label: str) -> Operator:
        return embed(sigma_z(label), label, self.space)

    def n(self, label: str) -> Operator:
        b = self.lower(label)
        return b.dag() @ b


def _is_boson(label: str) -> bool:
    return label in ("cavity", "ensemble")


def _exchange(ops: _Ops, label: str, g: complex) -> Operator:
    """g x^dag tau_- + g* x tau_+ for partner x."""
    x = ops.lower(label)
    tm = ops.lower("transmon")
    term = g * (x.dag() @ tm)
    return term + term.dag()


def _bare(ops: _Ops, spec: SystemSpec) -> Operator:
    h = (0.5 * spec.omega_t) * ops.z("transmon")
    if spec.kind == "ts":
        h = h + (0.5 * spec.omega_s) * ops.z("spin")
    elif spec.kind == "t-ens":
        h = h + spec.omega_s * ops.n("ensemble")
    elif spec.kind == "s-t-s":
        h = h + (0.5 * spec.omega_s1) * ops.z("spin1") + (0.5 * spec.omega_s2) * ops.z("spin2")
    else:
        h = h + spec.omega_r * ops.n("cavity") + spec.omega_s * ops.n("ensemble")
    return h


def _require(spec: SystemSpec, *kinds: str) -> None:
    if spec.kind not in kinds:
        raise ValidationError(f"expected system kind in {kinds}, got {spec.kind!r}")


def build_H(spec: SystemSpec, rwa: bool = True) -> Operator:
    """Full interacting Hamiltonian for any kind.

    ``rwa=False`` adds the counter-rotating terms g x^dag tau_+ + h.c. (contrast
    only; it breaks excitation-number conservation).
    """
    ops = _Ops(spec.space())
    h = _bare(ops, spec)
    for label, g, _ in spec.pairs():
        h = h + _exchange(ops, label, g)
        if not rwa:
            x = ops.lower(label)
            cr = g * (x.dag() @ ops.lower("transmon").dag())
            h = h + cr + cr.dag()
    return h


def build_H_ts(spec: SystemSpec, rwa: bool = True) -> Operator:
    _require(spec, "ts")
    return build_H(spec, rwa)


def build_H_t_ens(spec: SystemSpec) -> Operator:
    _require(spec, "t-ens")
    return build_H(spec)


def build_H_s_t_s(spec: SystemSpec) -> Operator:
    _require(spec, "s-t-s")
    return build_H(spec)


def build_H_c_t_ens(spec: SystemSpec) -> Operator:
    _require(spec, "c-t-ens")
    return build_H(spec)


@dataclass(frozen=True)
class EffectiveParams:
    """Second-order parameters (angular). Shifts are g^2/Delta per partner label."""

    chi: float | None = None
    J: complex | None = None
    g_virtual: complex | None = None
    shifts: tuple[tuple[str, float], ...] = ()

    def shift(self, label: str) -> float:
        return dict(self.shifts)[label]


def check_dispersive(spec: SystemSpec, limit: float = DISPERSIVE_LIMIT) -> None:
    for label, g, delta in spec.pairs():
        if g == 0:
            continue
        if delta == 0 or abs(g / delta) > limit * (1 + 1e-9):
            ratio = math.inf if delta == 0 else abs(g / delta)
            raise NotDispersiveError(f"|g/Delta| = {ratio:.3g} for {label} exceeds {limit}")
        # slack so that a nominal g/Delta = 0.1 built from floats does not warn
        if abs(g / delta) > DISPERSIVE_WARN * (1 + 1e-9):
            warnings.warn(f"|g/Delta| = {abs(g / delta):.3g} for {label} is above {DISPERSIVE_WARN}", stacklevel=3)


def virtual_coupling(g1: complex, g2: complex, d1: float, d2: float) -> complex:
    """(g1 g2*/2)(1/d1 + 1/d2): exchange between two partners of a common transmon."""
    return 0.5 * g1 * np.conj(g2) * (1.0 / d1 + 1.0 / d2)


def dispersive_params(spec: SystemSpec) -> EffectiveParams:
    check_dispersive(spec)
    shifts = tuple((label, float(abs(g) ** 2 / d)) for label, g, d in spec.pairs())
    if spec.kind in ("ts", "t-ens"):
        return EffectiveParams(chi=shifts[0][1], shifts=shifts)
    (_, g1, d1), (_, g2, d2) = spec.pairs()
    coupling = complex(virtual_coupling(g1, g2, d1, d2))
    if spec.kind == "s-t-s":
        return EffectiveParams(J=coupling, shifts=shifts)
    return EffectiveParams(chi=shifts[1][1], g_virtual=coupling, shifts=shifts)


def _effective(spec: SystemSpec, with_constant: bool) -> Operator:
    """Second-order effective Hamiltonian in closed form.

    For bosonic partners the closed forms omit the c-number g^2/(2 Delta);
    ``with_constant`` adds it back so the operator equals U H U^dag to second
    order (it only shifts all energies equally).
    """
    params = dispersive_params(spec)
    ops = _Ops(spec.space())
    tz = ops.z("transmon")
    h = _bare(ops, spec)
    for label, _, _ in spec.pairs():
        chi = params.shift(label)
        if _is_boson(label):
            h = h + chi * (ops.n(label) @ tz) + (0.5 * chi) * tz
            if with_constant:
                h = h + (0.5 * chi) * ops.I
        else:
            h = h + (0.5 * chi) * tz - (0.5 * chi) * ops.z(label)
    if spec.kind in ("s-t-s", "c-t-ens"):
        (l1, _, _), (l2, _, _) = spec.pairs()
        x1, x2 = ops.lower(l1), ops.lower(l2)
        coupling = params.J if spec.kind == "s-t-s" else params.g_virtual
        ex = coupling * (x1.dag() @ x2)
        h = h + (ex + ex.dag()) @ tz
    return h


def build_dispersive_H_t_ens(spec: SystemSpec) -> Operator:
    """omega_s s^dag s + 1/2 (omega_t + 2 chi s^dag s + chi) tau_z."""
    _require(spec, "t-ens")
    return _effective(spec, with_constant=False)


def build_effective_H(spec: SystemSpec, with_constant: bool = False) -> Operator:
    return _effective(spec, with_constant)


def transmon_ladder(omega_t: float, chi: float, n_max: int = 2) -> list[float]:
    """Transmon transition frequency with n ensemble excitations: omega_t + (2n+1) chi."""
    return [omega_t + (2 * n + 1) * chi for n in range(n_max + 1)]


def sw_generator(spec: SystemSpec) -> Operator:
    """C = sum (g/Delta)(x^dag tau_- - h.c.); U = exp(-C)."""
    ops = _Ops(spec.space())
    c = 0.0 * ops.I
    tm = ops.lower("transmon")
    for label, g, delta in spec.pairs():
        x = ops.lower(label)
        term = (g / delta) * (x.dag() @ tm)
        c = c + term - term.dag()
    return c


def _expm_minus(c: Operator) -> np.ndarray:
    """exp(-C) for anti-hermitian C, via the hermitian K = iC (exp(-C) = exp(iK))."""
    k = 1j * c.matrix
    w, v = np.linalg.eigh(0.5 * (k + k.conj().T))
    return (v * np.exp(1j * w)) @ v.conj().T


def _sector_mask(spec: SystemSpec, max_excitations: int) -> np.ndarray:
    n = np.diag(excitation_number(spec.space()).matrix).real
    # two-level factors count |up> (level 1) as one excitation
    return n <= max_excitations + 1e-9


@dataclass(frozen=True)
class SWResult:
    transformed: Operator
    analytic: Operator
    residual: float
    residual_low: float  # restricted to the 0- and 1-excitation sectors
    scale: float  # max |H| entry

    @property
    def relative(self) -> float:
        return self.residual / self.scale


def sw_transform(spec: SystemSpec) -> SWResult:
    """Exact U H U^dag against the second-order closed form (constant restored)."""
    check_dispersive(spec)
    h = build_H(spec)
    u = _expm_minus(sw_generator(spec))
    transformed = Operator(h.space, u @ h.matrix @ u.conj().T)
    analytic = _effective(spec, with_constant=True)
    diff = np.abs(transformed.matrix - analytic.matrix)
    mask = _sector_mask(spec, 1)
    low = diff[np.ix_(mask, mask)]
    return SWResult(transformed, analytic, float(diff.max()), float(low.max()), h.norm_max())


@dataclass(frozen=True)
class IdentityCheck:
    identity: str
    max_error: float
    passed: bool

    def as_dict(self) -> dict:
        return {"identity": self.identity, "max_error": self.max_error, "pass": self.passed}


def _safe_projector(space: HilbertSpace) -> np.ndarray:
    """Diagonal mask excluding the top Fock level of every bosonic factor."""
    lv = space.levels()
    keep = np.ones(space.dim, dtype=bool)
    for k, (label, dim) in enumerate(space.factors):
        if _is_boson(label):
            keep &= lv[:, k] < dim - 1
    return keep


def _identities_sts():
    space = HilbertSpace.of(transmon=2, spin1=2, spin2=2)
    o = _Ops(space)
    tm, s1, s2 = o.lower("transmon"), o.lower("spin1"), o.lower("spin2")
    tp, p1, p2 = tm.dag(), s1.dag(), s2.dag()
    tz, z1, z2 = o.z("transmon"), o.z("spin1"), o.z("spin2")
    X1 = p1 @ tm - s1 @ tp
    X2 = p2 @ tm - s2 @ tp
    V1 = p1 @ tm + s1 @ tp
    V2 = p2 @ tm + s2 @ tp
    ex = (p1 @ s2 + s1 @ p2) @ tz
    zero = 0.0 * o.I
    return space, [
        ("[tau_z, X1] = -2 s1+ tau- - 2 s1- tau+", commutator(tz, X1), -2.0 * V1),
        ("[tau_z, X2] = -2 s2+ tau- - 2 s2- tau+", commutator(tz, X2), -2.0 * V2),
        ("[s_z1, X1] = 2 s1+ tau- + 2 s1- tau+", commutator(z1, X1), 2.0 * V1),
        ("[s_z1, X2] = 0", commutator(z1, X2), zero),
        ("[s_z2, X1] = 0", commutator(z2, X1), zero),
        ("[s_z2, X2] = 2 s2+ tau- + 2 s2- tau+", commutator(z2, X2), 2.0 * V2),
        ("[s1+ tau- + s1- tau+, X1] = tau_z - s_z1", commutator(V1, X1), tz - z1),
        ("[s1+ tau- + s1- tau+, X2] = (s1+ s2- + s1- s2+) tau_z", commutator(V1, X2), ex),
        ("[s2+ tau- + s2- tau+, X1] = (s1+ s2- + s1- s2+) tau_z", commutator(V2, X1), ex),
        ("[s2+ tau- + s2- tau+, X2] = tau_z - s_z2", commutator(V2, X2), tz - z2),
    ]


def _identities_ctens(n_cavity: int, n_ensemble: int):
    space = HilbertSpace.of(cavity=n_cavity, transmon=2, ensemble=n_ensemble)
    o = _Ops(space)
    a, tm, s = o.lower("cavity"), o.lower("transmon"), o.lower("ensemble")
    ad, tp, sd = a.dag(), tm.dag(), s.dag()
    tz = o.z("transmon")
    Y1 = ad @ tm - a @ tp
    Y2 = sd @ tm - s @ tp
    V1 = ad @ tm + a @ tp
    V2 = sd @ tm + s @ tp
    ex = (ad @ s + a @ sd) @ tz
    zero = 0.0 * o.I
    return space, [
        ("[tau_z, Y1] = -2 a+ tau- - 2 a tau+", commutator(tz, Y1), -2.0 * V1),
        ("[tau_z, Y2] = -2 s+ tau- - 2 s tau+", commutator(tz, Y2), -2.0 * V2),
        ("[a+a, Y1] = a+ tau- + a tau+", commutator(ad @ a, Y1), V1),
        ("[a+a, Y2] = 0", commutator(ad @ a, Y2), zero),
        ("[s+s, Y1] = 0", commutator(sd @ s, Y1), zero),
        ("[s+s, Y2] = s+ tau- + s tau+", commutator(sd @ s, Y2), V2),
        ("[a+ tau- + a tau+, Y1] = 2 a+a tau_z + tau_z + 1", commutator(V1, Y1), 2.0 * (ad @ a @ tz) + tz + o.I),
        ("[a+ tau- + a tau+, Y2] = (a+ s + a s+) tau_z", commutator(V1, Y2), ex),
        ("[s+ tau- + s tau+, Y1] = (a+ s + a s+) tau_z", commutator(V2, Y1), ex),
        ("[s+ tau- + s tau+, Y2] = 2 s+s tau_z + tau_z + 1", commutator(V2, Y2), 2.0 * (sd @ s @ tz) + tz + o.I),
    ]


def commutator_table_check(kind: str, n_cavity: int = 5, n_ensemble: int = 5, tol: float = 1e-12) -> list[IdentityCheck]:
    """Verify the commutator identities behind the second-order expansion.

    Bosonic identities are compared on the subspace where no mode occupies its
    top truncated level.
    """
    if kind == "s-t-s":
        space, rows = _identities_sts()
    elif kind == "c-t-ens":
        if min(n_cavity, n_ensemble) < 3:
            raise ValidationError("truncations must be >= 3")
        space, rows = _identities_ctens(n_cavity, n_ensemble)
    else:
        raise ValidationError(f"commutator tables exist for 's-t-s' and 'c-t-ens', not {kind!r}")
    keep = _safe_projector(space)
    out = []
    for name, lhs, rhs in rows:
        d = np.abs((lhs - rhs).matrix)[np.ix_(keep, keep)]
        err = float(d.max())
        out.append(IdentityCheck(name, err, err < tol))
    return out


@dataclass(frozen=True)
class QNDReport:
    dispersive_norm: float
    full_norm: float


def qnd_invariant_check(spec: SystemSpec) -> QNDReport:
    """max-entry norms of [s^dag s tau_z, H] for the dispersive and the full H."""
    _require(spec, "t-ens")
    ops = _Ops(spec.space())
    obs = ops.n("ensemble") @ ops.z("transmon")
    disp = commutator(obs, build_dispersive_H_t_ens(spec))
    full = commutator(obs, build_H_t_ens(spec))
    return QNDReport(disp.norm_max(), full.norm_max())


def excitation_commutator(h: Operator) -> float:
    """max |[N_exc, H]| with N_exc summing every factor's level."""
    return commutator(excitation_number(h.space), h).norm_max()


def dressed_energy(h: Operator, levels: dict[str, int]) -> float:
    """Eigenvalue of the eigenvector with the largest overlap on a bare product state."""
    w, v = h.eigh()
    lv = h.space.levels()
    idx = [levels.get(label, 0) for label in h.space.labels]
    row = int(np.flatnonzero((lv == idx).all(axis=1))[0])
    return float(w[int(np.argmax(np.abs(v[row])))])


def exact_transmon_transitions(spec: SystemSpec, n_max: int = 1) -> list[float]:
    """Transmon transition frequency in each ensemble Fock sector from the exact spectrum."""
    _require(spec, "t-ens")
    h = build_H_t_ens(spec)
    return [
        dressed_energy(h, {"transmon": 1, "ensemble": n}) - dressed_energy(h, {"transmon": 0, "ensemble": n})
        for n in range(n_max + 1)
    ]


def spectrum_comparison(spec: SystemSpec, max_excitations: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exact vs dispersive eigenvalues in the low-excitation sectors.

    Both Hamiltonians conserve the excitation number, so each sector block is
    diagonalised separately and the sorted eigenvalues are paired. Energies
    are measured from the sector-0 ground state of each Hamiltonian.
    """
    exact = build_H(spec).matrix
    disp = _effective(spec, with_constant=False).matrix
    nexc = np.rint(np.diag(excitation_number(spec.space()).matrix).real).astype(int)
    ex_vals, di_vals = [], []
    for n in range(max_excitations + 1):
        idx = np.flatnonzero(nexc == n)
        ex_vals.append(np.linalg.eigvalsh(exact[np.ix_(idx, idx)]))
        di_vals.append(np.linalg.eigvalsh(disp[np.ix_(idx, idx)]))
    ex = np.concatenate(ex_vals)
    di = np.concatenate(di_vals)
    return ex - ex[0], di - di[0]
