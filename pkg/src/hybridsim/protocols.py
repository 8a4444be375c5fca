"""Time-domain protocols: SWAP, dispersive QND readout, virtual exchange.

States are density matrices on the spec's Hilbert space. Every Hamiltonian here
conserves the total excitation number N, so evolution runs in the frame
rotating at the ensemble (or spin) frequency, H - omega_ref N. Populations are
unchanged by that frame, and the amplitude-damping dissipators are invariant
under it because each collapse operator lowers N by exactly one.

Pulses are instantaneous ideal rotations between dressed states of the current
Hamiltonian; a pulse acts on every transmon transition that lies within half
its bandwidth (pi / duration, angular) of the pulse frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constants import TWO_PI
from .errors import PreconditionError, ValidationError
from .hamiltonians import (
    SystemSpec,
    _Ops,
    _effective,
    build_H,
    check_dispersive,
    dispersive_params,
)
from .quantum import HilbertSpace, Operator, basis_state, evolve_damped, evolve_trace, excitation_number, partial_trace, propagator

DEFAULT_DARK_LEAK = 1.0 / 3e-6
DEFAULT_PULSE_DURATION = 1e-6
RESONANCE_RTOL = 1e-6


@dataclass(frozen=True)
class DecoherenceSpec:
    transmon_T1: float | None = None
    dark_leak_rate: float | None = None

    def __post_init__(self):
        if self.transmon_T1 is not None and not self.transmon_T1 > 0:
            raise ValidationError("transmon_T1 must be positive when given")
        if self.dark_leak_rate is not None and not self.dark_leak_rate > 0:
            raise ValidationError("dark_leak_rate must be positive when given")

    def collapse(self, spec: SystemSpec) -> list[tuple[Operator, float]]:
        ops = _Ops(spec.space())
        out = []
        if self.transmon_T1:
            out.append((ops.lower("transmon"), 1.0 / self.transmon_T1))
        if self.dark_leak_rate:
            if "ensemble" not in spec.space().labels:
                raise ValidationError("dark-mode leakage needs an ensemble mode")
            # the leaked excitation goes to uncoupled dark modes, traced out here
            out.append((ops.lower("ensemble"), self.dark_leak_rate))
        return out


def _evolve(h: Operator, rho: np.ndarray, t: float, collapse) -> np.ndarray:
    """Evolve on the block of excitation numbers up to the largest one occupied.

    That block is invariant (H conserves N, every collapse operator lowers it),
    so the restriction is exact and keeps the Liouvillian small.
    """
    if t == 0:
        return rho
    n = excitation_number(h.space).matrix.diagonal().real
    occupied = np.abs(np.diagonal(rho)) > 1e-14
    keep = np.flatnonzero(n <= n[occupied].max() + 0.5)
    sub = HilbertSpace.of(block=len(keep))
    ix = np.ix_(keep, keep)
    h_sub = Operator(sub, h.matrix[ix])
    out = np.zeros_like(rho)
    if any(rate > 0 for _, rate in collapse):
        c_sub = [(Operator(sub, op.matrix[ix]), rate) for op, rate in collapse]
        out[ix] = evolve_damped(h_sub, c_sub, rho[ix], t, check_tol=1e-7)
    else:
        u = propagator(h_sub, t)
        out[ix] = u @ rho[ix] @ u.conj().T
    return out


def _rotating(h: Operator, omega_ref: float) -> Operator:
    return h - omega_ref * excitation_number(h.space)


def _pop(rho: np.ndarray, space, levels: dict) -> float:
    psi = basis_state(space, levels).amplitudes
    return float(np.real(np.vdot(psi, rho @ psi)))


# ---------------------------------------------------------------- SWAP


@dataclass(frozen=True)
class SwapResult:
    fidelity: float
    t_swap: float
    times: np.ndarray
    p_transmon: np.ndarray  # population of |up, G>
    p_bright: np.ndarray  # population of |down, B>


def _require_resonant(a: float, b: float, what: str) -> None:
    if abs(a - b) > RESONANCE_RTOL * max(abs(a), abs(b)):
        raise PreconditionError(f"{what} are not resonant (relative detuning {abs(a - b) / max(a, b):.3g})")


def swap_sim(spec: SystemSpec, decoherence: DecoherenceSpec | None = None, n_points: int = 201) -> SwapResult:
    """Resonant transmon -> bright-mode exchange starting from |up, G>.

    The fidelity is the |down, B> population at t = pi / (2 g); the trace
    covers one full exchange period pi / g.
    """
    if spec.kind != "t-ens":
        raise ValidationError("swap_sim needs a 't-ens' system")
    _require_resonant(spec.omega_t, spec.omega_s, "transmon and ensemble")
    g = abs(spec.g_tens)
    if g == 0:
        raise PreconditionError("g_tens must be nonzero for a SWAP")
    space = spec.space()
    h = _rotating(build_H(spec), spec.omega_s)
    t_swap = math.pi / (2.0 * g)
    times = np.linspace(0.0, math.pi / g, n_points)
    up_g, down_b = {"transmon": 1, "ensemble": 0}, {"transmon": 0, "ensemble": 1}
    psi0 = basis_state(space, up_g)
    collapse = (decoherence or DecoherenceSpec()).collapse(spec)
    if not any(rate > 0 for _, rate in collapse):
        amps = evolve_trace(h, psi0, times)
        i_up = np.ravel_multi_index((1, 0), space.dims)
        i_b = np.ravel_multi_index((0, 1), space.dims)
        p_up, p_b = np.abs(amps[:, i_up]) ** 2, np.abs(amps[:, i_b]) ** 2
        final = evolve_trace(h, psi0, [t_swap])[0]
        return SwapResult(float(abs(final[i_b]) ** 2), t_swap, times, p_up, p_b)
    rho = psi0.density()
    p_up, p_b = [_pop(rho, space, up_g)], [_pop(rho, space, down_b)]
    for t0, t1 in zip(times[:-1], times[1:]):
        rho = evolve_damped(h, collapse, rho, t1 - t0, check_tol=1e-7)
        p_up.append(_pop(rho, space, up_g))
        p_b.append(_pop(rho, space, down_b))
    rho_swap = evolve_damped(h, collapse, psi0.density(), t_swap)
    return SwapResult(_pop(rho_swap, space, down_b), t_swap, times, np.array(p_up), np.array(p_b))


# ---------------------------------------------------------------- pulses


@dataclass(frozen=True)
class BandwidthCheck:
    selective: bool
    bandwidth_hz: float  # 1 / duration
    splitting_hz: float  # 2 chi / 2 pi
    feasible: bool | None  # duration shorter than the dark-mode leak time
    marginal: bool

    @property
    def classification(self) -> str:
        return "selective" if self.selective else "non-selective"


def pulse_bandwidth_check(chi: float, duration: float, dark_leak_rate: float | None = None) -> BandwidthCheck:
    """Frequency selectivity of a pulse against the 2 chi splitting.

    Selective iff 1/duration < 2 chi / 2 pi. With a leak rate the pulse must
    also finish before leakage (duration < 1/rate); it is flagged marginal
    once it uses more than half of that budget.
    """
    if not (chi != 0 and duration > 0):
        raise ValidationError("chi must be nonzero and duration positive")
    bw = 1.0 / duration
    split = 2.0 * abs(chi) / TWO_PI
    feasible = None
    marginal = False
    if dark_leak_rate is not None:
        if dark_leak_rate <= 0:
            raise ValidationError("dark_leak_rate must be positive")
        feasible = duration * dark_leak_rate < 1.0
        marginal = duration * dark_leak_rate > 0.5
    return BandwidthCheck(bw < split, bw, split, feasible, marginal)


STEP_KINDS = ("set_detuning", "wait", "pi_pulse", "half_pi_pulse", "project")


@dataclass(frozen=True)
class Step:
    """One protocol step.

    set_detuning: ``detuning`` is the cavity-dressed transmon frequency minus
    omega_s (angular); None restores the spec's operating point.
    wait: ``time`` seconds, or ``swaps`` multiples of pi / (2 g_tens).
    pulses: ``frequency`` (angular) or ``chi_offset`` k meaning the dressed
    transmon frequency + k chi; ``probe`` marks the readout pulse.
    """

    kind: str
    detuning: float | None = None
    time: float | None = None
    swaps: float | None = None
    target: str = "transmon"
    frequency: float | None = None
    chi_offset: float | None = None
    duration: float = DEFAULT_PULSE_DURATION
    probe: bool = False

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValidationError(f"unknown step kind {self.kind!r}")
        if self.target != "transmon":
            raise ValidationError("only the transmon can be pulsed or projected")
        if self.kind == "wait":
            if (self.time is None) == (self.swaps is None):
                raise ValidationError("wait needs exactly one of time / swaps")
            if (self.time or 0) < 0 or (self.swaps or 0) < 0:
                raise ValidationError("wait times must be >= 0")
        if self.kind in ("pi_pulse", "half_pi_pulse"):
            if (self.frequency is None) == (self.chi_offset is None):
                raise ValidationError("pulse needs exactly one of frequency / chi_offset")
            if self.frequency is not None and self.frequency <= 0:
                raise ValidationError("pulse frequency must be positive")
            if self.duration <= 0:
                raise ValidationError("pulse duration must be positive")


@dataclass(frozen=True)
class PulseSequence:
    steps: tuple[Step, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if sum(s.kind == "project" for s in self.steps) > 1:
            raise ValidationError("at most one measurement per sequence run")

    def probe_indices(self) -> list[int]:
        flagged = [i for i, s in enumerate(self.steps) if s.probe]
        if flagged:
            return flagged
        pulses = [i for i, s in enumerate(self.steps) if s.kind in ("pi_pulse", "half_pi_pulse")]
        return pulses[-1:]

    def without(self, indices: Sequence[int]) -> "PulseSequence":
        return PulseSequence(tuple(s for i, s in enumerate(self.steps) if i not in set(indices)))


def readout_sequence(chi_offset: float = 1.0, duration: float = DEFAULT_PULSE_DURATION, swap: bool = True) -> PulseSequence:
    """Prepare, excite at omega_t + chi, SWAP at resonance, detune, probe at omega_t + chi, measure."""
    steps = [Step("pi_pulse", chi_offset=chi_offset, duration=duration)]
    if swap:
        steps += [Step("set_detuning", detuning=0.0), Step("wait", swaps=1.0), Step("set_detuning", detuning=None)]
    steps += [Step("pi_pulse", chi_offset=chi_offset, duration=duration, probe=True), Step("project")]
    return PulseSequence(tuple(steps))


def probe_sequence(chi_offset: float = 1.0, duration: float = DEFAULT_PULSE_DURATION) -> PulseSequence:
    return PulseSequence((Step("pi_pulse", chi_offset=chi_offset, duration=duration, probe=True), Step("project")))


def _cavity_pull(spec: SystemSpec, omega_t: float) -> float:
    if spec.kind != "c-t-ens" or spec.g_tc == 0:
        return 0.0
    return abs(spec.g_tc) ** 2 / (omega_t - spec.omega_r)


def _omega_t_for(spec: SystemSpec, detuning: float) -> float:
    """Bare transmon frequency whose cavity-dressed value is omega_s + detuning."""
    target = spec.omega_s + detuning
    w = target
    for _ in range(50):
        w_new = target - _cavity_pull(spec, w)
        if abs(w_new - w) < 1e-9:
            break
        w = w_new
    return w_new


class _Runner:
    """Executes a sequence on one spec; ``dynamics`` picks full or dispersive H when detuned."""

    def __init__(self, spec: SystemSpec, decoherence: DecoherenceSpec | None, dynamics: str):
        if spec.kind not in ("t-ens", "c-t-ens"):
            raise ValidationError("QND readout needs a 't-ens' or 'c-t-ens' system")
        if dynamics not in ("full", "dispersive"):
            raise ValidationError("dynamics must be 'full' or 'dispersive'")
        check_dispersive(spec)
        self.base = spec
        self.spec = spec
        self.dynamics = dynamics
        self.collapse = (decoherence or DecoherenceSpec()).collapse(spec)
        self.space = spec.space()
        self.ops = _Ops(self.space)
        self.n_ens = self.ops.n("ensemble").matrix
        self.n_exc = excitation_number(self.space).matrix
        self.max_drift = 0.0

    def hamiltonian(self) -> Operator:
        resonant = abs(self.spec.omega_t + _cavity_pull(self.spec, self.spec.omega_t) - self.spec.omega_s) < 1e-3 * abs(
            self.spec.g_tens
        )
        if self.dynamics == "dispersive" and not resonant:
            return _effective(self.spec, with_constant=False)
        return build_H(self.spec)

    def chi(self) -> float:
        return dispersive_params(self.base).shift("ensemble")

    def dressed_pairs(self, h: Operator):
        """(E_down, E_up, v_down, v_up) per (cavity, ensemble) sector."""
        w, v = h.eigh()
        lv = self.space.levels()
        it = self.space.index("transmon")
        others = [k for k in range(len(self.space.dims)) if k != it]
        assign = np.argmax(np.abs(v), axis=1)  # bare row -> eigenvector
        pairs = []
        for row in np.flatnonzero(lv[:, it] == 0):
            key = lv[row, others]
            up_row = int(np.flatnonzero((lv[:, it] == 1) & (lv[:, others] == key).all(axis=1))[0])
            jd, ju = int(assign[row]), int(assign[up_row])
            if jd == ju:
                continue
            pairs.append((w[jd], w[ju], v[:, jd], v[:, ju]))
        return pairs

    def transmon_frequency(self) -> float:
        return self.spec.omega_t + _cavity_pull(self.spec, self.spec.omega_t)

    def pulse(self, rho: np.ndarray, step: Step) -> np.ndarray:
        h = self.hamiltonian()
        freq = step.frequency if step.frequency is not None else self.transmon_frequency() + step.chi_offset * self.chi()
        half_bw = math.pi / step.duration
        theta = math.pi if step.kind == "pi_pulse" else 0.5 * math.pi
        u = np.eye(self.space.dim, dtype=complex)
        c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
        for e_d, e_u, vd, vu in self.dressed_pairs(h):
            if abs((e_u - e_d) - freq) <= half_bw:
                pd, pu = np.outer(vd, vd.conj()), np.outer(vu, vu.conj())
                flip = np.outer(vu, vd.conj()) + np.outer(vd, vu.conj())
                u += (c - 1.0) * (pd + pu) - 1j * s * flip
        return u @ rho @ u.conj().T

    def p_excited(self, rho: np.ndarray) -> float:
        proj = sum(np.outer(vu, vu.conj()) for _, _, _, vu in self.dressed_pairs(self.hamiltonian()))
        return float(np.real(np.trace(proj @ rho)))

    def run(self, seq: PulseSequence, rho: np.ndarray):
        probes = set(seq.probe_indices())
        before = after = None
        p_exc = None
        for i, step in enumerate(seq.steps):
            if step.kind == "set_detuning":
                w = self.base.omega_t if step.detuning is None else _omega_t_for(self.base, step.detuning)
                self.spec = replace(self.base, omega_t=w)
            elif step.kind == "wait":
                t = step.time if step.time is not None else step.swaps * math.pi / (2.0 * abs(self.base.g_tens))
                h = _rotating(self.hamiltonian(), self.base.omega_s)
                n0 = float(np.real(np.trace(self.n_exc @ rho)))
                rho = _evolve(h, rho, t, self.collapse)
                if not self.collapse:
                    self.max_drift = max(self.max_drift, abs(float(np.real(np.trace(self.n_exc @ rho))) - n0))
            elif step.kind in ("pi_pulse", "half_pi_pulse"):
                if i in probes:
                    before = float(np.real(np.trace(self.n_ens @ rho)))
                rho = self.pulse(rho, step)
                if i in probes:
                    after = float(np.real(np.trace(self.n_ens @ rho)))
            else:
                p_exc = self.p_excited(rho)
        if p_exc is None:
            p_exc = self.p_excited(rho)
        return rho, p_exc, before, after


@dataclass(frozen=True)
class QNDRecord:
    p_excited_probe: float
    p_excited_reference: float
    p_bright: float  # probability the readout infers s^dag|G>
    inferred_state: str
    ensemble_n_before_probe: float | None
    ensemble_n_after_probe: float | None
    excitation_drift: float
    bandwidth: BandwidthCheck
    final_rho: np.ndarray = field(repr=False)
    reset_rho: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "p_excited_probe": self.p_excited_probe,
            "p_excited_reference": self.p_excited_reference,
            "p_bright": self.p_bright,
            "inferred_state": self.inferred_state,
            "ensemble_n_before_probe": self.ensemble_n_before_probe,
            "ensemble_n_after_probe": self.ensemble_n_after_probe,
            "excitation_drift": self.excitation_drift,
            "pulse_classification": self.bandwidth.classification,
            "pulse_bandwidth_hz": self.bandwidth.bandwidth_hz,
            "splitting_hz": self.bandwidth.splitting_hz,
            "pulse_feasible": self.bandwidth.feasible,
            "pulse_marginal": self.bandwidth.marginal,
        }


def qnd_sequence_sim(
    spec: SystemSpec,
    seq: PulseSequence | None = None,
    decoherence: DecoherenceSpec | None = None,
    dynamics: str = "full",
    initial: np.ndarray | None = None,
) -> QNDRecord:
    """Run a readout sequence and infer the bright-mode state.

    The inference is differential: the sequence is run once as given and once
    with its probe pulse(s) removed. A probe that flips the transmon means the
    ensemble sits in the sector the probe addresses (|G> for the omega_t + chi
    probe); an unresponsive transmon means s^dag|G>. ``p_bright`` is one minus
    the probe response.
    """
    seq = seq or readout_sequence()
    runner = _Runner(spec, decoherence, dynamics)
    if initial is None:
        rho0 = basis_state(runner.space, {}).density()
    else:
        rho0 = np.array(initial, dtype=complex)
    rho, p_probe, before, after = runner.run(seq, rho0.copy())
    drift = runner.max_drift
    ref_runner = _Runner(spec, decoherence, dynamics)
    _, p_ref, _, _ = ref_runner.run(seq.without(seq.probe_indices()), rho0.copy())
    response = abs(p_probe - p_ref)
    p_bright = 1.0 - response
    probes = [seq.steps[i] for i in seq.probe_indices()]
    duration = probes[0].duration if probes else DEFAULT_PULSE_DURATION
    bw = pulse_bandwidth_check(runner.chi(), duration, (decoherence or DecoherenceSpec()).dark_leak_rate)
    return QNDRecord(
        p_excited_probe=p_probe,
        p_excited_reference=p_ref,
        p_bright=p_bright,
        inferred_state="s†|G⟩" if p_bright >= 0.5 else "|G⟩",
        ensemble_n_before_probe=before,
        ensemble_n_after_probe=after,
        excitation_drift=drift,
        bandwidth=bw,
        final_rho=rho,
        reset_rho=_reset_transmon(rho, runner.space),
    )


def _reset_transmon(rho: np.ndarray, space) -> np.ndarray:
    """Non-selective transmon measurement followed by an ideal reset to |down>."""
    keep = [lb for lb in space.labels if lb != "transmon"]
    reduced = partial_trace(rho, space, keep)
    ground = np.zeros((2, 2))
    ground[0, 0] = 1.0
    dims = [d for lb, d in space.factors if lb != "transmon"]
    it = space.index("transmon")
    # rebuild in space order: kron over factors with transmon inserted at its index
    left = int(np.prod(dims[:it]))
    right = int(np.prod(dims[it:]))
    r = reduced.reshape(left, right, left, right)
    out = np.einsum("abcd,xy->axbcyd", r, ground).reshape(space.dim, space.dim)
    return out


# ---------------------------------------------------------------- virtual exchange


@dataclass(frozen=True)
class VirtualExchangeResult:
    times: np.ndarray
    exact_source: np.ndarray
    exact_target: np.ndarray
    predicted_source: np.ndarray
    predicted_target: np.ndarray
    max_deviation: float
    rate: float  # |J| or |g_virtual|, angular
    transfer_time: float
    transfer_fidelity: float  # target population at pi / (2 rate)


def _exchange_labels(spec: SystemSpec) -> tuple[str, str, float]:
    check_dispersive(spec)
    params = dispersive_params(spec)
    if spec.kind == "s-t-s":
        _require_resonant(spec.omega_s1, spec.omega_s2, "the two spins")
        return "spin1", "spin2", abs(params.J)
    if spec.kind == "c-t-ens":
        _require_resonant(spec.omega_r, spec.omega_s, "cavity and ensemble")
        return "cavity", "ensemble", abs(params.g_virtual)
    raise ValidationError("virtual exchange needs an 's-t-s' or 'c-t-ens' system")


def virtual_exchange_sim(
    spec: SystemSpec, t_grid: Sequence[float] | None = None, transmon_up: bool = False, n_points: int = 401
) -> VirtualExchangeResult:
    """Exact evolution of the full Hamiltonian against cos^2 / sin^2 at the effective rate."""
    src, dst, rate = _exchange_labels(spec)
    if rate == 0:
        raise PreconditionError("effective exchange rate is zero")
    tq = 1 if transmon_up else 0
    space = spec.space()
    ref = spec.omega_s1 if spec.kind == "s-t-s" else spec.omega_s
    h = _rotating(build_H(spec), ref)
    psi0 = basis_state(space, {src: 1, "transmon": tq})
    times = np.linspace(0.0, math.pi / rate, n_points) if t_grid is None else np.asarray(t_grid, dtype=float)
    amps = evolve_trace(h, psi0, times)
    i_src = np.ravel_multi_index([{src: 1, "transmon": tq}.get(lb, 0) for lb in space.labels], space.dims)
    i_dst = np.ravel_multi_index([{dst: 1, "transmon": tq}.get(lb, 0) for lb in space.labels], space.dims)
    p_src, p_dst = np.abs(amps[:, i_src]) ** 2, np.abs(amps[:, i_dst]) ** 2
    pred_src, pred_dst = np.cos(rate * times) ** 2, np.sin(rate * times) ** 2
    dev = float(max(np.abs(p_src - pred_src).max(), np.abs(p_dst - pred_dst).max()))
    t_tr = math.pi / (2.0 * rate)
    fid = float(abs(evolve_trace(h, psi0, [t_tr])[0, i_dst]) ** 2)
    return VirtualExchangeResult(times, p_src, p_dst, pred_src, pred_dst, dev, rate, t_tr, fid)


def protection_factor(spec: SystemSpec) -> dict[str, float]:
    """(g/Delta)^2 per coupled partner: the fraction of transmon decay it inherits."""
    out = {}
    for label, g, delta in spec.pairs():
        out[label] = 0.0 if g == 0 else float(abs(g / delta) ** 2)
    return out


def effective_loss_rate(spec: SystemSpec, transmon_T1: float, duration: float | None = None) -> float:
    """Excitation-loss rate during virtual exchange with a decaying transmon.

    Starts with the source excited and the transmon down, evolves under the
    full Hamiltonian with transmon amplitude damping, and returns the log-slope
    of the total excitation over the second half of ``duration`` (default
    pi / rate), which skips the initial dressing transient.
    """
    src, _, rate = _exchange_labels(spec)
    duration = math.pi / rate if duration is None else duration
    space = spec.space()
    ref = spec.omega_s1 if spec.kind == "s-t-s" else spec.omega_s
    h = _rotating(build_H(spec), ref)
    collapse = DecoherenceSpec(transmon_T1=transmon_T1).collapse(spec)
    n_op = excitation_number(space).matrix
    rho = basis_state(space, {src: 1}).density()
    rho_mid = evolve_damped(h, collapse, rho, 0.5 * duration)
    rho_end = evolve_damped(h, collapse, rho_mid, 0.5 * duration, check_tol=1e-7)
    n_mid = float(np.real(np.trace(n_op @ rho_mid)))
    n_end = float(np.real(np.trace(n_op @ rho_end)))
    return math.log(n_mid / n_end) / (0.5 * duration)
