"""Dense operators on small labelled tensor-product Hilbert spaces.

Conventions: level 0 of every factor is its ground state, the lowering operator
has ``sqrt(k)`` at ``(k-1, k)``, and for a two-level factor
``sigma_z = sigma_+ sigma_- - sigma_- sigma_+ = diag(-1, +1)``. Kronecker
products follow the factor order of the space (first factor most significant).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ValidationError

HERMITIAN_RTOL = 1e-12
EXPM_MAX_DIM = 64


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        if not factors:
            raise ValidationError("a Hilbert space needs at least one factor")
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate factor labels in {labels}")
        for label, dim in factors:
            if dim < 2:
                raise ValidationError(f"factor {label!r} has dimension {dim} < 2")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, **dims: int) -> "HilbertSpace":
        """``HilbertSpace.of(transmon=2, spin=2)``; keyword order is factor order."""
        return cls(tuple(dims.items()))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown factor label {label!r}; space has {self.labels}") from None

    def factor_dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def levels(self) -> np.ndarray:
        """Integer array (dim, n_factors): the level of each factor for every basis index."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.dim
        if m.shape != (n, n):
            raise ValidationError(f"matrix shape {m.shape} does not match space dimension {n}")
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator") -> None:
        if other.space != self.space:
            raise ValidationError(f"space mismatch: {self.space.factors} vs {other.space.factors}")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, c):
        if np.isscalar(c):
            return Operator(self.space, c * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            if other.space != self.space:
                raise ValidationError("state and operator live on different spaces")
            return StateVector(self.space, self.matrix @ other.amplitudes, normalize=False)
        return NotImplemented

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def hermiticity_error(self) -> float:
        """max |H - H^dagger| relative to max |H| (0 for the zero operator)."""
        scale = np.abs(self.matrix).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.matrix - self.matrix.conj().T).max() / scale)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermiticity_error() < rtol

    def norm_max(self) -> float:
        return float(np.abs(self.matrix).max())

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return np.linalg.eigh(herm)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (self.space.dim,):
            raise ValidationError(f"state has {a.size} amplitudes, space dimension is {self.space.dim}")
        if self.normalize:
            nrm = np.linalg.norm(a)
            if nrm == 0.0:
                raise ValidationError("zero state vector")
            a = a / nrm
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expect(self, op: Operator) -> float:
        return float(np.real(np.vdot(self.amplitudes, op.matrix @ self.amplitudes)))

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def basis_state(space: HilbertSpace, levels: Mapping[str, int] | Sequence[int]) -> StateVector:
    """Product basis state; ``levels`` maps labels to levels (missing labels -> 0)."""
    if isinstance(levels, Mapping):
        unknown = set(levels) - set(space.labels)
        if unknown:
            raise ValidationError(f"unknown labels {sorted(unknown)}")
        idx = [int(levels.get(label, 0)) for label in space.labels]
    else:
        idx = [int(k) for k in levels]
    if len(idx) != len(space.dims) or any(not 0 <= k < d for k, d in zip(idx, space.dims)):
        raise ValidationError(f"levels {idx} out of range for dims {space.dims}")
    amps = np.zeros(space.dim, dtype=complex)
    amps[np.ravel_multi_index(idx, space.dims)] = 1.0
    return StateVector(space, amps)


def single(n: int, label: str = "mode") -> HilbertSpace:
    return HilbertSpace(((label, n),))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def zero(space: HilbertSpace) -> Operator:
    return Operator(space, np.zeros((space.dim, space.dim)))


def ladder(n: int, label: str = "mode") -> Operator:
    """Truncated lowering operator on an ``n``-level mode."""
    if int(n) != n or n < 2:
        raise ValidationError(f"ladder dimension must be an integer >= 2, got {n}")
    n = int(n)
    return Operator(single(n, label), np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1))


def number(n: int, label: str = "mode") -> Operator:
    b = ladder(n, label)
    return b.dag() @ b


def sigma_minus(label: str = "qubit") -> Operator:
    return ladder(2, label)


def sigma_plus(label: str = "qubit") -> Operator:
    return ladder(2, label).dag()


def sigma_z(label: str = "qubit") -> Operator:
    sp, sm = sigma_plus(label), sigma_minus(label)
    return sp @ sm - sm @ sp


def sigma_x(label: str = "qubit") -> Operator:
    return sigma_plus(label) + sigma_minus(label)


def embed(op: Operator, label: str, space: HilbertSpace) -> Operator:
    """``I (x) ... (x) op (x) ... (x) I`` with ``op`` acting on factor ``label``."""
    k = space.index(label)
    if op.space.dim != space.dims[k]:
        raise ValidationError(
            f"operator dimension {op.space.dim} != dimension {space.dims[k]} of factor {label!r}"
        )
    left = int(np.prod(space.dims[:k]))
    right = int(np.prod(space.dims[k + 1:]))
    m = np.kron(np.kron(np.eye(left), op.matrix), np.eye(right))
    return Operator(space, m)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def excitation_number(space: HilbertSpace, labels: Iterable[str] | None = None) -> Operator:
    """Sum of level numbers over the given factors (all factors by default)."""
    labels = space.labels if labels is None else tuple(labels)
    diag = space.levels()[:, [space.index(lb) for lb in labels]].sum(axis=1)
    return Operator(space, np.diag(diag.astype(float)))


def propagator(h: Operator, t: float) -> np.ndarray:
    """exp(-i H t) via eigendecomposition (hbar = 1)."""
    _require_hermitian(h)
    w, v = h.eigh()
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _require_hermitian(h: Operator) -> None:
    err = h.hermiticity_error()
    if err >= 1e-10:
        raise ValidationError(f"Hamiltonian is not hermitian (relative asymmetry {err:.3e})")


def evolve_unitary(h: Operator, psi0: StateVector, t: float) -> StateVector:
    if psi0.space != h.space:
        raise ValidationError("initial state and Hamiltonian live on different spaces")
    amps = propagator(h, t) @ psi0.amplitudes
    return StateVector(h.space, amps, normalize=False)


def evolve_trace(h: Operator, psi0: StateVector, times: Sequence[float]) -> np.ndarray:
    """Amplitudes at every time, shape (len(times), dim); one diagonalisation."""
    if psi0.space != h.space:
        raise ValidationError("initial state and Hamiltonian live on different spaces")
    _require_hermitian(h)
    w, v = h.eigh()
    c0 = v.conj().T @ psi0.amplitudes
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), w))
    return (phases * c0) @ v.T


def check_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValidationError("density matrix is not hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValidationError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValidationError("density matrix is not positive semidefinite")


def _lindblad_rhs(h, jumps, rho):
    out = -1j * (h @ rho - rho @ h)
    for c, cdc in jumps:
        out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def _liouvillian(h, jumps):
    """Superoperator acting on row-major vec(rho)."""
    eye = np.eye(h.shape[0])
    out = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c, cdc in jumps:
        out += np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return out


def _rk4(h, jumps, rho, dt, steps):
    half = 0.5 * dt
    for _ in range(steps):
        k1 = _lindblad_rhs(h, jumps, rho)
        k2 = _lindblad_rhs(h, jumps, rho + half * k1)
        k3 = _lindblad_rhs(h, jumps, rho + half * k2)
        k4 = _lindblad_rhs(h, jumps, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def evolve_damped(
    h: Operator,
    collapse: Sequence[tuple[Operator, float]],
    rho0,
    t: float,
    steps: int | None = None,
    tol: float = 1e-8,
    max_steps: int = 2**22,
    check_tol: float = 1e-10,
    method: str = "auto",
) -> np.ndarray:
    """Lindblad evolution.

    ``method="expm"`` exponentiates the Liouvillian (exact, used by default for
    dimensions up to EXPM_MAX_DIM). ``"rk4"`` is fixed-step RK4: with
    ``steps=None`` the step count is doubled until halving the step moves
    every entry of the result by less than ``tol``; passing ``steps`` forces RK4. ``check_tol`` is the
    tolerance for validating ``rho0`` as a density matrix.
    """
    if isinstance(rho0, StateVector):
        if rho0.space != h.space:
            raise ValidationError("initial state and Hamiltonian live on different spaces")
        rho0 = rho0.density()
    rho0 = np.array(rho0, dtype=complex)
    if rho0.shape != h.matrix.shape:
        raise ValidationError("density matrix and Hamiltonian dimensions differ")
    check_density(rho0, check_tol)
    _require_hermitian(h)
    if t < 0:
        raise ValidationError("evolution time must be non-negative")

    jumps = []
    for op, rate in collapse:
        if rate < 0:
            raise ValidationError(f"negative collapse rate {rate}")
        if op.space != h.space:
            raise ValidationError("collapse operator lives on a different space")
        if rate == 0:
            continue
        c = np.sqrt(rate) * op.matrix
        jumps.append((c, c.conj().T @ c))
    hm = np.array(h.matrix)
    if t == 0:
        return rho0

    if steps is not None:
        return _rk4(hm, jumps, rho0, t / steps, int(steps))
    if method == "auto":
        method = "expm" if hm.shape[0] <= EXPM_MAX_DIM else "rk4"
    if method == "expm":
        d = hm.shape[0]
        return (expm(t * _liouvillian(hm, jumps)) @ rho0.reshape(-1)).reshape(d, d)
    if method != "rk4":
        raise ValidationError(f"unknown method {method!r}")

    scale = np.abs(hm).sum(axis=1).max() + sum(np.abs(cdc).sum(axis=1).max() for _, cdc in jumps)
    n = max(16, int(np.ceil(scale * t / 0.5)))
    prev = _rk4(hm, jumps, rho0, t / n, n)
    while True:
        n *= 2
        cur = _rk4(hm, jumps, rho0, t / n, n)
        if np.abs(cur - prev).max() < tol:
            return cur
        if n >= max_steps:
            raise RuntimeError(f"RK4 did not converge to {tol} within {max_steps} steps")
        prev = cur


def partial_trace(rho: np.ndarray, space: HilbertSpace, keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix on the factors in ``keep`` (in space order)."""
    keep_idx = sorted(space.index(lb) for lb in keep)
    dims = space.dims
    nf = len(dims)
    t = np.asarray(rho).reshape(dims + dims)
    trace_idx = [k for k in range(nf) if k not in keep_idx]
    for k in sorted(trace_idx, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + cur)
    d = int(np.prod([dims[k] for k in keep_idx]))
    return t.reshape(d, d)
