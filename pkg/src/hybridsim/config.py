"""Run configuration: YAML documents mapped onto the library's parameter types.

Every key carries its unit as a suffix (``_ghz``, ``_mhz``, ``_um``, ``_na``,
``_cm3``, ``_us``). Frequencies in configs are cyclic and are converted to
angular values here. Unknown keys are rejected with their dotted path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .constants import TWO_PI
from .errors import ValidationError
from .hamiltonians import SystemSpec
from .magnetostatics import EnsembleSpec, Geometry
from .protocols import DEFAULT_DARK_LEAK, DEFAULT_PULSE_DURATION, DecoherenceSpec, PulseSequence, Step
from .transmon import DoubleJJParams, SingleJJParams

COMMANDS = ("transmon", "coupling-map", "ensemble", "spectrum", "protocol")
BLOCKS = {
    "transmon": ("transmon",),
    "coupling-map": ("transmon", "geometry", "grid"),
    "ensemble": ("transmon", "geometry", "ensemble", "sweep"),
    "spectrum": ("system", "spectrum"),
    "protocol": ("system", "protocol"),
}
MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9


def _number(v: Any) -> float | None:
    # YAML 1.1 reads "5.0e16" (no exponent sign) as a string, so numeric strings pass
    if isinstance(v, str):
        try:
            v = float(v)
        except ValueError:
            return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        return None
    return float(v)


class _Block:
    """Key access on one mapping that remembers which keys were consumed."""

    def __init__(self, data: Any, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: expected a mapping, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def num(self, key: str, default=None, positive: bool = False, required: bool = False) -> float | None:
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ValidationError(f"{self.path}.{key} is required")
            return default
        v = _number(self.data[key])
        if v is None:
            raise ValidationError(f"{self.path}.{key} must be a finite number, got {self.data[key]!r}")
        if positive and v <= 0:
            raise ValidationError(f"{self.path}.{key} must be positive, got {v!r}")
        return float(v)

    def integer(self, key: str, default=None) -> int | None:
        self.used.add(key)
        if key not in self.data:
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(f"{self.path}.{key} must be an integer, got {v!r}")
        return v

    def flag(self, key: str, default: bool = False) -> bool:
        self.used.add(key)
        v = self.data.get(key, default)
        if not isinstance(v, bool):
            raise ValidationError(f"{self.path}.{key} must be true or false, got {v!r}")
        return v

    def text(self, key: str, choices: tuple[str, ...], default: str | None = None) -> str:
        self.used.add(key)
        v = self.data.get(key, default)
        if v not in choices:
            raise ValidationError(f"{self.path}.{key} must be one of {choices}, got {v!r}")
        return v

    def sub(self, key: str) -> "_Block":
        self.used.add(key)
        return _Block(self.data.get(key), f"{self.path}.{key}")

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ValidationError(f"{self.path}: unknown key(s) {', '.join(map(str, extra))}")


def load_yaml(path: str | Path) -> dict:
    """Read a YAML config. I/O errors propagate as OSError; bad syntax is a ValidationError."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be a mapping")
    return data


def _check_top(data: dict, command: str) -> None:
    allowed = set(BLOCKS[command]) | {"seed"}
    extra = sorted(set(data) - allowed)
    if extra:
        raise ValidationError(f"unknown top-level key(s) for {command!r}: {', '.join(map(str, extra))}")


def transmon_params(b: _Block):
    kind = b.text("kind", ("single-JJ", "double-JJ"), "single-JJ")
    E_C = b.num("E_C_mhz", positive=True, required=True) * MHZ
    n_levels = b.integer("n_levels", 30)
    if kind == "single-JJ":
        if b.has("ratio") == b.has("E_J_mhz"):
            raise ValidationError(f"{b.path}: give exactly one of ratio / E_J_mhz")
        E_J = b.num("ratio", positive=True) * E_C if b.has("ratio") else b.num("E_J_mhz", positive=True) * MHZ
        I_c = b.num("I_c_na", 500.0, positive=True) * 1e-9
        b.finish()
        return SingleJJParams(E_J=E_J, E_C=E_C, I_c=I_c, n_levels=n_levels)
    p = DoubleJJParams(
        E_J1=b.num("E_J1_mhz", positive=True, required=True) * MHZ,
        E_J2=b.num("E_J2_mhz", positive=True, required=True) * MHZ,
        E_C=E_C,
        I_c1=b.num("I_c1_na", 500.0, positive=True) * 1e-9,
        I_c2=b.num("I_c2_na", 500.0, positive=True) * 1e-9,
        flux=b.num("flux", 0.0),
        n_levels=n_levels,
    )
    b.finish()
    return p


def geometry(b: _Block, transmon_kind: str) -> Geometry:
    kind = b.text("kind", ("single-JJ", "double-JJ"), transmon_kind)
    if kind != transmon_kind:
        raise ValidationError(f"{b.path}.kind {kind!r} does not match transmon kind {transmon_kind!r}")
    L = b.num("L_um", 3.0, positive=True) * 1e-6
    h = b.num("h_um", 0.1, positive=True) * 1e-6
    b.finish()
    return Geometry.single_jj(L, h) if kind == "single-JJ" else Geometry.double_jj(L, h)


def axis_values(b: _Block, key: str) -> np.ndarray:
    """A grid axis: a number, a list, or {start, stop, num}; values in micrometres."""
    b.used.add(key)
    if key not in b.data:
        raise ValidationError(f"{b.path}.{key} is required")
    v = b.data[key]
    path = f"{b.path}.{key}"
    if isinstance(v, dict):
        s = _Block(v, path)
        start = s.num("start", required=True)
        stop = s.num("stop", required=True)
        num = s.integer("num", 1)
        s.finish()
        if num < 1:
            raise ValidationError(f"{path}.num must be >= 1")
        vals = np.linspace(start, stop, num)
    elif isinstance(v, list):
        nums = [_number(x) for x in v]
        if any(x is None for x in nums):
            raise ValidationError(f"{path}: list entries must be finite numbers")
        vals = np.array(nums, dtype=float)
    elif _number(v) is not None:
        vals = np.array([_number(v)])
    else:
        raise ValidationError(f"{path}: expected a number, a list or {{start, stop, num}}")
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        raise ValidationError(f"{path}: values must be finite and non-empty")
    return vals * 1e-6


@dataclass(frozen=True)
class GridConfig:
    xs: np.ndarray
    ys: np.ndarray
    zs: np.ndarray
    nv_axis: tuple[float, float, float]


def grid(b: _Block) -> GridConfig:
    xs, ys, zs = axis_values(b, "x_um"), axis_values(b, "y_um"), axis_values(b, "z_um")
    axis = b.raw("nv_axis", [1.0, 0.0, 0.0])
    try:
        axis_arr = np.array(axis, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{b.path}.nv_axis must be a 3-vector") from None
    if axis_arr.shape != (3,) or not np.all(np.isfinite(axis_arr)) or np.linalg.norm(axis_arr) == 0:
        raise ValidationError(f"{b.path}.nv_axis must be a nonzero 3-vector")
    b.finish()
    return GridConfig(xs, ys, zs, tuple(axis_arr))


def ensemble(b: _Block, seed: int) -> EnsembleSpec:
    spec = EnsembleSpec(
        L_N=b.num("L_N_um", positive=True, required=True) * 1e-6,
        density=b.num("density_cm3", positive=True, required=True) * 1e6,
        offset=b.num("offset_um", 0.0) * 1e-6,
        seed=seed,
        center_x=b.num("center_x_um", 0.0) * 1e-6,
        center_y=b.num("center_y_um", 0.0) * 1e-6,
    )
    b.finish()
    if spec.offset < 0:
        raise ValidationError(f"{b.path}.offset_um must be >= 0")
    return spec


@dataclass(frozen=True)
class SweepConfig:
    L_N: tuple[float, ...]  # metres
    density: tuple[float, ...]  # m^-3


def sweep(b: _Block, base: EnsembleSpec) -> SweepConfig:
    def values(key, scale, default):
        if not b.has(key):
            return (default,)
        v = b.raw(key)
        if not isinstance(v, list) or not v:
            raise ValidationError(f"{b.path}.{key} must be a non-empty list")
        out = []
        for x in v:
            f = _number(x)
            if f is None or f <= 0:
                raise ValidationError(f"{b.path}.{key} entries must be positive numbers, got {x!r}")
            out.append(f * scale)
        return tuple(out)

    res = SweepConfig(values("L_N_um", 1e-6, base.L_N), values("density_cm3", 1e6, base.density))
    b.finish()
    return res


_FREQ_KEYS = {
    "omega_t": "f_t_ghz",
    "omega_s": "f_s_ghz",
    "omega_s1": "f_s1_ghz",
    "omega_s2": "f_s2_ghz",
    "omega_r": "f_r_ghz",
}
_COUPLING_KEYS = {
    "g_ts": "g_ts_mhz",
    "g_ts1": "g_ts1_mhz",
    "g_ts2": "g_ts2_mhz",
    "g_tens": "g_tens_mhz",
    "g_tc": "g_tc_mhz",
}


def system(b: _Block) -> SystemSpec:
    kind = b.text("kind", ("ts", "t-ens", "s-t-s", "c-t-ens"))
    kw: dict[str, Any] = {"kind": kind}
    for name, key in _FREQ_KEYS.items():
        v = b.num(key, positive=True)
        if v is not None:
            kw[name] = v * GHZ
    for name, key in _COUPLING_KEYS.items():
        v = b.num(key)
        if v is not None:
            kw[name] = v * MHZ
    for key in ("n_cavity", "n_ensemble"):
        v = b.integer(key)
        if v is not None:
            kw[key] = v
    b.finish()
    if "omega_t" not in kw:
        raise ValidationError(f"{b.path}.f_t_ghz is required")
    return SystemSpec(**kw)


@dataclass(frozen=True)
class SpectrumConfig:
    max_excitations: int = 1


def spectrum(b: _Block) -> SpectrumConfig:
    n = b.integer("max_excitations", 1)
    b.finish()
    if n < 0:
        raise ValidationError(f"{b.path}.max_excitations must be >= 0")
    return SpectrumConfig(n)


@dataclass(frozen=True)
class ProtocolConfig:
    kind: str
    decoherence: DecoherenceSpec | None
    n_points: int
    transmon_up: bool
    dynamics: str
    sequence: PulseSequence | None
    t_max: float | None  # seconds; None means the protocol's natural window


def decoherence(b: _Block) -> DecoherenceSpec:
    t1 = b.num("transmon_T1_us", positive=True)
    leak = b.raw("dark_leak", False)
    b.finish()
    if leak is True:
        rate = DEFAULT_DARK_LEAK
    elif leak is False or leak is None:
        rate = None
    elif _number(leak) is not None and _number(leak) > 0:
        rate = 1.0 / (_number(leak) * 1e-6)
    else:
        raise ValidationError(f"{b.path}.dark_leak must be true/false or a leak time in microseconds")
    return DecoherenceSpec(transmon_T1=None if t1 is None else t1 * 1e-6, dark_leak_rate=rate)


def _step(item: Any, path: str) -> Step:
    if not isinstance(item, dict) or len(item) != 1:
        raise ValidationError(f"{path}: each step is a one-key mapping such as {{wait: {{swaps: 1}}}}")
    (kind, body), = item.items()
    b = _Block(body, f"{path}.{kind}")
    if kind == "set_detuning":
        restore = b.flag("restore", False)
        delta = b.num("delta_mhz")
        if restore == (delta is not None):
            raise ValidationError(f"{b.path}: give exactly one of delta_mhz / restore")
        step = Step("set_detuning", detuning=None if restore else delta * MHZ)
    elif kind == "wait":
        t = b.num("time_us")
        step = Step("wait", time=None if t is None else t * 1e-6, swaps=b.num("swaps"))
    elif kind in ("pi_pulse", "half_pi_pulse"):
        f = b.num("frequency_ghz", positive=True)
        step = Step(
            kind,
            target=b.raw("target", "transmon"),
            frequency=None if f is None else f * GHZ,
            chi_offset=b.num("chi_offset"),
            duration=b.num("duration_us", DEFAULT_PULSE_DURATION * 1e6, positive=True) * 1e-6,
            probe=b.flag("probe", False),
        )
    elif kind == "project":
        step = Step("project", target=b.raw("target", "transmon"))
    else:
        raise ValidationError(f"{path}: unknown step {kind!r}")
    b.finish()
    return step


def protocol(b: _Block) -> ProtocolConfig:
    kind = b.text("kind", ("swap", "qnd", "virtual-exchange"))
    dec = decoherence(b.sub("decoherence")) if b.has("decoherence") else None
    n_points = b.integer("n_points", 201)
    if n_points < 2:
        raise ValidationError(f"{b.path}.n_points must be >= 2")
    seq = None
    if b.has("sequence"):
        items = b.raw("sequence")
        if not isinstance(items, list) or not items:
            raise ValidationError(f"{b.path}.sequence must be a non-empty list of steps")
        seq = PulseSequence(tuple(_step(it, f"{b.path}.sequence[{i}]") for i, it in enumerate(items)))
    t_max = b.num("t_max_us", positive=True)
    cfg = ProtocolConfig(
        kind=kind,
        decoherence=dec,
        n_points=n_points,
        transmon_up=b.flag("transmon_up", False),
        dynamics=b.text("dynamics", ("full", "dispersive"), "full"),
        sequence=seq,
        t_max=None if t_max is None else t_max * 1e-6,
    )
    b.finish()
    return cfg


def root(data: dict, command: str) -> _Block:
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    _check_top(data, command)
    b = _Block(data, "config")
    b.used.add("seed")
    return b
