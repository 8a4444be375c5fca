"""Command-line front end.

    hybridsim transmon     --config cfg.yaml
    hybridsim coupling-map --config cfg.yaml --out map.csv
    hybridsim ensemble     --config cfg.yaml --out sweep.csv --threads 4
    hybridsim spectrum     --config cfg.yaml
    hybridsim protocol     --config cfg.yaml --format csv

Exit codes: 0 success, 2 config validation, 3 numerical precondition, 4 I/O.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import warnings
from typing import Any, Sequence

import numpy as np

from . import config as cfgmod
from . import hamiltonians as hm
from . import magnetostatics as ms
from . import protocols as pr
from . import transmon as tm
from .constants import TWO_PI
from .errors import PreconditionError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_IO = 0, 2, 3, 4


def fmt(v: Any) -> str:
    """12 significant digits, '.' decimal point, for every CSV number."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.12g}"
    return str(v)


def write_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _plain(v: Any):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def write_json(data: dict) -> str:
    return json.dumps(_plain(data), indent=2, ensure_ascii=False) + "\n"


def flat_csv(data: dict) -> str:
    """key,value rows for scalar entries of a JSON report."""
    rows = []

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else str(k), x)
        elif isinstance(v, (list, tuple, np.ndarray)):
            for i, x in enumerate(v):
                walk(f"{prefix}[{i}]", x)
        else:
            rows.append((prefix, v))

    walk("", _plain(data))
    return write_csv(("key", "value"), rows)


# ---------------------------------------------------------------- commands


def cmd_transmon(data: dict, args) -> tuple[dict, str | None]:
    root = cfgmod.root(data, "transmon")
    p = cfgmod.transmon_params(root.sub("transmon"))
    root.finish()
    e, _ = tm.transmon_levels(p, 3)
    wp = tm.plasma_frequency(p)
    rep: dict[str, Any] = {
        "kind": "single-JJ" if isinstance(p, tm.SingleJJParams) else "double-JJ",
        "ratio": p.ratio,
        "E_J_hz": p.E_J / TWO_PI,
        "E_C_hz": p.E_C / TWO_PI,
        "plasma_frequency_hz": wp / TWO_PI,
        "phi_zpf": tm.phase_zpf(p),
        "cubic_coefficient": tm.cubic_coefficient(p),
        "qubit_frequency_hz": (e[1] - e[0]) / TWO_PI,
        "qubit_shift_hz": (e[1] - e[0] - wp) / TWO_PI,
        "anharmonicity_hz": tm.anharmonicity(p) / TWO_PI,
    }
    pq = tm.perturbed_states(p.ratio)
    rep["perturbed_down"] = list(pq.down_coeffs)
    rep["perturbed_up"] = list(pq.up_coeffs)
    rep["x_element"] = pq.x_element
    rep["substitution_error"] = tm.substitution_error(p.ratio)
    fixed = tm.perturbed_states(p.ratio, sign=1)
    rep["sign_corrected"] = {
        "perturbed_down": list(fixed.down_coeffs),
        "perturbed_up": list(fixed.up_coeffs),
        "x_element": fixed.x_element,
        "substitution_error": tm.substitution_error(p.ratio, sign=1),
    }
    if isinstance(p, tm.DoubleJJParams):
        i1, i2 = tm.coupling_currents(p)
        rep["coupling_current_1_a"] = i1
        rep["coupling_current_2_a"] = i2
    return rep, None


def cmd_coupling_map(data: dict, args) -> tuple[dict, str | None]:
    root = cfgmod.root(data, "coupling-map")
    p = cfgmod.transmon_params(root.sub("transmon"))
    kind = "single-JJ" if isinstance(p, tm.SingleJJParams) else "double-JJ"
    g = cfgmod.geometry(root.sub("geometry"), kind)
    grid = cfgmod.grid(root.sub("grid"))
    m = ms.coupling_map(g, p, grid.xs, grid.ys, grid.zs, grid.nv_axis)
    hz = m.g_abs_hz
    rep: dict[str, Any] = {"points": len(hz), "singular_points": int(m.singular.sum())}
    if m.singular.any():
        bad = [int(i) for i in np.flatnonzero(m.singular)[:5]]
        idx = [list(np.unravel_index(i, m.shape)) for i in bad]
        print(f"warning: {rep['singular_points']} grid point(s) on a wire, e.g. grid index {idx}", file=sys.stderr)
    if np.all(m.singular):
        raise PreconditionError("every grid point lies on a wire segment")
    k = m.argmax()
    rep["max_g_abs_hz"] = float(hz[k])
    rep["max_location_m"] = [float(x) for x in m.points[k]]
    print(f"max |g_ts|/2pi = {fmt(hz[k])} Hz at (x, y, z) = ({', '.join(fmt(x) for x in m.points[k])}) m", file=sys.stderr)
    rows = ((pt[0], pt[1], pt[2], v) for pt, v in zip(m.points, hz))
    header = ("x_m", "y_m", "z_m", "g_abs_hz")
    root.finish()
    rep["rows"] = [dict(zip(header, (*pt, v))) for pt, v in zip(m.points, hz)]
    return rep, write_csv(header, rows)


def cmd_ensemble(data: dict, args) -> tuple[dict, str | None]:
    root = cfgmod.root(data, "ensemble")
    seed = args.seed if args.seed is not None else root.integer("seed", 0)
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    p = cfgmod.transmon_params(root.sub("transmon"))
    kind = "single-JJ" if isinstance(p, tm.SingleJJParams) else "double-JJ"
    g = cfgmod.geometry(root.sub("geometry"), kind)
    base = cfgmod.ensemble(root.sub("ensemble"), seed)
    sw = cfgmod.sweep(root.sub("sweep"), base)
    root.finish()
    rows = []
    for L_N in sw.L_N:
        for n in sw.density:
            spec = ms.EnsembleSpec(L_N, n, base.offset, seed, base.center_x, base.center_y)
            r = ms.ensemble_coupling(g, p, spec, threads=args.threads)
            rows.append((L_N, n * 1e-6, r.n_spins, r.g_ens_hz, r.g_rms / TWO_PI, r.longitudinal_spread / TWO_PI))
    header = ("L_N_m", "density_cm3", "n_spins", "g_ens_hz", "g_rms_hz", "longitudinal_spread_hz")
    rep = {"seed": seed, "rows": [dict(zip(header, r)) for r in rows]}
    return rep, write_csv(header, rows)


def _t_ens_reduction(spec: hm.SystemSpec) -> hm.SystemSpec:
    return hm.SystemSpec("t-ens", omega_t=spec.omega_t, omega_s=spec.omega_s, g_tens=spec.g_tens, n_ensemble=spec.n_ensemble)


def cmd_spectrum(data: dict, args) -> tuple[dict, str | None]:
    root = cfgmod.root(data, "spectrum")
    spec = cfgmod.system(root.sub("system"))
    sc = cfgmod.spectrum(root.sub("spectrum"))
    root.finish()
    params = hm.dispersive_params(spec)
    rep: dict[str, Any] = {"kind": spec.kind}
    rep["shifts_hz"] = {label: v / TWO_PI for label, v in params.shifts}
    if params.chi is not None:
        rep["chi_hz"] = params.chi / TWO_PI
        rep["two_chi_hz"] = 2 * params.chi / TWO_PI
    if params.J is not None:
        rep["J_hz"] = abs(params.J) / TWO_PI
    if params.g_virtual is not None:
        rep["g_virtual_hz"] = abs(params.g_virtual) / TWO_PI
    exact, disp = hm.spectrum_comparison(spec, sc.max_excitations)
    rep["exact_energies_hz"] = list(exact / TWO_PI)
    rep["dispersive_energies_hz"] = list(disp / TWO_PI)
    rep["max_energy_deviation_hz"] = float(np.abs(exact - disp).max()) / TWO_PI
    sw = hm.sw_transform(spec)
    rep["sw_residual_hz"] = sw.residual / TWO_PI
    rep["sw_residual_low_sectors_hz"] = sw.residual_low / TWO_PI
    rep["sw_relative_residual"] = sw.relative
    if spec.kind in ("t-ens", "c-t-ens"):
        red = spec if spec.kind == "t-ens" else _t_ens_reduction(spec)
        if red.g_tens != 0:
            tr = hm.exact_transmon_transitions(red, 1)
            rep["exact_transition_shift_hz"] = (tr[1] - tr[0]) / TWO_PI
        q = hm.qnd_invariant_check(red)
        rep["qnd_commutator"] = {"dispersive": q.dispersive_norm, "full": q.full_norm}
    checks = hm.commutator_table_check("s-t-s") + hm.commutator_table_check("c-t-ens")
    rep["commutator_report"] = [c.as_dict() for c in checks]
    rep["commutator_passed"] = f"{sum(c.passed for c in checks)}/{len(checks)}"
    return rep, None


def cmd_protocol(data: dict, args) -> tuple[dict, str | None]:
    root = cfgmod.root(data, "protocol")
    spec = cfgmod.system(root.sub("system"))
    pc = cfgmod.protocol(root.sub("protocol"))
    root.finish()
    if pc.kind == "swap":
        r = pr.swap_sim(spec, pc.decoherence, pc.n_points)
        rep = {"protocol": "swap", "fidelity": r.fidelity, "t_swap_s": r.t_swap, "period_s": math.pi / abs(spec.g_tens)}
        csv = write_csv(("time_s", "p_up_G", "p_down_B"), zip(r.times, r.p_transmon, r.p_bright))
        return rep, csv
    if pc.kind == "virtual-exchange":
        if pc.decoherence is not None:
            raise ValidationError("virtual-exchange runs take no decoherence block")
        grid = None if pc.t_max is None else np.linspace(0.0, pc.t_max, pc.n_points)
        r = pr.virtual_exchange_sim(spec, grid, pc.transmon_up, pc.n_points)
        rep = {
            "protocol": "virtual-exchange",
            "rate_hz": r.rate / TWO_PI,
            "max_deviation": r.max_deviation,
            "transfer_time_s": r.transfer_time,
            "transfer_fidelity": r.transfer_fidelity,
            "protection_factor": pr.protection_factor(spec),
        }
        header = ("time_s", "exact_source", "exact_target", "predicted_source", "predicted_target")
        csv = write_csv(header, zip(r.times, r.exact_source, r.exact_target, r.predicted_source, r.predicted_target))
        return rep, csv
    r = pr.qnd_sequence_sim(spec, pc.sequence, pc.decoherence, pc.dynamics)
    rep = {"protocol": "qnd", **r.as_dict()}
    return rep, None


COMMANDS = {
    "transmon": cmd_transmon,
    "coupling-map": cmd_coupling_map,
    "ensemble": cmd_ensemble,
    "spectrum": cmd_spectrum,
    "protocol": cmd_protocol,
}
DEFAULT_FORMAT = {"transmon": "json", "coupling-map": "csv", "ensemble": "csv", "spectrum": "json", "protocol": "json"}


def _threads(value: str | None) -> int:
    raw = value if value is not None else os.environ.get("HYBRIDSIM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"thread count must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridsim", description="Transmon / NV-ensemble hybrid circuit simulator")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", help="worker threads (env HYBRIDSIM_THREADS as fallback)")
    ap.add_argument("--format", choices=("csv", "json"), help="output format")
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        args.threads = _threads(args.threads)
        if args.seed is not None and args.seed < 0:
            raise ValidationError("--seed must be >= 0")
        try:
            data = cfgmod.load_yaml(args.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            rep, csv = COMMANDS[args.command](data, args)
        fmt_ = args.format or DEFAULT_FORMAT[args.command]
        if fmt_ == "csv":
            text = csv if csv is not None else flat_csv(rep)
        else:
            text = write_json(rep)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
