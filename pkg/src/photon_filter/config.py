"""JSON run configuration: parsing, validation, and echoing.

Complex numbers serialize as two-element ``[re, im]`` arrays; bare numbers
are taken as purely real. Matrices are nested lists of such entries. The
resolved configuration (with every default filled in) is echoed into run
reports so artifacts are self-describing.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .operators import SLHTriple, as_operator, number_op, sigma_x, sigma_y, sigma_z
from .pulses import Pulse, pulse_from_config
from .twolevel import twolevel_system

MODES = ("master", "trajectory", "ensemble", "validate")
OBSERVABLE_PRESETS = {
    "sx": sigma_x,
    "sy": sigma_y,
    "sz": sigma_z,
    "population": number_op,
}
ETA_NORM_WARN = 1e-6
DEFAULT_DT_ODE = 1e-3
DEFAULT_HORIZON = 10.0
DEFAULT_W_FLOOR = 1e-12
DEFAULT_CROSS_CHECK_TOL = 1e-2


def _complex_scalar(value, key: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(p, (int, float)) for p in value)):
        return complex(value[0], value[1])
    raise ConfigError(f"{key}: expected a number or [re, im] pair, got {value!r}")


def _complex_vector(value, key: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{key}: expected a non-empty array")
    return np.array([_complex_scalar(v, f"{key}[{i}]") for i, v in enumerate(value)],
                    dtype=np.complex128)


def _complex_matrix(value, key: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{key}: expected a non-empty nested array")
    rows = [_complex_vector(row, f"{key}[{i}]") for i, row in enumerate(value)]
    width = rows[0].size
    if any(r.size != width for r in rows):
        raise ConfigError(f"{key}: rows have inconsistent lengths")
    return np.stack(rows)


def _encode_complex(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _encode_matrix(m: np.ndarray) -> list:
    return [[_encode_complex(v) for v in row] for row in np.atleast_2d(m)]


def _encode_vector(v: np.ndarray) -> list:
    return [_encode_complex(z) for z in v]


def _positive_float(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return float(default)
    try:
        val = float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {d[key]!r}")
    if not math.isfinite(val) or val <= 0:
        raise ConfigError(f"{key}: must be a positive finite number, got {val}")
    return val


def _system_from_config(spec, key: str = "system"):
    """Returns (SLHTriple, echo dict)."""
    if not isinstance(spec, dict):
        raise ConfigError(f"{key}: expected a mapping")
    if spec.get("preset") == "twolevel" or ("kappa" in spec and "S" not in spec):
        try:
            kappa = float(spec["kappa"])
            omega = float(spec["omega"])
        except KeyError as exc:
            raise ConfigError(f"{key}: twolevel preset requires key {exc}")
        system = twolevel_system(kappa, omega)
        echo = {"preset": "twolevel", "kappa": kappa, "omega": omega}
        return system, echo
    for name in ("S", "L", "H"):
        if name not in spec:
            raise ConfigError(f"{key}: missing matrix '{name}' "
                              "(or use preset 'twolevel' with kappa/omega)")
    s = _complex_matrix(spec["S"], f"{key}.S")
    l_op = _complex_matrix(spec["L"], f"{key}.L")
    h = _complex_matrix(spec["H"], f"{key}.H")
    dim = spec.get("dim")
    if dim is not None and int(dim) != s.shape[0]:
        raise ConfigError(f"{key}.dim={dim} does not match matrix size {s.shape[0]}")
    try:
        system = SLHTriple(s, l_op, h)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}")
    echo = {"S": _encode_matrix(system.S), "L": _encode_matrix(system.L),
            "H": _encode_matrix(system.H)}
    return system, echo


def _eta_from_config(value, dim: int) -> np.ndarray:
    eta = _complex_vector(value, "eta")
    if eta.size != dim:
        raise ConfigError(f"eta has length {eta.size}, system dimension is {dim}")
    norm = float(np.linalg.norm(eta))
    if norm == 0.0:
        raise ConfigError("eta must be a nonzero vector")
    if abs(norm - 1.0) > ETA_NORM_WARN:
        raise ConfigError(
            f"eta is not normalized (|norm - 1| = {abs(norm - 1.0):.3e} "
            f"exceeds {ETA_NORM_WARN:g}); normalize it explicitly")
    if norm != 1.0:
        warnings.warn(f"eta norm off by {abs(norm - 1.0):.2e}; auto-normalizing",
                      stacklevel=2)
        eta = eta / norm
    return eta


def _observables_from_config(value, dim: int) -> dict:
    """Accepts a list of preset names / {name, matrix} entries, or a mapping."""
    if value is None:
        value = ["sz"]
    out: dict = {}

    def add_preset(name: str):
        if name not in OBSERVABLE_PRESETS:
            raise ConfigError(
                f"unknown observable preset '{name}' "
                f"(available: {', '.join(sorted(OBSERVABLE_PRESETS))})")
        if dim != 2:
            raise ConfigError(
                f"observable preset '{name}' requires a two-level system, dim={dim}")
        out[name] = OBSERVABLE_PRESETS[name].copy()

    if isinstance(value, dict):
        for name, body in value.items():
            if isinstance(body, str):
                add_preset(body)
            else:
                out[name] = _complex_matrix(body, f"observables.{name}")
    elif isinstance(value, (list, tuple)):
        for i, entry in enumerate(value):
            if isinstance(entry, str):
                add_preset(entry)
            elif isinstance(entry, dict) and "name" in entry and "matrix" in entry:
                out[entry["name"]] = _complex_matrix(
                    entry["matrix"], f"observables[{i}].matrix")
            else:
                raise ConfigError(
                    f"observables[{i}]: expected a preset name or "
                    "{name, matrix} mapping")
    else:
        raise ConfigError("observables: expected a list or mapping")

    for name, mat in out.items():
        mat = as_operator(mat, name)
        if mat.shape != (dim, dim):
            raise ConfigError(
                f"observable '{name}' has shape {mat.shape}, expected ({dim}, {dim})")
        out[name] = mat
    return out


@dataclass
class RunConfig:
    """Fully resolved run description."""
    mode: str
    system: SLHTriple | None
    pulse: Pulse | None
    eta: np.ndarray | None
    dt_ode: float
    dt_sde: float | None
    horizon: float
    seed: int | None
    n_traj: int | None
    observables: dict
    output: Path
    w_floor: float
    n_threads: int | None
    cross_check_tol: float
    checks: list | None = None        # validate mode: subset of criteria
    echo: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("top-level config must be a mapping")
        known = {"mode", "system", "pulse", "eta", "dt_ode", "dt_sde", "T",
                 "seed", "n_traj", "observables", "output", "w_floor",
                 "n_threads", "tolerances", "checks"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        mode = raw.get("mode")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

        needs_model = mode in ("master", "trajectory", "ensemble")
        system = pulse = eta = None
        system_echo: dict = {}
        if needs_model:
            if "system" not in raw:
                raise ConfigError("missing required key 'system'")
            system, system_echo = _system_from_config(raw["system"])
            if "pulse" not in raw:
                raise ConfigError("missing required key 'pulse'")
            try:
                pulse = pulse_from_config(raw["pulse"])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"pulse: {exc}")
            if "eta" not in raw:
                raise ConfigError("missing required key 'eta'")
            eta = _eta_from_config(raw["eta"], system.dim)

        dt_ode = _positive_float(raw, "dt_ode", DEFAULT_DT_ODE)
        horizon = _positive_float(raw, "T", DEFAULT_HORIZON)

        dt_sde = None
        if mode in ("trajectory", "ensemble"):
            if "dt_sde" not in raw:
                raise ConfigError(f"missing required key 'dt_sde' for mode '{mode}'")
            dt_sde = _positive_float(raw, "dt_sde")
        elif "dt_sde" in raw:
            dt_sde = _positive_float(raw, "dt_sde")

        seed = raw.get("seed")
        if seed is None:
            if mode in ("trajectory", "ensemble"):
                raise ConfigError(f"missing required key 'seed' for mode '{mode}'")
        else:
            if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0 \
                    or seed >= 2 ** 64:
                raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

        n_traj = raw.get("n_traj")
        if mode == "ensemble":
            if n_traj is None:
                raise ConfigError("missing required key 'n_traj' for mode 'ensemble'")
            if not isinstance(n_traj, int) or isinstance(n_traj, bool) or n_traj < 2:
                raise ConfigError(f"n_traj must be an integer >= 2, got {n_traj!r}")
        elif n_traj is not None and (not isinstance(n_traj, int) or n_traj < 1):
            raise ConfigError(f"n_traj must be a positive integer, got {n_traj!r}")

        observables = (_observables_from_config(raw.get("observables"), system.dim)
                       if needs_model else {})
        output = Path(raw.get("output", "."))
        w_floor = _positive_float(raw, "w_floor", DEFAULT_W_FLOOR)

        n_threads = raw.get("n_threads")
        if n_threads is not None and (not isinstance(n_threads, int) or n_threads < 1):
            raise ConfigError(f"n_threads must be a positive integer, got {n_threads!r}")

        tolerances = raw.get("tolerances", {})
        if not isinstance(tolerances, dict):
            raise ConfigError("tolerances: expected a mapping")
        cross_check_tol = float(tolerances.get("cross_check", DEFAULT_CROSS_CHECK_TOL))

        checks = raw.get("checks")
        if checks is not None:
            if mode != "validate":
                raise ConfigError("'checks' is only valid in validate mode")
            if (not isinstance(checks, list) or not checks
                    or not all(isinstance(c, int) and 1 <= c <= 9 for c in checks)):
                raise ConfigError("checks: expected a list of criterion numbers 1-9")

        # The output directory is deliberately not echoed: reports stay
        # byte-identical for a given (config, seed) wherever they are written.
        echo = {
            "mode": mode,
            "dt_ode": dt_ode,
            "T": horizon,
            "w_floor": w_floor,
        }
        if needs_model:
            echo["system"] = system_echo
            echo["pulse"] = pulse.describe()
            echo["eta"] = _encode_vector(eta)
            echo["observables"] = {name: _encode_matrix(mat)
                                   for name, mat in observables.items()}
        if dt_sde is not None:
            echo["dt_sde"] = dt_sde
        if seed is not None:
            echo["seed"] = int(seed)
        if n_traj is not None:
            echo["n_traj"] = int(n_traj)
        if n_threads is not None:
            echo["n_threads"] = int(n_threads)
        if checks is not None:
            echo["checks"] = list(checks)
        echo["tolerances"] = {"cross_check": cross_check_tol}

        return cls(mode=mode, system=system, pulse=pulse, eta=eta,
                   dt_ode=dt_ode, dt_sde=dt_sde, horizon=horizon,
                   seed=None if seed is None else int(seed),
                   n_traj=None if n_traj is None else int(n_traj),
                   observables=observables, output=output, w_floor=w_floor,
                   n_threads=n_threads, cross_check_tol=cross_check_tol,
                   checks=checks, echo=echo)


def load_raw(path) -> dict:
    """Parse a JSON config file into a plain mapping (no validation)."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {p} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"top-level config in {p} must be a JSON object")
    return raw


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file."""
    return RunConfig.from_dict(load_raw(path))
