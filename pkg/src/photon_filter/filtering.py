"""Stochastic filtering under homodyne detection of the output field.

The conditional state of a system driven by a continuous-mode single-photon
wave packet is a four-block object sigma = (sigma11, sigma10, sigma01,
sigma00) advanced by coupled Ito equations driven by the innovations
process dW = dY - K dt, where the gain

    K(t) = Re( tr[sigma11 (L + L*)] + xi(t) tr[sigma10 S]
               + conj(xi(t)) tr[sigma01 S*] )

is the predicted homodyne photocurrent. Conditional expectations use the
plain pairing pi_jk(X) = tr[sigma_jk X]; block 01 is maintained as the
adjoint of block 10. Measurement records can be generated physically by a
conventional quantum filter on the extended (ancilla + system) space and
replayed into this filter, which never sees the ancilla.

Normalization: tr sigma11 stays near one by construction of the equations
but is never forced; the optional per-step ``renormalize`` flag (default
off) rescales all blocks by 1/tr sigma11 after each update.
"""
from __future__ import annotations

import hashlib
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels, rng, superops
from .errors import ConfigError, InvariantViolation, PhotonFilterError
from .master import _grid, _unit_vector
from .operators import SLHTriple, adjoint, as_operator, lindblad_heisenberg, lindblad_schrodinger
from .pulses import Pulse
from .slh import DEFAULT_W_FLOOR, ExtendedSystem
from .superops import trace_covector, unvec, vec

DEFAULT_DT_SDE = 1e-4
DEFAULT_GAIN_IMAG_TOL = 1e-10
DEFAULT_CROSS_CHECK_TOL = 1e-2
DEFAULT_STORE_POINTS = 1000


# ---------------------------------------------------------------------------
# conditional state
# ---------------------------------------------------------------------------

@dataclass
class FilterState:
    """Four-block conditional state (layout 11 | 10 | 01 | 00)."""
    sigma11: np.ndarray
    sigma10: np.ndarray
    sigma01: np.ndarray
    sigma00: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, eta: np.ndarray) -> "FilterState":
        """Blocks 11 and 00 start at |eta><eta|, cross blocks at zero."""
        v = _unit_vector(eta)
        proj = np.outer(v, v.conj())
        zero = np.zeros_like(proj)
        return cls(proj.copy(), zero.copy(), zero.copy(), proj.copy(), t=0.0)

    @property
    def dim(self) -> int:
        return self.sigma11.shape[0]

    def blocks(self):
        return (self.sigma11, self.sigma10, self.sigma01, self.sigma00)

    def block(self, name: str) -> np.ndarray:
        return self.blocks()[superops.BLOCK_INDEX[name]]

    def expectation(self, block: str, x) -> complex:
        """pi_block(X) = tr[sigma_block X] (plain pairing)."""
        xo = as_operator(x, "x")
        return complex(np.einsum("ij,ji->", self.block(block), xo))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([vec(b) for b in self.blocks()])

    @classmethod
    def from_vector(cls, v: np.ndarray, dim: int, t: float = 0.0) -> "FilterState":
        q = dim * dim
        parts = [unvec(np.asarray(v[i * q:(i + 1) * q]), dim) for i in range(4)]
        return cls(*parts, t=t)

    def deviations(self) -> dict:
        """Structural diagnostics: trace drift, adjoint pairing, Hermiticity."""
        return {
            "trace11": float(abs(np.trace(self.sigma11) - 1.0)),
            "cross_adjoint": float(np.max(np.abs(self.sigma01 - adjoint(self.sigma10)))),
            "herm11": float(np.max(np.abs(self.sigma11 - adjoint(self.sigma11)))),
            "herm00": float(np.max(np.abs(self.sigma00 - adjoint(self.sigma00)))),
        }


def gain(state: FilterState, system: SLHTriple, pulse: Pulse, t: float | None = None,
         imag_tol: float = DEFAULT_GAIN_IMAG_TOL) -> float:
    """Predicted photocurrent K(t); raises if its imaginary residue exceeds tol."""
    tt = state.t if t is None else t
    xi = pulse(tt)
    val = (state.expectation("11", system.L + adjoint(system.L))
           + xi * state.expectation("10", system.S)
           + np.conj(xi) * state.expectation("01", adjoint(system.S)))
    if abs(val.imag) > imag_tol:
        raise InvariantViolation("gain realness", abs(val.imag), imag_tol, time=tt)
    return float(val.real)


def filter_step(state: FilterState, d_y: float, dt: float, system: SLHTriple,
                pulse: Pulse, t: float | None = None,
                renormalize: bool = False) -> FilterState:
    """One Euler-Maruyama update of all four blocks on the increment d_y."""
    tt = state.t if t is None else t
    xi = complex(pulse(tt))
    xis = np.conj(xi)
    s, l_op = system.S, system.L
    sd, ld = adjoint(s), adjoint(l_op)
    s11, s10, s01, s00 = state.blocks()

    k_t = gain(state, system, pulse, tt)
    d_w = d_y - k_t * dt

    def damped(a):
        return l_op @ a + a @ ld - k_t * a

    drift11 = (lindblad_schrodinger(system, s11)
               + xi * ((s @ s10) @ ld - ld @ (s @ s10))
               + xis * (l_op @ (s01 @ sd) - (s01 @ sd) @ l_op)
               + (xi * xis).real * (s @ s00 @ sd - s00))
    diff11 = damped(s11) + xi * (s @ s10) + xis * (s01 @ sd)

    drift10 = (lindblad_schrodinger(system, s10)
               + xis * (l_op @ (s00 @ sd) - (s00 @ sd) @ l_op))
    diff10 = damped(s10) + xis * (s00 @ sd)

    drift00 = lindblad_schrodinger(system, s00)
    diff00 = damped(s00)

    new11 = s11 + drift11 * dt + diff11 * d_w
    new10 = s10 + drift10 * dt + diff10 * d_w
    new00 = s00 + drift00 * dt + diff00 * d_w
    new01 = adjoint(new10)
    if renormalize:
        tr = float(np.trace(new11).real)
        if tr != 0.0:
            new11, new10, new01, new00 = (b / tr for b in (new11, new10, new01, new00))
    return FilterState(new11, new10, new01, new00, t=tt + dt)


def functional_increments(state: FilterState, x, d_y: float, dt: float,
                          system: SLHTriple, pulse: Pulse,
                          t: float | None = None) -> dict:
    """Ito increments of the four conditional functionals pi_jk(X).

    Computed directly on operator-side (Heisenberg) coefficients, without
    updating the blocks, so agreement with ``filter_step`` exercises the
    state-side and operator-side forms as independent routes.
    """
    tt = state.t if t is None else t
    xi = complex(pulse(tt))
    xis = np.conj(xi)
    s, l_op = system.S, system.L
    sd, ld = adjoint(s), adjoint(l_op)
    xo = as_operator(x, "x")
    gx = lindblad_heisenberg(system, xo)
    com_after = ld @ xo @ s - xo @ ld @ s    # [L*, X] S
    com_before = sd @ xo @ l_op - sd @ l_op @ xo  # S* [X, L]
    scatter = sd @ xo @ s - xo
    sym = xo @ l_op + ld @ xo

    k_t = gain(state, system, pulse, tt)
    d_w = d_y - k_t * dt

    def pi(block, a):
        return state.expectation(block, a)

    out = {}
    out["11"] = ((pi("11", gx) + xi * pi("10", com_after)
                  + xis * pi("01", com_before)
                  + (xi * xis).real * pi("00", scatter)) * dt
                 + (pi("11", sym) + xi * pi("10", xo @ s)
                    + xis * pi("01", sd @ xo) - k_t * pi("11", xo)) * d_w)
    out["10"] = ((pi("10", gx) + xis * pi("00", com_before)) * dt
                 + (pi("10", sym) + xis * pi("00", sd @ xo)
                    - k_t * pi("10", xo)) * d_w)
    out["01"] = ((pi("01", gx) + xi * pi("00", com_after)) * dt
                 + (pi("01", sym) + xi * pi("00", xo @ s)
                    - k_t * pi("01", xo)) * d_w)
    out["00"] = (pi("00", gx) * dt
                 + (pi("00", sym) - k_t * pi("00", xo)) * d_w)
    return out


def vacuum_gain(rho: np.ndarray, system: SLHTriple) -> float:
    return float(np.einsum("ij,ji->", rho, system.L + adjoint(system.L)).real)


def vacuum_filter_step(rho_c: np.ndarray, d_y: float, dt: float,
                       system: SLHTriple, renormalize: bool = False) -> np.ndarray:
    """Conventional homodyne filter update for a vacuum input field."""
    k_t = vacuum_gain(rho_c, system)
    d_w = d_y - k_t * dt
    new = (rho_c + lindblad_schrodinger(system, rho_c) * dt
           + (system.L @ rho_c + rho_c @ adjoint(system.L) - k_t * rho_c) * d_w)
    if renormalize:
        tr = float(np.trace(new).real)
        if tr != 0.0:
            new = new / tr
    return new


# ---------------------------------------------------------------------------
# measurement records
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(r"^dt=(\S+) n=(\d+) seed=(\d+)$")


@dataclass
class MeasurementRecord:
    """Homodyne record: increments dY_k over [k dt, (k+1) dt)."""
    dt: float
    increments: np.ndarray
    seed: int | None = None
    generator: str = ""

    def __post_init__(self):
        self.increments = np.ascontiguousarray(self.increments, dtype=np.float64)
        if self.increments.ndim != 1:
            raise ValueError("record increments must be a 1-d array")
        if self.dt <= 0:
            raise ValueError("record dt must be positive")

    @property
    def n(self) -> int:
        return int(self.increments.size)

    @property
    def horizon(self) -> float:
        return self.n * self.dt

    def y_path(self) -> np.ndarray:
        """Integrated record Y(t) on the full grid, Y(0) = 0."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"dt={self.dt:.17g} n={self.n} "
                     f"seed={0 if self.seed is None else int(self.seed)}\n")
            for value in self.increments:
                fh.write(f"{value:.17g}\n")

    @classmethod
    def load(cls, path) -> "MeasurementRecord":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().rstrip("\n")
            match = _HEADER_RE.match(header)
            if not match:
                raise ConfigError(f"malformed record header: {header!r}")
            dt = float(match.group(1))
            n = int(match.group(2))
            seed = int(match.group(3))
            values = np.array([float(line) for line in fh if line.strip()])
        if values.size != n:
            raise ConfigError(f"record declares n={n} but contains {values.size} increments")
        if not np.all(np.isfinite(values)):
            raise ConfigError("record contains non-finite increments")
        return cls(dt=dt, increments=values, seed=seed if seed != 0 else None)


def _system_digest(extended: ExtendedSystem, eta: np.ndarray, dt: float,
                   horizon: float) -> str:
    blob = repr((np.round(extended.base.S, 12).tolist(),
                 np.round(extended.base.L, 12).tolist(),
                 np.round(extended.base.H, 12).tolist(),
                 extended.pulse.describe(), np.round(eta, 12).tolist(),
                 dt, horizon)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# kernel plumbing
# ---------------------------------------------------------------------------

def _choose_stride(n: int, store_stride: int | None,
                   target_points: int = DEFAULT_STORE_POINTS) -> int:
    if store_stride is not None:
        stride = int(store_stride)
        if stride < 1 or n % stride:
            raise ValueError(f"store_stride must divide the {n} steps")
        return stride
    stride = max(1, n // target_points)
    while n % stride:
        stride -= 1
    return stride


def _observable_matrices(observables: dict | None, dim: int) -> dict:
    out = {}
    for name, x in (observables or {}).items():
        xo = as_operator(x, name)
        if xo.shape[0] != dim:
            raise ConfigError(f"observable {name!r} has dimension {xo.shape[0]}, "
                              f"system has {dim}")
        out[name] = xo
    return out


def _covector_stack(matrices: list, width: int, offset: int = 0) -> np.ndarray:
    stack = np.zeros((len(matrices), width), dtype=np.complex128)
    for i, m in enumerate(matrices):
        cov = trace_covector(m)
        stack[i, offset:offset + cov.size] = cov
    return stack


def _fresh_diag() -> np.ndarray:
    return np.array([0.0, 0.0, -1.0])


def _check_finite(diag: np.ndarray, dt: float, label: str) -> None:
    if diag[2] >= 0:
        step = int(diag[2])
        raise PhotonFilterError(
            f"{label} produced a non-finite state at step {step} (t={step * dt:.6g})")


def _left_amplitudes(fn, times: np.ndarray) -> np.ndarray:
    vals = fn(times[:-1])
    return np.ascontiguousarray(np.asarray(vals, dtype=np.complex128))


# ---------------------------------------------------------------------------
# record generation on the extended system
# ---------------------------------------------------------------------------

@dataclass
class ExtendedTrajectory:
    """Conditional trajectory of the record-generating extended system."""
    times: np.ndarray                 # stored grid
    states: np.ndarray                # (n_stored, 2d, 2d)
    expectations: dict                # name -> (n_stored,) float, tr[rho_c (I (x) X)]
    diagnostics: dict
    dt: float
    stride: int


def generate_record(extended: ExtendedSystem, eta: np.ndarray, dt: float,
                    horizon: float, seed: int | None = None,
                    noise: np.ndarray | None = None,
                    trajectory_index: int = 0,
                    observables: dict | None = None,
                    store_stride: int | None = None):
    """Simulate homodyne detection of the extended system's output.

    Returns ``(MeasurementRecord, ExtendedTrajectory)``. The record's
    increments are dY = K_ext dt + dW with dW either drawn from the seeded
    stream or taken from ``noise`` (raw increments of variance dt).
    """
    times = _grid(dt, horizon)
    n = times.size - 1
    if noise is None:
        if seed is None:
            raise ConfigError("generate_record requires a seed or an explicit noise array")
        noise = rng.wiener_increments(seed, trajectory_index, n, dt)
    else:
        noise = np.ascontiguousarray(noise, dtype=np.float64)
        if noise.shape != (n,):
            raise ValueError(f"noise must have shape ({n},)")

    ops = extended.filter_ops()
    c_arr = _left_amplitudes(extended.coupling, times)
    dim_ext = extended.dim
    sys_obs = _observable_matrices(observables, extended.base.dim)
    names = list(sys_obs)
    lifted = [np.kron(np.eye(2), sys_obs[name]) for name in names]
    obs_cov = _covector_stack(lifted, dim_ext * dim_ext)

    stride = _choose_stride(n, store_stride)
    n_stored = n // stride + 1
    obs_series = np.zeros((len(names), n_stored))
    state_series = np.zeros((n_stored, dim_ext * dim_ext), dtype=np.complex128)
    d_y = np.empty(n)
    dw_out = np.empty(n)
    diag = _fresh_diag()
    v = np.ascontiguousarray(vec(extended.initial_state(eta)))

    kernels.em_pass(ops.drift, ops.diffusion, ops.gain, ops.trace, c_arr, dt,
                    True, False, noise, d_y, dw_out, obs_cov, obs_series,
                    state_series, stride, 0, v, diag)
    _check_finite(diag, dt, "record generation")

    record = MeasurementRecord(dt=dt, increments=d_y, seed=seed,
                               generator=_system_digest(extended, _unit_vector(eta), dt, horizon))
    traj = ExtendedTrajectory(
        times=times[::stride],
        states=state_series.reshape(n_stored, dim_ext, dim_ext),
        expectations={name: obs_series[i] for i, name in enumerate(names)},
        diagnostics={"max_trace_dev": float(diag[0]),
                     "max_gain_imag": float(diag[1])},
        dt=dt, stride=stride)
    return record, traj


# ---------------------------------------------------------------------------
# single-photon filter trajectories
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRun:
    """One conditional trajectory of the single-photon filter."""
    times: np.ndarray                 # stored grid
    filter_states: np.ndarray         # (n_stored, 4, d, d) blocks 11|10|01|00
    extended_states: np.ndarray       # (n_stored, 2d, 2d)
    pi11: dict                        # name -> (n_stored,) float
    cross_check: dict                 # name -> (n_stored,) float (extended route)
    sup_divergence: dict              # name -> sup_t |pi11 - extended| over all steps
    flagged: dict                     # name -> bool, sup beyond cross_check_tol
    record: MeasurementRecord
    innovations: np.ndarray           # (n,) filter innovations dW
    innovations_path: np.ndarray      # W(t) on the stored grid
    diagnostics: dict
    dt: float
    seed: int | None
    stride: int

    def final_state(self) -> FilterState:
        blocks = self.filter_states[-1]
        return FilterState(*[np.ascontiguousarray(b) for b in blocks],
                           t=float(self.times[-1]))

    def innovation_total(self) -> float:
        return float(np.sum(self.innovations))


def run_trajectory(system: SLHTriple, pulse: Pulse, eta: np.ndarray, dt: float,
                   horizon: float, seed: int | None = None,
                   record: MeasurementRecord | None = None,
                   observables: dict | None = None,
                   w_floor: float = DEFAULT_W_FLOOR,
                   trajectory_index: int = 0,
                   store_stride: int | None = None,
                   renormalize: bool = False,
                   cross_check_tol: float = DEFAULT_CROSS_CHECK_TOL) -> TrajectoryRun:
    """Advance the single-photon filter on a homodyne record.

    Without an explicit ``record`` the extended system generates one on the
    fly from the seeded noise stream; with one, the same record is replayed
    (its dt and length must match the requested grid). The record-generating
    extended system is advanced alongside the filter in either case so every
    run carries an independent cross-check of the filtered expectations.
    """
    times = _grid(dt, horizon)
    n = times.size - 1
    extended = ExtendedSystem(base=system, pulse=pulse, w_floor=w_floor)

    if record is not None:
        if abs(record.dt - dt) > 1e-12 * max(1.0, dt):
            raise ConfigError(f"record dt {record.dt} does not match requested dt {dt}")
        if record.n != n:
            raise ConfigError(f"record has {record.n} increments, grid needs {n}")
        d_y = record.increments.copy()
        noise = np.zeros(n)
        gen_mode = False
        run_seed = record.seed
    else:
        if seed is None:
            raise ConfigError("run_trajectory requires a seed or an explicit record")
        noise = rng.wiener_increments(seed, trajectory_index, n, dt)
        d_y = np.empty(n)
        gen_mode = True
        run_seed = seed

    dim = system.dim
    q = dim * dim
    ops_f = superops.coupled_filter_ops(system)
    ops_e = extended.filter_ops()
    xi_arr = _left_amplitudes(pulse, times)
    c_arr = _left_amplitudes(extended.coupling, times)

    sys_obs = _observable_matrices(observables, dim)
    names = list(sys_obs)
    obs_f = _covector_stack([sys_obs[nm] for nm in names], 4 * q, offset=0)
    lifted = [np.kron(np.eye(2), sys_obs[nm]) for nm in names]
    obs_e = _covector_stack(lifted, extended.dim ** 2)

    stride = _choose_stride(n, store_stride)
    n_stored = n // stride + 1
    pi_series = np.zeros((len(names), n_stored))
    ext_series = np.zeros((len(names), n_stored))
    state_f = np.zeros((n_stored, 4 * q), dtype=np.complex128)
    state_e = np.zeros((n_stored, extended.dim ** 2), dtype=np.complex128)
    sup_out = np.zeros(len(names))
    dw_out = np.empty(n)
    diag_e = _fresh_diag()
    diag_f = _fresh_diag()

    vf = np.ascontiguousarray(FilterState.initial(eta).as_vector())
    ve = np.ascontiguousarray(vec(extended.initial_state(eta)))

    kernels.joint_pass(ops_e.drift, ops_e.diffusion, ops_e.gain, ops_e.trace,
                       c_arr, ops_f.drift, ops_f.diffusion, ops_f.gain,
                       ops_f.trace, xi_arr, dt, gen_mode, renormalize, noise,
                       d_y, dw_out, obs_e, obs_f, ext_series, pi_series,
                       state_e, state_f, sup_out, stride, dim, ve, vf,
                       diag_e, diag_f)
    _check_finite(diag_e, dt, "extended cross-check system")
    _check_finite(diag_f, dt, "single-photon filter")
    if diag_f[1] > DEFAULT_GAIN_IMAG_TOL:
        raise InvariantViolation("gain realness", float(diag_f[1]),
                                 DEFAULT_GAIN_IMAG_TOL)

    if record is None:
        record = MeasurementRecord(
            dt=dt, increments=d_y, seed=seed,
            generator=_system_digest(extended, _unit_vector(eta), dt, horizon))

    w_full = np.concatenate(([0.0], np.cumsum(dw_out)))
    sups = {name: float(sup_out[i]) for i, name in enumerate(names)}
    return TrajectoryRun(
        times=times[::stride],
        filter_states=state_f.reshape(n_stored, 4, dim, dim),
        extended_states=state_e.reshape(n_stored, extended.dim, extended.dim),
        pi11={name: pi_series[i] for i, name in enumerate(names)},
        cross_check={name: ext_series[i] for i, name in enumerate(names)},
        sup_divergence=sups,
        flagged={name: sups[name] > cross_check_tol for name in names},
        record=record,
        innovations=dw_out,
        innovations_path=w_full[::stride],
        diagnostics={"filter_max_trace_dev": float(diag_f[0]),
                     "filter_max_gain_imag": float(diag_f[1]),
                     "extended_max_trace_dev": float(diag_e[0]),
                     "extended_max_gain_imag": float(diag_e[1])},
        dt=dt, seed=run_seed, stride=stride)


# ---------------------------------------------------------------------------
# vacuum-input filter trajectories
# ---------------------------------------------------------------------------

@dataclass
class VacuumTrajectory:
    times: np.ndarray
    states: np.ndarray                # (n_stored, d, d)
    expectations: dict                # name -> (n_stored,) float
    record: MeasurementRecord
    innovations: np.ndarray
    diagnostics: dict
    dt: float
    stride: int


def run_vacuum_trajectory(system: SLHTriple, initial, dt: float, horizon: float,
                          seed: int | None = None,
                          record: MeasurementRecord | None = None,
                          observables: dict | None = None,
                          trajectory_index: int = 0,
                          store_stride: int | None = None,
                          renormalize: bool = False) -> VacuumTrajectory:
    """Conventional vacuum-input homodyne filter along a record.

    ``initial`` may be a state vector or a density matrix. Without a record
    one is generated from this same filter (source and filter coincide for
    vacuum input).
    """
    times = _grid(dt, horizon)
    n = times.size - 1
    init = np.asarray(initial, dtype=np.complex128)
    if init.ndim == 1:
        v0 = _unit_vector(init)
        rho0 = np.outer(v0, v0.conj())
    else:
        rho0 = init
        if rho0.shape != (system.dim, system.dim):
            raise ValueError("initial density matrix has wrong shape")
        if abs(np.trace(rho0) - 1.0) > 1e-8:
            raise ValueError("initial density matrix must have unit trace")

    if record is not None:
        if abs(record.dt - dt) > 1e-12 * max(1.0, dt) or record.n != n:
            raise ConfigError("record grid does not match requested grid")
        d_y = record.increments.copy()
        noise = np.zeros(n)
        gen_mode = False
    else:
        if seed is None:
            raise ConfigError("run_vacuum_trajectory requires a seed or a record")
        noise = rng.wiener_increments(seed, trajectory_index, n, dt)
        d_y = np.empty(n)
        gen_mode = True

    ops = superops.single_filter_ops(system.L, system.H)
    c_arr = np.zeros(n, dtype=np.complex128)
    sys_obs = _observable_matrices(observables, system.dim)
    names = list(sys_obs)
    obs_cov = _covector_stack([sys_obs[nm] for nm in names], system.dim ** 2)

    stride = _choose_stride(n, store_stride)
    n_stored = n // stride + 1
    obs_series = np.zeros((len(names), n_stored))
    state_series = np.zeros((n_stored, system.dim ** 2), dtype=np.complex128)
    dw_out = np.empty(n)
    diag = _fresh_diag()
    v = np.ascontiguousarray(vec(rho0))

    kernels.em_pass(ops.drift, ops.diffusion, ops.gain, ops.trace, c_arr, dt,
                    gen_mode, renormalize, noise, d_y, dw_out, obs_cov,
                    obs_series, state_series, stride, 0, v, diag)
    _check_finite(diag, dt, "vacuum filter")

    if record is None:
        record = MeasurementRecord(dt=dt, increments=d_y, seed=seed)
    return VacuumTrajectory(
        times=times[::stride],
        states=state_series.reshape(n_stored, system.dim, system.dim),
        expectations={name: obs_series[i] for i, name in enumerate(names)},
        record=record,
        innovations=dw_out,
        diagnostics={"max_trace_dev": float(diag[0]),
                     "max_gain_imag": float(diag[1])},
        dt=dt, stride=stride)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def resolve_thread_count(requested: int | None = None) -> int:
    """Worker count: explicit argument, else PHOTON_FILTER_THREADS, else cores."""
    if requested is not None:
        n = int(requested)
    else:
        env = os.environ.get("PHOTON_FILTER_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"PHOTON_FILTER_THREADS must be an integer, got {env!r}")
        else:
            n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


@dataclass
class EnsembleRun:
    """Sample statistics of filtered expectations over independent records."""
    times: np.ndarray
    mean: dict                        # name -> (n_stored,) sample mean of pi11
    stderr: dict                      # name -> (n_stored,) standard error (ddof=1)
    final_innovations: np.ndarray     # W_i(T), one entry per trajectory
    n_traj: int
    seed: int
    dt: float
    diagnostics: dict                 # worst-case diagnostics over the ensemble
    sup_divergence: dict              # name -> max over trajectories


def run_ensemble(system: SLHTriple, pulse: Pulse, eta: np.ndarray, dt: float,
                 horizon: float, n_traj: int, seed: int,
                 observables: dict | None = None,
                 w_floor: float = DEFAULT_W_FLOOR,
                 store_stride: int | None = None,
                 n_threads: int | None = None,
                 renormalize: bool = False) -> EnsembleRun:
    """Independent filter trajectories, each on its own generated record.

    Trajectory i uses the noise stream keyed by ``seed XOR i``; results are
    reduced in trajectory order, so output is independent of thread count
    and scheduling.
    """
    if n_traj < 2:
        raise ConfigError("ensemble needs at least 2 trajectories")
    times = _grid(dt, horizon)
    n = times.size - 1
    stride = _choose_stride(n, store_stride, target_points=200)
    names = list((observables or {}).keys())

    def one(index: int):
        run = run_trajectory(system, pulse, eta, dt, horizon, seed=seed,
                             record=None, observables=observables,
                             w_floor=w_floor, trajectory_index=index,
                             store_stride=stride, renormalize=renormalize)
        series = np.stack([run.pi11[nm] for nm in names]) if names else np.zeros((0, n // stride + 1))
        sups = np.array([run.sup_divergence[nm] for nm in names])
        diag = run.diagnostics
        return series, run.innovation_total(), sups, diag

    workers = resolve_thread_count(n_threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_traj)))
    else:
        results = [one(i) for i in range(n_traj)]

    n_stored = n // stride + 1
    sums = np.zeros((len(names), n_stored))
    sq_sums = np.zeros((len(names), n_stored))
    w_finals = np.empty(n_traj)
    sup_max = np.zeros(len(names))
    worst = {"filter_max_trace_dev": 0.0, "filter_max_gain_imag": 0.0,
             "extended_max_trace_dev": 0.0, "extended_max_gain_imag": 0.0}
    for i, (series, w_final, sups, diag) in enumerate(results):
        sums += series
        sq_sums += series * series
        w_finals[i] = w_final
        if names:
            np.maximum(sup_max, sups, out=sup_max)
        for key in worst:
            worst[key] = max(worst[key], diag[key])

    mean = sums / n_traj
    var = np.maximum(sq_sums - n_traj * mean * mean, 0.0) / (n_traj - 1)
    stderr = np.sqrt(var / n_traj)
    return EnsembleRun(
        times=times[::stride],
        mean={nm: mean[i] for i, nm in enumerate(names)},
        stderr={nm: stderr[i] for i, nm in enumerate(names)},
        final_innovations=w_finals,
        n_traj=n_traj, seed=seed, dt=dt,
        diagnostics=worst,
        sup_divergence={nm: float(sup_max[i]) for i, nm in enumerate(names)})
