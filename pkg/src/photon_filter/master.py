"""Deterministic integration: coupled single-photon master equations,
the vacuum master equation, and the ancilla-embedding oracle.

All integrators use fixed-step classical RK4 (smooth right-hand sides, tiny
dimensions, bit-reproducible runs). Traces are never renormalized; drift is
monitored and a breach of ``abort_tol`` raises ``InvariantViolation`` with
the earliest offending time.

Expectations of the coupled blocks use the dagger pairing
mu_jk(X) = tr[rho_jk* X]; the pairing is linear in X and antilinear in the
block, which is what makes the cross-block equations of Heisenberg and
Schrodinger form mutually adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .operators import SLHTriple, adjoint, as_operator, lindblad_schrodinger
from .pulses import Pulse
from .slh import (ANCILLA_OBSERVABLES, DEFAULT_W_FLOOR, ExtendedSystem,
                  ancilla_weight)
from . import superops

DEFAULT_DT_ODE = 1e-3
DEFAULT_ABORT_TOL = 1e-6


@dataclass
class GeneralizedState:
    """The four coupled blocks (rho11, rho10, rho01, rho00) at one time."""

    rho11: np.ndarray
    rho10: np.ndarray
    rho01: np.ndarray
    rho00: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, eta: np.ndarray) -> "GeneralizedState":
        eta = _unit_vector(eta)
        p = np.outer(eta, eta.conj())
        z = np.zeros_like(p)
        return cls(rho11=p.copy(), rho10=z.copy(), rho01=z.copy(), rho00=p.copy())

    @property
    def dim(self) -> int:
        return self.rho11.shape[0]

    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.rho11, self.rho10, self.rho01, self.rho00

    def expectation(self, block: str, x: np.ndarray) -> complex:
        """mu_jk(X) = tr[rho_jk* X] (dagger pairing)."""
        rho = getattr(self, f"rho{block}")
        return complex(np.vdot(rho, np.asarray(x, dtype=np.complex128)))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([superops.vec(b) for b in self.blocks()])

    @classmethod
    def from_vector(cls, v: np.ndarray, dim: int, t: float = 0.0) -> "GeneralizedState":
        q = dim * dim
        parts = [superops.unvec(v[i * q:(i + 1) * q], dim) for i in range(4)]
        return cls(*parts, t=t)


def _unit_vector(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=np.complex128).reshape(-1)
    nrm = float(np.linalg.norm(eta))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"eta must be a unit vector, got norm {nrm!r}")
    return eta / nrm


def master_rhs(state: GeneralizedState, t: float, system: SLHTriple,
               pulse: Pulse) -> GeneralizedState:
    """Right-hand side of the coupled master equations at time t.

    d rho11 = G*(rho11) + [S rho01, L*] xi + [L, rho10 S*] xi* + (S rho00 S* - rho00)|xi|^2
    d rho10 = G*(rho10) + [S rho00, L*] xi
    d rho01 = G*(rho01) + [L, rho00 S*] xi*
    d rho00 = G*(rho00)
    """
    S, L = system.S, system.L
    if state.dim != system.dim:
        raise ValueError("state and system dimensions differ")
    ld, sd = adjoint(L), adjoint(S)
    xi = complex(pulse(t))
    xis = xi.conjugate()
    r11, r10, r01, r00 = state.blocks()

    def after_s(rho):   # [S rho, L*]
        m = S @ rho
        return m @ ld - ld @ m

    def before_s(rho):  # [L, rho S*]
        m = rho @ sd
        return L @ m - m @ L

    d11 = (lindblad_schrodinger(system, r11)
           + after_s(r01) * xi + before_s(r10) * xis
           + (S @ r00 @ sd - r00) * (xi.real ** 2 + xi.imag ** 2))
    d10 = lindblad_schrodinger(system, r10) + after_s(r00) * xi
    d01 = lindblad_schrodinger(system, r01) + before_s(r00) * xis
    d00 = lindblad_schrodinger(system, r00)
    return GeneralizedState(d11, d10, d01, d00, t=t)


def _rk4_weighted_path(stack: np.ndarray, z_nodes: np.ndarray,
                       z_halves: np.ndarray, v0: np.ndarray,
                       dt: float) -> np.ndarray:
    """Integrate v' = sum_k weight_k(z(t)) stack[k] v on a uniform grid.

    Weights are [1, z, conj z, |z|^2]; z is sampled at the nodes and the
    midpoints (RK4 stage times). Returns the full path (n+1, m).
    """
    k, m, _ = stack.shape
    flat = np.ascontiguousarray(stack.reshape(k * m, m))
    n = z_nodes.size - 1
    path = np.empty((n + 1, m), dtype=np.complex128)
    v = v0.astype(np.complex128, copy=True)
    path[0] = v

    def apply(z: complex, v: np.ndarray) -> np.ndarray:
        u = (flat @ v).reshape(k, m)
        acc = u[0] + z * u[1]
        acc += z.conjugate() * u[2]
        acc += (z.real * z.real + z.imag * z.imag) * u[3]
        return acc

    for i in range(n):
        z0, zh, z1 = complex(z_nodes[i]), complex(z_halves[i]), complex(z_nodes[i + 1])
        k1 = apply(z0, v)
        k2 = apply(zh, v + (0.5 * dt) * k1)
        k3 = apply(zh, v + (0.5 * dt) * k2)
        k4 = apply(z1, v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        path[i + 1] = v
    return path


def _grid(dt: float, horizon: float) -> np.ndarray:
    if dt <= 0 or horizon < dt:
        raise ValueError("require dt > 0 and horizon >= dt")
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integer multiple of dt {dt}")
    return dt * np.arange(n + 1)


@dataclass
class InvariantSummary:
    max_trace_dev_11: float
    max_trace_dev_00: float
    max_cross_asym: float
    max_herm_dev: float
    min_eig_11: float
    min_eig_00: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass
class MasterRun:
    """Result of integrating the coupled master equations."""

    times: np.ndarray
    states: np.ndarray            # (n_stored, 4, d, d), stride-subsampled
    state_times: np.ndarray
    expectations: dict            # name -> (4, n+1) complex, rows in BLOCK_ORDER
    invariants: InvariantSummary
    dt: float
    horizon: float

    def block_expectation(self, block: str, name: str) -> np.ndarray:
        return self.expectations[name][superops.BLOCK_INDEX[block]]

    def final_state(self) -> GeneralizedState:
        s = self.states[-1]
        return GeneralizedState(s[0], s[1], s[2], s[3], t=float(self.state_times[-1]))


def _check_coupled_invariants(times: np.ndarray, blocks: np.ndarray,
                              abort_tol: float) -> InvariantSummary:
    """Vectorized sweep over (n+1, 4, d, d) block snapshots."""
    tr11 = np.abs(np.trace(blocks[:, 0], axis1=1, axis2=2) - 1.0)
    tr00 = np.abs(np.trace(blocks[:, 3], axis1=1, axis2=2) - 1.0)
    cross = np.max(np.abs(blocks[:, 2] - blocks[:, 1].conj().transpose(0, 2, 1)),
                   axis=(1, 2))
    herm11 = np.max(np.abs(blocks[:, 0] - blocks[:, 0].conj().transpose(0, 2, 1)),
                    axis=(1, 2))
    herm00 = np.max(np.abs(blocks[:, 3] - blocks[:, 3].conj().transpose(0, 2, 1)),
                    axis=(1, 2))
    herm = np.maximum(herm11, herm00)
    # Hermitize before eigvalsh; the Hermiticity deviation is checked separately.
    sym11 = 0.5 * (blocks[:, 0] + blocks[:, 0].conj().transpose(0, 2, 1))
    sym00 = 0.5 * (blocks[:, 3] + blocks[:, 3].conj().transpose(0, 2, 1))
    eig11 = np.linalg.eigvalsh(sym11).min(axis=1)
    eig00 = np.linalg.eigvalsh(sym00).min(axis=1)

    for name, dev in (("trace(rho11) == 1", tr11), ("trace(rho00) == 1", tr00),
                      ("rho01 == rho10 adjoint", cross),
                      ("rho11/rho00 Hermitian", herm),
                      ("rho11 positive semidefinite", -eig11),
                      ("rho00 positive semidefinite", -eig00)):
        bad = np.nonzero(dev > abort_tol)[0]
        if bad.size:
            i = int(bad[0])
            raise InvariantViolation(name, float(dev[i]), abort_tol,
                                     time=float(times[i]))

    return InvariantSummary(
        max_trace_dev_11=float(tr11.max()), max_trace_dev_00=float(tr00.max()),
        max_cross_asym=float(cross.max()), max_herm_dev=float(herm.max()),
        min_eig_11=float(eig11.min()), min_eig_00=float(eig00.min()))


def _dagger_pair_series(blocks: np.ndarray, observables: dict) -> dict:
    """name -> (4, n+1) array of mu_jk(X) = tr[rho_jk* X]."""
    out = {}
    for name, x in observables.items():
        xo = as_operator(x, name)
        out[name] = np.einsum("nbij,ij->bn", blocks.conj(), xo)
    return out


def integrate_master(system: SLHTriple, pulse: Pulse, eta: np.ndarray,
                     dt: float = DEFAULT_DT_ODE, horizon: float = 10.0,
                     observables: dict | None = None,
                     state_stride: int = 1,
                     abort_tol: float = DEFAULT_ABORT_TOL) -> MasterRun:
    """RK4 integration of the coupled master equations from rho11 = rho00 =
    |eta><eta|, cross blocks zero. Observables are recorded at every grid
    point; state snapshots every ``state_stride`` steps."""
    times = _grid(dt, horizon)
    d = system.dim
    stack = superops.coupled_master_generator(system)
    xi_nodes = np.asarray(pulse(times), dtype=np.complex128)
    xi_halves = np.asarray(pulse(times[:-1] + 0.5 * dt), dtype=np.complex128)
    v0 = GeneralizedState.initial(eta).as_vector()
    if v0.size != 4 * d * d:
        raise ValueError("eta dimension does not match the system")

    path = _rk4_weighted_path(stack, xi_nodes, xi_halves, v0, dt)
    blocks = path.reshape(times.size, 4, d, d)
    invariants = _check_coupled_invariants(times, blocks, abort_tol)
    expectations = _dagger_pair_series(blocks, observables or {})
    stride = max(1, int(state_stride))
    return MasterRun(times=times, states=blocks[::stride].copy(),
                     state_times=times[::stride].copy(),
                     expectations=expectations, invariants=invariants,
                     dt=dt, horizon=horizon)


@dataclass
class VacuumRun:
    times: np.ndarray
    states: np.ndarray            # (n+1, d, d)
    expectations: dict            # name -> (n+1,) complex, plain trace pairing
    max_trace_dev: float
    max_herm_dev: float
    min_eig: float
    dt: float


def integrate_vacuum_master(system: SLHTriple, rho0: np.ndarray,
                            dt: float = DEFAULT_DT_ODE, horizon: float = 10.0,
                            observables: dict | None = None,
                            abort_tol: float = DEFAULT_ABORT_TOL) -> VacuumRun:
    """RK4 on the vacuum master equation d rho = G*(rho)."""
    times = _grid(dt, horizon)
    d = system.dim
    rho0 = as_operator(rho0, "rho0")
    gen = lindblad_schrodinger_matrix_cached(system)
    # constant generator: reuse the weighted driver with z == 0
    zeros = np.zeros(times.size, dtype=np.complex128)
    full = np.zeros((4, d * d, d * d), dtype=np.complex128)
    full[0] = gen
    path = _rk4_weighted_path(full, zeros, zeros[:-1], superops.vec(rho0), dt)
    states = path.reshape(times.size, d, d)

    tr = np.abs(np.trace(states, axis1=1, axis2=2) - np.trace(rho0).real)
    herm = np.max(np.abs(states - states.conj().transpose(0, 2, 1)), axis=(1, 2))
    sym = 0.5 * (states + states.conj().transpose(0, 2, 1))
    eig = np.linalg.eigvalsh(sym).min(axis=1)
    for name, dev in (("trace preserved", tr), ("Hermiticity preserved", herm),
                      ("positivity preserved", -eig)):
        bad = np.nonzero(dev > abort_tol)[0]
        if bad.size:
            i = int(bad[0])
            raise InvariantViolation(name, float(dev[i]), abort_tol,
                                     time=float(times[i]))

    expectations = {}
    for name, x in (observables or {}).items():
        xo = as_operator(x, name)
        expectations[name] = np.einsum("nij,ji->n", states, xo)
    return VacuumRun(times=times, states=states, expectations=expectations,
                     max_trace_dev=float(tr.max()), max_herm_dev=float(herm.max()),
                     min_eig=float(eig.min()), dt=dt)


_lindblad_matrix_cache: dict = {}


def lindblad_schrodinger_matrix_cached(system: SLHTriple) -> np.ndarray:
    key = id(system)
    hit = _lindblad_matrix_cache.get(key)
    if hit is None:
        hit = superops.lindblad_schrodinger_matrix(system)
        if len(_lindblad_matrix_cache) > 64:
            _lindblad_matrix_cache.clear()
        _lindblad_matrix_cache[key] = hit
    return hit


@dataclass
class EmbeddingRun:
    """Extended-system vacuum run with the block functionals read out.

    ``mu[name]`` has shape (4, n+1) in BLOCK_ORDER; entries are NaN where the
    readout weight has fallen below the floor (photon emitted, block
    undefined). ``breakdown`` lists (t, block, |numerator|) events where a
    below-floor weight met a numerator that is not numerically zero.
    """

    times: np.ndarray
    w: np.ndarray
    ancilla_population: np.ndarray
    mu: dict
    numerators: dict
    invariants: dict
    breakdown: list
    dt: float


def embedding_oracle(system: SLHTriple, pulse: Pulse, eta: np.ndarray,
                     dt: float = DEFAULT_DT_ODE, horizon: float = 10.0,
                     observables: dict | None = None,
                     w_floor: float = DEFAULT_W_FLOOR,
                     breakdown_tol: float = 1e-8) -> EmbeddingRun:
    """Independent route to the coupled-master functionals.

    Integrates the vacuum master equation of the extended (ancilla x system)
    model from |e1><e1| (x) |eta><eta| and reads the block functionals as

        mu_jk(X) = tr[rho_ext (Q_jk (x) X)] / w_jk(t)

    with Q as in ``ANCILLA_OBSERVABLES`` and w_jk built from the tail weight.
    """
    ext = ExtendedSystem(system, pulse, w_floor)
    times = _grid(dt, horizon)
    d = system.dim
    ops = ext.filter_ops()
    c_nodes = np.asarray(ext.coupling(times), dtype=np.complex128)
    c_halves = np.asarray(ext.coupling(times[:-1] + 0.5 * dt), dtype=np.complex128)
    v0 = superops.vec(ext.initial_state(eta))
    path = _rk4_weighted_path(ops.drift, c_nodes, c_halves, v0, dt)
    states = path.reshape(times.size, 2 * d, 2 * d)

    tr = np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)
    herm = np.max(np.abs(states - states.conj().transpose(0, 2, 1)), axis=(1, 2))
    eig = np.linalg.eigvalsh(0.5 * (states + states.conj().transpose(0, 2, 1))
                             ).min(axis=1)
    invariants = {"max_trace_dev": float(tr.max()),
                  "max_herm_dev": float(herm.max()),
                  "min_eig": float(eig.min())}

    w = np.asarray(pulse.tail_weight(times), dtype=np.float64)
    number = ANCILLA_OBSERVABLES["00"]
    population = np.einsum("nij,ji->n",
                           states, np.kron(number, np.eye(d))).real

    mu: dict = {}
    numerators: dict = {}
    breakdown: list = []
    for name, x in (observables or {}).items():
        xo = as_operator(x, name)
        mu_rows = np.empty((4, times.size), dtype=np.complex128)
        num_rows = np.empty((4, times.size), dtype=np.complex128)
        for row, block in enumerate(superops.BLOCK_ORDER):
            q_jk = ANCILLA_OBSERVABLES[block]
            num = np.einsum("nij,ji->n", states, np.kron(q_jk, xo))
            weight = np.broadcast_to(
                np.asarray(ancilla_weight(block, w), dtype=np.float64),
                w.shape).copy()
            if block == "11":
                valid = np.ones(times.size, dtype=bool)
            else:
                floor = np.sqrt(w_floor) if block in ("10", "01") else w_floor
                valid = weight > floor
            vals = np.full(times.size, np.nan + 0j, dtype=np.complex128)
            vals[valid] = num[valid] / weight[valid]
            mu_rows[row] = vals
            num_rows[row] = num
            if block != "11":
                for i in np.nonzero(~valid & (np.abs(num) > breakdown_tol))[0]:
                    breakdown.append((float(times[i]), block, float(abs(num[i]))))
        mu[name] = mu_rows
        numerators[name] = num_rows

    return EmbeddingRun(times=times, w=w, ancilla_population=population,
                        mu=mu, numerators=numerators, invariants=invariants,
                        breakdown=breakdown, dt=dt)
