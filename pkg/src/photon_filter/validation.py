"""Built-in acceptance checks.

Nine numbered criteria exercise the package end to end: deterministic
invariants of the coupled master equations, agreement between the three
independent computation routes (generic blocks, two-level scalar form,
Markovian embedding), stochastic-filter convergence on shared records,
ensemble consistency against the deterministic averages, innovation
statistics, and closed-form limits. Tolerances are pinned here; the
`validate` CLI mode and the acceptance test suite both call into this
module so there is a single source of truth for pass/fail.

Wall-clock budgets are asserted by the test suite and printed on the
console, but timings are never serialized into reports, which keeps report
files byte-identical across machines for a given (config, seed).
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .filtering import (generate_record, run_ensemble, run_trajectory,
                        run_vacuum_trajectory)
from .master import embedding_oracle, integrate_master, integrate_vacuum_master
from .operators import (SLHTriple, basis_state, passive_triple, sigma_minus,
                        sigma_x, sigma_y, sigma_z)
from .pulses import GaussianPulse, SquarePulse
from .rng import generator
from .slh import ExtendedSystem
from .twolevel import COEFF_ORDER_MASTER, integrate_bloch_master, twolevel_system

# Reference scenario shared by most checks: driven two-level system,
# Gaussian photon wavepacket, system starting in the ground state.
KAPPA = 1.0
OMEGA = 0.5
PULSE_T0 = 3.0
PULSE_SIGMA = 1.0
HORIZON = 10.0
DT_ODE = 1e-3

# Stochastic settings. The ensemble step is finer than the generic SDE
# default because the check compares an Euler-Maruyama ensemble mean against
# the deterministic average at 3 standard errors: the scheme's O(dt) weak
# bias must sit below the Monte-Carlo resolution at the quietest checkpoint
# (t = 1, where trajectories have barely spread). Measured bias at t = 1 is
# about 6e-3 * dt, and the standard error there is ~1.5e-7 for 500 records.
ENSEMBLE_N = 500
ENSEMBLE_SEED = 123
ENSEMBLE_DT = 5e-5
CHECKPOINTS = tuple(range(1, 11))

TRAJECTORY_DT = 1e-4
TRAJECTORY_SEED = 21
VACUUM_LIMIT_SEED = 11

TOL_TRACE = 1e-8
TOL_CROSS = 1e-10
TOL_EIG = -1e-8
TOL_SCALAR_FORM = 1e-6
TOL_EMBEDDING = 1e-4
EMBEDDING_MASK = 1e-6
TOL_DIVERGENCE = 1e-2
MIN_SHRINK = 3.0
TOL_VAR_REL = 0.2
TOL_VACUUM_LIMIT = 1e-12
TOL_ANCILLA = 1e-6
TOL_DECAY = 1e-8

BUDGET = {1: 1.0, 2: 2.0, 3: 2.0, 4: 10.0, 6: None, 7: 1.0, 8: 1.0, 9: 1.0}
TRAJECTORY_BUDGET_EACH = 5.0          # check 4 allows 5 s per trajectory pass
ENSEMBLE_BUDGET_CORES = 4
ENSEMBLE_BUDGET_SECONDS = 120.0


def ensemble_budget() -> float:
    """Wall budget for the ensemble check, scaled to available cores."""
    cores = min(ENSEMBLE_BUDGET_CORES, os.cpu_count() or 1)
    return ENSEMBLE_BUDGET_SECONDS * ENSEMBLE_BUDGET_CORES / cores


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict            # deterministic floats, serialized into reports
    detail: str               # one-line summary of the decisive quantities
    budget: float | None      # seconds allowed; None when uncapped
    wall: float               # measured seconds, console-only

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return (f"criterion {self.number} {self.status} {self.name}: "
                f"{self.detail} [{self.wall:.2f}s]")


def _scenario():
    system = twolevel_system(KAPPA, OMEGA)
    pulse = GaussianPulse(t0=PULSE_T0, sigma=PULSE_SIGMA)
    eta = basis_state(2, 0)
    return system, pulse, eta


class SharedContext:
    """Memoizes expensive intermediates shared between checks."""

    def __init__(self):
        self._cache: dict = {}

    def ensemble(self):
        if "ensemble" not in self._cache:
            system, pulse, eta = _scenario()
            self._cache["ensemble"] = run_ensemble(
                system, pulse, eta, dt=ENSEMBLE_DT, horizon=HORIZON,
                n_traj=ENSEMBLE_N, seed=ENSEMBLE_SEED,
                observables={"sz": sigma_z})
        return self._cache["ensemble"]


def check_coupled_invariants(ctx=None) -> CheckResult:
    """1: trace, adjoint symmetry, and positivity of the coupled blocks."""
    system, pulse, eta = _scenario()
    run = integrate_master(system, pulse, eta, dt=DT_ODE, horizon=HORIZON)
    inv = run.invariants
    measured = {
        "max_trace_dev_11": inv.max_trace_dev_11,
        "max_trace_dev_00": inv.max_trace_dev_00,
        "max_cross_asym": inv.max_cross_asym,
        "min_eig_11": inv.min_eig_11,
    }
    passed = (inv.max_trace_dev_11 <= TOL_TRACE
              and inv.max_trace_dev_00 <= TOL_TRACE
              and inv.max_cross_asym <= TOL_CROSS
              and inv.min_eig_11 >= TOL_EIG)
    detail = (f"|tr-1|<= {max(inv.max_trace_dev_11, inv.max_trace_dev_00):.2e} "
              f"(tol {TOL_TRACE:g}), cross asym {inv.max_cross_asym:.2e} "
              f"(tol {TOL_CROSS:g}), min eig {inv.min_eig_11:.2e} "
              f"(floor {TOL_EIG:g})")
    return CheckResult(1, "coupled-master invariants", passed, measured,
                       detail, BUDGET[1], 0.0)


def check_scalar_form(ctx=None) -> CheckResult:
    """2: generic blocks agree with the two-level scalar coefficients."""
    system, pulse, eta = _scenario()
    run = integrate_master(system, pulse, eta, dt=DT_ODE, horizon=HORIZON)
    scalar = integrate_bloch_master(KAPPA, OMEGA, pulse, eta,
                                    dt=DT_ODE, horizon=HORIZON)
    blocks = run.states                      # stride 1: every grid point
    paulis = {"x": sigma_x, "y": sigma_y, "z": sigma_z}
    dev = 0.0
    for name in COEFF_ORDER_MASTER:
        axis, corner = name[0], name[1:]     # e.g. "x01" -> sigma_x of block 01
        block_idx = {"00": 3, "01": 2, "11": 0}[corner]
        series = np.einsum("nij,ji->n", blocks[:, block_idx], paulis[axis])
        target = scalar.series[name]
        if corner != "01":
            series = series.real
        dev = max(dev, float(np.max(np.abs(series - target))))
    passed = dev <= TOL_SCALAR_FORM
    detail = f"max coefficient deviation {dev:.2e} (tol {TOL_SCALAR_FORM:g})"
    return CheckResult(2, "scalar-form equivalence", passed,
                       {"max_dev": dev}, detail, BUDGET[2], 0.0)


def check_embedding_readout(ctx=None) -> CheckResult:
    """3: ancilla-embedding readout matches the coupled master equations."""
    system, pulse, eta = _scenario()
    obs = {"sx": sigma_x, "sz": sigma_z}
    run = integrate_master(system, pulse, eta, dt=DT_ODE, horizon=HORIZON,
                           observables=obs)
    emb = embedding_oracle(system, pulse, eta, dt=DT_ODE, horizon=HORIZON,
                           observables=obs)
    mask = emb.w >= EMBEDDING_MASK
    dev = 0.0
    for name in obs:
        diff = np.abs(emb.mu[name][:, mask] - run.expectations[name][:, mask])
        dev = max(dev, float(np.max(diff)))
    breakdown_max = max((ev[2] for ev in emb.breakdown), default=0.0)
    passed = dev <= TOL_EMBEDDING
    detail = (f"max block-functional deviation {dev:.2e} "
              f"(tol {TOL_EMBEDDING:g}) where w >= {EMBEDDING_MASK:g}; "
              f"{len(emb.breakdown)} below-floor residues, max {breakdown_max:.1e}")
    return CheckResult(3, "embedding readout equivalence", passed,
                       {"max_dev": dev,
                        "breakdown_events": float(len(emb.breakdown)),
                        "breakdown_max": breakdown_max},
                       detail, BUDGET[3], 0.0)


def check_record_replay(ctx=None) -> CheckResult:
    """4: filter-vs-source divergence is small and shrinks with the step."""
    system, pulse, eta = _scenario()
    ext = ExtendedSystem(system, pulse)
    obs = {"sz": sigma_z}
    dt_fine = TRAJECTORY_DT / 4.0
    n_fine = int(round(HORIZON / dt_fine))
    fine = generator(TRAJECTORY_SEED, 0).standard_normal(n_fine) * math.sqrt(dt_fine)
    coarse = fine.reshape(-1, 4).sum(axis=1)

    walls = []
    sups = []
    for dt, noise in ((TRAJECTORY_DT, coarse), (dt_fine, fine)):
        record, _ = generate_record(ext, eta, dt, HORIZON, noise=noise)
        t0 = time.perf_counter()
        run = run_trajectory(system, pulse, eta, dt, HORIZON, record=record,
                             observables=obs)
        walls.append(time.perf_counter() - t0)
        sups.append(run.sup_divergence["sz"])
    ratio = sups[0] / sups[1] if sups[1] > 0 else math.inf
    passed = (sups[0] <= TOL_DIVERGENCE and ratio >= MIN_SHRINK
              and max(walls) <= TRAJECTORY_BUDGET_EACH)
    measured = {"sup_divergence": sups[0], "sup_divergence_fine": sups[1],
                "shrink_ratio": ratio}
    detail = (f"sup divergence {sups[0]:.2e} (tol {TOL_DIVERGENCE:g}), "
              f"shrinks {ratio:.2f}x at dt/4 (need >= {MIN_SHRINK:g}), "
              f"walls {walls[0]:.2f}s/{walls[1]:.2f}s "
              f"(each <= {TRAJECTORY_BUDGET_EACH:g}s)")
    return CheckResult(4, "record-replay convergence", passed, measured,
                       detail, BUDGET[4], 0.0)


def check_ensemble_mean(ctx=None) -> CheckResult:
    """5: ensemble mean of the filtered observable tracks the average."""
    ctx = ctx or SharedContext()
    system, pulse, eta = _scenario()
    ens = ctx.ensemble()
    run = integrate_master(system, pulse, eta, dt=DT_ODE, horizon=HORIZON,
                           observables={"sz": sigma_z})
    mu11 = run.expectations["sz"][0].real
    pulls = {}
    worst = 0.0
    for tc in CHECKPOINTS:
        ie = int(np.argmin(np.abs(ens.times - tc)))
        im = int(np.argmin(np.abs(run.times - tc)))
        diff = float(ens.mean["sz"][ie] - mu11[im])
        stderr = float(ens.stderr["sz"][ie])
        pull = abs(diff) / stderr
        pulls[f"pull_t{tc}"] = pull
        worst = max(worst, pull)
    passed = worst <= 3.0
    measured = {"max_pull": worst, **pulls}
    detail = (f"max |mean - average|/stderr = {worst:.2f} over t=1..10 "
              f"(need <= 3), N={ens.n_traj}, dt={ens.dt:g}")
    return CheckResult(5, "ensemble mean consistency", passed, measured,
                       detail, ensemble_budget(), 0.0)


def check_innovation_statistics(ctx=None) -> CheckResult:
    """6: accumulated innovations behave like a Wiener process."""
    ctx = ctx or SharedContext()
    ens = ctx.ensemble()
    w = ens.final_innovations
    n = ens.n_traj
    mean = float(np.mean(w))
    var = float(np.var(w, ddof=1))
    mean_bound = 3.0 * math.sqrt(HORIZON / n)
    var_rel = abs(var - HORIZON) / HORIZON
    passed = abs(mean) <= mean_bound and var_rel <= TOL_VAR_REL
    measured = {"mean_w": mean, "mean_bound": mean_bound,
                "var_w": var, "var_rel_dev": var_rel}
    detail = (f"|mean W(T)| = {abs(mean):.3f} (bound {mean_bound:.3f}), "
              f"var dev {var_rel:.3f} (tol {TOL_VAR_REL:g})")
    return CheckResult(6, "innovation statistics", passed, measured,
                       detail, BUDGET[6], 0.0)


def check_vacuum_limit(ctx=None) -> CheckResult:
    """7: with no pulse overlap the filter reduces to the vacuum filter."""
    system, _, eta = _scenario()
    pulse = SquarePulse(t0=12.0, t1=13.0)    # support entirely after horizon
    horizon = 2.0
    ext = ExtendedSystem(system, pulse)
    record, _ = generate_record(ext, eta, TRAJECTORY_DT, horizon,
                                seed=VACUUM_LIMIT_SEED)
    run = run_trajectory(system, pulse, eta, TRAJECTORY_DT, horizon,
                         record=record, observables={"sz": sigma_z},
                         store_stride=1)
    vac = run_vacuum_trajectory(system, eta, TRAJECTORY_DT, horizon,
                                record=record, observables={"sz": sigma_z},
                                store_stride=1)
    dev = float(np.max(np.abs(run.filter_states[:, 0] - vac.states)))
    passed = dev <= TOL_VACUUM_LIMIT
    detail = (f"max |sigma11 - rho_c| = {dev:.2e} (tol {TOL_VACUUM_LIMIT:g}) "
              f"over {run.filter_states.shape[0]} stored steps")
    return CheckResult(7, "vacuum-limit equivalence", passed,
                       {"max_dev": dev}, detail, BUDGET[7], 0.0)


def check_ancilla_weight(ctx=None) -> CheckResult:
    """8: for a passive plant the ancilla population equals the tail weight."""
    _, pulse, eta = _scenario()
    plant = passive_triple(2)
    emb = embedding_oracle(plant, pulse, eta, dt=DT_ODE, horizon=HORIZON)
    dev = float(np.max(np.abs(emb.ancilla_population - emb.w)))
    final = float(emb.ancilla_population[-1])
    passed = dev <= TOL_ANCILLA and final <= TOL_ANCILLA
    measured = {"max_dev": dev, "final_population": final}
    detail = (f"max |population - w(t)| = {dev:.2e} (tol {TOL_ANCILLA:g}), "
              f"final population {final:.2e}")
    return CheckResult(8, "ancilla weight tracking", passed, measured,
                       detail, BUDGET[8], 0.0)


def check_vacuum_decay(ctx=None) -> CheckResult:
    """9: vacuum master equation reproduces exponential decay exactly."""
    system = SLHTriple(np.eye(2), math.sqrt(KAPPA) * sigma_minus,
                       np.zeros((2, 2)))
    excited = basis_state(2, 1)
    run = integrate_vacuum_master(system, np.outer(excited, excited.conj()),
                                  dt=DT_ODE, horizon=HORIZON)
    pop = run.states[:, 1, 1].real
    dev = float(np.max(np.abs(pop - np.exp(-KAPPA * run.times))))
    passed = dev <= TOL_DECAY
    detail = f"max |<e|rho|e> - exp(-kt)| = {dev:.2e} (tol {TOL_DECAY:g})"
    return CheckResult(9, "vacuum decay law", passed, {"max_dev": dev},
                       detail, BUDGET[9], 0.0)


CHECKS = {
    1: check_coupled_invariants,
    2: check_scalar_form,
    3: check_embedding_readout,
    4: check_record_replay,
    5: check_ensemble_mean,
    6: check_innovation_statistics,
    7: check_vacuum_limit,
    8: check_ancilla_weight,
    9: check_vacuum_decay,
}
STOCHASTIC_CHECKS = {4, 5, 6, 7}


def run_acceptance(checks=None, log=None) -> list:
    """Run the numbered checks (all by default) and return their results.

    Stochastic checks trigger a kernel warm-up first so compilation time is
    not charged against any wall budget. ``log``, when given, receives one
    formatted line per completed check.
    """
    selected = sorted(checks) if checks else sorted(CHECKS)
    bad = [c for c in selected if c not in CHECKS]
    if bad:
        raise ValueError(f"unknown criteria: {bad}")
    if any(c in STOCHASTIC_CHECKS for c in selected):
        kernels.warm_up()
    ctx = SharedContext()
    results = []
    for number in selected:
        t0 = time.perf_counter()
        result = CHECKS[number](ctx)
        result.wall = time.perf_counter() - t0
        results.append(result)
        if log is not None:
            log(result.line())
    return results


def report_payload(results) -> dict:
    """Deterministic JSON fragment for reports: no wall times."""
    return {
        "passed": all(r.passed for r in results),
        "checks": [
            {"number": r.number, "name": r.name, "passed": r.passed,
             "measured": {k: float(v) for k, v in sorted(r.measured.items())},
             "detail": r.detail}
            for r in results
        ],
    }
