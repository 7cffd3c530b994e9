"""Coupled master equations, the vacuum master equation, and the
ancilla-embedding readout, checked against each other and closed forms."""
import numpy as np
import pytest

from conftest import random_density, random_hermitian, random_matrix, random_unitary
from photon_filter.errors import InvariantViolation
from photon_filter.master import (GeneralizedState, embedding_oracle,
                                  integrate_master, integrate_vacuum_master,
                                  master_rhs)
from photon_filter.operators import (SLHTriple, adjoint, commutator,
                                     lindblad_heisenberg, passive_triple,
                                     sigma_minus, sigma_x, sigma_z)
from photon_filter.pulses import (DecayingExponentialPulse, GaussianPulse,
                                  SquarePulse, TabulatedPulse)
from photon_filter.superops import BLOCK_ORDER

KAPPA = 1.0
OMEGA = 0.5


def default_system() -> SLHTriple:
    return SLHTriple(np.eye(2), np.sqrt(KAPPA) * np.asarray(sigma_minus),
                     OMEGA * np.asarray(sigma_z))


def random_dim3_system() -> SLHTriple:
    g = np.random.default_rng(5)
    s = random_unitary(g, 3)
    l = 0.6 * random_matrix(g, 3)
    h = random_hermitian(g, 3)
    return SLHTriple(s, l, h)


GROUND = np.array([1.0, 0.0])


def test_rhs_traces_vanish(rng):
    """Every block derivative is traceless for arbitrary block matrices."""
    system = random_dim3_system()
    pulse = TabulatedPulse([0.0, 0.5, 1.0, 2.0], [0.2, 1.0, 0.3 + 0.4j, 0.0])
    for _ in range(10):
        state = GeneralizedState(random_matrix(rng, 3), random_matrix(rng, 3),
                                 random_matrix(rng, 3), random_density(rng, 3))
        out = master_rhs(state, 0.8, system, pulse)
        for block in out.blocks():
            assert abs(np.trace(block)) <= 1e-12


def test_rhs_dimension_mismatch():
    state = GeneralizedState.initial(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError, match="dimensions differ"):
        master_rhs(state, 0.0, default_system(), SquarePulse(0.0, 1.0))


def test_initial_state_structure():
    eta = np.array([1.0, 1.0]) / np.sqrt(2)
    st = GeneralizedState.initial(eta)
    p = np.outer(eta, eta.conj())
    assert np.allclose(st.rho11, p) and np.allclose(st.rho00, p)
    assert np.all(st.rho10 == 0) and np.all(st.rho01 == 0)
    with pytest.raises(ValueError, match="unit vector"):
        GeneralizedState.initial(np.array([1.0, 1.0]))


def test_no_photon_reduces_to_vacuum_dynamics():
    """With the pulse entirely outside the horizon the occupied and vacuum
    blocks stay identical, the cross blocks stay zero, and the vacuum block
    agrees with the standalone vacuum integrator."""
    system = default_system()
    pulse = SquarePulse(12.0, 13.0)      # xi(t) = 0 for all t <= 3
    eta = np.array([1.0, 1.0]) / np.sqrt(2)
    run = integrate_master(system, pulse, eta, dt=1e-3, horizon=3.0)
    assert np.max(np.abs(run.states[:, 0] - run.states[:, 3])) <= 1e-14
    assert np.max(np.abs(run.states[:, 1])) == 0.0
    assert np.max(np.abs(run.states[:, 2])) == 0.0
    vac = integrate_vacuum_master(system, np.outer(eta, eta.conj()),
                                  dt=1e-3, horizon=3.0)
    assert np.max(np.abs(run.states[:, 3] - vac.states)) <= 1e-10


def test_decoupled_occupied_block_is_unitary():
    """L = 0, S = I: the occupied block evolves unitarily under H alone."""
    h = OMEGA * np.asarray(sigma_z)
    system = SLHTriple(np.eye(2), np.zeros((2, 2)), h)
    eta = np.array([1.0, 1.0]) / np.sqrt(2)
    run = integrate_master(system, GaussianPulse(3.0, 1.0), eta,
                           dt=1e-3, horizon=6.0)
    p = np.outer(eta, eta.conj())
    phases = np.exp(-1j * np.diag(h)[None, :] * run.state_times[:, None])
    closed = phases[:, :, None] * p[None] * phases.conj()[:, None, :]
    assert np.max(np.abs(run.states[:, 0] - closed)) <= 1e-10


def heisenberg_rhs(blocks: np.ndarray, t: float, system: SLHTriple,
                   pulse, x: np.ndarray) -> dict:
    """Adjoint (observable-side) form of the coupled equations.

    d/dt mu11(X) = mu11(G X) + xi* mu01(S*[X,L]) + xi mu10([L*,X]S)
                   + |xi|^2 mu00(S*XS - X)
    d/dt mu10(X) = mu10(G X) + xi* mu00(S*[X,L])
    d/dt mu01(X) = mu01(G X) + xi  mu00([L*,X]S)
    d/dt mu00(X) = mu00(G X)
    """
    s, l = system.S, system.L
    sd, ld = adjoint(s), adjoint(l)
    xi = complex(pulse(t))

    def mu(row, op):
        return complex(np.vdot(blocks[row], op))

    gx = lindblad_heisenberg(system, x)
    lower = sd @ commutator(x, l)           # S*[X, L]
    raise_ = commutator(ld, x) @ s          # [L*, X] S
    scat = sd @ x @ s - x
    return {
        "11": mu(0, gx) + xi.conjugate() * mu(2, lower) + xi * mu(1, raise_)
              + (abs(xi) ** 2) * mu(3, scat),
        "10": mu(1, gx) + xi.conjugate() * mu(3, lower),
        "01": mu(2, gx) + xi * mu(3, raise_),
        "00": mu(3, gx),
    }


def test_heisenberg_duality_finite_difference(rng):
    """Centered differences of the integrated functionals match the adjoint
    equations at 20 interior grid times."""
    system = random_dim3_system()
    pulse = GaussianPulse(2.0, 0.7)
    eta = np.array([1.0, 0.0, 0.0])
    dt = 1e-3
    run = integrate_master(system, pulse, eta, dt=dt, horizon=6.0)
    ops = [random_hermitian(rng, 3), random_matrix(rng, 3)]
    idx = np.linspace(50, run.times.size - 51, 20).astype(int)
    worst = 0.0
    for x in ops:
        mu_series = np.einsum("nbij,ij->bn", run.states.conj(), x)
        for i in idx:
            fd = (mu_series[:, i + 1] - mu_series[:, i - 1]) / (2 * dt)
            rhs = heisenberg_rhs(run.states[i], float(run.times[i]),
                                 system, pulse, x)
            for row, block in enumerate(BLOCK_ORDER):
                rel = abs(fd[row] - rhs[block]) / max(1.0, abs(fd[row]))
                worst = max(worst, rel)
    assert worst <= 1e-4


def test_embedding_matches_master_dim3():
    """The ancilla embedding reproduces all four block functionals of the
    directly integrated equations on a random three-level plant."""
    system = random_dim3_system()
    pulse = GaussianPulse(2.0, 0.7)
    eta = np.array([1.0, 0.0, 0.0])
    obs = {"a": np.diag([1.0, -1.0, 0.0]).astype(complex),
           "b": np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)}
    run = integrate_master(system, pulse, eta, dt=1e-3, horizon=6.0,
                           observables=obs)
    emb = embedding_oracle(system, pulse, eta, dt=1e-3, horizon=6.0,
                           observables=obs)
    mask = emb.w >= 1e-6
    for name in obs:
        dev = np.abs(run.expectations[name][:, mask] - emb.mu[name][:, mask])
        assert np.max(dev) <= 1e-8
    assert emb.invariants["max_trace_dev"] <= 1e-10
    assert emb.invariants["min_eig"] >= -1e-10


def test_embedding_cross_block_starts_at_zero():
    emb = embedding_oracle(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                           dt=1e-3, horizon=1.0,
                           observables={"sx": sigma_x, "sz": sigma_z})
    for name in ("sx", "sz"):
        assert abs(emb.mu[name][1, 0]) <= 1e-14   # block 10 at t = 0
        assert abs(emb.mu[name][2, 0]) <= 1e-14   # block 01 at t = 0


def test_embedding_passive_plant():
    """A non-interacting plant leaves the vacuum functional at 1 and the
    ancilla population tracking the tail weight exactly."""
    system = passive_triple(2)
    pulse = GaussianPulse(3.0, 1.0)
    emb = embedding_oracle(system, pulse, GROUND, dt=1e-3, horizon=8.0,
                           observables={"id": np.eye(2)})
    valid = ~np.isnan(emb.mu["id"][3].real)
    assert np.max(np.abs(emb.mu["id"][3][valid] - 1.0)) <= 1e-8
    assert np.max(np.abs(emb.ancilla_population - emb.w)) <= 1e-6
    assert emb.breakdown == []


def test_vacuum_master_maximally_mixed():
    """Trace, Hermiticity and positivity hold from a mixed start, and the
    excited population decays at rate kappa."""
    system = default_system()
    rho0 = 0.5 * np.eye(2, dtype=complex)
    run = integrate_vacuum_master(system, rho0, dt=1e-3, horizon=5.0,
                                  observables={"sz": sigma_z})
    assert run.max_trace_dev <= 1e-12
    assert run.max_herm_dev <= 1e-10
    assert run.min_eig >= -1e-10
    expected = np.exp(-KAPPA * run.times) - 1.0     # 2 p_e(t) - 1
    assert np.max(np.abs(run.expectations["sz"].real - expected)) <= 1e-8
    assert np.max(np.abs(run.expectations["sz"].imag)) <= 1e-12


def test_coupled_invariants_short_run():
    run = integrate_master(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                           dt=1e-3, horizon=2.0,
                           observables={"sz": sigma_z})
    inv = run.invariants
    assert inv.max_trace_dev_11 <= 1e-8
    assert inv.max_trace_dev_00 <= 1e-8
    assert inv.max_cross_asym <= 1e-10
    assert inv.max_herm_dev <= 1e-10
    assert inv.min_eig_11 >= -1e-8
    assert inv.min_eig_00 >= -1e-8
    # dagger pairing: occupied-block row of a Hermitian observable is real
    assert np.max(np.abs(run.expectations["sz"][0].imag)) <= 1e-12


def test_state_stride_and_final_state():
    run = integrate_master(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                           dt=1e-3, horizon=2.0, state_stride=10,
                           observables={"sz": sigma_z})
    assert run.states.shape == (201, 4, 2, 2)
    assert np.array_equal(run.state_times, run.times[::10])
    assert run.expectations["sz"].shape == (4, run.times.size)
    fin = run.final_state()
    assert fin.t == pytest.approx(2.0)
    assert np.array_equal(fin.rho11, run.states[-1, 0])
    got = run.block_expectation("00", "sz")
    assert np.array_equal(got, run.expectations["sz"][3])


def test_abort_on_invariant_breach():
    with pytest.raises(InvariantViolation) as info:
        integrate_master(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                         dt=1e-3, horizon=2.0, abort_tol=1e-18)
    assert info.value.tolerance == 1e-18
    assert "exceeds tolerance" in str(info.value)


def test_grid_validation():
    with pytest.raises(ValueError, match="integer multiple"):
        integrate_master(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                         dt=0.3, horizon=1.0)
    with pytest.raises(ValueError, match="dt > 0"):
        integrate_master(default_system(), GaussianPulse(3.0, 1.0), GROUND,
                         dt=-1e-3, horizon=1.0)


def test_vacuum_master_decaying_exponential_drive_consistency():
    """Same coupled system driven by a different pulse family still keeps the
    structural invariants (regression sweep for the pulse-dependent terms)."""
    run = integrate_master(default_system(), DecayingExponentialPulse(0.8, 0.5),
                           GROUND, dt=1e-3, horizon=6.0)
    inv = run.invariants
    assert inv.max_trace_dev_11 <= 1e-8
    assert inv.max_cross_asym <= 1e-10
    assert inv.min_eig_11 >= -1e-8
