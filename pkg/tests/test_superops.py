"""Vectorized superoperator stacks against their direct matrix definitions."""
import numpy as np

from conftest import random_density, random_hermitian, random_matrix, random_unitary
from photon_filter.master import GeneralizedState, master_rhs
from photon_filter.operators import (SLHTriple, adjoint, lindblad_schrodinger)
from photon_filter.pulses import TabulatedPulse
from photon_filter.superops import (BLOCK_INDEX, BLOCK_ORDER, apply_weighted,
                                    coupled_master_generator,
                                    lindblad_schrodinger_matrix, unvec, vec)


def test_block_order():
    assert BLOCK_ORDER == ("11", "10", "01", "00")
    assert BLOCK_INDEX["11"] == 0 and BLOCK_INDEX["00"] == 3


def test_vec_unvec_round_trip(rng):
    m = random_matrix(rng, 3)
    assert np.array_equal(unvec(vec(m), 3), m)
    # C-order: row-major flattening
    assert np.array_equal(vec(m), m.reshape(-1))


def test_lindblad_matrix_matches_direct_map(rng):
    for dim in (2, 3):
        triple = SLHTriple(random_unitary(rng, dim), random_matrix(rng, dim),
                           random_hermitian(rng, dim))
        mat = lindblad_schrodinger_matrix(triple)
        for _ in range(5):
            rho = random_matrix(rng, dim)
            direct = lindblad_schrodinger(triple, rho)
            assert np.max(np.abs(unvec(mat @ vec(rho), dim) - direct)) <= 1e-12


def test_coupled_generator_matches_master_rhs(rng):
    """The weighted generator stack reproduces the block equations."""
    dim = 3
    triple = SLHTriple(random_unitary(rng, dim), random_matrix(rng, dim),
                       random_hermitian(rng, dim))
    pulse = TabulatedPulse([0.0, 1.0, 2.0], [0.7 + 0.3j, 1.0 - 0.2j, 0.1])
    stack = coupled_master_generator(triple)
    t = 0.8
    xi = complex(pulse(t))
    state = GeneralizedState(
        random_density(rng, dim), random_matrix(rng, dim),
        random_matrix(rng, dim), random_density(rng, dim), t=t)
    v = state.as_vector()
    weights = np.array([1.0, xi, np.conj(xi), abs(xi) ** 2],
                       dtype=np.complex128)
    combined = apply_weighted(stack, weights, v)
    deriv = master_rhs(state, t, triple, pulse)
    direct = np.concatenate([vec(deriv.rho11), vec(deriv.rho10),
                             vec(deriv.rho01), vec(deriv.rho00)])
    assert np.max(np.abs(combined - direct)) <= 1e-12


def test_generator_annihilates_uniform_trace(rng):
    """All four block equations are trace-free for any xi weight."""
    dim = 2
    triple = SLHTriple(random_unitary(rng, dim), random_matrix(rng, dim),
                       random_hermitian(rng, dim))
    stack = coupled_master_generator(triple)
    v = np.concatenate([vec(random_matrix(rng, dim)) for _ in range(4)])
    for xi in (0.0, 1.0, 0.4 - 1.1j):
        weights = np.array([1.0, xi, np.conj(xi), abs(xi) ** 2],
                           dtype=np.complex128)
        out = apply_weighted(stack, weights, v)
        blocks = out.reshape(4, dim, dim)
        traces = np.trace(blocks, axis1=1, axis2=2)
        assert np.max(np.abs(traces)) <= 1e-12


def test_adjoint_symmetry_of_cross_rows(rng):
    """If s01 = s10^dagger on input, the derivative preserves the pairing."""
    dim = 3
    triple = SLHTriple(random_unitary(rng, dim), random_matrix(rng, dim),
                       random_hermitian(rng, dim))
    stack = coupled_master_generator(triple)
    r11 = random_density(rng, dim)
    r10 = random_matrix(rng, dim)
    r00 = random_density(rng, dim)
    v = np.concatenate([vec(r11), vec(r10), vec(adjoint(r10)), vec(r00)])
    xi = 0.3 + 0.9j
    weights = np.array([1.0, xi, np.conj(xi), abs(xi) ** 2],
                       dtype=np.complex128)
    out = apply_weighted(stack, weights, v).reshape(4, dim, dim)
    assert np.max(np.abs(out[2] - adjoint(out[1]))) <= 1e-12
    assert np.max(np.abs(out[0] - adjoint(out[0]))) <= 1e-12
