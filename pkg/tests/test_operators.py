"""Operator algebra: Pauli identities, Lindblad maps, and their duality."""
import numpy as np
import pytest

from conftest import random_density, random_hermitian, random_matrix
from photon_filter.operators import (SLHTriple, adjoint, anticommutator,
                                     basis_state, commutator,
                                     dissipator_heisenberg, identity2,
                                     imag_part, lindblad_heisenberg,
                                     lindblad_schrodinger, number_op,
                                     passive_triple, projector, sigma_minus,
                                     sigma_plus, sigma_x, sigma_y, sigma_z)


def test_basis_convention():
    # index 0 = ground, index 1 = excited
    g, e = basis_state(2, 0), basis_state(2, 1)
    assert np.allclose(sigma_minus @ e, g)
    assert np.allclose(sigma_minus @ g, 0.0)
    assert np.allclose(sigma_z @ e, e)
    assert np.allclose(sigma_z @ g, -g)
    assert np.allclose(number_op, sigma_plus @ sigma_minus)
    assert np.allclose(projector(e), np.diag([0.0, 1.0]))


def test_commutator_pauli_identities():
    assert np.allclose(commutator(sigma_x, sigma_y), 2j * sigma_z)
    assert np.allclose(commutator(sigma_z, sigma_minus), -2.0 * sigma_minus)


def test_commutator_with_identity_vanishes(rng):
    a = random_matrix(rng, 4)
    assert np.allclose(commutator(np.eye(4), a), 0.0)
    assert np.allclose(anticommutator(np.eye(4), a), 2.0 * a)


def test_commutator_dimension_mismatch():
    with pytest.raises(ValueError):
        commutator(sigma_x, np.eye(3))


def test_dissipator_heisenberg_closed_forms(rng):
    # L arbitrary, X = I -> 0
    l_op = random_matrix(rng, 3)
    assert np.allclose(dissipator_heisenberg(l_op, np.eye(3)), 0.0)
    # L = sigma_minus, X = sigma_z -> -(I + sigma_z)
    assert np.allclose(dissipator_heisenberg(sigma_minus, sigma_z),
                       -(identity2 + sigma_z))
    # L = 0 -> 0
    assert np.allclose(dissipator_heisenberg(np.zeros((2, 2)), sigma_x), 0.0)


def test_lindblad_heisenberg_closed_forms():
    omega, kappa = 0.7, 1.3
    # H = omega sigma_z, L = 0, X = sigma_x -> -2 omega sigma_y
    g1 = SLHTriple(identity2, np.zeros((2, 2)), omega * sigma_z)
    assert np.allclose(lindblad_heisenberg(g1, sigma_x), -2.0 * omega * sigma_y)
    # L = sqrt(kappa) sigma_minus, H = 0, X = sigma_z -> -kappa (I + sigma_z)
    g2 = SLHTriple(identity2, np.sqrt(kappa) * sigma_minus, np.zeros((2, 2)))
    assert np.allclose(lindblad_heisenberg(g2, sigma_z),
                       -kappa * (identity2 + sigma_z))


def test_lindblad_annihilates_identity(rng):
    for dim in (2, 3, 4):
        triple = SLHTriple(np.eye(dim), random_matrix(rng, dim),
                           random_hermitian(rng, dim))
        assert np.max(np.abs(lindblad_heisenberg(triple, np.eye(dim)))) <= 1e-12


def test_lindblad_schrodinger_closed_forms(rng):
    # L = 0, H = 0 -> 0
    g0 = passive_triple(3)
    assert np.allclose(lindblad_schrodinger(g0, random_matrix(rng, 3)), 0.0)
    # L = sqrt(kappa) sigma_minus, rho = |e><e| -> kappa(|g><g| - |e><e|)
    kappa = 0.9
    g = SLHTriple(identity2, np.sqrt(kappa) * sigma_minus, np.zeros((2, 2)))
    excited = projector(basis_state(2, 1))
    ground = projector(basis_state(2, 0))
    assert np.allclose(lindblad_schrodinger(g, excited),
                       kappa * (ground - excited))


def test_heisenberg_schrodinger_duality(rng):
    # tr[G*(rho) X] == tr[rho G(X)] for >= 100 random pairs, dims <= 4
    worst = 0.0
    for _ in range(40):
        for dim in (2, 3, 4):
            triple = SLHTriple(np.eye(dim), random_matrix(rng, dim),
                               random_hermitian(rng, dim))
            rho = random_density(rng, dim)
            x = random_hermitian(rng, dim)
            lhs = np.trace(lindblad_schrodinger(triple, rho) @ x)
            rhs = np.trace(rho @ lindblad_heisenberg(triple, x))
            worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-10


def test_schrodinger_trace_free_and_hermiticity_compatible(rng):
    for dim in (2, 4):
        triple = SLHTriple(np.eye(dim), random_matrix(rng, dim),
                           random_hermitian(rng, dim))
        rho = random_matrix(rng, dim)     # need not be Hermitian (cross blocks)
        out = lindblad_schrodinger(triple, rho)
        assert abs(np.trace(out)) <= 1e-12
        assert np.max(np.abs(adjoint(out) - lindblad_schrodinger(triple, adjoint(rho)))) <= 1e-12


def test_imag_part_definition(rng):
    a = random_matrix(rng, 3)
    assert np.allclose(imag_part(a), (a - adjoint(a)) / 2j)


def test_slh_triple_validation():
    with pytest.raises(ValueError, match=r"S is not unitary.*3\.000e\+00"):
        SLHTriple(2.0 * np.eye(2), sigma_minus, np.zeros((2, 2)))
    with pytest.raises(ValueError, match="H is not Hermitian"):
        SLHTriple(identity2, sigma_minus, sigma_minus)
    with pytest.raises(ValueError, match="share a dimension"):
        SLHTriple(np.eye(3), sigma_minus, np.zeros((2, 2)))


def test_passive_triple():
    t = passive_triple(3)
    assert np.allclose(t.S, np.eye(3))
    assert np.allclose(t.L, 0.0)
    assert np.allclose(t.H, 0.0)
