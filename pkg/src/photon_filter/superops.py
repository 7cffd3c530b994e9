"""Vectorized superoperators for the deterministic and stochastic integrators.

Density matrices are flattened row-major: vec(rho)[i*d + j] = rho[i, j], so
A rho B maps to (A kron B^T) vec(rho). The coupled block systems stack the
four blocks in the fixed order ``BLOCK_ORDER`` = (11, 10, 01, 00).

Time dependence enters only through scalar coefficients: every generator is
stored as a stack of constant matrices to be combined with powers of the
pulse amplitude xi(t) (coupled system) or the ancilla coupling c(t)
(extended/vacuum system):

    drift stack (4, m, m):      weights [1, z, conj(z), |z|^2]
    diffusion stack (3, m, m):  weights [1, z, conj(z)]
    gain covectors (3, m):      weights [1, z, conj(z)], then real part

which keeps the inner integration loops free of operator algebra.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import SLHTriple, adjoint

BLOCK_ORDER = ("11", "10", "01", "00")
BLOCK_INDEX = {name: i for i, name in enumerate(BLOCK_ORDER)}


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m, dtype=np.complex128).reshape(-1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim)


def left_mul(a: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> A rho."""
    return np.kron(a, np.eye(a.shape[0], dtype=np.complex128))


def right_mul(b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> rho B."""
    return np.kron(np.eye(b.shape[0], dtype=np.complex128), b.T)


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> A rho B."""
    return np.kron(a, b.T)


def trace_covector(a: np.ndarray) -> np.ndarray:
    """Covector g with g . vec(rho) = tr[rho A] (plain, no conjugation)."""
    return np.asarray(a, dtype=np.complex128).T.reshape(-1).copy()


def lindblad_schrodinger_matrix(triple: SLHTriple) -> np.ndarray:
    """Matrix of rho -> L rho L* - (1/2){L*L, rho} + i[rho, H]."""
    L, H = triple.L, triple.H
    ld = adjoint(L)
    ldl = ld @ L
    return (sandwich(L, ld)
            - 0.5 * (left_mul(ldl) + right_mul(ldl))
            + 1j * (right_mul(H) - left_mul(H)))


def _blocks(q: int) -> np.ndarray:
    return np.zeros((4 * q, 4 * q), dtype=np.complex128)


def _place(target: np.ndarray, row: str, col: str, block: np.ndarray, q: int) -> None:
    i, j = BLOCK_INDEX[row], BLOCK_INDEX[col]
    target[i * q:(i + 1) * q, j * q:(j + 1) * q] += block


def coupled_master_generator(triple: SLHTriple) -> np.ndarray:
    """Drift stack (4, 4q, 4q) of the coupled master equations.

    Acting on the stacked vector [vec r11, vec r10, vec r01, vec r00] with
    weights [1, xi, conj(xi), |xi|^2]:

        d r11 = G*(r11) + [S r01, L*] xi + [L, r10 S*] conj(xi)
                + (S r00 S* - r00)|xi|^2
        d r10 = G*(r10) + [S r00, L*] xi
        d r01 = G*(r01) + [L, r00 S*] conj(xi)
        d r00 = G*(r00)
    """
    S, L = triple.S, triple.L
    q = triple.dim ** 2
    gs = lindblad_schrodinger_matrix(triple)
    ld, sd = adjoint(L), adjoint(S)

    commute_after_s = sandwich(S, ld) - left_mul(ld @ S)   # rho -> [S rho, L*]
    commute_before_s = sandwich(L, sd) - right_mul(sd @ L)  # rho -> [L, rho S*]
    scatter = sandwich(S, sd) - np.eye(q, dtype=np.complex128)

    a0 = _blocks(q)
    for name in BLOCK_ORDER:
        _place(a0, name, name, gs, q)
    a1 = _blocks(q)
    _place(a1, "11", "01", commute_after_s, q)
    _place(a1, "10", "00", commute_after_s, q)
    a2 = _blocks(q)
    _place(a2, "11", "10", commute_before_s, q)
    _place(a2, "01", "00", commute_before_s, q)
    a3 = _blocks(q)
    _place(a3, "11", "00", scatter, q)
    return np.stack([a0, a1, a2, a3])


@dataclass(frozen=True)
class FilterOps:
    """Constant superoperator stacks driving an Euler-Maruyama recursion.

    ``drift`` has 4 parts (weights [1, z, conj z, |z|^2]), ``diffusion`` and
    ``gain`` have 3 (weights [1, z, conj z]); ``trace`` reads off tr of the
    normalized block so kernels can monitor drift.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    gain: np.ndarray
    trace: np.ndarray
    dim: int


def coupled_filter_ops(triple: SLHTriple) -> FilterOps:
    """Superoperator stacks of the coupled conditional-state equations.

    State layout [vec s11, vec s10, vec s01, vec s00]; scalar weight is
    xi(t). The drift rows mirror the master generator with the cross-block
    roles exchanged (s10 carries the conj(xi)-driven equation):

        drift: d s11 += [S s10, L*] xi + [L, s01 S*] conj(xi)
                        + (S s00 S* - s00)|xi|^2
               d s10 += [L, s00 S*] conj(xi);  d s01 += [S s00, L*] xi
        diffusion (before gain subtraction):
               D s11 = L s11 + s11 L* + S s10 xi + s01 S* conj(xi)
               D s10 = L s10 + s10 L* + s00 S* conj(xi)
               D s01 = L s01 + s01 L* + S s00 xi
               D s00 = L s00 + s00 L*
        gain:  K = Re( tr[s11 (L + L*)] + tr[s10 S] xi + tr[s01 S*] conj(xi) )

    and the Euler-Maruyama step is v += drift dt + (D v - K v) dW with
    dW = dY - K dt.
    """
    S, L = triple.S, triple.L
    d = triple.dim
    q = d ** 2
    gs = lindblad_schrodinger_matrix(triple)
    ld, sd = adjoint(L), adjoint(S)

    commute_after_s = sandwich(S, ld) - left_mul(ld @ S)
    commute_before_s = sandwich(L, sd) - right_mul(sd @ L)
    scatter = sandwich(S, sd) - np.eye(q, dtype=np.complex128)

    f0 = _blocks(q)
    for name in BLOCK_ORDER:
        _place(f0, name, name, gs, q)
    f1 = _blocks(q)
    _place(f1, "11", "10", commute_after_s, q)
    _place(f1, "01", "00", commute_after_s, q)
    f2 = _blocks(q)
    _place(f2, "11", "01", commute_before_s, q)
    _place(f2, "10", "00", commute_before_s, q)
    f3 = _blocks(q)
    _place(f3, "11", "00", scatter, q)

    jump = left_mul(L) + right_mul(ld)
    b0 = _blocks(q)
    for name in BLOCK_ORDER:
        _place(b0, name, name, jump, q)
    b1 = _blocks(q)
    _place(b1, "11", "10", left_mul(S), q)
    _place(b1, "01", "00", left_mul(S), q)
    b2 = _blocks(q)
    _place(b2, "11", "01", right_mul(sd), q)
    _place(b2, "10", "00", right_mul(sd), q)

    gain = np.zeros((3, 4 * q), dtype=np.complex128)
    i11, i10, i01 = BLOCK_INDEX["11"], BLOCK_INDEX["10"], BLOCK_INDEX["01"]
    gain[0, i11 * q:(i11 + 1) * q] = trace_covector(L + ld)
    gain[1, i10 * q:(i10 + 1) * q] = trace_covector(S)
    gain[2, i01 * q:(i01 + 1) * q] = trace_covector(sd)

    trace = np.zeros(4 * q, dtype=np.complex128)
    trace[i11 * q:(i11 + 1) * q] = trace_covector(np.eye(d))

    return FilterOps(drift=np.stack([f0, f1, f2, f3]),
                     diffusion=np.stack([b0, b1, b2]),
                     gain=gain, trace=trace, dim=d)


def single_filter_ops(L0: np.ndarray, H0: np.ndarray,
                      L1: np.ndarray | None = None,
                      M: np.ndarray | None = None) -> FilterOps:
    """Stacks for one conditional density matrix with time-dependent pieces.

    The instantaneous coupling and Hamiltonian are

        L(t) = L0 + c(t) L1,   H(t) = H0 + (c(t) M - conj(c(t)) M*) / (2i)

    (pass L1 = M = None for a constant system; the scalar weight c is then
    irrelevant). Drift = adjoint Lindblad generator of (L(t), H(t)),
    diffusion = L(t) rho + rho L(t)*, gain = tr[rho (L(t) + L(t)*)], expanded
    into constant stacks with weights [1, c, conj c, |c|^2].
    """
    d = L0.shape[0]
    q = d * d
    if L1 is None:
        L1 = np.zeros_like(L0)
    if M is None:
        M = np.zeros_like(L0)
    l0d, l1d, md = adjoint(L0), adjoint(L1), adjoint(M)

    def dissip(A, Bd):
        # sandwich part and anticommutator part of A rho B*, for L*L cross terms
        m = Bd @ A
        return sandwich(A, Bd) - 0.5 * (left_mul(m) + right_mul(m))

    drift0 = dissip(L0, l0d) + 1j * (right_mul(H0) - left_mul(H0))
    drift1 = (sandwich(L1, l0d) - 0.5 * (left_mul(l0d @ L1) + right_mul(l0d @ L1))
              + 0.5 * (right_mul(M) - left_mul(M)))
    drift2 = (sandwich(L0, l1d) - 0.5 * (left_mul(l1d @ L0) + right_mul(l1d @ L0))
              - 0.5 * (right_mul(md) - left_mul(md)))
    drift3 = dissip(L1, l1d)

    diff0 = left_mul(L0) + right_mul(l0d)
    diff1 = left_mul(L1)
    diff2 = right_mul(l1d)

    gain = np.stack([trace_covector(L0 + l0d),
                     trace_covector(L1),
                     trace_covector(l1d)])
    trace = trace_covector(np.eye(d))

    return FilterOps(drift=np.stack([drift0, drift1, drift2, drift3]),
                     diffusion=np.stack([diff0, diff1, diff2]),
                     gain=gain, trace=trace, dim=d)


def apply_weighted(stack: np.ndarray, weights: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sum_k weights[k] * stack[k] @ v (reference path; kernels inline this)."""
    out = np.zeros_like(v)
    for k in range(stack.shape[0]):
        out += weights[k] * (stack[k] @ v)
    return out
