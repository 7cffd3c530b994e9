"""Dense complex operator algebra and the Lindblad superoperators.

Every operator in the package is a plain square ``numpy`` array of
``complex128``. Basis convention for two-level systems, used everywhere:
index 0 is the ground state, index 1 the excited state, ``sigma_z`` acts as
``diag(-1, +1)`` (so ``sigma_z |e> = |e>``), and ``sigma_minus = |g><e|``
lowers. Operators carry no basis metadata; callers fix the convention.
"""
from __future__ import annotations

import numpy as np

# Structural checks (unitarity, Hermiticity) default to this tolerance;
# algebraic identities are tested at 1e-12. Both are arguments, not constants
# baked into the checks.
DEFAULT_ATOL = 1e-10


def as_operator(a, name: str = "operator") -> np.ndarray:
    """Coerce to a square complex matrix, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def imag_part(a: np.ndarray) -> np.ndarray:
    """Operator imaginary part (A - A*)/(2i), Hermitian for any A."""
    return (a - adjoint(a)) / 2j


def is_hermitian(a: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    return bool(np.max(np.abs(a - adjoint(a))) <= atol)


def is_unitary(a: np.ndarray, atol: float = DEFAULT_ATOL) -> bool:
    d = a.shape[0]
    return bool(np.max(np.abs(adjoint(a) @ a - np.eye(d))) <= atol)


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"operator dimensions differ: {a.shape} vs {b.shape}")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """AB - BA."""
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """AB + BA."""
    _check_same_dim(a, b)
    return a @ b + b @ a


def dissipator_heisenberg(lindblad_op: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Heisenberg-picture dissipator (1/2)L*[X,L] + (1/2)[L*,X]L."""
    _check_same_dim(lindblad_op, x)
    ld = adjoint(lindblad_op)
    return 0.5 * (ld @ commutator(x, lindblad_op) + commutator(ld, x) @ lindblad_op)


def lindblad_heisenberg(triple: "SLHTriple", x: np.ndarray) -> np.ndarray:
    """Heisenberg generator G(X) = dissipator(L, X) - i[X, H]."""
    _check_same_dim(triple.L, x)
    return dissipator_heisenberg(triple.L, x) - 1j * commutator(x, triple.H)


def lindblad_schrodinger(triple: "SLHTriple", rho: np.ndarray) -> np.ndarray:
    """Schrodinger adjoint G*(rho) = L rho L* - (1/2){L*L, rho} + i[rho, H].

    rho is not required to be Hermitian; the coupled master equations apply
    this map to the cross blocks as well.
    """
    _check_same_dim(triple.L, rho)
    L, H = triple.L, triple.H
    ld = adjoint(L)
    ldl = ld @ L
    return L @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl) + 1j * commutator(rho, H)


def basis_state(dim: int, index: int) -> np.ndarray:
    """Computational basis column vector e_index."""
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    """|v><v| for a (not necessarily normalized) column vector."""
    v = np.asarray(vec, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj())


def _frozen(m) -> np.ndarray:
    arr = np.array(m, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


# Two-level constants. Index 0 = ground, 1 = excited.
sigma_x = _frozen([[0, 1], [1, 0]])
sigma_y = _frozen([[0, 1j], [-1j, 0]])
sigma_z = _frozen([[-1, 0], [0, 1]])
sigma_minus = _frozen([[0, 1], [0, 0]])
sigma_plus = _frozen([[0, 0], [1, 0]])
number_op = _frozen([[0, 0], [0, 1]])  # sigma_plus @ sigma_minus
identity2 = _frozen(np.eye(2))


# SLHTriple lives here (not in slh.py) because the Lindblad maps above take
# it as an argument; slh.py builds on top.
from dataclasses import dataclass, field  # noqa: E402


@dataclass(frozen=True)
class SLHTriple:
    """Open-system parameters (S, L, H): scattering, coupling, Hamiltonian.

    S must be unitary and H Hermitian, both within ``atol`` at construction.
    """

    S: np.ndarray
    L: np.ndarray
    H: np.ndarray
    atol: float = field(default=DEFAULT_ATOL, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "S", as_operator(self.S, "S"))
        object.__setattr__(self, "L", as_operator(self.L, "L"))
        object.__setattr__(self, "H", as_operator(self.H, "H"))
        if not (self.S.shape == self.L.shape == self.H.shape):
            raise ValueError(
                f"S, L, H must share a dimension, got "
                f"{self.S.shape}, {self.L.shape}, {self.H.shape}"
            )
        dev_u = float(np.max(np.abs(adjoint(self.S) @ self.S - np.eye(self.dim))))
        if dev_u > self.atol:
            raise ValueError(f"S is not unitary: ||S*S - I||_max = {dev_u:.3e}")
        dev_h = float(np.max(np.abs(self.H - adjoint(self.H))))
        if dev_h > self.atol:
            raise ValueError(f"H is not Hermitian: ||H - H*||_max = {dev_h:.3e}")

    @property
    def dim(self) -> int:
        return self.S.shape[0]


def passive_triple(dim: int) -> SLHTriple:
    """The trivial system (I, 0, 0) of the given dimension."""
    z = np.zeros((dim, dim), dtype=np.complex128)
    return SLHTriple(np.eye(dim), z, z)
