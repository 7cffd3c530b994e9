"""Cascade (series) composition and the single-photon source embedding.

The single-photon drive is modeled by a two-level ancilla that starts
excited and leaks its excitation into the field through a time-dependent
coupling c(t) = xi(t)/sqrt(w(t)). Feeding that emission into the plant
gives a Markovian system on ancilla (x) system whose vacuum dynamics
reproduce the coupled single-photon equations exactly; the tensor ordering
is ancilla first everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (SLHTriple, adjoint, as_operator, commutator,
                        dissipator_heisenberg, imag_part, lindblad_heisenberg,
                        number_op, sigma_minus, sigma_plus)
from .pulses import Pulse
from . import superops

DEFAULT_W_FLOOR = 1e-12

#: Ancilla readout operators and their weight exponents: the block labelled
#: jk is recovered from the extended state through Q_jk with weight
#: w11 = 1, w10 = w01 = sqrt(w), w00 = w.
ANCILLA_OBSERVABLES = {
    "11": np.eye(2, dtype=np.complex128),
    "10": np.asarray(sigma_minus),
    "01": np.asarray(sigma_plus),
    "00": np.asarray(number_op),
}


def ancilla_weight(block: str, w):
    """Weight w_jk(t) that divides tr[rho_ext (Q_jk (x) X)]."""
    if block == "11":
        return np.ones_like(np.asarray(w, dtype=np.float64))
    if block in ("10", "01"):
        return np.sqrt(w)
    if block == "00":
        return np.asarray(w, dtype=np.float64)
    raise ValueError(f"unknown block label {block!r}")


def series_product(plant: SLHTriple, source: SLHTriple) -> SLHTriple:
    """Cascade with the source output feeding the plant input.

    Requires identity scattering on the source (the only case used here),
    and returns (S, L + S L0, H + H0 + Im[L* S L0]) where (I, L0, H0) is the
    source and Im[A] = (A - A*)/(2i).
    """
    if plant.dim != source.dim:
        raise ValueError(
            f"series product needs matching dims, got {plant.dim} vs {source.dim}")
    if np.max(np.abs(source.S - np.eye(source.dim))) > 1e-10:
        raise ValueError("series product implemented for identity-scattering sources only")
    S, L, H = plant.S, plant.L, plant.H
    L0, H0 = source.L, source.H
    return SLHTriple(S, L + S @ L0, H + H0 + imag_part(adjoint(L) @ S @ L0))


def signal_model(pulse: Pulse, t: float, w_floor: float = DEFAULT_W_FLOOR) -> SLHTriple:
    """Two-level source triple (I, c(t) sigma_minus, 0) emitting the photon.

    c(t) = xi(t)/sqrt(w(t)); once the tail weight drops to w_floor the
    coupling is set to zero (photon fully emitted; the 0/0 limit is a
    decoupled ground-state ancilla).
    """
    c = coupling_amplitude(pulse, t, w_floor)
    return SLHTriple(np.eye(2), c * sigma_minus, np.zeros((2, 2)))


def coupling_amplitude(pulse: Pulse, t, w_floor: float = DEFAULT_W_FLOOR):
    """Scalar c(t) = xi(t)/sqrt(w(t)), zero once w(t) <= w_floor."""
    w = pulse.tail_weight(t)
    xi = pulse(t)
    if np.isscalar(t) or np.ndim(t) == 0:
        return xi / np.sqrt(w) if w > w_floor else 0.0 + 0.0j
    w = np.asarray(w, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.complex128)
    safe = w > w_floor
    return np.where(safe, xi / np.sqrt(np.where(safe, w, 1.0)), 0.0 + 0.0j)


def generating_filter_weights(pulse: Pulse, t):
    """Branch amplitudes (sqrt(w), sqrt(1 - w)) of the source state.

    First entry: amplitude of the still-excited ancilla with the field in
    vacuum; second: amplitude of the emitted-photon branch. Squares sum to 1.
    """
    w = pulse.tail_weight(t)
    return np.sqrt(w), np.sqrt(np.clip(1.0 - np.asarray(w), 0.0, None))


@dataclass(frozen=True)
class ExtendedSystem:
    """Plant + photon-source ancilla as one Markovian system of dim 2d.

    Exposes the time-indexed triple (S~, L~(t), H~(t)) and the pieces that
    the integrators consume. The coupling operators have the split form
    L~(t) = I (x) L + c(t) (sigma_minus (x) S) and
    H~(t) = I (x) H + Im[c(t) (sigma_minus (x) L* S)].
    """

    base: SLHTriple
    pulse: Pulse
    w_floor: float = DEFAULT_W_FLOOR

    @property
    def dim(self) -> int:
        return 2 * self.base.dim

    def coupling(self, t):
        return coupling_amplitude(self.pulse, t, self.w_floor)

    def triple_at(self, t: float) -> SLHTriple:
        """Instantaneous extended triple via the series product."""
        d = self.base.dim
        i2 = np.eye(2, dtype=np.complex128)
        lifted_plant = SLHTriple(np.kron(i2, self.base.S),
                                 np.kron(i2, self.base.L),
                                 np.kron(i2, self.base.H))
        src = signal_model(self.pulse, t, self.w_floor)
        lifted_source = SLHTriple(np.eye(2 * d),
                                  np.kron(src.L, np.eye(d)),
                                  np.zeros((2 * d, 2 * d)))
        return series_product(lifted_plant, lifted_source)

    def split_operators(self):
        """(L0, H0, L1, M) with L(t) = L0 + c L1, H(t) = H0 + Im[c M]."""
        d = self.base.dim
        i2 = np.eye(2, dtype=np.complex128)
        L0 = np.kron(i2, self.base.L)
        H0 = np.kron(i2, self.base.H)
        L1 = np.kron(sigma_minus, self.base.S)
        M = np.kron(sigma_minus, adjoint(self.base.L) @ self.base.S)
        return L0, H0, L1, M

    def filter_ops(self) -> superops.FilterOps:
        return superops.single_filter_ops(*self.split_operators())

    def initial_state(self, eta: np.ndarray) -> np.ndarray:
        """rho_ext(0) = |e1><e1| (x) |eta><eta| (ancilla excited)."""
        eta = np.asarray(eta, dtype=np.complex128).reshape(-1)
        if eta.size != self.base.dim:
            raise ValueError("eta has wrong dimension")
        excited = np.zeros((2, 2), dtype=np.complex128)
        excited[1, 1] = 1.0
        return np.kron(excited, np.outer(eta, eta.conj()))


def extended_generator(ext: ExtendedSystem, t: float,
                       A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Heisenberg generator of the extended system on A (x) X, in closed form.

    A acts on the ancilla (2x2), X on the plant. Equals the plant generator
    dressed with the source emission and the cascade cross terms:

        A (x) G(X) + D_{L0}(A) (x) X + L0* A (x) S*[X, L]
        + A L0 (x) [L*, X] S + L0* A L0 (x) (S* X S - X)

    with L0 = c(t) sigma_minus. The last factor pairs L0 on both sides of A;
    a dual route through ``series_product`` + ``lindblad_heisenberg`` must
    agree for arbitrary A (tested), which pins that form.
    """
    A = as_operator(A, "A")
    X = as_operator(X, "X")
    if A.shape != (2, 2) or X.shape[0] != ext.base.dim:
        raise ValueError("extended_generator expects 2x2 A and plant-sized X")
    S, L = ext.base.S, ext.base.L
    c = ext.coupling(t)
    L0 = c * sigma_minus
    l0d = adjoint(L0)
    sd = adjoint(S)
    return (np.kron(A, lindblad_heisenberg(ext.base, X))
            + np.kron(dissipator_heisenberg(L0, A), X)
            + np.kron(l0d @ A, sd @ commutator(X, L))
            + np.kron(A @ L0, commutator(adjoint(L), X) @ S)
            + np.kron(l0d @ A @ L0, sd @ X @ S - X))
