"""Closed-form coefficient dynamics for a driven two-level emitter.

For the damped two-level system (S = I, L = sqrt(kappa) sigma_-,
H = omega sigma_z) every block of the generalized moment hierarchy and of
the conditional filter state is a 2x2 matrix, so the dynamics reduce to
scalar equations for Bloch-type coefficients

    a_jk = tr[rho_jk_hat A],   A in {I, sigma_x, sigma_y, sigma_z},

where rho_11_hat and rho_00_hat are the Hermitian corner blocks and
rho_01_hat is the independent cross block (its partner is the adjoint).
The coefficient equations here were derived by hand from the block
equations and are kept as a fully independent route: the matrix-valued
integrators never call into this module, so agreement between the two is
a meaningful consistency check rather than a tautology.

``as_printed`` variants of the right-hand sides reproduce a circulating
variant of these equations that differs in a handful of signs, leading
terms, and a factor of two in the gain; they are retained so tests can
document that those variants break trace preservation and disagree with
the matrix route, while the defaults agree to solver precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .master import _grid, _unit_vector
from .operators import SLHTriple, identity2, sigma_minus, sigma_x, sigma_y, sigma_z
from .pulses import Pulse

COEFF_ORDER_MASTER = ("x00", "y00", "z00", "x01", "y01", "z01", "x11", "y11", "z11")
COEFF_ORDER_FILTER = ("c00", "x00", "y00", "z00", "c01", "x01", "y01", "z01",
                      "x11", "y11", "z11")

_PAULI = {"x": sigma_x, "y": sigma_y, "z": sigma_z}


def twolevel_system(kappa: float, omega: float) -> SLHTriple:
    """Damped two-level emitter: S = I, L = sqrt(kappa) sigma_-, H = omega sigma_z."""
    if kappa < 0:
        raise ConfigError("kappa must be nonnegative")
    return SLHTriple(identity2, math.sqrt(kappa) * sigma_minus,
                     float(omega) * sigma_z)


def _bloch_of(rho: np.ndarray):
    """(c, x, y, z) of a 2x2 block under the plain trace pairing."""
    c = complex(np.trace(rho))
    x = complex(np.einsum("ij,ji->", rho, sigma_x))
    y = complex(np.einsum("ij,ji->", rho, sigma_y))
    z = complex(np.einsum("ij,ji->", rho, sigma_z))
    return c, x, y, z


def _block_of(c, x, y, z) -> np.ndarray:
    return 0.5 * (c * identity2 + x * sigma_x + y * sigma_y + z * sigma_z)


@dataclass
class BlochMasterCoeffs:
    """Nine moment coefficients of the two-level master hierarchy.

    Corner-block coefficients are real; the cross block carries complex
    coefficients (x01, y01, z01). Traces are constants of motion (block 11
    and 00 have unit trace, the cross block zero trace), so they are not
    evolved.
    """
    x00: float
    y00: float
    z00: float
    x01: complex
    y01: complex
    z01: complex
    x11: float
    y11: float
    z11: float
    t: float = 0.0

    @classmethod
    def initial(cls, eta: np.ndarray | None = None) -> "BlochMasterCoeffs":
        v = _unit_vector(eta if eta is not None else np.array([1.0, 0.0]))
        rho = np.outer(v, v.conj())
        _, x, y, z = _bloch_of(rho)
        return cls(x.real, y.real, z.real, 0j, 0j, 0j, x.real, y.real, z.real, t=0.0)

    def as_tuple(self):
        return (self.x00, self.y00, self.z00, self.x01, self.y01, self.z01,
                self.x11, self.y11, self.z11)


@dataclass
class BlochFilterCoeffs:
    """Eleven conditional coefficients of the two-level filter.

    The trace of block 11 is pinned to one by the innovations structure
    (its increment is K - K tr = 0), so it is not carried; the traces c01
    and c00 of the other independent blocks do evolve under measurement
    back-action.
    """
    c00: float
    x00: float
    y00: float
    z00: float
    c01: complex
    x01: complex
    y01: complex
    z01: complex
    x11: float
    y11: float
    z11: float
    t: float = 0.0

    @classmethod
    def initial(cls, eta: np.ndarray | None = None) -> "BlochFilterCoeffs":
        v = _unit_vector(eta if eta is not None else np.array([1.0, 0.0]))
        rho = np.outer(v, v.conj())
        _, x, y, z = _bloch_of(rho)
        return cls(1.0, x.real, y.real, z.real, 0j, 0j, 0j, 0j,
                   x.real, y.real, z.real, t=0.0)

    def as_tuple(self):
        return (self.c00, self.x00, self.y00, self.z00, self.c01, self.x01,
                self.y01, self.z01, self.x11, self.y11, self.z11)


# ---------------------------------------------------------------------------
# moment (master) route
# ---------------------------------------------------------------------------

def _master_derivs(c, xi: complex, kappa: float, omega: float,
                   as_printed: bool):
    sk = math.sqrt(kappa)
    xis = xi.conjugate()
    x00, y00, z00, x01, y01, z01, x11, y11, z11 = c

    dx00 = -2.0 * omega * y00 - 0.5 * kappa * x00
    dy00 = 2.0 * omega * x00 - 0.5 * kappa * y00
    dz00 = -kappa * (1.0 + (z11 if as_printed else z00))

    cross_sign = -1.0 if as_printed else 1.0
    dx01 = -0.5 * kappa * x01 - 2.0 * omega * y01 + cross_sign * sk * xis * z00
    dy01 = 2.0 * omega * x01 - 0.5 * kappa * y01 - 1j * sk * xis * z00
    dz01 = -kappa * z01 - sk * x00 * xis + 1j * sk * y00 * xis

    dx11 = (-0.5 * kappa * x11 - 2.0 * omega * y11
            + (sk * z01 * xi + (sk * z01 * xi).conjugate()).real)
    dy11 = (2.0 * omega * x11 - 0.5 * kappa * y11
            + (1j * sk * z01 * xi + (1j * sk * z01 * xi).conjugate()).real)
    dz11 = (-kappa - kappa * z11
            + (-sk * x01 * xi - 1j * sk * y01 * xi
               + (-sk * x01 * xi - 1j * sk * y01 * xi).conjugate()).real)
    return (dx00, dy00, dz00, dx01, dy01, dz01, dx11, dy11, dz11)


def bloch_master_rhs(coeffs: BlochMasterCoeffs, t: float, kappa: float,
                     omega: float, pulse: Pulse,
                     as_printed: bool = False) -> BlochMasterCoeffs:
    """Time derivatives of the nine moment coefficients at time t."""
    xi = complex(pulse(t))
    d = _master_derivs(coeffs.as_tuple(), xi, kappa, omega, as_printed)
    return BlochMasterCoeffs(
        d[0], d[1], d[2], d[3], d[4], d[5],
        d[6], d[7], d[8], t=t)


@dataclass
class BlochMasterRun:
    times: np.ndarray
    series: dict          # coefficient name -> (n+1,) array
    dt: float
    kappa: float
    omega: float


def integrate_bloch_master(kappa: float, omega: float, pulse: Pulse,
                           eta: np.ndarray | None = None,
                           dt: float = 1e-3, horizon: float = 10.0,
                           as_printed: bool = False) -> BlochMasterRun:
    """Classic fourth-order Runge-Kutta on the nine coefficient equations."""
    times = _grid(dt, horizon)
    n = times.size - 1
    c0 = BlochMasterCoeffs.initial(eta)
    state = tuple(complex(v) for v in c0.as_tuple())
    out = np.empty((9, n + 1), dtype=np.complex128)
    out[:, 0] = state
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n):
        t = times[i]
        xi0 = complex(pulse(t))
        xih = complex(pulse(t + half))
        xi1 = complex(pulse(t + dt))
        k1 = _master_derivs(state, xi0, kappa, omega, as_printed)
        s2 = tuple(a + half * b for a, b in zip(state, k1))
        k2 = _master_derivs(s2, xih, kappa, omega, as_printed)
        s3 = tuple(a + half * b for a, b in zip(state, k2))
        k3 = _master_derivs(s3, xih, kappa, omega, as_printed)
        s4 = tuple(a + dt * b for a, b in zip(state, k3))
        k4 = _master_derivs(s4, xi1, kappa, omega, as_printed)
        state = tuple(a + sixth * (b1 + 2.0 * (b2 + b3) + b4)
                      for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))
        out[:, i + 1] = state
    series = {name: out[i] for i, name in enumerate(COEFF_ORDER_MASTER)}
    for name in ("x00", "y00", "z00", "x11", "y11", "z11"):
        series[name] = series[name].real
    return BlochMasterRun(times=times, series=series, dt=dt, kappa=kappa,
                          omega=omega)


# ---------------------------------------------------------------------------
# conditional (filter) route
# ---------------------------------------------------------------------------

def bloch_filter_gain(coeffs: BlochFilterCoeffs, t: float, kappa: float,
                      pulse: Pulse, as_printed: bool = False) -> float:
    """Photocurrent K = sqrt(kappa) x11 + 2 Re(c01 xi) (printed variant halves
    the cross contribution)."""
    xi = complex(pulse(t))
    cross = (coeffs.c01 * xi).real
    factor = 1.0 if as_printed else 2.0
    return math.sqrt(kappa) * coeffs.x11 + factor * cross


def bloch_filter_rhs(coeffs: BlochFilterCoeffs, d_w: float, dt: float,
                     t: float, kappa: float, omega: float, pulse: Pulse,
                     as_printed: bool = False) -> BlochFilterCoeffs:
    """One Euler-Maruyama update of the eleven conditional coefficients.

    ``d_w`` is the innovation increment dW = dY - K dt with the same K
    reported by ``bloch_filter_gain``.
    """
    sk = math.sqrt(kappa)
    xi = complex(pulse(t))
    xis = xi.conjugate()
    c00, x00, y00, z00, c01, x01, y01, z01, x11, y11, z11 = coeffs.as_tuple()
    c11 = 1.0
    k_t = bloch_filter_gain(coeffs, t, kappa, pulse, as_printed)

    def re2(a: complex) -> float:
        return (a + a.conjugate()).real

    if not as_printed:
        dr_x11 = -0.5 * kappa * x11 - 2.0 * omega * y11 + re2(sk * z01 * xi)
        df_x11 = sk * (c11 + z11) + re2(x01 * xi) - k_t * x11
        dr_y11 = 2.0 * omega * x11 - 0.5 * kappa * y11 + re2(1j * sk * z01 * xi)
        df_y11 = re2(y01 * xi) - k_t * y11
        dr_z11 = -kappa * (c11 + z11) + re2(-sk * x01 * xi - 1j * sk * y01 * xi)
        df_z11 = -sk * x11 + re2(z01 * xi) - k_t * z11

        df_c01 = sk * x01 + c00 * xis - k_t * c01
        dr_x01 = -0.5 * kappa * x01 - 2.0 * omega * y01 + sk * xis * z00
        df_x01 = x00 * xis + sk * (c01 + z01) - k_t * x01
        dr_y01 = 2.0 * omega * x01 - 0.5 * kappa * y01 - 1j * sk * xis * z00
        df_y01 = y00 * xis - k_t * y01
        dr_z01 = -kappa * (c01 + z01) - sk * x00 * xis + 1j * sk * y00 * xis
        df_z01 = -sk * x01 + z00 * xis - k_t * z01

        df_c00 = sk * x00 - k_t * c00
        dr_x00 = -2.0 * omega * y00 - 0.5 * kappa * x00
        df_x00 = sk * (c00 + z00) - k_t * x00
        dr_y00 = 2.0 * omega * x00 - 0.5 * kappa * y00
        df_y00 = -k_t * y00
        dr_z00 = -kappa * (c00 + z00)
        df_z00 = -sk * x00 - k_t * z00
    else:
        dr_x11 = -0.5 * kappa * x11 - 2.0 * omega * y11 + re2(sk * z01 * xi)
        df_x11 = sk * c11 + re2(x01 * xi) - k_t * x11
        dr_y11 = 2.0 * omega * x11 - 0.5 * kappa * y11 + re2(1j * sk * z01 * xi)
        df_y11 = re2(y01 * xi) - k_t * y11
        dr_z11 = -kappa * (c11 + z11) + re2(-sk * x01 * xi - 1j * sk * y01 * xi)
        df_z11 = sk * x11 + re2(z01 * xi) - k_t * z11

        df_c01 = sk * x01 + c00 * xis - k_t * c01
        dr_x01 = -0.5 * kappa * x01 - 2.0 * omega * y01 - sk * xis * z00
        df_x01 = x00 * xis + sk * c01 - k_t * x01
        dr_y01 = 2.0 * omega * x01 - 0.5 * kappa * y01 - 1j * sk * xis * z00
        df_y01 = y00 * xis - k_t * y01
        dr_z01 = -kappa * z01 - sk * x00 * xis + 1j * sk * y00 * xis
        df_z01 = sk * x01 + z00 * xis - k_t * z01

        df_c00 = sk * x00 - k_t * c00
        dr_x00 = -2.0 * omega * y00 - 0.5 * kappa * x00
        df_x00 = sk * c00 - k_t * x00
        dr_y00 = 2.0 * omega * x00 - 0.5 * kappa * y00
        df_y00 = -k_t * y00
        dr_z00 = -kappa * (1.0 + z00)
        df_z00 = sk * x00 - k_t * z00

    return BlochFilterCoeffs(
        c00=c00 + df_c00 * d_w,
        x00=x00 + dr_x00 * dt + df_x00 * d_w,
        y00=y00 + dr_y00 * dt + df_y00 * d_w,
        z00=z00 + dr_z00 * dt + df_z00 * d_w,
        c01=c01 + df_c01 * d_w,
        x01=x01 + dr_x01 * dt + df_x01 * d_w,
        y01=y01 + dr_y01 * dt + df_y01 * d_w,
        z01=z01 + dr_z01 * dt + df_z01 * d_w,
        x11=x11 + dr_x11 * dt + df_x11 * d_w,
        y11=y11 + dr_y11 * dt + df_y11 * d_w,
        z11=z11 + dr_z11 * dt + df_z11 * d_w,
        t=t + dt)


# ---------------------------------------------------------------------------
# conversions between scalar coefficients and matrix-valued states
# ---------------------------------------------------------------------------

def master_coeffs_from_state(state) -> BlochMasterCoeffs:
    """Read the nine coefficients off a four-block moment state.

    Corner blocks pair by plain trace with their Hermitian matrices. The
    independent cross coefficients belong to the block whose equation is
    driven by conj(xi) -- the 01 block of the moment hierarchy -- read off
    by plain trace (equivalently, the adjoint pairing against the 10 block).
    """
    _, x0, y0, z0 = _bloch_of(state.rho00)
    _, xc, yc, zc = _bloch_of(state.rho01)
    _, x1, y1, z1 = _bloch_of(state.rho11)
    return BlochMasterCoeffs(x0.real, y0.real, z0.real, xc, yc, zc,
                             x1.real, y1.real, z1.real, t=state.t)


def filter_coeffs_from_state(state) -> BlochFilterCoeffs:
    """Read the eleven conditional coefficients off a filter state."""
    c0, x0, y0, z0 = _bloch_of(state.sigma00)
    cc, xc, yc, zc = _bloch_of(state.sigma10)
    _, x1, y1, z1 = _bloch_of(state.sigma11)
    return BlochFilterCoeffs(c0.real, x0.real, y0.real, z0.real, cc, xc, yc, zc,
                             x1.real, y1.real, z1.real, t=state.t)


def filter_state_from_coeffs(coeffs: BlochFilterCoeffs):
    """Rebuild the four blocks; block 11 is given its pinned unit trace."""
    from .filtering import FilterState

    sigma11 = _block_of(1.0, coeffs.x11, coeffs.y11, coeffs.z11)
    sigma10 = _block_of(coeffs.c01, coeffs.x01, coeffs.y01, coeffs.z01)
    sigma00 = _block_of(coeffs.c00, coeffs.x00, coeffs.y00, coeffs.z00)
    return FilterState(sigma11, sigma10, sigma10.conj().T.copy(), sigma00,
                       t=coeffs.t)


def advance_bloch_filter(coeffs: BlochFilterCoeffs, record, kappa: float,
                         omega: float, pulse: Pulse,
                         as_printed: bool = False) -> BlochFilterCoeffs:
    """Drive the scalar filter through a full measurement record."""
    c = coeffs
    dt = record.dt
    for i in range(record.n):
        t = c.t
        k_t = bloch_filter_gain(c, t, kappa, pulse, as_printed)
        d_w = record.increments[i] - k_t * dt
        c = bloch_filter_rhs(c, d_w, dt, t, kappa, omega, pulse, as_printed)
    return c
