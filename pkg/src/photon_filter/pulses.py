"""Wavepacket amplitudes xi(t) and their tail weights w(t).

Every pulse is normalized so the L2 norm of xi over [0, inf) is 1; the
constructor verifies this by independent adaptive Simpson quadrature and
raises if the deviation exceeds ``NORM_TOL``. ``tail_weight`` returns
w(t) = integral of |xi|^2 over [t, inf), computed in closed form for the
analytic shapes and by exact per-segment Simpson for tabulated pulses
(|xi|^2 of a linear interpolant is piecewise quadratic, for which Simpson
is exact, so adaptive refinement terminates immediately).

Amplitudes may be complex; all shapes accept scalar or array times and
reject t < 0.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.special import erfc

NORM_TOL = 1e-8


def _check_times(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("pulse evaluation requires t >= 0")
    return arr


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                      tol: float = 1e-10, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature of a real scalar function on [a, b]."""
    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0
        return (recurse(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1)
                + recurse(xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


class Pulse:
    """Base class; subclasses implement amplitude and tail weight kernels."""

    #: end of the numerically relevant support, used by the norm check
    support_end: float
    #: interior points the norm quadrature must sample (shape features that
    #: uniform bisection starting from [0, support_end] could step over)
    norm_breakpoints: tuple = ()

    def __call__(self, t):
        """Amplitude xi(t); scalar in, scalar out; arrays map elementwise."""
        arr = _check_times(t)
        out = self._amplitude(arr)
        return complex(out) if np.isscalar(t) or arr.ndim == 0 else out

    def tail_weight(self, t):
        """w(t), the remaining L2 weight of the pulse after time t."""
        arr = _check_times(t)
        out = self._tail(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def _amplitude(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tail(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _verify_norm(self) -> None:
        end = float(self.support_end)
        points = sorted({0.0, end, *(float(b) for b in self.norm_breakpoints
                                     if 0.0 < float(b) < end)})
        total = sum(
            _adaptive_simpson(
                lambda s: abs(complex(self._amplitude(np.float64(s)))) ** 2,
                a, b)
            for a, b in zip(points[:-1], points[1:]))
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(
                f"pulse is not L2-normalized on [0, inf): integral = {total!r}")

    def describe(self) -> dict:
        raise NotImplementedError


class GaussianPulse(Pulse):
    """xi(t) = N exp(-(t - t0)^2 / (2 sigma^2)), normalized on [0, inf).

    The truncation at t = 0 is folded into N, so w(0) = 1 exactly.
    """

    def __init__(self, t0: float, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if t0 < 0:
            raise ValueError("t0 must be nonnegative")
        self.t0 = float(t0)
        self.sigma = float(sigma)
        # integral of exp(-(t-t0)^2/sigma^2) over [0, inf)
        self._tail_at_0 = float(erfc(-self.t0 / self.sigma))
        self._norm = 1.0 / math.sqrt(
            self.sigma * math.sqrt(math.pi) / 2.0 * self._tail_at_0)
        self.support_end = self.t0 + 12.0 * self.sigma
        self.norm_breakpoints = (self.t0 - 3.0 * self.sigma, self.t0,
                                 self.t0 + 3.0 * self.sigma)
        self._verify_norm()

    def _amplitude(self, t):
        return self._norm * np.exp(-((t - self.t0) ** 2) / (2.0 * self.sigma ** 2)) \
            * (1.0 + 0.0j)

    def _tail(self, t):
        return erfc((t - self.t0) / self.sigma) / self._tail_at_0

    def describe(self):
        return {"shape": "gaussian", "t0": self.t0, "sigma": self.sigma}


class DecayingExponentialPulse(Pulse):
    """xi(t) = sqrt(gamma) exp(-gamma (t - t0) / 2) for t >= t0, else 0."""

    def __init__(self, gamma: float, t0: float = 0.0):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if t0 < 0:
            raise ValueError("t0 must be nonnegative")
        self.gamma = float(gamma)
        self.t0 = float(t0)
        self.support_end = self.t0 + 80.0 / self.gamma
        self.norm_breakpoints = (self.t0, self.t0 + 2.0 / self.gamma,
                                 self.t0 + 10.0 / self.gamma)
        self._verify_norm()

    def _amplitude(self, t):
        lead = np.where(t >= self.t0, np.sqrt(self.gamma)
                        * np.exp(-0.5 * self.gamma * (t - self.t0)), 0.0)
        return lead * (1.0 + 0.0j)

    def _tail(self, t):
        return np.where(t >= self.t0, np.exp(-self.gamma * (t - self.t0)), 1.0)

    def describe(self):
        return {"shape": "decaying_exponential", "gamma": self.gamma, "t0": self.t0}


class SquarePulse(Pulse):
    """Constant amplitude 1/sqrt(t1 - t0) on [t0, t1), zero elsewhere."""

    def __init__(self, t0: float, t1: float):
        if t0 < 0:
            raise ValueError("t0 must be nonnegative")
        if t1 <= t0:
            raise ValueError("t1 must exceed t0")
        self.t0 = float(t0)
        self.t1 = float(t1)
        self._amp = 1.0 / math.sqrt(self.t1 - self.t0)
        self.support_end = self.t1
        self.norm_breakpoints = (self.t0, 0.5 * (self.t0 + self.t1))
        self._verify_norm()

    def _amplitude(self, t):
        inside = (t >= self.t0) & (t < self.t1)
        return np.where(inside, self._amp, 0.0) * (1.0 + 0.0j)

    def _tail(self, t):
        frac = (self.t1 - t) / (self.t1 - self.t0)
        return np.clip(frac, 0.0, 1.0)

    def describe(self):
        return {"shape": "square", "t0": self.t0, "t1": self.t1}


class TabulatedPulse(Pulse):
    """Complex samples on a strictly increasing grid, linearly interpolated.

    Values are renormalized at construction so the type invariant holds for
    any user input. Outside the grid the amplitude is zero.
    """

    def __init__(self, times, values):
        grid = np.asarray(times, dtype=np.float64)
        vals = np.asarray(values, dtype=np.complex128)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("tabulated pulse needs at least two grid points")
        if vals.shape != grid.shape:
            raise ValueError("times and values must have matching shapes")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("grid must start at t >= 0")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values contain non-finite entries")
        total = self._segment_integrals(grid, vals).sum()
        if total <= 0:
            raise ValueError("pulse has zero L2 norm")
        self.grid = grid
        self.values = vals / math.sqrt(total)
        # cumulative |xi|^2 mass to the right of each grid node
        seg = self._segment_integrals(self.grid, self.values)
        self._right_mass = np.concatenate(
            [np.cumsum(seg[::-1])[::-1], [0.0]])
        self.support_end = float(grid[-1])
        self.norm_breakpoints = tuple(float(g) for g in grid[:-1])
        self._verify_norm()

    @staticmethod
    def _segment_integrals(grid: np.ndarray, vals: np.ndarray) -> np.ndarray:
        # |linear interpolant|^2 is quadratic per segment: Simpson is exact.
        h = np.diff(grid)
        f0 = np.abs(vals[:-1]) ** 2
        f2 = np.abs(vals[1:]) ** 2
        mid = 0.5 * (vals[:-1] + vals[1:])
        f1 = np.abs(mid) ** 2
        return h / 6.0 * (f0 + 4.0 * f1 + f2)

    def _amplitude(self, t):
        re = np.interp(t, self.grid, self.values.real, left=0.0, right=0.0)
        im = np.interp(t, self.grid, self.values.imag, left=0.0, right=0.0)
        out = re + 1j * im
        # np.interp clamps at the edges; zero outside the grid instead
        outside = (t < self.grid[0]) | (t > self.grid[-1])
        return np.where(outside, 0.0 + 0.0j, out)

    def _tail(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty_like(t_arr)
        for i, ti in enumerate(t_arr):
            out[i] = self._tail_scalar(float(ti))
        return out.reshape(np.shape(t))

    def _tail_scalar(self, t: float) -> float:
        if t <= self.grid[0]:
            return float(self._right_mass[0])
        if t >= self.grid[-1]:
            return 0.0
        k = int(np.searchsorted(self.grid, t, side="right") - 1)
        a, b = self.grid[k], self.grid[k + 1]
        va, vb = self.values[k], self.values[k + 1]
        # exact Simpson of |linear interpolant|^2 on [t, b]
        vt = va + (vb - va) * (t - a) / (b - a)
        vm = 0.5 * (vt + vb)
        partial = (b - t) / 6.0 * (abs(vt) ** 2 + 4.0 * abs(vm) ** 2 + abs(vb) ** 2)
        return float(partial + self._right_mass[k + 1])

    def describe(self):
        return {
            "shape": "tabulated",
            "times": self.grid.tolist(),
            "values": [[float(v.real), float(v.imag)] for v in self.values],
        }


def pulse_from_config(spec: dict) -> Pulse:
    """Build a pulse from its CLI/JSON description."""
    if not isinstance(spec, dict) or "shape" not in spec:
        raise ValueError("pulse spec must be a mapping with a 'shape' key")
    shape = spec["shape"]
    try:
        if shape == "gaussian":
            return GaussianPulse(t0=spec["t0"], sigma=spec["sigma"])
        if shape == "decaying_exponential":
            return DecayingExponentialPulse(gamma=spec["gamma"],
                                            t0=spec.get("t0", 0.0))
        if shape == "square":
            return SquarePulse(t0=spec["t0"], t1=spec["t1"])
        if shape == "tabulated":
            values = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
                      for v in spec["values"]]
            return TabulatedPulse(times=spec["times"], values=values)
    except KeyError as exc:
        raise ValueError(f"pulse spec for shape '{shape}' is missing key {exc}") from exc
    raise ValueError(f"unknown pulse shape '{shape}'")
