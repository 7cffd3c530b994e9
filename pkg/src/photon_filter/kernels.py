"""Compiled Euler-Maruyama inner loops.

Two entry points, both driven by the constant superoperator stacks of
``superops.FilterOps`` with per-step scalar weights:

``em_pass``     one conditional density matrix (vacuum filter, or the
                extended system used to generate measurement records).
``joint_pass``  record generation/replay and the four-block single-photon
                filter advanced side by side on the shared record, tracking
                the per-step divergence between the filter block 11 and the
                extended conditional expectation.

Diagnostics convention (per diag array): [0] max |trace - 1| of the
normalized block, [1] max |Im gain|, [2] first non-finite step index as a
float (-1.0 when the run stayed finite). All state vectors are updated in
place; observable series store real parts at a stride that must divide the
step count.
"""
from __future__ import annotations

import numpy as np
from numba import njit

KERNEL_OPTS = dict(cache=True, nogil=True)


@njit(**KERNEL_OPTS)
def _cdot(cov, v):
    acc = 0.0 + 0.0j
    for i in range(cov.size):
        acc += cov[i] * v[i]
    return acc


@njit(**KERNEL_OPTS)
def _gain_combine(gain, z, v):
    return (_cdot(gain[0], v) + z * _cdot(gain[1], v)
            + np.conj(z) * _cdot(gain[2], v))


@njit(**KERNEL_OPTS)
def _fused_apply(drift, diffusion, z, v, out_drift, out_diff):
    """out_drift = (A0 + z A1 + z* A2 + |z|^2 A3) v;
    out_diff = (B0 + z B1 + z* B2) v, in one sweep over the rows."""
    m = v.size
    zc = np.conj(z)
    zz = z.real * z.real + z.imag * z.imag
    for r in range(m):
        acc_d = 0.0 + 0.0j
        acc_b = 0.0 + 0.0j
        for k in range(m):
            vv = v[k]
            acc_d += (drift[0, r, k] + z * drift[1, r, k]
                      + zc * drift[2, r, k] + zz * drift[3, r, k]) * vv
            acc_b += (diffusion[0, r, k] + z * diffusion[1, r, k]
                      + zc * diffusion[2, r, k]) * vv
        out_drift[r] = acc_d
        out_diff[r] = acc_b


@njit(**KERNEL_OPTS)
def _em_update(v, drift_v, diff_v, gain_k, dt, dw):
    for r in range(v.size):
        v[r] = v[r] + dt * drift_v[r] + dw * (diff_v[r] - gain_k * v[r])


@njit(**KERNEL_OPTS)
def _restore_adjoint_block(v, d):
    """Overwrite block 01 with the adjoint of block 10 (layout 11|10|01|00)."""
    q = d * d
    for a in range(d):
        for b in range(d):
            v[2 * q + a * d + b] = np.conj(v[q + b * d + a])


@njit(**KERNEL_OPTS)
def _record_obs(obs_cov, v, series, idx):
    for o in range(obs_cov.shape[0]):
        series[o, idx] = _cdot(obs_cov[o], v).real


@njit(**KERNEL_OPTS)
def _monitor(trace_cov, v, diag, step):
    dev = abs(_cdot(trace_cov, v) - 1.0)
    if dev > diag[0]:
        diag[0] = dev
    if not dev == dev or dev > 1e12:  # NaN or blowup
        if diag[2] < 0:
            diag[2] = step
        return False
    return True


@njit(**KERNEL_OPTS)
def em_pass(drift, diffusion, gain, trace_cov, z_arr, dt, gen_mode, renorm,
            noise, d_y, dw_out, obs_cov, obs_series, state_series, stride,
            dagger_dim, v, diag):
    """Euler-Maruyama sweep of one conditional block system.

    gen_mode: d_y is written as gain*dt + noise; otherwise d_y is read.
    dagger_dim > 0 marks a four-block layout whose 01 slot is refreshed as
    the adjoint of the 10 slot after every step.
    """
    n = z_arr.size
    m = v.size
    drift_v = np.empty(m, dtype=np.complex128)
    diff_v = np.empty(m, dtype=np.complex128)
    _record_obs(obs_cov, v, obs_series, 0)
    for r in range(m):
        state_series[0, r] = v[r]
    for i in range(n):
        z = z_arr[i]
        kc = _gain_combine(gain, z, v)
        k_t = kc.real
        gi = abs(kc.imag)
        if gi > diag[1]:
            diag[1] = gi
        if gen_mode:
            d_y[i] = k_t * dt + noise[i]
        dw = d_y[i] - k_t * dt
        dw_out[i] = dw
        _fused_apply(drift, diffusion, z, v, drift_v, diff_v)
        _em_update(v, drift_v, diff_v, k_t, dt, dw)
        if dagger_dim > 0:
            _restore_adjoint_block(v, dagger_dim)
        if renorm:
            tr = _cdot(trace_cov, v).real
            if tr != 0.0:
                inv = 1.0 / tr
                for r in range(m):
                    v[r] = v[r] * inv
        if not _monitor(trace_cov, v, diag, float(i)):
            return
        if (i + 1) % stride == 0:
            idx = (i + 1) // stride
            _record_obs(obs_cov, v, obs_series, idx)
            for r in range(m):
                state_series[idx, r] = v[r]


@njit(**KERNEL_OPTS)
def joint_pass(drift_e, diff_e, gain_e, trace_e, c_arr,
               drift_f, diff_f, gain_f, trace_f, xi_arr,
               dt, gen_mode, renorm, noise, d_y, dw_out,
               obs_e, obs_f, ext_series, pi_series,
               state_e, state_f, sup_out, stride, d,
               ve, vf, diag_e, diag_f):
    """Extended generator system and coupled filter on one shared record.

    In gen_mode the record increments come from the extended system's gain
    plus the injected noise; both states then consume the same d_y. Tracks
    sup_t |pi11(X_o) - tr[rho_ext_c (I (x) X_o)]| over every step.
    """
    n = c_arr.size
    me = ve.size
    mf = vf.size
    drift_tmp_e = np.empty(me, dtype=np.complex128)
    diff_tmp_e = np.empty(me, dtype=np.complex128)
    drift_tmp_f = np.empty(mf, dtype=np.complex128)
    diff_tmp_f = np.empty(mf, dtype=np.complex128)
    nobs = obs_f.shape[0]

    _record_obs(obs_e, ve, ext_series, 0)
    _record_obs(obs_f, vf, pi_series, 0)
    for r in range(me):
        state_e[0, r] = ve[r]
    for r in range(mf):
        state_f[0, r] = vf[r]
    for o in range(nobs):
        gap = abs(_cdot(obs_f[o], vf).real - _cdot(obs_e[o], ve).real)
        if gap > sup_out[o]:
            sup_out[o] = gap

    for i in range(n):
        c = c_arr[i]
        kc_e = _gain_combine(gain_e, c, ve)
        k_e = kc_e.real
        gi = abs(kc_e.imag)
        if gi > diag_e[1]:
            diag_e[1] = gi
        if gen_mode:
            d_y[i] = k_e * dt + noise[i]
        dw_e = d_y[i] - k_e * dt
        _fused_apply(drift_e, diff_e, c, ve, drift_tmp_e, diff_tmp_e)
        _em_update(ve, drift_tmp_e, diff_tmp_e, k_e, dt, dw_e)

        xi = xi_arr[i]
        kc_f = _gain_combine(gain_f, xi, vf)
        k_f = kc_f.real
        gi = abs(kc_f.imag)
        if gi > diag_f[1]:
            diag_f[1] = gi
        dw_f = d_y[i] - k_f * dt
        dw_out[i] = dw_f
        _fused_apply(drift_f, diff_f, xi, vf, drift_tmp_f, diff_tmp_f)
        _em_update(vf, drift_tmp_f, diff_tmp_f, k_f, dt, dw_f)
        _restore_adjoint_block(vf, d)
        if renorm:
            tr = _cdot(trace_f, vf).real
            if tr != 0.0:
                inv = 1.0 / tr
                for r in range(mf):
                    vf[r] = vf[r] * inv

        ok_e = _monitor(trace_e, ve, diag_e, float(i))
        ok_f = _monitor(trace_f, vf, diag_f, float(i))
        if not (ok_e and ok_f):
            return

        for o in range(nobs):
            gap = abs(_cdot(obs_f[o], vf).real - _cdot(obs_e[o], ve).real)
            if gap > sup_out[o]:
                sup_out[o] = gap

        if (i + 1) % stride == 0:
            idx = (i + 1) // stride
            _record_obs(obs_e, ve, ext_series, idx)
            _record_obs(obs_f, vf, pi_series, idx)
            for r in range(me):
                state_e[idx, r] = ve[r]
            for r in range(mf):
                state_f[idx, r] = vf[r]


def warm_up() -> None:
    """Compile the kernels on toy inputs (cached across processes)."""
    q = 4
    ops = np.zeros((4, q, q), dtype=np.complex128)
    dif = np.zeros((3, q, q), dtype=np.complex128)
    gn = np.zeros((3, q), dtype=np.complex128)
    tr = np.zeros(q, dtype=np.complex128)
    tr[0] = 1.0
    tr[3] = 1.0
    z = np.zeros(2, dtype=np.complex128)
    noise = np.zeros(2)
    d_y = np.zeros(2)
    dw = np.zeros(2)
    obs = np.zeros((1, q), dtype=np.complex128)
    series = np.zeros((1, 3))
    states = np.zeros((3, q), dtype=np.complex128)
    v = np.zeros(q, dtype=np.complex128)
    v[0] = 1.0
    diag = np.array([0.0, 0.0, -1.0])
    em_pass(ops, dif, gn, tr, z, 1e-3, True, False, noise, d_y, dw,
            obs, series, states, 1, 0, v, diag)

    big = np.zeros((4, 4 * q, 4 * q), dtype=np.complex128)
    bigd = np.zeros((3, 4 * q, 4 * q), dtype=np.complex128)
    biggn = np.zeros((3, 4 * q), dtype=np.complex128)
    bigtr = np.zeros(4 * q, dtype=np.complex128)
    bigtr[0] = 1.0
    vf = np.zeros(4 * q, dtype=np.complex128)
    vf[0] = 1.0
    obs_f = np.zeros((1, 4 * q), dtype=np.complex128)
    pi_series = np.zeros((1, 3))
    state_f = np.zeros((3, 4 * q), dtype=np.complex128)
    sup = np.zeros(1)
    diag_e = np.array([0.0, 0.0, -1.0])
    diag_f = np.array([0.0, 0.0, -1.0])
    joint_pass(ops, dif, gn, tr, z, big, bigd, biggn, bigtr, z,
               1e-3, True, False, noise, d_y, dw, obs, obs_f,
               series, pi_series, states, state_f, sup, 1, 2,
               v, vf, diag_e, diag_f)
