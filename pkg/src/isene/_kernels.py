"""Compiled inner loops: small-matrix exponentials and piecewise-constant propagation.

All Hamiltonians are in GHz and times in ns, so a step propagator is
exp(-2 pi i H dt).
"""

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def expm_step(h, dt):
    """exp(-2 pi i h dt) for Hermitian h by scaled Taylor series and squaring."""
    d = h.shape[0]
    a = (-1j * TWO_PI * dt) * h
    norm = 0.0
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += abs(a[i, j])
        norm = max(norm, row)
    s = 0
    while norm > 0.25:
        norm *= 0.5
        s += 1
    a = a / (2.0**s)
    out = np.eye(d, dtype=np.complex128)
    term = np.eye(d, dtype=np.complex128)
    for k in range(1, 30):
        term = term @ a / k
        out += term
        tn = 0.0
        for i in range(d):
            for j in range(d):
                tn = max(tn, abs(term[i, j]))
        if tn < 1e-18:
            break
    for _ in range(s):
        out = out @ out
    return out


@njit(cache=True)
def build_h(h0, ops, values):
    h = h0.copy()
    for c in range(ops.shape[0]):
        if values[c] != 0.0:
            h += values[c] * ops[c]
    return h


@njit(cache=True)
def propagate(h0, ops, fields, dt, psi0, stride):
    """Propagate columns of psi0 through len(fields) steps.

    Returns the states at steps 0, stride, 2*stride, ... and the final step.
    """
    nsteps = fields.shape[0]
    nstore = nsteps // stride + 1
    if nsteps % stride:
        nstore += 1
    out = np.empty((nstore, psi0.shape[0], psi0.shape[1]), dtype=np.complex128)
    psi = psi0.copy()
    out[0] = psi
    j = 1
    for k in range(nsteps):
        u = expm_step(build_h(h0, ops, fields[k]), dt)
        psi = u @ psi
        if (k + 1) % stride == 0 or k + 1 == nsteps:
            out[j] = psi
            j += 1
    return out


@njit(cache=True)
def total_unitary(h0, ops, fields, dt):
    d = h0.shape[0]
    u = np.eye(d, dtype=np.complex128)
    for k in range(fields.shape[0]):
        u = expm_step(build_h(h0, ops, fields[k]), dt) @ u
    return u


@njit(cache=True)
def forward_store(h0, ops, carriers, envelopes, dt, psi0):
    """Forward pass storing every step propagator (needed by the next backward pass)."""
    nsteps = carriers.shape[0]
    d = h0.shape[0]
    us = np.empty((nsteps, d, d), dtype=np.complex128)
    psi = psi0.copy()
    vals = np.empty(ops.shape[0])
    for k in range(nsteps):
        for c in range(ops.shape[0]):
            vals[c] = envelopes[k, c] * carriers[k, c]
        us[k] = expm_step(build_h(h0, ops, vals), dt)
        psi = us[k] @ psi
    return psi, us


@njit(cache=True)
def krotov_sweep(h0, ops, carriers, envelopes, shape, lambda_a, dt, psi0, chi_t, us):
    """One first-order Krotov iteration.

    ``us`` holds the step propagators of the previous (old-pulse) forward
    pass; co-states are propagated backward with them. The forward pass then
    updates the envelopes sequentially and overwrites ``us`` in place.
    Returns the new final states; ``envelopes`` is updated in place.
    """
    nsteps = carriers.shape[0]
    d, m = psi0.shape
    nch = ops.shape[0]
    chis = np.empty((nsteps + 1, d, m), dtype=np.complex128)
    chis[nsteps] = chi_t
    for k in range(nsteps - 1, -1, -1):
        chis[k] = us[k].conj().T @ chis[k + 1]
    psi = psi0.copy()
    vals = np.empty(nch)
    for k in range(nsteps):
        for c in range(nch):
            delta = 0.0
            if shape[k] != 0.0:
                g = ops[c] @ psi
                acc = 0.0
                for i in range(m):
                    ov = 0.0j
                    for a in range(d):
                        ov += np.conj(chis[k, a, i]) * g[a, i]
                    acc += ov.imag
                delta = shape[k] / lambda_a * TWO_PI * carriers[k, c] * acc
            envelopes[k, c] += delta
            vals[c] = envelopes[k, c] * carriers[k, c]
        us[k] = expm_step(build_h(h0, ops, vals), dt)
        psi = us[k] @ psi
    return psi
