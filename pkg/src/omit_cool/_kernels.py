"""Compiled inner loops for the second-moment equations.

Moments are ``S[k, l] = <v_k v_l + v_l v_k>`` for ``v = (a, b, c, a+, b+, c+)``
and obey ``dS/dt = M S + S M^T + N``. Everything here works on plain arrays;
the public wrappers live in :mod:`omit_cool.dynamics`.
"""
import numpy as np
from numba import njit

# Status codes returned by integrate_moments.
OK = 0
STEP_UNDERFLOW = 1
DIVERGED = 2
UNPHYSICAL = 3
NON_HERMITIAN = 4
MAX_STEPS = 5

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)


@njit(cache=True)
def fill_drift(t, p, alphas, deltas, frame, M):
    """Drift matrix at time ``t``; ``p = (kappa, omega_m, omega_mc, gamma, gamma_c, g, g_c)``.

    ``frame`` rotates the cavity fluctuation at ``exp(-i frame t)``; 0 is the
    lab frame of the linearized Hamiltonian.
    """
    phase = 0j
    for j in range(alphas.shape[0]):
        phase += alphas[j] * np.exp(-1j * (deltas[j] - frame) * t)
    G = p[5] * phase
    Gc = p[6] * phase
    for i in range(6):
        for k in range(6):
            M[i, k] = 0j
    M[0, 0] = -p[0] / 2 + 1j * frame
    M[0, 1] = -1j * G
    M[0, 4] = -1j * G
    M[0, 2] = -1j * Gc
    M[0, 5] = -1j * Gc
    M[1, 1] = -1j * p[1] - p[3] / 2
    M[1, 0] = -1j * np.conj(G)
    M[1, 3] = -1j * G
    M[2, 2] = -1j * p[2] - p[4] / 2
    M[2, 0] = -1j * np.conj(Gc)
    M[2, 3] = -1j * Gc
    for i in range(3):
        for k in range(3):
            M[3 + i, 3 + k] = np.conj(M[i, k])
            M[3 + i, k] = np.conj(M[i, 3 + k])


@njit(cache=True)
def _rhs(t, S, p, alphas, deltas, N, M, out):
    fill_drift(t, p, alphas, deltas, 0.0, M)
    for i in range(6):
        for k in range(6):
            acc = 0j
            for m in range(6):
                acc += M[i, m] * S[m, k]
            out[i, k] = acc
    for i in range(6):
        for k in range(i, 6):
            v = out[i, k] + out[k, i] + N[i, k]
            out[i, k] = v
            out[k, i] = v


@njit(cache=True)
def _occupations(S, row):
    row[1] = (S[1, 4].real - 1.0) / 2
    row[2] = (S[2, 5].real - 1.0) / 2
    row[3] = (S[0, 3].real - 1.0) / 2


@njit(cache=True)
def _max_abs(S):
    m = 0.0
    for i in range(6):
        for k in range(6):
            v = abs(S[i, k])
            if v > m:
                m = v
    return m


@njit(cache=True)
def hermiticity_error(S):
    """Largest ``|S[kbar, lbar] - conj(S[k, l])|``."""
    err = 0.0
    for i in range(6):
        ib = (i + 3) % 6
        for k in range(6):
            kb = (k + 3) % 6
            v = abs(S[ib, kb] - np.conj(S[i, k]))
            if v > err:
                err = v
    return err


@njit(cache=True)
def min_uncertainty_eigenvalue(S):
    """Smallest eigenvalue of ``Q[k, l] = <v_k^+ v_l>``.

    Q is unitarily equivalent to ``V + i Omega / 2`` for the quadrature
    covariance ``V``, so a negative eigenvalue means an unphysical state.
    """
    Q = np.empty((6, 6), dtype=np.complex128)
    for i in range(6):
        ib = (i + 3) % 6
        for k in range(6):
            Q[i, k] = S[ib, k] / 2
    for i in range(3):
        Q[i, i] -= 0.5
        Q[i + 3, i + 3] += 0.5
    H = np.empty((6, 6), dtype=np.complex128)
    for i in range(6):
        for k in range(6):
            H[i, k] = (Q[i, k] + np.conj(Q[k, i])) / 2
    return np.linalg.eigvalsh(H)[0]


@njit(cache=True)
def integrate_moments(S0, t0, sample_times, p, alphas, deltas, N, rtol, atol,
                      h_max, h_init, div_threshold, phys_tol, herm_tol, max_steps):
    """Adaptive Dormand-Prince integration of the moment equations.

    Lands exactly on every entry of ``sample_times`` (increasing, all > t0)
    and records ``(t, n_b, n_c, n_a)`` there. Returns
    ``(status, t, S, samples, n_recorded, stats)`` where ``stats`` holds
    accepted steps, rejected steps, worst scaled eigenvalue and worst scaled
    Hermiticity error.
    """
    n_samples = sample_times.shape[0]
    samples = np.empty((n_samples, 4))
    S = S0.copy()
    t = t0
    M = np.empty((6, 6), dtype=np.complex128)
    k1 = np.empty((6, 6), dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    k5 = np.empty_like(k1)
    k6 = np.empty_like(k1)
    k7 = np.empty_like(k1)
    Y = np.empty_like(k1)
    Y5 = np.empty_like(k1)
    stats = np.zeros(4)
    stats[2] = np.inf
    _rhs(t, S, p, alphas, deltas, N, M, k1)
    h = min(h_init, h_max)
    h_min_rel = 1e-14
    status = OK
    n_rec = 0
    accepted = 0
    rejected = 0
    while n_rec < n_samples:
        target = sample_times[n_rec]
        remaining = target - t
        clipped = False
        h_try = h
        if h_try >= remaining:
            h_try = remaining
            clipped = True
        if h_try <= h_min_rel * max(1.0, abs(t)):
            status = STEP_UNDERFLOW
            break
        if accepted + rejected >= max_steps:
            status = MAX_STEPS
            break

        for i in range(6):
            for k in range(6):
                Y[i, k] = S[i, k] + h_try * A21 * k1[i, k]
        _rhs(t + C2 * h_try, Y, p, alphas, deltas, N, M, k2)
        for i in range(6):
            for k in range(6):
                Y[i, k] = S[i, k] + h_try * (A31 * k1[i, k] + A32 * k2[i, k])
        _rhs(t + C3 * h_try, Y, p, alphas, deltas, N, M, k3)
        for i in range(6):
            for k in range(6):
                Y[i, k] = S[i, k] + h_try * (A41 * k1[i, k] + A42 * k2[i, k] + A43 * k3[i, k])
        _rhs(t + C4 * h_try, Y, p, alphas, deltas, N, M, k4)
        for i in range(6):
            for k in range(6):
                Y[i, k] = S[i, k] + h_try * (A51 * k1[i, k] + A52 * k2[i, k] + A53 * k3[i, k]
                                             + A54 * k4[i, k])
        _rhs(t + C5 * h_try, Y, p, alphas, deltas, N, M, k5)
        for i in range(6):
            for k in range(6):
                Y[i, k] = S[i, k] + h_try * (A61 * k1[i, k] + A62 * k2[i, k] + A63 * k3[i, k]
                                             + A64 * k4[i, k] + A65 * k5[i, k])
        _rhs(t + h_try, Y, p, alphas, deltas, N, M, k6)
        for i in range(6):
            for k in range(6):
                Y5[i, k] = S[i, k] + h_try * (B1 * k1[i, k] + B3 * k3[i, k] + B4 * k4[i, k]
                                              + B5 * k5[i, k] + B6 * k6[i, k])
        _rhs(t + h_try, Y5, p, alphas, deltas, N, M, k7)

        err = 0.0
        for i in range(6):
            for k in range(6):
                e = h_try * (E1 * k1[i, k] + E3 * k3[i, k] + E4 * k4[i, k] + E5 * k5[i, k]
                             + E6 * k6[i, k] + E7 * k7[i, k])
                scale = atol + rtol * max(abs(S[i, k]), abs(Y5[i, k]))
                err += (e.real / scale) ** 2 + (e.imag / scale) ** 2
        err = np.sqrt(err / 72.0)

        if err <= 1.0:
            accepted += 1
            t = target if clipped else t + h_try
            for i in range(6):
                for k in range(6):
                    S[i, k] = Y5[i, k]
                    k1[i, k] = k7[i, k]
            size = max(1.0, _max_abs(S))
            if size > div_threshold:
                status = DIVERGED
                break
            herm = hermiticity_error(S) / size
            if herm > stats[3]:
                stats[3] = herm
            if herm > herm_tol:
                status = NON_HERMITIAN
                break
            eig = min_uncertainty_eigenvalue(S) / size
            if eig < stats[2]:
                stats[2] = eig
            if eig < -phys_tol:
                status = UNPHYSICAL
                break
            if clipped:
                samples[n_rec, 0] = t
                _occupations(S, samples[n_rec])
                n_rec += 1
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            h_new = h_try * factor
            if clipped and h_new < h:
                h_new = h
            h = min(h_new, h_max)
        else:
            rejected += 1
            h = h_try * max(0.2, 0.9 * err ** -0.2)
    stats[0] = accepted
    stats[1] = rejected
    return status, t, S, samples, n_rec, stats
