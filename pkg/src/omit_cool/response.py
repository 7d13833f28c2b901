"""Susceptibilities and the multi-tone quantum noise spectrum of the optical force."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import X_ZPF, ParameterError, SystemParams, ToneSet


def chi_opt(omega, delta_prime, kappa):
    """Optical response of tone ``j``: ``1 / (-i(omega + delta_prime) + kappa/2)``."""
    if kappa <= 0:
        raise ParameterError("kappa must be positive")
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (-1j * (omega + delta_prime) + kappa / 2)


def chi_mech(omega, omega_mc, gamma_c):
    """Response of the control mechanical mode: ``1 / (-i(omega - omega_mc) + gamma_c/2)``."""
    if gamma_c <= 0:
        raise ParameterError("gamma_c must be positive")
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (-1j * (omega - omega_mc) + gamma_c / 2)


def chi_mc_tilde(omega, params: SystemParams):
    """Thermal noise weight of mode ``c`` seen by the cavity.

    ``gamma_c (n_c_th + 1) |chi_mc(omega)|^2 + gamma_c n_c_th |chi_mc(-omega)|^2``
    """
    omega = np.asarray(omega, dtype=float)
    p = params
    pos = np.abs(chi_mech(omega, p.omega_mc, p.gamma_c)) ** 2
    neg = np.abs(chi_mech(-omega, p.omega_mc, p.gamma_c)) ** 2
    return p.gamma_c * (p.n_c_th + 1) * pos + p.gamma_c * p.n_c_th * neg


def _dressing(omega, j, params, tones):
    # g_c^2 sum_k |alpha_k|^2 [chi_mc(x) + chi_mc*(-x)],  x = omega + D_j - D_k
    p = params
    deltas = tones.deltas
    weights = np.abs(tones.alphas) ** 2
    total = np.zeros(np.shape(omega), dtype=complex)
    for k in range(len(tones)):
        x = omega + deltas[j] - deltas[k]
        total = total + weights[k] * (chi_mech(x, p.omega_mc, p.gamma_c)
                                      + np.conj(chi_mech(-x, p.omega_mc, p.gamma_c)))
    return p.g_c ** 2 * total


def _noise_bracket(omega, j, params, tones):
    # kappa + g_c^2 sum_k |alpha_k|^2 chi_mc_tilde(omega + D_j - D_k)
    p = params
    deltas = tones.deltas
    weights = np.abs(tones.alphas) ** 2
    total = np.zeros(np.shape(omega), dtype=float)
    for k in range(len(tones)):
        total = total + weights[k] * chi_mc_tilde(omega + deltas[j] - deltas[k], p)
    return p.kappa + p.g_c ** 2 * total


def chi_tilde(omega, j, params: SystemParams, tones: ToneSet):
    """Cavity response of tone ``j`` dressed by the control mode.

    With ``g_c = 0`` (or all ``alpha_k = 0``) this is exactly :func:`chi_opt`.
    """
    if not 0 <= j < len(tones):
        raise ParameterError(f"tone index {j} out of range for {len(tones)} tones")
    omega = np.asarray(omega, dtype=float)
    inverse = -1j * (omega + tones[j].delta_prime) + params.kappa / 2
    return 1.0 / (inverse + _dressing(omega, j, params, tones))


def _spectrum_per_tone(omega, params, tones):
    """``x_zpf^2 * S_FF^j(omega)`` for every tone, shape ``(N, len(omega))``.

    The zero-point amplitude is factored out so that rates built from it are
    exactly independent of ``X_ZPF``.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.empty((len(tones),) + omega.shape, dtype=float)
    for j, tone in enumerate(tones):
        dressed = np.abs(tone.alpha * chi_tilde(omega, j, params, tones)) ** 2
        out[j] = params.g ** 2 * dressed * _noise_bracket(omega, j, params, tones)
    return out


@dataclass(frozen=True)
class SpectrumSeries:
    """Sampled force spectrum: per-tone series and their sum on ``omega_grid``."""

    omega_grid: np.ndarray
    per_tone: np.ndarray
    total: np.ndarray

    def to_csv(self, path):
        n = self.per_tone.shape[0]
        header = ["omega", "S_total"] + [f"S_{j}" for j in range(n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, w in enumerate(self.omega_grid):
                row = [w, self.total[i]] + [self.per_tone[j, i] for j in range(n)]
                writer.writerow([format(float(v), ".17g") for v in row])


def spectrum(omega_grid, params: SystemParams, tones: ToneSet, x_zpf=X_ZPF) -> SpectrumSeries:
    """Evaluate ``S_FF^j`` and ``S_FF`` pointwise on a sorted frequency grid."""
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1:
        raise ParameterError("omega_grid must be one-dimensional")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ParameterError("omega_grid must be strictly increasing")
    per_tone = _spectrum_per_tone(grid, params, tones) / x_zpf ** 2
    return SpectrumSeries(omega_grid=grid, per_tone=per_tone, total=per_tone.sum(axis=0))


def lorentzian_reference(omega, params: SystemParams, tone) -> np.ndarray:
    """Control-free spectrum ``kappa |alpha chi(omega)|^2 g^2`` of one tone."""
    chi = chi_opt(omega, tone.delta_prime, params.kappa)
    return params.kappa * np.abs(tone.alpha * chi) ** 2 * params.g ** 2
