"""Intracavity mean fields and the static radiation-pressure shift.

Each tone is treated with the linear single-tone cavity response at the
shifted detuning, ``alpha_j = -i Omega_j / (kappa/2 - i (Delta_j + Delta_om))``,
while ``Delta_om = 2 (g^2/omega_m + g_c^2/omega_mc) sum_j |alpha_j|^2``.
Beat-note corrections to the classical field are neglected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConvergenceError, ParameterError, SystemParams, Tone, ToneSet


@dataclass(frozen=True)
class DriveSpec:
    """Bare laser detuning ``omega_j - omega_c`` and complex drive strength."""

    omega_drive_detuning: float
    strength: complex

    def __post_init__(self):
        s = complex(self.strength)
        if not (np.isfinite(self.omega_drive_detuning) and np.isfinite(s.real) and np.isfinite(s.imag)):
            raise ParameterError("drive detuning and strength must be finite")
        object.__setattr__(self, "omega_drive_detuning", float(self.omega_drive_detuning))
        object.__setattr__(self, "strength", s)

    def to_dict(self):
        return {"omega_drive_detuning": self.omega_drive_detuning,
                "strength": [self.strength.real, self.strength.imag]}


def shift_coefficient(params: SystemParams) -> float:
    return 2.0 * (params.g ** 2 / params.omega_m + params.g_c ** 2 / params.omega_mc)


def _amplitudes(params, drives, delta_om):
    return [-1j * d.strength / (params.kappa / 2 - 1j * (d.omega_drive_detuning + delta_om))
            for d in drives]


def solve_mean_field(params: SystemParams, drives, damping=0.5, rtol=1e-12,
                     max_iter=10_000):
    """Self-consistent amplitudes and shift for a list of :class:`DriveSpec`.

    Returns ``(ToneSet, delta_om)`` with ``delta_prime = Delta_j + delta_om``.
    Raises :class:`ConvergenceError` if the damped fixed-point iteration does
    not settle (multistable or nonconvergent drive).
    """
    drives = list(drives)
    if not drives:
        raise ParameterError("at least one drive is required")
    coeff = shift_coefficient(params)

    def shift_map(x):
        return coeff * sum(abs(a) ** 2 for a in _amplitudes(params, drives, x))

    delta_om = 0.0
    for _ in range(max_iter):
        target = shift_map(delta_om)
        if abs(target - delta_om) <= rtol * max(abs(target), abs(delta_om)):
            break
        delta_om = (1 - damping) * delta_om + damping * target
    else:
        raise ConvergenceError(
            f"mean-field iteration multistable or nonconvergent after {max_iter} iterations",
            partial=delta_om)

    alphas = _amplitudes(params, drives, delta_om)
    tones = ToneSet(tuple(Tone(a, d.omega_drive_detuning + delta_om)
                          for a, d in zip(alphas, drives)))
    return tones, delta_om


def drives_for(params: SystemParams, tones: ToneSet):
    """Drives that reproduce a given ``(alpha_j, Delta_j')`` solution exactly.

    Inverse of :func:`solve_mean_field`, used to go from alpha-space configs back
    to physical drive strengths.
    """
    delta_om = shift_coefficient(params) * float(np.sum(np.abs(tones.alphas) ** 2))
    drives = []
    for t in tones:
        strength = 1j * t.alpha * (params.kappa / 2 - 1j * t.delta_prime)
        drives.append(DriveSpec(t.delta_prime - delta_om, strength))
    return drives, delta_om
