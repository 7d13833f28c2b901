"""Phonon absorption/emission rates, net optical damping and rate-equation estimates."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ParameterError, SystemParams, ToneSet
from .response import _spectrum_per_tone


@dataclass(frozen=True)
class RateReport:
    """Per-tone cooling (``a_minus``) and heating (``a_plus``) rates and derived numbers.

    ``n_backaction`` is ``None`` unless ``gamma_opt > 0``; ``n_final_estimate``
    is ``None`` when ``gamma + gamma_opt <= 0`` (``antidamped``).
    """

    a_minus_per_tone: tuple
    a_plus_per_tone: tuple
    gamma_opt: float
    a_minus: float
    a_plus: float
    n_backaction: float | None
    n_final_estimate: float | None
    antidamped: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a_minus_per_tone"] = list(self.a_minus_per_tone)
        d["a_plus_per_tone"] = list(self.a_plus_per_tone)
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def rates(params: SystemParams, tones: ToneSet) -> RateReport:
    """Rates ``A_-^k = S_FF^k(+omega_m)`` and ``A_+^k = S_FF^k(-omega_m)`` (times x_zpf^2).

    The final occupation uses the weak-coupling rate equation
    ``(gamma*n_th + A_+) / (gamma + Gamma_opt)``. It is an estimate; the
    covariance dynamics gives the exact value.
    """
    w = params.omega_m
    per_tone = _spectrum_per_tone(np.array([w, -w]), params, tones)
    a_minus = tuple(float(v) for v in per_tone[:, 0])
    a_plus = tuple(float(v) for v in per_tone[:, 1])
    gamma_opt = 0.0
    for am, ap in zip(a_minus, a_plus):
        gamma_opt += am - ap
    a_minus_tot = math.fsum(a_minus)
    a_plus_tot = math.fsum(a_plus)

    n_ba = a_plus_tot / gamma_opt if gamma_opt > 0 else None
    total_damping = params.gamma + gamma_opt
    antidamped = not total_damping > 0
    n_final = None if antidamped else (params.gamma * params.n_th + a_plus_tot) / total_damping
    return RateReport(a_minus_per_tone=a_minus, a_plus_per_tone=a_plus,
                      gamma_opt=gamma_opt, a_minus=a_minus_tot, a_plus=a_plus_tot,
                      n_backaction=n_ba, n_final_estimate=n_final, antidamped=antidamped)


def cascade_dominance(params: SystemParams, tones: ToneSet, report: RateReport | None = None) -> float:
    """Relative residual ``|Gamma_opt - (A_-^0 - A_+^{N-1})| / Gamma_opt``.

    Small values confirm that the first tone's cooling and the last tone's
    heating dominate the net damping of a cascaded tone set.
    """
    report = report or rates(params, tones)
    if not report.gamma_opt > 0:
        raise ParameterError(f"cascade dominance undefined for Gamma_opt = {report.gamma_opt:g} <= 0")
    approx = report.a_minus_per_tone[0] - report.a_plus_per_tone[-1]
    return abs(report.gamma_opt - approx) / report.gamma_opt


def single_mode_backaction_limit(omega_m, kappa=1.0):
    """Best single-mode backaction limit ``kappa / (4 omega_m)`` in the unresolved regime."""
    return kappa / (4.0 * omega_m)
