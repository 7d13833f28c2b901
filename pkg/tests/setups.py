"""Parameter sets shared by the test modules (all in units of kappa).

Two coupling profiles are carried for the control mode: ``printed`` uses
the literal ratio g_c/omega_mc = 5e-4 (dynamically unstable at these drive
strengths), ``corrected`` uses 5e-5.
"""
import numpy as np

from omit_cool import SystemParams, ToneSet, cascaded_tone_set

PROFILES = ("corrected", "printed")
G_C = {"corrected": 1e-4, "printed": 1e-3}
G = 2e-5
Q_M, Q_MC = 1e5, 1e4
OMEGA_MC = 2.0
N_TH = 1e3


def base_params(omega_m, profile="corrected", **changes):
    p = SystemParams.from_quality_factors(omega_m, OMEGA_MC, Q_M, Q_MC, G, G_C[profile], N_TH)
    return p.replace(**changes) if changes else p


def cascade(params, n_tones, alpha=1e3):
    w = params.omega_m
    return cascaded_tone_set(w, params.omega_mc, w, [alpha] * n_tones)


def fig2(profile="corrected"):
    p = base_params(0.02, profile)
    return p, cascade(p, 2)


def fig4(n_tones, profile="corrected", alpha=1e3):
    p = base_params(0.01, profile)
    return p, cascade(p, n_tones, alpha)


def single_red(params, alpha=1e3):
    return params.replace(g_c=0.0), ToneSet.single(alpha, -params.omega_m)


def single_blue(params, alpha=1e3):
    return params.replace(g_c=0.0), ToneSet.single(alpha, params.omega_m)


def scaled_oracle():
    """Small instance that a truncated Fock space can hold."""
    p = SystemParams(omega_m=0.2, omega_mc=2.0, kappa=1.0, gamma=0.01, gamma_c=0.02,
                     g=0.05, g_c=0.1, n_th=0.5, n_c_th=0.05)
    return p, cascaded_tone_set(0.2, 2.0, 0.2, [2.0, 2.0])


def local_extrema(x, y):
    """Interior grid points where ``y`` has a strict local maximum or minimum."""
    d = np.diff(y)
    turn = np.sign(d[:-1]) * np.sign(d[1:]) < 0
    return x[1:-1][turn]
