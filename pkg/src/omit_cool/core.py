"""
System parameters, drive tones and shared conventions.

Units: every frequency and rate is expressed in units of the optical decay
rate, so ``kappa`` is 1 for parameters that went through the config parser.
The library functions themselves only require a consistent unit system.
We also set hbar = 1 and the mechanical zero-point amplitude ``X_ZPF`` = 1;
force spectra are therefore in arbitrary units, while absorption/emission
rates do not depend on ``X_ZPF`` at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

#: Zero-point fluctuation amplitude of the target mechanical mode.
X_ZPF = 1.0


class OmitCoolError(Exception):
    """Base class for all library errors."""


class ParameterError(OmitCoolError, ValueError):
    """Invalid physical or numerical parameter."""


class IntegrationError(OmitCoolError):
    """Time integration failed (step-size underflow and similar)."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InstabilityError(OmitCoolError):
    """The linearized dynamics is unstable (moments diverge)."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConvergenceError(OmitCoolError):
    """An iterative procedure did not converge."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PhysicalityError(OmitCoolError):
    """A state violated the uncertainty relation, trace or Hermiticity."""


def _finite(name, value):
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Static rates, frequencies and thermal occupations of the three modes.

    Cavity mode ``a`` decays at ``kappa``; target mechanical mode ``b`` has
    frequency ``omega_m`` and damping ``gamma``; control mechanical mode ``c``
    has ``omega_mc`` and ``gamma_c``. ``g`` and ``g_c`` are the single-photon
    couplings of ``b`` and ``c`` to the cavity.
    """

    omega_m: float
    omega_mc: float
    kappa: float
    gamma: float
    gamma_c: float
    g: float
    g_c: float
    n_th: float
    n_c_th: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (bool, complex)) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{f.name} must be a real number, got {value!r}")
            _finite(f.name, value)
            object.__setattr__(self, f.name, float(value))
        for name in ("omega_m", "omega_mc", "kappa", "gamma", "gamma_c"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")
        for name in ("g", "g_c", "n_th", "n_c_th"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative")

    @classmethod
    def from_quality_factors(cls, omega_m, omega_mc, Q_m, Q_mc, g, g_c, n_th,
                             n_c_th=None, kappa=1.0):
        """Build parameters with ``gamma = omega_m / Q_m`` and ``gamma_c = omega_mc / Q_mc``.

        When ``n_c_th`` is omitted it defaults to ``n_th * omega_m / omega_mc``,
        the high-temperature ratio of the two Bose occupations.
        """
        if Q_m <= 0 or Q_mc <= 0:
            raise ParameterError("quality factors must be positive")
        if n_c_th is None:
            n_c_th = default_n_c_th(n_th, omega_m, omega_mc)
        return cls(omega_m=omega_m, omega_mc=omega_mc, kappa=kappa,
                   gamma=omega_m / Q_m, gamma_c=omega_mc / Q_mc,
                   g=g, g_c=g_c, n_th=n_th, n_c_th=n_c_th)

    def replace(self, **changes) -> "SystemParams":
        data = self.to_dict()
        data.update(changes)
        return SystemParams(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data) -> "SystemParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ParameterError(f"unknown SystemParams keys: {sorted(unknown)}")
        missing = names - set(data)
        if missing:
            raise ParameterError(f"missing SystemParams keys: {sorted(missing)}")
        return cls(**data)


def default_n_c_th(n_th, omega_m, omega_mc):
    """Control-mode occupation used when none is given: n_th * omega_m / omega_mc."""
    return n_th * omega_m / omega_mc


@dataclass(frozen=True)
class Tone:
    """One drive tone: intracavity amplitude ``alpha`` and modified detuning ``delta_prime``."""

    alpha: complex
    delta_prime: float

    def __post_init__(self):
        alpha = complex(self.alpha)
        if not (np.isfinite(alpha.real) and np.isfinite(alpha.imag)):
            raise ParameterError(f"alpha must be finite, got {self.alpha!r}")
        _finite("delta_prime", self.delta_prime)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta_prime", float(self.delta_prime))

    def to_dict(self) -> dict:
        return {"alpha": [self.alpha.real, self.alpha.imag],
                "delta_prime": self.delta_prime}

    @classmethod
    def from_dict(cls, data) -> "Tone":
        re, im = data["alpha"]
        return cls(alpha=complex(re, im), delta_prime=data["delta_prime"])


@dataclass(frozen=True)
class ToneSet:
    """Ordered drive tones; tone 0 is the cooling tone."""

    tones: tuple

    def __post_init__(self):
        tones = tuple(self.tones)
        if not tones:
            raise ParameterError("a ToneSet needs at least one tone")
        for t in tones:
            if not isinstance(t, Tone):
                raise ParameterError(f"expected Tone, got {type(t).__name__}")
        deltas = [t.delta_prime for t in tones]
        if len(set(deltas)) != len(deltas):
            raise ParameterError(f"tone detunings must be pairwise distinct: {deltas}")
        object.__setattr__(self, "tones", tones)

    def __len__(self):
        return len(self.tones)

    def __iter__(self):
        return iter(self.tones)

    def __getitem__(self, i):
        return self.tones[i]

    @property
    def alphas(self) -> np.ndarray:
        return np.array([t.alpha for t in self.tones], dtype=complex)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([t.delta_prime for t in self.tones], dtype=float)

    def to_list(self) -> list:
        return [t.to_dict() for t in self.tones]

    @classmethod
    def from_list(cls, data: Iterable) -> "ToneSet":
        return cls(tuple(Tone.from_dict(d) for d in data))

    @classmethod
    def single(cls, alpha, delta_prime) -> "ToneSet":
        return cls((Tone(alpha, delta_prime),))


def bose_occupation(omega, temperature_ratio):
    """Bose-Einstein occupation ``1 / (exp(x) - 1)`` with ``x = hbar*omega/(k_B T)``.

    ``omega`` is carried for documentation only; the occupation depends on the
    ratio alone. ``temperature_ratio = inf`` gives the zero-temperature value 0.
    """
    x = float(temperature_ratio)
    if not x > 0:
        raise ParameterError(f"temperature ratio must be positive, got {temperature_ratio!r}")
    if x > 700.0:  # exp overflows; the occupation underflows to e^-x
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def cascaded_tone_set(delta_0_prime, omega_mc, omega_m, alphas: Sequence) -> ToneSet:
    """Tones at ``delta_0_prime - k*(omega_mc + omega_m)`` for k = 0..N-1."""
    alphas = list(alphas)
    if not alphas:
        raise ParameterError("alphas must be non-empty")
    step = omega_mc + omega_m
    return ToneSet(tuple(Tone(a, delta_0_prime - k * step) for k, a in enumerate(alphas)))


def two_photon_detuning(tones: ToneSet) -> float:
    """Beat detuning ``delta = Delta_0' - Delta_1'`` between cooling and first control tone."""
    if len(tones) < 2:
        raise ParameterError("two-photon detuning needs at least two tones")
    return tones[0].delta_prime - tones[1].delta_prime
