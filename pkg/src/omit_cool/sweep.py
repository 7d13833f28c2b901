"""Sweeps over the target-mode frequency: cooling rates and cooling limits."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (OmitCoolError, ParameterError, SystemParams, ToneSet,
                   cascaded_tone_set)
from .dynamics import DynamicsControls, floquet_exponent, steady_occupation
from .rates import RateReport, rates, single_mode_backaction_limit

CSV_COLUMNS = ["omega_m", "gamma_opt", "n_estimate", "n_dynamics", "stable",
               "reference_kappa_over_4wm"]


@dataclass(frozen=True)
class CascadeTemplate:
    """Tone amplitudes plus the cooling-tone detuning rule, re-evaluated per point.

    The cooling tone sits at ``delta_0_over_omega_m * omega_m`` unless an
    absolute ``delta_0_prime`` is given; control tones follow the cascaded
    schedule with step ``omega_mc + omega_m``.
    """

    alphas: tuple
    delta_0_over_omega_m: float = 1.0
    delta_0_prime: float | None = None

    def __post_init__(self):
        alphas = tuple(complex(a) for a in self.alphas)
        if not alphas:
            raise ParameterError("template needs at least one amplitude")
        object.__setattr__(self, "alphas", alphas)

    def tones_for(self, params: SystemParams) -> ToneSet:
        d0 = self.delta_0_prime
        if d0 is None:
            d0 = self.delta_0_over_omega_m * params.omega_m
        return cascaded_tone_set(d0, params.omega_mc, params.omega_m, self.alphas)

    def to_dict(self):
        return {"alphas": [[a.real, a.imag] for a in self.alphas],
                "delta_0_over_omega_m": self.delta_0_over_omega_m,
                "delta_0_prime": self.delta_0_prime}


def point_params(base: SystemParams, omega_m, hold_quality=True, scale_n_c_th=True) -> SystemParams:
    """Parameters at a new ``omega_m``.

    Couplings stay fixed. With ``hold_quality`` the damping follows
    ``gamma = omega_m / Q_m`` at the base ``Q_m``; with ``scale_n_c_th`` the
    control occupation keeps its ratio to ``omega_m`` (the high-temperature
    rule ``n_c_th = n_th omega_m / omega_mc``).
    """
    if not omega_m > 0:
        raise ParameterError("axis values must be positive")
    changes = {"omega_m": float(omega_m)}
    ratio = omega_m / base.omega_m
    if hold_quality:
        changes["gamma"] = base.gamma * ratio
    if scale_n_c_th:
        changes["n_c_th"] = base.n_c_th * ratio
    return base.replace(**changes)


@dataclass
class SweepPoint:
    """Outcome at one axis value; ``failure`` explains any missing number."""

    omega_m: float
    report: RateReport | None
    n_estimate: float | None
    n_dynamics: float | None
    stable: bool | None
    floquet_exponent: float | None
    reference: float
    failure: str | None = None

    @property
    def gamma_opt(self):
        return None if self.report is None else self.report.gamma_opt

    def to_dict(self):
        return {"omega_m": self.omega_m, "gamma_opt": self.gamma_opt,
                "n_estimate": self.n_estimate, "n_dynamics": self.n_dynamics,
                "stable": self.stable, "floquet_exponent": self.floquet_exponent,
                "reference_kappa_over_4wm": self.reference, "failure": self.failure,
                "rates": None if self.report is None else self.report.to_dict()}


@dataclass
class SweepResult:
    axis: np.ndarray
    points: list
    provenance: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        vals = [getattr(p, name) for p in self.points]
        return np.array([np.nan if v is None else float(v) for v in vals])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for p in self.points:
                nums = [p.omega_m, p.gamma_opt, p.n_estimate, p.n_dynamics]
                row = [_fmt(v) for v in nums]
                row.append("" if p.stable is None else str(bool(p.stable)).lower())
                row.append(_fmt(p.reference))
                writer.writerow(row)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"provenance": self.provenance,
                       "points": [p.to_dict() for p in self.points]}, fh, indent=2)
            fh.write("\n")


def _fmt(v):
    return "nan" if v is None else format(float(v), ".17g")


def _check_axis(axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ParameterError("axis must be a non-empty 1-D list")
    if np.any(axis <= 0):
        raise ParameterError("axis values must be positive")
    if np.any(np.diff(axis) <= 0):
        raise ParameterError("axis must be strictly increasing")
    return axis


def make_axis(start, stop, num, spacing="log"):
    """Log- or linearly spaced axis including both ends."""
    if spacing == "log":
        return np.geomspace(start, stop, int(num))
    if spacing == "linear":
        return np.linspace(start, stop, int(num))
    raise ParameterError(f"unknown spacing {spacing!r}")


def _evaluate(task):
    params, tones, stability, dynamics, controls = task
    w = params.omega_m
    ref = single_mode_backaction_limit(w, params.kappa)
    try:
        report = rates(params, tones)
    except OmitCoolError as exc:
        return SweepPoint(w, None, None, None, None, None, ref, failure=f"rates: {exc}")
    failure = None
    exponent = None
    stable = not report.antidamped
    if stability:
        try:
            exponent = floquet_exponent(params, tones)
            stable = stable and exponent < 0
            if exponent >= 0:
                failure = f"unstable: Floquet exponent {exponent:.6g} >= 0"
        except OmitCoolError as exc:
            failure = f"stability: {exc}"
    n_dyn = None
    if dynamics:
        if stable is False:
            failure = failure or "unstable"
        else:
            try:
                n_dyn = steady_occupation(params, tones, controls).n_b
            except OmitCoolError as exc:
                failure = f"dynamics: {exc}"
                if "unstable" in str(exc):
                    stable = False
    if report.n_final_estimate is None and failure is None:
        failure = "antidamped: no rate-equation estimate"
    return SweepPoint(w, report, report.n_final_estimate, n_dyn, stable, exponent, ref, failure)


def _resolve_workers(workers):
    if workers is None:
        workers = int(os.environ.get("OMIT_COOL_WORKERS", "1"))
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    return workers


def _run(tasks, workers):
    workers = _resolve_workers(workers)
    if workers == 1 or len(tasks) == 1:
        return [_evaluate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_evaluate, tasks))


def _verify_mask(axis, verify_points):
    # each requested value snaps to the nearest axis entry (log distance)
    mask = np.zeros(axis.size, dtype=bool)
    for v in verify_points or ():
        if not float(v) > 0:
            raise ParameterError("verify points must be positive axis values")
        mask[int(np.argmin(np.abs(np.log(axis / float(v)))))] = True
    return mask


def sweep_cooling_limit(base: SystemParams, template: CascadeTemplate, axis,
                        mode="rates-only", verify_points=(), workers=None,
                        controls: DynamicsControls | None = None, hold_quality=True,
                        scale_n_c_th=True, check_stability=True) -> SweepResult:
    """Cooling limit against ``omega_m``.

    ``mode="rates-only"`` evaluates the rate-equation estimate everywhere and
    full dynamics only at ``verify_points`` (values snapped to the nearest
    axis entry). ``mode="full-dynamics"`` runs
    :func:`~omit_cool.dynamics.steady_occupation` at every point. Failures
    are recorded per point and never abort the sweep.
    """
    axis = _check_axis(axis)
    if mode not in ("rates-only", "full-dynamics"):
        raise ParameterError(f"unknown sweep mode {mode!r}")
    mask = np.ones(axis.size, bool) if mode == "full-dynamics" else _verify_mask(axis, verify_points)
    controls = controls or DynamicsControls()
    tasks = []
    for w, dyn in zip(axis, mask):
        p = point_params(base, w, hold_quality, scale_n_c_th)
        tasks.append((p, template.tones_for(p), check_stability, bool(dyn), controls))
    points = _run(tasks, workers)
    prov = {"kind": "cooling_limit", "base": base.to_dict(), "template": template.to_dict(),
            "mode": mode, "verified": [int(i) for i in np.nonzero(mask)[0]],
            "hold_quality": hold_quality, "scale_n_c_th": scale_n_c_th}
    return SweepResult(axis, points, prov)


def sweep_gamma_opt(base: SystemParams, axis, with_control=True,
                    template: CascadeTemplate | None = None, workers=None,
                    hold_quality=True, scale_n_c_th=True, check_stability=False) -> SweepResult:
    """Net optical damping against ``omega_m``.

    With control the template's cascaded tones are used (default: two tones
    of amplitude 1000, cooling tone at ``+omega_m``). Without control the
    control coupling is switched off and only the first amplitude is kept,
    as a single tone at ``-omega_m``.
    """
    axis = _check_axis(axis)
    template = template or CascadeTemplate((1000.0, 1000.0))
    tasks = []
    for w in axis:
        p = point_params(base, w, hold_quality, scale_n_c_th)
        if with_control:
            tones = template.tones_for(p)
        else:
            p = p.replace(g_c=0.0)
            tones = ToneSet.single(template.alphas[0], -p.omega_m)
        tasks.append((p, tones, check_stability, False, None))
    points = _run(tasks, workers)
    prov = {"kind": "gamma_opt", "base": base.to_dict(), "template": template.to_dict(),
            "with_control": with_control, "hold_quality": hold_quality,
            "scale_n_c_th": scale_n_c_th}
    return SweepResult(axis, points, prov)

