"""Exact second-moment dynamics of the linearized three-mode system.

The fluctuation vector is ``v = (a, b, c, a+, b+, c+)`` and the state is the
complex symmetric matrix ``S[k, l] = <v_k v_l + v_l v_k>``. Because the
linearized Hamiltonian is quadratic and the dissipators are linear, the
moments obey the closed equation ``dS/dt = M(t) S + S M(t)^T + N`` with no
rotating-wave approximation; ``M(t)`` carries the drive phases
``exp(-i Delta_j' t)`` directly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_sylvester

from . import _kernels as K
from .core import (ConvergenceError, InstabilityError, IntegrationError,
                   ParameterError, PhysicalityError, SystemParams, ToneSet)

_SQRT_HALF = math.sqrt(0.5)
# v -> (x_a, x_b, x_c, p_a, p_b, p_c)
_U = _SQRT_HALF * np.block([[np.eye(3), np.eye(3)], [-1j * np.eye(3), 1j * np.eye(3)]])
_OMEGA = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])


def _param_vector(params: SystemParams) -> np.ndarray:
    p = params
    return np.array([p.kappa, p.omega_m, p.omega_mc, p.gamma, p.gamma_c, p.g, p.g_c])


def diffusion_matrix(params: SystemParams) -> np.ndarray:
    """Constant diffusion ``N`` of the symmetrized moments."""
    N = np.zeros((6, 6), dtype=complex)
    for k, d in ((0, params.kappa),
                 (1, params.gamma * (2 * params.n_th + 1)),
                 (2, params.gamma_c * (2 * params.n_c_th + 1))):
        N[k, k + 3] = N[k + 3, k] = d
    return N


def drift_and_diffusion(t, params: SystemParams, tones: ToneSet, frame=0.0):
    """Drift ``M(t)`` and diffusion ``N`` with ``dS/dt = M S + S M^T + N``.

    ``frame`` moves the cavity fluctuation into a frame rotating at that
    detuning; the default is the frame of the linearized Hamiltonian.
    """
    M = np.empty((6, 6), dtype=complex)
    K.fill_drift(float(t), _param_vector(params), tones.alphas, tones.deltas, float(frame), M)
    return M, diffusion_matrix(params)


def fastest_frequency(params: SystemParams, tones: ToneSet) -> float:
    """Largest frequency present in the drift coefficients and free evolution."""
    deltas = tones.deltas
    beat = float(np.max(deltas) - np.min(deltas))
    return max(float(np.max(np.abs(deltas))) + params.omega_mc, params.omega_mc,
               params.omega_m, beat)


def beat_period(params: SystemParams, tones: ToneSet) -> float:
    """``2 pi / |delta|`` for several tones, ``2 pi / omega_m`` for a single tone."""
    if len(tones) >= 2:
        return 2 * math.pi / abs(tones[0].delta_prime - tones[1].delta_prime)
    return 2 * math.pi / params.omega_m


@dataclass(frozen=True)
class MomentState:
    """Symmetrized second moments of the fluctuation operators at time ``t``.

    First moments of the fluctuations vanish identically and are not stored.
    """

    t: float
    second_moments: np.ndarray

    def __post_init__(self):
        S = np.array(self.second_moments, dtype=complex)
        if S.shape != (6, 6):
            raise ParameterError(f"second_moments must be 6x6, got {S.shape}")
        if not np.all(np.isfinite(S)):
            raise ParameterError("second_moments must be finite")
        S.setflags(write=False)
        object.__setattr__(self, "second_moments", S)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def thermal(cls, params: SystemParams, n_a=0.0, n_b=None, n_c=None, t=0.0) -> "MomentState":
        """Uncorrelated thermal state; ``b`` and ``c`` default to ``n_th`` and ``n_c_th``."""
        occ = (n_a, params.n_th if n_b is None else n_b, params.n_c_th if n_c is None else n_c)
        S = np.zeros((6, 6), dtype=complex)
        for k, n in enumerate(occ):
            if n < 0:
                raise ParameterError("occupations must be nonnegative")
            S[k, k + 3] = S[k + 3, k] = 2 * n + 1
        return cls(t, S)

    @property
    def occupations(self):
        """``(n_a, n_b, n_c)``, the fluctuation quanta ``<v+ v>`` of each mode."""
        S = self.second_moments
        return tuple((S[k, k + 3].real - 1) / 2 for k in range(3))

    @property
    def n_b(self) -> float:
        return self.occupations[1]

    def independent_moments(self) -> np.ndarray:
        """The 21 upper-triangular entries of the symmetric moment matrix."""
        return self.second_moments[np.triu_indices(6)].copy()

    def quadrature_covariance(self) -> np.ndarray:
        """Real symmetric ``V`` of ``(x_a, x_b, x_c, p_a, p_b, p_c)``; vacuum is ``I/2``."""
        V = _U @ self.second_moments @ _U.T / 2
        return V.real

    def hermiticity_error(self) -> float:
        return float(K.hermiticity_error(self.second_moments))

    def symplectic_min_eigenvalue(self) -> float:
        """Smallest eigenvalue of ``V + i Omega / 2`` (nonnegative for physical states)."""
        V = self.quadrature_covariance()
        return float(np.linalg.eigvalsh(V + 0.5j * _OMEGA)[0])

    def check_physical(self, tol=1e-8, herm_tol=1e-10):
        size = max(1.0, float(np.max(np.abs(self.second_moments))))
        herm = self.hermiticity_error() / size
        if herm > herm_tol:
            raise PhysicalityError(f"moment Hermiticity violated by {herm:.3g}")
        eig = self.symplectic_min_eigenvalue() / size
        if eig < -tol:
            raise PhysicalityError(f"uncertainty relation violated, eigenvalue {eig:.3g}")


@dataclass(frozen=True)
class DynamicsControls:
    """Numerical controls of the moment integrator and the steady-state search."""

    rtol: float = 1e-9
    atol: float = 1e-12
    steps_per_period: int = 50
    max_step: float | None = None
    divergence_factor: float = 1e6
    physicality_tol: float = 1e-8
    hermiticity_tol: float = 1e-10
    max_steps: int = 2_000_000_000
    window_periods: int = 20
    window_rtol: float = 1e-3
    samples_per_period: int = 64
    t_max: float = 1e6
    check_stability: bool = True

    def __post_init__(self):
        for name in ("rtol", "atol", "divergence_factor", "physicality_tol",
                     "hermiticity_tol", "window_rtol", "t_max"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        for name in ("steps_per_period", "max_steps", "window_periods", "samples_per_period"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be a positive integer")
        if self.max_step is not None and not self.max_step > 0:
            raise ParameterError("max_step must be positive")

    def step_cap(self, params, tones) -> float:
        cap = 2 * math.pi / fastest_frequency(params, tones) / self.steps_per_period
        return cap if self.max_step is None else min(cap, self.max_step)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Trajectory:
    """Sampled occupations of an integration run."""

    t: np.ndarray
    n_b: np.ndarray
    n_c: np.ndarray
    n_a: np.ndarray
    final: MomentState
    diverged: bool = False
    converged_tail: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.t.tolist(), self.n_b.tolist(), self.n_c.tolist(), self.n_a.tolist()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "n_b", "n_c", "n_a"])
            for row in zip(self.t, self.n_b, self.n_c, self.n_a):
                writer.writerow([format(float(v), ".17g") for v in row])

    def summary(self) -> dict:
        return {"t_final": self.final.t, "n_b_final": float(self.n_b[-1]),
                "diverged": self.diverged, "converged_tail": self.converged_tail,
                "step_statistics": dict(self.stats)}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _concat(parts):
    return np.concatenate(parts) if parts else np.empty(0)


def _run_kernel(params, tones, S0, t0, sample_times, controls, threshold):
    h_cap = controls.step_cap(params, tones)
    return K.integrate_moments(
        np.ascontiguousarray(S0, dtype=complex), float(t0),
        np.ascontiguousarray(sample_times, dtype=float), _param_vector(params),
        tones.alphas, tones.deltas, diffusion_matrix(params),
        controls.rtol, controls.atol, h_cap, h_cap / 10, threshold,
        controls.physicality_tol, controls.hermiticity_tol, controls.max_steps)


def _sample_grid(t0, t_end, stride):
    n = int(math.floor((t_end - t0) / stride * (1 + 1e-12)))
    grid = t0 + stride * np.arange(1, n + 1)
    grid = grid[grid < t_end - 1e-12 * max(1.0, abs(t_end))]
    return np.append(grid, t_end)


def evolve(params: SystemParams, tones: ToneSet, initial: MomentState | None = None,
           t_end=1.0, output_stride=None, controls: DynamicsControls | None = None) -> Trajectory:
    """Integrate the moment equations from ``initial.t`` to ``t_end``.

    Samples every ``output_stride`` (plus the endpoints). Divergence beyond
    ``divergence_factor * max(max|S(0)|, n_th)`` stops the run and sets
    ``diverged``. Step-size underflow raises :class:`IntegrationError` and a
    broken uncertainty relation or Hermiticity raises
    :class:`PhysicalityError`; both carry the partial trajectory.
    """
    controls = controls or DynamicsControls()
    initial = initial if initial is not None else MomentState.thermal(params)
    t0 = initial.t
    if not t_end > t0:
        raise ParameterError("t_end must exceed the initial time")
    stride = (t_end - t0) if output_stride is None else float(output_stride)
    if not stride > 0:
        raise ParameterError("output_stride must be positive")
    initial.check_physical(controls.physicality_tol, controls.hermiticity_tol)

    S0 = initial.second_moments
    threshold = controls.divergence_factor * max(float(np.max(np.abs(S0))), params.n_th, 1.0)
    grid = _sample_grid(t0, float(t_end), stride)
    status, t, S, samples, n_rec, st = _run_kernel(params, tones, S0, t0, grid, controls, threshold)

    rows = np.vstack([[t0, *_occupation_row(S0)], samples[:n_rec]])
    final = MomentState(t, S) if np.all(np.isfinite(S)) else MomentState(rows[-1, 0], S0)
    stats = {"accepted_steps": int(st[0]), "rejected_steps": int(st[1]),
             "min_scaled_eigenvalue": float(st[2]), "max_hermiticity_error": float(st[3]),
             "max_step": controls.step_cap(params, tones), "status": int(status)}
    traj = Trajectory(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], final,
                      diverged=status == K.DIVERGED, stats=stats)
    if status == K.STEP_UNDERFLOW:
        raise IntegrationError(f"step size underflow at t = {t:.6g}", trajectory=traj)
    if status == K.MAX_STEPS:
        raise IntegrationError(f"step budget exhausted at t = {t:.6g}", trajectory=traj)
    if status in (K.UNPHYSICAL, K.NON_HERMITIAN):
        kind = "uncertainty relation" if status == K.UNPHYSICAL else "Hermiticity"
        err = PhysicalityError(f"{kind} violated at t = {t:.6g} (eig {st[2]:.3g}, herm {st[3]:.3g})")
        err.trajectory = traj
        raise err
    return traj


def _occupation_row(S):
    return [(S[1, 4].real - 1) / 2, (S[2, 5].real - 1) / 2, (S[0, 3].real - 1) / 2]


def _aitken(m):
    if len(m) < 3:
        return None
    d1, d2 = m[-2] - m[-3], m[-1] - m[-2]
    denom = d2 - d1
    if denom == 0 or d1 == 0 or d2 / d1 <= 0 or d2 / d1 >= 1:
        return None
    return m[-1] - d2 * d2 / denom


@dataclass
class SteadyOccupation:
    """Result of :func:`steady_occupation`.

    ``n_b`` is the last window average; ``extrapolated`` is an Aitken
    estimate from the last three windows when they decay geometrically.
    """

    n_b: float
    t: float
    window: float
    window_means: list
    extrapolated: float | None
    floquet_exponent: float | None
    trajectory: Trajectory | None = None
    stats: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.n_b)

    def to_dict(self):
        return {"n_b": self.n_b, "t": self.t, "window": self.window,
                "windows": len(self.window_means), "extrapolated": self.extrapolated,
                "floquet_exponent": self.floquet_exponent, "step_statistics": dict(self.stats)}


def steady_occupation(params: SystemParams, tones: ToneSet, controls: DynamicsControls | None = None,
                      initial: MomentState | None = None, keep_trajectory=False) -> SteadyOccupation:
    """Evolve until the window average of ``n_b`` settles.

    Windows span ``window_periods`` beat periods. The run stops when two
    consecutive window means differ by less than ``window_rtol`` relative.
    A flat stretch of a transient can satisfy that test early, so when the
    slowest Floquet rate ``lam`` of the moments is available the test is only
    trusted once ``lam * t >= log(max(n_0, n) / (window_rtol * n))``, i.e.
    once any transient of the initial size has decayed below the tolerance.
    A divergent run raises :class:`InstabilityError`; reaching ``t_max``
    raises :class:`ConvergenceError` with the partial result.
    """
    controls = controls or DynamicsControls()
    exponent = None
    if controls.check_stability:
        try:
            exponent = floquet_exponent(params, tones)
        except ParameterError:
            exponent = None
        if exponent is not None and exponent >= 0:
            raise InstabilityError(f"unstable: largest Floquet exponent {exponent:.6g} >= 0")
    # second moments relax at twice the amplitude rate
    relax_rate = None if exponent is None else -2.0 * exponent

    state = initial if initial is not None else MomentState.thermal(params)
    n0 = state.n_b
    W = controls.window_periods * beat_period(params, tones)
    n_per_window = controls.window_periods * controls.samples_per_period
    threshold = controls.divergence_factor * max(float(np.max(np.abs(state.second_moments))),
                                                 params.n_th, 1.0)
    means, parts = [], []
    stats = {"accepted_steps": 0, "rejected_steps": 0, "min_scaled_eigenvalue": np.inf,
             "max_hermiticity_error": 0.0}
    t0 = state.t
    S = state.second_moments
    t = t0
    while t - t0 < controls.t_max:
        grid = t + W * np.arange(1, n_per_window + 1) / n_per_window
        grid[-1] = t + W
        status, t_new, S_new, samples, n_rec, st = _run_kernel(params, tones, S, t, grid,
                                                               controls, threshold)
        stats["accepted_steps"] += int(st[0])
        stats["rejected_steps"] += int(st[1])
        stats["min_scaled_eigenvalue"] = min(stats["min_scaled_eigenvalue"], float(st[2]))
        stats["max_hermiticity_error"] = max(stats["max_hermiticity_error"], float(st[3]))
        if status != K.OK:
            if status == K.DIVERGED:
                raise InstabilityError(f"unstable: moments diverged at t = {t_new:.6g}")
            if status in (K.UNPHYSICAL, K.NON_HERMITIAN):
                raise PhysicalityError(f"physicality violated at t = {t_new:.6g}")
            raise IntegrationError(f"integration failed at t = {t_new:.6g} (status {status})")
        times = np.concatenate([[t], samples[:n_rec, 0]])
        n_b = np.concatenate([[_occupation_row(S)[0]], samples[:n_rec, 1]])
        means.append(float(np.trapezoid(n_b, times) / W))
        if keep_trajectory:
            parts.append(samples[:n_rec])
        t, S = t_new, S_new
        if len(means) >= 2:
            m0, m1 = means[-2], means[-1]
            settled = abs(m1 - m0) <= controls.window_rtol * abs(m1)
            if settled and relax_rate is not None and m1 != 0:
                # the transient started no larger than max(n_0, n)
                offset = max(abs(n0), abs(m1))
                settled = relax_rate * (t - t0) >= math.log(offset / (controls.window_rtol * abs(m1)))
            if settled:
                break
    else:
        partial = SteadyOccupation(means[-1] if means else float("nan"), t, W, means,
                                   _aitken(means), exponent, stats=stats)
        raise ConvergenceError(f"not converged within t_max = {controls.t_max:g}", partial=partial)

    traj = None
    if keep_trajectory:
        rows = np.vstack([[t0, *_occupation_row(state.second_moments)], *parts])
        traj = Trajectory(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], MomentState(t, S),
                          converged_tail=means[-1])
    return SteadyOccupation(means[-1], t, W, means, _aitken(means), exponent, traj, stats)


def _commensurate_period(tones: ToneSet, tol=1e-9):
    """Common period of the drift in the frame of tone 0, or ``None`` for one tone."""
    offsets = tones.deltas - tones.deltas[0]
    if len(tones) == 1:
        return None
    base = float(np.min(np.abs(offsets[1:])))
    ratios = offsets / base
    if np.any(np.abs(ratios - np.round(ratios)) > tol * np.maximum(1, np.abs(ratios))):
        raise ParameterError("tone detunings are not commensurate; no periodic steady state")
    return 2 * math.pi / base


def _period_map(params, tones, period, rtol, atol):
    frame = tones.deltas[0]
    N = diffusion_matrix(params)

    def rhs(t, y):
        z = y.view(complex)
        Phi = z[:36].reshape(6, 6)
        Q = z[36:].reshape(6, 6)
        M, _ = drift_and_diffusion(t, params, tones, frame)
        MQ = M @ Q
        out = np.concatenate([(M @ Phi).ravel(), (MQ + MQ.T + N).ravel()])
        return out.view(float)

    y0 = np.concatenate([np.eye(6, dtype=complex).ravel(), np.zeros(36, dtype=complex)])
    sol = solve_ivp(rhs, (0.0, period), y0.view(float), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"period map integration failed: {sol.message}")
    z = sol.y[:, -1].copy().view(complex)
    return z[:36].reshape(6, 6), z[36:].reshape(6, 6)


def floquet_exponent(params: SystemParams, tones: ToneSet, rtol=1e-11, atol=1e-13) -> float:
    """Largest growth rate of the fluctuation amplitudes (negative means stable)."""
    period = _commensurate_period(tones)
    if period is None:
        M, _ = drift_and_diffusion(0.0, params, tones, tones.deltas[0])
        return float(np.max(np.linalg.eigvals(M).real))
    Phi, _ = _period_map(params, tones, period, rtol, atol)
    return float(np.max(np.log(np.abs(np.linalg.eigvals(Phi)))) / period)


@dataclass(frozen=True)
class PeriodicSteadyState:
    """Exact periodic steady state reached for ``t -> infinity`` (commensurate tones)."""

    n_b_mean: float
    n_c_mean: float
    n_a_mean: float
    n_b_range: tuple
    period: float | None
    floquet_exponent: float
    state: MomentState

    @property
    def stable(self) -> bool:
        return self.floquet_exponent < 0

    def to_dict(self):
        return {"n_b_mean": self.n_b_mean, "n_c_mean": self.n_c_mean, "n_a_mean": self.n_a_mean,
                "n_b_range": list(self.n_b_range), "period": self.period,
                "floquet_exponent": self.floquet_exponent, "stable": self.stable}


def periodic_steady_state(params: SystemParams, tones: ToneSet, n_avg=256,
                          rtol=1e-11, atol=1e-13) -> PeriodicSteadyState:
    """Solve for the asymptotic state directly instead of integrating to it.

    In the frame co-rotating with tone 0 the drift has period ``2 pi / delta``
    (cascaded tones). The one-period map ``S -> Phi S Phi^T + Q`` then has a
    unique fixed point when all Floquet multipliers lie inside the unit
    circle. A single tone reduces to a stationary Sylvester equation. The
    returned state is in the rotating frame (occupations are frame-free).
    Raises :class:`InstabilityError` for unstable systems.
    """
    frame = tones.deltas[0]
    N = diffusion_matrix(params)
    period = _commensurate_period(tones)
    if period is None:
        M, _ = drift_and_diffusion(0.0, params, tones, frame)
        exponent = float(np.max(np.linalg.eigvals(M).real))
        if exponent >= 0:
            raise InstabilityError(f"unstable: drift eigenvalue with real part {exponent:.6g}")
        S = solve_sylvester(M, M.T, -N)
        S = (S + S.T) / 2
        occ = _occupation_row(S)
        return PeriodicSteadyState(occ[0], occ[1], occ[2], (occ[0], occ[0]), None, exponent,
                                   MomentState(0.0, S))

    Phi, Q = _period_map(params, tones, period, rtol, atol)
    exponent = float(np.max(np.log(np.abs(np.linalg.eigvals(Phi)))) / period)
    if exponent >= 0:
        raise InstabilityError(f"unstable: largest Floquet exponent {exponent:.6g} >= 0")
    S0 = np.linalg.solve(np.eye(36) - np.kron(Phi, Phi), Q.ravel()).reshape(6, 6)
    S0 = (S0 + S0.T) / 2

    def rhs(t, y):
        S = y.view(complex).reshape(6, 6)
        M, _ = drift_and_diffusion(t, params, tones, frame)
        MS = M @ S
        return (MS + MS.T + N).ravel().view(float)

    ts = np.linspace(0.0, period, n_avg + 1)
    sol = solve_ivp(rhs, (0.0, period), S0.ravel().view(float), method="DOP853",
                    t_eval=ts, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"steady-state orbit integration failed: {sol.message}")
    Ss = sol.y.T.copy().view(complex).reshape(-1, 6, 6)
    n_b = (Ss[:, 1, 4].real - 1) / 2
    n_c = (Ss[:, 2, 5].real - 1) / 2
    n_a = (Ss[:, 0, 3].real - 1) / 2
    mean = [float(np.trapezoid(x, ts) / period) for x in (n_b, n_c, n_a)]
    return PeriodicSteadyState(mean[0], mean[1], mean[2], (float(n_b.min()), float(n_b.max())),
                               period, exponent, MomentState(0.0, S0))


def fit_decay_rate(traj: Trajectory, n_floor=0.0, decades=1.0) -> float:
    """Exponential rate of ``n_b - n_floor`` over its first ``decades`` of decay.

    Least-squares slope of ``log(n_b - n_floor)`` against time, restricted to
    samples until the excess first drops by ``10**decades``.
    """
    excess = traj.n_b - n_floor
    if excess[0] <= 0:
        raise ParameterError("trajectory starts at or below the floor")
    stop = np.nonzero(excess <= excess[0] * 10.0 ** -decades)[0]
    if stop.size == 0:
        raise ParameterError("trajectory does not cover the requested decay")
    sel = slice(0, int(stop[0]) + 1)
    t, y = traj.t[sel], np.log(np.maximum(excess[sel], 1e-300))
    slope = np.polyfit(t, y, 1)[0]
    return float(-slope)


__all__ = ["MomentState", "Trajectory", "DynamicsControls", "SteadyOccupation",
           "PeriodicSteadyState", "drift_and_diffusion", "diffusion_matrix", "evolve",
           "steady_occupation", "periodic_steady_state", "floquet_exponent",
           "fit_decay_rate", "fastest_frequency", "beat_period"]
