"""Brute-force density-matrix integration on a truncated Fock space.

This is the independent check of :mod:`omit_cool.dynamics`: the same
linearized Hamiltonian and Lindblad dissipators, but evolved as a dense
``D x D`` density matrix with a generic adaptive solver. It only runs at
desk scale (small occupations, ``D = d_a d_b d_c <= 512``).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import (IntegrationError, ParameterError, PhysicalityError, SystemParams,
                   ToneSet)
from .dynamics import DynamicsControls, MomentState, Trajectory, evolve


@dataclass(frozen=True)
class FockConfig:
    """Truncation and step control of an oracle run.

    ``tail_tol`` bounds the population of the highest kept Fock level of the
    initial state in each mode; ``dim_budget`` bounds ``d_a d_b d_c``.
    """

    dims: tuple
    t_end: float
    output_stride: float | None = None
    max_step: float | None = None
    rtol: float = 1e-8
    atol: float = 1e-10
    dim_budget: int = 512
    tail_tol: float = 1e-6
    trace_tol: float = 1e-8
    hermiticity_tol: float = 1e-10
    positivity_tol: float = 1e-6

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise ParameterError(f"dims must be three integers >= 2, got {self.dims!r}")
        if int(np.prod(dims)) > self.dim_budget:
            raise ParameterError(f"total dimension {int(np.prod(dims))} exceeds budget {self.dim_budget}")
        if not self.t_end > 0:
            raise ParameterError("t_end must be positive")
        object.__setattr__(self, "dims", dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["dims"] = list(self.dims)
        return d


def _lowering(d):
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


class _Operators:
    """Dense mode operators on ``H_a (x) H_b (x) H_c``."""

    def __init__(self, dims):
        self.dims = dims
        eye = [np.eye(d) for d in dims]
        self.low = []
        for m, d in enumerate(dims):
            factors = list(eye)
            factors[m] = _lowering(d)
            op = factors[0]
            for f in factors[1:]:
                op = np.kron(op, f)
            self.low.append(op.astype(complex))
        self.D = int(np.prod(dims))

    @property
    def a(self):
        return self.low[0]

    @property
    def b(self):
        return self.low[1]

    @property
    def c(self):
        return self.low[2]


def _sandwich(tensor, axis, raising):
    """``L rho L^+`` for a single-mode ladder operator, by index shifting.

    ``tensor`` is ``rho`` reshaped to ``(d_a, d_b, d_c, d_a, d_b, d_c)``;
    the truncation matches the dense ladder matrices exactly.
    """
    d = tensor.shape[axis]
    out = np.zeros_like(tensor)
    src = [slice(None)] * 6
    dst = [slice(None)] * 6
    n = np.arange(d, dtype=float)
    if raising:
        # (L rho L^+)[n, m] = sqrt(n m) rho[n-1, m-1]
        src[axis] = src[axis + 3] = slice(0, d - 1)
        dst[axis] = dst[axis + 3] = slice(1, d)
    else:
        # (L rho L^+)[n, m] = sqrt((n+1)(m+1)) rho[n+1, m+1]
        src[axis] = src[axis + 3] = slice(1, d)
        dst[axis] = dst[axis + 3] = slice(0, d - 1)
    w = np.sqrt(n[1:])
    shape_r = [1] * 6
    shape_r[axis] = d - 1
    shape_c = [1] * 6
    shape_c[axis + 3] = d - 1
    out[tuple(dst)] = tensor[tuple(src)] * w.reshape(shape_r) * w.reshape(shape_c)
    return out


def _thermal_diag(n, d):
    if n == 0:
        p = np.zeros(d)
        p[0] = 1.0
        return p
    q = n / (n + 1)
    p = (1 - q) * q ** np.arange(d)
    return p


class FockModel:
    """Lindblad generator of the linearized dynamics on a truncated space."""

    def __init__(self, params: SystemParams, tones: ToneSet, dims):
        self.params = params
        self.tones = tones
        self.ops = ops = _Operators(tuple(dims))
        a, b, c = ops.a, ops.b, ops.c
        ad = a.conj().T
        p = params
        H0 = p.omega_m * b.conj().T @ b + p.omega_mc * c.conj().T @ c
        xb = b + b.conj().T
        xc = c + c.conj().T
        # H(t) = H0 + G A + G* A^+ + Gc C + Gc* C^+
        self.A = ad @ xb
        self.C = ad @ xc
        self.jumps = [(p.kappa, a), (p.gamma * (p.n_th + 1), b), (p.gamma * p.n_th, b.conj().T),
                      (p.gamma_c * (p.n_c_th + 1), c), (p.gamma_c * p.n_c_th, c.conj().T)]
        self.jumps = [(r, L) for r, L in self.jumps if r > 0]
        # same jumps as (rate, mode axis, raising?) for the O(D^2) sandwich
        self.jump_axes = [(r, axis, raising) for r, axis, raising in
                          ((p.kappa, 0, False), (p.gamma * (p.n_th + 1), 1, False),
                           (p.gamma * p.n_th, 1, True), (p.gamma_c * (p.n_c_th + 1), 2, False),
                           (p.gamma_c * p.n_c_th, 2, True)) if r > 0]
        decay = sum(r * L.conj().T @ L for r, L in self.jumps)
        self.H0_eff = H0 - 0.5j * decay

    def couplings(self, t):
        phase = np.sum(self.tones.alphas * np.exp(-1j * self.tones.deltas * t))
        return self.params.g * phase, self.params.g_c * phase

    def hamiltonian(self, t):
        G, Gc = self.couplings(t)
        H0 = (self.H0_eff + self.H0_eff.conj().T) / 2
        return (H0 + G * self.A + np.conj(G) * self.A.conj().T
                + Gc * self.C + np.conj(Gc) * self.C.conj().T)

    def generator(self, t, rho):
        """``d rho / dt`` of the Lindblad equation."""
        G, Gc = self.couplings(t)
        H_eff = (self.H0_eff + G * self.A + np.conj(G) * self.A.conj().T
                 + Gc * self.C + np.conj(Gc) * self.C.conj().T)
        K = -1j * (H_eff @ rho)
        out = K + K.conj().T
        dims = self.ops.dims
        tensor = rho.reshape(dims + dims)
        for rate, axis, raising in self.jump_axes:
            out += rate * _sandwich(tensor, axis, raising).reshape(rho.shape)
        return out

    def thermal_state(self, n_a, n_b, n_c):
        diag = np.ones(1)
        for n, d in zip((n_a, n_b, n_c), self.ops.dims):
            diag = np.kron(diag, _thermal_diag(n, d))
        diag = diag / diag.sum()
        return np.diag(diag).astype(complex)

    def moments(self, rho) -> np.ndarray:
        """Symmetrized moment matrix ``Tr[{v_k, v_l} rho]`` (linear in ``rho``)."""
        ops = self.ops.low + [L.conj().T for L in self.ops.low]
        S = np.empty((6, 6), dtype=complex)
        for k in range(6):
            for l in range(k, 6):
                sym = ops[k] @ ops[l] + ops[l] @ ops[k]
                S[k, l] = S[l, k] = np.trace(sym @ rho)
        return S

    def normal_moments(self, rho) -> np.ndarray:
        """Moment matrix rebuilt from normally ordered expectations.

        Uses ``{o, o+} = 2 o+ o + 1``, which holds in the full space but not
        for truncated ladder matrices, so the occupations agree with
        :meth:`occupations` exactly.
        """
        ops = self.ops.low + [L.conj().T for L in self.ops.low]
        S = np.empty((6, 6), dtype=complex)
        for k in range(6):
            for l in range(k, 6):
                # creators left of annihilators
                first, second = (ops[l], ops[k]) if (k < 3 <= l) else (ops[k], ops[l])
                S[k, l] = S[l, k] = 2 * np.trace(first @ second @ rho) + (l == k + 3)
        return S

    def occupations(self, rho):
        return tuple(float(np.real(np.trace(L.conj().T @ L @ rho))) for L in self.ops.low)


def tail_probabilities(occupations, dims):
    """Thermal population beyond the truncation, ``(n/(n+1))**d``, per mode."""
    return tuple(float((n / (n + 1)) ** d) for n, d in zip(occupations, dims))


@dataclass
class FockTrajectory(Trajectory):
    """Oracle trajectory with density-matrix diagnostics."""

    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0


def evolve_fock(params: SystemParams, tones: ToneSet, fock: FockConfig,
                occupations=None) -> FockTrajectory:
    """Evolve a thermal product state and record ``n_b``, ``n_c``, ``n_a``.

    ``occupations`` are the initial ``(n_a, n_b, n_c)``; default vacuum
    cavity and the thermal occupations of ``params``. Raises
    :class:`ParameterError` if the initial truncation tail exceeds
    ``tail_tol`` and :class:`PhysicalityError` if trace, Hermiticity or
    positivity drift beyond their tolerances at a sample.
    """
    if occupations is None:
        occupations = (0.0, params.n_th, params.n_c_th)
    tails = tail_probabilities(occupations, fock.dims)
    if max(tails) > fock.tail_tol:
        raise ParameterError(f"truncation too small: tail probabilities {tails} exceed {fock.tail_tol:g}")

    model = FockModel(params, tones, fock.dims)
    D = model.ops.D
    rho0 = model.thermal_state(*occupations)
    stride = fock.output_stride or fock.t_end / 100
    n_out = int(round(fock.t_end / stride))
    times = np.linspace(0.0, n_out * stride, n_out + 1)
    if times[-1] < fock.t_end:
        times = np.append(times, fock.t_end)
    max_step = fock.max_step
    if max_step is None:
        max_step = 2 * np.pi / (np.max(np.abs(tones.deltas)) + params.omega_mc) / 20

    def rhs(t, y):
        rho = y.view(complex).reshape(D, D)
        return model.generator(t, rho).ravel().view(float)

    sol = solve_ivp(rhs, (0.0, times[-1]), rho0.ravel().view(float), method="RK45",
                    t_eval=times, rtol=fock.rtol, atol=fock.atol, max_step=max_step)
    if not sol.success:
        raise IntegrationError(f"oracle integration failed: {sol.message}")

    rows, trace_err, herm_err, min_eig = [], 0.0, 0.0, np.inf
    rho = rho0
    for k, t in enumerate(sol.t):
        rho = sol.y[:, k].copy().view(complex).reshape(D, D)
        trace_err = max(trace_err, abs(np.trace(rho) - 1))
        herm_err = max(herm_err, float(np.max(np.abs(rho - rho.conj().T))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]))
        n_a, n_b, n_c = model.occupations(rho)
        rows.append((t, n_b, n_c, n_a))
    rows = np.array(rows)
    traj = FockTrajectory(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3],
                          MomentState(sol.t[-1], model.moments(rho)),
                          stats={"rhs_evaluations": int(sol.nfev), "dimension": D},
                          max_trace_error=float(trace_err), max_hermiticity_error=herm_err,
                          min_eigenvalue=min_eig)
    problems = []
    if trace_err > fock.trace_tol:
        problems.append(f"trace drift {trace_err:.3g}")
    if herm_err > fock.hermiticity_tol:
        problems.append(f"Hermiticity error {herm_err:.3g}")
    if min_eig < -fock.positivity_tol:
        problems.append(f"negative eigenvalue {min_eig:.3g}")
    if problems:
        err = PhysicalityError("oracle state failed checks: " + ", ".join(problems)
                               + " (truncation or step failure)")
        err.trajectory = traj
        raise err
    return traj


@dataclass
class OracleComparison:
    """Oracle and covariance ``n_b(t)`` on a common time grid."""

    t: np.ndarray
    n_b_oracle: np.ndarray
    n_b_covariance: np.ndarray
    dims: tuple
    oracle: FockTrajectory

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.n_b_oracle - self.n_b_covariance) / np.abs(self.n_b_covariance)

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_error))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "n_b_oracle", "n_b_covariance", "rel_err"])
            for row in zip(self.t, self.n_b_oracle, self.n_b_covariance, self.relative_error):
                writer.writerow([format(float(v), ".17g") for v in row])

    def summary(self) -> dict:
        return {"dims": list(self.dims), "max_relative_error": self.max_relative_error,
                "max_trace_error": self.oracle.max_trace_error,
                "max_hermiticity_error": self.oracle.max_hermiticity_error,
                "min_eigenvalue": self.oracle.min_eigenvalue}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def compare(params: SystemParams, tones: ToneSet, fock: FockConfig, occupations=None,
            controls: DynamicsControls | None = None) -> OracleComparison:
    """Run oracle and covariance dynamics from the same initial moments.

    The covariance run starts from the normally ordered moments of the
    truncated initial density matrix, so both routes share ``n_b(0)`` and the
    remaining discrepancy is dynamical truncation.
    """
    oracle = evolve_fock(params, tones, fock, occupations)
    if occupations is None:
        occupations = (0.0, params.n_th, params.n_c_th)
    model = FockModel(params, tones, fock.dims)
    S0 = model.normal_moments(model.thermal_state(*occupations))
    controls = controls or DynamicsControls(rtol=1e-11, atol=1e-13)
    cov_n = np.empty_like(oracle.t)
    cov_n[0] = MomentState(0.0, S0).n_b
    # sample the covariance run on exactly the oracle grid
    state = MomentState(0.0, S0)
    for k in range(1, len(oracle.t)):
        traj = evolve(params, tones, state, t_end=oracle.t[k], controls=controls)
        state = traj.final
        cov_n[k] = traj.n_b[-1]
    return OracleComparison(oracle.t, oracle.n_b, cov_n, fock.dims, oracle)
