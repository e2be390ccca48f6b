"""Newmark time integration with Newton iterations on the acceleration and
direct-differentiation sensitivities.
"""
from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .actuation import actuation_signal

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Newton iterations did not converge."""

    def __init__(self, step, residual, message=None):
        self.step, self.residual = step, residual
        super().__init__(message or f"Newton failed at step {step} (residual {residual:.3e})")


@dataclass(frozen=True)
class NewmarkSettings:
    dt: float = 0.02
    horizon: float = 2.0
    beta: float = 0.25
    gamma: float = 0.5
    newton_tol: float = 1e-8
    max_iters: int = 25

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if not (0 < self.beta <= 0.5 and 0 < self.gamma <= 1):
            raise ValueError("invalid Newmark parameters")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    head_x: np.ndarray = None
    tail_y: np.ndarray = None


@dataclass
class Sensitivity:
    S: np.ndarray      # (steps+1, m, m_xi)
    Sd: np.ndarray
    Sdd: np.ndarray


def opposite_sinusoids(amplitude=0.2, frequency=1.0):
    """Left/right activation pair in antiphase."""
    def signals(t):
        return np.array([actuation_signal(t, amplitude, frequency, "left"),
                         actuation_signal(t, amplitude, frequency, "right")])
    return signals


# --- system adapters ----------------------------------------------------------

class ReducedSystem:
    """Reduced equations of motion at fixed ``xi``."""

    def __init__(self, model, xi, signals):
        self.model, self.xi, self.signals = model, np.asarray(xi, float), signals
        self.n = model.m

    def residual(self, q, qd, qdd, t):
        return self.model.residual(q, qd, qdd, self.xi, self.signals(t))

    def jacobians(self, q, qd, qdd, t):
        return self.model.jacobians(q, qd, qdd, self.xi, self.signals(t))

    def force_scale(self, q, t):
        return np.linalg.norm(self.model.actuation_force(q, self.xi, self.signals(t)))

    @staticmethod
    def solve(A, b):
        return np.linalg.solve(A, b)

    def outputs(self, q):
        return self.model.head_displacement(q), self.model.tail_lateral(q)


class FullSystem:
    """Full-order equations restricted to free DOFs."""

    def __init__(self, fom, signals):
        self.fom, self.signals = fom, signals
        self.free = fom.free
        self.n = len(self.free)

    def _full(self, v):
        out = np.zeros(self.fom.n)
        out[self.free] = v
        return out

    def residual(self, q, qd, qdd, t):
        return self.fom.residual(self._full(q), self._full(qd), self._full(qdd), self.signals(t))[self.free]

    def jacobians(self, q, qd, qdd, t):
        K, C, M = self.fom.jacobians(self._full(q), self._full(qd), self._full(qdd), self.signals(t))
        f = self.free
        return K[f][:, f], C[f][:, f], M[f][:, f]

    def force_scale(self, q, t):
        return np.linalg.norm(self.fom.actuation_force(self._full(q), self.signals(t))[self.free])

    @staticmethod
    def solve(A, b):
        return spla.spsolve(sp.csc_matrix(A), b)

    def outputs(self, q):
        m = self.fom.mesh
        full = np.zeros((len(q), self.fom.n))
        full[:, self.free] = q
        return full[:, 3 * m.head_node:3 * m.head_node + 3] @ m.d_swim, full[:, 3 * m.tail_node + 1]


# --- Newmark ------------------------------------------------------------------

def _newton(system, q0, qd0, qdd_guess, t, settings, step):
    dt, b, g = settings.dt, settings.beta, settings.gamma
    qp = q0 + dt * qd0 + dt * dt * (0.5 - b) * qdd_guess[1]
    vp = qd0 + dt * (1 - g) * qdd_guess[1]
    a = qdd_guess[0].copy()
    for it in range(settings.max_iters + 1):
        q, v = qp + b * dt * dt * a, vp + g * dt * a
        r = system.residual(q, v, a, t)
        rn = np.linalg.norm(r)
        if not np.isfinite(rn):
            raise SolverError(step, rn)
        if rn <= settings.newton_tol * max(1.0, system.force_scale(q, t)):
            return q, v, a, it, rn
        if it == settings.max_iters:
            break
        K, C, M = system.jacobians(q, v, a, t)[:3]
        a = a - system.solve(M + g * dt * C + b * dt * dt * K, r)
    raise SolverError(step, rn)


def newmark_solve(system, settings=NewmarkSettings(), with_sensitivity=False, q0=None, qd0=None):
    """Integrate ``system`` (from rest unless ``q0``/``qd0`` are given).

    With ``with_sensitivity`` the derivative ``S = dq/dxi`` is propagated
    alongside; initial conditions are taken as independent of xi.
    """
    N, dt, b, g = settings.n_steps, settings.dt, settings.beta, settings.gamma
    n = system.n
    t = dt * np.arange(N + 1)
    q, qd, qdd = np.zeros((3, N + 1, n))
    if q0 is not None:
        q[0] = q0
    if qd0 is not None:
        qd[0] = qd0
    its, res = np.zeros(N + 1, dtype=int), np.zeros(N + 1)
    # initial acceleration from the residual at t = 0
    r0 = system.residual(q[0], qd[0], qdd[0], 0.0)
    jac = system.jacobians(q[0], qd[0], qdd[0], 0.0)
    qdd[0] = -system.solve(jac[2], r0)
    res[0] = np.linalg.norm(system.residual(q[0], qd[0], qdd[0], 0.0))
    sens = None
    if with_sensitivity:
        mx = jac[3].shape[1]
        S, Sd, Sdd = np.zeros((3, N + 1, n, mx))
        if mx:
            jac = system.jacobians(q[0], qd[0], qdd[0], 0.0)
            Sdd[0] = -np.linalg.solve(_dense(jac[2]), jac[3])
        sens = Sensitivity(S, Sd, Sdd)
    for i in range(N):
        q[i + 1], qd[i + 1], qdd[i + 1], its[i + 1], res[i + 1] = _newton(
            system, q[i], qd[i], (qdd[i], qdd[i]), t[i + 1], settings, i + 1)
        if sens is not None and sens.S.shape[2]:
            K, C, M, Rx = system.jacobians(q[i + 1], qd[i + 1], qdd[i + 1], t[i + 1])
            Sp = sens.S[i] + dt * sens.Sd[i] + dt * dt * (0.5 - b) * sens.Sdd[i]
            Sdp = sens.Sd[i] + dt * (1 - g) * sens.Sdd[i]
            J = _dense(M + g * dt * C + b * dt * dt * K)
            sens.Sdd[i + 1] = -np.linalg.solve(J, Rx + _dense(K) @ Sp + _dense(C) @ Sdp)
            sens.S[i + 1] = Sp + b * dt * dt * sens.Sdd[i + 1]
            sens.Sd[i + 1] = Sdp + g * dt * sens.Sdd[i + 1]
    traj = Trajectory(t=t, q=q, qd=qd, qdd=qdd, iterations=its, residuals=res)
    if hasattr(system, "outputs"):
        traj.head_x, traj.tail_y = system.outputs(q)
    return (traj, sens) if with_sensitivity else traj


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def newmark_solve_rom(model, xi, signals, settings=NewmarkSettings(), with_sensitivity=False):
    return newmark_solve(ReducedSystem(model, xi, signals), settings, with_sensitivity)


def fom_solve(fom, signals, settings=NewmarkSettings()):
    return newmark_solve(FullSystem(fom, signals), settings)


def write_trajectory_csv(traj, path):
    """Columns ``t, head_x, tail_y, eta_0..`` at 17 significant digits, written atomically."""
    m = traj.q.shape[1]
    header = ",".join(["t", "head_x", "tail_y"] + [f"eta_{k}" for k in range(m)])
    data = np.column_stack([traj.t, traj.head_x, traj.tail_y, traj.q])
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        np.savetxt(fh, data, delimiter=",", header=header, comments="", fmt="%.17g")
    os.replace(tmp, path)
