"""Shape optimisation with sensitivity reuse and threshold-triggered PROM rebuilds.

Between rebuilds the cost is the linear model ``L_b + grad_b . xi`` that
follows from ``eta ~ eta_0 + S xi``; a log barrier keeps iterates inside the
bounds. Once the local move reaches the threshold ``tau`` (max-norm) the
nominal mesh absorbs the move and a new PROM is built.
"""
from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .fem import Material, assemble_system_matrices
from .integrator import NewmarkSettings, newmark_solve_rom, opposite_sinusoids
from .reduction import reduce_model
from .rob import build_rob
from .shapes import InvalidShapeError, ShapeBasis, morph

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    pass


def window_indices(window):
    """1-based inclusive ``(n, N)`` to a 0-based slice."""
    n, N = window
    return slice(n - 1, N)


def cost(head_x, window=(96, 101)):
    """``L = -sum_i d_swim . (V eta_i)`` over the window, from the projected head displacement."""
    sl = window_indices(window)
    if sl.stop > len(head_x) or sl.start < 0 or window[0] > window[1]:
        raise ValueError("cost window outside trajectory")
    return -float(np.sum(head_x[sl]))


def cost_gradient(S, head_row, window=(96, 101)):
    """``-sum_i head_row . S_i`` over the window; S has shape (steps, m, m_xi)."""
    sl = window_indices(window)
    return -np.einsum("m,imk->k", head_row, S[sl])


def barrier(xi, bounds, mu):
    """Log barrier ``-mu sum [log(xi - lb) + log(ub - xi)]`` and its gradient.

    Returns ``(inf, nan)`` when xi is on or outside the bounds.
    """
    xi = np.asarray(xi, float)
    lo, hi = np.asarray(bounds, float).T
    if mu == 0:
        return 0.0, np.zeros_like(xi)
    if np.any(xi <= lo) or np.any(xi >= hi):
        return np.inf, np.full_like(xi, np.nan)
    val = -mu * float(np.sum(np.log(xi - lo) + np.log(hi - xi)))
    return val, -mu * (1.0 / (xi - lo) - 1.0 / (hi - xi))


@dataclass(frozen=True)
class OptimizationConfig:
    gamma: float = 1.0
    weights: tuple = None          # diagonal of W0; default from the first gradient
    mu: float = None               # default 1e-4 |L0|
    mu_decay: float = 0.5
    tau: float = 0.1
    tol: float = 1e-6              # on |Delta L| of the raw cost, relative to |L0|
    window: tuple = (96, 101)
    max_rebuilds: int = 10
    max_inner: int = 10
    max_backtracks: int = 8

    def __post_init__(self):
        if self.gamma <= 0 or self.tau <= 0:
            raise ValueError("gamma and tau must be positive")
        if self.window[0] >= self.window[1]:
            raise ValueError("cost window must satisfy n < N")


@dataclass
class Evaluation:
    """True (simulated) cost data at a build point."""

    cost: float
    grad: np.ndarray
    swim: float = 0.0
    swim_grad: np.ndarray = None
    volume: float = 1.0


@dataclass
class OptimizationResult:
    history: list = field(default_factory=list)
    xi: np.ndarray = None
    cost: float = None
    nominal_cost: float = None
    swim: float = None
    nominal_swim: float = None
    rebuilds: int = 0
    converged: bool = False

    @property
    def improvement(self):
        if not self.nominal_swim:
            return 1.0
        return self.swim / self.nominal_swim


def optimize(evaluate, bounds, config=OptimizationConfig()):
    """Run the outer loop.

    ``evaluate(xi)`` simulates at cumulative parameters ``xi`` (building a PROM
    there) and returns an :class:`Evaluation`. This is the seam used to
    inject analytic test problems.
    """
    bounds = np.asarray(bounds, float).reshape(-1, 2)
    mx = len(bounds)
    xi_b = np.zeros(mx)
    ev = evaluate(xi_b)
    res = OptimizationResult(nominal_cost=ev.cost, nominal_swim=ev.swim)
    res.history.append(_row(0, True, xi_b, ev.cost, ev.grad, ev.swim, ev.volume))
    if mx == 0:
        res.xi, res.cost, res.swim, res.converged = xi_b, ev.cost, ev.swim, True
        return res
    mu = config.mu if config.mu is not None else 1e-4 * abs(ev.cost)
    W0 = (np.asarray(config.weights, float) if config.weights is not None
          else np.full(mx, 0.5 * config.tau / max(np.max(np.abs(ev.grad)), 1e-300)))
    W = W0.copy()
    it = 0
    accepted = True
    scale = max(abs(ev.cost), 1e-300)
    for build in range(config.max_rebuilds):
        accepted = False
        for _ in range(config.max_backtracks):
            xi_loc, steps, n_upd = _inner(ev, xi_b, bounds, mu, W, config, it)
            if not np.any(xi_loc):
                break
            cand = xi_b + xi_loc
            try:
                ev_new = evaluate(cand)
            except (InvalidShapeError, RuntimeError) as exc:
                log.info("candidate %s rejected: %s", cand, exc)
                W *= 0.5
                continue
            f_old = ev.cost + barrier(xi_b, bounds, mu)[0]
            f_new = ev_new.cost + barrier(cand, bounds, mu)[0]
            if f_new <= f_old:
                for row in steps:
                    res.history.append(row)
                it += n_upd
                res.history.append(_row(it, True, cand, ev_new.cost, ev_new.grad, ev_new.swim, ev_new.volume))
                accepted = True
                break
            log.info("cost increased (%.6g -> %.6g); halving weights", f_old, f_new)
            W *= 0.5
        if not accepted:
            break
        res.rebuilds += 1
        delta = abs(ev_new.cost - ev.cost)
        xi_b, ev = cand, ev_new
        mu *= config.mu_decay
        W = np.minimum(2.0 * W, W0)
        if delta < config.tol * scale:
            res.converged = True
            break
    if not accepted:
        # no step length gives descent: the current build point is stationary
        log.info("no descent direction left after %d rebuilds", res.rebuilds)
        res.converged = True
    res.xi, res.cost, res.swim = xi_b, ev.cost, ev.swim
    return res


def _row(it, rebuilt, xi, L, grad, swim, volume):
    return dict(iter=it, rebuilt=rebuilt, xi=np.array(xi, float), cost=float(L),
                grad_norm=float(np.linalg.norm(grad)), swim=float(swim), normalized=float(swim / volume))


def _inner(ev, xi_b, bounds, mu, W, config, it0):
    """Gradient steps on the linear cost model plus barrier until the threshold is reached.

    Returns the local move, log rows of the linear-model iterates and the
    number of updates (the last one may be the threshold-crossing step).
    """
    xi = np.zeros_like(xi_b)
    rows = []
    Wk = W.copy()
    for k in range(config.max_inner):
        g = ev.grad + barrier(xi_b + xi, bounds, mu)[1]
        for _ in range(60):
            step = -config.gamma * Wk * g
            new = xi + step
            bad = ~((xi_b + new > bounds[:, 0]) & (xi_b + new < bounds[:, 1]))
            if not np.any(bad):
                break
            Wk[bad] *= 0.5
        else:
            break
        if np.max(np.abs(new)) >= config.tau:
            # the move leaves the trust region of the linearisation: rebuild there
            return new, rows, len(rows) + 1
        gain = (ev.grad @ xi + barrier(xi_b + xi, bounds, mu)[0]) - (ev.grad @ new + barrier(xi_b + new, bounds, mu)[0])
        xi = new
        L_lin = ev.cost + ev.grad @ xi
        swim = ev.swim + (ev.swim_grad @ xi if ev.swim_grad is not None else 0.0)
        rows.append(_row(it0 + k + 1, False, xi_b + xi, L_lin, g, swim, ev.volume))
        if gain < config.tol * abs(ev.cost):
            break
    return xi, rows, len(rows)


# --- fish problem -------------------------------------------------------------

@dataclass
class FishProblem:
    """Simulation-backed evaluation of cost and gradient at cumulative parameters."""

    mesh: object
    basis: ShapeBasis
    material: Material = Material()
    solid_density: float = 1000.0
    fluid_density: float = 1000.0
    rayleigh: tuple = (0.0, 0.01)
    muscle_stiffness: float = 5e4
    amplitude: float = 0.2
    frequency: float = 1.0
    settings: NewmarkSettings = NewmarkSettings()
    window: tuple = (96, 101)
    n_modes: int = 1
    static_md: bool = False
    evaluations: int = 0

    def build(self, xi):
        """Morph the nominal mesh by ``xi`` and build its PROM at local xi = 0."""
        nodes, _ = morph(self.mesh, self.basis, xi, enforce_bounds=False)
        mesh = self.mesh.with_nodes(nodes)
        dorsal = mesh.spine_elements[:, 3]
        basis = ShapeBasis(U=self.basis.U, bounds=self.basis.bounds - np.asarray(xi)[:, None],
                           names=self.basis.names, dorsal_rows=self.basis.dorsal_rows,
                           z0_max=mesh.nodes[dorsal, 2].copy())
        system = assemble_system_matrices(mesh, self.solid_density, self.material, self.rayleigh)
        rob = build_rob(mesh, system, basis, n_modes=self.n_modes, static_md=self.static_md)
        model = reduce_model(mesh, basis, rob.V, system, self.fluid_density, self.muscle_stiffness)
        return mesh, basis, model

    def __call__(self, xi):
        self.evaluations += 1
        mesh, _, model = self.build(np.asarray(xi, float))
        traj, sens = newmark_solve_rom(model, np.zeros(self.basis.n_params),
                                       opposite_sinusoids(self.amplitude, self.frequency),
                                       self.settings, with_sensitivity=True)
        L = cost(traj.head_x, self.window)
        g = cost_gradient(sens.S, model.head_row, self.window)
        swim_grad = np.einsum("m,mk->k", model.head_row, sens.S[-1])
        return Evaluation(cost=L, grad=g, swim=float(traj.head_x[-1]), swim_grad=swim_grad,
                          volume=mesh.muscle_volume)


def write_log_csv(result, names, path):
    cols = ["iter", "rebuilt"] + [f"xi_{n}" for n in names] + ["cost", "grad_norm", "swim_distance",
                                                                 "normalized_distance"]
    lines = [",".join(cols)]
    for r in result.history:
        vals = [str(r["iter"]), str(int(r["rebuilt"]))] + [f"{v:.17g}" for v in r["xi"]]
        vals += [f"{r[k]:.17g}" for k in ("cost", "grad_norm", "swim", "normalized")]
        lines.append(",".join(vals))
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
