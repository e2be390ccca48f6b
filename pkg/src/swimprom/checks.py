"""Oracle suite run by the ``check`` command."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import actuation
from .fom import FullOrderModel
from .integrator import newmark_solve_rom
from .internal import direct_internal_forces, tensor_polys, shape_gradients
from .fem import gamma_operator
from .mesh import tet_gradients
from .optimizer import cost, cost_gradient
from .pipeline import build_prom, settings_of, signals_of


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tol: float
    detail: str = ""

    @property
    def passed(self):
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name:<28s} error={self.error:.3e}  tol={self.tol:.1e}{extra}"


def _rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))


def check_l1_structure(L1=None):
    L1 = actuation.L1 if L1 is None else L1
    expected = np.zeros((6, 9, 9))
    for i, j, k in actuation._L1_ENTRIES:
        expected[i - 1, j - 1, k - 1] = 1.0
    count = int(np.count_nonzero(L1))
    err = float(np.abs(L1 - expected).max())
    rng = np.random.default_rng(4)
    for th in rng.normal(size=(10, 9)):
        err = max(err, float(np.abs(actuation.A1(th) - np.einsum("ijk,k->ij", L1, th)).max()))
    if count != 27:
        err = max(err, 1.0)
    return CheckResult("L1 structure", err, 1e-14, f"nonzeros={count}")


def check_internal_tensors(case, n_elem=5, draws=40, seed=0):
    rng = np.random.default_rng(seed)
    els = rng.choice(case.mesh.n_elements, size=min(n_elem, case.mesh.n_elements), replace=False)
    grads, vol = tet_gradients(case.mesh.nodes, case.mesh.tets[els])
    Ue = case.basis.U[case.mesh.element_dofs[els]]
    polys = tensor_polys(gamma_operator(grads), vol, shape_gradients(grads, Ue), case.material)
    err = 0.0
    scale = np.abs(case.mesh.nodes).max()
    for _ in range(draws):
        xi = rng.uniform(*case.basis.bounds.T) if case.basis.n_params else np.zeros(0)
        u = 0.05 * scale * rng.normal(size=(len(els), 12))
        ref = direct_internal_forces(grads, vol, case.material, Ue, xi, u)
        for e in range(len(els)):
            K = [sum(c[q][e] if q == 0 else np.tensordot(xi, c[q][e], 1) if q == 1
                     else np.tensordot(xi, np.tensordot(xi, c[q][e], 1), 1) for q in range(3))
                 for c in (polys["K2"], polys["K3"], polys["K4"])]
            f = K[0] @ u[e] + np.einsum("ijk,j,k->i", K[1], u[e], u[e]) \
                + np.einsum("ijkl,j,k,l->i", K[2], u[e], u[e], u[e])
            err = max(err, _rel(f, ref[e]))
    return CheckResult("internal tensor vs direct", err, 1e-9)


def check_actuation_fd(case, seed=1):
    rng = np.random.default_rng(seed)
    data = actuation.muscle_data(case.mesh, case.mesh.muscle_left, case.config.actuation.stiffness)
    ne = len(data.elements)
    ux, u, d = 1e-2 * rng.normal(size=(3, ne, 12))
    f = actuation.actuation_force(data, ux, u, 0.3)
    h = 1e-6
    fd = (actuation.muscle_energy(data, ux, u + h * d, 0.3) - actuation.muscle_energy(data, ux, u - h * d, 0.3)) / (2 * h)
    return CheckResult("actuation force vs energy FD", _rel(np.sum(f * d, axis=1), fd), 1e-7)


def _random_states(model, rng, n):
    for _ in range(n):
        yield (1e-2 * rng.normal(size=model.m), 1e-1 * rng.normal(size=model.m), rng.normal(size=model.m),
               0.2 * rng.normal(size=2))


def check_projection(case, model, rob, draws=10, seed=2):
    rng = np.random.default_rng(seed)
    xi = 0.5 * rng.uniform(*case.basis.bounds.T) if case.basis.n_params else np.zeros(0)
    fom = FullOrderModel(case.mesh, case.basis, case.system, case.config.fluid.density,
                         case.config.actuation.stiffness, xi=xi, internal="truncated")
    V = rob.V
    err = 0.0
    for e, ed, edd, a in _random_states(model, rng, draws):
        err = max(err, _rel(model.residual(e, ed, edd, xi, a), V.T @ fom.residual(V @ e, V @ ed, V @ edd, a)))
    return CheckResult("projection identity", err, 1e-9)


def check_reduced_jacobians(case, model, draws=5, seed=3):
    rng = np.random.default_rng(seed)
    h = 1e-6
    err = 0.0
    for e, ed, edd, a in _random_states(model, rng, draws):
        xi = rng.uniform(-0.1, 0.1, model.m_xi)
        args = [e, ed, edd, xi]
        J = model.jacobians(*args, a)
        for k in range(4):
            d = rng.normal(size=len(args[k]))
            if not len(d):
                continue
            ap, am = list(args), list(args)
            ap[k], am[k] = args[k] + h * d, args[k] - h * d
            fd = (model.residual(*ap, a) - model.residual(*am, a)) / (2 * h)
            err = max(err, _rel(J[k] @ d, fd))
    return CheckResult("reduced Jacobians vs FD", err, 1e-6)


def check_sensitivity(case, model, eps=1e-5):
    settings, signals = settings_of(case.config), signals_of(case.config)
    xi0 = np.zeros(model.m_xi)
    traj, sens = newmark_solve_rom(model, xi0, signals, settings, with_sensitivity=True)
    err_s, err_g = 0.0, 0.0
    window = tuple(case.config.optimizer.window)
    grad = cost_gradient(sens.S, model.head_row, window)
    fd_grad = np.zeros(model.m_xi)
    for j in range(model.m_xi):
        e = np.zeros(model.m_xi)
        e[j] = eps
        tp = newmark_solve_rom(model, xi0 + e, signals, settings)
        tm = newmark_solve_rom(model, xi0 - e, signals, settings)
        fd = (tp.q - tm.q) / (2 * eps)
        err_s = max(err_s, _rel(sens.S[:, :, j], fd))
        fd_grad[j] = (cost(tp.head_x, window) - cost(tm.head_x, window)) / (2 * eps)
    err_g = _rel(grad, fd_grad) if model.m_xi else 0.0
    return [CheckResult("trajectory sensitivity vs FD", err_s, 1e-4),
            CheckResult("cost gradient vs FD", err_g, 1e-3)]


def run_checks(case, L1=None):
    """Run every oracle; ``L1`` replaces the tabulated tensor (negative-control hook)."""
    results = [check_l1_structure(L1), check_internal_tensors(case), check_actuation_fd(case)]
    rob, model, _ = build_prom(case)
    results += [check_projection(case, model, rob), check_reduced_jacobians(case, model)]
    results += check_sensitivity(case, model)
    return results
