"""Full-order residual and tangents, evaluated element by element."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .actuation import assemble_muscle
from .fem import assemble_matrix, assemble_vector, svk_forces, svk_tangents
from .hydro import SpineSet, direct_drag, drag_taylor_tensors, eval_drag, reactive_forces
from .internal import direct_internal_forces
from .mesh import tet_gradients


class FullOrderModel:
    """Full-order equations of motion at a fixed shape ``xi``.

    ``internal="exact"`` uses SVK on the morphed mesh and the exact drag
    coefficient; ``"truncated"`` uses the polynomial forces that the reduced
    model projects, which makes it the projection oracle.
    M and C are those of ``system`` (the nominal mesh).
    """

    def __init__(self, mesh, basis, system, rho, muscle_stiffness, xi=None, internal="exact",
                 expansion_order=1):
        if internal not in ("exact", "truncated"):
            raise ValueError("internal must be 'exact' or 'truncated'")
        self.mesh, self.basis, self.system = mesh, basis, system
        self.rho = float(rho)
        self.xi = np.zeros(basis.n_params) if xi is None else np.asarray(xi, float)
        self.internal = internal
        self.expansion_order = expansion_order
        self.free = mesh.free_dofs
        self.u_xi = basis.U @ self.xi if basis.n_params else np.zeros(mesh.n_dofs)
        self.x_ref = mesh.nodes.ravel() + self.u_xi
        self.edofs = mesh.element_dofs
        if internal == "exact":
            self.grads, self.vol = tet_gradients(self.x_ref.reshape(-1, 3), mesh.tets)
        else:
            self.grads, self.vol = tet_gradients(mesh.nodes, mesh.tets)
            self.Ue = basis.U[self.edofs]
        self.spine = SpineSet.from_mesh(mesh, basis)
        self.drag = drag_taylor_tensors(mesh, basis, rho)
        self.muscles = [assemble_muscle(mesh, mesh.muscle_left, muscle_stiffness, "left"),
                        assemble_muscle(mesh, mesh.muscle_right, muscle_stiffness, "right")]
        self.head_dofs = 3 * mesh.head_node + np.arange(3)

    @property
    def n(self):
        return self.mesh.n_dofs

    def internal_force(self, u):
        ue = u[self.edofs]
        if self.internal == "exact":
            fe = svk_forces(self.grads, self.vol, ue, self.system.material)
        else:
            fe = direct_internal_forces(self.grads, self.vol, self.system.material, self.Ue, self.xi, ue,
                                        self.expansion_order)
        return assemble_vector(self.edofs, fe, self.n)

    def internal_tangent(self, u):
        if self.internal != "exact":
            raise NotImplementedError("tangent only available for the exact model")
        ke = svk_tangents(self.grads, self.vol, u[self.edofs], self.system.material)
        return assemble_matrix(self.edofs, ke, self.n)

    def drag_force(self, u_dot):
        if self.internal == "exact":
            return direct_drag(self.mesh, self.basis, self.rho, self.xi, u_dot)
        return eval_drag(self.drag, self.xi, u_dot)

    def reactive_force(self, u, u_dot, u_ddot):
        """Spine plus tail forces."""
        return reactive_forces(self.spine, self.rho, self.x_ref + u, u_dot, u_ddot, self.xi)

    def actuation_force(self, u, a):
        w = u + self.u_xi
        return sum(ai * (gm.b + gm.K @ w) for ai, gm in zip(a, self.muscles))

    def residual(self, u, u_dot, u_ddot, a):
        """Full-size residual; rows of constrained DOFs are not meaningful."""
        return (self.system.M @ u_ddot + self.system.C @ u_dot + self.internal_force(u)
                - self.reactive_force(u, u_dot, u_ddot)
                - self.drag_force(u_dot) - self.actuation_force(u, a))

    def jacobians(self, u, u_dot, u_ddot, a):
        x = self.x_ref + u
        _, Ku, Cu, Mu = reactive_forces(self.spine, self.rho, x, u_dot, u_ddot, self.xi, with_jacobians=True)
        Kt = self.internal_tangent(u) - Ku - sum(ai * gm.K for ai, gm in zip(a, self.muscles))
        # drag: f = q v_h^2 with v_h = d . u_dot[head]
        unit = np.zeros(self.n)
        unit[self.head_dofs] = self.mesh.d_swim
        q = self.drag_force(unit)
        vh = self.mesh.d_swim @ u_dot[self.head_dofs]
        rows = np.flatnonzero(q)
        vals = 2 * vh * q[rows][:, None] * self.mesh.d_swim[None, :]
        Dd = sp.csr_matrix((vals.ravel(), (np.repeat(rows, 3), np.tile(self.head_dofs, len(rows)))),
                           shape=(self.n, self.n))
        Ct = self.system.C - Cu - Dd
        Mt = self.system.M - Mu
        return Kt.tocsr(), Ct.tocsr(), Mt.tocsr()
