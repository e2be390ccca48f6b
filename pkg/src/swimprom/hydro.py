"""Reactive (elongated-body) thrust and form drag on the swimmer mesh.

Spine forces act on 3-vectors built from the aft and fore spine node of each
spine element: ``b = B x`` (fore minus aft position), ``v = A u_dot`` (aft
node velocity). The resulting 3-vector force is applied at the aft node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .shapes import InvalidShapeError

# +90 degrees about the vertical axis
ROTATION = np.array([[0.0, -1.0, 0.0],
                     [1.0, 0.0, 0.0],
                     [0.0, 0.0, 1.0]])


def virtual_mass(rho, z0_max, U_max, xi):
    """Added fluid mass per unit length of a cross-section of depth ``2 (z0 + U xi)``."""
    xi = np.asarray(xi, dtype=float)
    depth = 2.0 * (np.asarray(z0_max, dtype=float) + (np.asarray(U_max) @ xi if xi.size else 0.0))
    if np.any(depth < 0):
        raise InvalidShapeError("negative cross-section depth")
    return np.pi / 4.0 * rho * depth ** 2


@dataclass(frozen=True)
class SpineElement:
    """Element-level operators of one spine element (12 element DOFs)."""

    A: np.ndarray       # (3, 12) aft node selector
    B: np.ndarray       # (3, 12) fore minus aft
    w: float            # 1 / nominal segment length
    z0_max: float
    U_max: np.ndarray   # row of U for the matched dorsal node's vertical DOF
    R: np.ndarray = ROTATION


def spine_element(mesh, basis, index):
    """Build the element operators for spine element ``index``."""
    e, aft, fore, _ = mesh.spine_elements[index]
    local = list(mesh.tets[e])
    A = np.zeros((3, 12))
    B = np.zeros((3, 12))
    ia, jf = local.index(aft), local.index(fore)
    A[:, 3 * ia:3 * ia + 3] = np.eye(3)
    B[:, 3 * jf:3 * jf + 3] = np.eye(3)
    B[:, 3 * ia:3 * ia + 3] -= np.eye(3)
    w = 1.0 / np.linalg.norm(mesh.nodes[fore] - mesh.nodes[aft])
    return SpineElement(A=A, B=B, w=w, z0_max=float(basis.z0_max[index]),
                        U_max=basis.U_max[index].copy())


def tail_force(el, rho, x0, u_xi, u, u_dot, xi=()):
    """Element tail force ``1/2 m w^3 [(A u_dot) . R B x]^2 B x`` scattered to the aft node."""
    m = virtual_mass(rho, el.z0_max, el.U_max, xi)
    x = x0 + u_xi + u
    b = el.B @ x
    s = (el.A @ u_dot) @ (el.R @ b)
    return el.A.T @ (0.5 * m * el.w ** 3 * s ** 2 * b)


def spine_force(el, rho, x0, u_xi, u, u_dot, u_ddot, xi=()):
    """Element spine force: negative rate of the transverse fluid momentum."""
    m = virtual_mass(rho, el.z0_max, el.U_max, xi)
    x = x0 + u_xi + u
    Rb = el.R @ (el.B @ x)
    Rbd = el.R @ (el.B @ u_dot)
    v = el.A @ u_dot
    acc = el.A @ u_ddot
    F = (acc @ Rb) * Rb + (v @ Rbd) * Rb + (v @ Rb) * Rbd
    return el.A.T @ (-m * el.w * F)


def spine_momentum(el, rho, x0, u_xi, u, u_dot, xi=()):
    """Transverse fluid momentum ``m w (A u_dot . R B x) R B x`` carried by the element."""
    m = virtual_mass(rho, el.z0_max, el.U_max, xi)
    Rb = el.R @ (el.B @ (x0 + u_xi + u))
    return m * el.w * ((el.A @ u_dot) @ Rb) * Rb


# --- vectorised full-order evaluation --------------------------------------

@dataclass(frozen=True)
class SpineSet:
    """All spine elements of a mesh in global-DOF form."""

    aft_dofs: np.ndarray    # (ns, 3)
    fore_dofs: np.ndarray   # (ns, 3)
    w: np.ndarray           # (ns,)
    z0_max: np.ndarray
    U_max: np.ndarray       # (ns, m_xi)
    n_dofs: int

    @classmethod
    def from_mesh(cls, mesh, basis):
        aft, fore = mesh.spine_elements[:, 1], mesh.spine_elements[:, 2]
        w = 1.0 / np.linalg.norm(mesh.nodes[fore] - mesh.nodes[aft], axis=1)
        return cls(aft_dofs=3 * aft[:, None] + np.arange(3), fore_dofs=3 * fore[:, None] + np.arange(3),
                   w=w, z0_max=basis.z0_max.copy(), U_max=basis.U_max.copy(), n_dofs=mesh.n_dofs)


def reactive_forces(spine, rho, x, u_dot, u_ddot, xi=(), with_jacobians=False):
    """Global tail + spine force vector, optionally with its u, u_dot, u_ddot Jacobians."""
    R = ROTATION
    m = virtual_mass(rho, spine.z0_max, spine.U_max, xi)
    b = x[spine.fore_dofs] - x[spine.aft_dofs]
    bd = u_dot[spine.fore_dofs] - u_dot[spine.aft_dofs]
    v = u_dot[spine.aft_dofs]
    a = u_ddot[spine.aft_dofs]
    Rb, Rbd = b @ R.T, bd @ R.T
    va, vb, vd = np.sum(a * Rb, 1), np.sum(v * Rb, 1), np.sum(v * Rbd, 1)
    cs = -(m * spine.w)[:, None]
    F = cs * (va[:, None] * Rb + vd[:, None] * Rb + vb[:, None] * Rbd)
    ct = 0.5 * m[0] * spine.w[0] ** 3
    F[0] += ct * vb[0] ** 2 * b[0]
    f = np.zeros(spine.n_dofs)
    np.add.at(f, spine.aft_dofs, F)
    if not with_jacobians:
        return f
    Rta, Rtv = a @ R, v @ R
    I3 = np.eye(3)
    # d F / d b, d bd, d v, d a  for each element (ns, 3, 3)
    dFdb = cs[:, :, None] * (np.einsum("ei,ej->eij", Rb, Rta) + (va + vd)[:, None, None] * R
                             + np.einsum("ei,ej->eij", Rbd, Rtv))
    dFdbd = cs[:, :, None] * (np.einsum("ei,ej->eij", Rb, Rtv) + vb[:, None, None] * R)
    dFdv = cs[:, :, None] * (np.einsum("ei,ej->eij", Rb, Rbd) + np.einsum("ei,ej->eij", Rbd, Rb))
    dFda = cs[:, :, None] * np.einsum("ei,ej->eij", Rb, Rb)
    dFdb[0] += ct * (vb[0] ** 2 * I3 + 2 * vb[0] * np.outer(b[0], Rtv[0]))
    dFdv[0] += ct * 2 * vb[0] * np.outer(b[0], Rb[0])
    n = spine.n_dofs

    def mat(blocks_cols):
        rows, cols, vals = [], [], []
        for blk, cdofs, sign in blocks_cols:
            rows.append(np.repeat(spine.aft_dofs, 3, axis=1).ravel())
            cols.append(np.tile(cdofs, (1, 3)).ravel())
            vals.append(sign * blk.ravel())
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))

    Ku = mat([(dFdb, spine.fore_dofs, 1.0), (dFdb, spine.aft_dofs, -1.0)])
    Cu = mat([(dFdbd, spine.fore_dofs, 1.0), (dFdbd, spine.aft_dofs, -1.0), (dFdv, spine.aft_dofs, 1.0)])
    Mu = mat([(dFda, spine.aft_dofs, 1.0)])
    return f, Ku, Cu, Mu


# --- drag --------------------------------------------------------------------

def drag_coefficient_area(area_vectors, d_swim):
    """``A * C_d = 2 (a . d)^2 / |a|`` for area vectors ``a`` (|a| = face area)."""
    p = area_vectors @ d_swim
    return 2.0 * p ** 2 / np.linalg.norm(area_vectors, axis=1)


@dataclass(frozen=True)
class DragTensorFamily:
    """Second-order Taylor data of the drag coefficient map ``xi -> A C_d`` per skin face.

    The face force is ``-1/2 rho (g0 + g1.xi + g2:(xi xi)) v_h^2 d_swim`` split
    equally over the face nodes, with ``v_h`` the head velocity along ``d_swim``.
    """

    faces: np.ndarray
    g0: np.ndarray          # (nf,)
    g1: np.ndarray          # (nf, m_xi)
    g2: np.ndarray          # (nf, m_xi, m_xi), already halved
    rho: float
    d_swim: np.ndarray
    head_dofs: np.ndarray   # (3,)
    n_dofs: int

    def coefficient(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.size == 0:
            return self.g0.copy()
        return self.g0 + self.g1 @ xi + np.einsum("fkl,k,l->f", self.g2, xi, xi)

    def coefficient_dxi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.g1 + np.einsum("fkl,l->fk", self.g2 + np.swapaxes(self.g2, 1, 2), xi)

    @property
    def scatter(self):
        """(nf, n_dofs) sparse map from face force magnitudes to nodal forces."""
        nf = len(self.faces)
        rows = np.repeat(np.arange(nf), 9)
        cols = (3 * self.faces[:, :, None] + np.arange(3)).reshape(nf, 9).ravel()
        vals = np.tile(np.tile(self.d_swim, 3) / 3.0, nf)
        return sp.csr_matrix((vals, (rows, cols)), shape=(nf, self.n_dofs))

    def face_tensors(self, f):
        """Dense 3T, 4T, 5T of face ``f`` over (9 face DOFs, 3 head DOFs)."""
        s = np.tile(self.d_swim, 3) / 3.0
        base = -0.5 * self.rho * np.einsum("i,j,k->ijk", s, self.d_swim, self.d_swim)
        T3 = self.g0[f] * base
        T4 = np.einsum("k,ijl->ikjl", self.g1[f], base)
        T5 = np.einsum("kl,ijm->ikljm", self.g2[f], base)
        return T3, T4, T5


def drag_taylor_tensors(mesh, basis, rho, faces=None):
    """Taylor coefficients of the face drag map around the nominal shape.

    First and second xi-derivatives are exact derivatives of
    ``2 (a(xi) . d)^2 / |a(xi)|`` where the area vector ``a`` is quadratic in xi.
    """
    faces = mesh.skin_faces if faces is None else np.asarray(faces)
    d = mesh.d_swim
    X = mesh.nodes[faces]
    Uf = basis.U.reshape(mesh.n_nodes, 3, -1)[faces]       # (nf, 3 nodes, 3, m)
    e1, e2 = X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]
    E1, E2 = Uf[:, 1] - Uf[:, 0], Uf[:, 2] - Uf[:, 0]     # (nf, 3, m)
    a = 0.5 * np.cross(e1, e2)
    r = np.linalg.norm(a, axis=1)
    if np.any(r <= 0):
        raise ValueError("zero-area skin face")
    ak = 0.5 * (np.cross(E1, e2[:, :, None], axis=1) + np.cross(e1[:, :, None], E2, axis=1))
    akl = 0.5 * (np.cross(E1[:, :, :, None], E2[:, :, None, :], axis=1)
                 + np.cross(E1[:, :, None, :], E2[:, :, :, None], axis=1))
    p = a @ d
    pk = np.einsum("fik,i->fk", ak, d)
    pkl = np.einsum("fikl,i->fkl", akl, d)
    qk = 2 * np.einsum("fi,fik->fk", a, ak)
    qkl = 2 * (np.einsum("fik,fil->fkl", ak, ak) + np.einsum("fi,fikl->fkl", a, akl))
    rk = qk / (2 * r[:, None])
    rkl = qkl / (2 * r[:, None, None]) - np.einsum("fk,fl->fkl", qk, qk) / (4 * r[:, None, None] ** 3)
    g0 = 2 * p ** 2 / r
    gk = 4 * p[:, None] * pk / r[:, None] - 2 * (p ** 2)[:, None] * rk / r[:, None] ** 2
    P, Rr = p[:, None, None], r[:, None, None]
    gkl = (4 * (np.einsum("fk,fl->fkl", pk, pk) + P * pkl) / Rr
           - 4 * P * (np.einsum("fk,fl->fkl", pk, rk) + np.einsum("fk,fl->fkl", rk, pk)) / Rr ** 2
           - 2 * P ** 2 * rkl / Rr ** 2
           + 4 * P ** 2 * np.einsum("fk,fl->fkl", rk, rk) / Rr ** 3)
    head = 3 * mesh.head_node + np.arange(3)
    return DragTensorFamily(faces=faces, g0=g0, g1=gk, g2=0.5 * gkl, rho=float(rho),
                            d_swim=np.asarray(d, float), head_dofs=head, n_dofs=mesh.n_dofs)


def eval_drag(family, xi, u_dot):
    """Global drag force for the velocity field ``u_dot``."""
    vh = family.d_swim @ u_dot[family.head_dofs]
    mag = -0.5 * family.rho * family.coefficient(xi) * vh ** 2
    return family.scatter.T @ mag


def direct_drag(mesh, basis, rho, xi, u_dot, faces=None):
    """Drag from the exact coefficient of the shape-varied rest mesh (no Taylor expansion)."""
    faces = mesh.skin_faces if faces is None else np.asarray(faces)
    nodes = mesh.nodes + (basis.U @ np.asarray(xi, float)).reshape(-1, 3) if basis.n_params else mesh.nodes
    X = nodes[faces]
    g = drag_coefficient_area(0.5 * np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), mesh.d_swim)
    vh = mesh.d_swim @ u_dot[3 * mesh.head_node:3 * mesh.head_node + 3]
    f = np.zeros(mesh.n_dofs)
    F = -0.5 * rho * g * vh ** 2
    for c in range(3):
        np.add.at(f, 3 * faces[:, c, None] + np.arange(3), (F[:, None] * mesh.d_swim) / 3.0)
    return f
