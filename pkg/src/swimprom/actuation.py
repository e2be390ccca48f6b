"""Muscle actuation forces in Voigt form.

The muscle energy of an element is ``k/2 a V |F m|^2`` with
``F = I + D_xi + D``. Gradients are vectorised row-major,
``theta = [u_x, u_y, u_z, v_x, ..., w_z]``, and symmetric 3x3 quantities use
the order ``[xx, yy, zz, xy, xz, yz]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import gamma_operator
from .mesh import tet_gradients

I_V = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

H = np.zeros((6, 9))
for _i, _js in enumerate([(0,), (4,), (8,), (1, 3), (2, 6), (5, 7)]):
    H[_i, list(_js)] = 1.0

# non-zero entries (1-based i, j, k) of the third-order tensor L1
_L1_ENTRIES = [
    (1, 1, 1), (1, 4, 4), (1, 7, 7), (2, 2, 2), (2, 5, 5), (2, 8, 8), (3, 3, 3), (3, 6, 6), (3, 9, 9),
    (4, 1, 2), (4, 2, 1), (4, 4, 5), (4, 5, 4), (4, 7, 8), (4, 8, 7),
    (5, 1, 3), (5, 3, 1), (5, 4, 6), (5, 6, 4), (5, 7, 9), (5, 9, 7),
    (6, 2, 3), (6, 3, 2), (6, 5, 6), (6, 6, 5), (6, 8, 9), (6, 9, 8),
]
L1 = np.zeros((6, 9, 9))
for _i, _j, _k in _L1_ENTRIES:
    L1[_i - 1, _j - 1, _k - 1] = 1.0


def A1(theta):
    """Explicit 6x9 matrix with ``A1(theta) theta`` the Voigt form of ``D^T D``."""
    ux, uy, uz, vx, vy, vz, wx, wy, wz = np.asarray(theta, dtype=float)
    return np.array([
        [ux, 0, 0, vx, 0, 0, wx, 0, 0],
        [0, uy, 0, 0, vy, 0, 0, wy, 0],
        [0, 0, uz, 0, 0, vz, 0, 0, wz],
        [uy, ux, 0, vy, vx, 0, wy, wx, 0],
        [uz, 0, ux, vz, 0, vx, wz, 0, wx],
        [0, uz, uy, 0, vz, vy, 0, wz, wy],
    ])


def voigt_direction(m):
    m = np.asarray(m, dtype=float)
    return np.array([m[0] ** 2, m[1] ** 2, m[2] ** 2, m[0] * m[1], m[0] * m[2], m[1] * m[2]])


def actuation_signal(t, amplitude=0.2, frequency=1.0, side="left"):
    """Activation ``+-amplitude sin(2 pi f t)``; the right side is in antiphase."""
    s = amplitude * np.sin(2 * np.pi * frequency * np.asarray(t, dtype=float))
    if side == "left":
        return s
    if side == "right":
        return -s
    raise ValueError(f"unknown muscle side {side!r}")


@dataclass(frozen=True)
class MuscleElementData:
    """Per-element muscle data for a set of muscle elements (volumes frozen at nominal)."""

    elements: np.ndarray
    G: np.ndarray        # (e, 9, 12)
    volume: np.ndarray   # (e,)
    direction: np.ndarray
    stiffness: float

    @property
    def m_V(self):
        return voigt_direction(self.direction)

    @property
    def S(self):
        """``m_V,i L1_ijk`` (9x9, symmetric)."""
        return np.einsum("i,ijk->jk", self.m_V, L1)


def muscle_data(mesh, elements, stiffness):
    if stiffness <= 0:
        raise ValueError("muscle stiffness must be positive")
    elements = np.asarray(elements, dtype=int)
    grads, vol = tet_gradients(mesh.nodes, mesh.tets[elements])
    G = gamma_operator(grads).reshape(-1, 9, 12)
    d = np.asarray(mesh.muscle_direction, dtype=float)
    return MuscleElementData(elements=elements, G=G, volume=vol, direction=d / np.linalg.norm(d),
                             stiffness=float(stiffness))


def muscle_energy(data, u_xi, u, a):
    """Voigt-form muscle energy per element; ``u_xi``, ``u`` are (e, 12)."""
    th = np.einsum("ejl,el->ej", data.G, u)
    tx = np.einsum("ejl,el->ej", data.G, u_xi)
    Lu = np.einsum("ijk,ek->eij", L1, th)
    Lx = np.einsum("ijk,ek->eij", L1, tx)
    bracket = (I_V + np.einsum("eij,ej->ei", 2 * H + Lu, th)
               + np.einsum("eij,ej->ei", 2 * H + Lx, tx) + 2 * np.einsum("eij,ej->ei", Lx, th))
    return 0.5 * data.stiffness * a * data.volume * (bracket @ data.m_V)


def actuation_force(data, u_xi, u, a):
    """Element actuation forces ``dE/du`` (e, 12), written with L1 contractions."""
    mV = data.m_V
    th = np.einsum("ejl,el->ej", data.G, u)
    tx = np.einsum("ejl,el->ej", data.G, u_xi)
    t1 = np.einsum("i,ij,ejL->eL", mV, 2 * H, data.G)
    t2 = np.einsum("i,ijk,ek,ejL->eL", mV, L1, th, data.G)
    t3 = np.einsum("i,ijk,ekL,ej->eL", mV, L1, data.G, th)
    t4 = 2 * np.einsum("i,ijk,ek,ejL->eL", mV, L1, tx, data.G)
    return 0.5 * data.stiffness * a * data.volume[:, None] * (t1 + t2 + t3 + t4)


def matrix_form_energy(grads, vol, m, stiffness, u_xi, u, a):
    """Reference ``k/2 a V |(I + D_xi + D) m|^2`` from plain 3x3 algebra."""
    F = (np.eye(3) + np.einsum("eai,eaj->eij", u_xi.reshape(-1, 4, 3), grads)
         + np.einsum("eai,eaj->eij", u.reshape(-1, 4, 3), grads))
    Fm = F @ np.asarray(m, float)
    return 0.5 * stiffness * a * vol * np.sum(Fm ** 2, axis=1)


@dataclass(frozen=True)
class GlobalMuscle:
    """Assembled affine actuation map ``f = a (b + K (u + U xi))`` for one side.

    The force is linear in both u and the shape displacement because the
    energy is quadratic in F.
    """

    b: np.ndarray
    K: sp.csr_matrix
    side: str


def assemble_muscle(mesh, elements, stiffness, side):
    data = muscle_data(mesh, elements, stiffness)
    edofs = mesh.element_dofs[data.elements]
    kv = data.stiffness * data.volume
    be = kv[:, None] * np.einsum("ij,i,ejL->eL", H, data.m_V, data.G)
    Ke = kv[:, None, None] * np.einsum("ejL,jk,ekM->eLM", data.G, data.S, data.G)
    n = mesh.n_dofs
    b = np.zeros(n)
    np.add.at(b, edofs.ravel(), be.ravel())
    rows = np.repeat(edofs, 12, axis=1).ravel()
    cols = np.tile(edofs, (1, 12)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))
    return GlobalMuscle(b=b, K=K, side=side)
