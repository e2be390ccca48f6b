"""System matrices and Saint Venant-Kirchhoff element routines for linear tets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import tet_gradients


@dataclass(frozen=True)
class Material:
    """Isotropic SVK material."""

    youngs_modulus: float = 2.0e5
    poisson_ratio: float = 0.45

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError("Young's modulus must be positive")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def lame(self):
        E, nu = self.youngs_modulus, self.poisson_ratio
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        mu = E / (2 * (1 + nu))
        return lam, mu


def cddot(X, Y, material):
    """Pairwise ``X : C : Y`` for stacks of 3x3 tensors.

    X has shape (..., a, 3, 3), Y (..., b, 3, 3); result (..., a, b).
    """
    lam, mu = material.lame
    trX = np.einsum("...aii->...a", X)
    trY = np.einsum("...bii->...b", Y)
    return lam * trX[..., :, None] * trY[..., None, :] + 2 * mu * np.einsum("...aij,...bij->...ab", X, Y)


def gamma_operator(grads):
    """Displacement-gradient operator: ``D_ij = sum_L Gamma_ijL u_L`` per element.

    Element DOFs are node-major, ``L = 3 * node + component``.
    """
    ne = grads.shape[0]
    G = np.zeros((ne, 3, 3, 4, 3))
    for c in range(3):
        G[:, c, :, :, c] = np.swapaxes(grads, 1, 2)
    return G.reshape(ne, 3, 3, 12)


def displacement_gradient(grads, u_e):
    """``D = du/dX`` per element for element displacements (ne, 12)."""
    return np.einsum("eai,eaj->eij", u_e.reshape(-1, 4, 3), grads)


def svk_forces(grads, vol, u_e, material):
    """Exact SVK internal forces (ne, 12)."""
    lam, mu = material.lame
    F = np.eye(3) + displacement_gradient(grads, u_e)
    E = 0.5 * (np.einsum("eki,ekj->eij", F, F) - np.eye(3))
    S = lam * np.trace(E, axis1=1, axis2=2)[:, None, None] * np.eye(3) + 2 * mu * E
    P = F @ S
    f = vol[:, None, None] * np.einsum("eij,eaj->eai", P, grads)
    return f.reshape(-1, 12)


def svk_tangents(grads, vol, u_e, material):
    """Consistent SVK tangent stiffness (ne, 12, 12)."""
    lam, mu = material.lame
    F = np.eye(3) + displacement_gradient(grads, u_e)
    E = 0.5 * (np.einsum("eki,ekj->eij", F, F) - np.eye(3))
    S = lam * np.trace(E, axis1=1, axis2=2)[:, None, None] * np.eye(3) + 2 * mu * E
    Fg = np.einsum("eij,eaj->eai", F, grads)          # F g_a
    gSg = np.einsum("eai,eij,ebj->eab", grads, S, grads)
    gg = np.einsum("eai,ebi->eab", grads, grads)
    FFt = np.einsum("eik,ejk->eij", F, F)
    K = (np.einsum("eab,ik->eaibk", gSg, np.eye(3))
         + lam * np.einsum("eai,ebk->eaibk", Fg, Fg)
         + mu * np.einsum("eik,eab->eaibk", FFt, gg)
         + mu * np.einsum("ebi,eak->eaibk", Fg, Fg))
    return vol[:, None, None] * K.reshape(-1, 12, 12)


def assemble_vector(edofs, fe, n):
    out = np.zeros(n)
    np.add.at(out, edofs.ravel(), fe.ravel())
    return out


def assemble_matrix(edofs, ke, n):
    rows = np.repeat(edofs, edofs.shape[1], axis=1).ravel()
    cols = np.tile(edofs, (1, edofs.shape[1])).ravel()
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))


def consistent_mass(vol, density):
    """Element consistent mass matrices (ne, 12, 12)."""
    base = (np.ones((4, 4)) + np.eye(4)) / 20.0
    m = np.kron(base, np.eye(3))
    return density * vol[:, None, None] * m


@dataclass(frozen=True)
class SystemMatrices:
    """Full-size sparse M, K_lin, C plus the free-DOF index for constraint elimination."""

    M: sp.csr_matrix
    K_lin: sp.csr_matrix
    C: sp.csr_matrix
    free: np.ndarray
    density: float
    material: Material
    rayleigh: tuple

    def restrict(self, A):
        return A[self.free][:, self.free]


def assemble_system_matrices(mesh, density, material, rayleigh=(0.0, 0.01)):
    if density <= 0:
        raise ValueError("solid density must be positive")
    grads, vol = tet_gradients(mesh.nodes, mesh.tets)
    edofs = mesh.element_dofs
    n = mesh.n_dofs
    M = assemble_matrix(edofs, consistent_mass(vol, density), n)
    K = assemble_matrix(edofs, svk_tangents(grads, vol, np.zeros((len(vol), 12)), material), n)
    alpha, beta = rayleigh
    C = alpha * M + beta * K
    return SystemMatrices(M=M, K_lin=K, C=C.tocsr(), free=mesh.free_dofs,
                          density=float(density), material=material, rayleigh=(alpha, beta))
