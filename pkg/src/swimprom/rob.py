"""Data-free reduced order basis: rigid mode, vibration modes, modal derivatives
and parameter sensitivities, orthonormalised into ``V``.

Every routine here takes structural operators only; nothing consumes a
simulated trajectory.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import assemble_matrix, gamma_operator
from .internal import shape_gradients, tensor_polys
from .mesh import tet_gradients

log = logging.getLogger(__name__)

DENSE_LIMIT = 1500


class EigenSolveError(RuntimeError):
    pass


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def solve_vibration_modes(M, K, count, free=None, zero_tol=1e-8):
    """Lowest ``count`` elastic eigenpairs of ``(K - w^2 M) phi = 0``.

    Rigid modes (``w^2`` below ``zero_tol`` times the mean diagonal ratio of K
    to M) are skipped. Returns full-size mass-normalised modes and ``w``.
    """
    n = M.shape[0]
    free = np.arange(n) if free is None else np.asarray(free)
    Mf, Kf = M[free][:, free], K[free][:, free]
    scale = abs(Kf.diagonal().mean() / Mf.diagonal().mean())
    nf = len(free)
    if count <= 0:
        return np.zeros((n, 0)), np.zeros(0)
    want = min(nf, count + 6)
    if nf <= DENSE_LIMIT:
        w2, vecs = sla.eigh(_dense(Kf), _dense(Mf), subset_by_index=[0, want - 1])
    else:
        try:
            w2, vecs = spla.eigsh(sp.csc_matrix(Kf), k=want, M=sp.csc_matrix(Mf),
                                  sigma=-1e-3 * scale, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise EigenSolveError("eigen-solver did not converge") from exc
        order = np.argsort(w2)
        w2, vecs = w2[order], vecs[:, order]
    keep = np.flatnonzero(w2 > zero_tol * scale)[:count]
    if len(keep) < count:
        raise EigenSolveError(f"only {len(keep)} elastic modes available")
    Phi = np.zeros((n, count))
    Phi[free] = vecs[:, keep]
    Phi /= np.sqrt(np.einsum("ik,ik->k", Phi, M @ Phi))
    # deterministic sign: largest-magnitude entry positive
    idx = np.argmax(np.abs(Phi), axis=0)
    Phi *= np.sign(Phi[idx, np.arange(count)])
    return Phi, np.sqrt(w2[keep])


def rigid_translation(mesh, M=None, direction=None):
    """Unit rigid translation along ``d_swim`` (mass-normalised when M is given)."""
    d = mesh.d_swim if direction is None else np.asarray(direction, float)
    r = np.tile(d, mesh.n_nodes)
    return r / np.sqrt(r @ (M @ r)) if M is not None else r / np.linalg.norm(r)


def _bordered_solve(K, M, phi, w2, rhs, free):
    """Solve ``[[K - w2 M, M phi], [phi^T M, 0]] [x; l] = [rhs; 0]`` on free DOFs."""
    Kf = K[free][:, free]
    Mf = M[free][:, free]
    Mp = Mf @ phi[free]
    A = sp.bmat([[Kf - w2 * Mf, sp.csr_matrix(Mp[:, None])],
                 [sp.csr_matrix(Mp[None, :]), None]], format="csc")
    b = np.concatenate([rhs[free], [0.0]])
    sol = spla.spsolve(A, b)
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular bordered system")
    res = np.linalg.norm(A @ sol - b) / max(np.linalg.norm(b), 1e-300)
    if res > 1e-8:
        raise np.linalg.LinAlgError(f"bordered system residual {res:.2e}")
    x = np.zeros(K.shape[0])
    x[free] = sol[:-1]
    return x


def stiffness_direction_derivative(mesh, material, direction):
    """``dK/du`` along ``direction``, contracted from the nominal element K3 tensors."""
    grads, vol = tet_gradients(mesh.nodes, mesh.tets)
    edofs = mesh.element_dofs
    Gam = gamma_operator(grads)
    K3 = tensor_polys(Gam, vol, np.zeros((len(vol), 0, 3, 3)), material, which=("K3",))["K3"][0]
    d = direction[edofs]
    ke = np.einsum("eabc,ec->eab", K3 + np.swapaxes(K3, 2, 3), d)
    return assemble_matrix(edofs, ke, mesh.n_dofs)


def stiffness_shape_derivatives(mesh, material, U):
    """``dK/dxi_j`` for each shape column: the assembled first-order K2 coefficients."""
    grads, vol = tet_gradients(mesh.nodes, mesh.tets)
    edofs = mesh.element_dofs
    Ue = U[edofs]
    K2 = tensor_polys(gamma_operator(grads), vol, shape_gradients(grads, Ue), material, which=("K2",))["K2"][1]
    return [assemble_matrix(edofs, K2[:, j], mesh.n_dofs) for j in range(U.shape[1])]


def _mode_derivative(M, K, phi, w, dK, free, static):
    if static:
        rhs = -(dK @ phi)
        return _bordered_solve(K, M, phi, 0.0, rhs, free), phi @ (dK @ phi)
    dw2 = phi @ (dK @ phi)
    rhs = -(dK @ phi - dw2 * (M @ phi))
    return _bordered_solve(K, M, phi, w ** 2, rhs, free), dw2


def modal_derivatives(M, K, Phi, omega, mesh, material, free=None, static_md=False, rigid=None):
    """Modal derivatives ``theta_ij = d phi_i / d u_j`` (i <= j) as columns.

    With ``static_md`` the inertia and frequency terms are dropped and the
    static problem is bordered with the rigid mode instead of ``phi_i``.
    """
    free = mesh.free_dofs if free is None else free
    cols, labels = [], []
    dKs = [stiffness_direction_derivative(mesh, material, Phi[:, j]) for j in range(Phi.shape[1])]
    for i in range(Phi.shape[1]):
        for j in range(i, Phi.shape[1]):
            if static_md:
                r = rigid_translation(mesh, M) if rigid is None else rigid
                th = _bordered_solve(K, M, r, 0.0, -(dKs[j] @ Phi[:, i]), free)
            else:
                th, _ = _mode_derivative(M, K, Phi[:, i], omega[i], dKs[j], free, False)
            cols.append(th)
            labels.append(("MD", i, j))
    return (np.column_stack(cols) if cols else np.zeros((M.shape[0], 0))), labels


def parameter_sensitivities(M, K, Phi, omega, mesh, material, U, free=None):
    """``d phi_i / d xi_j`` for all modes and shape columns.

    Returns the columns, their labels and the eigenvalue sensitivities
    ``d(w_i^2)/d xi_j``.
    """
    free = mesh.free_dofs if free is None else free
    dKs = stiffness_shape_derivatives(mesh, material, U)
    cols, labels = [], []
    dw2 = np.zeros((Phi.shape[1], len(dKs)))
    for i in range(Phi.shape[1]):
        for j, dK in enumerate(dKs):
            x, dw2[i, j] = _mode_derivative(M, K, Phi[:, i], omega[i], dK, free, False)
            cols.append(x)
            labels.append(("PS", i, j))
    return (np.column_stack(cols) if cols else np.zeros((M.shape[0], 0))), labels, dw2


@dataclass(frozen=True)
class ReducedBasis:
    V: np.ndarray
    provenance: tuple
    omega: np.ndarray
    dropped: tuple = field(default=())

    @property
    def m(self):
        return self.V.shape[1]


def assemble_rob(rigid, Phi, Theta=None, Xi=None, labels=None, omega=(), rtol=1e-8, constrained=None):
    """Concatenate ``[rigid, Phi, Theta, Xi]`` and orthonormalise.

    Two-pass Gram-Schmidt; a column is dropped when its residual after
    projection is below ``rtol`` of its original norm.
    """
    blocks = [np.zeros((len(Phi), 0)) if b is None else np.asarray(b, float).reshape(len(Phi), -1)
              for b in (rigid, Phi, Theta, Xi)]
    if labels is None:
        labels = ([("rigid",)] * blocks[0].shape[1]
                  + [("VM", i) for i in range(blocks[1].shape[1])]
                  + [("MD", i) for i in range(blocks[2].shape[1])]
                  + [("PS", i) for i in range(blocks[3].shape[1])])
    raw = np.column_stack(blocks)
    if raw.shape[1] == 0:
        raise ValueError("empty basis")
    if constrained is not None:
        raw[np.asarray(constrained)] = 0.0
    kept, prov, dropped = [], [], []
    for c, lab in zip(raw.T, labels):
        nrm = np.linalg.norm(c)
        v = c.copy()
        for _ in range(2):
            for q in kept:
                v -= (q @ v) * q
        r = np.linalg.norm(v)
        if nrm == 0 or r < rtol * nrm:
            dropped.append(lab)
            continue
        kept.append(v / r)
        prov.append(lab)
    if dropped:
        log.info("dropped %d dependent basis columns: %s", len(dropped), dropped)
    if not kept:
        raise ValueError("empty basis")
    return ReducedBasis(V=np.column_stack(kept), provenance=tuple(prov), omega=np.asarray(omega, float),
                        dropped=tuple(dropped))


def build_rob(mesh, system, basis, n_modes=1, static_md=False, with_md=True, with_ps=True):
    """Default fish basis: rigid x-translation, first VMs, their MDs and the PSs."""
    M, K = system.M, system.K_lin
    Phi, omega = solve_vibration_modes(M, K, n_modes, free=mesh.free_dofs)
    labels = [("rigid",)] + [("VM", i) for i in range(n_modes)]
    Theta = Xi = None
    if with_md:
        Theta, lab = modal_derivatives(M, K, Phi, omega, mesh, system.material, static_md=static_md)
        labels += lab
    if with_ps and basis is not None and basis.n_params:
        Xi, lab, _ = parameter_sensitivities(M, K, Phi, omega, mesh, system.material, basis.U)
        labels += lab
    return assemble_rob(rigid_translation(mesh), Phi, Theta, Xi, labels=labels, omega=omega,
                        constrained=mesh.constrained_dofs)
