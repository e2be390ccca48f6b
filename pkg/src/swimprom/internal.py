"""Polynomial SVK internal forces of shape-varied elements.

The shape-varied configuration ``x0 + U xi`` is reached through a first mapping
with gradient ``F1 = I + Dxi``; its inverse is replaced by a truncated Neumann
series ``I - Dxi (+ Dxi^2)`` and ``det F1`` by its invariant expansion, which
makes the element force a polynomial in ``(u, xi)``. The polynomial is kept to
second order in ``xi`` so that it matches the tensor family

    f = K2(xi) u + K3(xi) : (u u) + K4(xi) : (u u u),
    Kn(xi) = Kn_0 + Kn_1 . xi + Kn_2 : (xi xi).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import Material, cddot, displacement_gradient, gamma_operator, svk_forces
from .mesh import tet_gradients


@dataclass(frozen=True)
class PolyTensor:
    """Tensor quadratic in ``xi``; ``c1`` and ``c2`` carry the xi axes first."""

    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @property
    def n_params(self):
        return self.c1.shape[0]

    def at(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.size == 0:
            return self.c0.copy()
        return (self.c0 + np.tensordot(xi, self.c1, axes=1)
                + np.tensordot(xi, np.tensordot(xi, self.c2, axes=1), axes=1))

    def dxi(self, xi):
        """Derivative with respect to xi, xi axis first."""
        xi = np.asarray(xi, dtype=float)
        if xi.size == 0:
            return self.c1.copy()
        c2 = self.c2
        return self.c1 + np.tensordot(xi, c2, axes=([0], [1])) + np.tensordot(xi, c2, axes=([0], [0]))

    def __add__(self, other):
        return PolyTensor(self.c0 + other.c0, self.c1 + other.c1, self.c2 + other.c2)


def _sym(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def _sym_kl(X):
    # symmetrise the two xi axes sitting right after the element axis
    return 0.5 * (X + np.swapaxes(X, 1, 2))


def strain_polys(Gamma, Dxi, order=1, W=None):
    """Coefficients of the Green-Lagrange strain ``E = A.u + 1/2 u.Q.u`` in xi.

    Gamma: (e, 3, 3, 12) gradient operator; Dxi: (e, k, 3, 3) gradients of the
    shape fields; W: optional (e, 12, m) basis restricting ``u = W eta``.
    Returns ``A, Q, J`` as lists indexed by xi degree; ``J`` holds the volume
    ratio expansion (degree 0 is implicit 1).
    """
    if order not in (1, 2):
        raise ValueError("Neumann expansion order must be 1 or 2")
    if W is None:
        G = np.moveaxis(Gamma, 3, 1)                        # (e, I, 3, 3)
    else:
        G = np.einsum("eijL,eLI->eIij", Gamma, W)
    P1 = -Dxi
    A0 = _sym(G)
    A1 = _sym(np.einsum("eIia,ekaj->ekIij", G, P1))
    GtG = np.einsum("eIai,eJaj->eIJij", G, G)
    Q0 = _sym(GtG)
    Q0P1 = np.einsum("eIJia,ekaj->ekIJij", Q0, P1)
    Q1 = Q0P1 + np.swapaxes(Q0P1, -1, -2)
    P1QP1 = np.einsum("ekai,eIJab,elbj->eklIJij", P1, Q0, P1)
    Q2 = _sym(P1QP1)
    tr = np.einsum("ekii->ek", Dxi)
    J1 = tr
    if order == 2:
        P2 = np.einsum("ekab,elbc->eklac", Dxi, Dxi)
        A2 = _sym_kl(_sym(np.einsum("eIia,eklaj->eklIij", G, P2)))
        Q0P2 = np.einsum("eIJia,eklaj->eklIJij", Q0, P2)
        Q2 = _sym_kl(Q2 + Q0P2 + np.swapaxes(Q0P2, -1, -2))
        J2 = 0.5 * (tr[:, :, None] * tr[:, None, :] - np.einsum("ekab,elba->ekl", Dxi, Dxi))
    else:
        A2 = None
        Q2 = _sym_kl(Q2)
        J2 = None
    return [A0, A1, A2], [Q0, Q1, Q2], [None, J1, J2]


_TERMS = {0: [(0, 0, 0)],
          1: [(1, 0, 0), (0, 1, 0), (0, 0, 1)],
          2: [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]}


def _slot(arr, before, own, after):
    shp = arr.shape
    return arr.reshape((shp[0],) + (1,) * before + shp[1:1 + own] + (1,) * after + shp[1 + own:])


def _combine(Xp, Yp, Jp, nx, ny, material, m_xi):
    """Sum over degree splits of ``J_c * X_a : C : Y_b``, grouped by total xi degree."""
    out = []
    for d in range(3):
        if d and m_xi == 0:
            out.append(None if out[0] is None else np.zeros(out[0].shape[:1] + (0,) * d + out[0].shape[1:]))
            continue
        total = None
        for a, b, c in _TERMS[d]:
            X, Y = Xp[a], Yp[b]
            J = Jp[c] if c else 1.0
            if X is None or Y is None or J is None:
                continue
            Xs = _slot(X, 0, a, d - a)
            Ys = _slot(Y, a, b, c)
            tx, ty = Xs.shape[1 + d:1 + d + nx], Ys.shape[1 + d:1 + d + ny]
            Xf = Xs.reshape(Xs.shape[:1 + d] + (-1, 3, 3))
            Yf = Ys.reshape(Ys.shape[:1 + d] + (-1, 3, 3))
            term = cddot(Xf, Yf, material)
            term = term.reshape(term.shape[:1 + d] + tx + ty)
            if c:
                Js = _slot(J, a + b, c, 0)
                term = term * Js.reshape(Js.shape + (1,) * (nx + ny))
            total = term if total is None else total + term
        shape_tail = None if total is None else total.shape[1 + d:]
        if total is None:
            out.append(None)
            continue
        full = (total.shape[0],) + (m_xi,) * d + shape_tail
        out.append(np.broadcast_to(total, full).copy())
    return out


def tensor_polys(Gamma, vol, Dxi, material, order=1, W=None, which=("K2", "K3", "K4")):
    """Per-element polynomial coefficients of the internal-force tensors.

    Returns ``{name: [c0, c1, c2]}`` with a leading element axis on each array.
    """
    m_xi = Dxi.shape[1]
    A, Q, J = strain_polys(Gamma, Dxi, order, W)
    out = {}

    def scaled(cs, extra):
        return [None if c is None else c * vol.reshape((-1,) + (1,) * (c.ndim - 1)) * extra for c in cs]

    if "K2" in which:
        out["K2"] = scaled(_combine(A, A, J, 1, 1, material, m_xi), 1.0)
    if "K3" in which:
        t1 = _combine(A, Q, J, 1, 2, material, m_xi)
        t2 = _combine(Q, A, J, 2, 1, material, m_xi)
        out["K3"] = scaled([0.5 * x + y for x, y in zip(t1, t2)], 1.0)
    if "K4" in which:
        out["K4"] = scaled(_combine(Q, Q, J, 2, 2, material, m_xi), 0.5)
    for cs in out.values():
        cs[2] = _sym_kl(cs[2])
    return out


@dataclass(frozen=True)
class InternalTensorFamily:
    """Element internal-force tensors ``K2``, ``K3``, ``K4`` as polynomials in xi.

    ``K2.c0`` is the nominal linear stiffness, ``K2.c1`` and ``K2.c2`` its
    first- and second-order shape corrections; likewise for ``K3`` and ``K4``.
    """

    K2: PolyTensor
    K3: PolyTensor
    K4: PolyTensor
    expansion_order: int = 1

    def force(self, u, xi):
        u = np.asarray(u, dtype=float)
        K2, K3, K4 = self.K2.at(xi), self.K3.at(xi), self.K4.at(xi)
        return K2 @ u + np.einsum("ijk,j,k->i", K3, u, u) + np.einsum("ijkl,j,k,l->i", K4, u, u, u)

    def tangent(self, u, xi):
        u = np.asarray(u, dtype=float)
        K2, K3, K4 = self.K2.at(xi), self.K3.at(xi), self.K4.at(xi)
        return (K2 + np.einsum("ijk,k->ij", K3 + np.swapaxes(K3, 1, 2), u)
                + np.einsum("ijkl,k,l->ij", K4 + np.swapaxes(K4, 1, 2) + np.swapaxes(K4, 1, 3), u, u))


def _element_inputs(X, Ue):
    grads, vol = tet_gradients(np.asarray(X, dtype=float).reshape(4, 3), np.array([[0, 1, 2, 3]]))
    Ue = np.asarray(Ue, dtype=float).reshape(1, 12, -1)
    return grads, vol, shape_gradients(grads, Ue)


def element_internal_tensors(X, material, Ue, expansion_order=1):
    """Exact coefficient tensors of the truncated element force for one tet.

    X: (4, 3) nominal node coordinates; Ue: (12, m_xi) shape basis rows.
    """
    grads, vol, Dxi = _element_inputs(X, Ue)
    polys = tensor_polys(gamma_operator(grads), vol, Dxi, material, expansion_order)
    fam = {k: PolyTensor(*(c[0] for c in v)) for k, v in polys.items()}
    return InternalTensorFamily(fam["K2"], fam["K3"], fam["K4"], expansion_order)


def shape_gradients(grads, Ue):
    """Gradients of each shape field per element: (e, k, 3, 3) from Ue (e, 12, k)."""
    return np.einsum("eaik,eaj->ekij", Ue.reshape(Ue.shape[0], 4, 3, -1), grads)


def direct_internal_forces(grads, vol, material, Ue, xi, u_e, expansion_order=1):
    """Truncated polynomial force evaluated from matrix algebra, without tensors.

    Vectorised over elements: Ue (e, 12, k), u_e (e, 12). Returns (e, 12).
    """
    lam, mu = material.lame
    xi = np.asarray(xi, dtype=float)
    ne = len(vol)
    D = displacement_gradient(grads, u_e)
    Dx = (displacement_gradient(grads, np.einsum("eLk,k->eL", Ue, xi)) if xi.size
          else np.zeros((ne, 3, 3)))
    I = np.broadcast_to(np.eye(3), (ne, 3, 3))
    P = [I, -Dx, Dx @ Dx if expansion_order == 2 else np.zeros_like(Dx)]
    trx = np.trace(Dx, axis1=1, axis2=2)
    J = [np.ones(ne), trx,
         0.5 * (trx ** 2 - np.trace(Dx @ Dx, axis1=1, axis2=2)) if expansion_order == 2 else np.zeros(ne)]
    H = [D @ p for p in P]
    T = lambda Z: np.swapaxes(Z, 1, 2)  # noqa: E731
    E = [_sym(H[0]) + 0.5 * T(H[0]) @ H[0],
         _sym(H[1]) + _sym(T(H[0]) @ H[1]),
         _sym(H[2]) + _sym(T(H[0]) @ H[2]) + 0.5 * T(H[1]) @ H[1]]
    Gam = gamma_operator(grads)
    f = np.zeros((ne, 12))
    for L in range(12):
        dH = [Gam[:, :, :, L] @ p for p in P]
        dE = [_sym(dH[0]) + _sym(T(H[0]) @ dH[0]),
              _sym(dH[1]) + _sym(T(H[0]) @ dH[1] + T(H[1]) @ dH[0]),
              _sym(dH[2]) + _sym(T(H[0]) @ dH[2] + T(H[1]) @ dH[1] + T(H[2]) @ dH[0])]
        for a in range(3):
            for b in range(3 - a):
                for c in range(3 - a - b):
                    w = lam * np.trace(dE[a], axis1=1, axis2=2) * np.trace(E[b], axis1=1, axis2=2) \
                        + 2 * mu * np.einsum("eij,eij->e", dE[a], E[b])
                    f[:, L] += J[c] * w
    return vol[:, None] * f


def direct_internal_force(X, material, Ue, xi, u, expansion_order=1):
    """Single-element wrapper of :func:`direct_internal_forces`."""
    grads, vol = tet_gradients(np.asarray(X, float).reshape(4, 3), np.array([[0, 1, 2, 3]]))
    Ue = np.asarray(Ue, dtype=float).reshape(1, 12, -1)
    return direct_internal_forces(grads, vol, material, Ue, xi, np.asarray(u, float).reshape(1, 12),
                                  expansion_order)[0]


def exact_internal_force(X, material, Ue, xi, u):
    """SVK force of the element re-meshed at ``x0 + U xi`` (no expansion)."""
    Xs = np.asarray(X, float).reshape(4, 3) + (np.asarray(Ue, float).reshape(12, -1) @ np.asarray(xi, float)).reshape(4, 3)
    grads, vol = tet_gradients(Xs, np.array([[0, 1, 2, 3]]))
    return svk_forces(grads, vol, np.asarray(u, float).reshape(1, 12), material)[0]


def truncated_energy(X, material, Ue, xi, u, expansion_order=1):
    """Strain energy whose u-gradient is the truncated element force."""
    grads, vol, Dxi = _element_inputs(X, Ue)
    A, Q, J = strain_polys(gamma_operator(grads), Dxi, expansion_order)
    xi = np.asarray(xi, float)
    u = np.asarray(u, float)

    def contract_xi(c, d):
        c = c[0]
        for _ in range(d):
            c = np.tensordot(xi, c, axes=1)
        return c

    E = []
    for d in range(3):
        lin = np.zeros((3, 3)) if A[d] is None else np.tensordot(u, contract_xi(A[d], d), axes=1)
        E.append(lin + 0.5 * np.einsum("I,J,IJij->ij", u, u, contract_xi(Q[d], d)))
    Js = [1.0] + [0.0 if J[c] is None else float(contract_xi(J[c], c)) for c in (1, 2)]
    lam, mu = material.lame
    W = 0.0
    for a in range(3):
        for b in range(3 - a):
            for c in range(3 - a - b):
                W += Js[c] * 0.5 * (lam * np.trace(E[a]) * np.trace(E[b]) + 2 * mu * np.sum(E[a] * E[b]))
    return float(vol[0] * W)
