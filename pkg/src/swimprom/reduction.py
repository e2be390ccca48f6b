"""Galerkin projection of all force families onto a reduced basis ``V``.

Positions are written ``x = X y`` with the augmented basis ``X = [x0 | U | V]``
and coordinates ``y = [1, xi, eta]``; velocities only live in ``V`` so
``y_dot = [0, 0, eta_dot]``. Every reduced force is a polynomial in
``(eta, eta_dot, eta_ddot, xi)`` whose coefficients are stored here.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .actuation import assemble_muscle
from .fem import gamma_operator
from .hydro import ROTATION, drag_taylor_tensors
from .internal import PolyTensor, shape_gradients, tensor_polys
from .mesh import tet_gradients


def _poly(c):
    return PolyTensor(np.asarray(c[0]), np.asarray(c[1]), np.asarray(c[2]))


@dataclass(frozen=True)
class ReducedModel:
    """Reduced tensors of the equations of motion.

    Internal force ``K2(xi) eta + K3(xi):eta eta + K4(xi):eta eta eta``; spine
    force ``T(xi)_IJab [eta_dd_J y_a y_b + eta_d_J (y_dot_a y_b + y_a y_dot_b)]``
    with ``T = T0 + T1 xi + T2 xi xi``; tail force ``c(xi) s^2 Gb y`` with
    ``s = eta_d . Gs y``; drag ``(d0 + d1 xi + d2 xi xi) (h . eta_d)^2``;
    actuation ``a_side(t) (B1 + Bn eta + Bxi xi)`` per muscle side.
    """

    Mr: np.ndarray
    Cr: np.ndarray
    K2: PolyTensor
    K3: PolyTensor
    K4: PolyTensor
    T0: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    tail_Gb: np.ndarray
    tail_Gs: np.ndarray
    tail_coef: np.ndarray   # [1/2 w^3 * pi rho, z0, U_max...]
    drag0: np.ndarray
    drag1: np.ndarray
    drag2: np.ndarray
    head_velocity: np.ndarray
    B1: np.ndarray          # (sides, m)
    Bn: np.ndarray          # (sides, m, m)
    Bxi: np.ndarray         # (sides, m, m_xi)
    head_row: np.ndarray    # d_swim . head displacement
    tail_row: np.ndarray    # lateral tail displacement
    rho: float

    @property
    def m(self):
        return self.Mr.shape[0]

    @property
    def m_xi(self):
        return self.K2.c1.shape[0]

    @property
    def drag_T3(self):
        """Reduced drag tensor ``3T_IJK`` over (force, velocity, velocity)."""
        h = self.head_velocity
        return np.einsum("i,j,k->ijk", self.drag0, h, h)

    # --- evaluation -----------------------------------------------------
    def _y(self, xi, eta):
        return np.concatenate([[1.0], np.asarray(xi, float), eta])

    def _yd(self, eta_d):
        return np.concatenate([np.zeros(1 + self.m_xi), eta_d])

    def _spine_T(self, xi):
        T = self.T0.copy()
        if self.m_xi:
            T += np.tensordot(xi, self.T1, 1) + np.tensordot(xi, np.tensordot(xi, self.T2, 1), 1)
        return T

    def internal_force(self, eta, xi):
        K2, K3, K4 = self.K2.at(xi), self.K3.at(xi), self.K4.at(xi)
        return K2 @ eta + np.einsum("ijk,j,k->i", K3, eta, eta) + np.einsum("ijkl,j,k,l->i", K4, eta, eta, eta)

    def spine_force(self, eta, eta_d, eta_dd, xi):
        y, yd = self._y(xi, eta), self._yd(eta_d)
        T = self._spine_T(xi)
        return (np.einsum("IJab,J,a,b->I", T, eta_dd, y, y)
                + np.einsum("IJab,J,a,b->I", T, eta_d, yd, y)
                + np.einsum("IJab,J,a,b->I", T, eta_d, y, yd))

    def _tail_c(self, xi):
        k, z0, Um = self.tail_coef[0], self.tail_coef[1], self.tail_coef[2:]
        z = z0 + (Um @ xi if self.m_xi else 0.0)
        return k * z * z, 2 * k * z * Um

    def tail_force(self, eta, eta_d, xi):
        y = self._y(xi, eta)
        c, _ = self._tail_c(xi)
        s = eta_d @ (self.tail_Gs @ y)
        return c * s * s * (self.tail_Gb @ y)

    def drag_coefficient(self, xi):
        d = self.drag0.copy()
        if self.m_xi:
            d += self.drag1 @ xi + np.einsum("ikl,k,l->i", self.drag2, xi, xi)
        return d

    def drag_force(self, eta_d, xi):
        return self.drag_coefficient(xi) * (self.head_velocity @ eta_d) ** 2

    def actuation_force(self, eta, xi, a):
        a = np.asarray(a, float)
        f = a @ self.B1 + np.einsum("s,sij,j->i", a, self.Bn, eta)
        if self.m_xi:
            f += np.einsum("s,sij,j->i", a, self.Bxi, xi)
        return f

    def residual(self, eta, eta_d, eta_dd, xi, a):
        """``Mr eta_dd + Cr eta_d + f_int - f_tail - f_spine - f_drag - f_act``."""
        xi = np.asarray(xi, float)
        return (self.Mr @ eta_dd + self.Cr @ eta_d + self.internal_force(eta, xi)
                - self.tail_force(eta, eta_d, xi) - self.spine_force(eta, eta_d, eta_dd, xi)
                - self.drag_force(eta_d, xi) - self.actuation_force(eta, xi, a))

    def jacobians(self, eta, eta_d, eta_dd, xi, a):
        """Analytic ``(dr/d eta, dr/d eta_d, dr/d eta_dd, dr/d xi)``."""
        xi = np.asarray(xi, float)
        a = np.asarray(a, float)
        m, mx = self.m, self.m_xi
        sl_x, sl_e = slice(1, 1 + mx), slice(1 + mx, None)
        # internal
        K2, K3, K4 = self.K2.at(xi), self.K3.at(xi), self.K4.at(xi)
        Kt = (K2 + np.einsum("ijk,k->ij", K3 + np.swapaxes(K3, 1, 2), eta)
              + np.einsum("ijkl,k,l->ij", K4 + np.swapaxes(K4, 1, 2) + np.swapaxes(K4, 1, 3), eta, eta))
        Rx = np.zeros((m, mx))
        if mx:
            Rx += (np.einsum("kij,j->ik", self.K2.dxi(xi), eta)
                   + np.einsum("kijl,j,l->ik", self.K3.dxi(xi), eta, eta)
                   + np.einsum("kijlp,j,l,p->ik", self.K4.dxi(xi), eta, eta, eta))
        Re, Red, Redd = Kt.copy(), self.Cr.copy(), self.Mr.copy()
        # spine
        y, yd = self._y(xi, eta), self._yd(eta_d)
        T = self._spine_T(xi)
        dfdy = (np.einsum("IJcb,J,b->Ic", T, eta_dd, y) + np.einsum("IJac,J,a->Ic", T, eta_dd, y)
                + np.einsum("IJac,J,a->Ic", T, eta_d, yd) + np.einsum("IJcb,J,b->Ic", T, eta_d, yd))
        dfdyd = np.einsum("IJcb,J,b->Ic", T, eta_d, y) + np.einsum("IJac,J,a->Ic", T, eta_d, y)
        dfdv = np.einsum("IJab,a,b->IJ", T, yd, y) + np.einsum("IJab,a,b->IJ", T, y, yd)
        Re -= dfdy[:, sl_e]
        Red -= dfdyd[:, sl_e] + dfdv
        Redd -= np.einsum("IJab,a,b->IJ", T, y, y)
        if mx:
            dT = self.T1 + np.tensordot(xi, self.T2, axes=([0], [1])) + np.tensordot(xi, self.T2, axes=([0], [0]))
            Rx -= dfdy[:, sl_x]
            Rx -= (np.einsum("kIJab,J,a,b->Ik", dT, eta_dd, y, y)
                   + np.einsum("kIJab,J,a,b->Ik", dT, eta_d, yd, y)
                   + np.einsum("kIJab,J,a,b->Ik", dT, eta_d, y, yd))
        # tail
        c, dc = self._tail_c(xi)
        gs, gb = self.tail_Gs @ y, self.tail_Gb @ y
        s = eta_d @ gs
        dtdy = c * (2 * s * np.outer(gb, eta_d @ self.tail_Gs) + s * s * self.tail_Gb)
        Re -= dtdy[:, sl_e]
        Red -= c * 2 * s * np.outer(gb, gs)
        if mx:
            Rx -= dtdy[:, sl_x] + s * s * np.outer(gb, dc)
        # drag
        vh = self.head_velocity @ eta_d
        dcoef = self.drag_coefficient(xi)
        Red -= 2 * vh * np.outer(dcoef, self.head_velocity)
        if mx:
            Rx -= (self.drag1 + np.einsum("ikl,l->ik", self.drag2 + np.swapaxes(self.drag2, 1, 2), xi)) * vh ** 2
        # actuation
        Re -= np.einsum("s,sij->ij", a, self.Bn)
        if mx:
            Rx -= np.einsum("s,sij->ij", a, self.Bxi)
        return Re, Red, Redd, Rx

    # --- outputs ----------------------------------------------------------
    def head_displacement(self, eta):
        return np.asarray(eta) @ self.head_row

    def tail_lateral(self, eta):
        return np.asarray(eta) @ self.tail_row


def eval_reduced_residual(model, eta, eta_d, eta_dd, xi, t, signals):
    return model.residual(eta, eta_d, eta_dd, xi, signals(t))


def reduced_jacobians(model, eta, eta_d, eta_dd, xi, t, signals):
    return model.jacobians(eta, eta_d, eta_dd, xi, signals(t))


# --- construction -----------------------------------------------------------

def reduce_internal(mesh, U, V, material, expansion_order=1, chunk=None, budget=2.0e8):
    """Sum of element tensors projected with ``V`` restricted to each element.

    Elements are processed in chunks sized so that the largest per-chunk
    coefficient array (the xi-quadratic part of K4) stays within ``budget`` bytes.
    """
    m, mx = V.shape[1], U.shape[1]
    stored = 8.0 * (1 + mx + mx * mx) * m ** 4
    if stored > 4 * budget:
        raise ValueError(f"dense reduced K4 would need {stored / 1e9:.1f} GB; use a smaller basis")
    if chunk is None:
        per_elem = 8.0 * 4 * max(1, mx) ** 2 * m ** 4
        chunk = int(max(1, min(256, budget // per_elem)))
    grads, vol = tet_gradients(mesh.nodes, mesh.tets)
    edofs = mesh.element_dofs
    Gam = gamma_operator(grads)
    Dxi = shape_gradients(grads, U[edofs])
    W = V[edofs]
    total = None
    for s in range(0, len(vol), chunk):
        sl = slice(s, s + chunk)
        part = tensor_polys(Gam[sl], vol[sl], Dxi[sl], material, expansion_order, W=W[sl])
        summed = {k: [c.sum(axis=0) for c in v] for k, v in part.items()}
        if total is None:
            total = summed
        else:
            for k in total:
                total[k] = [a + b for a, b in zip(total[k], summed[k])]
    return _poly(total["K2"]), _poly(total["K3"]), _poly(total["K4"])


def reduce_spine(mesh, basis, V, rho):
    """``T0, T1, T2`` spine families and the tail factors."""
    R = ROTATION
    X = np.column_stack([mesh.nodes.ravel(), basis.U, V])
    aft, fore = mesh.spine_elements[:, 1], mesh.spine_elements[:, 2]
    ad, fd = 3 * aft[:, None] + np.arange(3), 3 * fore[:, None] + np.arange(3)
    w = 1.0 / np.linalg.norm(mesh.nodes[fore] - mesh.nodes[aft], axis=1)
    AV = V[ad]                                  # (ns, 3, m)
    BX = X[fd] - X[ad]                          # (ns, 3, p)
    G = np.einsum("sim,ij,sjp->smp", AV, R, BX)  # AV^T R B X
    # m~ = pi rho (z0 + Uz xi)^2, force coefficient -m~ w
    base = -np.pi * rho * w
    z0, Uz = basis.z0_max, basis.U_max
    T = np.einsum("sIa,sJb->sIJab", G, G)
    T0 = np.einsum("s,sIJab->IJab", base * z0 ** 2, T)
    T1 = np.einsum("s,sk,sIJab->kIJab", 2 * base * z0, Uz, T)
    T2 = np.einsum("s,sk,sl,sIJab->klIJab", base, Uz, Uz, T)
    tail = dict(Gb=np.einsum("im,ip->mp", AV[0], BX[0]), Gs=G[0],
                coef=np.concatenate([[0.5 * w[0] ** 3 * np.pi * rho, z0[0]], Uz[0]]))
    return T0, T1, T2, tail


def reduce_model(mesh, basis, V, system, rho, muscle_stiffness, expansion_order=1, chunk=None):
    """Build the full ReducedModel at the nominal shape of ``mesh``."""
    V = np.asarray(V, float)
    if V.shape[0] != mesh.n_dofs or basis.U.shape[0] != mesh.n_dofs:
        raise ValueError("basis dimensions do not match the mesh")
    U = basis.U
    Mr = V.T @ (system.M @ V)
    Cr = V.T @ (system.C @ V)
    K2, K3, K4 = reduce_internal(mesh, U, V, system.material, expansion_order, chunk)
    T0, T1, T2, tail = reduce_spine(mesh, basis, V, rho)
    fam = drag_taylor_tensors(mesh, basis, rho)
    S = fam.scatter @ V                         # (nf, m)
    c = -0.5 * rho
    drag0 = c * fam.g0 @ S
    drag1 = c * np.einsum("fk,fi->ik", fam.g1, S)
    drag2 = c * np.einsum("fkl,fi->ikl", fam.g2, S)
    head = 3 * mesh.head_node + np.arange(3)
    hv = mesh.d_swim @ V[head]
    B1, Bn, Bxi = [], [], []
    for side, els in (("left", mesh.muscle_left), ("right", mesh.muscle_right)):
        gm = assemble_muscle(mesh, els, muscle_stiffness, side)
        B1.append(V.T @ gm.b)
        KV = gm.K @ V
        Bn.append(V.T @ KV)
        Bxi.append(V.T @ (gm.K @ U) if U.shape[1] else np.zeros((V.shape[1], 0)))
    return ReducedModel(Mr=Mr, Cr=Cr, K2=K2, K3=K3, K4=K4, T0=T0, T1=T1, T2=T2,
                        tail_Gb=tail["Gb"], tail_Gs=tail["Gs"], tail_coef=tail["coef"],
                        drag0=drag0, drag1=drag1, drag2=drag2, head_velocity=hv,
                        B1=np.array(B1), Bn=np.array(Bn), Bxi=np.array(Bxi),
                        head_row=hv.copy(), tail_row=V[3 * mesh.tail_node + 1].copy(), rho=float(rho))


# --- binary dump ------------------------------------------------------------

_MAGIC = b"SWIMPROM"
_VERSION = 1


def _flat_items(model):
    for f in fields(model):
        v = getattr(model, f.name)
        if isinstance(v, PolyTensor):
            for i, c in enumerate((v.c0, v.c1, v.c2)):
                yield f"{f.name}.c{i}", c
        elif f.name == "rho":
            yield "rho", np.array([v])
        else:
            yield f.name, v


def dump_model(model, path):
    """Write ``model`` as: magic, version, dimension block (m, m_xi, count), arrays.

    Each array record is ``name length, name, ndim, shape`` followed by the
    little-endian float64 payload.
    """
    import os
    import tempfile
    items = list(_flat_items(model))
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<I", _VERSION))
        fh.write(struct.pack("<qqq", model.m, model.m_xi, len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype="<f8")
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)) + nb + struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.tobytes())
    os.replace(tmp, path)


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _MAGIC:
        raise ValueError("not a reduced model file")
    if len(data) < 36:
        raise ValueError("corrupt reduced model file: truncated header")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != _VERSION:
        raise ValueError(f"unsupported reduced model version {version}")
    try:
        arrays, m, m_xi = _read_records(data)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise ValueError(f"corrupt reduced model file: {exc}") from exc
    kw = {}
    for f in fields(ReducedModel):
        if f.name in ("K2", "K3", "K4"):
            kw[f.name] = PolyTensor(*(arrays[f"{f.name}.c{i}"] for i in range(3)))
        elif f.name == "rho":
            kw["rho"] = float(arrays["rho"][0])
        else:
            kw[f.name] = arrays[f.name]
    model = ReducedModel(**kw)
    if model.m != m or model.m_xi != m_xi:
        raise ValueError("dimension block does not match payload")
    return model


def _read_records(data):
    m, m_xi, count = struct.unpack_from("<qqq", data, 12)
    pos = 36
    arrays = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<I", data, pos)
        name = data[pos + 4:pos + 4 + ln].decode()
        pos += 4 + ln
        (nd,) = struct.unpack_from("<I", data, pos)
        shape = struct.unpack_from(f"<{nd}q", data, pos + 4)
        pos += 4 + 8 * nd
        size = int(np.prod(shape)) if nd else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    missing = [n for n in _expected_names() if n not in arrays]
    if missing:
        raise ValueError(f"missing arrays {missing}")
    return arrays, m, m_xi


def _expected_names():
    for f in fields(ReducedModel):
        if f.name in ("K2", "K3", "K4"):
            yield from (f"{f.name}.c{i}" for i in range(3))
        else:
            yield f.name
