import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from swimprom.fem import Material, consistent_mass, svk_forces, svk_tangents
from swimprom.mesh import tet_gradients

X = np.array([[0.0, 0.0, 0.0], [0.02, 0.001, -0.002], [0.003, 0.015, 0.001], [0.001, 0.002, 0.018]])
MAT = Material(2e5, 0.45)


def _grads():
    return tet_gradients(X, np.array([[0, 1, 2, 3]]))


def _energy(u):
    lam, mu = MAT.lame
    grads, vol = _grads()
    F = np.eye(3) + u.reshape(4, 3).T @ grads[0]
    E = 0.5 * (F.T @ F - np.eye(3))
    return vol[0] * (0.5 * lam * np.trace(E) ** 2 + mu * np.sum(E * E))


def test_material_validation():
    with pytest.raises(ValueError):
        Material(-1.0, 0.3)
    with pytest.raises(ValueError):
        Material(1.0, 0.5)
    lam, mu = Material(1.0, 0.25).lame
    assert np.isclose(lam, 0.4) and np.isclose(mu, 0.4)


def test_svk_force_is_energy_gradient(rng):
    grads, vol = _grads()
    u = 2e-3 * rng.normal(size=12)
    f = svk_forces(grads, vol, u[None], MAT)[0]
    h = 1e-7
    fd = np.array([(_energy(u + h * e) - _energy(u - h * e)) / (2 * h) for e in np.eye(12)])
    assert np.linalg.norm(f - fd) < 1e-6 * np.linalg.norm(f)


def test_svk_tangent_fd(rng):
    grads, vol = _grads()
    u = 2e-3 * rng.normal(size=12)
    K = svk_tangents(grads, vol, u[None], MAT)[0]
    d = rng.normal(size=12)
    h = 1e-7
    fd = (svk_forces(grads, vol, (u + h * d)[None], MAT) - svk_forces(grads, vol, (u - h * d)[None], MAT))[0] / (2 * h)
    assert np.linalg.norm(K @ d - fd) < 1e-7 * np.linalg.norm(fd)
    assert np.allclose(K, K.T, atol=1e-10 * np.abs(K).max())


def test_rigid_rotation_is_stress_free():
    grads, vol = _grads()
    R = Rotation.from_rotvec([0.3, -0.7, 1.1]).as_matrix()
    u = (X @ R.T - X + np.array([0.1, -0.2, 0.05])).ravel()
    f = svk_forces(grads, vol, u[None], MAT)[0]
    assert np.abs(f).max() < 1e-9 * MAT.youngs_modulus * vol[0] ** (2 / 3)


def test_linear_stiffness_null_space(case):
    K = case.system.K_lin.toarray()
    w = np.linalg.eigvalsh(K)
    assert np.sum(np.abs(w) < 1e-8 * w.max()) == 6
    assert np.allclose(K, K.T, atol=1e-10 * w.max())


def test_mass_and_damping(case):
    s, m = case.system, case.mesh
    ones = np.zeros(m.n_dofs)
    ones[0::3] = 1.0
    assert np.isclose(ones @ s.M @ ones, 1000.0 * 0.2 * 0.04 * 0.1)
    assert abs(s.C - (0.0 * s.M + 0.01 * s.K_lin)).max() < 1e-12 * abs(s.K_lin).max()
    me = consistent_mass(np.array([2.0]), 3.0)[0]
    assert np.isclose(me.sum(), 3 * 2.0 * 3.0)


def test_regular_tet_mass_and_zero_damping():
    from swimprom.mesh import TaggedMesh
    nodes = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1.0]])
    tets = np.array([[0, 1, 2, 3]])
    vol = abs(tet_gradients(nodes, tets)[1][0])
    me = consistent_mass(np.array([vol]), 1000.0)[0]
    per_node = me.sum(axis=1).reshape(4, 3)
    assert np.allclose(per_node, 1000.0 * vol / 4)
    mesh = TaggedMesh(nodes=nodes, tets=tets, spine_elements=np.zeros((0, 4), int), tail_node=0, head_node=1,
                      muscle_left=np.zeros(0, int), muscle_right=np.zeros(0, int),
                      skin_faces=np.zeros((0, 3), int), constrained_dofs=np.zeros(0, int))
    from swimprom.fem import assemble_system_matrices
    s = assemble_system_matrices(mesh, 1000.0, MAT, (0.0, 0.0))
    assert s.C.nnz == 0 or abs(s.C).max() == 0


def test_rigid_translation_in_kernel(case):
    r = np.tile([1.0, 0.0, 0.0], case.mesh.n_nodes)
    K = case.system.K_lin
    assert np.linalg.norm(K @ r) <= 1e-9 * abs(K).max() * np.linalg.norm(r)
