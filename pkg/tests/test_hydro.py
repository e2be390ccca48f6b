import numpy as np
import pytest

from swimprom.hydro import (SpineSet, direct_drag, drag_taylor_tensors, eval_drag, reactive_forces, spine_element,
                            spine_force, spine_momentum, tail_force, virtual_mass)
from swimprom.shapes import InvalidShapeError


def _elem_state(case, idx, rng, scale=1e-3):
    m = case.mesh
    edofs = m.element_dofs[m.spine_elements[idx, 0]]
    x0 = m.nodes.ravel()[edofs]
    return edofs, x0, [scale * rng.normal(size=12) for _ in range(4)]


def test_virtual_mass_values():
    assert np.isclose(virtual_mass(1000.0, 0.05, np.zeros(0), []), np.pi / 4 * 1000 * 0.1 ** 2)
    # depth grows linearly with xi so the mass is quadratic
    m = virtual_mass(1000.0, 0.05, np.array([0.05]), [0.2])
    assert np.isclose(m, np.pi / 4 * 1000 * (2 * 0.06) ** 2)
    with pytest.raises(InvalidShapeError):
        virtual_mass(1000.0, 0.05, np.array([0.05]), [-1.5])


def test_spine_force_is_momentum_rate(case, rng):
    el = spine_element(case.mesh, case.basis, 2)
    _, x0, (ux, u0, v0, acc) = _elem_state(case, 2, rng)
    xi = np.array([0.1, -0.2, 0.05])
    traj = lambda t: u0 + t * v0 + 0.5 * t * t * acc  # noqa: E731
    h = 1e-6
    dp = (spine_momentum(el, 1000.0, x0, ux, traj(h), v0 + h * acc, xi)
          - spine_momentum(el, 1000.0, x0, ux, traj(-h), v0 - h * acc, xi)) / (2 * h)
    f = spine_force(el, 1000.0, x0, ux, u0, v0, acc, xi)
    assert np.linalg.norm(f + el.A.T @ dp) < 1e-7 * np.linalg.norm(f)


def test_straight_forward_motion_has_no_reactive_force(case):
    s = SpineSet.from_mesh(case.mesh, case.basis)
    ud = np.zeros(case.mesh.n_dofs)
    ud[0::3] = 0.3
    f = reactive_forces(s, 1000.0, case.mesh.nodes.ravel(), ud, np.zeros_like(ud), np.zeros(3))
    assert np.abs(f).max() < 1e-14


def test_tail_force_quadratic_in_velocity(case, rng):
    el = spine_element(case.mesh, case.basis, 0)
    _, x0, (ux, u, v, _) = _elem_state(case, 0, rng)
    f1 = tail_force(el, 1000.0, x0, ux, u, v)
    assert np.allclose(tail_force(el, 1000.0, x0, ux, u, 2 * v), 4 * f1)
    assert np.allclose(tail_force(el, 1000.0, x0, ux, u, -v), f1)
    # acts only on the aft node
    assert np.count_nonzero(np.abs(f1) > 0) <= 3


def test_global_matches_elements(case, rng):
    m, b = case.mesh, case.basis
    s = SpineSet.from_mesh(m, b)
    xi = np.array([0.1, 0.2, -0.1])
    uxi = b.U @ xi
    u, v, a = (1e-3 * rng.normal(size=m.n_dofs) for _ in range(3))
    x = m.nodes.ravel() + uxi + u
    f = reactive_forces(s, 1000.0, x, v, a, xi)
    ref = np.zeros(m.n_dofs)
    for i in range(len(m.spine_elements)):
        el = spine_element(m, b, i)
        ed = m.element_dofs[m.spine_elements[i, 0]]
        fe = spine_force(el, 1000.0, m.nodes.ravel()[ed], uxi[ed], u[ed], v[ed], a[ed], xi)
        if i == 0:
            fe = fe + tail_force(el, 1000.0, m.nodes.ravel()[ed], uxi[ed], u[ed], v[ed], xi)
        np.add.at(ref, ed, fe)
    assert np.linalg.norm(f - ref) < 1e-12 * np.linalg.norm(ref)


def test_reactive_jacobians_fd(case, rng):
    m = case.mesh
    s = SpineSet.from_mesh(m, case.basis)
    u, v, a = (1e-2 * rng.normal(size=m.n_dofs) for _ in range(3))
    x0 = m.nodes.ravel()
    _, Ku, Cu, Mu = reactive_forces(s, 1000.0, x0 + u, v, a, np.zeros(3), True)
    d = rng.normal(size=m.n_dofs)
    h = 1e-6
    args = [x0 + u, v, a]
    for k, J in enumerate((Ku, Cu, Mu)):
        p, q = list(args), list(args)
        p[k], q[k] = args[k] + h * d, args[k] - h * d
        fd = (reactive_forces(s, 1000.0, *p, np.zeros(3)) - reactive_forces(s, 1000.0, *q, np.zeros(3))) / (2 * h)
        assert np.linalg.norm(J @ d - fd) < 1e-7 * np.linalg.norm(fd)


def test_drag_frontal_area(case):
    fam = drag_taylor_tensors(case.mesh, case.basis, 1000.0)
    # only the front and back faces of the block see the swim direction
    assert np.isclose(fam.g0.sum(), 2 * 2 * 0.04 * 0.1)
    ud = np.zeros(case.mesh.n_dofs)
    ud[3 * case.mesh.head_node] = 0.1
    f = eval_drag(fam, np.zeros(3), ud)
    assert np.isclose(f[0::3].sum(), -0.5 * 1000.0 * 0.016 * 0.01)
    assert np.abs(f[1::3]).max() == 0 and np.abs(f[2::3]).max() == 0
    # drag uses the squared head speed, so it is even in the velocity
    assert np.allclose(eval_drag(fam, np.zeros(3), -ud), f)


def test_drag_taylor_accuracy(case, rng):
    fam = drag_taylor_tensors(case.mesh, case.basis, 1000.0)
    ud = np.zeros(case.mesh.n_dofs)
    ud[3 * case.mesh.head_node] = 0.1
    d = rng.uniform(-1, 1, 3)
    assert np.allclose(eval_drag(fam, np.zeros(3), ud), direct_drag(case.mesh, case.basis, 1000.0, np.zeros(3), ud),
                       rtol=0, atol=1e-15)
    errs = []
    for s in (0.04, 0.02):
        ref = direct_drag(case.mesh, case.basis, 1000.0, s * d, ud)
        errs.append(np.linalg.norm(eval_drag(fam, s * d, ud) - ref) / np.linalg.norm(ref))
    assert errs[0] < 1e-3
    assert errs[1] == 0 or errs[0] / errs[1] > 6  # third-order remainder


def test_drag_coefficient_derivative(case, rng):
    fam = drag_taylor_tensors(case.mesh, case.basis, 1000.0)
    xi, d = rng.uniform(-0.2, 0.2, 3), rng.normal(size=3)
    h = 1e-6
    fd = (fam.coefficient(xi + h * d) - fam.coefficient(xi - h * d)) / (2 * h)
    assert np.allclose(fam.coefficient_dxi(xi) @ d, fd, atol=1e-9 * np.abs(fd).max())


def test_tail_force_hand_evaluation():
    from swimprom.hydro import SpineElement
    L, vy, rho, z0 = 0.05, 0.3, 1000.0, 0.04
    A = np.zeros((3, 12))
    A[:, :3] = np.eye(3)
    B = np.zeros((3, 12))
    B[:, 3:6] = np.eye(3)
    B[:, :3] -= np.eye(3)
    el = SpineElement(A=A, B=B, w=1 / L, z0_max=z0, U_max=np.zeros(0))
    x0 = np.zeros(12)
    x0[3] = L
    v = np.zeros(12)
    v[1] = vy
    f = tail_force(el, rho, x0, np.zeros(12), np.zeros(12), v)
    mt = virtual_mass(rho, z0, np.zeros(0), [])
    assert np.allclose(f[:3], [0.5 * mt * vy ** 2, 0, 0])
    assert np.all(f[3:] == 0)


def test_stationary_fish_feels_no_force(case):
    s = SpineSet.from_mesh(case.mesh, case.basis)
    z = np.zeros(case.mesh.n_dofs)
    assert np.all(reactive_forces(s, 1000.0, case.mesh.nodes.ravel(), z, z, np.zeros(3)) == 0)
    fam = drag_taylor_tensors(case.mesh, case.basis, 1000.0)
    assert np.all(eval_drag(fam, np.array([0.1, 0.1, 0.1]), z) == 0)


def test_mirror_antisymmetry(case, rng):
    m = case.mesh
    s = SpineSet.from_mesh(m, case.basis)
    # in-plane motion: the rotation R fixes z, so the mirror identity holds in the x-y plane
    v, a = (1e-2 * rng.normal(size=m.n_dofs) * np.tile([1.0, 1.0, 0.0], m.n_nodes) for _ in range(2))
    x = m.nodes.ravel()
    flip = np.tile([1.0, -1.0, 1.0], m.n_nodes)
    f = reactive_forces(s, 1000.0, x, v, a, np.zeros(3))
    g = reactive_forces(s, 1000.0, x, flip * v, flip * a, np.zeros(3))
    assert np.allclose(g, flip * f, atol=1e-14 * np.abs(f).max())
