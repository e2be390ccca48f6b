import numpy as np
import pytest

from swimprom import actuation as act
from swimprom.checks import check_l1_structure
from swimprom.mesh import tet_gradients


def test_signal_examples():
    assert np.isclose(act.actuation_signal(0.25, 0.2, 1.0, "left"), 0.2)
    assert np.isclose(act.actuation_signal(0.25, 0.2, 1.0, "right"), -0.2)
    assert act.actuation_signal(0.0, 0.2, 1.0, "left") == 0
    with pytest.raises(ValueError):
        act.actuation_signal(0.1, side="up")


def test_l1_table():
    assert np.count_nonzero(act.L1) == 27
    assert set(np.unique(act.L1)) == {0.0, 1.0}
    assert check_l1_structure().passed
    bad = act.L1.copy()
    bad[0, 0, 0] = 0.0
    assert not check_l1_structure(bad).passed


def test_l1_reconstructs_quadratic_term(rng):
    # m_V . (A1(theta) theta) equals |D m|^2 for theta = vec(D)
    for _ in range(5):
        D = rng.normal(size=(3, 3))
        m = rng.normal(size=3)
        m /= np.linalg.norm(m)
        th = D.reshape(9)
        assert np.isclose(act.voigt_direction(m) @ act.A1(th) @ th, np.sum((D @ m) ** 2))


def _data(case):
    return act.muscle_data(case.mesh, case.mesh.muscle_left, 5e4)


def test_energy_matches_matrix_form(case, rng):
    d = _data(case)
    grads, vol = tet_gradients(case.mesh.nodes, case.mesh.tets[d.elements])
    ux, u = 1e-2 * rng.normal(size=(2, len(vol), 12))
    e1 = act.muscle_energy(d, ux, u, 0.3)
    e2 = act.matrix_form_energy(grads, vol, d.direction, 5e4, ux, u, 0.3)
    assert np.allclose(e1, e2, rtol=1e-12)


def test_force_is_energy_gradient(case, rng):
    d = _data(case)
    ne = len(d.elements)
    ux, u = 1e-2 * rng.normal(size=(2, ne, 12))
    f = act.actuation_force(d, ux, u, 0.3)
    h = 1e-6
    for L in range(12):
        e = np.zeros((ne, 12))
        e[:, L] = h
        fd = (act.muscle_energy(d, ux, u + e, 0.3) - act.muscle_energy(d, ux, u - e, 0.3)) / (2 * h)
        assert np.allclose(f[:, L], fd, rtol=1e-7, atol=1e-9 * np.abs(f).max())


def test_translation_invariance(case, rng):
    d = _data(case)
    ne = len(d.elements)
    ux, u = 1e-2 * rng.normal(size=(2, ne, 12))
    shift = np.tile(rng.normal(size=3), 4)
    assert np.allclose(act.actuation_force(d, ux, u + shift, 0.2), act.actuation_force(d, ux, u, 0.2))


def test_global_assembly(case, rng):
    m = case.mesh
    g = act.assemble_muscle(m, m.muscle_left, 5e4, "left")
    d = _data(case)
    uxi, u = 1e-2 * rng.normal(size=(2, m.n_dofs))
    ed = m.element_dofs[d.elements]
    fe = act.actuation_force(d, uxi[ed], u[ed], 0.4)
    ref = np.zeros(m.n_dofs)
    np.add.at(ref, ed.ravel(), fe.ravel())
    assert np.allclose(0.4 * (g.b + g.K @ (u + uxi)), ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())
    assert abs(g.K - g.K.T).max() < 1e-12 * abs(g.K).max()


def test_invalid_stiffness(case):
    with pytest.raises(ValueError):
        act.muscle_data(case.mesh, case.mesh.muscle_left, 0.0)
