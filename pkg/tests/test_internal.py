import numpy as np

from swimprom.fem import Material
from swimprom.internal import (direct_internal_force, element_internal_tensors, exact_internal_force,
                               truncated_energy)

MAT = Material(2e5, 0.45)
X = np.array([[0.0, 0.0, 0.0], [0.02, 0.001, -0.002], [0.003, 0.015, 0.001], [0.001, 0.002, 0.018]])


def _setup(rng, m_xi=3):
    return 0.01 * rng.normal(size=(12, m_xi))


def test_tensor_force_matches_direct(rng):
    Ue = _setup(rng)
    for order in (1, 2):
        fam = element_internal_tensors(X, MAT, Ue, order)
        for _ in range(20):
            xi, u = rng.uniform(-0.5, 0.5, 3), 2e-3 * rng.normal(size=12)
            ref = direct_internal_force(X, MAT, Ue, xi, u, order)
            assert np.linalg.norm(fam.force(u, xi) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_nominal_tensors_are_exact_svk(rng):
    Ue = _setup(rng)
    fam = element_internal_tensors(X, MAT, Ue)
    u = 5e-3 * rng.normal(size=12)
    ref = exact_internal_force(X, MAT, Ue, np.zeros(3), u)
    assert np.linalg.norm(fam.force(u, np.zeros(3)) - ref) < 1e-12 * np.linalg.norm(ref)
    assert np.allclose(fam.K2.c0, fam.K2.c0.T, atol=1e-12 * np.abs(fam.K2.c0).max())


def test_truncation_error_order(rng):
    Ue = _setup(rng)
    u = 2e-3 * rng.normal(size=12)
    d = rng.normal(size=3)
    for order in (1, 2):
        fam = element_internal_tensors(X, MAT, Ue, order)
        errs = []
        for s in (0.1, 0.05):
            ref = exact_internal_force(X, MAT, Ue, s * d, u)
            errs.append(np.linalg.norm(fam.force(u, s * d) - ref))
        # error of an order-p expansion in the inverse Jacobian decays like s^(p+1)
        assert np.log2(errs[0] / errs[1]) > order + 0.8


def test_force_is_gradient_of_truncated_energy(rng):
    Ue = _setup(rng)
    fam = element_internal_tensors(X, MAT, Ue, 2)
    xi, u = rng.uniform(-0.3, 0.3, 3), 3e-3 * rng.normal(size=12)
    h = 1e-7
    fd = np.array([(truncated_energy(X, MAT, Ue, xi, u + h * e, 2) - truncated_energy(X, MAT, Ue, xi, u - h * e, 2))
                   / (2 * h) for e in np.eye(12)])
    f = fam.force(u, xi)
    assert np.linalg.norm(f - fd) < 1e-6 * np.linalg.norm(f)


def test_tangent_and_xi_derivative(rng):
    Ue = _setup(rng)
    fam = element_internal_tensors(X, MAT, Ue, 2)
    xi, u, d = rng.uniform(-0.3, 0.3, 3), 3e-3 * rng.normal(size=12), rng.normal(size=12)
    h = 1e-7
    fd = (fam.force(u + h * d, xi) - fam.force(u - h * d, xi)) / (2 * h)
    assert np.linalg.norm(fam.tangent(u, xi) @ d - fd) < 1e-7 * np.linalg.norm(fd)
    dx = rng.normal(size=3)
    fd = (fam.K2.at(xi + h * dx) - fam.K2.at(xi - h * dx)) / (2 * h)
    an = np.tensordot(dx, fam.K2.dxi(xi), axes=1)
    assert np.abs(an - fd).max() < 1e-6 * np.abs(fd).max()


def test_no_parameters(rng):
    fam = element_internal_tensors(X, MAT, np.zeros((12, 0)))
    u = 1e-3 * rng.normal(size=12)
    assert fam.K2.c1.shape == (0, 12, 12)
    assert np.allclose(fam.force(u, np.zeros(0)), exact_internal_force(X, MAT, np.zeros((12, 0)), np.zeros(0), u))
