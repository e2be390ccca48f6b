import numpy as np
import pytest

from swimprom.shapes import FIELD_LIBRARY, PRESETS, InvalidShapeError, build_shape_basis, morph


def test_so1_basis(case):
    b, m = case.basis, case.mesh
    assert b.names == ("height_taper", "width_taper", "tail_fin")
    assert np.allclose(b.bounds, [[-0.5, 0.5], [-0.5, 0.5], [-0.3, 0.3]])
    assert np.all(b.U[m.constrained_dofs] == 0)
    assert np.array_equal(b.z0_max, m.nodes[m.spine_elements[:, 3], 2])
    assert np.all(b.z0_max > 0)


def test_morph_linear_in_xi(case):
    m, b = case.mesh, case.basis
    nodes0, v0 = morph(m, b, np.zeros(3))
    assert np.array_equal(nodes0, m.nodes)
    xi = np.array([0.2, -0.1, 0.15])
    nodes, _ = morph(m, b, xi)
    assert np.allclose((nodes - m.nodes).ravel(), b.U @ xi)
    # height taper scales the tail section only, the head is rigid
    head = m.nodes[:, 0] >= 0.15 - 1e-12
    assert np.allclose(nodes[head], m.nodes[head])


def test_all_presets_valid_at_corners(case):
    import itertools
    for name, fields in PRESETS.items():
        b = build_shape_basis(case.mesh, fields)
        assert b.n_params == len(fields), name
        for c in itertools.product(*b.bounds):
            assert morph(case.mesh, b, np.array(c))[1] > 0, (name, c)


def test_morph_examples(case):
    m = case.mesh
    scale = build_shape_basis(m, [("length_scaling", (-0.2, 0.2))], check_bounds=False)
    # constrained head DOFs only fix y and z, so x scales everywhere
    nodes, _ = morph(m, scale, np.array([0.1]))
    assert np.isclose(np.ptp(nodes[:, 0]), 1.1 * np.ptp(m.nodes[:, 0]))
    zero = build_shape_basis(m, [("zero", lambda p, box: 0 * p, (-1, 1))])
    assert np.all(zero.U == 0) and np.array_equal(morph(m, zero, np.array([0.7]))[0], m.nodes)
    xa, xb = np.array([0.1, -0.2, 0.05]), np.array([0.15, 0.1, -0.1])
    once, _ = morph(m, case.basis, xa + xb)
    twice = m.nodes + (case.basis.U @ xa + case.basis.U @ xb).reshape(-1, 3)
    assert np.allclose(once, twice, rtol=0, atol=1e-15)


def test_bounds_and_inversion(case):
    m, b = case.mesh, case.basis
    with pytest.raises(InvalidShapeError):
        morph(m, b, np.array([0.6, 0.0, 0.0]))
    with pytest.raises(InvalidShapeError):
        morph(m, b, np.array([-3.0, 0.0, 0.0]), enforce_bounds=False)
    with pytest.raises(ValueError):
        morph(m, b, np.zeros(2))
    assert b.inside([0.0, 0.0, 0.0]) and not b.inside([0.5, 0.0, 0.0])
    assert b.inside([0.5, 0.0, 0.0], strict=False)


def test_invalid_field_and_bounds(case):
    with pytest.raises(InvalidShapeError):
        build_shape_basis(case.mesh, [("nan_field", lambda p, box: np.full_like(p, np.nan), (-1, 1))])
    with pytest.raises(ValueError):
        build_shape_basis(case.mesh, [("height_taper", (0.5, -0.5))])
    assert build_shape_basis(case.mesh, []).U.shape == (case.mesh.n_dofs, 0)


def test_library_fields_finite(case):
    from swimprom.shapes import mesh_box
    box = mesh_box(case.mesh)
    for name, (fn, (lo, hi)) in FIELD_LIBRARY.items():
        d = fn(case.mesh.nodes, box)
        assert d.shape == (case.mesh.n_nodes, 3) and np.all(np.isfinite(d)), name
        assert lo < hi
