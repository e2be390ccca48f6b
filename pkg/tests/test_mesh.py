import numpy as np
import pytest

from swimprom.mesh import MeshError, boundary_faces, generate_block_mesh, read_mesh, tet_volumes, write_mesh


def test_block_mesh_regions(case):
    m = case.mesh
    assert m.n_elements == 6 * 2 * 3 * 6
    assert np.all(m.volumes > 0)
    assert np.isclose(m.volumes.sum(), 0.2 * 0.04 * 0.1)
    m.validate()
    # spine runs tail to head along x on the symmetry plane
    spine = np.concatenate([m.spine_elements[:, 1], m.spine_elements[-1:, 2]])
    assert np.all(np.diff(m.nodes[spine, 0]) > 0)
    assert np.allclose(m.nodes[spine, 1], 0.0)
    assert m.tail_node == spine[0] and m.head_node == spine[-1]
    # muscles are mirror images and disjoint
    assert len(m.muscle_left) == len(m.muscle_right) > 0
    assert not set(m.muscle_left) & set(m.muscle_right)
    cl = m.nodes[m.tets[m.muscle_left]].mean(axis=1)
    cr = m.nodes[m.tets[m.muscle_right]].mean(axis=1)
    assert np.all(cl[:, 1] > 0) and np.all(cr[:, 1] < 0)
    assert np.isclose(m.volumes[m.muscle_left].sum(), m.volumes[m.muscle_right].sum())


def test_skin_is_closed_surface(case):
    m = case.mesh
    # sum of outward area vectors over a closed surface vanishes
    a = 0.5 * np.cross(*(m.nodes[m.skin_faces[:, k]] - m.nodes[m.skin_faces[:, 0]] for k in (1, 2)))
    assert np.abs(a.sum(axis=0)).max() < 1e-15
    assert len(boundary_faces(m.nodes, m.tets)) == len(m.skin_faces)
    assert np.isclose(m.skin_areas.sum(), 2 * (0.2 * 0.04 + 0.2 * 0.1 + 0.04 * 0.1))


def test_constraints_only_in_head(case):
    m = case.mesh
    nodes = np.unique(m.constrained_dofs // 3)
    assert np.all(m.nodes[nodes, 0] >= m.nodes[:, 0].max() - 0.25 * 0.2 - 1e-12)
    # swim direction DOFs stay free so the body can translate
    assert not np.any(m.constrained_dofs % 3 == 0)


def test_roundtrip_bit_exact(case, tmp_path):
    m = case.mesh.with_nodes(case.mesh.nodes + 1e-3 * np.sin(np.arange(case.mesh.n_dofs)).reshape(-1, 3))
    p = tmp_path / "fish.txt"
    write_mesh(m, str(p))
    r = read_mesh(str(p))
    assert np.array_equal(r.nodes, m.nodes)
    assert np.array_equal(r.tets, m.tets)
    assert np.array_equal(r.spine_elements, m.spine_elements)
    assert np.array_equal(r.skin_faces, m.skin_faces)
    assert np.array_equal(r.constrained_dofs, m.constrained_dofs)
    assert r.tail_node == m.tail_node and r.head_node == m.head_node


def test_bad_inputs(tmp_path):
    with pytest.raises(MeshError):
        generate_block_mesh(0.2, 0.04, 0.1, (4, 3, 2))
    with pytest.raises(MeshError):
        generate_block_mesh(-1, 0.04, 0.1, (4, 2, 2))
    p = tmp_path / "bad.txt"
    p.write_text("tet3\n")
    with pytest.raises(MeshError):
        read_mesh(str(p))


def test_inverted_tet_rejected():
    nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    assert tet_volumes(nodes, np.array([[0, 1, 2, 3]]))[0] > 0
    assert tet_volumes(nodes, np.array([[0, 2, 1, 3]]))[0] < 0


def test_toy_mesh_size():
    m = generate_block_mesh(0.2, 0.04, 0.1, (1, 2, 1))
    assert m.n_elements == 12
    m.validate()


def test_unit_box_volume_and_extent():
    m = generate_block_mesh(1.0, 1.0, 1.0, (1, 2, 1))
    assert np.isclose(m.volumes.sum(), 1.0)
    f = generate_block_mesh(0.2, 0.04, 0.1, (6, 2, 3))
    assert f.nodes[f.tail_node, 0] == 0.0
    assert np.isclose(f.nodes[:, 0].max(), 0.2) and f.nodes[f.head_node, 0] == f.nodes[:, 0].max()
    assert np.allclose(np.linalg.norm(f.skin_normals, axis=1), 1.0, atol=1e-12)
