"""Tetrahedral fish meshes: generation, region tagging, ASCII I/O and geometry helpers."""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field, replace

import numpy as np


class MeshError(ValueError):
    """Invalid mesh definition or geometry."""


# reference-element shape function derivatives for a linear tet
_DN_REF = np.array([[-1.0, -1.0, -1.0],
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, 0.0, 1.0]])


def tet_volumes(nodes, tets):
    """Signed volumes of every tet."""
    X = nodes[tets]
    e = X[:, 1:] - X[:, :1]
    return np.linalg.det(e) / 6.0


def tet_gradients(nodes, tets):
    """Shape function gradients (ne, 4, 3) and signed volumes (ne,)."""
    X = nodes[tets]
    J = np.swapaxes(X[:, 1:] - X[:, :1], 1, 2)  # columns are edge vectors
    det = np.linalg.det(J)
    if np.any(np.abs(det) < 1e-300):
        raise MeshError("singular element Jacobian")
    Jinv = np.linalg.inv(J)
    grads = np.einsum("ar,erj->eaj", _DN_REF, Jinv)
    return grads, det / 6.0


def face_area_vectors(nodes, faces):
    """Half cross products of the face edges; norm is the area, direction the normal."""
    X = nodes[faces]
    return 0.5 * np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0])


@dataclass(frozen=True)
class TaggedMesh:
    """Nominal tet mesh with the regions the swimmer model needs.

    ``spine_elements`` rows are ``(element, aft node, fore node, dorsal node)``
    ordered from tail to head. ``constrained_dofs`` are global DOF indices
    (``3 * node + component``) held at zero displacement.
    """

    nodes: np.ndarray
    tets: np.ndarray
    spine_elements: np.ndarray
    tail_node: int
    head_node: int
    muscle_left: np.ndarray
    muscle_right: np.ndarray
    skin_faces: np.ndarray
    constrained_dofs: np.ndarray
    d_swim: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    muscle_direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_dofs(self):
        return 3 * len(self.nodes)

    @property
    def n_elements(self):
        return len(self.tets)

    @property
    def element_dofs(self):
        return (3 * self.tets[:, :, None] + np.arange(3)).reshape(-1, 12)

    @property
    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.flatnonzero(mask)

    @property
    def volumes(self):
        return tet_volumes(self.nodes, self.tets)

    @property
    def skin_areas(self):
        return np.linalg.norm(face_area_vectors(self.nodes, self.skin_faces), axis=1)

    @property
    def skin_normals(self):
        a = face_area_vectors(self.nodes, self.skin_faces)
        return a / np.linalg.norm(a, axis=1, keepdims=True)

    @property
    def muscle_volume(self):
        vol = self.volumes
        return float(vol[self.muscle_left].sum() + vol[self.muscle_right].sum())

    def with_nodes(self, nodes):
        """Same connectivity and regions on new coordinates."""
        return replace(self, nodes=np.asarray(nodes, dtype=float))

    def validate(self):
        vol = self.volumes
        if np.any(vol <= 0):
            raise MeshError(f"{int(np.sum(vol <= 0))} tets with non-positive volume")
        spine_nodes = np.concatenate([self.spine_elements[:, 1], self.spine_elements[-1:, 2]])
        if self.spine_elements[0, 1] != self.tail_node:
            raise MeshError("spine chain does not start at the tail node")
        if np.any(self.spine_elements[1:, 1] != self.spine_elements[:-1, 2]):
            raise MeshError("spine elements are not a connected chain")
        for e, a, f, _ in self.spine_elements:
            if a not in self.tets[e] or f not in self.tets[e]:
                raise MeshError(f"spine element {e} does not contain its spine nodes")
        return spine_nodes


def _kuhn_tets(mirror_y):
    """Six tets of the unit cube as corner offsets, optionally mirrored in y."""
    out = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for ax in perm:
            nxt = path[-1].copy()
            nxt[ax] = 1
            path.append(nxt)
        pts = np.array(path)
        if mirror_y:
            pts[:, 1] = 1 - pts[:, 1]
        out.append(pts)
    return out


def generate_block_mesh(length, width, height, cells, head_fraction=0.25,
                        muscle_depth_fraction=0.5):
    """Structured fish block: x from tail (0) to head (``length``), centered in y and z.

    Each hex cell is split into six tets; cells on the negative-y side use the
    mirrored split so that the mesh is symmetric about the y = 0 plane.
    """
    nx, ny, nz = (int(c) for c in cells)
    if min(length, width, height) <= 0:
        raise MeshError("block dimensions must be positive")
    if min(nx, ny, nz) < 1:
        raise MeshError("need at least one cell per axis")
    if ny % 2:
        raise MeshError("width cell count must be even to place nodes on the symmetry plane")

    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(-width / 2, width / 2, ny + 1)
    ys[ny // 2] = 0.0
    zs = np.linspace(-height / 2, height / 2, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    patterns = {False: _kuhn_tets(False), True: _kuhn_tets(True)}
    tets, cell_of = [], []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                for pts in patterns[j < ny // 2]:
                    tets.append([nid(i + p[0], j + p[1], k + p[2]) for p in pts])
                    cell_of.append((i, j, k))
    tets = np.array(tets)
    cell_of = np.array(cell_of)
    vol = tet_volumes(nodes, tets)
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()

    jm, ks = ny // 2, nz // 2
    spine_nodes = [nid(i, jm, ks) for i in range(nx + 1)]
    dorsal = [nid(i, jm, nz) for i in range(nx + 1)]
    node_sets = [set(t) for t in tets]
    spine = []
    for i in range(nx):
        a, f = spine_nodes[i], spine_nodes[i + 1]
        e = next(idx for idx, s in enumerate(node_sets) if a in s and f in s)
        spine.append((e, a, f, dorsal[i]))

    head_start = (1.0 - head_fraction) * length
    head_nodes = np.flatnonzero(nodes[:, 0] >= head_start - 1e-12 * length)
    constrained = np.sort(np.concatenate([3 * head_nodes + 1, 3 * head_nodes + 2]))

    xc = (cell_of[:, 0] + 0.5) * length / nx
    zc = -height / 2 + (cell_of[:, 2] + 0.5) * height / nz
    band = (xc < head_start) & (np.abs(zc) < muscle_depth_fraction * height / 2)
    # facing +x with z up, the left flank is +y
    left = np.flatnonzero(band & (cell_of[:, 1] == ny - 1))
    right = np.flatnonzero(band & (cell_of[:, 1] == 0))

    mesh = TaggedMesh(
        nodes=nodes,
        tets=tets,
        spine_elements=np.array(spine, dtype=int),
        tail_node=spine_nodes[0],
        head_node=spine_nodes[-1],
        muscle_left=left,
        muscle_right=right,
        skin_faces=boundary_faces(nodes, tets),
        constrained_dofs=constrained,
    )
    mesh.validate()
    return mesh


def boundary_faces(nodes, tets):
    """Faces owned by exactly one tet, oriented with outward normals."""
    local = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0)]
    count, owner = {}, {}
    for e, t in enumerate(tets):
        for a, b, c, d in local:
            key = tuple(sorted((t[a], t[b], t[c])))
            count[key] = count.get(key, 0) + 1
            owner[key] = ((t[a], t[b], t[c]), t[d])
    faces = []
    for key in sorted(k for k, n in count.items() if n == 1):
        (a, b, c), opp = owner[key]
        n = np.cross(nodes[b] - nodes[a], nodes[c] - nodes[a])
        if np.dot(n, nodes[a] - nodes[opp]) < 0:
            b, c = c, b
        faces.append((a, b, c))
    return np.array(faces, dtype=int)


# --- ASCII format -------------------------------------------------------

_INT_SETS = {
    "spine": "spine_elements",
    "muscle_left": "muscle_left",
    "muscle_right": "muscle_right",
    "skin": "skin_faces",
    "constrained": "constrained_dofs",
}


def write_mesh(mesh, path):
    """Write the ``tet4`` ASCII format. Floats use 17 significant digits."""
    lines = ["tet4", str(mesh.n_nodes)]
    lines += [" ".join(f"{v:.17g}" for v in p) for p in mesh.nodes]
    lines.append(str(mesh.n_elements))
    lines += [" ".join(str(int(v)) for v in t) for t in mesh.tets]
    lines += ["set tail 1", str(int(mesh.tail_node)), "set head 1", str(int(mesh.head_node))]
    for name, attr in _INT_SETS.items():
        arr = np.atleast_1d(getattr(mesh, attr))
        lines.append(f"set {name} {len(arr)}")
        for row in arr:
            lines.append(" ".join(str(int(v)) for v in np.atleast_1d(row)))
    for name in ("d_swim", "muscle_direction"):
        lines.append(f"set {name} 1")
        lines.append(" ".join(f"{v:.17g}" for v in getattr(mesh, name)))
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_mesh(path):
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip()]
    if not tokens or tokens[0] != ["tet4"]:
        raise MeshError(f"{path}: expected 'tet4' header")
    pos = 1
    n = int(tokens[pos][0])
    nodes = np.array([[float(v) for v in r] for r in tokens[pos + 1:pos + 1 + n]])
    pos += 1 + n
    ne = int(tokens[pos][0])
    tets = np.array([[int(v) for v in r] for r in tokens[pos + 1:pos + 1 + ne]], dtype=int)
    pos += 1 + ne
    sets = {}
    while pos < len(tokens):
        head = tokens[pos]
        if head[0] != "set" or len(head) != 3:
            raise MeshError(f"{path}: malformed set header {' '.join(head)!r}")
        name, count = head[1], int(head[2])
        sets[name] = tokens[pos + 1:pos + 1 + count]
        pos += 1 + count

    def ints(name, flat=False):
        rows = [[int(v) for v in r] for r in sets.get(name, [])]
        arr = np.array(rows, dtype=int)
        return arr.reshape(-1) if flat else arr

    kw = {}
    for name in ("d_swim", "muscle_direction"):
        if name in sets:
            kw[name] = np.array([float(v) for v in sets[name][0]])
    mesh = TaggedMesh(
        nodes=nodes,
        tets=tets,
        spine_elements=ints("spine").reshape(-1, 4),
        tail_node=int(ints("tail", True)[0]),
        head_node=int(ints("head", True)[0]),
        muscle_left=ints("muscle_left", True),
        muscle_right=ints("muscle_right", True),
        skin_faces=ints("skin").reshape(-1, 3),
        constrained_dofs=ints("constrained", True),
        **kw,
    )
    mesh.validate()
    return mesh
