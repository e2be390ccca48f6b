"""Shape-variation fields, the basis U they populate, and mesh morphing."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, tet_volumes


class InvalidShapeError(MeshError):
    """A parameter vector produces an inverted mesh or leaves its bounds."""


def _rear_ramp(x, xh):
    return np.clip(1.0 - x / xh, 0.0, 1.0)


def _bump(x, center, half_width):
    s = np.clip(1.0 - np.abs(x - center) / half_width, 0.0, 1.0)
    return s * s * (3 - 2 * s)


# Each field maps (nodes, box) -> nodal displacement per unit parameter.
# ``box`` holds length, width, height and the x where the rigid head starts.
def height_taper(p, box):
    return np.column_stack([0 * p[:, 0], 0 * p[:, 0], p[:, 2] * _rear_ramp(p[:, 0], box["head_start"])])


def width_taper(p, box):
    return np.column_stack([0 * p[:, 0], p[:, 1] * _rear_ramp(p[:, 0], box["head_start"]), 0 * p[:, 0]])


def tail_fin(p, box):
    r = np.clip(1.0 - p[:, 0] / (0.3 * box["length"]), 0.0, 1.0)
    return np.column_stack([0 * r, 0 * r, p[:, 2] * r])


def peduncle(p, box):
    b = _bump(p[:, 0], 0.25 * box["length"], 0.2 * box["length"])
    return np.column_stack([0 * b, 0 * b, -p[:, 2] * b])


def mid_width(p, box):
    b = _bump(p[:, 0], 0.45 * box["length"], 0.25 * box["length"])
    return np.column_stack([0 * b, p[:, 1] * b, 0 * b])


def tail_height_quadratic(p, box):
    # half amplitude so that stacking with height_taper at its lower bound
    # cannot flatten the tail
    r = _rear_ramp(p[:, 0], box["head_start"]) ** 2
    return np.column_stack([0 * r, 0 * r, 0.5 * p[:, 2] * r])


def forebody_height(p, box):
    b = _bump(p[:, 0], 0.55 * box["length"], 0.2 * box["length"])
    return np.column_stack([0 * b, 0 * b, p[:, 2] * b])


def tail_width_quadratic(p, box):
    r = _rear_ramp(p[:, 0], box["head_start"]) ** 2
    return np.column_stack([0 * r, p[:, 1] * r, 0 * r])


def tail_length(p, box):
    xh = box["head_start"]
    return np.column_stack([-np.clip(xh - p[:, 0], 0.0, None), 0 * p[:, 0], 0 * p[:, 0]])


def length_scaling(p, box):
    return np.column_stack([p[:, 0], 0 * p[:, 0], 0 * p[:, 0]])


FIELD_LIBRARY = {
    "height_taper": (height_taper, (-0.5, 0.5)),
    "width_taper": (width_taper, (-0.5, 0.5)),
    "tail_fin": (tail_fin, (-0.3, 0.3)),
    "peduncle": (peduncle, (-0.4, 0.4)),
    "mid_width": (mid_width, (-0.3, 0.3)),
    "tail_height_quadratic": (tail_height_quadratic, (-0.4, 0.4)),
    "forebody_height": (forebody_height, (-0.3, 0.3)),
    "tail_width_quadratic": (tail_width_quadratic, (-0.3, 0.3)),
    "tail_length": (tail_length, (-0.01, 0.2)),
    "length_scaling": (length_scaling, (-0.2, 0.2)),
}

# search spaces with the bounds of the three optimisation experiments
PRESETS = {
    "SO1": [("height_taper", (-0.5, 0.5)), ("width_taper", (-0.5, 0.5)), ("tail_fin", (-0.3, 0.3))],
    "SO2": [("height_taper", (-0.5, 0.5)), ("width_taper", (-0.5, 0.5)), ("peduncle", (-0.4, 0.4)),
            ("mid_width", (-0.5, 0.5)), ("tail_height_quadratic", (-0.5, 0.5))],
    "SO3": [("height_taper", (-0.5, 0.5)), ("width_taper", (-0.5, 0.5)), ("peduncle", (-0.4, 0.4)),
            ("mid_width", (-0.3, 0.3)), ("tail_height_quadratic", (-0.4, 0.4)),
            ("forebody_height", (-0.3, 0.3)), ("tail_width_quadratic", (-0.3, 0.3)),
            ("tail_length", (-0.01, 0.2))],
}


def mesh_box(mesh, head_fraction=0.25):
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    length = hi[0] - lo[0]
    return {"length": length, "width": hi[1] - lo[1], "height": hi[2] - lo[2],
            "head_start": lo[0] + (1 - head_fraction) * length}


@dataclass(frozen=True)
class ShapeBasis:
    """Columns of ``U`` are nodal displacement fields per unit parameter."""

    U: np.ndarray
    bounds: np.ndarray
    names: tuple
    dorsal_rows: np.ndarray
    z0_max: np.ndarray

    @property
    def n_params(self):
        return self.U.shape[1]

    @property
    def U_max(self):
        return self.U[self.dorsal_rows]

    def inside(self, xi, strict=True):
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if strict:
            return bool(np.all(xi > lo) and np.all(xi < hi))
        return bool(np.all(xi >= lo - 1e-15) and np.all(xi <= hi + 1e-15))


def _resolve(field):
    if isinstance(field, str):
        fn, b = FIELD_LIBRARY[field]
        return field, fn, b
    if len(field) == 2 and isinstance(field[0], str) and not callable(field[1]):
        fn, _ = FIELD_LIBRARY[field[0]]
        return field[0], fn, tuple(field[1])
    if len(field) == 2:
        return field[0], field[1], FIELD_LIBRARY.get(field[0], (None, (-0.5, 0.5)))[1]
    name, fn, b = field
    return name, fn, tuple(b)


def build_shape_basis(mesh, fields, check_bounds=True):
    """Evaluate shape fields on the nominal nodes and stack them into ``U``.

    ``fields`` entries are library names, ``(name, bounds)`` pairs, or
    ``(name, callable[, bounds])`` tuples. Constrained DOFs are zeroed.
    """
    box = mesh_box(mesh)
    cols, bounds, names = [], [], []
    for f in fields:
        name, fn, b = _resolve(f)
        disp = np.asarray(fn(mesh.nodes, box), dtype=float)
        if disp.shape != (mesh.n_nodes, 3) or not np.all(np.isfinite(disp)):
            raise InvalidShapeError(f"shape field {name!r} is not a finite nodal 3-vector field")
        col = disp.ravel().copy()
        col[mesh.constrained_dofs] = 0.0
        cols.append(col)
        bounds.append(b)
        names.append(name)
    U = np.column_stack(cols) if cols else np.zeros((mesh.n_dofs, 0))
    bounds = np.array(bounds, dtype=float).reshape(-1, 2)
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ValueError("parameter bounds must satisfy lower < upper")
    dorsal = mesh.spine_elements[:, 3]
    basis = ShapeBasis(U=U, bounds=bounds, names=tuple(names),
                       dorsal_rows=3 * dorsal + 2, z0_max=mesh.nodes[dorsal, 2].copy())
    if check_bounds and U.shape[1]:
        corners = (itertools.product(*bounds) if U.shape[1] <= 8
                   else np.vstack([np.diag(bounds[:, 0]), np.diag(bounds[:, 1])]))
        for c in corners:
            morph(mesh, basis, np.array(c), enforce_bounds=False)
    return basis


def morph(mesh, basis, xi, enforce_bounds=True, allow_inverted=False):
    """Shape-varied node coordinates ``x0 + U xi`` and the smallest tet volume."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != (basis.n_params,):
        raise ValueError(f"expected {basis.n_params} parameters, got {xi.size}")
    if enforce_bounds and not basis.inside(xi, strict=False):
        raise InvalidShapeError(f"parameters {xi} outside bounds")
    nodes = mesh.nodes + (basis.U @ xi).reshape(-1, 3)
    vmin = float(tet_volumes(nodes, mesh.tets).min())
    if vmin <= 0 and not allow_inverted:
        raise InvalidShapeError(f"parameters {xi} invert elements (min volume {vmin:.3e})")
    return nodes, vmin
