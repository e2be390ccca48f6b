"""Tensorial parametric reduced order models of actuated soft swimmers and
gradient-based shape optimisation on top of them."""

from .mesh import MeshError, TaggedMesh, generate_block_mesh, read_mesh, write_mesh
from .fem import Material, SystemMatrices, assemble_system_matrices
from .shapes import InvalidShapeError, ShapeBasis, build_shape_basis, morph
from .internal import InternalTensorFamily, PolyTensor, direct_internal_force, element_internal_tensors
from .hydro import DragTensorFamily, drag_taylor_tensors, eval_drag, spine_force, tail_force, virtual_mass
from .actuation import MuscleElementData, actuation_force, actuation_signal, muscle_energy
from .rob import ReducedBasis, assemble_rob, build_rob, modal_derivatives, parameter_sensitivities, \
    solve_vibration_modes
from .reduction import ReducedModel, eval_reduced_residual, reduce_model, reduced_jacobians
from .fom import FullOrderModel
from .integrator import NewmarkSettings, Sensitivity, SolverError, Trajectory, fom_solve, newmark_solve, \
    newmark_solve_rom
from .optimizer import OptimizationConfig, OptimizationResult, barrier, cost, cost_gradient, optimize
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"
