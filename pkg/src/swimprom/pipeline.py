"""Assemble the objects of a run from a RunConfig."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .fem import Material, assemble_system_matrices
from .fom import FullOrderModel
from .integrator import NewmarkSettings, fom_solve, newmark_solve_rom, opposite_sinusoids
from .mesh import generate_block_mesh, read_mesh
from .optimizer import FishProblem, OptimizationConfig
from .reduction import reduce_model
from .rob import build_rob
from .shapes import PRESETS, build_shape_basis


@dataclass
class Case:
    mesh: object
    basis: object
    system: object
    config: object

    @property
    def material(self):
        return self.system.material


def make_case(config):
    c = config
    if c.mesh.file:
        mesh = read_mesh(c.mesh.file)
    else:
        mesh = generate_block_mesh(c.mesh.length, c.mesh.width, c.mesh.height, tuple(c.mesh.cells))
    if c.shape.fields:
        fields = list(zip(c.shape.fields, c.shape.bounds)) if c.shape.bounds else list(c.shape.fields)
    elif c.shape.preset:
        fields = PRESETS[c.shape.preset]
    else:
        fields = []
    basis = build_shape_basis(mesh, fields)
    mat = Material(c.material.youngs_modulus, c.material.poisson_ratio)
    system = assemble_system_matrices(mesh, c.material.density, mat, tuple(c.damping.rayleigh))
    return Case(mesh, basis, system, config)


def settings_of(config):
    i = config.integrator
    return NewmarkSettings(dt=i.dt, horizon=i.horizon, beta=i.beta, gamma=i.gamma,
                           newton_tol=i.newton_tol, max_iters=i.max_iters)


def signals_of(config):
    return opposite_sinusoids(config.actuation.amplitude, config.actuation.frequency)


def build_prom(case):
    c = case.config
    t0 = time.perf_counter()
    rob = build_rob(case.mesh, case.system, case.basis, n_modes=c.rob.n_modes, static_md=c.rob.static_md)
    model = reduce_model(case.mesh, case.basis, rob.V, case.system, c.fluid.density, c.actuation.stiffness)
    return rob, model, time.perf_counter() - t0


def run_rom(case, xi, with_sensitivity=False):
    rob, model, t_build = build_prom(case)
    t0 = time.perf_counter()
    out = newmark_solve_rom(model, xi, signals_of(case.config), settings_of(case.config), with_sensitivity)
    return rob, model, out, t_build, time.perf_counter() - t0


def run_fom(case, xi):
    t0 = time.perf_counter()
    fom = FullOrderModel(case.mesh, case.basis, case.system, case.config.fluid.density,
                         case.config.actuation.stiffness, xi=xi)
    t_build = time.perf_counter() - t0
    t0 = time.perf_counter()
    traj = fom_solve(fom, signals_of(case.config), settings_of(case.config))
    return traj, t_build, time.perf_counter() - t0


def fish_problem(case):
    c = case.config
    return FishProblem(mesh=case.mesh, basis=case.basis, material=case.material,
                       solid_density=c.material.density, fluid_density=c.fluid.density,
                       rayleigh=tuple(c.damping.rayleigh), muscle_stiffness=c.actuation.stiffness,
                       amplitude=c.actuation.amplitude, frequency=c.actuation.frequency,
                       settings=settings_of(c), window=tuple(c.optimizer.window),
                       n_modes=c.rob.n_modes, static_md=c.rob.static_md)


def optimization_config(config):
    o = config.optimizer
    return OptimizationConfig(gamma=o.gamma, weights=tuple(o.weights) or None, mu=None if o.mu < 0 else o.mu,
                              mu_decay=o.mu_decay, tau=o.tau, tol=o.tol, window=tuple(o.window),
                              max_rebuilds=o.max_rebuilds, max_inner=o.max_inner)


def dominant_frequency(t, y):
    """Frequency from the spacing of zero crossings (both directions) of the mean-free signal."""
    t, y = np.asarray(t, float), np.asarray(y, float) - np.mean(y)
    idx = np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)
    if len(idx) < 2:
        return 0.0
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return (len(tc) - 1) / (2.0 * (tc[-1] - tc[0]))
