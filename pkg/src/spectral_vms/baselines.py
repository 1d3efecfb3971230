"""Galerkin implicit-Euler stepper and tau-stabilized variants.

The stabilized schemes add dt a^2 tau M_s to the Galerkin matrix, where
M_s is (1/h) tridiag(-1, 2, -1) and tau is one of four published
coefficient choices.
"""

from dataclasses import dataclass

import numpy as np

from . import mesh_fem
from .mesh_fem import (DirichletBC, TriDiag, TriDiagSystem, VelocityField,
                       apply_dirichlet, assemble_load, assemble_mass,
                       assemble_stiffness, solve_tridiag)

__all__ = ["StabChoice", "tau", "cfl_bound", "assemble_stab_matrix",
           "step_galerkin", "step_stabilized", "run_galerkin",
           "run_stabilized", "STAB_KINDS"]

STAB_KINDS = ("OneD", "Codina", "Hauke", "Franca")


@dataclass(frozen=True)
class StabChoice:
    kind: str
    franca_threshold: float = 1.0

    def __post_init__(self):
        if self.kind not in STAB_KINDS:
            raise ValueError("unknown stabilization kind %r" % self.kind)
        if not (np.isfinite(self.franca_threshold)
                and self.franca_threshold > 0.0):
            raise ValueError("Franca threshold must be positive")


def tau(choice, a, mu, h, dt):
    """Stabilization coefficient for one element."""
    if mu <= 0.0 or h <= 0.0 or dt <= 0.0:
        raise ValueError("mu, h and dt must be positive")
    a_abs = abs(a)
    P = a_abs * h / (2.0 * mu)
    if choice.kind == "OneD":
        # mu/a^2 (P coth P - 1); series limit P^2/3 for tiny P
        if P < 1e-4:
            return h ** 2 / (12.0 * mu)
        return mu / a_abs ** 2 * (P / np.tanh(P) - 1.0)
    if choice.kind == "Codina":
        return 1.0 / np.hypot(4.0 * mu / h ** 2, 2.0 * a_abs / h)
    if choice.kind == "Hauke":
        candidates = [h ** 2 / (24.24 * mu), dt]
        if a_abs > 0.0:
            candidates.append(h / (np.sqrt(3.0) * a_abs))
        return min(candidates)
    # Franca: (h/|a|) min(P, Pbar); the P branch equals h^2/(2 mu)
    if P <= choice.franca_threshold:
        return h ** 2 / (2.0 * mu)
    return h / a_abs * choice.franca_threshold


def cfl_bound(P):
    """Threshold P / (3 (1 - P)) below which the Galerkin CFL number
    produces spurious temporal oscillations (valid for 0 < P < 1)."""
    if not 0.0 < P < 1.0:
        raise ValueError("the bound is defined for 0 < P < 1")
    return P / (3.0 * (1.0 - P))


def assemble_stab_matrix(mesh):
    """M_s: element block (1/h) [[1, -1], [-1, 1]]."""
    m = TriDiag.zeros(mesh.n_nodes)
    for k, h in enumerate(mesh.h):
        m.add_element(k, np.array([[1.0, -1.0], [-1.0, 1.0]]) / h)
    return m


def _stab_term(mesh, a_elem, mu, dt, choice):
    """Per-element a_K^2 tau_K scaling of the M_s blocks."""
    m = TriDiag.zeros(mesh.n_nodes)
    for k, h in enumerate(mesh.h):
        a = a_elem[k]
        coeff = a * a * tau(choice, a, mu, h, dt)
        m.add_element(k, coeff / h * np.array([[1.0, -1.0], [-1.0, 1.0]]))
    return m


def step_galerkin(u_prev, a_elem, mu, mesh, dt, f=None, bc=None, t_new=None):
    """(M + dt R) u = M u_prev + dt F with Dirichlet values at t_new."""
    bc = bc or DirichletBC.homogeneous()
    t_new = dt if t_new is None else t_new
    m = assemble_mass(mesh)
    lhs = m + dt * assemble_stiffness(mesh, a_elem, mu)
    rhs = m.matvec(u_prev) + dt * assemble_load(mesh, f, t_new)
    return solve_tridiag(apply_dirichlet(TriDiagSystem(lhs, rhs), bc, t_new))


def step_stabilized(u_prev, choice, a_elem, mu, mesh, dt, f=None, bc=None,
                    t_new=None):
    """Stabilized step (M + dt R + dt a^2 tau M_s) u = M u_prev + dt F."""
    bc = bc or DirichletBC.homogeneous()
    t_new = dt if t_new is None else t_new
    a_elem = np.broadcast_to(np.asarray(a_elem, dtype=float),
                             (mesh.n_elems,))
    m = assemble_mass(mesh)
    lhs = m + dt * assemble_stiffness(mesh, a_elem, mu) \
        + dt * _stab_term(mesh, a_elem, mu, dt, choice)
    rhs = m.matvec(u_prev) + dt * assemble_load(mesh, f, t_new)
    return solve_tridiag(apply_dirichlet(TriDiagSystem(lhs, rhs), bc, t_new))


def _run(stepper, mesh, tgrid, velocity, mu, initial, f, bc, rule):
    velocity = velocity if isinstance(velocity, VelocityField) \
        else VelocityField(velocity)
    u = np.zeros(mesh.n_nodes) if initial is None \
        else mesh.interpolate(initial)
    history = np.empty((tgrid.n_steps + 1, mesh.n_nodes))
    history[0] = u
    for n in range(tgrid.n_steps):
        t1 = (n + 1) * tgrid.dt
        a_elem = mesh_fem.project_velocity(velocity, mesh, t1, rule)
        u = stepper(u, a_elem, t1)
        history[n + 1] = u
    return history


def run_galerkin(mesh, tgrid, velocity, mu, initial=None, f=None, bc=None,
                 velocity_rule="midpoint"):
    def stepper(u, a_elem, t1):
        return step_galerkin(u, a_elem, mu, mesh, tgrid.dt, f, bc, t1)

    return _run(stepper, mesh, tgrid, velocity, mu, initial, f, bc,
                velocity_rule)


def run_stabilized(choice, mesh, tgrid, velocity, mu, initial=None, f=None,
                   bc=None, velocity_rule="midpoint"):
    def stepper(u, a_elem, t1):
        return step_stabilized(u, choice, a_elem, mu, mesh, tgrid.dt, f,
                               bc, t1)

    return _run(stepper, mesh, tgrid, velocity, mu, initial, f, bc,
                velocity_rule)
