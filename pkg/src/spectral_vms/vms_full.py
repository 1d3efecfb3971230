"""Full spectral multiscale time stepper.

Each backward-Euler step solves a tridiagonal system for the nodal
unknowns in which the subgrid closure is summed mode by mode, and carries
the per-element mode amplitudes of the subgrid field to the next step.
This is the accuracy reference; the tabulated variant lives in
vms_feasible.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, mesh_fem
from .mesh_fem import (DirichletBC, TriDiagSystem, VelocityField,
                       apply_dirichlet, assemble_load, assemble_mass,
                       assemble_stiffness, solve_tridiag)

__all__ = ["FullVmsConfig", "SubgridState", "FullVmsResult", "init_state",
           "step_full", "run_full", "approximate_subgrid_state"]


@dataclass
class FullVmsConfig:
    mesh: object
    tgrid: object
    mu: float
    velocity: object
    bc: object = None
    source: object = None
    initial: object = None
    n_modes: int = 10
    project_initial_subgrid: bool = False
    velocity_rule: str = "midpoint"
    source_gauss: int = 32

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("need at least one subgrid mode")
        if not isinstance(self.velocity, VelocityField):
            self.velocity = VelocityField(self.velocity)
        if self.bc is None:
            self.bc = DirichletBC.homogeneous()


@dataclass
class SubgridState:
    """Per-element mode amplitudes c_j of the subgrid field."""

    amplitudes: np.ndarray  # (n_elems, n_modes)

    @classmethod
    def zeros(cls, n_elems, n_modes):
        return cls(np.zeros((n_elems, n_modes)))

    def copy(self):
        return SubgridState(self.amplitudes.copy())


class _ElementContexts:
    """Cached per-element nondimensional data for one velocity snapshot."""

    def __init__(self, mesh, a_elem, mu, dt, n_modes):
        self.params = []
        self.arrays = []
        cache = {}
        for k in range(mesh.n_elems):
            key = (float(a_elem[k]), float(mesh.h[k]))
            if key not in cache:
                p = kernels.element_params(a_elem[k], mesh.h[k], mu, dt)
                cache[key] = (p, kernels.element_mode_arrays(p, n_modes))
            p, arr = cache[key]
            self.params.append(p)
            self.arrays.append(arr)


def _contexts(config, t):
    a_elem = mesh_fem.project_velocity(config.velocity, config.mesh, t,
                                       config.velocity_rule)
    return a_elem, _ElementContexts(config.mesh, a_elem, config.mu,
                                    config.tgrid.dt, config.n_modes)


def init_state(config):
    """Initial nodal interpolant and subgrid amplitudes.

    Amplitudes start at zero unless project_initial_subgrid is set, in
    which case the interpolation remainder u0 - I_h(u0) is projected onto
    the first modes in the weighted inner product.
    """
    mesh = config.mesh
    if config.initial is None:
        u0 = np.zeros(mesh.n_nodes)
    else:
        u0 = mesh.interpolate(config.initial)
    state = SubgridState.zeros(mesh.n_elems, config.n_modes)
    if config.project_initial_subgrid and config.initial is not None:
        a_elem = mesh_fem.project_velocity(config.velocity, mesh, 0.0,
                                           config.velocity_rule)
        for k in range(mesh.n_elems):
            p = kernels.element_params(a_elem[k], mesh.h[k], config.mu,
                                       config.tgrid.dt)
            xl, ul, ur = mesh.nodes[k], u0[k], u0[k + 1]

            def bubble(x, t, xl=xl, h=mesh.h[k], ul=ul, ur=ur):
                s = (x - xl) / h
                return config.initial(x) - (ul * (1.0 - s) + ur * s)

            state.amplitudes[k] = kernels.source_mode_projection(
                bubble, 0.0, p, xl, config.n_modes, n_gauss=64)
    return u0, state


def _step_matrix(config, ctx):
    """LHS matrix M + dt R - (A1 + dt A2 + dt A3 + dt^2 A4)."""
    mesh, dt = config.mesh, config.tgrid.dt
    mass = assemble_mass(mesh)
    stiff = assemble_stiffness(mesh, [p.a for p in ctx.params], config.mu)
    lhs = mass + dt * stiff
    for k in range(mesh.n_elems):
        arr = ctx.arrays[k]
        trial = arr["mass_phi_pz"] + dt * arr["adv_phi_pz"]  # (2, J)
        test_b = arr["mass_z_phi"] + dt * arr["adv_z_phi"]
        block = np.einsum("j,mj,lj->lm", arr["beta"], trial, test_b)
        lhs.add_element(k, -block)
    return lhs, mass


def step_full(u_prev, state, n, config, ctx=None):
    """One backward-Euler spectral step; returns (u_next, state_next)."""
    mesh, dt = config.mesh, config.tgrid.dt
    t1 = (n + 1) * dt
    if ctx is None:
        _, ctx = _contexts(config, t1)
    lhs, mass = _step_matrix(config, ctx)
    rhs = mass.matvec(u_prev)
    rhs += dt * assemble_load(mesh, config.source, t1)

    # per-element subgrid carry-over and forcing
    known = np.empty_like(state.amplitudes)
    for k in range(mesh.n_elems):
        arr = ctx.arrays[k]
        b = arr["beta"]
        u_loc = u_prev[k:k + 2]
        proj_u = arr["mass_phi_pz"].T @ u_loc
        k_j = state.amplitudes[k] + proj_u
        if config.source is not None:
            f_mode = kernels.source_mode_projection(
                config.source, t1, ctx.params[k], mesh.nodes[k],
                config.n_modes, config.source_gauss)
            k_j = k_j + dt * f_mode
            test_b = arr["mass_z_phi"] + dt * arr["adv_z_phi"]
            rhs[k:k + 2] -= test_b @ (b * dt * f_mode)
        known[k] = k_j
        carry = ((1.0 - b) * state.amplitudes[k]) @ arr["mass_z_phi"].T \
            - (b * (state.amplitudes[k] * dt)) @ arr["adv_z_phi"].T
        rhs[k:k + 2] += carry
        # the (u^n, p z_j)-driven part of the closure
        drive = (b * proj_u) @ (arr["mass_z_phi"] + dt * arr["adv_z_phi"]).T
        rhs[k:k + 2] -= drive

    sys = apply_dirichlet(TriDiagSystem(lhs, rhs), config.bc, t1)
    u_next = solve_tridiag(sys)

    new_state = SubgridState.zeros(mesh.n_elems, config.n_modes)
    for k in range(mesh.n_elems):
        arr = ctx.arrays[k]
        u_loc = u_next[k:k + 2]
        resid = known[k] - arr["mass_phi_pz"].T @ u_loc \
            - dt * (arr["adv_phi_pz"].T @ u_loc)
        new_state.amplitudes[k] = arr["beta"] * resid
    return u_next, new_state


def approximate_subgrid_state(u_prevprev, u_prev, n, config, ctx=None):
    """Amplitudes rebuilt from the two-level residual instead of carried.

    Feeding these into step_full reproduces the tabulated method's
    one-level history exactly (constant-in-time velocity).
    """
    mesh, dt = config.mesh, config.tgrid.dt
    t0 = n * dt
    if ctx is None:
        _, ctx = _contexts(config, t0)
    state = SubgridState.zeros(mesh.n_elems, config.n_modes)
    for k in range(mesh.n_elems):
        arr = ctx.arrays[k]
        resid = arr["mass_phi_pz"].T @ (u_prevprev[k:k + 2] - u_prev[k:k + 2])
        resid -= dt * (arr["adv_phi_pz"].T @ u_prev[k:k + 2])
        if config.source is not None:
            resid += dt * kernels.source_mode_projection(
                config.source, t0, ctx.params[k], mesh.nodes[k],
                config.n_modes, config.source_gauss)
        state.amplitudes[k] = arr["beta"] * resid
    return state


@dataclass
class FullVmsResult:
    config: FullVmsConfig
    history: np.ndarray  # (n_steps + 1, n_nodes)
    amplitude_history: list = field(default_factory=list)

    def sample(self, step, points_per_elem=8):
        """Dense samples of nodal-plus-subgrid field at one time step."""
        mesh = self.config.mesh
        u = self.history[step]
        amps = self.amplitude_history[step]
        a_elem = mesh_fem.project_velocity(
            self.config.velocity, mesh, step * self.config.tgrid.dt,
            self.config.velocity_rule)
        xs, vals = [], []
        xhat = np.linspace(0.0, 1.0, points_per_elem)
        for k in range(mesh.n_elems):
            p = kernels.element_params(a_elem[k], mesh.h[k], self.config.mu,
                                       self.config.tgrid.dt)
            lin = u[k] * (1.0 - xhat) + u[k + 1] * xhat
            sub = kernels.reconstruct_subgrid(amps[k], p, xhat)
            xs.append(mesh.nodes[k] + mesh.h[k] * xhat)
            vals.append(lin + sub)
        return np.concatenate(xs), np.concatenate(vals)


def run_full(config):
    """March the full spectral method over the whole time grid."""
    u, state = init_state(config)
    history = np.empty((config.tgrid.n_steps + 1, config.mesh.n_nodes))
    history[0] = u
    amp_hist = [state.amplitudes.copy()]
    ctx = None
    if config.velocity.is_constant:
        _, ctx = _contexts(config, 0.0)
    for n in range(config.tgrid.n_steps):
        step_ctx = ctx
        if step_ctx is None:
            _, step_ctx = _contexts(config, (n + 1) * config.tgrid.dt)
        u, state = step_full(u, state, n, config, step_ctx)
        history[n + 1] = u
        amp_hist.append(state.amplitudes.copy())
    return FullVmsResult(config, history, amp_hist)
