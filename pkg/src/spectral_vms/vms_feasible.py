"""Feasible spectral multiscale stepper.

Drops the deepest level of the subgrid history so each step becomes a
two-level linear recursion on nodal values whose extra matrices depend
only on the per-element parameters (P, S).  Those dimensionless kernels
come from a provider: direct series summation, or interpolation of an
offline table.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, mesh_fem, table as table_mod
from .kernels import FAMILIES, TruncationPolicy
from .mesh_fem import (DirichletBC, TriDiag, TriDiagSystem, VelocityField,
                       apply_dirichlet, assemble_load, assemble_mass,
                       assemble_stiffness, solve_tridiag)

__all__ = ["DirectKernelProvider", "TableKernelProvider",
           "NullKernelProvider", "FeasibleConfig", "FeasibleMatrices",
           "assemble_matrices", "step_feasible", "first_step_policy",
           "run_feasible", "FeasibleState"]

_SIGN = np.array([-1.0, 1.0])


class DirectKernelProvider:
    """Kernels by series summation: policy-truncated or a fixed mode count."""

    def __init__(self, policy=None, n_modes=None):
        if (policy is None) == (n_modes is None):
            raise ValueError("give exactly one of policy or n_modes")
        self.policy = policy
        self.n_modes = n_modes
        self._cache = {}

    def kernel(self, family, m, l, P, S):
        key = (family, m, l, P, S)
        if key not in self._cache:
            if self.n_modes is not None:
                val = kernels.sum_series_fixed(family, m, l, P, S,
                                               self.n_modes)
            else:
                vals, _, _ = kernels.sum_series_batch(family, m, l, P, [S],
                                                      self.policy)
                val = float(vals[0])
            self._cache[key] = val
        return self._cache[key]


class TableKernelProvider:
    """Kernels interpolated from an offline table."""

    def __init__(self, table):
        self.table = table

    def kernel(self, family, m, l, P, S):
        return table_mod.interpolate(self.table, family, m, l, P, S)


class NullKernelProvider:
    """All kernels zero: reduces every step to plain Galerkin."""

    def kernel(self, family, m, l, P, S):
        return 0.0


@dataclass
class FeasibleMatrices:
    """Subgrid matrices of one velocity snapshot, physical units."""

    A1: TriDiag
    A2: TriDiag
    A3: TriDiag
    A4: TriDiag
    B1: TriDiag
    B2: TriDiag
    B3: TriDiag
    B4: TriDiag
    mass: TriDiag
    stiff: TriDiag
    a_elem: np.ndarray
    params: list


def _element_kernels(provider, P, S, fam_names):
    out = {}
    for name in fam_names:
        fam = FAMILIES[name]
        if fam.index_kind == "ml":
            out[name] = np.array(
                [[provider.kernel(name, m, l, P, S) for l in (0, 1)]
                 for m in (0, 1)])
        elif fam.index_kind == "m":
            out[name] = np.array(
                [provider.kernel(name, m, 0, P, S) for m in (0, 1)])
        elif fam.index_kind == "l":
            out[name] = np.array(
                [provider.kernel(name, 0, l, P, S) for l in (0, 1)])
        else:
            out[name] = provider.kernel(name, 0, 0, P, S)
    return out


def assemble_matrices(mesh, a_elem, mu, dt, provider):
    """Assemble A1..A4 and B1..B4 from per-element kernels.

    For a < 0 the element is mirrored: the positive-velocity block is
    built with |a| and flipped in both local indices.
    """
    fam_names = ["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"]
    mats = {name: TriDiag.zeros(mesh.n_nodes) for name in fam_names}
    params = []
    cache = {}
    for k in range(mesh.n_elems):
        h = mesh.h[k]
        a = float(a_elem[k])
        p = kernels.element_params(a, h, mu, dt)
        params.append(p)
        key = (p.P, p.S)
        if key not in cache:
            cache[key] = _element_kernels(provider, p.P, p.S, fam_names)
        kern = cache[key]
        a_abs = abs(a)
        for prefix in ("A", "B"):
            k1 = kern[prefix + "1"]  # (m, l)
            k2 = kern[prefix + "2"]  # (l,)
            k3 = kern[prefix + "3"]  # (m,)
            k4 = kern[prefix + "4"]  # scalar
            blocks = {
                "1": 2.0 * h * k1.T,
                "2": 2.0 * a_abs * _SIGN[None, :] * k2[:, None],
                "3": -2.0 * a_abs * _SIGN[:, None] * k3[None, :],
                "4": -(2.0 * a_abs ** 2 / h)
                     * np.outer(_SIGN, _SIGN) * k4,
            }
            for idx, block in blocks.items():
                if a < 0.0:
                    block = block[::-1, ::-1]
                mats[prefix + idx].add_element(k, block)
    return FeasibleMatrices(
        A1=mats["A1"], A2=mats["A2"], A3=mats["A3"], A4=mats["A4"],
        B1=mats["B1"], B2=mats["B2"], B3=mats["B3"], B4=mats["B4"],
        mass=assemble_mass(mesh),
        stiff=assemble_stiffness(mesh, a_elem, mu),
        a_elem=np.asarray(a_elem, dtype=float), params=params)


def _force_vectors(mesh, params, provider, f, t):
    """Subgrid force vectors F1, F2 (beta weights) and F3, F4 (beta^2).

    The source is projected to its element-midpoint value, matching the
    element-constant kernel reduction.
    """
    n = mesh.n_nodes
    out = {name: np.zeros(n) for name in ("F1", "F2", "F3", "F4")}
    if f is None:
        return out
    fam_of = {"F1": "Fd0", "F2": "Fe0", "F3": "Fbd0", "F4": "Fbe0"}
    for k in range(mesh.n_elems):
        p = params[k]
        h, a_abs = p.h, abs(p.a)
        f_k = f(mesh.nodes[k] + 0.5 * h, t)
        for name in out:
            fam = FAMILIES[fam_of[name]]
            if fam.index_kind == "l":
                vec = np.array([
                    2.0 * h * f_k
                    * provider.kernel(fam.name, 0, l, p.P, p.S)
                    for l in (0, 1)])
            else:
                k4 = provider.kernel(fam.name, 0, 0, p.P, p.S)
                vec = -2.0 * a_abs * f_k * _SIGN * k4
            if p.a < 0.0:
                vec = vec[::-1]
            out[name][k:k + 2] += vec
    return out


@dataclass
class FeasibleState:
    u: np.ndarray
    u_prev: np.ndarray
    step: int


@dataclass
class FeasibleConfig:
    mesh: object
    tgrid: object
    mu: float
    velocity: object
    bc: object = None
    source: object = None
    initial: object = None
    provider: object = None
    g_pairing: str = "main"
    velocity_rule: str = "midpoint"

    def __post_init__(self):
        if not isinstance(self.velocity, VelocityField):
            self.velocity = VelocityField(self.velocity)
        if self.bc is None:
            self.bc = DirichletBC.homogeneous()
        if self.provider is None:
            self.provider = DirectKernelProvider(policy=TruncationPolicy())
        if self.g_pairing not in ("main", "appendix"):
            raise ValueError("g_pairing must be 'main' or 'appendix'")


def step_feasible(state, sys_new, sys_old, config, first=False):
    """One step of the two-level recursion; returns the new nodal field.

    sys_new / sys_old are the FeasibleMatrices at the new and old time
    levels (identical objects for a constant velocity).  With first=True
    all subgrid-history terms are dropped, equivalent to a zero initial
    subgrid.
    """
    dt = config.tgrid.dt
    n = state.step
    t1, t0 = (n + 1) * dt, n * dt
    m = sys_new.mass
    lhs = m + dt * sys_new.stiff \
        - (sys_new.A1 + dt * sys_new.A2 + dt * sys_new.A3
           + dt * dt * sys_new.A4)
    rhs = m.matvec(state.u)
    rhs -= (sys_new.A1 + dt * sys_new.A3).matvec(state.u)
    rhs += dt * assemble_load(config.mesh, config.source, t1)
    fv_new = _force_vectors(config.mesh, sys_new.params, config.provider,
                            config.source, t1)
    rhs -= dt * fv_new["F1"] + dt * dt * fv_new["F2"]
    if not first:
        rhs -= (sys_old.A1 + dt * sys_old.A2).matvec(state.u)
        rhs += sys_old.A1.matvec(state.u_prev)
        fv_old = _force_vectors(config.mesh, sys_old.params, config.provider,
                                config.source, t0)
        rhs += dt * fv_old["F1"]
        if config.g_pairing == "main":
            rhs += (sys_new.B1 + dt * sys_new.B2 + dt * sys_new.B3
                    + dt * dt * sys_new.B4).matvec(state.u)
            rhs -= (sys_new.B1 + dt * sys_new.B3).matvec(state.u_prev)
            rhs -= dt * fv_new["F3"] + dt * dt * fv_new["F4"]
        else:
            # literal reading of the boxed G1 definition: both G vectors
            # carry the advective pairing
            rhs += ((1.0 + dt) * sys_new.B3
                    + dt * (1.0 + dt) * sys_new.B4).matvec(state.u)
            rhs -= (1.0 + dt) * sys_new.B3.matvec(state.u_prev)
            rhs -= dt * (1.0 + dt) * fv_new["F4"]
    sys = apply_dirichlet(TriDiagSystem(lhs, rhs), config.bc, t1)
    return solve_tridiag(sys)


def first_step_policy(u0):
    """Initial two-level state: u^{-1} := u^0 with history terms dropped."""
    return FeasibleState(u=u0.copy(), u_prev=u0.copy(), step=0)


def _matrices_at(config, t, cache):
    a_elem = mesh_fem.project_velocity(config.velocity, config.mesh, t,
                                       config.velocity_rule)
    key = a_elem.tobytes()
    if key not in cache:
        cache[key] = assemble_matrices(config.mesh, a_elem, config.mu,
                                       config.tgrid.dt, config.provider)
    return cache[key]


def run_feasible(config):
    """March the feasible method; returns the (n_steps+1, n_nodes) history."""
    mesh = config.mesh
    if config.initial is None:
        u0 = np.zeros(mesh.n_nodes)
    else:
        u0 = mesh.interpolate(config.initial)
    history = np.empty((config.tgrid.n_steps + 1, mesh.n_nodes))
    history[0] = u0
    state = first_step_policy(u0)
    cache = {}
    for n in range(config.tgrid.n_steps):
        dt = config.tgrid.dt
        sys_new = _matrices_at(config, (n + 1) * dt, cache)
        sys_old = _matrices_at(config, n * dt, cache)
        u_next = step_feasible(state, sys_new, sys_old, config,
                               first=(n == 0))
        history[n + 1] = u_next
        state = FeasibleState(u=u_next, u_prev=state.u, step=n + 1)
    return history
