"""1D P1 finite element basics: meshes, mass/stiffness assembly, Dirichlet
handling, tridiagonal (Thomas) solves and piecewise-constant velocity
projection.

All solvers in this package produce tridiagonal systems, so the linear
algebra layer stores only the three central diagonals.
"""

import numpy as np

__all__ = [
    "Mesh1D",
    "TimeGrid",
    "DirichletBC",
    "VelocityField",
    "TriDiag",
    "TriDiagSystem",
    "SingularSystemError",
    "build_uniform_mesh",
    "project_velocity",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_load",
    "solve_tridiag",
    "apply_dirichlet",
]

# Relative pivot threshold below which elimination reports a singular system.
PIVOT_RTOL = 1e-14


class SingularSystemError(RuntimeError):
    """Raised when tridiagonal elimination meets a vanishing pivot."""


class Mesh1D:
    """Ordered partition of an interval into elements K_l = [x_l, x_{l+1}]."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("mesh needs at least 2 elements (3 nodes)")
        h = np.diff(nodes)
        if np.any(h <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        self.nodes = nodes
        self.h = h

    @property
    def n_nodes(self):
        return self.nodes.size

    @property
    def n_elems(self):
        return self.nodes.size - 1

    @property
    def midpoints(self):
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def interpolate(self, f):
        """Nodal (Lagrange) interpolant of a callable f(x)."""
        return np.array([f(x) for x in self.nodes], dtype=float)

    def __repr__(self):
        return "Mesh1D(%g..%g, %d elems)" % (
            self.nodes[0], self.nodes[-1], self.n_elems)


def build_uniform_mesh(x_min, x_max, n_elems):
    """Uniform mesh with n_elems elements on (x_min, x_max)."""
    if not x_min < x_max:
        raise ValueError("x_min must be < x_max")
    n_elems = int(n_elems)
    if n_elems < 2:
        raise ValueError("need at least 2 elements")
    return Mesh1D(np.linspace(x_min, x_max, n_elems + 1))


class TimeGrid:
    """Uniform partition of [0, T] into N steps."""

    def __init__(self, t_final, n_steps):
        if n_steps < 1:
            raise ValueError("need at least one time step")
        if t_final <= 0.0:
            raise ValueError("final time must be positive")
        self.t_final = float(t_final)
        self.n_steps = int(n_steps)
        self.dt = self.t_final / self.n_steps

    @classmethod
    def from_dt(cls, dt, n_steps):
        return cls(dt * n_steps, n_steps)

    def times(self):
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


class DirichletBC:
    """Time-dependent Dirichlet values at both ends of the domain."""

    def __init__(self, left, right):
        self.left = left if callable(left) else (lambda t, v=float(left): v)
        self.right = right if callable(right) else (lambda t, v=float(right): v)

    @classmethod
    def homogeneous(cls):
        return cls(0.0, 0.0)

    def values(self, t):
        gl, gr = self.left(t), self.right(t)
        if not (np.isfinite(gl) and np.isfinite(gr)):
            raise ValueError("boundary values must be finite")
        return gl, gr


class VelocityField:
    """Advection velocity a(x, t), possibly constant.

    Constant fields let the time steppers cache their assembled matrices.
    """

    def __init__(self, a):
        if callable(a):
            self.func = a
            self.constant = None
        else:
            self.constant = float(a)
            self.func = lambda x, t: self.constant

    @property
    def is_constant(self):
        return self.constant is not None

    def __call__(self, x, t=0.0):
        return self.func(x, t)


# 4-point Gauss-Legendre rule on [0, 1], used for element averages and loads.
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def project_velocity(a, mesh, t=0.0, rule="midpoint"):
    """Per-element constant velocities a_K.

    rule='midpoint' evaluates a at element midpoints; rule='average'
    uses a 4-point Gauss mean over each element.
    """
    if not isinstance(a, VelocityField):
        a = VelocityField(a)
    if a.is_constant:
        return np.full(mesh.n_elems, a.constant)
    if rule == "midpoint":
        vals = np.array([a(x, t) for x in mesh.midpoints], dtype=float)
    elif rule == "average":
        vals = np.zeros(mesh.n_elems)
        for k in range(mesh.n_elems):
            xq = mesh.nodes[k] + mesh.h[k] * _GAUSS_X
            vals[k] = sum(w * a(x, t) for x, w in zip(xq, _GAUSS_W))
    else:
        raise ValueError("unknown projection rule %r" % rule)
    if not np.all(np.isfinite(vals)):
        raise ValueError("velocity projection produced non-finite values")
    return vals


class TriDiag:
    """Tridiagonal matrix stored as (sub, diag, sup) bands."""

    def __init__(self, sub, diag, sup):
        self.sub = np.asarray(sub, dtype=float)
        self.diag = np.asarray(diag, dtype=float)
        self.sup = np.asarray(sup, dtype=float)
        n = self.diag.size
        if self.sub.size != n - 1 or self.sup.size != n - 1:
            raise ValueError("band lengths inconsistent with diagonal")

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n - 1), np.zeros(n), np.zeros(n - 1))

    @property
    def n(self):
        return self.diag.size

    def copy(self):
        return TriDiag(self.sub.copy(), self.diag.copy(), self.sup.copy())

    def __add__(self, other):
        return TriDiag(self.sub + other.sub, self.diag + other.diag,
                       self.sup + other.sup)

    def __sub__(self, other):
        return TriDiag(self.sub - other.sub, self.diag - other.diag,
                       self.sup - other.sup)

    def __mul__(self, scalar):
        return TriDiag(self.sub * scalar, self.diag * scalar,
                       self.sup * scalar)

    __rmul__ = __mul__

    def add_element(self, k, local):
        """Accumulate a 2x2 element block (rows/cols k, k+1)."""
        self.diag[k] += local[0, 0]
        self.diag[k + 1] += local[1, 1]
        self.sup[k] += local[0, 1]
        self.sub[k] += local[1, 0]

    def matvec(self, x):
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def to_dense(self):
        return (np.diag(self.diag) + np.diag(self.sup, 1)
                + np.diag(self.sub, -1))

    def max_abs(self):
        return max(np.max(np.abs(self.diag)),
                   np.max(np.abs(self.sub), initial=0.0),
                   np.max(np.abs(self.sup), initial=0.0))


class TriDiagSystem:
    """Tridiagonal linear system A u = rhs."""

    def __init__(self, matrix, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size != matrix.n:
            raise ValueError("rhs length does not match matrix")
        self.matrix = matrix
        self.rhs = rhs


def solve_tridiag(sys):
    """Thomas elimination; raises SingularSystemError on tiny pivots."""
    a, d, c = sys.matrix.sub, sys.matrix.diag, sys.matrix.sup
    n = d.size
    scale = sys.matrix.max_abs()
    if scale == 0.0:
        raise SingularSystemError("zero matrix")
    tol = PIVOT_RTOL * scale
    dd = d.copy()
    rr = sys.rhs.copy()
    for i in range(1, n):
        if abs(dd[i - 1]) < tol:
            raise SingularSystemError("pivot %d below tolerance" % (i - 1))
        w = a[i - 1] / dd[i - 1]
        dd[i] -= w * c[i - 1]
        rr[i] -= w * rr[i - 1]
    if abs(dd[n - 1]) < tol:
        raise SingularSystemError("pivot %d below tolerance" % (n - 1))
    x = np.empty(n)
    x[n - 1] = rr[n - 1] / dd[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (rr[i] - c[i] * x[i + 1]) / dd[i]
    return x


def assemble_mass(mesh):
    """P1 mass matrix: element block (h/6) [[2, 1], [1, 2]]."""
    m = TriDiag.zeros(mesh.n_nodes)
    for k, h in enumerate(mesh.h):
        m.add_element(k, (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]]))
    return m


def assemble_stiffness(mesh, a_elem, mu):
    """Advection-diffusion matrix for b(w, v) = (a w', v) + mu (w', v').

    a_elem gives the per-element constant velocity.
    """
    if mu <= 0.0:
        raise ValueError("diffusion coefficient must be positive")
    a_elem = np.broadcast_to(np.asarray(a_elem, dtype=float), (mesh.n_elems,))
    r = TriDiag.zeros(mesh.n_nodes)
    for k, h in enumerate(mesh.h):
        adv = (a_elem[k] / 2.0) * np.array([[-1.0, 1.0], [-1.0, 1.0]])
        dif = (mu / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
        r.add_element(k, adv + dif)
    return r


def assemble_load(mesh, f, t):
    """P1 load vector (f(., t), phi_l) by 4-point Gauss per element."""
    rhs = np.zeros(mesh.n_nodes)
    if f is None:
        return rhs
    for k, h in enumerate(mesh.h):
        xq = mesh.nodes[k] + h * _GAUSS_X
        fq = np.array([f(x, t) for x in xq])
        rhs[k] += h * np.sum(_GAUSS_W * fq * (1.0 - _GAUSS_X))
        rhs[k + 1] += h * np.sum(_GAUSS_W * fq * _GAUSS_X)
    return rhs


def apply_dirichlet(sys, bc, t):
    """Enforce Dirichlet values by row replacement with rhs correction.

    Returns a new system; boundary rows become identity rows and the
    adjacent interior rows lose their coupling to the boundary columns.
    """
    gl, gr = bc.values(t)
    m = sys.matrix.copy()
    rhs = sys.rhs.copy()
    n = m.n
    m.diag[0] = 1.0
    m.sup[0] = 0.0
    rhs[0] = gl
    m.diag[n - 1] = 1.0
    m.sub[n - 2] = 0.0
    rhs[n - 1] = gr
    # eliminate boundary columns from the neighbouring interior rows
    rhs[1] -= m.sub[0] * gl
    m.sub[0] = 0.0
    rhs[n - 2] -= m.sup[n - 2] * gr
    m.sup[n - 2] = 0.0
    return TriDiagSystem(m, rhs)
