"""Implicit 1D-1V Vlasov-Fokker-Planck solver at a fixed parameter point.

The scheme is fully implicit: upwind transport in x (periodic) and a
symmetrized Fokker-Planck velocity discretization built from the local
Maxwellian shifted by eps * E.  The linear system is solved per time step
in the variables g = f / sqrt(M_l), where the collision block is symmetric
negative semidefinite, by a diagonally preconditioned Krylov iteration.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
V_MIN, V_MAX = -6.0, 6.0
ML_FLOOR = 1e-300


class KrylovError(RuntimeError):
    """Raised when the implicit step solver misses its residual contract."""


@dataclass
class PhaseGrid:
    """Uniform phase-space grid: x on [0, 2pi) periodic, v on [-6, 6]."""

    nx: int = 32
    nv: int = 64
    eps: float = 1.0
    dt: float = None

    def __post_init__(self):
        if self.dt is None:
            self.dt = self.dx / 8.0
        if min(self.nx, self.nv) < 2 or self.dt <= 0 or self.eps <= 0:
            raise ValueError("invalid grid parameters")

    @property
    def dx(self):
        return TWO_PI / self.nx

    @property
    def dv(self):
        return (V_MAX - V_MIN) / self.nv

    @property
    def x(self):
        return np.arange(self.nx) * self.dx

    @property
    def v(self):
        return V_MIN + np.arange(self.nv) * self.dv

    @property
    def size(self):
        return self.nx * self.nv


@dataclass
class PhaseField:
    """Discrete function on the (x, v) grid; rows are x, columns are v."""

    values: np.ndarray
    grid: PhaseGrid
    role: str = "density"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.nv):
            raise ValueError(f"expected shape {(self.grid.nx, self.grid.nv)}")

    def ravel(self):
        return self.values.ravel()


def maxwellian(v):
    return np.exp(-0.5 * v**2) / np.sqrt(TWO_PI)


def global_maxwellian(grid):
    """M(v) replicated over x."""
    return PhaseField(np.tile(maxwellian(grid.v), (grid.nx, 1)), grid, role="equilibrium")


def local_maxwellian(grid, e_values):
    """Maxwellian shifted by eps * E(x), column by column."""
    e_values = np.asarray(e_values, dtype=float)
    if e_values.shape != (grid.nx,):
        raise ValueError("one field value per x cell required")
    shifted = grid.v[None, :] - grid.eps * e_values[:, None]
    return PhaseField(np.exp(-0.5 * shifted**2) / np.sqrt(TWO_PI), grid, role="equilibrium")


def global_equilibrium(grid, field_spec, z):
    """F(x, v, z) = exp(-phi_inf(x, z)) M(v)."""
    weight = np.exp(-field_spec.eval_phi_inf(grid.x, z))
    return PhaseField(weight[:, None] * maxwellian(grid.v)[None, :], grid, role="equilibrium")


def initial_condition(grid, field_spec, z):
    """sin(x) M(v) plus the global equilibrium."""
    pert = np.sin(grid.x)[:, None] * maxwellian(grid.v)[None, :]
    return PhaseField(pert + global_equilibrium(grid, field_spec, z).values, grid)


def collision_apply(grid, ml, f):
    """Fokker-Planck flux-form discretization with zero-flux closure.

    Operates on the trailing (velocity) axis, so full fields and single
    columns are both accepted.  The flux array is formed once and
    differenced, which makes the column mass sum telescope to round-off.
    """
    ml = np.maximum(np.asarray(ml, dtype=float), ML_FLOOR)
    f = np.asarray(f, dtype=float)
    ratio = f / ml
    flux = np.sqrt(ml[..., 1:] * ml[..., :-1]) * (ratio[..., 1:] - ratio[..., :-1])
    out = np.zeros_like(f)
    out[..., :-1] += flux
    out[..., 1:] -= flux
    return out / grid.dv**2


def transport_apply(grid, f):
    """Upwind x-transport term (F_{i+1/2} - F_{i-1/2}) / dx, periodic."""
    v = grid.v
    vp = 0.5 * (np.abs(v) + v)
    vm = 0.5 * (np.abs(v) - v)
    f = np.asarray(f, dtype=float)
    fp = np.roll(f, -1, axis=0)
    fm = np.roll(f, 1, axis=0)
    return (np.abs(v)[None, :] * f - vm[None, :] * fp - vp[None, :] * fm) / grid.dx


def collision_operator_matrix_apply(grid, field_spec, z, t, f):
    """Apply the z-dependent collision block at time t to a full field.

    This is the matrix-free operator consumed by the residual-based greedy
    driver; it depends on z only through the electric field along x.
    """
    values = f.values if isinstance(f, PhaseField) else np.asarray(f, dtype=float)
    ml = local_maxwellian(grid, field_spec.eval_E(t, grid.x, z)).values
    return collision_apply(grid, ml, values)


def mass(grid, values):
    return float(np.sum(values) * grid.dx * grid.dv)


def discrete_norm(grid, values, kind="l2"):
    """Discrete L2 norm sqrt(sum f^2 dx dv); the V norm adds the periodic
    centered-difference x-derivative term."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(grid.nx, grid.nv)
    total = np.sum(values**2)
    if kind == "v":
        dfdx = (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2.0 * grid.dx)
        total += np.sum(dfdx**2)
    elif kind != "l2":
        raise ValueError(f"unknown norm kind {kind!r}")
    return float(np.sqrt(total * grid.dx * grid.dv))


class _ImplicitOperator:
    """Assembled implicit-step operator for fixed field values E(x).

    In g variables the system is
        (eps/dt) g + transport-similarity term - (1/eps) Q g = (eps/dt) f/s
    with s = sqrt(M_l) and Q the symmetrized collision matrix.
    """

    def __init__(self, grid, e_values, include_transport=True):
        self.grid = grid
        self.include_transport = include_transport
        self.s = np.sqrt(local_maxwellian(grid, e_values).values)
        nx, nv = grid.nx, grid.nv
        eps, dt, dx, dv = grid.eps, grid.dt, grid.dx, grid.dv
        idx = np.arange(nx * nv).reshape(nx, nv)
        s = self.s

        rows, cols, vals = [], [], []

        diag = np.full((nx, nv), eps / dt)
        cdiag = np.zeros((nx, nv))
        cdiag[:, 1:] += s[:, :-1] / s[:, 1:]
        cdiag[:, :-1] += s[:, 1:] / s[:, :-1]
        diag += cdiag / (eps * dv**2)
        if include_transport:
            diag += np.abs(grid.v)[None, :] / dx
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(diag.ravel())

        off = np.full((nx, nv - 1), -1.0 / (eps * dv**2))
        rows.append(idx[:, :-1].ravel())
        cols.append(idx[:, 1:].ravel())
        vals.append(off.ravel())
        rows.append(idx[:, 1:].ravel())
        cols.append(idx[:, :-1].ravel())
        vals.append(off.ravel())

        if include_transport:
            v = grid.v
            vp = 0.5 * (np.abs(v) + v)
            vm = 0.5 * (np.abs(v) - v)
            up = np.roll(idx, -1, axis=0)
            dn = np.roll(idx, 1, axis=0)
            su = np.roll(s, -1, axis=0)
            sd = np.roll(s, 1, axis=0)
            rows.append(idx.ravel())
            cols.append(up.ravel())
            vals.append((-vm[None, :] * su / s / dx).ravel())
            rows.append(idx.ravel())
            cols.append(dn.ravel())
            vals.append((-vp[None, :] * sd / s / dx).ravel())

        n = nx * nv
        self.matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        self.diag = diag.ravel()
        self.preconditioner = sp.diags(1.0 / self.diag).tocsr()

    def solve_step(self, f_old, krylov_rtol=1e-10, x0=None):
        """Advance one time step; returns (f_new, g) or raises KrylovError."""
        grid = self.grid
        b = (grid.eps / grid.dt) * (np.asarray(f_old, dtype=float) / self.s).ravel()
        target = krylov_rtol * 1e-2
        if self.include_transport:
            g, _ = spla.gmres(
                self.matrix, b, x0=x0, rtol=target, atol=0.0,
                restart=min(self.matrix.shape[0], 200), maxiter=60,
                M=self.preconditioner,
            )
        else:
            g, _ = spla.cg(
                self.matrix, b, x0=x0, rtol=target, atol=0.0,
                maxiter=20 * self.matrix.shape[0], M=self.preconditioner,
            )
        residual = np.linalg.norm(self.matrix @ g - b)
        bound = krylov_rtol * np.linalg.norm(b)
        if not np.isfinite(residual) or residual > bound:
            raise KrylovError(
                f"implicit step stalled: |r| = {residual:.3e} > {bound:.3e} "
                f"(nx={grid.nx}, nv={grid.nv}, eps={grid.eps}, dt={grid.dt})"
            )
        f_new = g.reshape(grid.nx, grid.nv) * self.s
        return f_new, g


def step(grid, f, field_spec, z, t, krylov_rtol=1e-10, include_transport=True):
    """One implicit step from time t; the field and the local Maxwellian are
    evaluated at t + dt."""
    values = f.values if isinstance(f, PhaseField) else np.asarray(f, dtype=float)
    op = _ImplicitOperator(
        grid, field_spec.eval_E(t + grid.dt, grid.x, z), include_transport
    )
    f_new, _ = op.solve_step(values, krylov_rtol)
    return PhaseField(f_new, grid)


_negativity_warned = False


def _monitor_negativity(values, where):
    global _negativity_warned
    floor = values.min()
    if floor < -1e-12 * max(values.max(), 1e-300):
        msg = "density has negative entries (min %.3e) %s"
        if _negativity_warned:
            logger.debug(msg, floor, where)
        else:
            logger.warning(msg, floor, where)
            _negativity_warned = True


def solve_to_time(grid, f0, field_spec, z, t_final, krylov_rtol=1e-10,
                  include_transport=True, keep_previous=False):
    """Iterate the implicit step to t_final (rounded to a whole step count).

    With keep_previous=True the return value is (f_T, f_{T - dt}); the
    penultimate snapshot feeds the full-scheme residual oracle.
    """
    if t_final < 0:
        raise ValueError("final time must be nonnegative")
    values = (f0.values if isinstance(f0, PhaseField) else np.asarray(f0, dtype=float)).copy()
    n_steps = int(round(t_final / grid.dt))
    previous = values.copy()
    _monitor_negativity(values, "in initial data")

    op = None
    if not field_spec.time_dependent:
        op = _ImplicitOperator(grid, field_spec.eval_E(0.0, grid.x, z), include_transport)
    g = None
    for m in range(n_steps):
        if field_spec.time_dependent:
            op = _ImplicitOperator(
                grid, field_spec.eval_E((m + 1) * grid.dt, grid.x, z), include_transport
            )
            g = None
        previous = values
        values, g = op.solve_step(values, krylov_rtol, x0=g)
    _monitor_negativity(values, "after time stepping")
    out = PhaseField(values, grid)
    if keep_previous:
        return out, PhaseField(previous, grid)
    return out


class VfpModel:
    """Driver-facing adapter: parametric solve, collision apply and norms.

    The greedy drivers treat this as an opaque model with a vector-valued
    solution map z -> f(T, z) of length nx * nv.
    """

    def __init__(self, grid, field_spec, t_final=0.1, krylov_rtol=1e-10):
        self.grid = grid
        self.field_spec = field_spec
        self.t_final = float(t_final)
        self.krylov_rtol = krylov_rtol

    @property
    def dim(self):
        return self.field_spec.dim

    @property
    def size(self):
        return self.grid.size

    @property
    def eps(self):
        return self.grid.eps

    @property
    def effective_t_final(self):
        """Time actually reached: t_final rounded to a whole step count."""
        return round(self.t_final / self.grid.dt) * self.grid.dt

    def initial(self, z):
        return initial_condition(self.grid, self.field_spec, z)

    def solve(self, z):
        """f(T, z) as a flat vector."""
        f = solve_to_time(
            self.grid, self.initial(z), self.field_spec, z, self.t_final,
            krylov_rtol=self.krylov_rtol,
        )
        return f.ravel()

    def solve_pair(self, z):
        """Final and penultimate snapshots, both flat."""
        f, prev = solve_to_time(
            self.grid, self.initial(z), self.field_spec, z, self.t_final,
            krylov_rtol=self.krylov_rtol, keep_previous=True,
        )
        return f.ravel(), prev.ravel()

    def operator_apply(self, z, vec):
        """Collision block at the reached final time applied to a flat vector.

        Uses the same time as the last implicit step so residuals of stored
        solutions telescope exactly, also for time-dependent fields.
        """
        out = collision_operator_matrix_apply(
            self.grid, self.field_spec, z, self.effective_t_final,
            np.asarray(vec, dtype=float).reshape(self.grid.nx, self.grid.nv),
        )
        return out.ravel()

    def norm(self, vec, kind="l2"):
        return discrete_norm(self.grid, vec, kind)
