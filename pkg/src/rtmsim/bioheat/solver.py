"""Linear solver, lumped implicit time stepping and steady-state march."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from ..errors import ConfigError, NotConverged, SolverDiverged
from ..phantom.mesh import Mesh
from .assembly import SystemMatrices, assemble


@dataclass(frozen=True)
class SolverConfig:
    tau_s: float = 1.0
    steady_tol: float = 1e-4          # K/s
    linear_tol: float = 1e-8          # relative residual
    max_iterations: int = 5000        # per linear solve
    max_steps: int = 2_000_000
    t_air_c: float = 22.0
    h_air: float = 10.0               # W/(m^2 K)
    t_core_c: float = 37.0
    t_blood_c: float | None = None    # None: tissue-table blood temperature
    q_rad: float | None = None        # W/m^3 skin sink override; None: tissue table
    t0_c: float = 37.0
    vessel_mode: str = "dirichlet"    # or "source"
    vessel_source_w_m3: float = 5.0e4
    mesh_edge_m: float = 0.008

    def validate(self) -> None:
        if not self.tau_s > 0:
            raise ConfigError("tau_s must be positive")
        if not (self.steady_tol > 0 and self.linear_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.q_rad is not None and self.q_rad > 0:
            raise ConfigError("q_rad must be <= 0")
        if self.vessel_mode not in ("dirichlet", "source"):
            raise ConfigError(f"unknown vessel_mode {self.vessel_mode!r}")
        if self.h_air < 0:
            raise ConfigError("h_air must be non-negative")

    def replace(self, **kw) -> "SolverConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True, eq=False)
class TemperatureField:
    values: np.ndarray
    mesh: Mesh
    time: float = 0.0
    steps: int = 0

    def __post_init__(self):
        if len(self.values) != self.mesh.n_nodes:
            raise ValueError("field length differs from node count")


@njit(cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    for i in range(out.shape[0]):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc


@njit(cache=True)
def _pcg_csr(indptr, indices, data, inv_d, b, x, tol, max_it):
    n = b.shape[0]
    r = np.empty(n)
    _csr_matvec(indptr, indices, data, x, r)
    r = b - r
    bnorm = np.sqrt(np.dot(b, b))
    target = tol * bnorm
    z = inv_d * r
    p = z.copy()
    rz = np.dot(r, z)
    Ap = np.empty(n)
    for it in range(max_it + 1):
        rnorm = np.sqrt(np.dot(r, r))
        if rnorm <= target:
            return it, rnorm / bnorm
        pAp = 0.0
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * p[indices[k]]
            Ap[i] = acc
            pAp += p[i] * acc
        if pAp <= 0.0:
            return -1, rnorm / bnorm
        alpha = rz / pAp
        rz_new = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * Ap[i]
            z[i] = inv_d[i] * r[i]
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return max_it + 1, np.sqrt(np.dot(r, r)) / bnorm


@njit(cache=True)
def _march_free(a_ptr, a_idx, a_val, inv_d, m_ptr, m_idx, m_val, b, T, tau,
                steady_tol, linear_tol, max_it, max_steps):
    """Fixed-Dirichlet march on the free nodes; ``T`` is updated in place.

    Returns (steps, last rate, status) with status 0 converged, 1 step limit,
    2 linear solve failure, 3 non-finite values.
    """
    n = b.shape[0]
    r = np.empty(n)
    rate = np.inf
    for k in range(1, max_steps + 1):
        _csr_matvec(m_ptr, m_idx, m_val, T, r)
        for i in range(n):
            r[i] = b[i] - r[i]
        x = np.zeros(n)
        if np.any(r != 0.0):
            its, _ = _pcg_csr(a_ptr, a_idx, a_val, inv_d, r, x, linear_tol, max_it)
            if its < 0 or its > max_it:
                return k, rate, 2
        big = 0.0
        for i in range(n):
            T[i] += x[i]
            ax = abs(x[i])
            if ax > big:
                big = ax
        rate = big / tau
        if not np.isfinite(rate):
            return k, rate, 3
        if rate < steady_tol:
            return k, rate, 0
    return max_steps, rate, 1


def linear_solve(A, b, tol=1e-8, max_it=5000, x0=None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops when ``||b - A x|| <= tol * ||b||``.
    """
    A = sp.csr_matrix(A, dtype=float)
    A.sort_indices()
    b = np.ascontiguousarray(b, dtype=float)
    if not np.any(b):
        return np.zeros_like(b)
    d = A.diagonal()
    if (d <= 0).any():
        raise SolverDiverged("matrix has non-positive diagonal; not SPD")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    its, relres = _pcg_csr(A.indptr, A.indices, A.data, 1.0 / d, b, x, tol, max_it)
    if its < 0:
        raise SolverDiverged("non-positive curvature; matrix is not SPD")
    if its > max_it:
        raise SolverDiverged(f"CG residual {relres:.3e} above {tol:g} after {max_it} iterations")
    return x


class Stepper:
    """Lumped implicit Euler for a fixed system and time step.

    Each step solves ``(G_diag/tau + M) T_new = P + G_diag T / tau`` with the
    Dirichlet rows removed, written in increment form
    ``(G_diag/tau + M)_ff dT_f = (P - M T)_f - (G_diag/tau + M)_fd dT_d`` so the
    relative linear tolerance applies to the change per step.
    """

    def __init__(self, sys: SystemMatrices, tau: float, linear_tol=1e-8, max_it=5000):
        if not tau > 0:
            raise ConfigError("tau must be positive")
        self.sys, self.tau = sys, tau
        self.linear_tol, self.max_it = linear_tol, max_it
        n = sys.n
        fixed = np.zeros(n, dtype=bool)
        fixed[sys.dirichlet_nodes] = True
        self.free = np.nonzero(~fixed)[0]
        A = (sp.diags(sys.G_diag / tau) + sys.M).tocsr()
        self.A_ff = A[self.free][:, self.free].tocsr()
        self.A_ff.sort_indices()
        self.A_fd = A[self.free][:, sys.dirichlet_nodes].tocsr()
        self._inv_d = 1.0 / self.A_ff.diagonal()
        M = sys.M.tocsr()
        self.M_ff = M[self.free][:, self.free].tocsr()
        self.M_ff.sort_indices()
        self.M_fd = M[self.free][:, sys.dirichlet_nodes].tocsr()

    def run(self, T, steady_tol, max_steps):
        """March from ``T`` until the rate drops below ``steady_tol``.

        Returns (T, steps, rate); raises on divergence or step limit.
        """
        T = self(np.asarray(T, dtype=float))
        rate = np.inf
        steps = 1
        # after one step the Dirichlet values hold, so the free-node update is a
        # fixed recurrence that runs entirely in compiled code
        first = np.max(np.abs(T - self._prev)) / self.tau
        if not np.isfinite(first):
            raise SolverDiverged("non-finite temperature during time march")
        if first < steady_tol:
            return T, steps, first
        sys = self.sys
        b = sys.P[self.free] - self.M_fd @ T[sys.dirichlet_nodes]
        Tf = np.ascontiguousarray(T[self.free])
        A, M = self.A_ff, self.M_ff
        k, rate, status = _march_free(A.indptr, A.indices, A.data, self._inv_d,
                                      M.indptr, M.indices, M.data, b, Tf, float(self.tau),
                                      float(steady_tol), float(self.linear_tol),
                                      int(self.max_it), int(max_steps - 1))
        T[self.free] = Tf
        steps += k
        if status == 2:
            raise SolverDiverged("linear solve failed during time march")
        if status == 3:
            raise SolverDiverged("non-finite temperature during time march")
        if status == 1:
            raise NotConverged(f"rate {rate:.3e} K/s above {steady_tol:g} after {steps} steps")
        return T, steps, rate

    def __call__(self, T: np.ndarray) -> np.ndarray:
        sys = self.sys
        self._prev = T
        dT_d = sys.dirichlet_values - T[sys.dirichlet_nodes]
        r = (sys.P - sys.M @ T)[self.free]
        if len(dT_d):
            r -= self.A_fd @ dT_d
        dT = np.empty_like(T)
        dT[sys.dirichlet_nodes] = dT_d
        x = np.zeros(len(r))
        if np.any(r):
            A = self.A_ff
            its, relres = _pcg_csr(A.indptr, A.indices, A.data, self._inv_d, r, x,
                                   self.linear_tol, self.max_it)
            if its < 0 or its > self.max_it:
                raise SolverDiverged(f"step solve failed (relative residual {relres:.3e})")
        dT[self.free] = x
        return T + dT


def step(T: TemperatureField, sys: SystemMatrices, tau: float, linear_tol=1e-8, max_it=5000) -> TemperatureField:
    new = Stepper(sys, tau, linear_tol, max_it)(np.asarray(T.values, dtype=float))
    return TemperatureField(new, T.mesh, T.time + tau, T.steps + 1)


def march(sys: SystemMatrices, mesh: Mesh, config: SolverConfig, T0=None) -> TemperatureField:
    """Repeat implicit steps until ``max |T_new - T| / tau < steady_tol``."""
    config.validate()
    stepper = Stepper(sys, config.tau_s, config.linear_tol, config.max_iterations)
    T = np.full(sys.n, config.t0_c) if T0 is None else np.array(T0, dtype=float)
    T, steps, _ = stepper.run(T, config.steady_tol, config.max_steps)
    return TemperatureField(T, mesh, steps * config.tau_s, steps)


def solve_steady(mesh: Mesh, props, config: SolverConfig) -> TemperatureField:
    config.validate()
    sys = assemble(mesh, props, config)
    return march(sys, mesh, config)


def direct_steady(sys: SystemMatrices) -> np.ndarray:
    """Steady state from ``M T = P`` by sparse LU (reference route)."""
    n = sys.n
    fixed = np.zeros(n, dtype=bool)
    fixed[sys.dirichlet_nodes] = True
    free = np.nonzero(~fixed)[0]
    M = sys.M.tocsr()
    rhs = sys.P[free] - M[free][:, sys.dirichlet_nodes] @ sys.dirichlet_values
    T = np.empty(n)
    T[sys.dirichlet_nodes] = sys.dirichlet_values
    T[free] = spla.spsolve(M[free][:, free].tocsc(), rhs)
    return T


def slowest_relaxation_time(sys: SystemMatrices) -> float:
    """Longest thermal time constant (s) of the lumped semi-discrete system."""
    n = sys.n
    fixed = np.zeros(n, dtype=bool)
    fixed[sys.dirichlet_nodes] = True
    free = np.nonzero(~fixed)[0]
    M = sys.M.tocsr()[free][:, free]
    g = sys.G_diag[free]
    s = 1.0 / np.sqrt(g)
    S = sp.diags(s) @ M @ sp.diags(s)
    lam = spla.eigsh(S.tocsc(), k=1, sigma=0, which="LM", return_eigenvectors=False)[0]
    return float(1.0 / lam)


def temperature_csv(T) -> str:
    """``node_id,x,y,z,T`` text, one row per mesh node, floats at full precision."""
    values = T.values if isinstance(T, TemperatureField) else np.asarray(T, dtype=float)
    nodes = T.mesh.nodes
    lines = ["node_id,x,y,z,T"]
    for i, (p, t) in enumerate(zip(nodes.tolist(), values.tolist())):
        lines.append(f"{i},{p[0]!r},{p[1]!r},{p[2]!r},{float(t)!r}")
    return "\n".join(lines) + "\n"
