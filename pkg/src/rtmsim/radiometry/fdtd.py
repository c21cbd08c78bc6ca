"""Finite-difference time-domain (Yee) solver for lossy media.

Field layout on an ``(nx, ny, nz)`` cell grid with spacing ``d``::

    Ex (i+1/2, j, k)    Hx (i, j+1/2, k+1/2)
    Ey (i, j+1/2, k)    Hy (i+1/2, j, k+1/2)
    Ez (i, j, k+1/2)    Hz (i+1/2, j+1/2, k)

Material values are stored per cell and shared by the components of that
cell. Each axis is either absorbing (first-order Mur on both faces) or
periodic; a periodic axis of length one makes the problem invariant along it,
which is how the 1-D and 2-D reductions are run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import NotStationary, ResolutionGateFailed, ValidationError

C0 = 299_792_458.0
MU0 = 4e-7 * np.pi
EPS0 = 1.0 / (MU0 * C0 ** 2)


def attenuation_constant(sigma, eps_r, mu_r, f):
    """Plane-wave amplitude attenuation constant alpha (1/m)."""
    w = 2 * np.pi * f
    eps, mu = eps_r * EPS0, mu_r * MU0
    loss = sigma / (w * eps)
    return w * np.sqrt(mu * eps / 2.0) * np.sqrt(np.sqrt(1.0 + loss ** 2) - 1.0)


def wavelength_in_medium(eps_r, mu_r, f, sigma=0.0):
    """Wavelength 2*pi/beta, reducing to c/(f*sqrt(eps*mu)) for lossless media."""
    w = 2 * np.pi * f
    eps, mu = eps_r * EPS0, mu_r * MU0
    loss = sigma / (w * eps)
    beta = w * np.sqrt(mu * eps / 2.0) * np.sqrt(np.sqrt(1.0 + loss ** 2) + 1.0)
    return 2 * np.pi / beta


@dataclass
class Source:
    position: tuple            # cell index (i, j, k)
    direction: tuple = (0.0, 0.0, 1.0)
    frequency: float = 1.5e9
    amplitude: float = 1.0
    waveform: object = None    # optional callable t -> value; overrides the sinusoid

    def value(self, t: float) -> float:
        if self.waveform is not None:
            return self.amplitude * self.waveform(t)
        return self.amplitude * np.sin(2 * np.pi * self.frequency * t)


@dataclass
class EmGrid:
    spacing: float
    sigma: np.ndarray                      # (nx, ny, nz) S/m
    eps_r: np.ndarray
    mu_r: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))  # centre of cell (0,0,0)
    source: Source | None = None
    periodic: tuple = (False, False, False)
    courant: float = 0.5

    def __post_init__(self):
        self.sigma = np.ascontiguousarray(self.sigma, dtype=float)
        shape = self.sigma.shape
        self.eps_r = np.broadcast_to(np.asarray(self.eps_r, float), shape).copy()
        self.mu_r = np.broadcast_to(np.asarray(self.mu_r, float), shape).copy()
        self.origin = np.asarray(self.origin, dtype=float)
        if len(shape) != 3:
            raise ValidationError("material arrays must be three-dimensional")
        if (self.sigma < 0).any() or (self.eps_r < 1).any() or (self.mu_r <= 0).any():
            raise ValidationError("material values violate sigma>=0, eps>=1, mu>0")

    @property
    def shape(self):
        return self.sigma.shape

    @property
    def dt(self) -> float:
        # Courant number c*dt/d; the 3-D stability limit is 1/sqrt(3)
        return self.courant * self.spacing / C0

    def cell_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing * np.arange(self.shape[axis])

    def check_gates(self, frequency: float) -> None:
        """Resolution (spacing <= lambda_medium/10) and Courant (<= 0.5) gates."""
        if self.courant > 0.5 + 1e-12:
            raise ResolutionGateFailed(f"Courant number {self.courant} exceeds 0.5")
        lam = wavelength_in_medium(self.eps_r, self.mu_r, frequency, self.sigma).min()
        if self.spacing > lam / 10 * (1 + 1e-12):
            raise ResolutionGateFailed(
                f"spacing {self.spacing:.3e} m exceeds lambda/10 = {lam / 10:.3e} m")


def _fwd(F, axis, periodic):
    """F[i+1] - F[i]; the last entry is zero on non-periodic axes."""
    if periodic:
        return np.roll(F, -1, axis=axis) - F
    out = np.zeros_like(F)
    sl_hi = [slice(None)] * 3
    sl_lo = [slice(None)] * 3
    sl_hi[axis], sl_lo[axis] = slice(1, None), slice(None, -1)
    out[tuple(sl_lo)] = F[tuple(sl_hi)] - F[tuple(sl_lo)]
    return out


def _bwd(F, axis, periodic):
    """F[i] - F[i-1]; the first entry is F[0] on non-periodic axes (overwritten by the ABC)."""
    if periodic:
        return F - np.roll(F, 1, axis=axis)
    out = F.copy()
    sl_hi = [slice(None)] * 3
    sl_lo = [slice(None)] * 3
    sl_hi[axis], sl_lo[axis] = slice(1, None), slice(None, -1)
    out[tuple(sl_hi)] -= F[tuple(sl_lo)]
    return out


def _face(axis, index):
    sl = [slice(None)] * 3
    sl[axis] = index
    return tuple(sl)


class Simulation:
    """Leapfrog time stepping of E and H on an :class:`EmGrid`."""

    def __init__(self, grid: EmGrid):
        self.grid = grid
        shape = grid.shape
        self.E = [np.zeros(shape) for _ in range(3)]
        self.H = [np.zeros(shape) for _ in range(3)]
        self.t = 0.0
        self.n = 0
        dt, d = grid.dt, grid.spacing
        eps = grid.eps_r * EPS0
        loss = grid.sigma * dt / (2 * eps)
        self.ca = (1 - loss) / (1 + loss)
        self.cb = dt / (eps * (1 + loss)) / d
        self.ch = dt / (grid.mu_r * MU0) / d
        # Mur coefficient with the local wave speed on each face
        self._mur = {}
        for axis in range(3):
            if grid.periodic[axis] or shape[axis] < 2:
                continue
            for side, (b, nb) in (("lo", (0, 1)), ("hi", (-1, -2))):
                v = C0 / np.sqrt(grid.eps_r[_face(axis, b)] * grid.mu_r[_face(axis, b)])
                k = (v * dt - d) / (v * dt + d)
                self._mur[(axis, side)] = (b, nb, k)
        src = grid.source
        if src is not None:
            u = np.asarray(src.direction, dtype=float)
            self._src_dir = u / np.linalg.norm(u)
            self._src_idx = tuple(int(i) for i in src.position)

    def step(self) -> None:
        g = self.grid
        per = g.periodic
        Ex, Ey, Ez = self.E
        Hx, Hy, Hz = self.H
        Hx -= self.ch * (_fwd(Ez, 1, per[1]) - _fwd(Ey, 2, per[2]))
        Hy -= self.ch * (_fwd(Ex, 2, per[2]) - _fwd(Ez, 0, per[0]))
        Hz -= self.ch * (_fwd(Ey, 0, per[0]) - _fwd(Ex, 1, per[1]))

        saved = {}
        for (axis, side), (b, nb, _) in self._mur.items():
            for c in range(3):
                if c != axis:
                    saved[(axis, side, c)] = (self.E[c][_face(axis, b)].copy(),
                                              self.E[c][_face(axis, nb)].copy())

        Ex *= self.ca
        Ex += self.cb * (_bwd(Hz, 1, per[1]) - _bwd(Hy, 2, per[2]))
        Ey *= self.ca
        Ey += self.cb * (_bwd(Hx, 2, per[2]) - _bwd(Hz, 0, per[0]))
        Ez *= self.ca
        Ez += self.cb * (_bwd(Hy, 0, per[0]) - _bwd(Hx, 1, per[1]))

        self.t += g.dt
        self.n += 1
        if g.source is not None:
            s = g.source.value(self.t - 0.5 * g.dt)
            for c in range(3):
                if self._src_dir[c] != 0:
                    self.E[c][self._src_idx] -= self.cb[self._src_idx] * g.spacing * s * self._src_dir[c]

        for (axis, side), (b, nb, k) in self._mur.items():
            for c in range(3):
                if c == axis:
                    continue
                old_b, old_nb = saved[(axis, side, c)]
                E = self.E[c]
                E[_face(axis, b)] = old_nb + k * (E[_face(axis, nb)] - old_b)

    def cell_magnitude2(self) -> np.ndarray:
        """|E|^2 with each component averaged onto cell centres."""
        out = np.zeros(self.grid.shape)
        for c, E in enumerate(self.E):
            if self.grid.shape[c] > 1 and not self.grid.periodic[c]:
                avg = E.copy()
                avg[_face(c, slice(1, None))] += E[_face(c, slice(None, -1))]
                avg[_face(c, slice(1, None))] *= 0.5
            else:
                avg = E
            out += avg * avg
        return out


@dataclass
class FdtdResult:
    amplitude: np.ndarray     # per-cell peak |E| over the last period
    change: float             # relative amplitude change between the last two periods
    steps: int


def fdtd_solve(grid: EmGrid, cycles: int = 20, stationarity: float = 0.01,
               check_gates: bool = True) -> FdtdResult:
    """Drive the grid's sinusoidal source for ``cycles`` periods.

    Returns the per-cell amplitude taken as the peak |E| over the final period.
    Raises :class:`NotStationary` if the amplitude still changes by more than
    ``stationarity`` (relative L2) between the last two periods.
    """
    if grid.source is None:
        amp = np.zeros(grid.shape)
        return FdtdResult(amp, 0.0, 0)
    f = grid.source.frequency
    if check_gates:
        grid.check_gates(f)
    if cycles < 2:
        raise ValidationError("need at least two cycles to test stationarity")
    sim = Simulation(grid)
    period = 1.0 / f
    steps_per_period = int(np.ceil(period / grid.dt))
    prev = np.zeros(grid.shape)
    peak = np.zeros(grid.shape)
    for cyc in range(cycles):
        if cyc == cycles - 1:
            prev = peak
        peak = np.zeros(grid.shape)
        for _ in range(steps_per_period):
            sim.step()
            np.maximum(peak, sim.cell_magnitude2(), out=peak)
    amp, amp_prev = np.sqrt(peak), np.sqrt(prev)
    norm = np.linalg.norm(amp)
    change = float(np.linalg.norm(amp - amp_prev) / norm) if norm > 0 else 0.0
    if change >= stationarity:
        raise NotStationary(f"amplitude changed {100 * change:.2f}% over the last period")
    return FdtdResult(amp, change, sim.n)


def sample_cells(grid: EmGrid, values: np.ndarray, pts) -> np.ndarray:
    """Trilinear interpolation of a cell-centred array at physical points."""
    axes = [grid.cell_centers(a) for a in range(3)]
    vals = np.asarray(values, dtype=float)
    # an axis with one cell cannot be interpolated; pad it to two equal layers
    for a in range(3):
        if len(axes[a]) == 1:
            axes[a] = np.array([axes[a][0] - grid.spacing, axes[a][0] + grid.spacing])
            vals = np.concatenate([vals, vals], axis=a)
    interp = RegularGridInterpolator(axes, vals, method="linear", bounds_error=False, fill_value=None)
    return interp(np.atleast_2d(pts))
