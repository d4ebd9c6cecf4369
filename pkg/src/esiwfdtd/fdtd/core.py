"""Yee time stepping with CPML boundaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..constants import C0, EPS0, ETA0, MM, MU0
from ..mesher import GridSpec, YeeGrid, e_shapes, h_shapes
from . import kernels


class InstabilityError(RuntimeError):
    def __init__(self, step: int, component: str, index: tuple):
        super().__init__(f"non-finite field in {component} at index {index} by step {step}")
        self.step = step
        self.component = component
        self.index = index


@dataclass(frozen=True)
class CpmlConfig:
    """Grading of the convolutional PML.

    ``sigma_scale`` multiplies the usual optimum ``(order+1)/(eta0*cell)``;
    ``alpha_max`` is in S/m.
    """

    thickness: int = 10
    order: float = 3.0
    sigma_scale: float = 0.8
    kappa_max: float = 5.0
    alpha_max: float = 0.05

    def __post_init__(self):
        if self.thickness < 6:
            raise ValueError(f"CPML thickness must be >= 6 cells, got {self.thickness}")
        if min(self.order, self.sigma_scale, self.kappa_max, self.alpha_max) <= 0:
            raise ValueError("CPML parameters must be positive")


def cfl_dt(spec: GridSpec, safety: float = 0.99) -> float:
    """Time step (s) at ``safety`` times the 3-D Courant limit."""
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    dx, dy, dz = (d * MM for d in spec.d)
    return safety / (C0 * math.sqrt(1 / dx**2 + 1 / dy**2 + 1 / dz**2))


@dataclass
class FieldState:
    Ex: np.ndarray
    Ey: np.ndarray
    Ez: np.ndarray
    Hx: np.ndarray
    Hy: np.ndarray
    Hz: np.ndarray
    step: int = 0
    dt: float = 0.0

    @classmethod
    def zeros(cls, spec: GridSpec, dt: float) -> "FieldState":
        e = [np.zeros(s) for s in e_shapes(spec.n)]
        h = [np.zeros(s) for s in h_shapes(spec.n)]
        return cls(*e, *h, step=0, dt=dt)

    @property
    def e(self):
        return (self.Ex, self.Ey, self.Ez)

    @property
    def h(self):
        return (self.Hx, self.Hy, self.Hz)

    @property
    def time_e(self) -> float:
        return self.step * self.dt

    @property
    def time_h(self) -> float:
        return (self.step - 0.5) * self.dt

    def copy(self) -> "FieldState":
        return FieldState(*(a.copy() for a in (*self.e, *self.h)), step=self.step, dt=self.dt)


@dataclass
class AxisProfile:
    """1-D CPML coefficients and neighbour maps along one axis."""

    inv_kappa_e: np.ndarray
    b_e: np.ndarray
    a_e: np.ndarray
    map_e: np.ndarray
    inv_kappa_h: np.ndarray
    b_h: np.ndarray
    a_h: np.ndarray
    map_h: np.ndarray
    n_psi: int
    active: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def axis_profile(n: int, d_m: float, p_lo: int, p_hi: int, cfg: CpmlConfig | None,
                 dt: float, periodic: bool = False) -> AxisProfile:
    ke = np.ones(n + 1)
    be = np.zeros(n + 1)
    ae = np.zeros(n + 1)
    me = -np.ones(n + 1, dtype=np.int64)
    kh = np.ones(n)
    bh = np.zeros(n)
    ah = np.zeros(n)
    mh = -np.ones(n, dtype=np.int64)

    def coeffs(rho):
        sig_max = cfg.sigma_scale * (cfg.order + 1) / (ETA0 * d_m)
        sig = sig_max * rho**cfg.order
        kap = 1 + (cfg.kappa_max - 1) * rho**cfg.order
        alp = cfg.alpha_max * (1 - rho)
        b = np.exp(-(sig / kap + alp) * dt / EPS0)
        denom = sig * kap + kap**2 * alp
        a = np.where(denom > 0, sig / np.where(denom > 0, denom, 1.0) * (b - 1), 0.0)
        return 1 / kap, b, a

    if (p_lo or p_hi) and cfg is None:
        raise ValueError("grid has absorbing layers but no CpmlConfig was given")
    if periodic and (p_lo or p_hi):
        raise ValueError("an axis cannot be both periodic and absorbing")
    if p_lo:
        j = np.arange(p_lo)  # E nodes 0..p_lo-1
        ke[j], be[j], ae[j] = coeffs((p_lo - j) / p_lo)
        me[j] = j
        c = np.arange(p_lo)  # H cells, centres at c+1/2
        kh[c], bh[c], ah[c] = coeffs((p_lo - c - 0.5) / p_lo)
        mh[c] = c
    if p_hi:
        j = np.arange(n - p_hi + 1, n + 1)
        ke[j], be[j], ae[j] = coeffs((j - (n - p_hi)) / p_hi)
        me[j] = p_lo + (j - (n - p_hi + 1))
        c = np.arange(n - p_hi, n)
        kh[c], bh[c], ah[c] = coeffs((c + 0.5 - (n - p_hi)) / p_hi)
        mh[c] = p_lo + (c - (n - p_hi))

    lower = np.arange(n + 1, dtype=np.int64) - 1
    upper = np.minimum(np.arange(n + 1, dtype=np.int64), n - 1)
    if periodic:
        active = np.arange(n + 1, dtype=np.int64)
        lower[0] = n - 1
        upper[n] = 0
    else:
        active = np.arange(1, n, dtype=np.int64)
        lower[0] = 0
    return AxisProfile(ke, be, ae, me, kh, bh, ah, mh, p_lo + p_hi, active, lower, upper)


class Solver:
    """Owns the update coefficients and CPML state for one grid.

    Field arrays live in a separate :class:`FieldState`; the solver is not
    meant to be shared between simulations (the CPML auxiliaries are state).
    """

    nan_check_every = 500

    def __init__(self, grid: YeeGrid, dt: float | None = None, safety: float = 0.99,
                 cpml: CpmlConfig | None = None, periodic=(False, False, False)):
        spec = grid.spec
        self.grid = grid
        self.spec = spec
        self.dt = cfl_dt(spec, safety) if dt is None else dt
        if self.dt > cfl_dt(spec, 1.0) * (1 + 1e-12):
            raise ValueError("time step exceeds the Courant limit")
        if cpml is None and any(spec.pml):
            cpml = CpmlConfig()
        self.cpml = cpml
        self.periodic = tuple(periodic)
        dt = self.dt
        self.ca, self.cb = [], []
        for c in range(3):
            eps, sig, pec = grid.eps[c], grid.sigma[c], grid.pec[c]
            loss = sig * dt / (2 * eps)
            ca = (1 - loss) / (1 + loss)
            cb = (dt / eps) / (1 + loss)
            ca[pec] = 0.0
            cb[pec] = 0.0
            self.ca.append(np.ascontiguousarray(ca))
            self.cb.append(np.ascontiguousarray(cb))
        self.ch = dt / MU0
        d_m = [d * MM for d in spec.d]
        self.inv_d = [1 / v for v in d_m]
        self.prof = [
            axis_profile(spec.n[a], d_m[a], spec.pml[2 * a], spec.pml[2 * a + 1], cpml, dt, periodic[a])
            for a in range(3)
        ]
        self._alloc_psi()

    def _alloc_psi(self):
        nx, ny, nz = self.spec.n
        px, py, pz = (p.n_psi for p in self.prof)
        z = np.zeros
        self.psi_h = (
            z((nx + 1, py, nz)), z((nx + 1, ny, pz)),  # Hx: y, z
            z((nx, ny + 1, pz)), z((px, ny + 1, nz)),  # Hy: z, x
            z((px, ny, nz + 1)), z((nx, py, nz + 1)),  # Hz: x, y
        )
        self.psi_e = (
            z((nx, py, nz + 1)), z((nx, ny + 1, pz)),  # Ex: y, z
            z((nx + 1, ny, pz)), z((px, ny, nz + 1)),  # Ey: z, x
            z((px, ny + 1, nz)), z((nx + 1, py, nz)),  # Ez: x, y
        )

    def reset(self):
        for arr in (*self.psi_h, *self.psi_e):
            arr[...] = 0.0

    def new_state(self) -> FieldState:
        self.reset()
        return FieldState.zeros(self.spec, self.dt)

    def update_h(self, s: FieldState) -> None:
        px, py, pz = self.prof
        kernels.update_h(
            s.Hx, s.Hy, s.Hz, s.Ex, s.Ey, s.Ez, self.ch, *self.inv_d,
            px.inv_kappa_h, py.inv_kappa_h, pz.inv_kappa_h,
            px.b_h, py.b_h, pz.b_h, px.a_h, py.a_h, pz.a_h,
            px.map_h, py.map_h, pz.map_h, *self.psi_h,
        )

    def update_e(self, s: FieldState) -> None:
        px, py, pz = self.prof
        kernels.update_e(
            s.Ex, s.Ey, s.Ez, s.Hx, s.Hy, s.Hz,
            self.ca[0], self.cb[0], self.ca[1], self.cb[1], self.ca[2], self.cb[2],
            *self.inv_d, px.active, py.active, pz.active,
            px.lower, px.upper, py.lower, py.upper, pz.lower, pz.upper,
            px.inv_kappa_e, py.inv_kappa_e, pz.inv_kappa_e,
            px.b_e, py.b_e, pz.b_e, px.a_e, py.a_e, pz.a_e,
            px.map_e, py.map_e, pz.map_e, *self.psi_e,
        )

    def step(self, s: FieldState) -> FieldState:
        """One leapfrog iteration: H to t+dt/2, then E to t+dt."""
        self.update_h(s)
        self.update_e(s)
        s.step += 1
        if s.step % self.nan_check_every == 0:
            self.check_finite(s)
        return s

    def check_finite(self, s: FieldState) -> None:
        for name, arr in zip(("Ex", "Ey", "Ez", "Hx", "Hy", "Hz"), (*s.e, *s.h)):
            n = kernels.first_nonfinite(arr)
            if n >= 0:
                raise InstabilityError(s.step, name, np.unravel_index(n, arr.shape))

    def energy(self, s: FieldState, h_prev: tuple | None = None) -> float:
        """Discrete EM energy (J).

        With ``h_prev`` (H one half step earlier) the magnetic term uses the
        product H(n-1/2).H(n+1/2), the quantity the lossless leapfrog scheme
        conserves exactly in a closed cavity.
        """
        dv = math.prod(d * MM for d in self.spec.d)
        we = sum(kernels.sum_sq_weighted(e, eps) for e, eps in zip(s.e, self.grid.eps))
        if h_prev is None:
            wh = sum(kernels.sum_prod(h, h) for h in s.h)
        else:
            wh = sum(kernels.sum_prod(h, hp) for h, hp in zip(s.h, h_prev))
        return 0.5 * dv * (we + MU0 * wh)


def step(state: FieldState, solver: Solver) -> FieldState:
    return solver.step(state)
