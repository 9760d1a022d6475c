"""Elementary compressible Navier-Stokes solver on a cell-vertex grid.

Conservative variables (rho, rho vx, rho vy, rho e) with a perfect-gas
closure P = rho R T, e = R T / (gamma - 1).  Every space derivative is a
centered difference, time integration is forward Euler, so the scheme is
second order in space and first order in time.  The internal energy is
evolved directly (not the total energy): its equation carries the
pressure work P div(v), the conduction term kappa lap(T) and the viscous
dissipation nu[(dx vx - dy vy)^2 + (dx vy + dy vx)^2] + xi (div v)^2.

Dirichlet data is enforced by forcing the value on the boundary node
vertex after each step; adiabatic walls mirror the first interior
temperature into the ghost node so the normal gradient vanishes at the
wall vertex.  Density on wall nodes evolves through the continuity
equation with the mirrored ghosts.

The linearized system has four hydrodynamic modes whose damping rates
are reported by `hydrodynamic_coeffs`; the advisory time step bound
keeps both the acoustic CFL and the diffusion number conservative, since
forward Euler with centered advection has no margin to spare.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from thermoflow.lattice import InstabilityError


class StabilityError(RuntimeError):
    """Requested dt exceeds the advisory bound (override with a flag)."""


@dataclass
class GasParams:
    nu: float = 0.05        # shear viscosity
    xi: float = 0.0         # second (dilatational) viscosity
    kappa: float = 0.05     # thermal conductivity
    R: float = 1.0          # gas constant
    gamma: float = 1.4      # adiabatic index
    g_rho: float = 0.0      # buoyancy strength multiplying (rho - rho0)
    rho0: float = 1.0

    def __post_init__(self):
        if self.nu < 0 or self.kappa < 0:
            raise ValueError("viscosity and conductivity must be non-negative")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma = {self.gamma} must exceed 1")
        if self.R <= 0.0:
            raise ValueError(f"R = {self.R} must be positive")


def pressure(rho, T, R: float):
    """Perfect gas pressure P = rho R T."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise ValueError("pressure of a non-positive density")
    return rho * R * np.asarray(T, dtype=np.float64)


def internal_energy(T, R: float, gamma: float):
    """Internal energy per unit mass e = R T / (gamma - 1)."""
    return np.asarray(T, dtype=np.float64) * R / (gamma - 1.0)


def hydrodynamic_coeffs(gas: GasParams, T: float):
    """(c_s, nu_tau, nu_diff, nu_acous) of the linearized system.

    nu_acous is reported exactly as the reference expression is printed,
    (nu + xi)/2 + gamma (gamma - 1)^2 / (2 R gamma); the last term lacks
    the conductivity factor one would expect on physical grounds, so it
    is never used inside the time stepper, only echoed.
    """
    cs = float(np.sqrt(gas.gamma * gas.R * T))
    nu_tau = gas.nu
    nu_diff = gas.kappa * (gas.gamma - 1.0) / (gas.R * gas.gamma)
    nu_acous = 0.5 * (gas.nu + gas.xi) + gas.gamma * (gas.gamma - 1.0) ** 2 / (2.0 * gas.R * gas.gamma)
    return cs, nu_tau, nu_diff, nu_acous


def dt_advisory_bound(gas: GasParams, vmax: float, Tmax: float) -> float:
    """Conservative explicit-Euler bound.

    Three constraints: the advective CFL, the 5-point diffusion number,
    and the forward-Euler acoustic bound dt <= 2 nu_ac / c_s^2.  The last
    one exists because centered advection gives sound waves purely
    imaginary eigenvalues, which forward Euler amplifies unless physical
    damping wins: per mode |g|^2 = (1 - nu_ac dt k^2)^2 + (c dt sin k)^2,
    so undamped sound grows no matter how small dt is, and the acoustic
    damping (nu + xi)/2 + (gamma - 1) nu_diff / 2 must carry the step.
    Raising the free second viscosity xi is the standard way to buy a
    workable step size for this kind of elementary solver.
    """
    cs2 = gas.gamma * gas.R * max(Tmax, 1e-300)
    cs = float(np.sqrt(cs2))
    adv = 1.0 / (abs(vmax) + cs)
    nu_diff = gas.kappa * (gas.gamma - 1.0) / (gas.R * gas.gamma)
    diff_coef = max(gas.nu + gas.xi, nu_diff)
    diff = np.inf if diff_coef == 0.0 else 1.0 / (4.0 * diff_coef)
    two_nu_ac = gas.nu + gas.xi + (gas.gamma - 1.0) * nu_diff
    acoustic = np.inf if two_nu_ac == 0.0 else 2.0 * two_nu_ac / cs2
    return min(0.4 * min(adv, diff), 0.8 * acoustic)


@dataclass
class WallSpec:
    """One non-periodic side: forced velocity plus either a forced
    temperature (T given) or an adiabatic mirror (T None)."""

    velocity: tuple[float, float] = (0.0, 0.0)
    T: float | None = None

    @property
    def adiabatic(self) -> bool:
        return self.T is None


@dataclass
class FdState:
    """Node-centered conservative fields."""

    rho: np.ndarray
    mx: np.ndarray
    my: np.ndarray
    re: np.ndarray

    @classmethod
    def uniform(cls, nx: int, ny: int, gas: GasParams, rho=1.0, vx=0.0, vy=0.0, T=1.0):
        shape = (nx, ny)
        rho_a = np.broadcast_to(np.asarray(rho, dtype=np.float64), shape).copy()
        vx_a = np.broadcast_to(np.asarray(vx, dtype=np.float64), shape)
        vy_a = np.broadcast_to(np.asarray(vy, dtype=np.float64), shape)
        T_a = np.broadcast_to(np.asarray(T, dtype=np.float64), shape)
        return cls(
            rho=rho_a,
            mx=rho_a * vx_a,
            my=rho_a * vy_a,
            re=rho_a * internal_energy(T_a, gas.R, gas.gamma),
        )

    def temperature(self, gas: GasParams) -> np.ndarray:
        return self.re / self.rho * (gas.gamma - 1.0) / gas.R

    def check_valid(self, step: int | None = None):
        if np.any(self.rho <= 0.0):
            raise InstabilityError(
                f"FD state: non-positive density (min {self.rho.min():.3e})"
                + (f" at step {step}" if step is not None else ""), step=step)
        total = float(self.rho.sum() + self.mx.sum() + self.my.sum() + self.re.sum())
        if not np.isfinite(total):
            raise InstabilityError("FD state: non-finite field values"
                                   + (f" at step {step}" if step is not None else ""),
                                   step=step)


# walls: dict side -> WallSpec, or the side absent when that axis is periodic
_X_SIDES = ("left", "right")
_Y_SIDES = ("bottom", "top")


def _pad_primitive(field: np.ndarray, walls: dict, kind: str) -> np.ndarray:
    """Pad one primitive field (rho / vx / vy / T) with ghost values.

    kind selects the mirror rule: 'rho' copies, velocities reflect
    through the forced wall value, 'T' reflects through the Dirichlet
    value or copies when adiabatic.  x sides first, then y sides over the
    full padded width so the corner ghosts pick up both rules.
    """
    nx, ny = field.shape
    p = np.empty((nx + 2, ny + 2), dtype=np.float64)
    p[1:-1, 1:-1] = field

    if "left" not in walls:  # periodic in x
        p[0, 1:-1] = field[-1, :]
        p[-1, 1:-1] = field[0, :]
    else:
        for side, ghost, inner in (("left", 0, 2), ("right", -1, -3)):
            spec = walls[side]
            ref = p[inner, 1:-1]
            if kind == "rho":
                p[ghost, 1:-1] = ref
            elif kind in ("vx", "vy"):
                w = spec.velocity[0 if kind == "vx" else 1]
                p[ghost, 1:-1] = 2.0 * w - ref
            else:  # temperature
                p[ghost, 1:-1] = ref if spec.adiabatic else 2.0 * spec.T - ref

    if "bottom" not in walls:  # periodic in y
        p[:, 0] = p[:, -2]
        p[:, -1] = p[:, 1]
    else:
        for side, ghost, inner in (("bottom", 0, 2), ("top", -1, -3)):
            spec = walls[side]
            ref = p[:, inner]
            if kind == "rho":
                p[:, ghost] = ref
            elif kind in ("vx", "vy"):
                w = spec.velocity[0 if kind == "vx" else 1]
                p[:, ghost] = 2.0 * w - ref
            else:
                p[:, ghost] = ref if spec.adiabatic else 2.0 * spec.T - ref
    return p


def _dx(p):
    return 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])


def _dy(p):
    return 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])


def _lap(p):
    return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2]
            - 4.0 * p[1:-1, 1:-1])


def _dxx(p):
    return p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]


def _dyy(p):
    return p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]


def _dxy(p):
    return 0.25 * (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2])


def fd_rhs(state: FdState, gas: GasParams, walls: dict,
           body_force: float = 0.0, source: float = 0.0):
    """Time derivatives (d rho, d mx, d my, d re) with resolved ghosts."""
    vx = state.mx / state.rho
    vy = state.my / state.rho
    T = state.temperature(gas)

    prho = _pad_primitive(state.rho, walls, "rho")
    pvx = _pad_primitive(vx, walls, "vx")
    pvy = _pad_primitive(vy, walls, "vy")
    pT = _pad_primitive(T, walls, "T")
    pP = prho * gas.R * pT
    pre = pP / (gas.gamma - 1.0)

    div = _dx(pvx) + _dy(pvy)

    drho = -_dx(prho * pvx) - _dy(prho * pvy)
    dmx = (-_dx(prho * pvx * pvx) - _dy(prho * pvx * pvy) - _dx(pP)
           + gas.nu * _lap(pvx) + gas.xi * (_dxx(pvx) + _dxy(pvy)))
    dmy = (-_dx(prho * pvy * pvx) - _dy(prho * pvy * pvy) - _dy(pP)
           + gas.nu * _lap(pvy) + gas.xi * (_dxy(pvx) + _dyy(pvy)))
    dre = (-_dx(pre * pvx) - _dy(pre * pvy)
           - (pP[1:-1, 1:-1]) * div
           + gas.kappa * _lap(pT)
           + gas.nu * ((_dx(pvx) - _dy(pvy)) ** 2 + (_dx(pvy) + _dy(pvx)) ** 2)
           + gas.xi * div ** 2)

    if gas.g_rho != 0.0:
        dmy = dmy + gas.g_rho * (state.rho - gas.rho0)
    if body_force != 0.0:
        dmy = dmy + body_force * state.rho
    if source != 0.0:
        dre = dre + source
    return drho, dmx, dmy, dre


def force_dirichlet(state: FdState, gas: GasParams, walls: dict):
    """Re-impose wall values on the boundary node vertices."""
    slabs = {"left": (slice(0, 1), slice(None)), "right": (slice(-1, None), slice(None)),
             "bottom": (slice(None), slice(0, 1)), "top": (slice(None), slice(-1, None))}
    for side, spec in walls.items():
        sl = slabs[side]
        rho_w = state.rho[sl]
        state.mx[sl] = rho_w * spec.velocity[0]
        state.my[sl] = rho_w * spec.velocity[1]
        if not spec.adiabatic:
            state.re[sl] = rho_w * internal_energy(spec.T, gas.R, gas.gamma)


def euler_step(state: FdState, gas: GasParams, dt: float, walls: dict,
               body_force: float = 0.0, source: float = 0.0):
    """One forward Euler step followed by Dirichlet re-forcing."""
    drho, dmx, dmy, dre = fd_rhs(state, gas, walls, body_force, source)
    state.rho += dt * drho
    state.mx += dt * dmx
    state.my += dt * dmy
    state.re += dt * dre
    force_dirichlet(state, gas, walls)


class FdSolver:
    """Step driver with the advisory dt check and validity monitoring."""

    def __init__(self, nx: int, ny: int, gas: GasParams, dt: float,
                 walls: dict[str, WallSpec] | None = None,
                 body_force: float = 0.0, source: float = 0.0,
                 allow_unstable_dt: bool = False, nan_check_every: int = 100):
        self.nx, self.ny = nx, ny
        self.gas = gas
        self.dt = dt
        self.walls = dict(walls or {})
        x_walls = [s for s in _X_SIDES if s in self.walls]
        y_walls = [s for s in _Y_SIDES if s in self.walls]
        if len(x_walls) == 1 or len(y_walls) == 1:
            raise ValueError("walls must be given for both sides of an axis or neither")
        self.body_force = body_force
        self.source = source
        self.allow_unstable_dt = allow_unstable_dt
        self.nan_check_every = nan_check_every
        self.state = FdState.uniform(nx, ny, gas)
        self.step_count = 0
        self.time = 0.0
        self._check_dt()

    def initialize(self, rho=1.0, vx=0.0, vy=0.0, T=1.0):
        self.state = FdState.uniform(self.nx, self.ny, self.gas, rho, vx, vy, T)
        force_dirichlet(self.state, self.gas, self.walls)
        self._check_dt()

    def _check_dt(self):
        vmax = float(np.max(np.hypot(self.state.mx / self.state.rho,
                                     self.state.my / self.state.rho)))
        Tmax = float(np.max(self.state.temperature(self.gas)))
        bound = dt_advisory_bound(self.gas, vmax, Tmax)
        if self.dt > bound and not self.allow_unstable_dt:
            raise StabilityError(
                f"dt = {self.dt:.4g} exceeds the advisory bound {bound:.4g}"
            )

    def macro(self) -> dict[str, np.ndarray]:
        s = self.state
        T = s.temperature(self.gas)
        return {"rho": s.rho, "vx": s.mx / s.rho, "vy": s.my / s.rho,
                "T": T, "e": s.re / s.rho}

    def step(self, n: int = 1):
        for _ in range(n):
            euler_step(self.state, self.gas, self.dt, self.walls,
                       self.body_force, self.source)
            self.step_count += 1
            self.time += self.dt
            if self.step_count % self.nan_check_every == 0:
                self.state.check_valid(self.step_count)
                self._check_dt()
