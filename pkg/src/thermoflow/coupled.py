"""Coupled D2Q9 (fluid) + D2Q5 (temperature) scheme for the Boussinesq system.

The fluid sector conserves mass and momentum; its second-order equilibria
carry the compressible corrections

    E_eq  = alpha rho + 3 (jx^2 + jy^2) / rho
    XX_eq = (jx^2 - jy^2) / rho,   XY_eq = jx jy / rho

giving sound speed c_s = sqrt((4 + alpha)/6), shear viscosity
mu = (1/3)(1/s_XX - 1/2) and bulk viscosity zeta = -alpha (1/s_E - 1/2).
The third-order moments relax toward q_eq = -j: that value is what makes
the shear viscosity come out as mu above (with q_eq = 0 the same rate
would produce 2 mu), even though q has no influence on which terms appear
in the macroscopic equations.

The temperature sector transports one scalar T with equilibria
E_eq = beta T and flux j_eq = T V, where V is the fluid velocity at the
same node and time step.  Its diffusivity is
kappa = ((beta + 4)/10)(1/s - 1/2) with s the rate of the flux moments,
and the scheme carries the known Galilean-invariance defect:
under uniform advection V the effective diffusivity along V drops by
(1/s - 1/2) |V|^2.

Buoyancy enters as a vertical force rho g_beta (T - T0) on the fluid
momentum, applied with a split-force scheme (half before the equilibrium
evaluation, half after collision) for second-order accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from thermoflow import boundaries as bd
from thermoflow.lattice import (
    RelaxationVector,
    build_moment_basis,
    make_rates,
    moments_from_populations,
    populations_from_moments,
    relax_moments,
    stream,
    velocity_set,
    PopulationField,
)


class DegenerateStateError(RuntimeError):
    """Non-positive density fed to an equilibrium."""


@dataclass
class CoupledParams:
    """Equilibrium coefficients and relaxation rates of the coupled scheme."""

    alpha: float = -2.0        # fluid energy equilibrium coefficient
    beta: float = 1.0          # temperature energy equilibrium coefficient
    s_xx: float = 1.2          # fluid shear rate (XX and XY moments)
    s_e: float = 1.2           # fluid energy rate (bulk viscosity)
    s_q: float = 1.2           # fluid third-order moments
    s_eps: float = 1.2
    s_flux: float = 1.2        # temperature flux rate, sets kappa
    s_e5: float = 1.2          # temperature E and XX rates (no role at order 2)
    s_xx5: float = 1.2
    g_beta: float = 0.0        # buoyancy strength g*beta
    T0: float = 0.0            # buoyancy reference temperature

    def __post_init__(self):
        if not 4.0 + self.alpha > 0.0:
            raise ValueError(f"alpha = {self.alpha} gives an imaginary sound speed")
        if self.beta < -4.0:
            raise ValueError(f"beta = {self.beta} gives a negative diffusivity")
        for name in ("s_xx", "s_e", "s_q", "s_eps", "s_flux", "s_e5", "s_xx5"):
            v = getattr(self, name)
            if not 0.0 < v < 2.0:
                raise ValueError(f"{name} = {v} outside (0, 2)")


def d2q9_equilibrium(rho, jx, jy, alpha: float) -> np.ndarray:
    """Full D2Q9 equilibrium moment vector for given conserved moments.

    Rows follow the basis order (rho, E, eps, jx, qx, jy, qy, XX, XY).
    """
    rho = np.asarray(rho, dtype=np.float64)
    jx = np.asarray(jx, dtype=np.float64)
    jy = np.asarray(jy, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise DegenerateStateError("D2Q9 equilibrium with rho <= 0")
    inv_rho = 1.0 / rho
    meq = np.empty((9,) + rho.shape, dtype=np.float64)
    meq[0] = rho
    meq[1] = alpha * rho + 3.0 * (jx * jx + jy * jy) * inv_rho
    meq[2] = 0.0
    meq[3] = jx
    meq[4] = -jx
    meq[5] = jy
    meq[6] = -jy
    meq[7] = (jx * jx - jy * jy) * inv_rho
    meq[8] = jx * jy * inv_rho
    return meq


def d2q9_transport(alpha: float, s_e: float, s_xx: float):
    """(sound speed, shear viscosity, bulk viscosity) of the fluid sector."""
    if not 4.0 + alpha > 0.0:
        raise ValueError(f"alpha = {alpha} gives an imaginary sound speed")
    cs = np.sqrt((4.0 + alpha) / 6.0)
    mu = (1.0 / s_xx - 0.5) / 3.0
    zeta = -alpha * (1.0 / s_e - 0.5)
    return cs, mu, zeta


def s_xx_for_viscosity(nu: float) -> float:
    """Invert mu = (1/3)(1/s - 1/2) for the shear rate."""
    return 1.0 / (3.0 * nu + 0.5)


def d2q5_equilibrium(T, vx, vy, beta: float) -> np.ndarray:
    """D2Q5 equilibrium moments (T, jx, jy, E, XX) for scalar T advected
    at velocity (vx, vy): flux T*V, energy beta*T, XX zero."""
    T = np.asarray(T, dtype=np.float64)
    meq = np.empty((5,) + T.shape, dtype=np.float64)
    meq[0] = T
    meq[1] = T * vx
    meq[2] = T * vy
    meq[3] = beta * T
    meq[4] = 0.0
    return meq


def d2q5_kappa(beta: float, s_flux: float) -> float:
    """Scalar diffusivity kappa = ((beta + 4)/10)(1/s - 1/2)."""
    return (beta + 4.0) / 10.0 * (1.0 / s_flux - 0.5)


def s_flux_for_kappa(kappa: float, beta: float) -> float:
    """Invert d2q5_kappa for the flux relaxation rate."""
    sigma = 10.0 * kappa / (beta + 4.0)
    if sigma <= 0.0:
        raise ValueError(f"kappa = {kappa} not reachable with beta = {beta}")
    return 1.0 / (sigma + 0.5)


class CoupledSolver:
    """One rectangular domain advanced by the coupled scheme.

    Step ordering is collide, stream, boundary fills.  The two fields are
    updated in a fixed order (fluid first, then temperature with the
    fresh post-collision velocity).
    """

    def __init__(
        self,
        nx: int,
        ny: int,
        params: CoupledParams,
        periodic=(True, True),
        fluid_segments: list[bd.BoundarySegment] | None = None,
        thermal_segments: list[bd.BoundarySegment] | None = None,
        scalar_source: float = 0.0,
        body_force: float = 0.0,
        advection_override: tuple[float, float] | None = None,
        nan_check_every: int = 100,
    ):
        self.nx, self.ny = nx, ny
        self.params = params
        self.periodic = tuple(periodic)
        self.vset9 = velocity_set("D2Q9")
        self.vset5 = velocity_set("D2Q5")
        self.basis9 = build_moment_basis(self.vset9)
        self.basis5 = build_moment_basis(self.vset5)
        self.rates9 = self._build_rates9()
        self.rates5 = self._build_rates5()
        self.fluid_segments = list(fluid_segments or [])
        self.thermal_segments = list(thermal_segments or [])
        bd.validate_segments(self.fluid_segments, nx, ny)
        bd.validate_segments(self.thermal_segments, nx, ny)
        for seg in self.fluid_segments:
            if seg.kind not in ("bounce_back", "periodic"):
                raise bd.BoundaryConfigError(
                    f"fluid sector only supports bounce_back walls, got {seg.kind}")
        for seg in self.thermal_segments:
            if seg.kind not in ("anti_bounce_back", "adiabatic", "periodic"):
                raise bd.BoundaryConfigError(
                    f"temperature sector supports anti_bounce_back/adiabatic, got {seg.kind}")
        self.scalar_source = scalar_source
        self.body_force = body_force
        self.advection_override = advection_override
        self.nan_check_every = nan_check_every
        self.f = PopulationField(9, nx, ny)
        self.g = PopulationField(5, nx, ny)
        self.step_count = 0
        self._rho = np.ones((nx, ny))
        self.initialize()

    def _build_rates9(self) -> RelaxationVector:
        p = self.params
        return make_rates(self.basis9, default=p.s_eps, E=p.s_e, eps=p.s_eps,
                          qx=p.s_q, qy=p.s_q, XX=p.s_xx, XY=p.s_xx)

    def _build_rates5(self) -> RelaxationVector:
        p = self.params
        return make_rates(self.basis5, default=p.s_e5, jx=p.s_flux, jy=p.s_flux,
                          E=p.s_e5, XX=p.s_xx5)

    # -- state ------------------------------------------------------------

    def initialize(self, rho=1.0, vx=0.0, vy=0.0, T=None):
        """Set both fields to the equilibrium of the given macro fields."""
        if T is None:
            T = self.params.T0
        shape = (self.nx, self.ny)
        rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), shape).copy()
        vx = np.broadcast_to(np.asarray(vx, dtype=np.float64), shape)
        vy = np.broadcast_to(np.asarray(vy, dtype=np.float64), shape)
        T = np.broadcast_to(np.asarray(T, dtype=np.float64), shape)
        meq9 = d2q9_equilibrium(rho.ravel(), (rho * vx).ravel(), (rho * vy).ravel(),
                                self.params.alpha)
        self.f.flat()[:] = populations_from_moments(self.basis9, meq9)
        meq5 = d2q5_equilibrium(T.ravel(), vx.ravel(), vy.ravel(), self.params.beta)
        self.g.flat()[:] = populations_from_moments(self.basis5, meq5)
        self._rho = rho

    def macro(self) -> dict[str, np.ndarray]:
        """Macroscopic fields of the current state.

        The velocity includes the half-force shift of the split scheme,
        which is the second-order accurate velocity of a forced LB step.
        """
        shape = (self.nx, self.ny)
        m9 = moments_from_populations(self.basis9, self.f.flat())
        rho = m9[0].reshape(shape)
        T = moments_from_populations(self.basis5, self.g.flat())[0].reshape(shape)
        fy = 0.5 * rho * (self.params.g_beta * (T - self.params.T0) + self.body_force)
        vx = m9[3].reshape(shape) / rho
        vy = (m9[5].reshape(shape) + fy) / rho
        return {"rho": rho, "vx": vx, "vy": vy, "T": T}

    # -- wall equilibria ----------------------------------------------------

    def _fluid_wall_eq(self, seg: bd.BoundarySegment) -> np.ndarray | None:
        if not seg.moving():
            return None
        rho_w = bd.extrapolate_wall_density(self._rho, seg)
        ux, uy = seg.wall_velocity
        meq = d2q9_equilibrium(rho_w, rho_w * ux, rho_w * uy, self.params.alpha)
        return populations_from_moments(self.basis9, meq)

    def _thermal_wall_eq(self, seg: bd.BoundarySegment) -> np.ndarray | None:
        if seg.kind == "adiabatic":
            return None
        lo, hi = seg.node_range(self.nx, self.ny)
        T_w = np.full(hi - lo, seg.wall_temperature)
        ux, uy = seg.wall_velocity
        meq = d2q5_equilibrium(T_w, ux, uy, self.params.beta)
        return populations_from_moments(self.basis5, meq)

    # -- stepping -----------------------------------------------------------

    def step(self, n: int = 1):
        for _ in range(n):
            self._advance()
            self.step_count += 1
            if self.step_count % self.nan_check_every == 0:
                self.f.check_finite(self.step_count, "fluid populations")
                self.g.check_finite(self.step_count, "temperature populations")

    def _advance(self):
        p = self.params
        m9 = moments_from_populations(self.basis9, self.f.flat())
        m5 = moments_from_populations(self.basis5, self.g.flat())
        rho, jx, jy = m9[0], m9[3], m9[5]
        T = m5[0]

        fy = None
        if p.g_beta != 0.0:
            fy = rho * p.g_beta * (T - p.T0)
        if self.body_force != 0.0:
            fy = self.body_force * rho if fy is None else fy + self.body_force * rho

        # fluid collision, split force on the vertical momentum
        jy_eq = jy + 0.5 * fy if fy is not None else jy
        meq9 = d2q9_equilibrium(rho, jx, jy_eq, p.alpha)
        relax_moments(m9, meq9, self.rates9)
        if fy is not None:
            m9[5] = jy + fy

        # temperature collision advected by the post-collision fluid velocity
        if self.advection_override is not None:
            vx, vy = self.advection_override
        else:
            vx, vy = m9[3] / rho, m9[5] / rho
        src = self.scalar_source
        T_eq = T + 0.5 * src if src != 0.0 else T
        meq5 = d2q5_equilibrium(T_eq, vx, vy, p.beta)
        relax_moments(m5, meq5, self.rates5)
        if src != 0.0:
            m5[0] = T + src

        fstar9 = populations_from_moments(self.basis9, m9).reshape(self.f.data.shape)
        fstar5 = populations_from_moments(self.basis5, m5).reshape(self.g.data.shape)
        self._rho = rho.reshape(self.nx, self.ny)
        self.last_fstar9, self.last_fstar5 = fstar9, fstar5

        self.f.data = stream(fstar9, self.vset9, self.periodic)
        self.g.data = stream(fstar5, self.vset5, self.periodic)
        for seg in self.fluid_segments:
            if seg.kind != "periodic":
                bd.apply_segment(self.f.data, fstar9, self.vset9, seg,
                                 self._fluid_wall_eq(seg))
        for seg in self.thermal_segments:
            if seg.kind != "periodic":
                bd.apply_segment(self.g.data, fstar5, self.vset5, seg,
                                 self._thermal_wall_eq(seg))
