"""Single-distribution compressible D2Q13 scheme.

Four moments are conserved: density rho, energy E and the momentum pair
(jx, jy).  The free equilibrium coefficients and relaxation rates are
constrained so the four hydrodynamic waves (two acoustic, one shear, one
diffusive) are isotropic at second order; the closure is

    h1 = 17/26 - c1/2 - E0/13,        k1 = 2/13,
    h2 = -(39/2 + 13 c1/2 + E0) k2
         - (7/624) (13 c1 + 95 + 2 E0) N / D,
    sigma_qx = -(1309/2) sigma_XX (13 c1 + 95 + 2 E0) / D,
    c_eps_rho = 140 + 28 c_eps_E + (13 c1 + 95 + 2 E0) D / (22984 Pr),
    c2 = -65/24 - (21/8)(c1 + h1 + k1 E0) - k2 E0 - h2,

with N = 874481 + 459459 c1 - 103428 c_eps_E + 70686 E0 and
D = 114404 + 51051 c1 - 11492 c_eps_E + 7854 E0.

At rest the linearized (rho, j, E) system at order 1 has the symbol

    [[0, 1, 0], [14/13 + V^2/2, 0, 1/26], [0, (39 + 13 c1 + 2 E0)/2, 0]]

whose null direction is the diffusive mode (1, 0, -28 - 13 V^2); the
sound speed is c_s^2 = (95 + 13 c1 + 2 E0)/52.  A local temperature is
recovered from the energy by removing the kinetic content,
T = E - (13/2)(Vx^2 + Vy^2).

No closed-form shear viscosity is carried by the scheme: nu and the
diffusive-mode diffusivity kappa are calibrated by measuring wave decay
on a periodic strip (`calibrate`), and the calibrated pair is what the
benchmark cases use to convert a Rayleigh number into a forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from thermoflow import boundaries as bd
from thermoflow.coupled import DegenerateStateError
from thermoflow.lattice import (
    PopulationField,
    build_moment_basis,
    henon_sigma,
    make_rates,
    moments_from_populations,
    populations_from_moments,
    relax_moments,
    stream,
    velocity_set,
)


class ClosureError(ValueError):
    """Closure denominator vanished or a derived rate left (0, 2)."""


@dataclass(frozen=True)
class ClosureCoefficients:
    h1: float
    k1: float
    h2: float
    c2: float
    c_eps_rho: float
    sigma_qx: float
    s_qx: float


def closure_coefficients(
    pr: float,
    e0: float,
    c1: float,
    k2: float,
    c_eps_e: float,
    s_xx: float,
) -> ClosureCoefficients:
    """Derived equilibrium coefficients and the slaved q-moment rate."""
    if pr <= 0.0:
        raise ClosureError(f"Prandtl number must be positive, got {pr}")
    den = 114404.0 + 51051.0 * c1 - 11492.0 * c_eps_e + 7854.0 * e0
    if den == 0.0:
        raise ClosureError(
            "closure denominator 114404 + 51051 c1 - 11492 c_eps_E + 7854 E0 vanishes"
        )
    num = 874481.0 + 459459.0 * c1 - 103428.0 * c_eps_e + 70686.0 * e0
    gate = 13.0 * c1 + 95.0 + 2.0 * e0
    h1 = 17.0 / 26.0 - c1 / 2.0 - e0 / 13.0
    k1 = 2.0 / 13.0
    h2 = -(39.0 / 2.0 + 13.0 / 2.0 * c1 + e0) * k2 - (7.0 / 624.0) * gate * num / den
    sigma_qx = -(1309.0 / 2.0) * henon_sigma(s_xx) * gate / den
    c_eps_rho = 140.0 + 28.0 * c_eps_e + gate * den / (22984.0 * pr)
    c2 = -65.0 / 24.0 - (21.0 / 8.0) * (c1 + h1 + k1 * e0) - k2 * e0 - h2
    if not sigma_qx > 0.0:
        raise ClosureError(
            f"sigma_qx = {sigma_qx:.6g} must be positive (13 c1 + 95 + 2 E0 = {gate:.6g})"
        )
    s_qx = 1.0 / (sigma_qx + 0.5)
    if not 0.0 < s_qx < 2.0:
        raise ClosureError(f"derived s_qx = {s_qx:.6g} outside (0, 2)")
    return ClosureCoefficients(h1, k1, h2, c2, c_eps_rho, sigma_qx, s_qx)


@dataclass
class D2Q13Params:
    """Free parameters of the scheme; derived coefficients on `closure`.

    The default rates are a set verified stable over the whole Brillouin
    zone by `linear_stability_radius` for s_XX up to ~1.6: the epsilon
    moment must relax slowly (s_eps well below 1) because its equilibrium
    carries the large Prandtl coupling c_eps_rho, whose fast feedback
    destabilizes the zone-boundary modes.  A uniform 1.2 is violently
    unstable (spectral radius 1.6 at k = (pi, 0)).
    """

    pr: float = 0.71
    e0: float = -28.0
    c1: float = 0.0
    k2: float = 0.0
    c_eps_e: float = 0.0
    c_varpi_rho: float = 0.0
    c_varpi_e: float = 0.0
    s_xx: float = 1.2
    s_rx: float = 1.5
    s_eps: float = 0.1
    s_varpi: float = 0.8
    s_xxe: float = 1.4
    g_rho: float = 0.0      # buoyancy strength multiplying (rho - rho0)
    rho0: float = 1.0

    def __post_init__(self):
        for name in ("s_xx", "s_rx", "s_eps", "s_varpi", "s_xxe"):
            v = getattr(self, name)
            if not 0.0 < v < 2.0:
                raise ValueError(f"{name} = {v} outside (0, 2)")
        self.closure = closure_coefficients(
            self.pr, self.e0, self.c1, self.k2, self.c_eps_e, self.s_xx
        )

    def sound_speed(self) -> float:
        cs2 = (95.0 + 13.0 * self.c1 + 2.0 * self.e0) / 52.0
        if cs2 <= 0.0:
            raise ClosureError(f"c_s^2 = {cs2:.6g} not positive")
        return float(np.sqrt(cs2))


def d2q13_equilibrium(rho, E, jx, jy, params: D2Q13Params) -> np.ndarray:
    """Full 13-moment equilibrium vector, basis order
    (rho, E, eps, varpi, jx, jy, qx, qy, rx, ry, XX, XY, XXe)."""
    rho = np.asarray(rho, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    jx = np.asarray(jx, dtype=np.float64)
    jy = np.asarray(jy, dtype=np.float64)
    if np.any(rho <= 0.0):
        raise DegenerateStateError("D2Q13 equilibrium with rho <= 0")
    c = params.closure
    inv_rho = 1.0 / rho
    q_coef = params.c1 + c.h1 * rho + c.k1 * E
    r_coef = c.c2 + c.h2 * rho + params.k2 * E
    meq = np.empty((13,) + rho.shape, dtype=np.float64)
    meq[0] = rho
    meq[1] = E
    meq[2] = c.c_eps_rho * rho + params.c_eps_e * E
    meq[3] = params.c_varpi_rho * rho + params.c_varpi_e * E
    meq[4] = jx
    meq[5] = jy
    meq[6] = jx * q_coef
    meq[7] = jy * q_coef
    meq[8] = jx * r_coef
    meq[9] = jy * r_coef
    meq[10] = (jx * jx - jy * jy) * inv_rho
    meq[11] = jx * jy * inv_rho
    meq[12] = 0.0
    return meq


def temperature_from_state(E, vx, vy):
    """Temperature-like field T = E - (13/2)(Vx^2 + Vy^2)."""
    return E - 6.5 * (np.asarray(vx) ** 2 + np.asarray(vy) ** 2)


def equilibrium_linearization(params: D2Q13Params) -> np.ndarray:
    """13x13 Jacobian of the equilibrium map around the rest state
    (rho = 1, E = E0, j = 0); used by the stability scan."""
    c = params.closure
    L = np.zeros((13, 13))
    L[0, 0] = 1.0
    L[1, 1] = 1.0
    L[2, 0] = c.c_eps_rho
    L[2, 1] = params.c_eps_e
    L[3, 0] = params.c_varpi_rho
    L[3, 1] = params.c_varpi_e
    L[4, 4] = 1.0
    L[5, 5] = 1.0
    q_coef = params.c1 + c.h1 + c.k1 * params.e0
    r_coef = c.c2 + c.h2 + params.k2 * params.e0
    L[6, 4] = q_coef
    L[7, 5] = q_coef
    L[8, 4] = r_coef
    L[9, 5] = r_coef
    return L


def linear_stability_radius(params: D2Q13Params, n_k: int = 40) -> float:
    """Largest one-step amplification factor over a sweep of wavevectors.

    Conserved and marginally damped acoustic modes sit on the unit circle,
    so a stable parameter set returns 1 to round-off; anything visibly
    above 1 blows up in practice.
    """
    vset = velocity_set("D2Q13")
    basis = build_moment_basis(vset)
    rates = make_rates(
        basis, default=params.s_eps, eps=params.s_eps, varpi=params.s_varpi,
        qx=params.closure.s_qx, qy=params.closure.s_qx,
        rx=params.s_rx, ry=params.s_rx,
        XX=params.s_xx, XY=params.s_xx, XXe=params.s_xxe,
    )
    collide = np.eye(13) + np.diag(rates.s) @ (equilibrium_linearization(params) - np.eye(13))
    G = basis.inverse @ collide @ basis.matrix
    kline = np.linspace(0.02, np.pi, n_k)
    wavevectors = (
        [(k, 0.0) for k in kline] + [(k, k) for k in kline]
        + [(np.pi, k) for k in np.linspace(0.0, np.pi, n_k // 2)]
        + [(k, np.pi / 2) for k in np.linspace(0.02, np.pi, n_k // 2)]
        + [(k, 2 * k) for k in np.linspace(0.02, np.pi / 2, n_k // 2)]
    )
    v = vset.velocities
    worst = 0.0
    for kx, ky in wavevectors:
        phase = np.exp(-1j * (v[:, 0] * kx + v[:, 1] * ky))
        worst = max(worst, float(np.abs(np.linalg.eigvals(phase[:, None] * G)).max()))
    return worst


def transport_symbol(V: float, c1: float, e0: float) -> np.ndarray:
    """Coefficient matrix B of the order-1 linearized (rho, j, E) system
    d_t w + B d_r w = 0 at transverse advection speed V."""
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [14.0 / 13.0 + 0.5 * V * V, 0.0, 1.0 / 26.0],
            [0.0, 0.5 * (39.0 + 13.0 * c1 + 2.0 * e0), 0.0],
        ]
    )


def diffusive_mode(V: float = 0.0) -> np.ndarray:
    """Null direction of the order-1 symbol: (1, 0, -28 - 13 V^2)."""
    return np.array([1.0, 0.0, -28.0 - 13.0 * V * V])


class D2Q13Solver:
    """Rectangular-domain driver: MRT collide, split vertical force
    g_rho (rho - rho0), optional uniform energy source, stream, walls."""

    def __init__(
        self,
        nx: int,
        ny: int,
        params: D2Q13Params,
        periodic=(True, True),
        segments: list[bd.BoundarySegment] | None = None,
        energy_source: float = 0.0,
        body_force: float = 0.0,
        nan_check_every: int = 100,
    ):
        self.nx, self.ny = nx, ny
        self.params = params
        self.periodic = tuple(periodic)
        self.vset = velocity_set("D2Q13")
        self.basis = build_moment_basis(self.vset)
        c = params.closure
        self.rates = make_rates(
            self.basis, default=params.s_eps,
            eps=params.s_eps, varpi=params.s_varpi,
            qx=c.s_qx, qy=c.s_qx, rx=params.s_rx, ry=params.s_rx,
            XX=params.s_xx, XY=params.s_xx, XXe=params.s_xxe,
        )
        self.segments = list(segments or [])
        bd.validate_segments(self.segments, nx, ny)
        for seg in self.segments:
            if seg.kind not in ("bounce_back", "mixed_d2q13", "adiabatic", "periodic"):
                raise bd.BoundaryConfigError(
                    f"D2Q13 supports bounce_back/mixed_d2q13/adiabatic walls, got {seg.kind}")
        self.energy_source = energy_source
        self.body_force = body_force
        self.nan_check_every = nan_check_every
        self.f = PopulationField(13, nx, ny)
        self.step_count = 0
        self._rho = np.ones((nx, ny))
        self.initialize()

    def initialize(self, rho=1.0, vx=0.0, vy=0.0, E=None):
        if E is None:
            E = self.params.e0 * np.asarray(rho, dtype=np.float64) / self.params.rho0
        shape = (self.nx, self.ny)
        rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), shape).copy()
        vx = np.broadcast_to(np.asarray(vx, dtype=np.float64), shape)
        vy = np.broadcast_to(np.asarray(vy, dtype=np.float64), shape)
        E = np.broadcast_to(np.asarray(E, dtype=np.float64), shape)
        meq = d2q13_equilibrium(
            rho.ravel(), E.ravel(), (rho * vx).ravel(), (rho * vy).ravel(), self.params
        )
        self.f.flat()[:] = populations_from_moments(self.basis, meq)
        self._rho = rho
        self._E = np.array(E, dtype=np.float64)

    def macro(self) -> dict[str, np.ndarray]:
        shape = (self.nx, self.ny)
        m = moments_from_populations(self.basis, self.f.flat())
        rho = m[0].reshape(shape)
        E = m[1].reshape(shape)
        fy = self._force(rho)
        vx = m[4].reshape(shape) / rho
        vy = (m[5].reshape(shape) + (0.5 * fy if fy is not None else 0.0)) / rho
        return {"rho": rho, "E": E, "vx": vx, "vy": vy,
                "T": temperature_from_state(E, vx, vy)}

    def _force(self, rho):
        p = self.params
        if p.g_rho == 0.0 and self.body_force == 0.0:
            return None
        f = np.zeros_like(rho)
        if p.g_rho != 0.0:
            f += p.g_rho * (rho - p.rho0)
        if self.body_force != 0.0:
            f += self.body_force * rho
        return f

    def _wall_eq(self, seg: bd.BoundarySegment) -> np.ndarray | None:
        """Wall-state equilibrium of the mixed rule: imposed energy (and
        optionally XX), density extrapolated from the two nearest fluid
        nodes to the half-way wall position."""
        if seg.kind == "adiabatic":
            return None
        if seg.kind == "bounce_back" and not seg.moving():
            return None
        rho_w = bd.extrapolate_wall_density(self._rho, seg)
        ux, uy = seg.wall_velocity
        E_w = self.params.e0 if seg.wall_E is None else seg.wall_E
        meq = d2q13_equilibrium(rho_w, np.full_like(rho_w, E_w),
                                rho_w * ux, rho_w * uy, self.params)
        if seg.wall_XX is not None:
            meq[10] = seg.wall_XX
        return populations_from_moments(self.basis, meq)

    def step(self, n: int = 1):
        for _ in range(n):
            self._advance()
            self.step_count += 1
            if self.step_count % self.nan_check_every == 0:
                self.f.check_finite(self.step_count, "D2Q13 populations")

    def _advance(self):
        p = self.params
        m = moments_from_populations(self.basis, self.f.flat())
        rho, E, jy = m[0], m[1], m[5]
        fy = self._force(rho)
        forced = fy is not None
        src = self.energy_source

        jy_eq = jy + 0.5 * fy if forced else jy
        E_eq = E + 0.5 * src if src != 0.0 else E
        meq = d2q13_equilibrium(rho, E_eq, m[4], jy_eq, p)
        relax_moments(m, meq, self.rates)
        if forced:
            m[5] = jy + fy
        if src != 0.0:
            m[1] = E + src

        fstar = populations_from_moments(self.basis, m).reshape(self.f.data.shape)
        self._rho = rho.reshape(self.nx, self.ny)
        self._E = m[1].reshape(self.nx, self.ny)
        self.last_fstar = fstar
        self.f.data = stream(fstar, self.vset, self.periodic)
        for seg in self.segments:
            if seg.kind != "periodic":
                bd.apply_segment(self.f.data, fstar, self.vset, seg, self._wall_eq(seg))


# ---------------------------------------------------------------------------
# empirical transport calibration


def measure_shear_viscosity(params: D2Q13Params, nx: int = 128, ny: int = 4,
                            steps: int = 3000, amplitude: float = 1e-5) -> float:
    """Decay-rate fit of a transverse velocity wave vy = a cos(kx)."""
    from thermoflow.cases import fit_exponential_rate  # local import, no cycle at runtime

    solver = D2Q13Solver(nx, ny, params)
    k = 2.0 * np.pi / nx
    x = np.arange(nx, dtype=np.float64)
    vy = amplitude * np.cos(k * x)[:, None] * np.ones((1, ny))
    rho = 1.0 + (13.0 / 28.0) * vy**2
    solver.initialize(rho=rho, vy=vy, E=-28.0 * rho)
    cos_k = np.cos(k * x)[:, None]
    times, amps = [], []
    sample = max(steps // 200, 1)
    for i in range(steps):
        solver.step()
        if i % sample == 0:
            mac = solver.macro()
            times.append(solver.step_count)
            amps.append(float(np.sum(mac["vy"] * cos_k)) * 2.0 / (nx * ny))
    rate, _ = fit_exponential_rate(np.array(times), np.array(amps))
    return rate / k**2


def measure_thermal_diffusivity(params: D2Q13Params, nx: int = 128, ny: int = 4,
                                steps: int = 4000, amplitude: float = 1e-4) -> float:
    """Decay-rate fit of a diffusive-branch temperature wave (Eq.-(23)-style
    initialization: rho = 1 - 28 dT, E = -28 rho, fluid at rest)."""
    from thermoflow.cases import fit_exponential_rate

    solver = D2Q13Solver(nx, ny, params)
    k = 2.0 * np.pi / nx
    x = np.arange(nx, dtype=np.float64)
    dT = amplitude * np.cos(k * x)[:, None] * np.ones((1, ny))
    rho = 1.0 - 28.0 * dT
    solver.initialize(rho=rho, E=-28.0 * rho)
    cos_k = np.cos(k * x)[:, None]
    times, amps = [], []
    sample = max(steps // 200, 1)
    for i in range(steps):
        solver.step()
        if i % sample == 0:
            mac = solver.macro()
            e = mac["T"]
            times.append(solver.step_count)
            amps.append(float(np.sum((e - np.mean(e)) * cos_k)) * 2.0 / (nx * ny))
    rate, _ = fit_exponential_rate(np.array(times), np.array(amps))
    return rate / k**2


def measure_source_conductivity(params: D2Q13Params, nx: int = 33, ny: int = 4,
                                steps: int = 25000, delta_e: float = 0.1) -> float:
    """Steady conductivity lambda: energy flux per unit temperature
    gradient, from a steady conduction strip.

    The flux is the exact per-link energy crossing of the wall (the same
    quadrature as the adiabatic-wall diagnostic) and the gradient the
    measured interior slope.  lambda differs from the diffusive-mode
    diffusivity kappa by an effective heat-capacity factor: kappa sets
    how temperature structures relax, lambda sets how much energy a
    steady gradient or a volumic source actually carries.
    """
    from thermoflow.cases import couette_profile

    quiet = _quiet_copy(params)
    e0 = quiet.e0
    segs = [bd.BoundarySegment("left", "mixed_d2q13", wall_E=e0 + 0.5 * delta_e),
            bd.BoundarySegment("right", "mixed_d2q13", wall_E=e0 - 0.5 * delta_e)]
    solver = D2Q13Solver(nx, ny, quiet, periodic=(False, True), segments=segs)
    prof = couette_profile(nx, 0.5 * delta_e, -0.5 * delta_e, True)
    e_init = prof[:, None] * np.ones((1, ny))
    solver.initialize(rho=1.0 - e_init / 28.0, E=e0 + e_init)
    solver.step(steps)
    flux_in = -bd.wall_flux(solver.last_fstar, solver.f.data, solver.vset,
                            segs[0], weights=solver.basis.matrix[1]) / ny
    e = np.mean(solver.macro()["T"], axis=1)
    grad = float(np.polyfit(np.arange(nx, dtype=np.float64)[4:-4], e[4:-4], 1)[0])
    return -flux_in / grad


def _quiet_copy(params: D2Q13Params) -> D2Q13Params:
    return D2Q13Params(**{f: getattr(params, f) for f in (
        "pr", "e0", "c1", "k2", "c_eps_e", "c_varpi_rho", "c_varpi_e",
        "s_xx", "s_rx", "s_eps", "s_varpi", "s_xxe")})


def _cache_key(params: D2Q13Params) -> tuple:
    return (params.pr, params.e0, params.c1, params.k2, params.c_eps_e,
            params.c_varpi_rho, params.c_varpi_e, params.s_xx, params.s_rx,
            params.s_eps, params.s_varpi, params.s_xxe)


_CALIBRATION_CACHE: dict[tuple, tuple[float, float]] = {}
_CONDUCTIVITY_CACHE: dict[tuple, float] = {}


def calibrate(params: D2Q13Params) -> tuple[float, float]:
    """Measured (nu, kappa) of a parameter set, cached per parameter tuple."""
    key = _cache_key(params)
    if key not in _CALIBRATION_CACHE:
        quiet = _quiet_copy(params)
        nu = measure_shear_viscosity(quiet)
        kappa = measure_thermal_diffusivity(quiet)
        _CALIBRATION_CACHE[key] = (nu, kappa)
    return _CALIBRATION_CACHE[key]


def calibrate_conductivity(params: D2Q13Params) -> float:
    """Measured steady conductivity, cached per parameter tuple."""
    key = _cache_key(params)
    if key not in _CONDUCTIVITY_CACHE:
        _CONDUCTIVITY_CACHE[key] = measure_source_conductivity(_quiet_copy(params))
    return _CONDUCTIVITY_CACHE[key]


# Regression lock for the default parameter set: values measured once
# with `calibrate` (shear / thermal wave decay at k = 2 pi / 128) and
# frozen here; tests assert the measurement stays put.  Note the shear
# value matches the small-k prediction nu = (3/8) sigma_XX that follows
# from the moment algebra at the default equilibrium constants.
DEFAULT_NU = 0.12502309333900305
DEFAULT_KAPPA = 0.17625445997719746
