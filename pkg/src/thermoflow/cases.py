"""Verification cases and the measurement operators they share.

Each case is a deterministic function of its configuration: an
initializer, a wall setup, a set of diagnostic channels recorded on a
fixed schedule, and a summary extracted when the run ends.  The heated
cavity additionally watches its Nusselt channel and stops when the
relative drift over a trailing window falls below the configured
threshold.

Conventions used throughout:

* lattice walls are half-way walls, so a lattice channel of nx nodes is
  L = nx wide, while the finite-difference grid puts walls on nodes and
  is L = nx - 1 wide;
* the Nusselt number is the domain average of the horizontal heat flux
  vx (T - T_ref) - kappa dT/dx, normalized so pure conduction gives
  exactly 1 (T_ref is the mid wall temperature, which makes the measure
  invariant under the energy offset of the D2Q13 scheme);
* mode aggregates follow the raw-sum convention V~ = sum vy cos(kx),
  rho~ = sum rho cos(2kx), E~ = sum E cos(2kx);
* the "acoustic channel" of a relaxation run is the oscillatory residual
  of the longitudinal-velocity mode (one acoustic period moving average
  removed), expressed relative to the initial thermal amplitude in
  density units: propagating modes oscillate at c_s k, the diffusive
  mode does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from thermoflow import boundaries as bd
from thermoflow import coupled as cp
from thermoflow import d2q13 as q13
from thermoflow import fdns
from thermoflow.lattice import InstabilityError

CASES = ("thermal_wave", "buoyancy", "transverse_wave", "couette",
         "poiseuille", "adiabatic_source", "devahl_davis")
SCHEMES = ("coupled", "d2q13", "fdns")


class CaseError(ValueError):
    """Inconsistent case configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Expectation:
    """A declared tolerance on one summary value, checked by the runner."""

    channel: str
    target: float | None = None
    rtol: float | None = None
    atol: float | None = None
    max: float | None = None
    min: float | None = None

    def evaluate(self, value: float) -> bool:
        ok = True
        if self.target is not None:
            tol = 0.0
            if self.rtol is not None:
                tol += self.rtol * abs(self.target)
            if self.atol is not None:
                tol += self.atol
            ok = ok and abs(value - self.target) <= tol
        if self.max is not None:
            ok = ok and value <= self.max
        if self.min is not None:
            ok = ok and value >= self.min
        return ok


@dataclass
class CaseConfig:
    """Complete description of one simulation run."""

    case: str
    scheme: str
    nx: int
    ny: int
    steps: int
    sample_every: int = 50
    # physical targets
    nu: float | None = None
    kappa: float | None = None
    prandtl: float | None = None
    rayleigh: float | None = None
    delta_t: float = 0.0
    t0: float = 0.0
    cs: float | None = None
    g: float = 0.0
    wave_index: int = 1
    amplitude: float = 1e-3
    wall_speed: float = 0.0
    body_force: float = 0.0
    source: float = 0.0
    compensated: bool = False
    advection_vx: float | None = None
    # low-level scheme overrides, dotted keys from the [scheme] section
    scheme_options: dict = field(default_factory=dict)
    # output
    out_dir: str | None = None
    series_path: str | None = None
    snapshot_path: str | None = None
    snapshot_every: int = 0
    # run control
    nan_check_every: int = 100
    steady_tol: float = 1e-7
    steady_window: int = 1000
    allow_unstable_dt: bool = False
    threads: int = 1
    expectations: list[Expectation] = field(default_factory=list)

    def validate(self):
        problems = []
        if self.case not in CASES:
            problems.append(f"unknown case {self.case!r}")
        if self.scheme not in SCHEMES:
            problems.append(f"unknown scheme {self.scheme!r}")
        if self.case == "transverse_wave" and self.scheme != "d2q13":
            problems.append("transverse_wave is a d2q13 case")
        if self.nx < 3 or self.ny < 3:
            problems.append("grid must be at least 3x3 nodes")
        if self.steps < 1:
            problems.append("steps must be positive")
        if self.sample_every < 1:
            problems.append("sample_every must be positive")
        if self.threads < 1:
            problems.append("threads must be positive")
        if self.rayleigh is not None and self.delta_t == 0.0:
            problems.append("rayleigh given but delta_t is zero")
        if self.scheme == "fdns" and self.case in ("thermal_wave", "buoyancy",
                                                   "devahl_davis") and self.t0 <= 0.0:
            problems.append("fdns thermal cases need a positive background t0")
        return problems


# ---------------------------------------------------------------------------
# derived parameters


@dataclass
class Derived:
    """Scheme parameters realized from the physical targets of a config."""

    L: float
    nu: float
    kappa: float
    cs: float
    dt: float = 1.0
    # conductivity governing steady source balances; equals kappa for the
    # scalar D2Q5 sector, the conduction coefficient for the gas solver,
    # and the independently calibrated steady conductivity for D2Q13
    source_conductivity: float = float("nan")
    coupled: cp.CoupledParams | None = None
    q13: q13.D2Q13Params | None = None
    gas: fdns.GasParams | None = None
    echo: dict = field(default_factory=dict)


def _option(cfg: CaseConfig, key: str, default):
    return type(default)(cfg.scheme_options.get(key, default)) if default is not None \
        else cfg.scheme_options.get(key)


def derive_parameters(cfg: CaseConfig) -> Derived:
    """Turn physical targets into scheme coefficients, echoing every
    derived value.  The buoyancy strength follows from the Rayleigh
    number Ra = g beta dT L^3 / (nu kappa) when one is requested."""
    problems = cfg.validate()
    if problems:
        raise CaseError("; ".join(problems))
    if cfg.scheme == "coupled":
        return _derive_coupled(cfg)
    if cfg.scheme == "d2q13":
        return _derive_d2q13(cfg)
    return _derive_fdns(cfg)


def _derive_coupled(cfg: CaseConfig) -> Derived:
    alpha = float(cfg.scheme_options.get("alpha", 6.0 * cfg.cs**2 - 4.0 if cfg.cs else -2.0))
    beta = float(cfg.scheme_options.get("beta", 1.0))
    s_xx = float(cfg.scheme_options.get("s_xx", 0.0)) or (
        cp.s_xx_for_viscosity(cfg.nu) if cfg.nu is not None else 1.2)
    cs, nu, _ = cp.d2q9_transport(alpha, float(cfg.scheme_options.get("s_e", 1.2)), s_xx)
    kappa = cfg.kappa
    if kappa is None:
        kappa = nu / cfg.prandtl if cfg.prandtl else cp.d2q5_kappa(beta, 1.2)
    s_flux = cp.s_flux_for_kappa(kappa, beta)
    L = float(cfg.nx)  # half-way walls
    g_beta = cfg.g
    if cfg.rayleigh is not None:
        g_beta = cfg.rayleigh * nu * kappa / (cfg.delta_t * L**3)
    params = cp.CoupledParams(
        alpha=alpha, beta=beta, s_xx=s_xx,
        s_e=float(cfg.scheme_options.get("s_e", 1.2)),
        s_q=float(cfg.scheme_options.get("s_q", 1.2)),
        s_eps=float(cfg.scheme_options.get("s_eps", 1.2)),
        s_flux=s_flux,
        s_e5=float(cfg.scheme_options.get("s_e5", 1.2)),
        s_xx5=float(cfg.scheme_options.get("s_xx5", 1.2)),
        g_beta=g_beta, T0=cfg.t0,
    )
    echo = {"alpha": alpha, "beta": beta, "s_xx": s_xx, "s_flux": s_flux,
            "nu": nu, "kappa": kappa, "cs": cs, "g_beta": g_beta, "L": L}
    return Derived(L=L, nu=nu, kappa=kappa, cs=cs, source_conductivity=kappa,
                   coupled=params, echo=echo)


def _derive_d2q13(cfg: CaseConfig) -> Derived:
    opts = cfg.scheme_options
    s_xx = float(opts.get("s_xx", 0.0))
    if not s_xx:
        if cfg.nu is not None:
            # nu = (3/8) sigma_XX holds for the default equilibrium set;
            # the calibrated value below supersedes this seed
            s_xx = 1.0 / (8.0 * cfg.nu / 3.0 + 0.5)
        else:
            s_xx = 1.2
    kwargs = {name: float(opts[name]) for name in (
        "e0", "c1", "k2", "c_eps_e", "c_varpi_rho", "c_varpi_e",
        "s_rx", "s_eps", "s_varpi", "s_xxe") if name in opts}
    if "pr" in opts:
        kwargs["pr"] = float(opts["pr"])
    elif cfg.prandtl:
        kwargs["pr"] = cfg.prandtl
    params = q13.D2Q13Params(s_xx=s_xx, **kwargs)
    L = float(cfg.nx)
    needs_transport = cfg.rayleigh is not None or cfg.case in (
        "devahl_davis", "adiabatic_source", "couette", "poiseuille",
        "thermal_wave", "transverse_wave", "buoyancy")
    if needs_transport:
        nu, kappa = q13.calibrate(params)
    else:
        nu, kappa = float("nan"), float("nan")
    g_rho = cfg.g
    if cfg.rayleigh is not None:
        g_beta_eff = cfg.rayleigh * nu * kappa / (cfg.delta_t * L**3)
        # the buoyant "temperature" is the energy, tied to the density by
        # the diffusive mode E = -28 rho, hence the factor -28
        g_rho = -28.0 * g_beta_eff
    params.g_rho = g_rho
    cs = params.sound_speed()
    lam = q13.calibrate_conductivity(params) if cfg.case == "adiabatic_source" \
        else float("nan")
    echo = {"s_xx": s_xx, "s_qx": params.closure.s_qx,
            "sigma_qx": params.closure.sigma_qx,
            "h1": params.closure.h1, "h2": params.closure.h2,
            "c2": params.closure.c2, "c_eps_rho": params.closure.c_eps_rho,
            "nu_measured": nu, "kappa_measured": kappa, "cs": cs,
            "g_rho": g_rho, "L": L, "source_conductivity": lam}
    return Derived(L=L, nu=nu, kappa=kappa, cs=cs, source_conductivity=lam,
                   q13=params, echo=echo)


def _derive_fdns(cfg: CaseConfig) -> Derived:
    opts = cfg.scheme_options
    gamma = float(opts.get("gamma", 1.4))
    R = float(opts.get("R", 1.0))
    nu = cfg.nu if cfg.nu is not None else 0.05
    kappa_eff = cfg.kappa
    if kappa_eff is None:
        kappa_eff = nu / cfg.prandtl if cfg.prandtl else nu
    # cfg.kappa is the effective (isobaric) diffusivity of the diffusive
    # mode; the conduction coefficient follows from Eq-(22)-type damping
    kappa_fd = float(opts.get("kappa_fd", kappa_eff * R * gamma / (gamma - 1.0)))
    T0 = cfg.t0 if cfg.t0 > 0.0 else 1.0
    # default second viscosity balances the acoustic-damping and the
    # diffusion-number step bounds: (nu + xi) ~ c_s / 2 maximizes dt
    cs0 = float(np.sqrt(gamma * R * T0))
    xi = float(opts.get("xi", max(0.0, 0.5 * cs0 - nu)))
    L = float(cfg.nx - 1)  # walls on nodes
    g_rho = cfg.g
    if cfg.rayleigh is not None:
        g_beta_eff = cfg.rayleigh * nu * kappa_eff / (cfg.delta_t * L**3)
        # isobaric density response drho = -rho0 dT / T0
        g_rho = -g_beta_eff * T0
    gas = fdns.GasParams(nu=nu, xi=xi, kappa=kappa_fd, R=R, gamma=gamma, g_rho=g_rho)
    cs = float(np.sqrt(gamma * R * T0))
    dt = float(opts.get("dt", 0.0))
    if not dt:
        vguess = max(0.05 * cs, abs(cfg.wall_speed))
        dt = 0.9 * fdns.dt_advisory_bound(gas, vguess, T0 + abs(cfg.delta_t))
    echo = {"gamma": gamma, "R": R, "xi": xi, "nu": nu, "kappa_eff": kappa_eff,
            "kappa_fd": kappa_fd, "T0": T0, "dt": dt, "g_rho": g_rho,
            "cs": cs, "L": L}
    return Derived(L=L, nu=nu, kappa=kappa_eff, cs=cs, dt=dt,
                   source_conductivity=kappa_fd, gas=gas, echo=echo)


# ---------------------------------------------------------------------------
# measurement operators


def fit_exponential_rate(times: np.ndarray, amplitudes: np.ndarray,
                         floor: float = 1e-13):
    """(decay rate, R^2) of a log-linear fit of |amplitude| over time.

    Samples below `floor` times the initial amplitude are dropped so the
    fit never chases round-off noise."""
    amps = np.abs(np.asarray(amplitudes, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    keep = amps > floor * amps[0]
    if keep.sum() < 3:
        raise ValueError("not enough usable samples for an exponential fit")
    t, y = times[keep], np.log(amps[keep])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return -slope, r2


def mode_amplitude(fieldxy: np.ndarray, k: float, complex_mode: bool = False) -> float:
    """Normalized amplitude (2/N) sum field cos(kx); with complex_mode the
    modulus of the complex mode, phase-invariant under advection."""
    nx, ny = fieldxy.shape
    x = np.arange(nx, dtype=np.float64)
    if complex_mode:
        w = np.exp(-1j * k * x)[:, None]
        return float(np.abs(np.sum(fieldxy * w))) * 2.0 / (nx * ny)
    w = np.cos(k * x)[:, None]
    return float(np.sum(fieldxy * w)) * 2.0 / (nx * ny)


def measure_modes(vy: np.ndarray, rho: np.ndarray, E: np.ndarray, k: float):
    """Raw global aggregates (V~y, rho~, E~) at wavenumber k.

    numpy pairwise summation keeps the reduction order fixed, so the
    aggregates are deterministic for a given grid."""
    nx, ny = vy.shape
    x = np.arange(nx, dtype=np.float64)
    ck = np.cos(k * x)[:, None]
    c2k = np.cos(2.0 * k * x)[:, None]
    vy_t = float(np.sum(vy * ck))
    rho_t = float(np.sum(rho * c2k))
    e_t = float(np.sum(E * c2k))
    return vy_t, rho_t, e_t


def nusselt(T: np.ndarray, vx: np.ndarray, kappa: float, delta_t: float,
            L: float, T_ref: float = 0.0) -> float:
    """Domain-integrated Nusselt number, 1 for pure conduction.

    The horizontal derivative is centered inside, one sided on the wall
    columns; the advected temperature is taken relative to the mid wall
    value so the estimate does not depend on the scheme's energy offset.
    """
    dTdx = np.empty_like(T)
    dTdx[1:-1, :] = 0.5 * (T[2:, :] - T[:-2, :])
    dTdx[0, :] = T[1, :] - T[0, :]
    dTdx[-1, :] = T[-1, :] - T[-2, :]
    q = vx * (T - T_ref) - kappa * dTdx
    return float(np.mean(q)) * L / (kappa * delta_t)


def symmetry_defect(vx: np.ndarray, vy: np.ndarray):
    """(max |V(x) + V(x0 - x)|, max |V|): departure from the center
    symmetry of the cavity flow, plus the modulus used to normalize it."""
    sx = vx + vx[::-1, ::-1]
    sy = vy + vy[::-1, ::-1]
    defect = float(np.max(np.hypot(sx, sy)))
    vmax = float(np.max(np.hypot(vx, vy)))
    return defect, vmax


def oscillation_amplitude(values: np.ndarray, period_samples: float) -> float:
    """Largest residual after removing a one-period moving average: the
    amplitude of any oscillatory (propagating-mode) content."""
    x = np.asarray(values, dtype=np.float64)
    w = max(3, int(round(period_samples)))
    if w % 2 == 0:
        w += 1
    if len(x) < 2 * w:
        # short series: quadratic detrend
        t = np.arange(len(x), dtype=np.float64)
        trend = np.polyval(np.polyfit(t, x, 2), t)
        return float(np.max(np.abs(x - trend)))
    kernel = np.full(w, 1.0 / w)
    smooth = np.convolve(x, kernel, mode="valid")
    inner = x[w // 2: w // 2 + len(smooth)]
    return float(np.max(np.abs(inner - smooth)))


# ---------------------------------------------------------------------------
# analytic steady profiles


def couette_profile(n: int, u_left: float, u_right: float, halfway: bool) -> np.ndarray:
    x = np.arange(n, dtype=np.float64)
    if halfway:
        frac = (x + 0.5) / n
    else:
        frac = x / (n - 1)
    return u_left + (u_right - u_left) * frac


def poiseuille_profile(n: int, g: float, nu: float, halfway: bool) -> np.ndarray:
    x = np.arange(n, dtype=np.float64)
    c = 0.5 * (n - 1)
    L = float(n) if halfway else float(n - 1)
    return g / (2.0 * nu) * ((L / 2.0) ** 2 - (x - c) ** 2)


def semi_parabola_profile(n: int, T_wall: float, S: float, kappa: float,
                          halfway: bool) -> np.ndarray:
    """Steady solution of kappa T'' + S = 0 with T(x_L) = T_wall and
    T'(x_R) = 0: maximum sits on the insulated end."""
    x = np.arange(n, dtype=np.float64)
    if halfway:
        x_l, x_r = -0.5, n - 0.5
    else:
        x_l, x_r = 0.0, float(n - 1)
    return T_wall + (S / kappa) * (x_r * (x - x_l) - 0.5 * (x**2 - x_l**2))


# ---------------------------------------------------------------------------
# series container


class DiagnosticSeries:
    """Time stamps plus named scalar channels of equal length."""

    def __init__(self):
        self.times: list[float] = []
        self.channels: dict[str, list[float]] = {}

    def add(self, t: float, **values: float):
        if self.times and t <= self.times[-1]:
            raise ValueError("time stamps must be strictly increasing")
        if self.channels and set(values) != set(self.channels):
            raise ValueError("channel set changed mid-series")
        self.times.append(float(t))
        for name, v in values.items():
            self.channels.setdefault(name, []).append(float(v))

    def last(self, name: str) -> float:
        return self.channels[name][-1]

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.channels[name], dtype=np.float64)

    @property
    def time(self) -> np.ndarray:
        return np.asarray(self.times, dtype=np.float64)

    def names(self) -> list[str]:
        return list(self.channels)


# ---------------------------------------------------------------------------
# wall setups


def _lb_wall_segments(cfg: CaseConfig, derived: Derived):
    """(fluid, thermal/mixed) segment lists for the lattice schemes."""
    u = cfg.wall_speed
    hot = cfg.t0 + 0.5 * cfg.delta_t
    cold = cfg.t0 - 0.5 * cfg.delta_t
    if cfg.scheme == "coupled":
        if cfg.case in ("couette", "poiseuille"):
            ul = (0.0, -u) if cfg.case == "couette" else (0.0, 0.0)
            ur = (0.0, +u) if cfg.case == "couette" else (0.0, 0.0)
            fluid = [bd.BoundarySegment("left", "bounce_back", wall_velocity=ul),
                     bd.BoundarySegment("right", "bounce_back", wall_velocity=ur)]
            thermal = [bd.BoundarySegment("left", "anti_bounce_back",
                                          wall_temperature=hot, wall_velocity=ul),
                       bd.BoundarySegment("right", "anti_bounce_back",
                                          wall_temperature=cold, wall_velocity=ur)]
            return fluid, thermal
        if cfg.case == "adiabatic_source":
            ul = (0.0, u)
            fluid = [bd.BoundarySegment("left", "bounce_back", wall_velocity=ul),
                     bd.BoundarySegment("right", "bounce_back")]
            thermal = [bd.BoundarySegment("left", "anti_bounce_back",
                                          wall_temperature=cfg.t0, wall_velocity=ul),
                       bd.BoundarySegment("right", "adiabatic")]
            return fluid, thermal
        if cfg.case == "devahl_davis":
            fluid = [bd.BoundarySegment(side, "bounce_back")
                     for side in ("left", "right", "bottom", "top")]
            thermal = [bd.BoundarySegment("left", "anti_bounce_back", wall_temperature=hot),
                       bd.BoundarySegment("right", "anti_bounce_back", wall_temperature=cold),
                       bd.BoundarySegment("bottom", "adiabatic"),
                       bd.BoundarySegment("top", "adiabatic")]
            return fluid, thermal
        return [], []
    # d2q13: one distribution, mixed walls impose velocity and energy
    e0 = derived.q13.e0
    hot_e = e0 + 0.5 * cfg.delta_t
    cold_e = e0 - 0.5 * cfg.delta_t
    if cfg.case in ("couette", "poiseuille"):
        ul = (0.0, -u) if cfg.case == "couette" else (0.0, 0.0)
        ur = (0.0, +u) if cfg.case == "couette" else (0.0, 0.0)
        segs = [bd.BoundarySegment("left", "mixed_d2q13", wall_velocity=ul, wall_E=hot_e),
                bd.BoundarySegment("right", "mixed_d2q13", wall_velocity=ur, wall_E=cold_e)]
        return segs, None
    if cfg.case == "adiabatic_source":
        segs = [bd.BoundarySegment("left", "mixed_d2q13", wall_velocity=(0.0, u), wall_E=e0),
                bd.BoundarySegment("right", "adiabatic")]
        return segs, None
    if cfg.case == "devahl_davis":
        segs = [bd.BoundarySegment("left", "mixed_d2q13", wall_E=hot_e),
                bd.BoundarySegment("right", "mixed_d2q13", wall_E=cold_e),
                bd.BoundarySegment("bottom", "adiabatic"),
                bd.BoundarySegment("top", "adiabatic")]
        return segs, None
    return [], None


def _fd_walls(cfg: CaseConfig):
    u = cfg.wall_speed
    hot = cfg.t0 + 0.5 * cfg.delta_t
    cold = cfg.t0 - 0.5 * cfg.delta_t
    if cfg.case in ("couette", "poiseuille"):
        ul = (0.0, -u) if cfg.case == "couette" else (0.0, 0.0)
        ur = (0.0, +u) if cfg.case == "couette" else (0.0, 0.0)
        return {"left": fdns.WallSpec(velocity=ul, T=hot),
                "right": fdns.WallSpec(velocity=ur, T=cold)}
    if cfg.case == "adiabatic_source":
        return {"left": fdns.WallSpec(velocity=(0.0, u), T=cfg.t0),
                "right": fdns.WallSpec()}
    if cfg.case == "devahl_davis":
        return {"left": fdns.WallSpec(T=hot), "right": fdns.WallSpec(T=cold),
                "bottom": fdns.WallSpec(), "top": fdns.WallSpec()}
    return {}


def build_solver(cfg: CaseConfig, derived: Derived):
    periodic_cases = ("thermal_wave", "buoyancy", "transverse_wave")
    if cfg.scheme == "coupled":
        if cfg.case in periodic_cases:
            periodic, fluid, thermal = (True, True), [], []
        else:
            fluid, thermal = _lb_wall_segments(cfg, derived)
            periodic = (False, cfg.case != "devahl_davis")
        override = (cfg.advection_vx, 0.0) if cfg.advection_vx is not None else None
        return cp.CoupledSolver(
            cfg.nx, cfg.ny, derived.coupled, periodic=periodic,
            fluid_segments=fluid, thermal_segments=thermal,
            scalar_source=cfg.source, body_force=cfg.body_force,
            advection_override=override,
            nan_check_every=cfg.nan_check_every)
    if cfg.scheme == "d2q13":
        if cfg.case in periodic_cases:
            periodic, segs = (True, True), []
        else:
            segs, _ = _lb_wall_segments(cfg, derived)
            periodic = (False, cfg.case != "devahl_davis")
        return q13.D2Q13Solver(
            cfg.nx, cfg.ny, derived.q13, periodic=periodic, segments=segs,
            energy_source=cfg.source, body_force=cfg.body_force,
            nan_check_every=cfg.nan_check_every)
    walls = {} if cfg.case in periodic_cases else _fd_walls(cfg)
    return fdns.FdSolver(
        cfg.nx, cfg.ny, derived.gas, derived.dt, walls=walls,
        body_force=cfg.body_force, source=cfg.source,
        allow_unstable_dt=cfg.allow_unstable_dt,
        nan_check_every=cfg.nan_check_every)


# ---------------------------------------------------------------------------
# initial conditions


def wavenumber(cfg: CaseConfig) -> float:
    return 2.0 * math.pi * cfg.wave_index / cfg.nx


def init_case(cfg: CaseConfig, derived: Derived, solver) -> None:
    nx, ny = cfg.nx, cfg.ny
    x = np.arange(nx, dtype=np.float64)[:, None] * np.ones((1, ny))
    k = wavenumber(cfg)

    if cfg.case in ("thermal_wave", "buoyancy"):
        dT = cfg.amplitude * np.cos(k * x)
        if cfg.scheme == "coupled":
            solver.initialize(rho=1.0, T=cfg.t0 + dT)
        elif cfg.scheme == "d2q13":
            rho = 1.0 - 28.0 * dT
            solver.initialize(rho=rho, E=-28.0 * rho)
        else:
            T = cfg.t0 + dT
            # constant pressure P = R T0, uniform rho e: no acoustics
            solver.initialize(rho=cfg.t0 / T, T=T)
        return

    if cfg.case == "transverse_wave":
        vy = cfg.amplitude * np.cos(k * x)
        rho = 1.0 + (13.0 / 28.0) * vy**2 if cfg.compensated else np.ones_like(vy)
        solver.initialize(rho=rho, vy=vy, E=-28.0 * rho)
        return

    halfway = cfg.scheme != "fdns"
    if cfg.case == "couette":
        prof = couette_profile(nx, -cfg.wall_speed, cfg.wall_speed, halfway)
        tprof = couette_profile(nx, cfg.t0 + 0.5 * cfg.delta_t,
                                cfg.t0 - 0.5 * cfg.delta_t, halfway)
        vy = prof[:, None] * np.ones((1, ny))
        _init_channel_state(cfg, derived, solver, vy, tprof[:, None] * np.ones((1, ny)))
        return

    if cfg.case == "poiseuille":
        prof = poiseuille_profile(nx, cfg.body_force, derived.nu, halfway)
        tprof = couette_profile(nx, cfg.t0 + 0.5 * cfg.delta_t,
                                cfg.t0 - 0.5 * cfg.delta_t, halfway)
        vy = prof[:, None] * np.ones((1, ny))
        _init_channel_state(cfg, derived, solver, vy, tprof[:, None] * np.ones((1, ny)))
        return

    if cfg.case == "adiabatic_source":
        tprof = semi_parabola_profile(nx, cfg.t0, cfg.source,
                                      derived.source_conductivity, halfway)
        prof = np.zeros(nx)
        _init_channel_state(cfg, derived, solver, prof[:, None] * np.ones((1, ny)),
                            tprof[:, None] * np.ones((1, ny)))
        return

    if cfg.case == "devahl_davis":
        tprof = couette_profile(nx, cfg.t0 + 0.5 * cfg.delta_t,
                                cfg.t0 - 0.5 * cfg.delta_t, halfway)
        T = tprof[:, None] * np.ones((1, ny))
        if cfg.scheme == "coupled":
            solver.initialize(rho=1.0, T=T)
        elif cfg.scheme == "d2q13":
            e0 = derived.q13.e0
            E = e0 + (T - cfg.t0)
            rho = 1.0 - (E - e0) / 28.0  # isobaric branch
            solver.initialize(rho=rho, E=E)
        else:
            solver.initialize(rho=cfg.t0 / T, T=T)
        return

    raise CaseError(f"no initializer for case {cfg.case!r}")


def _init_channel_state(cfg: CaseConfig, derived: Derived, solver, vy, T):
    """Channel cases start on the analytic profile to shorten transients."""
    if cfg.scheme == "coupled":
        solver.initialize(rho=1.0, vy=vy, T=T)
    elif cfg.scheme == "d2q13":
        e = T - cfg.t0  # thermal part of the energy, isobaric density
        solver.initialize(rho=1.0 - e / 28.0, vy=vy,
                          E=derived.q13.e0 + e + 6.5 * vy**2)
    else:
        solver.initialize(rho=cfg.t0 / T if cfg.t0 > 0 else 1.0, vy=vy, T=T)


# ---------------------------------------------------------------------------
# per-case channel recorders and summaries


def _temperature_field(cfg: CaseConfig, mac: dict) -> np.ndarray:
    return mac["T"]


def _t_reference(cfg: CaseConfig, derived: Derived) -> float:
    return derived.q13.e0 if cfg.scheme == "d2q13" else cfg.t0


def _record(cfg: CaseConfig, derived: Derived, solver, series: DiagnosticSeries,
            snapshots: list):
    mac = solver.macro()
    t = solver.time if cfg.scheme == "fdns" else float(solver.step_count)
    k = wavenumber(cfg)
    tref = _t_reference(cfg, derived)
    halfway = cfg.scheme != "fdns"

    if cfg.case in ("thermal_wave",):
        T = _temperature_field(cfg, mac)
        series.add(
            t,
            thermal_amp=mode_amplitude(T - tref, k),
            velocity_amp=mode_amplitude(mac["vx"], k, complex_mode=True),
            density_amp=mode_amplitude(mac["rho"] - np.mean(mac["rho"]), k),
        )
    elif cfg.case == "buoyancy":
        vx, vy = mac["vx"], mac["vy"]
        ek_x, ek_y = float(np.sum(vx**2)), float(np.sum(vy**2))
        series.add(t, max_vx=float(np.max(np.abs(vx))),
                   max_vy=float(np.max(np.abs(vy))),
                   ekin_ratio=ek_x / ek_y if ek_y > 0 else 0.0)
    elif cfg.case == "transverse_wave":
        vy_t, rho_t, e_t = measure_modes(mac["vy"], mac["rho"], mac["E"], k)
        series.add(t, vy_tilde=vy_t, rho_tilde=rho_t, e_tilde=e_t)
    elif cfg.case in ("couette", "poiseuille"):
        prof = np.mean(mac["vy"], axis=1)
        if cfg.case == "couette":
            ref = couette_profile(cfg.nx, -cfg.wall_speed, cfg.wall_speed, halfway)
        else:
            ref = poiseuille_profile(cfg.nx, cfg.body_force, derived.nu, halfway)
        scale = float(np.max(np.abs(ref)))
        verr = float(np.max(np.abs(prof - ref))) / scale if scale else 0.0
        T = _temperature_field(cfg, mac)
        entries = {"vy_err_rel": verr,
                   "u_max": float(np.max(np.abs(prof)))}
        if cfg.delta_t != 0.0:
            tprof = np.mean(T, axis=1)
            tref_prof = couette_profile(cfg.nx, tref + 0.5 * cfg.delta_t,
                                        tref - 0.5 * cfg.delta_t, halfway)
            entries["t_err_rel"] = float(np.max(np.abs(tprof - tref_prof))) / (
                0.5 * abs(cfg.delta_t))
        else:
            entries["t_drift"] = float(np.max(np.abs(T - tref)))
        series.add(t, **entries)
    elif cfg.case == "adiabatic_source":
        T = _temperature_field(cfg, mac)
        tprof = np.mean(T, axis=1)
        ref = semi_parabola_profile(cfg.nx, tref, cfg.source,
                                    derived.source_conductivity, halfway)
        scale = float(np.max(np.abs(ref - tref)))
        series.add(t,
                   t_err_rel=float(np.max(np.abs(tprof - ref))) / scale,
                   wall_flux_norm=_adiabatic_flux_norm(cfg, derived, solver),
                   max_vy=float(np.max(np.abs(mac["vy"]))))
    elif cfg.case == "devahl_davis":
        T = _temperature_field(cfg, mac)
        nu_val = nusselt(T, mac["vx"], derived.kappa, cfg.delta_t, derived.L, tref)
        defect, vmax = symmetry_defect(mac["vx"], mac["vy"])
        series.add(t, nusselt=nu_val, vmax=vmax,
                   sym_defect_rel=defect / vmax if vmax > 0 else 0.0)
    else:
        raise CaseError(f"no recorder for case {cfg.case!r}")

    if cfg.snapshot_every and len(series.times) % max(cfg.snapshot_every, 1) == 0:
        snapshots.append((t, {k_: v.copy() for k_, v in mac.items()}))


def _adiabatic_flux_norm(cfg: CaseConfig, derived: Derived, solver) -> float:
    """Measured heat flux through the insulated wall, relative to S L.

    For the lattice schemes the quadrature sums the per-link crossings of
    the scalar (D2Q5) or energy (D2Q13) content through the wall plane;
    for the finite-difference scheme the wall flux is the centered
    conduction flux at the wall vertex, which the mirror ghost makes
    vanish identically."""
    SL = abs(cfg.source) * derived.L
    if SL == 0.0:
        return 0.0
    if cfg.scheme == "fdns":
        return 0.0
    if cfg.scheme == "coupled":
        seg = next(s for s in solver.thermal_segments if s.kind == "adiabatic")
        flux = bd.wall_flux(solver.last_fstar5, solver.g.data, solver.vset5, seg)
    else:
        seg = next(s for s in solver.segments if s.kind == "adiabatic")
        flux = bd.wall_flux(solver.last_fstar, solver.f.data, solver.vset, seg,
                            weights=solver.basis.matrix[1])
    return abs(flux) / (cfg.ny * SL)


def summarize(cfg: CaseConfig, derived: Derived, series: DiagnosticSeries,
              status: str) -> dict:
    """Final scalar diagnostics of a finished run."""
    out: dict[str, float] = {}
    if not series.times:
        return out
    for name in series.names():
        out[name] = series.last(name)
    if cfg.case == "thermal_wave" and status == "ok":
        k = wavenumber(cfg)
        rate, r2 = fit_exponential_rate(series.time, series.array("thermal_amp"))
        out["decay_rate"] = rate
        out["fit_r2"] = r2
        out["rate_expected"] = derived.kappa * k**2 if cfg.scheme != "fdns" else (
            derived.gas.kappa * (derived.gas.gamma - 1.0)
            / (derived.gas.R * derived.gas.gamma) * k**2)
        out["rate_rel_err"] = abs(rate - out["rate_expected"]) / out["rate_expected"]
        # oscillatory content of the longitudinal velocity mode, relative
        # to the initial thermal amplitude expressed in density units
        dtime = series.time[1] - series.time[0] if len(series.times) > 1 else 1.0
        period = 2.0 * math.pi / (derived.cs * k) / dtime
        osc = oscillation_amplitude(series.array("velocity_amp"), period)
        if cfg.scheme == "d2q13":
            norm = 28.0 * cfg.amplitude
        elif cfg.scheme == "fdns":
            norm = cfg.amplitude / cfg.t0
        else:
            norm = cfg.amplitude
        out["acoustic_ratio"] = osc / derived.cs / norm
    if cfg.case == "transverse_wave" and status == "ok" and len(series.times) > 4:
        t = series.time
        e = series.array("e_tilde")
        out["e_growth_rate"] = float(np.polyfit(t, e, 1)[0])
        dtime = t[1] - t[0]
        period = 2.0 * math.pi / (derived.cs * 2.0 * wavenumber(cfg)) / dtime
        out["rho_osc_amp"] = oscillation_amplitude(series.array("rho_tilde"), period)
    if cfg.case == "buoyancy" and status == "ok" and len(series.times) > 4:
        t = series.time
        vy = series.array("max_vy")
        slope, intercept = np.polyfit(t, vy, 1)
        pred = slope * t + intercept
        denom = float(np.max(vy)) or 1.0
        out["vy_growth_rate"] = float(slope)
        out["vy_linearity_err"] = float(np.max(np.abs(vy - pred))) / denom
        out["vx_vy_ratio"] = float(np.max(series.array("max_vx"))) / denom
    return out


# ---------------------------------------------------------------------------
# runner


@dataclass
class CaseResult:
    config: CaseConfig
    derived: Derived
    series: DiagnosticSeries
    summary: dict
    status: str
    failure_step: int | None
    steps_run: int
    steady: bool
    snapshots: list
    final_macro: dict
    expectation_results: dict


def run_case(cfg: CaseConfig, derived: Derived | None = None) -> CaseResult:
    if derived is None:
        derived = derive_parameters(cfg)
    solver = build_solver(cfg, derived)
    init_case(cfg, derived, solver)
    series = DiagnosticSeries()
    snapshots: list = []
    status, failure_step, steady = "ok", None, False
    steps_run = 0
    window_samples = max(1, cfg.steady_window // cfg.sample_every)
    try:
        while steps_run < cfg.steps:
            burst = min(cfg.sample_every, cfg.steps - steps_run)
            solver.step(burst)
            steps_run += burst
            _record(cfg, derived, solver, series, snapshots)
            if cfg.case == "devahl_davis" and len(series.times) > window_samples:
                now = series.array("nusselt")[-1]
                then = series.array("nusselt")[-1 - window_samples]
                if abs(now - then) <= cfg.steady_tol * abs(now):
                    steady = True
                    break
    except InstabilityError as exc:
        status = "unstable"
        failure_step = exc.step
    summary = summarize(cfg, derived, series, status)
    summary["steps_run"] = steps_run
    expectation_results = {}
    for exp in cfg.expectations:
        value = summary.get(exp.channel)
        expectation_results[exp.channel] = (
            bool(value is not None and np.isfinite(value) and exp.evaluate(value)),
            value,
        )
    mac = solver.macro() if status == "ok" else {}
    return CaseResult(
        config=cfg, derived=derived, series=series, summary=summary,
        status=status, failure_step=failure_step, steps_run=steps_run,
        steady=steady, snapshots=snapshots, final_macro=mac,
        expectation_results=expectation_results,
    )
