"""Plain-text run configuration: parsing, validation, reference catalog.

Grammar: INI-style sections with key = value pairs.

    [case]      id, scheme, nx, ny, steps, sample_every
    [physics]   nu, kappa, prandtl, rayleigh, delta_t, t0, cs, g,
                wave_index, amplitude, wall_speed, body_force, source,
                compensated, advection_vx
    [scheme]    low-level coefficient overrides; dotted names select the
                scheme, e.g. d2q13.s_xx = 1.3 or fd.gamma = 1.4 (a bare
                name applies to the configured scheme)
    [output]    dir, series, snapshot, snapshot_every
    [run]       nan_check_every, steady_tol, steady_window,
                allow_unstable_dt, threads
    [expect]    declared tolerances on summary values, dotted:
                <channel>.target / .rtol / .atol / .max / .min

Unknown sections or keys are collected and reported in one aggregated
validation error.  `reference_config` returns ready-made configurations
for the benchmark cases the acceptance suite runs.
"""

from __future__ import annotations

import configparser
import io as _io

from thermoflow.cases import CaseConfig, Expectation

_CASE_KEYS = {"id": str, "scheme": str, "nx": int, "ny": int,
              "steps": int, "sample_every": int}
_PHYSICS_KEYS = {"nu": float, "kappa": float, "prandtl": float, "rayleigh": float,
                 "delta_t": float, "t0": float, "cs": float, "g": float,
                 "wave_index": int, "amplitude": float, "wall_speed": float,
                 "body_force": float, "source": float, "compensated": bool,
                 "advection_vx": float}
_OUTPUT_KEYS = {"dir": str, "series": str, "snapshot": str, "snapshot_every": int}
_RUN_KEYS = {"nan_check_every": int, "steady_tol": float, "steady_window": int,
             "allow_unstable_dt": bool, "threads": int}
_EXPECT_FIELDS = ("target", "rtol", "atol", "max", "min")

_SCHEME_OPTIONS = {
    "coupled": {"alpha", "beta", "s_xx", "s_e", "s_q", "s_eps", "s_e5", "s_xx5"},
    "d2q13": {"pr", "e0", "c1", "k2", "c_eps_e", "c_varpi_rho", "c_varpi_e",
              "s_xx", "s_rx", "s_eps", "s_varpi", "s_xxe"},
    "fdns": {"gamma", "R", "xi", "kappa_fd", "dt"},
}
_SCHEME_PREFIX = {"coupled": "coupled", "d2q13": "d2q13", "fdns": "fd"}


class ConfigError(ValueError):
    """Aggregated configuration problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("configuration invalid:\n  " + "\n  ".join(self.problems))


def _convert(raw: str, kind, problems, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        problems.append(f"{where}: cannot parse {raw!r} as {kind.__name__}")
        return None


def parse_config_text(text: str) -> CaseConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc

    problems: list[str] = []
    values: dict = {}

    known_sections = {"case", "physics", "scheme", "output", "run", "expect"}
    for section in parser.sections():
        if section not in known_sections:
            problems.append(f"unknown section [{section}]")

    def take(section, schema, rename=None):
        if not parser.has_section(section):
            return
        for key, raw in parser.items(section):
            if key not in schema:
                problems.append(f"[{section}] unknown key {key!r}")
                continue
            val = _convert(raw, schema[key], problems, f"[{section}] {key}")
            if val is not None:
                values[(rename or {}).get(key, key)] = val

    take("case", _CASE_KEYS, rename={"id": "case"})
    take("physics", _PHYSICS_KEYS)
    take("output", _OUTPUT_KEYS,
         rename={"dir": "out_dir", "series": "series_path", "snapshot": "snapshot_path"})
    take("run", _RUN_KEYS)

    for key in ("case", "scheme", "nx", "ny", "steps"):
        if key not in values:
            problems.append(f"[case] missing required key {'id' if key == 'case' else key}")

    scheme = values.get("scheme", "")
    scheme_options: dict = {}
    if parser.has_section("scheme"):
        allowed = _SCHEME_OPTIONS.get(scheme, set())
        prefix = _SCHEME_PREFIX.get(scheme, "")
        for key, raw in parser.items("scheme"):
            if "." in key:
                owner, name = key.split(".", 1)
                if owner not in _SCHEME_PREFIX.values():
                    problems.append(f"[scheme] unknown scheme prefix {owner!r} in {key!r}")
                    continue
                if owner != prefix:
                    continue  # override for another scheme, ignored
            else:
                name = key
            if name not in allowed:
                problems.append(f"[scheme] unknown {scheme} option {name!r}")
                continue
            val = _convert(raw, float, problems, f"[scheme] {key}")
            if val is not None:
                scheme_options[name] = val

    expectations: list[Expectation] = []
    if parser.has_section("expect"):
        grouped: dict[str, dict] = {}
        for key, raw in parser.items("expect"):
            if "." not in key:
                problems.append(f"[expect] key {key!r} needs the form channel.field")
                continue
            channel, fld = key.rsplit(".", 1)
            if fld not in _EXPECT_FIELDS:
                problems.append(f"[expect] unknown field {fld!r} in {key!r}")
                continue
            val = _convert(raw, float, problems, f"[expect] {key}")
            if val is not None:
                grouped.setdefault(channel, {})[fld] = val
        expectations = [Expectation(channel=ch, **flds) for ch, flds in grouped.items()]

    if problems:
        raise ConfigError(problems)

    cfg = CaseConfig(scheme_options=scheme_options, expectations=expectations, **values)
    problems = cfg.validate()
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path) -> tuple[CaseConfig, str]:
    """Parse a config file; returns the config plus the raw text (for
    the manifest digest)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return parse_config_text(text), text


# ---------------------------------------------------------------------------
# reference catalog: the configurations the acceptance suite runs


def _ini(sections: dict) -> str:
    parser = configparser.ConfigParser()
    for name, kv in sections.items():
        parser[name] = {k: str(v) for k, v in kv.items()}
    buf = _io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _cavity(scheme: str, nx: int, steps: int, target: float, rtol: float,
            rayleigh: float = 1e5, extras: dict | None = None) -> str:
    physics = {"rayleigh": rayleigh, "prandtl": 0.71, "delta_t": 1.0 if scheme == "coupled" else 0.1}
    if scheme == "coupled":
        physics["nu"] = 0.15 * nx * (0.71 / rayleigh) ** 0.5
        physics["kappa"] = physics["nu"] / 0.71
    elif scheme == "d2q13":
        physics["nu"] = 0.15 * nx * (0.71 / rayleigh) ** 0.5
        physics["delta_t"] = 0.1
    else:
        physics["t0"] = 1.0
        physics["delta_t"] = 0.02
        physics["nu"] = 0.12 * (nx - 1) * (0.71 / rayleigh) ** 0.5
        physics["kappa"] = physics["nu"] / 0.71
    sections = {
        "case": {"id": "devahl_davis", "scheme": scheme, "nx": nx, "ny": nx,
                 "steps": steps, "sample_every": 200},
        "physics": physics,
        "expect": {"nusselt.target": target, "nusselt.rtol": rtol},
    }
    if extras:
        for sec, kv in extras.items():
            sections.setdefault(sec, {}).update(kv)
    return _ini(sections)


def _reference_catalog() -> dict[str, str]:
    cat: dict[str, str] = {}

    for scheme, extra in (("coupled", {"nu": 1 / 6, "kappa": 0.1}),
                          ("d2q13", {}),
                          ("fdns", {"nu": 0.05, "kappa": 0.05, "t0": 1.0})):
        cat[f"thermal_wave_{scheme}"] = _ini({
            "case": {"id": "thermal_wave", "scheme": scheme, "nx": 128, "ny": 4,
                     "steps": 4000, "sample_every": 10},
            "physics": {"amplitude": 1e-4, "wave_index": 1, **extra},
            "expect": {"fit_r2.min": 0.9999, "acoustic_ratio.max": 0.01},
        })
        cat[f"buoyancy_{scheme}"] = _ini({
            "case": {"id": "buoyancy", "scheme": scheme, "nx": 510, "ny": 8,
                     "steps": 1500 if scheme != "fdns" else 3000,
                     "sample_every": 25},
            "physics": {"amplitude": 1e-3, "wave_index": 1,
                        "g": 1e-6 if scheme == "coupled" else -2e-6, **extra},
            "expect": {"vx_vy_ratio.max": 0.01, "ekin_ratio.max": 1e-4},
        })
        iso = {"coupled": {"nu": 1 / 6, "kappa": 0.1},
               "d2q13": {},
               "fdns": {"nu": 0.05, "kappa": 0.05, "t0": 1.0}}[scheme]
        vy_tol = 1e-6 if scheme != "fdns" else 0.01
        cat[f"couette_{scheme}"] = _ini({
            "case": {"id": "couette", "scheme": scheme, "nx": 33, "ny": 4,
                     "steps": 30000, "sample_every": 2000},
            "physics": {"wall_speed": 1e-4 if scheme == "d2q13" else 1e-3,
                        "delta_t": 0.0, **iso},
            "expect": {"vy_err_rel.max": vy_tol, "t_drift.max": 1e-6},
        })
        cat[f"couette_thermal_{scheme}"] = _ini({
            "case": {"id": "couette", "scheme": scheme, "nx": 33, "ny": 4,
                     "steps": 30000, "sample_every": 2000},
            "physics": {"wall_speed": 1e-3,
                        "delta_t": 0.1 if scheme != "fdns" else 0.02, **iso},
            "expect": {"vy_err_rel.max": 0.01, "t_err_rel.max": 0.01},
        })
        nu_for_g = {"coupled": 1 / 6, "d2q13": 0.125, "fdns": 0.05}[scheme]
        cat[f"poiseuille_{scheme}"] = _ini({
            "case": {"id": "poiseuille", "scheme": scheme, "nx": 33, "ny": 4,
                     "steps": 30000, "sample_every": 2000},
            "physics": {"body_force": 8 * nu_for_g * 1e-4 / 33**2,
                        "delta_t": 0.0, **iso},
            "expect": {"vy_err_rel.max": 0.01, "t_drift.max": 1e-6},
        })

    cat["transverse_wave_d2q13"] = _ini({
        "case": {"id": "transverse_wave", "scheme": "d2q13", "nx": 128, "ny": 4,
                 "steps": 400, "sample_every": 4},
        "physics": {"amplitude": 0.01, "wave_index": 1, "compensated": True},
    })
    for ws, tag in ((0.0, ""), (0.02, "_moving")):
        cat[f"adiabatic_source_d2q13{tag}"] = _ini({
            "case": {"id": "adiabatic_source", "scheme": "d2q13", "nx": 49, "ny": 4,
                     "steps": 40000, "sample_every": 5000},
            "physics": {"source": 1e-7, "wall_speed": ws, "delta_t": 0.0},
            "expect": {"t_err_rel.max": 0.02, "wall_flux_norm.max": 1e-8},
        })

    cat["devahl_davis_ra1e5_coupled"] = _cavity("coupled", 129, 200000, 4.521, 0.02)
    cat["devahl_davis_ra1e5_d2q13"] = _cavity("d2q13", 129, 200000, 4.50, 0.03)
    cat["devahl_davis_ra1e5_fdns"] = _cavity("fdns", 129, 400000, 4.57, 0.03)
    # extended, longer runs at the next Rayleigh decade
    cat["devahl_davis_ra1e6_coupled"] = _cavity("coupled", 187, 600000, 8.828, 0.03,
                                                rayleigh=1e6)
    cat["devahl_davis_ra1e6_d2q13"] = _cavity("d2q13", 187, 600000, 8.73, 0.03,
                                              rayleigh=1e6)
    cat["devahl_davis_ra1e6_fdns"] = _cavity("fdns", 187, 1200000, 8.88, 0.03,
                                             rayleigh=1e6)
    return cat


_CATALOG: dict[str, str] | None = None


def reference_names() -> list[str]:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _reference_catalog()
    return sorted(_CATALOG)


def reference_config(name: str) -> str:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _reference_catalog()
    if name not in _CATALOG:
        raise KeyError(f"unknown reference case {name!r}; see `reference --list`")
    return _CATALOG[name]
