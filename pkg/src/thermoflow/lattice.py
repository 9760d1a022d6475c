"""Velocity stencils, moment bases, population storage and MRT collision.

The moment matrices are evaluated in exact rational arithmetic before
being cast to float64, so every entry is bit-identical to a direct
evaluation of the defining polynomial.  The three stencils share one
streaming kernel and one relaxation kernel; scheme-specific equilibria
live in `coupled` and `d2q13`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class LatticeError(RuntimeError):
    """Construction-time failure (singular basis, bad stencil)."""


class InstabilityError(RuntimeError):
    """A field stopped being finite; carries the step it was detected at."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


_AXIS1 = [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)]
_DIAG = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
_AXIS2 = [(2, 0), (0, 2), (-2, 0), (0, -2)]

_VELOCITIES = {
    "D2Q5": _AXIS1,
    "D2Q9": _AXIS1 + _DIAG,
    "D2Q13": _AXIS1 + _DIAG + _AXIS2,
}


class VelocitySet:
    """Ordered discrete velocities of one stencil plus the opposite map."""

    def __init__(self, name: str):
        if name not in _VELOCITIES:
            raise LatticeError(f"unknown velocity set {name!r}")
        self.name = name
        vel = _VELOCITIES[name]
        self.q = len(vel)
        self.velocities = np.array(vel, dtype=np.int64)
        index = {v: j for j, v in enumerate(vel)}
        self.opposite = np.array(
            [index[(-vx, -vy)] for vx, vy in vel], dtype=np.int64
        )
        # stencil reach per axis, drives the boundary fill depth
        self.reach = int(np.max(np.abs(self.velocities)))

    def __repr__(self) -> str:
        return f"VelocitySet({self.name})"


_SETS: dict[str, VelocitySet] = {}


def velocity_set(name: str) -> VelocitySet:
    if name not in _SETS:
        _SETS[name] = VelocitySet(name)
    return _SETS[name]


# ---------------------------------------------------------------------------
# moment polynomials, evaluated exactly


def _q5_polynomials():
    # order: T, jx, jy, E, XX
    return [
        ("T", lambda x, y: Fraction(1)),
        ("jx", lambda x, y: x),
        ("jy", lambda x, y: y),
        ("E", lambda x, y: 5 * (x * x + y * y) - 4),
        ("XX", lambda x, y: x * x - y * y),
    ]


def _q9_polynomials():
    # Lallemand-Luo ordering: rho, E, eps, jx, qx, jy, qy, XX, XY
    def r2(x, y):
        return x * x + y * y

    return [
        ("rho", lambda x, y: Fraction(1)),
        ("E", lambda x, y: -4 + 3 * r2(x, y)),
        ("eps", lambda x, y: 4 + r2(x, y) * (Fraction(-21, 2) + Fraction(9, 2) * r2(x, y))),
        ("jx", lambda x, y: x),
        ("qx", lambda x, y: x * (3 * r2(x, y) - 5)),
        ("jy", lambda x, y: y),
        ("qy", lambda x, y: y * (3 * r2(x, y) - 5)),
        ("XX", lambda x, y: x * x - y * y),
        ("XY", lambda x, y: x * y),
    ]


def _q13_polynomials():
    # ordering: rho, E, eps, varpi, jx, jy, qx, qy, rx, ry, XX, XY, XXe.
    # The cubic vector polynomial uses x*(r^2 - 3): this is the convention
    # consistent with the closure relations and the order-1 symbol matrix
    # (the energy flux coefficient (39 + 13 c1 + 2 E0)/2 only comes out with
    # this sign), see the cross-checks in tests/test_d2q13.py.
    def r2(x, y):
        return x * x + y * y

    def rpoly(x, y):
        s = r2(x, y)
        return Fraction(101, 6) + s * (Fraction(-63, 4) + Fraction(35, 12) * s)

    return [
        ("rho", lambda x, y: Fraction(1)),
        ("E", lambda x, y: -28 + 13 * r2(x, y)),
        ("eps", lambda x, y: 140 + r2(x, y) * (Fraction(-361, 2) + Fraction(77, 2) * r2(x, y))),
        ("varpi", lambda x, y: -12 + r2(x, y) * (Fraction(581, 12) + r2(x, y) * (Fraction(-273, 8) + Fraction(137, 24) * r2(x, y)))),
        ("jx", lambda x, y: x),
        ("jy", lambda x, y: y),
        ("qx", lambda x, y: x * (r2(x, y) - 3)),
        ("qy", lambda x, y: y * (r2(x, y) - 3)),
        ("rx", lambda x, y: x * rpoly(x, y)),
        ("ry", lambda x, y: y * rpoly(x, y)),
        ("XX", lambda x, y: x * x - y * y),
        ("XY", lambda x, y: x * y),
        ("XXe", lambda x, y: (x * x - y * y) * (Fraction(-65, 12) + Fraction(17, 12) * r2(x, y))),
    ]


_POLYNOMIALS = {
    "D2Q5": _q5_polynomials,
    "D2Q9": _q9_polynomials,
    "D2Q13": _q13_polynomials,
}

# conserved moments: D2Q5 transports one scalar, D2Q9 mass and momentum,
# D2Q13 additionally conserves the energy moment
_CONSERVED = {
    "D2Q5": (0,),
    "D2Q9": (0, 3, 5),
    "D2Q13": (0, 1, 4, 5),
}


@dataclass
class MomentBasis:
    """Invertible moment matrix M[k, j] = p_k(v_j) with cached inverse."""

    vset: VelocitySet
    names: list[str]
    matrix: np.ndarray
    inverse: np.ndarray
    conserved: tuple[int, ...]
    matrix_exact: list[list[Fraction]] = field(repr=False, default_factory=list)

    @property
    def q(self) -> int:
        return self.vset.q

    def index(self, name: str) -> int:
        return self.names.index(name)


_BASES: dict[str, MomentBasis] = {}


def build_moment_basis(vset: VelocitySet) -> MomentBasis:
    """Evaluate the stencil's polynomial family and invert the matrix.

    A singular matrix means the polynomial table was transcribed wrong,
    so it raises LatticeError rather than returning garbage.
    """
    if vset.name in _BASES:
        return _BASES[vset.name]
    polys = _POLYNOMIALS[vset.name]()
    names = [name for name, _ in polys]
    exact = [
        [p(Fraction(int(vx)), Fraction(int(vy))) for vx, vy in vset.velocities]
        for _, p in polys
    ]
    matrix = np.array([[float(v) for v in row] for row in exact], dtype=np.float64)
    try:
        inverse = np.linalg.solve(matrix, np.eye(vset.q))
    except np.linalg.LinAlgError as exc:
        raise LatticeError(f"{vset.name} moment matrix is singular: {exc}") from exc
    residual = np.abs(matrix @ inverse - np.eye(vset.q)).max()
    if not residual < 1e-12:
        raise LatticeError(
            f"{vset.name} moment matrix badly conditioned, |M M^-1 - I| = {residual:.3e}"
        )
    basis = MomentBasis(
        vset=vset,
        names=names,
        matrix=matrix,
        inverse=inverse,
        conserved=_CONSERVED[vset.name],
        matrix_exact=exact,
    )
    _BASES[vset.name] = basis
    return basis


def orthogonality_failures(basis: MomentBasis, tol: float = 1e-9):
    """Pairs of moment rows that are not orthogonal under unit weights.

    The D2Q13 family is advertised as orthogonal but the inner-product
    weight is not part of the artifact contract; failures are reported,
    never asserted away.
    """
    failures = []
    m = basis.matrix
    for a in range(basis.q):
        for b in range(a + 1, basis.q):
            dot = float(np.dot(m[a], m[b]))
            if abs(dot) >= tol:
                failures.append((basis.names[a], basis.names[b], dot))
    return failures


# ---------------------------------------------------------------------------
# populations


class PopulationField:
    """Per-velocity population values on a rectangular grid, one array
    per velocity index (structure of arrays, shape (q, nx, ny))."""

    def __init__(self, q: int, nx: int, ny: int):
        self.q = q
        self.nx = nx
        self.ny = ny
        self.data = np.zeros((q, nx, ny), dtype=np.float64)

    def flat(self) -> np.ndarray:
        """(q, nx*ny) view sharing memory with data."""
        return self.data.reshape(self.q, self.nx * self.ny)

    def check_finite(self, step: int | None = None, label: str = "field"):
        # summing is cheap and poisons on any non-finite entry
        total = float(np.sum(self.data))
        if not np.isfinite(total):
            bad = int(np.count_nonzero(~np.isfinite(self.data)))
            raise InstabilityError(
                f"{label}: {bad} non-finite population values"
                + (f" at step {step}" if step is not None else ""),
                step=step,
            )

    def total(self) -> float:
        return float(np.sum(self.data))


# ---------------------------------------------------------------------------
# relaxation


@dataclass
class RelaxationVector:
    """Per-moment relaxation rates; zero exactly on conserved moments."""

    s: np.ndarray
    conserved: tuple[int, ...]

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        for k, rate in enumerate(self.s):
            if k in self.conserved:
                if rate != 0.0:
                    raise ValueError(f"conserved moment {k} must have rate 0, got {rate}")
            elif not (0.0 < rate < 2.0):
                raise ValueError(f"relaxation rate s[{k}] = {rate} outside (0, 2)")


def make_rates(basis: MomentBasis, default: float = 1.2, **overrides: float) -> RelaxationVector:
    """Relaxation vector with per-moment-name overrides, conserved pinned to 0."""
    s = np.full(basis.q, default, dtype=np.float64)
    for name, value in overrides.items():
        s[basis.index(name)] = value
    s[list(basis.conserved)] = 0.0
    return RelaxationVector(s=s, conserved=basis.conserved)


def henon_sigma(s: float) -> float:
    """Henon coefficient sigma = 1/s - 1/2 through which rates enter transport."""
    return 1.0 / s - 0.5


# ---------------------------------------------------------------------------
# kernels


def moments_from_populations(basis: MomentBasis, f: np.ndarray) -> np.ndarray:
    """m = M f, applied along the leading (velocity) axis."""
    return basis.matrix @ f


def populations_from_moments(basis: MomentBasis, m: np.ndarray) -> np.ndarray:
    """Exact inverse of moments_from_populations (round trip ~1e-12)."""
    return basis.inverse @ m


def stream(data: np.ndarray, vset: VelocitySet, periodic=(True, True)) -> np.ndarray:
    """Propagate f_j(x) to x + v_j.

    Periodic axes wrap.  On non-periodic axes the slots that would have
    wrapped around are set to NaN: they are populations entering from
    outside the domain and must be filled by a boundary rule, and NaN
    makes a missing fill impossible to overlook.
    """
    out = np.empty_like(data)
    px, py = periodic
    for j, (vx, vy) in enumerate(vset.velocities):
        out[j] = np.roll(data[j], shift=(vx, vy), axis=(0, 1))
        if not px and vx != 0:
            if vx > 0:
                out[j, :vx, :] = np.nan
            else:
                out[j, vx:, :] = np.nan
        if not py and vy != 0:
            if vy > 0:
                out[j, :, :vy] = np.nan
            else:
                out[j, :, vy:] = np.nan
    return out


def relax_moments(m: np.ndarray, meq: np.ndarray, rates: RelaxationVector) -> None:
    """In-place MRT relaxation m_k += s_k (m_k^eq - m_k)."""
    s = rates.s
    m += s[:, None] * (meq - m)


def mrt_collide(field: PopulationField, basis: MomentBasis, equilibrium, rates: RelaxationVector) -> None:
    """Generic force-free MRT collision.

    `equilibrium` maps the current moment array (q, n) to the full
    equilibrium moment array; conserved entries of the result are ignored
    because their rates are zero.
    """
    f = field.flat()
    m = moments_from_populations(basis, f)
    meq = equilibrium(m)
    relax_moments(m, meq, rates)
    f[:] = populations_from_moments(basis, m)
