"""Wall rules for the lattice Boltzmann schemes.

All rules share one mechanic: after streaming, every population slot that
would have been fed from outside the domain is refilled from the
post-collision value of the opposite velocity at the same node,

* bounce-back (velocity Dirichlet):      f_j = f*_jbar + (feq_j - feq_jbar)
* anti-bounce-back (scalar Dirichlet):   f_j = -f*_jbar + (feq_j + feq_jbar)
* adiabatic (zero normal flux):          f_j = f*_jbar

where feq is the owning scheme's equilibrium evaluated at the wall state
(wall velocity, wall temperature/energy, extrapolated density).  The odd
part of the wall equilibrium reproduces the classical moving-wall
momentum correction; the even part is the projection 2(p_rho rho +
p_XX XX + p_E E) used by the mixed D2Q13 rule.  The wall itself sits
half-way between the last fluid node and the first solid node.

The mixed D2Q13 rule bounce-backs every velocity with a non-zero
component parallel to the wall and anti-bounce-backs the remaining
(wall-normal) velocities.  Speed-2 velocities reach two layers deep, so
the fill is applied per layer; the same wall state is used for both,
which is the implemented interpretation of the rule's generalization to
multi-speed stencils (isolated here for easy revision).

The finite-difference solver does not use these fills; its adiabatic
walls are mirror ghost nodes, implemented in `fdns`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from thermoflow.lattice import VelocitySet

KINDS = ("bounce_back", "anti_bounce_back", "mixed_d2q13", "adiabatic", "periodic")

# axis the wall is normal to, and the inward direction along that axis
_SIDES = {
    "left": (0, +1),
    "right": (0, -1),
    "bottom": (1, +1),
    "top": (1, -1),
}


class BoundaryConfigError(ValueError):
    pass


@dataclass
class BoundarySegment:
    """One wall segment: a side, a node range along it, and the rule."""

    side: str
    kind: str
    lo: int = 0
    hi: int | None = None  # exclusive; None means the full extent
    wall_velocity: tuple[float, float] = (0.0, 0.0)
    wall_temperature: float = 0.0
    wall_E: float | None = None
    wall_XX: float | None = None

    def __post_init__(self):
        if self.side not in _SIDES:
            raise BoundaryConfigError(f"unknown side {self.side!r}")
        if self.kind not in KINDS:
            raise BoundaryConfigError(f"unknown boundary kind {self.kind!r}")

    @property
    def axis(self) -> int:
        return _SIDES[self.side][0]

    @property
    def inward(self) -> int:
        return _SIDES[self.side][1]

    def node_range(self, nx: int, ny: int) -> tuple[int, int]:
        extent = ny if self.axis == 0 else nx
        hi = extent if self.hi is None else self.hi
        if not (0 <= self.lo < hi <= extent):
            raise BoundaryConfigError(
                f"segment range [{self.lo}, {hi}) outside wall extent {extent}"
            )
        return self.lo, hi

    def layer_index(self, layer: int, nx: int, ny: int) -> int:
        extent = nx if self.axis == 0 else ny
        return layer if self.inward > 0 else extent - 1 - layer

    def moving(self) -> bool:
        return self.wall_velocity[0] != 0.0 or self.wall_velocity[1] != 0.0


def validate_segments(segments: list[BoundarySegment], nx: int, ny: int) -> None:
    """Reject overlapping segments on the same side."""
    by_side: dict[str, list[tuple[int, int]]] = {}
    for seg in segments:
        if seg.kind == "periodic":
            continue
        rng = seg.node_range(nx, ny)
        for other in by_side.get(seg.side, []):
            if rng[0] < other[1] and other[0] < rng[1]:
                raise BoundaryConfigError(
                    f"overlapping segments on side {seg.side}: {other} and {rng}"
                )
        by_side.setdefault(seg.side, []).append(rng)


def missing_directions(vset: VelocitySet, seg: BoundarySegment, layer: int) -> np.ndarray:
    """Velocity indices whose post-stream value at this layer came from
    outside the domain (inward component exceeds the layer depth)."""
    comp = vset.velocities[:, seg.axis] * seg.inward
    return np.nonzero(comp >= layer + 1)[0]


def _slab(data: np.ndarray, seg: BoundarySegment, j: int, pos: int, lo: int, hi: int):
    if seg.axis == 0:
        return data[j, pos, lo:hi]
    return data[j, lo:hi, pos]


def _set_slab(data: np.ndarray, seg: BoundarySegment, j: int, pos: int, lo: int, hi: int, value):
    if seg.axis == 0:
        data[j, pos, lo:hi] = value
    else:
        data[j, lo:hi, pos] = value


def apply_segment(
    fnew: np.ndarray,
    fstar: np.ndarray,
    vset: VelocitySet,
    seg: BoundarySegment,
    feq_wall: np.ndarray | None,
) -> None:
    """Fill the missing post-stream populations for one segment.

    fstar is the post-collision, pre-stream array (read only), fnew the
    post-stream array being completed.  feq_wall is the wall-state
    equilibrium (q, n_wall_nodes) supplied by the owning scheme, or None
    when the rule needs no wall data (plain reflection).

    The half-way geometry only describes links cut at their middle, so
    bounce-back and anti-bounce-back apply to the speed-1 fills.  The
    speed-2 wall-normal populations of the mixed rule are instead
    rebuilt by linear extrapolation of the same-direction post-collision
    populations from the two nearest fluid layers: that closure is exact
    for the steady linear channel profiles and, unlike reusing the wall
    projection for those links, leaves no boundary mode above unit
    modulus (an eigenvalue scan of the wall-included step operator shows
    the projection variants amplify reflected acoustic waves by ~1% per
    step, a limit cycle in practice).
    """
    nx, ny = fnew.shape[1], fnew.shape[2]
    lo, hi = seg.node_range(nx, ny)
    par_axis = 1 - seg.axis
    for layer in range(vset.reach):
        pos = seg.layer_index(layer, nx, ny)
        for j in missing_directions(vset, seg, layer):
            o = int(vset.opposite[j])
            src = _slab(fstar, seg, o, pos, lo, hi)
            if seg.kind == "adiabatic":
                _set_slab(fnew, seg, j, pos, lo, hi, src)
                continue
            if seg.kind == "mixed_d2q13":
                normal_speed = abs(int(vset.velocities[j, seg.axis]))
                if vset.velocities[j, par_axis] != 0:
                    rule = "bb"
                elif normal_speed == 1:
                    rule = "abb"
                else:
                    # virtual source node sits normal_speed - layer nodes out
                    d = normal_speed - layer
                    p0 = seg.layer_index(0, nx, ny)
                    p1 = seg.layer_index(1, nx, ny)
                    f0 = _slab(fstar, seg, j, p0, lo, hi)
                    f1 = _slab(fstar, seg, j, p1, lo, hi)
                    _set_slab(fnew, seg, j, pos, lo, hi, (1 + d) * f0 - d * f1)
                    continue
            elif seg.kind == "bounce_back":
                rule = "bb"
            elif seg.kind == "anti_bounce_back":
                rule = "abb"
            else:
                raise BoundaryConfigError(f"segment kind {seg.kind!r} is not a fill rule")
            if rule == "bb":
                if feq_wall is None or (not seg.moving()):
                    # resting wall: exact reflection, no correction term
                    _set_slab(fnew, seg, j, pos, lo, hi, src)
                else:
                    _set_slab(fnew, seg, j, pos, lo, hi, src + (feq_wall[j] - feq_wall[o]))
            else:
                if feq_wall is None:
                    raise BoundaryConfigError(
                        f"{seg.kind} on side {seg.side} needs a wall equilibrium"
                    )
                _set_slab(fnew, seg, j, pos, lo, hi, -src + (feq_wall[j] + feq_wall[o]))


def wall_flux(
    fstar: np.ndarray,
    fnew: np.ndarray,
    vset: VelocitySet,
    seg: BoundarySegment,
    weights: np.ndarray | None = None,
) -> float:
    """Net amount of a population-weighted quantity crossing the wall
    plane in one step (positive = leaving the domain).

    weights[j] is the amount carried by one unit of f_j (ones for the
    scalar/mass content, the energy polynomial row for energy flux).
    Plain bounce-back yields exactly zero by construction; the quadrature
    is still evaluated numerically as the §9-style diagnostic.
    """
    nx, ny = fnew.shape[1], fnew.shape[2]
    lo, hi = seg.node_range(nx, ny)
    w = np.ones(vset.q) if weights is None else np.asarray(weights, dtype=np.float64)
    total = 0.0
    for layer in range(vset.reach):
        pos = seg.layer_index(layer, nx, ny)
        for j in missing_directions(vset, seg, layer):
            o = int(vset.opposite[j])
            outgoing = float(np.sum(_slab(fstar, seg, o, pos, lo, hi)))
            incoming = float(np.sum(_slab(fnew, seg, j, pos, lo, hi)))
            total += w[o] * outgoing - w[j] * incoming
    return total


def extrapolate_wall_density(rho: np.ndarray, seg: BoundarySegment,
                             midpoint: float = 0.5) -> np.ndarray:
    """Linear 2-point extrapolation of the density to a position
    `midpoint` node spacings outside the first fluid node (0.5 is the
    half-way wall), per node along the segment."""
    nx, ny = rho.shape
    lo, hi = seg.node_range(nx, ny)
    if (nx if seg.axis == 0 else ny) < 2:
        raise BoundaryConfigError("density extrapolation needs at least 2 interior nodes")
    p0 = seg.layer_index(0, nx, ny)
    p1 = seg.layer_index(1, nx, ny)
    if seg.axis == 0:
        first, second = rho[p0, lo:hi], rho[p1, lo:hi]
    else:
        first, second = rho[lo:hi, p0], rho[lo:hi, p1]
    return (1.0 + midpoint) * first - midpoint * second


def boundary_profile(field: np.ndarray, seg: BoundarySegment) -> np.ndarray:
    """Values of a node field along the segment's first fluid layer."""
    nx, ny = field.shape
    lo, hi = seg.node_range(nx, ny)
    p0 = seg.layer_index(0, nx, ny)
    return field[p0, lo:hi] if seg.axis == 0 else field[lo:hi, p0]
