"""Two-dimensional thermal-flow solvers and natural-convection benchmarks.

Three interchangeable engines on the same rectangular lattice:

* a coupled D2Q9 (fluid) + D2Q5 (temperature) lattice Boltzmann scheme
  for the Boussinesq system,
* a single-distribution compressible D2Q13 lattice Boltzmann scheme with
  four conserved moments (mass, energy, momentum),
* an elementary finite-difference compressible Navier-Stokes solver
  (centered differences, forward Euler).

The `cases` module wires the engines into reproducible verification
setups (thermal waves, buoyancy, transverse waves, Couette, Poiseuille,
heated cavity) and `cli` exposes them as a config-driven command line.
"""

from thermoflow.lattice import (
    VelocitySet,
    MomentBasis,
    PopulationField,
    RelaxationVector,
    build_moment_basis,
    moments_from_populations,
    populations_from_moments,
    stream,
    mrt_collide,
)

__version__ = "0.1.0"

__all__ = [
    "VelocitySet",
    "MomentBasis",
    "PopulationField",
    "RelaxationVector",
    "build_moment_basis",
    "moments_from_populations",
    "populations_from_moments",
    "stream",
    "mrt_collide",
]
