"""slipflow: simplicial-current calculus and a quasi-static elasto-plasticity
simulator driven by discrete dislocation line motion.

Layers, bottom up:

* ``exterior``      -- k-vectors, wedge / Hodge / interior products.
* ``chains``        -- polyhedral k-currents (oriented simplices + multiplicities).
* ``complexes``     -- background simplicial complexes and the flat-norm LP.
* ``spacetime``     -- surfaces in [0,T] x R^3: slicing, variation, surgery.
* ``dislocations``  -- Burgers systems, slip families, the plastic flow map.
* ``grid``/``elastic`` -- box grids, mollification, incompatible-field and
  displacement solves.
* ``energetics``/``catalog``/``evolution`` -- dissipation, core energy and the
  time-incremental minimization scheme.
* ``scenario``/``cli`` -- run configuration and the command-line harness.

All quantities are in nondimensional lattice units.
"""

from .exterior import MultiVector, wedge, hodge_star, interior, pairing
from .chains import LineTension, SimplicialCurrent, polygon_loop
from .spacetime import (SpaceTimeCurrent, concatenate, deformation_distance,
                        rescale, ruled_sweep, static_cylinder)
from .dislocations import (DislocationState, PlasticDistortion, SlipSheet,
                           consistency_residual, forward, initial_fill_sheet,
                           sweep_sheet)
from .grid import DomainGrid, surface_shear_load, body_load
from .elastic import ElasticSolver, IsotropicElasticity
from .energetics import (CoreEnergy, DissipationPotential, SlipFamily,
                         dissipation)
from .catalog import MoveCatalog
from .evolution import (EnergyModel, EvolutionError, EvolutionTrace,
                        epsilon_study, initial_state, round_multiplicities,
                        run_evolution)
from .scenario import Scenario, ScenarioError, parse_scenario

__all__ = [
    "MultiVector", "wedge", "hodge_star", "interior", "pairing",
    "LineTension", "SimplicialCurrent", "polygon_loop",
    "SpaceTimeCurrent", "concatenate", "deformation_distance", "rescale",
    "ruled_sweep", "static_cylinder",
    "DislocationState", "PlasticDistortion", "SlipSheet",
    "consistency_residual", "forward", "initial_fill_sheet", "sweep_sheet",
    "DomainGrid", "surface_shear_load", "body_load",
    "ElasticSolver", "IsotropicElasticity",
    "CoreEnergy", "DissipationPotential", "SlipFamily", "dissipation",
    "MoveCatalog",
    "EnergyModel", "EvolutionError", "EvolutionTrace", "epsilon_study",
    "initial_state", "round_multiplicities", "run_evolution",
    "Scenario", "ScenarioError", "parse_scenario",
]

__version__ = "0.1.0"
