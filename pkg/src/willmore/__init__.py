"""Numerical verification of Willmore-type inequalities via exterior
electrostatic potentials.

Pipeline: mesh a closed surface (`geometry`), solve the exterior Dirichlet
problem by a single-layer boundary-element method (`potential`), transport
the boundary mesh to equipotential levels (`levelset`), then evaluate the
divergence-form functionals (`functionals`) and the boundary inequalities
(`inequalities`).  `oracles` holds the independent closed forms everything
is tested against.
"""

from .shapes import Sphere, Ellipsoid, PerturbedSphere, Torus, shape_from_dict
from .geometry import (SurfaceMesh, make_surface, surface_integral,
                       mesh_curvature, write_off, read_off)
from .potential import (PotentialSolution, FieldSample, solve_exterior_potential,
                        eval_field, eval_field_batch, capacity,
                        boundary_gradient_norm, dump_solution, load_solution)
from .levelset import (LevelSetMesh, boundary_level, transport_to_level,
                       transport_sweep, level_quantities, umbilicity_spread)
from .functionals import (ParamSet, coeff_F, coeff_G, eval_Z_div, z_divergence,
                          functional_H, functional_F_beta, functional_F_beta_prime,
                          FunctionalCurve, monotonicity_scan, curve_from_levels,
                          integral_identity_check, geometric_tau_grid,
                          sample_exterior_points)
from .inequalities import (InequalityReport, check_parametric, check_willmore,
                           check_generalized_willmore, check_weighted_minkowski,
                           check_quantitative_willmore, check_geomAB, check_all,
                           INEQUALITY_IDS)
from . import oracles

__version__ = "0.1.0"
