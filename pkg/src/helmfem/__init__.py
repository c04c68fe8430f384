"""Helmholtz finite elements with equilibrated-flux a posteriori error
estimation, guaranteed reliability constants, and adaptive refinement."""

from .adaptivity import AdaptState, adapt_loop, mark, resolved_regime
from .bounds import (BoundContext, Case, approximation_factor_bound,
                     plane_wave_constants, rectangle_eigenvalues,
                     reliability_prefactor, scattering_constants,
                     stability_constant, theta_tilde_1, theta_tilde_2)
from .equilibration import (FluxField, PatchProblem, ProjectedData,
                            build_patch_problem, equilibrate, project_data,
                            solve_patch)
from .estimator import (EstimateReport, energy_norm_analytic,
                        energy_norm_discrete, energy_norm_error, eta_local,
                        osc_local, report)
from .mesh import (ABSORBING, DIRICHLET, ElementGeometry, Mesh, VertexPatch,
                   build_cartesian_mesh, element_geometry, load_mesh, refine,
                   save_mesh, uniform_refine, validate_mesh, vertex_patch)
from .quadrature import QuadRule, edge_rule, triangle_rule
from .solver import (DiscreteField, HelmholtzProblem, LinearSystem,
                     best_approximation, plane_wave, solve_helmholtz,
                     solve_linear)
from .spaces import (LagrangeSpace, build_lagrange_space, build_rt_frame,
                     eval_lagrange_basis, eval_rt_basis, hat_function)

__all__ = [name for name in dir() if not name.startswith('_')]
__version__ = "0.1.0"
