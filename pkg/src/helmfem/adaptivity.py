"""Estimator-driven adaptive refinement loop.

Each iteration solves, equilibrates, estimates against a higher-degree
reference solution on the same mesh, marks the top decile of elements by
local estimator, and bisects them with conforming closure.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .equilibration import equilibrate, project_data
from .estimator import report
from .mesh import refine
from .solver import solve_helmholtz

MARK_FRACTION = 0.10


@dataclass(eq=False)
class AdaptState:
    iteration: int
    mesh: object
    u_h: object
    report: object
    marked: np.ndarray
    n_elements: int
    h_min: float
    h_max: float


def mark(eta_K, fraction=MARK_FRACTION):
    """Indices of the ceil(fraction N) elements with largest estimator,
    ties broken by ascending element index."""
    eta_K = np.asarray(eta_K)
    count = math.ceil(fraction * len(eta_K))
    order = np.argsort(-eta_K, kind='stable')
    return np.sort(order[:count])


def resolved_regime(mesh, k, degree):
    """kh / (2 pi p) <= 1 for the largest element."""
    return k * mesh.element_size().max() / (2 * np.pi * degree) <= 1.0


def adapt_loop(problem, iterations, p_ref=None, fraction=MARK_FRACTION,
               c_ba=None, c_up=None, on_iteration=None):
    """Run the adaptive loop; returns the list of per-iteration states.

    The reference solution is recomputed on every mesh with elements of
    degree p_ref (default min(p + 3, 6)).  Terminates early when the
    estimator vanishes."""
    p = problem.degree
    if p_ref is None:
        p_ref = min(p + 3, 6)
    if p_ref <= p:
        raise ValueError("reference degree must exceed the solution degree")
    states = []
    mesh = problem.mesh
    for it in range(iterations + 1):
        prob = replace(problem, mesh=mesh)
        u_h = solve_helmholtz(prob)
        proj = project_data(prob)
        flux = equilibrate(u_h, proj, prob.k)
        ref_prob = replace(prob, degree=p_ref)
        u_ref = solve_helmholtz(ref_prob)
        rep = report(prob, u_h, flux, proj, reference=u_ref,
                     c_ba=c_ba, c_up=c_up)
        sizes = mesh.element_size()
        if it < iterations and rep.eta > 0:
            marked = mark(rep.eta_K, fraction)
        else:
            marked = np.empty(0, dtype=np.int64)
        state = AdaptState(iteration=it, mesh=mesh, u_h=u_h, report=rep,
                           marked=marked, n_elements=mesh.num_triangles,
                           h_min=float(sizes.min()), h_max=float(sizes.max()))
        states.append(state)
        if on_iteration is not None:
            on_iteration(state)
        if len(marked) == 0:
            break
        mesh = refine(mesh, marked)
    return states
