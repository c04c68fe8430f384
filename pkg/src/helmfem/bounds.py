"""Computable reliability constants.

The guaranteed prefactor c_up derives from a computable bound on the
wavenumber-scaled best-approximation factor of adjoint solutions.  Four
geometry cases are supported: star-shaped scattering, free-space
propagation on a convex domain, and interior problems on domains with
known Dirichlet Laplace eigenvalues (general and convex).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .mesh import DIRICHLET

DEFAULT_INTERPOLATION_CONSTANT = 0.493 / np.sqrt(2)   # right isosceles meshes


class Case(Enum):
    SCATTERING = "1a"        # Dirichlet obstacle inside an absorbing box
    FREE_SPACE = "1b"        # convex domain, no Dirichlet boundary
    INTERIOR = "2a"          # pure Dirichlet problem
    INTERIOR_CONVEX = "2b"   # pure Dirichlet problem on a convex domain


class AdmissibilityError(ValueError):
    pass


@dataclass
class BoundContext:
    case: Case
    k: float
    h_domain: float                  # diameter of the computational domain
    h: float = None                  # mesh size (cases 1b, 2b)
    degree: int = 1
    c_stab: float = None             # cases 1a, 1b
    c_interp: float = DEFAULT_INTERPOLATION_CONSTANT
    beta: float = 0.0                # exponent of the 1/p^beta factor
    eigenvalues: np.ndarray = None   # cases 2a, 2b
    star_point: np.ndarray = field(default=None)


def _boundary_data(mesh, x0):
    """Per boundary edge: endpoints relative to x0, outward normal, tag."""
    from .solver import edge_geometry
    out = []
    for eid, tag in zip(mesh.boundary_edge_ids, mesh.boundary_tags):
        _, (a, b), _, normal = edge_geometry(mesh, int(eid))
        out.append((a - x0, b - x0, normal, tag))
    return out


def stability_constant(mesh, x0):
    """Geometric stability constant of a star-shaped configuration.

    (1/h_Omega) [ sup_Omega |x - x0| + sup_{Gamma_A} (2 (x - x0).n
    + |(x - x0) x n|^2 / ((x - x0).n)) ], evaluated over polygon vertices
    and edge endpoints, where it is attained for piecewise-affine
    boundaries.  Raises when x0 is inadmissible: (x - x0).n must be <= 0
    on Dirichlet edges and > 0 on absorbing edges."""
    x0 = np.asarray(x0, dtype=float)
    rel = mesh.vertices - x0
    sup_dist = float(np.linalg.norm(rel, axis=1).max())
    h_domain = domain_diameter(mesh)
    sup_bnd = -np.inf
    for ra, rb, normal, tag in _boundary_data(mesh, x0):
        da, db = float(ra @ normal), float(rb @ normal)
        if tag == DIRICHLET:
            if max(da, db) > 1e-12 * h_domain:
                raise AdmissibilityError(
                    f"(x - x0) . n = {max(da, db):.3e} > 0 on a Dirichlet edge")
            continue
        if min(da, db) <= 1e-12 * h_domain:
            raise AdmissibilityError(
                f"(x - x0) . n = {min(da, db):.3e} <= 0 on an absorbing edge")
        # n is constant on the edge and the expression is convex in the
        # tangential coordinate, so the endpoints attain the supremum
        for r, d in ((ra, da), (rb, db)):
            cross = r[0] * normal[1] - r[1] * normal[0]
            sup_bnd = max(sup_bnd, 2 * d + cross ** 2 / d)
    if not np.isfinite(sup_bnd):
        raise AdmissibilityError("no absorbing boundary present")
    return (sup_dist + sup_bnd) / h_domain


def domain_diameter(mesh):
    hull = mesh.vertices[sorted({int(v) for v in mesh.boundary_edges.ravel()})]
    return float(max(np.linalg.norm(p - q)
                     for i, p in enumerate(hull) for q in hull[i + 1:]))


def square_stability_constant():
    """Closed form for a square centered at the star point."""
    return (3 + np.sqrt(2)) / (2 * np.sqrt(2))


def rectangle_eigenvalues(a, b, count):
    """First Dirichlet Laplace eigenvalues of an a x b rectangle, sorted.

    lambda_{mn} = pi^2 (m^2/a^2 + n^2/b^2); the enumeration range is grown
    until the next omitted candidate exceeds the largest returned value."""
    if a <= 0 or b <= 0:
        raise ValueError("rectangle sides must be positive")
    m_max = max(2, int(np.ceil(np.sqrt(count))) + 1)
    while True:
        m = np.arange(1, m_max + 1)
        lam = np.pi ** 2 * (m[:, None] ** 2 / a ** 2 + m[None, :] ** 2 / b ** 2)
        vals = np.sort(lam.ravel())[:count]
        next_min = np.pi ** 2 * ((m_max + 1) ** 2 / max(a, b) ** 2 + 1 / min(a, b) ** 2)
        if len(vals) >= count and next_min > vals[-1]:
            return vals
        m_max *= 2


def approximation_factor_bound(ctx):
    """Computable upper bound on the adjoint best-approximation factor."""
    k, d = ctx.k, 2
    if ctx.case is Case.SCATTERING:
        A = (d - 1) + ctx.c_stab * k * ctx.h_domain
        return float(np.sqrt(A + A ** 2))
    if ctx.case is Case.FREE_SPACE:
        return float(ctx.c_interp * (d + ctx.c_stab * k * ctx.h_domain)
                     * k * ctx.h / ctx.degree ** ctx.beta)
    lam = np.asarray(ctx.eigenvalues, dtype=float)
    gaps = np.abs(lam - k ** 2)
    if gaps.min() <= 1e-12 * k ** 2:
        raise ValueError(
            f"k^2 = {k ** 2:.6g} coincides with a Dirichlet eigenvalue; "
            "the interior problem bound is unbounded")
    if ctx.case is Case.INTERIOR:
        return float(k * np.max(np.sqrt(lam) / gaps))
    if ctx.case is Case.INTERIOR_CONVEX:
        return float(ctx.c_interp * (1 + k ** 2 / gaps.min())
                     * k * ctx.h / ctx.degree ** ctx.beta)
    raise ValueError(f"unknown case {ctx.case}")


def theta_tilde_1(t):
    """Reliability overhead sqrt(s + s^2 + t^2) - sqrt(2), s = 1/2 +
    sqrt(1/4 + t^2); vanishes at t = 0."""
    if t < 0:
        raise ValueError("argument must be nonnegative")
    s = 0.5 + np.sqrt(0.25 + t ** 2)
    return float(np.sqrt(s + s ** 2 + t ** 2) - np.sqrt(2))


def theta_1(t):
    if t < 0:
        raise ValueError("argument must be nonnegative")
    return float(np.sqrt(2 * t + 2 * t ** 2))


def theta_tilde_2(t, t_tilde):
    """sqrt(s^2 + t^2 + ttilde^2) - 1 with the same s; not used by the
    command line (its second argument has no computable bound)."""
    if t < 0 or t_tilde < 0:
        raise ValueError("arguments must be nonnegative")
    s = 0.5 + np.sqrt(0.25 + t ** 2)
    return float(np.sqrt(s ** 2 + t ** 2 + t_tilde ** 2) - 1.0)


def theta_2(t, t_tilde):
    if t < 0 or t_tilde < 0:
        raise ValueError("arguments must be nonnegative")
    return float(np.sqrt(t + 2 * t ** 2 + t_tilde ** 2))


def reliability_prefactor(t, t_tilde=None):
    """c_up: sqrt(2) + theta_tilde_1, improved by 1 + theta_tilde_2 when a
    boundary-adjoint factor is available."""
    c = np.sqrt(2) + theta_tilde_1(t)
    if t_tilde is not None:
        c = min(c, 1.0 + theta_tilde_2(t, t_tilde))
    return float(c)


def plane_wave_constants(k, h, h_domain=2 * np.sqrt(2), degree=1, beta=0.0,
                         c_interp=DEFAULT_INTERPOLATION_CONSTANT):
    """(c_ba, c_up) of the free-space configuration on the square."""
    ctx = BoundContext(case=Case.FREE_SPACE, k=k, h_domain=h_domain, h=h,
                       degree=degree, beta=beta,
                       c_stab=square_stability_constant(), c_interp=c_interp)
    c_ba = approximation_factor_bound(ctx)
    return c_ba, reliability_prefactor(c_ba)


def scattering_constants(k, h_domain=2 * np.sqrt(2), c_stab=None):
    """(c_ba, c_up) of the obstacle configuration."""
    ctx = BoundContext(case=Case.SCATTERING, k=k, h_domain=h_domain,
                       c_stab=square_stability_constant() if c_stab is None
                       else c_stab)
    c_ba = approximation_factor_bound(ctx)
    return c_ba, reliability_prefactor(c_ba)
