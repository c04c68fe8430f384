"""Helmholtz discretization: assembly, solve, and reference fields.

The sesquilinear form is -k^2 (u, v) - ik (u, v)_{Gamma_A} + (grad u,
grad v); with a real basis the matrix is complex symmetric (not
Hermitian).  Dirichlet dofs are eliminated by row/column removal.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import ABSORBING
from .quadrature import edge_rule, triangle_rule
from .spaces import build_lagrange_space, eval_lagrange_basis

DEFAULT_DATA_DEGREE_FLOOR = 12


class SolverError(Exception):
    pass


@dataclass(eq=False)
class HelmholtzProblem:
    """-k^2 u - Delta u = f, u = 0 on Dirichlet edges, du/dn - iku = g
    on absorbing edges.  f maps points (n, 2) to complex values; g maps
    (points, unit outward normal) to complex values per boundary edge."""
    mesh: object
    k: float
    degree: int
    f: object = None
    g: object = None
    quad_degree: int = None   # override for data/error quadrature

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if not 1 <= self.degree <= 6:
            raise ValueError("degree must be in 1..6")

    @property
    def data_quad_degree(self):
        if self.quad_degree is not None:
            return self.quad_degree
        return max(2 * self.degree + 2, DEFAULT_DATA_DEGREE_FLOOR)


@dataclass(eq=False)
class DiscreteField:
    space: object
    coefficients: np.ndarray


@dataclass(eq=False)
class LinearSystem:
    matrix: object                 # sparse, free dofs only
    rhs: np.ndarray
    space: object
    free: np.ndarray
    symmetric: bool = True
    last_residual: float = field(default=None, compare=False)


def absorbing_edges(mesh):
    ids = mesh.boundary_edge_ids[mesh.boundary_tags == ABSORBING]
    return np.asarray(sorted(int(e) for e in ids), dtype=np.int64)


def edge_geometry(mesh, e):
    """Low-to-high endpoints, length, and unit outward normal of a
    boundary edge."""
    lo, hi = (int(v) for v in mesh.edges[e])
    a, b = mesh.vertices[lo], mesh.vertices[hi]
    tang = b - a
    length = float(np.linalg.norm(tang))
    t1, t2 = (int(x) for x in mesh.edge_tris[e])
    elem = t1 if t2 < 0 else t2 if t1 < 0 else None
    if elem is None:
        raise ValueError(f"edge {e} is interior")
    tri = mesh.triangles[elem]
    k = next(kk for kk in range(3)
             if {int(tri[kk]), int(tri[(kk + 1) % 3])} == {lo, hi})
    normal = np.array([tang[1], -tang[0]]) / length
    if int(tri[k]) != lo:   # element traverses hi -> lo
        normal = -normal
    return elem, (a, b), length, normal


def edge_reference_points(mesh, elem, a, b, t):
    """Reference coordinates in `elem` of a + t (b - a)."""
    B, _, v0 = mesh.affine_maps
    phys = a[None, :] + t[:, None] * (b - a)[None, :]
    return np.linalg.solve(B[elem], (phys - v0[elem]).T).T, phys


def assemble_operators(space, quad_degree=None):
    """Stiffness S and mass M over the mesh (real, symmetric)."""
    mesh = space.mesh
    p = space.degree
    rule = triangle_rule(quad_degree if quad_degree is not None else 2 * p)
    N, dN = eval_lagrange_basis(p, rule.xy)
    B, det, _ = mesh.affine_maps
    Binv = np.linalg.inv(B)
    # grad phi_i . grad phi_j = gradhat_i^T B^{-1} B^{-T} gradhat_j
    C = np.einsum('tac,tbc->tab', Binv, Binv) * det[:, None, None]
    Khat = np.einsum('q,iqa,jqb->ijab', rule.weights, dN, dN)
    S_loc = np.einsum('ijab,tab->tij', Khat, C)
    Mhat = np.einsum('q,iq,jq->ij', rule.weights, N, N)
    M_loc = Mhat[None, :, :] * det[:, None, None]
    rows = np.repeat(space.elem_dofs, space.elem_dofs.shape[1], axis=1).ravel()
    cols = np.tile(space.elem_dofs, (1, space.elem_dofs.shape[1])).ravel()
    shape = (space.ndof, space.ndof)
    S = sp.coo_matrix((S_loc.ravel(), (rows, cols)), shape=shape).tocsr()
    M = sp.coo_matrix((M_loc.ravel(), (rows, cols)), shape=shape).tocsr()
    return S, M


def assemble_boundary_mass(space, quad_degree=None):
    """Mass matrix on the absorbing boundary (real)."""
    mesh = space.mesh
    p = space.degree
    rule = edge_rule(quad_degree if quad_degree is not None else 2 * p)
    rows, cols, vals = [], [], []
    for e in absorbing_edges(mesh):
        elem, (a, b), length, _ = edge_geometry(mesh, e)
        ref_pts, _ = edge_reference_points(mesh, elem, a, b, rule.points)
        N, _ = eval_lagrange_basis(p, ref_pts)
        loc = np.einsum('q,iq,jq->ij', rule.weights * length, N, N)
        dofs = space.elem_dofs[elem]
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(loc.ravel())
    if not rows:
        return sp.csr_matrix((space.ndof, space.ndof))
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.ndof, space.ndof)).tocsr()


def assemble_load(space, f, quad_degree):
    """Volume moments (f, phi_i)."""
    out = np.zeros(space.ndof, dtype=complex)
    if f is None:
        return out
    mesh = space.mesh
    rule = triangle_rule(quad_degree)
    N, _ = eval_lagrange_basis(space.degree, rule.xy)
    B, det, v0 = mesh.affine_maps
    phys = np.einsum('tab,qb->tqa', B, rule.xy) + v0[:, None, :]
    fv = f(phys.reshape(-1, 2)).reshape(phys.shape[:2])
    loc = np.einsum('q,iq,tq->ti', rule.weights, N, fv) * det[:, None]
    np.add.at(out, space.elem_dofs.ravel(), loc.ravel())
    return out


def assemble_boundary_load(space, g, quad_degree):
    """Boundary moments (g, phi_i)_{Gamma_A}."""
    out = np.zeros(space.ndof, dtype=complex)
    if g is None:
        return out
    mesh = space.mesh
    rule = edge_rule(quad_degree)
    for e in absorbing_edges(mesh):
        elem, (a, b), length, normal = edge_geometry(mesh, e)
        ref_pts, phys = edge_reference_points(mesh, elem, a, b, rule.points)
        N, _ = eval_lagrange_basis(space.degree, ref_pts)
        gv = g(phys, normal)
        loc = np.einsum('q,iq->i', rule.weights * length * gv, N)
        np.add.at(out, space.elem_dofs[elem], loc)
    return out


def assemble(problem, space=None):
    """Linear system of the discrete Helmholtz problem."""
    if space is None:
        space = build_lagrange_space(problem.mesh, problem.degree)
    S, M = assemble_operators(space)
    MG = assemble_boundary_mass(space)
    k = problem.k
    A = (S - k ** 2 * M).astype(complex) - 1j * k * MG
    rhs = (assemble_load(space, problem.f, problem.data_quad_degree)
           + assemble_boundary_load(space, problem.g, problem.data_quad_degree))
    free = space.free_dofs
    return LinearSystem(matrix=A[free][:, free].tocsc(), rhs=rhs[free],
                        space=space, free=free)


def solve_linear(system, rhs=None):
    """Direct sparse solve; returns full-length coefficients (zeros on
    Dirichlet dofs).  Accepts an alternative right-hand side, possibly
    with several columns sharing the one factorization."""
    b = system.rhs if rhs is None else rhs
    try:
        lu = spla.splu(system.matrix.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"singular factorization: {exc}") from exc
    x = lu.solve(np.ascontiguousarray(b))
    norm_b = np.linalg.norm(b)
    if norm_b > 0:
        residual = np.linalg.norm(system.matrix @ x - b) / norm_b
        if not np.isfinite(residual) or residual > 1e-8:
            diag = np.abs(lu.U.diagonal())
            cond_est = float(diag.max() / max(diag.min(), 1e-300))
            raise SolverError(
                f"ill-conditioned solve: relative residual {residual:.2e}, "
                f"pivot ratio estimate {cond_est:.2e}")
        system.last_residual = float(residual)
    full_shape = (system.space.ndof,) + b.shape[1:]
    full = np.zeros(full_shape, dtype=complex)
    full[system.free] = x
    return full


def solve_helmholtz(problem, space=None, check_galerkin=False):
    system = assemble(problem, space)
    coeffs = solve_linear(system)
    if check_galerkin:
        res = system.matrix @ coeffs[system.free] - system.rhs
        scale = np.linalg.norm(system.rhs)
        if scale > 0 and np.abs(res).max() > 1e-9 * scale:
            raise SolverError(
                f"Galerkin orthogonality violated: {np.abs(res).max():.2e} "
                f"vs scale {scale:.2e}")
    return DiscreteField(space=system.space, coefficients=coeffs)


@dataclass(eq=False)
class PlaneWave:
    """exp(i k d . x) with unit direction d = (cos nu, sin nu)."""
    k: float
    nu: float

    @property
    def direction(self):
        return np.array([np.cos(self.nu), np.sin(self.nu)])

    def value(self, points):
        points = np.asarray(points, dtype=float)
        return np.exp(1j * self.k * points @ self.direction)

    def gradient(self, points):
        v = self.value(points)
        return 1j * self.k * self.direction[None, :] * v[:, None]

    def impedance(self, points, normal):
        """g = grad(xi) . n - i k xi on a straight edge with unit normal."""
        d_dot_n = float(self.direction @ normal)
        return 1j * self.k * (d_dot_n - 1.0) * self.value(points)


def plane_wave(k, nu):
    return PlaneWave(k=k, nu=nu)


def plane_wave_problem(mesh, k, nu, degree, quad_degree=None):
    wave = plane_wave(k, nu)
    return HelmholtzProblem(mesh=mesh, k=k, degree=degree, f=None,
                            g=wave.impedance, quad_degree=quad_degree), wave


def best_approximation(exact, space, k, quad_degree=None):
    """Energy-norm orthogonal projection of an analytic field onto the
    space: k^2 (w, v) + k (w, v)_{Gamma_A} + (grad w, grad v) matches the
    same moments of the exact field.  `exact` provides value(points) and
    gradient(points)."""
    mesh = space.mesh
    deg = quad_degree if quad_degree is not None else max(
        2 * space.degree + 2, DEFAULT_DATA_DEGREE_FLOOR)
    S, M = assemble_operators(space)
    MG = assemble_boundary_mass(space)
    A = (k ** 2 * M + k * MG + S).astype(complex)

    rhs = np.zeros(space.ndof, dtype=complex)
    rule = triangle_rule(deg)
    N, dN = eval_lagrange_basis(space.degree, rule.xy)
    B, det, v0 = mesh.affine_maps
    phys = np.einsum('tab,qb->tqa', B, rule.xy) + v0[:, None, :]
    flat = phys.reshape(-1, 2)
    uv = exact.value(flat).reshape(phys.shape[:2])
    ug = exact.gradient(flat).reshape(phys.shape[:2] + (2,))
    Binv = np.linalg.inv(B)
    grad_phi = np.einsum('tba,iqb->tiqa', Binv, dN)
    loc = (k ** 2 * np.einsum('q,iq,tq->ti', rule.weights, N, uv) * det[:, None]
           + np.einsum('q,tiqa,tqa->ti', rule.weights, grad_phi, ug) * det[:, None])
    np.add.at(rhs, space.elem_dofs.ravel(), loc.ravel())

    er = edge_rule(deg)
    for e in absorbing_edges(mesh):
        elem, (a, b), length, _ = edge_geometry(mesh, e)
        ref_pts, physe = edge_reference_points(mesh, elem, a, b, er.points)
        Ne, _ = eval_lagrange_basis(space.degree, ref_pts)
        vals = exact.value(physe)
        loc = k * np.einsum('q,iq->i', er.weights * length * vals, Ne)
        np.add.at(rhs, space.elem_dofs[elem], loc)

    free = space.free_dofs
    system = LinearSystem(matrix=A[free][:, free].tocsc(), rhs=rhs[free],
                          space=space, free=free)
    return DiscreteField(space=space, coefficients=solve_linear(system))


def worker_count():
    """Thread cap from the HELM_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("HELM_THREADS", "1")))
    except ValueError:
        return 1
