"""Equilibrated flux reconstruction.

Around every mesh vertex a constrained least-squares problem is solved in
the broken RT_{p+1} space of the vertex patch: minimize the distance to
minus the hat-weighted solution gradient subject to a prescribed
divergence and normal trace.  The patchwise minimizers sum to a global
H(div)-conforming flux whose divergence and absorbing-boundary trace
reproduce the projected data exactly.
"""

import concurrent.futures
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import _refbasis as ref
from .mesh import vertex_patch
from .quadrature import edge_rule, triangle_rule
from .spaces import eval_lagrange_basis, eval_rt_basis, rt_dim, rt_interior_dim
from .solver import edge_geometry, edge_reference_points, worker_count

COMPATIBILITY_HARD_LIMIT = 1e-8
COMPATIBILITY_WARN = 1e-11


class EquilibrationError(Exception):
    pass


@dataclass(eq=False)
class ProjectedData:
    """Elementwise L2 projection of f (nodal coefficients per element) and
    facewise projection of g (Legendre coefficients per absorbing edge)."""
    degree: int
    f_coeffs: np.ndarray = None          # (nt, nloc_p) complex, None when f = 0
    g_coeffs: dict = field(default_factory=dict)  # edge id -> (p+1,) complex


def project_data(problem):
    """Project volume and boundary data onto elementwise/facewise P_p."""
    mesh, p = problem.mesh, problem.degree
    deg = problem.data_quad_degree
    out = ProjectedData(degree=p)
    if problem.f is not None:
        rule = triangle_rule(deg)
        N, _ = eval_lagrange_basis(p, rule.xy)
        Mhat = np.einsum('q,iq,jq->ij', rule.weights, N, N)
        B, det, v0 = mesh.affine_maps
        phys = np.einsum('tab,qb->tqa', B, rule.xy) + v0[:, None, :]
        fv = problem.f(phys.reshape(-1, 2)).reshape(phys.shape[:2])
        rhs = np.einsum('q,iq,tq->ti', rule.weights, N, fv)
        out.f_coeffs = np.linalg.solve(Mhat, rhs.T).T
    if problem.g is not None:
        er = edge_rule(deg)
        legs = np.stack([ref.eval_shifted_legendre(m, er.points)
                         for m in range(p + 1)])
        scale = 2 * np.arange(p + 1) + 1
        from .solver import absorbing_edges
        for e in absorbing_edges(mesh):
            elem, (a, b), length, normal = edge_geometry(mesh, e)
            _, phys = edge_reference_points(mesh, elem, a, b, er.points)
            gv = problem.g(phys, normal)
            out.g_coeffs[int(e)] = scale * np.einsum('q,mq->m', er.weights * gv, legs)
    return out


def eval_projected_g(proj, e, t):
    coeffs = proj.g_coeffs.get(int(e))
    if coeffs is None:
        return np.zeros_like(t, dtype=complex)
    return sum(c * ref.eval_shifted_legendre(m, t) for m, c in enumerate(coeffs))


def eval_projected_f(proj, elems, ref_pts):
    """pi_h^p f on the given elements at reference points, (nel, nq)."""
    if proj.f_coeffs is None:
        return np.zeros((len(elems), len(ref_pts)), dtype=complex)
    N, _ = eval_lagrange_basis(proj.degree, ref_pts)
    return proj.f_coeffs[elems] @ N


@lru_cache(maxsize=None)
def _patch_reference(p):
    """Reference tensors shared by all patches at solution degree p."""
    q = p + 1
    rule = triangle_rule(2 * (q + 1))
    vhat, dvhat = eval_rt_basis(q, rule.xy)
    mu, _ = eval_lagrange_basis(q, rule.xy)
    lam, dlam = eval_lagrange_basis(1, rule.xy)
    N, dN = eval_lagrange_basis(p, rule.xy)
    w = rule.weights
    T = np.einsum('q,iqa,jqb->ijab', w, vhat, vhat)
    D = np.einsum('q,iq,rq->ri', w, dvhat, mu)
    mu_int = np.einsum('q,rq->r', w, mu)
    erule = edge_rule(2 * (q + 1))
    legs = np.stack([ref.eval_shifted_legendre(m, erule.points)
                     for m in range(q + 1)])
    return dict(q=q, rule=rule, vhat=vhat, dvhat=dvhat, mu=mu, lam=lam,
                dlam=dlam, N=N, dN=dN, T=T, D=D, mu_int=mu_int,
                erule=erule, legs=legs)


@dataclass(eq=False)
class PatchProblem:
    """Data of one vertex-patch minimization.

    d_vals are the divergence data at the reference quadrature points of
    each patch element; target_ref holds the covariant representation of
    the hat-weighted solution gradient (hat value times reference gradient
    of u_h); essential maps constrained edges to dof values in the global
    edge orientation.
    """
    mesh: object
    vertex: int
    degree: int                  # solution degree p; fluxes live in RT_{p+1}
    elements: np.ndarray
    local_vertex: np.ndarray
    d_vals: np.ndarray           # (nel, nq) complex
    target_ref: np.ndarray       # (nel, nq, 2) complex
    essential: dict              # edge id -> (q+1,) complex
    free_edges: list
    mean_constraint: bool
    boundary_flux: complex = 0.0  # (b_a, 1) over the patch boundary
    compat_offset: complex = 0.0
    compat_rel: float = 0.0

    @property
    def q(self):
        return self.degree + 1


def build_patch_problem(u_h, proj, k, vertex, patch=None, check=True):
    """Divergence data, target field, and trace constraints of one patch."""
    space = u_h.space
    mesh, p = space.mesh, space.degree
    rd = _patch_reference(p)
    if patch is None:
        patch = vertex_patch(mesh, vertex)
    elems = patch.elements
    tris = mesh.triangles[elems]
    local_vertex = np.array([int(np.nonzero(tris[i] == vertex)[0][0])
                             for i in range(len(elems))])
    B, det, _ = mesh.affine_maps
    Ginv = np.linalg.inv(np.einsum('tca,tcb->tab', B[elems], B[elems]))

    coeffs = u_h.coefficients[space.elem_dofs[elems]]
    u_vals = coeffs @ rd['N']                                   # (nel, nq)
    u_grad = np.einsum('ti,iqa->tqa', coeffs, rd['dN'])         # reference grad
    lam = rd['lam'][local_vertex]                               # (nel, nq)
    dlam = rd['dlam'][local_vertex][:, 0, :]                    # (nel, 2) constant

    f_vals = eval_projected_f(proj, elems, rd['rule'].xy)
    grad_pair = np.einsum('ta,tab,tqb->tq', dlam, Ginv, u_grad)
    d_vals = lam * (f_vals + k ** 2 * u_vals) - grad_pair
    target_ref = lam[:, :, None] * u_grad

    q = p + 1
    er = rd['erule']
    legs = rd['legs']
    essential = {}
    free_edges = []
    boundary_flux = 0.0 + 0.0j
    patch_edges = sorted({int(e) for t in elems for e in mesh.tri_edges[t]})
    for e in patch_edges:
        lo, hi = (int(v) for v in mesh.edges[e])
        spoke = vertex in (lo, hi)
        tag = mesh.edge_tag[e]
        if spoke and tag in ('', 'D'):
            # interior spokes are shared unknowns; Dirichlet edges at the
            # vertex carry no trace constraint
            free_edges.append(e)
            continue
        if spoke and tag == 'A':
            elem, (a, b), length, normal = edge_geometry(mesh, e)
            ref_pts, phys = edge_reference_points(mesh, elem, a, b, er.points)
            Ne, _ = eval_lagrange_basis(p, ref_pts)
            u_trace = u_h.coefficients[space.elem_dofs[elem]] @ Ne
            mu_vals = eval_projected_g(proj, e, er.points) + 1j * k * u_trace
            psi = 1.0 - er.points if lo == vertex else er.points
            b_vals = -psi * mu_vals
            tri = mesh.triangles[elem]
            kk = next(j for j in range(3)
                      if {int(tri[j]), int(tri[(j + 1) % 3])} == {lo, hi})
            sign = 1.0 if int(tri[kk]) == lo else -1.0
            essential[e] = sign * length * np.einsum('q,mq->m', er.weights * b_vals, legs)
            boundary_flux += length * np.sum(er.weights * b_vals)
        else:
            essential[e] = np.zeros(q + 1, dtype=complex)

    pp = PatchProblem(mesh=mesh, vertex=vertex, degree=p, elements=elems,
                      local_vertex=local_vertex, d_vals=d_vals,
                      target_ref=target_ref, essential=essential,
                      free_edges=free_edges,
                      mean_constraint=not patch.is_dirichlet_vertex,
                      boundary_flux=boundary_flux)
    if check and pp.mean_constraint:
        _check_compatibility(pp)
    return pp


def _patch_measures(pp):
    _, det, _ = pp.mesh.affine_maps
    return det[pp.elements]


def _check_compatibility(pp):
    """(d_a, 1) over the patch must equal (b_a, 1) over its boundary."""
    rd = _patch_reference(pp.degree)
    det = _patch_measures(pp)
    w = rd['rule'].weights
    d_int = np.einsum('t,q,tq->', det, w, pp.d_vals)
    b_int = pp.boundary_flux
    area = 0.5 * det.sum()
    scale = max(np.abs(pp.d_vals).max(initial=0.0) * area, abs(b_int), 1e-30)
    offset = d_int - b_int
    rel = abs(offset) / scale
    pp.compat_offset = offset / (2 * area)
    pp.compat_rel = rel
    if rel > COMPATIBILITY_HARD_LIMIT:
        raise EquilibrationError(
            f"patch at vertex {pp.vertex}: compatibility violated "
            f"(relative residual {rel:.3e}); the solution is not a Galerkin "
            f"solution or the data projections are inconsistent")
    if rel > COMPATIBILITY_WARN:
        warnings.warn(
            f"patch at vertex {pp.vertex}: compatibility residual {rel:.2e} "
            f"absorbed by the mean multiplier", stacklevel=2)


def solve_patch(pp):
    """Euler-Lagrange saddle-point solve of one patch problem.

    Returns (edge_values, interior_values): a dict edge id -> (q+1,)
    complex global-orientation dof values, and (nel, nint) complex
    interior dofs per patch element.
    """
    mesh, p, q = pp.mesh, pp.degree, pp.q
    rd = _patch_reference(p)
    nloc = rt_dim(q)
    nint = rt_interior_dim(q)
    nmu = rd['mu'].shape[0]
    k_edge = q + 1
    elems = pp.elements
    nel = len(elems)
    frame_signs, frame_edges = _element_rt_signs(mesh, elems, q)

    edge_order = {e: i for i, e in enumerate(sorted(
        set(pp.free_edges) | set(pp.essential)))}
    n_edges = len(edge_order)
    n_flux = n_edges * k_edge + nel * nint
    ess_mask = np.zeros(n_flux, dtype=bool)
    ess_vals = np.zeros(n_flux, dtype=complex)
    for e, vals in pp.essential.items():
        base = edge_order[e] * k_edge
        ess_mask[base:base + k_edge] = True
        ess_vals[base:base + k_edge] = vals

    # local-to-patch flux dof map per element
    loc2patch = np.empty((nel, nloc), dtype=np.int64)
    for i in range(nel):
        for kk in range(3):
            base = edge_order[int(frame_edges[i, kk])] * k_edge
            loc2patch[i, kk * k_edge:(kk + 1) * k_edge] = np.arange(
                base, base + k_edge)
        loc2patch[i, 3 * k_edge:] = (n_edges * k_edge + i * nint
                                     + np.arange(nint))

    B, det, _ = mesh.affine_maps
    G = np.einsum('tca,tcb->tab', B[elems], B[elems])

    M = np.zeros((n_flux, n_flux))
    Dmat = np.zeros((nel * nmu, n_flux))
    Ft = np.zeros(n_flux, dtype=complex)
    w = rd['rule'].weights
    dete = det[elems]
    Mk_all = (np.einsum('ijab,tab->tij', rd['T'], G) / dete[:, None, None]
              * frame_signs[:, :, None] * frame_signs[:, None, :])
    Ft_all = frame_signs * np.einsum('q,tqa,iqa->ti', w, pp.target_ref,
                                     rd['vhat'])
    Gvec = (dete[:, None] * np.einsum('q,tq,rq->tr', w, pp.d_vals,
                                      rd['mu'])).ravel()
    evec = (dete[:, None] * rd['mu_int'][None, :]).ravel()
    for i in range(nel):
        idx = loc2patch[i]
        M[np.ix_(idx, idx)] += Mk_all[i]
        Dmat[i * nmu:(i + 1) * nmu, idx] += rd['D'] * frame_signs[i][None, :]
        Ft[idx] += Ft_all[i]

    free = np.nonzero(~ess_mask)[0]
    nf = len(free)
    nmu_tot = nel * nmu
    dim = nf + nmu_tot + (1 if pp.mean_constraint else 0)
    K = np.zeros((dim, dim))
    K[:nf, :nf] = M[np.ix_(free, free)]
    K[:nf, nf:nf + nmu_tot] = Dmat[:, free].T
    K[nf:nf + nmu_tot, :nf] = Dmat[:, free]
    if pp.mean_constraint:
        K[nf:nf + nmu_tot, -1] = evec
        K[-1, nf:nf + nmu_tot] = evec

    rhs_c = np.zeros(dim, dtype=complex)
    rhs_c[:nf] = -Ft[free] - M[np.ix_(free, np.nonzero(ess_mask)[0])] @ \
        ess_vals[ess_mask]
    rhs_c[nf:nf + nmu_tot] = Gvec - Dmat[:, ess_mask] @ ess_vals[ess_mask]

    rhs = np.column_stack([rhs_c.real, rhs_c.imag])
    # symmetric row-norm scaling evens out the disparate block magnitudes
    # (mass, divergence moments, mean row); one refinement step recovers
    # the digits the factorization leaves behind
    scale = np.sqrt(np.maximum(np.abs(K).max(axis=1), 1e-300))
    Ks = K / scale[:, None] / scale[None, :]
    bs = rhs / scale[:, None]
    try:
        lu, piv = scipy.linalg.lu_factor(Ks)
    except scipy.linalg.LinAlgError as exc:
        raise EquilibrationError(
            f"singular patch system at vertex {pp.vertex}: {exc}") from exc
    y = scipy.linalg.lu_solve((lu, piv), bs)
    y += scipy.linalg.lu_solve((lu, piv), bs - Ks @ y)
    sol = y / scale[:, None]
    if not np.all(np.isfinite(sol)):
        raise EquilibrationError(
            f"singular patch system at vertex {pp.vertex}")
    sigma = ess_vals.copy()
    sigma[free] = sol[:nf, 0] + 1j * sol[:nf, 1]

    edge_values = {}
    for e, pos in edge_order.items():
        edge_values[e] = sigma[pos * k_edge:(pos + 1) * k_edge]
    interior = sigma[n_edges * k_edge:].reshape(nel, nint)
    return edge_values, interior


def patch_flux_values(pp, edge_values, interior, ref_points):
    """Evaluate a patch flux on its elements at reference points.

    Returns (nel, nq, 2) complex physical values."""
    mesh = pp.mesh
    q = pp.q
    k_edge = q + 1
    signs, edges = _element_rt_signs(mesh, pp.elements, q)
    nloc = rt_dim(q)
    coef = np.empty((len(pp.elements), nloc), dtype=complex)
    for kk in range(3):
        for i in range(len(pp.elements)):
            coef[i, kk * k_edge:(kk + 1) * k_edge] = edge_values[int(edges[i, kk])]
    coef[:, 3 * k_edge:] = interior
    coef *= signs
    vhat, _ = eval_rt_basis(q, ref_points)
    B, det, _ = mesh.affine_maps
    sig_ref = np.einsum('ti,iqa->tqa', coef, vhat)
    Be = B[pp.elements] / det[pp.elements, None, None]
    return np.einsum('tab,tqb->tqa', Be, sig_ref)


def patch_objective(pp, edge_values, interior):
    """L2 norm over the patch of sigma + hat-weighted solution gradient."""
    rd = _patch_reference(pp.degree)
    rule = rd['rule']
    sig = patch_flux_values(pp, edge_values, interior, rule.xy)
    mesh = pp.mesh
    B, det, _ = mesh.affine_maps
    Binv = np.linalg.inv(B[pp.elements])
    target_phys = np.einsum('tba,tqb->tqa', Binv, pp.target_ref)
    mism = sig + target_phys
    sq = np.einsum('q,tq->t', rule.weights,
                   np.abs(mism[..., 0]) ** 2 + np.abs(mism[..., 1]) ** 2)
    return float(np.sqrt(np.sum(sq * det[pp.elements])))


def _element_rt_signs(mesh, elems, q):
    """Orientation signs and global edge ids of local RT dofs, restricted
    to the given elements.  Mirrors spaces.build_rt_frame."""
    k_edge = q + 1
    nloc = rt_dim(q)
    signs = np.ones((len(elems), nloc))
    edges = np.empty((len(elems), 3), dtype=np.int64)
    for i, t in enumerate(elems):
        tri = mesh.triangles[t]
        for kk in range(3):
            a, b = int(tri[kk]), int(tri[(kk + 1) % 3])
            edges[i, kk] = mesh.tri_edges[t, kk]
            if a > b:
                for m in range(k_edge):
                    signs[i, kk * k_edge + m] = (-1.0) ** (m + 1)
    return signs, edges


@dataclass(eq=False)
class FluxField:
    """Global RT_q flux: shared edge dofs plus per-element interior dofs."""
    mesh: object
    q: int
    edge_dofs: np.ndarray       # (ne, q+1) complex
    interior_dofs: np.ndarray   # (nt, nint) complex

    def element_dof_values(self, elems=None):
        """Sign-adjusted local dof values per element, (nel, ndof_rt)."""
        mesh = self.mesh
        elems = np.arange(mesh.num_triangles) if elems is None else np.asarray(elems)
        signs, edges = _element_rt_signs(mesh, elems, self.q)
        k_edge = self.q + 1
        nloc = rt_dim(self.q)
        vals = np.empty((len(elems), nloc), dtype=complex)
        for kk in range(3):
            vals[:, kk * k_edge:(kk + 1) * k_edge] = self.edge_dofs[edges[:, kk]]
        vals[:, 3 * k_edge:] = self.interior_dofs[elems]
        return signs * vals

    def evaluate(self, ref_points, elems=None):
        """Physical values (nel, nq, 2) and divergences (nel, nq)."""
        mesh = self.mesh
        elems = np.arange(mesh.num_triangles) if elems is None else np.asarray(elems)
        coef = self.element_dof_values(elems)
        vhat, dvhat = eval_rt_basis(self.q, ref_points)
        B, det, _ = mesh.affine_maps
        sig_ref = np.einsum('ti,iqa->tqa', coef, vhat)
        vals = np.einsum('tab,tqb->tqa', B[elems] / det[elems, None, None], sig_ref)
        divs = (coef @ dvhat) / det[elems, None]
        return vals, divs


def equilibrate(u_h, proj, k, threads=None):
    """Solve all patch problems and sum the local fluxes."""
    mesh = u_h.space.mesh
    p = u_h.space.degree
    q = p + 1
    k_edge = q + 1
    nint = rt_interior_dim(q)
    edge_dofs = np.zeros((len(mesh.edges), k_edge), dtype=complex)
    int_dofs = np.zeros((mesh.num_triangles, nint), dtype=complex)

    def run(vertex):
        pp = build_patch_problem(u_h, proj, k, vertex)
        edge_values, interior = solve_patch(pp)
        return pp.elements, edge_values, interior

    def accumulate(result):
        elements, edge_values, interior = result
        for e, vals in edge_values.items():
            edge_dofs[e] += vals
        int_dofs[elements] += interior

    nthreads = worker_count() if threads is None else max(1, int(threads))
    vertices = range(mesh.num_vertices)
    if nthreads > 1:
        # solve concurrently, accumulate in deterministic vertex order
        with concurrent.futures.ThreadPoolExecutor(max_workers=nthreads) as ex:
            for result in ex.map(run, vertices):
                accumulate(result)
    else:
        for v in vertices:
            accumulate(run(v))
    return FluxField(mesh=mesh, q=q, edge_dofs=edge_dofs, interior_dofs=int_dofs)
