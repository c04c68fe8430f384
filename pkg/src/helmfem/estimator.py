"""Error estimation: local estimators, data oscillation, energy norms.

The energy norm is sqrt(k^2 |v|_0^2 + k |v|_{0,Gamma_A}^2 + |v|_1^2); all
reported E_* quantities are percentages of the reference field's energy
norm, so they read directly as relative errors in percent.
"""

from dataclasses import dataclass

import numpy as np

from .equilibration import eval_projected_f, eval_projected_g
from .quadrature import edge_rule, triangle_rule
from .solver import (absorbing_edges, edge_geometry,
                     edge_reference_points)
from .spaces import eval_lagrange_basis


@dataclass(eq=False)
class EstimateReport:
    eta_K: np.ndarray
    osc_K: np.ndarray
    err_K: np.ndarray          # None without a reference
    eta: float
    osc: float
    E_fem: float               # None without a reference
    E_ba: float                # None unless a best approximation is given
    E_est: float
    E_est_guaranteed: float    # None unless c_up is given
    c_ba: float
    c_up: float
    reference_norm: float

    @property
    def effectivity(self):
        if not self.E_fem:
            return None
        return self.E_est / self.E_fem

    @property
    def guaranteed_effectivity(self):
        if not self.E_fem or self.E_est_guaranteed is None:
            return None
        return self.E_est_guaranteed / self.E_fem


def _volume_quad_data(mesh, degree):
    rule = triangle_rule(degree)
    B, det, v0 = mesh.affine_maps
    phys = np.einsum('tab,qb->tqa', B, rule.xy) + v0[:, None, :]
    return rule, B, det, phys


def _accumulate_terms(terms, mesh, rule, B, phys):
    """Values and gradients of sum(sign * field) at the volume points.

    Discrete fields carry .space/.coefficients; analytic fields provide
    value(points) and gradient(points)."""
    nt, nq = phys.shape[:2]
    vals = np.zeros((nt, nq), dtype=complex)
    grads = np.zeros((nt, nq, 2), dtype=complex)
    Binv = np.linalg.inv(B)
    flat = phys.reshape(-1, 2)
    for sign, f in terms:
        if hasattr(f, 'coefficients'):
            N, dN = eval_lagrange_basis(f.space.degree, rule.xy)
            coeffs = f.coefficients[f.space.elem_dofs]
            vals += sign * (coeffs @ N)
            grads += sign * np.einsum('tba,tqb->tqa', Binv,
                                      np.einsum('ti,iqa->tqa', coeffs, dN))
        else:
            vals += sign * f.value(flat).reshape(nt, nq)
            grads += sign * f.gradient(flat).reshape(nt, nq, 2)
    return vals, grads


def _edge_trace_terms(terms, mesh, e, t):
    elem, (a, b), length, _ = edge_geometry(mesh, e)
    ref_pts, phys = edge_reference_points(mesh, elem, a, b, t)
    vals = np.zeros(len(t), dtype=complex)
    for sign, f in terms:
        if hasattr(f, 'coefficients'):
            N, _ = eval_lagrange_basis(f.space.degree, ref_pts)
            vals += sign * (f.coefficients[f.space.elem_dofs[elem]] @ N)
        else:
            vals += sign * f.value(phys)
    return elem, length, vals


def energy_norm_terms(terms, k, mesh, quad_degree, elementwise=False):
    """Energy norm of a signed combination of discrete/analytic fields."""
    rule, B, det, phys = _volume_quad_data(mesh, quad_degree)
    vals, grads = _accumulate_terms(terms, mesh, rule, B, phys)
    dens = k ** 2 * np.abs(vals) ** 2 + np.sum(np.abs(grads) ** 2, axis=-1)
    per_elem = np.einsum('q,tq->t', rule.weights, dens) * det
    er = edge_rule(quad_degree)
    for e in absorbing_edges(mesh):
        elem, length, tvals = _edge_trace_terms(terms, mesh, e, er.points)
        per_elem[elem] += k * length * float(np.sum(er.weights * np.abs(tvals) ** 2))
    total = float(np.sqrt(per_elem.sum()))
    if elementwise:
        return total, np.sqrt(per_elem)
    return total


def energy_norm_analytic(mesh, exact, k, quad_degree):
    return energy_norm_terms([(1.0, exact)], k, mesh, quad_degree)


def energy_norm_discrete(u_h, k, quad_degree=None):
    qd = quad_degree if quad_degree is not None else 2 * u_h.space.degree + 1
    return energy_norm_terms([(1.0, u_h)], k, u_h.space.mesh, qd)


def energy_norm_error(u_h, reference, k, quad_degree, elementwise=False):
    """Energy norm of (reference - u_h); reference may be analytic or a
    discrete field of different degree on the same mesh."""
    return energy_norm_terms([(1.0, reference), (-1.0, u_h)], k,
                             u_h.space.mesh, quad_degree,
                             elementwise=elementwise)


def eta_local(flux, u_h):
    """Per-element L2 distance between the flux and -grad(u_h)."""
    space = u_h.space
    mesh = space.mesh
    rule, B, det, _ = _volume_quad_data(mesh, 2 * (flux.q + 1))
    _, dN = eval_lagrange_basis(space.degree, rule.xy)
    coeffs = u_h.coefficients[space.elem_dofs]
    Binv = np.linalg.inv(B)
    grad_phys = np.einsum('tba,tqb->tqa', Binv,
                          np.einsum('ti,iqa->tqa', coeffs, dN))
    sig_vals, _ = flux.evaluate(rule.xy)
    mismatch = sig_vals + grad_phys
    sq = np.einsum('q,tq->t', rule.weights,
                   np.abs(mismatch[..., 0]) ** 2 + np.abs(mismatch[..., 1]) ** 2)
    return np.sqrt(sq * det)


def trace_constant(h, rho, n_faces):
    """C_tr of one element: sqrt(N (3/(4 pi))(1 + 1/pi)(h/rho)^2)."""
    return np.sqrt(n_faces * (3 / (4 * np.pi)) * (1 + 1 / np.pi)
                   * (h / rho) ** 2)


def osc_local(problem, proj, quad_degree=None):
    """Per-element data oscillation: (h/pi) |f - pi f|_K plus the trace
    weighted boundary misfit of g."""
    mesh = problem.mesh
    deg = quad_degree if quad_degree is not None else problem.data_quad_degree
    nt = mesh.num_triangles
    out = np.zeros(nt)
    v = mesh.vertices[mesh.triangles]
    d = np.stack([np.linalg.norm(v[:, i] - v[:, (i + 1) % 3], axis=1)
                  for i in range(3)])
    h = d.max(axis=0)
    _, det, _ = mesh.affine_maps
    rho = det / d.sum(axis=0)   # inradius = 2 area / perimeter

    if problem.f is not None:
        rule, B, detq, phys = _volume_quad_data(mesh, deg)
        fv = problem.f(phys.reshape(-1, 2)).reshape(phys.shape[:2])
        fp = eval_projected_f(proj, np.arange(nt), rule.xy)
        sq = np.einsum('q,tq->t', rule.weights, np.abs(fv - fp) ** 2) * detq
        out += (h / np.pi) * np.sqrt(sq)

    if problem.g is not None:
        er = edge_rule(deg)
        n_faces = np.zeros(nt)
        gsq = np.zeros(nt)
        for e in absorbing_edges(mesh):
            elem, (a, b), length, normal = edge_geometry(mesh, e)
            _, physe = edge_reference_points(mesh, elem, a, b, er.points)
            gv = problem.g(physe, normal)
            gp = eval_projected_g(proj, e, er.points)
            gsq[elem] += float(np.sum(er.weights * np.abs(gv - gp) ** 2) * length)
            n_faces[elem] += 1
        ctr = trace_constant(h, rho, n_faces)
        out += ctr * np.sqrt(h / np.pi) * np.sqrt(gsq)
    return out


def report(problem, u_h, flux, proj, reference=None, best=None,
           c_ba=None, c_up=None, ref_quad_degree=None):
    """Collect estimators, oscillation, and reference errors.

    `reference` is the analytic solution or a higher-degree discrete
    solution; `best` an energy projection onto the solution space.
    Percentages follow the convention 100 * quantity / |reference|."""
    k = problem.k
    eta_K = eta_local(flux, u_h)
    osc_K = osc_local(problem, proj)
    eta = float(np.sqrt(np.sum(eta_K ** 2)))
    osc = float(np.sqrt(np.sum(osc_K ** 2)))

    err_K = None
    E_fem = E_ba = E_est = E_guar = None
    ref_norm = None
    if reference is not None:
        if ref_quad_degree is None:
            if hasattr(reference, 'coefficients'):
                ref_quad_degree = 2 * reference.space.degree
            else:
                ref_quad_degree = problem.data_quad_degree
        same = (hasattr(reference, 'coefficients')
                and reference.space is u_h.space
                and np.array_equal(reference.coefficients, u_h.coefficients))
        ref_norm = energy_norm_terms([(1.0, reference)], k, problem.mesh,
                                     ref_quad_degree)
        if ref_norm == 0.0:
            return EstimateReport(eta_K=eta_K, osc_K=osc_K, err_K=None,
                                  eta=eta, osc=osc, E_fem=None, E_ba=None,
                                  E_est=None, E_est_guaranteed=None,
                                  c_ba=c_ba, c_up=c_up, reference_norm=0.0)
        if same:
            E_fem = 0.0
            err_K = np.zeros(problem.mesh.num_triangles)
        else:
            fem_err, err_K = energy_norm_error(u_h, reference, k,
                                               ref_quad_degree,
                                               elementwise=True)
            E_fem = 100.0 * fem_err / ref_norm
        if best is not None:
            ba_err = energy_norm_error(best, reference, k, ref_quad_degree)
            E_ba = 100.0 * ba_err / ref_norm
        E_est = 100.0 * eta / ref_norm
        if c_up is not None:
            E_guar = c_up * E_est
    return EstimateReport(eta_K=eta_K, osc_K=osc_K, err_K=err_K, eta=eta,
                          osc=osc, E_fem=E_fem, E_ba=E_ba, E_est=E_est,
                          E_est_guaranteed=E_guar, c_ba=c_ba, c_up=c_up,
                          reference_norm=ref_norm)
