"""Reference-element bases.

Lagrange bases use the exactly-nodal product form for equispaced simplex
nodes.  Raviart-Thomas dual bases are built over an orthogonal Dubiner-type
spanning set with stable recurrence evaluation.  Reference triangle:
vertices (0,0), (1,0), (0,1).
"""

from fractions import Fraction
from functools import lru_cache

import numpy as np

F0 = Fraction(0)
F1 = Fraction(1)


def monomial_exponents(degree):
    """Exponent pairs (a, b) with a + b <= degree, graded lexicographic."""
    return [(a, d - a) for d in range(degree + 1) for a in range(d + 1)]


@lru_cache(maxsize=None)
def lagrange_nodes(degree):
    """Equispaced nodes as Fractions: vertices, then edges, then interior.

    Edge k runs from local vertex k to vertex (k+1) mod 3; its nodes are
    listed in that direction.
    """
    p = degree
    verts = [(F0, F0), (F1, F0), (F0, F1)]
    if p == 0:
        return [(Fraction(1, 3), Fraction(1, 3))]
    nodes = list(verts)
    for k in range(3):
        a, b = verts[k], verts[(k + 1) % 3]
        for i in range(1, p):
            t = Fraction(i, p)
            nodes.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    for (i, j) in monomial_exponents(p):
        if i >= 1 and j >= 1 and i + j <= p - 1:
            nodes.append((Fraction(i, p), Fraction(j, p)))
    assert len(nodes) == (p + 1) * (p + 2) // 2
    return nodes


def _silvester(m, p, lam):
    """Value and derivative of prod_{s<m} (p lam - s) / (m - s)."""
    R = np.ones_like(lam)
    dR = np.zeros_like(lam)
    for s in range(m):
        f = (p * lam - s) / (m - s)
        df = p / (m - s)
        dR = dR * f + R * df
        R = R * f
    return R, dR


def eval_lagrange(degree, points):
    """Nodal basis values and gradients at reference points.

    Uses the product form for equispaced simplex nodes, which is exactly
    nodal in floating point.  points: (n, 2).  Returns
    (values (ndof, n), grads (ndof, n, 2)).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if degree == 0:
        return np.ones((1, len(pts))), np.zeros((1, len(pts), 2))
    lam = (1.0 - x - y, x, y)
    dlam = ((-1.0, -1.0), (1.0, 0.0), (0.0, 1.0))
    nodes = lagrange_nodes(degree)
    vals = np.empty((len(nodes), len(pts)))
    grads = np.empty((len(nodes), len(pts), 2))
    for i, (nx, ny) in enumerate(nodes):
        idx = (degree - int(nx * degree) - int(ny * degree),
               int(nx * degree), int(ny * degree))
        R, dR = zip(*(_silvester(idx[a], degree, lam[a]) for a in range(3)))
        vals[i] = R[0] * R[1] * R[2]
        for c in range(2):
            grads[i, :, c] = (dR[0] * R[1] * R[2] * dlam[0][c]
                              + R[0] * dR[1] * R[2] * dlam[1][c]
                              + R[0] * R[1] * dR[2] * dlam[2][c])
    return vals, grads


def eval_shifted_legendre(m, t):
    """P_m(2t - 1) on [0, 1] by the stable Legendre recurrence."""
    from numpy.polynomial.legendre import legval
    t = np.asarray(t, dtype=float)
    e = np.zeros(m + 1)
    e[m] = 1.0
    return legval(2.0 * t - 1.0, e)


# Reference edges: parametrization start vertex, direction, and outward
# normal scaled by edge length.
_REF_EDGE_START = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
_REF_EDGE_DIR = ((1.0, 0.0), (-1.0, 1.0), (0.0, -1.0))
_REF_EDGE_NORMAL = ((0.0, -1.0), (1.0, 1.0), (-1.0, 0.0))


def rt_dim(q):
    return (q + 1) * (q + 3)


def rt_interior_dim(q):
    return q * (q + 1)


@lru_cache(maxsize=None)
def _rt_spanning(q):
    """Spanning fields of RT_q, described as (kind, a, b).

    kind 0: (D_ab, 0); kind 1: (0, D_ab) for total degree a + b <= q;
    kind 2: (x D_ab, y D_ab) for a + b = q exactly, where D_ab is the
    orthogonal (Dubiner-type) scalar basis of the reference triangle.
    """
    fields = []
    for (a, b) in monomial_exponents(q):
        fields.append((0, a, b))
        fields.append((1, a, b))
    for a in range(q + 1):
        fields.append((2, a, q - a))
    assert len(fields) == rt_dim(q)
    return tuple(fields)


def _pkd_scalars(q, pts):
    """Orthogonal scalar basis of P_q on the reference triangle.

    Returns (vals, gx, gy), each (nscalar, n), ordered like
    monomial_exponents(q).  Evaluated through the singularity-free
    polynomial recurrence, never through the collapsed coordinates.
    """
    from scipy.special import eval_jacobi

    x, y = pts[:, 0], pts[:, 1]
    n = len(x)
    # f_a = (1-y)^a P_a(2x/(1-y) - 1) by recurrence
    f = [np.ones(n)]
    fx = [np.zeros(n)]
    fy = [np.zeros(n)]
    if q >= 1:
        f.append(2 * x + y - 1)
        fx.append(np.full(n, 2.0))
        fy.append(np.ones(n))
    for a in range(2, q + 1):
        u = 2 * x + y - 1
        v = (1 - y) ** 2
        c1, c2 = (2 * a - 1) / a, (a - 1) / a
        f.append(c1 * u * f[a - 1] - c2 * v * f[a - 2])
        fx.append(c1 * (2 * f[a - 1] + u * fx[a - 1]) - c2 * v * fx[a - 2])
        fy.append(c1 * (f[a - 1] + u * fy[a - 1])
                  - c2 * (-2 * (1 - y) * f[a - 2] + v * fy[a - 2]))
    expo = monomial_exponents(q)
    vals = np.empty((len(expo), n))
    gx = np.empty((len(expo), n))
    gy = np.empty((len(expo), n))
    z = 2 * y - 1
    for i, (a, b) in enumerate(expo):
        g = eval_jacobi(b, 2 * a + 1, 0, z)
        dg = ((b + 2 * a + 2) * eval_jacobi(b - 1, 2 * a + 2, 1, z)
              if b > 0 else np.zeros(n))
        vals[i] = f[a] * g
        gx[i] = fx[a] * g
        gy[i] = fy[a] * g + f[a] * dg
    return vals, gx, gy


def eval_rt_spanning(q, points):
    """Spanning-field values and divergences at reference points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    svals, sgx, sgy = _pkd_scalars(q, pts)
    index = {e: i for i, e in enumerate(monomial_exponents(q))}
    span = _rt_spanning(q)
    vals = np.zeros((len(span), len(pts), 2))
    divs = np.zeros((len(span), len(pts)))
    for j, (kind, a, b) in enumerate(span):
        i = index[(a, b)]
        if kind == 0:
            vals[j, :, 0] = svals[i]
            divs[j] = sgx[i]
        elif kind == 1:
            vals[j, :, 1] = svals[i]
            divs[j] = sgy[i]
        else:
            vals[j, :, 0] = x * svals[i]
            vals[j, :, 1] = y * svals[i]
            divs[j] = 2 * svals[i] + x * sgx[i] + y * sgy[i]
    return vals, divs


@lru_cache(maxsize=None)
def rt_dual_coefficients(q):
    """Dual-basis coefficients of RT_q over the spanning set, (ndof, nspan).

    Dof ordering: edge 0 moments m = 0..q, edge 1, edge 2, then interior
    moments against (L_cd, 0), (0, L_cd) for c + d <= q - 1.  Edge moment m
    of sigma is the t-parametric integral of sigma . nu L_m(t) with nu the
    length-scaled outward normal.

    The spanning set is first orthonormalized in L2 over the reference
    triangle (two Cholesky sweeps) so the dual representation stays O(1);
    the dof matrix inverse is polished by one Newton step.
    """
    from scipy.linalg import cholesky, solve_triangular

    from .quadrature import edge_rule, triangle_rule

    ndof = rt_dim(q)
    tri = triangle_rule(2 * (q + 1))
    svals, _ = eval_rt_spanning(q, tri.xy)
    T = np.eye(ndof)
    ovals = svals
    for _ in range(2):
        gram = np.einsum('q,inq->in', tri.weights,
                         np.einsum('iqa,nqa->inq', ovals, ovals))
        L = cholesky(gram, lower=True)
        T = solve_triangular(L, T, lower=True)
        ovals = np.einsum('ij,jqa->iqa', T, svals)

    edq = edge_rule(2 * q + 2)
    t, w = edq.points, edq.weights
    V = np.zeros((ndof, ndof))
    row = 0
    for e in range(3):
        start = np.array(_REF_EDGE_START[e], dtype=float)
        direc = np.array(_REF_EDGE_DIR[e], dtype=float)
        pts = start[None, :] + t[:, None] * direc[None, :]
        es, _ = eval_rt_spanning(q, pts)
        eo = np.einsum('ij,jqa->iqa', T, es)
        flux = eo @ np.array(_REF_EDGE_NORMAL[e], dtype=float)
        for m in range(q + 1):
            Lm = eval_shifted_legendre(m, t)
            V[row] = np.sum(w * Lm * flux, axis=1)
            row += 1
    if q >= 1:
        from numpy.polynomial.legendre import legval
        for (c, d) in monomial_exponents(q - 1):
            ec = np.zeros(c + 1)
            ec[c] = 1.0
            ed = np.zeros(d + 1)
            ed[d] = 1.0
            test = (legval(2 * tri.xy[:, 0] - 1, ec)
                    * legval(2 * tri.xy[:, 1] - 1, ed))
            for comp in (0, 1):
                V[row] = np.einsum('q,iq->i', tri.weights * test, ovals[:, :, comp])
                row += 1
    W = np.linalg.inv(V)
    W = W + W @ (np.eye(ndof) - V @ W)
    return W.T, T


def eval_rt(q, points):
    """Reference RT_q dual-basis values and divergences at points.

    Returns (values (ndof, n, 2), divergences (ndof, n)).  The two factors
    of the dual representation are applied separately: collapsing them into
    a single coefficient matrix loses several digits to cancellation.
    """
    WT, T = rt_dual_coefficients(q)
    svals, sdivs = eval_rt_spanning(q, points)
    vals = np.einsum('ij,jna->ina', WT, np.einsum('ij,jna->ina', T, svals))
    divs = WT @ (T @ sdivs)
    return vals, divs
