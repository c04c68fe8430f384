"""Global finite element spaces over a mesh.

Lagrange spaces carry the dof map for continuous P_p fields; the RT
helpers expose the per-element frame (orientation signs, Piola factors)
needed to work with H(div)-conforming RT_q fields whose edge dofs are
Legendre moments of the normal trace in the global edge orientation
(low vertex index to high).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _refbasis as ref
from .mesh import DIRICHLET


def lagrange_dim(p):
    return (p + 1) * (p + 2) // 2


def rt_dim(q):
    return ref.rt_dim(q)


def rt_interior_dim(q):
    return ref.rt_interior_dim(q)


@lru_cache(maxsize=None)
def reference_nodes(p):
    return np.array([[float(x), float(y)] for x, y in ref.lagrange_nodes(p)])


def eval_lagrange_basis(p, points):
    """Reference nodal basis values and gradients at points (n, 2)."""
    return ref.eval_lagrange(p, points)


def eval_rt_basis(q, points):
    """Reference RT_q dual basis values and divergences at points (n, 2)."""
    return ref.eval_rt(q, points)


@dataclass(eq=False)
class LagrangeSpace:
    mesh: object
    degree: int
    elem_dofs: np.ndarray      # (nt, nloc)
    dof_coords: np.ndarray     # (ndof, 2)
    dirichlet_dofs: np.ndarray
    ndof: int

    @property
    def free_dofs(self):
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.nonzero(mask)[0]


def build_lagrange_space(mesh, p):
    if not 1 <= p <= 6:
        raise ValueError("polynomial degree must be in 1..6")
    nv, nt = mesh.num_vertices, mesh.num_triangles
    ne = len(mesh.edges)
    n_edge = p - 1
    n_int = lagrange_dim(p) - 3 - 3 * n_edge
    ndof = nv + ne * n_edge + nt * n_int
    elem_dofs = np.empty((nt, lagrange_dim(p)), dtype=np.int64)
    tris = mesh.triangles
    elem_dofs[:, :3] = tris
    for k in range(3):
        a, b = tris[:, k], tris[:, (k + 1) % 3]
        eids = mesh.tri_edges[:, k]
        forward = a < b
        for i in range(n_edge):
            slot = np.where(forward, i, n_edge - 1 - i)
            elem_dofs[:, 3 + k * n_edge + i] = nv + eids * n_edge + slot
    if n_int:
        base = nv + ne * n_edge
        elem_dofs[:, 3 + 3 * n_edge:] = (base + np.arange(nt)[:, None] * n_int
                                         + np.arange(n_int)[None, :])

    dof_coords = np.empty((ndof, 2))
    dof_coords[:nv] = mesh.vertices
    if n_edge:
        lo = mesh.vertices[mesh.edges[:, 0]]
        hi = mesh.vertices[mesh.edges[:, 1]]
        for i in range(n_edge):
            t = (i + 1) / p
            dof_coords[nv + np.arange(ne) * n_edge + i] = lo + t * (hi - lo)
    if n_int:
        B, _, v0 = mesh.affine_maps
        ref_int = reference_nodes(p)[3 + 3 * n_edge:]
        phys = np.einsum('tab,ib->tia', B, ref_int) + v0[:, None, :]
        base = nv + ne * n_edge
        dof_coords[base:] = phys.reshape(-1, 2)

    dirichlet = set()
    for (a, b), tag, eid in zip(mesh.boundary_edges, mesh.boundary_tags,
                                mesh.boundary_edge_ids):
        if tag == DIRICHLET:
            dirichlet.add(int(a))
            dirichlet.add(int(b))
            for i in range(n_edge):
                dirichlet.add(int(nv + eid * n_edge + i))
    return LagrangeSpace(mesh=mesh, degree=p, elem_dofs=elem_dofs,
                         dof_coords=dof_coords,
                         dirichlet_dofs=np.array(sorted(dirichlet), dtype=np.int64),
                         ndof=ndof)


def locate_point(mesh, point, tol=1e-12):
    """Element containing the point and its reference coordinates."""
    B, det, v0 = mesh.affine_maps
    point = np.asarray(point, dtype=float)
    for t in range(mesh.num_triangles):
        b = point - v0[t]
        x = (B[t, 1, 1] * b[0] - B[t, 0, 1] * b[1]) / det[t]
        y = (-B[t, 1, 0] * b[0] + B[t, 0, 0] * b[1]) / det[t]
        if x >= -tol and y >= -tol and x + y <= 1 + tol:
            return t, np.array([x, y])
    raise ValueError(f"point {point} outside mesh")


def hat_function(mesh, vertex, point):
    """Value and gradient of the piecewise-affine hat of a vertex."""
    t, xy = locate_point(mesh, point)
    tri = mesh.triangles[t]
    lam = np.array([1 - xy[0] - xy[1], xy[0], xy[1]])
    dlam_ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    B, _, _ = mesh.affine_maps
    Binv_T = np.linalg.inv(B[t]).T
    where = np.nonzero(tri == vertex)[0]
    if len(where) == 0:
        return 0.0, np.zeros(2)
    k = int(where[0])
    return float(lam[k]), Binv_T @ dlam_ref[k]


@dataclass(eq=False)
class RTFrame:
    """Per-element data for global RT_q fields.

    Edge dof (e, m) is the integral over [0, 1] of sigma . nu_e L_m(t)
    with t the low-to-high parametrization of global edge e and nu_e the
    length-scaled rotated tangent.  `signs` converts reference dof values
    to global ones; `dof_ids` maps local dofs (edges then interior) to
    global flux dof indices.
    """
    q: int
    n_edge_dofs: int
    signs: np.ndarray      # (nt, ndof_rt) float, +-1
    dof_ids: np.ndarray    # (nt, ndof_rt) int
    ndof: int


def build_rt_frame(mesh, q):
    nt, ne = mesh.num_triangles, len(mesh.edges)
    nloc = rt_dim(q)
    nint = rt_interior_dim(q)
    k_edge = q + 1
    signs = np.ones((nt, nloc))
    dof_ids = np.empty((nt, nloc), dtype=np.int64)
    tris = mesh.triangles
    for k in range(3):
        a, b = tris[:, k], tris[:, (k + 1) % 3]
        eids = mesh.tri_edges[:, k]
        forward = (a < b).astype(float)
        for m in range(k_edge):
            col = k * k_edge + m
            # opposite traversal flips the normal and reverses L_m
            signs[:, col] = np.where(forward > 0.5, 1.0, (-1.0) ** (m + 1))
            dof_ids[:, col] = eids * k_edge + m
    if nint:
        base = ne * k_edge
        dof_ids[:, 3 * k_edge:] = (base + np.arange(nt)[:, None] * nint
                                   + np.arange(nint)[None, :])
    return RTFrame(q=q, n_edge_dofs=k_edge, signs=signs, dof_ids=dof_ids,
                   ndof=ne * k_edge + nt * nint)
