"""Conforming triangular meshes with tagged boundaries.

Meshes are treated as immutable after construction; refinement returns a
new mesh.  Local edge k of a triangle (v0, v1, v2) joins vertex k to
vertex (k + 1) mod 3, so the counterclockwise traversal of the element
walks its edges in order.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DIRICHLET = "D"
ABSORBING = "A"


class MeshError(Exception):
    pass


class MeshFormatError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class ElementGeometry:
    h: float
    rho: float
    kappa: float
    area: float


@dataclass
class VertexPatch:
    """Elements around a vertex and the classified patch boundary.

    The constrained part of the patch boundary (everything except the
    Dirichlet edges meeting the vertex) is `constrained_boundary`.
    """
    vertex: int
    elements: np.ndarray
    interior_facing: list
    dirichlet_shared: list
    dirichlet_other: list
    absorbing: list
    h: float
    is_dirichlet_vertex: bool

    @property
    def constrained_boundary(self):
        return self.interior_facing + self.dirichlet_other + self.absorbing


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray          # (nv, 2) float
    triangles: np.ndarray         # (nt, 3) int, counterclockwise
    boundary_edges: np.ndarray    # (nb, 2) int
    boundary_tags: np.ndarray     # (nb,) '<U1', DIRICHLET or ABSORBING
    refinement_edge: np.ndarray = field(default=None)  # (nt,) local edge index

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges,
                                                   dtype=np.int64).reshape(-1, 2)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype='<U1')
        if self.refinement_edge is None:
            self.refinement_edge = _longest_edge_labels(self.vertices, self.triangles)
        else:
            self.refinement_edge = np.ascontiguousarray(self.refinement_edge,
                                                        dtype=np.int64)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @cached_property
    def edges(self):
        """Unique edges as sorted (low, high) vertex pairs, (ne, 2)."""
        raw = np.sort(self._tri_edge_pairs.reshape(-1, 2), axis=1)
        return np.unique(raw, axis=0)

    @cached_property
    def _tri_edge_pairs(self):
        t = self.triangles
        return np.stack([t, np.roll(t, -1, axis=1)], axis=-1)  # (nt, 3, 2)

    @cached_property
    def edge_index(self):
        """Map from sorted vertex pair to global edge id."""
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}

    @cached_property
    def tri_edges(self):
        """Global edge id of each local edge, (nt, 3)."""
        pairs = np.sort(self._tri_edge_pairs, axis=-1)
        idx = self.edge_index
        out = np.empty((self.num_triangles, 3), dtype=np.int64)
        for t in range(self.num_triangles):
            for k in range(3):
                out[t, k] = idx[(int(pairs[t, k, 0]), int(pairs[t, k, 1]))]
        return out

    @cached_property
    def edge_tris(self):
        """Adjacent triangles per edge, (ne, 2), -1 when absent."""
        out = np.full((len(self.edges), 2), -1, dtype=np.int64)
        for t in range(self.num_triangles):
            for k in range(3):
                e = self.tri_edges[t, k]
                out[e, 1 if out[e, 0] >= 0 else 0] = t
        return out

    @cached_property
    def boundary_edge_ids(self):
        """Global edge id of each tagged boundary edge, (nb,)."""
        idx = self.edge_index
        out = np.empty(len(self.boundary_edges), dtype=np.int64)
        for i, (a, b) in enumerate(self.boundary_edges):
            key = (int(min(a, b)), int(max(a, b)))
            if key not in idx:
                raise MeshError(f"tagged edge {key} is not a mesh edge")
            out[i] = idx[key]
        return out

    @cached_property
    def edge_tag(self):
        """Boundary tag per global edge, '' on interior edges, (ne,)."""
        tags = np.full(len(self.edges), '', dtype='<U1')
        tags[self.boundary_edge_ids] = self.boundary_tags
        return tags

    @cached_property
    def vertex_tris(self):
        """List of adjacent triangle indices per vertex."""
        out = [[] for _ in range(self.num_vertices)]
        for t, tri in enumerate(self.triangles):
            for v in tri:
                out[int(v)].append(t)
        return out

    @cached_property
    def dirichlet_vertices(self):
        """Vertices on the closure of the Dirichlet boundary."""
        mask = self.boundary_tags == DIRICHLET
        return set(self.boundary_edges[mask].ravel().tolist())

    @cached_property
    def affine_maps(self):
        """Jacobian B (nt, 2, 2), its determinant, and the first vertex."""
        v = self.vertices[self.triangles]
        B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        return B, det, v[:, 0]

    def element_size(self):
        """Diameter h_K of every element, (nt,)."""
        v = self.vertices[self.triangles]
        d01 = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
        d12 = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
        d20 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        return np.max(np.stack([d01, d12, d20]), axis=0)


def _longest_edge_labels(vertices, triangles):
    """Refinement edge = longest local edge, ties broken by vertex pair."""
    out = np.empty(len(triangles), dtype=np.int64)
    for t, tri in enumerate(triangles):
        best = None
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            length = float(np.sum((vertices[a] - vertices[b]) ** 2))
            key = (length, (min(a, b), max(a, b)))
            if best is None or key > best[0]:
                best = (key, k)
        out[t] = best[1]
    return out


def build_cartesian_mesh(n, lo=-1.0, hi=1.0):
    """n x n grid of squares on (lo, hi)^2, each split along the
    lower-left to upper-right diagonal; all boundary edges Absorbing."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(lo, hi, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing='xy')
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    bedges, btags = [], []
    for i in range(n):
        bedges.append((vid(i, 0), vid(i + 1, 0)))
        bedges.append((vid(i, n), vid(i + 1, n)))
        bedges.append((vid(0, i), vid(0, i + 1)))
        bedges.append((vid(n, i), vid(n, i + 1)))
        btags += [ABSORBING] * 4
    return Mesh(vertices, np.array(tris), np.array(bedges), np.array(btags))


def save_mesh(mesh, path):
    """ASCII format: `NV NT NB`, then vertex, triangle, and tagged-edge lines."""
    with open(path, 'w') as f:
        f.write(f"{mesh.num_vertices} {mesh.num_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            f.write(f"{a} {b} {tag}\n")


def load_mesh(path):
    """Parse the ASCII format, validating counts, indices, and conformity."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise MeshFormatError("empty file", line=1)
    head = lines[0].split()
    if len(head) != 3:
        raise MeshFormatError("expected `NV NT NB`", line=1)
    try:
        nv, nt, nb = (int(x) for x in head)
    except ValueError:
        raise MeshFormatError("non-integer counts", line=1)
    if len(lines) < 1 + nv + nt + nb:
        raise MeshFormatError(
            f"expected {1 + nv + nt + nb} lines, found {len(lines)}",
            line=len(lines))

    def parse(lineno, count, kind):
        parts = lines[lineno - 1].split()
        if len(parts) != count:
            raise MeshFormatError(f"expected {count} fields for {kind}", line=lineno)
        return parts

    vertices = np.empty((nv, 2))
    for i in range(nv):
        parts = parse(2 + i, 2, "vertex")
        try:
            vertices[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError("bad vertex coordinates", line=2 + i)
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        parts = parse(2 + nv + i, 3, "triangle")
        try:
            triangles[i] = [int(x) for x in parts]
        except ValueError:
            raise MeshFormatError("bad triangle indices", line=2 + nv + i)
        if triangles[i].min() < 0 or triangles[i].max() >= nv:
            raise MeshFormatError("triangle vertex index out of range",
                                  line=2 + nv + i)
    bedges = np.empty((nb, 2), dtype=np.int64)
    btags = np.empty(nb, dtype='<U1')
    for i in range(nb):
        lineno = 2 + nv + nt + i
        parts = parse(lineno, 3, "boundary edge")
        try:
            bedges[i] = [int(parts[0]), int(parts[1])]
        except ValueError:
            raise MeshFormatError("bad boundary edge indices", line=lineno)
        if bedges[i].min() < 0 or bedges[i].max() >= nv:
            raise MeshFormatError("boundary edge vertex index out of range",
                                  line=lineno)
        if parts[2] not in (DIRICHLET, ABSORBING):
            raise MeshFormatError(f"unknown tag {parts[2]!r}", line=lineno)
        btags[i] = parts[2]
    mesh = Mesh(vertices, triangles, bedges, btags)
    try:
        validate_mesh(mesh)
    except MeshError as exc:
        raise MeshFormatError(str(exc)) from exc
    return mesh


def validate_mesh(mesh):
    """Check orientation, conformity, and boundary tag coverage."""
    _, det, _ = mesh.affine_maps
    bad = np.nonzero(det <= 0)[0]
    if len(bad):
        raise MeshError(f"triangle {bad[0]} is degenerate or clockwise")
    counts = np.bincount(mesh.tri_edges.ravel(), minlength=len(mesh.edges))
    if counts.max() > 2:
        e = int(np.argmax(counts > 2))
        raise MeshError(f"edge {tuple(mesh.edges[e])} shared by {counts[e]} triangles")
    mesh_boundary = set(np.nonzero(counts == 1)[0].tolist())
    tagged = mesh.boundary_edge_ids
    if len(set(tagged.tolist())) != len(tagged):
        raise MeshError("duplicate boundary tags")
    tagged_set = set(tagged.tolist())
    untagged = mesh_boundary - tagged_set
    if untagged:
        e = min(untagged)
        raise MeshError(f"boundary edge {tuple(mesh.edges[e])} is untagged")
    spurious = tagged_set - mesh_boundary
    if spurious:
        e = min(spurious)
        raise MeshError(f"tagged edge {tuple(mesh.edges[e])} is interior")
    # conformity across interior edges holds by construction of the edge
    # table (shared vertex pairs); a hanging node would show up as an edge
    # of one triangle lying inside an edge of another, which the boundary
    # coverage check above catches for closed domains.


def element_geometry(mesh, element):
    v = mesh.vertices[mesh.triangles[element]]
    d = [np.linalg.norm(v[i] - v[(i + 1) % 3]) for i in range(3)]
    area = 0.5 * ((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
                  - (v[2, 0] - v[0, 0]) * (v[1, 1] - v[0, 1]))
    if area <= 0:
        raise MeshError(f"element {element} is degenerate")
    h = max(d)
    rho = 2.0 * area / sum(d)
    return ElementGeometry(h=h, rho=rho, kappa=rho / h, area=area)


def vertex_patch(mesh, vertex):
    """Patch of elements around a vertex with classified boundary edges."""
    elems = sorted(mesh.vertex_tris[vertex])
    if not elems:
        raise MeshError(f"vertex {vertex} has no adjacent elements")
    interior, d_shared, d_other, absorbing = [], [], [], []
    patch_set = set(elems)
    for t in elems:
        for k in range(3):
            e = int(mesh.tri_edges[t, k])
            neighbors = mesh.edge_tris[e]
            other = int(neighbors[0]) if int(neighbors[1]) == t else int(neighbors[1])
            if other >= 0 and other in patch_set:
                continue  # interior to the patch
            tag = mesh.edge_tag[e]
            a, b = (int(x) for x in mesh.edges[e])
            if tag == DIRICHLET:
                (d_shared if vertex in (a, b) else d_other).append(e)
            elif tag == ABSORBING:
                absorbing.append(e)
            else:
                interior.append(e)
    pts = mesh.vertices[np.unique(mesh.triangles[elems])]
    diam = np.sqrt(np.max(np.sum(
        (pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)))
    return VertexPatch(
        vertex=vertex,
        elements=np.array(elems, dtype=np.int64),
        interior_facing=sorted(interior),
        dirichlet_shared=sorted(d_shared),
        dirichlet_other=sorted(d_other),
        absorbing=sorted(absorbing),
        h=float(diam),
        is_dirichlet_vertex=vertex in mesh.dirichlet_vertices,
    )


def refine(mesh, marked):
    """Newest-vertex bisection of the marked elements with conforming closure."""
    marked = sorted(set(int(m) for m in marked))
    if any(m < 0 or m >= mesh.num_triangles for m in marked):
        raise ValueError("marked element out of range")
    if not marked:
        return mesh

    tri_edges = mesh.tri_edges
    ref_local = mesh.refinement_edge
    ref_edge = tri_edges[np.arange(mesh.num_triangles), ref_local]

    split = np.zeros(len(mesh.edges), dtype=bool)
    split[ref_edge[marked]] = True
    while True:
        has_split = split[tri_edges].any(axis=1)
        need = has_split & ~split[ref_edge]
        if not need.any():
            break
        split[ref_edge[need]] = True

    vertices = [mesh.vertices]
    midpoint = np.full(len(mesh.edges), -1, dtype=np.int64)
    next_id = mesh.num_vertices
    for e in np.nonzero(split)[0]:
        a, b = mesh.edges[e]
        vertices.append(0.5 * (mesh.vertices[a] + mesh.vertices[b])[None, :])
        midpoint[e] = next_id
        next_id += 1
    new_vertices = np.concatenate(vertices, axis=0)

    new_tris = []
    new_ref = []

    def emit(a, b, c, r):
        new_tris.append((a, b, c))
        new_ref.append(r)

    def bisect(tri, r, depth):
        """Split tri at the midpoint of its local refinement edge r."""
        a, b, c = tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]
        key = (min(a, b), max(a, b))
        e = mesh.edge_index.get(key, -1)
        m = midpoint[e] if e >= 0 else -1
        if m < 0:
            emit(tri[0], tri[1], tri[2], r)
            return
        # children (a, m, c) and (m, b, c); refinement edges are the
        # remaining parent edges (c, a) and (b, c)
        for child, cr in (((a, m, c), 2), ((m, b, c), 1)):
            if depth == 0:
                bisect(child, cr, 1)
            else:
                emit(child[0], child[1], child[2], cr)

    for t in range(mesh.num_triangles):
        bisect(tuple(int(v) for v in mesh.triangles[t]), int(ref_local[t]), 0)

    new_bedges, new_btags = [], []
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        key = (int(min(a, b)), int(max(a, b)))
        m = midpoint[mesh.edge_index[key]]
        if m < 0:
            new_bedges.append((a, b))
            new_btags.append(tag)
        else:
            new_bedges.append((a, m))
            new_bedges.append((m, b))
            new_btags += [tag, tag]

    return Mesh(new_vertices, np.array(new_tris, dtype=np.int64),
                np.array(new_bedges, dtype=np.int64), np.array(new_btags),
                np.array(new_ref, dtype=np.int64))


def uniform_refine(mesh, times=1):
    for _ in range(times):
        mesh = refine(mesh, range(mesh.num_triangles))
    return mesh
