"""Conforming triangular meshes with oriented faces and boundary tags.

Triangles are stored counterclockwise.  Every edge of every triangle is
recorded exactly once as a Face; interior faces know both neighboring
elements (t_plus / t_minus, fixed by the sign of the face normal against
the elements' outward normals), boundary faces only t_plus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

_KIND_NAMES = {INTERIOR: "interior", DIRICHLET: "dirichlet", NEUMANN: "neumann"}
_KIND_IDS = {v: k for k, v in _KIND_NAMES.items()}


@dataclass(frozen=True)
class Mesh:
    """Immutable conforming triangulation of a planar domain.

    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex ids
    tri_region : (nt,) int array of material-region tags
    face_vertices : (nf, 2) int array, each row sorted ascending; rows are
        ordered lexicographically so face numbering is deterministic
    face_normal : (nf, 2) unit normals
    face_tplus / face_tminus : adjacent element ids (t_minus == -1 on the
        boundary)
    face_kind : INTERIOR / DIRICHLET / NEUMANN per face
    elem_faces : (nt, 3) face id of the edge opposite local vertex j
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    level: int = 0
    # face data, filled in __post_init__
    face_vertices: np.ndarray = field(default=None, repr=False)
    face_normal: np.ndarray = field(default=None, repr=False)
    face_tplus: np.ndarray = field(default=None, repr=False)
    face_tminus: np.ndarray = field(default=None, repr=False)
    face_kind: np.ndarray = field(default=None, repr=False)
    elem_faces: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=int))
        object.__setattr__(self, "tri_region", np.asarray(self.tri_region, dtype=int))
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("vertex coordinates must be finite")
        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("all triangles must be counterclockwise with positive area")
        if self.face_vertices is None:
            self._build_faces()

    # -- construction helpers -------------------------------------------------

    def _build_faces(self):
        tris = self.triangles
        nt = len(tris)
        # edge opposite local vertex j is (v[j+1], v[j+2])
        raw = np.stack(
            [tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1
        ).reshape(-1, 2)
        key = np.sort(raw, axis=1)
        uniq, inverse = np.unique(key, axis=0, return_inverse=True)
        nf = len(uniq)
        elem_faces = inverse.reshape(nt, 3)

        tplus = np.full(nf, -1, dtype=int)
        tminus = np.full(nf, -1, dtype=int)
        for e in range(nt):
            for j in range(3):
                f = elem_faces[e, j]
                if tplus[f] < 0:
                    tplus[f] = e
                else:
                    # lower element id first: that one becomes t_plus
                    tminus[f] = e
        normal = np.empty((nf, 2))
        for f in range(nf):
            n = self._outward_normal(tplus[f], uniq[f])
            normal[f] = n
        kind = np.where(tminus < 0, DIRICHLET, INTERIOR)

        object.__setattr__(self, "face_vertices", uniq)
        object.__setattr__(self, "face_normal", normal)
        object.__setattr__(self, "face_tplus", tplus)
        object.__setattr__(self, "face_tminus", tminus)
        object.__setattr__(self, "face_kind", kind.astype(int))
        object.__setattr__(self, "elem_faces", elem_faces)

    def _outward_normal(self, e, vpair):
        a, b = self.vertices[vpair[0]], self.vertices[vpair[1]]
        t = b - a
        n = np.array([t[1], -t[0]])
        n /= np.hypot(*n)
        opp = [v for v in self.triangles[e] if v not in vpair][0]
        if np.dot(n, self.vertices[opp] - a) > 0:
            n = -n
        return n

    # -- queries --------------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_faces(self):
        return len(self.face_vertices)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def face_lengths(self):
        p = self.vertices[self.face_vertices]
        return np.hypot(*(p[:, 1] - p[:, 0]).T)

    def face_midpoints(self):
        p = self.vertices[self.face_vertices]
        return 0.5 * (p[:, 0] + p[:, 1])

    def boundary_faces(self):
        return np.flatnonzero(self.face_tminus < 0)

    def interior_faces(self):
        return np.flatnonzero(self.face_tminus >= 0)

    def faces_of_kind(self, kind):
        return np.flatnonzero(self.face_kind == kind)

    def local_face_index(self, elem, face):
        """Local index (0..2) of global `face` within `elem`."""
        j = np.flatnonzero(self.elem_faces[elem] == face)
        if len(j) == 0:
            raise ValueError(f"face {face} not on element {elem}")
        return int(j[0])


def unit_square_coarse() -> Mesh:
    """Eight-triangle mesh of (0,1)^2: a 2x2 grid of squares, each cut along
    the diagonal from its lower-left to upper-right corner."""
    xs = np.linspace(0.0, 1.0, 3)
    vid = lambda i, j: 3 * j + i
    vertices = np.array([[xs[i], xs[j]] for j in range(3) for i in range(3)])
    tris = []
    for j in range(2):
        for i in range(2):
            ll, lr = vid(i, j), vid(i + 1, j)
            ul, ur = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append([ll, lr, ur])
            tris.append([ll, ur, ul])
    tris = np.array(tris)
    return Mesh(vertices, tris, np.zeros(len(tris), dtype=int))


def lshape_coarse() -> Mesh:
    """Four-triangle mesh of [0,1]^2 minus (0.5,1]x(0.5,1], fanned from the
    reentrant corner.  All four triangles are similar (right isosceles),
    the same similarity class as the unit-square coarse mesh."""
    vertices = np.array(
        [[0.5, 0.5], [0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0]]
    )
    tris = np.array([[0, 1, 2], [0, 2, 3], [0, 4, 5], [0, 5, 1]])
    return Mesh(vertices, tris, np.zeros(4, dtype=int))


def refine(mesh: Mesh) -> Mesh:
    """Red refinement: replace every triangle by four congruent children via
    edge midpoints.  Region tags are inherited; boundary-face kinds carry over
    to the child halves of the parent face."""
    nv = mesh.num_vertices
    mid_of_face = np.arange(mesh.num_faces) + nv
    midpoints = mesh.face_midpoints()
    vertices = np.vstack([mesh.vertices, midpoints])

    tris = []
    regions = []
    for e in range(mesh.num_triangles):
        v0, v1, v2 = mesh.triangles[e]
        # elem_faces[e, j] is opposite local vertex j
        m0 = mid_of_face[mesh.elem_faces[e, 0]]  # midpoint of (v1, v2)
        m1 = mid_of_face[mesh.elem_faces[e, 1]]  # midpoint of (v2, v0)
        m2 = mid_of_face[mesh.elem_faces[e, 2]]  # midpoint of (v0, v1)
        tris += [[v0, m2, m1], [m2, v1, m0], [m1, m0, v2], [m0, m1, m2]]
        regions += [mesh.tri_region[e]] * 4
    fine = Mesh(vertices, np.array(tris), np.array(regions), level=mesh.level + 1)

    # each child boundary face has exactly one endpoint that is a parent-face
    # midpoint; inherit that parent face's kind
    kind = fine.face_kind.copy()
    for f in fine.boundary_faces():
        a, b = fine.face_vertices[f]
        parent = (a - nv) if a >= nv else (b - nv)
        kind[f] = mesh.face_kind[parent]
    object.__setattr__(fine, "face_kind", kind)
    return fine


def classify_boundary(mesh: Mesh, neumann_predicate=None) -> Mesh:
    """Return a copy of `mesh` whose boundary faces are tagged NEUMANN where
    the face midpoint satisfies `neumann_predicate(x, y)`, else DIRICHLET.
    `None` tags the whole boundary Dirichlet (pure displacement)."""
    kind = mesh.face_kind.copy()
    mids = mesh.face_midpoints()
    for f in mesh.boundary_faces():
        if neumann_predicate is not None and neumann_predicate(*mids[f]):
            kind[f] = NEUMANN
        else:
            kind[f] = DIRICHLET
    out = Mesh(
        mesh.vertices,
        mesh.triangles,
        mesh.tri_region,
        level=mesh.level,
        face_vertices=mesh.face_vertices,
        face_normal=mesh.face_normal,
        face_tplus=mesh.face_tplus,
        face_tminus=mesh.face_tminus,
        face_kind=kind,
        elem_faces=mesh.elem_faces,
    )
    return out


def neighbor_set(mesh: Mesh, face: int, order: int):
    """Incidence sets around a face.

    order 0: ids of elements containing the face;
    order 1: faces sharing an element with it (the face itself included);
    order 2: faces sharing a member of the order-1 set.
    """
    if order == 0:
        out = {int(mesh.face_tplus[face])}
        if mesh.face_tminus[face] >= 0:
            out.add(int(mesh.face_tminus[face]))
        return out
    if order == 1:
        out = set()
        for e in neighbor_set(mesh, face, 0):
            out.update(int(f) for f in mesh.elem_faces[e])
        return out
    if order == 2:
        n1 = neighbor_set(mesh, face, 1)
        out = set()
        for f in n1:
            out.update(neighbor_set(mesh, f, 1))
        return out
    raise ValueError("order must be 0, 1 or 2")


def shape_regularity(mesh: Mesh) -> float:
    """Max over elements of circumradius / inradius."""
    p = mesh.vertices[mesh.triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = mesh.signed_areas()
    if np.any(area <= 0):
        raise ValueError("degenerate triangle")
    s = 0.5 * (a + b + c)
    inradius = area / s
    circumradius = a * b * c / (4.0 * area)
    return float(np.max(circumradius / inradius))


def write_mesh(mesh: Mesh, path):
    """Plain-text export; round-trips bit-exactly through read_mesh."""
    lines = [
        f"vertices {mesh.num_vertices} faces {mesh.num_faces} "
        f"triangles {mesh.num_triangles}"
    ]
    for x, y in mesh.vertices:
        lines.append(f"v {x:.17g} {y:.17g}")
    for (i, j, k), r in zip(mesh.triangles, mesh.tri_region):
        lines.append(f"t {i} {j} {k} {r}")
    for f in mesh.boundary_faces():
        i, j = mesh.face_vertices[f]
        lines.append(f"b {i} {j} {_KIND_NAMES[int(mesh.face_kind[f])]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if header[0] != "vertices":
            raise ValueError("bad mesh header")
        vertices, tris, regions, tags = [], [], [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(parts[1]), float(parts[2])])
            elif parts[0] == "t":
                tris.append([int(parts[1]), int(parts[2]), int(parts[3])])
                regions.append(int(parts[4]))
            elif parts[0] == "b":
                tags.append((int(parts[1]), int(parts[2]), _KIND_IDS[parts[3]]))
    mesh = Mesh(np.array(vertices), np.array(tris), np.array(regions))
    if tags:
        kind = mesh.face_kind.copy()
        lookup = {
            tuple(sorted(mesh.face_vertices[f])): f for f in mesh.boundary_faces()
        }
        for i, j, k in tags:
            kind[lookup[tuple(sorted((i, j)))]] = k
        object.__setattr__(mesh, "face_kind", kind)
    return mesh
