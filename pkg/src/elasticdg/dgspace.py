"""Vector-valued piecewise-linear DG space in the face-midpoint nodal basis.

Degrees of freedom live per element: for element e, local face j and
component k the global index is ``(3*e + j)*2 + k``.  The scalar basis
function attached to (e, j) is 1 - 2*lambda_j in barycentric coordinates,
i.e. it equals 1 at the midpoint of the edge opposite vertex j and 0 at
the other two edge midpoints.

The same module holds the change of basis between the nodal representation
and the split one: a "mean-jump" coefficient per face carrying a jump slot
(interior or Dirichlet) plus a "mean-average" coefficient per face carrying
a continuity slot (interior or Neumann).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DIRICHLET, INTERIOR, NEUMANN, Mesh

# 2-point Gauss rule on [0, 1], exact for cubics
GAUSS2_POINTS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS2_WEIGHTS = np.array([0.5, 0.5])


@dataclass(frozen=True)
class DofMap:
    """Deterministic enumeration of the nodal dofs of a mesh."""

    mesh: Mesh

    @property
    def ndofs(self) -> int:
        return 6 * self.mesh.num_triangles

    def index(self, elem: int, local_face: int, comp: int) -> int:
        return (3 * elem + local_face) * 2 + comp

    def scalar_index(self, elem: int, local_face: int) -> int:
        return 3 * elem + local_face

    def face_dofs(self, face: int, side: str = "plus"):
        """The two (x, y) dof indices of the midpoint value on `face` seen
        from t_plus or t_minus."""
        m = self.mesh
        elem = m.face_tplus[face] if side == "plus" else m.face_tminus[face]
        if elem < 0:
            raise ValueError(f"face {face} has no {side} side")
        j = m.local_face_index(elem, face)
        base = self.index(elem, j, 0)
        return np.array([base, base + 1])


def build_dofmap(mesh: Mesh) -> DofMap:
    return DofMap(mesh)


@dataclass
class SplitVector:
    """Coefficients in the split basis: `z` indexed by (interior+Dirichlet
    face, component), `v` by (interior+Neumann face, component)."""

    z: np.ndarray
    v: np.ndarray


def z_faces(mesh: Mesh) -> np.ndarray:
    """Faces carrying a jump coefficient, ascending face id."""
    return np.flatnonzero(
        (mesh.face_kind == INTERIOR) | (mesh.face_kind == DIRICHLET)
    )


def v_faces(mesh: Mesh) -> np.ndarray:
    """Faces carrying a continuity (mean-average) coefficient."""
    return np.flatnonzero(
        (mesh.face_kind == INTERIOR) | (mesh.face_kind == NEUMANN)
    )


def local_basis_gradients(mesh: Mesh):
    """Gradients of the three midpoint basis functions, shape (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    # barycentric gradients
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (nt,2,2)
    Jinv = np.linalg.inv(J)
    g12 = Jinv  # rows: grad lambda_1, grad lambda_2
    g0 = -(g12[:, 0, :] + g12[:, 1, :])
    glam = np.stack([g0, g12[:, 0, :], g12[:, 1, :]], axis=1)
    return -2.0 * glam


def eval_basis(mesh: Mesh, elem: int, points: np.ndarray) -> np.ndarray:
    """Values of the three scalar midpoint basis functions of `elem` at the
    given physical points, shape (npts, 3)."""
    points = np.atleast_2d(points)
    p = mesh.vertices[mesh.triangles[elem]]
    A = np.column_stack([p[1] - p[0], p[2] - p[0]])
    loc = np.linalg.solve(A, (points - p[0]).T).T
    lam = np.column_stack([1.0 - loc[:, 0] - loc[:, 1], loc[:, 0], loc[:, 1]])
    return 1.0 - 2.0 * lam


def face_gauss_points(mesh: Mesh, face: int) -> np.ndarray:
    a, b = mesh.vertices[mesh.face_vertices[face]]
    return a[None, :] + GAUSS2_POINTS[:, None] * (b - a)[None, :]


def trace_values(u: np.ndarray, mesh: Mesh, dm: DofMap, face: int,
                 points: np.ndarray, side: str = "plus") -> np.ndarray:
    """Trace of the DG field `u` on `face` at physical `points`, taken from
    the requested side; shape (npts, 2)."""
    m = mesh
    elem = m.face_tplus[face] if side == "plus" else m.face_tminus[face]
    if elem < 0:
        raise ValueError(f"face {face} has no {side} side")
    phi = eval_basis(m, elem, points)  # (npts, 3)
    coeffs = u[6 * elem: 6 * elem + 6].reshape(3, 2)
    return phi @ coeffs


def jump_values(u, mesh, dm, face, points):
    plus = trace_values(u, mesh, dm, face, points, "plus")
    if mesh.face_tminus[face] < 0:
        return plus
    return plus - trace_values(u, mesh, dm, face, points, "minus")


def average_values(u, mesh, dm, face, points):
    plus = trace_values(u, mesh, dm, face, points, "plus")
    if mesh.face_tminus[face] < 0:
        return plus
    return 0.5 * (plus + trace_values(u, mesh, dm, face, points, "minus"))


def midpoint_project(u: np.ndarray, mesh: Mesh, dm: DofMap, face: int,
                     which: str = "plus") -> np.ndarray:
    """Mean value over `face` of the requested trace quantity of `u`.

    For piecewise linears this is the value at the face midpoint, so it
    reads off nodal coefficients directly.  `which` is one of
    'plus', 'minus', 'jump', 'avg'.
    """
    plus = u[dm.face_dofs(face, "plus")]
    boundary = mesh.face_tminus[face] < 0
    if which == "plus":
        return plus
    if which == "minus":
        if boundary:
            raise ValueError("boundary face has no minus trace")
        return u[dm.face_dofs(face, "minus")]
    if boundary:
        # boundary convention: jump and average both equal the trace
        return plus
    minus = u[dm.face_dofs(face, "minus")]
    if which == "jump":
        return plus - minus
    if which == "avg":
        return 0.5 * (plus + minus)
    raise ValueError(f"unknown trace quantity {which!r}")


def split(u: np.ndarray, mesh: Mesh, dm: DofMap) -> SplitVector:
    """Decompose a nodal DG vector into mean-average and mean-jump parts."""
    zf, vf = z_faces(mesh), v_faces(mesh)
    z = np.empty(2 * len(zf))
    v = np.empty(2 * len(vf))
    for i, f in enumerate(zf):
        z[2 * i: 2 * i + 2] = midpoint_project(u, mesh, dm, f, "jump")
    for i, f in enumerate(vf):
        v[2 * i: 2 * i + 2] = midpoint_project(u, mesh, dm, f, "avg")
    return SplitVector(z=z, v=v)


def recombine(s: SplitVector, mesh: Mesh, dm: DofMap) -> np.ndarray:
    return basis_change_matrix(mesh, dm) @ np.concatenate([s.z, s.v])


def basis_change_matrix(mesh: Mesh, dm: DofMap) -> sp.csr_matrix:
    """Sparse Q with recombine(s) = Q [z; v].

    Columns are ordered jump slots first (ascending face id, components
    interleaved) then continuity slots.  Each column holds the nodal
    coefficients of one split basis function: +-1/2 on the two sides of an
    interior jump column, +1 on both sides of an interior continuity
    column, +1 on the single side of a boundary column.
    """
    zf, vf = z_faces(mesh), v_faces(mesh)
    rows, cols, vals = [], [], []

    def put(col, face, side, weight):
        for k, dof in enumerate(dm.face_dofs(face, side)):
            rows.append(dof)
            cols.append(2 * col + k)
            vals.append(weight)

    for i, f in enumerate(zf):
        if mesh.face_tminus[f] >= 0:
            put(i, f, "plus", 0.5)
            put(i, f, "minus", -0.5)
        else:
            put(i, f, "plus", 1.0)
    off = len(zf)
    for i, f in enumerate(vf):
        put(off + i, f, "plus", 1.0)
        if mesh.face_tminus[f] >= 0:
            put(off + i, f, "minus", 1.0)

    n = dm.ndofs
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def unit_split_vector(mesh: Mesh, dm: DofMap, face: int, comp: int,
                      part: str) -> SplitVector:
    """Split vector with a single unit coefficient on (face, comp)."""
    zf, vf = z_faces(mesh), v_faces(mesh)
    s = SplitVector(z=np.zeros(2 * len(zf)), v=np.zeros(2 * len(vf)))
    if part == "z":
        i = int(np.flatnonzero(zf == face)[0])
        s.z[2 * i + comp] = 1.0
    else:
        i = int(np.flatnonzero(vf == face)[0])
        s.v[2 * i + comp] = 1.0
    return s


def product_identity_check(a_plus, a_minus, b_plus, b_minus, product=None):
    """Residual of the two-sided product identity

        a+ * b+ - a- * b- = [a] * {b} + {a} * [b]

    with [x] = x+ - x- and {x} = (x+ + x-)/2, for any bilinear `product`
    (defaults to scalar / elementwise multiplication)."""
    if product is None:
        product = lambda x, y: x * y
    jump_a, avg_a = a_plus - a_minus, 0.5 * (a_plus + a_minus)
    jump_b, avg_b = b_plus - b_minus, 0.5 * (b_plus + b_minus)
    lhs = product(a_plus, b_plus) - product(a_minus, b_minus)
    rhs = product(jump_a, avg_b) + product(avg_a, jump_b)
    return float(np.max(np.abs(np.asarray(lhs - rhs))))
