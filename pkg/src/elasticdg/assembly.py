"""Assembly of the interior-penalty bilinear forms for 2D linear elasticity.

The full stiffness operator is

    A  =  volume - consistency + theta * consistency^T + penalty0 + penalty1

with theta = -1 for the symmetric method, and the reduced-integration
variant

    A0 =  volume - consistency - consistency^T + penalty0

which penalizes only the face-mean (projected) jumps.  All integrands are
at most quadratic: the volume term is exact (constant strain per element),
the consistency and projected-penalty terms use the midpoint rule where it
is exact, the full-jump penalty uses 2-point Gauss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dgspace import (
    DofMap,
    GAUSS2_POINTS,
    build_dofmap,
    eval_basis,
    face_gauss_points,
    local_basis_gradients,
    z_faces,
)
from .mesh import DIRICHLET, INTERIOR, NEUMANN, Mesh

DIM = 2

# Weight of the dilatational penalty: beta0 = 3*lam + 2*mu = E/(1 - 2*nu),
# the largest eigenvalue of the three-dimensional isotropic stiffness
# tensor (three times the bulk modulus).  Using the 3D value keeps the
# projected-jump penalty scaled to the full dilatational stiffness in the
# incompressible limit; the reference condition numbers this library is
# validated against were produced with this weight.
BETA0_TRACE_WEIGHT = 3.0


def lame_from_engineering(young: float, poisson: float):
    """Plane-strain Lame parameters (mu, lam) from Young's modulus and
    Poisson ratio."""
    if young <= 0:
        raise ValueError("Young's modulus must be positive")
    if not 0.0 <= poisson < 0.5:
        raise ValueError("Poisson ratio must lie in [0, 0.5)")
    mu = young / (2.0 * (1.0 + poisson))
    lam = poisson * young / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


def apply_elasticity_tensor(A: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """2*mu*A + lam*trace(A)*I for a symmetric 2x2 matrix."""
    return 2.0 * mu * A + lam * np.trace(A) * np.eye(2)


@dataclass
class MaterialField:
    """Per-region (Young's modulus, Poisson ratio), resolved to per-element
    Lame parameters and per-face penalty weights on a given mesh.

    At a face between two regions the penalty weights take the larger of
    the two side values; the traction average keeps each side's own tensor.
    """

    mesh: Mesh
    regions: dict  # region id -> (young, poisson)
    mu: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)
    beta0: np.ndarray = field(init=False)  # per face, = 3*lam + 2*mu
    beta1: np.ndarray = field(init=False)  # per face, = 2*mu

    def __post_init__(self):
        m = self.mesh
        mu = np.empty(m.num_triangles)
        lam = np.empty(m.num_triangles)
        for r, (young, poisson) in self.regions.items():
            sel = m.tri_region == r
            mu[sel], lam[sel] = lame_from_engineering(young, poisson)
        missing = set(np.unique(m.tri_region)) - set(self.regions)
        if missing:
            raise ValueError(f"no material for regions {sorted(missing)}")
        self.mu, self.lam = mu, lam
        w = BETA0_TRACE_WEIGHT
        b0 = w * lam[m.face_tplus] + 2.0 * mu[m.face_tplus]
        b1 = 2.0 * mu[m.face_tplus]
        interior = m.face_tminus >= 0
        tm = m.face_tminus[interior]
        b0[interior] = np.maximum(b0[interior], w * lam[tm] + 2.0 * mu[tm])
        b1[interior] = np.maximum(b1[interior], 2.0 * mu[tm])
        self.beta0, self.beta1 = b0, b1

    @classmethod
    def homogeneous(cls, mesh: Mesh, young: float, poisson: float):
        regions = {int(r): (young, poisson) for r in np.unique(mesh.tri_region)}
        return cls(mesh, regions)


@dataclass(frozen=True)
class PenaltyParams:
    alpha0: float = 4.0
    alpha1: float = 1.0
    theta: int = -1


@dataclass
class LoadSpec:
    """Body force and Neumann traction, both (x, y) -> 2-vector."""

    body_force: callable = None
    traction: callable = None


def _element_strains(mesh: Mesh):
    """Strain tensors of the 6 nodal basis fields per element: (nt, 6, 2, 2),
    dof order (face0.x, face0.y, face1.x, ...)."""
    grads = local_basis_gradients(mesh)  # (nt, 3, 2)
    nt = mesh.num_triangles
    eps = np.zeros((nt, 6, 2, 2))
    for j in range(3):
        for k in range(2):
            a = 2 * j + k
            # sym(e_k outer grad phi_j)
            eps[:, a, k, :] += 0.5 * grads[:, j, :]
            eps[:, a, :, k] += 0.5 * grads[:, j, :]
    return eps


def _apply_C(eps, mu, lam):
    """Elasticity tensor applied along the last two axes; mu/lam broadcast
    over the leading axes."""
    tr = np.trace(eps, axis1=-2, axis2=-1)
    out = 2.0 * mu[..., None, None] * eps
    out[..., 0, 0] += lam * tr
    out[..., 1, 1] += lam * tr
    return out


def assemble_volume(mesh: Mesh, mat: MaterialField) -> sp.csr_matrix:
    """(C eps(u) : eps(w)) summed over elements; block diagonal 6x6."""
    eps = _element_strains(mesh)
    sig = _apply_C(eps, mat.mu[:, None], mat.lam[:, None])
    area = mesh.signed_areas()
    K = np.einsum("t,tajk,tbjk->tab", area, sig, eps)
    return sp.block_diag([K[t] for t in range(mesh.num_triangles)]).tocsr()


def _grad_seminorm_matrix(mesh: Mesh) -> sp.csr_matrix:
    """(grad u : grad w) summed over elements, for the broken H1 seminorm."""
    grads = local_basis_gradients(mesh)
    G = np.einsum("tjx,tkx->tjk", grads, grads) * mesh.signed_areas()[:, None, None]
    blocks = [np.kron(G[t], np.eye(2)) for t in range(mesh.num_triangles)]
    return sp.block_diag(blocks).tocsr()


def _face_sides(mesh: Mesh, dm: DofMap, face: int):
    """(element, local face, sign) pairs entering the jump on `face`."""
    sides = [(int(mesh.face_tplus[face]), 1.0)]
    if mesh.face_tminus[face] >= 0:
        sides.append((int(mesh.face_tminus[face]), -1.0))
    return sides


def assemble_consistency(mesh: Mesh, mat: MaterialField,
                         dm: DofMap = None) -> sp.csr_matrix:
    """Face matrix C with C[w, u] = ({(C eps(u)) n}, [w]) over interior and
    Dirichlet faces.  The integrand is constant x linear, so the midpoint
    rule is exact."""
    dm = dm or build_dofmap(mesh)
    eps = _element_strains(mesh)
    hE = mesh.face_lengths()
    rows, cols, vals = [], [], []
    for f in range(mesh.num_faces):
        if mesh.face_kind[f] == NEUMANN:
            continue
        n = mesh.face_normal[f]
        sides = _face_sides(mesh, dm, f)
        w_avg = 1.0 / len(sides)
        # rows: the two midpoint dofs carrying [w](m_E) from each side
        row_dofs, row_signs = [], []
        for elem, sign in sides:
            d = dm.face_dofs(f, "plus" if sign > 0 else "minus")
            row_dofs.append(d)
            row_signs.append(sign)
        for elem, _ in sides:
            sig = _apply_C(eps[elem], np.full(6, mat.mu[elem]), mat.lam[elem])
            tn = sig @ n  # (6, 2): traction of each trial dof
            for b in range(6):
                col = 6 * elem + b
                for d, s in zip(row_dofs, row_signs):
                    for k in range(2):
                        rows.append(d[k])
                        cols.append(col)
                        vals.append(hE[f] * w_avg * s * tn[b, k])
    n = dm.ndofs
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _projected_jump_matrix(mesh: Mesh, dm: DofMap, coeff: np.ndarray,
                           scalar: bool = False) -> sp.csr_matrix:
    """sum_E coeff[E] * <P0[u], P0[v]> over interior and Dirichlet faces."""
    comps = 1 if scalar else 2
    rows, cols, vals = [], [], []
    for f in z_faces(mesh):
        sides = _face_sides(mesh, dm, f)
        for e1, s1 in sides:
            j1 = mesh.local_face_index(e1, f)
            for e2, s2 in sides:
                j2 = mesh.local_face_index(e2, f)
                for k in range(comps):
                    if scalar:
                        r = dm.scalar_index(e1, j1)
                        c = dm.scalar_index(e2, j2)
                    else:
                        r = dm.index(e1, j1, k)
                        c = dm.index(e2, j2, k)
                    rows.append(r)
                    cols.append(c)
                    vals.append(coeff[f] * s1 * s2)
    n = comps * 3 * mesh.num_triangles
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _full_jump_matrix(mesh: Mesh, dm: DofMap, coeff: np.ndarray,
                      scalar: bool = False) -> sp.csr_matrix:
    """sum_E coeff[E]/h_E * int_E <[u], [v]> with 2-point Gauss (exact)."""
    comps = 1 if scalar else 2
    hE = mesh.face_lengths()
    rows, cols, vals = [], [], []
    for f in z_faces(mesh):
        pts = face_gauss_points(mesh, f)
        sides = _face_sides(mesh, dm, f)
        # scalar trace table: per side, values of the 3 basis fns at pts
        tabs = [sign * eval_basis(mesh, elem, pts) for elem, sign in sides]
        dof_sets = [
            [dm.scalar_index(elem, j) if scalar else dm.index(elem, j, 0)
             for j in range(3)]
            for elem, _ in sides
        ]
        # int_E = h * sum_q w_q; with the 1/h factor only coeff remains
        for (t1, ds1) in zip(tabs, dof_sets):
            for (t2, ds2) in zip(tabs, dof_sets):
                loc = coeff[f] * (t1.T * GAUSS2_WEIGHTS_ROW) @ t2
                for a in range(3):
                    for b in range(3):
                        for k in range(comps):
                            rows.append(ds1[a] + (0 if scalar else k))
                            cols.append(ds2[b] + (0 if scalar else k))
                            vals.append(loc[a, b])
    n = comps * 3 * mesh.num_triangles
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


GAUSS2_WEIGHTS_ROW = np.array([0.5, 0.5])


def assemble_penalty0(mesh: Mesh, mat: MaterialField, alpha0: float = 4.0,
                      dm: DofMap = None) -> sp.csr_matrix:
    """alpha0 * beta0 * sum_E int_E <h^-1 [u], P0[v]>; equals
    alpha0*beta0*(|E|/h_E) <P0[u], P0[v]> per face."""
    dm = dm or build_dofmap(mesh)
    hE = mesh.face_lengths()
    coeff = alpha0 * mat.beta0 * hE / hE  # |E|/h_E = 1 in 2D, kept explicit
    return _projected_jump_matrix(mesh, dm, coeff)


def assemble_penalty1(mesh: Mesh, mat: MaterialField, alpha1: float = 1.0,
                      dm: DofMap = None) -> sp.csr_matrix:
    dm = dm or build_dofmap(mesh)
    return _full_jump_matrix(mesh, dm, alpha1 * mat.beta1)


def assemble_A0(mesh: Mesh, mat: MaterialField,
                pen: PenaltyParams = PenaltyParams(),
                dm: DofMap = None) -> sp.csr_matrix:
    dm = dm or build_dofmap(mesh)
    vol = assemble_volume(mesh, mat)
    con = assemble_consistency(mesh, mat, dm)
    p0 = assemble_penalty0(mesh, mat, pen.alpha0, dm)
    return (vol - con - con.T + p0).tocsr()


def assemble_A(mesh: Mesh, mat: MaterialField,
               pen: PenaltyParams = PenaltyParams(),
               dm: DofMap = None) -> sp.csr_matrix:
    dm = dm or build_dofmap(mesh)
    vol = assemble_volume(mesh, mat)
    con = assemble_consistency(mesh, mat, dm)
    p0 = assemble_penalty0(mesh, mat, pen.alpha0, dm)
    p1 = assemble_penalty1(mesh, mat, pen.alpha1, dm)
    A = (vol - con + pen.theta * con.T + p0 + p1).tocsr()
    if pen.theta == -1:
        _coercivity_probe(A, mesh, dm)
    return A


class CoercivityError(RuntimeError):
    pass


def _coercivity_probe(A, mesh, dm, seed=1234):
    """Cheap sanity probe: a random vector must not produce a negative
    Rayleigh quotient relative to the matrix scale."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0])
    q = float(x @ (A @ x))
    scale = abs(A).max() * float(x @ x)
    if q < -1e-10 * scale:
        raise CoercivityError(
            f"negative Rayleigh quotient {q:.3e} on probe vector; "
            "penalty parameter too small?"
        )


def assemble_rhs(mesh: Mesh, mat: MaterialField, load: LoadSpec,
                 dm: DofMap = None) -> np.ndarray:
    """Load vector: volume term by the midpoint (degree-2) rule, Neumann
    traction by 2-point Gauss; homogeneous Dirichlet data contributes
    nothing."""
    dm = dm or build_dofmap(mesh)
    b = np.zeros(dm.ndofs)
    if load.body_force is not None:
        area = mesh.signed_areas()
        for e in range(mesh.num_triangles):
            # quadrature nodes are the edge midpoints = the nodal points
            for j in range(3):
                mid = mesh.face_midpoints()[mesh.elem_faces[e, j]]
                fx, fy = load.body_force(*mid)
                w = area[e] / 3.0
                b[dm.index(e, j, 0)] += w * fx
                b[dm.index(e, j, 1)] += w * fy
    if load.traction is not None:
        hE = mesh.face_lengths()
        for f in mesh.faces_of_kind(NEUMANN):
            e = int(mesh.face_tplus[f])
            pts = face_gauss_points(mesh, f)
            phi = eval_basis(mesh, e, pts)  # (2, 3)
            for q, (x, y) in enumerate(pts):
                gx, gy = load.traction(x, y)
                w = hE[f] * GAUSS2_WEIGHTS_ROW[q]
                for j in range(3):
                    b[dm.index(e, j, 0)] += w * phi[q, j] * gx
                    b[dm.index(e, j, 1)] += w * phi[q, j] * gy
    return b


def assemble_S_D(mesh: Mesh):
    """Scalar Gram data of the jump-slot basis: S[E', E''] integrates
    h^-1 [psi_E'][psi_E''] over interior and Dirichlet faces; D is the
    diagonal |E|/h_E."""
    dm = build_dofmap(mesh)
    zf = z_faces(mesh)
    # scalar penalty-1 matrix with unit coefficient, nodal scalar basis
    P = _full_jump_matrix(mesh, dm, np.ones(mesh.num_faces), scalar=True)
    # scalar jump-slot basis vectors in nodal coordinates
    rows, cols, vals = [], [], []
    for i, f in enumerate(zf):
        for elem, sign in _face_sides(mesh, dm, f):
            j = mesh.local_face_index(elem, f)
            rows.append(dm.scalar_index(elem, j))
            cols.append(i)
            vals.append(sign * 0.5 if mesh.face_tminus[f] >= 0 else 1.0)
    Qz = sp.csr_matrix((vals, (rows, cols)),
                       shape=(3 * mesh.num_triangles, len(zf)))
    S = (Qz.T @ P @ Qz).tocsr()
    hE = mesh.face_lengths()
    D = sp.diags(hE[zf] / hE[zf]).tocsr()  # |E|/h_E = 1 for edges
    return S, D


def dg_norms(u: np.ndarray, mesh: Mesh, mat: MaterialField,
             dm: DofMap = None) -> dict:
    """Squared norms: the projected-jump energy norm, the full-jump energy
    norm, and the broken H1 norm with both jump terms."""
    dm = dm or build_dofmap(mesh)
    vol = assemble_volume(mesh, mat)
    p0 = assemble_penalty0(mesh, mat, 1.0, dm)   # beta0-weighted P0 jumps
    p1 = assemble_penalty1(mesh, mat, 1.0, dm)   # beta1-weighted full jumps
    grad = _grad_seminorm_matrix(mesh)
    energy = float(u @ (vol @ u))
    j0 = float(u @ (p0 @ u))
    j1 = float(u @ (p1 @ u))
    h1 = float(u @ (grad @ u))
    return {
        "dg0": energy + j0,
        "dg": energy + j0 + j1,
        "h1_broken": h1 + j0 + j1,
    }


def write_matrix_market(A: sp.spmatrix, path):
    """Matrix Market coordinate export, symmetric real."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(A), symmetry="symmetric")
