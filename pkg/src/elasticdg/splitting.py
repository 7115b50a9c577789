"""Block structure of the stiffness operator in the split basis and the
block-diagonal subspace-correction preconditioner.

In the split basis (jump slots first, continuity slots second) the
reduced-integration operator is exactly block diagonal; the full operator
adds the off-diagonal coupling of the unprojected jump penalty, whose
strength is the strengthened Cauchy-Schwarz constant gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .dgspace import DofMap, SplitVector, basis_change_matrix
from .mesh import Mesh
from . import spectral
from .spectral import Factorization, SingularMatrixError, direct_factorize


@dataclass
class BlockOperator:
    """2x2 block view of Q^T A Q with jump (z) slots ordered first."""

    A_zz: sp.csr_matrix
    A_zv: sp.csr_matrix
    A_vz: sp.csr_matrix
    A_vv: sp.csr_matrix
    full: sp.csr_matrix
    Q: sp.csr_matrix

    @property
    def n_z(self):
        return self.A_zz.shape[0]

    @property
    def n_v(self):
        return self.A_vv.shape[0]


def block_partition(A: sp.spmatrix, mesh: Mesh, dm: DofMap,
                    Q: sp.spmatrix = None) -> BlockOperator:
    Q = Q if Q is not None else basis_change_matrix(mesh, dm)
    from .dgspace import z_faces

    nz = 2 * len(z_faces(mesh))
    full = (Q.T @ A @ Q).tocsr()
    return BlockOperator(
        A_zz=full[:nz, :nz].tocsr(),
        A_zv=full[:nz, nz:].tocsr(),
        A_vz=full[nz:, :nz].tocsr(),
        A_vv=full[nz:, nz:].tocsr(),
        full=full,
        Q=Q.tocsr(),
    )


@dataclass
class PreconditionerB:
    """Exact block-diagonal subspace correction: one direct solve per
    subspace followed by recombination into nodal coordinates."""

    blocks: BlockOperator
    fact_zz: Factorization
    fact_vv: Factorization

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Action on a nodal residual: restrict to each subspace, solve the
        two diagonal blocks exactly, recombine."""
        Q = self.blocks.Q
        rhat = Q.T @ r
        nz = self.blocks.n_z
        z = spectral.direct_solve(self.fact_zz, rhat[:nz])
        v = spectral.direct_solve(self.fact_vv, rhat[nz:])
        return Q @ np.concatenate([z, v])

    def apply_split(self, rhat: np.ndarray) -> np.ndarray:
        nz = self.blocks.n_z
        return np.concatenate([
            spectral.direct_solve(self.fact_zz, rhat[:nz]),
            spectral.direct_solve(self.fact_vv, rhat[nz:]),
        ])


def build_preconditioner(blocks: BlockOperator,
                         pivot_tol=1e-12) -> PreconditionerB:
    fz = direct_factorize(blocks.A_zz, pivot_tol)
    fv = direct_factorize(blocks.A_vv, pivot_tol)
    if fv.near_null_count > 0:
        raise SingularMatrixError(
            f"continuity block is singular ({fv.near_null_count} near-null "
            "pivots); the traction-free problem needs deflation",
            kernel_dim=fv.near_null_count,
        )
    if fz.near_null_count > 0:
        raise SingularMatrixError(
            f"jump block is singular ({fz.near_null_count} near-null pivots)",
            kernel_dim=fz.near_null_count,
        )
    return PreconditionerB(blocks, fz, fv)


def apply_preconditioner(B: PreconditionerB, r: np.ndarray) -> np.ndarray:
    return B.apply(r)


def cbs_gamma_sq(blocks: BlockOperator, method="lanczos", tol=1e-12,
                 maxiter=2000, seed=0) -> float:
    """Largest eigenvalue of A_zv A_vv^-1 A_vz q = gamma^2 A_zz q; the square
    of the cosine of the angle between the two subspaces in the A-inner
    product."""
    fz = direct_factorize(blocks.A_zz)
    fv = direct_factorize(blocks.A_vv)
    if fz.near_null_count or fv.near_null_count:
        raise SingularMatrixError(
            "indefinite or singular diagonal block in the CBS eigenproblem",
            kernel_dim=fz.near_null_count + fv.near_null_count,
        )
    A_zv, A_vz, A_zz = blocks.A_zv, blocks.A_vz, blocks.A_zz
    if method == "dense":
        C = A_zv @ np.linalg.inv(blocks.A_vv.toarray()) @ A_vz.toarray()
        vals = scipy.linalg.eigvalsh(C, A_zz.toarray())
        gamma_sq = float(vals[-1])
    else:
        matvec = lambda q: A_zv @ fv.lu.solve(A_vz @ q)
        out = spectral._lanczos(
            matvec, blocks.n_z,
            msolve=fz.lu.solve,
            mmatvec=lambda q: A_zz @ q,
            maxiter=maxiter, tol=tol, seed=seed,
        )
        if out is None:
            raise spectral.SolverError("CBS eigenproblem did not converge")
        gamma_sq = float(out[1])
    if gamma_sq >= 1.0:
        raise ValueError(f"computed gamma^2 = {gamma_sq} >= 1")
    return max(gamma_sq, 0.0)


def z_block_condition(blocks: BlockOperator, mesh: Mesh,
                      method="lanczos", tol=1e-12, seed=0) -> float:
    """Spectral condition number of the jump block in the unit-jump basis.

    The splitting uses mean-jump coordinates (interior columns carry
    +-1/2), in which each interior generator has jump 1 but the block is
    scaled down by 4 relative to the boundary slots.  For conditioning we
    rescale to the difference basis psi = phi+ - phi- (interior slots
    doubled, Dirichlet slots unchanged), which equalizes the diagonal and
    is the natural basis for the uniform-conditioning bound."""
    from .dgspace import z_faces
    from .mesh import INTERIOR

    zf = z_faces(mesh)
    scale = np.where(mesh.face_kind[zf] == INTERIOR, 2.0, 1.0)
    d = np.repeat(scale, 2)
    D = sp.diags(d)
    Azz = (D @ blocks.A_zz @ D).tocsr()
    lo, hi = spectral.sym_eig_extremes(Azz, method=method, tol=tol, seed=seed)
    if lo <= 0:
        raise SingularMatrixError("jump block is not positive definite")
    return hi / lo


def rho_bound(S: sp.spmatrix, D: sp.spmatrix, method="lanczos") -> float:
    """lambda_max of D^-1/2 S D^-1/2 for the jump-basis Gram matrices."""
    d = np.asarray(D.diagonal())
    scale = sp.diags(1.0 / np.sqrt(d))
    M = (scale @ S @ scale).tocsr()
    if method == "dense" or M.shape[0] <= 400:
        vals = scipy.linalg.eigvalsh(M.toarray())
        return float(vals[-1])
    _, hi = spectral.sym_eig_extremes(M)
    return float(hi)


def verify_projected_jump_inequality(mesh: Mesh, num_samples=200,
                                     seed=0) -> float:
    """Max over random jump-space coefficient vectors of

        sum_E h^-1 ||[z] - P0[z]||^2  /  sum_E h^-1 ||[z]||^2

    which must stay below 1 - 1/rho."""
    from .assembly import assemble_S_D

    S, D = assemble_S_D(mesh)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(num_samples):
        z = rng.standard_normal(S.shape[0])
        szz = float(z @ (S @ z))
        dzz = float(z @ (D @ z))
        if szz <= 0:
            continue
        worst = max(worst, (szz - dzz) / szz)
    return worst
