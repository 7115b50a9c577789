"""Linear solvers and symmetric (generalized) eigenvalue extremes.

The eigensolver is Lanczos with full reorthogonalization, run in the
M-inner product for generalized pencils A x = lambda M x; a dense
tridiagonalization path backs it up at small sizes for verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class SingularMatrixError(SolverError):
    def __init__(self, msg, kernel_dim=None):
        super().__init__(msg)
        self.kernel_dim = kernel_dim


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool


def _as_operator(A):
    if callable(A):
        return A
    return lambda x: A @ x


def cg(A, b, tol=1e-8, maxit=None, x0=None):
    """Plain conjugate gradients; `A` may be a sparse matrix or a matvec."""
    return pcg(A, None, b, tol=tol, maxit=maxit, x0=x0)


def pcg(A, B, b, tol=1e-8, maxit=None, x0=None):
    """Preconditioned CG.  `B` applies the preconditioner (an object with
    .apply, a callable, or None)."""
    matvec = _as_operator(A)
    if B is None:
        prec = lambda r: r
    elif hasattr(B, "apply"):
        prec = B.apply
    else:
        prec = _as_operator(B)
    n = len(b)
    maxit = maxit or 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return x, SolveReport(0, 0.0, True)
    z = prec(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxit + 1):
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise SolverError(f"CG breakdown at iteration {it}: p'Ap = {pAp}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / normb
        if not np.isfinite(rel):
            raise SolverError("CG diverged (non-finite residual)")
        if rel <= tol:
            return x, SolveReport(it, rel, True)
        z = prec(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(maxit, rel, False)


@dataclass
class Factorization:
    """Sparse LU of a symmetric matrix with near-null pivot bookkeeping."""

    lu: object
    matrix: sp.spmatrix
    near_null_count: int
    pivot_tol: float


def direct_factorize(A, pivot_tol=1e-12) -> Factorization:
    """Factorize a symmetric sparse matrix; counts pivots below
    pivot_tol * max pivot as near-null."""
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:  # exactly singular
        raise SingularMatrixError(f"factorization failed: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    near_null = int(np.sum(piv < pivot_tol * piv.max()))
    return Factorization(lu, A, near_null, pivot_tol)


def direct_solve(fact: Factorization, b: np.ndarray) -> np.ndarray:
    """Solve via the factorization with one step of iterative refinement."""
    if fact.near_null_count > 0:
        raise SingularMatrixError(
            f"matrix is singular to pivot tolerance "
            f"({fact.near_null_count} near-null pivots)",
            kernel_dim=fact.near_null_count,
        )
    x = fact.lu.solve(b)
    x += fact.lu.solve(b - fact.matrix @ x)
    return x


def _lanczos(matvec, n, msolve=None, mmatvec=None, maxiter=None, tol=1e-12,
             seed=0):
    """Lanczos with full reorthogonalization in the M-inner product.

    Returns the extreme Ritz values of the pencil (A, M).  With
    msolve/mmatvec omitted this is the standard symmetric problem.
    """
    ident = lambda x: x
    msolve = msolve or ident
    mmatvec = mmatvec or ident
    maxiter = min(maxiter or 4 * n, n)
    rng = np.random.default_rng(seed)

    v = rng.standard_normal(n)
    w = mmatvec(v)
    beta_sq = float(v @ w)
    if not np.isfinite(beta_sq) or beta_sq <= 0.0:
        raise SolverError(
            "metric is not positive definite on the start vector"
        )
    beta = np.sqrt(beta_sq)
    v, w = v / beta, w / beta
    V = [v]
    W = [w]  # W[i] = M V[i]
    alphas, betas = [], []
    prev = None
    for j in range(maxiter):
        u = matvec(V[j])
        alpha = float(V[j] @ u)
        r = msolve(u) - alpha * V[j]
        if j > 0:
            r -= betas[-1] * V[j - 1]
        # full M-reorthogonalization, twice for safety; c_i = (M V_i) . r
        Vm = np.array(V)
        Wm = np.array(W)
        for _ in range(2):
            c = Wm @ r
            r -= c @ Vm
        # recompute M r from scratch: deriving it incrementally drifts and
        # the derived beta^2 = r' M r can go negative for stiff pencils
        mr = mmatvec(r)
        alphas.append(alpha)
        beta = float(r @ mr)
        beta = np.sqrt(beta) if beta > 0 and np.isfinite(beta) else 0.0
        lo, hi = _tridiag_extremes(alphas, betas)
        scale = max(abs(lo), abs(hi), 1e-300)
        if beta <= 1e-14 * scale:
            return lo, hi  # invariant subspace: extremes exact
        if prev is not None and j >= 8:
            if (abs(lo - prev[0]) <= tol * scale
                    and abs(hi - prev[1]) <= tol * scale):
                return lo, hi
        prev = (lo, hi)
        betas.append(beta)
        V.append(r / beta)
        W.append(mr / beta)
    return prev


def _tridiag_extremes(alphas, betas):
    if len(alphas) == 1:
        return alphas[0], alphas[0]
    vals = scipy.linalg.eigvalsh_tridiagonal(
        np.asarray(alphas), np.asarray(betas[: len(alphas) - 1])
    )
    return float(vals[0]), float(vals[-1])


def sym_eig_extremes(A, M=None, method="lanczos", maxiter=None, tol=1e-12,
                     seed=0):
    """Extreme eigenvalues (lambda_min, lambda_max) of A x = lambda M x.

    A is a sparse/dense matrix or a matvec callable (then `n` is inferred
    from M or must be given via a matrix).  method 'dense' uses a full
    tridiagonalization, available up to desk scale for verification.
    """
    if method == "dense":
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        if M is None:
            vals = scipy.linalg.eigvalsh(Ad)
        else:
            Md = M.toarray() if sp.issparse(M) else np.asarray(M)
            vals = scipy.linalg.eigvalsh(Ad, Md)
        return float(vals[0]), float(vals[-1])
    if callable(A):
        if M is None:
            raise ValueError("matvec input needs an explicit metric for sizing")
        matvec, n = A, M.shape[0]
    else:
        matvec, n = _as_operator(A), A.shape[0]
    if M is None:
        out = _lanczos(matvec, n, maxiter=maxiter, tol=tol, seed=seed)
    else:
        fact = direct_factorize(M)
        out = _lanczos(
            matvec, n,
            msolve=fact.lu.solve,
            mmatvec=_as_operator(M),
            maxiter=maxiter, tol=tol, seed=seed,
        )
    if out is None:
        raise SolverError("Lanczos failed to converge")
    return out


def rigid_motion_basis(mesh, dm=None):
    """Nodal interpolants of (1,0), (0,1) and (-y, x); columns of the
    returned (ndofs, 3) array."""
    from .dgspace import build_dofmap

    dm = dm or build_dofmap(mesh)
    mids = mesh.face_midpoints()
    R = np.zeros((dm.ndofs, 3))
    for e in range(mesh.num_triangles):
        for j in range(3):
            x, y = mids[mesh.elem_faces[e, j]]
            ix, iy = dm.index(e, j, 0), dm.index(e, j, 1)
            R[ix, 0] = 1.0
            R[iy, 1] = 1.0
            R[ix, 2] = -y
            R[iy, 2] = x
    return R


def deflate(A, basis):
    """Project the span of `basis` out of a symmetric operator: returns a
    matvec computing P A P x with P the orthogonal projector onto the
    complement.  Idempotent: deflating again changes nothing."""
    Q, _ = np.linalg.qr(np.asarray(basis, dtype=float))
    matvec = _as_operator(A)

    def project(x):
        return x - Q @ (Q.T @ x)

    def apply(x):
        return project(matvec(project(x)))

    apply.projector = project
    apply.n = basis.shape[0]
    return apply


def cond_precond(blocks, tol=1e-12, maxiter=1500, seed=0):
    """Spectral condition number of the block-diagonal-preconditioned
    operator: extremes of the pencil (A, B) with B = blkdiag(A_zz, A_vv),
    computed as 1 + extremes of the shifted pencil (A - B, B)."""
    A = blocks.full
    n = A.shape[0]
    nz = blocks.A_zz.shape[0]
    B = sp.block_diag([blocks.A_zz, blocks.A_vv]).tocsc()
    E = (A - B).tocsr()
    fz = direct_factorize(blocks.A_zz)
    fv = direct_factorize(blocks.A_vv)
    if fz.near_null_count or fv.near_null_count:
        raise SingularMatrixError(
            "singular preconditioner block",
            kernel_dim=fz.near_null_count + fv.near_null_count,
        )

    def bsolve(x):
        out = np.empty_like(x)
        out[:nz] = fz.lu.solve(x[:nz])
        out[nz:] = fv.lu.solve(x[nz:])
        return out

    out = _lanczos(
        lambda x: E @ x, n,
        msolve=bsolve, mmatvec=lambda x: B @ x,
        maxiter=maxiter, tol=tol, seed=seed,
    )
    if out is None:
        raise SolverError("Lanczos failed to converge on the (A,B) pencil")
    mu_min, mu_max = out
    lo, hi = 1.0 + mu_min, 1.0 + mu_max
    if lo <= 0:
        raise SolverError("preconditioned operator not positive definite")
    return hi / lo
