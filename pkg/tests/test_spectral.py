"""Solvers and eigenvalue machinery: CG/PCG, factorizations, Lanczos
extremes, deflation, rigid motions."""

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

import elasticdg as ed
from elasticdg.dgspace import build_dofmap
from elasticdg.spectral import (
    Factorization,
    SingularMatrixError,
    SolverError,
    _lanczos,
    cg,
    cond_precond,
    deflate,
    direct_factorize,
    direct_solve,
    pcg,
    rigid_motion_basis,
    sym_eig_extremes,
)

from conftest import blocks_for, make_mesh


def random_spd(n, seed, cond=1e4):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = np.geomspace(1.0, cond, n)
    return Q @ np.diag(vals) @ Q.T, vals


def test_cg_solves_spd_system():
    A, _ = random_spd(80, 0)
    rng = np.random.default_rng(1)
    b = rng.standard_normal(80)
    x, rep = cg(A, b, tol=1e-10)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_cg_monotone_energy_error():
    A, _ = random_spd(40, 2, cond=100)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(40)
    xstar = np.linalg.solve(A, b)
    errors = []
    for it in range(1, 15):
        x, _ = cg(A, b, tol=0.0, maxit=it)
        e = x - xstar
        errors.append(float(e @ (A @ e)))
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errors, errors[1:]))


def test_cg_breakdown_on_indefinite():
    A = np.diag([1.0, -1.0, 2.0])
    with pytest.raises(SolverError):
        cg(A, np.array([1.0, 1.0, 1.0]), maxit=10)


def test_pcg_accepts_callable_and_object():
    A, _ = random_spd(50, 4)
    d = np.diag(A).copy()
    b = np.ones(50)
    x1, r1 = pcg(A, lambda r: r / d, b, tol=1e-10)
    x2, r2 = pcg(A, None, b, tol=1e-10)
    assert r1.converged and r2.converged
    assert np.allclose(x1, x2, atol=1e-7 * np.linalg.norm(x1))


def test_direct_factorize_and_refined_solve():
    A = sp.csc_matrix(random_spd(60, 5)[0])
    f = direct_factorize(A)
    assert f.near_null_count == 0
    b = np.arange(60, dtype=float)
    x = direct_solve(f, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_singular_matrix_detected():
    v = np.ones(5)
    A = sp.csc_matrix(np.outer(v, v) + 1e-16 * np.eye(5))
    try:
        f = direct_factorize(A)
        assert f.near_null_count >= 1
        with pytest.raises(SingularMatrixError):
            direct_solve(f, v)
    except SingularMatrixError:
        pass  # exactly singular at factorization time is also acceptable


def test_lanczos_extremes_match_dense():
    A, vals = random_spd(120, 6)
    lo, hi = sym_eig_extremes(sp.csr_matrix(A))
    assert abs(lo - vals[0]) <= 1e-8 * vals[-1]
    assert abs(hi - vals[-1]) <= 1e-8 * vals[-1]


def test_generalized_lanczos_matches_dense():
    A, _ = random_spd(70, 7)
    M, _ = random_spd(70, 8, cond=50)
    lo, hi = sym_eig_extremes(sp.csr_matrix(A), sp.csr_matrix(M))
    ref = scipy.linalg.eigvalsh(A, M)
    assert abs(lo - ref[0]) <= 1e-7 * abs(ref[-1])
    assert abs(hi - ref[-1]) <= 1e-7 * abs(ref[-1])


def test_lanczos_exact_on_invariant_subspace():
    A = np.diag([1.0, 2.0, 3.0])
    lo, hi = sym_eig_extremes(A)
    assert np.isclose(lo, 1.0) and np.isclose(hi, 3.0)


def test_ritz_inclusion_on_discretization():
    mesh = make_mesh("lshape", 1)
    blocks = blocks_for(mesh, 0.4)
    dense = scipy.linalg.eigvalsh(blocks.A_zz.toarray())
    lo, hi = sym_eig_extremes(blocks.A_zz)
    eps = 1e-8 * dense[-1]
    assert dense[0] - eps <= lo and hi <= dense[-1] + eps


def test_lanczos_stable_for_stiff_schur_pencil():
    # near-incompressible material makes the Schur-complement pencil stiff
    mesh = make_mesh("lshape", 2)
    for nu in (0.499, 0.49999):
        blocks = blocks_for(mesh, nu)
        g_lan = ed.cbs_gamma_sq(blocks, method="lanczos")
        g_dense = ed.cbs_gamma_sq(blocks, method="dense")
        assert np.isfinite(g_lan)
        assert np.isclose(g_lan, g_dense, rtol=1e-7)


def test_cond_precond_matches_dense_pencil():
    mesh = make_mesh("square", 1)
    blocks = blocks_for(mesh, 0.25)
    B = sp.block_diag([blocks.A_zz, blocks.A_vv]).toarray()
    ref = scipy.linalg.eigvalsh(blocks.full.toarray(), B)
    kappa = cond_precond(blocks)
    assert np.isclose(kappa, ref[-1] / ref[0], rtol=1e-8)


def test_rigid_motion_basis_spans_kernel():
    mesh = make_mesh("square", 2, pred=lambda x, y: True)
    dm = build_dofmap(mesh)
    mat = ed.MaterialField.homogeneous(mesh, 1.0, 0.4)
    A = ed.assemble_A(mesh, mat, dm=dm)
    R = rigid_motion_basis(mesh, dm)
    assert R.shape == (dm.ndofs, 3)
    assert np.linalg.matrix_rank(R) == 3
    assert abs(A @ R).max() <= 1e-11 * abs(A).max()


def test_deflation_idempotent_and_annihilating():
    rng = np.random.default_rng(9)
    A, _ = random_spd(40, 10)
    basis = rng.standard_normal((40, 3))
    op = deflate(A, basis)
    x = rng.standard_normal(40)
    once = op(x)
    twice = op(op.projector(x))
    assert np.allclose(once, twice, atol=1e-12 * np.linalg.norm(once))
    # deflated directions are annihilated
    assert np.linalg.norm(op(basis[:, 0])) <= 1e-10 * np.linalg.norm(A)


def test_deflated_pure_neumann_solve():
    mesh = make_mesh("square", 2, pred=lambda x, y: True)
    dm = build_dofmap(mesh)
    mat = ed.MaterialField.homogeneous(mesh, 1.0, 0.3)
    A = ed.assemble_A(mesh, mat, dm=dm)
    R = rigid_motion_basis(mesh, dm)
    op = deflate(A, R)
    rng = np.random.default_rng(11)
    b = op.projector(rng.standard_normal(dm.ndofs))
    x, rep = cg(op, b, tol=1e-8)
    assert rep.converged
    assert np.linalg.norm(op.projector(A @ x) - b) <= 1e-6 * np.linalg.norm(b)
