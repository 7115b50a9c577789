"""DG space: dof enumeration, traces, split basis, change of basis."""

import numpy as np
import pytest

import elasticdg as ed
from elasticdg.dgspace import (
    build_dofmap,
    eval_basis,
    face_gauss_points,
    jump_values,
    local_basis_gradients,
    midpoint_project,
    product_identity_check,
    split,
    trace_values,
    unit_split_vector,
    v_faces,
    z_faces,
)
from elasticdg.mesh import DIRICHLET, INTERIOR, NEUMANN

from conftest import make_mesh


@pytest.fixture
def mesh():
    return make_mesh("square", 1)


def test_dofmap_enumeration(mesh):
    dm = build_dofmap(mesh)
    assert dm.ndofs == 6 * mesh.num_triangles
    seen = {dm.index(e, j, k)
            for e in range(mesh.num_triangles)
            for j in range(3) for k in range(2)}
    assert seen == set(range(dm.ndofs))


def test_basis_is_nodal_at_midpoints(mesh):
    mids = mesh.face_midpoints()
    for e in range(4):
        pts = mids[mesh.elem_faces[e]]
        vals = eval_basis(mesh, e, pts)
        # basis j equals 1 at the midpoint of local face j, 0 at the others
        assert np.allclose(vals, np.eye(3), atol=1e-13)


def test_basis_partition_of_unity(mesh):
    rng = np.random.default_rng(0)
    for e in range(4):
        p = mesh.vertices[mesh.triangles[e]]
        w = rng.dirichlet(np.ones(3), size=5)
        pts = w @ p
        assert np.allclose(eval_basis(mesh, e, pts).sum(axis=1), 1.0)


def test_gradients_match_finite_differences(mesh):
    g = local_basis_gradients(mesh)
    h = 1e-7
    for e in range(3):
        c = mesh.vertices[mesh.triangles[e]].mean(axis=0)
        for d, step in enumerate(np.eye(2) * h):
            fd = (eval_basis(mesh, e, c + step) - eval_basis(mesh, e, c - step)) / (2 * h)
            assert np.allclose(fd.ravel(), g[e, :, d], atol=1e-6)


def test_face_partition(mesh):
    zf, vf = z_faces(mesh), v_faces(mesh)
    interior = np.flatnonzero(mesh.face_kind == INTERIOR)
    assert set(interior) <= set(zf) and set(interior) <= set(vf)
    assert set(zf) | set(vf) == set(range(mesh.num_faces))
    assert set(zf) & set(vf) == set(interior)


def test_traces_and_midpoint_projection(mesh):
    dm = build_dofmap(mesh)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(dm.ndofs)
    mids = mesh.face_midpoints()
    for f in range(mesh.num_faces):
        mp = midpoint_project(u, mesh, dm, f, "jump")
        direct = jump_values(u, mesh, dm, f, mids[f][None, :])[0]
        assert np.allclose(mp, direct, atol=1e-13)
        # mean of the 2-point Gauss trace equals the midpoint value (linear)
        pts = face_gauss_points(mesh, f)
        tr = trace_values(u, mesh, dm, f, pts).mean(axis=0)
        assert np.allclose(tr, midpoint_project(u, mesh, dm, f, "plus"),
                           atol=1e-13)


def test_split_recombine_round_trip():
    rng = np.random.default_rng(2)
    for domain in ("square", "lshape"):
        mesh = make_mesh(domain, 2)
        dm = build_dofmap(mesh)
        for _ in range(5):
            u = rng.standard_normal(dm.ndofs)
            back = ed.recombine(split(u, mesh, dm), mesh, dm)
            assert np.linalg.norm(back - u) <= 1e-13 * np.linalg.norm(u)


def test_split_dimensions_add_up(mesh):
    dm = build_dofmap(mesh)
    s = split(np.zeros(dm.ndofs), mesh, dm)
    assert len(s.z) + len(s.v) == dm.ndofs
    assert len(s.z) == 2 * len(z_faces(mesh))


def test_change_of_basis_columns(mesh):
    dm = build_dofmap(mesh)
    Q = ed.basis_change_matrix(mesh, dm)
    assert Q.shape == (dm.ndofs, dm.ndofs)
    vals = set(np.round(Q.data, 12))
    assert vals <= {1.0, 0.5, -0.5}
    # every column holds at most 2 nonzeros
    assert (Q.tocsc().getnnz(axis=0) <= 2).all()


def test_unit_split_vectors_have_unit_jump_or_average(mesh):
    dm = build_dofmap(mesh)
    for f in z_faces(mesh)[:6]:
        u = ed.recombine(unit_split_vector(mesh, dm, f, 0, "z"), mesh, dm)
        jump = midpoint_project(u, mesh, dm, f, "jump")
        assert np.allclose(jump, [1.0, 0.0], atol=1e-13)
    for f in v_faces(mesh)[:6]:
        u = ed.recombine(unit_split_vector(mesh, dm, f, 1, "v"), mesh, dm)
        avg = midpoint_project(u, mesh, dm, f, "avg")
        assert np.allclose(avg, [0.0, 1.0], atol=1e-13)


def test_product_identity():
    rng = np.random.default_rng(3)
    worst = max(abs(product_identity_check(*rng.standard_normal(4)))
                for _ in range(1000))
    assert worst <= 1e-14
    # also with a non-scalar bilinear product
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    res = product_identity_check(a[0], a[1], b[0], b[1],
                                 product=lambda x, y: np.outer(x, y))
    assert np.max(np.abs(res)) <= 1e-14
