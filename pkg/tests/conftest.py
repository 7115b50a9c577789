"""Shared fixtures: refined meshes and the session-wide diagnostic tables
used by the acceptance suite."""

import time

import numpy as np
import pytest

import elasticdg as ed
from elasticdg.dgspace import build_dofmap
from elasticdg.spectral import cond_precond

NUS = (0.25, 0.4, 0.49, 0.499, 0.49999)
LEVELS = (1, 2, 3, 4)


def mixed_pred(x, y):
    return abs(y) < 1e-12 or abs(y - 1.0) < 1e-12


def make_mesh(domain, level, pred=mixed_pred):
    m = ed.unit_square_coarse() if domain == "square" else ed.lshape_coarse()
    for _ in range(level):
        m = ed.refine(m)
    return ed.classify_boundary(m, pred)


def blocks_for(mesh, nu, young=1.0):
    dm = build_dofmap(mesh)
    mat = ed.MaterialField.homogeneous(mesh, young, nu)
    A = ed.assemble_A(mesh, mat, dm=dm)
    return ed.block_partition(A, mesh, dm)


@pytest.fixture(scope="session")
def lshape_tables():
    """gamma^2, kappa(B^-1 A) and kappa(A_zz) on the L-shape for all
    (level, nu) cells, plus the wall time spent on the gamma cells."""
    gamma, cond, zz = {}, {}, {}
    gamma_time = 0.0
    for level in LEVELS:
        mesh = make_mesh("lshape", level)
        for nu in NUS:
            blocks = blocks_for(mesh, nu)
            t0 = time.time()
            gamma[level, nu] = ed.cbs_gamma_sq(blocks)
            gamma_time += time.time() - t0
            cond[level, nu] = cond_precond(blocks)
            zz[level, nu] = ed.z_block_condition(blocks, mesh)
    return {"gamma": gamma, "cond": cond, "zz": zz,
            "gamma_time": gamma_time}


@pytest.fixture(scope="session")
def square_gamma():
    out = {}
    for level in LEVELS:
        mesh = make_mesh("square", level)
        for nu in NUS:
            out[level, nu] = ed.cbs_gamma_sq(blocks_for(mesh, nu))
    return out


@pytest.fixture(scope="session")
def level2_square():
    return make_mesh("square", 2)


@pytest.fixture(scope="session")
def level2_lshape():
    return make_mesh("lshape", 2)
