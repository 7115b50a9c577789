"""Acceptance suite.

Each test covers one numbered acceptance criterion against the reference
diagnostic tables the library is validated against, at the stated
tolerance, and prints a single pass/fail line (visible with -s, and in
the captured output on failure)."""

import time

import numpy as np
import pytest

import elasticdg as ed
from elasticdg import cli
from elasticdg.dgspace import build_dofmap
from elasticdg.mesh import Mesh
from elasticdg.spectral import cg

from conftest import LEVELS, NUS, blocks_for, make_mesh

# Reference tables: rows are levels 1..4, keyed by Poisson ratio.
REF_LSHAPE_GAMMA = {
    0.25:    [0.0561, 0.0631, 0.0672, 0.0682],
    0.4:     [0.0202, 0.0233, 0.0252, 0.0257],
    0.49:    [0.0019, 0.0022, 0.0024, 0.0025],
    0.499:   [1.8918e-4, 2.2118e-4, 2.4216e-4, 2.4810e-4],
    0.49999: [1.8906e-6, 2.2106e-6, 2.4207e-6, 2.4801e-6],
}
REF_LSHAPE_COND = {
    0.25:    [1.6204, 1.6713, 1.6997, 1.7073],
    0.4:     [1.3314, 1.3606, 1.3774, 1.3820],
    0.49:    [1.0912, 1.0990, 1.1037, 1.1050],
    0.499:   [1.0279, 1.0302, 1.0316, 1.0320],
    0.49999: [1.0028, 1.0030, 1.0031, 1.0032],
}
REF_LSHAPE_ZZ = {
    0.25:    [8.9067, 9.0875, 9.1577, 9.1794],
    0.4:     [7.1484, 7.1932, 7.2080, 7.2118],
    0.49:    [6.4788, 6.4829, 6.4841, 6.4844],
    0.499:   [6.4220, 6.4229, 6.4230, 6.4230],
    0.49999: [6.4158, 6.4164, 6.4164, 6.4164],
}
REF_SQUARE_GAMMA = {
    0.25:    [0.0664, 0.0678, 0.0684, 0.0686],
    0.4:     [0.025, 0.0255, 0.0258, 0.0259],
    0.49:    [0.0024, 0.0025, 0.0025, 0.0025],
    0.499:   [2.4024e-4, 2.4567e-4, 2.4866e-4, 2.4974e-4],
    0.49999: [2.4015e-6, 2.4559e-6, 2.4857e-6, 2.4966e-6],
}
REF_SQUARE_GAMMA_JUMP = {
    0.3:     [0.0451, 0.0460, 0.0464, 0.0466],
    0.4:     [0.0177, 0.0180, 0.0182, 0.0182],
    0.49:    [0.0442, 0.0689, 0.0689, 0.0689],
    0.499:   [0.0509, 0.0803, 0.0802, 0.0802],
    0.49999: [0.0517, 0.0816, 0.0816, 0.0816],
}


def _report(name, ok, detail=""):
    line = f"{name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def _worst_rel(table, ref):
    worst = 0.0
    for nu, col in ref.items():
        for i, level in enumerate(LEVELS):
            worst = max(worst, abs(table[level, nu] - col[i]) / col[i])
    return worst


def _lshape_criteria_pass(data):
    """Re-evaluates criteria 1-3 from the session tables (used by the
    best-effort clause of criterion 5)."""
    ok = _worst_rel(data["gamma"], REF_LSHAPE_GAMMA) <= 0.10
    ok = ok and _worst_rel(data["cond"], REF_LSHAPE_COND) <= 0.05
    ok = ok and _worst_rel(data["zz"], REF_LSHAPE_ZZ) <= 0.10
    return ok


def test_criterion_1_lshape_gamma_table(lshape_tables):
    worst = _worst_rel(lshape_tables["gamma"], REF_LSHAPE_GAMMA)
    elapsed = lshape_tables["gamma_time"]
    _report(
        "criterion 1 (L-shape gamma^2 table, 10% rel)",
        worst <= 0.10 and elapsed <= 300.0,
        f"worst rel err {worst:.3%}, gamma wall time {elapsed:.0f}s",
    )


def test_criterion_2_preconditioned_condition_table(lshape_tables):
    worst = _worst_rel(lshape_tables["cond"], REF_LSHAPE_COND)
    worst_id = 0.0
    for key, kappa in lshape_tables["cond"].items():
        g = np.sqrt(lshape_tables["gamma"][key])
        worst_id = max(worst_id, abs(kappa - (1 + g) / (1 - g)) / kappa)
    _report(
        "criterion 2 (kappa(B^-1 A) table, 5% rel + 1e-6 identity)",
        worst <= 0.05 and worst_id <= 1e-6,
        f"worst rel err {worst:.3%}, worst identity residual {worst_id:.2e}",
    )


def test_criterion_3_jump_block_condition_table(lshape_tables):
    worst = _worst_rel(lshape_tables["zz"], REF_LSHAPE_ZZ)
    saturated = True
    for nu in NUS:
        col = [lshape_tables["zz"][level, nu] for level in LEVELS]
        saturated = saturated and max(col) <= 1.02 * col[LEVELS.index(3)]
    _report(
        "criterion 3 (kappa(A_zz) table, 10% rel + level saturation)",
        worst <= 0.10 and saturated,
        f"worst rel err {worst:.3%}, saturation {'ok' if saturated else 'violated'}",
    )


def test_criterion_4_near_incompressible_scaling(lshape_tables):
    ok = True
    ratios = []
    for level in LEVELS:
        r1 = (lshape_tables["gamma"][level, 0.499]
              / lshape_tables["gamma"][level, 0.49999])
        r2 = (lshape_tables["gamma"][level, 0.49]
              / lshape_tables["gamma"][level, 0.499])
        ratios.append((r1, r2))
        ok = ok and 90.0 <= r1 <= 110.0 and 9.0 <= r2 <= 11.0
    detail = "; ".join(f"l={l}: {r1:.1f}/{r2:.2f}"
                       for l, (r1, r2) in zip(LEVELS, ratios))
    _report("criterion 4 (gamma^2 scaling with 1-2nu)", ok, detail)


def test_criterion_5_square_tables_best_effort(square_gamma, lshape_tables):
    worst1 = _worst_rel(square_gamma, REF_SQUARE_GAMMA)

    cfg = cli.ExperimentConfig(domain="square", levels=list(LEVELS),
                               nu_list=sorted(REF_SQUARE_GAMMA_JUMP)).validate()
    jump = cli.cmd_gamma_jump(cfg)
    worst2 = 0.0
    for j, nu2 in enumerate(jump.col_labels):
        for i, level in enumerate(jump.row_labels):
            ref = REF_SQUARE_GAMMA_JUMP[nu2][i]
            worst2 = max(worst2, abs(jump.cells[i, j] - ref) / ref)

    within = worst1 <= 0.10 and worst2 <= 0.10
    if within:
        _report("criterion 5 (square tables, best effort 10%)", True,
                f"worst rel err {max(worst1, worst2):.3%}")
    else:
        # best-effort clause: a miss is a BC-assumption mismatch, not a
        # failure, if and only if every L-shape criterion holds
        excused = _lshape_criteria_pass(lshape_tables)
        _report(
            "criterion 5 (square tables, best effort 10%)",
            excused,
            f"BC-assumption mismatch (homogeneous {worst1:.3%}, "
            f"checkerboard {worst2:.3%}); L-shape criteria "
            f"{'pass' if excused else 'FAIL'}",
        )


def test_criterion_6_property_suite():
    t0 = time.time()
    cfg = cli.ExperimentConfig().validate()
    failures = cli.run_verification(cfg)
    elapsed = time.time() - t0
    _report(
        "criterion 6 (structural property suite)",
        failures == 0 and elapsed <= 120.0,
        f"{failures} failing suites, {elapsed:.0f}s",
    )


def test_criterion_7_uniform_jump_block_cg():
    counts = []
    for level in LEVELS:
        mesh = make_mesh("lshape", level)
        blocks = blocks_for(mesh, 0.4)
        rng = np.random.default_rng(3)
        b = rng.standard_normal(blocks.n_z)
        _, rep = cg(blocks.A_zz, b, tol=1e-8)
        assert rep.converged
        counts.append(rep.iterations)
    ratio = max(counts) / min(counts)
    _report(
        "criterion 7 (CG on A_zz, level-uniform iteration counts)",
        ratio <= 1.5,
        f"iterations {counts}, spread factor {ratio:.2f}",
    )
