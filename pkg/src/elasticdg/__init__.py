"""2D interior-penalty DG linear elasticity with a CR+Z block-diagonal
subspace-correction preconditioner and spectral diagnostics."""

from .mesh import (
    DIRICHLET,
    INTERIOR,
    NEUMANN,
    Mesh,
    classify_boundary,
    lshape_coarse,
    neighbor_set,
    read_mesh,
    refine,
    shape_regularity,
    unit_square_coarse,
    write_mesh,
)
from .dgspace import (
    DofMap,
    SplitVector,
    basis_change_matrix,
    build_dofmap,
    midpoint_project,
    product_identity_check,
    recombine,
    split,
)
from .assembly import (
    LoadSpec,
    MaterialField,
    PenaltyParams,
    apply_elasticity_tensor,
    assemble_A,
    assemble_A0,
    assemble_S_D,
    assemble_consistency,
    assemble_penalty0,
    assemble_penalty1,
    assemble_rhs,
    assemble_volume,
    dg_norms,
    lame_from_engineering,
    write_matrix_market,
)
from .splitting import (
    BlockOperator,
    PreconditionerB,
    apply_preconditioner,
    block_partition,
    build_preconditioner,
    cbs_gamma_sq,
    rho_bound,
    verify_projected_jump_inequality,
    z_block_condition,
)
from .spectral import (
    SolveReport,
    cg,
    cond_precond,
    deflate,
    direct_factorize,
    direct_solve,
    pcg,
    rigid_motion_basis,
    sym_eig_extremes,
)

__version__ = "0.1.0"
