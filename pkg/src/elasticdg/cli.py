"""Experiment driver for the DG elasticity splitting.

Subcommands reproduce the CBS-constant and condition-number tables
(`gamma`, `gamma-jump`, `cond`), solve load cases with the block
preconditioner (`solve`), and run the structural property suites
(`verify`).  Tables are emitted as CSV (full precision) or markdown
(4 significant digits); every cell carries the configuration hash so a
run can be reproduced exactly.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    DIRICHLET,
    INTERIOR,
    NEUMANN,
    Mesh,
    classify_boundary,
    lshape_coarse,
    neighbor_set,
    refine,
    unit_square_coarse,
)
from .dgspace import (
    build_dofmap,
    product_identity_check,
    recombine,
    split,
)
from .assembly import (
    CoercivityError,
    LoadSpec,
    MaterialField,
    PenaltyParams,
    apply_elasticity_tensor,
    assemble_A,
    assemble_A0,
    assemble_S_D,
    assemble_rhs,
    lame_from_engineering,
)
from .splitting import (
    block_partition,
    build_preconditioner,
    cbs_gamma_sq,
    rho_bound,
    verify_projected_jump_inequality,
    z_block_condition,
)
from . import spectral
from .spectral import (
    SolverError,
    cg,
    cond_precond,
    deflate,
    pcg,
    rigid_motion_basis,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

DEFAULT_NU_LIST = (0.25, 0.4, 0.49, 0.499, 0.49999)
DEFAULT_JUMP_NU_LIST = (0.3, 0.4, 0.49, 0.499, 0.49999)


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated description of one table or solve run."""

    domain: str = "lshape"
    levels: list = field(default_factory=lambda: [1, 2, 3, 4])
    nu_list: list = field(default_factory=lambda: list(DEFAULT_NU_LIST))
    young: float = 1.0
    alpha0: float = 4.0
    alpha1: float = 1.0
    theta: int = -1
    bc: str = "mixed"
    neumann_sides: list = field(default_factory=lambda: ["y=0", "y=1"])
    material_regions: dict = None  # checkerboard: {"nu1", "young1", "young2"}
    output: str = "csv"
    seed: int = 0

    def validate(self):
        if self.domain not in ("square", "lshape"):
            raise UsageError(f"unknown domain {self.domain!r}")
        if self.bc not in ("pure-dirichlet", "mixed", "pure-neumann"):
            raise UsageError(f"unknown bc {self.bc!r}")
        if self.output not in ("csv", "md", "markdown"):
            raise UsageError(f"unknown output format {self.output!r}")
        if not self.levels:
            raise UsageError("levels must be nonempty")
        for l in self.levels:
            if not (0 <= int(l) <= 4):
                raise UsageError(f"level {l} outside [0, 4]")
        for nu in self.nu_list:
            if not (0.0 <= nu < 0.5):
                raise UsageError(f"Poisson ratio {nu} outside [0, 0.5)")
        if self.young <= 0:
            raise UsageError("Young's modulus must be positive")
        for side in self.neumann_sides:
            _parse_side(side)
        return self

    @classmethod
    def from_sources(cls, path=None, overrides=None):
        data = {}
        if path is not None:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {path}: {exc}") from exc
            unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise UsageError(f"unknown config fields {sorted(unknown)}")
        for key, val in (overrides or {}).items():
            if val is not None:
                data[key] = val
        return cls(**data).validate()


def config_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _parse_side(side: str):
    try:
        axis, value = side.split("=")
        axis = axis.strip()
        value = float(value)
    except ValueError as exc:
        raise UsageError(f"boundary side {side!r} is not 'x=c' or 'y=c'") from exc
    if axis not in ("x", "y"):
        raise UsageError(f"boundary side {side!r} is not 'x=c' or 'y=c'")
    return axis, value


def neumann_predicate(cfg: ExperimentConfig):
    if cfg.bc == "pure-dirichlet":
        return None
    if cfg.bc == "pure-neumann":
        return lambda x, y: True
    sides = [_parse_side(s) for s in cfg.neumann_sides]

    def pred(x, y, sides=sides, tol=1e-12):
        p = {"x": x, "y": y}
        return any(abs(p[axis] - value) <= tol for axis, value in sides)

    return pred


def checkerboard_regions(mesh: Mesh) -> Mesh:
    """Tag the diagonal quadrants ([0,.5]^2 and [.5,1]^2) as region 1, the
    off-diagonal quadrants as region 2."""
    mids = mesh.vertices[mesh.triangles].mean(axis=1)
    diag = ((mids[:, 0] < 0.5) & (mids[:, 1] < 0.5)) | (
        (mids[:, 0] >= 0.5) & (mids[:, 1] >= 0.5)
    )
    if mesh.level != 0:
        raise UsageError("checkerboard regions must be set on the coarsest mesh")
    return Mesh(mesh.vertices, mesh.triangles, np.where(diag, 1, 2))


def make_mesh(cfg: ExperimentConfig, level: int, checkerboard=False) -> Mesh:
    if cfg.domain == "square":
        m = unit_square_coarse()
    else:
        m = lshape_coarse()
    if checkerboard:
        if cfg.domain != "square":
            raise UsageError("checkerboard material is defined on the square only")
        m = checkerboard_regions(m)
    for _ in range(int(level)):
        m = refine(m)
    return classify_boundary(m, neumann_predicate(cfg))


@dataclass
class TableResult:
    """Complete (level x nu) grid of one diagnostic quantity."""

    name: str
    row_labels: list
    col_labels: list
    cells: np.ndarray
    metadata: dict

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("incomplete table grid")

    def to_csv(self) -> str:
        lines = ["table,level,nu,value,config_hash"]
        h = self.metadata["config_hash"]
        for i, lvl in enumerate(self.row_labels):
            for j, nu in enumerate(self.col_labels):
                lines.append(
                    f"{self.name},{lvl},{nu:.17g},{self.cells[i, j]:.17g},{h}"
                )
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        head = [self.name] + [f"nu={nu:g}" for nu in self.col_labels]
        rows = [head, ["---"] * len(head)]
        for i, lvl in enumerate(self.row_labels):
            rows.append(
                [f"l={lvl}"] + [f"{v:.4g}" for v in self.cells[i]]
            )
        widths = [max(len(r[k]) for r in rows) for k in range(len(head))]
        out = []
        for r in rows:
            out.append("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |")
        notes = [f"config {self.metadata['config_hash']}"]
        for key in ("bc_note", "table_note"):
            if key in self.metadata:
                notes.append(self.metadata[key])
        return "\n".join(out) + "\n" + "; ".join(notes) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_markdown()


def _base_metadata(cfg: ExperimentConfig) -> dict:
    meta = {"config_hash": config_hash(cfg), "domain": cfg.domain, "bc": cfg.bc}
    if cfg.domain == "square":
        meta["bc_note"] = (
            "bc-assumption: reference layout for the square is unstated; "
            f"using {cfg.bc} with Neumann sides {','.join(cfg.neumann_sides)}"
        )
    return meta


def _blocks_for(cfg: ExperimentConfig, level: int, nu: float):
    mesh = make_mesh(cfg, level)
    dm = build_dofmap(mesh)
    mat = MaterialField.homogeneous(mesh, cfg.young, nu)
    pen = PenaltyParams(cfg.alpha0, cfg.alpha1, cfg.theta)
    A = assemble_A(mesh, mat, pen, dm)
    return mesh, block_partition(A, mesh, dm)


def cmd_gamma(cfg: ExperimentConfig) -> TableResult:
    cells = []
    for level in cfg.levels:
        row = []
        for nu in cfg.nu_list:
            _, blocks = _blocks_for(cfg, level, nu)
            row.append(cbs_gamma_sq(blocks, seed=cfg.seed))
        cells.append(row)
    return TableResult("gamma_sq", list(cfg.levels), list(cfg.nu_list),
                       cells, _base_metadata(cfg))


def cmd_gamma_jump(cfg: ExperimentConfig) -> TableResult:
    regions = cfg.material_regions or {}
    nu1 = float(regions.get("nu1", 0.3))
    young1 = float(regions.get("young1", 1.0))
    young2 = float(regions.get("young2", 1.0))
    pen = PenaltyParams(cfg.alpha0, cfg.alpha1, cfg.theta)
    cells = []
    for level in cfg.levels:
        mesh = make_mesh(cfg, level, checkerboard=True)
        dm = build_dofmap(mesh)
        row = []
        for nu2 in cfg.nu_list:
            mat = MaterialField(mesh, {1: (young1, nu1), 2: (young2, nu2)})
            A = assemble_A(mesh, mat, pen, dm)
            blocks = block_partition(A, mesh, dm)
            row.append(cbs_gamma_sq(blocks, seed=cfg.seed))
        cells.append(row)
    meta = _base_metadata(cfg)
    meta["table_note"] = (
        f"checkerboard nu1={nu1:g} on the diagonal quadrants, nu2 varies"
    )
    return TableResult("gamma_sq_jump", list(cfg.levels), list(cfg.nu_list),
                       cells, meta)


def cmd_cond(cfg: ExperimentConfig, which: str) -> TableResult:
    if which not in ("precond", "zz"):
        raise UsageError(f"unknown condition-number target {which!r}")
    cells = []
    for level in cfg.levels:
        row = []
        for nu in cfg.nu_list:
            mesh, blocks = _blocks_for(cfg, level, nu)
            if which == "precond":
                row.append(cond_precond(blocks, seed=cfg.seed))
            else:
                row.append(z_block_condition(blocks, mesh, seed=cfg.seed))
        cells.append(row)
    name = "cond_precond" if which == "precond" else "cond_zz"
    return TableResult(name, list(cfg.levels), list(cfg.nu_list),
                       cells, _base_metadata(cfg))


def _load_from_file(path) -> LoadSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read load spec {path}: {exc}") from exc

    def vector_field(spec):
        if spec is None:
            return None
        if not (isinstance(spec, (list, tuple)) and len(spec) == 2):
            raise UsageError("load components must be 2-element lists")
        comps = []
        for c in spec:
            if isinstance(c, (int, float)):
                comps.append(lambda x, y, c=float(c): c)
            elif isinstance(c, str):
                env = {"np": np, "pi": np.pi, "sin": np.sin, "cos": np.cos,
                       "exp": np.exp, "sqrt": np.sqrt}
                comps.append(lambda x, y, c=c, env=env: float(
                    eval(c, {"__builtins__": {}}, dict(env, x=x, y=y))))
            else:
                raise UsageError("load components must be numbers or expressions")
        fx, fy = comps
        return lambda x, y: np.array([fx(x, y), fy(x, y)])

    unknown = set(data) - {"body_force", "traction"}
    if unknown:
        raise UsageError(f"unknown load fields {sorted(unknown)}")
    return LoadSpec(body_force=vector_field(data.get("body_force")),
                    traction=vector_field(data.get("traction")))


def cmd_solve(cfg: ExperimentConfig, load_path, project_compat=False,
              solution_out="solution.csv", nu=None, tol=1e-8):
    nu = cfg.nu_list[0] if nu is None else float(nu)
    level = max(cfg.levels)
    mesh = make_mesh(cfg, level)
    dm = build_dofmap(mesh)
    mat = MaterialField.homogeneous(mesh, cfg.young, nu)
    pen = PenaltyParams(cfg.alpha0, cfg.alpha1, cfg.theta)
    A = assemble_A(mesh, mat, pen, dm)
    load = _load_from_file(load_path) if load_path else LoadSpec()
    b = assemble_rhs(mesh, mat, load, dm)

    if cfg.bc == "pure-neumann":
        if not project_compat:
            raise SolverError(
                "pure-Neumann system is singular (rigid motions); pass "
                "--project-compat to solve in the compatible complement"
            )
        R = rigid_motion_basis(mesh, dm)
        op = deflate(A, R)
        x, report = cg(op, op.projector(b), tol=tol)
    else:
        blocks = block_partition(A, mesh, dm)
        B = build_preconditioner(blocks)
        x, report = pcg(A, B, b, tol=tol)

    lines = ["dof,value,config_hash"]
    h = config_hash(cfg)
    for i, v in enumerate(x):
        lines.append(f"{i},{v:.17g},{h}")
    with open(solution_out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return x, report


# ---------------------------------------------------------------------------
# verification suites


def _suite_configs(cfg):
    """Six (domain, nu) configurations at level 2 for the structural checks."""
    out = []
    for domain in ("square", "lshape"):
        for nu in (0.25, 0.4, 0.49999):
            sub = dataclasses.replace(cfg, domain=domain)
            out.append((sub, nu))
    return out


def run_verification(cfg: ExperimentConfig, stream=None):
    """Run every structural property suite; returns the number of failures
    and prints one line per suite."""
    stream = stream if stream is not None else sys.stdout
    rng = np.random.default_rng(cfg.seed)
    pen = PenaltyParams(cfg.alpha0, cfg.alpha1, cfg.theta)
    failures = 0

    def report(name, ok, detail="", skipped=False):
        nonlocal failures
        status = "skipped" if skipped else ("ok" if ok else "FAIL")
        if not ok and not skipped:
            failures += 1
        line = f"{name}: {status}"
        if detail:
            line += f" ({detail})"
        print(line, file=stream)

    def guard(name, fn, skip_reason=None):
        if skip_reason is not None:
            report(name, True, skip_reason, skipped=True)
            return
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        report(name, ok, detail)

    def assembled(domain, nu, level=2, bc=None, symmetrize=False):
        sub = dataclasses.replace(cfg, domain=domain)
        if bc is not None:
            sub = dataclasses.replace(sub, bc=bc)
        mesh = make_mesh(sub, level)
        dm = build_dofmap(mesh)
        mat = MaterialField.homogeneous(mesh, cfg.young, nu)
        A = assemble_A(mesh, mat, pen, dm)
        if symmetrize:  # Rayleigh-quotient checks see the symmetric part only
            A = ((A + A.T) * 0.5).tocsr()
        return mesh, dm, mat, A

    def coercivity_witness():
        _, _, _, A = assembled(cfg.domain, 0.25, level=1, symmetrize=True)
        lo, hi = spectral.sym_eig_extremes(A, method="dense")
        ok = lo > -1e-10 * hi
        detail = f"lambda_min={lo:.3e}"
        if not ok:
            detail += (f"; operator indefinite, increase alpha0 "
                       f"(currently {cfg.alpha0:g})")
        return ok, detail

    def symmetry():
        _, _, _, A = assembled(cfg.domain, 0.4)
        asym = abs(A - A.T).max()
        return asym <= 1e-12 * abs(A).max(), f"max asymmetry {asym:.2e}"

    def block_orthogonality():
        worst = 0.0
        for sub, nu in _suite_configs(cfg):
            mesh = make_mesh(sub, 2)
            dm = build_dofmap(mesh)
            mat = MaterialField.homogeneous(mesh, sub.young, nu)
            A0 = assemble_A0(mesh, mat, pen, dm)
            blocks = block_partition(A0, mesh, dm)
            off = abs(blocks.A_zv).max() if blocks.A_zv.nnz else 0.0
            worst = max(worst, off / abs(A0).max())
        return worst <= 1e-11, f"worst off-block ratio {worst:.2e}"

    def round_trip():
        worst = 0.0
        for domain in ("square", "lshape"):
            mesh = make_mesh(dataclasses.replace(cfg, domain=domain), 2)
            dm = build_dofmap(mesh)
            for _ in range(20):
                u = rng.standard_normal(dm.ndofs)
                err = np.linalg.norm(
                    recombine(split(u, mesh, dm), mesh, dm) - u)
                worst = max(worst, err / np.linalg.norm(u))
        return worst <= 1e-13, f"worst {worst:.2e}"

    def cardinality():
        ok, worst1, worst2 = True, 0, 0
        for domain in ("square", "lshape"):
            m = unit_square_coarse() if domain == "square" else lshape_coarse()
            for _ in range(4):
                for f in range(m.num_faces):
                    n1 = len(neighbor_set(m, f, 1))
                    n2 = len(neighbor_set(m, f, 2))
                    worst1, worst2 = max(worst1, n1), max(worst2, n2)
                    ok = ok and n1 <= 5 and n2 <= 25
                m = refine(m)
        return ok, f"max |N1|={worst1}, |N2|={worst2}"

    def jump_deficiency():
        ok, detail = True, []
        for domain in ("square", "lshape"):
            mesh = make_mesh(dataclasses.replace(cfg, domain=domain), 2)
            S, D = assemble_S_D(mesh)
            rho = rho_bound(S, D)
            ratio = verify_projected_jump_inequality(mesh, 200, seed=cfg.seed)
            ok = ok and rho >= 1.0 and ratio <= 1.0 - 1.0 / rho + 1e-12
            detail.append(f"{domain}: rho={rho:.3f} ratio={ratio:.3f}")
        return ok, "; ".join(detail)

    def cauchy_schwarz():
        mesh, dm, _, A = assembled(cfg.domain, 0.4, symmetrize=True)
        blocks = block_partition(A, mesh, dm)
        gamma = np.sqrt(cbs_gamma_sq(blocks, seed=cfg.seed))
        ok, worst = True, 0.0
        for _ in range(100):
            z = rng.standard_normal(blocks.n_z)
            v = rng.standard_normal(blocks.n_v)
            cross = abs(float(z @ (blocks.A_zv @ v)))
            bound = gamma * np.sqrt(float(z @ (blocks.A_zz @ z))
                                    * float(v @ (blocks.A_vv @ v)))
            worst = max(worst, cross / bound if bound > 0 else np.inf)
            ok = ok and cross <= bound * (1.0 + 1e-10)
        return ok, f"worst ratio {worst:.4f}"

    def rigid_kernel():
        mesh, dm, _, A = assembled("square", 0.4, bc="pure-neumann")
        R = rigid_motion_basis(mesh, dm)
        res = abs(A @ R).max() / abs(A).max()
        return res <= 1e-11, f"residual {res:.2e}"

    def product_identity():
        worst = 0.0
        for _ in range(1000):
            ap, am, bp, bm = rng.standard_normal(4)
            worst = max(worst, abs(product_identity_check(ap, am, bp, bm)))
        return worst <= 1e-14, f"worst residual {worst:.2e}"

    def rayleigh_quotients():
        mu, lam = lame_from_engineering(cfg.young, 0.4)
        ok, lo_q, hi_q = True, np.inf, -np.inf
        for _ in range(100):
            Mfull = rng.standard_normal((2, 2))
            Msym = 0.5 * (Mfull + Mfull.T)
            q = float(np.sum(apply_elasticity_tensor(Msym, mu, lam) * Msym)
                      / np.sum(Msym * Msym))
            lo_q, hi_q = min(lo_q, q), max(hi_q, q)
            ok = ok and 2 * mu - 1e-12 <= q <= 2 * mu + 2 * lam + 1e-12
        return ok, (f"range [{lo_q:.4f}, {hi_q:.4f}] in "
                    f"[{2*mu:.4f}, {2*mu+2*lam:.4f}]")

    guard("coercivity witness", coercivity_witness)
    guard("symmetry", symmetry,
          skip_reason="matrix not symmetric for theta=0" if cfg.theta == 0
          else None)
    guard("reduced-operator block orthogonality", block_orthogonality)
    guard("split/recombine round trip", round_trip)
    guard("neighbor-set cardinality", cardinality)
    guard("projected-jump deficiency bound", jump_deficiency)
    guard("sampled Cauchy-Schwarz with computed gamma", cauchy_schwarz)
    guard("rigid-motion kernel", rigid_kernel)
    guard("product identity", product_identity)
    guard("elasticity-tensor Rayleigh quotients", rayleigh_quotients)

    return failures


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    p = argparse.ArgumentParser(
        prog="elastic-dg",
        description="DG elasticity splitting tables, solves, and checks",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
        sp.add_argument("--domain", choices=["square", "lshape"])
        sp.add_argument("--levels", type=int, nargs="+")
        sp.add_argument("--nu", type=float, nargs="+", dest="nu_list")
        sp.add_argument("--bc", choices=["pure-dirichlet", "mixed", "pure-neumann"])
        sp.add_argument("--out", choices=["csv", "md"], dest="output")
        sp.add_argument("--seed", type=int)
        return sp

    common(sub.add_parser("gamma", help="CBS constant table"))
    gj = common(sub.add_parser("gamma-jump", help="CBS table, checkerboard nu"))
    gj.set_defaults(domain="square", nu_list=None)
    cond = common(sub.add_parser("cond", help="condition-number tables"))
    cond.add_argument("--which", choices=["precond", "zz"], default="precond")
    sv = common(sub.add_parser("solve", help="solve a load case with PCG"))
    sv.add_argument("--load", help="JSON load spec (body_force / traction)")
    sv.add_argument("--project-compat", action="store_true")
    sv.add_argument("--solution-out", default="solution.csv")
    common(sub.add_parser("verify", help="run the property suites"))
    return p


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    overrides = {
        key: getattr(args, key, None)
        for key in ("domain", "levels", "nu_list", "bc", "output", "seed")
    }
    try:
        cfg = ExperimentConfig.from_sources(args.config, overrides)
        if args.command == "gamma-jump":
            if not any(v is not None for v in
                       (overrides["nu_list"],)) and cfg.nu_list == list(DEFAULT_NU_LIST):
                cfg.nu_list = list(DEFAULT_JUMP_NU_LIST)
            cfg = dataclasses.replace(cfg, domain="square").validate()
    except (UsageError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    fmt = "csv" if cfg.output == "csv" else "md"
    try:
        if args.command == "gamma":
            sys.stdout.write(cmd_gamma(cfg).render(fmt))
        elif args.command == "gamma-jump":
            sys.stdout.write(cmd_gamma_jump(cfg).render(fmt))
        elif args.command == "cond":
            sys.stdout.write(cmd_cond(cfg, args.which).render(fmt))
        elif args.command == "solve":
            _, rep = cmd_solve(cfg, args.load, args.project_compat,
                               args.solution_out)
            print(f"iterations={rep.iterations} "
                  f"relative_residual={rep.relative_residual:.3e} "
                  f"converged={rep.converged}")
            if not rep.converged:
                return EXIT_NUMERICAL
        elif args.command == "verify":
            failures = run_verification(cfg)
            if failures:
                print(f"{failures} suite(s) failed", file=sys.stderr)
                return EXIT_VERIFY
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, CoercivityError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
