"""Command-line driver: ``stagcalc <command> [options]``.

Every command prints a table and exits 0 only if all of its checks pass.
Options may also come from a flat ``key=value`` file given with
``--config``; flags on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import filecmp
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import checks
from .approximation import (SmoothVectorField, bubble_stream, c1_error, compact_bump,
                            consistency_bound, trig_field)
from .decomposition import IntegrationError
from .linalg import SolverError
from .mesh import (MeshFormatError, build_quad_mesh, build_tri_hex_mesh,
                   build_voronoi_mesh, read_mesh, validate, write_mesh)
from .stokes import (SOLVE_TOL, PressureRecoveryError, build_family, convergence_study,
                     discretize_forcing, manufactured_pressure, momentum_residual,
                     solve_stokes)

FAMILIES = ("quad", "trihex", "voronoi")
FIELDS = {"bubble": bubble_stream, "bump": compact_bump, "trig": trig_field,
          "zero": SmoothVectorField.zero}


@dataclasses.dataclass
class RunConfig:
    family: str = "quad"
    n: int = 16
    refine: int = 2
    seeds: int = 64
    lloyd: int = 20
    levels: str = ""
    tol: float = SOLVE_TOL
    out: str = "stagcalc_out"
    seed: int = 0
    n_fields: int = 100
    a: float = 1.0
    b: float = 2.0
    variant: str = "general"
    field: str = ""
    forcing: str = "manufactured"
    measure: str = "projected"
    min_order: float = 0.9

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.n < 1 or self.refine < 0 or self.seeds < 1 or self.lloyd < 0:
            raise ValueError("n, seeds must be positive; refine, lloyd non-negative")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.n_fields < 1:
            raise ValueError("n_fields must be positive")
        if self.variant not in ("general", "stokes"):
            raise ValueError(f"variant must be general or stokes, got {self.variant!r}")
        if self.field and self.field not in FIELDS:
            raise ValueError(f"field must be one of {sorted(FIELDS)}, got {self.field!r}")
        if self.forcing not in ("manufactured", "zero"):
            raise ValueError(f"forcing must be manufactured or zero, got {self.forcing!r}")
        if self.measure not in ("projected", "true"):
            raise ValueError(f"measure must be projected or true, got {self.measure!r}")

    def level_list(self, default) -> list[int]:
        if not self.levels:
            return list(default)
        return [int(v) for v in self.levels.split(",") if v.strip()]


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    known = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        kind = known[key]
        out[key] = {"int": int, "float": float}.get(kind, str)(value)
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("STAGCALC_THREADS", "1")))
    except ValueError:
        return 1


# -- output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return str(v)


def print_table(header, rows, file=None) -> None:
    file = file or sys.stdout
    cells = [[str(h) for h in header]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    for k, r in enumerate(cells):
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)), file=file)
        if k == 0:
            print("  ".join("-" * w for w in widths), file=file)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, (float, np.floating)) else v
                        for v in r])


def _outdir(cfg) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _verdict(ok: bool, what: str) -> int:
    print(f"{what}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# -- mesh -------------------------------------------------------------------------

def _build(cfg):
    if cfg.family == "quad":
        return build_quad_mesh(cfg.n, cfg.n)
    if cfg.family == "trihex":
        return build_tri_hex_mesh(cfg.refine)
    return build_voronoi_mesh(cfg.seeds, lloyd_iters=cfg.lloyd, rng_seed=cfg.seed)


def _report(mesh) -> bool:
    rep = validate(mesh)
    print(f"{mesh.family} mesh: Nc={mesh.n_interior_cells} "
          f"Ncb={mesh.n_cells - mesh.n_interior_cells} Nv={mesh.n_vertices} "
          f"Ne={mesh.n_interior_edges} Neb={mesh.n_edges - mesh.n_interior_edges} "
          f"h={mesh.h:.6g}")
    print_table(("check", "value"), rep.rows())
    for w in rep.warnings:
        print(f"warning: {w}")
    for f in rep.findings:
        print(f"error: {f}")
    return rep.ok


def cmd_mesh(cfg, args) -> int:
    if args.action == "gen":
        mesh = _build(cfg)
        path = Path(args.path) if args.path else _outdir(cfg) / f"{cfg.family}.stagmesh"
        write_mesh(mesh, path)
        print(f"wrote {path}")
        return _verdict(_report(mesh), "mesh gen")
    if not args.path:
        print("error: mesh validate/roundtrip need a mesh file", file=sys.stderr)
        return 2
    try:
        mesh = read_mesh(args.path)
    except (MeshFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.action == "validate":
        return _verdict(_report(mesh), "mesh validate")
    with tempfile.TemporaryDirectory() as tmp:
        again = Path(tmp) / "again.stagmesh"
        write_mesh(mesh, again)
        twice = Path(tmp) / "twice.stagmesh"
        write_mesh(read_mesh(again), twice)
        same = filecmp.cmp(again, twice, shallow=False)
    print(f"canonical rewrite stable: {same}")
    return _verdict(same, "mesh roundtrip")


# -- identities ---------------------------------------------------------------------

def _meshes(cfg):
    if cfg.levels:
        return [build_family(cfg.family, lv) if cfg.family != "voronoi"
                else build_voronoi_mesh(lv, lloyd_iters=cfg.lloyd, rng_seed=cfg.seed)
                for lv in cfg.level_list(())]
    return [_build(cfg)]


def cmd_identities(cfg, args) -> int:
    keys = list(checks.IDENTITY_TOLERANCES)
    rows, ok = [], True
    for mesh in _meshes(cfg):
        worst = checks.identity_suite(mesh, n_fields=cfg.n_fields, seed=cfg.seed)
        passed = all(worst[k] <= checks.IDENTITY_TOLERANCES[k] for k in keys)
        ok &= passed
        rows.append([f"{mesh.family}/{mesh.n_cells}", *(worst[k] for k in keys), passed])
    print_table(("mesh", *keys, "pass"), rows)
    print("tolerances: " + ", ".join(f"{k}={v:g}" for k, v in checks.IDENTITY_TOLERANCES.items()))
    write_csv(_outdir(cfg) / "identities.csv", ("mesh", *keys, "pass"), rows)
    return _verdict(ok, "identities")


# -- counterexample -------------------------------------------------------------------

def cmd_counterexample(cfg, args) -> int:
    a, b = cfg.a, cfg.b
    levels = checks.counterexample(cfg.level_list((1, 2, 3)), a=a, b=b)
    dv, cv = checks.DIV_VALUE(a, b), checks.CURL_VALUE(a)
    want_div, want_curl = [0.0, dv, -dv], [0.0, cv, -cv]
    rows = [[lv.refinement, lv.h, " ".join(f"{v:.8f}" for v in lv.div_values),
             " ".join(f"{v:.8f}" for v in lv.curl_values), lv.div_l2, lv.curl_l2,
             lv.div_mean] for lv in levels]
    print_table(("refine", "h", "div values", "curl values", "div L2", "curl L2",
                 "div mean"), rows)
    write_csv(_outdir(cfg) / "counterexample.csv",
              ("refine", "h", "div_values", "curl_values", "div_l2", "curl_l2", "div_mean"),
              rows)
    print(f"expected div values  {{0, +-{dv:.8f}}}")
    print(f"expected curl values {{0, +-{cv:.8f}}}")

    status = 0
    status |= _verdict(all(checks.value_set_matches(lv.div_values, want_div)
                           for lv in levels), "divergence value set")
    status |= _verdict(all(checks.value_set_matches(lv.curl_values, want_curl)
                           for lv in levels), "vorticity value set")
    for name, norms, nonzero in (("divergence", [lv.div_l2 for lv in levels], dv != 0),
                                 ("vorticity", [lv.curl_l2 for lv in levels], cv != 0)):
        if not nonzero:
            continue
        spread = (max(norms) - min(norms)) / max(norms) if max(norms) > 0 else np.inf
        status |= _verdict(spread < 0.05, f"{name} L2 norm steady across levels "
                                          f"(spread {spread:.3g})")
    means = np.abs([lv.div_mean for lv in levels])
    status |= _verdict(bool(np.all(np.diff(means) < 0) or means.max() < 1e-12),
                       "divergence mean tends to 0")
    return status


# -- approximation ----------------------------------------------------------------------

def _orders(h, err):
    h, err = np.asarray(h), np.asarray(err)
    out = np.full(len(h), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])
    return out


def cmd_approx(cfg, args) -> int:
    default_field = "trig" if cfg.variant == "general" else "bump"
    u = FIELDS[cfg.field or default_field]()
    levels = cfg.level_list((8, 16, 32, 64))
    rows, bounds = [], []
    for lv in levels:
        mesh = build_family(cfg.family, lv)
        err = c1_error(u, cfg.variant, mesh, measure=cfg.measure)
        bound = consistency_bound(u, mesh) if cfg.variant == "general" else np.nan
        rows.append([mesh.h, err])
        bounds.append(bound)
    h, err = np.array(rows).T
    order = _orders(h, err)
    table = [[lv, hh, e, o, bb] for lv, hh, e, o, bb in zip(levels, h, err, order, bounds)]
    print(f"c1 error, variant={cfg.variant}, field={u.name}, measure={cfg.measure}")
    print_table(("level", "h", "error", "order", "bound"), table)
    write_csv(_outdir(cfg) / f"c1_{cfg.variant}_{u.name}.csv", ("h", "error", "observed_order"),
              [[hh, e, o] for hh, e, o in zip(h, err, order)])

    if err.max() <= 1e-12:
        return _verdict(True, "c1 error vanishes")
    status = _verdict(bool(np.all(np.diff(err) < 0)), "errors decrease")
    if len(err) > 1:
        status |= _verdict(order[-1] >= cfg.min_order,
                           f"finest-pair order {order[-1]:.3g} >= {cfg.min_order}")
    if cfg.variant == "general":
        status |= _verdict(bool(np.all(err <= np.array(bounds))), "consistency bound")
    return status


# -- stokes ------------------------------------------------------------------------------

def _stokes_field(cfg):
    if cfg.forcing == "zero":
        z = SmoothVectorField.zero()
        return z, z.psi
    return bubble_stream(), manufactured_pressure


def cmd_stokes(cfg, args) -> int:
    exact, exact_p = _stokes_field(cfg)
    if args.action == "solve":
        mesh = _build(cfg)
        forcing = discretize_forcing(lambda x, y: -exact.omega(x, y), exact_p, mesh)
        sol = solve_stokes(forcing, mesh, tol=cfg.tol)
        res = momentum_residual(sol, forcing)
        out = _outdir(cfg)
        mesh_file = out / f"{cfg.family}.stagmesh"
        write_mesh(mesh, mesh_file)
        for name, fld in (("u", sol.u_h), ("psi", sol.psi_h), ("omega", sol.omega_h),
                          ("p", sol.p_h)):
            fld.to_csv(out / f"stokes_{name}.csv", mesh_file=mesh_file.name)
        print_table(("quantity", "value"), [
            ("cg_iters", sol.stats.iterations), ("cg_residual", sol.stats.residual),
            ("energy_lhs", sol.energy_lhs), ("energy_rhs", sol.energy_rhs),
            ("variational_residual", sol.residual), ("momentum_residual", res)])
        status = _verdict(sol.energy_bound_holds, "energy bound")
        return status | _verdict(res <= 1e-9, "interior momentum residual <= 1e-9")

    levels = cfg.level_list((8, 16, 32, 64))
    rec = convergence_study(exact, exact_p, cfg.family, levels, tol=cfg.tol,
                            measure=cfg.measure, workers=_threads())
    cols = ("level", "h", "e_psi", "e_omega", "order_psi", "order_omega",
            "momentum_residual", "cg_iters")
    print(f"stokes study, family={cfg.family}, forcing={cfg.forcing}, measure={cfg.measure}")
    print_table(cols, [[r[c] for c in cols] for r in rec.rows])
    rec.write_csv(_outdir(cfg) / f"stokes_{cfg.family}.csv")

    status = _verdict(all(r["energy_ok"] for r in rec.rows), "energy bound on every level")
    status |= _verdict(max(r["momentum_residual"] for r in rec.rows) <= 1e-9,
                       "interior momentum residual <= 1e-9")
    e_psi, e_om = rec.column("e_psi"), rec.column("e_omega")
    if cfg.forcing == "zero":
        return status | _verdict(max(e_psi.max(), e_om.max()) <= 1e-12, "errors vanish")
    if cfg.family == "quad" and len(rec.rows) > 1:
        last = rec.rows[-1]
        status |= _verdict(bool(np.all(np.diff(e_psi) < 0) and np.all(np.diff(e_om) < 0)),
                           "errors decrease")
        status |= _verdict(min(last["order_psi"], last["order_omega"]) >= 1.0,
                           "finest-pair orders >= 1")
    else:
        print("orders reported only (family outside the convergence hypotheses)")
    return status


# -- entry point ------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="key=value file; flags override its entries")
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("--n", type=int, help="quad cells per side")
    g.add_argument("--refine", type=int, help="tri-hex refinement level")
    g.add_argument("--seeds", type=int, help="Voronoi generator count")
    g.add_argument("--lloyd", type=int, help="Lloyd iterations for Voronoi meshes")
    g.add_argument("--levels", help="comma-separated levels (N, refinement or seed count)")
    g.add_argument("--tol", type=float, help="solver relative tolerance")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stagcalc",
                                     description="Staggered-grid operators on "
                                                 "primary/dual meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate, validate or round-trip a mesh file")
    p.add_argument("action", choices=("gen", "validate", "roundtrip"))
    p.add_argument("path", nargs="?", help="mesh file (output for gen)")
    _common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("identities", help="discrete integration by parts and exact sequences")
    _common(p)
    p.add_argument("--n-fields", type=int, dest="n_fields", help="random fields per mesh")
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("counterexample", help="averaging restriction on tri-hex meshes")
    _common(p)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("approx", help="strong consistency of restriction/prolongation")
    p.add_argument("action", choices=("c1",))
    _common(p)
    p.add_argument("--variant", choices=("general", "stokes"))
    p.add_argument("--field", choices=sorted(FIELDS))
    p.add_argument("--measure", choices=("projected", "true"))
    p.add_argument("--min-order", type=float, dest="min_order")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("stokes", help="Stokes solve or convergence study")
    p.add_argument("action", choices=("study", "solve"))
    _common(p)
    p.add_argument("--forcing", choices=("manufactured", "zero"))
    p.add_argument("--measure", choices=("projected", "true"))
    p.set_defaults(func=cmd_stokes)
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    try:
        return args.func(cfg, args)
    except (SolverError, PressureRecoveryError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
