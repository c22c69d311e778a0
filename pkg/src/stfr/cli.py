"""Case configuration, run orchestration, convergence sweeps, and reports.

Verbs:
    stfr run <case> [--set key.path=value ...] [--out DIR]
    stfr sweep <case> --axis space|time --levels N [--set ...] [--out DIR]
    stfr check

<case> is a JSON file path or the name of a bundled case (see `cases/`).
Exit codes: 0 success, 1 validation error, 2 solver non-convergence.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from stfr import analysis, mesh as meshmod, motion as motionmod, physics
from stfr.analysis import ConvergenceReport, Stopwatch
from stfr.mol_solver import march_mol, mol_stable_dt
from stfr.motion import motion_path
from stfr.st_solver import PseudoControls, PseudoConvergenceError, march
from stfr.stfv import Fv1dState, stfv_step_explicit, upwind_flux_rule


class ConfigError(ValueError):
    """Invalid case configuration; message lists every offending field."""


@dataclass
class CaseConfig:
    name: str = "case"
    equation: dict = field(default_factory=lambda: {"type": "advection1d"})
    exact: dict = field(default_factory=lambda: {"type": "sine_wave"})
    mesh: dict = field(default_factory=lambda: {"type": "interval", "n": 16})
    motion: dict = field(default_factory=lambda: {"type": "stationary"})
    bc: str = "periodic"
    solver: str = "spacetime"
    k_s: int = 2
    k_t: int = 2
    dt: float = 0.03125
    t_final: float = 1.0
    pseudo: dict = field(default_factory=dict)
    output_dir: str | None = None
    dump_solution: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "CaseConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def validate(cfg: CaseConfig):
    """Collect every validation failure; raise ConfigError naming them all."""
    errs = []
    if cfg.solver not in ("spacetime", "mol", "stfv"):
        errs.append(f"solver: unknown solver {cfg.solver!r}")
    if cfg.equation.get("type") not in ("advection1d", "advection2d", "euler2d"):
        errs.append(f"equation.type: unknown {cfg.equation.get('type')!r}")
    if cfg.exact.get("type") not in ("sine_wave", "isentropic_vortex", "constant"):
        errs.append(f"exact.type: unknown {cfg.exact.get('type')!r}")
    if cfg.mesh.get("type") not in ("interval", "rect", "disk", "file"):
        errs.append(f"mesh.type: unknown {cfg.mesh.get('type')!r}")
    if cfg.motion.get("type") not in ("stationary", "rigid_oscillation",
                                      "sine_deformation", "circle_deformation"):
        errs.append(f"motion.type: unknown {cfg.motion.get('type')!r}")
    if cfg.bc not in ("periodic", "dirichlet"):
        errs.append(f"bc: must be periodic or dirichlet, got {cfg.bc!r}")
    if not isinstance(cfg.k_s, int) or cfg.k_s < 0:
        errs.append(f"k_s: must be a non-negative integer, got {cfg.k_s!r}")
    if not isinstance(cfg.k_t, int) or cfg.k_t < 0:
        errs.append(f"k_t: must be a non-negative integer, got {cfg.k_t!r}")
    if not (isinstance(cfg.dt, (int, float)) and cfg.dt > 0):
        errs.append(f"dt: must be > 0, got {cfg.dt!r}")
    if not (isinstance(cfg.t_final, (int, float)) and cfg.t_final > 0):
        errs.append(f"t_final: must be > 0, got {cfg.t_final!r}")
    if isinstance(cfg.dt, (int, float)) and cfg.dt > 0 \
            and isinstance(cfg.t_final, (int, float)) and cfg.t_final > 0:
        ratio = cfg.t_final / cfg.dt
        if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
            errs.append(f"dt: t_final={cfg.t_final} is not an integer multiple "
                        f"of dt={cfg.dt}")
    if cfg.solver == "stfv" and cfg.equation.get("type") != "advection1d":
        errs.append("solver: stfv requires equation.type == advection1d")
    eq2d = cfg.equation.get("type") in ("advection2d", "euler2d")
    mesh2d = cfg.mesh.get("type") in ("rect", "disk")
    if cfg.mesh.get("type") != "file" and eq2d != mesh2d:
        errs.append("mesh: dimension does not match equation dimension")
    if cfg.motion.get("type") == "circle_deformation" and not mesh2d:
        errs.append("motion: circle_deformation requires a 2D mesh")
    if cfg.mesh.get("type") == "disk" and cfg.bc != "dirichlet":
        errs.append("bc: disk meshes require analytic dirichlet boundaries")
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
    return cfg


def build_equation(cfg: CaseConfig) -> physics.EquationSet:
    d = dict(cfg.equation)
    kind = d.pop("type")
    if kind == "advection1d":
        return physics.Advection1D(**d)
    if kind == "advection2d":
        return physics.Advection2D(**d)
    return physics.Euler2D(**d)


def build_exact(cfg: CaseConfig, eq) -> physics.ExactSolution:
    d = dict(cfg.exact)
    kind = d.pop("type")
    return physics.exact_for(eq, kind, **d)


def build_mesh(cfg: CaseConfig) -> meshmod.Mesh:
    d = dict(cfg.mesh)
    kind = d.pop("type")
    if kind == "interval":
        return meshmod.interval_mesh(periodic=(cfg.bc == "periodic"), **d)
    if kind == "rect":
        return meshmod.rect_mesh(periodic=(cfg.bc == "periodic"), **d)
    if kind == "disk":
        return meshmod.disk_mesh(**d)
    return meshmod.read_mesh(d["path"])


def build_motion(cfg: CaseConfig) -> motionmod.MotionPrescription:
    d = dict(cfg.motion)
    kind = d.pop("type")
    for key in ("amp", "omega", "length", "n"):
        if key in d and isinstance(d[key], list):
            d[key] = tuple(d[key])
    if kind == "stationary":
        return motionmod.Stationary()
    if kind == "rigid_oscillation":
        return motionmod.RigidOscillation(**d)
    if kind == "sine_deformation":
        return motionmod.SineDeformation(**d)
    return motionmod.CircleDeformation(**d)


def build_pseudo(cfg: CaseConfig) -> PseudoControls:
    return PseudoControls(**cfg.pseudo)


def mesh_resolution(cfg: CaseConfig) -> float:
    """Characteristic element size used as the sweep resolution descriptor."""
    m = cfg.mesh
    if m["type"] == "interval":
        return (m.get("xmax", 1.0) - m.get("xmin", 0.0)) / m["n"]
    if m["type"] == "rect":
        return (m.get("xmax", 1.0) - m.get("xmin", 0.0)) / m["nx"]
    if m["type"] == "disk":
        return m.get("radius", 0.5) / (2 * 2 ** m.get("level", 0))
    raise ConfigError("mesh: file meshes have no refinement rule")


def _stfv_run(cfg: CaseConfig, eq, sol, mesh):
    """March the 1D space-time FV scheme; returns (error_final, nan)."""
    presc = build_motion(cfg)
    n_steps = int(round(cfg.t_final / cfg.dt))
    path = motion_path(presc, mesh, cfg.dt, n_steps)
    # interface coordinates from the mesh nodes (1D: nodes are interfaces)
    order = np.argsort(mesh.nodes[:, 0])
    ubar = _cell_averages(sol, path[0][order, 0], 0.0)
    for k in range(n_steps):
        st = Fv1dState(ubar, path[k][order, 0], path[k + 1][order, 0], cfg.dt)
        ubar = stfv_step_explicit(st, upwind_flux_rule(eq.c))
    x_fin = path[n_steps][order, 0]
    uex = _cell_averages(sol, x_fin, cfg.t_final)
    vols = np.diff(x_fin)
    err = math.sqrt(float(np.sum(vols * (ubar - uex) ** 2) / np.sum(vols)))
    return err, math.nan, ubar


def _cell_averages(sol, interfaces, t):
    from stfr.basis import gauss_legendre

    xq, wq = gauss_legendre(3)
    xl, xr = interfaces[:-1], interfaces[1:]
    mid = 0.5 * (xl + xr)
    half = 0.5 * (xr - xl)
    pts = mid[:, None] + half[:, None] * xq[None, :]
    vals = physics.exact_state(sol, pts, t=t)[..., 0]
    return 0.5 * np.einsum("q,cq->c", wq, vals)


def run_case(cfg: CaseConfig, report: ConvergenceReport | None = None,
             resolution: float | None = None):
    """Execute one case; returns the appended ReportRow.

    Writes `<name>.csv` (and optional solution dump) when output_dir is set.
    """
    validate(cfg)
    eq = build_equation(cfg)
    sol = build_exact(cfg, eq)
    mesh = build_mesh(cfg)
    presc = build_motion(cfg)
    n_steps = int(round(cfg.t_final / cfg.dt))
    if report is None:
        report = ConvergenceReport(case=cfg.to_dict())
    if resolution is None:
        try:
            resolution = mesh_resolution(cfg)
        except ConfigError:
            resolution = cfg.dt
    dump = None
    with Stopwatch() as sw:
        if cfg.solver == "spacetime":
            res = march(mesh, presc, eq, sol, cfg.k_s, cfg.k_t, cfg.dt,
                        n_steps, controls=build_pseudo(cfg))
            e_fin = analysis.l2_error_final(res.field, res.geom, mesh,
                                            res.coords_final, sol, cfg.t_final)
            e_slab = analysis.l2_error_slab(res.field, res.geom, sol)
            dump = {"values": res.field.values, "coords": res.coords_final}
        elif cfg.solver == "mol":
            res = march_mol(mesh, presc, eq, sol, cfg.k_s, cfg.dt, n_steps)
            e_fin = analysis.l2_error_nodal(res.field.values, cfg.k_s, mesh,
                                            res.coords_final, sol, cfg.t_final)
            e_slab = math.nan
            dump = {"values": res.field.values, "coords": res.coords_final}
        else:
            e_fin, e_slab, ubar = _stfv_run(cfg, eq, sol, mesh)
            dump = {"values": ubar}
    row = report.add(resolution, e_fin, e_slab, walltime_s=sw.seconds)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / f"{cfg.name}.csv")
        if cfg.dump_solution and dump is not None:
            np.savez(out / f"{cfg.name}_solution.npz", **dump)
    return row


def sweep(cfg: CaseConfig, axis: str, levels: int) -> ConvergenceReport:
    """Refinement study: `space` halves h per level (with dt kept small
    enough that temporal error stays subdominant), `time` halves dt on the
    fixed mesh.  Returns the filled ConvergenceReport."""
    validate(cfg)
    if axis not in ("space", "time"):
        raise ConfigError(f"axis: must be space or time, got {axis!r}")
    if levels < 2:
        raise ConfigError(f"levels: need at least 2, got {levels}")
    report = ConvergenceReport(case={**cfg.to_dict(), "axis": axis})
    for lv in range(levels):
        c = CaseConfig.from_dict(cfg.to_dict())
        if axis == "time":
            c.dt = cfg.dt / 2**lv
            run_case(c, report=report, resolution=c.dt)
        else:
            c.mesh = _refined_mesh_spec(cfg.mesh, lv)
            h = mesh_resolution(c)
            c.dt = _subdominant_dt(cfg, h)
            if c.solver == "mol":
                m = build_mesh(c)
                eq = build_equation(c)
                c.dt = _fit_dt(min(c.dt, mol_stable_dt(m, m.nodes, eq, c.k_s)),
                               cfg.t_final)
            run_case(c, report=report, resolution=h)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / f"{cfg.name}_{axis}.csv")
        report.to_plot_data(out / f"{cfg.name}_{axis}.dat")
    return report


def _refined_mesh_spec(mesh_spec: dict, level: int) -> dict:
    d = dict(mesh_spec)
    if d["type"] == "interval":
        d["n"] = d["n"] * 2**level
    elif d["type"] == "rect":
        d["nx"] = d["nx"] * 2**level
        d["ny"] = d["ny"] * 2**level
    elif d["type"] == "disk":
        d["level"] = d.get("level", 0) + level
    else:
        raise ConfigError("mesh: file meshes cannot be swept in space")
    return d


def _subdominant_dt(cfg: CaseConfig, h: float) -> float:
    """dt such that the superconvergent temporal error (dt)^(2 k_t + 1)
    stays below 1% of the expected spatial error h^(k_s + 1)."""
    target = 0.01 * h ** (cfg.k_s + 1)
    dt = min(cfg.dt, target ** (1.0 / (2 * cfg.k_t + 1)))
    return _fit_dt(dt, cfg.t_final)


def _fit_dt(dt: float, t_final: float) -> float:
    return t_final / int(np.ceil(t_final / dt - 1e-12))


def emit_reports(report: ConvergenceReport, outdir: str,
                 name: str = "report", spectral: tuple | None = None):
    """Write the CSV (always) plus plot-ready data files."""
    if not report.rows:
        raise ValueError("empty report")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / f"{name}.csv"]
    report.to_csv(written[0])
    plot = out / f"{name}.dat"
    report.to_plot_data(plot)
    written.append(plot)
    if spectral is not None:
        degrees, errors = spectral
        spath = out / f"{name}_spectral.dat"
        analysis.write_spectral_data(spath, degrees, errors)
        written.append(spath)
    return written


# ---------------------------------------------------------------------------
# built-in verification battery (for `stfr check`)


def run_checks(verbose: bool = True) -> bool:
    """Quick property battery: basis exactness, GCL, free-stream on both
    solvers, FV-scheme equivalence, Crank-Nicolson reduction, and the
    temporal amplification identity."""
    from stfr.basis import gauss_legendre, make_basis
    from stfr.geometry import gcl_residual, slab_geometry
    from stfr.mesh import rect_mesh
    from stfr.motion import SineDeformation
    from stfr.st_solver import temporal_amplification
    from stfr.stfv import crank_nicolson_check, crank_nicolson_solve, fvmol_step

    results = []

    def check(name, ok, detail=""):
        results.append(ok)
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}")

    x, w = gauss_legendre(5)
    err = max(abs(np.sum(w * x**p) - (0 if p % 2 else 2 / (p + 1)))
              for p in range(10))
    check("gauss-legendre exactness (n=5, degree<=9)", err < 1e-13, f"err={err:.1e}")

    m = rect_mesh(8, 8)
    path = motion_path(SineDeformation(), m, 0.02, 2)
    g = slab_geometry(m, path[1], path[2], 0.02, make_basis(2), make_basis(2))
    r = float(np.abs(gcl_residual(g)).max())
    check("discrete GCL on deforming slab (k=2)", r < 1e-12, f"res={r:.1e}")

    res = march(m, SineDeformation(), physics.Advection2D(),
                physics.Constant((1.0,)), 2, 2, 0.04, 5)
    d = float(np.abs(res.top - 1.0).max())
    check("space-time free-stream preservation", d < 1e-11, f"drift={d:.1e}")

    res2 = march_mol(m, SineDeformation(), physics.Advection2D(),
                     physics.Constant((1.0,)), 2, 0.002, 50)
    d2 = float(np.abs(res2.field.values - 1.0).max())
    check("method-of-lines free-stream preservation", d2 < 1e-11, f"drift={d2:.1e}")

    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 10))
        xx = np.sort(rng.uniform(0, 1, n + 1))
        xx[0], xx[-1] = 0.0, 1.0
        if np.diff(xx).min() < 0.02:
            continue
        pert = 0.3 * np.diff(xx).min() * rng.uniform(-1, 1, n + 1)
        pert[0] = pert[-1] = 0.0
        st = Fv1dState(rng.standard_normal(n), xx, xx + pert,
                       float(rng.uniform(0.01, 0.2)))
        worst = max(worst, float(np.abs(stfv_step_explicit(st)
                                        - fvmol_step(st)).max()))
    check("space-time FV == FV method of lines", worst <= 1e-14,
          f"maxdiff={worst:.1e}")

    nn, dxx, dtt = 32, 1 / 32, 0.04
    xs = (np.arange(nn) + 0.5) * dxx
    u0 = np.sin(2 * np.pi * xs)
    u1 = crank_nicolson_solve(u0, dxx, dtt, 1.0)
    defect = crank_nicolson_check(u0, u1, dxx, dtt, 1.0)
    check("Crank-Nicolson reduction", defect <= 1e-13, f"defect={defect:.1e}")

    worst = 0.0
    for kt in (1, 2, 3):
        for mu in (0.4, -1.0, 0.9j):
            g1 = temporal_amplification(kt, mu)
            g2 = _dg_in_time_amplification(kt, mu)
            worst = max(worst, abs(g1 - g2))
    check("temporal scheme == DG in time", worst < 1e-12, f"maxdiff={worst:.1e}")

    return all(results)


def _dg_in_time_amplification(kt: int, mu: complex) -> complex:
    """Dense DG-in-time solve for du/dtau = mu u, independent assembly."""
    from stfr.basis import diff_matrix, gauss_legendre, interp_matrix, make_basis

    b = make_basis(kt)
    n = b.n
    xq, wq = gauss_legendre(kt + 3)
    L = interp_matrix(b.nodes, xq)
    be = make_basis(kt + 2)
    to_e = interp_matrix(b.nodes, be.nodes)
    De = diff_matrix(be.nodes)
    from_e = interp_matrix(be.nodes, xq)
    dL = from_e @ (De @ to_e)
    lp, lm = b.extrap_right, b.extrap_left
    K = np.einsum("q,qi,qj->ij", wq, dL, L)   # K_ij = int L_i' L_j
    M = np.einsum("q,qi,qj->ij", wq, L, L)
    A = (-K + np.outer(lp, lp) - mu * M).astype(complex)
    u = np.linalg.solve(A, lm.astype(complex))
    return complex(lp @ u)


# ---------------------------------------------------------------------------
# command line


def load_case(spec: str) -> CaseConfig:
    """Load a case from a path or a bundled case name."""
    p = Path(spec)
    if p.exists():
        data = json.loads(p.read_text())
    else:
        name = spec if spec.endswith(".json") else spec + ".json"
        ref = resources.files("stfr").joinpath("cases", name)
        if not ref.is_file():
            raise ConfigError(f"case {spec!r} is neither a file nor a bundled case")
        data = json.loads(ref.read_text())
    return CaseConfig.from_dict(data)


def apply_overrides(cfg: CaseConfig, pairs: list) -> CaseConfig:
    """Apply --set key.path=value overrides (values parsed as JSON)."""
    d = cfg.to_dict()
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = d
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in target or not isinstance(target[part], dict):
                target[part] = {}
            target = target[part]
        target[parts[-1]] = value
    return CaseConfig.from_dict(d)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="stfr", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run one case")
    run_p.add_argument("case")
    run_p.add_argument("--set", action="append", default=[], dest="overrides")
    run_p.add_argument("--out", default=None)

    sweep_p = sub.add_parser("sweep", help="refinement study")
    sweep_p.add_argument("case")
    sweep_p.add_argument("--axis", choices=("space", "time"), required=True)
    sweep_p.add_argument("--levels", type=int, required=True)
    sweep_p.add_argument("--set", action="append", default=[], dest="overrides")
    sweep_p.add_argument("--out", default=None)

    sub.add_parser("check", help="run the built-in property battery")

    args = ap.parse_args(argv)
    try:
        if args.verb == "check":
            return 0 if run_checks() else 1
        cfg = load_case(args.case)
        cfg = apply_overrides(cfg, args.overrides)
        if args.out:
            cfg.output_dir = args.out
        if args.verb == "run":
            row = run_case(cfg)
            print(f"{cfg.name}: error_final={row.error_final:.6e} "
                  + ("" if math.isnan(row.error_slab)
                     else f"error_slab={row.error_slab:.6e} ")
                  + f"walltime={row.walltime_s:.2f}s")
            return 0
        report = sweep(cfg, args.axis, args.levels)
        print(f"{cfg.name} ({args.axis} sweep)")
        print(f"{'resolution':>12} {'error_final':>14} {'order':>7}")
        for r in report.rows:
            o = "" if math.isnan(r.order_final) else f"{r.order_final:.2f}"
            print(f"{r.resolution:>12.6g} {r.error_final:>14.6e} {o:>7}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PseudoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
