"""Command-line scenario driver.

Subcommands: solve, verify, monotonicity, divcheck, identity, converge,
oracle-dump.  Exit codes: 0 all checks hold, 1 verification failure,
2 configuration error, 3 solver/transport failure.

Thread count follows numba's NUMBA_NUM_THREADS environment variable.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import oracles
from .config import Scenario, parse_config
from .errors import (AdmissibilityError, ConfigError, ShapeError, SolverError,
                     TransportError)
from .functionals import (ParamSet, curve_from_levels, geometric_tau_grid,
                          integral_identity_check, sample_exterior_points,
                          z_divergence)
from .geometry import make_surface
from .inequalities import check_all
from .levelset import transport_sweep
from .potential import dump_solution, eval_field_batch, solve_exterior_potential
from .report import fmt, report_table, write_csv, write_json, write_svg_lines
from .shapes import Ellipsoid, Sphere, Torus


class _Runner:
    """Caches the solved potentials of one scenario (fine + coarse)."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.shape = scenario.shape()
        self._sols = {}
        self._meshes = {}

    def mesh(self, refinement):
        if refinement not in self._meshes:
            self._meshes[refinement] = make_surface(self.shape, refinement)
        return self._meshes[refinement]

    def sol(self, refinement):
        if refinement not in self._sols:
            self._sols[refinement] = solve_exterior_potential(self.mesh(refinement))
        return self._sols[refinement]

    @property
    def fine(self):
        return self.sol(self.sc.refinement)

    @property
    def coarse(self):
        return self.sol(max(0, self.sc.refinement - 1))


def _param_tag(p: ParamSet):
    return f"b{fmt(p.beta)}_c{fmt(p.c)}_d{fmt(p.d)}"


# ---------------------------------------------------------------------------
# check families
# ---------------------------------------------------------------------------


def run_inequalities(runner: _Runner, out_dir):
    sc = runner.sc
    rows, payload, ok = [], [], True
    sol_f, sol_c = runner.fine, runner.coarse
    mesh_f, mesh_c = sol_f.mesh, sol_c.mesh
    for p in sc.sweep:
        fine = check_all(sol_f, mesh_f, p)
        coarse = check_all(sol_c, mesh_c, p)
        shown = []
        for key in fine:
            rf, rc = fine[key], coarse[key]
            # discretization estimate: slack movement over one refinement step
            tol = max(3.0 * abs(rf.slack - rc.slack), sc.slack_rel * rf.scale,
                      1e-9 * rf.scale)
            rf = replace(rf, verdict="holds" if rf.slack >= -tol else "violated")
            shown.append(rf)
            ok &= rf.verdict == "holds"
            rows.append([runner.shape.kind, key, p.beta, p.c, p.d,
                         rf.params.get("p", ""), p.n, rf.lhs, rf.rhs, rf.slack,
                         rf.rel_slack, rf.rigidity_score, rf.verdict])
            payload.append({
                "inequality": key, "beta": p.beta, "c": p.c, "d": p.d,
                "p": rf.params.get("p"), "lhs": rf.lhs, "rhs": rf.rhs,
                "slack": rf.slack, "rel_slack": rf.rel_slack,
                "rigidity_score": rf.rigidity_score,
                "tolerance": tol, "verdict": rf.verdict,
            })
        print(f"[inequalities] beta={fmt(p.beta)} c={fmt(p.c)} d={fmt(p.d)}")
        print(report_table(shown))
    write_csv(os.path.join(out_dir, "inequalities.csv"),
              ["shape", "inequality", "beta", "c", "d", "p", "n", "lhs", "rhs",
               "slack", "rel_slack", "rigidity_score", "verdict"], rows)
    write_json(os.path.join(out_dir, "inequalities.json"), payload)
    return ok, {"inequalities_ok": ok, "n_reports": len(payload)}


def _sweep_levels(runner: _Runner, transport_refinement):
    sc = runner.sc
    taus = geometric_tau_grid(sc.tau_start, sc.tau_stop, sc.tau_count)
    start_mesh = runner.mesh(transport_refinement)
    return taus, transport_sweep(runner.fine, taus, start_mesh=start_mesh,
                                 rtol=1e-7)


def run_monotonicity(runner: _Runner, out_dir, plots=True):
    sc = runner.sc
    lref = sc.level_mesh_refinement()
    taus, levels = _sweep_levels(runner, lref)
    _, levels_coarse = _sweep_levels(runner, max(0, lref - 1))
    ok = True
    summary = []
    for p in sc.sweep:
        fine = curve_from_levels(levels, p)
        coarse = curve_from_levels(levels_coarse, p)
        noise = np.maximum.reduce([np.abs(fine.H_cd - coarse.H_cd),
                                   np.abs(fine.F_beta - coarse.F_beta)])
        curve = curve_from_levels(levels, p, noise=noise)
        tag = _param_tag(p)
        flags = np.zeros(len(taus), dtype=int)
        for i, _, _ in curve.violations:
            flags[i + 1] = 1
        for i, _, _ in curve.fprime_violations:
            flags[i] = 1
        for i, _, _ in curve.convexity_violations:
            flags[i] = 1
        write_csv(os.path.join(out_dir, f"curve_{tag}.csv"),
                  ["tau", "H_cd", "F_beta", "F_beta_prime", "residual",
                   "violation_flag"],
                  [[t, h, fb, fp, r, fl] for t, h, fb, fp, r, fl in
                   zip(curve.taus, curve.H_cd, curve.F_beta,
                       curve.F_beta_prime, curve.residuals, flags)])
        if plots:
            write_svg_lines(os.path.join(out_dir, f"curve_{tag}.svg"),
                            [("H_cd", curve.taus, curve.H_cd),
                             ("F_beta", curve.taus, curve.F_beta)],
                            title=f"level-set functionals {tag}",
                            ylabel="functional")
        ok &= curve.clean
        summary.append({"params": tag,
                        "violations": len(curve.violations),
                        "fprime_violations": len(curve.fprime_violations),
                        "convexity_violations": len(curve.convexity_violations)})
        print(f"[monotonicity] {tag}: "
              f"H {len(curve.violations)} viol, "
              f"F' {len(curve.fprime_violations)}, "
              f"convexity {len(curve.convexity_violations)}")
    return ok, {"monotonicity_ok": ok, "curves": summary}


def run_divergence(runner: _Runner, out_dir):
    sc = runner.sc
    sol_f, sol_c = runner.fine, runner.coarse
    pts = sample_exterior_points(sol_f, sc.div_points, seed=sc.seed,
                                 radius_range=sc.div_radius)
    uf, gf, hf = eval_field_batch(sol_f, pts)
    uc, gc, hc = eval_field_batch(sol_c, pts)
    h_norm2 = np.einsum("nij,nij->n", hf, hf)
    trace_rel = np.abs(hf[:, 0, 0] + hf[:, 1, 1] + hf[:, 2, 2]) / np.sqrt(h_norm2)
    ok = bool(np.all(trace_rel <= 1e-6)) and bool(np.all((uf > 0) & (uf < 1)))
    results = {
        "points": int(len(pts)),
        "max_trace_rel": float(trace_rel.max()),
        "u_in_01": bool(np.all((uf > 0) & (uf < 1))),
        "params": [],
    }
    for p in sc.sweep:
        _, divf, katof = z_divergence(uf, gf, hf, p)
        _, divc, _ = z_divergence(uc, gc, hc, p)
        est = np.abs(divf - divc)
        floor = 1e-12 * np.abs(divf).max()
        min_margin = float(np.min(divf + 3.0 * est + floor))
        kato_rel = katof / h_norm2
        p_ok = min_margin >= 0.0 and bool(np.all(kato_rel >= -1e-8))
        ok &= p_ok
        results["params"].append({
            "params": _param_tag(p),
            "min_divZ": float(divf.min()),
            "min_divZ_plus_tolerance": min_margin,
            "min_kato_rel": float(kato_rel.min()),
            "ok": p_ok,
        })
        print(f"[divergence] {_param_tag(p)}: min divZ {fmt(divf.min())}, "
              f"min kato/|D2u|^2 {fmt(kato_rel.min())} -> "
              f"{'ok' if p_ok else 'VIOLATED'}")
    results["divergence_ok"] = ok
    write_json(os.path.join(out_dir, "divergence.json"), results)
    return ok, results


def run_identity(runner: _Runner, out_dir):
    sc = runner.sc
    start_mesh = runner.mesh(sc.level_mesh_refinement())
    rep = integral_identity_check(
        runner.fine, sc.identity_params, sc.identity_u0, sc.identity_u1,
        s_count=sc.identity_s_count, start_mesh=start_mesh, rtol=1e-8)
    # both sides vanish on balls, so the verdict compares the gap against
    # the magnitude of the functionals themselves
    ok = rep.gap <= sc.identity_rel * rep.scale
    payload = {
        "lhs_coarea": rep.lhs, "rhs_boundary_difference": rep.rhs,
        "gap": rep.gap, "rel_gap": rep.rel_gap, "scale": rep.scale,
        "levels_extrapolated": rep.n_extrapolated,
        "tolerance": sc.identity_rel, "identity_ok": ok,
        "params": _param_tag(sc.identity_params),
        "u0": sc.identity_u0, "u1": sc.identity_u1,
    }
    write_json(os.path.join(out_dir, "identity.json"), payload)
    write_csv(os.path.join(out_dir, "identity_profile.csv"),
              ["s", "coarea_integrand"],
              [[s, g] for s, g in zip(rep.s_grid, rep.g_values)])
    print(f"[identity] lhs={fmt(rep.lhs)} rhs={fmt(rep.rhs)} "
          f"rel_gap={fmt(rep.rel_gap)} -> {'ok' if ok else 'VIOLATED'}")
    return ok, payload


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_scenario(sc: Scenario) -> int:
    """solve -> selected checks -> artifacts + summary; 0 iff all hold."""
    os.makedirs(sc.out_dir, exist_ok=True)
    runner = _Runner(sc)
    summary = {"shape": sc.shape_spec, "refinement": sc.refinement,
               "cap": runner.fine.cap, "solver": runner.fine.diagnostics}
    all_ok = True
    for check in sc.checks:
        if check == "inequalities":
            ok, info = run_inequalities(runner, sc.out_dir)
        elif check == "monotonicity":
            ok, info = run_monotonicity(runner, sc.out_dir, plots=sc.plots)
        elif check == "divergence":
            ok, info = run_divergence(runner, sc.out_dir)
        elif check == "identity":
            ok, info = run_identity(runner, sc.out_dir)
        else:  # pragma: no cover - guarded by config validation
            raise ConfigError(f"unknown check {check}")
        summary[check] = info
        all_ok &= ok
    summary["overall"] = "pass" if all_ok else "fail"
    write_json(os.path.join(sc.out_dir, "summary.json"), summary)
    print(f"OVERALL: {summary['overall']}")
    return 0 if all_ok else 1


def cmd_solve(sc: Scenario) -> int:
    os.makedirs(sc.out_dir, exist_ok=True)
    runner = _Runner(sc)
    sol = runner.fine
    dump_solution(sol, os.path.join(sc.out_dir, "solution.json"))
    cap_charge = sol.cap
    write_json(os.path.join(sc.out_dir, "solve_summary.json"), {
        "shape": sc.shape_spec, "refinement": sc.refinement,
        "panels": sol.mesh.n_triangles, "area": sol.mesh.area,
        "cap": cap_charge, "diagnostics": sol.diagnostics,
    })
    print(f"panels={sol.mesh.n_triangles} area={fmt(sol.mesh.area)} "
          f"cap={fmt(cap_charge)}")
    return 0


def cmd_converge(sc: Scenario, refinements) -> int:
    os.makedirs(sc.out_dir, exist_ok=True)
    if len(refinements) < 3:
        raise ConfigError("convergence study needs >= 3 refinement levels")
    shape = sc.shape()
    cap_exact = None
    if isinstance(shape, Sphere):
        cap_exact = shape.radius
    elif isinstance(shape, Ellipsoid):
        ax = sorted([shape.a, shape.b, shape.c])
        if math.isclose(ax[0], ax[1], rel_tol=1e-12):
            cap_exact = oracles.spheroid_capacity(ax[2], ax[0])
    rows = []
    caps, slacks, gaps = [], [], []
    p0 = sc.sweep[0]
    for k in refinements:
        mesh = make_surface(shape, k)
        sol = solve_exterior_potential(mesh)
        rep = check_all(sol, mesh, p0)["parametric_1_2"]
        start_mesh = make_surface(shape, max(1, k - 1))
        idrep = integral_identity_check(sol, sc.identity_params, sc.identity_u0,
                                        sc.identity_u1,
                                        s_count=sc.identity_s_count,
                                        start_mesh=start_mesh, rtol=1e-8)
        caps.append(sol.cap)
        slacks.append(rep.rel_slack)
        gaps.append(idrep.rel_gap)
        rows.append([k, mesh.n_triangles, sol.cap,
                     float("nan") if cap_exact is None else abs(sol.cap - cap_exact) / cap_exact,
                     rep.rel_slack, idrep.rel_gap])
        print(f"[converge] refinement {k}: cap={fmt(sol.cap)} "
              f"slack={fmt(rep.rel_slack)} identity_gap={fmt(idrep.rel_gap)}")
    if cap_exact is not None:
        errors = [abs(c - cap_exact) / cap_exact for c in caps]
    else:
        errors = [abs(c - caps[-1]) / abs(caps[-1]) for c in caps[:-1]]
    orders = [math.log(errors[i - 1] / errors[i]) / math.log(2.0)
              if errors[i] > 0 else float("nan")
              for i in range(1, len(errors))]
    write_csv(os.path.join(sc.out_dir, "convergence.csv"),
              ["refinement", "panels", "cap", "cap_rel_error",
               "parametric_rel_slack", "identity_rel_gap"], rows)
    write_json(os.path.join(sc.out_dir, "convergence_summary.json"), {
        "refinements": list(refinements), "caps": caps,
        "cap_exact": cap_exact, "observed_orders": orders,
        "identity_gaps": gaps,
    })
    improving = errors[-1] < 0.9 * errors[0] if len(errors) >= 2 else False
    if not improving:
        print("no convergence: capacity error is not decreasing")
        return 1
    print(f"observed capacity convergence orders: {[fmt(o) for o in orders]}")
    return 0


def cmd_oracle_dump(sc: Scenario | None, out_dir) -> int:
    os.makedirs(out_dir, exist_ok=True)
    sweep = sc.sweep if sc is not None else [ParamSet(2.0, 1.0, 0.0),
                                             ParamSet(2.0, 0.0, 1.0),
                                             ParamSet(2.0, -1.0, 1.0)]
    p_exps = sc.p_exponents if sc is not None else [1.5, 2.0]
    ball = {}
    for p in sweep:
        ball[f"beta={fmt(p.beta)},c={fmt(p.c)},d={fmt(p.d)}"] = \
            oracles.ball_reference_values(1.0, 3, p.beta, p.c, p.d)
    payload = {
        "unit_sphere_area": oracles.sphere_area(3),
        "ball_R1_n3": ball,
        "generalized_willmore_ball": {
            fmt(p): oracles.generalized_willmore_ball(1.0, 3, p) for p in p_exps},
        "spheroid_2_1": {
            "capacity": oracles.spheroid_capacity(2.0, 1.0),
            "area": oracles.spheroid_area(2.0, 1.0),
            "willmore_energy": oracles.willmore_energy_quadrature(
                Ellipsoid(a=2.0, b=1.0, c=1.0), 2.0),
        },
        "clifford_ratio_torus": {
            "willmore_energy": oracles.willmore_energy_quadrature(
                Torus(major_radius=math.sqrt(2.0), minor_radius=1.0), 2.0),
            "two_pi_squared": 2.0 * math.pi**2,
        },
    }
    path = os.path.join(out_dir, "oracle_reference.json")
    write_json(path, payload)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", required=False, help="scenario config file")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--refinement", type=int, default=None,
                     help="override the solve refinement")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the sample-point seed")
    sub.add_argument("--no-plots", action="store_true", help="skip SVG output")


def _scenario_from_args(args, need_config=True) -> Scenario | None:
    if args.config is None:
        if need_config:
            raise ConfigError("--config is required for this subcommand")
        return None
    sc = parse_config(args.config)
    if args.refinement is not None:
        if args.refinement < 0:
            raise ConfigError("--refinement must be >= 0")
        sc.refinement = args.refinement
        sc.transport_refinement = None
    if args.seed is not None:
        sc.seed = args.seed
    if args.out is not None:
        sc.out_dir = args.out
    if args.no_plots:
        sc.plots = False
    return sc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="willmore",
        description="Verify Willmore-type inequalities via exterior potentials")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "monotonicity", "divcheck", "identity"):
        _add_common(subs.add_parser(name))
    conv = subs.add_parser("converge")
    _add_common(conv)
    conv.add_argument("--refinements", default="2,3,4",
                      help="comma-separated refinement levels")
    dump = subs.add_parser("oracle-dump")
    _add_common(dump)

    args = parser.parse_args(argv)
    try:
        if args.command == "oracle-dump":
            sc = _scenario_from_args(args, need_config=False)
            return cmd_oracle_dump(sc, args.out or (sc.out_dir if sc else "out"))
        sc = _scenario_from_args(args)
        if args.command == "solve":
            return cmd_solve(sc)
        if args.command == "converge":
            refinements = [int(t) for t in args.refinements.split(",") if t.strip()]
            return cmd_converge(sc, refinements)
        if args.command == "verify":
            return run_scenario(sc)
        sc.checks = ({"monotonicity": ("monotonicity",),
                      "divcheck": ("divergence",),
                      "identity": ("identity",)}[args.command])
        return run_scenario(sc)
    except (ConfigError, AdmissibilityError, ShapeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SolverError, TransportError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
