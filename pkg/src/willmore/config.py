"""Scenario configuration: INI-style key/value files with sections.

Schema (see README for the full description):

    [shape]       kind = sphere | ellipsoid | perturbed_sphere | torus, plus
                  the shape's parameters (radius / a,b,c / modes / radii)
    [run]         refinement, transport_refinement, seed, checks
    [params]      sweep = beta,c,d; beta,c,d; ...     p_exponents = p, p, ...
    [tau_grid]    start, stop, count
    [identity]    beta, c, d, u0, u1, s_count
    [divergence]  points, radius_min, radius_max
    [tolerances]  slack_rel, identity_rel
    [output]      directory, plots

Every parameter set in the sweep must be admissible (c+d >= 0, d >= 0,
beta >= (n-2)/(n-1)); violations are configuration errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import AdmissibilityError, ConfigError, ShapeError
from .functionals import ParamSet
from .shapes import shape_from_dict

ALL_CHECKS = ("inequalities", "monotonicity", "divergence", "identity")


@dataclass
class Scenario:
    shape_spec: dict
    refinement: int = 3
    transport_refinement: int | None = None
    seed: int = 0
    checks: tuple = ALL_CHECKS
    sweep: list = field(default_factory=list)
    p_exponents: list = field(default_factory=lambda: [1.5, 2.0])
    tau_start: float = 1.0
    tau_stop: float = 50.0
    tau_count: int = 40
    identity_params: ParamSet = None
    identity_u0: float = 0.2
    identity_u1: float = 1.0
    identity_s_count: int = 33
    div_points: int = 500
    div_radius: tuple = (1.2, 20.0)
    slack_rel: float = 0.0     # extra slack-tolerance floor, relative to scale
    identity_rel: float = 0.02
    out_dir: str = "out"
    plots: bool = True

    def shape(self):
        try:
            return shape_from_dict(self.shape_spec)
        except (ShapeError, ValueError, TypeError) as e:
            raise ConfigError(f"bad shape: {e}") from e

    def level_mesh_refinement(self):
        """Transport levels default to one refinement step below the solve
        mesh: same field accuracy, much cheaper level quadrature."""
        if self.transport_refinement is not None:
            return self.transport_refinement
        return max(1, self.refinement - 1)


def _parse_floats(text):
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def _parse_sweep(text, n=3):
    out = []
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        vals = [float(tok) for tok in group.split(",")]
        if len(vals) != 3:
            raise ConfigError(f"sweep entry {group!r} is not beta,c,d")
        try:
            p = ParamSet(beta=vals[0], c=vals[1], d=vals[2], n=n)
            p.require_admissible()
        except AdmissibilityError as e:
            raise ConfigError(str(e)) from e
        out.append(p)
    return out


def _parse_modes(text):
    modes = []
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        vals = [float(tok) for tok in group.split(",")]
        if len(vals) != 3:
            raise ConfigError(f"mode entry {group!r} is not degree,order,amplitude")
        modes.append((int(vals[0]), int(vals[1]), vals[2]))
    return modes


def parse_config(path) -> Scenario:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "shape" not in cp:
        raise ConfigError("config needs a [shape] section")

    sh = dict(cp["shape"])
    kind = sh.pop("kind", None)
    if kind is None:
        raise ConfigError("[shape] needs kind = sphere|ellipsoid|perturbed_sphere|torus")
    shape_spec = {"kind": kind}
    try:
        for key, val in sh.items():
            if key == "modes":
                shape_spec["modes"] = _parse_modes(val)
            elif key == "center":
                shape_spec["center"] = tuple(_parse_floats(val))
            else:
                shape_spec[key] = float(val)
    except ValueError as e:
        raise ConfigError(f"bad [shape] value: {e}") from e

    sc = Scenario(shape_spec=shape_spec)
    sc.shape()  # validate now: bad parameters are config errors

    run = cp["run"] if "run" in cp else {}
    try:
        sc.refinement = int(run.get("refinement", sc.refinement))
        if "transport_refinement" in run:
            sc.transport_refinement = int(run["transport_refinement"])
        sc.seed = int(run.get("seed", sc.seed))
    except ValueError as e:
        raise ConfigError(f"bad [run] value: {e}") from e
    if sc.refinement < 0:
        raise ConfigError(f"refinement must be >= 0, got {sc.refinement}")
    if "checks" in run:
        checks = tuple(tok.strip() for tok in run["checks"].split(",") if tok.strip())
        bad = [c for c in checks if c not in ALL_CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; valid: {ALL_CHECKS}")
        if not checks:
            raise ConfigError("at least one check is required")
        sc.checks = checks

    if "params" in cp:
        sec = cp["params"]
        if "sweep" in sec:
            sc.sweep = _parse_sweep(sec["sweep"])
        if "p_exponents" in sec:
            sc.p_exponents = _parse_floats(sec["p_exponents"])
            for p in sc.p_exponents:
                if p < 1.5:
                    raise ConfigError(
                        f"curvature exponent {p} below the n=3 threshold 3/2")
    if not sc.sweep:
        sc.sweep = [ParamSet(2.0, 1.0, 0.0), ParamSet(2.0, 0.0, 1.0),
                    ParamSet(2.0, -1.0, 1.0)]

    if "tau_grid" in cp:
        sec = cp["tau_grid"]
        try:
            sc.tau_start = float(sec.get("start", sc.tau_start))
            sc.tau_stop = float(sec.get("stop", sc.tau_stop))
            sc.tau_count = int(sec.get("count", sc.tau_count))
        except ValueError as e:
            raise ConfigError(f"bad [tau_grid] value: {e}") from e
        if not (1.0 <= sc.tau_start < sc.tau_stop) or sc.tau_count < 4:
            raise ConfigError("tau grid needs 1 <= start < stop and count >= 4")

    if "identity" in cp:
        sec = cp["identity"]
        try:
            beta = float(sec.get("beta", 2.0))
            c = float(sec.get("c", 1.0))
            d = float(sec.get("d", 1.0))
            sc.identity_u0 = float(sec.get("u0", sc.identity_u0))
            sc.identity_u1 = float(sec.get("u1", sc.identity_u1))
            sc.identity_s_count = int(sec.get("s_count", sc.identity_s_count))
            sc.identity_params = ParamSet(beta, c, d).require_admissible()
        except (ValueError, AdmissibilityError) as e:
            raise ConfigError(f"bad [identity] value: {e}") from e
        if not (0.0 < sc.identity_u0 < sc.identity_u1 <= 1.0):
            raise ConfigError("identity needs 0 < u0 < u1 <= 1")
    if sc.identity_params is None:
        sc.identity_params = ParamSet(2.0, 1.0, 1.0)

    if "divergence" in cp:
        sec = cp["divergence"]
        try:
            sc.div_points = int(sec.get("points", sc.div_points))
            sc.div_radius = (float(sec.get("radius_min", sc.div_radius[0])),
                             float(sec.get("radius_max", sc.div_radius[1])))
        except ValueError as e:
            raise ConfigError(f"bad [divergence] value: {e}") from e

    if "tolerances" in cp:
        sec = cp["tolerances"]
        try:
            sc.slack_rel = float(sec.get("slack_rel", sc.slack_rel))
            sc.identity_rel = float(sec.get("identity_rel", sc.identity_rel))
        except ValueError as e:
            raise ConfigError(f"bad [tolerances] value: {e}") from e

    if "output" in cp:
        sec = cp["output"]
        sc.out_dir = sec.get("directory", sc.out_dir)
        sc.plots = sec.getboolean("plots", fallback=sc.plots)
    return sc
