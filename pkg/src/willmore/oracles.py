"""Independent closed-form and quadrature references.

Everything here is computed apart from the boundary-element pipeline (no
import of the solver); the test suite checks the pipeline against these.
Formulas are kept general in the dimension n >= 3 even though the numeric
solver is three-dimensional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .shapes import Ellipsoid, Sphere, Torus


def sphere_area(n: int) -> float:
    """Area |S^{n-1}| of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class RadialField:
    """Exterior potential of a round ball: u(x) = (R/|x - z|)^(n-2)."""

    R: float = 1.0
    z: tuple = (0.0, 0.0, 0.0)
    n: int = 3

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError(f"ball radius must be positive, got {self.R}")
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")


def radial_field(rf: RadialField, x):
    """Closed-form (u, Du, D2u) of the ball potential at one point.

    Works in any dimension n >= 3 (x must have n components); the Hessian is
    exactly trace-free.
    """
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(rf.z, dtype=float)
    rho = np.linalg.norm(d)
    if rho < rf.R:
        raise ValueError(f"point at radius {rho:.3g} is inside the ball R={rf.R}")
    n, R = rf.n, rf.R
    u = (R / rho) ** (n - 2)
    pref = (n - 2) * R ** (n - 2)
    Du = -pref * rho ** (-n) * d
    D2u = pref * rho ** (-n - 2) * (n * np.outer(d, d) - rho**2 * np.eye(len(d)))
    return u, Du, D2u


def ball_reference_values(R: float, n: int, beta: float, c: float, d: float) -> dict:
    """Every quantity the pipeline computes, in closed form for the ball.

    Balls saturate all seven inequalities, so each entry's lhs equals its
    rhs analytically; F_beta and H_cd are constant in tau.
    """
    S = sphere_area(n)
    cap = R ** (n - 2)
    grad = (n - 2) / R
    H = (n - 1) / R
    area = S * R ** (n - 1)
    int_dun_beta_H = grad**beta * H * area          # int |Du|^beta H dS
    int_dun_beta1 = grad ** (beta + 1) * area       # int |Du|^(beta+1) dS
    F_beta = (n - 2) ** (beta + 1) * S * R ** (n - 2 - beta)
    out = {
        "cap": cap,
        "boundary_grad_norm": grad,
        "boundary_H": H,
        "area": area,
        "F_beta": F_beta,
        "H_cd": d * F_beta,
        "parametric_1_2": (
            d * (n - 2) ** (beta + 1) * S * cap ** ((n - 2 - beta) / (n - 2)),
            beta * (c + d) * int_dun_beta_H
            + (d - (n - 1) * beta * (c + d) / (n - 2)) * int_dun_beta1,
        ),
        "willmore_1_5": (S, (H / (n - 1)) ** (n - 1) * area),
        "weighted_minkowski_1_7": (0.0, 0.0),
        "quantitative_willmore_1_8": (0.0, 0.0),
        "geomA_1_9": ((n - 2) ** (beta + 1) * S * cap ** ((n - 2 - beta) / (n - 2)),
                      int_dun_beta1),
        "geomB_1_10": ((n - 1) / (n - 2) * int_dun_beta1, int_dun_beta_H),
    }
    return out


def generalized_willmore_ball(R: float, n: int, p_exp: float):
    """(lhs, rhs) of the capacity-weighted Willmore bound for the ball."""
    S = sphere_area(n)
    lhs = S * (R ** (n - 2)) ** ((n - 1 - p_exp) / (n - 2))
    rhs = ((n - 1) / R / (n - 1)) ** p_exp * S * R ** (n - 1)
    return lhs, rhs


def spheroid_capacity(a: float, b: float) -> float:
    """Conductor capacity of the prolate spheroid with semi-axes a >= b = b.

    sqrt(a^2 - b^2) / arccosh(a/b), continuous at the ball limit a = b.
    """
    if not (a >= b > 0):
        raise ValueError(f"need a >= b > 0, got a={a}, b={b}")
    if a - b < 1e-12 * a:
        return float(b)
    focal = math.sqrt(a * a - b * b)
    return focal / math.acosh(a / b)


# ---------------------------------------------------------------------------
# Parametric surface quadrature (mesh-free Willmore-energy oracle)
# ---------------------------------------------------------------------------


def _fundamental_forms(X, Xu, Xv, Xuu, Xuv, Xvv):
    """Mean curvature (sum convention, outward-positive for the sphere) and
    the area element, from first/second fundamental forms."""
    E = np.einsum("...i,...i->...", Xu, Xu)
    F = np.einsum("...i,...i->...", Xu, Xv)
    G = np.einsum("...i,...i->...", Xv, Xv)
    nvec = np.cross(Xu, Xv)
    nn = np.linalg.norm(nvec, axis=-1)
    nhat = nvec / nn[..., None]
    L = np.einsum("...i,...i->...", Xuu, nhat)
    M = np.einsum("...i,...i->...", Xuv, nhat)
    Nf = np.einsum("...i,...i->...", Xvv, nhat)
    H = -(E * Nf - 2.0 * F * M + G * L) / (E * G - F * F)
    return H, nn


def _ellipsoid_derivs(a, b, c, theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    X = np.stack([a * st * cp, b * st * sp, c * ct], axis=-1)
    Xu = np.stack([a * ct * cp, b * ct * sp, -c * st], axis=-1)
    Xv = np.stack([-a * st * sp, b * st * cp, np.zeros_like(st)], axis=-1)
    Xuu = np.stack([-a * st * cp, -b * st * sp, -c * ct], axis=-1)
    Xuv = np.stack([-a * ct * sp, b * ct * cp, np.zeros_like(st)], axis=-1)
    Xvv = np.stack([-a * st * cp, -b * st * sp, np.zeros_like(st)], axis=-1)
    return X, Xu, Xv, Xuu, Xuv, Xvv


def _torus_derivs(Rmaj, rmin, theta, alpha):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    rho = Rmaj + rmin * ca
    X = np.stack([rho * ct, rho * st, rmin * sa], axis=-1)
    Xu = np.stack([-rho * st, rho * ct, np.zeros_like(ct)], axis=-1)
    Xv = np.stack([-rmin * sa * ct, -rmin * sa * st, rmin * ca], axis=-1)
    Xuu = np.stack([-rho * ct, -rho * st, np.zeros_like(ct)], axis=-1)
    Xuv = np.stack([rmin * sa * st, -rmin * sa * ct, np.zeros_like(ct)], axis=-1)
    Xvv = np.stack([-rmin * ca * ct, -rmin * ca * st, -rmin * sa], axis=-1)
    return X, Xu, Xv, Xuu, Xuv, Xvv


def parametric_mean_curvature(shape, u, v):
    """H (sum convention) at parameter points, from fundamental forms.

    Sphere/ellipsoid use (theta, phi) polar coordinates; the torus uses
    (theta around the axis, alpha around the tube).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if isinstance(shape, Sphere):
        d = _ellipsoid_derivs(shape.radius, shape.radius, shape.radius, u, v)
    elif isinstance(shape, Ellipsoid):
        d = _ellipsoid_derivs(shape.a, shape.b, shape.c, u, v)
    elif isinstance(shape, Torus):
        d = _torus_derivs(shape.major_radius, shape.minor_radius, u, v)
    else:
        raise ShapeError(f"no closed-form curvature for shape kind {shape.kind!r}")
    H, _ = _fundamental_forms(*d)
    return H


def willmore_energy_quadrature(shape, p_exp: float, n_theta=192, n_phi=384) -> float:
    """int (|H|/2)^p dS by tensor-product quadrature in parameter space.

    Gauss-Legendre in the polar angle, trapezoid in the periodic one(s);
    no mesh and no potential solve involved.
    """
    if isinstance(shape, (Sphere, Ellipsoid)):
        if isinstance(shape, Sphere):
            axes = (shape.radius,) * 3
        else:
            axes = (shape.a, shape.b, shape.c)
        tnode, tw = np.polynomial.legendre.leggauss(n_theta)
        theta = 0.5 * math.pi * (tnode + 1.0)
        tw = tw * 0.5 * math.pi
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        pw = 2.0 * math.pi / n_phi
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        H, dA = _fundamental_forms(*_ellipsoid_derivs(*axes, tt, pp))
        integrand = (np.abs(H) / 2.0) ** p_exp * dA
        return float(np.einsum("ij,i->", integrand, tw) * pw)
    if isinstance(shape, Torus):
        n_a = n_phi
        theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
        alpha = 2.0 * math.pi * np.arange(n_a) / n_a
        tt, aa = np.meshgrid(theta, alpha, indexing="ij")
        H, dA = _fundamental_forms(
            *_torus_derivs(shape.major_radius, shape.minor_radius, tt, aa))
        integrand = (np.abs(H) / 2.0) ** p_exp * dA
        return float(integrand.sum() * (2.0 * math.pi / n_theta) * (2.0 * math.pi / n_a))
    raise ShapeError(f"no parametric quadrature for shape kind {shape.kind!r}")


def spheroid_area(a: float, b: float) -> float:
    """Closed-form area of the prolate spheroid (a >= b)."""
    if not (a >= b > 0):
        raise ValueError(f"need a >= b > 0, got a={a}, b={b}")
    if a - b < 1e-12 * a:
        return 4.0 * math.pi * b * b
    e = math.sqrt(1.0 - b * b / (a * a))
    return 2.0 * math.pi * b * b * (1.0 + (a / (b * e)) * math.asin(e))


# ---------------------------------------------------------------------------
# Finite-difference derivative harness
# ---------------------------------------------------------------------------


def finite_difference_validate(field, points, h_steps) -> dict:
    """Check a (u, Du, D2u) evaluator against central differences of itself.

    field(points (P,3)) must return (u (P,), Du (P,3), D2u (P,3,3)).  For
    each step h the worst relative error of Du against FD(u) and of D2u
    against FD(Du) is recorded; errors should fall at second order in h
    until they hit the evaluator's noise floor.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h_steps = sorted(float(h) for h in h_steps)
    u0, g0, h0 = field(points)
    scale_g = np.linalg.norm(g0, axis=1)
    scale_h = np.linalg.norm(h0.reshape(len(points), 9), axis=1)
    grad_err, hess_err = [], []
    for h in h_steps:
        fd_grad = np.empty_like(g0)
        fd_hess = np.empty((len(points), 3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            up, gp, _ = field(points + e)
            um, gm, _ = field(points - e)
            fd_grad[:, k] = (up - um) / (2.0 * h)
            fd_hess[:, :, k] = (gp - gm) / (2.0 * h)
        ge = np.linalg.norm(fd_grad - g0, axis=1) / scale_g
        he = np.linalg.norm((0.5 * (fd_hess + fd_hess.transpose(0, 2, 1)) - h0)
                            .reshape(len(points), 9), axis=1) / scale_h
        grad_err.append(float(ge.max()))
        hess_err.append(float(he.max()))
    orders_g = _observed_orders(h_steps, grad_err)
    orders_h = _observed_orders(h_steps, hess_err)
    return {
        "h_steps": h_steps,
        "grad_rel_err": grad_err,
        "hess_rel_err": hess_err,
        "grad_orders": orders_g,
        "hess_orders": orders_h,
    }


def _observed_orders(hs, errs):
    out = []
    for k in range(1, len(hs)):
        if errs[k] <= 0 or errs[k - 1] <= 0:
            out.append(float("nan"))
        else:
            out.append(math.log(errs[k - 1] / errs[k]) / math.log(hs[k - 1] / hs[k]))
    return out
