"""Parametric closed surfaces with exact normals and curvature.

Every shape is described implicitly by a smooth function F with F < 0 inside
the body and F > 0 outside.  Outward unit normal and (sum-convention) mean
curvature then come from the standard implicit formulas

    nu = DF / |DF|,      H = Lap(F)/|DF| - D2F(DF,DF)/|DF|^3,

so a unit sphere has H = 2 with respect to the outward normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

MAX_HARMONIC_DEGREE = 8


def _as_points(x):
    p = np.atleast_2d(np.asarray(x, dtype=float))
    if p.shape[-1] != 3:
        raise ValueError(f"expected points with 3 columns, got shape {p.shape}")
    return p


class _ImplicitShape:
    """Mixin: normals and mean curvature from the implicit description."""

    def implicit(self, points):
        raise NotImplementedError

    def implicit_grad(self, points):
        raise NotImplementedError

    def implicit_hess(self, points):
        raise NotImplementedError

    def unit_normal(self, points):
        g = self.implicit_grad(_as_points(points))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def mean_curvature(self, points):
        """Sum of principal curvatures w.r.t. the outward normal."""
        p = _as_points(points)
        g = self.implicit_grad(p)
        h = self.implicit_hess(p)
        gn = np.linalg.norm(g, axis=1)
        lap = np.trace(h, axis1=1, axis2=2)
        quad = np.einsum("ni,nij,nj->n", g, h, g)
        return lap / gn - quad / gn**3


@dataclass(frozen=True)
class Sphere(_ImplicitShape):
    radius: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)

    kind = "sphere"
    genus = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise ShapeError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def from_directions(self, dirs):
        return np.asarray(self.center) + self.radius * dirs

    def implicit(self, points):
        d = _as_points(points) - np.asarray(self.center)
        return np.einsum("ni,ni->n", d, d) - self.radius**2

    def implicit_grad(self, points):
        return 2.0 * (_as_points(points) - np.asarray(self.center))

    def implicit_hess(self, points):
        n = _as_points(points).shape[0]
        return np.broadcast_to(2.0 * np.eye(3), (n, 3, 3)).copy()

    def analytic_area(self):
        return 4.0 * math.pi * self.radius**2

    def typical_diameter(self):
        return 2.0 * self.radius


@dataclass(frozen=True)
class Ellipsoid(_ImplicitShape):
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    kind = "ellipsoid"
    genus = 0

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise ShapeError("ellipsoid semi-axes must all be positive")

    @property
    def axes(self):
        return np.array([self.a, self.b, self.c])

    def from_directions(self, dirs):
        return dirs * self.axes

    def implicit(self, points):
        q = _as_points(points) / self.axes
        return np.einsum("ni,ni->n", q, q) - 1.0

    def implicit_grad(self, points):
        return 2.0 * _as_points(points) / self.axes**2

    def implicit_hess(self, points):
        n = _as_points(points).shape[0]
        return np.broadcast_to(np.diag(2.0 / self.axes**2), (n, 3, 3)).copy()

    def analytic_area(self):
        """Closed form for spheroids (two equal axes); None for triaxial."""
        ax = sorted([self.a, self.b, self.c])
        if math.isclose(ax[0], ax[2], rel_tol=1e-12):
            return 4.0 * math.pi * ax[0] ** 2
        if math.isclose(ax[0], ax[1], rel_tol=1e-12):  # prolate: a > b = c
            a, b = ax[2], ax[0]
            e = math.sqrt(1.0 - b * b / (a * a))
            return 2.0 * math.pi * b * b * (1.0 + (a / (b * e)) * math.asin(e))
        if math.isclose(ax[1], ax[2], rel_tol=1e-12):  # oblate: a = b > c
            a, c = ax[2], ax[0]
            e = math.sqrt(1.0 - c * c / (a * a))
            return 2.0 * math.pi * a * a * (1.0 + ((1.0 - e * e) / e) * math.atanh(e))
        return None

    def typical_diameter(self):
        return 2.0 * max(self.a, self.b, self.c)


@dataclass(frozen=True)
class Torus(_ImplicitShape):
    major_radius: float = math.sqrt(2.0)
    minor_radius: float = 1.0

    kind = "torus"
    genus = 1

    def __post_init__(self):
        if self.minor_radius <= 0 or self.major_radius <= 0:
            raise ShapeError("torus radii must be positive")
        if self.minor_radius >= self.major_radius:
            raise ShapeError(
                f"torus needs minor radius < major radius, got "
                f"{self.minor_radius} >= {self.major_radius}"
            )

    def param_point(self, theta, alpha):
        """theta around the axis, alpha around the tube."""
        rho = self.major_radius + self.minor_radius * np.cos(alpha)
        return np.stack(
            [rho * np.cos(theta), rho * np.sin(theta), self.minor_radius * np.sin(alpha)],
            axis=-1,
        )

    def implicit(self, points):
        p = _as_points(points)
        rho = np.hypot(p[:, 0], p[:, 1])
        return (rho - self.major_radius) ** 2 + p[:, 2] ** 2 - self.minor_radius**2

    def implicit_grad(self, points):
        p = _as_points(points)
        rho = np.hypot(p[:, 0], p[:, 1])
        f = 2.0 * (rho - self.major_radius) / rho
        return np.stack([f * p[:, 0], f * p[:, 1], 2.0 * p[:, 2]], axis=1)

    def implicit_hess(self, points):
        p = _as_points(points)
        x, y = p[:, 0], p[:, 1]
        rho = np.hypot(x, y)
        R = self.major_radius
        h = np.zeros((p.shape[0], 3, 3))
        h[:, 0, 0] = 2.0 - 2.0 * R / rho + 2.0 * R * x**2 / rho**3
        h[:, 1, 1] = 2.0 - 2.0 * R / rho + 2.0 * R * y**2 / rho**3
        h[:, 2, 2] = 2.0
        h[:, 0, 1] = h[:, 1, 0] = 2.0 * R * x * y / rho**3
        return h

    def analytic_area(self):
        return 4.0 * math.pi**2 * self.major_radius * self.minor_radius

    def typical_diameter(self):
        return 2.0 * (self.major_radius + self.minor_radius)


def real_sph_harm_expr(degree, order):
    """Sympy expression (in x, y, z) for the orthonormal real spherical
    harmonic extended to R^3 \\ {0} as a degree-zero homogeneous function.

    Written as N * Re/Im((x+iy)^m) * (d^m/dt^m P_l)(z/r) / r^m, which is
    polynomial over r-powers and therefore smooth at the poles.
    """
    import sympy as sp

    l, m = degree, order
    am = abs(m)
    if not (0 <= am <= l):
        raise ShapeError(f"harmonic order |{m}| exceeds degree {l}")
    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x**2 + y**2 + z**2)
    t = sp.Symbol("t", real=True)
    q = sp.diff(sp.legendre(l, t), t, am)
    w = sp.expand((x + sp.I * y) ** am)
    cpart = sp.re(w) if m >= 0 else sp.im(w)
    norm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am))
    if m != 0:
        norm *= math.sqrt(2.0)
    expr = norm * (-1) ** am * cpart * q.subs(t, z / r) / r**am
    return sp.simplify(expr), (x, y, z)


class _HarmonicBump:
    """One real spherical-harmonic mode with lambdified value/grad/hessian."""

    def __init__(self, degree, order, amplitude):
        import sympy as sp

        self.degree = int(degree)
        self.order = int(order)
        self.amplitude = float(amplitude)
        expr, (x, y, z) = real_sph_harm_expr(self.degree, self.order)
        grads = [sp.diff(expr, v) for v in (x, y, z)]
        hesses = [[sp.diff(g, v) for v in (x, y, z)] for g in grads]
        self._val = sp.lambdify((x, y, z), expr, "numpy")
        self._grad = [sp.lambdify((x, y, z), g, "numpy") for g in grads]
        self._hess = [[sp.lambdify((x, y, z), h, "numpy") for h in row] for row in hesses]

    def value(self, p):
        out = self._val(p[:, 0], p[:, 1], p[:, 2])
        return self.amplitude * np.broadcast_to(out, p.shape[:1]).astype(float)

    def grad(self, p):
        cols = [np.broadcast_to(g(p[:, 0], p[:, 1], p[:, 2]), p.shape[:1]) for g in self._grad]
        return self.amplitude * np.stack(cols, axis=1).astype(float)

    def hess(self, p):
        n = p.shape[0]
        out = np.empty((n, 3, 3))
        for i in range(3):
            for j in range(i, 3):
                v = np.broadcast_to(self._hess[i][j](p[:, 0], p[:, 1], p[:, 2]), (n,))
                out[:, i, j] = v
                out[:, j, i] = v
        return self.amplitude * out


class PerturbedSphere(_ImplicitShape):
    """Star-shaped surface r(omega) = R + sum_k a_k Y_{l_k m_k}(omega).

    Modes are orthonormal real spherical harmonics of degree <= 8; amplitudes
    are lengths.  Construction rejects mode sets that could break embedding,
    using the bound max |Y_lm| <= sqrt((2l+1)/(4 pi)).
    """

    kind = "perturbed_sphere"
    genus = 0

    def __init__(self, radius=1.0, modes=()):
        if radius <= 0:
            raise ShapeError(f"radius must be positive, got {radius}")
        self.radius = float(radius)
        self.modes = tuple((int(l), int(m), float(a)) for l, m, a in modes)
        worst = 0.0
        for l, m, a in self.modes:
            if l < 0 or abs(m) > l:
                raise ShapeError(f"invalid harmonic (degree={l}, order={m})")
            if l > MAX_HARMONIC_DEGREE:
                raise ShapeError(
                    f"harmonic degree {l} exceeds supported maximum {MAX_HARMONIC_DEGREE}"
                )
            worst += abs(a) * math.sqrt((2 * l + 1) / (4 * math.pi))
        if worst >= self.radius:
            raise ShapeError(
                f"total perturbation amplitude {worst:.4g} must stay below the "
                f"radius {self.radius:.4g} (surface would not stay embedded)"
            )
        self._bumps = [_HarmonicBump(l, m, a) for l, m, a in self.modes]

    def __repr__(self):
        return f"PerturbedSphere(radius={self.radius}, modes={list(self.modes)})"

    def _psi(self, p):
        """Degree-zero homogeneous extension of the radial bump field."""
        out = np.zeros(p.shape[0])
        for b in self._bumps:
            out += b.value(p)
        return out

    def _psi_grad(self, p):
        out = np.zeros((p.shape[0], 3))
        for b in self._bumps:
            out += b.grad(p)
        return out

    def _psi_hess(self, p):
        out = np.zeros((p.shape[0], 3, 3))
        for b in self._bumps:
            out += b.hess(p)
        return out

    def from_directions(self, dirs):
        d = _as_points(dirs)
        return (self.radius + self._psi(d))[:, None] * d

    def implicit(self, points):
        p = _as_points(points)
        return np.linalg.norm(p, axis=1) - self.radius - self._psi(p)

    def implicit_grad(self, points):
        p = _as_points(points)
        r = np.linalg.norm(p, axis=1, keepdims=True)
        return p / r - self._psi_grad(p)

    def implicit_hess(self, points):
        p = _as_points(points)
        r = np.linalg.norm(p, axis=1)
        eye = np.broadcast_to(np.eye(3), (p.shape[0], 3, 3))
        radial = eye / r[:, None, None] - np.einsum("ni,nj->nij", p, p) / r[:, None, None] ** 3
        return radial - self._psi_hess(p)

    def analytic_area(self):
        return None

    def typical_diameter(self):
        return 2.0 * self.radius


def shape_from_dict(spec: dict):
    """Build a shape from a plain dict, e.g. parsed from a config file."""
    d = dict(spec)
    kind = d.pop("kind", None)
    if kind == "sphere":
        return Sphere(radius=float(d.pop("radius", 1.0)),
                      center=tuple(d.pop("center", (0.0, 0.0, 0.0))))
    if kind == "ellipsoid":
        return Ellipsoid(a=float(d.pop("a", 1.0)), b=float(d.pop("b", 1.0)),
                         c=float(d.pop("c", 1.0)))
    if kind == "perturbed_sphere":
        return PerturbedSphere(radius=float(d.pop("radius", 1.0)),
                               modes=d.pop("modes", ()))
    if kind == "torus":
        return Torus(major_radius=float(d.pop("major_radius", math.sqrt(2.0))),
                     minor_radius=float(d.pop("minor_radius", 1.0)))
    raise ShapeError(f"unknown shape kind {kind!r}")
