"""Problem classes, energies, fluxes, residual pairings and contact sets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeffparse import CoeffFn, parse_coeff
from .errors import DimensionMismatch, GridMismatch, NotImplementedForOrder, ProblemError
from .funcspace import (
    DEFAULT_RULE,
    CubicField,
    Grid1D,
    P0Function,
    P1Function,
    QuadratureRule,
    derivative,
    lq_norm,
    sample,
)

KINDS = (
    "dirichlet_poisson",
    "neumann_poisson",
    "obstacle",
    "anisotropic1d",
    "vector_poisson",
    "polyharmonic",
    "fractional",
)


class NotAdmissible(ProblemError):
    pass


def phi_p(t, p):
    """Φ_p(t) = |t|^{p−2} t, pointwise Euclidean for vector values (last axis)."""
    t = np.asarray(t, dtype=float)
    if t.ndim >= 2:
        mag = np.linalg.norm(t, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(mag > 0, mag ** (p - 2), 0.0)
        return scale * t
    return np.abs(t) ** (p - 1) * np.sign(t)


def _as_coeff(f):
    if f is None or isinstance(f, CoeffFn):
        return f
    if isinstance(f, (int, float)):
        return parse_coeff(repr(float(f)))
    if isinstance(f, str):
        return parse_coeff(f)
    if callable(f):
        return f
    raise TypeError(f"not a coefficient: {f!r}")


@dataclass
class ProblemSpec:
    kind: str
    p: float
    grid: Grid1D
    h: object = 1.0
    phi: object = None
    a: object = None
    m: int | None = None
    s: float | None = None
    n_comp: int | None = None
    rule: QuadratureRule = field(default=DEFAULT_RULE, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProblemError(f"unknown problem kind {self.kind!r}")
        if not self.p > 1:
            raise ProblemError(f"exponent must exceed 1, got {self.p}")
        if self.kind == "vector_poisson":
            hs = self.h if isinstance(self.h, (list, tuple)) else [self.h] * (self.n_comp or 1)
            self.n_comp = self.n_comp or len(hs)
            if len(hs) != self.n_comp:
                raise DimensionMismatch(f"{len(hs)} loads for {self.n_comp} components")
            self.h = tuple(_as_coeff(x) for x in hs)
        else:
            if isinstance(self.h, (list, tuple)):
                raise ProblemError(f"{self.kind} takes a scalar load")
            self.h = _as_coeff(self.h)
        self.phi = _as_coeff(self.phi)
        self.a = _as_coeff(self.a)
        if self.kind == "obstacle" and self.phi is None:
            raise ProblemError("obstacle problems need an obstacle")
        if self.kind == "anisotropic1d":
            if self.a is None:
                raise ProblemError("anisotropic problems need a weight a(x)")
            qp = self.rule.points(self.grid)
            if np.min(sample(self.a, qp)) <= 0:
                raise ProblemError("the weight a(x) must be positive at every quadrature node")
        if self.kind == "polyharmonic":
            self.m = 2 if self.m is None else self.m
            if self.m != 2:
                raise NotImplementedForOrder(f"polyharmonic order m={self.m} is not supported (m=2 only)")
        if self.kind == "fractional":
            if self.s is None or not 0 < self.s < 1:
                raise ProblemError("fractional problems need an order s in (0, 1)")
        if self.kind == "neumann_poisson":
            from .funcspace import integrate

            total = integrate(self.h, QuadratureRule(8), grid=self.grid)
            scale = lq_norm(self.h, 2, QuadratureRule(8), grid=self.grid)
            if abs(total) > 1e-10 * max(scale, 1e-300) and abs(total) > 1e-14:
                raise ProblemError(f"Neumann load must have zero mean, ∫h = {total:.3e}")

    @property
    def q(self):
        return self.p / (self.p - 1)

    def with_grid(self, grid):
        return ProblemSpec(self.kind, self.p, grid, self.h if self.kind != "vector_poisson" else list(self.h),
                           self.phi, self.a, self.m, self.s, self.n_comp, self.rule)

    def load_values(self, qp):
        if self.kind == "vector_poisson":
            return np.stack([sample(hk, qp) for hk in self.h], axis=-1)
        return sample(self.h, qp)


def mean_value(v):
    """Exact mean of a P1 field (trapezoid on nodal values)."""
    vals = v.values
    return (0.5 * (vals[:-1] + vals[1:])).mean(axis=0)


def zero_mean(v):
    return P1Function(v.grid, v.values - mean_value(v))


def _check(spec, v):
    if v.grid != spec.grid:
        raise GridMismatch(f"field grid {v.grid} does not match problem grid {spec.grid}")
    if spec.kind == "vector_poisson" and v.ncomp != spec.n_comp:
        raise DimensionMismatch(f"field has {v.ncomp} components, problem has {spec.n_comp}")


def second_derivative(v):
    """Clamped-spline second derivative of nodal values (exact P1 field)."""
    return CubicField(v.grid, v.values, "clamped").second()


def flux(spec, v):
    """τ* = |v'|^{p−2} v' cellwise (weighted by a at midpoints for the anisotropic kind).

    For the polyharmonic kind the flux |v''|^{p−2}v'' is returned as a
    pointwise callable of the clamped-spline second derivative.
    """
    _check(spec, v)
    p = spec.p
    if spec.kind == "polyharmonic":
        d2 = second_derivative(v)
        return lambda x: phi_p(d2.sample(x), p)
    if spec.kind == "fractional":
        from .nonlocalops import flux_kernel

        return flux_kernel(spec.s, p, v)
    d = derivative(v).values
    tau = phi_p(d, p)
    if spec.kind == "anisotropic1d":
        tau = tau * spec.a(spec.grid.midpoints)
    return P0Function(v.grid, tau)


def flux_values(spec, v, qp):
    """Pointwise flux at quadrature points (exact weight for the anisotropic kind)."""
    p = spec.p
    if spec.kind == "polyharmonic":
        return phi_p(second_derivative(v).sample(qp.x, qp.cell), p)
    d = derivative(v).sample(qp.x, qp.cell)
    tau = phi_p(d, p)
    if spec.kind == "anisotropic1d":
        tau = tau * sample(spec.a, qp)
    return tau


def energy(spec, v, quad=None):
    _check(spec, v)
    p = spec.p
    qp = spec.rule.points(spec.grid)
    load = spec.load_values(qp)
    if spec.kind == "polyharmonic":
        cv = CubicField(v.grid, v.values, "clamped")
        top = np.dot(qp.w, np.abs(cv.second().sample(qp.x, qp.cell)) ** p) / p
        return float(top - np.dot(qp.w, load * cv.sample(qp.x)))
    if spec.kind == "fractional":
        from .nonlocalops import pair_quadrature

        quad = quad or pair_quadrature(spec.grid, spec.s, p)
        return quad.seminorm_p(v) / p - float(np.dot(qp.w, load * v.sample(qp.x, qp.cell)))
    d = derivative(v).sample(qp.x, qp.cell)
    mag = np.abs(d) if d.ndim == 1 else np.linalg.norm(d, axis=-1)
    dens = mag**p / p
    if spec.kind == "anisotropic1d":
        dens = dens * sample(spec.a, qp)
    vals = v.sample(qp.x, qp.cell)
    work = load * vals if vals.ndim == 1 else np.sum(load * vals, axis=-1)
    return float(np.dot(qp.w, dens - work))


def residual_pairing(spec, v, xi, quad=None):
    """⟨A v − h, ξ⟩ for the problem's operator."""
    _check(spec, v)
    _check(spec, xi)
    p = spec.p
    if spec.kind == "neumann_poisson":
        xi = zero_mean(xi)
    qp = spec.rule.points(spec.grid)
    load = spec.load_values(qp)
    if spec.kind == "polyharmonic":
        cv = CubicField(v.grid, v.values, "clamped")
        cx = CubicField(xi.grid, xi.values, "clamped")
        tau = phi_p(cv.second().sample(qp.x, qp.cell), p)
        return float(np.dot(qp.w, tau * cx.second().sample(qp.x, qp.cell) - load * cx.sample(qp.x)))
    if spec.kind == "fractional":
        from .nonlocalops import pair_quadrature

        quad = quad or pair_quadrature(spec.grid, spec.s, p)
        return quad.pairing(v, xi) - float(np.dot(qp.w, load * xi.sample(qp.x, qp.cell)))
    tau = flux_values(spec, v, qp)
    dxi = derivative(xi).sample(qp.x, qp.cell)
    xiv = xi.sample(qp.x, qp.cell)
    if tau.ndim == 1:
        return float(np.dot(qp.w, tau * dxi - load * xiv))
    return float(np.dot(qp.w, np.sum(tau * dxi - load * xiv, axis=-1)))


@dataclass(frozen=True)
class CoincidencePartition:
    contact: np.ndarray
    free: np.ndarray

    @property
    def contact_interval(self):
        """(first, last) contact cell indices, or None."""
        idx = np.flatnonzero(self.contact)
        return (int(idx[0]), int(idx[-1])) if idx.size else None


def coincidence_partition(v, phi, tol_contact=1e-8):
    phi = _as_coeff(phi)
    g = v.grid
    ph = np.asarray(phi(g.nodes), dtype=float)
    scale = max(1.0, float(np.max(np.abs(ph))))
    gap = v.values - ph
    if np.any(gap < -10 * tol_contact * scale):
        k = int(np.argmin(gap))
        raise NotAdmissible(f"field lies below the obstacle at x={g.nodes[k]:.6g} by {-gap[k]:.3e}")
    touch = gap <= tol_contact * scale
    contact = touch[:-1] & touch[1:]
    return CoincidencePartition(contact, ~contact)


def contact_region(v, phi, tol_contact=1e-8):
    """Approximate coincidence interval [x_left, x_right] from the contact cells."""
    part = coincidence_partition(v, phi, tol_contact)
    span = part.contact_interval
    if span is None:
        return None
    g = v.grid
    return g.a + span[0] * g.h, g.a + (span[1] + 1) * g.h
