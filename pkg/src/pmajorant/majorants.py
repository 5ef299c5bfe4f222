"""Computable a posteriori error bounds.

Every upper bound has the same shape: a dual-norm bound D on the residual
of v is built from a flux candidate η*, and the error is at most
C · D^{1/max(1, p-1)} with a constant C that depends on the branch p ≥ 2
or p < 2.  Lower bounds come from energy differences and from a discrete
maximisation of the residual over test functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .constants import EXACT, HEURISTIC, CertifiedBound, as_bound, worst_provenance
from .errors import DimensionMismatch, NotDivergenceFree, NotImplementedForOrder, ProblemError
from .funcspace import (
    CubicField,
    P1Function,
    QuadratureRule,
    derivative,
    load_vector,
    lq_norm_values,
    nodal_average,
    p1_value_matrix,
    spline_maps,
)
from .problems import (
    NotAdmissible,
    ProblemSpec,
    _as_coeff,
    coincidence_partition,
    energy,
    phi_p,
    zero_mean,
)
from .solvers import ReferenceSolution


class CordesViolated(ProblemError):
    pass


@dataclass
class MajorantReport:
    kind: str
    p: float
    error_measure: float
    dual_norm_bound: float
    constant_C: float
    majorant: float
    certified: bool
    pieces: dict = field(default_factory=dict)
    budget: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def efficiency(self):
        if not self.error_measure or not math.isfinite(self.error_measure):
            return math.inf if self.majorant > 0 else math.nan
        return self.majorant / self.error_measure

    def sandwich_ok(self, lower=None, slack=0.0):
        ok = self.error_measure <= self.majorant + self.budget + slack
        if lower is not None:
            ok = ok and lower <= self.error_measure + self.budget + slack
        return bool(ok)

    def to_json(self):
        def clean(x):
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, (np.floating, float)):
                return float(x) if math.isfinite(x) else None
            if isinstance(x, np.integer):
                return int(x)
            if isinstance(x, CertifiedBound):
                return x.to_json()
            return x

        return clean({
            "kind": self.kind, "p": self.p, "error_measure": self.error_measure,
            "dual_norm_bound": self.dual_norm_bound, "constant_C": self.constant_C,
            "majorant": self.majorant, "efficiency": self.efficiency, "certified": self.certified,
            "pieces": self.pieces, "budget": self.budget, "meta": self.meta,
        })


def _rule(u_ref=None, rule=None, order=6):
    if rule is not None:
        return rule
    marks = u_ref.marks if isinstance(u_ref, ReferenceSolution) else ()
    return QuadratureRule(order, marks)


def _conj(p):
    return p / (p - 1)


def _field(u):
    return u.field if isinstance(u, ReferenceSolution) else u


def _slope_values(v, qp):
    return derivative(v).sample(qp.x, qp.cell)


def gradient_error(u_ref, v, p, rule=None):
    """‖∇(u_ref − v)‖_p, using the exact derivative of u_ref when it is known."""
    if u_ref is None:
        return math.nan
    rule = _rule(u_ref, rule)
    grid = v.grid
    qp = rule.points(grid)
    if isinstance(u_ref, ReferenceSolution) and u_ref.grad is not None and u_ref.grid == grid:
        du = u_ref.grad(qp.x)
    else:
        du = _slope_values(_field(u_ref).resample(grid) if _field(u_ref).grid != grid else _field(u_ref), qp)
    return lq_norm_values(du - _slope_values(v, qp), qp, p)


def _budget(u_ref):
    return float(u_ref.est_accuracy) if isinstance(u_ref, ReferenceSolution) else 0.0


def _error_constant(p, dual, ref_norm_p, const_inv_scale=1.0):
    """(C, majorant) for the two branches.

    ``ref_norm_p`` is the quantity raised to (2−p)/p in the p<2 constant.
    """
    if p >= 2:
        C = 2.0 ** ((p - 2) / (p - 1))
        return C, C * dual ** (1.0 / (p - 1))
    C = (2.0 ** ((2 - p) / p) / (p - 1)) * ref_norm_p ** ((2 - p) / p) * const_inv_scale
    return C, C * dual


def _load_norm(h, grid, q, rule):
    qp = rule.points(grid)
    vals = np.stack([np.asarray(hk(qp.x), float) for hk in h], axis=-1) if isinstance(h, (list, tuple)) else np.asarray(_as_coeff(h)(qp.x), float)
    return lq_norm_values(vals, qp, q)


def _load_values(h, qp):
    if isinstance(h, (list, tuple)):
        return np.stack([np.broadcast_to(np.asarray(_as_coeff(hk)(qp.x), float), qp.x.shape) for hk in h], axis=-1)
    return np.broadcast_to(np.asarray(_as_coeff(h)(qp.x), float), qp.x.shape)


def _flux_pieces(p, v, eta, h, rule, weight=None, subsets=None):
    """‖τ*−η*‖_{p'} and the residual η*' + h at quadrature points."""
    q = _conj(p)
    grid = v.grid
    if eta.grid != grid:
        raise ProblemError("the flux candidate must live on the grid of v")
    qp = rule.points(grid)
    tau = phi_p(_slope_values(v, qp), p)
    if weight is not None:
        tau = tau * np.asarray(weight(qp.x), float)
    flux_term = lq_norm_values(tau - eta.sample(qp.x, qp.cell), qp, q)
    res = derivative(eta).sample(qp.x, qp.cell) + _load_values(h, qp)
    return flux_term, res, qp


def ideal_flux(u_ref):
    """Nodal interpolant of the exact flux of the reference solution."""
    if isinstance(u_ref, ReferenceSolution) and u_ref.flux_nodal is not None:
        return u_ref.flux_nodal
    raise ProblemError("reference solution carries no nodal flux")


def postprocessed_flux(spec, v):
    """Cellwise flux of v averaged to the nodes."""
    from .problems import flux

    tau = flux(spec, v)
    if spec.kind == "polyharmonic":
        return P1Function(v.grid, tau(v.grid.nodes))
    return nodal_average(tau)


def majorant_poisson(p, v, eta, C_F, h, u_ref=None, rule=None):
    """Upper bound on ‖∇(u − v)‖_p for −Δ_p u = h with zero boundary values."""
    C_F = as_bound(C_F)
    rule = _rule(u_ref, rule)
    q = _conj(p)
    flux_term, res, qp = _flux_pieces(p, v, eta, h, rule)
    res_term = C_F.value * lq_norm_values(res, qp, q)
    dual = flux_term + res_term
    grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
    hn = _load_norm(h, v.grid, q, rule)
    C, M = _error_constant(p, dual, C_F.value**q * hn**q + grad_v**p)
    return MajorantReport(
        "dirichlet_poisson", p, gradient_error(u_ref, v, p, rule), dual, C, M,
        C_F.certified, {"flux": flux_term, "residual": res_term}, _budget(u_ref),
        {"C_F": C_F.to_json()},
    )


def lower_bound_poisson(p, v, w, C_F, h, spec=None):
    """Energy-difference lower bound on ‖∇(u − v)‖_p; any admissible w gives one."""
    C_F = as_bound(C_F)
    if spec is None:
        spec = ProblemSpec("dirichlet_poisson", p, v.grid, h)
    drop = max(energy(spec, v) - energy(spec, w), 0.0)
    if drop == 0:
        return 0.0
    if p <= 2:
        return (2.0 ** (p - 2) * drop) ** (1.0 / p)
    q = _conj(p)
    qp = spec.rule.points(v.grid)
    grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
    hn = _load_norm(spec.h, v.grid, q, QuadratureRule(8))
    X = C_F.value**q * hn**q + grad_v**p
    return (2.0 ** ((2 - p) / p) / (p - 1) * X ** ((2 - p) / p) * drop) ** 0.5


def duality_majorant(p, v, qstar, h, tol_div=1e-6, rule=None):
    """M(v, q*) = ∫ |v'|^p/p + |q*|^{p'}/p' − q*·v' for a balanced q* (q*' + h = 0)."""
    rule = rule or QuadratureRule(6)
    q = _conj(p)
    qp = rule.points(v.grid)
    div = derivative(qstar).sample(qp.x, qp.cell) + _load_values(h, qp)
    mismatch = lq_norm_values(div, qp, q)
    if mismatch > tol_div:
        raise NotDivergenceFree(f"‖q*' + h‖ = {mismatch:.3e} exceeds {tol_div:.1e}")
    return _young_gap(p, _slope_values(v, qp), qstar.sample(qp.x, qp.cell), qp)


def _young_gap(p, grad, flux_vals, qp):
    q = _conj(p)
    mag_g = np.abs(grad) if grad.ndim == 1 else np.linalg.norm(grad, axis=-1)
    mag_f = np.abs(flux_vals) if flux_vals.ndim == 1 else np.linalg.norm(flux_vals, axis=-1)
    dot = grad * flux_vals if grad.ndim == 1 else np.sum(grad * flux_vals, axis=-1)
    return float(np.dot(qp.w, mag_g**p / p + mag_f**q / q - dot))


def lambda_star(p, eta, u_ref, rule=None):
    """λ*(η*): the Young gap between ∇u and η*; zero exactly at the solution's flux."""
    rule = _rule(u_ref, rule)
    grid = eta.grid
    qp = rule.points(grid)
    if isinstance(u_ref, ReferenceSolution) and u_ref.grad is not None:
        du = u_ref.grad(qp.x)
    else:
        du = _slope_values(_field(u_ref), qp)
    return _young_gap(p, du, eta.sample(qp.x, qp.cell), qp)


def _c2(p, eps, C_F, grad_w, h_norm, w_norm):
    q = _conj(p)
    lim = 1.0 / (1.0 + C_F**p)
    if not 0 < eps < lim:
        return math.inf
    inner = eps ** (1 - p) * grad_w**p + eps ** (-1 / (p - 1)) * h_norm**q + h_norm * w_norm
    return (1 - eps * (1 + C_F**p)) ** (-1 / p) * inner ** (1 / p)


def obstacle_energy_bounds(p, w, h, C_F, eps_opt=None, spec=None):
    """Two bounds (C1, C2) on ‖∇u‖_p built from an admissible w."""
    C_F = as_bound(C_F).value
    q = _conj(p)
    rule = QuadratureRule(8)
    qp = rule.points(w.grid)
    hn = _load_norm(h, w.grid, q, rule)
    spec = spec or ProblemSpec("dirichlet_poisson", p, w.grid, h)
    Fw = energy(spec, w)
    C1 = max((p * C_F * hn + 1) ** (1 / (p - 1)), p * Fw)
    grad_w = lq_norm_values(_slope_values(w, qp), qp, p)
    w_norm = lq_norm_values(w.sample(qp.x, qp.cell), qp, p)
    if eps_opt is not None:
        return C1, _c2(p, eps_opt, C_F, grad_w, hn, w_norm)
    lim = 1.0 / (1.0 + C_F**p)

    def f(e):
        return _c2(p, e, C_F, grad_w, hn, w_norm)

    grid_eps = lim * np.linspace(0.05, 0.95, 11)
    vals = [f(e) for e in grid_eps]
    k = int(np.argmin(vals))
    lo = grid_eps[max(k - 1, 0)] if k > 0 else 1e-6 * lim
    hi = grid_eps[min(k + 1, 10)] if k < 10 else lim * (1 - 1e-9)
    res = optimize.minimize_scalar(f, bracket=(lo, grid_eps[k], hi), method="golden") if lo < grid_eps[k] < hi else None
    C2 = min(vals[k], res.fun if res is not None and math.isfinite(res.fun) else math.inf)
    return C1, C2


def majorant_obstacle(p, v, eta, phi, C_F, h, C_i=None, u_ref=None, rule=None, tol_contact=1e-8):
    """Upper bound for the obstacle problem; the residual splits into free and contact parts."""
    C_F = as_bound(C_F)
    phi = _as_coeff(phi)
    part = coincidence_partition(v, phi, tol_contact)
    rule = _rule(u_ref, rule)
    q = _conj(p)
    flux_term, res, qp = _flux_pieces(p, v, eta, h, rule)
    contact_q = part.contact[qp.cell]
    free_term = C_F.value * lq_norm_values(np.where(contact_q, 0.0, res), qp, q)
    contact_term = C_F.value * lq_norm_values(np.where(contact_q, np.maximum(res, 0.0), 0.0), qp, q)
    dual = flux_term + free_term + contact_term
    meta = {"C_F": C_F.to_json(), "contact_cells": int(part.contact.sum())}
    if p < 2:
        if C_i is None:
            w = P1Function(v.grid, np.maximum(phi(v.grid.nodes), 0.0))
            C_i = min(obstacle_energy_bounds(p, w, h, C_F))
        meta["C_i"] = float(C_i)
        grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
        C, M = _error_constant(p, dual, C_i**p + grad_v**p)
    else:
        C, M = _error_constant(p, dual, 0.0)
    span = part.contact_interval
    if span is not None:
        g = v.grid
        meta["contact_region"] = [g.a + span[0] * g.h, g.a + (span[1] + 1) * g.h]
    return MajorantReport(
        "obstacle", p, gradient_error(u_ref, v, p, rule), dual, C, M, C_F.certified,
        {"flux": flux_term, "residual_free": free_term, "residual_contact": contact_term},
        _budget(u_ref), meta,
    )


def cordes_delta_scalar(p):
    """δ = p − |p − 2| for a scalar weight (μ = 1 in one dimension)."""
    return p - abs(p - 2)


def majorant_anisotropic(p, v, eta, a, C_F, h, u_ref=None, rule=None, repaired=False):
    """Upper bound for −(a|u'|^{p−2}u')' = h.

    For p > 4 the published lower monotonicity constant is not justified;
    such reports are marked uncertified unless ``repaired`` selects the
    constant λδ/(2(p−1)·max(4, 2^{p−2})), which holds for every p ≥ 2.
    """
    C_F = as_bound(C_F)
    a = _as_coeff(a)
    rule = _rule(u_ref, rule)
    q = _conj(p)
    qp = rule.points(v.grid)
    avals = np.asarray(a(qp.x), float) * np.ones_like(qp.x)
    lam_inf, lam_sup = float(avals.min()), float(avals.max())
    if lam_inf <= 0:
        raise ProblemError("the weight a(x) must be positive")
    delta = cordes_delta_scalar(p)
    if delta <= 0:
        raise CordesViolated(f"δ = {delta} ≤ 0")
    flux_term, res, qp = _flux_pieces(p, v, eta, h, rule, weight=a)
    res_term = C_F.value * lq_norm_values(res, qp, q)
    dual = flux_term + res_term
    certified = C_F.certified
    meta = {"inf_lambda": lam_inf, "sup_Lambda": lam_sup, "delta": delta, "C_F": C_F.to_json(), "inf_sampled": True}
    if p >= 2:
        if repaired:
            mono = lam_inf * delta / (2 * (p - 1) * max(4.0, 2.0 ** (p - 2)))
        else:
            mono = lam_inf * delta / (8 * (p - 1))
            certified = certified and p <= 4
        C = (1.0 / mono) ** (1 / (p - 1))
        M = C * dual ** (1 / (p - 1))
        meta["monotonicity_constant"] = mono
    else:
        nu = min(lam_inf, 1.0 / lam_sup)
        grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
        hn = _load_norm(h, v.grid, q, rule)
        X = nu ** (-q) * C_F.value**q * hn**q + grad_v**p
        C = 2 * X ** ((2 - p) / p) / (lam_inf * delta * 2.0 ** ((p - 2) / p))
        M = C * dual
        meta["nu"] = nu
    return MajorantReport(
        "anisotropic1d", p, gradient_error(u_ref, v, p, rule), dual, C, M, certified,
        {"flux": flux_term, "residual": res_term}, _budget(u_ref), meta,
    )


def majorant_neumann(p, v, eta, C_P, C_T, h, u_ref=None, rule=None):
    """Upper bound for the Neumann problem; v is shifted to zero mean first."""
    C_P, C_T = as_bound(C_P), as_bound(C_T)
    v = zero_mean(v)
    rule = _rule(u_ref, rule)
    q = _conj(p)
    flux_term, res, qp = _flux_pieces(p, v, eta, h, rule)
    res_term = C_P.value * lq_norm_values(res, qp, q)
    trace = (abs(eta.values[0]) ** q + abs(eta.values[-1]) ** q) ** (1 / q)
    bnd_term = C_T.value * trace
    dual = flux_term + res_term + bnd_term
    grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
    hn = _load_norm(h, v.grid, q, rule)
    C, M = _error_constant(p, dual, C_P.value**q * hn**q + grad_v**p)
    return MajorantReport(
        "neumann_poisson", p, gradient_error(u_ref, v, p, rule), dual, C, M,
        C_P.certified and C_T.certified,
        {"flux": flux_term, "residual": res_term, "boundary": bnd_term, "boundary_trace": trace},
        _budget(u_ref), {"C_P": C_P.to_json(), "C_T": C_T.to_json()},
    )


def majorant_vector(p, v, eta, C_F, h, u_ref=None, rule=None):
    """Vector-valued version; all pointwise norms are Euclidean across components."""
    hs = list(h) if isinstance(h, (list, tuple)) else [h]
    if v.ncomp != eta.ncomp or v.ncomp != len(hs):
        raise DimensionMismatch(f"components: v {v.ncomp}, η* {eta.ncomp}, h {len(hs)}")
    if v.values.ndim == 1:
        rep = majorant_poisson(p, v, eta, C_F, hs[0], u_ref, rule)
        rep.kind = "vector_poisson"
        return rep
    C_F = as_bound(C_F)
    rule = _rule(u_ref, rule)
    q = _conj(p)
    flux_term, res, qp = _flux_pieces(p, v, eta, [_as_coeff(x) for x in hs], rule)
    res_term = C_F.value * lq_norm_values(res, qp, q)
    dual = flux_term + res_term
    grad_v = lq_norm_values(_slope_values(v, qp), qp, p)
    hn = _load_norm([_as_coeff(x) for x in hs], v.grid, q, rule)
    C, M = _error_constant(p, dual, C_F.value**q * hn**q + grad_v**p)
    return MajorantReport(
        "vector_poisson", p, gradient_error(u_ref, v, p, rule), dual, C, M, C_F.certified,
        {"flux": flux_term, "residual": res_term}, _budget(u_ref), {"C_F": C_F.to_json(), "n_comp": v.ncomp},
    )


def polyharmonic_energy_constant(p, C_Fm, h, w=None, grid=None, unpowered_energy=False):
    """Bound on ‖u''‖_p from an admissible w (w = 0 when there is no obstacle).

    The second entry is ‖w''‖_p^p − p⟨h, w⟩ = pF(w); ``unpowered_energy`` uses
    ‖w''‖_p unpowered instead.
    """
    C_Fm = as_bound(C_Fm).value
    q = _conj(p)
    grid = grid or w.grid
    rule = QuadratureRule(8)
    qp = rule.points(grid)
    hn = _load_norm(h, grid, q, rule)
    first = (p * C_Fm * hn + 1) ** (1 / (p - 1))
    if w is None:
        return first
    cw = CubicField(grid, w.values, "clamped")
    d2 = lq_norm_values(cw.second().sample(qp.x, qp.cell), qp, p)
    work = float(np.dot(qp.w, _load_values(h, qp) * cw.sample(qp.x)))
    second = (d2 if unpowered_energy else d2**p) - p * work
    return max(first, second)


def majorant_polyharmonic(p, v, eta, C_Fm, h, phi=None, C_3=None, u_ref=None, rule=None, m=2, unpowered_energy=False):
    """Upper bound on ‖(u − v)''‖_p for the clamped fourth-order problem.

    v is read as a clamped cubic spline and η* as a not-a-knot spline, so
    η*'' is piecewise linear.  The residual is η*'' − h.
    """
    if m != 2:
        raise NotImplementedForOrder(f"only m=2 is supported, got m={m}")
    C_Fm = as_bound(C_Fm)
    rule = rule or _rule(u_ref, None)
    q = _conj(p)
    grid = v.grid
    qp = rule.points(grid)
    d2v = CubicField(grid, v.values, "clamped").second().sample(qp.x, qp.cell)
    tau = phi_p(d2v, p)
    ceta = CubicField(grid, eta.values, "not-a-knot")
    flux_term = lq_norm_values(tau - ceta.sample(qp.x), qp, q)
    res = ceta.second().sample(qp.x, qp.cell) - _load_values(h, qp)
    if phi is not None:
        part = coincidence_partition(v, phi)
        contact_q = part.contact[qp.cell]
    else:
        contact_q = np.zeros(qp.x.shape, bool)
    free_term = C_Fm.value * lq_norm_values(np.where(contact_q, 0.0, res), qp, q)
    contact_term = C_Fm.value * lq_norm_values(np.where(contact_q, np.maximum(res, 0.0), 0.0), qp, q)
    dual = flux_term + free_term + contact_term
    meta = {"C_Fm": C_Fm.to_json(), "unpowered_energy": unpowered_energy}
    if p < 2:
        if C_3 is None:
            w = None if phi is None else P1Function(grid, np.maximum(_as_coeff(phi)(grid.nodes), 0.0))
            C_3 = polyharmonic_energy_constant(p, C_Fm, h, w, grid, unpowered_energy)
        meta["C_3"] = float(C_3)
        norm_v = lq_norm_values(d2v, qp, p)
        C, M = _error_constant(p, dual, C_3**p + norm_v**p)
    else:
        C, M = _error_constant(p, dual, 0.0)
    if u_ref is None:
        err = math.nan
    elif isinstance(u_ref, ReferenceSolution) and u_ref.grad is not None:
        err = lq_norm_values(u_ref.grad(qp.x) - d2v, qp, p)
    else:
        d2u = CubicField(grid, _field(u_ref).values, "clamped").second().sample(qp.x, qp.cell)
        err = lq_norm_values(d2u - d2v, qp, p)
    return MajorantReport(
        "polyharmonic", p, err, dual, C, M, C_Fm.certified,
        {"flux": flux_term, "residual_free": free_term, "residual_contact": contact_term},
        _budget(u_ref), meta,
    )


def majorant_fractional(s, p, v, C_Fs, h, u_ref=None, gamma=None, strong_form=False, band=None, kernel_from=None):
    """Upper bound on [u − v]_p for the fractional problem.

    Without ``gamma`` the flux kernel of the reference solution (or of
    ``kernel_from``) is used,
    zeroed on cell pairs closer than ``band`` cells; when ``band`` is None
    the admissible bands are tried and the smallest bound is kept.  The
    report is never certified because C_{F,s} is a numerical estimate.
    """
    from .nonlocalops import (
        apply_Lsp,
        check_skew,
        flux_kernel,
        gagliardo_seminorm,
        nonlocal_divergence,
        pair_quadrature,
        phi as nphi,
    )

    C_Fs = as_bound(C_Fs)
    q = _conj(p)
    grid = v.grid
    rule = QuadratureRule(5)
    qp = rule.points(grid)
    hvals = _load_values(h, qp)
    quad = pair_quadrature(grid, s, p)
    seminorm_v = quad.seminorm_p(v) ** (1 / p)
    hn = lq_norm_values(hvals, qp, q)
    err = math.nan
    if u_ref is not None:
        err = gagliardo_seminorm(s, p, _field(u_ref) - v, quad)

    def finish(dual, pieces, meta):
        C, M = _error_constant(p, dual, C_Fs.value**q * hn**q + seminorm_v**p)
        meta = {"C_Fs": C_Fs.to_json(), **meta}
        return MajorantReport("fractional", p, err, dual, C, M, False, pieces, _budget(u_ref), meta)

    if strong_form:
        Lv = apply_Lsp(s, p, v, qp.x)
        res = C_Fs.value * lq_norm_values(Lv - hvals, qp, q)
        return finish(res, {"residual": res}, {"strong_form": True})

    def bound_for(kernel_fn, kband):
        diff = lambda V, U: np.abs(nphi(V, p) - nphi(U, p)) ** q
        own = lambda V: np.abs(nphi(V, p)) ** q
        far = (np.abs(quad.band) >= kband) | (quad.band < 0)
        P = quad.integrate(diff, v, kernel_fn, mask=far)
        if kband > 0:
            P += quad.integrate(own, v, mask=~far)
        # an untruncated kernel of a P1 field may only have a principal-value
        # divergence; the pairing identity holds in that sense
        div = nonlocal_divergence(s, flux_kernel(s, p, kernel_fn, cutoff=kband), qp.x, principal_value=True)
        res = lq_norm_values(div - hvals, qp, q)
        return P ** (1 / q), C_Fs.value * res

    if gamma is not None:
        if not gamma.skew_symmetric or check_skew(gamma, grid) > 1e-12:
            raise ProblemError("kernel candidate is not skew-symmetric")
        from .nonlocalops import p_functional

        if gamma.func is None and len(gamma.terms) == 1 and gamma.q == p and gamma.s == s:
            c, u = gamma.terms[0]
            kern, res = bound_for(u * c ** (1 / (p - 1)) if c > 0 else u, gamma.cutoff)
        else:
            from .nonlocalops import KernelField

            combo = KernelField(s, p, ((1.0, v),), grid=grid)
            diff_kernel = KernelField(s, p, func=lambda x, y: combo(x, y) - gamma(x, y), grid=grid)
            kern = p_functional(diff_kernel, p, grid) ** (1 / q)
            div = nonlocal_divergence(s, gamma, qp.x, grid, principal_value=True)
            res = C_Fs.value * lq_norm_values(div - hvals, qp, q)
        return finish(kern + res, {"kernel": kern, "residual": res}, {"band": gamma.cutoff})

    if u_ref is None and kernel_from is None:
        raise ProblemError("a kernel candidate or a reference solution is required")
    base = _field(u_ref) if kernel_from is None else kernel_from
    bands = [band] if band is not None else ([0] if s < 1 - 1 / p else []) + [1, 2, 4]
    best = None
    for kb in bands:
        kern, res = bound_for(base, kb)
        if best is None or kern + res < best[0]:
            best = (kern + res, kern, res, kb)
    return finish(best[0], {"kernel": best[1], "residual": best[2]}, {"band": best[3]})


def flux_deviation(p, v, w, a=None, rule=None):
    """Measured ‖a Φ_p(w') − a Φ_p(v')‖_{p'}."""
    rule = rule or QuadratureRule(6)
    qp = rule.points(v.grid)
    d = phi_p(_slope_values(w, qp), p) - phi_p(_slope_values(v, qp), p)
    if a is not None:
        d = d * np.asarray(_as_coeff(a)(qp.x), float)
    return lq_norm_values(d, qp, _conj(p))


def flux_deviation_bounds(p, v, w, rule=None):
    """(lower, upper) bounds on ‖Φ_p(w') − Φ_p(v')‖_{p'} in terms of ‖(w − v)'‖_p."""
    rule = rule or QuadratureRule(6)
    qp = rule.points(v.grid)
    dv, dw = _slope_values(v, qp), _slope_values(w, qp)
    e = lq_norm_values(dw - dv, qp, p)
    nv = lq_norm_values(dv, qp, p)
    nw = lq_norm_values(dw, qp, p)
    if e == 0:
        return 0.0, 0.0
    S = nw**p + nv**p
    if p <= 2:
        upper = 2.0 ** (2 - p) * e ** (p - 1)
        lower = (p - 1) * 2.0 ** ((p - 2) / p) * S ** ((p - 2) / p) * e
    else:
        upper = (p - 1) * 2.0 ** ((p - 2) / p) * S ** ((p - 2) / p) * e
        lower = 2.0 ** (2 - p) * e ** (p - 1)
    return lower, upper


def flux_deviation_anisotropic(p, v, w, a, rule=None):
    """Upper bound on ‖a Φ_p(w') − a Φ_p(v')‖_{p'}."""
    rule = rule or QuadratureRule(6)
    qp = rule.points(v.grid)
    Lam = float(np.max(np.asarray(_as_coeff(a)(qp.x), float) * np.ones_like(qp.x)))
    dv, dw = _slope_values(v, qp), _slope_values(w, qp)
    e = lq_norm_values(dw - dv, qp, p)
    # at p = 2 both branches hold; the second is the sharper one
    if p < 2:
        return Lam * (3 - p) / (p - 1) * 2.0 ** (p - 1) * e ** (p - 1)
    S = lq_norm_values(dw, qp, p) ** p + lq_norm_values(dv, qp, p) ** p
    return Lam * (p - 1) * 2.0 ** ((p - 2) / p) * S ** ((p - 2) / p) * e


def _hat_residuals(spec, v, rule):
    """⟨A v − h, φ_j⟩ for every hat function of the grid of v."""
    g = v.grid
    qp = rule.points(g)
    t = (qp.x - (g.a + qp.cell * g.h)) / g.h
    tau = phi_p(_slope_values(v, qp), spec.p)
    if spec.kind == "anisotropic1d":
        tau = tau * np.asarray(spec.a(qp.x), float)
    load = spec.load_values(qp)
    shape = (g.n + 1,) + tau.shape[1:]
    R = np.zeros(shape)
    w = qp.w if tau.ndim == 1 else qp.w[:, None]
    tt = t if tau.ndim == 1 else t[:, None]
    np.add.at(R, qp.cell, w * (-tau / g.h - load * (1 - tt)))
    np.add.at(R, qp.cell + 1, w * (tau / g.h - load * tt))
    return R


def _restriction(fine, coarse):
    """Values of the coarse hat functions at the fine nodes (fine × coarse)."""
    eye = np.eye(coarse.n + 1)
    return P1Function(coarse, eye).sample(fine.nodes)


def dual_norm_lower_discrete(spec, v, test_n=None, iters=500, tol_contact=1e-10):
    """Lower estimate of the dual norm of the residual of v over P1 test fields.

    Any test field gives a valid lower bound; for first-order kinds without
    constraints the discrete maximiser is known in closed form.
    """
    g = v.grid
    p = spec.p
    q = _conj(p)
    kind = spec.kind
    if kind in ("polyharmonic", "fractional"):
        return _dual_lower_generic(spec, v, iters)
    test_n = test_n or g.n
    if g.n % test_n:
        raise ValueError(f"test_n={test_n} must divide n={g.n}")
    coarse = g.with_n(test_n)
    H = coarse.h
    R = _hat_residuals(spec, v, QuadratureRule(6))
    r = _restriction(g, coarse).T @ R
    if kind == "obstacle":
        return _dual_lower_obstacle(spec, v, r, coarse, tol_contact, iters, g)
    if kind == "neumann_poisson":
        S = np.cumsum(r[::-1], axis=0)[::-1][1:]
        dual = S
    else:
        r = r.copy()
        r[0] = r[-1] = 0.0
        S = np.cumsum(r[::-1], axis=0)[::-1][1:]
        if S.ndim == 1:
            def bal(c):
                return np.sum(phi_p(S - c, q))

            lo, hi = S.min() - 1.0, S.max() + 1.0
            c = optimize.brentq(bal, lo, hi, xtol=1e-15) if bal(lo) * bal(hi) < 0 else 0.0
        else:
            def psi(c):
                d = S - c
                mag = np.linalg.norm(d, axis=-1)
                return np.sum(mag**q) / q, -np.sum(phi_p(d, q), axis=0)

            c = optimize.minimize(psi, S.mean(axis=0), jac=True, method="BFGS", options={"gtol": 1e-14}).x
        dual = S - c
    # d_i = Φ_{p'}(S_i − c) is the maximiser; the ratio equals the weighted p'-norm of S − c
    d = phi_p(dual, q)
    num = float(np.sum(H * d * S))
    mag = np.abs(d) if d.ndim == 1 else np.linalg.norm(d, axis=-1)
    den = float(np.sum(H * mag**p)) ** (1 / p)
    if den == 0:
        return 0.0
    return abs(num) / den


def _dual_lower_obstacle(spec, v, r, coarse, tol_contact, iters, fine):
    p = spec.p
    if coarse.n != fine.n:
        raise ValueError("the obstacle probe needs test_n equal to the grid size")
    gap = v.values - spec.phi(fine.nodes)
    scale = max(1.0, float(np.max(np.abs(spec.phi(fine.nodes)))))
    touching = gap <= tol_contact * scale
    h = fine.h
    inner = slice(1, -1)
    ri = r[inner]

    def fun(z):
        xi = np.concatenate([[0.0], z, [0.0]])
        d = np.diff(xi) / h
        val = h * np.sum(np.abs(d) ** p) / p + ri @ z
        flux = h * phi_p(d, p) / h
        grad = np.zeros_like(xi)
        grad[:-1] -= flux
        grad[1:] += flux
        return val, grad[inner] + ri

    bounds = [(0.0, None) if t else (None, None) for t in touching[inner]]
    res = optimize.minimize(fun, np.zeros(fine.n - 1), jac=True, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": iters * 10, "gtol": 1e-13, "ftol": 1e-16})
    xi = np.concatenate([[0.0], res.x, [0.0]])
    xi[1:-1][touching[inner]] = np.maximum(xi[1:-1][touching[inner]], 0.0)
    N = (h * np.sum(np.abs(np.diff(xi) / h) ** p)) ** (1 / p)
    if N == 0:
        return 0.0
    # w = v + tξ stays above φ for small t > 0; the ratio does not depend on t
    return max(-float(ri @ xi[inner]) / N, 0.0)


def _dual_lower_generic(spec, v, iters):
    g = v.grid
    p = spec.p
    inner = slice(1, -1)
    if spec.kind == "polyharmonic":
        S0, M2 = spline_maps(g, "clamped")
        B, w, x = p1_value_matrix(g, 5)
        qpw = QuadratureRule(5).points(g)
        Bd = B.toarray() @ M2
        tau = phi_p(Bd @ v.values, p)
        hq = np.asarray(spec.h(qpw.x), float) * np.ones_like(qpw.x)
        r = (Bd.T @ (w * tau) - S0.T @ (qpw.w * hq))[inner]

        def norm_grad(z):
            xi = np.concatenate([[0.0], z, [0.0]])
            d2 = Bd @ xi
            return float(np.dot(w, np.abs(d2) ** p)), p * (Bd.T @ (w * phi_p(d2, p)))[inner]
    else:
        from .nonlocalops import pair_quadrature

        quad = pair_quadrature(g, spec.s, p)
        _, gv = quad.energy_grad(v.values)
        r = (gv - load_vector(spec.h, g))[inner]

        def norm_grad(z):
            val, gr = quad.energy_grad(np.concatenate([[0.0], z, [0.0]]))
            return p * val, p * gr[inner]

    # the p=2 Gram matrix preconditions the search; at p=2 its solve is the maximiser
    if spec.kind == "polyharmonic":
        K2 = (Bd.T @ (w[:, None] * Bd))[inner, inner]
    else:
        K2 = pair_quadrature(g, spec.s, 2.0).stiffness()[inner, inner]
        K2 = K2.toarray() if hasattr(K2, "toarray") else np.asarray(K2)
    chol = linalg.cholesky(K2)
    z2 = -linalg.cho_solve((chol, False), r)
    candidates = [z2]
    if p != 2:
        def fun(y):
            z = linalg.solve_triangular(chol, y)
            Np, gN = norm_grad(z)
            return Np / p + r @ z, linalg.solve_triangular(chol, gN / p + r, trans="T")

        res = optimize.minimize(fun, chol @ z2, jac=True, method="L-BFGS-B",
                                options={"maxiter": iters * 10, "gtol": 1e-14, "ftol": 1e-16})
        candidates.append(linalg.solve_triangular(chol, res.x))
    best = 0.0
    for z in candidates:
        Np, _ = norm_grad(z)
        if Np > 0:
            best = max(best, abs(float(r @ z)) / Np ** (1 / p))
    return best


def analytic_dual_bound(report):
    """The dual-norm part of a report (what the discrete probe must not exceed)."""
    return report.dual_norm_bound
