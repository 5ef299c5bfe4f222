"""Sweeps: reference solution, crude approximations, bounds for each flux candidate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as bounds
from .coeffparse import parse_coeff
from .errors import ProblemError
from .funcspace import Grid1D, P1Function, QuadratureRule, interpolate
from .majorants import (
    dual_norm_lower_discrete,
    ideal_flux,
    lower_bound_poisson,
    majorant_anisotropic,
    majorant_fractional,
    majorant_neumann,
    majorant_obstacle,
    majorant_poisson,
    majorant_polyharmonic,
    majorant_vector,
    postprocessed_flux,
)
from .problems import ProblemSpec, contact_region
from .solvers import DescentOptions, make_crude_approx, solve_reference

CSV_COLUMNS = ("kind", "p", "n", "coarse_n", "eta_star", "error", "lower", "majorant", "efficiency",
               "certified", "dual_bound", "dual_lower")


def problem_from_config(problem, n, quadrature=None):
    a, b = problem.get("domain", [0.0, 1.0])
    grid = Grid1D(float(a), float(b), int(n))
    q = quadrature or {}
    rule = QuadratureRule(int(q.get("order", 5)), (), int(q.get("grading_depth", 12)))
    return ProblemSpec(
        problem["kind"], float(problem["p"]), grid, problem.get("h", "1"), problem.get("phi"),
        problem.get("a"), problem.get("m"), problem.get("s"), problem.get("n_comp"), rule,
    )


def constants_for(spec, mode="rigorous"):
    p, g = spec.p, spec.grid
    L = g.length
    if spec.kind == "neumann_poisson":
        return {"C_P": bounds.poincare_constant_1d(p, L, "exact" if mode == "exact" else "rigorous"),
                "C_T": bounds.trace_constant_1d(p, L)}
    if spec.kind == "polyharmonic":
        return {"C_Fm": bounds.embedding_constant_polyharm(2, p, L, mode)}
    if spec.kind == "fractional":
        return {"C_Fs": bounds.embedding_constant_fractional(spec.s, p, (g.a, g.b))}
    return {"C_F": bounds.friedrichs_upper(p, L, mode)}


def flux_candidate(spec, u_ref, v, variant):
    """η* for one of the shipped recipes: ideal, postprocessed or an expression."""
    if variant == "ideal":
        return ideal_flux(u_ref)
    if variant == "postprocessed":
        return postprocessed_flux(spec, v)
    if isinstance(variant, dict) and "expression" in variant:
        expr = variant["expression"]
        if isinstance(expr, list):
            cols = [interpolate(parse_coeff(e), v.grid).values for e in expr]
            return P1Function(v.grid, np.stack(cols, axis=-1))
        return interpolate(parse_coeff(expr), v.grid)
    raise ProblemError(f"unknown flux candidate {variant!r}")


def variant_name(variant):
    return variant if isinstance(variant, str) else "expression"


def estimate(spec, u_ref, v, variant, consts):
    """One report plus the optional lower bounds for a crude approximation v."""
    p = spec.p
    lower = None
    if spec.kind == "fractional":
        if variant == "ideal":
            rep = majorant_fractional(spec.s, p, v, consts["C_Fs"], spec.h, u_ref=u_ref)
        elif variant == "postprocessed":
            rep = majorant_fractional(spec.s, p, v, consts["C_Fs"], spec.h, u_ref=u_ref, kernel_from=v)
        else:
            raise ProblemError("fractional problems take the ideal or postprocessed kernel")
        return rep, lower, dual_norm_lower_discrete(spec, v)
    eta = flux_candidate(spec, u_ref, v, variant)
    kind = spec.kind
    if kind == "dirichlet_poisson":
        rep = majorant_poisson(p, v, eta, consts["C_F"], spec.h, u_ref)
        lower = lower_bound_poisson(p, v, u_ref.field, consts["C_F"], spec.h, spec)
    elif kind == "vector_poisson":
        rep = majorant_vector(p, v, eta, consts["C_F"], list(spec.h), u_ref)
        lower = lower_bound_poisson(p, v, u_ref.field, consts["C_F"], spec.h, spec)
    elif kind == "neumann_poisson":
        rep = majorant_neumann(p, v, eta, consts["C_P"], consts["C_T"], spec.h, u_ref)
        lower = lower_bound_poisson(p, v, u_ref.field, consts["C_P"], spec.h, spec)
    elif kind == "anisotropic1d":
        rep = majorant_anisotropic(p, v, eta, spec.a, consts["C_F"], spec.h, u_ref)
    elif kind == "obstacle":
        rep = majorant_obstacle(p, v, eta, spec.phi, consts["C_F"], spec.h, u_ref=u_ref)
    elif kind == "polyharmonic":
        rep = majorant_polyharmonic(p, v, eta, consts["C_Fm"], spec.h, u_ref=u_ref)
    else:
        raise ProblemError(f"no estimator for {kind}")
    return rep, lower, dual_norm_lower_discrete(spec, v)


@dataclass
class SweepRow:
    kind: str
    p: float
    n: int
    coarse_n: int
    eta_star: str
    report: object
    lower: float | None
    dual_lower: float

    def csv_values(self):
        r = self.report

        def fmt(x):
            if x is None or (isinstance(x, float) and not math.isfinite(x)):
                return ""
            return repr(float(x))

        return [self.kind, repr(self.p), str(self.n), str(self.coarse_n), self.eta_star, fmt(r.error_measure),
                fmt(self.lower), fmt(r.majorant), fmt(r.efficiency), str(bool(r.certified)).lower(),
                fmt(r.dual_norm_bound), fmt(self.dual_lower)]

    def sandwich_ok(self, slack=1e-10):
        r = self.report
        ok = r.error_measure <= r.majorant + r.budget + slack
        if self.lower is not None:
            ok = ok and self.lower <= r.error_measure + r.budget + slack
        return bool(ok and self.dual_lower <= r.dual_norm_bound * (1 + 1e-9) + slack)

    def to_json(self):
        return {"coarse_n": self.coarse_n, "eta_star": self.eta_star, "lower": self.lower,
                "dual_lower": self.dual_lower, "sandwich_ok": self.sandwich_ok(), "report": self.report.to_json()}


@dataclass
class SweepResult:
    spec: ProblemSpec
    reference: object
    constants: dict
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def certified_violations(self):
        return [r for r in self.rows if r.report.certified and not r.sandwich_ok()]


def run_sweep(spec, approximations, variants=("ideal", "postprocessed"), mode="rigorous", opts=None):
    """Solve once on the reference grid, then bound every crude approximation."""
    n = spec.grid.n
    if n < 4 * max(approximations):
        raise ProblemError(f"n_ref={n} must be at least four times the coarsest level {max(approximations)}")
    u_ref = solve_reference(spec, opts or DescentOptions())
    consts = constants_for(spec, mode)
    result = SweepResult(spec, u_ref, consts)
    phi = spec.phi if spec.kind == "obstacle" else None
    for cn in approximations:
        v = make_crude_approx(u_ref, cn, phi=phi)
        for variant in variants:
            rep, lower, dl = estimate(spec, u_ref, v, variant, consts)
            result.rows.append(SweepRow(spec.kind, spec.p, n, cn, variant_name(variant), rep, lower, dl))
    if spec.kind == "obstacle":
        region = contact_region(u_ref.field, spec.phi, 1e-7)
        result.extras["contact_region"] = list(region) if region else None
    return result
