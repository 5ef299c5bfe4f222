"""Embedding, Poincare and trace constants with provenance tags.

A majorant is only guaranteed when it is fed an upper bound on each
embedding constant, i.e. a lower bound on the matching eigenvalue.  Every
constant is returned as a :class:`CertifiedBound` so callers can tell exact
closed forms from rigorous bounds and from numerical estimates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NotImplementedForOrder
from .funcspace import Grid1D, p1_value_matrix

EXACT = "exact"
RIGOROUS = "rigorous_bound"
HEURISTIC = "heuristic"
_RANK = {EXACT: 0, RIGOROUS: 1, HEURISTIC: 2}


@dataclass(frozen=True)
class CertifiedBound:
    value: float
    provenance: str
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.provenance not in _RANK:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValueError(f"constant must be positive and finite, got {self.value}")

    @property
    def certified(self):
        return self.provenance != HEURISTIC

    def __float__(self):
        return float(self.value)

    def to_json(self):
        return {"value": self.value, "provenance": self.provenance, "description": self.description}


def worst_provenance(*items):
    tags = [getattr(i, "provenance", i) for i in items if i is not None]
    return max(tags, key=_RANK.__getitem__) if tags else EXACT


def as_bound(c, description=""):
    """Accept a CertifiedBound or a bare number (treated as heuristic)."""
    if isinstance(c, CertifiedBound):
        return c
    return CertifiedBound(float(c), HEURISTIC, description or "user supplied value")


def _length(domain):
    if isinstance(domain, Grid1D):
        return domain.length
    if isinstance(domain, (int, float)):
        return float(domain)
    a, b = domain
    return float(b) - float(a)


def _check_p(p):
    if not p > 1:
        raise ValueError(f"exponent must exceed 1, got {p}")


def bd_ball_bounds(p, N, R):
    """Two-sided closed-form bounds on the first p-Laplace eigenvalue of a ball."""
    _check_p(p)
    lower = N * p / R**p
    upper = math.prod(p + k for k in range(1, N + 1)) / (math.factorial(N) * R**p)
    return lower, upper


def unit_ball_volume(N):
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def faber_krahn_lower(p, N, measure, radii=None):
    """Faber-Krahn lower bound using the ball lower bound, maximised over radii."""
    _check_p(p)
    radii = np.geomspace(0.25, 4.0, 9) if radii is None else np.atleast_1d(radii)
    best = 0.0
    for R in radii:
        ball = unit_ball_volume(N) * R**N
        best = max(best, measure ** (-p / N) * ball ** (p / N) * bd_ball_bounds(p, N, R)[0])
    return best


def pi_p(p):
    return 2 * math.pi / (p * math.sin(math.pi / p))


def lambda1_exact_1d(p, L):
    _check_p(p)
    return CertifiedBound((p - 1) * (pi_p(p) / L) ** p, EXACT, f"first Dirichlet p-eigenvalue of an interval of length {L}")


def friedrichs_upper(p, domain, mode="rigorous"):
    L = _length(domain)
    if mode == "exact":
        lam = lambda1_exact_1d(p, L).value
        return CertifiedBound(lam ** (-1 / p), EXACT, "Friedrichs constant from the exact 1D eigenvalue")
    if mode == "rigorous":
        lam = faber_krahn_lower(p, 1, L)
        return CertifiedBound(lam ** (-1 / p), RIGOROUS, "Friedrichs constant from the Faber-Krahn ball bound")
    raise ValueError(f"unknown mode {mode!r}")


def poincare_constant_1d(p, L, mode="exact", n=256):
    """Mean-zero Poincare constant on an interval of length L."""
    _check_p(p)
    if mode == "exact" or (mode == "rigorous" and p == 2):
        lam = lambda1_exact_1d(p, L).value
        return CertifiedBound(lam ** (-1 / p), EXACT, "mean-zero Poincare constant; the odd extremal gives the Dirichlet eigenvalue")
    if mode == "rigorous":
        lam = rayleigh_min_p1(p, Grid1D(0.0, L, n), zero_mean=True)[0]
        return CertifiedBound(1.01 * lam ** (-1 / p), HEURISTIC, "discrete mean-zero Rayleigh estimate times 1.01")
    raise ValueError(f"unknown mode {mode!r}")


def trace_constant_1d(p, L):
    """Boundary trace constant for mean-zero fields.

    With zero mean, w(0) = -∫(1 - t/L) w'(t) dt, and Hölder bounds the kernel
    norm by (L/(p'+1))^(1/p'); the same holds at the right end.
    """
    _check_p(p)
    q = p / (p - 1)
    value = 2 ** (1 / p) * (L / (q + 1)) ** (1 / q)
    return CertifiedBound(value, RIGOROUS, "Hölder bound on the boundary values of mean-zero fields")


def clamped_beam_beta():
    return optimize.brentq(lambda b: math.cosh(b) * math.cos(b) - 1.0, 4.5, 5.0, xtol=1e-15)


def embedding_constant_polyharm(m, p, domain, mode="rigorous"):
    """Bound on ‖w‖_p ≤ C ‖w''‖_p for clamped w (see docs/polyharmonic.md)."""
    if m != 2:
        raise NotImplementedForOrder(f"only m=2 is supported, got m={m}")
    L = _length(domain)
    if mode == "exact" and p == 2:
        return CertifiedBound(L**2 / clamped_beam_beta() ** 2, EXACT, "clamped beam eigenvalue")
    cf = friedrichs_upper(p, L, "rigorous" if mode == "rigorous" else "exact")
    return CertifiedBound(cf.value**2, RIGOROUS, "Friedrichs constant applied twice (w and w' vanish at both ends)")


def embedding_constant_fractional(s, p, domain, fine_n=64, quad=None):
    """Numerical estimate of sup ‖v‖_p / [v]_p over P1 fields, inflated by 5%."""
    from .nonlocalops import fractional_rayleigh_min

    if not 0 < s < 1:
        raise ValueError(f"fractional order must lie in (0, 1), got {s}")
    a, b = (0.0, float(domain)) if isinstance(domain, (int, float)) else ((domain.a, domain.b) if isinstance(domain, Grid1D) else domain)
    lam = fractional_rayleigh_min(s, p, Grid1D(a, b, fine_n), quad=quad)[0]
    return CertifiedBound(1.05 * lam ** (-1 / p), HEURISTIC, f"discrete fractional Rayleigh estimate on {fine_n} cells times 1.05")


def rayleigh_min_p1(p, grid, zero_mean=False, order=6, x0=None):
    """Minimise ∫|v'|^p / ∫|v|^p over P1 fields (Dirichlet, or free with zero mean).

    Returns (quotient, nodal minimiser).
    """
    B, w, _ = p1_value_matrix(grid, order)
    h = grid.h
    nodes = grid.nodes
    L = grid.length
    trap = np.full(grid.n + 1, h)
    trap[[0, -1]] = h / 2
    if zero_mean:
        def expand(z):
            return z - trap @ z / L

        def contract(g):
            return g - trap * g.sum() / L
        init = np.cos(math.pi * (nodes - grid.a) / L) if x0 is None else x0
    else:
        def expand(z):
            return np.concatenate([[0.0], z, [0.0]])

        def contract(g):
            return g[1:-1]
        init = np.sin(math.pi * (nodes - grid.a) / L)[1:-1] if x0 is None else x0

    def fun(z):
        v = expand(z)
        d = np.diff(v) / h
        V = B @ v
        top = h * np.sum(np.abs(d) ** p)
        bot = w @ np.abs(V) ** p
        dtop = np.zeros_like(v)
        g = p * h * np.abs(d) ** (p - 1) * np.sign(d) / h
        dtop[:-1] -= g
        dtop[1:] += g
        dbot = p * (B.T @ (w * np.abs(V) ** (p - 1) * np.sign(V)))
        val = math.log(top) - math.log(bot)
        return val, contract(dtop / top - dbot / bot)

    res = optimize.minimize(fun, init, jac=True, method="L-BFGS-B", options={"maxiter": 5000, "gtol": 1e-12, "ftol": 1e-15})
    return math.exp(res.fun), expand(res.x)


def constants_table(p, domain, fine_n=256):
    """Every 1D constant for one exponent and interval, both modes where defined."""
    L = _length(domain)
    lo, hi = bd_ball_bounds(p, 1, L / 2)
    rows = {
        "lambda1_exact": lambda1_exact_1d(p, L),
        "lambda1_ball_lower": CertifiedBound(lo, RIGOROUS, "ball lower bound"),
        "lambda1_ball_upper": CertifiedBound(hi, RIGOROUS, "ball upper bound"),
        "friedrichs_exact": friedrichs_upper(p, L, "exact"),
        "friedrichs_rigorous": friedrichs_upper(p, L, "rigorous"),
        "poincare_exact": poincare_constant_1d(p, L, "exact"),
        "poincare_rigorous": poincare_constant_1d(p, L, "rigorous", n=fine_n),
        "trace": trace_constant_1d(p, L),
        "polyharmonic_m2_rigorous": embedding_constant_polyharm(2, p, L, "rigorous"),
        "polyharmonic_m2_exact": embedding_constant_polyharm(2, p, L, "exact"),
    }
    return rows
