"""Random testing of the pointwise algebraic inequalities behind the estimates.

Random numbers come from a small documented generator (xorshift64* seeded
through splitmix64, see docs/prng.md) so that suites are reproducible
from the seed alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InfeasibleExponent, PMajorantError

MASK64 = (1 << 64) - 1
DEFAULT_PS = (1.1, 1.5, 2.0, 3.0, 4.0, 10.0)
DEFAULT_DIMS = (1, 2, 3, 8)
SLACK_TOL = -1e-12
EPS = 1e-300


class NotPositiveDefinite(PMajorantError, ValueError):
    pass


class CordesViolated(PMajorantError, ValueError):
    pass


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


class XorShiftRNG:
    """xorshift64* over ``lanes`` independent streams stepped in lockstep.

    Each draw advances every lane once and yields one value per lane; values
    are emitted lane-fastest.
    """

    MULT = np.uint64(2685821657736338717)

    def __init__(self, seed, lanes=256):
        states = [splitmix64((int(seed) + k) & MASK64) or 0x9E3779B97F4A7C15 for k in range(lanes)]
        self.state = np.array(states, dtype=np.uint64)
        self.seed = int(seed)
        self._buffer = np.empty(0)

    def _step(self):
        x = self.state
        x ^= x >> np.uint64(12)
        x ^= x << np.uint64(25)
        x ^= x >> np.uint64(27)
        self.state = x
        return x * self.MULT

    def next_u64(self, count):
        rows = -(-count // self.state.size)
        out = np.stack([self._step() for _ in range(rows)]).ravel()
        return out[:count]

    def uniform(self, size=None, low=0.0, high=1.0):
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        count = int(np.prod(shape)) if shape else 1
        u = (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(shape)

    def normal(self, size):
        shape = size if isinstance(size, tuple) else (size,)
        count = int(np.prod(shape))
        half = -(-count // 2)
        u1 = 1.0 - self.uniform(half)
        u2 = self.uniform(half)
        rad = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
        return z[:count].reshape(shape)


def _norm(x):
    return np.linalg.norm(x, axis=-1)


def _phi(x, p):
    n = _norm(x)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n > 0, n ** (p - 2), 0.0) * x


def relative_slack(big, small):
    """(big − small) / max(|big|, |small|, ε): nonnegative when big ≥ small."""
    big, small = np.asarray(big, float), np.asarray(small, float)
    return (big - small) / np.maximum(np.maximum(np.abs(big), np.abs(small)), EPS)


def _monotone_pair(p, a, b):
    d = b - a
    lhs = np.sum((_phi(b, p) - _phi(a, p)) * d, axis=-1)
    nd = _norm(d)
    out = {}
    if p >= 2:
        out["monotone_p_ge_2"] = relative_slack(lhs, 2.0 ** (2 - p) * nd**p)
    if p <= 2:
        s = _norm(a) + _norm(b)
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs = np.where(s > 0, (p - 1) * nd**2 / s ** (2 - p), 0.0)
        out["monotone_p_le_2"] = relative_slack(lhs, rhs)
    return out


def check_monotonicity_ineq(p, a, b):
    """Relative slacks of the strong monotonicity inequalities for Φ_p."""
    return {k: float(v) if np.ndim(v) == 0 else v for k, v in _monotone_pair(p, np.asarray(a, float), np.asarray(b, float)).items()}


def _lipschitz_pair(p, a, b):
    lhs = _norm(_phi(b, p) - _phi(a, p))
    nd = _norm(b - a)
    out = {}
    if p <= 2:
        out["lipschitz_p_le_2"] = relative_slack(2.0 ** (2 - p) * nd ** (p - 1), lhs)
    if p >= 2:
        out["lipschitz_p_ge_2"] = relative_slack((p - 1) * (_norm(a) + _norm(b)) ** (p - 2) * nd, lhs)
    return out


def check_lipschitz_ineq(p, a, b):
    """Relative slacks of the Hölder continuity inequalities for Φ_p."""
    return {k: float(v) if np.ndim(v) == 0 else v for k, v in _lipschitz_pair(p, np.asarray(a, float), np.asarray(b, float)).items()}


def _check_spd(A):
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(A - A.T)) > 1e-14 * max(1.0, np.max(np.abs(A))):
        raise ValueError("matrix must be symmetric")
    ev = np.linalg.eigvalsh(A)
    if ev[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {ev[0]:.3e} is not positive")
    return A, ev


def mu_matrix(A):
    """sup |Aξ||ξ| / (Aξ·ξ) from the extreme eigenvalues."""
    _, ev = _check_spd(A)
    lo, hi = ev[0], ev[-1]
    return float((lo + hi) / (2 * math.sqrt(lo * hi)))


def mu_matrix_sampled(A, rng, samples=100_000, polish=True):
    """Direct maximisation over random unit vectors, optionally refined locally."""
    A, _ = _check_spd(A)
    N = A.shape[0]
    xi = rng.normal((samples, N))
    Ax = xi @ A
    ratio = _norm(Ax) * _norm(xi) / np.sum(Ax * xi, axis=-1)
    k = int(np.argmax(ratio))
    best = float(ratio[k])
    if polish and N > 1:
        def neg(x):
            ax = A @ x
            return -np.linalg.norm(ax) * np.linalg.norm(x) / (ax @ x)

        for start in np.argsort(ratio)[-3:]:
            res = optimize.minimize(neg, xi[start], method="BFGS", options={"gtol": 1e-13})
            best = max(best, -float(res.fun))
    return best


def cordes_delta(p, A):
    """δ = p − |p − 2| μ(A); the Cordes condition asks δ > 0."""
    return float(p - abs(p - 2) * mu_matrix(A))


def aniso_monotone_constant(p, lam, delta, repaired=False):
    """Constant in front of |b−a|^p (p ≥ 2) or |b−a|²/(|a|+|b|)^{2−p} (p < 2).

    The published p ≥ 2 value λδ/(8(p−1)) exceeds the sharp scalar constant
    2^{2−p} once p is above about 6.6; ``repaired`` divides by max(4, 2^{p−2})
    instead of 4.
    """
    if p < 2:
        return lam * delta / 2
    if repaired:
        return lam * delta / (2 * (p - 1) * np.maximum(4.0, 2.0 ** (p - 2)))
    return lam * delta / (8 * (p - 1))


def _aniso_terms(p, A, lam, Lam, delta, a, b, repaired=False):
    """Slacks for the four anisotropic inequalities; A may be stacked (k, N, N)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        fb = np.einsum("...ij,...j->...i", A, b) * np.where(_norm(b) > 0, _norm(b) ** (p - 2), 0.0)[..., None]
        fa = np.einsum("...ij,...j->...i", A, a) * np.where(_norm(a) > 0, _norm(a) ** (p - 2), 0.0)[..., None]
    d = b - a
    nd = _norm(d)
    mono = np.sum((fb - fa) * d, axis=-1)
    lip = _norm(fb - fa)
    out = {}
    if p <= 2:
        s = _norm(a) + _norm(b)
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs = np.where(s > 0, aniso_monotone_constant(p, lam, delta) * nd**2 / s ** (2 - p), 0.0)
        out["aniso_monotone_p_le_2"] = relative_slack(mono, rhs)
        out["aniso_lipschitz_p_le_2"] = relative_slack(Lam * (3 - p) / (p - 1) * 2.0 ** (p - 1) * nd ** (p - 1), lip)
    if p >= 2:
        out["aniso_monotone_p_ge_2"] = relative_slack(mono, aniso_monotone_constant(p, lam, delta, repaired) * nd**p)
        out["aniso_lipschitz_p_ge_2"] = relative_slack(Lam * (p - 1) * (_norm(a) + _norm(b)) ** (p - 2) * nd, lip)
    return out


def check_anisotropic_ineq(p, A, a, b, repaired=False):
    A, ev = _check_spd(A)
    delta = cordes_delta(p, A)
    if delta <= 0:
        raise CordesViolated(f"δ = {delta:.6g} ≤ 0 for p = {p}")
    res = _aniso_terms(p, A, ev[0], ev[-1], delta, np.asarray(a, float), np.asarray(b, float), repaired)
    return {k: float(v) if np.ndim(v) == 0 else v for k, v in res.items()}


def kappa_max(p, margin=0.9, cap=100.0):
    """Largest condition number κ with μ = (1+κ)/(2√κ) ≤ margin·p/|p−2|."""
    if not p > 1:
        raise InfeasibleExponent(f"exponent must exceed 1, got {p}")
    if p == 2:
        return cap
    m = margin * p / abs(p - 2)
    if m <= 1:
        return 1.0
    return min((m + math.sqrt(m * m - 1)) ** 2, cap)


def random_rotation(N, rng):
    Q, R = np.linalg.qr(rng.normal((N, N)))
    return Q * np.sign(np.diag(R))


def random_cordes_matrix(p, N, rng):
    """Random SPD matrix with eigenvalues in [1, κ_max(p)] and a random rotation."""
    kmax = kappa_max(p)
    ev = rng.uniform(N, 1.0, kmax) if kmax > 1 else np.ones(N)
    Q = random_rotation(N, rng)
    A = (Q * ev) @ Q.T
    return 0.5 * (A + A.T)


def search_monotonicity_violation(p, A, rng, trials=100_000, tol=1e-10):
    """First sampled (a, b) with (|b|^{p−2}Ab − |a|^{p−2}Aa)·(b−a) < −tol, else None."""
    A = np.asarray(A, float)
    N = A.shape[0]
    a = rng.uniform((trials, N), -10.0, 10.0)
    b = rng.uniform((trials, N), -10.0, 10.0)
    fb = (b @ A) * (_norm(b) ** (p - 2))[:, None]
    fa = (a @ A) * (_norm(a) ** (p - 2))[:, None]
    val = np.sum((fb - fa) * (b - a), axis=-1)
    bad = np.flatnonzero(val < -tol)
    if bad.size == 0:
        return None
    k = int(bad[0])
    return a[k], b[k]


@dataclass
class IneqSuiteReport:
    seed: int
    trials: int
    results: dict = field(default_factory=dict)  # name -> p -> summary
    mu_check: dict = field(default_factory=dict)

    @property
    def violations(self):
        return sum(r["violations"] for per_p in self.results.values() for r in per_p.values())

    def failing(self):
        return [(name, p) for name, per_p in self.results.items() for p, r in per_p.items() if r["violations"]]

    def to_json(self):
        return {
            "seed": self.seed,
            "trials": self.trials,
            "violations": self.violations,
            "results": {n: {str(p): r for p, r in per.items()} for n, per in self.results.items()},
            "mu_check": self.mu_check,
        }


def _summarise(slack, a, b, keep=3):
    slack = np.asarray(slack, float)
    bad = np.flatnonzero(slack < SLACK_TOL)
    k = int(np.argmin(slack))
    return {
        "samples": int(slack.size),
        "worst_slack": float(slack[k]),
        "violations": int(bad.size),
        "witnesses": [{"a": a[i].tolist(), "b": b[i].tolist(), "slack": float(slack[i])} for i in bad[:keep]],
    }


def _merge(parts):
    """Combine per-dimension summaries (sample counts add, worst slack is the minimum)."""
    out = {"samples": 0, "worst_slack": math.inf, "violations": 0, "witnesses": []}
    for part in parts:
        out["samples"] += part["samples"]
        out["worst_slack"] = min(out["worst_slack"], part["worst_slack"])
        out["violations"] += part["violations"]
        out["witnesses"] = (out["witnesses"] + part["witnesses"])[:3]
    return out


def run_suite(seed=42, trials=100_000, ps=DEFAULT_PS, dims=DEFAULT_DIMS, pool=64, mu_matrices=100):
    """Sample every inequality ``trials`` times per exponent across the dimensions."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = XorShiftRNG(seed)
    report = IneqSuiteReport(int(seed), int(trials))
    collected = {}
    for p in ps:
        counts = [trials // len(dims) + (1 if k < trials % len(dims) else 0) for k in range(len(dims))]
        for N, cnt in zip(dims, counts):
            if cnt == 0:
                continue
            a = rng.uniform((cnt, N), -10.0, 10.0)
            b = rng.uniform((cnt, N), -10.0, 10.0)
            mats = np.stack([random_cordes_matrix(p, N, rng) for _ in range(min(pool, cnt))])
            idx = np.arange(cnt) % mats.shape[0]
            evs = np.linalg.eigvalsh(mats)
            mus = (evs[:, 0] + evs[:, -1]) / (2 * np.sqrt(evs[:, 0] * evs[:, -1]))
            deltas = p - abs(p - 2) * mus
            slacks = {**_monotone_pair(p, a, b), **_lipschitz_pair(p, a, b)}
            slacks.update(_aniso_terms(p, mats[idx], evs[idx, 0], evs[idx, -1], deltas[idx], a, b))
            for name, sl in slacks.items():
                collected.setdefault(name, {}).setdefault(p, []).append(_summarise(sl, a, b))
    report.results = {name: {p: _merge(parts) for p, parts in per.items()} for name, per in sorted(collected.items())}
    worst = 0.0
    for k in range(mu_matrices):
        N = dims[k % len(dims)]
        if N == 1:
            N = 2
        Q = random_rotation(N, rng)
        A = (Q * rng.uniform(N, 1.0, 50.0)) @ Q.T
        A = 0.5 * (A + A.T)
        closed = mu_matrix(A)
        sampled = mu_matrix_sampled(A, rng)
        worst = max(worst, abs(closed - sampled) / closed)
    report.mu_check = {"matrices": mu_matrices, "worst_relative_gap": worst}
    return report
