"""Nonlocal calculus on an interval: Gagliardo seminorm, kernel fields,
nonlocal divergence, the fractional p-Laplacian and the P functional.

Fields vanish outside the grid interval Ω = (A, B).  Double integrals over
ℝ² split into Ω×Ω and the two strips Ω×Ωᶜ; the inner exterior integral is
the closed form ∫_{Ωᶜ}|x−y|^{-1-ps} dy = ((x−A)^{-ps} + (B−x)^{-ps})/(ps).

For P1 fields every integrand used here is p-homogeneous in the field
differences, so on a cell pair sharing a node the radial part of the
Duffy-transformed integral is integrated exactly and on a single cell the
whole integral has a closed form.  See docs/fractional_quadrature.md.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.special import roots_jacobi, roots_laguerre

from .errors import SingularityNotIntegrable
from .funcspace import P1Function, gauss_unit, graded_interval


def phi(t, p):
    """Φ_p(t) = |t|^{p-2} t (vectors: Euclidean norm along the last axis)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(t) ** (p - 1) * np.sign(t)
    return out


def _interp_rows(x, grid):
    cell = grid.cell_of(x)
    t = (x - (grid.a + cell * grid.h)) / grid.h
    return cell, t


def _value_matrix(x, grid):
    cell, t = _interp_rows(x, grid)
    r = np.arange(x.size)
    return sparse.csr_matrix(
        (np.concatenate([1 - t, t]), (np.concatenate([r, r]), np.concatenate([cell, cell + 1]))),
        shape=(x.size, grid.n + 1),
    )


def _pair_matrix(x, cx, y, cy, grid):
    """Rows evaluate f(x) − f(y) for P1 f, with explicit cells (points may sit on nodes)."""
    tx = (x - (grid.a + cx * grid.h)) / grid.h
    ty = (y - (grid.a + cy * grid.h)) / grid.h
    r = np.arange(x.size)
    data = np.concatenate([1 - tx, tx, -(1 - ty), -ty])
    cols = np.concatenate([cx, cx + 1, cy, cy + 1])
    return sparse.csr_matrix((data, (np.tile(r, 4), cols)), shape=(x.size, grid.n + 1))


def _jacobi01(n, beta):
    """Gauss-Jacobi nodes/weights on [0, 1] for the weight t^beta."""
    x, w = roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)


@dataclass
class PairQuadrature:
    """Quadrature for ∬_{ℝ²} G(f(x)−f(y), ...) |x−y|^{-1-ps} dx dy with P1 fields.

    ``G`` must be even and positively homogeneous of degree p in the field
    differences (true for |V|^p, |Φ(V)−Φ(U)|^{p'} and Φ(V)·Ξ).  Rows of the
    sparse matrix ``M`` map nodal values to the differences at every point;
    ``weights`` already include the kernel and the symmetry factors.
    ``band`` records the cell distance |i−j| of each row (−1 for exterior).
    """

    grid: object
    s: float
    p: float
    order_far: int = 4
    order_near: int = 8
    near_band: int = 4
    order_w: int = 8
    order_ext: int = 8
    ext_panels: int = 16
    M: object = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    band: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        if g.n < 2:
            raise ValueError("the pair quadrature needs at least two cells")
        if not 0 < self.s < 1:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")
        s, p, h, n = self.s, self.p, g.h, g.n
        ps = p * s
        kexp = 1.0 + ps
        mats, wts, bands = [], [], []

        # separated cell pairs i < j-1: tensor Gauss, factor 2 for (j, i)
        for d in range(2, n):
            q = self.order_near if d <= self.near_band else self.order_far
            gx, gw = gauss_unit(q)
            i = np.repeat(np.arange(n - d), q * q)
            ta = np.tile(np.repeat(gx, q), n - d)
            tb = np.tile(np.tile(gx, q), n - d)
            wab = np.tile(np.outer(gw, gw).ravel(), n - d)
            x = g.a + (i + ta) * h
            y = g.a + (i + d + tb) * h
            mats.append(_pair_matrix(x, i, y, i + d, g))
            wts.append(2.0 * h * h * wab / (y - x) ** kexp)
            bands.append(np.full(x.size, d))

        # neighbouring cells: Duffy coordinates around the shared node z,
        # x = z − ρw, y = z + ρ(1−w); the ρ-integral of ρ^{p−ps} is exact
        if n >= 2:
            gx, gw = gauss_unit(self.order_w)
            wq = np.concatenate([0.5 * gx, 0.5 + 0.5 * gx])
            ww = np.concatenate([0.5 * gw, 0.5 * gw])
            rho_max = h / np.maximum(wq, 1 - wq)
            rho0 = 0.5 * rho_max
            expo = p - ps + 1.0
            unit = 2.0 * ww * rho_max**expo / (expo * rho0**p)
            i = np.repeat(np.arange(n - 1), wq.size)
            z = g.a + (i + 1) * h
            w_t = np.tile(wq, n - 1)
            r0 = np.tile(rho0, n - 1)
            mats.append(_pair_matrix(z - r0 * w_t, i, z + r0 * (1 - w_t), i + 1, g))
            wts.append(np.tile(unit, n - 1))
            bands.append(np.full(i.size, 1))

        # same cell: closed form for slope^p · ∬ |x−y|^{p−1−ps}
        alpha = p - 1.0 - ps
        c_same = 2.0 * h ** (alpha + 2.0) / ((alpha + 1.0) * (alpha + 2.0))
        D = sparse.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1)) / h
        mats.append(sparse.csr_matrix(D))
        wts.append(np.full(n, c_same))
        bands.append(np.zeros(n, dtype=int))

        # exterior strips, factor 2 for Ωᶜ×Ω; the integrand has a kink wherever
        # the field changes sign, so each cell gets several panels
        L = g.length
        if n > 2:
            k = self.ext_panels
            gx, gw = gauss_unit(self.order_ext)
            gx = ((np.arange(k)[:, None] + gx[None, :]) / k).ravel()
            gw = np.tile(gw / k, k)
            i = np.repeat(np.arange(1, n - 1), gx.size)
            x = g.a + (i + np.tile(gx, n - 2)) * h
            tail = ((x - g.a) ** (-ps) + (g.b - x) ** (-ps)) / ps
            mats.append(_value_matrix(x, g))
            wts.append(2.0 * np.tile(gw, n - 2) * h * tail)
            bands.append(np.full(x.size, -1))
        # end cells: the field is slope·t, so one point with the exact weight
        jt, jw = _jacobi01(12, p)
        far_part = h ** (p + 1) * np.sum(jw * (L - h * jt) ** (-ps))
        end_integral = (h**expo / expo + far_part) / ps
        t0 = 0.5 * h
        x_end = np.array([g.a + t0, g.b - t0])
        mats.append(_value_matrix(x_end, g))
        wts.append(np.full(2, 2.0 * end_integral / t0**p))
        bands.append(np.full(2, -1))

        self.M = sparse.vstack(mats, format="csr")
        self.weights = np.concatenate(wts)
        self.band = np.concatenate(bands)

    def diffs(self, f):
        vals = f.values if isinstance(f, P1Function) else np.asarray(f, dtype=float)
        return self.M @ vals

    def integrate(self, G, *fields, mask=None):
        vals = [self.diffs(f) for f in fields]
        w = self.weights if mask is None else self.weights * mask
        return float(np.dot(w, G(*vals)))

    def seminorm_p(self, v):
        """[v]_p^p."""
        p = self.p
        return self.integrate(lambda V: np.abs(V) ** p, v)

    def energy_grad(self, nodal):
        """(1/p)[v]_p^p and its gradient with respect to nodal values."""
        V = self.M @ nodal
        aV = np.abs(V)
        val = float(np.dot(self.weights, aV**self.p)) / self.p
        grad = self.M.T @ (self.weights * aV ** (self.p - 1) * np.sign(V))
        return val, grad

    def pairing(self, v, xi):
        """⟨(1/p) D[v]_p^p, ξ⟩ = ∬ Φ(v(x)−v(y))(ξ(x)−ξ(y)) |x−y|^{-1-ps}."""
        p = self.p
        return self.integrate(lambda V, X: phi(V, p) * X, v, xi)

    def stiffness(self):
        """Matrix of the quadratic form ∬ (v(x)−v(y))(ξ(x)−ξ(y)) |x−y|^{-1-ps}."""
        return (self.M.T @ sparse.diags(self.weights) @ self.M).toarray()


@lru_cache(maxsize=32)
def pair_quadrature(grid, s, p, refine=0):
    return PairQuadrature(grid, s, p, order_far=4 + refine, order_near=8 + 2 * refine, order_w=8 + 2 * refine)


def gagliardo_seminorm(s, p, v, quad=None):
    quad = quad or pair_quadrature(v.grid, s, p)
    return quad.seminorm_p(v) ** (1.0 / p)


@dataclass(frozen=True)
class KernelField:
    """Kernel γ(x, y) on ℝ².

    Either a linear combination Σ c_k Φ_q(u_k(x) − u_k(y)) / |x−y|^{s(q−1)} of
    flux kernels of P1 fields (``terms``), optionally set to zero on cell pairs
    closer than ``cutoff`` cells, or an arbitrary callable ``func`` that
    vanishes when both points lie outside Ω.
    """

    s: float
    q: float
    terms: tuple = ()
    func: object = None
    cutoff: int = 0
    skew_symmetric: bool = True
    grid: object = None

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(x, y), dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        r = np.abs(x - y)
        with np.errstate(divide="ignore", invalid="ignore"):
            for c, u in self.terms:
                diff = _ext_eval(u, x) - _ext_eval(u, y)
                out = out + c * phi(diff, self.q) / r ** (self.s * (self.q - 1))
        out = np.where(r == 0, 0.0, out)
        if self.cutoff > 0 and self.grid is not None:
            g = self.grid
            inside = (x > g.a) & (x < g.b) & (y > g.a) & (y < g.b)
            close = np.abs(g.cell_of(x) - g.cell_of(y)) < self.cutoff
            out = np.where(inside & close, 0.0, out)
        return out

    def scaled(self, c):
        if self.func is not None:
            f = self.func
            return KernelField(self.s, self.q, func=lambda x, y: c * f(x, y), skew_symmetric=self.skew_symmetric, grid=self.grid)
        return KernelField(self.s, self.q, tuple((c * ck, u) for ck, u in self.terms), cutoff=self.cutoff, grid=self.grid)


def _ext_eval(u, x):
    g = u.grid
    inside = (x >= g.a) & (x <= g.b)
    return np.where(inside, u.sample(np.clip(x, g.a, g.b)), 0.0)


def nonlocal_gradient(s, v):
    """∇^{(s)} v(x, y) = (v(x) − v(y)) / |x−y|^s."""
    return KernelField(s, 2.0, ((1.0, v),), grid=v.grid)


def flux_kernel(s, p, v, cutoff=0):
    """|∇^{(s)}v|^{p−2} ∇^{(s)}v, optionally zeroed on pairs closer than ``cutoff`` cells."""
    return KernelField(s, p, ((1.0, v),), cutoff=cutoff, grid=v.grid)


def check_skew(gamma, grid, samples=1000, seed=0):
    """Largest |γ(x,y) + γ(y,x)| over random pairs in a neighbourhood of Ω."""
    rng = np.random.default_rng(seed)
    span = grid.length
    x = rng.uniform(grid.a - 0.5 * span, grid.b + 0.5 * span, samples)
    y = rng.uniform(grid.a - 0.5 * span, grid.b + 0.5 * span, samples)
    return float(np.max(np.abs(gamma(x, y) + gamma(y, x))))


def _common_grid(gamma):
    grids = {u.grid for _, u in gamma.terms}
    if len(grids) != 1:
        raise ValueError("kernel terms must share one grid")
    return grids.pop()


def p_functional(gamma, p, grid=None, quad=None):
    """𝒫(γ) = ∬ |γ(x,y)|^{p'} / |x−y| dx dy."""
    q = p / (p - 1)
    if gamma.func is None and gamma.terms:
        grid = _common_grid(gamma)
        # |Φ_q(V)|^{p'} r^{-s(q-1)p'} / r is homogeneous of degree (q-1)p'
        peff = (gamma.q - 1.0) * q
        quad = quad or pair_quadrature(grid, gamma.s, peff)
        qq = gamma.q

        def G(*vals):
            tot = sum(c * phi(V, qq) for (c, _), V in zip(gamma.terms, vals))
            return np.abs(tot) ** q

        mask = None if gamma.cutoff == 0 else (np.abs(quad.band) >= gamma.cutoff) | (quad.band < 0)
        return quad.integrate(G, *[u for _, u in gamma.terms], mask=mask)
    if gamma.func is None:
        return 0.0
    return p_functional_brute(gamma, p, grid or gamma.grid)


def p_functional_brute(gamma, p, grid, order=8, depth=14, rate=None):
    """Direct quadrature of 𝒫(γ) for any kernel vanishing on Ωᶜ×Ωᶜ.

    Separated cell pairs use tensor Gauss, touching pairs use Duffy
    coordinates with geometric grading in the radius, and the exterior
    strips use an exponential radial map with Gauss-Laguerre nodes.  Slow;
    intended as an independent check.
    """
    q = p / (p - 1)
    g = grid
    n, h = g.n, g.h
    gx, gw = gauss_unit(order)

    def f(x, y):
        r = np.abs(x - y)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, np.abs(gamma(x, y)) ** q / r, 0.0)

    total = 0.0
    # separated pairs, factor 2 by symmetry of |γ|
    I, J = np.triu_indices(n, 2)
    xa = g.a + (I[:, None] + gx[None, :]) * h
    yb = g.a + (J[:, None] + gx[None, :]) * h
    vals = f(xa[:, :, None], yb[:, None, :])
    total += 2.0 * h * h * np.einsum("kab,a,b->", vals, gw, gw)
    # radial grading for the touching pairs
    rp, rw = graded_interval(0.0, 1.0, 0.0, order, depth)
    wq = np.concatenate([0.5 * gx, 0.5 + 0.5 * gx])
    ww = np.concatenate([0.5 * gw, 0.5 * gw])
    for i in range(n - 1):
        z = g.a + (i + 1) * h
        rm = h / np.maximum(wq, 1 - wq)
        rho = rm[:, None] * rp[None, :]
        wts = ww[:, None] * rm[:, None] * rw[None, :] * rho
        x = z - rho * wq[:, None]
        y = z + rho * (1 - wq[:, None])
        total += 2.0 * np.sum(wts * f(x, y))
    for i in range(n):
        c0 = g.a + i * h
        # x < y within the cell: d = y − x graded toward 0, u = x − c0
        d = h * rp
        wd = h * rw
        u = (h - d)[:, None] * gx[None, :]
        wu = (h - d)[:, None] * gw[None, :]
        total += 2.0 * np.sum(wd[:, None] * wu * f(c0 + u, c0 + u + d[:, None]))
    # exterior strips: x in Ω, y outside; r = dist(x, ∂)·e^σ
    s = gamma.s
    rate = rate or s * p
    lx, lw = roots_laguerre(40)
    xs, xw = [], []
    for i in range(n):
        lo, hi = g.a + i * h, g.a + (i + 1) * h
        if i == 0 or i == n - 1:
            mark = lo if i == 0 else hi
            pts, wts = graded_interval(lo, hi, mark, order, depth)
            if n == 1:
                pts, wts = graded_interval(lo, hi, 0.5 * (lo + hi), order, 0)
        else:
            pts, wts = lo + h * gx, h * gw
        xs.append(pts)
        xw.append(wts)
    xs = np.concatenate(xs)
    xw = np.concatenate(xw)
    sig = lx / rate
    for side in (-1, 1):
        dist = (xs - g.a) if side < 0 else (g.b - xs)
        r = dist[:, None] * np.exp(sig[None, :])
        y = xs[:, None] + side * r
        inner = np.sum(lw[None, :] * np.exp(lx)[None, :] / rate * f(xs[:, None], y) * r, axis=1)
        total += 2.0 * np.dot(xw, inner)
    return float(total)


def _flux_div_at(u, s, p, x, cutoff, order=8, log_order=24, principal_value=False):
    """2∫ γ(x,y)|x−y|^{-1-s} dy for the (truncated) flux kernel γ of P1 u.

    With ``principal_value`` the own-cell integral is taken symmetrically
    about x, which stays finite inside cells even when beta <= 0.
    """
    g = u.grid
    n, h = g.n, g.h
    ps = p * s
    beta = p - 1.0 - ps
    x = np.asarray(x, dtype=float)
    cell = g.cell_of(x)
    ux = u.sample(x, cell)
    out = np.zeros_like(x)
    gx, gw = gauss_unit(order)
    slope = np.diff(u.values) / h
    left_vals = u.values[:-1]
    # separated cells (distance ≥ one cell), blockwise to bound memory; each
    # cell is split where u(y) = u(x) so the kink of Φ_p sits on a panel end
    far_from = max(cutoff, 2)
    for start in range(0, x.size, 256):
        sl = slice(start, start + 256)
        xb, cb, ub = x[sl], cell[sl], ux[sl]
        use = np.abs(np.arange(n)[None, :] - cb[:, None]) >= far_from
        with np.errstate(divide="ignore", invalid="ignore"):
            root = (ub[:, None] - left_vals[None, :]) / (slope[None, :] * h)
        root = np.where(np.isfinite(root), np.clip(root, 0.0, 1.0), 0.0)
        acc = np.zeros(xb.size)
        for lo, width in ((np.zeros_like(root), root), (root, 1.0 - root)):
            t = lo[:, :, None] + width[:, :, None] * gx[None, None, :]
            y = g.a + (np.arange(n)[None, :, None] + t) * h
            uy = left_vals[None, :, None] + slope[None, :, None] * t * h
            r = np.where(use[:, :, None], np.abs(xb[:, None, None] - y), 1.0)
            val = phi(ub[:, None, None] - uy, p) / r ** (1 + ps)
            acc += h * np.einsum("kjq,q,kj->k", val, gw, width * use)
        out[sl] = 2.0 * acc
    if cutoff <= 1:
        # neighbouring cells: r = d·e^σ removes the near-singularity at the shared node
        lx, lw = gauss_unit(log_order)
        own = slope[cell]
        for side in (-1, 1):
            nb = cell + side
            ok = (nb >= 0) & (nb < n)
            other = slope[np.clip(nb, 0, n - 1)]
            z = g.a + (cell + (side > 0)) * h
            d = np.abs(z - x)
            tiny = d <= 1e-14 * h
            d = np.where(tiny, 1e-14 * h, d)
            S = np.log1p(h / d)
            # u(x) − u(y) = −side(d·own + (r − d)·other), zero at r0 = d(1 − own/other)
            with np.errstate(divide="ignore", invalid="ignore"):
                s0 = np.log(np.where(other != 0, 1.0 - own / other, 0.0))
            s0 = np.where(np.isfinite(s0), np.clip(s0, 0.0, S), 0.0)
            acc = np.zeros_like(x)
            for lo, width in ((np.zeros_like(S), s0), (s0, S - s0)):
                sig = lo[:, None] + width[:, None] * lx[None, :]
                r = d[:, None] * np.exp(sig)
                dx = np.where(tiny, 0.0, d)[:, None]
                diff = -side * (dx * own[:, None] + (r - dx) * other[:, None])
                f = phi(diff, p) * r ** (-ps)
                acc += width * np.sum(lw[None, :] * f, axis=1)
            out += np.where(ok, 2.0 * acc, 0.0)
    if cutoff == 0:
        if beta <= 0 and not principal_value:
            raise SingularityNotIntegrable(
                f"the flux kernel of a P1 field has no integrable divergence for s={s} >= 1-1/p={1 - 1 / p:.6g}"
            )
        left = x - (g.a + cell * h)
        right = h - left
        # the symmetric window |y − x| < min(left, right) cancels exactly, so
        # the same antiderivative gives the principal value when beta <= 0
        if beta == 0:
            own = np.log(left / right)
        else:
            own = (left**beta - right**beta) / beta
        out += 2.0 * phi(slope[cell], p) * own
    # exterior: γ(x, y) = Φ(u(x)) |x−y|^{-s(p-1)}
    with np.errstate(divide="ignore"):
        tail = ((x - g.a) ** (-ps) + (g.b - x) ** (-ps)) / ps
    out += 2.0 * phi(ux, p) * tail
    return out


def nonlocal_divergence(s, gamma, x, grid=None, principal_value=False):
    """(div^{(s)}γ)(x) = 2∫ γ(x,y) |x−y|^{-1-s} dy.

    ``principal_value`` applies to flux-kernel sums, see :func:`apply_Lsp`.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if gamma.func is None:
        if not gamma.terms:
            return np.zeros_like(x)
        out = np.zeros_like(x)
        # Φ_q(V) r^{-s_γ(q-1)} r^{-1-s} = Φ_q(V) r^{-1-q·s_eff}
        s_eff = (s + gamma.s * (gamma.q - 1.0)) / gamma.q
        for c, u in gamma.terms:
            out += c * _flux_div_at(u, s_eff, gamma.q, x, gamma.cutoff, principal_value=principal_value)
        return out
    return _generic_div(s, gamma, x, grid or gamma.grid)


def _generic_div(s, gamma, x, grid, order=8, pieces=96):
    g = grid
    lx, lw = roots_laguerre(40)
    # flux-type kernels behave like r^e near the diagonal and r^{-rate} far out
    rate = s + gamma.s * (gamma.q - 1.0)
    delta = (gamma.q - 1.0) * (1.0 - gamma.s) - s
    if delta <= 0:
        raise SingularityNotIntegrable(f"kernel divergence not integrable at the diagonal for s={s}")
    gx, gw = gauss_unit(order)
    t = ((np.arange(pieces)[:, None] + gx[None, :]) / pieces).ravel()
    tw = np.tile(gw / pieces, pieces)
    out = np.empty_like(x)
    for k, xk in enumerate(x):
        val = 0.0
        for side in (-1, 1):
            dist = (xk - g.a) if side < 0 else (g.b - xk)
            # r = r1·t^{1/δ} flattens the diagonal singularity on [0, r1]
            r1 = dist / 256.0
            r = r1 * t ** (1.0 / delta)
            jac = r1 / delta * t ** (1.0 / delta - 1.0)
            val += np.dot(tw * jac, gamma(np.full_like(r, xk), xk + side * r) / r ** (1 + s))
            # composite Gauss in log r on [r1, dist]
            lr = np.log(r1) + (np.log(dist) - np.log(r1)) * t
            r = np.exp(lr)
            jac = (np.log(dist) - np.log(r1)) * r
            val += np.dot(tw * jac, gamma(np.full_like(r, xk), xk + side * r) / r ** (1 + s))
            with np.errstate(over="ignore"):
                rr = dist * np.exp(lx / rate)
                f = gamma(np.full_like(rr, xk), xk + side * rr) * rr ** (-s)
                val += np.sum(np.where(np.isfinite(rr), lw * np.exp(lx) / rate * f, 0.0))
        out[k] = 2.0 * val
    return out


def apply_Lsp(s, p, v, x, principal_value=False):
    """𝓛^s_p v(x) = 2∫ Φ_p(v(x)−v(y)) |x−y|^{-1-ps} dy.

    For P1 fields with s >= 1 − 1/p the integral only exists as a principal
    value; pass ``principal_value=True`` to evaluate it that way (points
    off the nodes only).
    """
    return _flux_div_at(v, s, p, np.atleast_1d(np.asarray(x, dtype=float)), 0, principal_value=principal_value)


def fractional_rayleigh_min(s, p, grid, quad=None):
    """Minimise [v]_p^p / ‖v‖_p^p over P1 fields vanishing at the ends."""
    from scipy import linalg, optimize

    from .funcspace import p1_value_matrix

    quad2 = pair_quadrature(grid, s, 2.0)
    K = quad2.stiffness()[1:-1, 1:-1]
    B, w, _ = p1_value_matrix(grid, 6)
    Mass = (B.T @ sparse.diags(w) @ B).toarray()[1:-1, 1:-1]
    vals, vecs = linalg.eigh(K, Mass)
    z0 = vecs[:, 0] * np.sign(vecs[len(vecs) // 2, 0] or 1.0)
    if p == 2:
        return float(vals[0]), np.concatenate([[0.0], z0, [0.0]])
    quad = quad or pair_quadrature(grid, s, p)
    Bi = B[:, 1:-1]

    def fun(z):
        v = np.concatenate([[0.0], z, [0.0]])
        top, gtop = quad.energy_grad(v)
        top *= p
        gtop = p * gtop[1:-1]
        V = Bi @ z
        bot = float(w @ np.abs(V) ** p)
        gbot = p * (Bi.T @ (w * phi(V, p)))
        return math.log(top) - math.log(bot), gtop / top - gbot / bot

    res = optimize.minimize(fun, z0, jac=True, method="L-BFGS-B", options={"maxiter": 3000, "gtol": 1e-11, "ftol": 1e-14})
    return math.exp(res.fun), np.concatenate([[0.0], res.x, [0.0]])


def majorant_fractional(s, p, v, C_Fs, h, **kwargs):
    """See :func:`pmajorant.majorants.majorant_fractional`."""
    from .majorants import majorant_fractional as impl

    return impl(s, p, v, C_Fs, h, **kwargs)
