"""Uniform 1D grids, P1/P0 fields and composite Gauss quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coeffparse import CoeffFn, parse_coeff
from .errors import GridMismatch


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"grid needs a < b, got ({self.a}, {self.b})")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid needs n >= 1, got {self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @property
    def length(self):
        return self.b - self.a

    @property
    def nodes(self):
        return self.a + self.h * np.arange(self.n + 1)

    @property
    def midpoints(self):
        return self.a + self.h * (np.arange(self.n) + 0.5)

    def cell_of(self, x):
        """Index of the cell containing x (right endpoint belongs to the last cell)."""
        idx = np.floor((np.asarray(x, dtype=float) - self.a) / self.h).astype(int)
        return np.clip(idx, 0, self.n - 1)

    def with_n(self, n):
        return Grid1D(self.a, self.b, n)

    def to_json(self):
        return {"a": self.a, "b": self.b, "n": self.n}


def _as_values(values, rows):
    arr = np.array(values, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[0] != rows:
        raise GridMismatch(f"expected {rows} rows of values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class P1Function:
    """Continuous piecewise-linear field; ``values`` has shape (n+1,) or (n+1, k)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.grid.n + 1))

    @property
    def ncomp(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def sample(self, x, cell=None):
        g = self.grid
        x = np.asarray(x, dtype=float)
        if cell is None:
            cell = g.cell_of(x)
        t = (x - (g.a + cell * g.h)) / g.h
        v0 = self.values[cell]
        v1 = self.values[cell + 1]
        if self.values.ndim == 2:
            t = t[..., None]
        return v0 + (v1 - v0) * t

    __call__ = sample

    def derivative(self):
        return derivative(self)

    def resample(self, grid):
        """Nodal interpolant of this field on another grid."""
        return P1Function(grid, self.sample(grid.nodes))

    def __add__(self, other):
        _same_grid(self, other)
        return P1Function(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return P1Function(self.grid, self.values - other.values)

    def __mul__(self, c):
        return P1Function(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return P1Function(self.grid, -self.values)

    def to_json(self):
        return {"grid": self.grid.to_json(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(Grid1D(**data["grid"]), data["values"])


@dataclass(frozen=True, eq=False)
class P0Function:
    """Piecewise-constant field; ``values`` has shape (n,) or (n, k)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.grid.n))

    @property
    def ncomp(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def sample(self, x, cell=None):
        if cell is None:
            cell = self.grid.cell_of(x)
        return self.values[cell]

    __call__ = sample

    def to_json(self):
        return {"grid": self.grid.to_json(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(Grid1D(**data["grid"]), data["values"])


def _same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatch(f"fields live on different grids: {f.grid} vs {g.grid}")


@lru_cache(maxsize=None)
def gauss_unit(order):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def graded_interval(lo, hi, mark, order, depth, ratio=0.5):
    """Composite Gauss on [lo, hi] geometrically refined toward ``mark``."""
    gx, gw = gauss_unit(order)
    pieces = []
    for left, right, toward_right in ((lo, mark, True), (mark, hi, False)):
        span = right - left
        if span <= 0:
            continue
        # break points accumulate at the mark
        dist = span * ratio ** np.arange(depth + 1)
        cuts = right - dist if toward_right else left + dist
        cuts = np.concatenate([[left if toward_right else right], cuts[1:], [right if toward_right else left]])
        cuts = np.sort(cuts)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            if c1 > c0:
                pieces.append((c0 + (c1 - c0) * gx, (c1 - c0) * gw))
    pts = np.concatenate([p for p, _ in pieces])
    wts = np.concatenate([w for _, w in pieces])
    return pts, wts


@dataclass(frozen=True)
class QuadPoints:
    x: np.ndarray
    w: np.ndarray
    cell: np.ndarray


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre with ``order`` points per cell.

    Cells containing one of ``marks`` are split there and graded geometrically
    toward the mark (``depth`` levels), which keeps cusp integrands accurate.
    """

    order: int = 5
    marks: tuple = ()
    depth: int = 12
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def with_marks(self, marks):
        return QuadratureRule(self.order, tuple(float(m) for m in marks), self.depth)

    def points(self, grid):
        key = (grid.a, grid.b, grid.n)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        gx, gw = gauss_unit(self.order)
        x = grid.a + grid.h * (np.arange(grid.n)[:, None] + gx[None, :])
        w = np.broadcast_to(grid.h * gw, x.shape)
        cell = np.broadcast_to(np.arange(grid.n)[:, None], x.shape)
        xs, ws, cs = [x.ravel()], [w.ravel()], [cell.ravel()]
        graded = {}
        for m in self.marks:
            if grid.a < m < grid.b:
                c = int(grid.cell_of(m))
                graded.setdefault(c, []).append(m)
                # marks on a node grade both neighbouring cells
                if c > 0 and abs(m - (grid.a + c * grid.h)) < 1e-14 * grid.length:
                    graded.setdefault(c - 1, []).append(m)
        if graded:
            keep = ~np.isin(cs[0], list(graded))
            xs, ws, cs = [xs[0][keep]], [ws[0][keep]], [cs[0][keep]]
            for c, ms in graded.items():
                lo, hi = grid.a + c * grid.h, grid.a + (c + 1) * grid.h
                cuts = [lo] + sorted(min(max(m, lo), hi) for m in ms) + [hi]
                for c0, c1 in zip(cuts[:-1], cuts[1:]):
                    if c1 <= c0:
                        continue
                    lo_mark, hi_mark = c0 in ms, c1 in ms
                    if lo_mark and hi_mark:
                        mid = 0.5 * (c0 + c1)
                        p1, w1 = graded_interval(c0, mid, c0, self.order, self.depth)
                        p2, w2 = graded_interval(mid, c1, c1, self.order, self.depth)
                        p, w = np.concatenate([p1, p2]), np.concatenate([w1, w2])
                    elif lo_mark or hi_mark:
                        p, w = graded_interval(c0, c1, c0 if lo_mark else c1, self.order, self.depth)
                    else:
                        p, w = c0 + (c1 - c0) * gx, (c1 - c0) * gw
                    xs.append(p)
                    ws.append(w)
                    cs.append(np.full(p.size, c))
            order = np.argsort(np.concatenate(xs), kind="stable")
            qp = QuadPoints(np.concatenate(xs)[order], np.concatenate(ws)[order], np.concatenate(cs)[order])
        else:
            qp = QuadPoints(xs[0], ws[0], cs[0])
        self._cache[key] = qp
        return qp


DEFAULT_RULE = QuadratureRule()


def _grid_of(*fields):
    for f in fields:
        g = getattr(f, "grid", None)
        if g is not None:
            return g
    return None


def sample(f, qp):
    """Values of a field at quadrature points (P1, P0, expression, callable or constant)."""
    if isinstance(f, (P1Function, P0Function)):
        return f.sample(qp.x, qp.cell)
    if isinstance(f, str):
        f = parse_coeff(f)
    if isinstance(f, (int, float, np.floating)):
        return np.full(qp.x.shape, float(f))
    if callable(f):
        return np.asarray(f(qp.x), dtype=float)
    raise TypeError(f"cannot sample {type(f).__name__}")


def pointwise_abs(values):
    values = np.asarray(values, dtype=float)
    return np.abs(values) if values.ndim == 1 else np.linalg.norm(values, axis=-1)


def lq_norm_values(values, qp, q, subset=None):
    mag = pointwise_abs(values)
    # scale by the peak so tiny or huge fields do not under/overflow in |f|^q
    peak = float(np.max(mag)) if mag.size else 0.0
    if peak == 0.0 or not np.isfinite(peak):
        peak = 1.0
    w = qp.w if subset is None else qp.w * np.asarray(subset)[qp.cell]
    return peak * float(np.dot(w, (mag / peak) ** q)) ** (1.0 / q)


def lq_norm(f, q, rule=DEFAULT_RULE, subset=None, grid=None):
    if q <= 1:
        raise ValueError(f"norm exponent must exceed 1, got {q}")
    grid = grid or _grid_of(f)
    if grid is None:
        raise GridMismatch("a grid is needed to integrate a plain function")
    qp = rule.points(grid)
    return lq_norm_values(sample(f, qp), qp, q, subset)


def integrate(f, rule=DEFAULT_RULE, subset=None, grid=None):
    grid = grid or _grid_of(f)
    qp = rule.points(grid)
    w = qp.w if subset is None else qp.w * np.asarray(subset)[qp.cell]
    return float(np.dot(w, sample(f, qp)))


def inner_product(f, g, rule=DEFAULT_RULE, subset=None, grid=None):
    grid = grid or _grid_of(f, g)
    if grid is None:
        raise GridMismatch("a grid is needed to integrate plain functions")
    qp = rule.points(grid)
    fv, gv = sample(f, qp), sample(g, qp)
    prod = fv * gv if fv.ndim == 1 else np.sum(fv * gv, axis=-1)
    w = qp.w if subset is None else qp.w * np.asarray(subset)[qp.cell]
    return float(np.dot(w, prod))


def interpolate(f, grid):
    if isinstance(f, str):
        f = parse_coeff(f)
    if isinstance(f, (int, float)):
        return P1Function(grid, np.full(grid.n + 1, float(f)))
    return P1Function(grid, np.asarray(f(grid.nodes), dtype=float))


def derivative(v):
    d = np.diff(v.values, axis=0) / v.grid.h
    return P0Function(v.grid, d)


def nodal_average(f):
    """Lift a P0 field to P1 by averaging neighbouring cells (one-sided at the ends)."""
    vals = f.values
    out = np.empty((vals.shape[0] + 1,) + vals.shape[1:])
    out[1:-1] = 0.5 * (vals[:-1] + vals[1:])
    out[0] = vals[0]
    out[-1] = vals[-1]
    return P1Function(f.grid, out)


def cumulative_integral(f, grid, t, order=8):
    """∫_a^t f for an array of points t, exact per-cell Gauss plus a partial cell."""
    if isinstance(f, str):
        f = parse_coeff(f)
    t = np.asarray(t, dtype=float)
    nodal = antiderivative(f, grid, QuadratureRule(order)).values
    cell = grid.cell_of(t)
    left = grid.a + cell * grid.h
    gx, gw = gauss_unit(order)
    span = (t - left)[..., None]
    inner = f(left[..., None] + span * gx) * gw
    return nodal[cell] + span[..., 0] * inner.sum(axis=-1)


def antiderivative(f, grid, rule=DEFAULT_RULE):
    """P1 field of nodal values H(x_i) = ∫_a^{x_i} f."""
    if isinstance(f, str):
        f = parse_coeff(f)
    qp = QuadratureRule(rule.order).points(grid)
    vals = sample(f, qp) * qp.w
    per_cell = np.bincount(qp.cell, weights=vals, minlength=grid.n)
    return P1Function(grid, np.concatenate([[0.0], np.cumsum(per_cell)]))


def coeff(f):
    """Normalise a user coefficient (string, number, CoeffFn or callable) to a callable."""
    if isinstance(f, (str, int, float)):
        return parse_coeff(f if isinstance(f, str) else repr(float(f)))
    if isinstance(f, CoeffFn) or callable(f):
        return f
    raise TypeError(f"not a coefficient: {f!r}")


class CubicField:
    """C² cubic spline through nodal values.

    ``bc="clamped"`` gives zero end slopes (fields in the clamped W^{2,p}
    space); ``bc="not-a-knot"`` leaves the ends free (flux candidates).  The
    second derivative is continuous piecewise linear, so it is returned as an
    exact P1 field.
    """

    def __init__(self, grid, values, bc="clamped"):
        from scipy.interpolate import CubicSpline

        self.grid = grid
        self.values = _as_values(values, grid.n + 1)
        self.bc = bc
        self._spline = CubicSpline(grid.nodes, self.values, bc_type=bc, axis=0)

    def sample(self, x, cell=None):
        return self._spline(x)

    __call__ = sample

    def slope(self, x):
        return self._spline(x, 1)

    def second(self):
        return P1Function(self.grid, self._spline(self.grid.nodes, 2))

    def p1(self):
        return P1Function(self.grid, self.values)


@lru_cache(maxsize=64)
def spline_maps(grid, bc, order=5):
    """Dense matrices taking nodal values to spline values at Gauss points and
    to nodal second derivatives."""
    from scipy.interpolate import CubicSpline

    eye = np.eye(grid.n + 1)
    spl = CubicSpline(grid.nodes, eye, bc_type=bc, axis=0)
    qp = QuadratureRule(order).points(grid)
    return spl(qp.x), spl(grid.nodes, 2)


@lru_cache(maxsize=64)
def p1_value_matrix(grid, order=5):
    """Sparse map from nodal values to values at the Gauss points of every cell,
    and the matching quadrature weights."""
    from scipy import sparse

    gx, gw = gauss_unit(order)
    n = grid.n
    rows = np.arange(n * order)
    cell = np.repeat(np.arange(n), order)
    t = np.tile(gx, n)
    B = sparse.csr_matrix(
        (np.concatenate([1 - t, t]), (np.concatenate([rows, rows]), np.concatenate([cell, cell + 1]))),
        shape=(n * order, n + 1),
    )
    return B, np.tile(gw * grid.h, n), grid.a + grid.h * (cell + t)


def load_vector(h, grid, order=8):
    """Nodal loads ∫ h φ_k for the hat functions φ_k of the grid."""
    B, w, x = p1_value_matrix(grid, order)
    return B.T @ (w * np.asarray(coeff(h)(x), dtype=float))
