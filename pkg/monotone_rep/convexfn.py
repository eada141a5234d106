"""
Proper convex functions on R^n and their Fenchel conjugates.

Closed-form catalogue kinds (quadratics, weighted l1 norms, box
indicators, separable sums) conjugate symbolically; grid kinds use the
lower convex hull of their samples and conjugate to a max-affine function.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from . import config
from .config import Tolerances, tolerances_for
from .errors import (BoundaryTouchWarning, ConvexityError, DimensionError,
                     QualificationError)
from .extended import ext_add
from .hull import LowerConvexEnvelope, legendre_1d, max_affine_prox
from .operators import DualSet, PrimalDualPoint, _as_vector, _project_to_polyline

logger = logging.getLogger(__name__)


def _weights(weights, v: np.ndarray) -> np.ndarray:
    w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape).astype(float)
    if np.any(w <= 0):
        raise ValueError("proximal weights must be positive")
    return w


class ConvexFunction:
    """
    Base class of the catalogue. Subclasses implement evaluate on a batch
    of points (rows), conjugate and, where available, subdifferential,
    prox and project_graph.
    """
    is_grid = False
    is_polyhedral = False
    has_closed_subdifferential = False
    label = "f"

    def __init__(self, dim: int):
        self.dim = dim

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        x = _as_vector(x, "x")
        if x.size != self.dim:
            raise DimensionError(f"point has dimension {x.size}, function has {self.dim}")
        return float(self.evaluate(x[None, :])[0])

    def _batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim)
        if X.shape[1] != self.dim:
            raise DimensionError(f"points have dimension {X.shape[1]}, function has {self.dim}")
        return X

    def conjugate(self) -> "ConvexFunction":
        raise NotImplementedError

    def subdifferential(self, x) -> DualSet:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form subdifferential")

    def prox(self, v, weights=1.0) -> np.ndarray:
        """argmin_y f(y) + 1/2 sum_i w_i (y_i - v_i)^2."""
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        return v - self.conjugate().prox(w * v, 1.0 / w) / w

    def project_graph(self, x, xstar) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form graph projection")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label}, n={self.dim})"


class Quadratic(ConvexFunction):
    """f(x) = 1/2 x^T A x + b^T x + c with A symmetric positive semidefinite."""
    has_closed_subdifferential = True

    def __init__(self, A, b=None, c: float = 0.0, tol: float = 1e-12):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"quadratic needs a square matrix, got {A.shape}")
        super().__init__(n)
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(n) if b is None else _as_vector(b, "b")
        if self.b.size != n:
            raise DimensionError(f"linear term has dimension {self.b.size}, matrix has {n}")
        self.c = float(c)
        eig = np.linalg.eigvalsh(self.A)
        if eig[0] < -tol * max(1.0, abs(eig[-1])):
            raise ConvexityError(f"quadratic is not convex (smallest eigenvalue {eig[0]:.3g})")
        self._eig = eig
        self.label = "quadratic"

    @property
    def is_polyhedral(self) -> bool:
        return not np.any(self.A)

    def evaluate(self, X) -> np.ndarray:
        X = self._batch(X)
        return 0.5 * np.einsum("ij,jk,ik->i", X, self.A, X) + X @ self.b + self.c

    def conjugate(self) -> ConvexFunction:
        if not np.any(self.A):
            return BoxIndicator(self.b, self.b, const=-self.c)
        if self._eig[0] <= 1e-12 * max(1.0, self._eig[-1]):
            raise ConvexityError("conjugate of a singular nonzero quadratic has no catalogue form")
        Ainv = np.linalg.inv(self.A)
        return Quadratic(Ainv, -Ainv @ self.b, 0.5 * self.b @ Ainv @ self.b - self.c)

    def subdifferential(self, x) -> DualSet:
        return DualSet.singleton(self.A @ _as_vector(x, "x") + self.b)

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        return np.linalg.solve(self.A + np.diag(w), w * v - self.b)

    def project_graph(self, x, xstar):
        A, b = self.A, self.b
        y = np.linalg.solve(np.eye(self.dim) + A.T @ A, x + A.T @ (xstar - b))
        return y, A @ y + b


class BoxSupport(ConvexFunction):
    """
    f(x) = sum_i max(lo_i (x_i - c_i), hi_i (x_i - c_i)) + const,
    the support function of [lo, hi] centered at c. abs_norm is lo=-1, hi=1.
    """
    is_polyhedral = True
    has_closed_subdifferential = True

    def __init__(self, lo, hi, center=None, const: float = 0.0):
        self.lo, self.hi = _as_vector(lo, "lo"), _as_vector(hi, "hi")
        super().__init__(self.lo.size)
        if self.hi.size != self.dim or np.any(self.lo > self.hi) or not np.all(np.isfinite(self.lo) & np.isfinite(self.hi)):
            raise ConvexityError("box support needs finite bounds with lo <= hi")
        self.center = np.zeros(self.dim) if center is None else _as_vector(center, "center")
        self.const = float(const)
        self.label = "box_support"

    @classmethod
    def abs_norm(cls, n: int = 1) -> "BoxSupport":
        f = cls(-np.ones(n), np.ones(n))
        f.label = "abs_norm"
        return f

    def evaluate(self, X) -> np.ndarray:
        T = self._batch(X) - self.center
        return np.sum(np.maximum(self.lo * T, self.hi * T), axis=1) + self.const

    def conjugate(self) -> ConvexFunction:
        return BoxIndicator(self.lo, self.hi, linear=self.center, const=-self.const)

    def subdifferential(self, x) -> DualSet:
        t = _as_vector(x, "x") - self.center
        kink = np.abs(t) <= 1e-12 * (1.0 + np.abs(self.center))
        lo = np.where(kink | (t < 0), self.lo, self.hi)
        hi = np.where(kink | (t > 0), self.hi, self.lo)
        return DualSet(lo=lo, hi=hi)

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        u = v - self.center
        return v - np.clip(u, self.lo / w, self.hi / w)

    def project_graph(self, x, xstar):
        y, ys = np.empty(self.dim), np.empty(self.dim)
        for i in range(self.dim):
            c, lo, hi = self.center[i], self.lo[i], self.hi[i]
            verts = np.array([[-np.inf, lo], [c, lo], [c, hi], [np.inf, hi]])
            y[i], ys[i] = _project_to_polyline(verts, np.array([x[i], xstar[i]]))
        return y, ys


class BoxIndicator(ConvexFunction):
    """f(x) = <a, x> + const on the box [lo, hi], +inf outside."""
    is_polyhedral = True
    has_closed_subdifferential = True

    def __init__(self, lo, hi, linear=None, const: float = 0.0, feas_tol: float = 1e-12):
        self.lo, self.hi = _as_vector(lo, "lo"), _as_vector(hi, "hi")
        super().__init__(self.lo.size)
        if self.hi.size != self.dim or np.any(self.lo > self.hi) or not np.all(np.isfinite(self.lo) & np.isfinite(self.hi)):
            raise ConvexityError("box indicator needs finite bounds with lo <= hi")
        self.linear = np.zeros(self.dim) if linear is None else _as_vector(linear, "linear")
        self.const = float(const)
        self.feas_tol = feas_tol
        self.label = "box_indicator"

    def _slack(self, bound):
        return self.feas_tol * (1.0 + np.abs(bound))

    def evaluate(self, X) -> np.ndarray:
        X = self._batch(X)
        inside = np.all((X >= self.lo - self._slack(self.lo)) & (X <= self.hi + self._slack(self.hi)), axis=1)
        return np.where(inside, X @ self.linear + self.const, np.inf)

    def conjugate(self) -> ConvexFunction:
        return BoxSupport(self.lo, self.hi, center=self.linear, const=-self.const)

    def subdifferential(self, x) -> DualSet:
        x = _as_vector(x, "x")
        at_lo = np.abs(x - self.lo) <= self._slack(self.lo)
        at_hi = np.abs(x - self.hi) <= self._slack(self.hi)
        outside = ((x < self.lo) & ~at_lo) | ((x > self.hi) & ~at_hi)
        if np.any(outside):
            return DualSet.empty(self.dim)
        lo = np.where(at_lo, -np.inf, self.linear)
        hi = np.where(at_hi, np.inf, self.linear)
        return DualSet(lo=lo, hi=hi)

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        return np.clip(v - self.linear / w, self.lo, self.hi)

    def project_graph(self, x, xstar):
        y, ys = np.empty(self.dim), np.empty(self.dim)
        for i in range(self.dim):
            a, lo, hi = self.linear[i], self.lo[i], self.hi[i]
            verts = np.array([[lo, -np.inf], [lo, a], [hi, a], [hi, np.inf]])
            y[i], ys[i] = _project_to_polyline(verts, np.array([x[i], xstar[i]]))
        return y, ys


class Perturbed(ConvexFunction):
    """F(x) = f(x + z) + <a, x> + c for a base function f."""

    def __init__(self, base: ConvexFunction, shift=None, linear=None, const: float = 0.0):
        super().__init__(base.dim)
        self.base = base
        self.shift = np.zeros(self.dim) if shift is None else _as_vector(shift, "shift")
        self.linear = np.zeros(self.dim) if linear is None else _as_vector(linear, "linear")
        self.const = float(const)
        self.label = f"perturbed({base.label})"

    @property
    def is_grid(self):
        return self.base.is_grid

    @property
    def is_polyhedral(self):
        return self.base.is_polyhedral

    @property
    def has_closed_subdifferential(self):
        return self.base.has_closed_subdifferential

    def evaluate(self, X) -> np.ndarray:
        X = self._batch(X)
        return ext_add(self.base.evaluate(X + self.shift), X @ self.linear + self.const)

    def conjugate(self) -> ConvexFunction:
        return perturb(self.base.conjugate(), shift=-self.linear, linear=-self.shift,
                       const=float(self.shift @ self.linear) - self.const)

    def subdifferential(self, x) -> DualSet:
        inner = self.base.subdifferential(_as_vector(x, "x") + self.shift)
        if inner.is_box:
            return DualSet(lo=inner.lo + self.linear, hi=inner.hi + self.linear)
        return DualSet(points=inner.points + self.linear)

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        return self.base.prox(v + self.shift - self.linear / w, w) - self.shift

    def project_graph(self, x, xstar):
        y, ys = self.base.project_graph(_as_vector(x, "x") + self.shift, _as_vector(xstar, "xstar") - self.linear)
        return y - self.shift, ys + self.linear


def perturb(f: ConvexFunction, shift=None, linear=None, const: float = 0.0) -> ConvexFunction:
    """
    x -> f(x + shift) + <linear, x> + const, folded into the catalogue kind
    of f whenever that kind is closed under the operation.
    """
    n = f.dim
    z = np.zeros(n) if shift is None else _as_vector(shift, "shift")
    a = np.zeros(n) if linear is None else _as_vector(linear, "linear")
    if not np.any(z) and not np.any(a) and const == 0.0:
        return f
    if isinstance(f, Quadratic):
        return Quadratic(f.A, f.A @ z + f.b + a, 0.5 * z @ f.A @ z + f.b @ z + f.c + const)
    if isinstance(f, BoxIndicator):
        return BoxIndicator(f.lo - z, f.hi - z, f.linear + a, f.const + float(f.linear @ z) + const, f.feas_tol)
    if isinstance(f, BoxSupport) and not np.any(a):
        return BoxSupport(f.lo, f.hi, f.center - z, f.const + const)
    if isinstance(f, Perturbed):
        return Perturbed(f.base, f.shift + z, f.linear + a, f.const + const + float(f.linear @ z))
    if isinstance(f, SeparableSum):
        return SeparableSum([perturb(p, z[[i]], a[[i]], const if i == 0 else 0.0) for i, p in enumerate(f.components)])
    return Perturbed(f, z, a, const)


class GridFunction(ConvexFunction):
    """
    A function known on finitely many nodes, read through the lower convex
    hull of its samples; +inf outside the hull of the finite nodes.
    """
    is_grid = True

    def __init__(self, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        super().__init__(nodes.shape[1])
        self.nodes = nodes
        self.values = np.asarray(values, dtype=float).ravel()
        self.envelope = LowerConvexEnvelope(self.nodes, self.values)
        self.box = (self.nodes.min(axis=0), self.nodes.max(axis=0))
        self.label = "grid"

    @classmethod
    def sample(cls, f: ConvexFunction, radius: float = config.GRID_RADIUS,
               resolution: int = config.GRID_RESOLUTION) -> "GridFunction":
        """Sample f on the box [-radius, radius]^n with resolution nodes per axis."""
        nodes = box_nodes(f.dim, radius, resolution)
        return cls(nodes, f.evaluate(nodes))

    def evaluate(self, X) -> np.ndarray:
        return self.envelope(self._batch(X))

    def conjugate(self) -> "MaxAffine":
        finite = np.isfinite(self.values)
        return MaxAffine(self.nodes[finite], self.values[finite], box=self.box)


class MaxAffine(ConvexFunction):
    """
    f(s) = max_j <a_j, s> - b_j, the exact conjugate of a grid function.

    When built from a grid over a box, slopes whose maximizing node lies
    on the box boundary are outside the range where the transform agrees
    with the conjugate of the untruncated function.
    """
    is_grid = True

    def __init__(self, slopes, offsets, box=None):
        slopes = np.asarray(slopes, dtype=float)
        if slopes.ndim == 1:
            slopes = slopes[:, None]
        super().__init__(slopes.shape[1])
        self.slopes = slopes
        self.offsets = np.asarray(offsets, dtype=float).ravel()
        self.box = box
        self.label = "max_affine"

    def _argmax(self, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.dim == 1:
            return legendre_1d(self.slopes[:, 0], self.offsets, S[:, 0])
        values = np.empty(len(S))
        index = np.empty(len(S), dtype=int)
        step = max(1, config.CHUNK_SIZE // max(1, len(self.offsets)))
        for start in range(0, len(S), step):
            block = S[start:start + step] @ self.slopes.T - self.offsets
            index[start:start + step] = np.argmax(block, axis=1)
            values[start:start + step] = block[np.arange(len(block)), index[start:start + step]]
        return values, index

    def valid_mask(self, S) -> np.ndarray:
        """True where the maximizing node is strictly inside the sampling box."""
        S = self._batch(S)
        if self.box is None:
            return np.ones(len(S), dtype=bool)
        _, index = self._argmax(S)
        node = self.slopes[index]
        lo, hi = self.box
        return np.all((node > lo) & (node < hi), axis=1)

    def evaluate(self, X, warn: bool = True) -> np.ndarray:
        S = self._batch(X)
        values, _ = self._argmax(S)
        if warn and self.box is not None and not np.all(self.valid_mask(S)):
            warnings.warn("grid conjugate evaluated outside its valid slope range", BoundaryTouchWarning, stacklevel=2)
        return values

    def conjugate(self) -> GridFunction:
        return GridFunction(self.slopes, self.offsets)

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        return max_affine_prox(self.slopes, self.offsets, v, _weights(weights, v))


class SeparableSum(ConvexFunction):
    """f(x) = sum_i f_i(x_i) for one-dimensional components f_i."""

    def __init__(self, components: Sequence[ConvexFunction]):
        components = list(components)
        if not components or any(c.dim != 1 for c in components):
            raise DimensionError("separable sums are built from one-dimensional components")
        super().__init__(len(components))
        self.components = components
        self.label = "separable_sum(" + ",".join(c.label for c in components) + ")"

    @property
    def is_grid(self):
        return any(c.is_grid for c in self.components)

    @property
    def is_polyhedral(self):
        return all(c.is_polyhedral for c in self.components)

    @property
    def has_closed_subdifferential(self):
        return all(c.has_closed_subdifferential for c in self.components)

    def evaluate(self, X) -> np.ndarray:
        X = self._batch(X)
        return ext_add(*[c.evaluate(X[:, [i]]) for i, c in enumerate(self.components)])

    def conjugate(self) -> "SeparableSum":
        return SeparableSum([c.conjugate() for c in self.components])

    def subdifferential(self, x) -> DualSet:
        x = _as_vector(x, "x")
        sets = [c.subdifferential(x[[i]]) for i, c in enumerate(self.components)]
        if any(s.is_empty() for s in sets):
            return DualSet.empty(self.dim)
        return DualSet(lo=np.concatenate([s.lo for s in sets]), hi=np.concatenate([s.hi for s in sets]))

    def prox(self, v, weights=1.0) -> np.ndarray:
        v = _as_vector(v, "v")
        w = _weights(weights, v)
        return np.concatenate([c.prox(v[[i]], w[[i]]) for i, c in enumerate(self.components)])

    def project_graph(self, x, xstar):
        pairs = [c.project_graph(x[[i]], xstar[[i]]) for i, c in enumerate(self.components)]
        return np.concatenate([p[0] for p in pairs]), np.concatenate([p[1] for p in pairs])


def abs_norm(n: int = 1) -> BoxSupport:
    return BoxSupport.abs_norm(n)


def box_nodes(n: int, radius: float, resolution: int) -> np.ndarray:
    """Cartesian grid of resolution points per axis over [-radius, radius]^n."""
    axis = np.linspace(-radius, radius, resolution)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def sample(f: ConvexFunction, radius: float = config.GRID_RADIUS, resolution: int = config.GRID_RESOLUTION) -> GridFunction:
    return GridFunction.sample(f, radius, resolution)


# --- Operations --- #

def conjugate(f: ConvexFunction) -> ConvexFunction:
    """The Fenchel conjugate f*(s) = sup_x <x, s> - f(x)."""
    return f.conjugate()


def fenchel_young_gap(f: ConvexFunction, p: PrimalDualPoint, fstar: Optional[ConvexFunction] = None) -> float:
    """f(x) + f*(x*) - <x, x*>; +inf when either term is infinite."""
    fstar = f.conjugate() if fstar is None else fstar
    fx, fsx = f(p.x), fstar(p.xstar)
    if not (np.isfinite(fx) and np.isfinite(fsx)):
        return np.inf
    return float(ext_add(fx, fsx, -p.duality_product()))


def eps_subdiff_test(f: ConvexFunction, p: PrimalDualPoint, eps: float, method: str = "conjugate",
                     radius: float = config.GRID_RADIUS, resolution: int = config.GRID_RESOLUTION,
                     tolerances: Optional[Tolerances] = None) -> bool:
    """
    x* in the eps-subdifferential of f at x.

    method="conjugate" compares the Fenchel-Young gap with eps;
    method="definition" checks f(y) >= f(x) + <y - x, x*> - eps on a grid
    of y around x (a necessary condition, exact on the grid).
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    tol = tolerances_for(f, override=tolerances)
    if method == "conjugate":
        return bool(fenchel_young_gap(f, p) <= eps + tol.dual)
    if method == "definition":
        fx = f(p.x)
        if not np.isfinite(fx):
            return False
        Y = box_nodes(f.dim, radius, resolution) + p.x
        lhs = f.evaluate(Y)
        rhs = fx + (Y - p.x) @ p.xstar - eps - tol.dual
        return bool(np.all(lhs >= rhs))
    raise ValueError(f"unknown method '{method}'")


@dataclass
class DualitySolveReport:
    """Both sides of inf f + g = max -f*(-s) - g*(s)."""
    primal_value: float
    dual_value: float
    dual_maximizer: np.ndarray
    gap: float
    primal_minimizer: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "closed_form"
    tolerance_class: str = "strict"

    def to_dict(self) -> dict:
        return {
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "dual_maximizer": self.dual_maximizer.tolist(),
            "primal_minimizer": self.primal_minimizer.tolist(),
            "gap": self.gap,
            "method": self.method,
            "tolerance_class": self.tolerance_class,
        }


def _lattice(n: int, radius: float, resolution: int) -> np.ndarray:
    per_axis = {1: resolution, 2: min(resolution, 201), 3: min(resolution, 41)}.get(n, 11)
    return box_nodes(n, radius, per_axis)


def qualification_point(f: ConvexFunction, g: ConvexFunction, radius: float = config.DUALITY_RADIUS,
                        resolution: int = 41) -> Optional[np.ndarray]:
    """A lattice point where g is finite and f is finite on a neighborhood."""
    X = box_nodes(f.dim, radius, resolution)
    ok = np.isfinite(f.evaluate(X)) & np.isfinite(g.evaluate(X))
    delta = radius / (resolution - 1)
    for i in range(f.dim):
        for sign in (1.0, -1.0):
            shifted = X.copy()
            shifted[:, i] += sign * delta
            ok &= np.isfinite(f.evaluate(shifted))
    hits = np.flatnonzero(ok)
    return X[hits[0]] if len(hits) else None


def _dual_objective(fstar, gstar, s) -> float:
    s = np.atleast_1d(s)
    a, b = fstar(-s), gstar(s)
    if not (np.isfinite(a) and np.isfinite(b)):
        return -np.inf
    return -a - b


def _polish_dual(fstar, gstar, start) -> Tuple[float, np.ndarray]:
    res = minimize(lambda s: -_dual_objective(fstar, gstar, s) if np.isfinite(_dual_objective(fstar, gstar, s)) else 1e300,
                   start, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    value = _dual_objective(fstar, gstar, res.x)
    start_value = _dual_objective(fstar, gstar, start)
    if start_value >= value:
        return start_value, np.asarray(start, dtype=float)
    return value, res.x


def fenchel_duality(f: ConvexFunction, g: ConvexFunction, radius: float = config.DUALITY_RADIUS,
                    resolution: int = config.DUALITY_RESOLUTION, tolerances: Optional[Tolerances] = None,
                    n_jobs: Optional[int] = None) -> DualitySolveReport:
    """
    Solve inf_x f(x) + g(x) and max_s -f*(-s) - g*(s).

    Quadratic pairs are solved in closed form. Otherwise the primal is
    minimized on a lattice and polished; the dual maximizer is read from
    the subdifferentials at the primal solution, with a multi-start slope
    search as fallback.

    Raises:
        QualificationError: no point where g is finite and f is locally bounded
    """
    if f.dim != g.dim:
        raise DimensionError(f"f has dimension {f.dim}, g has dimension {g.dim}")
    tol = tolerances_for(f, g, override=tolerances)
    n = f.dim
    if qualification_point(f, g, radius) is None:
        raise QualificationError("no lattice point where g is finite and f is finite nearby")
    fstar, gstar = f.conjugate(), g.conjugate()

    if isinstance(f, Quadratic) and isinstance(g, Quadratic) and np.min(np.linalg.eigvalsh(f.A + g.A)) > 1e-12:
        x_bar = np.linalg.solve(f.A + g.A, -(f.b + g.b))
        method = "closed_form"
    else:
        X = _lattice(n, radius, resolution)
        values = ext_add(f.evaluate(X), g.evaluate(X))
        x_bar = X[int(np.argmin(values))]
        res = minimize(lambda x: f(x) + g(x), x_bar, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if np.isfinite(res.fun) and res.fun < f(x_bar) + g(x_bar):
            x_bar = res.x
        method = "lattice"
    primal = float(f(x_bar) + g(x_bar))

    s_bar, dual = None, -np.inf
    try:
        dg, df = g.subdifferential(x_bar), f.subdifferential(x_bar)
        lo, hi = np.maximum(dg.lo, -df.hi), np.minimum(dg.hi, -df.lo)
        if not (dg.is_empty() or df.is_empty()) and np.all(lo <= hi + 1e-7):
            s_bar = np.clip(np.zeros(n), np.minimum(lo, hi), np.maximum(lo, hi))
            dual = _dual_objective(fstar, gstar, s_bar)
    except (NotImplementedError, AttributeError):
        logger.debug("no closed subdifferential at the primal solution; searching slopes")

    if s_bar is None or not dual >= primal - tol.dual:
        S = _lattice(n, radius, resolution)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryTouchWarning)
            scores = np.array([_dual_objective(fstar, gstar, s) for s in S])
            order = np.argsort(-scores, kind="stable")[:config.MULTISTART_STARTS]
            results = Parallel(n_jobs=n_jobs or config.N_JOBS)(
                delayed(_polish_dual)(fstar, gstar, S[i]) for i in order)
        # best value, ties broken by lexicographic point order
        value, s_best = max(results, key=lambda r: (r[0], tuple(-r[1])))
        if value > dual:
            dual, s_bar = value, s_best
        method += "+slope_search"

    gap = primal - dual
    if abs(gap) > tol.dual:
        logger.warning("Fenchel duality gap %.3g exceeds tolerance %.1g", gap, tol.dual)
    return DualitySolveReport(primal, float(dual), np.asarray(s_bar, dtype=float), float(gap),
                              np.asarray(x_bar, dtype=float), method, tol.name)
