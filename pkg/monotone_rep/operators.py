"""
Monotone operators on R^n: primal-dual points, the operator catalogue,
graph lookups and projections, monotonicity and epsilon-enlargement tests.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import GRID, Tolerances, tolerances_for
from .errors import ConvexityError, DimensionError

logger = logging.getLogger(__name__)


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class PrimalDualPoint:
    """A pair (x, x*) in R^n x R^n, the dual identified with R^n."""
    x: np.ndarray
    xstar: np.ndarray

    def __post_init__(self):
        x = _as_vector(self.x, "x").copy()
        xstar = _as_vector(self.xstar, "xstar").copy()
        if x.shape != xstar.shape:
            raise DimensionError(f"x has dimension {x.size} but xstar has dimension {xstar.size}")
        x.setflags(write=False)
        xstar.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xstar", xstar)

    @property
    def dim(self) -> int:
        return self.x.size

    def duality_product(self) -> float:
        return float(self.x @ self.xstar)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.xstar])

    @classmethod
    def from_vector(cls, v) -> "PrimalDualPoint":
        v = _as_vector(v, "point")
        if v.size % 2:
            raise DimensionError(f"a primal-dual vector needs even length, got {v.size}")
        n = v.size // 2
        return cls(v[:n], v[n:])

    @classmethod
    def origin(cls, n: int) -> "PrimalDualPoint":
        return cls(np.zeros(n), np.zeros(n))

    def __add__(self, other: "PrimalDualPoint") -> "PrimalDualPoint":
        return PrimalDualPoint(self.x + other.x, self.xstar + other.xstar)

    def __sub__(self, other: "PrimalDualPoint") -> "PrimalDualPoint":
        return PrimalDualPoint(self.x - other.x, self.xstar - other.xstar)

    def allclose(self, other: "PrimalDualPoint", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.x, other.x, atol=tol, rtol=0) and np.allclose(self.xstar, other.xstar, atol=tol, rtol=0))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "xstar": self.xstar.tolist()}

    def __repr__(self) -> str:
        return f"PrimalDualPoint(x={self.x.tolist()}, xstar={self.xstar.tolist()})"


def duality_product(p: PrimalDualPoint) -> float:
    """<x, x*> for p = (x, x*)."""
    return p.duality_product()


def pairing(X: np.ndarray, XS: np.ndarray) -> np.ndarray:
    """Row-wise duality product of two (k, n) arrays."""
    return np.einsum("ij,ij->i", np.atleast_2d(X), np.atleast_2d(XS))


@dataclass
class DualSet:
    """
    A set of dual vectors: either a box [lo, hi] (bounds may be infinite)
    or a finite list of points. An empty box has some lo_i > hi_i.
    """
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None

    @classmethod
    def singleton(cls, v) -> "DualSet":
        v = _as_vector(v, "v")
        return cls(lo=v.copy(), hi=v.copy())

    @classmethod
    def empty(cls, n: int) -> "DualSet":
        return cls(points=np.zeros((0, n)))

    @property
    def is_box(self) -> bool:
        return self.points is None

    def is_empty(self) -> bool:
        if self.is_box:
            return bool(np.any(self.lo > self.hi))
        return len(self.points) == 0

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = _as_vector(v, "v")
        if self.is_box:
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        if self.is_empty():
            return False
        return bool(np.min(np.max(np.abs(self.points - v), axis=1)) <= tol)

    def representatives(self) -> np.ndarray:
        """A few elements: the points themselves, or finite corners and the center of a box."""
        if not self.is_box:
            return self.points
        if self.is_empty():
            return np.zeros((0, self.lo.size))
        lo = np.where(np.isfinite(self.lo), self.lo, np.where(np.isfinite(self.hi), self.hi - 1.0, 0.0))
        hi = np.where(np.isfinite(self.hi), self.hi, lo + 1.0)
        cands = np.vstack([lo, hi, 0.5 * (lo + hi)])
        return np.unique(cands, axis=0)

    def to_dict(self) -> dict:
        if self.is_box:
            return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}
        return {"points": self.points.tolist()}


@dataclass
class MonotonicityResult:
    monotone: bool
    witness: Optional[Tuple[PrimalDualPoint, PrimalDualPoint]] = None
    min_product: float = 0.0


def monotonicity_check(points: Sequence[PrimalDualPoint], tol: Optional[float] = None) -> MonotonicityResult:
    """
    Check <x - y, x* - y*> >= -tol over all pairs of a finite graph.

    Args:
        points: nonempty list of PrimalDualPoint of one dimension
        tol: slack, defaults to the sampled-graph tolerance

    Returns:
        MonotonicityResult with the first violating pair (row-major order)
    """
    if not points:
        raise ValueError("monotonicity_check needs at least one point")
    dims = {p.dim for p in points}
    if len(dims) != 1:
        raise DimensionError(f"mixed dimensions in graph sample: {sorted(dims)}")
    tol = GRID.mono if tol is None else tol
    X = np.array([p.x for p in points])
    XS = np.array([p.xstar for p in points])
    pi = pairing(X, XS)
    cross = X @ XS.T
    products = pi[:, None] + pi[None, :] - cross - cross.T
    upper = np.triu(np.ones_like(products, dtype=bool), k=1)
    if not np.any(upper):
        return MonotonicityResult(True, None, 0.0)
    masked = np.where(upper, products, np.inf)
    min_product = float(masked.min())
    bad = np.argwhere(upper & (products < -tol))
    if len(bad) == 0:
        return MonotonicityResult(True, None, min_product)
    i, j = bad[0]
    return MonotonicityResult(False, (points[i], points[j]), float(products[i, j]))


def _project_to_polyline(vertices: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Nearest point of a planar polyline whose end vertices may be infinite (rays)."""
    best, best_d = None, np.inf
    for a, b in zip(vertices[:-1], vertices[1:]):
        if np.all(np.isfinite(a)) and np.all(np.isfinite(b)):
            seg = b - a
            t = np.clip((point - a) @ seg / max(seg @ seg, 1e-300), 0.0, 1.0)
            cand = a + t * seg
        else:
            finite, other = (a, b) if np.all(np.isfinite(a)) else (b, a)
            direction = np.where(np.isinf(other), np.sign(other), 0.0)
            direction = direction / np.linalg.norm(direction)
            t = max(0.0, float((point - finite) @ direction))
            cand = finite + t * direction
        d = np.linalg.norm(cand - point)
        if d < best_d:
            best, best_d = cand, d
    return best


class MonotoneOperator:
    """
    A monotone operator T: R^n => R^n.

    Kinds: "affine" (x -> Ax + b, A + A^T positive semidefinite),
    "subdifferential" (the subdifferential of a catalogue ConvexFunction)
    and "sampled_graph" (a finite monotone list of PrimalDualPoint).
    Identity, zero and the planar rotation are affine with a label.
    """

    def __init__(self, kind: str, dim: int, A=None, b=None, function=None, points=None, label: Optional[str] = None):
        self.kind = kind
        self.dim = dim
        self.A = A
        self.b = b
        self.function = function
        self.points: List[PrimalDualPoint] = list(points) if points is not None else []
        self.label = label or kind

    # --- Constructors --- #
    @classmethod
    def affine(cls, A, b=None, label: Optional[str] = None, tol: float = 1e-9) -> "MonotoneOperator":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"affine operator needs a square matrix, got {A.shape}")
        b = np.zeros(n) if b is None else _as_vector(b, "b")
        if b.size != n:
            raise DimensionError(f"offset has dimension {b.size}, matrix has {n}")
        smallest = float(np.min(np.linalg.eigvalsh(A + A.T)))
        if smallest < -tol:
            raise ConvexityError(f"A + A^T is not positive semidefinite (smallest eigenvalue {smallest:.3g})")
        return cls("affine", n, A=A, b=b, label=label)

    @classmethod
    def identity(cls, n: int = 1) -> "MonotoneOperator":
        return cls.affine(np.eye(n), label="identity")

    @classmethod
    def zero(cls, n: int = 1) -> "MonotoneOperator":
        return cls.affine(np.zeros((n, n)), label="zero")

    @classmethod
    def rotation2d(cls) -> "MonotoneOperator":
        return cls.affine(np.array([[0.0, -1.0], [1.0, 0.0]]), label="rotation2d")

    @classmethod
    def subdifferential(cls, f) -> "MonotoneOperator":
        if not getattr(f, "has_closed_subdifferential", False):
            raise ConvexityError(f"no closed-form subdifferential for {type(f).__name__}")
        return cls("subdifferential", f.dim, function=f, label=f"subdifferential({f.label})")

    @classmethod
    def sampled_graph(cls, points: Sequence[PrimalDualPoint], tol: Optional[float] = None) -> "MonotoneOperator":
        points = list(points)
        tol = GRID.mono if tol is None else tol
        result = monotonicity_check(points, tol)
        if not result.monotone:
            a, b = result.witness
            raise ConvexityError(f"sampled graph is not monotone: {a} and {b} pair to {result.min_product:.3g}")
        return cls("sampled_graph", points[0].dim, points=points)

    @classmethod
    def sample_of(cls, T: "MonotoneOperator", xs: np.ndarray) -> "MonotoneOperator":
        """Sampled graph of T over the primal points xs (rows)."""
        return cls.sampled_graph(T.sample_graph(xs))

    # --- Properties --- #
    @property
    def is_grid(self) -> bool:
        return self.kind == "sampled_graph"

    @property
    def is_sampled(self) -> bool:
        return self.kind == "sampled_graph"

    def graph_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([p.x for p in self.points]), np.array([p.xstar for p in self.points])

    def _check(self, x) -> np.ndarray:
        x = _as_vector(x, "x")
        if x.size != self.dim:
            raise DimensionError(f"point has dimension {x.size}, operator has {self.dim}")
        return x

    # --- Evaluation --- #
    def evaluate(self, x, tol: float = 1e-9) -> DualSet:
        """T(x) as a DualSet (possibly empty)."""
        x = self._check(x)
        if self.kind == "affine":
            return DualSet.singleton(self.A @ x + self.b)
        if self.kind == "subdifferential":
            return self.function.subdifferential(x)
        X, XS = self.graph_arrays()
        match = np.max(np.abs(X - x), axis=1) <= tol
        return DualSet(points=XS[match])

    def sample_graph(self, xs: np.ndarray) -> List[PrimalDualPoint]:
        """Graph points over the primal points xs; nonsmooth points contribute several duals."""
        out = []
        for x in np.atleast_2d(np.asarray(xs, dtype=float)):
            for xstar in self.evaluate(x).representatives():
                out.append(PrimalDualPoint(x, xstar))
        return out

    def on_graph(self, p: PrimalDualPoint, tol: float = 1e-9) -> bool:
        return self.evaluate(p.x, tol).contains(p.xstar, tol)

    def project(self, p: PrimalDualPoint) -> Tuple[PrimalDualPoint, float]:
        """Nearest graph point to p (Euclidean on R^n x R^n) and its distance."""
        if p.dim != self.dim:
            raise DimensionError(f"point has dimension {p.dim}, operator has {self.dim}")
        if self.kind == "affine":
            A, b = self.A, self.b
            y = np.linalg.solve(np.eye(self.dim) + A.T @ A, p.x + A.T @ (p.xstar - b))
            q = PrimalDualPoint(y, A @ y + b)
        elif self.kind == "subdifferential":
            y, ystar = self.function.project_graph(p.x, p.xstar)
            q = PrimalDualPoint(y, ystar)
        else:
            X, XS = self.graph_arrays()
            d = np.linalg.norm(X - p.x, axis=1) ** 2 + np.linalg.norm(XS - p.xstar, axis=1) ** 2
            q = self.points[int(np.argmin(d))]
        return q, float(np.linalg.norm((q - p).as_vector()))

    # --- Enlargement --- #
    def enlargement_inf(self, p: PrimalDualPoint) -> Tuple[float, Optional[PrimalDualPoint]]:
        """
        inf over the graph of <x - y, x* - y*>, with a graph point attaining it.

        Uses inf = <x, x*> - phi_T(x, x*). Unbounded below gives -inf.
        """
        from .representations import fitzpatrick

        if self.kind == "sampled_graph":
            X, XS = self.graph_arrays()
            prods = pairing(p.x - X, p.xstar - XS)
            j = int(np.argmin(prods))
            return float(prods[j]), self.points[j]
        value = p.duality_product() - fitzpatrick(self)(p)
        return float(value), self._enlargement_witness(p)

    def _enlargement_witness(self, p: PrimalDualPoint) -> Optional[PrimalDualPoint]:
        if self.kind == "affine":
            S = self.A + self.A.T
            v = self.A.T @ p.x + p.xstar - self.b
            y = np.linalg.pinv(S) @ v
            return PrimalDualPoint(y, self.A @ y + self.b)
        # piecewise kinds: best graph point on a local lattice around x
        offsets = np.linspace(-2.0, 2.0, 81)
        grids = np.meshgrid(*([offsets] * self.dim), indexing="ij") if self.dim <= 2 else None
        if grids is None:
            return None
        xs = np.column_stack([g.ravel() for g in grids]) + p.x
        graph = self.sample_graph(xs)
        prods = [float((p.x - q.x) @ (p.xstar - q.xstar)) for q in graph]
        return graph[int(np.argmin(prods))] if graph else None

    def __repr__(self) -> str:
        return f"MonotoneOperator({self.label}, n={self.dim})"


@dataclass
class EnlargementResult:
    contains: bool
    inf_value: float
    witness: Optional[PrimalDualPoint] = None
    tolerance_class: str = field(default="strict")


def operator_eval(T: MonotoneOperator, x) -> DualSet:
    """Point-to-set evaluation T(x)."""
    return T.evaluate(x)


def eps_enlargement_test(T: MonotoneOperator, p: PrimalDualPoint, eps: float,
                         tolerances: Optional[Tolerances] = None) -> EnlargementResult:
    """
    Membership of p in the epsilon-enlargement T^eps.

    Returns:
        EnlargementResult with the graph infimum of <x - y, x* - y*> and
        contains = inf >= -eps - tol_mono (False when the infimum is -inf)
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    tol = tolerances_for(T, override=tolerances)
    value, witness = T.enlargement_inf(p)
    contains = bool(np.isfinite(value) and value >= -eps - tol.mono)
    return EnlargementResult(contains, value, witness, tol.name)
