"""
Convex bifunctions h(x, x*) on R^n x R^n representing monotone operators.

Conjugates always take their arguments in the order (x*, x**): the
conjugate of h is again a Bifunction whose first slot pairs with x and
whose second slot pairs with x*.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from . import config
from .config import Tolerances, tolerances_for
from .convexfn import (BoxIndicator, BoxSupport, ConvexFunction, GridFunction,
                       MaxAffine, Perturbed, Quadratic, SeparableSum, box_nodes, perturb)
from .errors import (BoundaryTouchWarning, ConvexityError, DimensionError,
                     LowerBoundWarning, PreconditionError)
from .extended import ext_add
from .operators import MonotoneOperator, PrimalDualPoint, _as_vector, monotonicity_check, pairing

logger = logging.getLogger(__name__)

PointLike = Union[PrimalDualPoint, np.ndarray, Sequence[float]]


def _as_point(p: PointLike) -> PrimalDualPoint:
    return p if isinstance(p, PrimalDualPoint) else PrimalDualPoint.from_vector(p)


def _swap(u: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([u[n:], u[:n]])


class Bifunction:
    """
    Base class of the representation kinds.

    Subclasses implement evaluate on batches, conjugate and prox; they may
    also expose the represented operator and a closed-form translation.
    """
    is_grid = False
    lower_bound = False
    label = "h"

    def __init__(self, dim: int):
        self.dim = dim

    def evaluate(self, X: np.ndarray, XS: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _split(self, X, XS=None):
        if XS is None:
            U = np.atleast_2d(np.asarray(X, dtype=float))
            if U.shape[1] != 2 * self.dim:
                raise DimensionError(f"points have length {U.shape[1]}, expected {2 * self.dim}")
            return U[:, :self.dim], U[:, self.dim:]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        XS = np.atleast_2d(np.asarray(XS, dtype=float))
        if X.shape[1] != self.dim or XS.shape != X.shape:
            raise DimensionError(f"points of shape {X.shape} and {XS.shape} for a bifunction of dimension {self.dim}")
        return X, XS

    def __call__(self, p: PointLike) -> float:
        p = _as_point(p)
        if p.dim != self.dim:
            raise DimensionError(f"point has dimension {p.dim}, bifunction has {self.dim}")
        return float(self.evaluate(p.x[None, :], p.xstar[None, :])[0])

    def values(self, U: np.ndarray) -> np.ndarray:
        """Evaluate on stacked rows (x, x*)."""
        return self.evaluate(*self._split(U))

    def gaps(self, U: np.ndarray) -> np.ndarray:
        """h - pi on stacked rows."""
        X, XS = self._split(U)
        return ext_add(self.evaluate(X, XS), -pairing(X, XS))

    def gap(self, p: PointLike) -> float:
        p = _as_point(p)
        return float(ext_add(self(p), -p.duality_product()))

    def valid_mask(self, X, XS) -> np.ndarray:
        """Rows where grid-derived values are trusted; all rows for closed forms."""
        return np.ones(len(np.atleast_2d(X)), dtype=bool)

    def conjugate(self) -> "Bifunction":
        raise NotImplementedError(f"no conjugate for {type(self).__name__}")

    def prox(self, v, weights=1.0) -> np.ndarray:
        """argmin_u h(u) + 1/2 sum_i w_i (u_i - v_i)^2 over stacked u = (x, x*)."""
        raise NotImplementedError(f"no proximal map for {type(self).__name__}")

    def operator(self) -> Optional[MonotoneOperator]:
        return None

    def translated_closed_form(self, z: np.ndarray, zstar: np.ndarray) -> Optional["Bifunction"]:
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label}, n={self.dim})"


def moreau_prox(conj: Bifunction, v, weights) -> np.ndarray:
    """prox of h with weights W through its conjugate: v - W^-1 prox_{h*}^{W^-1}(W v)."""
    v = _as_vector(v, "v")
    w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
    return v - conj.prox(w * v, 1.0 / w) / w


class SeparableBifunction(Bifunction):
    """h(x, x*) = f(x) + g(x*) + offset; with g = f* it represents the subdifferential of f."""

    def __init__(self, f: ConvexFunction, g: Optional[ConvexFunction] = None, offset: float = 0.0,
                 operator: Optional[MonotoneOperator] = None):
        super().__init__(f.dim)
        self.f = f
        self.g = f.conjugate() if g is None else g
        if self.g.dim != f.dim:
            raise DimensionError(f"summands have dimensions {f.dim} and {self.g.dim}")
        self.offset = float(offset)
        if operator is None and g is None and f.has_closed_subdifferential:
            operator = MonotoneOperator.subdifferential(f)
        self._operator = operator
        self.label = f"separable({f.label})"

    @property
    def is_grid(self):
        return self.f.is_grid or self.g.is_grid

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        return ext_add(self.f.evaluate(X), self.g.evaluate(XS), self.offset)

    def valid_mask(self, X, XS):
        X, XS = self._split(X, XS)
        mask = np.ones(len(X), dtype=bool)
        for fn, arg in ((self.f, X), (self.g, XS)):
            if isinstance(fn, MaxAffine):
                mask &= fn.valid_mask(arg)
        return mask

    def conjugate(self):
        return SeparableBifunction(self.f.conjugate(), self.g.conjugate(), -self.offset)

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        n = self.dim
        return np.concatenate([self.f.prox(v[:n], w[:n]), self.g.prox(v[n:], w[n:])])

    def operator(self):
        return self._operator

    def translated_closed_form(self, z, zstar):
        return SeparableBifunction(perturb(self.f, z, -zstar), perturb(self.g, zstar, -z),
                                   self.offset - float(z @ zstar))


class QuadraticForm(Bifunction):
    """h(u) = 1/2 u^T Q u + q^T u + c on u = (x, x*); Q may be indefinite."""

    def __init__(self, Q, q=None, c: float = 0.0, label: str = "quadratic_form"):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        m = Q.shape[0]
        if Q.shape != (m, m) or m % 2:
            raise DimensionError(f"quadratic form needs an even square matrix, got {Q.shape}")
        super().__init__(m // 2)
        self.Q = 0.5 * (Q + Q.T)
        self.q = np.zeros(m) if q is None else _as_vector(q, "q")
        self.c = float(c)
        self.label = label
        self._eig = np.linalg.eigvalsh(self.Q)

    @classmethod
    def pairing(cls, n: int = 1, shift: float = 0.0) -> "QuadraticForm":
        """pi(x, x*) + shift."""
        eye = np.eye(n)
        Q = np.block([[np.zeros((n, n)), eye], [eye, np.zeros((n, n))]])
        return cls(Q, c=shift, label="pairing" if shift == 0 else f"pairing{shift:+g}")

    @property
    def is_convex(self) -> bool:
        return bool(self._eig[0] >= -1e-12 * max(1.0, abs(self._eig[-1])))

    def evaluate(self, X, XS):
        U = np.hstack(self._split(X, XS))
        return 0.5 * np.einsum("ij,jk,ik->i", U, self.Q, U) + U @ self.q + self.c

    def conjugate(self):
        return QuadraticConjugate(self)

    def prox(self, v, weights=1.0):
        if not self.is_convex:
            raise ConvexityError("proximal map of a nonconvex quadratic form")
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        return np.linalg.solve(self.Q + np.diag(w), w * v - self.q)

    def translated_closed_form(self, z, zstar):
        d = np.concatenate([z, zstar])
        dt = np.concatenate([zstar, z])
        return QuadraticForm(self.Q, self.Q @ d + self.q - dt,
                             0.5 * d @ self.Q @ d + self.q @ d + self.c - float(z @ zstar), self.label)


class QuadraticConjugate(Bifunction):
    """
    Conjugate of a QuadraticForm: 1/2 (w - q)^T Q^+ (w - q) - c on the
    affine range of Q, +inf elsewhere; identically +inf when Q is indefinite.
    """

    def __init__(self, form: QuadraticForm, range_tol: float = 1e-9):
        super().__init__(form.dim)
        self.form = form
        self.range_tol = range_tol
        self._pinv = np.linalg.pinv(form.Q, hermitian=True)
        self._proj = np.eye(2 * self.dim) - form.Q @ self._pinv
        self.label = f"conjugate({form.label})"

    def evaluate(self, X, XS):
        W = np.hstack(self._split(X, XS))
        if not self.form.is_convex:
            return np.full(len(W), np.inf)
        R = W - self.form.q
        resid = np.linalg.norm(R @ self._proj, axis=1)
        inside = resid <= self.range_tol * (1.0 + np.linalg.norm(R, axis=1))
        vals = 0.5 * np.einsum("ij,jk,ik->i", R, self._pinv, R) - self.form.c
        return np.where(inside, vals, np.inf)

    def conjugate(self):
        if not self.form.is_convex:
            raise ConvexityError("biconjugate of a nonconvex quadratic form is not the form itself")
        return self.form

    def prox(self, v, weights=1.0):
        return moreau_prox(self.form, v, weights)


class AffineSigma(Bifunction):
    """sigma_T = pi + indicator of the graph of x -> Ax + b."""

    def __init__(self, A, b, operator: Optional[MonotoneOperator] = None, tol: float = 1e-9):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(self.A.shape[0])
        self.b = _as_vector(b, "b")
        self.tol = tol
        self._operator = operator or MonotoneOperator.affine(self.A, self.b)
        self.label = f"sigma({self._operator.label})"

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        resid = np.linalg.norm(XS - X @ self.A.T - self.b, axis=1)
        on_graph = resid <= self.tol * (1.0 + np.linalg.norm(XS, axis=1))
        return np.where(on_graph, pairing(X, XS), np.inf)

    def conjugate(self):
        return TransposedBifunction(AffineFitzpatrick(self.A, self.b, self._operator, self.tol))

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        n, A, b = self.dim, self.A, self.b
        w1, w2 = w[:n], w[n:]
        lhs = A + A.T + np.diag(w1) + A.T @ np.diag(w2) @ A
        rhs = w1 * v[:n] + A.T @ (w2 * (v[n:] - b)) - b
        x = np.linalg.solve(lhs, rhs)
        return np.concatenate([x, A @ x + b])

    def operator(self):
        return self._operator


class AffineFitzpatrick(Bifunction):
    """
    Fitzpatrick function of x -> Ax + b:
    phi(x, x*) = <x, b> + 1/2 v^T S^+ v with v = A^T x + x* - b and S = A + A^T,
    +inf when v leaves the range of S.
    """

    def __init__(self, A, b, operator: Optional[MonotoneOperator] = None, tol: float = 1e-9):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(self.A.shape[0])
        self.b = _as_vector(b, "b")
        self.tol = tol
        self.S = self.A + self.A.T
        self._pinv = np.linalg.pinv(self.S, hermitian=True)
        self._proj = np.eye(self.dim) - self.S @ self._pinv
        self._operator = operator or MonotoneOperator.affine(self.A, self.b)
        self.label = f"fitzpatrick({self._operator.label})"

    @property
    def nonsingular(self) -> bool:
        return bool(np.linalg.matrix_rank(self.S) == self.dim)

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        V = X @ self.A + XS - self.b
        resid = np.linalg.norm(V @ self._proj, axis=1)
        inside = resid <= self.tol * (1.0 + np.linalg.norm(V, axis=1))
        vals = X @ self.b + 0.5 * np.einsum("ij,jk,ik->i", V, self._pinv, V)
        return np.where(inside, vals, np.inf)

    def as_quadratic_form(self) -> QuadraticForm:
        """The same function written as a quadratic form (S nonsingular)."""
        Sinv = np.linalg.inv(self.S)
        M = np.hstack([self.A.T, np.eye(self.dim)])
        q = np.concatenate([self.b, np.zeros(self.dim)]) - M.T @ Sinv @ self.b
        return QuadraticForm(M.T @ Sinv @ M, q, 0.5 * self.b @ Sinv @ self.b, label=self.label)

    def _sigma_transposed(self) -> "TransposedBifunction":
        return TransposedBifunction(AffineSigma(self.A, self.b, self._operator, self.tol))

    def conjugate(self):
        if self.nonsingular:
            return QuadraticConjugate(self.as_quadratic_form())
        return self._sigma_transposed()

    def prox(self, v, weights=1.0):
        return moreau_prox(self._sigma_transposed(), v, weights)

    def operator(self):
        return self._operator


class MaxAffineBifunction(Bifunction):
    """h(u) = max_j <a_j, u> - b_j on stacked u = (x, x*)."""
    is_grid = True

    def __init__(self, slopes, offsets, box=None, lower_bound: bool = False,
                 operator: Optional[MonotoneOperator] = None, label: str = "max_affine"):
        self.fn = MaxAffine(slopes, offsets, box)
        if self.fn.dim % 2:
            raise DimensionError("max-affine bifunction needs slopes of even length")
        super().__init__(self.fn.dim // 2)
        self.lower_bound = lower_bound
        self._operator = operator
        self.label = label

    def evaluate(self, X, XS):
        U = np.hstack(self._split(X, XS))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryTouchWarning)
            return self.fn.evaluate(U, warn=False)

    def valid_mask(self, X, XS):
        return self.fn.valid_mask(np.hstack(self._split(X, XS)))

    def conjugate(self):
        return GridBifunction(self.fn.slopes, self.fn.offsets, label=f"conjugate({self.label})")

    def prox(self, v, weights=1.0):
        return self.fn.prox(v, weights)

    def operator(self):
        return self._operator

    def translated_closed_form(self, z, zstar):
        d = np.concatenate([z, zstar])
        dt = np.concatenate([zstar, z])
        return MaxAffineBifunction(self.fn.slopes - dt, self.fn.offsets - self.fn.slopes @ d + float(z @ zstar),
                                   None, self.lower_bound, None, self.label)


class GridBifunction(Bifunction):
    """A bifunction known on nodes of R^n x R^n, read through the lower convex hull of its samples."""
    is_grid = True

    def __init__(self, nodes, values, operator: Optional[MonotoneOperator] = None, label: str = "grid"):
        self.fn = GridFunction(nodes, values)
        if self.fn.dim % 2:
            raise DimensionError("grid bifunction needs nodes of even length")
        super().__init__(self.fn.dim // 2)
        self._operator = operator
        self.label = label

    @property
    def nodes(self) -> np.ndarray:
        return self.fn.nodes

    @property
    def raw_values(self) -> np.ndarray:
        return self.fn.values

    @classmethod
    def sample(cls, h: Bifunction, radius: float = config.GRID_RADIUS,
               resolution: int = config.GRID_RESOLUTION) -> "GridBifunction":
        nodes = box_grid(h.dim, radius, resolution)
        return cls(nodes, h.values(nodes), label=f"grid({h.label})")

    def evaluate(self, X, XS):
        return self.fn.evaluate(np.hstack(self._split(X, XS)))

    def conjugate(self):
        conj = self.fn.conjugate()
        return MaxAffineBifunction(conj.slopes, conj.offsets, conj.box, label=f"conjugate({self.label})")

    def prox(self, v, weights=1.0):
        return self.fn.prox(v, weights)

    def operator(self):
        return self._operator

    def translated_closed_form(self, z, zstar):
        d = np.concatenate([z, zstar])
        dt = np.concatenate([zstar, z])
        nodes = self.nodes - d
        return GridBifunction(nodes, self.raw_values - nodes @ dt - float(z @ zstar), label=self.label)


class TranslatedBifunction(Bifunction):
    """h_(z,z*)(x, x*) = h(x + z, x* + z*) - [<x, z*> + <z, x*> + <z, z*>], evaluated lazily."""

    def __init__(self, base: Bifunction, z, zstar):
        super().__init__(base.dim)
        self.base = base
        self.z = _as_vector(z, "z")
        self.zstar = _as_vector(zstar, "zstar")
        if self.z.size != base.dim or self.zstar.size != base.dim:
            raise DimensionError(f"translation by vectors of dimension {self.z.size}/{self.zstar.size}, bifunction has {base.dim}")
        self.label = f"translated({base.label})"

    @property
    def is_grid(self):
        return self.base.is_grid

    @property
    def lower_bound(self):
        return self.base.lower_bound

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        correction = X @ self.zstar + XS @ self.z + float(self.z @ self.zstar)
        return ext_add(self.base.evaluate(X + self.z, XS + self.zstar), -correction)

    def valid_mask(self, X, XS):
        X, XS = self._split(X, XS)
        return self.base.valid_mask(X + self.z, XS + self.zstar)

    def materialize(self) -> Bifunction:
        """The closed-form translated bifunction when the base kind allows one."""
        return self.base.translated_closed_form(self.z, self.zstar) or self

    def conjugate(self):
        closed = self.base.translated_closed_form(self.z, self.zstar)
        if closed is not None:
            return closed.conjugate()
        return TranslatedBifunction(self.base.conjugate(), self.zstar, self.z)

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        d = np.concatenate([self.z, self.zstar])
        dt = np.concatenate([self.zstar, self.z])
        return self.base.prox(v + d + dt / w, w) - d


class ScaledBifunction(Bifunction):
    """
    h in re-normed coordinates x' = s x, x*' = x* / s:
    h_s(x', x*') = h(x' / s, s x*'). The duality product is unchanged.
    """

    def __init__(self, base: Bifunction, s: float):
        if not s > 0:
            raise ValueError(f"norm weight must be positive, got {s}")
        super().__init__(base.dim)
        self.base = base
        self.s = float(s)
        self.label = f"scaled({base.label})"

    @property
    def is_grid(self):
        return self.base.is_grid

    @property
    def lower_bound(self):
        return self.base.lower_bound

    def _diag(self) -> np.ndarray:
        return np.concatenate([np.full(self.dim, 1.0 / self.s), np.full(self.dim, self.s)])

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        return self.base.evaluate(X / self.s, XS * self.s)

    def valid_mask(self, X, XS):
        X, XS = self._split(X, XS)
        return self.base.valid_mask(X / self.s, XS * self.s)

    def conjugate(self):
        return ScaledBifunction(self.base.conjugate(), 1.0 / self.s)

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        D = self._diag()
        return self.base.prox(D * v, w / D ** 2) / D


class TransposedBifunction(Bifunction):
    """h_t(x, x*) = h(x*, x): the explicit argument swap between h*(x*, x) and h*(x*, x**)."""

    def __init__(self, base: Bifunction):
        super().__init__(base.dim)
        self.base = base
        self.label = f"transposed({base.label})"

    @property
    def is_grid(self):
        return self.base.is_grid

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        return self.base.evaluate(XS, X)

    def valid_mask(self, X, XS):
        X, XS = self._split(X, XS)
        return self.base.valid_mask(XS, X)

    def conjugate(self):
        return TransposedBifunction(self.base.conjugate())

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        n = self.dim
        return _swap(self.base.prox(_swap(v, n), _swap(w, n)), n)


class BlockSum(Bifunction):
    """h(x, x*) = sum_i h_i(x_i, x*_i) for one-dimensional bifunctions h_i."""

    def __init__(self, blocks: Sequence[Bifunction], operator: Optional[MonotoneOperator] = None):
        blocks = list(blocks)
        if not blocks or any(b.dim != 1 for b in blocks):
            raise DimensionError("block sums are built from one-dimensional bifunctions")
        super().__init__(len(blocks))
        self.blocks = blocks
        self._operator = operator
        self.label = "block_sum(" + ",".join(b.label for b in blocks) + ")"

    @property
    def is_grid(self):
        return any(b.is_grid for b in self.blocks)

    def evaluate(self, X, XS):
        X, XS = self._split(X, XS)
        return ext_add(*[b.evaluate(X[:, [i]], XS[:, [i]]) for i, b in enumerate(self.blocks)])

    def conjugate(self):
        return BlockSum([b.conjugate() for b in self.blocks])

    def prox(self, v, weights=1.0):
        v = _as_vector(v, "v")
        w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
        n = self.dim
        out = np.empty(2 * n)
        for i, b in enumerate(self.blocks):
            y = b.prox(v[[i, n + i]], w[[i, n + i]])
            out[i], out[n + i] = y
        return out

    def operator(self):
        return self._operator


# --- Construction from operators --- #

def _subdifferential_representation(f: ConvexFunction, T: MonotoneOperator, which: str) -> Bifunction:
    if isinstance(f, Quadratic):
        cls = AffineFitzpatrick if which == "fitzpatrick" else AffineSigma
        return cls(f.A, f.b, operator=T)
    if f.is_polyhedral and isinstance(f, (BoxSupport, BoxIndicator, Perturbed, SeparableSum)):
        # polyhedral separable kinds: phi and sigma both equal f(x) + f*(x*)
        return SeparableBifunction(f, operator=T)
    if isinstance(f, SeparableSum):
        blocks = [_subdifferential_representation(c, MonotoneOperator.subdifferential(c), which) for c in f.components]
        return BlockSum(blocks, operator=T)
    raise ConvexityError(f"no closed-form {which} function for the subdifferential of {f.label}")


def fitzpatrick(T: MonotoneOperator) -> Bifunction:
    """
    phi_T(x, x*) = sup over the graph of <x - y, y* - x*> + <x, x*>.

    Closed form for affine and catalogue subdifferential kinds; for a
    sampled graph, the finite supremum (a lower bound of phi_T).
    """
    if T.kind == "affine":
        return AffineFitzpatrick(T.A, T.b, operator=T)
    if T.kind == "subdifferential":
        return _subdifferential_representation(T.function, T, "fitzpatrick")
    X, XS = T.graph_arrays()
    return MaxAffineBifunction(np.hstack([XS, X]), pairing(X, XS), lower_bound=True, operator=T,
                               label=f"fitzpatrick({T.label})")


def sigma(T: MonotoneOperator) -> Bifunction:
    """sigma_T = closed convex hull of pi + indicator of the graph of T."""
    if T.kind == "affine":
        return AffineSigma(T.A, T.b, operator=T)
    if T.kind == "subdifferential":
        return _subdifferential_representation(T.function, T, "sigma")
    X, XS = T.graph_arrays()
    return GridBifunction(np.hstack([X, XS]), pairing(X, XS), operator=T, label=f"sigma({T.label})")


def fitzpatrick_eval(T: MonotoneOperator, p: PointLike) -> float:
    h = fitzpatrick(T)
    if h.lower_bound:
        warnings.warn("Fitzpatrick value over a finite graph sample is a lower bound", LowerBoundWarning, stacklevel=2)
    return h(p)


def sigma_eval(T: MonotoneOperator, p: PointLike) -> float:
    return sigma(T)(p)


def bifunction_conjugate(h: Bifunction) -> Bifunction:
    """h* with signature h*(x*, x**)."""
    return h.conjugate()


def transposed(h: Bifunction) -> Bifunction:
    return TransposedBifunction(h)


def scaled(h: Bifunction, s: float) -> Bifunction:
    return ScaledBifunction(h, s)


def translate(h: Bifunction, z, zstar) -> TranslatedBifunction:
    """The translated bifunction h_(z,z*)."""
    return TranslatedBifunction(h, z, zstar)


def box_grid(n: int, radius: float = config.GRID_RADIUS, resolution: int = config.GRID_RESOLUTION) -> np.ndarray:
    """Rows (x, x*) of a regular grid over [-radius, radius]^(2n)."""
    return box_nodes(2 * n, radius, resolution)


# --- Checks --- #

def _chunks(U: np.ndarray):
    size = config.CHUNK_SIZE
    return [U[i:i + size] for i in range(0, len(U), size)]


def _gap_chunk(h: Bifunction, U: np.ndarray):
    X, XS = U[:, :h.dim], U[:, h.dim:]
    return ext_add(h.evaluate(X, XS), -pairing(X, XS)), h.valid_mask(X, XS)


def sweep_gaps(h: Bifunction, grid: np.ndarray, n_jobs: Optional[int] = None):
    """(h - pi, valid mask) over the grid rows, chunked in a fixed order."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryTouchWarning)
        parts = Parallel(n_jobs=n_jobs or config.N_JOBS, prefer="threads")(
            delayed(_gap_chunk)(h, chunk) for chunk in _chunks(grid))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class ConditionReport:
    """Minimum gaps of h - pi and h* - pi over a test grid."""
    primal_min_gap: float
    dual_min_gap: float
    primal_witness: Optional[PrimalDualPoint]
    dual_witness: Optional[PrimalDualPoint]
    verdict: bool
    tolerance_class: str = "strict"
    n_points: int = 0
    n_dual_valid: int = 0

    def to_dict(self) -> dict:
        return {
            "primal_min_gap": self.primal_min_gap,
            "dual_min_gap": self.dual_min_gap,
            "primal_witness": self.primal_witness.to_dict() if self.primal_witness else None,
            "dual_witness": self.dual_witness.to_dict() if self.dual_witness else None,
            "verdict": self.verdict,
            "tolerance_class": self.tolerance_class,
            "n_points": self.n_points,
            "n_dual_valid": self.n_dual_valid,
        }


def check_dual_condition(h: Bifunction, test_grid: np.ndarray, tolerances: Optional[Tolerances] = None,
                         n_jobs: Optional[int] = None) -> ConditionReport:
    """
    Verify h >= pi and h*(x*, x**) >= <x*, x**> on the test grid.

    Grid-derived conjugate values are used only where their slopes are valid.
    """
    tol = tolerances_for(h, override=tolerances)
    grid = np.atleast_2d(np.asarray(test_grid, dtype=float))
    primal, _ = sweep_gaps(h, grid, n_jobs)
    dual, valid = sweep_gaps(h.conjugate(), grid, n_jobs)
    dual = np.where(valid, dual, np.inf)
    i, j = int(np.argmin(primal)), int(np.argmin(dual))
    p_min, d_min = float(primal[i]), float(dual[j])
    verdict = bool(p_min >= -tol.rep and d_min >= -tol.rep)
    logger.info("dual condition on %d points: min h-pi %.3g, min h*-pi %.3g", len(grid), p_min, d_min)
    return ConditionReport(p_min, d_min, PrimalDualPoint.from_vector(grid[i]),
                           PrimalDualPoint.from_vector(grid[j]) if np.isfinite(d_min) else None,
                           verdict, tol.name, len(grid), int(valid.sum()))


@dataclass
class MembershipReport:
    verdict: bool
    min_gap: float
    min_gap_witness: Optional[PrimalDualPoint]
    graph_max_deviation: float
    convexity_ok: bool
    convexity_witness: Optional[tuple] = None
    n_points: int = 0
    n_graph_points: int = 0
    lower_bound: bool = False
    tolerance_class: str = "strict"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_gap": self.min_gap,
            "min_gap_witness": self.min_gap_witness.to_dict() if self.min_gap_witness else None,
            "graph_max_deviation": self.graph_max_deviation,
            "convexity_ok": self.convexity_ok,
            "convexity_witness": [list(map(float, w)) for w in self.convexity_witness] if self.convexity_witness else None,
            "n_points": self.n_points,
            "n_graph_points": self.n_graph_points,
            "lower_bound": self.lower_bound,
            "tolerance_class": self.tolerance_class,
        }


def midpoint_convexity(h: Bifunction, lo: np.ndarray, hi: np.ndarray, n_tests: int, seed: int, tol: float):
    """Random segments in the box [lo, hi]; returns (ok, witness endpoints)."""
    rng = np.random.default_rng(seed)
    U1 = rng.uniform(lo, hi, size=(n_tests, len(lo)))
    U2 = rng.uniform(lo, hi, size=(n_tests, len(lo)))
    v1, v2, vm = h.values(U1), h.values(U2), h.values(0.5 * (U1 + U2))
    finite = np.isfinite(v1) & np.isfinite(v2)
    excess = np.full(len(U1), -np.inf)
    excess[finite] = vm[finite] - 0.5 * (v1[finite] + v2[finite])
    bad = np.flatnonzero(excess > tol * (1.0 + np.abs(v1) + np.abs(v2)))
    if len(bad):
        k = bad[0]
        return False, (U1[k], U2[k])
    return True, None


def family_membership(h: Bifunction, T: MonotoneOperator, test_grid: np.ndarray,
                      graph_points: Optional[Sequence[PrimalDualPoint]] = None,
                      tolerances: Optional[Tolerances] = None, seed: int = 0,
                      n_tests: int = config.MIDPOINT_TESTS) -> MembershipReport:
    """
    Is h in the Fitzpatrick family of T (on the test grid)?

    Checks h >= pi on the grid, h = pi on graph points and, for closed-form
    kinds, midpoint convexity on seeded random segments.
    """
    if h.dim != T.dim:
        raise DimensionError(f"bifunction has dimension {h.dim}, operator has {T.dim}")
    tol = tolerances_for(h, T, override=tolerances)
    grid = np.atleast_2d(np.asarray(test_grid, dtype=float))
    if graph_points is None:
        if T.is_sampled:
            graph_points = T.points
        else:
            graph_points = T.sample_graph(np.unique(grid[:, :h.dim], axis=0))
    G = np.array([p.as_vector() for p in graph_points]) if graph_points else np.zeros((0, 2 * h.dim))

    if h.lower_bound:
        min_gap, witness = 0.0, None
    else:
        gaps, _ = sweep_gaps(h, grid)
        k = int(np.argmin(gaps))
        min_gap, witness = float(gaps[k]), PrimalDualPoint.from_vector(grid[k])
    graph_dev = float(np.max(np.abs(h.gaps(G)))) if len(G) else 0.0

    if h.is_grid:
        convex_ok, conv_witness = True, None
    else:
        convex_ok, conv_witness = midpoint_convexity(h, grid.min(axis=0), grid.max(axis=0), n_tests, seed, tol.rep)

    verdict = bool(min_gap >= -tol.rep and graph_dev <= tol.rep and convex_ok)
    return MembershipReport(verdict, min_gap, witness, graph_dev, convex_ok, conv_witness,
                            len(grid), len(G), h.lower_bound, tol.name)


def _as_rows(points, n: int) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points)
    return np.array([_as_point(p).as_vector() for p in points]).reshape(-1, 2 * n)


def translation_conjugate_check(h: Bifunction, z, zstar, sample_points) -> float:
    """max |(h_(z,z*))*(q) - (h*)_(z*,z)(q)| over the sample points."""
    z, zstar = _as_vector(z, "z"), _as_vector(zstar, "zstar")
    lhs = translate(h, z, zstar).conjugate()
    rhs = translate(h.conjugate(), zstar, z)
    Q = _as_rows(sample_points, h.dim)
    a, b = lhs.values(Q), rhs.values(Q)
    both_inf = np.isposinf(a) & np.isposinf(b)
    with np.errstate(invalid="ignore"):
        dev = np.where(both_inf, 0.0, np.abs(a - b))
    dev = np.where(np.isnan(dev), np.inf, dev)
    return float(np.max(dev)) if len(dev) else 0.0


def graph_conjugate_equality(h: Bifunction, p: PointLike, tolerances: Optional[Tolerances] = None) -> bool:
    """For p with h(p) = pi(p), test h*(x*, x) = <x, x*>."""
    p = _as_point(p)
    tol = tolerances_for(h, override=tolerances)
    pi = p.duality_product()
    measured = h(p) - pi if np.isfinite(h(p)) else np.inf
    if not abs(measured) <= tol.rep:
        raise PreconditionError(f"h(p) - <x, x*> = {measured:.3g}, p is not a representing point", measured, p)
    value = h.conjugate()(PrimalDualPoint(p.xstar, p.x))
    return bool(np.isfinite(value) and abs(value - pi) <= tol.rep)


def convex_closure(h: Bifunction) -> GridBifunction:
    """The lower convex hull of a grid bifunction, materialized at its nodes."""
    if not isinstance(h, GridBifunction):
        raise PreconditionError(f"convex closure is computed for grid bifunctions, got {type(h).__name__}")
    closed = h.fn.envelope(h.nodes)
    return GridBifunction(h.nodes, closed, operator=h.operator(), label=f"closure({h.label})")


@dataclass
class RepresentedOperator:
    operator: MonotoneOperator
    conjugate_equality_ok: bool
    monotone: bool
    n_points: int


def represented_operator(h: Bifunction, test_grid: np.ndarray, tolerances: Optional[Tolerances] = None) -> RepresentedOperator:
    """
    The operator {h = pi} restricted to the test grid, checked against
    h*(x*, x) = pi and for monotonicity.
    """
    tol = tolerances_for(h, override=tolerances)
    grid = np.atleast_2d(np.asarray(test_grid, dtype=float))
    gaps, _ = sweep_gaps(h, grid)
    hits = grid[np.abs(gaps) <= tol.rep]
    if len(hits) == 0:
        raise PreconditionError("no test point satisfies h = pi", float(np.min(gaps)))
    points = [PrimalDualPoint.from_vector(u) for u in hits]
    swapped = np.hstack([hits[:, h.dim:], hits[:, :h.dim]])
    conj = h.conjugate()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryTouchWarning)
        conj_gaps = conj.gaps(swapped)
    equality = bool(np.all(np.abs(conj_gaps) <= tol.rep))
    mono = monotonicity_check(points, tol.mono)
    return RepresentedOperator(MonotoneOperator("sampled_graph", h.dim, points=points),
                               equality, mono.monotone, len(points))
