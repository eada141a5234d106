"""
Lower convex envelopes of sampled epigraphs, the discrete Legendre
transform and the proximal map of a max-affine function.
"""
import logging
from typing import Tuple

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, QhullError

from .errors import ConvexityError

logger = logging.getLogger(__name__)


def lower_hull_1d(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    Indices of the lower convex hull of the points (nodes[i], values[i]).

    Monotone chain over the points sorted by abscissa; duplicated abscissae
    keep their smallest value. Returned indices are sorted left to right.
    """
    order = np.lexsort((values, nodes))
    hull = []
    last_x = None
    for i in order:
        if last_x is not None and nodes[i] == last_x:
            continue
        last_x = nodes[i]
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (nodes[i1] - nodes[i0]) * (values[i] - values[i0]) - (values[i1] - values[i0]) * (nodes[i] - nodes[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def legendre_1d(nodes: np.ndarray, values: np.ndarray, slopes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Discrete Legendre transform s -> max_i s*x_i - v_i on a 1-D sample.

    Args:
        nodes: sample abscissae
        values: sample values (+inf entries are ignored)
        slopes: query slopes

    Returns:
        (conjugate values, index of the maximizing node for every slope)
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    finite = np.flatnonzero(np.isfinite(values))
    hull = finite[lower_hull_1d(nodes[finite], values[finite])]
    hx, hv = nodes[hull], values[hull]
    slopes = np.asarray(slopes, dtype=float)
    if len(hull) == 1:
        idx = np.zeros(slopes.shape, dtype=int)
    else:
        seg = np.diff(hv) / np.diff(hx)
        idx = np.searchsorted(seg, slopes, side="left")
    return slopes * hx[idx] - hv[idx], hull[idx]


class LowerConvexEnvelope:
    """
    The closed convex hull of a function known on finitely many nodes.

    The envelope is +inf outside the convex hull of the finite nodes.
    Nodes are first reduced to their affine hull, so degenerate samples
    (a singleton, points on a line in the plane) are handled exactly.
    Qhull failures on the lifted points fall back to one linear program
    per query.
    """

    def __init__(self, nodes: np.ndarray, values: np.ndarray):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        values = np.asarray(values, dtype=float).ravel()
        if nodes.shape[0] != values.shape[0]:
            raise ConvexityError(f"{nodes.shape[0]} nodes but {values.shape[0]} values")
        finite = np.isfinite(values)
        if np.any(np.isneginf(values)):
            raise ConvexityError("sampled values must not contain -inf")
        if not np.any(finite):
            raise ConvexityError("a proper function needs at least one finite sample")
        self.nodes = nodes[finite]
        self.values = values[finite]
        self.dim = nodes.shape[1]
        scale = max(1.0, float(np.max(np.abs(self.nodes))))
        self.tol = 1e-9 * scale

        self.center = self.nodes.mean(axis=0)
        centered = self.nodes - self.center
        if len(self.nodes) > 1:
            _, sv, vt = np.linalg.svd(centered, full_matrices=False)
            rank = int(np.sum(sv > 1e-10 * scale * np.sqrt(len(self.nodes))))
        else:
            rank, vt = 0, np.zeros((0, self.dim))
        self.basis = vt[:rank].T
        self.coords = centered @ self.basis
        self.rank = rank
        self.mode = None
        self._domain = None
        self._build()

    def _build(self):
        r = self.rank
        if r == 0:
            self.mode = "point"
            return
        if r == 1:
            x = self.coords[:, 0]
            hull = lower_hull_1d(x, self.values)
            self._hx, self._hv = x[hull], self.values[hull]
            self.mode = "chain"
            return
        try:
            self._domain = ConvexHull(self.coords)
        except QhullError:
            self._domain = None
            self.mode = "lp"
            return
        try:
            lifted = ConvexHull(np.column_stack([self.coords, self.values]))
        except QhullError:
            design = np.column_stack([self.coords, np.ones(len(self.coords))])
            coef, *_ = np.linalg.lstsq(design, self.values, rcond=None)
            if np.max(np.abs(design @ coef - self.values)) <= 1e-9 * max(1.0, np.max(np.abs(self.values))):
                self._affine = coef
                self.mode = "affine"
            else:
                logger.debug("Qhull rejected the lifted sample; using linear programs")
                self.mode = "lp"
            return
        eq = lifted.equations
        lower = eq[:, r] < -1e-12
        normals, heights, offsets = eq[lower, :r], eq[lower, r], eq[lower, r + 1]
        self._planes = np.column_stack([-normals / heights[:, None], -offsets / heights])
        self.mode = "facets"

    def _to_coords(self, points: np.ndarray):
        off = np.atleast_2d(points) - self.center
        q = off @ self.basis
        inside = np.linalg.norm(off - q @ self.basis.T, axis=1) <= self.tol
        return q, inside

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Envelope values at the rows of points (shape (k, dim))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        q, inside = self._to_coords(points)
        out = np.full(len(points), np.inf)
        if self.mode == "point":
            out[inside] = self.values.min()
            return out
        if self.mode == "chain":
            t = q[:, 0]
            ok = inside & (t >= self._hx[0] - self.tol) & (t <= self._hx[-1] + self.tol)
            out[ok] = np.interp(np.clip(t[ok], self._hx[0], self._hx[-1]), self._hx, self._hv)
            return out
        if self._domain is None:
            ok = inside
        else:
            eq = self._domain.equations
            ok = inside & np.all(q @ eq[:, :-1].T + eq[:, -1] <= self.tol, axis=1)
        if not np.any(ok):
            return out
        if self.mode == "affine":
            out[ok] = q[ok] @ self._affine[:-1] + self._affine[-1]
        elif self.mode == "facets":
            out[ok] = np.max(q[ok] @ self._planes[:, :-1].T + self._planes[:, -1], axis=1)
        else:
            out[ok] = [self._solve_lp(row) for row in q[ok]]
        return out

    def _solve_lp(self, q: np.ndarray) -> float:
        m = len(self.values)
        a_eq = np.vstack([self.coords.T, np.ones((1, m))])
        b_eq = np.append(q, 1.0)
        res = linprog(self.values, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        return float(res.fun) if res.status == 0 else np.inf


def _max_affine_objective(slopes, offsets, v, w, y):
    return float(np.max(slopes @ y - offsets) + 0.5 * np.sum(w * (y - v) ** 2))


def _polish_active_set(slopes, offsets, v, w, y):
    """Solve the KKT system of the epigraph QP on the pieces active at y."""
    vals = slopes @ y - offsets
    top = vals.max()
    best = None
    for thr in (1e-4, 1e-6, 1e-8):
        active = np.flatnonzero(vals >= top - thr * (1.0 + abs(top)))
        d, k = len(v), len(active)
        kkt = np.zeros((d + k + 1, d + 1 + k))
        rhs = np.zeros(d + k + 1)
        kkt[:d, :d] = np.diag(w)
        kkt[:d, d + 1:] = slopes[active].T
        rhs[:d] = w * v
        kkt[d:d + k, :d] = slopes[active]
        kkt[d:d + k, d] = -1.0
        rhs[d:d + k] = offsets[active]
        kkt[d + k, d + 1:] = 1.0
        rhs[d + k] = 1.0
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if np.max(np.abs(kkt @ sol - rhs)) > 1e-9 or np.min(sol[d + 1:]) < -1e-9:
            continue
        cand = sol[:d]
        if best is None or _max_affine_objective(slopes, offsets, v, w, cand) < _max_affine_objective(slopes, offsets, v, w, best):
            best = cand
    return best


def _prox_on_pieces(slopes, offsets, v, w, y0):
    """Epigraph QP restricted to a few pieces: SLSQP, then the active-set KKT polish."""
    if len(offsets) == 1:
        return v - slopes[0] / w
    k = len(offsets)

    def objective(z):
        return z[-1] + 0.5 * np.sum(w * (z[:-1] - v) ** 2)

    def gradient(z):
        return np.append(w * (z[:-1] - v), 1.0)

    cons = {
        "type": "ineq",
        "fun": lambda z: z[-1] - (slopes @ z[:-1] - offsets),
        "jac": lambda z: np.hstack([-slopes, np.ones((k, 1))]),
    }
    z0 = np.append(y0, np.max(slopes @ y0 - offsets))
    res = minimize(objective, z0, jac=gradient, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    y = res.x[:-1]
    if _max_affine_objective(slopes, offsets, v, w, y0) < _max_affine_objective(slopes, offsets, v, w, y):
        y = y0
    polished = _polish_active_set(slopes, offsets, v, w, y)
    if polished is not None and _max_affine_objective(slopes, offsets, v, w, polished) <= _max_affine_objective(slopes, offsets, v, w, y) + 1e-12:
        return polished
    return y


def max_affine_prox(slopes: np.ndarray, offsets: np.ndarray, v: np.ndarray, weights: np.ndarray,
                    tol: float = 1e-12) -> np.ndarray:
    """
    argmin_y max_j (<a_j, y> - b_j) + 1/2 sum_i w_i (y_i - v_i)^2.

    Working-set method: the problem is solved on a small set of pieces and
    the most violated piece is added until none lies above the restricted
    maximum. At most dim + 1 pieces are active at the solution, so the
    subproblems stay small whatever the number of pieces.
    """
    slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
    offsets = np.asarray(offsets, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
    if len(offsets) == 1:
        return v - slopes[0] / w
    first = int(np.argmax(slopes @ v - offsets))
    y = v - slopes[first] / w
    working = sorted({first, int(np.argmax(slopes @ y - offsets))})
    for _ in range(len(offsets)):
        y = _prox_on_pieces(slopes[working], offsets[working], v, w, y)
        vals = slopes @ y - offsets
        top = vals[working].max()
        j = int(np.argmax(vals))
        if vals[j] <= top + tol * (1.0 + abs(top)):
            break
        working.append(j)
    logger.debug("max-affine prox: %d of %d pieces in the working set", len(working), len(offsets))
    return y
