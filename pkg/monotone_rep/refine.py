"""
Regularized minimization, the refinement iteration that drives a point
with a small representation gap onto the graph, its re-normed variant,
the strict enlargement version and the maximality probe.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from . import config
from .config import Tolerances, tolerances_for
from .convexfn import ConvexFunction, fenchel_young_gap
from .errors import BoundaryTouchWarning, LowerBoundWarning, PreconditionError, SolverError
from .operators import MonotoneOperator, PrimalDualPoint, pairing
from .representations import (Bifunction, ScaledBifunction, SeparableBifunction, box_grid, check_dual_condition,
                              fitzpatrick, translate)

logger = logging.getLogger(__name__)

# rounding floor for a regularized minimum that is zero in exact arithmetic
INNER_SLACK = 1e-12


@dataclass
class RegularizedSolution:
    """
    A point with h(x, x*) + 1/2|x|^2 + 1/2|x*|^2 below the requested budget.

    inner_point is the exact minimizer of the regularized problem, point
    its rescaling toward the origin that carries the strict norm bounds.
    """
    point: PrimalDualPoint
    value: float
    inner_point: PrimalDualPoint
    inner_value: float
    dual_certificate: PrimalDualPoint
    certificate_value: float
    norm_bound: float
    eta: Optional[float] = None
    tau: float = 1.0
    unbounded_branch: bool = False
    norm_bounds_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "value": self.value,
            "inner_point": self.inner_point.to_dict(),
            "inner_value": self.inner_value,
            "dual_certificate": self.dual_certificate.to_dict(),
            "certificate_value": self.certificate_value,
            "norm_bound": self.norm_bound,
            "eta": self.eta,
            "tau": self.tau,
            "unbounded_branch": self.unbounded_branch,
            "norm_bounds_ok": self.norm_bounds_ok,
        }


def _regularized_value(h: Bifunction, u: np.ndarray) -> float:
    return float(h.values(u[None, :])[0] + 0.5 * u @ u)


def _certificate_value(h: Bifunction, w: np.ndarray, fallback: float) -> float:
    try:
        conj = h.conjugate()
    except NotImplementedError:
        return fallback
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryTouchWarning)
        return float(conj.values(w[None, :])[0] + 0.5 * w @ w)


def regularized_min(h: Bifunction, eps: float, tolerances: Optional[Tolerances] = None) -> RegularizedSolution:
    """
    Find (x, x*) with h(x, x*) + 1/2|x|^2 + 1/2|x*|^2 < eps.

    The regularized problem is solved as the proximal point of h at the
    origin. When h(0, 0) >= eps the minimizer is pulled toward the origin
    by tau = sqrt(h00) / (sqrt(h00) + sqrt(2 eta)), eta = eps^2 / (4 h00),
    which yields |x|^2 < h(0,0) and |x*|^2 < h(0,0).

    Raises:
        SolverError: the inner solve does not reach the budget (dual
            condition violated or grid too small); best_value is attached.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    tol = tolerances_for(h, override=tolerances)
    n = h.dim
    origin = PrimalDualPoint.origin(n)
    h00 = h(origin)

    u = h.prox(np.zeros(2 * n), np.ones(2 * n))
    inner_value = _regularized_value(h, u)
    inner = PrimalDualPoint.from_vector(u)
    certificate = PrimalDualPoint.from_vector(-u)
    cert_value = _certificate_value(h, -u, -inner_value)

    if h00 < eps:
        return RegularizedSolution(origin, float(h00), inner, inner_value, certificate, cert_value, float(h00))

    if not np.isfinite(h00):
        if not inner_value < eps:
            raise SolverError(f"regularized value {inner_value:.3g} does not reach {eps:.3g}", inner_value)
        return RegularizedSolution(inner, inner_value, inner, inner_value, certificate, cert_value,
                                   float("inf"), unbounded_branch=True)

    eta = eps ** 2 / (4.0 * h00)
    if not inner_value < eta + INNER_SLACK:
        raise SolverError(f"regularized minimum {inner_value:.3g} is not below eta = {eta:.3g}; "
                          "the dual condition may fail on the working box", inner_value)
    tau = math.sqrt(h00) / (math.sqrt(h00) + math.sqrt(2.0 * eta))
    point = PrimalDualPoint.from_vector(tau * u)
    value = _regularized_value(h, tau * u)
    if not value < eps:
        raise SolverError(f"rescaled value {value:.3g} does not reach {eps:.3g}", value)
    bounds_ok = bool(point.x @ point.x <= h00 + tol.ref and point.xstar @ point.xstar <= h00 + tol.ref)
    return RegularizedSolution(point, value, inner, inner_value, certificate, cert_value, float(h00),
                               eta=eta, tau=tau, norm_bounds_ok=bounds_ok)


@dataclass
class StepResult:
    point: PrimalDualPoint
    start_gap: float
    gap: float
    solution: Optional[RegularizedSolution] = None


def br_step_detail(h: Bifunction, z: PrimalDualPoint, eps: float,
                   tolerances: Optional[Tolerances] = None) -> StepResult:
    """One refinement step from z with its regularized sub-solution."""
    start_gap = h.gap(z)
    if not np.isfinite(start_gap):
        raise PreconditionError("h is infinite at the starting point", start_gap, z)
    if start_gap <= 0:
        return StepResult(z, start_gap, start_gap)
    hz = translate(h, z.x, z.xstar).materialize()
    sol = regularized_min(hz, eps, tolerances)
    point = sol.point + z
    return StepResult(point, start_gap, h.gap(point), sol)


def br_step(h: Bifunction, z: PrimalDualPoint, eps: float, tolerances: Optional[Tolerances] = None) -> PrimalDualPoint:
    """
    A point with gap below eps within sqrt(gap(z)) of z in each component.
    """
    return br_step_detail(h, z, eps, tolerances).point


@dataclass
class RefinementTrace:
    iterates: List[PrimalDualPoint]
    gaps: List[float]
    theta: float
    eps0: float
    eps: float
    limit: PrimalDualPoint
    raw_limit: PrimalDualPoint
    snap_distance: float = 0.0
    step_bounds_ok: List[bool] = field(default_factory=list)
    converged: bool = True
    diagnostic: Optional[str] = None
    scale: float = 1.0
    lam: Optional[float] = None
    tolerance_class: str = "strict"
    tol_ref: float = 1e-9

    @property
    def start(self) -> PrimalDualPoint:
        return self.iterates[0]

    @property
    def final_dx(self) -> float:
        return float(np.linalg.norm(self.limit.x - self.start.x))

    @property
    def final_dxstar(self) -> float:
        return float(np.linalg.norm(self.limit.xstar - self.start.xstar))

    @property
    def bound(self) -> float:
        """sqrt(eps0) / (1 - sqrt(theta)) in the working norm."""
        return math.sqrt(max(self.eps0, 0.0)) / (1.0 - math.sqrt(self.theta))

    @property
    def bound_x(self) -> float:
        return self.bound / self.scale

    @property
    def bound_xstar(self) -> float:
        return self.bound * self.scale

    @property
    def decay_ok(self) -> bool:
        return all(g < self.theta ** k * self.eps0 + self.tol_ref for k, g in enumerate(self.gaps))

    def to_frame(self) -> pd.DataFrame:
        """One row per iterate with the step norms from the previous iterate."""
        n = self.start.dim
        rows = []
        prev = None
        for k, (p, gap) in enumerate(zip(self.iterates, self.gaps)):
            row = {"k": k}
            row.update({f"x{i}": p.x[i] for i in range(n)})
            row.update({f"xstar{i}": p.xstar[i] for i in range(n)})
            row["gap"] = gap
            row["step_norm_x"] = float(np.linalg.norm(p.x - prev.x)) if prev is not None else 0.0
            row["step_norm_xstar"] = float(np.linalg.norm(p.xstar - prev.xstar)) if prev is not None else 0.0
            rows.append(row)
            prev = p
        return pd.DataFrame(rows)

    def summary(self) -> dict:
        return {
            "theta": self.theta,
            "eps0": self.eps0,
            "eps": self.eps,
            "iterations": len(self.iterates) - 1,
            "final_gap": self.gaps[-1],
            "limit": self.limit.to_dict(),
            "raw_limit": self.raw_limit.to_dict(),
            "snap_distance": self.snap_distance,
            "final_dx": self.final_dx,
            "final_dxstar": self.final_dxstar,
            "bound_x": self.bound_x,
            "bound_xstar": self.bound_xstar,
            "converged": self.converged,
            "decay_ok": self.decay_ok,
            "step_bounds_ok": all(self.step_bounds_ok),
            "scale": self.scale,
            "lam": self.lam,
            "diagnostic": self.diagnostic,
            "tolerance_class": self.tolerance_class,
        }


def theta_rule(eps0: float, eps: float) -> float:
    """theta with sqrt(theta) = (1 - r) / 2, r = sqrt(eps0 / eps)."""
    r = math.sqrt(max(eps0, 0.0) / eps)
    return ((1.0 - r) / 2.0) ** 2


def _snap(operator: Optional[MonotoneOperator], p: PrimalDualPoint):
    if operator is None:
        return p, 0.0
    return operator.project(p)


def br_refine(h: Bifunction, p: PrimalDualPoint, eps: float, tol_gap: Optional[float] = None,
              max_steps: int = config.MAX_REFINE_STEPS, snap: bool = True,
              tolerances: Optional[Tolerances] = None) -> RefinementTrace:
    """
    Drive p with h(p) - <x, x*> < eps onto {h = pi}.

    Step k calls br_step with budget theta^(k+1) * eps0 and the iteration
    stops once the gap is at most tol_gap. The limit lies within
    sqrt(eps0) / (1 - sqrt(theta)) < sqrt(eps) of p in each component.

    Raises:
        PreconditionError: the starting gap is not strictly below eps.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    tol = tolerances_for(h, override=tolerances)
    tol_gap = tol.gap if tol_gap is None else tol_gap
    eps0 = h.gap(p)
    if not eps0 < eps:
        raise PreconditionError(f"starting gap {eps0:.6g} is not strictly below eps = {eps:.6g}", eps0, p)
    theta = theta_rule(eps0, eps)

    iterates, gaps, bounds_ok = [p], [eps0], []
    diagnostic = None
    k = 0
    while gaps[-1] > tol_gap and k < max_steps:
        current = iterates[-1]
        try:
            step = br_step_detail(h, current, theta ** (k + 1) * eps0, tol)
        except SolverError as exc:
            diagnostic = f"step {k + 1}: {exc}"
            logger.warning("refinement stopped early at %s", diagnostic)
            break
        q = step.point
        bounds_ok.append(bool(np.sum((q.x - current.x) ** 2) <= gaps[-1] + tol.ref
                              and np.sum((q.xstar - current.xstar) ** 2) <= gaps[-1] + tol.ref))
        iterates.append(q)
        gaps.append(step.gap)
        k += 1
        logger.debug("refinement step %d: gap %.3g", k, step.gap)

    converged = bool(gaps[-1] <= tol_gap)
    if not converged and diagnostic is None:
        diagnostic = f"gap {gaps[-1]:.3g} above {tol_gap:.3g} after {k} steps"
    raw = iterates[-1]
    limit, dist = _snap(h.operator(), raw) if snap else (raw, 0.0)
    trace = RefinementTrace(iterates, gaps, theta, eps0, eps, limit, raw, dist, bounds_ok, converged,
                            diagnostic, tolerance_class=tol.name, tol_ref=tol.ref)
    logger.info("refinement finished after %d steps, gap %.3g", k, gaps[-1])
    return trace


def br_refine_scaled(h: Bifunction, p: PrimalDualPoint, eps: float, lam: float, tol_gap: Optional[float] = None,
                     max_steps: int = config.MAX_REFINE_STEPS, snap: bool = True,
                     tolerances: Optional[Tolerances] = None) -> RefinementTrace:
    """
    br_refine in the norm (sqrt(eps)/lam)|x|, giving |x_bar - x| < lam and
    |x_bar* - x*| < eps/lam in the original norm.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    tol = tolerances_for(h, override=tolerances)
    s = math.sqrt(eps) / lam
    hs = h if s == 1.0 else ScaledBifunction(h, s)
    scaled_start = PrimalDualPoint(s * p.x, p.xstar / s)
    trace = br_refine(hs, scaled_start, eps, tol_gap, max_steps, snap=False, tolerances=tol)

    trace.iterates = [PrimalDualPoint(q.x / s, q.xstar * s) for q in trace.iterates]
    trace.raw_limit = trace.iterates[-1]
    trace.limit, trace.snap_distance = _snap(h.operator(), trace.raw_limit) if snap else (trace.raw_limit, 0.0)
    trace.scale = s
    trace.lam = lam
    return trace


@dataclass
class StrictBRResult:
    point: PrimalDualPoint
    trace: RefinementTrace
    dx: float
    dxstar: float
    bound_x: float
    bound_xstar: float
    within_bounds: bool
    measured_inf: Optional[float] = None
    start_gap: Optional[float] = None
    selection: str = "refinement"

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "dx": self.dx,
            "dxstar": self.dxstar,
            "bound_x": self.bound_x,
            "bound_xstar": self.bound_xstar,
            "within_bounds": self.within_bounds,
            "measured_inf": self.measured_inf,
            "start_gap": self.start_gap,
            "selection": self.selection,
            "trace": self.trace.summary(),
        }


def _bounded_result(trace: RefinementTrace, bound_x: float, bound_xstar: float, tol: Tolerances,
                    measured: Optional[float] = None, start_gap: Optional[float] = None) -> StrictBRResult:
    dx, dxstar = trace.final_dx, trace.final_dxstar
    within = bool(dx < bound_x + tol.ref and dxstar < bound_xstar + tol.ref)
    return StrictBRResult(trace.limit, trace, dx, dxstar, bound_x, bound_xstar, within, measured, start_gap)


def _best_sample(T: MonotoneOperator, p: PrimalDualPoint, trace: RefinementTrace, bound_x: float,
                 bound_xstar: float, measured: float) -> Optional[StrictBRResult]:
    """The sample with the smallest bound-relative distance to p, if it lies inside the box."""
    X, XS = T.graph_arrays()
    dx = np.linalg.norm(X - p.x, axis=1)
    dxstar = np.linalg.norm(XS - p.xstar, axis=1)
    j = int(np.argmin(np.maximum(dx / bound_x, dxstar / bound_xstar)))
    if not (dx[j] < bound_x and dxstar[j] < bound_xstar):
        return None
    return StrictBRResult(T.points[j], trace, float(dx[j]), float(dxstar[j]), bound_x, bound_xstar, True,
                          measured, selection="nearest_sample")


def strict_br(T: MonotoneOperator, p: PrimalDualPoint, eps: float, eta: float, lam: float,
              tol_gap: Optional[float] = None, tolerances: Optional[Tolerances] = None) -> StrictBRResult:
    """
    A graph point of T within lam of x and within eta/lam of x*, for p in
    the eps-enlargement of T and eta > eps.

    A sampled graph is finite, hence never maximal, and its Fitzpatrick
    function is only a lower bound, so the refined limit may leave the
    box. The best sample inside the box is returned instead in that case;
    within_bounds is False only when no sample lies in the box.
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if not eta > eps:
        raise PreconditionError(f"eta = {eta} must exceed eps = {eps}", eta)
    tol = tolerances_for(T, override=tolerances)
    measured, witness = T.enlargement_inf(p)
    if not (np.isfinite(measured) and measured >= -eps - tol.mono):
        raise PreconditionError(f"p is not in the {eps}-enlargement: infimum {measured:.6g}", measured, witness)
    h = fitzpatrick(T)
    if h.lower_bound:
        warnings.warn("sampled graph: distance bounds are checked, not guaranteed", LowerBoundWarning, stacklevel=2)
    trace = br_refine_scaled(h, p, eta, lam, tol_gap, tolerances=tol)
    result = _bounded_result(trace, lam, eta / lam, tol, measured)
    if not result.within_bounds and T.is_sampled:
        result = _best_sample(T, p, trace, lam, eta / lam, measured) or result
    if not result.within_bounds:
        logger.warning("strict refinement left the box: dx %.3g (< %.3g), dx* %.3g (< %.3g)",
                       result.dx, lam, result.dxstar, eta / lam)
    return result


def subdifferential_br(f: ConvexFunction, p: PrimalDualPoint, eps: float, lam: float,
                       tol_gap: Optional[float] = None, tolerances: Optional[Tolerances] = None) -> StrictBRResult:
    """
    x_bar* in the subdifferential of f at x_bar with |x_bar - x| < lam and
    |x_bar* - x*| < eps/lam, when f(x) + f*(x*) - <x, x*> < eps.
    """
    gap = fenchel_young_gap(f, p)
    if not gap < eps:
        raise PreconditionError(f"Fenchel-Young gap {gap:.6g} is not strictly below eps = {eps}", gap, p)
    h = SeparableBifunction(f)
    tol = tolerances_for(h, override=tolerances)
    trace = br_refine_scaled(h, p, eps, lam, tol_gap, tolerances=tol)
    return _bounded_result(trace, lam, eps / lam, tol, start_gap=gap)


@dataclass
class ProbeResult:
    sequence: List[PrimalDualPoint]
    distances: List[float]
    verdict: bool
    measured_inf: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "steps": len(self.sequence),
            "final_distance": self.distances[-1] if self.distances else None,
            "sequence": [q.to_dict() for q in self.sequence],
            "distances": self.distances,
            "measured_inf": self.measured_inf,
        }


def _graph_inf(h: Bifunction, z: PrimalDualPoint, graph_points):
    if graph_points is not None:
        X = np.array([q.x for q in graph_points])
        XS = np.array([q.xstar for q in graph_points])
        prods = pairing(z.x - X, z.xstar - XS)
        j = int(np.argmin(prods))
        return float(prods[j]), graph_points[j]
    op = h.operator()
    if op is None:
        raise PreconditionError("no graph to test monotone relation against; pass graph_points")
    return op.enlargement_inf(z)


def maximality_probe(h: Bifunction, z: PrimalDualPoint, budget: int = config.PROBE_BUDGET,
                     graph_points: Optional[List[PrimalDualPoint]] = None,
                     tolerances: Optional[Tolerances] = None,
                     condition_grid: Optional[np.ndarray] = None) -> ProbeResult:
    """
    Approach z through graph points of {h = pi}, starting from the
    minimizers of the translated regularized problem with budget 1/k^2.

    h must satisfy h >= pi and h* >= pi; this is checked on condition_grid,
    by default a 5-point-per-axis grid of radius 1 around z. A z already on
    {h = pi} is returned as a one-step sequence without iterating. For the
    Fitzpatrick function of a sampled graph that covers every z monotonically
    related to the samples, so the dual condition check is what rejects it.

    Raises:
        PreconditionError: z is not monotonically related to the graph
            (the witness graph point is attached), or h fails the dual
            condition on condition_grid.
    """
    tol = tolerances_for(h, override=tolerances)
    measured, witness = _graph_inf(h, z, graph_points)
    if not measured >= -tol.mono:
        raise PreconditionError(f"z is not monotonically related to the graph: infimum {measured:.6g}",
                                measured, witness)
    if condition_grid is None:
        condition_grid = z.as_vector() + box_grid(z.dim, 1.0, 5)
    condition = check_dual_condition(h, condition_grid, tol)
    if not condition.verdict:
        worst = min(condition.primal_min_gap, condition.dual_min_gap)
        at = condition.primal_witness if condition.primal_min_gap <= condition.dual_min_gap else condition.dual_witness
        raise PreconditionError(f"h does not satisfy the dual condition near z: minimum gap {worst:.6g}", worst, at)
    if h.gap(z) <= tol.gap:
        return ProbeResult([z], [0.0], True, measured)

    hz = translate(h, z.x, z.xstar).materialize()
    op = h.operator()
    sequence, distances = [], []
    for k in range(1, budget + 1):
        eps_k = 1.0 / k ** 2
        try:
            u = regularized_min(hz, eps_k, tol).point
            trace = br_refine(hz, u, eps_k, snap=False, tolerances=tol)
        except (SolverError, PreconditionError) as exc:
            logger.warning("probe step %d failed: %s", k, exc)
            break
        x_bar, _ = _snap(op, trace.raw_limit + z)
        dist = float(np.linalg.norm((x_bar - z).as_vector()))
        sequence.append(x_bar)
        distances.append(dist)
        logger.debug("probe step %d: distance %.3g", k, dist)
        if dist < tol.probe:
            return ProbeResult(sequence, distances, True, measured)
    return ProbeResult(sequence, distances, False, measured)
