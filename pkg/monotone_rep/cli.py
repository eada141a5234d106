"""
Scenario-driven command line: monotone-rep --scenario FILE [--trace-out CSV]
[--summary-out JSON] [--seed N] [--tol-class strict|grid]. The JSON report goes to stdout,
logging to stderr.
"""
import argparse
import json
import logging
import sys
import time
import warnings
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from . import config
from .config import tolerances
from .convexfn import (BoxIndicator, BoxSupport, GridFunction, Quadratic, SeparableSum, abs_norm,
                       eps_subdiff_test, fenchel_duality, perturb)
from .data_handler import save_summary_json, save_trace_csv
from .errors import (LowerBoundWarning, MonotoneRepError, PreconditionError, ScenarioSemanticError, ScenarioSyntaxError,
                     SolverError)
from .extended import format_ext
from .operators import MonotoneOperator, PrimalDualPoint, eps_enlargement_test
from .refine import br_refine, br_refine_scaled, br_step_detail, maximality_probe, strict_br, subdifferential_br
from .representations import (GridBifunction, QuadraticForm, ScaledBifunction, SeparableBifunction,
                              TransposedBifunction, box_grid, check_dual_condition, convex_closure,
                              family_membership, fitzpatrick, represented_operator, sigma, translate,
                              translation_conjugate_check)
from .scenario import Scenario, command_params, load_scenario, object_params

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_PRECONDITION, EXIT_SOLVER = 0, 1, 2, 3, 4


class RunReport(BaseModel):
    """Machine-readable result of one scenario run."""
    scenario: str
    command: str
    tol_class: str
    outputs: Dict[str, Any]
    warnings: List[str] = []
    timing_seconds: float = 0.0


# --- Object construction --- #

def _circle_points(T: MonotoneOperator, count: int, radius: float) -> List[PrimalDualPoint]:
    angles = 2 * np.pi * np.arange(count) / count
    xs = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return T.sample_graph(xs)


def _build(kind: str, p: Dict[str, Any], objs: Dict[str, Any], n: int):
    def ref(key):
        return objs[p[key]]

    grid_args = {"radius": p.get("radius", config.GRID_RADIUS), "resolution": p.get("resolution", config.GRID_RESOLUTION)}
    if kind == "quadratic":
        return Quadratic(p["A"], p.get("b"), p.get("c", 0.0))
    if kind == "abs_norm":
        return abs_norm(p.get("n", n))
    if kind == "box_indicator":
        return BoxIndicator(p["lo"], p["hi"], p.get("linear"), p.get("const", 0.0))
    if kind == "box_support":
        return BoxSupport(p["lo"], p["hi"], p.get("center"), p.get("const", 0.0))
    if kind == "perturbed":
        return perturb(ref("of"), p.get("shift"), p.get("linear"), p.get("const", 0.0))
    if kind == "grid":
        return GridFunction.sample(ref("of"), **grid_args)
    if kind == "separable_sum":
        return SeparableSum([objs[name] for name in p["parts"]])
    if kind == "affine":
        return MonotoneOperator.affine(p["A"], p.get("b"))
    if kind == "identity":
        return MonotoneOperator.identity(p.get("n", n))
    if kind == "zero":
        return MonotoneOperator.zero(p.get("n", n))
    if kind == "rotation2d":
        return MonotoneOperator.rotation2d()
    if kind == "subdifferential":
        return MonotoneOperator.subdifferential(ref("of"))
    if kind == "sampled_graph":
        if "points" in p:
            return MonotoneOperator.sampled_graph(p["points"])
        T = ref("of")
        if "circle" in p:
            return MonotoneOperator.sampled_graph(_circle_points(T, p["circle"], p.get("radius", 1.0)))
        xs = np.unique(box_grid(T.dim, grid_args["radius"], grid_args["resolution"])[:, :T.dim], axis=0)
        return MonotoneOperator.sample_of(T, xs)
    if kind == "separable":
        return SeparableBifunction(ref("of"), objs[p["g"]] if "g" in p else None)
    if kind == "fitzpatrick":
        return fitzpatrick(ref("of"))
    if kind == "sigma":
        return sigma(ref("of"))
    if kind == "quadratic_form":
        return QuadraticForm(p["Q"], p.get("q"), p.get("c", 0.0))
    if kind == "pairing":
        return QuadraticForm.pairing(p.get("n", n), p.get("shift", 0.0))
    if kind == "bifunction_grid":
        return GridBifunction.sample(ref("of"), **grid_args)
    if kind == "translated":
        return translate(ref("of"), p["z"], p["zstar"])
    if kind == "transposed":
        return TransposedBifunction(ref("of"))
    if kind == "scaled":
        return ScaledBifunction(ref("of"), p["s"])
    if kind == "closure":
        return convex_closure(ref("of"))
    raise ScenarioSemanticError(f"unknown kind '{kind}'", kind)


def build_objects(scenario: Scenario) -> Dict[str, Any]:
    """Instantiate the declared objects in declaration order."""
    objs: Dict[str, Any] = {}
    for decl in scenario.objects:
        objs[decl.name] = _build(decl.kind, object_params(decl), objs, scenario.dimension)
        logger.debug("built %s as %r", decl.name, objs[decl.name])
    return objs


# --- Commands --- #

def _grid(p: Dict[str, Any], n: int) -> np.ndarray:
    return box_grid(n, p.get("radius", config.GRID_RADIUS), p.get("resolution", config.GRID_RESOLUTION))


def _run_command(scenario: Scenario, objs: Dict[str, Any], tol, trace_out: Optional[str],
                 summary_out: Optional[str] = None) -> Dict[str, Any]:
    cmd = scenario.command
    p = command_params(scenario)
    n = scenario.dimension
    trace = None

    def obj(key):
        return objs[scenario.params[key]]

    if cmd == "check-family":
        report = family_membership(obj("bifunction"), obj("operator"), _grid(p, n), tolerances=tol, seed=scenario.seed)
        out = report.to_dict()
    elif cmd in ("fitz-eval", "sigma-eval"):
        T = obj("operator")
        h = fitzpatrick(T) if cmd == "fitz-eval" else sigma(T)
        if h.lower_bound:
            warnings.warn("Fitzpatrick value over a finite graph sample is a lower bound", LowerBoundWarning)
        out = {"value": h(p["point"]), "pairing": p["point"].duality_product(), "lower_bound": h.lower_bound}
    elif cmd == "conjugate":
        if "function" in p:
            fstar = obj("function").conjugate()
            at = p.get("at", p["point"].xstar if "point" in p else np.zeros(n))
            out = {"value": fstar(at), "kind": type(fstar).__name__}
        else:
            hstar = obj("bifunction").conjugate()
            q = p.get("point", PrimalDualPoint.origin(n))
            out = {"value": hstar(q), "kind": type(hstar).__name__}
    elif cmd == "dual-condition":
        out = check_dual_condition(obj("bifunction"), _grid(p, n), tolerances=tol).to_dict()
    elif cmd == "fenchel-duality":
        kwargs = {k: p[k] for k in ("radius", "resolution") if k in p}
        out = fenchel_duality(obj("f"), obj("g"), tolerances=tol, **kwargs).to_dict()
    elif cmd == "eps-test":
        contains = eps_subdiff_test(obj("function"), p["point"], p["eps"], method=p.get("method", "conjugate"),
                                    tolerances=tol)
        out = {"contains": contains}
    elif cmd == "enlargement-test":
        res = eps_enlargement_test(obj("operator"), p["point"], p["eps"], tol)
        out = {"contains": res.contains, "inf_value": res.inf_value,
               "witness": res.witness.to_dict() if res.witness else None}
    elif cmd == "br-step":
        h = obj("bifunction")
        step = br_step_detail(h, p["point"], p["eps"], tol)
        out = {"point": step.point.to_dict(), "start_gap": step.start_gap, "gap": step.gap,
               "solution": step.solution.to_dict() if step.solution else None}
    elif cmd == "br-refine":
        h = obj("bifunction")
        if "lambda" in p:
            trace = br_refine_scaled(h, p["point"], p["eps"], p["lambda"], tolerances=tol)
        else:
            trace = br_refine(h, p["point"], p["eps"], tolerances=tol)
        out = trace.summary()
    elif cmd == "strict-br":
        res = strict_br(obj("operator"), p["point"], p["eps"], p["eta"], p["lambda"], tolerances=tol)
        trace = res.trace
        out = res.to_dict()
    elif cmd == "maximality-probe":
        out = maximality_probe(obj("bifunction"), p["point"], p.get("budget", config.PROBE_BUDGET),
                               tolerances=tol).to_dict()
    elif cmd == "translate-check":
        rng = np.random.default_rng(scenario.seed)
        r = p.get("radius", config.GRID_RADIUS)
        points = rng.uniform(-r, r, size=(p.get("samples", 100), 2 * n))
        out = {"max_deviation": translation_conjugate_check(obj("bifunction"), p["z"], p["zstar"], points)}
    elif cmd == "subdiff-br":
        res = subdifferential_br(obj("function"), p["point"], p["eps"], p["lambda"], tolerances=tol)
        trace = res.trace
        out = res.to_dict()
    elif cmd == "represented-operator":
        res = represented_operator(obj("bifunction"), _grid(p, n), tol)
        out = {"n_points": res.n_points, "conjugate_equality_ok": res.conjugate_equality_ok,
               "monotone": res.monotone, "points": [q.to_dict() for q in res.operator.points]}
    else:
        raise ScenarioSemanticError(f"unknown command '{cmd}'", cmd)

    if trace is not None:
        if trace_out:
            save_trace_csv(trace, trace_out)
        if summary_out:
            save_summary_json(trace.summary(), summary_out)
        if not trace.converged:
            raise SolverError(f"refinement did not converge: {trace.diagnostic}", trace.gaps[-1])
    return out


def run(scenario: Scenario, trace_out: Optional[str] = None, tol_class: Optional[str] = None,
        summary_out: Optional[str] = None) -> RunReport:
    """Execute the scenario command; warnings raised on the way are recorded in the report."""
    tol = tolerances(tol_class) if tol_class else None
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        objs = build_objects(scenario)
        outputs = _run_command(scenario, objs, tol, trace_out, summary_out)
    messages = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    tol_name = tol.name if tol else outputs.get("tolerance_class") or _default_class(scenario, objs)
    return RunReport(scenario=scenario.name, command=scenario.command, tol_class=tol_name,
                     outputs=format_ext(outputs), warnings=messages,
                     timing_seconds=time.perf_counter() - start)


def _default_class(scenario: Scenario, objs: Dict[str, Any]) -> str:
    used = [objs[v] for v in scenario.params.values() if v in objs]
    return config.tolerances_for(*used).name


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="monotone-rep", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--scenario", required=True, help="scenario file")
    parser.add_argument("--trace-out", help="write the refinement trace as CSV")
    parser.add_argument("--summary-out", help="write the refinement summary as JSON")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--tol-class", choices=["strict", "grid"], help="force a tolerance profile")
    args = parser.parse_args(argv)

    logging.basicConfig(level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        scenario = load_scenario(args.scenario)
    except (ScenarioSyntaxError, ScenarioSemanticError) as exc:
        logger.error("invalid scenario: %s", exc)
        return EXIT_PARSE
    except OSError as exc:
        logger.error("cannot read scenario: %s", exc)
        return EXIT_PARSE
    if args.seed is not None:
        scenario.seed = args.seed

    try:
        report = run(scenario, args.trace_out, args.tol_class, args.summary_out)
    except PreconditionError as exc:
        logger.error("precondition rejected: %s (measured %s)", exc, exc.measured)
        return EXIT_PRECONDITION
    except SolverError as exc:
        logger.error("solver failure: %s (best value %s)", exc, exc.best_value)
        return EXIT_SOLVER
    except ScenarioSemanticError as exc:
        logger.error("invalid scenario: %s", exc)
        return EXIT_PARSE
    except MonotoneRepError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    except ValueError as exc:
        logger.error("invalid parameter: %s", exc)
        return EXIT_PRECONDITION

    print(json.dumps(report.model_dump(), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
