"""
Line-oriented scenario files.

    # comment
    SCENARIO identity-strict-br
    DIMENSION 1
    SEED 0
    OBJECT T identity
    COMMAND strict-br operator=T point=0|1 eps=0.25 eta=0.3 lambda=0.5

Values: scalars (inf allowed), vectors "1,2", matrices "1,0;0,1",
points "x|xstar", point lists "0|0/1|1" and name lists "f1,f2".
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import ScenarioSemanticError, ScenarioSyntaxError
from .operators import PrimalDualPoint

logger = logging.getLogger(__name__)

FUNCTION, OPERATOR, BIFUNCTION = "function", "operator", "bifunction"

# kind -> (category, {param: type}, required params)
KINDS: Dict[str, Tuple[str, Dict[str, str], Tuple[str, ...]]] = {
    "quadratic": (FUNCTION, {"A": "matrix", "b": "vector", "c": "scalar"}, ("A",)),
    "abs_norm": (FUNCTION, {"n": "int"}, ()),
    "box_indicator": (FUNCTION, {"lo": "vector", "hi": "vector", "linear": "vector", "const": "scalar"}, ("lo", "hi")),
    "box_support": (FUNCTION, {"lo": "vector", "hi": "vector", "center": "vector", "const": "scalar"}, ("lo", "hi")),
    "perturbed": (FUNCTION, {"of": FUNCTION, "shift": "vector", "linear": "vector", "const": "scalar"}, ("of",)),
    "grid": (FUNCTION, {"of": FUNCTION, "radius": "scalar", "resolution": "int"}, ("of",)),
    "separable_sum": (FUNCTION, {"parts": "functions"}, ("parts",)),
    "affine": (OPERATOR, {"A": "matrix", "b": "vector"}, ("A",)),
    "identity": (OPERATOR, {"n": "int"}, ()),
    "zero": (OPERATOR, {"n": "int"}, ()),
    "rotation2d": (OPERATOR, {}, ()),
    "subdifferential": (OPERATOR, {"of": FUNCTION}, ("of",)),
    "sampled_graph": (OPERATOR, {"points": "points", "of": OPERATOR, "radius": "scalar",
                                 "resolution": "int", "circle": "int"}, ()),
    "separable": (BIFUNCTION, {"of": FUNCTION, "g": FUNCTION}, ("of",)),
    "fitzpatrick": (BIFUNCTION, {"of": OPERATOR}, ("of",)),
    "sigma": (BIFUNCTION, {"of": OPERATOR}, ("of",)),
    "quadratic_form": (BIFUNCTION, {"Q": "matrix", "q": "vector", "c": "scalar"}, ("Q",)),
    "pairing": (BIFUNCTION, {"n": "int", "shift": "scalar"}, ()),
    "bifunction_grid": (BIFUNCTION, {"of": BIFUNCTION, "radius": "scalar", "resolution": "int"}, ("of",)),
    "translated": (BIFUNCTION, {"of": BIFUNCTION, "z": "vector", "zstar": "vector"}, ("of", "z", "zstar")),
    "transposed": (BIFUNCTION, {"of": BIFUNCTION}, ("of",)),
    "scaled": (BIFUNCTION, {"of": BIFUNCTION, "s": "scalar"}, ("of", "s")),
    "closure": (BIFUNCTION, {"of": BIFUNCTION}, ("of",)),
}

_GRID = {"radius": "scalar", "resolution": "int"}

# verb -> ({param: type}, required params)
COMMANDS: Dict[str, Tuple[Dict[str, str], Tuple[str, ...]]] = {
    "check-family": ({"bifunction": BIFUNCTION, "operator": OPERATOR, **_GRID}, ("bifunction", "operator")),
    "fitz-eval": ({"operator": OPERATOR, "point": "point"}, ("operator", "point")),
    "sigma-eval": ({"operator": OPERATOR, "point": "point"}, ("operator", "point")),
    "conjugate": ({"function": FUNCTION, "bifunction": BIFUNCTION, "at": "vector", "point": "point"}, ()),
    "dual-condition": ({"bifunction": BIFUNCTION, **_GRID}, ("bifunction",)),
    "fenchel-duality": ({"f": FUNCTION, "g": FUNCTION, **_GRID}, ("f", "g")),
    "eps-test": ({"function": FUNCTION, "point": "point", "eps": "scalar", "method": "str"}, ("function", "point", "eps")),
    "enlargement-test": ({"operator": OPERATOR, "point": "point", "eps": "scalar"}, ("operator", "point", "eps")),
    "br-step": ({"bifunction": BIFUNCTION, "point": "point", "eps": "scalar"}, ("bifunction", "point", "eps")),
    "br-refine": ({"bifunction": BIFUNCTION, "point": "point", "eps": "scalar", "lambda": "scalar"},
                  ("bifunction", "point", "eps")),
    "strict-br": ({"operator": OPERATOR, "point": "point", "eps": "scalar", "eta": "scalar", "lambda": "scalar"},
                  ("operator", "point", "eps", "eta", "lambda")),
    "maximality-probe": ({"bifunction": BIFUNCTION, "point": "point", "budget": "int"}, ("bifunction", "point")),
    "translate-check": ({"bifunction": BIFUNCTION, "z": "vector", "zstar": "vector", "samples": "int", **_GRID},
                        ("bifunction", "z", "zstar")),
    "subdiff-br": ({"function": FUNCTION, "point": "point", "eps": "scalar", "lambda": "scalar"},
                   ("function", "point", "eps", "lambda")),
    "represented-operator": ({"bifunction": BIFUNCTION, **_GRID}, ("bifunction",)),
}


@dataclass
class Declaration:
    """One OBJECT line with its raw parameter text."""
    name: str
    kind: str
    params: Dict[str, str] = field(default_factory=dict)
    line: int = field(default=0, compare=False)
    columns: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    @property
    def category(self) -> str:
        return KINDS[self.kind][0]


@dataclass
class Scenario:
    name: str
    dimension: int
    command: str
    params: Dict[str, str] = field(default_factory=dict)
    objects: List[Declaration] = field(default_factory=list)
    seed: int = 0
    command_line: int = field(default=0, compare=False)
    command_columns: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def declaration(self, name: str) -> Declaration:
        for decl in self.objects:
            if decl.name == name:
                return decl
        raise ScenarioSemanticError(f"undeclared object '{name}'", name)

    def value(self, key: str, default=None):
        """Typed command parameter."""
        if key not in self.params:
            return default
        kind = COMMANDS[self.command][0][key]
        return convert(kind, self.params[key], self.command_line, self.command_columns.get(key, 1))


# --- Values --- #

def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")], dtype=float)


def convert(kind: str, raw: str, line: int = 0, column: int = 1):
    """Convert raw parameter text to its typed value."""
    try:
        if kind == "scalar":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "vector":
            return _floats(raw)
        if kind == "matrix":
            rows = [_floats(r) for r in raw.split(";")]
            if len({len(r) for r in rows}) != 1:
                raise ValueError("ragged matrix")
            return np.vstack(rows)
        if kind == "point":
            x, xs = raw.split("|")
            return PrimalDualPoint(_floats(x), _floats(xs))
        if kind == "points":
            return [convert("point", part, line, column) for part in raw.split("/")]
        if kind == "functions":
            return [t for t in raw.split(",") if t]
        return raw
    except ScenarioSyntaxError:
        raise
    except ValueError as exc:
        raise ScenarioSyntaxError(f"cannot read '{raw}' as {kind}: {exc}", line, column) from exc


# --- Parsing --- #

def _tokens(text: str) -> List[Tuple[str, int]]:
    out, col = [], 0
    for tok in text.split():
        col = text.index(tok, col)
        out.append((tok, col + 1))
        col += len(tok)
    return out


def _key_values(tokens, line: int) -> Tuple[Dict[str, str], Dict[str, int]]:
    params, columns = {}, {}
    for tok, col in tokens:
        if "=" not in tok or tok.startswith("="):
            raise ScenarioSyntaxError(f"expected key=value, got '{tok}'", line, col)
        key, raw = tok.split("=", 1)
        if key in params:
            raise ScenarioSyntaxError(f"parameter '{key}' given twice", line, col)
        if not raw:
            raise ScenarioSyntaxError(f"parameter '{key}' has no value", line, col)
        params[key] = raw
        columns[key] = col + len(key) + 1
    return params, columns


def parse_scenario(text: str) -> Scenario:
    """
    Parse and validate scenario text.

    Raises:
        ScenarioSyntaxError: malformed line or value (with line and column)
        ScenarioSemanticError: unknown kind or name, missing parameter or
            dimension mismatch (naming the offending declaration)
    """
    name, dimension, seed = None, None, 0
    objects: List[Declaration] = []
    command = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0]
        tokens = _tokens(content)
        if not tokens:
            continue
        keyword, kcol = tokens[0]
        rest = tokens[1:]
        if keyword == "SCENARIO":
            if len(rest) != 1:
                raise ScenarioSyntaxError("SCENARIO takes one name", lineno, kcol)
            name = rest[0][0]
        elif keyword in ("DIMENSION", "SEED"):
            if len(rest) != 1:
                raise ScenarioSyntaxError(f"{keyword} takes one integer", lineno, kcol)
            try:
                value = int(rest[0][0])
            except ValueError:
                raise ScenarioSyntaxError(f"{keyword} takes one integer", lineno, rest[0][1]) from None
            if keyword == "DIMENSION":
                dimension = value
            else:
                seed = value
        elif keyword == "OBJECT":
            if len(rest) < 2:
                raise ScenarioSyntaxError("OBJECT needs a name and a kind", lineno, kcol)
            params, columns = _key_values(rest[2:], lineno)
            objects.append(Declaration(rest[0][0], rest[1][0], params, lineno, columns))
        elif keyword == "COMMAND":
            if command is not None:
                raise ScenarioSyntaxError("only one COMMAND per scenario", lineno, kcol)
            if not rest:
                raise ScenarioSyntaxError("COMMAND needs a verb", lineno, kcol)
            params, columns = _key_values(rest[1:], lineno)
            command = (rest[0][0], params, columns, lineno)
        else:
            raise ScenarioSyntaxError(f"unknown keyword '{keyword}'", lineno, kcol)

    if name is None:
        raise ScenarioSemanticError("missing SCENARIO line")
    if dimension is None or dimension < 1:
        raise ScenarioSemanticError("missing or invalid DIMENSION line")
    if command is None:
        raise ScenarioSemanticError("missing COMMAND line")
    verb, params, columns, cline = command
    scenario = Scenario(name, dimension, verb, params, objects, seed, cline, columns)
    validate(scenario)
    return scenario


# --- Validation --- #

def _check_params(label: str, schema: Dict[str, str], required, params, columns, line: int):
    for key in params:
        if key not in schema:
            raise ScenarioSemanticError(f"{label}: unknown parameter '{key}'", label)
    for key in required:
        if key not in params:
            raise ScenarioSemanticError(f"{label}: missing parameter '{key}'", label)
    for key, raw in params.items():
        if schema[key] not in (FUNCTION, OPERATOR, BIFUNCTION):
            convert(schema[key], raw, line, columns.get(key, 1))


def _declaration_dim(decl: Declaration, dims: Dict[str, int], n: int) -> int:
    p = {k: convert(KINDS[decl.kind][1][k], v, decl.line, decl.columns.get(k, 1))
         for k, v in decl.params.items() if KINDS[decl.kind][1][k] not in (FUNCTION, OPERATOR, BIFUNCTION)}
    kind = decl.kind
    if kind in ("quadratic", "affine"):
        A = p["A"]
        if A.shape[0] != A.shape[1]:
            raise ScenarioSemanticError(f"{decl.name}: matrix must be square", decl.name)
        dim = A.shape[0]
    elif kind in ("box_indicator", "box_support"):
        dim = len(p["lo"])
        if len(p["hi"]) != dim:
            raise ScenarioSemanticError(f"{decl.name}: lo and hi differ in length", decl.name)
    elif kind == "separable_sum":
        for part in p["parts"]:
            if part not in dims:
                raise ScenarioSemanticError(f"{decl.name}: undeclared object '{part}'", part)
            if dims[part] != 1:
                raise ScenarioSemanticError(f"{decl.name}: part '{part}' is not one-dimensional", decl.name)
        dim = len(p["parts"])
    elif kind == "rotation2d":
        dim = 2
    elif kind == "quadratic_form":
        Q = p["Q"]
        if Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
            raise ScenarioSemanticError(f"{decl.name}: Q must be square of even size", decl.name)
        dim = Q.shape[0] // 2
    elif kind == "sampled_graph" and "points" in p:
        dims_seen = {q.dim for q in p["points"]}
        if len(dims_seen) != 1:
            raise ScenarioSemanticError(f"{decl.name}: points of mixed dimensions", decl.name)
        dim = dims_seen.pop()
    elif "of" in decl.params:
        dim = dims[decl.params["of"]]
    elif kind == "sampled_graph":
        raise ScenarioSemanticError(f"{decl.name}: sampled_graph needs points= or of=", decl.name)
    else:
        dim = p.get("n", n)
    for key in ("b", "linear", "center", "shift", "z", "zstar"):
        if key in p and len(p[key]) != dim:
            raise ScenarioSemanticError(f"{decl.name}: '{key}' has length {len(p[key])}, expected {dim}", decl.name)
    if "q" in p and len(p["q"]) != 2 * dim:
        raise ScenarioSemanticError(f"{decl.name}: 'q' has length {len(p['q'])}, expected {2 * dim}", decl.name)
    if kind == "sampled_graph" and "circle" in p and dim != 2:
        raise ScenarioSemanticError(f"{decl.name}: circle sampling needs a planar operator", decl.name)
    return dim


def _check_reference(owner: str, key: str, ref: str, expected: str, categories: Dict[str, str]):
    if ref not in categories:
        raise ScenarioSemanticError(f"{owner}: undeclared object '{ref}'", ref)
    if categories[ref] != expected:
        raise ScenarioSemanticError(f"{owner}: '{key}={ref}' must name a {expected}, not a {categories[ref]}", ref)


def validate(scenario: Scenario):
    """Check names, kinds, parameters and dimensions of a parsed scenario."""
    categories: Dict[str, str] = {}
    dims: Dict[str, int] = {}
    for decl in scenario.objects:
        if decl.name in categories:
            raise ScenarioSemanticError(f"object '{decl.name}' declared twice", decl.name)
        if decl.kind not in KINDS:
            raise ScenarioSemanticError(f"{decl.name}: unknown kind '{decl.kind}'", decl.name)
        _, schema, required = KINDS[decl.kind]
        _check_params(decl.name, schema, required, decl.params, decl.columns, decl.line)
        for key, raw in decl.params.items():
            if schema[key] in (FUNCTION, OPERATOR, BIFUNCTION):
                _check_reference(decl.name, key, raw, schema[key], categories)
        if decl.kind == "separable_sum":
            for part in convert("functions", decl.params["parts"]):
                _check_reference(decl.name, "parts", part, FUNCTION, categories)
        dims[decl.name] = _declaration_dim(decl, dims, scenario.dimension)
        categories[decl.name] = decl.category

    if scenario.command not in COMMANDS:
        raise ScenarioSemanticError(f"unknown command '{scenario.command}'", scenario.command)
    schema, required = COMMANDS[scenario.command]
    _check_params(scenario.command, schema, required, scenario.params, scenario.command_columns, scenario.command_line)
    n = scenario.dimension
    for key, raw in scenario.params.items():
        kind = schema[key]
        if kind in (FUNCTION, OPERATOR, BIFUNCTION):
            _check_reference(scenario.command, key, raw, kind, categories)
            if dims[raw] != n:
                raise ScenarioSemanticError(f"'{raw}' has dimension {dims[raw]}, scenario has {n}", raw)
        elif kind == "point":
            point = scenario.value(key)
            if point.dim != n:
                raise ScenarioSemanticError(f"{scenario.command}: {key} has dimension {point.dim}, scenario has {n}", key)
        elif kind == "vector" and key in ("z", "zstar") and len(scenario.value(key)) != n:
            raise ScenarioSemanticError(f"{scenario.command}: {key} has wrong dimension", key)
    if scenario.command == "conjugate":
        given = [k for k in ("function", "bifunction") if k in scenario.params]
        if len(given) != 1:
            raise ScenarioSemanticError("conjugate needs exactly one of function= or bifunction=", "conjugate")
    logger.debug("validated scenario %s with %d objects", scenario.name, len(scenario.objects))


def serialize_scenario(scenario: Scenario) -> str:
    """Scenario text that parses back to an equal Scenario."""
    lines = [f"SCENARIO {scenario.name}", f"DIMENSION {scenario.dimension}", f"SEED {scenario.seed}"]
    for decl in scenario.objects:
        params = " ".join(f"{k}={v}" for k, v in decl.params.items())
        lines.append(f"OBJECT {decl.name} {decl.kind} {params}".rstrip())
    params = " ".join(f"{k}={v}" for k, v in scenario.params.items())
    lines.append(f"COMMAND {scenario.command} {params}".rstrip())
    return "\n".join(lines) + "\n"


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())


def object_params(decl: Declaration) -> Dict[str, object]:
    """Typed parameters of a declaration; references stay names."""
    schema = KINDS[decl.kind][1]
    return {k: convert(schema[k], v, decl.line, decl.columns.get(k, 1)) for k, v in decl.params.items()}


def command_params(scenario: Scenario) -> Dict[str, object]:
    return {k: scenario.value(k) for k in scenario.params}
