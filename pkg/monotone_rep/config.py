"""
Configuration for the monotone representation toolkit.
Tolerance profiles and runtime knobs, overridable through the environment.
"""
import os
from dataclasses import dataclass
from typing import Optional


def get_config_value(key, default=None):
    """
    Retrieves a configuration value from environment variables.
    Falls back to default if not set, and casts to the default's type.
    """
    raw = os.environ.get(f"MONOTONE_REP_{key}")
    if raw is None or default is None:
        return raw if raw is not None else default
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


# --- Configuration --- #
LOG_LEVEL = get_config_value("LOG_LEVEL", "WARNING")
N_JOBS = get_config_value("N_JOBS", 1)
CHUNK_SIZE = get_config_value("CHUNK_SIZE", 65536)

PROBE_BUDGET = get_config_value("PROBE_BUDGET", 200)
MAX_REFINE_STEPS = get_config_value("MAX_REFINE_STEPS", 200)
MIDPOINT_TESTS = get_config_value("MIDPOINT_TESTS", 1000)
MULTISTART_STARTS = get_config_value("MULTISTART_STARTS", 9)

GRID_RADIUS = get_config_value("GRID_RADIUS", 2.0)
GRID_RESOLUTION = get_config_value("GRID_RESOLUTION", 41)
DUALITY_RADIUS = get_config_value("DUALITY_RADIUS", 4.0)
DUALITY_RESOLUTION = get_config_value("DUALITY_RESOLUTION", 801)


@dataclass(frozen=True)
class Tolerances:
    """
    Numeric tolerances for one accuracy class.

    Args:
        name: profile label reported next to every numeric output
        mono: slack for monotonicity and enlargement tests
        dual: slack for Fenchel-Young and duality gaps
        rep: slack for representation checks (h >= pi, h* >= pi)
        ref: slack for refinement invariants
        gap: graph gap at which a refinement stops
        probe: distance at which the maximality probe succeeds
        x: matching tolerance for sampled graph lookups and graph membership
        feas: relative feasibility slack for boxes and affine ranges
    """
    name: str
    mono: float
    dual: float
    rep: float
    ref: float
    gap: float = 1e-8
    probe: float = 1e-3
    x: float = 1e-9
    feas: float = 1e-12


STRICT = Tolerances(name="strict", mono=1e-9, dual=1e-9, rep=1e-9, ref=1e-9)
GRID = Tolerances(name="grid", mono=1e-6, dual=1e-6, rep=1e-6, ref=1e-6)

_PROFILES = {"strict": STRICT, "grid": GRID}


def tolerances(tol_class: Optional[str] = None) -> Tolerances:
    """Return the tolerance profile called tol_class ("strict" or "grid")."""
    key = (tol_class or get_config_value("TOL_CLASS", "strict")).lower()
    if key not in _PROFILES:
        raise ValueError(f"Unknown tolerance class '{tol_class}', expected one of {sorted(_PROFILES)}")
    return _PROFILES[key]


def tolerances_for(*objects, override: Optional[Tolerances] = None) -> Tolerances:
    """Grid profile as soon as one of the objects is grid-backed, strict otherwise."""
    if override is not None:
        return override
    if any(getattr(obj, "is_grid", False) for obj in objects):
        return GRID
    return STRICT
