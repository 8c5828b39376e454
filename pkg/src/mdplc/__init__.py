"""MDPL: a compiler toolkit for probabilistic planning domains.

Pipeline: parse MDPL text, ground the reachable state space, refine
branch probabilities, annotate rewards, then either emit model-checker
input, solve reachability/reward objectives directly, or Monte Carlo
simulate a policy.
"""

from .errors import (
    CapExceeded,
    Diagnostic,
    EncodingError,
    EvalError,
    GroundingError,
    MdplcError,
    ModelError,
    NotEnabled,
    ParseError,
    UnsupportedConstruct,
)
from .grounder import build_graph
from .model import Atom, Edge, MdpGraph, Policy, State, Var, canonicalize
from .parser import check_domain, format_domain, parse_domain
from .prism import emit, emit_props, parse_prism_subset, same_structure
from .refine import check_normalization, refine
from .rewards import annotate, state_action_reward
from .simulate import Executor, SimReport, export_table, load_table, resolve_table, simulate
from .solver import (
    SolveResult,
    expected_reward,
    extract_policy,
    label_states,
    oracle_enumerate,
    pmax,
)

__version__ = "0.1.0"

__all__ = [
    "Atom", "CapExceeded", "Diagnostic", "Edge", "EncodingError", "EvalError",
    "Executor", "GroundingError", "MdpGraph", "MdplcError", "ModelError",
    "NotEnabled", "ParseError", "Policy", "SimReport", "SolveResult", "State",
    "UnsupportedConstruct", "Var", "annotate", "build_graph", "canonicalize",
    "check_domain", "check_normalization", "emit", "emit_props",
    "expected_reward", "export_table", "extract_policy", "format_domain",
    "label_states", "load_table", "oracle_enumerate", "parse_domain",
    "parse_prism_subset", "pmax", "refine", "resolve_table", "same_structure",
    "simulate", "state_action_reward",
]
