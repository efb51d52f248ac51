"""spek: a model checker for protocol processes against spatial-epistemic
properties, with automatic network-adversary generation."""

from .terms import (
    App,
    FunctionSymbol,
    Name,
    RewriteRule,
    RewriteTheory,
    Term,
    Var,
    default_theory,
    eq_mod_e,
    normalize,
    validate_theory,
)
from .calculus import (
    ExplorationConfig,
    Process,
    canonical_form,
    extract_knowledge,
    ground_terms,
    reachable,
    reductions,
    transitions,
)
from .knowledge import (
    KnowledgeBasis,
    approximate,
    check_proof,
    derivable,
    derives_formula,
    prove,
)
from .attacker import AttackerSpec, generate_attacker, k_basis
from .logic import CheckResult, check, expand_count, satisfying_splits
from .frontend import parse_script, run

__version__ = "0.1.0"

__all__ = [
    "App", "AttackerSpec", "CheckResult", "ExplorationConfig",
    "FunctionSymbol", "KnowledgeBasis", "Name", "Process", "RewriteRule",
    "RewriteTheory", "Term", "Var", "approximate", "canonical_form", "check",
    "check_proof", "default_theory", "derivable", "derives_formula",
    "eq_mod_e", "expand_count", "extract_knowledge", "generate_attacker",
    "ground_terms", "k_basis", "normalize", "parse_script", "prove",
    "reachable", "reductions", "run", "satisfying_splits", "transitions",
    "validate_theory",
]
