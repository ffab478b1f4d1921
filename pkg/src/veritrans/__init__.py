"""Natural-language requirements to CNF with round-trip validation."""
from .cnf import (CnfClauseSet, compile_formula, eliminate_connectives, map_lits_to_ints,
                  parse_dimacs, to_dimacs, tseitin_cnf)
from .formula import (And, Iff, Implies, Not, Or, Var, canonicalize_indexed_vars,
                      normalize_symbols, parse, render, rpn_to_ast, to_rpn, tokenize)
from .solver import SolveResult, Status, check_model, solve, truth_table_oracle
from .validators import accept, roundtrip_similarity, structural_check, tfidf_vectors

__version__ = "0.1.0"

__all__ = [
    "And", "Iff", "Implies", "Not", "Or", "Var",
    "canonicalize_indexed_vars", "normalize_symbols", "tokenize", "to_rpn", "rpn_to_ast",
    "parse", "render",
    "CnfClauseSet", "eliminate_connectives", "tseitin_cnf", "map_lits_to_ints",
    "compile_formula", "to_dimacs", "parse_dimacs",
    "SolveResult", "Status", "solve", "check_model", "truth_table_oracle",
    "tfidf_vectors", "roundtrip_similarity", "structural_check", "accept",
]
