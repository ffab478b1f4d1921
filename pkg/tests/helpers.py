"""Shared test utilities: random formulas and an independent CNF brute force."""
import itertools
import random

from veritrans.formula import And, Iff, Implies, Not, Or, Var

BINARY = (And, Or, Implies, Iff)


def random_ast(rng: random.Random, n_vars: int = 5, depth: int = 4, names=None):
    """Random formula over ``n_vars`` variables with depth at most ``depth``."""
    names = names or [f"v{i}" for i in range(n_vars)]
    if depth <= 0 or rng.random() < 0.2:
        return Var(rng.choice(names))
    if rng.random() < 0.2:
        return Not(random_ast(rng, n_vars, depth - 1, names))
    node = rng.choice(BINARY)
    return node(random_ast(rng, n_vars, depth - 1, names), random_ast(rng, n_vars, depth - 1, names))


def brute_force_cnf_sat(clauses, num_vars):
    """Enumerate all assignments of an integer clause set (small only)."""
    for bits in itertools.product((False, True), repeat=num_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False
