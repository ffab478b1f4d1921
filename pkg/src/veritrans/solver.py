"""DPLL decision procedure and an exhaustive truth-table oracle."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .cnf import CnfClauseSet
from .errors import CapacityError, ResourceError
from .formula import Ast, evaluate, variables

DEFAULT_DECISION_BUDGET = 10 ** 7
ORACLE_MAX_VARS = 20


class Status(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"

    def __str__(self) -> str:
        return self.value


@dataclass
class SolveResult:
    status: Status
    model: Optional[Dict[int, bool]]
    decisions: int = 0
    propagations: int = 0

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT


Clauses = List[Tuple[int, ...]]


def _assign(clauses: Clauses, lit: int) -> Optional[Clauses]:
    """Simplify under ``lit`` = true. Returns None on an empty clause."""
    out = []
    neg = -lit
    for clause in clauses:
        if lit in clause:
            continue
        if neg in clause:
            reduced = tuple(x for x in clause if x != neg)
            if not reduced:
                return None
            out.append(reduced)
        else:
            out.append(clause)
    return out


class _Dpll:
    def __init__(self, budget: int):
        self.budget = budget
        self.decisions = 0
        self.propagations = 0

    def simplify(self, clauses: Clauses, assignment: Dict[int, bool]) -> Optional[Clauses]:
        """Unit propagation and pure-literal elimination to a fixpoint."""
        while True:
            unit = next((c[0] for c in clauses if len(c) == 1), None)
            if unit is not None:
                self.propagations += 1
                assignment[abs(unit)] = unit > 0
                clauses = _assign(clauses, unit)
                if clauses is None:
                    return None
                continue
            lits = {x for c in clauses for x in c}
            pure = sorted((x for x in lits if -x not in lits), key=abs)
            if not pure:
                return clauses
            for lit in pure:
                assignment[abs(lit)] = lit > 0
                clauses = [c for c in clauses if lit not in c]

    def run(self, clauses: Clauses) -> Optional[Dict[int, bool]]:
        # explicit stack: (clauses, assignment, literal to assert or None)
        stack = [(clauses, {}, None)]
        while stack:
            clauses, assignment, lit = stack.pop()
            if lit is not None:
                assignment = dict(assignment)
                assignment[abs(lit)] = lit > 0
                clauses = _assign(clauses, lit)
                if clauses is None:
                    continue
            clauses = self.simplify(clauses, assignment)
            if clauses is None:
                continue
            if not clauses:
                return assignment
            self.decisions += 1
            if self.decisions > self.budget:
                raise ResourceError(f"decision budget of {self.budget} exhausted")
            var = min(abs(x) for c in clauses for x in c)
            stack.append((clauses, assignment, -var))
            stack.append((clauses, assignment, var))
        return None


def solve(cnf: CnfClauseSet, decision_budget: int = DEFAULT_DECISION_BUDGET) -> SolveResult:
    """Decide satisfiability of ``cnf``.

    Branches on the lowest-numbered variable still occurring in the
    simplified clause set, trying true first. Variables left unconstrained
    in a model are set to false so the model is total.
    """
    clauses = [tuple(c) for c in cnf.clauses]
    if any(len(c) == 0 for c in clauses):
        return SolveResult(Status.UNSAT, None)
    engine = _Dpll(decision_budget)
    assignment = engine.run(clauses)
    if assignment is None:
        return SolveResult(Status.UNSAT, None, engine.decisions, engine.propagations)
    model = {v: assignment.get(v, False) for v in range(1, cnf.num_vars + 1)}
    return SolveResult(Status.SAT, model, engine.decisions, engine.propagations)


def check_model(cnf: CnfClauseSet, model: Dict[int, bool]) -> bool:
    return all(any(model[abs(lit)] == (lit > 0) for lit in clause) for clause in cnf.clauses)


def truth_table_oracle(ast: Ast) -> Status:
    names = variables(ast)
    if len(names) > ORACLE_MAX_VARS:
        raise CapacityError(f"{len(names)} variables exceeds the oracle cap of {ORACLE_MAX_VARS}")
    for values in itertools.product((False, True), repeat=len(names)):
        if evaluate(ast, dict(zip(names, values))):
            return Status.SAT
    return Status.UNSAT
