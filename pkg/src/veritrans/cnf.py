"""Deterministic PL -> CNF compilation (Tseitin) and DIMACS I/O."""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import CompileError, FormatError
from .formula import And, Ast, Iff, Implies, Not, Or, Var, parse, variables

AUX_PREFIX = "_aux_"

NamedClause = List[str]


@dataclass
class CnfClauseSet:
    clauses: List[List[int]]
    num_vars: int
    symbol_table: Dict[str, int] = field(default_factory=dict)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def id_to_name(self) -> Dict[int, str]:
        return {v: k for k, v in self.symbol_table.items()}


def eliminate_connectives(ast: Ast) -> Ast:
    """Rewrite -> and <-> in terms of !, & and |."""
    if isinstance(ast, Var):
        return ast
    if isinstance(ast, Not):
        return Not(eliminate_connectives(ast.child))
    left = eliminate_connectives(ast.left)
    right = eliminate_connectives(ast.right)
    if isinstance(ast, And):
        return And(left, right)
    if isinstance(ast, Or):
        return Or(left, right)
    if isinstance(ast, Implies):
        return Or(Not(left), right)
    if isinstance(ast, Iff):
        return And(Or(Not(left), right), Or(Not(right), left))
    raise TypeError(f"not an AST node: {ast!r}")


def negate(lit: str) -> str:
    return lit[1:] if lit.startswith("!") else "!" + lit


class AuxAllocator:
    def __init__(self):
        self.next_index = 1

    def fresh(self) -> str:
        name = f"{AUX_PREFIX}{self.next_index}"
        self.next_index += 1
        return name


def tseitin_cnf(ast: Ast) -> Tuple[List[NamedClause], str]:
    """Tseitin-encode an AST over ``!``/``&``/``|`` into named clauses.

    Every internal node gets an auxiliary variable, except a negated leaf,
    which becomes a negative literal. Auxiliaries are allocated in post-order,
    and the final clause is the unit clause asserting the top literal.
    """
    for name in variables(ast):
        if name.startswith(AUX_PREFIX):
            raise CompileError(f"variable {name!r} uses the reserved prefix {AUX_PREFIX!r}")

    clauses: List[NamedClause] = []
    alloc = AuxAllocator()

    def encode(node: Ast) -> str:
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Not):
            if isinstance(node.child, Var):
                return "!" + node.child.name
            a = encode(node.child)
            v = alloc.fresh()
            clauses.append(["!" + v, negate(a)])
            clauses.append([a, v])
            return v
        if isinstance(node, (And, Or)):
            a = encode(node.left)
            b = encode(node.right)
            v = alloc.fresh()
            if isinstance(node, And):
                clauses.append(["!" + v, a])
                clauses.append(["!" + v, b])
                clauses.append([negate(a), negate(b), v])
            else:
                clauses.append(["!" + v, a, b])
                clauses.append([negate(a), v])
                clauses.append([negate(b), v])
            return v
        raise CompileError(f"{type(node).__name__} must be eliminated before Tseitin encoding")

    top = encode(ast)
    clauses.append([top])
    return clauses, top


def _aux_index(name: str) -> int:
    return int(name[len(AUX_PREFIX):])


def map_lits_to_ints(named_clauses: Sequence[NamedClause],
                     var_order: Optional[Iterable[str]] = None) -> CnfClauseSet:
    """Assign integer ids to names and translate the clauses.

    Source variables come first: those listed in ``var_order`` (when they
    occur in the clauses), then any others by first occurrence. Auxiliaries
    follow in allocation order.
    """
    seen: Dict[str, None] = {}
    for clause in named_clauses:
        for lit in clause:
            seen.setdefault(lit.lstrip("!"), None)
    source = [n for n in seen if not n.startswith(AUX_PREFIX)]
    aux = sorted((n for n in seen if n.startswith(AUX_PREFIX)), key=_aux_index)

    ordered: Dict[str, None] = {}
    if var_order is not None:
        present = set(source)
        for name in var_order:
            if name in present:
                ordered.setdefault(name, None)
    for name in source:
        ordered.setdefault(name, None)
    for name in aux:
        ordered.setdefault(name, None)

    table = {name: i for i, name in enumerate(ordered, start=1)}
    int_clauses = []
    for clause in named_clauses:
        row = []
        for lit in clause:
            if lit.startswith("!"):
                row.append(-table[lit[1:]])
            else:
                row.append(table[lit])
        int_clauses.append(row)
    return CnfClauseSet(int_clauses, len(table), table)


def compile_ast(ast: Ast, var_order: Optional[Iterable[str]] = None) -> CnfClauseSet:
    if var_order is None:
        var_order = variables(ast)
    named, _top = tseitin_cnf(eliminate_connectives(ast))
    return map_lits_to_ints(named, var_order)


def compile_formula(formula_text: str, var_order: Optional[Iterable[str]] = None) -> CnfClauseSet:
    ast, _ = parse(formula_text)
    return compile_ast(ast, var_order)


# --------------------------------------------------------------------------
# DIMACS
# --------------------------------------------------------------------------

def to_dimacs(cnf: CnfClauseSet) -> str:
    lines = [f"c {i} {name}" for name, i in sorted(cnf.symbol_table.items(), key=lambda kv: kv[1])]
    lines.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}")
    for clause in cnf.clauses:
        lines.append(" ".join([str(lit) for lit in clause] + ["0"]))
    return "\n".join(lines) + "\n"


def dimacs_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_SYMBOL_COMMENT_RE = re.compile(r"c (\d+) ([A-Za-z_][A-Za-z0-9_]*)\Z")


def parse_dimacs(text: str) -> CnfClauseSet:
    """Read DIMACS text.

    ``c <id> <name>`` comment lines rebuild the symbol table; any other
    comment line is ignored. Clauses may span lines.
    """
    header: Optional[Tuple[int, int]] = None
    table: Dict[str, int] = {}
    clauses: List[List[int]] = []
    current: List[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            m = _SYMBOL_COMMENT_RE.match(line)
            if m:
                name, ident = m.group(2), int(m.group(1))
                if name in table or ident in table.values():
                    raise FormatError(f"line {lineno}: duplicate symbol-table entry")
                table[name] = ident
            continue
        if line.startswith("p"):
            if header is not None:
                raise FormatError(f"line {lineno}: duplicate header")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"line {lineno}: malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise FormatError(f"line {lineno}: malformed header {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise FormatError(f"line {lineno}: negative count in header")
            continue
        if header is None:
            raise FormatError(f"line {lineno}: clause data before the 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise FormatError(f"line {lineno}: not an integer literal: {tok!r}") from None
            if lit == 0:
                clauses.append(current)
                current = []
            elif abs(lit) > header[0]:
                raise FormatError(f"line {lineno}: literal {lit} exceeds declared {header[0]} variables")
            else:
                current.append(lit)
    if header is None:
        raise FormatError("missing 'p cnf' header")
    if current:
        raise FormatError("last clause is not 0-terminated")
    if len(clauses) != header[1]:
        raise FormatError(f"header declares {header[1]} clauses, found {len(clauses)}")
    for name, ident in table.items():
        if not 1 <= ident <= header[0]:
            raise FormatError(f"symbol {name!r} mapped to out-of-range id {ident}")
    return CnfClauseSet(clauses, header[0], table)
