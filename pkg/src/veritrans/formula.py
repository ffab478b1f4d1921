"""Propositional formula front end: lexing, shunting-yard parsing, rendering.

Surface syntax accepted after normalization::

    !a   a & b   a | b   a -> b   a <-> b   ( ... )

Precedence, tightest first: ``!``, ``&``, ``|``, ``->``, ``<->``.
``->`` is right-associative; ``&``, ``|`` and ``<->`` associate to the left.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Dict, Iterator, List, Tuple, Union

from .errors import LexError, ParseError

# ordered name -> natural-language description
VarMap = Dict[str, str]

IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")


@dataclass(frozen=True)
class Not:
    child: "Ast"


@dataclass(frozen=True)
class And:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Or:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Implies:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Iff:
    left: "Ast"
    right: "Ast"


Ast = Union[Var, Not, And, Or, Implies, Iff]
BINARY_NODES = (And, Or, Implies, Iff)


def iter_vars(ast: Ast) -> Iterator[str]:
    """Yield variable names left to right, with repeats."""
    stack = [ast]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            yield node.name
        elif isinstance(node, Not):
            stack.append(node.child)
        else:
            stack.append(node.right)
            stack.append(node.left)


def variables(ast: Ast) -> List[str]:
    """Distinct variable names in order of first (leftmost) occurrence."""
    return list(dict.fromkeys(iter_vars(ast)))


def evaluate(ast: Ast, assignment) -> bool:
    if isinstance(ast, Var):
        return bool(assignment[ast.name])
    if isinstance(ast, Not):
        return not evaluate(ast.child, assignment)
    left = evaluate(ast.left, assignment)
    right = evaluate(ast.right, assignment)
    if isinstance(ast, And):
        return left and right
    if isinstance(ast, Or):
        return left or right
    if isinstance(ast, Implies):
        return (not left) or right
    if isinstance(ast, Iff):
        return left == right
    raise TypeError(f"not an AST node: {ast!r}")


# --------------------------------------------------------------------------
# Pre-lexing rewrites
# --------------------------------------------------------------------------

_INDEXED_VAR_RE = re.compile(r"(?<![A-Za-z0-9_])x\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def canonicalize_indexed_vars(formula_text: str) -> str:
    """Rewrite ``x(i,j)`` (whitespace tolerant) to ``x_i_j``."""
    return _INDEXED_VAR_RE.sub(r"x_\1_\2", formula_text)


_SYMBOL_RE = re.compile(
    r"<=>|=>|&&+|\|\|+|[¬~∧∨→↔]|(?<![A-Za-z0-9_])V(?![A-Za-z0-9_])"
)
_SYMBOL_MAP = {
    "¬": "!", "~": "!",
    "∧": "&",
    "∨": "|", "V": "|",
    "→": "->", "=>": "->",
    "↔": "<->", "<=>": "<->",
}


def _symbol_sub(match: re.Match) -> str:
    tok = match.group(0)
    if tok.startswith("&"):
        return "&"
    if tok.startswith("|"):
        return "|"
    return _SYMBOL_MAP[tok]


def normalize_symbols(formula_text: str) -> str:
    """Map Unicode/ASCII operator aliases onto ``! & | -> <->``.

    Rewrites are applied to a fixpoint so the function is idempotent even
    when a replacement lands next to an existing operator (``∧&`` -> ``&``).
    Every pass after the first is length non-increasing, so this terminates.
    """
    prev = None
    text = formula_text
    while text != prev:
        prev = text
        text = _SYMBOL_RE.sub(_symbol_sub, text)
    return text


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

class TokenKind(enum.Enum):
    VAR = "VAR"
    NOT = "NOT"
    AND = "AND"
    OR = "OR"
    IMPLIES = "IMPLIES"
    IFF = "IFF"
    LPAREN = "LPAREN"
    RPAREN = "RPAREN"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    position: int


_IDENT_CHARS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_")
_SINGLE = {"!": TokenKind.NOT, "&": TokenKind.AND, "|": TokenKind.OR,
           "(": TokenKind.LPAREN, ")": TokenKind.RPAREN}


def _snippet(text: str, pos: int) -> str:
    return text[pos:pos + 10]


def tokenize(formula_text: str) -> List[Token]:
    tokens: List[Token] = []
    text = formula_text
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in _SINGLE:
            tokens.append(Token(_SINGLE[c], c, i))
            i += 1
        elif text.startswith("<->", i):
            tokens.append(Token(TokenKind.IFF, "<->", i))
            i += 3
        elif text.startswith("->", i):
            tokens.append(Token(TokenKind.IMPLIES, "->", i))
            i += 2
        elif c in _IDENT_CHARS:
            j = i
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            name = text[i:j]
            if not IDENTIFIER_RE.match(name):
                raise LexError(i, _snippet(text, i), "identifier may not start with a digit")
            tokens.append(Token(TokenKind.VAR, name, i))
            i = j
        else:
            raise LexError(i, _snippet(text, i))
    return tokens


# --------------------------------------------------------------------------
# Shunting-yard
# --------------------------------------------------------------------------

_PRECEDENCE = {
    TokenKind.NOT: 5,
    TokenKind.AND: 4,
    TokenKind.OR: 3,
    TokenKind.IMPLIES: 2,
    TokenKind.IFF: 1,
}
_RIGHT_ASSOC = {TokenKind.NOT, TokenKind.IMPLIES}
_BINARY = {TokenKind.AND, TokenKind.OR, TokenKind.IMPLIES, TokenKind.IFF}


def _err(msg: str, tok: Token | None = None) -> ParseError:
    if tok is None:
        return ParseError(msg)
    return ParseError(f"{msg} at offset {tok.position} ({tok.lexeme!r})")


def to_rpn(tokens: List[Token]) -> List[Token]:
    """Convert an infix token stream to reverse Polish notation.

    Tracks whether an operand or an operator is expected next, so arity
    mistakes (``a b``, ``a &``, ``& a``, ``()``) fail here rather than
    surfacing as an opaque stack error later.
    """
    output: List[Token] = []
    ops: List[Token] = []
    expect_operand = True
    last = None
    for tok in tokens:
        kind = tok.kind
        if kind is TokenKind.VAR:
            if not expect_operand:
                raise _err("missing operator before operand", tok)
            output.append(tok)
            expect_operand = False
        elif kind is TokenKind.NOT:
            if not expect_operand:
                raise _err("negation cannot follow an operand", tok)
            ops.append(tok)
        elif kind in _BINARY:
            if expect_operand:
                raise _err("binary operator is missing its left operand", tok)
            prec = _PRECEDENCE[kind]
            while ops and ops[-1].kind is not TokenKind.LPAREN:
                top = _PRECEDENCE[ops[-1].kind]
                if top > prec or (top == prec and kind not in _RIGHT_ASSOC):
                    output.append(ops.pop())
                else:
                    break
            ops.append(tok)
            expect_operand = True
        elif kind is TokenKind.LPAREN:
            if not expect_operand:
                raise _err("missing operator before '('", tok)
            ops.append(tok)
        elif kind is TokenKind.RPAREN:
            if expect_operand:
                raise _err("empty or incomplete parenthesized group", tok)
            while ops and ops[-1].kind is not TokenKind.LPAREN:
                output.append(ops.pop())
            if not ops:
                raise _err("unmatched ')'", tok)
            ops.pop()
        last = tok
    if expect_operand:
        raise _err("formula ends where an operand is expected", last)
    while ops:
        tok = ops.pop()
        if tok.kind is TokenKind.LPAREN:
            raise _err("unclosed '('", tok)
        output.append(tok)
    return output


_NODE_FOR = {
    TokenKind.AND: And,
    TokenKind.OR: Or,
    TokenKind.IMPLIES: Implies,
    TokenKind.IFF: Iff,
}


def rpn_to_ast(rpn: List[Token]) -> Ast:
    stack: List[Ast] = []
    for tok in rpn:
        if tok.kind is TokenKind.VAR:
            stack.append(Var(tok.lexeme))
        elif tok.kind is TokenKind.NOT:
            if not stack:
                raise _err("stack underflow", tok)
            stack.append(Not(stack.pop()))
        elif tok.kind in _NODE_FOR:
            if len(stack) < 2:
                raise _err("stack underflow", tok)
            right = stack.pop()
            left = stack.pop()
            stack.append(_NODE_FOR[tok.kind](left, right))
        else:
            raise _err("parenthesis in RPN stream", tok)
    if len(stack) != 1:
        raise ParseError(f"RPN evaluation left {len(stack)} items on the stack")
    return stack[0]


def parse(formula_text: str) -> Tuple[Ast, frozenset]:
    """Full front end: rewrite, lex, shunting-yard, build tree.

    Returns the tree and the set of distinct variable names in it.
    """
    text = normalize_symbols(canonicalize_indexed_vars(formula_text))
    tokens = tokenize(text)
    if not tokens:
        raise ParseError("empty formula")
    ast = rpn_to_ast(to_rpn(tokens))
    return ast, frozenset(iter_vars(ast))


def parse_ast(formula_text: str) -> Ast:
    return parse(formula_text)[0]


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

_SYMBOL_FOR = {And: "&", Or: "|", Implies: "->", Iff: "<->"}


def render(ast: Ast) -> str:
    """Fully parenthesized canonical text; ``parse(render(t))[0] == t``."""
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Not):
        return "!" + render(ast.child)
    return f"({render(ast.left)} {_SYMBOL_FOR[type(ast)]} {render(ast.right)})"
