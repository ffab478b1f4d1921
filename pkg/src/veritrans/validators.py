"""Round-trip similarity, structural CNF checks and the tau acceptance gate."""
from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import AbstractSet, Collection, Dict, List, Optional, Tuple

from .cnf import CnfClauseSet
from .errors import EmptyTextError, RangeError

_TERM_RE = re.compile(r"[a-z0-9]+")

# Off by default; pass to the similarity functions to drop these terms.
ENGLISH_STOP_WORDS = frozenset("""
a an and are as at be by for from has have if in is it its of on or that the
then this to was were will with
""".split())


def terms(text: str, stop_words: Optional[AbstractSet[str]] = None) -> List[str]:
    """Lowercased maximal alphanumeric runs."""
    found = _TERM_RE.findall(text.lower())
    if stop_words:
        found = [t for t in found if t not in stop_words]
    return found


def tfidf_vectors(doc_a: str, doc_b: str,
                  stop_words: Optional[AbstractSet[str]] = None
                  ) -> Tuple[Dict[str, float], Dict[str, float]]:
    """L2-normalized TF-IDF vectors fitted on the two-document corpus.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 with N = 2, tf is the raw count.
    Keys are inserted in lexicographic term order.
    """
    counts = [Counter(terms(doc_a, stop_words)), Counter(terms(doc_b, stop_words))]
    for which, c in zip("ab", counts):
        if not c:
            raise EmptyTextError(f"document {which} has no terms")
    vocab = sorted(set(counts[0]) | set(counts[1]))
    n_docs = len(counts)
    idf = {t: math.log((1 + n_docs) / (1 + sum(t in c for c in counts))) + 1.0 for t in vocab}

    vectors = []
    for c in counts:
        raw = {t: c[t] * idf[t] for t in vocab if c[t]}
        norm = math.sqrt(sum(v * v for v in raw.values()))
        vectors.append({t: v / norm for t, v in raw.items()})
    return vectors[0], vectors[1]


def cosine(u: Dict[str, float], v: Dict[str, float]) -> float:
    if len(v) < len(u):
        u, v = v, u
    return sum(w * v.get(t, 0.0) for t, w in u.items())


def roundtrip_similarity(original: str, reconstructed: str,
                         stop_words: Optional[AbstractSet[str]] = None) -> float:
    """100 x cosine of the pair's TF-IDF vectors, clamped to [0, 100]."""
    a, b = tfidf_vectors(original, reconstructed, stop_words)
    if a == b:
        # sum of squares of a unit vector can round to 1 - 1ulp
        return 100.0
    return min(100.0, max(0.0, 100.0 * cosine(a, b)))


# --------------------------------------------------------------------------
# Structural validators
# --------------------------------------------------------------------------

@dataclass
class StructuralVerdict:
    well_formed: bool
    uncovered_symbols: List[str] = field(default_factory=list)
    tautological_clauses: List[int] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    @property
    def symbol_coverage_ok(self) -> bool:
        return not self.uncovered_symbols

    @property
    def passed(self) -> bool:
        return self.well_formed and self.symbol_coverage_ok and not self.tautological_clauses


def well_formedness_problems(cnf: CnfClauseSet) -> List[str]:
    problems = []
    for i, clause in enumerate(cnf.clauses):
        for lit in clause:
            if lit == 0:
                problems.append(f"clause {i} contains literal 0")
            elif abs(lit) > cnf.num_vars:
                problems.append(f"clause {i}: literal {lit} exceeds num_vars={cnf.num_vars}")
    ids = list(cnf.symbol_table.values())
    if len(set(ids)) != len(ids):
        problems.append("symbol table maps two names to one id")
    if cnf.symbol_table and sorted(ids) != list(range(1, cnf.num_vars + 1)):
        problems.append("symbol table ids are not contiguous 1..num_vars")
    return problems


def tautological_clauses(cnf: CnfClauseSet) -> List[int]:
    """Indices of clauses containing some literal and its negation."""
    out = []
    for i, clause in enumerate(cnf.clauses):
        lits = set(clause)
        if any(-lit in lits for lit in lits):
            out.append(i)
    return out


def structural_check(cnf: CnfClauseSet, formula_vars: Collection[str],
                     declared_vars: Collection[str]) -> StructuralVerdict:
    problems = well_formedness_problems(cnf)
    return StructuralVerdict(
        well_formed=not problems,
        uncovered_symbols=sorted(set(formula_vars) - set(declared_vars)),
        tautological_clauses=tautological_clauses(cnf),
        problems=problems,
    )


# --------------------------------------------------------------------------
# Acceptance policy
# --------------------------------------------------------------------------

class RejectReason(str, enum.Enum):
    BELOW_TAU = "BELOW_TAU"
    MALFORMED = "MALFORMED"
    UNCOVERED_SYMBOLS = "UNCOVERED_SYMBOLS"
    TAUTOLOGY = "TAUTOLOGY"
    UNPARSEABLE = "UNPARSEABLE"

    def __str__(self) -> str:
        return self.value


DEFAULT_TAU = 75.0


@dataclass
class AcceptanceDecision:
    accepted: bool
    tau: float
    similarity: Optional[float]
    structural: Optional[StructuralVerdict]
    reject_reasons: List[RejectReason]


def check_tau(tau: float) -> float:
    if not 0.0 <= tau <= 100.0:
        raise RangeError(f"tau must lie in [0, 100], got {tau}")
    return tau


def accept(similarity: Optional[float], structural: Optional[StructuralVerdict],
           tau: float = DEFAULT_TAU) -> AcceptanceDecision:
    """Accept iff similarity >= tau and every structural check passes.

    A missing similarity or verdict means the item never got that far and
    is rejected as UNPARSEABLE.
    """
    check_tau(tau)
    reasons: List[RejectReason] = []
    if similarity is None or structural is None:
        reasons.append(RejectReason.UNPARSEABLE)
    if similarity is not None and similarity < tau:
        reasons.append(RejectReason.BELOW_TAU)
    if structural is not None:
        if not structural.well_formed:
            reasons.append(RejectReason.MALFORMED)
        if not structural.symbol_coverage_ok:
            reasons.append(RejectReason.UNCOVERED_SYMBOLS)
        if structural.tautological_clauses:
            reasons.append(RejectReason.TAUTOLOGY)
    return AcceptanceDecision(not reasons, tau, similarity, structural, reasons)
