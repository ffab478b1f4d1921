"""Batch orchestration over CSV datasets.

Stage 1 translates requirements to formulas, stage 2 reconstructs text and
scores round-trip similarity, stage 3 compiles to DIMACS and solves. Each
stage reads and writes the same row schema (:data:`COLUMNS`), so stages can
be run separately or chained. Per-item failures are recorded in the
``status`` column and never abort a batch.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import (AbstractSet, Callable, Dict, Iterable, List, Mapping, Optional,
                    Sequence, Tuple)

from .cnf import compile_formula, dimacs_sha256, parse_dimacs, to_dimacs
from .errors import (DatasetFormatError, EmptyInputError, EmptyTextError,
                     VeriTransError)
from .formula import VarMap, parse
from .solver import Status, solve
from .translator import (Translator, extract_reconstruction, parse_varmap,
                         serialize_varmap)
from .validators import (DEFAULT_TAU, AcceptanceDecision, accept, check_tau,
                         roundtrip_similarity, structural_check)

log = logging.getLogger(__name__)

OK = "OK"
SKIPPED_EMPTY = "SKIPPED_EMPTY"
UNPARSEABLE = "UNPARSEABLE"


def error_status(exc: BaseException) -> str:
    return f"ERROR({type(exc).__name__}: {exc})"


# --------------------------------------------------------------------------
# Records and rows
# --------------------------------------------------------------------------

_LABELS = {
    "sat": Status.SAT, "satisfiable": Status.SAT, "true": Status.SAT, "1": Status.SAT,
    "unsat": Status.UNSAT, "unsatisfiable": Status.UNSAT, "false": Status.UNSAT, "0": Status.UNSAT,
}


def parse_label(value: Optional[str]) -> Optional[Status]:
    if value is None or not str(value).strip():
        return None
    try:
        return _LABELS[str(value).strip().lower()]
    except KeyError:
        raise DatasetFormatError(f"unrecognized SAT/UNSAT label {value!r}") from None


def condition_text(conditions: str) -> str:
    """Join a conditions cell: a JSON list of lines or plain text."""
    text = (conditions or "").strip()
    if text.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError:
            return text
        if isinstance(items, list):
            return "\n".join(str(i).strip() for i in items if str(i).strip())
    return text


@dataclass
class SpecRecord:
    id: str
    conditions: str
    scenario: str = ""
    variable_mapping: VarMap = field(default_factory=dict)
    gold_label: Optional[Status] = None
    gold_formula: str = ""


DATASET_FIELDS = ("id", "conditions", "scenario", "variable_mapping", "gold_label", "gold_formula")


def read_dataset(path: str, columns: Optional[Mapping[str, str]] = None) -> List[SpecRecord]:
    """Load SpecRecords from CSV.

    ``columns`` maps our field names to differently named source columns.
    Without an ``id`` column, 1-based row numbers are used.
    """
    columns = dict(columns or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        src = {f: columns.get(f, f) for f in DATASET_FIELDS}
        if src["conditions"] not in header:
            raise DatasetFormatError(f"{path}: missing required column {src['conditions']!r}")
        records = []
        seen = set()
        for lineno, raw in enumerate(reader, start=1):
            def get(name):
                return (raw.get(src[name]) or "") if src[name] in header else ""
            rid = get("id").strip() or str(lineno)
            if rid in seen:
                raise DatasetFormatError(f"{path}: duplicate id {rid!r}")
            seen.add(rid)
            if not get("conditions").strip():
                raise DatasetFormatError(f"{path}: row {rid!r} has empty conditions")
            try:
                mapping = parse_varmap(get("variable_mapping"))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: row {rid!r}: {exc}") from None
            records.append(SpecRecord(
                id=rid,
                conditions=get("conditions"),
                scenario=get("scenario"),
                variable_mapping=mapping,
                gold_label=parse_label(get("gold_label")),
                gold_formula=get("gold_formula"),
            ))
    return records


@dataclass
class StageRow:
    id: str
    conditions: str = ""
    scenario: str = ""
    variable_mapping: str = ""
    gold_label: str = ""
    gold_formula: str = ""
    # stage 1
    generated_formula: str = ""
    generated_mapping: str = ""
    latency_s: Optional[float] = None
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None
    total_tokens: Optional[int] = None
    # stage 2
    reconstructed_text: str = ""
    similarity: Optional[float] = None
    rt_latency_s: Optional[float] = None
    rt_total_tokens: Optional[int] = None
    # stage 3
    pred_from_script: str = ""
    cnf_dimacs: str = ""
    cnf_sha256: str = ""
    status: str = OK
    # acceptance gate
    accepted: str = ""
    reject_reasons: str = ""

    @classmethod
    def from_record(cls, rec: SpecRecord) -> "StageRow":
        return cls(
            id=rec.id,
            conditions=rec.conditions,
            scenario=rec.scenario,
            variable_mapping=serialize_varmap(rec.variable_mapping),
            gold_label=rec.gold_label.value if rec.gold_label else "",
            gold_formula=rec.gold_formula,
        )

    def to_csv_row(self) -> Dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = "" if value is None else (repr(value) if isinstance(value, float) else str(value))
        return out

    @classmethod
    def from_csv_row(cls, raw: Mapping[str, Optional[str]]) -> "StageRow":
        kwargs = {}
        for f in dataclasses.fields(cls):
            value = raw.get(f.name)
            if value is None:
                continue
            if f.name in _FLOAT_FIELDS:
                kwargs[f.name] = float(value) if value.strip() else None
            elif f.name in _INT_FIELDS:
                kwargs[f.name] = int(value) if value.strip() else None
            else:
                kwargs[f.name] = value
        if not kwargs.get("status"):
            kwargs["status"] = OK
        if "id" not in kwargs:
            raise DatasetFormatError("row without an id column")
        return cls(**kwargs)

    @property
    def ok(self) -> bool:
        return self.status == OK

    def input_mapping(self) -> VarMap:
        return parse_varmap(self.variable_mapping)

    def merged_mapping(self) -> VarMap:
        """Input mapping overlaid with the generated one; generated entries win."""
        merged = dict(self.input_mapping())
        merged.update(parse_varmap(self.generated_mapping))
        return merged


_FLOAT_FIELDS = {"latency_s", "similarity", "rt_latency_s"}
_INT_FIELDS = {"prompt_tokens", "completion_tokens", "total_tokens", "rt_total_tokens"}
COLUMNS = [f.name for f in dataclasses.fields(StageRow)]


def write_rows(path: str, rows: Iterable[StageRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_csv_row())


def read_rows(path: str) -> List[StageRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "id" not in (reader.fieldnames or []):
            raise DatasetFormatError(f"{path}: missing 'id' column")
        return [StageRow.from_csv_row(raw) for raw in reader]


# --------------------------------------------------------------------------
# Artifact log
# --------------------------------------------------------------------------

class ArtifactLog:
    """Append-only JSON-lines log of prompts, responses and CNF hashes.

    ``path=None`` keeps records in memory only.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: List[dict] = []
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        record = dict(record)
        record["timestamp"] = datetime.now(timezone.utc).isoformat()
        with self._lock:
            self.records.append(record)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _llm_record(item_id: str, stage: str, out) -> dict:
    prompt = out.prompt
    return {
        "item_id": item_id,
        "stage": stage,
        "prompt_sha256": prompt.sha256 if prompt else None,
        "prompt": {"system": prompt.system_text, "user": prompt.user_text} if prompt else None,
        "request": out.request_body,
        "response_text": out.raw_text,
        "response": out.response_body,
        "latency_s": out.latency,
        "prompt_tokens": out.prompt_tokens,
        "completion_tokens": out.completion_tokens,
        "total_tokens": out.total_tokens,
    }


def _run_items(fn: Callable[[StageRow], Tuple[StageRow, List[dict]]], rows: Sequence[StageRow],
               workers: int, artifact_log: Optional[ArtifactLog]) -> List[StageRow]:
    # executor.map keeps input order, so output bytes do not depend on workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, rows))
    else:
        results = [fn(r) for r in rows]
    out = []
    for row, records in results:
        out.append(row)
        if artifact_log is not None:
            for rec in records:
                artifact_log.write(rec)
    return out


@dataclass
class StageSummary:
    stage: str
    total: int
    by_status: Dict[str, int]

    @classmethod
    def of(cls, stage: str, rows: Sequence[StageRow]) -> "StageSummary":
        counts: Dict[str, int] = {}
        for row in rows:
            key = row.status if not row.status.startswith("ERROR") else "ERROR"
            counts[key] = counts.get(key, 0) + 1
        return cls(stage, len(rows), dict(sorted(counts.items())))


# --------------------------------------------------------------------------
# Stage 1: NL -> PL
# --------------------------------------------------------------------------

def translate_rows(records: Sequence[SpecRecord], translator: Translator, workers: int = 1,
                   artifact_log: Optional[ArtifactLog] = None) -> List[StageRow]:
    def one(rec: SpecRecord):
        row = StageRow.from_record(rec)
        try:
            out = translator.translate(rec.scenario, rec.variable_mapping,
                                       condition_text(rec.conditions), rec.gold_formula)
        except VeriTransError as exc:
            row.status = error_status(exc)
            return row, [{"item_id": rec.id, "stage": "NL2PL", "error": row.status}]
        row.latency_s = out.latency
        row.prompt_tokens = out.prompt_tokens
        row.completion_tokens = out.completion_tokens
        row.total_tokens = out.total_tokens
        row.generated_mapping = serialize_varmap(out.extracted_mapping or {})
        if out.extracted_formula:
            row.generated_formula = out.extracted_formula
            row.status = OK
        else:
            row.status = UNPARSEABLE
        return row, [_llm_record(rec.id, "NL2PL", out)]

    return _run_items(one, records, workers, artifact_log)


def run_stage1(dataset_path: str, translator: Translator, out_path: str, workers: int = 1,
               artifact_log: Optional[ArtifactLog] = None,
               columns: Optional[Mapping[str, str]] = None) -> StageSummary:
    rows = translate_rows(read_dataset(dataset_path, columns), translator, workers, artifact_log)
    write_rows(out_path, rows)
    return StageSummary.of("translate", rows)


# --------------------------------------------------------------------------
# Stage 2: PL -> NL and round-trip similarity
# --------------------------------------------------------------------------

def reconstruct_rows(rows: Sequence[StageRow], translator: Translator, workers: int = 1,
                     artifact_log: Optional[ArtifactLog] = None,
                     stop_words: Optional[AbstractSet[str]] = None) -> List[StageRow]:
    def one(src: StageRow):
        row = dataclasses.replace(src)
        if not row.generated_formula.strip():
            if row.ok:
                row.status = SKIPPED_EMPTY
            return row, []
        if not row.ok:
            return row, []
        try:
            out = translator.reconstruct(row.generated_formula, row.merged_mapping())
        except (VeriTransError, ValueError) as exc:
            row.status = error_status(exc)
            return row, [{"item_id": row.id, "stage": "PL2NL", "error": row.status}]
        row.reconstructed_text = extract_reconstruction(out.raw_text)
        row.rt_latency_s = out.latency
        row.rt_total_tokens = out.total_tokens
        try:
            row.similarity = roundtrip_similarity(condition_text(row.conditions),
                                                  row.reconstructed_text, stop_words)
        except EmptyTextError:
            row.similarity = 0.0
            row.status = UNPARSEABLE
        return row, [_llm_record(row.id, "PL2NL", out)]

    return _run_items(one, rows, workers, artifact_log)


def run_stage2(stage1_path: str, translator: Translator, out_path: str, workers: int = 1,
               artifact_log: Optional[ArtifactLog] = None,
               stop_words: Optional[AbstractSet[str]] = None) -> StageSummary:
    rows = reconstruct_rows(read_rows(stage1_path), translator, workers, artifact_log, stop_words)
    write_rows(out_path, rows)
    return StageSummary.of("roundtrip", rows)


# --------------------------------------------------------------------------
# Stage 3: PL -> CNF -> SAT
# --------------------------------------------------------------------------

def replay(formula: str) -> bytes:
    """DIMACS bytes for ``formula`` via the deterministic compile path."""
    return to_dimacs(compile_formula(formula)).encode("utf-8")


def compile_rows(rows: Sequence[StageRow], solve_cnf: bool = True,
                 formula_column: str = "generated_formula", workers: int = 1,
                 artifact_log: Optional[ArtifactLog] = None) -> List[StageRow]:
    def one(src: StageRow):
        row = dataclasses.replace(src)
        formula = getattr(row, formula_column) or ""
        if not formula.strip():
            if row.ok:
                row.status = SKIPPED_EMPTY
            return row, []
        started = time.perf_counter()
        try:
            cnf = compile_formula(formula)
            dimacs = to_dimacs(cnf)
            # compile-only must not leave a verdict from an earlier CNF behind
            row.pred_from_script = solve(cnf).status.value if solve_cnf else ""
        except VeriTransError as exc:
            row.status = error_status(exc)
            row.pred_from_script = row.cnf_dimacs = row.cnf_sha256 = ""
            return row, [{"item_id": row.id, "stage": "PL2CNF", "formula": formula, "error": row.status}]
        row.cnf_dimacs = dimacs
        row.cnf_sha256 = dimacs_sha256(dimacs)
        return row, [{
            "item_id": row.id,
            "stage": "PL2CNF",
            "formula": formula,
            "cnf_sha256": row.cnf_sha256,
            "num_vars": cnf.num_vars,
            "num_clauses": cnf.num_clauses,
            "pred": row.pred_from_script or None,
            "latency_s": time.perf_counter() - started,
        }]

    return _run_items(one, rows, workers, artifact_log)


def run_stage3(stage_path: str, out_path: str, solve_cnf: bool = True,
               formula_column: str = "generated_formula", workers: int = 1,
               artifact_log: Optional[ArtifactLog] = None) -> StageSummary:
    rows = compile_rows(read_rows(stage_path), solve_cnf, formula_column, workers, artifact_log)
    write_rows(out_path, rows)
    return StageSummary.of("compile" if not solve_cnf else "solve", rows)


# --------------------------------------------------------------------------
# Acceptance gate
# --------------------------------------------------------------------------

def declared_symbols(row: StageRow) -> List[str]:
    """The item's declared vocabulary: the input mapping when there is one,
    otherwise whatever the model declared alongside its formula."""
    declared = row.input_mapping()
    if not declared:
        declared = parse_varmap(row.generated_mapping)
    return list(declared)


def gate_row(row: StageRow, tau: float = DEFAULT_TAU) -> AcceptanceDecision:
    similarity = row.similarity
    if not row.ok or not row.generated_formula.strip():
        similarity = None
    structural = None
    if row.generated_formula.strip():
        try:
            _, formula_vars = parse(row.generated_formula)
            cnf = parse_dimacs(row.cnf_dimacs) if row.cnf_dimacs else compile_formula(row.generated_formula)
            structural = structural_check(cnf, formula_vars, declared_symbols(row))
        except VeriTransError:
            structural = None
    return accept(similarity, structural, tau)


def gate_rows(rows: Sequence[StageRow], tau: float = DEFAULT_TAU) -> List[StageRow]:
    out = []
    for src in rows:
        row = dataclasses.replace(src)
        decision = gate_row(row, tau)
        row.accepted = "true" if decision.accepted else "false"
        row.reject_reasons = ";".join(r.value for r in decision.reject_reasons)
        out.append(row)
    return out


def run_pipeline(dataset_path: str, translator: Translator, out_path: str,
                 tau: float = DEFAULT_TAU, workers: int = 1,
                 artifact_log: Optional[ArtifactLog] = None,
                 columns: Optional[Mapping[str, str]] = None,
                 stop_words: Optional[AbstractSet[str]] = None) -> List[StageSummary]:
    check_tau(tau)
    rows = translate_rows(read_dataset(dataset_path, columns), translator, workers, artifact_log)
    s1 = StageSummary.of("translate", rows)
    rows = reconstruct_rows(rows, translator, workers, artifact_log, stop_words)
    s2 = StageSummary.of("roundtrip", rows)
    rows = compile_rows(rows, workers=workers, artifact_log=artifact_log)
    s3 = StageSummary.of("solve", rows)
    rows = gate_rows(rows, tau)
    write_rows(out_path, rows)
    return [s1, s2, s3]


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

@dataclass
class SweepPoint:
    tau: float
    coverage: float
    accuracy: Optional[float]
    accepted_count: int
    total_count: int
    gate: str = "similarity"


def _similarity_gate(row: StageRow, tau: float) -> bool:
    return (row.similarity is not None and row.similarity >= tau
            and row.status not in (UNPARSEABLE, SKIPPED_EMPTY))


def tau_sweep(rows: Sequence[StageRow], taus: Sequence[float], gate: str = "similarity") -> List[SweepPoint]:
    """Coverage and accepted-set accuracy at each threshold.

    ``gate="similarity"`` filters on similarity alone; ``gate="full"`` applies
    the complete acceptance policy including structural checks. Rows
    without a similarity score count toward the total but are never
    accepted. Accepted rows without a prediction count as wrong.
    """
    if not rows:
        raise EmptyInputError("no result rows")
    if gate not in ("similarity", "full"):
        raise ValueError(f"unknown gate {gate!r}")
    labels = [parse_label(r.gold_label) for r in rows]
    points = []
    for tau in taus:
        check_tau(tau)
        if gate == "similarity":
            accepted = [_similarity_gate(r, tau) for r in rows]
        else:
            accepted = [gate_row(r, tau).accepted for r in rows]
        n_acc = sum(accepted)
        judged = correct = 0
        for row, label, ok in zip(rows, labels, accepted):
            if ok and label is not None:
                judged += 1
                correct += row.pred_from_script == label.value
        points.append(SweepPoint(float(tau), n_acc / len(rows),
                                 correct / judged if judged else None, n_acc, len(rows), gate))
    return points


def tau_grid(tau_min: float = 60.0, tau_max: float = 95.0, step: float = 5.0) -> List[float]:
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(round((tau_max - tau_min) / step))
    return [round(tau_min + i * step, 10) for i in range(count + 1)]


@dataclass
class CorrectnessReport:
    overall: float
    sat_only: Optional[float]
    unsat_only: Optional[float]
    n_labelled: int
    n_unpredicted: int


def score_correctness(rows: Sequence[StageRow]) -> CorrectnessReport:
    """SAT/UNSAT accuracy against gold labels.

    Rows lacking a prediction count as wrong everywhere (conservative) and
    are also counted separately in ``n_unpredicted``.
    """
    labelled = [(r, parse_label(r.gold_label)) for r in rows]
    labelled = [(r, lab) for r, lab in labelled if lab is not None]
    if not labelled:
        raise EmptyInputError("no rows carry a gold label")

    def acc(items):
        return sum(r.pred_from_script == lab.value for r, lab in items) / len(items) if items else None

    return CorrectnessReport(
        overall=acc(labelled),
        sat_only=acc([x for x in labelled if x[1] is Status.SAT]),
        unsat_only=acc([x for x in labelled if x[1] is Status.UNSAT]),
        n_labelled=len(labelled),
        n_unpredicted=sum(1 for r, _ in labelled if r.pred_from_script not in ("SAT", "UNSAT")),
    )


# --------------------------------------------------------------------------
# Replay verification
# --------------------------------------------------------------------------

@dataclass
class ReplayMismatch:
    item_id: str
    formula: str
    logged_sha256: str
    replayed_sha256: str


def load_logged_hashes(path: str) -> List[Tuple[str, str, str]]:
    """(item_id, formula, cnf_sha256) triples from a JSONL log or stage CSV."""
    triples = []
    if path.endswith(".csv"):
        for row in read_rows(path):
            if row.generated_formula.strip() and row.cnf_sha256:
                triples.append((row.id, row.generated_formula, row.cnf_sha256))
        return triples
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("stage") == "PL2CNF" and rec.get("cnf_sha256"):
                triples.append((str(rec.get("item_id", "")), rec["formula"], rec["cnf_sha256"]))
    return triples


def replay_log(path: str) -> Tuple[int, List[ReplayMismatch]]:
    """Recompile every logged formula; return (checked, mismatches)."""
    mismatches = []
    triples = load_logged_hashes(path)
    for item_id, formula, logged in triples:
        try:
            got = dimacs_sha256(replay(formula).decode("utf-8"))
        except VeriTransError as exc:
            got = error_status(exc)
        if got != logged:
            mismatches.append(ReplayMismatch(item_id, formula, logged, got))
    return len(triples), mismatches
