"""Command-line entry point: ``veritrans <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from typing import List, Optional

from . import pipeline as pl
from .cnf import compile_formula, parse_dimacs, to_dimacs
from .config import Settings, load_settings
from .errors import VeriTransError
from .solver import solve
from .stats import summarize
from .translator import HttpTranslator, OfflineTranslator
from .validators import ENGLISH_STOP_WORDS


def _translator(args, settings: Settings):
    if args.offline:
        return OfflineTranslator()
    if settings.llm is None:
        raise SystemExit("no [llm] section in the config file; pass --config or use --offline")
    return HttpTranslator(settings.llm)


def _log(args) -> Optional[pl.ArtifactLog]:
    return pl.ArtifactLog(args.log) if getattr(args, "log", None) else None


def _stop_words(settings: Settings):
    return ENGLISH_STOP_WORDS if settings.remove_stop_words else None


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=False))


def _summary(s: pl.StageSummary) -> dict:
    return dataclasses.asdict(s)


def cmd_translate(args, settings):
    s = pl.run_stage1(args.input, _translator(args, settings), args.output,
                      settings.workers, _log(args), settings.columns)
    _print_json(_summary(s))


def cmd_roundtrip(args, settings):
    s = pl.run_stage2(args.input, _translator(args, settings), args.output,
                      settings.workers, _log(args), _stop_words(settings))
    _print_json(_summary(s))


def cmd_compile(args, settings):
    if args.formula is not None:
        sys.stdout.write(to_dimacs(compile_formula(args.formula)))
        return
    if not (args.input and args.output):
        raise SystemExit("compile needs --formula or both --input and --output")
    s = pl.run_stage3(args.input, args.output, solve_cnf=False, formula_column=args.formula_column,
                      workers=settings.workers, artifact_log=_log(args))
    _print_json(_summary(s))


def cmd_solve(args, settings):
    if args.dimacs:
        with open(args.dimacs, encoding="utf-8") as fh:
            cnf = parse_dimacs(fh.read())
        result = solve(cnf, args.budget)
        names = cnf.id_to_name()
        model = None
        if result.model is not None:
            model = {names.get(v, str(v)): val for v, val in sorted(result.model.items())}
        _print_json({"status": result.status.value, "decisions": result.decisions,
                     "propagations": result.propagations, "model": model})
        return
    if not (args.input and args.output):
        raise SystemExit("solve needs --dimacs or both --input and --output")
    s = pl.run_stage3(args.input, args.output, formula_column=args.formula_column,
                      workers=settings.workers, artifact_log=_log(args))
    _print_json(_summary(s))


def cmd_pipeline(args, settings):
    tau = args.tau if args.tau is not None else settings.tau
    summaries = pl.run_pipeline(args.input, _translator(args, settings), args.output, tau,
                                settings.workers, _log(args), settings.columns, _stop_words(settings))
    _print_json([_summary(s) for s in summaries])


def cmd_sweep(args, settings):
    rows = pl.read_rows(args.input)
    taus = pl.tau_grid(args.tau_min, args.tau_max, args.step)
    sim = pl.tau_sweep(rows, taus, "similarity")
    full = pl.tau_sweep(rows, taus, "full")
    print(f"{'tau':>6} {'coverage':>9} {'accuracy':>9} {'accepted':>9}  |"
          f" {'coverage*':>9} {'accuracy*':>9} {'accepted*':>9}")
    for a, b in zip(sim, full):
        fa = "-" if a.accuracy is None else f"{a.accuracy:.4f}"
        fb = "-" if b.accuracy is None else f"{b.accuracy:.4f}"
        print(f"{a.tau:6.1f} {a.coverage:9.4f} {fa:>9} {a.accepted_count:9d}  |"
              f" {b.coverage:9.4f} {fb:>9} {b.accepted_count:9d}")
    print("(* = full acceptance gate including structural checks)")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([dataclasses.asdict(p) for p in sim + full], fh, indent=2)


def cmd_score(args, settings):
    report = pl.score_correctness(pl.read_rows(args.input))
    _print_json(dataclasses.asdict(report))


def cmd_stats(args, settings):
    scores: List[float] = []
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if args.column not in (reader.fieldnames or []):
            raise SystemExit(f"{args.input}: no column {args.column!r}")
        for raw in reader:
            cell = (raw.get(args.column) or "").strip()
            if cell:
                scores.append(float(cell))
    taus = args.tau or [settings.tau]
    summary = summarize(scores, taus, resamples=args.resamples, seed=settings.seed)
    print(f"n       {summary.n}")
    print(f"mean    {summary.mean:.4f}")
    print(f"median  {summary.median:.4f}")
    print(f"95% CI  [{summary.ci95_low:.4f}, {summary.ci95_high:.4f}] (BCa, {args.resamples} resamples)")
    for tau, (count, prop) in summary.mass_at_tau.items():
        print(f">= {tau:g}  count {count}  proportion {prop:.3f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(summary.to_dict(), fh, indent=2)


def cmd_replay(args, settings):
    if args.formula is not None:
        sys.stdout.buffer.write(pl.replay(args.formula))
        return 0
    checked, mismatches = pl.replay_log(args.log)
    for m in mismatches:
        print(f"MISMATCH {m.item_id}: logged {m.logged_sha256} replayed {m.replayed_sha256}")
    print(f"replayed {checked} formulas, {len(mismatches)} mismatches")
    return 1 if mismatches else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veritrans", description=__doc__)
    parser.add_argument("--config", help="INI config file (see README)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def io(p, log=True):
        p.add_argument("--input", "-i")
        p.add_argument("--output", "-o")
        if log:
            p.add_argument("--log", help="append artifact records (JSON lines) to this file")

    p = sub.add_parser("translate", help="stage 1: NL -> PL")
    io(p)
    p.add_argument("--offline", action="store_true", help="echo gold_formula instead of calling a model")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("roundtrip", help="stage 2: PL -> NL and similarity")
    io(p)
    p.add_argument("--offline", action="store_true", help="use the template verbalizer")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("compile", help="stage 3 without solving")
    io(p)
    p.add_argument("--formula", help="compile one formula and print DIMACS")
    p.add_argument("--formula-column", default="generated_formula")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("solve", help="solve a DIMACS file, or run stage 3 on a CSV")
    io(p)
    p.add_argument("--dimacs")
    p.add_argument("--budget", type=int, default=10 ** 7, help="decision budget")
    p.add_argument("--formula-column", default="generated_formula")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pipeline", help="all stages plus the acceptance gate")
    io(p)
    p.add_argument("--offline", action="store_true")
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep", help="reliability/coverage over a tau grid")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--tau-min", type=float, default=60.0)
    p.add_argument("--tau-max", type=float, default=95.0)
    p.add_argument("--step", type=float, default=5.0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", help="SAT/UNSAT correctness against gold labels")
    p.add_argument("--input", "-i", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="summarize a column of similarity scores")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--column", default="similarity")
    p.add_argument("--tau", type=float, action="append")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("replay", help="regenerate DIMACS and check logged hashes")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--formula")
    g.add_argument("--log", help="JSONL artifact log or stage-3 CSV")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    settings = load_settings(args.config)
    try:
        rc = args.func(args, settings)
    except (VeriTransError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
