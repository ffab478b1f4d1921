"""Regenerate the packaged fixture files.

    python tests/make_fixtures.py

Writes src/veritrans/data/closed_loop.csv (requirements with aligned
variable mappings and gold formulas) and tests/fixtures/frozen_log.jsonl
(replay hashes for a fixed formula set). Gold labels come from the
truth-table oracle, never from the solver under test.
"""
import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from helpers import random_ast  # noqa: E402
from veritrans.cnf import dimacs_sha256  # noqa: E402
from veritrans.formula import parse, render  # noqa: E402
from veritrans.pipeline import StageRow, replay, write_rows  # noqa: E402
from veritrans.solver import truth_table_oracle  # noqa: E402
from veritrans.translator import serialize_varmap  # noqa: E402

# (scenario, conditions, mapping, formula)
ITEMS = [
    ("Server room cooling",
     "If the temperature is above the threshold and the cooling system is offline, "
     "then an emergency shutdown is triggered or an alarm sounds.",
     {"T": "the temperature is above the threshold", "C": "the cooling system is offline",
      "S": "an emergency shutdown is triggered", "A": "an alarm sounds"},
     "((T & C) -> (S | A))"),
    ("Building access",
     "The door is locked if and only if the alarm is armed.",
     {"D": "the door is locked", "A": "the alarm is armed"},
     "(D <-> A)"),
    ("Pressure line",
     "The valve is open, and if the valve is open, then the pressure is low, "
     "and it is not the case that the pressure is low.",
     {"v": "the valve is open", "p": "the pressure is low"},
     "((v & (v -> p)) & !p)"),
    ("Elevator safety",
     "If the elevator is moving, then the doors are closed.",
     {"m": "the elevator is moving", "d": "the doors are closed"},
     "(m -> d)"),
    ("Battery management",
     "The battery is charging or the device is running on mains power.",
     {"b": "the battery is charging", "p": "the device is running on mains power"},
     "(b | p)"),
    ("Traffic light",
     "The red light is on and the green light is on, and if the red light is on, "
     "then it is not the case that the green light is on.",
     {"r": "the red light is on", "g": "the green light is on"},
     "((r & g) & (r -> !g))"),
    ("Backup schedule",
     "If the nightly job fails, then an operator is paged.",
     {"f": "the nightly job fails", "o": "an operator is paged"},
     "(f -> o)"),
    ("Seating plan",
     "The first guest sits at table one or the first guest sits at table two, "
     "and it is not the case that the first guest sits at table one.",
     {"x_0_0": "the first guest sits at table one", "x_0_1": "the first guest sits at table two"},
     "((x(0,0) V x(0,1)) & ~x(0,0))"),
    ("Seating conflict",
     "The first guest sits at table one and the second guest sits at table one, "
     "and if the first guest sits at table one, then it is not the case that "
     "the second guest sits at table one.",
     {"x_0_0": "the first guest sits at table one", "x_1_0": "the second guest sits at table one"},
     "((x(0,0) & x(1,0)) & (x(0,0) -> ~x(1,0)))"),
    ("Login policy",
     "If the password is expired, then the user must reset the password.",
     {"e": "the password is expired", "r": "the user must reset the password"},
     "(e -> r)"),
    ("Fuel system",
     "The fuel level is low if and only if the warning lamp is lit.",
     {"f": "the fuel level is low", "w": "the warning lamp is lit"},
     "(f <-> w)"),
    ("Reactor interlock",
     "If the coolant flow stops, then the control rods are inserted, "
     "and the coolant flow stops, and it is not the case that the control rods are inserted.",
     {"c": "the coolant flow stops", "r": "the control rods are inserted"},
     "(((c -> r) & c) & !r)"),
    ("Irrigation",
     "If the soil is dry and it is not raining, then the sprinklers are turned on.",
     {"s": "the soil is dry", "r": "it is raining", "k": "the sprinklers are turned on"},
     "((s & !r) -> k)"),
    ("Payment",
     "The payment is approved or the order is cancelled.",
     {"a": "the payment is approved", "c": "the order is cancelled"},
     "(a | c)"),
    ("Robot arm",
     "If the gripper is closed, then the object is held, "
     "and if the object is held, then the arm may move.",
     {"g": "the gripper is closed", "h": "the object is held", "m": "the arm may move"},
     "((g -> h) & (h -> m))"),
    ("Network failover",
     "The primary link is up or the backup link is up, and it is not the case that "
     "the primary link is up, and it is not the case that the backup link is up.",
     {"p": "the primary link is up", "b": "the backup link is up"},
     "(((p | b) & !p) & !b)"),
    ("Medical alert",
     "If the heart rate is high or the oxygen level is low, then the nurse is notified.",
     {"h": "the heart rate is high", "o": "the oxygen level is low", "n": "the nurse is notified"},
     "((h | o) -> n)"),
    ("Printer queue",
     "The printer is idle if and only if the queue is empty.",
     {"i": "the printer is idle", "q": "the queue is empty"},
     "(i <-> q)"),
    ("Exam schedule",
     "The exam is in room one and the exam is in room two, and it is not the case that "
     "the exam is in room one and the exam is in room two.",
     {"x_0_0": "the exam is in room one", "x_0_1": "the exam is in room two"},
     "((x(0,0) & x(0,1)) & !(x(0,0) & x(0,1)))"),
    ("Smart lighting",
     "If motion is detected and it is dark, then the lights turn on.",
     {"m": "motion is detected", "d": "it is dark", "l": "the lights turn on"},
     "((m & d) -> l)"),
    ("Firewall",
     "If the packet is malformed, then the packet is dropped.",
     {"m": "the packet is malformed", "d": "the packet is dropped"},
     "(m -> d)"),
    ("Vending machine",
     "The coin is accepted and the product is dispensed, or the coin is returned.",
     {"a": "the coin is accepted", "d": "the product is dispensed", "r": "the coin is returned"},
     "((a & d) | r)"),
    ("Train signalling",
     "The signal is green, and if the signal is green, then the track is clear, "
     "and it is not the case that the track is clear.",
     {"g": "the signal is green", "c": "the track is clear"},
     "((g & (g -> c)) & !c)"),
    ("Greenhouse",
     "If the humidity is high, then the vents are open or the fans are running.",
     {"h": "the humidity is high", "v": "the vents are open", "f": "the fans are running"},
     "(h -> (v | f))"),
    ("Tournament",
     "The first team wins the first match or the second team wins the first match, "
     "and it is not the case that the first team wins the first match.",
     {"x_0_0": "the first team wins the first match", "x_1_0": "the second team wins the first match"},
     "((x(0,0) | x(1,0)) & !x(0,0))"),
    ("Data retention",
     "The record is archived if and only if the retention period has expired.",
     {"a": "the record is archived", "e": "the retention period has expired"},
     "(a <-> e)"),
    ("Drone flight",
     "If the battery is low, then the drone returns home, and the battery is low, "
     "and it is not the case that the drone returns home.",
     {"b": "the battery is low", "r": "the drone returns home"},
     "(((b -> r) & b) & !r)"),
    ("Library loans",
     "If the book is overdue, then a fine is charged.",
     {"o": "the book is overdue", "f": "a fine is charged"},
     "(o -> f)"),
    # paraphrased requirements: the verbalizer cannot recover the wording
    ("Kitchen safety",
     "Whenever smoke shows up the extractor must kick in.",
     {"s": "smoke is detected", "e": "the extractor fan is activated"},
     "(s -> e)"),
    ("Parking garage",
     "Gates stay shut unless a valid ticket was scanned.",
     {"g": "the gate opens", "t": "a valid ticket is scanned"},
     "(g -> t)"),
]


def build_closed_loop(path: Path) -> None:
    rows = []
    for i, (scenario, conditions, mapping, formula) in enumerate(ITEMS, start=1):
        label = truth_table_oracle(parse(formula)[0]).value
        rows.append(StageRow(
            id=f"cl{i:03d}",
            conditions=conditions,
            scenario=scenario,
            variable_mapping=serialize_varmap(mapping),
            gold_label=label,
            gold_formula=formula,
        ))
    write_rows(str(path), rows)


def build_frozen_log(path: Path, count: int = 60) -> None:
    rng = random.Random(20240601)
    formulas = [f for _, _, _, f in ITEMS]
    while len(formulas) < count:
        formulas.append(render(random_ast(rng, n_vars=rng.randint(2, 8), depth=rng.randint(1, 5))))
    with open(path, "w", encoding="utf-8") as fh:
        for i, formula in enumerate(formulas, start=1):
            rec = {"item_id": f"f{i:03d}", "stage": "PL2CNF", "formula": formula,
                   "cnf_sha256": dimacs_sha256(replay(formula).decode("utf-8"))}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


if __name__ == "__main__":
    build_closed_loop(ROOT / "src" / "veritrans" / "data" / "closed_loop.csv")
    build_frozen_log(ROOT / "tests" / "fixtures" / "frozen_log.jsonl")
