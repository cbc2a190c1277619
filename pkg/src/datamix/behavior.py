"""Rubric scoring of evaluation episodes from human-annotated failure events.

An episode starts at the task's maximum of 5 points and collects negative
deductions for observed failure events. Rules sharing an exclusion group are
mutually exclusive (only the most severe matching one applies); deductions
from different groups stack; the total clamps at 0. A rule marked
`overrides` (the no-progress case) preempts everything else.

Rule tables are data, not code: the built-in tasks ship as JSON under
datamix/rules/ and new tasks are just new files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import EmptyInput, MalformedRecord, TaskMismatch, UnknownEvent

BUILTIN_TASKS = ("fold_cloth", "clean_desk", "throw_bottle")


@dataclass(frozen=True)
class Rule:
    event: str
    deduction: int  # strictly negative
    group: str
    overrides: bool = False


@dataclass(frozen=True)
class RuleTable:
    task: str
    rules: tuple[Rule, ...]
    max_score: int = 5

    def __post_init__(self) -> None:
        seen = set()
        for rule in self.rules:
            if rule.deduction >= 0:
                raise MalformedRecord(
                    f"deduction for {rule.event!r} must be negative, got {rule.deduction}"
                )
            if rule.event in seen:
                raise MalformedRecord(f"duplicate rule for event {rule.event!r}")
            seen.add(rule.event)

    @property
    def events(self) -> frozenset[str]:
        return frozenset(r.event for r in self.rules)


@dataclass(frozen=True)
class EpisodeLog:
    task: str
    events: frozenset[str] = field(default_factory=frozenset)
    success: bool = False


def _table_from_obj(obj: dict, where: str) -> RuleTable:
    try:
        rules = tuple(
            Rule(
                event=str(r["event"]),
                deduction=int(r["deduction"]),
                group=str(r["group"]),
                overrides=bool(r.get("overrides", False)),
            )
            for r in obj["rules"]
        )
        return RuleTable(task=str(obj["task"]), rules=rules, max_score=int(obj.get("max_score", 5)))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad rule table {where}: {exc}") from exc


def load_rule_table(path: str | Path) -> RuleTable:
    p = Path(path)
    return _table_from_obj(json.loads(p.read_text("utf-8")), str(p))


def builtin_rule_table(task: str) -> RuleTable:
    if task not in BUILTIN_TASKS:
        raise TaskMismatch(task, f"one of {list(BUILTIN_TASKS)}")
    text = resources.files("datamix").joinpath("rules", f"{task}.json").read_text("utf-8")
    return _table_from_obj(json.loads(text), f"builtin:{task}")


def score_episode(log: EpisodeLog, table: RuleTable) -> int:
    """5 plus the selected deductions, clamped into [0, max]."""
    if log.task != table.task:
        raise TaskMismatch(log.task, table.task)
    by_event = {r.event: r for r in table.rules}
    matched = []
    for event in sorted(log.events):
        rule = by_event.get(event)
        if rule is None:
            raise UnknownEvent(event, table.task)
        matched.append(rule)

    for rule in matched:
        if rule.overrides:
            return max(0, table.max_score + rule.deduction)

    worst_per_group: dict[str, int] = {}
    for rule in matched:
        prev = worst_per_group.get(rule.group, 0)
        worst_per_group[rule.group] = min(prev, rule.deduction)
    return max(0, table.max_score + sum(worst_per_group.values()))


def aggregate(scores: list[int], successes: list[bool]) -> tuple[float, float]:
    """(mean behavior score, success rate as a percentage)."""
    if not scores or len(scores) != len(successes):
        raise EmptyInput(
            f"need equal non-empty lists, got {len(scores)} scores "
            f"and {len(successes)} successes"
        )
    mean_score = sum(scores) / len(scores)
    success_rate = 100.0 * sum(successes) / len(successes)
    return mean_score, success_rate


def load_episode_logs(path: str | Path) -> list[EpisodeLog]:
    """Newline-delimited {task, events, success} objects."""
    logs = []
    lines = Path(path).read_text("utf-8").split("\n")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            logs.append(
                EpisodeLog(
                    task=str(obj["task"]),
                    events=frozenset(str(e) for e in obj.get("events", [])),
                    success=bool(obj["success"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedRecord(f"bad episode log: {exc}", line=lineno) from exc
    return logs
