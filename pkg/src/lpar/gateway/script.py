"""Transcript replayer: drives turns from a script file, checks embedded
assertions, and emits one JSON record per turn on stdout.

Script format, one directive per line:
  # comment            ignored, as are blank lines
  > some utterance     run one turn with this text
  ? field op value     assert against the latest turn

Assertable fields: agent_name, agent_id, reply, disposition, handover.
Ops: =  !=  contains  !contains. The process exit code is nonzero iff
any assertion fails.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from ..orchestrate import TurnResult
from ..runtime import Platform

_FIELDS = ("agent_name", "agent_id", "reply", "disposition", "handover")


class ScriptSyntaxError(Exception):
    pass


def _field_value(result: TurnResult, name: str) -> str:
    wire = result.to_wire()
    if name not in _FIELDS:
        raise ScriptSyntaxError(f"unknown field {name}")
    value = wire[name]
    if isinstance(value, bool):
        return "true" if value else "false"
    return "" if value is None else str(value)


def _check(result: TurnResult, directive: str) -> tuple[bool, str]:
    parts = directive.split(None, 2)
    if len(parts) < 3:
        raise ScriptSyntaxError(f"malformed assertion: {directive!r}")
    field, op, expected = parts[0], parts[1], parts[2].strip()
    actual = _field_value(result, field)
    if op == "=":
        ok = actual == expected
    elif op == "!=":
        ok = actual != expected
    elif op == "contains":
        ok = expected in actual
    elif op == "!contains":
        ok = expected not in actual
    else:
        raise ScriptSyntaxError(f"unknown op {op}")
    detail = f"{field} {op} {expected!r} (actual {actual!r})"
    return ok, detail


def run_script(
    platform: Platform,
    app_id: str,
    lines: list[str],
    out: IO[str] | None = None,
    err: IO[str] | None = None,
    user: str = "script-user",
) -> bool:
    """Replay `lines`; returns True when every assertion held."""
    out = out or sys.stdout
    err = err or sys.stderr
    profile = platform.stores.resolve_user("cli", user)
    session, _greeting = platform.open_conversation(app_id, profile.user_id, "cli")
    current: TurnResult | None = None
    turn_no = 0
    all_ok = True
    for line_no, raw_line in enumerate(lines, start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("> "):
            turn_no += 1
            current = platform.turn(session.session_id, line[2:].strip())
            record = {"turn": turn_no, **current.to_wire()}
            out.write(json.dumps(record, sort_keys=True) + "\n")
        elif line.startswith("? "):
            if current is None:
                raise ScriptSyntaxError(f"line {line_no}: assertion before any turn")
            ok, detail = _check(current, line[2:])
            if not ok:
                all_ok = False
                err.write(f"FAIL line {line_no} turn {turn_no}: {detail}\n")
        else:
            raise ScriptSyntaxError(f"line {line_no}: unrecognized directive {line!r}")
    platform.snapshot()
    return all_ok
