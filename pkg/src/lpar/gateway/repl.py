"""Interactive CLI channel: reads lines, prints the serving agent's reply.

Meta-commands:
  :trace                  toggle printing the selection trace per turn
  :feedback <agent> <1-5> score the named agent
  :quit                   snapshot stores and leave
"""

from __future__ import annotations

import sys
from typing import IO

from ..runtime import Platform
from ..stores import FeedbackRecord, InvalidScore
from ..registry import UnknownAgent

USAGE = "commands: :trace | :feedback <agent_id> <1-5> | :quit"


def repl(
    platform: Platform,
    app_id: str,
    user: str = "cli-user",
    in_stream: IO[str] | None = None,
    out: IO[str] | None = None,
) -> int:
    in_stream = in_stream or sys.stdin
    out = out or sys.stdout
    profile = platform.stores.resolve_user("cli", user)
    session, greeting = platform.open_conversation(app_id, profile.user_id, "cli")
    print(greeting, file=out)
    trace_on = False
    for raw_line in in_stream:
        line = raw_line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line == ":trace":
            trace_on = not trace_on
            print(f"trace {'on' if trace_on else 'off'}", file=out)
            continue
        if line.startswith(":feedback"):
            parts = line.split()
            if len(parts) != 3 or not parts[2].isdigit():
                print(USAGE, file=out)
                continue
            try:
                rating = platform.stores.record_feedback(
                    FeedbackRecord(session_id=session.session_id, agent_id=parts[1], score=int(parts[2]))
                )
                print(f"feedback recorded; {parts[1]} is now rated {rating.value}", file=out)
            except (InvalidScore, UnknownAgent) as exc:
                print(f"feedback rejected: {exc}", file=out)
            continue
        if line.startswith(":"):
            print(USAGE, file=out)
            continue
        result = platform.turn(session.session_id, line)
        print(f"«{result.agent_name or 'system'}» {result.reply_text}", file=out)
        if result.handover_reason is not None:
            print(f"-- session handed over to a human agent ({result.handover_reason}) --", file=out)
        if trace_on:
            for item in result.trace:
                print(
                    "  trace: {agent_id} {disposition} conf={confidence:.2f} {latency_ms:.0f}ms".format(**item),
                    file=out,
                )
    platform.snapshot()
    return 0
