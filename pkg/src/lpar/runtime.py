"""Wires the clock, bus, registry, stores, selector and orchestrator into
one in-process platform instance."""

from __future__ import annotations

import threading
from pathlib import Path

from .bus import MessageBus
from .clock import LogicalClock
from .filters import pii_redact
from .orchestrate import CustomerServiceAgent, TurnResult
from .registry import Registry
from .select import Selector
from .stores import Stores


class Platform:
    def __init__(self, clock: LogicalClock | None = None) -> None:
        self.clock = clock or LogicalClock()
        self.bus = MessageBus(self.clock)
        self.registry = Registry(self.bus)
        self.stores = Stores(self.registry, self.clock, redactor=pii_redact)
        self.selector = Selector(self.bus, self.registry, self.stores, self.clock)
        self.orchestrator = CustomerServiceAgent(
            self.bus, self.registry, self.stores, self.selector, self.clock
        )
        self.adapters: dict[str, object] = {}
        self.data_dir: Path | None = None
        # One turn at a time keeps the shared event scheduler and logical
        # clock deterministic; per-session ordering follows for free.
        self._turn_lock = threading.RLock()

    def turn(self, session_id: str, text: str) -> TurnResult:
        with self._turn_lock:
            return self.orchestrator.handle_turn(session_id, text)

    def open_conversation(self, app_id: str, user_id: str, channel_id: str):
        with self._turn_lock:
            return self.orchestrator.open_conversation(app_id, user_id, channel_id)

    def snapshot(self) -> None:
        if self.data_dir is not None:
            self.stores.snapshot_all(self.data_dir)

    def load_data(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)
        if self.data_dir.exists():
            self.stores.load_all(self.data_dir)
        else:
            self.data_dir.mkdir(parents=True, exist_ok=True)
