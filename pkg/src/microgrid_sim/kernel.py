"""Tick-lockstep messaging primitives: envelopes, topic bus, state registry
and the run-log writer."""

from __future__ import annotations

import csv
import enum
import io
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class KernelError(RuntimeError):
    pass


class UnsettledTick(KernelError):
    pass


class StaleUpdate(KernelError):
    pass


class DuplicateUpdate(KernelError):
    pass


class UnknownTopic(KernelError):
    pass


class Performative(enum.Enum):
    TICK = "TICK"
    STATE_UPDATE = "STATE_UPDATE"
    CFP = "CFP"
    PROPOSE = "PROPOSE"
    REFUSE = "REFUSE"
    ACCEPT_PROPOSAL = "ACCEPT_PROPOSAL"
    REJECT_PROPOSAL = "REJECT_PROPOSAL"
    INFORM = "INFORM"
    FORECAST_REQUEST = "FORECAST_REQUEST"
    FORECAST_REPLY = "FORECAST_REPLY"


# Delivery phase within a tick; lower phases are delivered first.
PHASE = {
    Performative.TICK: 0,
    Performative.FORECAST_REQUEST: 1,
    Performative.FORECAST_REPLY: 2,
    Performative.CFP: 3,
    Performative.PROPOSE: 4,
    Performative.REFUSE: 4,
    Performative.ACCEPT_PROPOSAL: 5,
    Performative.REJECT_PROPOSAL: 5,
    Performative.INFORM: 6,
    Performative.STATE_UPDATE: 7,
}


@dataclass(frozen=True)
class Envelope:
    sender: str
    to: str
    performative: Performative
    conversation_id: str = ""
    payload: Any = None

    def sort_key(self):
        return PHASE[self.performative], self.sender, self.to


def agent_rng(seed: int, agent: str, tick: int) -> np.random.Generator:
    """Generator keyed by (seed, agent, tick), independent of call order."""
    return np.random.default_rng([seed & 0xFFFFFFFF, zlib.crc32(agent.encode()), tick])


@dataclass
class MessageBus:
    """Topic fan-out plus point-to-point queues, delivered in sorted order."""

    topics: dict[str, list[str]] = field(default_factory=dict)
    delivered: list[Envelope] = field(default_factory=list)
    _pending: list[Envelope] = field(default_factory=list)

    def register_topic(self, topic: str, subscribers=()) -> None:
        self.topics.setdefault(topic, [])
        for s in subscribers:
            self.subscribe(topic, s)

    def subscribe(self, topic: str, agent: str) -> None:
        if topic not in self.topics:
            raise UnknownTopic(topic)
        if agent not in self.topics[topic]:
            self.topics[topic].append(agent)

    def broadcast_topic(self, topic: str, envelope: Envelope, subscribers=None) -> list[Envelope]:
        if topic not in self.topics:
            raise UnknownTopic(topic)
        targets = self.topics[topic] if subscribers is None else subscribers
        out = [
            Envelope(envelope.sender, agent, envelope.performative, envelope.conversation_id, envelope.payload)
            for agent in sorted(set(targets))
        ]
        self.delivered.extend(out)
        return out

    def send(self, envelope: Envelope) -> None:
        self._pending.append(envelope)

    def deliver(self) -> list[Envelope]:
        out = sorted(self._pending, key=Envelope.sort_key)
        self._pending.clear()
        self.delivered.extend(out)
        return out

    def inbox(self, agent: str) -> list[Envelope]:
        return [e for e in self.delivered if e.to == agent]

    def reset_tick(self) -> None:
        if self._pending:
            raise UnsettledTick(f"{len(self._pending)} undelivered messages at end of tick")
        self.delivered.clear()


@dataclass(frozen=True)
class StateUpdate:
    agent: str
    tick: int
    generation_kw: float = 0.0
    consumption_kw: float = 0.0
    stored_kwh: float = 0.0
    soc_percent: float = 0.0

    def __post_init__(self):
        if self.generation_kw < 0 or self.consumption_kw < 0 or self.stored_kwh < 0:
            raise ValueError(f"negative quantity in state update from {self.agent}")
        if not 0.0 <= self.soc_percent <= 100.0:
            raise ValueError(f"SoC {self.soc_percent} outside [0, 100] from {self.agent}")


@dataclass
class AgentStateRegistry:
    agents: tuple[str, ...]
    current_tick: int = 0
    latest: dict[str, StateUpdate] = field(default_factory=dict)
    history: list[tuple[StateUpdate, ...]] = field(default_factory=list)
    _this_tick: dict[str, StateUpdate] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.agents)) != len(self.agents):
            raise ValueError("agent ids must be unique")
        self.agents = tuple(sorted(self.agents))

    def publish(self, update: StateUpdate) -> None:
        if update.tick != self.current_tick:
            raise StaleUpdate(f"{update.agent}: update for tick {update.tick}, registry at {self.current_tick}")
        if update.agent not in self.agents:
            raise KeyError(f"unregistered agent {update.agent}")
        if update.agent in self._this_tick:
            raise DuplicateUpdate(f"{update.agent} already published for tick {update.tick}")
        self._this_tick[update.agent] = update
        self.latest[update.agent] = update

    def query(self, agent: str) -> StateUpdate:
        return self.latest[agent]

    def settle(self) -> tuple[StateUpdate, ...]:
        """Close the current tick and return its snapshot in AgentId order."""
        missing = [a for a in self.agents if a not in self._this_tick]
        if missing:
            raise UnsettledTick(f"tick {self.current_tick}: no state update from {', '.join(missing)}")
        snap = tuple(self._this_tick[a] for a in self.agents)
        self.history.append(snap)
        self._this_tick = {}
        self.current_tick += 1
        return snap


RUN_LOG_HEADER = ("tick", "agent", "generation_kw", "consumption_kw", "stored_kwh", "soc_percent")


def format_run_rows(snapshot) -> list[list[str]]:
    return [
        [str(u.tick), u.agent, f"{u.generation_kw:.6f}", f"{u.consumption_kw:.6f}",
         f"{u.stored_kwh:.6f}", f"{u.soc_percent:.6f}"]
        for u in snapshot
    ]


class RunLog:
    """Append-only CSV sink for registry snapshots."""

    def __init__(self, stream: io.TextIOBase | None = None):
        self.stream = stream if stream is not None else io.StringIO()
        self._writer = csv.writer(self.stream, lineterminator="\n")
        self._writer.writerow(RUN_LOG_HEADER)

    def append(self, snapshot) -> None:
        self._writer.writerows(format_run_rows(snapshot))

    def getvalue(self) -> str:
        return self.stream.getvalue()


def read_run_log(path_or_text) -> dict[str, dict[int, StateUpdate]]:
    """Parse a run log into ``{agent: {tick: StateUpdate}}``."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        rows = list(csv.DictReader(io.StringIO(path_or_text)))
    else:
        with open(path_or_text, newline="") as fh:
            rows = list(csv.DictReader(fh))
    out: dict[str, dict[int, StateUpdate]] = defaultdict(dict)
    for r in rows:
        u = StateUpdate(
            r["agent"], int(r["tick"]), float(r["generation_kw"]), float(r["consumption_kw"]),
            float(r["stored_kwh"]), float(r["soc_percent"]),
        )
        out[u.agent][u.tick] = u
    return dict(out)
