"""Single-round Contract-Net negotiation between the aggregator and the
storage / external-supply responders."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .kernel import Envelope, MessageBus, Performative
from .physics import (
    BatteryParams,
    BatteryState,
    ExternalSupplyParams,
    max_charge_kw,
    max_discharge_kw,
)

MIN_OFFER_KW = 1e-6
RANK_STORAGE = 0
RANK_EXTERNAL = 1


class MissingResponse(RuntimeError):
    pass


class Direction(enum.Enum):
    SUPPLY_DEFICIT = "SUPPLY_DEFICIT"
    ABSORB_SURPLUS = "ABSORB_SURPLUS"


@dataclass(frozen=True)
class Cfp:
    conversation_id: str
    direction: Direction
    quantity_kw: float
    tick: int
    deadline: int = 0

    def __post_init__(self):
        if not self.quantity_kw > 0:
            raise ValueError("CFP quantity must be positive")


@dataclass(frozen=True)
class Proposal:
    responder: str
    conversation_id: str
    offered_kw: float
    unit_cost: float
    rank: int = RANK_STORAGE

    def __post_init__(self):
        if not self.offered_kw > 0:
            raise ValueError("offer must be positive")
        if self.unit_cost < 0:
            raise ValueError("unit cost must be non-negative")


@dataclass(frozen=True)
class Refusal:
    responder: str
    conversation_id: str
    reason: str = ""


@dataclass(frozen=True)
class Award:
    conversation_id: str
    allocations: tuple[tuple[str, float], ...]
    uncovered_kw: float

    @property
    def total_kw(self) -> float:
        return sum(kw for _, kw in self.allocations)

    def awarded(self, responder: str) -> float:
        return sum(kw for r, kw in self.allocations if r == responder)


def respond_battery(
    state: BatteryState,
    params: BatteryParams,
    cfp: Cfp,
    responder: str = "MainBattery",
    unit_cost: float = 0.0,
    dt_hours: float = 1.0,
) -> Proposal | Refusal:
    """Bid the power this battery can actually move over the next interval."""
    if cfp.direction is Direction.SUPPLY_DEFICIT:
        feasible = max_discharge_kw(state, dt_hours, params)
    else:
        feasible = max_charge_kw(state, dt_hours, params)
    offer = min(cfp.quantity_kw, feasible)
    if offer < MIN_OFFER_KW:
        return Refusal(responder, cfp.conversation_id, "no feasible power")
    return Proposal(responder, cfp.conversation_id, offer, unit_cost, RANK_STORAGE)


def respond_external(params: ExternalSupplyParams, cfp: Cfp, responder: str = "ExternalSupply") -> Proposal | Refusal:
    if cfp.direction is Direction.ABSORB_SURPLUS:
        return Refusal(responder, cfp.conversation_id, "external supply does not absorb")
    return Proposal(responder, cfp.conversation_id, min(cfp.quantity_kw, params.capacity_kw), params.unit_cost, RANK_EXTERNAL)


def award_contracts(cfp: Cfp, proposals, caps: dict[str, float] | None = None) -> Award:
    """Greedy award by (unit cost, storage before external, responder id).

    ``caps`` optionally limits individual responders below their offer; the
    predictive controller uses it to carry planned battery quantities.
    """
    remaining = cfp.quantity_kw
    allocations = []
    for p in sorted(proposals, key=lambda p: (p.unit_cost, p.rank, p.responder)):
        if p.conversation_id != cfp.conversation_id:
            raise ValueError(f"proposal for {p.conversation_id} in round {cfp.conversation_id}")
        limit = p.offered_kw if caps is None else min(p.offered_kw, caps.get(p.responder, p.offered_kw))
        kw = min(remaining, limit)
        if kw > 0:
            allocations.append((p.responder, kw))
            remaining -= kw
    return Award(cfp.conversation_id, tuple(allocations), max(remaining, 0.0))


@dataclass(frozen=True)
class NegotiationRecord:
    tick: int
    conversation_id: str
    direction: Direction
    quantity_kw: float
    offers: tuple[tuple[str, float, float], ...]  # (responder, offered, awarded)
    uncovered_kw: float


@dataclass
class ContractNet:
    """Runs CFP rounds over a ``MessageBus`` and checks protocol completeness."""

    initiator: str
    bus: MessageBus
    records: list[NegotiationRecord] = field(default_factory=list)
    _counter: int = 0

    def new_cfp(self, direction: Direction, quantity_kw: float, tick: int) -> Cfp:
        self._counter += 1
        return Cfp(f"t{tick}-{direction.value}-{self._counter}", direction, quantity_kw, tick)

    def issue_cfp(self, cfp: Cfp, responders: dict) -> list[Proposal | Refusal]:
        """``responders`` maps AgentId to a callable ``cfp -> Proposal | Refusal``."""
        for agent in sorted(responders):
            self.bus.send(Envelope(self.initiator, agent, Performative.CFP, cfp.conversation_id, cfp))
        self.bus.deliver()
        for agent in sorted(responders):
            answer = responders[agent](cfp)
            perf = Performative.PROPOSE if isinstance(answer, Proposal) else Performative.REFUSE
            self.bus.send(Envelope(agent, self.initiator, perf, cfp.conversation_id, answer))
        replies = [e for e in self.bus.deliver() if e.conversation_id == cfp.conversation_id]
        by_sender = {}
        for e in replies:
            if e.sender in by_sender:
                raise MissingResponse(f"{e.sender} answered {cfp.conversation_id} twice")
            by_sender[e.sender] = e.payload
        missing = set(responders) - set(by_sender)
        if missing:
            raise MissingResponse(f"no reply to {cfp.conversation_id} from {sorted(missing)}")
        return [by_sender[a] for a in sorted(by_sender)]

    def run_round(self, direction: Direction, quantity_kw: float, tick: int, responders: dict,
                  caps: dict[str, float] | None = None) -> Award:
        cfp = self.new_cfp(direction, quantity_kw, tick)
        answers = self.issue_cfp(cfp, responders)
        proposals = [a for a in answers if isinstance(a, Proposal)]
        award = award_contracts(cfp, proposals, caps)
        for p in proposals:
            kw = award.awarded(p.responder)
            perf = Performative.ACCEPT_PROPOSAL if kw > 0 else Performative.REJECT_PROPOSAL
            self.bus.send(Envelope(self.initiator, p.responder, perf, cfp.conversation_id, kw))
        accepted = [e.to for e in self.bus.deliver() if e.performative is Performative.ACCEPT_PROPOSAL]
        for agent in accepted:
            self.bus.send(Envelope(agent, self.initiator, Performative.INFORM, cfp.conversation_id, award.awarded(agent)))
        informs = [e.sender for e in self.bus.deliver() if e.performative is Performative.INFORM]
        if sorted(informs) != sorted(accepted):
            raise MissingResponse(f"INFORM mismatch in {cfp.conversation_id}")
        offered = {a.responder: (a.offered_kw if isinstance(a, Proposal) else 0.0) for a in answers}
        self.records.append(NegotiationRecord(
            tick, cfp.conversation_id, direction, quantity_kw,
            tuple((r, offered[r], award.awarded(r)) for r in sorted(offered)),
            award.uncovered_kw,
        ))
        return award


NEGOTIATION_LOG_HEADER = ("tick", "conversation_id", "direction", "quantity_kw", "responder", "offered_kw", "awarded_kw")


def negotiation_rows(records) -> list[list[str]]:
    rows = []
    for r in records:
        for responder, offered, awarded in r.offers:
            rows.append([str(r.tick), r.conversation_id, r.direction.value, f"{r.quantity_kw:.6f}",
                         responder, f"{offered:.6f}", f"{awarded:.6f}"])
    return rows
