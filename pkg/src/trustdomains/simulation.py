"""Run a request script through delivery, decision, enforcement and audit.

Script format, one record per line (``#`` starts a comment)::

    request <ENTITY> <KIND> <ASSET> [ctx k=v,...] [via DELIVERY-POLICY]
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .audit import AuditChannel, CentralAuditStore
from .core import ControlKind, TrustDomainModel
from .decisions import (Action, Blocked, DecisionLog, Message, PolicyDecision, Request, deliver,
                        enforce, evaluate)
from .errors import DeliveryRefused, TrustDomainError


@dataclass(frozen=True)
class ScriptedRequest:
    request: Request
    context: Tuple[Tuple[str, str], ...] = ()
    via: Optional[str] = None
    line: int = 0


def parse_requests(text: str) -> List[ScriptedRequest]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = shlex.split(line)
        if words[0] != "request" or len(words) < 4:
            raise ValueError(f"line {lineno}: expected 'request <ENTITY> <KIND> <ASSET> "
                             f"[ctx k=v,...] [via POLICY]', got {raw!r}")
        context, via = [], None
        rest = words[4:]
        while rest:
            word = rest.pop(0)
            if word == "ctx" and rest:
                for pair in rest.pop(0).split(","):
                    key, sep, value = pair.partition("=")
                    if not sep or not key:
                        raise ValueError(f"line {lineno}: bad context entry {pair!r}")
                    context.append((key, value))
            elif word == "via" and rest and via is None:
                via = rest.pop(0)
            else:
                raise ValueError(f"line {lineno}: unexpected {word!r}")
        out.append(ScriptedRequest(Request(words[1], words[2], words[3]), tuple(context), via,
                                   lineno))
    return out


@dataclass
class Outcome:
    scripted: ScriptedRequest
    decision: Optional[PolicyDecision] = None
    result: Union[Action, Blocked, None] = None
    error: Optional[str] = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "refused" if self.error.startswith("delivery") else "error"
        return "blocked" if isinstance(self.result, Blocked) else "performed"

    def record(self) -> dict:
        rec = {"line": self.scripted.line, "request": self.scripted.request.record(),
               "status": self.status}
        if self.decision is not None:
            rec.update(decision=self.decision.id, kind=self.decision.kind,
                       influenced=sorted(self.decision.influenced_policy_ids))
        if isinstance(self.result, Action):
            rec["action"] = self.result.id
        if self.error is not None:
            rec["error"] = self.error
        return rec

    def to_text(self) -> str:
        req = self.scripted.request
        head = f"{req.requester_entity_id} {req.action_kind} {req.target_asset_id}"
        if self.error is not None:
            return f"{head}: {self.status}: {self.error}"
        influenced = ",".join(sorted(self.decision.influenced_policy_ids)) or "-"
        tail = f" -> {self.result.id}" if isinstance(self.result, Action) else " -> blocked"
        return f"{self.decision.id} {head}: {self.decision.kind} [{influenced}]{tail}"


@dataclass
class SimulationResult:
    model: TrustDomainModel
    log: DecisionLog
    store: Optional[CentralAuditStore]
    outcomes: List[Outcome] = field(default_factory=list)


def _first_control(model, kind, wanted=None):
    if wanted is not None:
        return wanted
    controls = model.controls_of_kind(kind)
    return controls[0].id if controls else None


def sender_for(model: TrustDomainModel, entity_id: str) -> Optional[str]:
    """The agent that speaks for ``entity_id``: one acting on behalf of one of its roles."""
    entity = model.entities.get(entity_id)
    if entity is None:
        return None
    agents = sorted(model.agents.values(), key=lambda a: a.id)
    for agent in agents:
        if agent.acts_on_behalf_of in entity.role_ids:
            return agent.id
    return None


def simulate(model: TrustDomainModel, requests: List[ScriptedRequest], *, pdp_id=None,
             pep_id=None, audit_agent_id=None, store: Optional[CentralAuditStore] = None,
             transport: str = "cli") -> SimulationResult:
    """Process each request; errors are recorded per request and do not stop the run."""
    pdp_id = _first_control(model, ControlKind.PDP, pdp_id)
    pep_id = _first_control(model, ControlKind.PEP, pep_id)
    if audit_agent_id is None:
        auditors = [c for c in model.controls_of_kind(ControlKind.AUDIT) if c.central_store_id]
        audit_agent_id = auditors[0].id if auditors else None
    channel = None
    if audit_agent_id is not None:
        if store is None:
            store = CentralAuditStore(model.controls[audit_agent_id].central_store_id)
        channel = AuditChannel(audit_agent_id, store)

    log = DecisionLog()
    result = SimulationResult(model, log, store)
    for scripted in requests:
        outcome = Outcome(scripted)
        result.outcomes.append(outcome)
        request = scripted.request
        try:
            sender = sender_for(model, request.requester_entity_id)
            if sender is not None:
                message = Message(log.next_message_id(), sender, (pdp_id,), transport, request,
                                  scripted.via)
                log.record_message(message)
                request = deliver(model, message)
            elif scripted.via is not None:
                raise DeliveryRefused(f"delivery policy {scripted.via!r} needs a sending agent "
                                      f"for {request.requester_entity_id!r}", scripted.via)
            decision = evaluate(model, request, pdp_id, dict(scripted.context),
                                decision_id=log.next_decision_id())
            log.record_decision(decision)
            outcome.decision = decision
            model, outcome.result = enforce(model, decision, pep_id, log, channel)
        except DeliveryRefused as exc:
            outcome.error = f"delivery refused: {exc}"
        except TrustDomainError as exc:
            outcome.error = str(exc)
    result.model = model
    return result
