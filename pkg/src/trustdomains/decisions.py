"""Policy decision and enforcement points.

Requests travel inside messages.  :func:`deliver` applies the message's
delivery policy, :func:`evaluate` turns a request into a
:class:`PolicyDecision` and :func:`enforce` gates the action on that
decision, reporting to the audit trail.

Rule combination is first-match over ``(policy id, rule index)`` with a
closed world: a request no rule matches is denied.  Every policy with a
matching rule is recorded in ``influenced_policy_ids``, not only the
winner.
"""

from __future__ import annotations

import dataclasses
import uuid
from dataclasses import dataclass, field
from typing import FrozenSet, List, Mapping, Optional, Tuple, Union

from .core import (WILDCARD, ActionRule, AssetType, ControlKind, Effect, Policy,
                   TrustDomainModel)
from .errors import (DeliveryRefused, MalformedMessage, StaleDecision, UnknownDecision,
                     UnknownElement, UnknownPdp, UnknownPep, UnknownPolicy, UnprovisionedResource)

PERMISSION = "Permission"
OBLIGATION = "Obligation"
DENIAL = "Denial"

_KIND_OF_EFFECT = {Effect.PERMIT: PERMISSION, Effect.OBLIGE: OBLIGATION, Effect.DENY: DENIAL}
_TRUE = {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class Request:
    requester_entity_id: str
    action_kind: str
    target_asset_id: str

    def record(self) -> dict:
        return {"requester": self.requester_entity_id, "action": self.action_kind,
                "target": self.target_asset_id}


@dataclass(frozen=True)
class Message:
    id: str
    sender_agent_id: Optional[str]
    receiver_ids: Tuple[str, ...]
    transport: str
    payload: Request
    delivery_policy_id: Optional[str] = None


@dataclass(frozen=True)
class PolicyDecision:
    id: str
    kind: str
    influenced_policy_ids: FrozenSet[str]
    created_by_pdp_id: str
    request: Request
    matched_rules: Tuple[Tuple[str, int], ...] = ()
    consumed_policy_ids: FrozenSet[str] = frozenset()
    enables_state: Optional[str] = None
    context: Tuple[Tuple[str, str], ...] = ()

    def record(self) -> dict:
        return {
            "decision": self.id,
            "kind": self.kind,
            "pdp": self.created_by_pdp_id,
            "influenced": sorted(self.influenced_policy_ids),
            "matched": [[p, i] for p, i in self.matched_rules],
            "request": self.request.record(),
            "context": dict(self.context),
            "enables_state": self.enables_state,
        }


@dataclass(frozen=True)
class Action:
    id: str
    kind: str
    performed_by: str
    performed_on: str
    decision_id: str
    seq: int


@dataclass(frozen=True)
class Blocked:
    decision_id: str
    reason: str


@dataclass
class DecisionLog:
    """Append-only record of messages, decisions, actions and policy consumption.

    Single writer: appends are not synchronised.
    """

    messages: List[Message] = field(default_factory=list)
    decisions: List[PolicyDecision] = field(default_factory=list)
    actions: List[Action] = field(default_factory=list)
    consumes: set = field(default_factory=set)  # (pdp id, policy id)

    def next_decision_id(self) -> str:
        return f"D{len(self.decisions) + 1:04d}"

    def next_message_id(self) -> str:
        return f"M{len(self.messages) + 1:04d}"

    def record_message(self, message: Message) -> None:
        self.messages.append(message)

    def record_decision(self, decision: PolicyDecision) -> None:
        self.decisions.append(decision)
        self.consumes.update((decision.created_by_pdp_id, p) for p in decision.consumed_policy_ids)

    def record_action(self, action: Action) -> None:
        self.actions.append(action)

    def decision(self, decision_id: str) -> PolicyDecision:
        for d in self.decisions:
            if d.id == decision_id:
                return d
        raise UnknownDecision(decision_id)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

def _guard_holds(guard: Optional[str], context: Mapping[str, object]) -> bool:
    if guard is None:
        return True
    value = context.get(guard)
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in _TRUE if value is not None else False


def _subject_labels(model: TrustDomainModel, principal: str) -> FrozenSet[str]:
    """Every selector that names ``principal``: its id plus its roles."""
    labels = {WILDCARD, principal}
    entity = model.entities.get(principal)
    if entity is not None:
        labels |= entity.role_ids
    agent = model.agents.get(principal)
    if agent is not None:
        labels |= {agent.owner_role_id, agent.acts_on_behalf_of}
    return frozenset(labels)


def _rule_matches(rule: ActionRule, labels, action_kind: str, target: str, context) -> bool:
    return (rule.subject in labels
            and rule.action_kind in (action_kind, WILDCARD)
            and rule.target_asset_id in (target, WILDCARD)
            and _guard_holds(rule.guard, context))


def applicable_policies(model: TrustDomainModel, request: Request) -> List[Policy]:
    """Non-delivery policies scoped to a domain holding the requester or the target's owner."""
    parties = {request.requester_entity_id} | model.asset_owner_entities(request.target_asset_id)
    out = []
    for policy in sorted(model.policies.values(), key=lambda p: p.id):
        if policy.is_delivery_policy:
            continue
        domain = model.domains.get(policy.scope_domain_id)
        if domain is not None and parties & domain.member_ids:
            out.append(policy)
    return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def check_message(message: Message) -> None:
    if not message.sender_agent_id:
        raise MalformedMessage(f"message {message.id!r} has no sender")
    if not message.receiver_ids:
        raise MalformedMessage(f"message {message.id!r} has no receivers")


def deliver(model: TrustDomainModel, message: Message) -> Request:
    """Release the message payload if its delivery policy lets it through."""
    check_message(message)
    if message.sender_agent_id not in model.agents:
        raise MalformedMessage(f"sender {message.sender_agent_id!r} is not a known agent")
    if message.delivery_policy_id is None:
        return message.payload
    policy = model.policies.get(message.delivery_policy_id)
    if policy is None:
        raise UnknownPolicy(message.delivery_policy_id)
    labels = _subject_labels(model, message.sender_agent_id)
    for receiver in message.receiver_ids:
        effect = None
        for _, rule in policy.action_rules:
            if _rule_matches(rule, labels, "deliver", receiver, {}):
                effect = rule.effect
                break
        if effect not in (Effect.PERMIT, Effect.OBLIGE):
            verdict = "denies" if effect == Effect.DENY else "does not permit"
            raise DeliveryRefused(
                f"delivery policy {policy.id!r} {verdict} delivery from "
                f"{message.sender_agent_id!r} to {receiver!r}", policy.id)
    return message.payload


def evaluate(model: TrustDomainModel, request: Request, pdp_id: str,
             context: Optional[Mapping[str, object]] = None,
             decision_id: Optional[str] = None) -> PolicyDecision:
    pdp = model.controls.get(pdp_id)
    if pdp is None or pdp.kind != ControlKind.PDP:
        raise UnknownPdp(pdp_id)
    if request.requester_entity_id not in model.entities:
        raise UnknownElement("entity", request.requester_entity_id)
    target = model.assets.get(request.target_asset_id)
    if target is None:
        raise UnknownElement("asset", request.target_asset_id)
    if target.asset_type == AssetType.RESOURCE and not target.provisioned:
        raise UnprovisionedResource(f"{target.id!r} is not provisioned")

    context = dict(context or {})
    labels = _subject_labels(model, request.requester_entity_id)
    candidates = applicable_policies(model, request)
    matched: List[Tuple[str, int]] = []
    winner: Optional[ActionRule] = None
    for policy in candidates:
        for index, rule in policy.action_rules:
            if _rule_matches(rule, labels, request.action_kind, request.target_asset_id, context):
                matched.append((policy.id, index))
                if winner is None:
                    winner = rule

    kind = DENIAL if winner is None else _KIND_OF_EFFECT[winner.effect]
    enables = winner.enables_state if winner is not None and kind != DENIAL else None
    return PolicyDecision(
        id=decision_id or f"D-{uuid.uuid4().hex[:12]}",
        kind=kind,
        influenced_policy_ids=frozenset(p for p, _ in matched),
        created_by_pdp_id=pdp_id,
        request=request,
        matched_rules=tuple(matched),
        consumed_policy_ids=frozenset(p.id for p in candidates),
        enables_state=enables,
        context=tuple(sorted((k, str(v)) for k, v in context.items())),
    )


def _provenance_detail(decision: PolicyDecision) -> dict:
    return {
        "request": decision.request.record(),
        "decision_kind": decision.kind,
        "pdp": decision.created_by_pdp_id,
        "influenced": sorted(decision.influenced_policy_ids),
    }


def enforce(model: TrustDomainModel, decision: PolicyDecision, pep_id: str,
            log: DecisionLog, audit=None) -> Tuple[TrustDomainModel, Union[Action, Blocked]]:
    """Gate the requested action on ``decision``.

    Returns the (possibly updated) model and either the recorded
    :class:`Action` or :class:`Blocked`.  With an ``audit`` channel every
    outcome emits one event carrying the provenance of the decision.
    """
    pep = model.controls.get(pep_id)
    if pep is None or pep.kind != ControlKind.PEP:
        raise UnknownPep(pep_id)
    request = decision.request
    if request.requester_entity_id not in model.entities or request.target_asset_id not in model.assets:
        raise StaleDecision(f"decision {decision.id!r} refers to elements no longer in the model")
    target = model.assets[request.target_asset_id]

    detail = _provenance_detail(decision)
    if decision.kind == DENIAL:
        outcome = Blocked(decision.id, "denied by policy" if decision.influenced_policy_ids
                          else "no applicable rule (default deny)")
        if audit is not None:
            audit.emit(model, emitting_control_id=pep_id, event_kind="action-blocked",
                       decision_id=decision.id, detail=detail)
        return model, outcome

    if target.asset_type == AssetType.RESOURCE and not target.provisioned:
        raise StaleDecision(f"target {target.id!r} has been deprovisioned since decision "
                            f"{decision.id!r}")
    seq = len(log.actions) + 1
    action = Action(f"A{seq:04d}", request.action_kind, request.requester_entity_id,
                    target.id, decision.id, seq)
    log.record_action(action)
    if decision.enables_state is not None and target.asset_type == AssetType.RESOURCE:
        model = model.with_element("assets",
                                   dataclasses.replace(target, state=decision.enables_state))
    if audit is not None:
        kind = "obligation-pending" if decision.kind == OBLIGATION else "action-performed"
        audit.emit(model, emitting_control_id=pep_id, event_kind=kind, action_id=action.id,
                   decision_id=decision.id, detail=dict(detail, action=action.id))
    return model, action


def decision_provenance(log: DecisionLog, decision_id: str) -> Tuple[str, List[Tuple[str, int]]]:
    """The creating PDP and every (policy, rule index) that matched."""
    decision = log.decision(decision_id)
    return decision.created_by_pdp_id, list(decision.matched_rules)
