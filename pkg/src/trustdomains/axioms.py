"""Validation of a model (and optionally its run logs) against the taxonomy axioms.

The catalog is fixed.  Each check returns the minimal set of elements that
witnesses a violation; reports are ordered by axiom then element ids so two
runs over the same input serialise identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

from .core import ENTITY_TYPES, AssetType, ControlKind, TrustDomainModel
from .errors import UnknownAxiom


@dataclass(frozen=True)
class Axiom:
    id: str
    name: str
    description: str
    citation: str
    needs: Tuple[str, ...] = ()  # "decisions", "audit"


@dataclass(frozen=True)
class AxiomViolation:
    axiom_id: str
    offending_element_ids: Tuple[str, ...]
    explanation: str

    def sort_key(self):
        return (_axiom_number(self.axiom_id), self.offending_element_ids, self.explanation)


@dataclass(frozen=True)
class ValidationReport:
    model_name: str
    checked_axioms: Tuple[str, ...]
    unchecked_axioms: Tuple[str, ...] = ()
    violations: Tuple[AxiomViolation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def records(self) -> List[dict]:
        return [{"axiom": v.axiom_id, "citation": AXIOMS[v.axiom_id].citation,
                 "elements": list(v.offending_element_ids), "explanation": v.explanation}
                for v in self.violations]

    def to_json(self) -> str:
        return json.dumps({"model": self.model_name, "checked": list(self.checked_axioms),
                           "unchecked": list(self.unchecked_axioms),
                           "violations": self.records()}, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        for v in self.violations:
            axiom = AXIOMS[v.axiom_id]
            lines.append(f"{v.axiom_id} {axiom.name}: {v.explanation} "
                         f"[{', '.join(v.offending_element_ids)}]")
            lines.append(f"    {axiom.citation}")
        for axiom_id in self.unchecked_axioms:
            lines.append(f"warning: {axiom_id} {AXIOMS[axiom_id].name} not checked "
                         f"(needs {' and '.join(AXIOMS[axiom_id].needs)} log)")
        lines.append(f"{self.model_name}: {len(self.violations)} violations, "
                     f"{len(self.checked_axioms)} axioms checked")
        return "\n".join(lines)


_CATALOG = (
    Axiom("AX1", "unique-publisher",
          "at most one management agent publishes any policy",
          "∀ p : Policy; d1, d2 : DomainManagementAgent • "
          "(d1, p) ∈ publishes ∧ (d2, p) ∈ publishes ⇔ d2 = d1"),
    Axiom("AX2", "published-store-consistency",
          "publishedPolicyTo holds exactly when some policy links the agent and the store",
          "∀ m : DomainManagementAgent; s : DomainPolicyStore • (m, s) ∈ publishedPolicyTo ⇔ "
          "(∃ p : Policy • publishedTo p = s ∧ (m, p) ∈ publishes)"),
    Axiom("AX3", "influence-provenance",
          "every influenced pair is witnessed by a decision point that consumed the policy "
          "and created the decision",
          "∀ p : Policy; x : PolicyDecision • (p, x) ∈ influenced ⇒ "
          "(∃ y : PolicyDecisionPoint • (y, p) ∈ consumes ∧ (y, x) ∈ creates)",
          ("decisions",)),
    Axiom("AX4", "single-establisher",
          "every policy is established by exactly one role",
          "establishes~ ∈ Policy → Role"),
    Axiom("AX5", "single-scope",
          "every policy is scoped to exactly one domain",
          "scopeOf : Policy → Domain"),
    Axiom("AX6", "single-entity-type",
          "every domain entity has exactly one of the entity types",
          "typeOf : DomainEntity → EntityType"),
    Axiom("AX7", "single-asset-owner",
          "every asset is owned by exactly one role",
          "owns~ ∈ Asset → Role"),
    Axiom("AX8", "single-agent-owner",
          "every agent is owned by exactly one role",
          "owns~ ∈ Agent → Role"),
    Axiom("AX9", "message-well-formedness",
          "every message has exactly one sender and at least one receiver",
          "hasSender : Message → Sender ∧ ∀ m : Message • hasReceiver(| {m} |) ≠ ∅"),
    Axiom("AX10", "provisioning-consistency",
          "only management agents provision resources, and only resources are provisioned",
          "provisionedBy : Resource ↔ DomainManagementAgent"),
    Axiom("AX11", "scope-locality",
          "a policy only influences decisions about its own domain: its scope holds the "
          "requester or an owner of the target",
          "∀ p : Policy; x : PolicyDecision • (p, x) ∈ influenced ⇒ "
          "scopeOf p ∈ memberOf(| {requester x} ∪ owners(target x) |)",
          ("decisions",)),
    Axiom("AX12", "monitored-evidence",
          "every recorded action is referenced by at least one audit event",
          "∀ a : Action • ∃ e : AuditEvent • e monitors a",
          ("decisions", "audit")),
)

AXIOMS: Dict[str, Axiom] = {a.id: a for a in _CATALOG}


def _axiom_number(axiom_id: str) -> int:
    return int(axiom_id[2:]) if axiom_id[2:].isdigit() else 0


def axiom_catalog() -> List[Axiom]:
    return list(_CATALOG)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def _ax1(model, decisions, audit):
    for p in model.policies.values():
        publishers = sorted(set(p.published_by))
        if len(publishers) > 1:
            yield [p.id, *publishers], f"policy {p.id} is published by {len(publishers)} agents"


def _ax2(model, decisions, audit):
    derived = {(m, p.published_to) for p in model.policies.values() if p.published_to
               for m in p.published_by}
    stored = set(model.published_policy_to)
    if stored:
        for m, s in sorted(stored - derived):
            yield [m, s], f"{m} is recorded as publishing to {s}, but publishes no policy there"
        for m, s in sorted(derived - stored):
            yield [m, s], f"{m} publishes a policy to {s}, but the pair is not recorded"
    for store in model.policy_stores.values():
        listed = set(store.policy_ids)
        actual = {p.id for p in model.policies.values() if p.published_to == store.id}
        for pid in sorted(listed - actual):
            yield [store.id, pid], f"store {store.id} lists {pid}, which is not published to it"
        for pid in sorted(actual - listed):
            yield [store.id, pid], f"{pid} is published to {store.id}, which does not list it"


def _ax3(model, decisions, audit):
    consumes = set(decisions.consumes)
    for x in decisions.decisions:
        creator = x.created_by_pdp_id
        control = model.controls.get(creator)
        creator_is_pdp = control is not None and control.kind == ControlKind.PDP
        for p in sorted(x.influenced_policy_ids):
            if not creator_is_pdp:
                yield [x.id, p], (f"decision {x.id} influenced by {p} was not created by a "
                                  f"decision point ({creator!r})")
            elif (creator, p) not in consumes:
                yield [x.id, p], (f"decision {x.id} is influenced by {p}, which its creator "
                                  f"{creator} never consumed")


def _ax4(model, decisions, audit):
    for p in model.policies.values():
        roles = {r.id for r in model.roles.values() if p.id in r.established_policy_ids}
        if p.establisher_role_id:
            roles.add(p.establisher_role_id)
        if len(roles) != 1:
            yield [p.id, *sorted(roles)], f"policy {p.id} is established by {len(roles)} roles"


def _ax5(model, decisions, audit):
    for p in model.policies.values():
        if p.scope_domain_id is None or p.scope_domain_id not in model.domains:
            yield [p.id], f"policy {p.id} has no scope domain"


def _ax6(model, decisions, audit):
    for e in model.entities.values():
        if e.entity_type not in ENTITY_TYPES:
            yield [e.id], f"entity {e.id} has type {e.entity_type!r}, not one of the entity types"


def _single_owner(model, element, table_attr, what):
    owners = {r.id for r in model.roles.values() if element.id in getattr(r, table_attr)}
    if element.owner_role_id:
        owners.add(element.owner_role_id)
    if len(owners) != 1:
        yield [element.id, *sorted(owners)], f"{what} {element.id} has {len(owners)} owner roles"


def _ax7(model, decisions, audit):
    for a in model.assets.values():
        yield from _single_owner(model, a, "owned_asset_ids", "asset")


def _ax8(model, decisions, audit):
    for a in model.agents.values():
        yield from _single_owner(model, a, "owned_agent_ids", "agent")


def _ax9(model, decisions, audit):
    for m in (decisions.messages if decisions is not None else ()):
        if not m.sender_agent_id:
            yield [m.id], f"message {m.id} has no sender"
        if not m.receiver_ids:
            yield [m.id], f"message {m.id} has no receivers"


def _ax10(model, decisions, audit):
    for a in model.assets.values():
        if a.provisioned_by is None:
            continue
        if a.asset_type != AssetType.RESOURCE:
            yield [a.id], f"{a.id} is provisioned but is not a Resource"
        if not model.is_management_agent(a.provisioned_by):
            yield [a.id, a.provisioned_by], (f"{a.id} is provisioned by {a.provisioned_by}, "
                                             "which is not a management agent")


def _ax11(model, decisions, audit):
    for x in decisions.decisions:
        request = x.request
        parties = {request.requester_entity_id} | model.asset_owner_entities(request.target_asset_id)
        for p in sorted(x.influenced_policy_ids):
            policy = model.policies.get(p)
            domain = model.domains.get(policy.scope_domain_id) if policy else None
            if domain is None or not (parties & domain.member_ids):
                yield [x.id, p], (f"{p} influenced decision {x.id} outside its scope: "
                                  "its domain holds neither the requester nor the target's owner")


def _ax12(model, decisions, audit):
    events = audit.events if hasattr(audit, "events") else tuple(audit)
    monitored = {e.action_id for e in events if e.action_id}
    for a in decisions.actions:
        if a.id not in monitored:
            yield [a.id], f"action {a.id} has no audit event"


_CHECKS: Dict[str, Callable] = {
    "AX1": _ax1, "AX2": _ax2, "AX3": _ax3, "AX4": _ax4, "AX5": _ax5, "AX6": _ax6,
    "AX7": _ax7, "AX8": _ax8, "AX9": _ax9, "AX10": _ax10, "AX11": _ax11, "AX12": _ax12,
}


def _available(axiom: Axiom, decisions, audit) -> bool:
    if "decisions" in axiom.needs and decisions is None:
        return False
    if "audit" in axiom.needs and audit is None:
        return False
    return True


def check_axiom(model: TrustDomainModel, axiom_id: str, decisions=None,
                audit=None) -> List[AxiomViolation]:
    """Violations of one axiom; an axiom whose logs are missing yields none."""
    axiom = AXIOMS.get(axiom_id)
    if axiom is None:
        raise UnknownAxiom(axiom_id)
    if not _available(axiom, decisions, audit):
        return []
    found = {AxiomViolation(axiom_id, tuple(ids), text)
             for ids, text in _CHECKS[axiom_id](model, decisions, audit)}
    return sorted(found, key=AxiomViolation.sort_key)


def validate(model: TrustDomainModel, decisions=None, audit=None) -> ValidationReport:
    """Check every axiom the supplied logs allow.

    ``decisions`` is a :class:`~trustdomains.decisions.DecisionLog`; ``audit``
    a :class:`~trustdomains.audit.CentralAuditStore` or a sequence of events.
    """
    checked, unchecked, violations = [], [], []
    for axiom in _CATALOG:
        if _available(axiom, decisions, audit):
            checked.append(axiom.id)
            violations.extend(check_axiom(model, axiom.id, decisions, audit))
        else:
            unchecked.append(axiom.id)
    return ValidationReport(model.name, tuple(checked), tuple(unchecked),
                            tuple(sorted(violations, key=AxiomViolation.sort_key)))
