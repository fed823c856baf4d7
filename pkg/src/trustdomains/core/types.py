"""Element types of a trust-domain configuration.

Every element is a frozen dataclass; collections inside elements are
frozensets (unordered relations) or tuples (ordered ones such as policy
rules).  A :class:`TrustDomainModel` is an immutable value: lifecycle
operations return a new model and leave the old one untouched.

Inverse views are stored on both sides of a relation (``Domain.member_ids``
mirrors ``DomainEntity.memberships``, ``Role.owned_asset_ids`` mirrors
``Asset.owner_role_id`` ...).  ``build_model`` keeps them in sync; the
axioms module checks them on models that were edited by hand.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterator, Optional, Tuple, Union


class EntityType(str, Enum):
    PERSON = "Person"
    ORGANIZATION = "Organization"
    SYSTEM = "System"
    PROCESS = "Process"
    RESOURCE = "Resource"
    AGENT = "Agent"


class AssetType(str, Enum):
    DATA = "Data"
    RESOURCE = "Resource"
    SERVICE = "Service"


class AgentKind(str, Enum):
    MANAGEMENT = "DomainManagementAgent"
    GENERIC = "Generic"


class ControlKind(str, Enum):
    PEP = "PolicyEnforcementPoint"
    PDP = "PolicyDecisionPoint"
    AUDIT = "DomainAuditAgent"
    MANAGEMENT = "DomainManagementAgent"


class Direction(str, Enum):
    UNI = "uni"
    BI = "bi"


class Effect(str, Enum):
    PERMIT = "permit"
    DENY = "deny"
    OBLIGE = "oblige"


ENTITY_TYPES = tuple(t.value for t in EntityType)
ASSET_TYPES = tuple(t.value for t in AssetType)

WILDCARD = "*"


@dataclass(frozen=True)
class FlowRule:
    source_asset_id: str
    dest_asset_id: str
    direction: Direction = Direction.UNI

    def directed_edges(self) -> Tuple[Tuple[str, str], ...]:
        if self.direction == Direction.BI:
            return ((self.source_asset_id, self.dest_asset_id),
                    (self.dest_asset_id, self.source_asset_id))
        return ((self.source_asset_id, self.dest_asset_id),)


@dataclass(frozen=True)
class ActionRule:
    """``effect`` applies when the subject performs ``action_kind`` on target.

    ``guard`` names a boolean flag of the evaluation context that must be
    true for the rule to match.  ``enables_state`` is copied onto the
    decision and becomes the target resource's state once enforced.
    """

    effect: Effect
    subject: str
    action_kind: str
    target_asset_id: str = WILDCARD
    guard: Optional[str] = None
    enables_state: Optional[str] = None


Rule = Union[FlowRule, ActionRule]


@dataclass(frozen=True)
class Domain:
    id: str
    member_ids: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class DomainEntity:
    id: str
    entity_type: EntityType
    memberships: FrozenSet[str] = frozenset()
    role_ids: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class Role:
    id: str
    owned_asset_ids: FrozenSet[str] = frozenset()
    owned_agent_ids: FrozenSet[str] = frozenset()
    established_policy_ids: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class Agent:
    id: str
    owner_role_id: str
    acts_on_behalf_of: str
    kind: AgentKind = AgentKind.GENERIC


@dataclass(frozen=True)
class Asset:
    id: str
    asset_type: AssetType
    owner_role_id: str
    state: Optional[str] = None
    provisioned_by: Optional[str] = None
    provided_by: Optional[str] = None

    @property
    def provisioned(self) -> bool:
        return self.provisioned_by is not None


@dataclass(frozen=True)
class Control:
    id: str
    kind: ControlKind
    domain_id: str
    central_store_id: Optional[str] = None


@dataclass(frozen=True)
class Policy:
    id: str
    establisher_role_id: str
    scope_domain_id: Optional[str]
    rules: Tuple[Rule, ...] = ()
    # Normally empty or a single agent; more than one publisher is
    # representable so that the unique-publisher axiom can be checked.
    published_by: Tuple[str, ...] = ()
    published_to: Optional[str] = None
    equivalent_to: FrozenSet[str] = frozenset()
    is_delivery_policy: bool = False

    @property
    def flow_rules(self) -> Tuple[FlowRule, ...]:
        return tuple(r for r in self.rules if isinstance(r, FlowRule))

    @property
    def action_rules(self) -> Tuple[Tuple[int, ActionRule], ...]:
        """Action rules paired with their index in ``rules``."""
        return tuple((i, r) for i, r in enumerate(self.rules) if isinstance(r, ActionRule))


@dataclass(frozen=True)
class DomainPolicyStore:
    id: str
    domain_id: str
    policy_ids: Tuple[str, ...] = ()


@dataclass(frozen=True)
class TrustDomainModel:
    name: str = "untitled"
    central_audit_store_id: Optional[str] = None
    domains: Dict[str, Domain] = field(default_factory=dict)
    entities: Dict[str, DomainEntity] = field(default_factory=dict)
    roles: Dict[str, Role] = field(default_factory=dict)
    assets: Dict[str, Asset] = field(default_factory=dict)
    agents: Dict[str, Agent] = field(default_factory=dict)
    controls: Dict[str, Control] = field(default_factory=dict)
    policies: Dict[str, Policy] = field(default_factory=dict)
    policy_stores: Dict[str, DomainPolicyStore] = field(default_factory=dict)
    # Stored copy of the derivable publishedPolicyTo relation: (agent, store).
    published_policy_to: FrozenSet[Tuple[str, str]] = frozenset()

    TABLES = ("roles", "domains", "entities", "agents", "assets",
              "controls", "policy_stores", "policies")

    def replace(self, **changes) -> "TrustDomainModel":
        return dataclasses.replace(self, **changes)

    def with_element(self, table: str, element) -> "TrustDomainModel":
        """Return a copy with ``element`` inserted into (or replacing in) ``table``."""
        updated = dict(getattr(self, table))
        updated[element.id] = element
        return dataclasses.replace(self, **{table: updated})

    def iter_elements(self) -> Iterator[Tuple[str, object]]:
        for table in self.TABLES:
            for element in getattr(self, table).values():
                yield table, element

    def element_count(self) -> int:
        return sum(len(getattr(self, t)) for t in self.TABLES)

    def find(self, element_id: str):
        for table in self.TABLES:
            element = getattr(self, table).get(element_id)
            if element is not None:
                return element
        return None

    # -- derived queries --------------------------------------------------

    def role_holders(self, role_id: str) -> FrozenSet[str]:
        """Entities that hold ``role_id``."""
        return frozenset(e.id for e in self.entities.values() if role_id in e.role_ids)

    def asset_owner_entities(self, asset_id: str) -> FrozenSet[str]:
        asset = self.assets.get(asset_id)
        if asset is None:
            return frozenset()
        return self.role_holders(asset.owner_role_id)

    def is_management_agent(self, agent_id: Optional[str]) -> bool:
        """True for a management-kind agent or a management control."""
        agent = self.agents.get(agent_id)
        if agent is not None:
            return agent.kind == AgentKind.MANAGEMENT
        control = self.controls.get(agent_id)
        return control is not None and control.kind == ControlKind.MANAGEMENT

    def controls_of_kind(self, kind: ControlKind, domain_id: Optional[str] = None):
        return sorted(
            (c for c in self.controls.values()
             if c.kind == kind and (domain_id is None or c.domain_id == domain_id)),
            key=lambda c: c.id,
        )
