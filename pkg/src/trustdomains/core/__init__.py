"""Typed store for a trust-domain configuration and its lifecycle operations."""

from .build import FLOW_ENDPOINT_MESSAGE, build_model, model_declarations
from .declarations import (AgentDecl, AssetDecl, ControlDecl, Declaration, DomainDecl,
                           EntityDecl, ModelDecl, PolicyDecl, RoleDecl, Span, StoreDecl)
from .lifecycle import (clone_policy, deprovision_resource, domain_members, equivalence_class,
                        provision_resource, validate_state)
from .types import (ASSET_TYPES, ENTITY_TYPES, WILDCARD, ActionRule, Agent, AgentKind, Asset,
                    AssetType, Control, ControlKind, Direction, Domain, DomainEntity,
                    DomainPolicyStore, Effect, EntityType, FlowRule, Policy, Role, Rule,
                    TrustDomainModel)

__all__ = [name for name in dir() if not name.startswith("_")]
