"""Lifecycle operations on a model: policy cloning and resource management.

All operations are pure; they return a new model.  Operations that are
observable by the domain's controls accept an optional ``audit`` channel
(see :class:`trustdomains.audit.AuditChannel`) and report through it.
"""

from __future__ import annotations

import dataclasses
from typing import FrozenSet, Optional, Tuple

from ..errors import (AlreadyProvisioned, NotAResource, NotManagementAgent, NotProvisioned,
                      TrustDomainError, UnknownDomain, UnknownElement, UnknownPolicy)
from .types import AssetType, TrustDomainModel


def domain_members(model: TrustDomainModel, domain_id: str) -> FrozenSet[str]:
    """Entities that are ``memberOf`` the domain."""
    if domain_id not in model.domains:
        raise UnknownDomain(domain_id)
    return frozenset(e.id for e in model.entities.values() if domain_id in e.memberships)


def _fresh_clone_id(model: TrustDomainModel, policy_id: str) -> str:
    n = 1
    while model.find(f"{policy_id}-clone{n}") is not None:
        n += 1
    return f"{policy_id}-clone{n}"


def clone_policy(model: TrustDomainModel, policy_id: str, target_domain_id: str,
                 new_establisher_role_id: str,
                 new_policy_id: Optional[str] = None) -> Tuple[TrustDomainModel, str]:
    """Copy a policy into ``target_domain_id`` and link the copy by equivalence.

    The clone keeps the rules, gets the new scope and establisher, is
    unpublished, and is equivalent to the source only (cloning a clone
    therefore builds a chain, not a clique).
    """
    source = model.policies.get(policy_id)
    if source is None:
        raise UnknownPolicy(policy_id)
    if target_domain_id not in model.domains:
        raise UnknownDomain(target_domain_id)
    if new_establisher_role_id not in model.roles:
        raise UnknownElement("role", new_establisher_role_id)
    clone_id = new_policy_id or _fresh_clone_id(model, policy_id)
    if model.find(clone_id) is not None or clone_id == model.central_audit_store_id:
        raise TrustDomainError(f"identifier {clone_id!r} already in use")

    clone = dataclasses.replace(
        source, id=clone_id, establisher_role_id=new_establisher_role_id,
        scope_domain_id=target_domain_id, published_by=(), published_to=None,
        equivalent_to=frozenset({policy_id}),
    )
    linked_source = dataclasses.replace(source, equivalent_to=source.equivalent_to | {clone_id})
    role = model.roles[new_establisher_role_id]
    role = dataclasses.replace(role, established_policy_ids=role.established_policy_ids | {clone_id})

    policies = dict(model.policies)
    policies[policy_id] = linked_source
    policies[clone_id] = clone
    return model.replace(policies=policies).with_element("roles", role), clone_id


def equivalence_class(model: TrustDomainModel, policy_id: str) -> FrozenSet[str]:
    """All policies reachable from ``policy_id`` over equivalence links."""
    if policy_id not in model.policies:
        raise UnknownPolicy(policy_id)
    seen = {policy_id}
    frontier = [policy_id]
    while frontier:
        current = frontier.pop()
        for other in model.policies[current].equivalent_to:
            if other not in seen and other in model.policies:
                seen.add(other)
                frontier.append(other)
    return frozenset(seen)


def _resource(model: TrustDomainModel, asset_id: str):
    asset = model.assets.get(asset_id)
    if asset is None:
        raise UnknownElement("asset", asset_id)
    if asset.asset_type != AssetType.RESOURCE:
        raise NotAResource(f"{asset_id!r} is a {asset.asset_type.value} asset, not a Resource")
    return asset


def _require_management(model: TrustDomainModel, agent_id: str):
    if not model.is_management_agent(agent_id):
        raise NotManagementAgent(f"{agent_id!r} is not a domain management agent")


def provision_resource(model: TrustDomainModel, mgmt_agent_id: str, resource_asset_id: str,
                       initial_state: str, audit=None) -> TrustDomainModel:
    _require_management(model, mgmt_agent_id)
    asset = _resource(model, resource_asset_id)
    if asset.provisioned:
        raise AlreadyProvisioned(f"{resource_asset_id!r} is already provisioned by "
                                 f"{asset.provisioned_by!r}")
    updated = model.with_element(
        "assets", dataclasses.replace(asset, provisioned_by=mgmt_agent_id, state=initial_state))
    if audit is not None:
        audit.emit(updated, emitting_control_id=mgmt_agent_id, event_kind="provision",
                   detail={"resource": resource_asset_id, "state": initial_state})
    return updated


def deprovision_resource(model: TrustDomainModel, mgmt_agent_id: str, resource_asset_id: str,
                         audit=None) -> TrustDomainModel:
    _require_management(model, mgmt_agent_id)
    asset = _resource(model, resource_asset_id)
    if not asset.provisioned:
        raise NotProvisioned(f"{resource_asset_id!r} is not provisioned")
    updated = model.with_element(
        "assets", dataclasses.replace(asset, provisioned_by=None, state=None))
    if audit is not None:
        audit.emit(updated, emitting_control_id=mgmt_agent_id, event_kind="deprovision",
                   detail={"resource": resource_asset_id})
    return updated


def validate_state(model: TrustDomainModel, mgmt_agent_id: str, resource_asset_id: str,
                   expected_state: str, audit=None) -> bool:
    _require_management(model, mgmt_agent_id)
    asset = _resource(model, resource_asset_id)
    if not asset.provisioned:
        raise NotProvisioned(f"{resource_asset_id!r} is not provisioned")
    ok = asset.state == expected_state
    if audit is not None:
        audit.emit(model, emitting_control_id=mgmt_agent_id, event_kind="state-validated",
                   detail={"resource": resource_asset_id, "expected": expected_state,
                           "observed": asset.state, "ok": ok})
    return ok
