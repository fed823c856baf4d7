"""Assemble declarations into a referentially consistent model."""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

from ..errors import ModelBuildError, StructuralError
from .declarations import (AgentDecl, AssetDecl, ControlDecl, Declaration, DomainDecl,
                           EntityDecl, ModelDecl, PolicyDecl, RoleDecl, StoreDecl)
from .types import (ASSET_TYPES, ENTITY_TYPES, WILDCARD, ActionRule, Agent, AgentKind, Asset,
                    AssetType, Control, ControlKind, Domain, DomainEntity, DomainPolicyStore,
                    EntityType, FlowRule, Policy, Role, TrustDomainModel)

CONTROL_KEYWORDS = {
    "pep": ControlKind.PEP,
    "pdp": ControlKind.PDP,
    "audit": ControlKind.AUDIT,
    "management": ControlKind.MANAGEMENT,
}
CONTROL_KEYWORD_OF = {v: k for k, v in CONTROL_KEYWORDS.items()}

FLOW_ENDPOINT_MESSAGE = "flow endpoints must be Data assets"


def _text(value) -> str:
    return getattr(value, "value", value)


def control_kind(text) -> Optional[ControlKind]:
    if isinstance(text, ControlKind):
        return text
    if text in CONTROL_KEYWORDS:
        return CONTROL_KEYWORDS[text]
    try:
        return ControlKind(text)
    except ValueError:
        return None


class _Builder:
    def __init__(self, declarations: Sequence[Declaration]):
        self.decls = list(declarations)
        self.errors: List[StructuralError] = []
        self.by_id: Dict[str, List[Declaration]] = defaultdict(list)
        self.header: Optional[ModelDecl] = None

    def error(self, kind, message, ids=(), decls=(), spans=()):
        spans = tuple(spans) or tuple(d.span for d in decls if getattr(d, "span", None) is not None)
        self.errors.append(StructuralError(kind, message, tuple(ids), spans))

    # -- passes -------------------------------------------------------------

    def collect(self):
        for decl in self.decls:
            if isinstance(decl, ModelDecl):
                if self.header is not None:
                    self.error("DuplicateIdentifier", "model header declared twice",
                               (decl.name,), (self.header, decl))
                    continue
                self.header = decl
                if decl.central_store_id:
                    self.by_id[decl.central_store_id].append(decl)
                continue
            self.by_id[decl.id].append(decl)

        for element_id, decls in self.by_id.items():
            if len(decls) > 1:
                where = ", ".join(str(d.span) for d in decls if d.span is not None)
                suffix = f" (declared at {where})" if where else ""
                self.error("DuplicateIdentifier",
                           f"identifier {element_id!r} declared {len(decls)} times{suffix}",
                           (element_id,), decls)

    def first(self, cls):
        out = {}
        for element_id, decls in self.by_id.items():
            decl = decls[0]
            if isinstance(decl, cls):
                out[element_id] = decl
        return out

    def build(self) -> TrustDomainModel:
        self.collect()
        roles = self.first(RoleDecl)
        domains = self.first(DomainDecl)
        entities = self.first(EntityDecl)
        assets = self.first(AssetDecl)
        agents = self.first(AgentDecl)
        controls = self.first(ControlDecl)
        stores = self.first(StoreDecl)
        policies = self.first(PolicyDecl)
        central = self.header.central_store_id if self.header else None

        def ref(decl, target_id, table, what):
            if target_id not in table:
                self.error("DanglingReference",
                           f"{decl.id!r} references unknown {what} {target_id!r}",
                           (decl.id, target_id), (decl,))
                return False
            return True

        def is_management(element_id):
            if element_id in agents:
                return agents[element_id].management
            if element_id in controls:
                return control_kind(controls[element_id].kind) == ControlKind.MANAGEMENT
            return None

        for d in entities.values():
            if d.entity_type not in ENTITY_TYPES:
                self.error("TypeMismatch",
                           f"entity {d.id!r} has type {d.entity_type!r}; expected one of "
                           + ", ".join(ENTITY_TYPES), (d.id,), (d,))
            for dom in d.domains:
                ref(d, dom, domains, "domain")
            for role in d.roles:
                ref(d, role, roles, "role")

        for d in assets.values():
            if d.asset_type not in ASSET_TYPES:
                self.error("TypeMismatch",
                           f"asset {d.id!r} has type {d.asset_type!r}; expected one of "
                           + ", ".join(ASSET_TYPES), (d.id,), (d,))
            ref(d, d.owner, roles, "role")
            if d.provided_by is not None:
                if d.asset_type != AssetType.SERVICE.value:
                    self.error("TypeMismatch", f"only Service assets may be provided-by; "
                               f"{d.id!r} is {_text(d.asset_type)}", (d.id,), (d,))
                if ref(d, d.provided_by, assets, "asset"):
                    provider = assets[d.provided_by]
                    if provider.asset_type not in (AssetType.RESOURCE.value, AssetType.SERVICE.value):
                        self.error("TypeMismatch",
                                   f"{d.id!r} is provided by {provider.id!r}, which is not a Resource",
                                   (d.id, provider.id), (d, provider))
            if d.provisioned_by is not None:
                if d.asset_type != AssetType.RESOURCE.value:
                    self.error("TypeMismatch", f"only Resource assets can be provisioned; "
                               f"{d.id!r} is {_text(d.asset_type)}", (d.id,), (d,))
                if d.provisioned_by not in agents and d.provisioned_by not in controls:
                    ref(d, d.provisioned_by, agents, "agent")
            if d.state is not None and d.provisioned_by is None:
                self.error("TypeMismatch", f"asset {d.id!r} has a state but is not provisioned",
                           (d.id,), (d,))

        for d in agents.values():
            ref(d, d.owner, roles, "role")
            if d.acts_for is not None:
                ref(d, d.acts_for, roles, "role")

        for d in controls.values():
            kind = control_kind(d.kind)
            if kind is None:
                self.error("TypeMismatch", f"control {d.id!r} has unknown kind {d.kind!r}",
                           (d.id,), (d,))
            ref(d, d.domain, domains, "domain")
            if kind == ControlKind.AUDIT and d.central_store is None:
                self.error("TypeMismatch", f"audit control {d.id!r} needs a central-store",
                           (d.id,), (d,))
            if d.central_store is not None:
                if kind is not None and kind != ControlKind.AUDIT:
                    self.error("TypeMismatch",
                               f"only audit controls forward to a central store ({d.id!r})",
                               (d.id,), (d,))
                if d.central_store != central:
                    self.error("DanglingReference",
                               f"{d.id!r} references unknown central store {d.central_store!r}",
                               (d.id, d.central_store), (d,))

        for d in stores.values():
            ref(d, d.domain, domains, "domain")

        subjects = set(roles) | set(entities) | set(agents) | {WILDCARD}
        for d in policies.values():
            ref(d, d.establisher, roles, "role")
            ref(d, d.scope, domains, "domain")
            for agent_id in d.published_by:
                if agent_id not in agents and agent_id not in controls:
                    ref(d, agent_id, agents, "agent")
                elif not is_management(agent_id):
                    self.error("TypeMismatch",
                               f"policy {d.id!r} is published by {agent_id!r}, "
                               "which is not a management agent", (d.id, agent_id), (d,))
            if d.published_by and d.published_to is None:
                self.error("TypeMismatch", f"policy {d.id!r} is published to no store",
                           (d.id,), (d,))
            if d.published_to is not None:
                ref(d, d.published_to, stores, "policy store")
            for other in d.equivalent_to:
                if other == d.id:
                    self.error("TypeMismatch", f"policy {d.id!r} cannot be equivalent to itself",
                               (d.id,), (d,))
                else:
                    ref(d, other, policies, "policy")
            targets = (set(agents) | set(controls) | {WILDCARD}) if d.delivery else (set(assets) | {WILDCARD})
            for i, rule in enumerate(d.rules):
                if isinstance(rule, FlowRule):
                    rule_span = d.rule_spans[i] if i < len(d.rule_spans) else None
                    for endpoint in dict.fromkeys((rule.source_asset_id, rule.dest_asset_id)):
                        if not ref(d, endpoint, assets, "asset"):
                            continue
                        if assets[endpoint].asset_type != AssetType.DATA.value:
                            self.error("TypeMismatch",
                                       f"{FLOW_ENDPOINT_MESSAGE} ({endpoint!r} is "
                                       f"{_text(assets[endpoint].asset_type)})",
                                       (d.id, endpoint), (d,), (rule_span,) if rule_span else ())
                elif isinstance(rule, ActionRule):
                    if rule.subject not in subjects:
                        ref(d, rule.subject, roles, "rule subject")
                    if rule.target_asset_id not in targets:
                        ref(d, rule.target_asset_id, {}, "rule target")

        if self.errors:
            raise ModelBuildError(self.errors)
        return self.assemble(roles, domains, entities, assets, agents, controls, stores,
                             policies, central)

    def assemble(self, roles, domains, entities, assets, agents, controls, stores,
                 policies, central) -> TrustDomainModel:
        members = defaultdict(set)
        for d in entities.values():
            for dom in d.domains:
                members[dom].add(d.id)
        owned_assets = defaultdict(set)
        for d in assets.values():
            owned_assets[d.owner].add(d.id)
        owned_agents = defaultdict(set)
        for d in agents.values():
            owned_agents[d.owner].add(d.id)
        established = defaultdict(set)
        store_policies = defaultdict(set)
        equivalents = defaultdict(set)
        published_policy_to = set()
        for d in policies.values():
            established[d.establisher].add(d.id)
            if d.published_to is not None:
                store_policies[d.published_to].add(d.id)
                for agent_id in d.published_by:
                    published_policy_to.add((agent_id, d.published_to))
            for other in d.equivalent_to:
                equivalents[d.id].add(other)
                equivalents[other].add(d.id)

        return TrustDomainModel(
            name=self.header.name if self.header else "untitled",
            central_audit_store_id=central,
            roles={r: Role(r, frozenset(owned_assets[r]), frozenset(owned_agents[r]),
                           frozenset(established[r])) for r in roles},
            domains={d: Domain(d, frozenset(members[d])) for d in domains},
            entities={d.id: DomainEntity(d.id, EntityType(d.entity_type), frozenset(d.domains),
                                         frozenset(d.roles)) for d in entities.values()},
            assets={d.id: Asset(d.id, AssetType(d.asset_type), d.owner, d.state,
                                d.provisioned_by, d.provided_by) for d in assets.values()},
            agents={d.id: Agent(d.id, d.owner, d.acts_for or d.owner,
                                AgentKind.MANAGEMENT if d.management else AgentKind.GENERIC)
                    for d in agents.values()},
            controls={d.id: Control(d.id, control_kind(d.kind), d.domain, d.central_store)
                      for d in controls.values()},
            policy_stores={d.id: DomainPolicyStore(d.id, d.domain,
                                                   tuple(sorted(store_policies[d.id])))
                           for d in stores.values()},
            policies={d.id: Policy(d.id, d.establisher, d.scope, tuple(d.rules),
                                   tuple(d.published_by), d.published_to,
                                   frozenset(equivalents[d.id]), d.delivery)
                      for d in policies.values()},
            published_policy_to=frozenset(published_policy_to),
        )


def build_model(declarations: Iterable[Declaration]) -> TrustDomainModel:
    """Assemble ``declarations`` into a model.

    Raises :class:`ModelBuildError` listing every duplicate identifier,
    dangling reference and type mismatch.  Axioms are not checked here.
    """
    return _Builder(list(declarations)).build()


def model_declarations(model: TrustDomainModel):
    """Inverse of :func:`build_model`: one declaration per element."""
    out: List[Declaration] = [ModelDecl(model.name, model.central_audit_store_id)]
    out += [RoleDecl(r) for r in model.roles]
    out += [DomainDecl(d) for d in model.domains]
    out += [EntityDecl(e.id, e.entity_type.value, tuple(sorted(e.memberships)),
                       tuple(sorted(e.role_ids))) for e in model.entities.values()]
    out += [AgentDecl(a.id, a.owner_role_id, a.acts_on_behalf_of,
                      a.kind == AgentKind.MANAGEMENT) for a in model.agents.values()]
    out += [AssetDecl(a.id, a.asset_type.value, a.owner_role_id, a.provided_by,
                      a.provisioned_by, a.state) for a in model.assets.values()]
    out += [ControlDecl(c.id, CONTROL_KEYWORD_OF[c.kind], c.domain_id, c.central_store_id)
            for c in model.controls.values()]
    out += [StoreDecl(s.id, s.domain_id) for s in model.policy_stores.values()]
    out += [PolicyDecl(p.id, p.establisher_role_id, p.scope_domain_id, p.rules,
                       p.is_delivery_policy, tuple(p.published_by), p.published_to,
                       tuple(sorted(p.equivalent_to))) for p in model.policies.values()]
    return out
