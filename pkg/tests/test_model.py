from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelgen import random_declarations
from trustdomains.audit import AuditChannel, CentralAuditStore
from trustdomains.core import (ActionRule, AgentDecl, AssetDecl, ControlDecl, Domain,
                               DomainDecl, Effect, EntityDecl, FlowRule, ModelDecl, PolicyDecl,
                               RoleDecl, StoreDecl,
                               build_model, clone_policy, deprovision_resource, domain_members,
                               equivalence_class, provision_resource, validate_state)
from trustdomains.core.types import AssetType, EntityType, TrustDomainModel
from trustdomains.errors import (AlreadyProvisioned, ModelBuildError, NotAResource,
                                 NotManagementAgent, NotProvisioned, UnknownDomain,
                                 UnknownPolicy)


def small_model():
    return build_model([
        RoleDecl("R"), RoleDecl("Ops"), DomainDecl("D1"), DomainDecl("D2"),
        EntityDecl("E", "Person", ("D1", "D2"), ("R",)),
        EntityDecl("F", "System", ("D1",), ("Ops",)),
        AgentDecl("M1", "Ops", "Ops", management=True), AgentDecl("G", "R", "R"),
        AssetDecl("A", "Data", "R"), AssetDecl("B", "Data", "R"),
        AssetDecl("R1", "Resource", "Ops"), AssetDecl("R2", "Resource", "Ops", None, "M1", "clean"),
        ControlDecl("Audit", "audit", "D1", "CAS"),
        StoreDecl("S", "D1"),
        PolicyDecl("P1", "R", "D1", (FlowRule("A", "B"),), published_by=("M1",), published_to="S"),
        ModelDecl("small", "CAS"),
    ])


# -- build_model ---------------------------------------------------------------

def test_empty_declarations_build_an_empty_model():
    model = build_model([])
    assert model.element_count() == 0
    assert model == TrustDomainModel()


def test_healthcare_fixture_counts(healthcare):
    orgs = [e for e in healthcare.entities.values() if e.entity_type == EntityType.ORGANIZATION]
    data = [a for a in healthcare.assets.values() if a.asset_type == AssetType.DATA]
    assert sorted(e.id for e in orgs) == ["MS1", "MS2", "SS1", "SS2", "SS3"]
    assert len(data) == 9


def test_dangling_scope_names_the_domain():
    with pytest.raises(ModelBuildError) as info:
        build_model([RoleDecl("R"), PolicyDecl("P", "R", "Nowhere")])
    errors = info.value.errors
    assert [e.kind for e in errors] == ["DanglingReference"]
    assert "Nowhere" in errors[0].element_ids and "Nowhere" in errors[0].message


def test_duplicate_identifier_is_reported():
    with pytest.raises(ModelBuildError) as info:
        build_model([RoleDecl("X"), DomainDecl("X")])
    assert info.value.errors[0].kind == "DuplicateIdentifier"


def test_flow_endpoint_must_be_data():
    with pytest.raises(ModelBuildError) as info:
        build_model([RoleDecl("R"), DomainDecl("D"), AssetDecl("S", "Service", "R"),
                     AssetDecl("A", "Data", "R"),
                     PolicyDecl("P", "R", "D", (FlowRule("A", "S"),))])
    assert [e.kind for e in info.value.errors] == ["TypeMismatch"]
    assert "flow endpoints must be Data assets" in info.value.errors[0].message


def test_publisher_must_be_management_agent():
    with pytest.raises(ModelBuildError):
        build_model([RoleDecl("R"), DomainDecl("D"), AgentDecl("G", "R"), StoreDecl("S", "D"),
                     PolicyDecl("P", "R", "D", published_by=("G",), published_to="S")])


def _referenced_ids(model):
    refs = set()
    for e in model.entities.values():
        refs |= set(e.memberships) | set(e.role_ids)
    for a in model.assets.values():
        refs |= {a.owner_role_id} | {x for x in (a.provided_by, a.provisioned_by) if x}
    for a in model.agents.values():
        refs |= {a.owner_role_id, a.acts_on_behalf_of}
    for c in model.controls.values():
        refs.add(c.domain_id)
    for s in model.policy_stores.values():
        refs |= {s.domain_id} | set(s.policy_ids)
    for p in model.policies.values():
        refs |= {p.establisher_role_id, p.scope_domain_id} | set(p.published_by)
        refs |= set(p.equivalent_to) | ({p.published_to} if p.published_to else set())
        for rule in p.flow_rules:
            refs |= {rule.source_asset_id, rule.dest_asset_id}
    for r in model.roles.values():
        refs |= set(r.owned_asset_ids) | set(r.owned_agent_ids) | set(r.established_policy_ids)
    for d in model.domains.values():
        refs |= set(d.member_ids)
    return refs


@pytest.mark.parametrize("seed", range(25))
def test_every_reference_resolves(seed):
    model = build_model(random_declarations(seed))
    known = {el.id for _, el in model.iter_elements()}
    assert _referenced_ids(model) <= known


@pytest.mark.parametrize("seed", range(25))
def test_single_ownership(seed):
    model = build_model(random_declarations(seed))
    for asset in model.assets.values():
        assert sum(asset.id in r.owned_asset_ids for r in model.roles.values()) == 1
    for agent in model.agents.values():
        assert sum(agent.id in r.owned_agent_ids for r in model.roles.values()) == 1


# -- domain membership -----------------------------------------------------------

def test_domain_members_demographics(healthcare):
    assert domain_members(healthcare, "SS1-SS3-Demo-TDom") == {
        "SS1", "SS3", "SS1.DemographicsDB", "SS3.DemographicsDB"}


def test_domain_members_multi_membership_and_empty():
    model = small_model().with_element("domains", Domain("Empty"))
    assert domain_members(model, "Empty") == frozenset()
    assert "E" in domain_members(model, "D1") and "E" in domain_members(model, "D2")
    with pytest.raises(UnknownDomain):
        domain_members(model, "Missing")


# -- cloning ---------------------------------------------------------------------

def test_clone_links_both_ways_and_keeps_original():
    model = small_model()
    before = model.policies["P1"]
    cloned, clone_id = clone_policy(model, "P1", "D2", "Ops")
    clone = cloned.policies[clone_id]
    assert clone.rules == before.rules
    assert clone.scope_domain_id == "D2" and clone.establisher_role_id == "Ops"
    assert clone.equivalent_to == {"P1"}
    assert cloned.policies["P1"].equivalent_to == {clone_id}
    original = cloned.policies["P1"]
    assert (original.rules, original.scope_domain_id, original.establisher_role_id) == (
        before.rules, before.scope_domain_id, before.establisher_role_id)
    assert model.policies["P1"] == before


def _closure(model, start):
    seen, todo = {start}, [start]
    while todo:
        for nxt in model.policies[todo.pop()].equivalent_to:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def test_clone_chain_closure_has_three_members():
    model, c1 = clone_policy(small_model(), "P1", "D2", "R")
    model, c2 = clone_policy(model, c1, "D1", "R")
    assert _closure(model, "P1") == {"P1", c1, c2}
    assert equivalence_class(model, c2) == {"P1", c1, c2}


def test_clone_into_same_domain():
    model, c1 = clone_policy(small_model(), "P1", "D1", "R")
    assert model.policies[c1].rules == model.policies["P1"].rules
    assert model.policies[c1].scope_domain_id == "D1"


def test_clone_errors():
    with pytest.raises(UnknownPolicy):
        clone_policy(small_model(), "Nope", "D1", "R")
    with pytest.raises(UnknownDomain):
        clone_policy(small_model(), "P1", "Nope", "R")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10), st.sampled_from(["D1", "D2"])), max_size=8))
def test_equivalence_stays_symmetric(steps):
    model = small_model()
    for pick, domain in steps:
        ids = sorted(model.policies)
        model, _ = clone_policy(model, ids[pick % len(ids)], domain, "R")
    for p in model.policies.values():
        assert p.id not in p.equivalent_to
        for q in p.equivalent_to:
            assert p.id in model.policies[q].equivalent_to


# -- provisioning ----------------------------------------------------------------

def test_provision_sets_agent_and_state():
    model = provision_resource(small_model(), "M1", "R1", "clean")
    assert model.assets["R1"].provisioned_by == "M1"
    assert model.assets["R1"].state == "clean"


def test_provision_errors():
    model = small_model()
    with pytest.raises(AlreadyProvisioned):
        provision_resource(provision_resource(model, "M1", "R1", "clean"), "M1", "R1", "x")
    with pytest.raises(NotAResource):
        provision_resource(model, "M1", "A", "clean")
    with pytest.raises(NotManagementAgent):
        provision_resource(model, "G", "R1", "clean")


def test_deprovision_is_inverse_of_provision():
    model = small_model()
    again = deprovision_resource(provision_resource(model, "M1", "R1", "clean"), "M1", "R1")
    assert again.assets == model.assets
    with pytest.raises(NotProvisioned):
        deprovision_resource(again, "M1", "R1")


def test_validate_state_and_audit_event():
    model = small_model()
    store = CentralAuditStore("CAS")
    channel = AuditChannel("Audit", store)
    assert validate_state(model, "M1", "R2", "clean", audit=channel) is True
    assert validate_state(model, "M1", "R2", "patched", audit=channel) is False
    kinds = [(e.event_kind, e.detail.get("ok"), e.critical) for e in store.events]
    assert kinds[0] == ("state-validated", True, False)
    assert kinds[1] == ("state-validated", False, True)
    assert kinds[2][0] == "alert"
    with pytest.raises(NotProvisioned):
        validate_state(model, "M1", "R1", "clean")


def test_models_are_immutable_values():
    model = small_model()
    with pytest.raises(dataclasses.FrozenInstanceError):
        model.policies["P1"].scope_domain_id = "D2"


def test_action_rule_defaults():
    rule = ActionRule(Effect.PERMIT, "R", "read")
    assert rule.target_asset_id == "*" and rule.guard is None
