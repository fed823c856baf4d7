from __future__ import annotations

import hashlib
import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustdomains.audit import (EVIDENCE_KINDS, GENESIS, AuditChannel, CentralAuditStore,
                                evidence_for, forward, load, loads, record_event, verify_bytes,
                                verify_chain)
from trustdomains.axioms import check_axiom
from trustdomains.core import Control, ControlKind
from trustdomains.errors import AuditFormatError, NoCentralStore, UnknownAgent, UnknownControl
from trustdomains.fixtures import read_fixture
from trustdomains.simulation import parse_requests, simulate


def expected_hash(previous, event):
    body = {k: v for k, v in event.record().items() if k != "chain_hash"}
    raw = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(previous.encode() + raw.encode("utf-8")).hexdigest()


def fresh(model):
    return CentralAuditStore(model.central_audit_store_id)


# -- recording ---------------------------------------------------------------------

def test_first_event_chains_from_genesis(confichair):
    store, event_id, digest = record_event(fresh(confichair), confichair,
                                           emitting_control_id="Cloud.PEP",
                                           event_kind="action-performed", action_id="A1")
    assert event_id == "E0001"
    assert store.genesis == GENESIS == "0" * 64
    assert digest == expected_hash(GENESIS, store.events[0]) == store.head_hash


def test_identical_payloads_chain_differently(confichair):
    store = fresh(confichair)
    _, _, h1 = record_event(store, confichair, emitting_control_id="Cloud.PEP",
                            event_kind="action-performed", action_id="A1")
    _, _, h2 = record_event(store, confichair, emitting_control_id="Cloud.PEP",
                            event_kind="action-performed", action_id="A1")
    assert h1 != h2
    assert h2 == expected_hash(h1, store.events[1])


def test_unknown_emitter(confichair):
    with pytest.raises(UnknownControl):
        record_event(fresh(confichair), confichair, emitting_control_id="Nobody",
                     event_kind="alert")


# -- forwarding ----------------------------------------------------------------------

def test_non_critical_has_no_alert(confichair):
    store, alert = forward("Cloud.Audit", {"emitting_control_id": "Cloud.PEP",
                                           "event_kind": "action-performed"},
                           confichair, fresh(confichair))
    assert alert is None and len(store) == 1
    assert store.events[0].forwarded_to == confichair.central_audit_store_id


def test_critical_raises_alert_to_management(confichair):
    store, alert = forward("Cloud.Audit", {"emitting_control_id": "Cloud.PEP",
                                           "event_kind": "action-blocked"},
                           confichair, fresh(confichair))
    assert alert is not None and len(store) == 2
    assert alert.detail["alerted"] == "Cloud.Management"
    assert alert.detail["event"] == store.events[0].id


def test_forward_errors(confichair):
    with pytest.raises(UnknownAgent):
        forward("Cloud.PEP", {"emitting_control_id": "Cloud.PEP", "event_kind": "alert"},
                confichair, fresh(confichair))
    orphan = confichair.with_element("controls", Control("Orphan", ControlKind.AUDIT,
                                                         "ConfiChairCloud", None))
    with pytest.raises(NoCentralStore):
        forward("Orphan", {"emitting_control_id": "Cloud.PEP", "event_kind": "alert"},
                orphan, fresh(confichair))


def test_alert_completeness(confichair_run):
    events = confichair_run.store.events
    critical = [e for e in events if e.critical]
    alerts = [e for e in events if e.event_kind == "alert"]
    assert critical and len(alerts) == len(critical)
    assert {a.detail["event"] for a in alerts} == {e.id for e in critical}


def test_deprovision_is_critical(confichair):
    from trustdomains.core import deprovision_resource
    store = fresh(confichair)
    deprovision_resource(confichair, "CloudManager", "Cloud.Server",
                         audit=AuditChannel("Cloud.Audit", store))
    assert [e.event_kind for e in store.events] == ["deprovision", "alert"]


# -- evidence ------------------------------------------------------------------------

def test_evidence_for_action(confichair_run):
    action = confichair_run.log.actions[0]
    decision = confichair_run.log.decision(action.decision_id)
    evidence = evidence_for(confichair_run.store, action.id)
    kinds = [e.kind for e in evidence]
    assert kinds.count("provenance-record") == 1 and kinds.count("audit-log") >= 1
    record = next(e for e in evidence if e.kind == "provenance-record").payload
    assert set(record["influenced"]) == decision.influenced_policy_ids
    assert record["action"] == action.id and record["decision"] == decision.id


def test_evidence_for_unknown(confichair_run):
    assert evidence_for(confichair_run.store, "A9999") == []


def test_evidence_for_blocked_decision(confichair_run):
    blocked = next(o for o in confichair_run.outcomes if o.status == "blocked")
    evidence = evidence_for(confichair_run.store, blocked.decision.id)
    assert any(e.payload.get("event_kind") == "action-blocked" for e in evidence)


def test_evidence_kinds():
    assert EVIDENCE_KINDS == ("audit-log", "provenance-record", "integrity-measurement-list",
                              "digital-certificate")


# -- verification --------------------------------------------------------------------

def test_untampered_and_empty(confichair_run):
    assert verify_chain(confichair_run.store) == (True, None)
    assert verify_chain(CentralAuditStore("X")) == (True, None)


@pytest.mark.parametrize("k", [0, 5, 12])
def test_tampered_event_is_located(confichair_run, k):
    store = confichair_run.store
    store._events[k] = replace(store._events[k], detail={"forged": True})
    assert verify_chain(store) == (False, k)


def test_head_mismatch(confichair_run):
    confichair_run.store.head_hash = GENESIS
    assert verify_chain(confichair_run.store) == (False, len(confichair_run.store))


def test_persistence_round_trip(tmp_path, confichair_run):
    path = tmp_path / "cas.jsonl"
    confichair_run.store.save(path)
    loaded = load(path)
    assert loaded.events == confichair_run.store.events
    assert loaded.head_hash == confichair_run.store.head_hash
    assert loaded.dumps() == path.read_bytes()
    assert verify_chain(loaded) == (True, None)
    header = json.loads(path.read_bytes().split(b"\n")[0])
    assert header["digest"] == "sha256" and header["genesis"] == GENESIS


def test_loads_rejects_garbage():
    with pytest.raises(AuditFormatError):
        loads(b"not json\n")
    with pytest.raises(AuditFormatError):
        loads(b"")


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_random_byte_flips_are_caught(confichair_store_bytes, data):
    raw = confichair_store_bytes
    pos = data.draw(st.integers(0, len(raw) - 1))
    bit = data.draw(st.integers(0, 7))
    damaged = bytearray(raw)
    damaged[pos] ^= 1 << bit
    ok, index = verify_bytes(bytes(damaged))
    assert not ok
    line = raw[:pos].count(b"\n")
    assert index == max(line - 1, 0)


# -- append-only and AX12 closure -----------------------------------------------------

def test_append_only_prefix(confichair):
    requests = parse_requests(read_fixture("confichair-requests.txt"))
    full = simulate(confichair, requests).store.events
    for n in range(0, len(requests) + 1, 4):
        prefix = simulate(confichair, requests[:n]).store.events
        assert full[:len(prefix)] == prefix


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 19), max_size=25))
def test_any_script_is_fully_audited(confichair, picks):
    requests = parse_requests(read_fixture("confichair-requests.txt"))
    result = simulate(confichair, [requests[i] for i in picks])
    assert check_axiom(result.model, "AX12", result.log, result.store) == []
    assert verify_chain(result.store) == (True, None)
