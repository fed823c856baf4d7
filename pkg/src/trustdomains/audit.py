"""Tamper-evident evidence chain.

Controls report what they observe as :class:`AuditEvent` records.  Audit
agents forward events to a :class:`CentralAuditStore`, an append-only list
in which every event carries ``chain_hash = sha256(previous chain_hash ||
canonical event bytes)``.  The chain starts from :data:`GENESIS`.

Canonical event bytes are the JSON encoding of the event without its
``chain_hash``, keys sorted, no insignificant whitespace, UTF-8.  Each
event names its store, so the store id in the file header is covered by
the chain as well.

On disk a store is one JSON header line naming the digest and genesis
value followed by one canonical JSON line per event (with its
``chain_hash``).  :func:`verify_bytes` checks a persisted store byte for
byte and reports the index of the first event that no longer verifies.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .core import ControlKind, TrustDomainModel
from .errors import AuditFormatError, NoCentralStore, UnknownAgent, UnknownControl

DIGEST = "sha256"
GENESIS = "0" * 64
FORMAT = "tdm-audit"
FORMAT_VERSION = 1

EVENT_KINDS = ("action-performed", "action-blocked", "obligation-pending", "state-validated",
               "provision", "deprovision", "alert")
CRITICAL_KINDS = frozenset({"action-blocked", "deprovision"})

EVIDENCE_KINDS = ("audit-log", "provenance-record", "integrity-measurement-list",
                  "digital-certificate")

_EVENT_FIELDS = ("id", "seq", "store_id", "emitting_control_id", "event_kind", "action_id", "decision_id",
                 "forwarded_to", "forwarded_by", "critical", "detail", "chain_hash")


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def chain_digest(previous: str, body: dict) -> str:
    return hashlib.sha256(previous.encode("ascii") + canonical_json(body)).hexdigest()


def is_critical(event_kind: str, detail: Optional[dict] = None) -> bool:
    """Blocked actions, deprovisioning and failed state validation are critical."""
    if event_kind in CRITICAL_KINDS:
        return True
    return event_kind == "state-validated" and not (detail or {}).get("ok", True)


@dataclass(frozen=True)
class AuditEvent:
    id: str
    seq: int
    store_id: str
    emitting_control_id: str
    event_kind: str
    action_id: Optional[str] = None
    decision_id: Optional[str] = None
    forwarded_to: Optional[str] = None
    forwarded_by: Optional[str] = None
    critical: bool = False
    detail: Dict = field(default_factory=dict)
    chain_hash: str = ""

    def body(self) -> dict:
        out = asdict(self)
        del out["chain_hash"]
        return out

    def record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Evidence:
    kind: str
    payload: Dict


class CentralAuditStore:
    """Append-only, hash-chained event store.  Single writer."""

    def __init__(self, store_id: str, digest: str = DIGEST, genesis: str = GENESIS):
        if digest != DIGEST:
            raise AuditFormatError(f"unsupported digest {digest!r}")
        self.id = store_id
        self.digest = digest
        self.genesis = genesis
        self._events: List[AuditEvent] = []
        self.head_hash = genesis

    @property
    def events(self) -> Tuple[AuditEvent, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def append(self, emitting_control_id: str, event_kind: str, *, action_id=None,
               decision_id=None, forwarded_to=None, forwarded_by=None, critical=None,
               detail=None) -> AuditEvent:
        if event_kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {event_kind!r}")
        detail = dict(detail or {})
        seq = len(self._events)
        draft = AuditEvent(
            id=f"E{seq + 1:04d}", seq=seq, store_id=self.id,
            emitting_control_id=emitting_control_id,
            event_kind=event_kind, action_id=action_id, decision_id=decision_id,
            forwarded_to=forwarded_to, forwarded_by=forwarded_by,
            critical=is_critical(event_kind, detail) if critical is None else bool(critical),
            detail=detail,
        )
        event = AuditEvent(**dict(draft.body(), chain_hash=chain_digest(self.head_hash, draft.body())))
        self._events.append(event)
        self.head_hash = event.chain_hash
        return event

    def header(self) -> dict:
        return {"format": FORMAT, "version": FORMAT_VERSION, "store": self.id,
                "digest": self.digest, "genesis": self.genesis}

    def dumps(self) -> bytes:
        lines = [canonical_json(self.header())]
        lines += [canonical_json(e.record()) for e in self._events]
        return b"\n".join(lines) + b"\n"

    def save(self, path) -> None:
        Path(path).write_bytes(self.dumps())


def _emitter_known(model: TrustDomainModel, emitter_id: str) -> bool:
    return emitter_id in model.controls or model.is_management_agent(emitter_id)


def record_event(store: CentralAuditStore, model: TrustDomainModel, *,
                 emitting_control_id: str, event_kind: str,
                 **fields) -> Tuple[CentralAuditStore, str, str]:
    """Append an event emitted by a known control; returns (store, id, chain hash)."""
    if not _emitter_known(model, emitting_control_id):
        raise UnknownControl(emitting_control_id)
    event = store.append(emitting_control_id, event_kind, **fields)
    return store, event.id, event.chain_hash


def alert_target(model: TrustDomainModel, domain_id: str) -> Optional[str]:
    """The management agent responsible for ``domain_id``."""
    controls = model.controls_of_kind(ControlKind.MANAGEMENT, domain_id)
    if controls:
        return controls[0].id
    domain = model.domains.get(domain_id)
    members = domain.member_ids if domain else frozenset()
    for agent in sorted(model.agents.values(), key=lambda a: a.id):
        if model.is_management_agent(agent.id) and model.role_holders(agent.owner_role_id) & members:
            return agent.id
    return None


def forward(audit_agent_id: str, event_fields: dict, model: TrustDomainModel,
            store: CentralAuditStore) -> Tuple[CentralAuditStore, Optional[AuditEvent]]:
    """Forward an event through an audit agent; critical events raise an alert.

    ``event_fields`` are the keyword arguments of :meth:`CentralAuditStore.append`
    plus ``emitting_control_id`` and ``event_kind``.  Returns the store and the
    alert event, if one was appended.
    """
    agent = model.controls.get(audit_agent_id)
    if agent is None or agent.kind != ControlKind.AUDIT:
        raise UnknownAgent(audit_agent_id)
    if agent.central_store_id is None:
        raise NoCentralStore(f"audit agent {audit_agent_id!r} has no central store")
    if agent.central_store_id != store.id:
        raise NoCentralStore(f"audit agent {audit_agent_id!r} forwards to "
                             f"{agent.central_store_id!r}, not {store.id!r}")
    fields = dict(event_fields)
    emitter = fields.pop("emitting_control_id")
    kind = fields.pop("event_kind")
    if not _emitter_known(model, emitter):
        raise UnknownControl(emitter)
    event = store.append(emitter, kind, forwarded_to=store.id, forwarded_by=audit_agent_id,
                         **fields)
    if not event.critical:
        return store, None
    alert = store.append(audit_agent_id, "alert", forwarded_to=store.id,
                         forwarded_by=audit_agent_id, critical=False,
                         detail={"alerted": alert_target(model, agent.domain_id),
                                 "event": event.id, "event_kind": event.event_kind})
    return store, alert


@dataclass
class AuditChannel:
    """Wiring of a reporting control to an audit agent and its central store."""

    agent_id: str
    store: CentralAuditStore
    last_alert: Optional[AuditEvent] = None

    def emit(self, model: TrustDomainModel, **fields) -> AuditEvent:
        before = len(self.store)
        _, self.last_alert = forward(self.agent_id, fields, model, self.store)
        return self.store.events[before]


def evidence_for(store: CentralAuditStore, ref_id: str) -> List[Evidence]:
    """Evidence about an action (or a decision): its events plus a provenance record."""
    events = store.events
    decision_ids = {ref_id}
    decision_ids |= {e.decision_id for e in events if e.action_id == ref_id and e.decision_id}
    related = [e for e in events if e.action_id == ref_id or
               (e.decision_id is not None and e.decision_id in decision_ids)]
    if not related:
        return []
    out = [Evidence("audit-log", e.record()) for e in related]
    source = next((e for e in related if "request" in e.detail), None)
    if source is not None:
        out.append(Evidence("provenance-record", {
            "request": source.detail["request"],
            "decision": source.decision_id,
            "decision_kind": source.detail.get("decision_kind"),
            "pdp": source.detail.get("pdp"),
            "influenced": list(source.detail.get("influenced", [])),
            "action": next((e.action_id for e in related if e.action_id), None),
            "events": [e.id for e in related],
        }))
    return out


def verify_chain(store: CentralAuditStore) -> Tuple[bool, Optional[int]]:
    """Recompute the chain from genesis.

    Returns ``(True, None)`` or ``(False, i)`` with ``i`` the first event
    whose hash or position does not verify; ``i == len(store)`` means only
    the head hash is wrong.
    """
    previous = store.genesis
    for index, event in enumerate(store.events):
        if (event.seq != index or event.store_id != store.id
                or chain_digest(previous, event.body()) != event.chain_hash):
            return False, index
        previous = event.chain_hash
    if store.head_hash != previous:
        return False, len(store)
    return True, None


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _parse_header(line: bytes) -> dict:
    header = json.loads(line.decode("utf-8"))
    if (not isinstance(header, dict) or header.get("format") != FORMAT
            or header.get("version") != FORMAT_VERSION or header.get("digest") != DIGEST
            or not isinstance(header.get("store"), str)
            or not isinstance(header.get("genesis"), str)
            or set(header) != {"format", "version", "store", "digest", "genesis"}
            or canonical_json(header) != line):
        raise ValueError("malformed audit store header")
    return header


def _parse_event(line: bytes) -> AuditEvent:
    record = json.loads(line.decode("utf-8"))
    if not isinstance(record, dict) or set(record) != set(_EVENT_FIELDS):
        raise ValueError("malformed event record")
    if canonical_json(record) != line:
        raise ValueError("event record is not canonical")
    return AuditEvent(**record)


def _split(data: bytes) -> Tuple[List[bytes], bool]:
    lines = data.split(b"\n")
    terminated = lines[-1] == b""
    if terminated:
        lines.pop()
    return lines, terminated


def verify_bytes(data: bytes) -> Tuple[bool, Optional[int]]:
    """Verify a persisted store.

    Any damage to the header is reported at index 0: it anchors the chain
    at its genesis value.
    """
    lines, terminated = _split(data)
    if not lines:
        return False, 0
    try:
        header = _parse_header(lines[0])
    except (ValueError, UnicodeDecodeError):
        return False, 0
    if not terminated and len(lines) == 1:
        return False, 0
    previous = header["genesis"]
    events = lines[1:]
    for index, line in enumerate(events):
        if not terminated and index == len(events) - 1:
            return False, index
        try:
            event = _parse_event(line)
        except (ValueError, TypeError, UnicodeDecodeError):
            return False, index
        if event.seq != index or chain_digest(previous, event.body()) != event.chain_hash:
            return False, index
        if event.store_id != header["store"]:
            # the event itself verifies, so the header is what changed
            return False, 0
        previous = event.chain_hash
    return True, None


def loads(data: bytes) -> CentralAuditStore:
    """Rebuild a store from its persisted bytes without judging the chain."""
    lines, terminated = _split(data)
    if not lines or not terminated:
        raise AuditFormatError("audit store must be newline-terminated and non-empty")
    try:
        header = _parse_header(lines[0])
    except (ValueError, UnicodeDecodeError) as exc:
        raise AuditFormatError(f"line 1: {exc}") from None
    store = CentralAuditStore(header["store"], header["digest"], header["genesis"])
    for lineno, line in enumerate(lines[1:], 2):
        try:
            event = _parse_event(line)
        except (ValueError, TypeError, UnicodeDecodeError) as exc:
            raise AuditFormatError(f"line {lineno}: {exc}") from None
        store._events.append(event)
        store.head_hash = event.chain_hash
    return store


def load(path) -> CentralAuditStore:
    return loads(Path(path).read_bytes())
