"""Data-flow graph, derived trust domains and observed-flow checking."""

from __future__ import annotations

import re
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .core import AssetType, Direction, TrustDomainModel
from .errors import UnknownNode

BIDIRECTIONAL = "bidirectional"
ONE_DIRECTIONAL = "one-directional"
MIXED = "mixed"


@dataclass(frozen=True)
class FlowGraph:
    nodes: FrozenSet[str]
    edges: FrozenSet[Tuple[str, str, str]]  # (source, dest, generating policy)

    def __post_init__(self):
        succ: Dict[str, set] = defaultdict(set)
        pred: Dict[str, set] = defaultdict(set)
        for src, dst, _ in self.edges:
            succ[src].add(dst)
            pred[dst].add(src)
        object.__setattr__(self, "_succ", {k: tuple(sorted(v)) for k, v in succ.items()})
        object.__setattr__(self, "_pred", {k: tuple(sorted(v)) for k, v in pred.items()})

    def successors(self, node: str) -> Tuple[str, ...]:
        return self._succ.get(node, ())

    def predecessors(self, node: str) -> Tuple[str, ...]:
        return self._pred.get(node, ())

    def out_degree(self, node: str) -> int:
        return len(self.successors(node))

    def in_degree(self, node: str) -> int:
        return len(self.predecessors(node))

    def has_edge(self, src: str, dst: str) -> bool:
        return dst in self._succ.get(src, ())

    def policies_for(self, src: str, dst: str) -> Tuple[str, ...]:
        return tuple(sorted(p for s, d, p in self.edges if s == src and d == dst))


def build_flow_graph(model: TrustDomainModel) -> FlowGraph:
    """One node per Data asset; one directed edge per rule direction."""
    nodes = frozenset(a.id for a in model.assets.values() if a.asset_type == AssetType.DATA)
    edges = set()
    for policy in model.policies.values():
        for rule in policy.flow_rules:
            for src, dst in rule.directed_edges():
                edges.add((src, dst, policy.id))
    return FlowGraph(nodes, frozenset(edges))


def reachable(graph: FlowGraph, src: str, dst: str) -> Optional[List[str]]:
    """Shortest directed path from ``src`` to ``dst``, or ``None``.

    Among shortest paths the lexicographically smallest node sequence is
    returned: breadth-first search with neighbours visited in sorted order
    keeps each level's queue in path order.
    """
    for node in (src, dst):
        if node not in graph.nodes:
            raise UnknownNode(node)
    if src == dst:
        return [src]
    parent = {src: None}
    queue = deque([src])
    while queue:
        node = queue.popleft()
        for nxt in graph.successors(node):
            if nxt in parent:
                continue
            parent[nxt] = node
            if nxt == dst:
                path = [dst]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(nxt)
    return None


# ---------------------------------------------------------------------------
# Derived trust domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedDomain:
    name: str
    member_store_ids: FrozenSet[str]
    member_entity_ids: FrozenSet[str]
    generating_policy_ids: FrozenSet[str]
    direction_profile: str


def policy_tag(policy_id: str) -> str:
    """The user tag carried by a policy id: the text after its last dot."""
    return policy_id.rsplit(".", 1)[1] if "." in policy_id else ""


def _owner_labels(model: TrustDomainModel, store_id: str) -> Tuple[str, ...]:
    owners = model.asset_owner_entities(store_id)
    if owners:
        return tuple(sorted(owners))
    return (model.assets[store_id].owner_role_id,)


def _order_owners(owners: Sequence[str], links: Iterable[Tuple[str, str]]) -> List[str]:
    """Order owners along their flow path when the owner graph is a simple path.

    A hub-and-spoke agreement between two parties through a shared system
    reads as ``A-Hub-B``.  Anything that is not a simple path is sorted.
    """
    owners = sorted(set(owners))
    if len(owners) <= 2:
        return owners
    adj: Dict[str, set] = {o: set() for o in owners}
    for a, b in links:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    degrees = sorted(len(v) for v in adj.values())
    is_path = (sum(degrees) == 2 * (len(owners) - 1)
               and degrees[:2] == [1, 1] and all(d == 2 for d in degrees[2:]))
    if not is_path:
        return owners
    start = min(o for o in owners if len(adj[o]) == 1)
    order, prev = [start], None
    while len(order) < len(owners):
        here = order[-1]
        nxt = [n for n in adj[here] if n != prev]
        if len(nxt) != 1:  # a path plus a disjoint cycle passes the degree test
            return owners
        prev = here
        order.append(nxt[0])
    return order


def derive_trust_domains(model: TrustDomainModel) -> List[DerivedDomain]:
    """One derived domain per policy that carries flow rules, sorted by name."""
    drafts = []
    for policy in sorted(model.policies.values(), key=lambda p: p.id):
        rules = policy.flow_rules
        if not rules:
            continue
        stores, links, labels = set(), set(), set()
        for rule in rules:
            src_owners = _owner_labels(model, rule.source_asset_id)
            dst_owners = _owner_labels(model, rule.dest_asset_id)
            stores.update((rule.source_asset_id, rule.dest_asset_id))
            labels.update(src_owners)
            labels.update(dst_owners)
            links.update((a, b) for a in src_owners for b in dst_owners)
        entities = frozenset(o for s in stores for o in model.asset_owner_entities(s))
        directions = {r.direction for r in rules}
        if directions == {Direction.BI}:
            profile = BIDIRECTIONAL
        elif directions == {Direction.UNI}:
            profile = ONE_DIRECTIONAL
        else:
            profile = MIXED
        parts = _order_owners(labels, links)
        tag = policy_tag(policy.id)
        name = "-".join(parts + [tag] if tag else parts)
        drafts.append([name, frozenset(stores), entities, policy.id, profile])

    counts: Dict[str, int] = defaultdict(int)
    for draft in drafts:
        counts[draft[0]] += 1
    domains = []
    for name, stores, entities, policy_id, profile in drafts:
        if counts[name] > 1:
            name = f"{name}({policy_id})"
        domains.append(DerivedDomain(name, stores, entities,
                                     frozenset({policy_id}), profile))
    return sorted(domains, key=lambda d: d.name)


# ---------------------------------------------------------------------------
# Observed flows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowEvent:
    source_store_id: str
    dest_store_id: str
    timestamp: int = 0


@dataclass(frozen=True)
class FlowViolation:
    event: FlowEvent
    reason: str
    reverse_policy_ids: Tuple[str, ...] = ()
    cited_domains: Tuple[str, ...] = ()
    indirect_path: Optional[Tuple[str, ...]] = None

    def record(self) -> dict:
        return {
            "seq": self.event.timestamp,
            "source": self.event.source_store_id,
            "dest": self.event.dest_store_id,
            "reason": self.reason,
            "reverse_policies": list(self.reverse_policy_ids),
            "domains": list(self.cited_domains),
            "indirect_path": list(self.indirect_path) if self.indirect_path else None,
        }


def check_flow_log(model: TrustDomainModel, events: Iterable[FlowEvent]) -> List[FlowViolation]:
    """Flag every event that is not a direct edge of the flow graph.

    A transitive path does not license a direct transfer; when one exists it
    is attached to the violation so the transitivity is visible.
    """
    graph = build_flow_graph(model)
    domain_of = defaultdict(list)
    for dom in derive_trust_domains(model):
        for pid in dom.generating_policy_ids:
            domain_of[pid].append(dom)
    violations = []
    for event in events:
        src, dst = event.source_store_id, event.dest_store_id
        missing = [s for s in (src, dst) if s not in graph.nodes]
        if missing:
            violations.append(FlowViolation(
                event, "unknown data store " + ", ".join(repr(m) for m in missing)))
            continue
        if graph.has_edge(src, dst):
            continue
        reverse = graph.policies_for(dst, src)
        if reverse:
            doms = [d for pid in reverse for d in domain_of[pid]]
            cited = ", ".join(f"{d.name} ({d.direction_profile})" for d in doms)
            reason = (f"no agreement permits {src} -> {dst}; policy "
                      f"{', '.join(reverse)} only allows {dst} -> {src} [{cited}]")
            violations.append(FlowViolation(event, reason, reverse,
                                            tuple(d.name for d in doms)))
            continue
        path = reachable(graph, src, dst)
        if path:
            reason = (f"no direct agreement permits {src} -> {dst}; only a transitive path "
                      f"exists ({' -> '.join(path)})")
            violations.append(FlowViolation(event, reason, indirect_path=tuple(path)))
        else:
            violations.append(FlowViolation(event, f"no agreement permits {src} -> {dst}"))
    return violations


_FLOW_LINE = re.compile(r"^seq\s+(\d+)\s+flow\s+(\S+)\s*->\s*(\S+)$")


def parse_flow_log(text: str) -> List[FlowEvent]:
    """Parse ``seq <n> flow <SRC> -> <DST>`` records; ``#`` lines are comments."""
    events = []
    last = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _FLOW_LINE.match(line)
        if m is None:
            raise ValueError(f"line {lineno}: expected 'seq <n> flow <SRC> -> <DST>', got {raw!r}")
        seq = int(m.group(1))
        if last is not None and seq <= last:
            raise ValueError(f"line {lineno}: sequence number {seq} is not increasing")
        last = seq
        events.append(FlowEvent(m.group(2), m.group(3), seq))
    return events


def to_dot(graph: FlowGraph, domains: Sequence[DerivedDomain] = ()) -> str:
    """Render the flow graph in DOT; derived domains become clusters."""
    def q(s):
        return '"' + s.replace('"', '\\"') + '"'

    lines = ["digraph flows {", "  rankdir=LR;"]
    for i, dom in enumerate(sorted(domains, key=lambda d: d.name)):
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append(f"    label={q(dom.name)};")
        for store in sorted(dom.member_store_ids):
            lines.append(f"    {q(store)};")
        lines.append("  }")
    for node in sorted(graph.nodes):
        lines.append(f"  {q(node)};")
    for src, dst, pid in sorted(graph.edges):
        lines.append(f"  {q(src)} -> {q(dst)} [label={q(pid)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
