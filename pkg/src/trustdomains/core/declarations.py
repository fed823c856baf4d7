"""Declarations: the flat, source-located form a model is assembled from.

The DSL parser produces these; programmatic callers can construct them
directly and leave ``span`` unset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .types import Rule


@dataclass(frozen=True, order=True)
class Span:
    """1-based, inclusive start and exclusive end position."""

    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class ModelDecl:
    name: str
    central_store_id: Optional[str] = None
    span: Optional[Span] = None


@dataclass(frozen=True)
class RoleDecl:
    id: str
    span: Optional[Span] = None


@dataclass(frozen=True)
class DomainDecl:
    id: str
    span: Optional[Span] = None


@dataclass(frozen=True)
class EntityDecl:
    id: str
    entity_type: str
    domains: Tuple[str, ...] = ()
    roles: Tuple[str, ...] = ()
    span: Optional[Span] = None


@dataclass(frozen=True)
class AssetDecl:
    id: str
    asset_type: str
    owner: str
    provided_by: Optional[str] = None
    provisioned_by: Optional[str] = None
    state: Optional[str] = None
    span: Optional[Span] = None


@dataclass(frozen=True)
class AgentDecl:
    id: str
    owner: str
    acts_for: Optional[str] = None
    management: bool = False
    span: Optional[Span] = None


@dataclass(frozen=True)
class ControlDecl:
    id: str
    kind: str
    domain: str
    central_store: Optional[str] = None
    span: Optional[Span] = None


@dataclass(frozen=True)
class StoreDecl:
    id: str
    domain: str
    span: Optional[Span] = None


@dataclass(frozen=True)
class PolicyDecl:
    id: str
    establisher: str
    scope: str
    rules: Tuple[Rule, ...] = ()
    delivery: bool = False
    published_by: Tuple[str, ...] = ()
    published_to: Optional[str] = None
    equivalent_to: Tuple[str, ...] = ()
    span: Optional[Span] = None
    rule_spans: Tuple[Optional[Span], ...] = ()


Declaration = Union[ModelDecl, RoleDecl, DomainDecl, EntityDecl, AssetDecl,
                    AgentDecl, ControlDecl, StoreDecl, PolicyDecl]
