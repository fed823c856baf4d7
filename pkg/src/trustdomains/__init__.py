"""Trust-domain modelling: typed models, a text format, axiom checks,
flow analysis, policy decisions and a hash-chained audit store."""

from __future__ import annotations

from .audit import CentralAuditStore, verify_bytes, verify_chain
from .axioms import AXIOMS, ValidationReport, validate
from .core import TrustDomainModel, build_model
from .decisions import DecisionLog, Request, deliver, enforce, evaluate
from .dsl import load_model, parse, serialize
from .flow import build_flow_graph, check_flow_log, derive_trust_domains, reachable
from .simulation import parse_requests, simulate

__version__ = "0.1.0"

__all__ = [
    "AXIOMS", "CentralAuditStore", "DecisionLog", "Request", "TrustDomainModel",
    "ValidationReport", "build_flow_graph", "build_model", "check_flow_log", "deliver",
    "derive_trust_domains", "enforce", "evaluate", "load_model", "parse", "parse_requests",
    "reachable", "serialize", "simulate", "validate", "verify_bytes", "verify_chain",
]
