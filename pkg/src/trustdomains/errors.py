"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple


class TrustDomainError(Exception):
    """Base class for all toolkit errors."""


# -- core model -------------------------------------------------------------

@dataclass(frozen=True)
class StructuralError:
    """One structural problem found while assembling a model.

    ``kind`` is one of ``DuplicateIdentifier``, ``DanglingReference`` or
    ``TypeMismatch``.  ``spans`` holds the source spans of the declarations
    involved, when the declarations came from text.
    """

    kind: str
    message: str
    element_ids: Tuple[str, ...] = ()
    spans: Tuple[object, ...] = field(default=(), compare=False)

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ModelBuildError(TrustDomainError):
    """Raised by ``build_model`` with every structural error it found."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(str(e) for e in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} structural error(s): {lines}{more}")


class UnknownElement(TrustDomainError, KeyError):
    def __init__(self, what: str, element_id: Optional[str]):
        self.element_id = element_id
        super().__init__(f"unknown {what}: {element_id!r}")

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return self.args[0]


class UnknownPolicy(UnknownElement):
    def __init__(self, element_id):
        super().__init__("policy", element_id)


class UnknownDomain(UnknownElement):
    def __init__(self, element_id):
        super().__init__("domain", element_id)


class NotManagementAgent(TrustDomainError):
    pass


class NotAResource(TrustDomainError):
    pass


class AlreadyProvisioned(TrustDomainError):
    pass


class NotProvisioned(TrustDomainError):
    pass


# -- flow -------------------------------------------------------------------

class UnknownNode(UnknownElement):
    def __init__(self, element_id):
        super().__init__("flow graph node", element_id)


# -- decisions --------------------------------------------------------------

class MalformedMessage(TrustDomainError):
    pass


class DeliveryRefused(TrustDomainError):
    def __init__(self, message: str, policy_id: str):
        self.policy_id = policy_id
        super().__init__(message)


class UnknownPdp(UnknownElement):
    def __init__(self, element_id):
        super().__init__("policy decision point", element_id)


class UnknownPep(UnknownElement):
    def __init__(self, element_id):
        super().__init__("policy enforcement point", element_id)


class UnprovisionedResource(TrustDomainError):
    pass


class StaleDecision(TrustDomainError):
    pass


class UnknownDecision(UnknownElement):
    def __init__(self, element_id):
        super().__init__("decision", element_id)


# -- audit ------------------------------------------------------------------

class UnknownControl(UnknownElement):
    def __init__(self, element_id):
        super().__init__("control", element_id)


class UnknownAgent(UnknownElement):
    def __init__(self, element_id):
        super().__init__("audit agent", element_id)


class NoCentralStore(TrustDomainError):
    pass


class AuditFormatError(TrustDomainError):
    pass


# -- axioms -----------------------------------------------------------------

class UnknownAxiom(UnknownElement):
    def __init__(self, element_id):
        super().__init__("axiom", element_id)
