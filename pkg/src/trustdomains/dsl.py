"""Parser and canonical serializer for the ``.tdm`` trust-domain format.

Grammar (line oriented, ``#`` starts a comment, ``;`` or a newline
separates rules inside a policy body)::

    model ID [central-store ID]
    role ID
    domain ID
    entity ID : (Person|Organization|System|Process|Resource|Agent)
                [in D1,D2,...] [role R1,R2,...]
    asset ID : (Data|Resource|Service) owner ROLE [provided-by ASSET]
               [provisioned-by AGENT state LABEL]
    agent ID owner ROLE [for ROLE] [kind management]
    store ID in DOMAIN
    control ID : (pep|pdp|audit|management) in DOMAIN [central-store ID]
    policy ID by ROLE scope DOMAIN [delivery] {
        flow A -> B | flow A <-> B
        (permit|deny|oblige) SUBJECT on KIND target ASSET
                             [when FLAG] [enables STATE]
    } [published-by AGENT[,AGENT...] to STORE] [equivalent-to P1,P2,...]

Identifiers are case-sensitive dotted names and may contain ``-``;
``*`` is the wildcard subject or target.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .core import (ASSET_TYPES, ENTITY_TYPES, ActionRule, AgentDecl, AgentKind, AssetDecl,
                   ControlDecl, Declaration, Direction, DomainDecl, Effect, EntityDecl,
                   FlowRule, ModelDecl, PolicyDecl, RoleDecl, Span, StoreDecl,
                   TrustDomainModel, build_model)
from .core.build import CONTROL_KEYWORD_OF, CONTROL_KEYWORDS
from .errors import ModelBuildError

ERROR = "error"
WARNING = "warning"

KEYWORDS = ("model", "role", "domain", "entity", "asset", "agent", "store", "control", "policy")


@dataclass(frozen=True, order=True)
class Diagnostic:
    span: Span
    severity: str
    message: str

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.col}: {self.severity}: {self.message}"


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # WORD, NEWLINE, EOF or the punctuation itself
    text: str
    line: int
    col: int

    @property
    def end_col(self) -> int:
        if self.kind in ("NEWLINE", "EOF"):
            return self.col
        return self.col + len(self.text)


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<punct><->|->|[{}:;,])
  | (?P<word>[A-Za-z0-9_*](?:[A-Za-z0-9_.]|-(?!>))*)
""", re.VERBOSE)


def _tokenize(text: str, diags: List[Diagnostic]) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            diags.append(Diagnostic(Span(line, col, line, col + 1), ERROR,
                                    f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(Token("NEWLINE", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "punct":
            tokens.append(Token(m.group(), m.group(), line, col))
        elif kind == "word":
            tokens.append(Token("WORD", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _SyntaxError(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(message)
        self.message = message
        self.token = token


class _Parser:
    def __init__(self, tokens: List[Token], diags: List[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diags = diags

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_word(self, text: str) -> bool:
        return self.tok.kind == "WORD" and self.tok.text == text

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        if self.tok.kind != kind:
            raise _SyntaxError(f"expected {what or kind}, found {self._describe(self.tok)}",
                               self.tok)
        return self.advance()

    def expect_word(self, text: str) -> Token:
        if not self.at_word(text):
            raise _SyntaxError(f"expected '{text}', found {self._describe(self.tok)}", self.tok)
        return self.advance()

    def ident(self, what: str = "identifier") -> str:
        return self.expect("WORD", what).text

    def ident_list(self, what: str) -> Tuple[str, ...]:
        items = [self.ident(what)]
        while self.tok.kind == ",":
            self.advance()
            items.append(self.ident(what))
        return tuple(items)

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.kind == "EOF":
            return "end of input"
        if tok.kind == "NEWLINE":
            return "end of line"
        return repr(tok.text)

    def span_from(self, start: Token) -> Span:
        last = self.tokens[self.pos - 1] if self.pos > 0 else start
        return Span(start.line, start.col, last.line, last.end_col)

    def error(self, message: str, tok: Token):
        self.diags.append(Diagnostic(Span(tok.line, tok.col, tok.line, tok.end_col),
                                     ERROR, message))

    def warn(self, message: str, span: Span):
        self.diags.append(Diagnostic(span, WARNING, message))

    # -- driver ---------------------------------------------------------------

    def parse(self) -> List[Declaration]:
        decls: List[Declaration] = []
        while self.tok.kind != "EOF":
            if self.tok.kind == "NEWLINE":
                self.advance()
                continue
            try:
                decls.append(self.statement())
                if self.tok.kind not in ("NEWLINE", "EOF"):
                    raise _SyntaxError(
                        f"unexpected {self._describe(self.tok)} after declaration", self.tok)
            except _SyntaxError as exc:
                self.error(exc.message, exc.token)
                self.recover()
        return decls

    def recover(self):
        depth = 0
        while self.tok.kind != "EOF":
            kind = self.tok.kind
            if kind == "NEWLINE" and depth == 0:
                return
            if kind == "{":
                depth += 1
            elif kind == "}" and depth > 0:
                depth -= 1
            self.advance()

    def statement(self) -> Declaration:
        tok = self.tok
        if tok.kind != "WORD" or tok.text not in KEYWORDS:
            raise _SyntaxError(f"unknown declaration {self._describe(tok)}; expected one of "
                               + ", ".join(KEYWORDS), tok)
        return getattr(self, f"decl_{tok.text}")()

    # -- declarations -----------------------------------------------------------

    def decl_model(self):
        start = self.advance()
        name = self.ident("model name")
        central = None
        if self.at_word("central-store"):
            self.advance()
            central = self.ident("central store id")
        return ModelDecl(name, central, self.span_from(start))

    def decl_role(self):
        start = self.advance()
        return RoleDecl(self.ident("role id"), self.span_from(start))

    def decl_domain(self):
        start = self.advance()
        return DomainDecl(self.ident("domain id"), self.span_from(start))

    def _typed(self, legal, what):
        self.expect(":", "':'")
        tok = self.expect("WORD", f"{what} type")
        if tok.text not in legal:
            raise _SyntaxError(f"unknown {what} type {tok.text!r}; expected one of "
                               + ", ".join(legal), tok)
        return tok.text

    def decl_entity(self):
        start = self.advance()
        entity_id = self.ident("entity id")
        entity_type = self._typed(ENTITY_TYPES, "entity")
        domains: Tuple[str, ...] = ()
        roles: Tuple[str, ...] = ()
        seen = set()
        while self.tok.kind == "WORD" and self.tok.text in ("in", "role") and self.tok.text not in seen:
            word = self.advance().text
            seen.add(word)
            if word == "in":
                domains = self.ident_list("domain id")
            else:
                roles = self.ident_list("role id")
        return EntityDecl(entity_id, entity_type, domains, roles, self.span_from(start))

    def decl_asset(self):
        start = self.advance()
        asset_id = self.ident("asset id")
        asset_type = self._typed(ASSET_TYPES, "asset")
        self.expect_word("owner")
        owner = self.ident("role id")
        provided_by = provisioned_by = state = None
        if self.at_word("provided-by"):
            self.advance()
            provided_by = self.ident("asset id")
        if self.at_word("provisioned-by"):
            self.advance()
            provisioned_by = self.ident("agent id")
            self.expect_word("state")
            state = self.ident("state label")
        return AssetDecl(asset_id, asset_type, owner, provided_by, provisioned_by, state,
                         self.span_from(start))

    def decl_agent(self):
        start = self.advance()
        agent_id = self.ident("agent id")
        self.expect_word("owner")
        owner = self.ident("role id")
        acts_for = None
        management = False
        if self.at_word("for"):
            self.advance()
            acts_for = self.ident("role id")
        if self.at_word("kind"):
            self.advance()
            tok = self.expect("WORD", "agent kind")
            if tok.text != "management":
                raise _SyntaxError(f"unknown agent kind {tok.text!r}; expected 'management'", tok)
            management = True
        return AgentDecl(agent_id, owner, acts_for, management, self.span_from(start))

    def decl_store(self):
        start = self.advance()
        store_id = self.ident("store id")
        self.expect_word("in")
        return StoreDecl(store_id, self.ident("domain id"), self.span_from(start))

    def decl_control(self):
        start = self.advance()
        control_id = self.ident("control id")
        kind = self._typed(tuple(CONTROL_KEYWORDS), "control")
        self.expect_word("in")
        domain = self.ident("domain id")
        central = None
        if self.at_word("central-store"):
            self.advance()
            central = self.ident("central store id")
        return ControlDecl(control_id, kind, domain, central, self.span_from(start))

    def decl_policy(self):
        start = self.advance()
        policy_id = self.ident("policy id")
        self.expect_word("by")
        establisher = self.ident("role id")
        self.expect_word("scope")
        scope = self.ident("domain id")
        delivery = False
        if self.at_word("delivery"):
            self.advance()
            delivery = True
        open_brace = self.expect("{", "'{'")
        rules, rule_spans = [], []
        while True:
            kind = self.tok.kind
            if kind in ("NEWLINE", ";"):
                self.advance()
                continue
            if kind == "}":
                self.advance()
                break
            if kind == "EOF":
                raise _SyntaxError("unterminated policy body (missing '}')", open_brace)
            rule_start = self.tok
            try:
                rules.append(self.rule())
                rule_spans.append(self.span_from(rule_start))
                if self.tok.kind not in ("NEWLINE", ";", "}"):
                    raise _SyntaxError(f"unexpected {self._describe(self.tok)} after rule",
                                       self.tok)
            except _SyntaxError as exc:
                self.error(exc.message, exc.token)
                while self.tok.kind not in ("NEWLINE", ";", "}", "EOF"):
                    self.advance()

        published_by: Tuple[str, ...] = ()
        published_to = None
        equivalent: Tuple[str, ...] = ()
        seen = set()
        while self.tok.kind == "WORD" and self.tok.text in ("published-by", "equivalent-to") \
                and self.tok.text not in seen:
            word = self.advance().text
            seen.add(word)
            if word == "published-by":
                published_by = self.ident_list("agent id")
                self.expect_word("to")
                published_to = self.ident("store id")
            else:
                equivalent = self.ident_list("policy id")
        span = self.span_from(start)
        if not rules:
            self.warn(f"policy {policy_id!r} has no rules", span)
        return PolicyDecl(policy_id, establisher, scope, tuple(rules), delivery, published_by,
                          published_to, equivalent, span, tuple(rule_spans))

    def rule(self):
        tok = self.expect("WORD", "rule")
        if tok.text == "flow":
            source = self.ident("asset id")
            if self.tok.kind not in ("->", "<->"):
                raise _SyntaxError(f"expected '->' or '<->', found {self._describe(self.tok)}",
                                   self.tok)
            arrow = self.advance().kind
            dest = self.ident("asset id")
            return FlowRule(source, dest, Direction.BI if arrow == "<->" else Direction.UNI)
        if tok.text in ("permit", "deny", "oblige"):
            subject = self.ident("rule subject")
            self.expect_word("on")
            action_kind = self.ident("action kind")
            self.expect_word("target")
            target = self.ident("target asset")
            guard = enables = None
            if self.at_word("when"):
                self.advance()
                guard = self.ident("guard flag")
            if self.at_word("enables"):
                self.advance()
                enables = self.ident("state label")
            return ActionRule(Effect(tok.text), subject, action_kind, target, guard, enables)
        raise _SyntaxError(f"unknown rule {tok.text!r}; expected flow, permit, deny or oblige",
                           tok)


def _structural_diagnostics(errors, text: str) -> List[Diagnostic]:
    out = []
    for err in errors:
        spans = [s for s in err.spans if s is not None]
        span = spans[-1] if spans else Span(1, 1, 1, 1)
        out.append(Diagnostic(span, ERROR, err.message))
    return out


def parse(text: str) -> Tuple[List[Declaration], List[Diagnostic]]:
    """Parse ``.tdm`` text.

    Returns the declarations and every diagnostic: syntax errors first, and,
    when the text is syntactically clean, the structural errors the model
    builder would raise.  Never raises on bad input.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    text = text.replace("\r\n", "\n")
    diags: List[Diagnostic] = []
    tokens = _tokenize(text, diags)
    parser = _Parser(tokens, diags)
    decls = parser.parse()
    if not any(d.severity == ERROR for d in diags):
        try:
            build_model(decls)
        except ModelBuildError as exc:
            diags.extend(_structural_diagnostics(exc.errors, text))
    return decls, sorted(diags)


def diagnostics(text: str) -> List[Diagnostic]:
    return parse(text)[1]


def has_errors(diags) -> bool:
    return any(d.severity == ERROR for d in diags)


def load_model(text: str) -> TrustDomainModel:
    """Parse and build in one step; raises :class:`DslError` on any error."""
    decls, diags = parse(text)
    if has_errors(diags):
        raise DslError(diags)
    return build_model(decls)


class DslError(ValueError):
    def __init__(self, diags):
        self.diagnostics = [d for d in diags if d.severity == ERROR]
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------

def _format_rule(rule) -> str:
    if isinstance(rule, FlowRule):
        arrow = "<->" if rule.direction == Direction.BI else "->"
        return f"flow {rule.source_asset_id} {arrow} {rule.dest_asset_id}"
    line = f"{rule.effect.value} {rule.subject} on {rule.action_kind} target {rule.target_asset_id}"
    if rule.guard:
        line += f" when {rule.guard}"
    if rule.enables_state:
        line += f" enables {rule.enables_state}"
    return line


def serialize(model: TrustDomainModel) -> str:
    """Canonical text: header, then declarations grouped by kind, sorted by id."""
    header = f"model {model.name}"
    if model.central_audit_store_id:
        header += f" central-store {model.central_audit_store_id}"
    groups: List[List[str]] = []

    groups.append([f"role {r}" for r in sorted(model.roles)])
    groups.append([f"domain {d}" for d in sorted(model.domains)])

    lines = []
    for e in sorted(model.entities.values(), key=lambda e: e.id):
        line = f"entity {e.id} : {e.entity_type.value}"
        if e.memberships:
            line += " in " + ",".join(sorted(e.memberships))
        if e.role_ids:
            line += " role " + ",".join(sorted(e.role_ids))
        lines.append(line)
    groups.append(lines)

    lines = []
    for a in sorted(model.agents.values(), key=lambda a: a.id):
        line = f"agent {a.id} owner {a.owner_role_id} for {a.acts_on_behalf_of}"
        if a.kind == AgentKind.MANAGEMENT:
            line += " kind management"
        lines.append(line)
    groups.append(lines)

    lines = []
    for a in sorted(model.assets.values(), key=lambda a: a.id):
        line = f"asset {a.id} : {a.asset_type.value} owner {a.owner_role_id}"
        if a.provided_by:
            line += f" provided-by {a.provided_by}"
        if a.provisioned_by:
            line += f" provisioned-by {a.provisioned_by} state {a.state}"
        lines.append(line)
    groups.append(lines)

    lines = []
    for c in sorted(model.controls.values(), key=lambda c: c.id):
        line = f"control {c.id} : {CONTROL_KEYWORD_OF[c.kind]} in {c.domain_id}"
        if c.central_store_id:
            line += f" central-store {c.central_store_id}"
        lines.append(line)
    groups.append(lines)

    groups.append([f"store {s.id} in {s.domain_id}"
                   for s in sorted(model.policy_stores.values(), key=lambda s: s.id)])

    lines = []
    for p in sorted(model.policies.values(), key=lambda p: p.id):
        head = f"policy {p.id} by {p.establisher_role_id} scope {p.scope_domain_id}"
        if p.is_delivery_policy:
            head += " delivery"
        tail = "}"
        if p.published_by:
            tail += f" published-by {','.join(p.published_by)} to {p.published_to}"
        if p.equivalent_to:
            tail += " equivalent-to " + ",".join(sorted(p.equivalent_to))
        body = [f"  {_format_rule(r)}" for r in p.rules]
        lines.append("\n".join([head + " {", *body, tail]))
    groups.append(lines)

    blocks = [header] + ["\n".join(g) for g in groups if g]
    return "\n\n".join(blocks) + "\n"
