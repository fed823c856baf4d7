"""Command-line front end.

Exit codes: 0 success with no findings, 1 findings (violations, an
unreachable pair, a broken chain), 2 usage or parse errors.  ``--format
structured`` prints one JSON object per line instead of text.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

from .audit import load as load_store
from .audit import verify_bytes, verify_chain
from .axioms import validate
from .core import build_model
from .dsl import has_errors, parse, serialize
from .errors import AuditFormatError, TrustDomainError, UnknownNode
from .flow import (build_flow_graph, check_flow_log, derive_trust_domains, parse_flow_log,
                   reachable, to_dot)
from .simulation import parse_requests, simulate

OK, FINDINGS, USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input discovered after argument parsing; maps to exit code 2."""


@dataclass
class CliConfig:
    command: str
    input_path: Optional[str]
    output_format: str
    args: argparse.Namespace


class _Out:
    def __init__(self, fmt: str, stream: TextIO):
        self.structured = fmt == "structured"
        self.stream = stream

    def text(self, line: str) -> None:
        if not self.structured:
            print(line, file=self.stream)

    def record(self, rec: dict) -> None:
        if self.structured:
            print(json.dumps(rec, sort_keys=True, ensure_ascii=False), file=self.stream)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load(path: str):
    decls, diags = parse(_read_text(path))
    if has_errors(diags):
        raise UsageError("\n".join(f"{path}:{d}" for d in diags if d.severity == "error"))
    return build_model(decls)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_validate(cfg: CliConfig, out: _Out) -> int:
    report = validate(_load(cfg.input_path))
    for rec in report.records():
        out.record(dict(rec, type="violation"))
    out.record({"type": "summary", "model": report.model_name,
                "violations": len(report.violations), "checked": list(report.checked_axioms),
                "unchecked": list(report.unchecked_axioms)})
    out.text(report.to_text())
    return FINDINGS if report.violations else OK


def _cmd_domains(cfg: CliConfig, out: _Out) -> int:
    model = _load(cfg.input_path)
    domains = derive_trust_domains(model)
    if cfg.args.dot:
        out.stream.write(to_dot(build_flow_graph(model), domains))
        return OK
    for d in domains:
        out.record({"type": "domain", "name": d.name, "direction": d.direction_profile,
                    "entities": sorted(d.member_entity_ids), "stores": sorted(d.member_store_ids),
                    "policies": sorted(d.generating_policy_ids)})
        out.text(f"{d.name}  [{d.direction_profile}]  stores: {', '.join(sorted(d.member_store_ids))}"
                 f"  policies: {', '.join(sorted(d.generating_policy_ids))}")
    return OK


def _cmd_reach(cfg: CliConfig, out: _Out) -> int:
    graph = build_flow_graph(_load(cfg.input_path))
    src, dst = cfg.args.src, cfg.args.dst
    try:
        path = reachable(graph, src, dst)
    except UnknownNode as exc:
        raise UsageError(str(exc)) from None
    out.record({"type": "reach", "source": src, "dest": dst, "path": path,
                "hops": len(path) - 1 if path else None})
    if path is None:
        out.text(f"{src} -> {dst}: unreachable")
        return FINDINGS
    out.text(f"{' -> '.join(path)}  ({len(path) - 1} hops)")
    return OK


def _cmd_checkflow(cfg: CliConfig, out: _Out) -> int:
    model = _load(cfg.input_path)
    try:
        events = parse_flow_log(_read_text(cfg.args.log))
    except ValueError as exc:
        raise UsageError(f"{cfg.args.log}: {exc}") from None
    violations = check_flow_log(model, events)
    for v in violations:
        out.record(dict(v.record(), type="flow-violation"))
        out.text(f"seq {v.event.timestamp}: {v.reason}")
    out.record({"type": "summary", "events": len(events), "violations": len(violations)})
    out.text(f"{len(events)} flows checked, {len(violations)} violations")
    return FINDINGS if violations else OK


def _cmd_simulate(cfg: CliConfig, out: _Out) -> int:
    model = _load(cfg.input_path)
    try:
        requests = parse_requests(_read_text(cfg.args.requests))
    except ValueError as exc:
        raise UsageError(f"{cfg.args.requests}: {exc}") from None
    for flag in ("pdp", "pep", "audit_agent"):
        wanted = getattr(cfg.args, flag)
        if wanted is not None and wanted not in model.controls:
            raise UsageError(f"unknown control {wanted!r} for --{flag.replace('_', '-')}")
    try:
        result = simulate(model, requests, pdp_id=cfg.args.pdp, pep_id=cfg.args.pep,
                          audit_agent_id=cfg.args.audit_agent)
    except TrustDomainError as exc:
        raise UsageError(str(exc)) from None
    for outcome in result.outcomes:
        out.record(dict(outcome.record(), type="outcome"))
        out.text(outcome.to_text())
    report = validate(result.model, result.log, result.store)
    for rec in report.records():
        out.record(dict(rec, type="violation"))
    if report.violations:
        out.text(report.to_text())
    if cfg.args.audit_out and result.store is not None:
        result.store.save(cfg.args.audit_out)
    errors = sum(1 for o in result.outcomes if o.error is not None)
    events = len(result.store) if result.store is not None else 0
    out.record({"type": "summary", "requests": len(result.outcomes), "errors": errors,
                "events": events, "violations": len(report.violations)})
    out.text(f"{len(result.outcomes)} requests, {errors} errors, {events} audit events, "
             f"{len(report.violations)} violations")
    return FINDINGS if errors or report.violations else OK


def _cmd_audit_verify(cfg: CliConfig, out: _Out) -> int:
    try:
        data = Path(cfg.input_path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {cfg.input_path}: {exc}") from None
    ok, bad = verify_bytes(data)
    count = None
    if ok:
        try:
            store = load_store(cfg.input_path)
        except AuditFormatError as exc:
            raise UsageError(str(exc)) from None
        ok, bad = verify_chain(store)
        count = len(store)
    out.record({"type": "audit", "ok": ok, "first_bad_index": bad, "events": count})
    if ok:
        out.text(f"ok: {count} events verify")
    else:
        out.text(f"tampered: first bad event index {bad}")
    return OK if ok else FINDINGS


def _cmd_fmt(cfg: CliConfig, out: _Out) -> int:
    out.stream.write(serialize(_load(cfg.input_path)))
    return OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text",
                        help="output format (default: text)")

    parser = argparse.ArgumentParser(prog="trustdomains",
                                     description="Trust-domain models: validation, flows, "
                                                 "decisions and audit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", parents=[common], help="check a model against the axioms")
    p.add_argument("model")
    p.set_defaults(run=_cmd_validate)

    p = sub.add_parser("domains", parents=[common], help="list the derived trust domains")
    p.add_argument("model")
    p.add_argument("--dot", action="store_true", help="print the flow graph as DOT")
    p.set_defaults(run=_cmd_domains)

    p = sub.add_parser("reach", parents=[common], help="shortest flow path between two stores")
    p.add_argument("model")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(run=_cmd_reach)

    p = sub.add_parser("checkflow", parents=[common], help="check observed flows against agreements")
    p.add_argument("model")
    p.add_argument("log")
    p.set_defaults(run=_cmd_checkflow)

    p = sub.add_parser("simulate", parents=[common], help="run a request script")
    p.add_argument("model")
    p.add_argument("requests")
    p.add_argument("--audit-out", metavar="PATH", help="write the central audit store here")
    p.add_argument("--pdp", help="decision point control (default: first by id)")
    p.add_argument("--pep", help="enforcement point control (default: first by id)")
    p.add_argument("--audit-agent", help="audit agent control (default: first with a store)")
    p.set_defaults(run=_cmd_simulate)

    p = sub.add_parser("audit", help="audit store tools")
    audit_sub = p.add_subparsers(dest="audit_command", required=True, metavar="ACTION")
    v = audit_sub.add_parser("verify", parents=[common], help="verify a persisted store")
    v.add_argument("store")
    v.set_defaults(run=_cmd_audit_verify)

    p = sub.add_parser("fmt", parents=[common], help="print the canonical form of a model")
    p.add_argument("model")
    p.set_defaults(run=_cmd_fmt)
    return parser


def _config(args: argparse.Namespace) -> CliConfig:
    path = getattr(args, "model", None) or getattr(args, "store", None)
    return CliConfig(args.command, path, args.format, args)


def run(argv: Optional[Sequence[str]] = None, stdout: TextIO = None,
        stderr: TextIO = None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    cfg = _config(args)
    try:
        return args.run(cfg, _Out(cfg.output_format, stdout))
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return USAGE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))
