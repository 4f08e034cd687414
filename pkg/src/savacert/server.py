"""Certificate validation server: request admission, per-target
orchestration of discovery/validation, DVC signing, the built-in status
responder, and the HTTP front end.

Protocol-level failures travel as signed error notices in HTTP 200 bodies
so clients can authenticate them; only transport-level problems use HTTP
error codes.  Targets within one request are processed sequentially in
request order; distinct requests are served concurrently.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import crypto, oids, protocol, revocation
from .certs import Certificate, Name, StructureMismatch, parse_certificate
from .config import ConfigError, parse_bool, parse_sections, split_list
from .der import DerError, Oid, parse_time
from .pathbuild import NoPathFound, UnorderableSet, supplied_chain
from .policytree import CprRequirement, UnknownUsage, resolve_weak
from .protocol import (
    DvcInfo,
    ErrorCode,
    ErrorNotice,
    TargetResult,
    ValidationRequest,
    WantBack,
)
from .revocation import STATUS_CONTENT_TYPE, issuer_digest
from .storage import Clock, Repository
from .validation import RevocationConfig, Verdict, validate_target

log = logging.getLogger("savacert.server")

_WANT_BACK_NAMES = {
    "chain": WantBack.CHAIN,
    "crls": WantBack.CRLS,
    "onlineReplies": WantBack.ONLINE_REPLIES,
    "validationTime": WantBack.VALIDATION_TIME,
}

_KNOWN_REQUEST_EXTENSIONS = frozenset({
    oids.REQ_INTENDED_USAGE, oids.REQ_SUPPLIED_CHAINS,
    oids.REQ_WANT_BACKS, oids.REQ_TIME_OVERRIDE,
})


@dataclass(frozen=True)
class ValidationPolicy:
    """Named server-side constraint bundle selected by requestPolicy OID."""

    oid: Oid
    label: str
    anchor_labels: tuple[str, ...] = ("*",)  # "*" = every manifest anchor
    revocation: str = "crl"
    max_chain_length: int = 8
    clock_skew: int = 300
    require_signed_requests: bool = False
    allow_supplied_chains: bool = True
    default_want_backs: frozenset = frozenset()
    usage_table: dict = field(default_factory=dict)
    is_default: bool = False


@dataclass
class ServerConfig:
    name: Name
    key_path: Path
    cert_path: Path
    repository: Path
    serial_state: Path
    listen: tuple[str, int] = ("127.0.0.1", 0)
    clock: Clock = field(default_factory=Clock)
    status_responder: bool = True
    responder_url: str | None = None
    responder_cert_path: Path | None = None
    policies: dict = field(default_factory=dict)  # Oid -> ValidationPolicy

    @property
    def default_policy(self) -> ValidationPolicy:
        for policy in self.policies.values():
            if policy.is_default:
                return policy
        raise ConfigError("no default validation policy")


def _parse_policy(section) -> ValidationPolicy:
    label = section.arg or "default"
    oid_text = section.get("oid")
    if not oid_text:
        raise ConfigError(f"policy {label}: missing oid")
    usage_table = {}
    for key, value in section.pairs():
        if key.startswith("usage "):
            usage = key[len("usage "):].strip()
            policies = tuple(Oid(p) for p in split_list(value))
            if not usage or not policies:
                raise ConfigError(
                    f"policy {label}: usage entries need a name and a "
                    f"non-empty policy set")
            usage_table[usage] = policies
    want = frozenset(
        _WANT_BACK_NAMES[w] for w in split_list(section.get("want_backs", ""))
        if w in _WANT_BACK_NAMES)
    unknown_wants = [w for w in split_list(section.get("want_backs", ""))
                     if w not in _WANT_BACK_NAMES]
    if unknown_wants:
        raise ConfigError(f"policy {label}: unknown want-back "
                          f"{unknown_wants[0]!r}")
    revocation_mode = section.get("revocation", "crl")
    if revocation_mode not in ("crl", "online", "crl-then-online", "none"):
        raise ConfigError(f"policy {label}: bad revocation {revocation_mode!r}")
    return ValidationPolicy(
        oid=Oid(oid_text), label=label,
        anchor_labels=tuple(split_list(section.get("anchors", "*"))) or ("*",),
        revocation=revocation_mode,
        max_chain_length=int(section.get("max_chain_length", "8")),
        clock_skew=int(section.get("clock_skew", "300")),
        require_signed_requests=parse_bool(
            section.get("require_signed_requests", "false"),
            where=f"policy {label}"),
        allow_supplied_chains=parse_bool(
            section.get("allow_supplied_chains", "true"),
            where=f"policy {label}"),
        default_want_backs=want,
        usage_table=usage_table,
        is_default=parse_bool(section.get("default", "false"),
                              where=f"policy {label}"),
    )


def parse_server_config(text: str, base_dir: "Path | str" = ".") -> ServerConfig:
    base = Path(base_dir)
    sections = parse_sections(text)
    server_section = None
    policies: dict = {}
    for section in sections:
        if section.name == "server":
            server_section = section
        elif section.name == "policy":
            policy = _parse_policy(section)
            if policy.oid in policies:
                raise ConfigError(f"duplicate policy oid {policy.oid}")
            policies[policy.oid] = policy
        else:
            raise ConfigError(f"unknown section [{section.name}]")
    if server_section is None:
        raise ConfigError("missing [server] section")
    if not policies:
        raise ConfigError("at least one [policy] section is required")
    defaults = [p for p in policies.values() if p.is_default]
    if len(defaults) != 1:
        raise ConfigError("exactly one policy must set default = true")

    name_text = server_section.get("name")
    if not name_text:
        raise ConfigError("[server] needs a name")
    listen = server_section.get("listen", "127.0.0.1:0")
    host, _, port = listen.rpartition(":")
    clock_text = server_section.get("clock", "system")
    if clock_text == "system":
        clock = Clock()
    elif clock_text.startswith("fixed"):
        clock = Clock(fixed=parse_time(clock_text.split(None, 1)[1].strip()))
    else:
        raise ConfigError(f"bad clock {clock_text!r}")

    def _path(key: str, default: str | None = None) -> Path | None:
        value = server_section.get(key, default)
        return (base / value) if value is not None else None

    key_path = _path("key")
    cert_path = _path("certificate")
    repository = _path("repository")
    if key_path is None or cert_path is None or repository is None:
        raise ConfigError("[server] needs key, certificate and repository")
    responder_cert = _path("responder_certificate")
    return ServerConfig(
        name=Name.from_string(name_text),
        key_path=key_path, cert_path=cert_path, repository=repository,
        serial_state=_path("serial_state", "serial.state"),
        listen=(host or "127.0.0.1", int(port)),
        clock=clock,
        status_responder=parse_bool(
            server_section.get("status_responder", "true"), where="[server]"),
        responder_url=server_section.get("responder_url"),
        responder_cert_path=responder_cert,
        policies=policies,
    )


def load_server_config(path: "Path | str") -> ServerConfig:
    path = Path(path)
    return parse_server_config(path.read_text(), path.parent)


class _Snapshot:
    """One immutable view of the repository with derived indexes."""

    def __init__(self, repository: Repository):
        self.repository = repository
        self.anchors_by_label = {e.label: e for e in repository.anchors}
        self.crls_by_digest = {
            issuer_digest(name): repository.crls_for(name)
            for name in repository.crls_by_issuer
        }

    def policy_anchors(self, policy: ValidationPolicy,
                       usage: str | None = None) -> frozenset:
        if policy.anchor_labels == ("*",):
            entries = list(self.repository.anchors)
        else:
            entries = []
            for label in policy.anchor_labels:
                entry = self.anchors_by_label.get(label)
                if entry is None:
                    raise ConfigError(f"policy {policy.label}: anchor "
                                      f"{label!r} not in manifest")
                entries.append(entry)
        if usage is not None:
            entries = [e for e in entries if e.trusted_for(usage)]
        return frozenset(e.fingerprint for e in entries)


class _SerialCounter:
    """Monotone response serial with a persisted high-water mark."""

    def __init__(self, state_path: Path):
        self._path = state_path
        self._lock = threading.Lock()
        self._value = 0
        if state_path.exists():
            text = state_path.read_text().strip()
            self._value = int(text) if text else 0
        else:
            state_path.parent.mkdir(parents=True, exist_ok=True)

    def next(self) -> int:
        with self._lock:
            self._value += 1
            self._path.write_text(f"{self._value}\n")
            return self._value


class AdmissionFailure(Exception):
    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class CvsServer:
    """Protocol logic, independent of the HTTP listener."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.key = crypto.decode_key(config.key_path.read_bytes())
        self.certificate = parse_certificate(config.cert_path.read_bytes())
        self.responder_cert = (
            parse_certificate(config.responder_cert_path.read_bytes())
            if config.responder_cert_path is not None else self.certificate)
        self.serials = _SerialCounter(config.serial_state)
        self._snapshot = _Snapshot(Repository.load(config.repository))
        for policy in config.policies.values():
            if not self._snapshot.policy_anchors(policy):
                raise ConfigError(f"policy {policy.label}: empty anchor set")
            if policy.revocation in ("online", "crl-then-online") \
                    and not config.responder_url:
                raise ConfigError(f"policy {policy.label}: {policy.revocation}"
                                  f" revocation needs a responder_url")

    # -- repository ---------------------------------------------------------

    @property
    def snapshot(self) -> _Snapshot:
        return self._snapshot

    def reload_repository(self) -> None:
        # requests hold a reference to one snapshot; swapping is atomic
        self._snapshot = _Snapshot(Repository.load(self.config.repository))

    # -- admission ----------------------------------------------------------

    def _select_policy(self, request: ValidationRequest) -> ValidationPolicy:
        wanted = request.info.request_policy
        if wanted is None:
            return self.config.default_policy
        policy = self.config.policies.get(wanted)
        if policy is None:
            raise AdmissionFailure(ErrorCode.UNKNOWN_REQUEST_POLICY,
                                   f"no validation policy {wanted}")
        return policy

    def admit(self, request: ValidationRequest, now) -> ValidationPolicy:
        """Request-validity checks; raises AdmissionFailure with the error
        code reported to the client."""
        try:
            policy = self._select_policy(request)
            skew_policy = policy
        except AdmissionFailure:
            policy = None
            skew_policy = self.config.default_policy

        drift = abs((request.info.request_time - now).total_seconds())
        if drift > skew_policy.clock_skew:
            raise AdmissionFailure(
                ErrorCode.BAD_TIME,
                f"requestTime is {drift:.0f}s from server time "
                f"(allowed {skew_policy.clock_skew}s)")
        if request.info.dvcs_name is not None \
                and request.info.dvcs_name != self.config.name:
            raise AdmissionFailure(
                ErrorCode.WRONG_SERVER,
                f"request addressed to {request.info.dvcs_name}")
        if request.info.service != protocol.SERVICE_VPKC:
            raise AdmissionFailure(
                ErrorCode.UNSUPPORTED_SERVICE,
                f"service {request.info.service} not offered")
        if request.info.version != protocol.PROTOCOL_VERSION:
            raise AdmissionFailure(ErrorCode.MALFORMED_REQUEST,
                                   f"protocol version {request.info.version}")
        if policy is None:
            self._select_policy(request)  # re-raise unknownRequestPolicy
        for ext in request.info.extensions:
            if ext.critical and ext.oid not in _KNOWN_REQUEST_EXTENSIONS:
                raise AdmissionFailure(
                    ErrorCode.MALFORMED_REQUEST,
                    f"unknown critical request extension {ext.oid}")
        if request.info.intended_usage() is not None \
                and request.acceptable_set:
            raise AdmissionFailure(
                ErrorCode.MALFORMED_REQUEST,
                "weak and strict certificate-policy requirements are "
                "mutually exclusive")
        if policy.require_signed_requests:
            if request.signature is None:
                raise AdmissionFailure(ErrorCode.MALFORMED_REQUEST,
                                       "policy requires signed requests")
            if not protocol.verify_request_signature(request):
                raise AdmissionFailure(ErrorCode.MALFORMED_REQUEST,
                                       "request signature does not verify")
            if request.info.requester is not None and \
                    request.info.requester != request.signature.signer.subject:
                raise AdmissionFailure(ErrorCode.MALFORMED_REQUEST,
                                       "requester name does not match signer")
        return policy

    # -- validation ---------------------------------------------------------

    def _revocation_config(self, policy: ValidationPolicy) -> RevocationConfig:
        return RevocationConfig(
            regime=policy.revocation,
            responder_url=self.config.responder_url,
            responder_cert=self.responder_cert)

    def _evidence(self, verdict: Verdict, want) -> protocol.EvidenceOut | None:
        if not want:
            return None
        chain = None
        if WantBack.CHAIN in want and verdict.chain is not None:
            chain = (verdict.chain.anchor,) + verdict.chain.certs
        crls = tuple(verdict.crls) if WantBack.CRLS in want else None
        replies = (tuple(verdict.online_replies)
                   if WantBack.ONLINE_REPLIES in want else None)
        at = (verdict.validated_at
              if WantBack.VALIDATION_TIME in want else None)
        if chain is None and crls is None and replies is None and at is None:
            return None
        return protocol.EvidenceOut(chain, crls, replies, at)

    def handle(self, request: ValidationRequest, policy: ValidationPolicy,
               now) -> DvcInfo:
        """Validate every target sequentially, in request order."""
        snapshot = self._snapshot
        at = request.info.time_override() or now
        usage = request.info.intended_usage()
        if usage is not None:
            acceptable = resolve_weak(usage, policy.usage_table)
            cpr = CprRequirement.strict(acceptable,
                                        request.explicit_policy_required,
                                        request.inhibit_policy_mapping)
            anchors = snapshot.policy_anchors(policy, usage)
            if not anchors:
                raise UnknownUsage(usage)
        else:
            cpr = CprRequirement.strict(request.acceptable_set,
                                        request.explicit_policy_required,
                                        request.inhibit_policy_mapping)
            anchors = snapshot.policy_anchors(policy)

        extras = request.info.supplied_chains()
        targets = [t if isinstance(t, Certificate) else parse_certificate(t)
                   for t in request.targets]
        graph = snapshot.repository.graph(anchors).with_extra(
            list(targets) + list(extras))
        revocation_config = self._revocation_config(policy)
        want = request.info.want_backs()
        if want is None:
            want = policy.default_want_backs

        results = []
        for target in targets:
            candidates = None
            if extras and policy.allow_supplied_chains:
                try:
                    candidates = [supplied_chain(graph, extras, target,
                                                 policy.max_chain_length)]
                except (UnorderableSet, NoPathFound):
                    candidates = None  # fall back to discovery
            verdict = validate_target(
                graph, target, at, cpr, revocation_config,
                snapshot.repository.crls_for, policy.max_chain_length,
                candidates)
            results.append(TargetResult(
                target_fingerprint=protocol.target_fingerprint(target),
                status=verdict.status,
                authorized_set=verdict.authorized_set,
                mappings_applied=verdict.mappings_applied,
                reason=verdict.reason,
                failing_index=verdict.failing_index,
                unknown_cause=verdict.unknown_cause,
                evidence=self._evidence(verdict, want)))
        return DvcInfo(serial_number=self.serials.next(), produced_at=now,
                       echo=request.info, results=tuple(results))

    # -- whole transactions -------------------------------------------------

    def _notice(self, code: ErrorCode, message: str, echo) -> bytes:
        notice = ErrorNotice(code, message, echo)
        return protocol.sign_error_notice(notice, self.certificate, self.key)

    def handle_dvcs_bytes(self, body: bytes) -> bytes:
        """One full transaction; always returns a response body."""
        started = time.monotonic()
        now = self.config.clock.now()
        echo = None
        try:
            request = protocol.parse_request(body)
        except (DerError, StructureMismatch, protocol.ProtocolError,
                ValueError, OverflowError) as exc:
            log.info("dvcs malformed request: %s", exc)
            return self._notice(ErrorCode.MALFORMED_REQUEST,
                                f"unparseable request: {exc}", None)
        echo = request.info
        try:
            policy = self.admit(request, now)
            info = self.handle(request, policy, now)
        except AdmissionFailure as exc:
            log.info("dvcs rejected nonce=%d code=%s: %s",
                     request.info.nonce, exc.code.name, exc.message)
            return self._notice(exc.code, exc.message, echo)
        except UnknownUsage as exc:
            log.info("dvcs rejected nonce=%d code=UNKNOWN_USAGE",
                     request.info.nonce)
            return self._notice(ErrorCode.UNKNOWN_USAGE, str(exc), echo)
        except Exception:  # never hang or leak a stack to the peer
            log.exception("dvcs internal error nonce=%d", request.info.nonce)
            return self._notice(ErrorCode.INTERNAL_ERROR,
                                "internal server error", echo)
        verdicts = ",".join(r.status.value for r in info.results)
        log.info("dvcs nonce=%d policy=%s targets=%d verdicts=%s serial=%d "
                 "duration_ms=%.1f", request.info.nonce, policy.label,
                 len(info.results), verdicts, info.serial_number,
                 (time.monotonic() - started) * 1000)
        return protocol.sign_dvc(info, self.certificate, self.key)

    def handle_status_bytes(self, body: bytes) -> bytes:
        now = self.config.clock.now()
        snapshot = self._snapshot
        digest, serial, _nonce = revocation.parse_status_query(body)
        status = revocation.responder_status(
            lambda d: snapshot.crls_by_digest.get(d, []), digest, serial, now)
        return revocation.build_status_reply(body, status, now, self.key)


# ---------------------------------------------------------------------------
# HTTP front end

class _Handler(BaseHTTPRequestHandler):
    server_version = "savacert-cvs/0.1"
    protocol_version = "HTTP/1.1"

    def _send(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):  # noqa: N802  (http.server API)
        if self.path == "/health":
            self._send(200, "text/plain", b"ok\n")
        else:
            self._send(404, "text/plain", b"not found\n")

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length)
        core: CvsServer = self.server.core  # type: ignore[attr-defined]
        if self.path == "/dvcs":
            self._send(200, protocol.DVCS_CONTENT_TYPE,
                       core.handle_dvcs_bytes(body))
        elif self.path == "/status" and core.config.status_responder:
            try:
                reply = core.handle_status_bytes(body)
            except (DerError, StructureMismatch) as exc:
                self._send(400, "text/plain", f"bad query: {exc}\n".encode())
                return
            self._send(200, STATUS_CONTENT_TYPE, reply)
        else:
            self._send(404, "text/plain", b"not found\n")

    def log_message(self, format, *args):  # route to logging, not stderr
        log.debug("http %s " + format, self.address_string(), *args)


class CvsHttpServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, core: CvsServer):
        super().__init__(core.config.listen, _Handler)
        self.core = core

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def serve(config: ServerConfig) -> int:
    core = CvsServer(config)
    httpd = CvsHttpServer(core)
    log.info("listening on %s repository=%s policies=%d", httpd.url,
             config.repository, len(config.policies))

    def _stop(signum, frame):
        log.info("signal %d: shutting down", signum)
        threading.Thread(target=httpd.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
    return 0


def main(argv: "list[str] | None" = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cvs-server", description="certificate validation server")
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--listen", help="host:port override")
    parser.add_argument("--clock-fixed", metavar="TIME",
                        help="freeze the server clock (YYYYMMDDHHMMSSZ)")
    parser.add_argument("--repository", type=Path, help="repository override")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config = load_server_config(args.config)
        if args.listen:
            host, _, port = args.listen.rpartition(":")
            config.listen = (host or "127.0.0.1", int(port))
        if args.clock_fixed:
            config.clock = Clock(fixed=parse_time(args.clock_fixed))
        if args.repository:
            config.repository = args.repository
        return serve(config)
    except (ConfigError, OSError, DerError, StructureMismatch,
            crypto.CryptoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
