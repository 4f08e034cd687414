"""Certificate status determination: CRL lookup and the online status
protocol (signed, nonce-bound query/reply over ``POST /status``).

The online reply embeds the query byte-exactly and is signed by the
responder key, so a status verdict always carries independently
re-verifiable evidence (the CRL or the raw signed reply).
"""

from __future__ import annotations

import datetime
import enum
import secrets
import urllib.error
import urllib.request
from dataclasses import dataclass

from . import crypto
from .certs import (
    Certificate,
    Crl,
    Name,
    ReasonCode,
    name_value,
)
from .der import (
    BitString,
    DecodeError,
    GeneralizedTime,
    Integer,
    OctetString,
    Oid,
    Sequence,
    Utf8String,
    decode_exact,
    encode,
)

STATUS_CONTENT_TYPE = "application/savacert-status"

CAUSE_STALE_CRL = "stale-crl"
CAUSE_CRL_NOT_YET_VALID = "crl-not-yet-valid"
CAUSE_FUTURE_REVOCATION = "revocation-date-in-future"
CAUSE_UNKNOWN_ISSUER = "unknown-issuer"
CAUSE_NO_CRL = "no-crl"


class StatusError(Exception):
    pass


class IssuerMismatch(StatusError):
    pass


class Transport(StatusError):
    pass


class BadResponderSignature(StatusError):
    pass


class NonceMismatch(StatusError):
    pass


class StatusValue(enum.IntEnum):
    GOOD = 0
    REVOKED = 1
    UNDETERMINED = 2


@dataclass(frozen=True)
class CertStatus:
    value: StatusValue
    source: str  # "crl" | "online"
    evidence: object  # Crl for CRL checks, raw signed reply bytes online
    revocation_date: datetime.datetime | None = None
    reason: ReasonCode | None = None
    cause: str | None = None

    @property
    def is_good(self) -> bool:
        return self.value is StatusValue.GOOD


def _status_against_crl(crl: Crl, serial: int,
                        at: datetime.datetime) -> tuple:
    """(value, date, reason, cause) shared by CRL checks and the responder."""
    entry = crl.entry_for(serial)
    if entry is not None and entry.revocation_date <= at:
        return StatusValue.REVOKED, entry.revocation_date, entry.reason, None
    if at > crl.next_update:
        return StatusValue.UNDETERMINED, None, None, CAUSE_STALE_CRL
    if at < crl.this_update:
        return StatusValue.UNDETERMINED, None, None, CAUSE_CRL_NOT_YET_VALID
    if entry is not None:
        return StatusValue.UNDETERMINED, None, None, CAUSE_FUTURE_REVOCATION
    return StatusValue.GOOD, None, None, None


def check_crl(cert: Certificate, crl: Crl,
              at: datetime.datetime) -> CertStatus:
    """Status of ``cert`` per a CRL whose signature the caller has already
    verified against the issuing CA key."""
    if crl.issuer != cert.issuer:
        raise IssuerMismatch(f"CRL issuer {crl.issuer} is not {cert.issuer}")
    value, date, reason, cause = _status_against_crl(crl, cert.serial, at)
    return CertStatus(value, "crl", crl, date, reason, cause)


# ---------------------------------------------------------------------------
# online status protocol

def issuer_digest(issuer: Name) -> bytes:
    return crypto.digest(crypto.SHA256, encode(name_value(issuer)))


def build_status_query(issuer: Name, serial: int,
                       nonce: int | None = None) -> tuple[bytes, int]:
    if nonce is None:
        nonce = secrets.randbits(64)
    query = Sequence([OctetString(issuer_digest(issuer)), Integer(serial),
                      Integer(nonce)])
    return encode(query), nonce


def parse_status_query(data: bytes) -> tuple[bytes, int, int]:
    value = decode_exact(data)
    if not (isinstance(value, Sequence) and len(value.elements) == 3
            and isinstance(value.elements[0], OctetString)
            and isinstance(value.elements[1], Integer)
            and isinstance(value.elements[2], Integer)):
        raise DecodeError("bad status query shape")
    return (value.elements[0].value, value.elements[1].value,
            value.elements[2].value)


def _status_body(status: CertStatus) -> Sequence:
    elements = [Integer(int(status.value))]
    if status.value is StatusValue.REVOKED:
        elements.append(GeneralizedTime(status.revocation_date))
        elements.append(Integer(int(status.reason)))
    elif status.value is StatusValue.UNDETERMINED and status.cause:
        elements.append(Utf8String(status.cause))
    return Sequence(elements)


def _parse_status_body(value) -> tuple:
    if not (isinstance(value, Sequence) and value.elements
            and isinstance(value.elements[0], Integer)):
        raise DecodeError("bad status body")
    code = value.elements[0].value
    rest = value.elements[1:]
    if code == StatusValue.REVOKED:
        if not (len(rest) == 2 and isinstance(rest[0], GeneralizedTime)
                and isinstance(rest[1], Integer)):
            raise DecodeError("revoked status needs date and reason")
        return (StatusValue.REVOKED, rest[0].value,
                ReasonCode(rest[1].value), None)
    if code == StatusValue.UNDETERMINED:
        if len(rest) > 1 or (rest and not isinstance(rest[0], Utf8String)):
            raise DecodeError("bad undetermined status")
        return (StatusValue.UNDETERMINED, None, None,
                rest[0].value if rest else None)
    if code == StatusValue.GOOD and not rest:
        return (StatusValue.GOOD, None, None, None)
    raise DecodeError(f"bad status code {code}")


def build_status_reply(query_der: bytes, status: CertStatus,
                       produced_at: datetime.datetime,
                       responder_key: crypto.KeyPair) -> bytes:
    """Signed reply echoing the query byte-exactly."""
    query_value = decode_exact(query_der)
    signed_part = [query_value, _status_body(status),
                   GeneralizedTime(produced_at), responder_key.algorithm.oid]
    signature = crypto.sign(responder_key, encode(Sequence(signed_part)))
    return encode(Sequence(signed_part + [BitString(signature, 0)]))


def verify_status_reply(reply_der: bytes, query_der: bytes,
                        responder_cert: Certificate) -> CertStatus:
    """Check signature, echo and nonce; map the reply onto a CertStatus
    carrying the raw reply as evidence."""
    value = decode_exact(reply_der)
    if not (isinstance(value, Sequence) and len(value.elements) == 5
            and isinstance(value.elements[3], Oid)
            and isinstance(value.elements[4], BitString)):
        raise DecodeError("bad status reply shape")
    signed_part = Sequence(value.elements[:4])
    alg = crypto.signature_algorithm(value.elements[3])
    if not crypto.verify(responder_cert.public_key, alg,
                         encode(signed_part), value.elements[4].value):
        raise BadResponderSignature("status reply signature does not verify")
    echoed = encode(value.elements[0])
    if echoed != query_der:
        _, _, sent_nonce = parse_status_query(query_der)
        try:
            _, _, got_nonce = parse_status_query(echoed)
        except DecodeError:
            got_nonce = None
        if got_nonce != sent_nonce:
            raise NonceMismatch(f"responder echoed nonce {got_nonce}, "
                                f"sent {sent_nonce}")
        raise StatusError("status reply query echo mismatch")
    status_value, date, reason, cause = _parse_status_body(value.elements[1])
    return CertStatus(status_value, "online", reply_der, date, reason, cause)


def check_online(cert: Certificate, responder_url: str,
                 responder_cert: Certificate,
                 nonce: int | None = None, timeout: float = 10.0) -> CertStatus:
    """Ask the online responder for the certificate's status."""
    query_der, _ = build_status_query(cert.issuer, cert.serial, nonce)
    request = urllib.request.Request(
        responder_url, data=query_der, method="POST",
        headers={"Content-Type": STATUS_CONTENT_TYPE})
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            body = response.read()
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise Transport(f"status query to {responder_url} failed: {exc}") from exc
    try:
        return verify_status_reply(body, query_der, responder_cert)
    except DecodeError as exc:
        raise Transport(f"unparseable status reply: {exc}") from exc


def responder_status(crls_for_digest, digest: bytes, serial: int,
                     at: datetime.datetime) -> CertStatus:
    """Status as served by the built-in responder, which mirrors a CRL
    directory; ``crls_for_digest`` maps an issuer-name digest to its CRLs."""
    crls = crls_for_digest(digest)
    if not crls:
        return CertStatus(StatusValue.UNDETERMINED, "online", None,
                          cause=CAUSE_UNKNOWN_ISSUER)
    value, date, reason, cause = _status_against_crl(crls[0], serial, at)
    return CertStatus(value, "online", None, date, reason, cause)
