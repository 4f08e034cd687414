"""Certificate and CRL model with strict DER (de)serialization.

Parsing is canonical: a parsed object re-encodes to the exact input bytes
(checked at parse time), unknown extensions are preserved opaquely, and an
unknown *critical* extension marks the certificate so validation can reject
it.  Name comparison folds ASCII case and trims whitespace.
"""

from __future__ import annotations

import dataclasses
import datetime
import enum
from dataclasses import dataclass

from . import crypto, oids
from .der import (
    BitString,
    Boolean,
    ContextTagged,
    DerValue,
    GeneralizedTime,
    Integer,
    InvalidValue,
    OctetString,
    Oid,
    Sequence,
    Set,
    Utf8String,
    decode_exact,
    encode,
)


class StructureMismatch(Exception):
    """Input is well-formed DER but does not have the expected shape."""


class UnsupportedVersion(StructureMismatch):
    pass


def _fold(value: str) -> str:
    out = value.strip()
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in out)


@dataclass(frozen=True, eq=False)
class Name:
    """Ordered attribute list; equality is case/whitespace-insensitive."""

    attributes: tuple[tuple[Oid, str], ...]

    def folded(self) -> tuple[tuple[Oid, str], ...]:
        return tuple((oid, _fold(v)) for oid, v in self.attributes)

    def __eq__(self, other) -> bool:
        return isinstance(other, Name) and self.folded() == other.folded()

    def __hash__(self) -> int:
        return hash(self.folded())

    def has_prefix(self, prefix: "Name") -> bool:
        mine = self.folded()
        theirs = prefix.folded()
        return len(theirs) <= len(mine) and mine[:len(theirs)] == theirs

    @classmethod
    def from_string(cls, text: str) -> "Name":
        """Parse ``C=IT, O=Some Org, CN=thing`` (values may not contain commas)."""
        attrs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            label, _, value = part.partition("=")
            oid = oids.ATTRIBUTE_BY_LABEL.get(label.strip().upper())
            if oid is None or not _:
                raise ValueError(f"bad name component {part!r}")
            attrs.append((oid, value.strip()))
        if not attrs:
            raise ValueError(f"empty name {text!r}")
        return cls(tuple(attrs))

    def __str__(self) -> str:
        return ", ".join(
            f"{oids.ATTRIBUTE_LABELS.get(oid, oid.dotted())}={v}"
            for oid, v in self.attributes)


class KeyUsage(enum.IntEnum):
    # bit positions in the keyUsage BIT STRING
    DIGITAL_SIGNATURE = 0
    KEY_CERT_SIGN = 5
    CRL_SIGN = 6


class ReasonCode(enum.IntEnum):
    UNSPECIFIED = 0
    KEY_COMPROMISE = 1
    CA_COMPROMISE = 2
    SUPERSEDED = 4


@dataclass(frozen=True)
class BasicConstraints:
    is_ca: bool
    path_len: int | None = None


@dataclass(frozen=True)
class PolicyInfo:
    oid: Oid
    qualifier: bytes | None = None  # opaque, never interpreted


@dataclass(frozen=True)
class PolicyMapping:
    issuer_domain: Oid
    subject_domain: Oid


@dataclass(frozen=True)
class PolicyConstraints:
    require_explicit_policy: int | None = None
    inhibit_policy_mapping: int | None = None


@dataclass(frozen=True)
class NameConstraints:
    permitted: tuple[Name, ...] = ()
    excluded: tuple[Name, ...] = ()


@dataclass(frozen=True)
class Extension:
    oid: Oid
    critical: bool
    value: object  # structured value for known extensions, bytes otherwise


@dataclass(frozen=True)
class Extensions:
    entries: tuple[Extension, ...] = ()

    def _get(self, oid: Oid):
        for entry in self.entries:
            if entry.oid == oid:
                return entry.value
        return None

    @property
    def basic_constraints(self) -> BasicConstraints | None:
        return self._get(oids.EXT_BASIC_CONSTRAINTS)

    @property
    def key_usage(self) -> frozenset | None:
        return self._get(oids.EXT_KEY_USAGE)

    @property
    def certificate_policies(self) -> tuple[PolicyInfo, ...] | None:
        return self._get(oids.EXT_CERTIFICATE_POLICIES)

    @property
    def policy_mappings(self) -> tuple[PolicyMapping, ...] | None:
        return self._get(oids.EXT_POLICY_MAPPINGS)

    @property
    def policy_constraints(self) -> PolicyConstraints | None:
        return self._get(oids.EXT_POLICY_CONSTRAINTS)

    @property
    def name_constraints(self) -> NameConstraints | None:
        return self._get(oids.EXT_NAME_CONSTRAINTS)

    @property
    def crl_distribution_point(self) -> str | None:
        return self._get(oids.EXT_CRL_DISTRIBUTION_POINT)

    @property
    def has_unknown_critical(self) -> bool:
        return any(e.critical and isinstance(e.value, bytes)
                   for e in self.entries)


_KNOWN_EXTENSIONS = (
    oids.EXT_BASIC_CONSTRAINTS,
    oids.EXT_KEY_USAGE,
    oids.EXT_CERTIFICATE_POLICIES,
    oids.EXT_POLICY_MAPPINGS,
    oids.EXT_POLICY_CONSTRAINTS,
    oids.EXT_NAME_CONSTRAINTS,
    oids.EXT_CRL_DISTRIBUTION_POINT,
)

# standard criticality used when building certificates
_DEFAULT_CRITICAL = {
    oids.EXT_BASIC_CONSTRAINTS: True,
    oids.EXT_KEY_USAGE: True,
    oids.EXT_CERTIFICATE_POLICIES: False,
    oids.EXT_POLICY_MAPPINGS: False,
    oids.EXT_POLICY_CONSTRAINTS: True,
    oids.EXT_NAME_CONSTRAINTS: True,
    oids.EXT_CRL_DISTRIBUTION_POINT: False,
}


def make_extensions(basic_constraints: BasicConstraints | None = None,
                    key_usage: frozenset | None = None,
                    certificate_policies: tuple[PolicyInfo, ...] | None = None,
                    policy_mappings: tuple[PolicyMapping, ...] | None = None,
                    policy_constraints: PolicyConstraints | None = None,
                    name_constraints: NameConstraints | None = None,
                    crl_distribution_point: str | None = None,
                    extra: tuple[Extension, ...] = ()) -> Extensions:
    """Assemble extensions in canonical order with standard criticality."""
    values = (
        (oids.EXT_BASIC_CONSTRAINTS, basic_constraints),
        (oids.EXT_KEY_USAGE, key_usage),
        (oids.EXT_CERTIFICATE_POLICIES, certificate_policies),
        (oids.EXT_POLICY_MAPPINGS, policy_mappings),
        (oids.EXT_POLICY_CONSTRAINTS, policy_constraints),
        (oids.EXT_NAME_CONSTRAINTS, name_constraints),
        (oids.EXT_CRL_DISTRIBUTION_POINT, crl_distribution_point),
    )
    entries = [Extension(oid, _DEFAULT_CRITICAL[oid], v)
               for oid, v in values if v is not None]
    return Extensions(tuple(entries) + tuple(extra))


@dataclass(frozen=True)
class Certificate:
    version: int
    serial: int
    signature_alg: Oid
    issuer: Name
    not_before: datetime.datetime
    not_after: datetime.datetime
    subject: Name
    public_key_alg: Oid
    public_key: bytes
    extensions: Extensions
    signature: bytes

    @property
    def has_unknown_critical(self) -> bool:
        return self.extensions.has_unknown_critical

    @property
    def is_self_issued(self) -> bool:
        return self.subject == self.issuer


@dataclass(frozen=True)
class RevokedEntry:
    serial: int
    revocation_date: datetime.datetime
    reason: ReasonCode


@dataclass(frozen=True)
class Crl:
    issuer: Name
    this_update: datetime.datetime
    next_update: datetime.datetime
    revoked: tuple[RevokedEntry, ...]
    signature_alg: Oid
    signature: bytes

    def entry_for(self, serial: int) -> RevokedEntry | None:
        for entry in self.revoked:
            if entry.serial == serial:
                return entry
        return None


# ---------------------------------------------------------------------------
# value-level builders (shared with the protocol module)

def name_value(name: Name) -> Sequence:
    if not name.attributes:
        raise InvalidValue("empty Name")
    return Sequence([
        Set([Sequence([oid, Utf8String(v)])]) for oid, v in name.attributes
    ])


def parse_name_value(value: DerValue) -> Name:
    if not isinstance(value, Sequence):
        raise StructureMismatch("Name must be a SEQUENCE of RDNs")
    attrs = []
    for rdn in value.elements:
        if not (isinstance(rdn, Set) and len(rdn.elements) == 1):
            raise StructureMismatch("RDN must be a single-attribute SET")
        attr = rdn.elements[0]
        if not (isinstance(attr, Sequence) and len(attr.elements) == 2
                and isinstance(attr.elements[0], Oid)
                and isinstance(attr.elements[1], Utf8String)):
            raise StructureMismatch("attribute must be SEQUENCE {OID, UTF8String}")
        attrs.append((attr.elements[0], attr.elements[1].value))
    if not attrs:
        raise StructureMismatch("empty Name")
    return Name(tuple(attrs))


def _key_usage_value(usages: frozenset) -> BitString:
    if not usages:
        return BitString(b"", 0)
    top = max(int(u) for u in usages)
    buf = bytearray(top // 8 + 1)
    for u in usages:
        buf[int(u) // 8] |= 0x80 >> (int(u) % 8)
    return BitString(bytes(buf), 8 * len(buf) - top - 1)


def _parse_key_usage(value: DerValue) -> frozenset:
    if not isinstance(value, BitString):
        raise StructureMismatch("keyUsage must be a BIT STRING")
    bits = set()
    total = 8 * len(value.value) - value.unused_bits
    for i in range(total):
        if value.value[i // 8] & (0x80 >> (i % 8)):
            bits.add(i)
    try:
        usages = frozenset(KeyUsage(b) for b in bits)
    except ValueError as exc:
        raise StructureMismatch(f"unknown keyUsage bit: {exc}") from None
    return usages


def _extension_value(ext: Extension) -> DerValue:
    oid, v = ext.oid, ext.value
    if isinstance(v, bytes):  # unknown extension, opaque
        return OctetString(v)
    if oid == oids.EXT_BASIC_CONSTRAINTS:
        inner = [Boolean(v.is_ca)]
        if v.path_len is not None:
            if v.path_len < 0:
                raise InvalidValue("pathLen must be non-negative")
            inner.append(Integer(v.path_len))
        return OctetString(encode(Sequence(inner)))
    if oid == oids.EXT_KEY_USAGE:
        return OctetString(encode(_key_usage_value(v)))
    if oid == oids.EXT_CERTIFICATE_POLICIES:
        items = []
        for info in v:
            elems = [info.oid]
            if info.qualifier is not None:
                elems.append(OctetString(info.qualifier))
            items.append(Sequence(elems))
        return OctetString(encode(Sequence(items)))
    if oid == oids.EXT_POLICY_MAPPINGS:
        for m in v:
            if oids.ANY_POLICY in (m.issuer_domain, m.subject_domain):
                raise InvalidValue("anyPolicy cannot appear in a policy mapping")
        return OctetString(encode(Sequence(
            [Sequence([m.issuer_domain, m.subject_domain]) for m in v])))
    if oid == oids.EXT_POLICY_CONSTRAINTS:
        if v.require_explicit_policy is None and v.inhibit_policy_mapping is None:
            raise InvalidValue("policyConstraints needs at least one field")
        inner = []
        if v.require_explicit_policy is not None:
            if v.require_explicit_policy < 0:
                raise InvalidValue("skip count must be non-negative")
            inner.append(ContextTagged(0, Integer(v.require_explicit_policy)))
        if v.inhibit_policy_mapping is not None:
            if v.inhibit_policy_mapping < 0:
                raise InvalidValue("skip count must be non-negative")
            inner.append(ContextTagged(1, Integer(v.inhibit_policy_mapping)))
        return OctetString(encode(Sequence(inner)))
    if oid == oids.EXT_NAME_CONSTRAINTS:
        if not v.permitted and not v.excluded:
            raise InvalidValue("nameConstraints needs permitted or excluded")
        inner = []
        if v.permitted:
            inner.append(ContextTagged(
                0, Sequence([name_value(n) for n in v.permitted])))
        if v.excluded:
            inner.append(ContextTagged(
                1, Sequence([name_value(n) for n in v.excluded])))
        return OctetString(encode(Sequence(inner)))
    if oid == oids.EXT_CRL_DISTRIBUTION_POINT:
        return OctetString(encode(Utf8String(v)))
    raise InvalidValue(f"no encoder for extension {oid}")


def _parse_extension_body(oid: Oid, body: bytes) -> object:
    value = decode_exact(body)
    if oid == oids.EXT_BASIC_CONSTRAINTS:
        if not (isinstance(value, Sequence) and 1 <= len(value.elements) <= 2
                and isinstance(value.elements[0], Boolean)):
            raise StructureMismatch("bad basicConstraints")
        path_len = None
        if len(value.elements) == 2:
            if not isinstance(value.elements[1], Integer) \
                    or value.elements[1].value < 0:
                raise StructureMismatch("bad pathLen")
            path_len = value.elements[1].value
        return BasicConstraints(value.elements[0].value, path_len)
    if oid == oids.EXT_KEY_USAGE:
        return _parse_key_usage(value)
    if oid == oids.EXT_CERTIFICATE_POLICIES:
        if not isinstance(value, Sequence):
            raise StructureMismatch("bad certificatePolicies")
        infos = []
        for item in value.elements:
            if not (isinstance(item, Sequence) and 1 <= len(item.elements) <= 2
                    and isinstance(item.elements[0], Oid)):
                raise StructureMismatch("bad policy information")
            qualifier = None
            if len(item.elements) == 2:
                if not isinstance(item.elements[1], OctetString):
                    raise StructureMismatch("bad policy qualifier")
                qualifier = item.elements[1].value
            infos.append(PolicyInfo(item.elements[0], qualifier))
        return tuple(infos)
    if oid == oids.EXT_POLICY_MAPPINGS:
        if not isinstance(value, Sequence):
            raise StructureMismatch("bad policyMappings")
        mappings = []
        for item in value.elements:
            if not (isinstance(item, Sequence) and len(item.elements) == 2
                    and isinstance(item.elements[0], Oid)
                    and isinstance(item.elements[1], Oid)):
                raise StructureMismatch("bad policy mapping")
            if oids.ANY_POLICY in item.elements:
                raise StructureMismatch("anyPolicy in a policy mapping")
            mappings.append(PolicyMapping(item.elements[0], item.elements[1]))
        return tuple(mappings)
    if oid == oids.EXT_POLICY_CONSTRAINTS:
        if not isinstance(value, Sequence) or not value.elements:
            raise StructureMismatch("bad policyConstraints")
        rep = ipm = None
        for item in value.elements:
            if not (isinstance(item, ContextTagged) and item.explicit
                    and isinstance(item.inner, Integer)
                    and item.inner.value >= 0):
                raise StructureMismatch("bad policyConstraints field")
            if item.number == 0 and rep is None:
                rep = item.inner.value
            elif item.number == 1 and ipm is None:
                ipm = item.inner.value
            else:
                raise StructureMismatch("bad policyConstraints field")
        return PolicyConstraints(rep, ipm)
    if oid == oids.EXT_NAME_CONSTRAINTS:
        if not isinstance(value, Sequence) or not value.elements:
            raise StructureMismatch("bad nameConstraints")
        permitted: tuple[Name, ...] = ()
        excluded: tuple[Name, ...] = ()
        for item in value.elements:
            if not (isinstance(item, ContextTagged) and item.explicit
                    and isinstance(item.inner, Sequence)):
                raise StructureMismatch("bad nameConstraints field")
            names = tuple(parse_name_value(n) for n in item.inner.elements)
            if item.number == 0 and not permitted:
                permitted = names
            elif item.number == 1 and not excluded:
                excluded = names
            else:
                raise StructureMismatch("bad nameConstraints field")
        return NameConstraints(permitted, excluded)
    if oid == oids.EXT_CRL_DISTRIBUTION_POINT:
        if not isinstance(value, Utf8String):
            raise StructureMismatch("bad crlDistributionPoint")
        return value.value
    raise StructureMismatch(f"no parser for extension {oid}")


def extensions_value(extensions: Extensions) -> Sequence:
    seen = set()
    items = []
    for ext in extensions.entries:
        if ext.oid in seen:
            raise InvalidValue(f"duplicate extension {ext.oid}")
        seen.add(ext.oid)
        items.append(Sequence([ext.oid, Boolean(ext.critical),
                               _extension_value(ext)]))
    return Sequence(items)


def parse_extensions_value(value: DerValue) -> Extensions:
    if not isinstance(value, Sequence) or not value.elements:
        raise StructureMismatch("extensions must be a non-empty SEQUENCE")
    seen = set()
    entries = []
    for item in value.elements:
        if not (isinstance(item, Sequence) and len(item.elements) == 3
                and isinstance(item.elements[0], Oid)
                and isinstance(item.elements[1], Boolean)
                and isinstance(item.elements[2], OctetString)):
            raise StructureMismatch("bad extension entry")
        oid, critical, body = (item.elements[0], item.elements[1].value,
                               item.elements[2].value)
        if oid in seen:
            raise StructureMismatch(f"duplicate extension {oid}")
        seen.add(oid)
        if oid in _KNOWN_EXTENSIONS:
            parsed = _parse_extension_body(oid, body)
        else:
            parsed = body  # unknown: preserved opaquely
        entries.append(Extension(oid, critical, parsed))
    return Extensions(tuple(entries))


# ---------------------------------------------------------------------------
# certificates

def _validity_ok(not_before, not_after) -> None:
    if not_before > not_after:
        raise InvalidValue("notBefore is after notAfter")


def tbs_value(cert: Certificate) -> Sequence:
    _validity_ok(cert.not_before, cert.not_after)
    if cert.serial < 0:
        raise InvalidValue("serial must be non-negative")
    elements = [
        Integer(cert.version),
        Integer(cert.serial),
        cert.signature_alg,
        name_value(cert.issuer),
        Sequence([GeneralizedTime(cert.not_before),
                  GeneralizedTime(cert.not_after)]),
        name_value(cert.subject),
        Sequence([cert.public_key_alg, BitString(cert.public_key, 0)]),
    ]
    if cert.extensions.entries:
        elements.append(ContextTagged(0, extensions_value(cert.extensions)))
    return Sequence(elements)


def encode_tbs(cert: Certificate) -> bytes:
    return encode(tbs_value(cert))


def encode_certificate(cert: Certificate) -> bytes:
    return encode(Sequence([tbs_value(cert), BitString(cert.signature, 0)]))


def _parse_tbs(value: DerValue) -> Certificate:
    if not isinstance(value, Sequence) or len(value.elements) not in (7, 8):
        raise StructureMismatch("bad TBS certificate shape")
    e = value.elements
    if not isinstance(e[0], Integer):
        raise StructureMismatch("version must be an INTEGER")
    if e[0].value != 3:
        raise UnsupportedVersion(f"certificate version {e[0].value}")
    if not isinstance(e[1], Integer) or e[1].value < 0:
        raise StructureMismatch("bad serial")
    if not isinstance(e[2], Oid):
        raise StructureMismatch("bad signature algorithm")
    issuer = parse_name_value(e[3])
    if not (isinstance(e[4], Sequence) and len(e[4].elements) == 2
            and all(isinstance(t, GeneralizedTime) for t in e[4].elements)):
        raise StructureMismatch("bad validity")
    not_before, not_after = (t.value for t in e[4].elements)
    if not_before > not_after:
        raise StructureMismatch("notBefore is after notAfter")
    subject = parse_name_value(e[5])
    if not (isinstance(e[6], Sequence) and len(e[6].elements) == 2
            and isinstance(e[6].elements[0], Oid)
            and isinstance(e[6].elements[1], BitString)
            and e[6].elements[1].unused_bits == 0):
        raise StructureMismatch("bad subjectPublicKeyInfo")
    extensions = Extensions()
    if len(e) == 8:
        if not (isinstance(e[7], ContextTagged) and e[7].explicit
                and e[7].number == 0):
            raise StructureMismatch("bad extensions wrapper")
        extensions = parse_extensions_value(e[7].inner)
    return Certificate(
        version=3, serial=e[1].value, signature_alg=e[2], issuer=issuer,
        not_before=not_before, not_after=not_after, subject=subject,
        public_key_alg=e[6].elements[0], public_key=e[6].elements[1].value,
        extensions=extensions, signature=b"")


def parse_certificate_value(value: DerValue) -> Certificate:
    if not (isinstance(value, Sequence) and len(value.elements) == 2
            and isinstance(value.elements[1], BitString)
            and value.elements[1].unused_bits == 0):
        raise StructureMismatch("bad certificate envelope")
    bare = _parse_tbs(value.elements[0])
    cert = dataclasses.replace(bare, signature=value.elements[1].value)
    if encode(certificate_value(cert)) != encode(value):
        raise StructureMismatch("certificate does not re-encode canonically")
    return cert


def certificate_value(cert: Certificate) -> Sequence:
    return Sequence([tbs_value(cert), BitString(cert.signature, 0)])


def parse_certificate(data: bytes) -> Certificate:
    return parse_certificate_value(decode_exact(data))


def fingerprint(cert: Certificate) -> bytes:
    return crypto.digest(crypto.SHA256, encode_certificate(cert))


def check_signature(cert: Certificate, issuer_public_key: bytes) -> bool:
    """True iff the certificate's signature verifies under the given key."""
    try:
        alg = crypto.signature_algorithm(cert.signature_alg)
    except crypto.UnknownAlgorithm:
        return False
    try:
        return crypto.verify(issuer_public_key, alg, encode_tbs(cert),
                             cert.signature)
    except crypto.MalformedKey:
        return False


def sign_certificate(*, serial: int, issuer: Name, subject: Name,
                     not_before: datetime.datetime,
                     not_after: datetime.datetime,
                     public_key_alg: Oid, public_key: bytes,
                     extensions: Extensions,
                     issuer_key: crypto.KeyPair) -> Certificate:
    cert = Certificate(
        version=3, serial=serial, signature_alg=issuer_key.algorithm.oid,
        issuer=issuer, not_before=not_before, not_after=not_after,
        subject=subject, public_key_alg=public_key_alg, public_key=public_key,
        extensions=extensions, signature=b"")
    signature = crypto.sign(issuer_key, encode_tbs(cert))
    return dataclasses.replace(cert, signature=signature)


# ---------------------------------------------------------------------------
# CRLs

def _crl_tbs_value(crl: Crl) -> Sequence:
    if crl.this_update > crl.next_update:
        raise InvalidValue("thisUpdate is after nextUpdate")
    serials = [e.serial for e in crl.revoked]
    if serials != sorted(set(serials)) or any(s < 0 for s in serials):
        raise InvalidValue("revoked serials must be strictly increasing")
    return Sequence([
        name_value(crl.issuer),
        GeneralizedTime(crl.this_update),
        GeneralizedTime(crl.next_update),
        Sequence([
            Sequence([Integer(e.serial), GeneralizedTime(e.revocation_date),
                      Integer(int(e.reason))])
            for e in crl.revoked
        ]),
        crl.signature_alg,
    ])


def encode_crl_tbs(crl: Crl) -> bytes:
    return encode(_crl_tbs_value(crl))


def crl_value(crl: Crl) -> Sequence:
    return Sequence([_crl_tbs_value(crl), BitString(crl.signature, 0)])


def encode_crl(crl: Crl) -> bytes:
    return encode(crl_value(crl))


def parse_crl_value(value: DerValue) -> Crl:
    if not (isinstance(value, Sequence) and len(value.elements) == 2
            and isinstance(value.elements[1], BitString)
            and value.elements[1].unused_bits == 0):
        raise StructureMismatch("bad CRL envelope")
    tbs = value.elements[0]
    if not (isinstance(tbs, Sequence) and len(tbs.elements) == 5
            and isinstance(tbs.elements[1], GeneralizedTime)
            and isinstance(tbs.elements[2], GeneralizedTime)
            and isinstance(tbs.elements[3], Sequence)
            and isinstance(tbs.elements[4], Oid)):
        raise StructureMismatch("bad CRL TBS shape")
    issuer = parse_name_value(tbs.elements[0])
    this_update, next_update = (t.value for t in tbs.elements[1:3])
    if this_update > next_update:
        raise StructureMismatch("thisUpdate is after nextUpdate")
    entries = []
    for item in tbs.elements[3].elements:
        if not (isinstance(item, Sequence) and len(item.elements) == 3
                and isinstance(item.elements[0], Integer)
                and isinstance(item.elements[1], GeneralizedTime)
                and isinstance(item.elements[2], Integer)):
            raise StructureMismatch("bad revoked entry")
        try:
            reason = ReasonCode(item.elements[2].value)
        except ValueError:
            raise StructureMismatch(
                f"unknown reason code {item.elements[2].value}") from None
        entries.append(RevokedEntry(item.elements[0].value,
                                    item.elements[1].value, reason))
    serials = [e.serial for e in entries]
    if serials != sorted(set(serials)) or any(s < 0 for s in serials):
        raise StructureMismatch("revoked serials must be strictly increasing")
    crl = Crl(issuer, this_update, next_update, tuple(entries),
              tbs.elements[4], value.elements[1].value)
    if encode(crl_value(crl)) != encode(value):
        raise StructureMismatch("CRL does not re-encode canonically")
    return crl


def parse_crl(data: bytes) -> Crl:
    return parse_crl_value(decode_exact(data))


def check_crl_signature(crl: Crl, issuer_public_key: bytes) -> bool:
    try:
        alg = crypto.signature_algorithm(crl.signature_alg)
        return crypto.verify(issuer_public_key, alg, encode_crl_tbs(crl),
                             crl.signature)
    except (crypto.UnknownAlgorithm, crypto.MalformedKey):
        return False


def sign_crl(*, issuer: Name, this_update: datetime.datetime,
             next_update: datetime.datetime,
             revoked: tuple[RevokedEntry, ...],
             issuer_key: crypto.KeyPair) -> Crl:
    crl = Crl(issuer, this_update, next_update, tuple(revoked),
              issuer_key.algorithm.oid, b"")
    signature = crypto.sign(issuer_key, encode_crl_tbs(crl))
    return dataclasses.replace(crl, signature=signature)
