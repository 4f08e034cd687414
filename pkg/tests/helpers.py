"""Shared test utilities: lightweight certificate fabrication, the
brute-force simple-path enumerator used as the discovery oracle, and a
random DER value generator for round-trip properties."""

import datetime
import random

from savacert import der, oids
from savacert.certs import (
    Certificate,
    Extensions,
    Name,
    fingerprint,
    make_extensions,
)

_EPOCH = datetime.datetime(2025, 1, 1, tzinfo=datetime.timezone.utc)
_LATER = datetime.datetime(2035, 1, 1, tzinfo=datetime.timezone.utc)


def label_name(label: str) -> Name:
    return Name(((oids.AT_COMMON_NAME, label),))


def fabricate_cert(subject: str, issuer: str, *, serial: int = 1,
                   rng: "random.Random | None" = None,
                   extensions: Extensions | None = None,
                   public_key: bytes | None = None) -> Certificate:
    """Structurally valid certificate with a dummy signature; good enough
    for anything that does not verify signatures (discovery, policy walks)."""
    rng = rng or random.Random(hash((subject, issuer, serial)) & 0xFFFF)
    return Certificate(
        version=3, serial=serial, signature_alg=oids.ALG_ED25519,
        issuer=label_name(issuer), not_before=_EPOCH, not_after=_LATER,
        subject=label_name(subject), public_key_alg=oids.ALG_ED25519,
        public_key=public_key or rng.randbytes(32),
        extensions=extensions if extensions is not None else make_extensions(),
        signature=rng.randbytes(64))


def all_simple_paths(certificates, anchors, target, max_length):
    """Brute-force enumeration of loop-free anchor-to-target chains; returns
    a set of (anchor fingerprint, tuple of member fingerprints)."""
    target_fp = fingerprint(target)
    anchor_fps = {fingerprint(a) for a in anchors}
    by_fp = {fingerprint(c): c for c in certificates}
    found = set()

    def extend(path_fps):
        head = by_fp[path_fps[0]]
        for anchor in anchors:
            if anchor.subject == head.issuer:
                found.add((fingerprint(anchor), tuple(path_fps)))
        if len(path_fps) >= max_length:
            return
        for fp, cert in by_fp.items():
            if fp in anchor_fps or fp in path_fps:
                continue
            if cert.subject == head.issuer:
                extend((fp,) + path_fps)

    if target_fp in by_fp:
        extend((target_fp,))
    return found


_PRINTABLE_POOL = ("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
                   "0123456789 '()+,-./:=?")
_UTF8_POOL = _PRINTABLE_POOL + "äöüßéèñ€漢字🙂\n\t"


def _random_time(rng: random.Random) -> datetime.datetime:
    return datetime.datetime(
        rng.randint(1, 9999), rng.randint(1, 12), rng.randint(1, 28),
        rng.randint(0, 23), rng.randint(0, 59), rng.randint(0, 59),
        tzinfo=datetime.timezone.utc)


def _random_oid(rng: random.Random) -> der.Oid:
    first = rng.randint(0, 2)
    second = rng.randint(0, 39) if first < 2 else rng.randint(0, 999)
    tail = [rng.choice((rng.randint(0, 127), rng.randint(0, 2 ** 32)))
            for _ in range(rng.randint(0, 4))]
    return der.Oid((first, second, *tail))


def _random_bitstring(rng: random.Random) -> der.BitString:
    body = bytearray(rng.randbytes(rng.randint(0, 6)))
    unused = rng.randint(0, 7) if body else 0
    if body and unused:
        body[-1] &= (0xFF << unused) & 0xFF
    return der.BitString(bytes(body), unused)


def random_der_value(rng: random.Random, depth: int = 0) -> der.DerValue:
    """Random valid DerValue with nesting depth <= 6; Sets are generated in
    canonical element order so decode(encode(v)) == v holds."""
    leaves = ("bool", "int", "octets", "bits", "oid", "utf8", "printable",
              "time", "null")
    kinds = leaves if depth >= 6 else leaves + ("seq", "set", "ctx", "ctxi")
    kind = rng.choice(kinds)
    if kind == "bool":
        return der.Boolean(rng.random() < 0.5)
    if kind == "int":
        magnitude = rng.choice((1 << 7, 1 << 16, 1 << 63, 1 << 130))
        return der.Integer(rng.randint(-magnitude, magnitude))
    if kind == "octets":
        return der.OctetString(rng.randbytes(rng.randint(0, 12)))
    if kind == "bits":
        return _random_bitstring(rng)
    if kind == "oid":
        return _random_oid(rng)
    if kind == "utf8":
        return der.Utf8String("".join(
            rng.choice(_UTF8_POOL) for _ in range(rng.randint(0, 10))))
    if kind == "printable":
        return der.PrintableString("".join(
            rng.choice(_PRINTABLE_POOL) for _ in range(rng.randint(0, 10))))
    if kind == "time":
        return der.GeneralizedTime(_random_time(rng))
    if kind == "null":
        return der.Null()
    if kind == "seq":
        return der.Sequence([random_der_value(rng, depth + 1)
                             for _ in range(rng.randint(0, 4))])
    if kind == "set":
        children = [random_der_value(rng, depth + 1)
                    for _ in range(rng.randint(0, 4))]
        children.sort(key=der.encode)
        return der.Set(children)
    if kind == "ctx":
        return der.ContextTagged(rng.randint(0, 30),
                                 random_der_value(rng, depth + 1))
    return der.ContextTagged(rng.randint(0, 30),
                             der.OctetString(rng.randbytes(rng.randint(0, 8))),
                             explicit=False)


def random_cert_graph(rng: random.Random, max_nodes: int = 12,
                      edge_probability: float = 0.3):
    """Random certificate graph of at most max_nodes certificates (one per
    issuer/subject entity pair, self-issued pairs included), with random
    anchors and a random target."""
    entity_count = rng.randint(2, 6)
    labels = [f"n{i}" for i in range(entity_count)]
    pairs = [(i, s) for i in labels for s in labels]
    rng.shuffle(pairs)
    certificates = []
    serial = 0
    for issuer, subject in pairs:
        if len(certificates) >= max_nodes:
            break
        if rng.random() < edge_probability:
            serial += 1
            certificates.append(fabricate_cert(subject, issuer,
                                               serial=serial, rng=rng))
    if not certificates:
        certificates.append(fabricate_cert(labels[0], labels[0],
                                           serial=1, rng=rng))
    anchor_count = rng.randint(1, min(3, len(certificates)))
    anchors = rng.sample(certificates, anchor_count)
    target = rng.choice(certificates)
    return certificates, anchors, target
