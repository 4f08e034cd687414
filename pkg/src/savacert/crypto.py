"""Signature and digest primitives behind an OID-keyed registry.

One deterministic signature scheme (Ed25519) and one digest (SHA-256) are
registered; everything above this module speaks OIDs only, so further
algorithms can be added without touching callers.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from . import oids
from .der import Oid, OctetString, Sequence, decode_exact, encode


class CryptoError(Exception):
    pass


class UnknownAlgorithm(CryptoError):
    def __init__(self, oid: Oid):
        super().__init__(f"no registered algorithm {oid}")
        self.oid = oid


class MalformedKey(CryptoError):
    pass


@dataclass(frozen=True)
class AlgorithmId:
    oid: Oid
    name: str


@dataclass(frozen=True)
class KeyPair:
    algorithm: AlgorithmId
    public_key: bytes
    private_key: bytes


ED25519 = AlgorithmId(oids.ALG_ED25519, "ed25519")
SHA256 = AlgorithmId(oids.ALG_SHA256, "sha-256")

_SIGNATURE_ALGORITHMS = {ED25519.oid: ED25519}
_DIGEST_ALGORITHMS = {SHA256.oid: SHA256}


def signature_algorithm(oid: Oid) -> AlgorithmId:
    try:
        return _SIGNATURE_ALGORITHMS[oid]
    except KeyError:
        raise UnknownAlgorithm(oid) from None


def digest_algorithm(oid: Oid) -> AlgorithmId:
    try:
        return _DIGEST_ALGORITHMS[oid]
    except KeyError:
        raise UnknownAlgorithm(oid) from None


def generate(algorithm: AlgorithmId, seed: bytes | None = None) -> KeyPair:
    """Generate a key pair; a seed of any length makes it deterministic."""
    signature_algorithm(algorithm.oid)
    raw = hashlib.sha256(seed).digest() if seed is not None else os.urandom(32)
    private = Ed25519PrivateKey.from_private_bytes(raw)
    public = private.public_key().public_bytes_raw()
    return KeyPair(algorithm, public, raw)


def sign(key: KeyPair, message: bytes) -> bytes:
    signature_algorithm(key.algorithm.oid)
    try:
        private = Ed25519PrivateKey.from_private_bytes(key.private_key)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    return private.sign(message)


def verify(public_key: bytes, algorithm: AlgorithmId, message: bytes,
           signature: bytes) -> bool:
    signature_algorithm(algorithm.oid)
    try:
        key = Ed25519PublicKey.from_public_bytes(public_key)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    try:
        key.verify(signature, message)
        return True
    except InvalidSignature:
        return False


def digest(algorithm: AlgorithmId, message: bytes) -> bytes:
    digest_algorithm(algorithm.oid)
    return hashlib.sha256(message).digest()


def encode_key(key: KeyPair) -> bytes:
    """Key file body: SEQUENCE { algorithm OID, privateKey OCTET STRING }."""
    return encode(Sequence([key.algorithm.oid, OctetString(key.private_key)]))


def decode_key(data: bytes) -> KeyPair:
    value = decode_exact(data)
    if not (isinstance(value, Sequence) and len(value.elements) == 2
            and isinstance(value.elements[0], Oid)
            and isinstance(value.elements[1], OctetString)):
        raise MalformedKey("key file is not SEQUENCE {OID, OCTET STRING}")
    algorithm = signature_algorithm(value.elements[0])
    raw = value.elements[1].value
    try:
        private = Ed25519PrivateKey.from_private_bytes(raw)
    except ValueError as exc:
        raise MalformedKey(str(exc)) from exc
    return KeyPair(algorithm, private.public_key().public_bytes_raw(), raw)
