"""Directory-backed repository of certificates, CRLs and trust anchors,
plus the injectable clock used to make validation time-deterministic."""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from pathlib import Path

from .certs import Certificate, Crl, Name, fingerprint, parse_certificate, parse_crl
from .pathbuild import CertGraph


class RepositoryError(Exception):
    pass


@dataclass(frozen=True)
class AnchorEntry:
    fingerprint: bytes
    label: str
    usages: tuple[str, ...]  # empty tuple = trusted for every usage

    def trusted_for(self, usage: str) -> bool:
        return not self.usages or usage in self.usages


def parse_anchor_manifest(text: str) -> list[AnchorEntry]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise RepositoryError(
                f"anchors.txt line {lineno}: expected 'fingerprint label usages'")
        fp_hex, label, usages = parts
        try:
            fp = bytes.fromhex(fp_hex)
        except ValueError as exc:
            raise RepositoryError(
                f"anchors.txt line {lineno}: bad fingerprint") from exc
        usage_tuple = () if usages == "-" else tuple(usages.split(","))
        entries.append(AnchorEntry(fp, label, usage_tuple))
    return entries


@dataclass
class Repository:
    """One immutable snapshot of the on-disk store.  Reloading builds a new
    snapshot; callers swap the reference atomically."""

    root: Path
    certificates: dict[bytes, Certificate] = field(default_factory=dict)
    crls_by_issuer: dict[Name, list[Crl]] = field(default_factory=dict)
    anchors: list[AnchorEntry] = field(default_factory=list)

    @classmethod
    def load(cls, root: "Path | str") -> "Repository":
        root = Path(root)
        repo = cls(root)
        cert_dir = root / "certs"
        if not cert_dir.is_dir():
            raise RepositoryError(f"no certs/ directory under {root}")
        for path in sorted(cert_dir.glob("*.der")):
            try:
                cert = parse_certificate(path.read_bytes())
            except Exception as exc:
                raise RepositoryError(f"{path}: {exc}") from exc
            repo.certificates[fingerprint(cert)] = cert
        crl_dir = root / "crls"
        if crl_dir.is_dir():
            for path in sorted(crl_dir.glob("*.crl")):
                try:
                    crl = parse_crl(path.read_bytes())
                except Exception as exc:
                    raise RepositoryError(f"{path}: {exc}") from exc
                repo.crls_by_issuer.setdefault(crl.issuer, []).append(crl)
        manifest = root / "anchors.txt"
        if manifest.is_file():
            repo.anchors = parse_anchor_manifest(manifest.read_text())
        for entry in repo.anchors:
            if entry.fingerprint not in repo.certificates:
                raise RepositoryError(
                    f"anchor {entry.label} not among stored certificates")
        return repo

    @property
    def anchor_fingerprints(self) -> frozenset:
        return frozenset(e.fingerprint for e in self.anchors)

    def graph(self, anchor_fingerprints=None) -> CertGraph:
        anchors = (self.anchor_fingerprints if anchor_fingerprints is None
                   else anchor_fingerprints)
        return CertGraph(self.certificates.values(), anchors)

    def crls_for(self, issuer: Name) -> list[Crl]:
        """CRLs claiming the given issuer, freshest first."""
        found = list(self.crls_by_issuer.get(issuer, []))
        found.sort(key=lambda c: c.this_update, reverse=True)
        return found


@dataclass
class Clock:
    """Time source; a fixed instant makes whole test runs reproducible.
    Callers capture ``now()`` once per request."""

    fixed: datetime.datetime | None = None

    def now(self) -> datetime.datetime:
        if self.fixed is not None:
            return self.fixed
        return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)
