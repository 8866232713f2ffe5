"""Partnership manifest: the root-of-trust-signed app registry.

The manifest binds each app identity to its access tier and payload
encryption key. It is provisioned offline by the certification
authority (root Ed25519 key), stored as its exact canonical JSON bytes,
and re-verified at every gateway boot. Any deviation of the stored
bytes from a correctly signed canonical document degrades trust: the
gateway keeps serving, but every tier lookup is clamped to Standard.
"""

import base64
from dataclasses import dataclass
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import canonical_bytes
from .errors import FatalBootError, ProvisioningError, UnknownAppError
from .schema import AccessTier

#: X25519 public keys are raw 32-byte values in manifest entries.
APP_KEY_SIZE = 32


@dataclass(frozen=True)
class ManifestEntry:
    app_id: str
    tier: AccessTier
    app_public_key: bytes
    cert_fingerprint: str

    def to_document(self) -> dict:
        return {
            "appId": self.app_id,
            "tier": self.tier.value,
            "appPublicKey": base64.b64encode(self.app_public_key).decode("ascii"),
            "certFingerprint": self.cert_fingerprint,
        }


@dataclass(frozen=True)
class PartnershipManifest:
    entries: tuple[ManifestEntry, ...]
    version: int
    issued_at: int
    root_signature: bytes

    def signed_payload(self) -> bytes:
        return _signed_payload(
            [e.to_document() for e in self.entries], self.version, self.issued_at
        )

    def to_document(self) -> dict:
        return {
            "entries": [e.to_document() for e in self.entries],
            "issuedAt": self.issued_at,
            "rootSignature": base64.b64encode(self.root_signature).decode("ascii"),
            "version": self.version,
        }

    def to_bytes(self) -> bytes:
        """The exact byte form a manifest file must contain."""
        return canonical_bytes(self.to_document())


class TrustMode(str, Enum):
    VERIFIED = "Verified"
    DEGRADED = "Degraded"


@dataclass(frozen=True)
class TrustState:
    mode: TrustMode
    #: Entry table retained for appId/key lookup even when degraded;
    #: empty when tampering destroyed the document structure.
    entries: dict[str, ManifestEntry]
    version: int | None = None

    @property
    def degraded(self) -> bool:
        return self.mode is TrustMode.DEGRADED


def _signed_payload(entry_docs: list[dict], version: int, issued_at: int) -> bytes:
    return canonical_bytes(
        {"entries": entry_docs, "issuedAt": issued_at, "version": version}
    )


def provision_manifest(
    entries: list[ManifestEntry],
    version: int,
    issued_at: int,
    root_private_key: Ed25519PrivateKey,
    last_issued_version: int | None = None,
) -> PartnershipManifest:
    """Sign an entry table into a manifest.

    Versions must strictly increase across re-provisioning; the caller
    supplies the highest previously issued version (persisted next to
    the root key by the CLI).
    """
    if not entries:
        raise ProvisioningError("manifest requires at least one entry")
    seen: set[str] = set()
    for entry in entries:
        if entry.app_id in seen:
            raise ProvisioningError(f"duplicate appId in manifest: {entry.app_id!r}")
        seen.add(entry.app_id)
        if len(entry.app_public_key) != APP_KEY_SIZE:
            raise ProvisioningError(
                f"appPublicKey for {entry.app_id!r} must be {APP_KEY_SIZE} raw bytes"
            )
    if version < 1:
        raise ProvisioningError("manifest version must be >= 1")
    if last_issued_version is not None and version <= last_issued_version:
        raise ProvisioningError(
            f"manifest version {version} does not exceed issued version "
            f"{last_issued_version}"
        )
    payload = _signed_payload([e.to_document() for e in entries], version, issued_at)
    signature = root_private_key.sign(payload)
    return PartnershipManifest(
        entries=tuple(entries),
        version=version,
        issued_at=issued_at,
        root_signature=signature,
    )


def _parse_entry(doc: dict) -> ManifestEntry:
    return ManifestEntry(
        app_id=doc["appId"],
        tier=AccessTier(doc["tier"]),
        app_public_key=base64.b64decode(doc["appPublicKey"], validate=True),
        cert_fingerprint=doc["certFingerprint"],
    )


def parse_manifest(document_bytes: bytes) -> PartnershipManifest:
    """Strict parse of a stored manifest document."""
    import json

    doc = json.loads(document_bytes.decode("utf-8"))
    if not isinstance(doc, dict):
        raise ValueError("manifest document must be a JSON object")
    if not isinstance(doc["version"], int) or isinstance(doc["version"], bool):
        raise ValueError("manifest version must be an integer")
    if not isinstance(doc["issuedAt"], int) or isinstance(doc["issuedAt"], bool):
        raise ValueError("manifest issuedAt must be an integer")
    entries = tuple(_parse_entry(e) for e in doc["entries"])
    return PartnershipManifest(
        entries=entries,
        version=doc["version"],
        issued_at=doc["issuedAt"],
        root_signature=base64.b64decode(doc["rootSignature"], validate=True),
    )


def _salvage_entries(document_bytes: bytes) -> dict[str, ManifestEntry]:
    """Best-effort entry recovery from a tampered document.

    Degraded mode still needs appId and key-wrap lookups; tier values
    are untrusted here (lookup clamps to Standard regardless), so an
    unrecognized tier string falls back to Standard rather than
    discarding the entry.
    """
    import json

    try:
        doc = json.loads(document_bytes.decode("utf-8"))
        raw_entries = doc["entries"]
    except Exception:
        return {}
    salvaged: dict[str, ManifestEntry] = {}
    for item in raw_entries:
        try:
            try:
                tier = AccessTier(item["tier"])
            except (ValueError, KeyError):
                tier = AccessTier.STANDARD
            key = base64.b64decode(item["appPublicKey"], validate=True)
            if len(key) != APP_KEY_SIZE:
                continue
            salvaged[item["appId"]] = ManifestEntry(
                app_id=item["appId"],
                tier=tier,
                app_public_key=key,
                cert_fingerprint=str(item.get("certFingerprint", "")),
            )
        except Exception:
            continue
    return salvaged


def verify_at_boot(
    document_bytes: bytes | None, root_public_key: Ed25519PublicKey
) -> TrustState:
    """Boot-time trust decision over the stored manifest bytes.

    Verified requires all of: the stored bytes are exactly the
    canonical serialization of the parsed document (catches mutations
    that decode to the same values, e.g. base64 padding-bit flips), and
    the root signature verifies over (entries, issuedAt, version).
    Anything short of that degrades; a missing manifest is fatal.
    """
    if document_bytes is None:
        raise FatalBootError("partnership manifest is absent; refusing to serve")
    try:
        manifest = parse_manifest(document_bytes)
    except Exception:
        return TrustState(
            mode=TrustMode.DEGRADED, entries=_salvage_entries(document_bytes)
        )
    entries = {e.app_id: e for e in manifest.entries}
    if manifest.to_bytes() != document_bytes:
        return TrustState(
            mode=TrustMode.DEGRADED, entries=entries, version=manifest.version
        )
    try:
        root_public_key.verify(manifest.root_signature, manifest.signed_payload())
    except InvalidSignature:
        return TrustState(
            mode=TrustMode.DEGRADED, entries=entries, version=manifest.version
        )
    return TrustState(
        mode=TrustMode.VERIFIED, entries=entries, version=manifest.version
    )


def lookup_entry(state: TrustState, app_id: str) -> ManifestEntry:
    entry = state.entries.get(app_id)
    if entry is None:
        raise UnknownAppError(f"appId {app_id!r} is not in the partnership manifest")
    return entry


def lookup_tier(state: TrustState, app_id: str) -> AccessTier:
    """Tier for an app; clamped to Standard whenever trust is degraded."""
    entry = lookup_entry(state, app_id)
    if state.degraded:
        return AccessTier.STANDARD
    return entry.tier
