"""Hash-chained, append-only audit ledger.

Every access attempt, successful or denied, becomes one entry. Entries
hold field names only, never field values, so the ledger itself is
PII-free and safe to export. Each entry hash covers the previous
entry's hash; the store additionally anchors the head hash so that
tail truncation is detectable.
"""

import hashlib
from dataclasses import dataclass, field

from .canonical import canonical_bytes

GENESIS_HASH = "0" * 64

OUTCOME_GRANTED = "Granted"
OUTCOME_DENIED = "Denied"
OUTCOME_REVOKED = "Revoked"
OUTCOME_RECONSENTED = "Reconsented"
OUTCOME_PURGED = "Purged"


def outcome_error(code: int) -> str:
    return f"Error({code})"


@dataclass(frozen=True)
class AuditEntry:
    sequence: int
    timestamp: int
    app_id: str
    context: str | None
    requested_scopes: tuple[str, ...]
    authorized_scopes: tuple[str, ...]
    absent_scopes: tuple[str, ...]
    outcome: str
    prev_hash: str
    entry_hash: str = field(default="")

    def hashed_payload(self) -> dict:
        return {
            "absentScopes": list(self.absent_scopes),
            "appId": self.app_id,
            "authorizedScopes": list(self.authorized_scopes),
            "context": self.context,
            "outcome": self.outcome,
            "prevHash": self.prev_hash,
            "requestedScopes": list(self.requested_scopes),
            "sequence": self.sequence,
            "timestamp": self.timestamp,
        }

    def compute_hash(self) -> str:
        return hashlib.sha256(canonical_bytes(self.hashed_payload())).hexdigest()

    def to_document(self) -> dict:
        doc = self.hashed_payload()
        doc["entryHash"] = self.entry_hash
        return doc


def entry_from_document(doc: dict) -> AuditEntry:
    return AuditEntry(
        sequence=doc["sequence"],
        timestamp=doc["timestamp"],
        app_id=doc["appId"],
        context=doc["context"],
        requested_scopes=tuple(doc["requestedScopes"]),
        authorized_scopes=tuple(doc["authorizedScopes"]),
        absent_scopes=tuple(doc["absentScopes"]),
        outcome=doc["outcome"],
        prev_hash=doc["prevHash"],
        entry_hash=doc["entryHash"],
    )


def append_entry(
    chain: list[AuditEntry],
    timestamp: int,
    app_id: str,
    context: str | None,
    requested_scopes: list[str],
    authorized_scopes: list[str],
    outcome: str,
    absent_scopes: list[str] | None = None,
) -> AuditEntry:
    prev_hash = chain[-1].entry_hash if chain else GENESIS_HASH
    entry = AuditEntry(
        sequence=len(chain),
        timestamp=timestamp,
        app_id=app_id,
        context=context,
        requested_scopes=tuple(requested_scopes),
        authorized_scopes=tuple(authorized_scopes),
        absent_scopes=tuple(absent_scopes or []),
        outcome=outcome,
        prev_hash=prev_hash,
    )
    entry = AuditEntry(**{**entry.__dict__, "entry_hash": entry.compute_hash()})
    chain.append(entry)
    return entry


def verify_chain(
    entries: list[AuditEntry], expected_head: str | None = None
) -> bool:
    """True iff every hash recomputes and every link holds.

    A bare chain cannot distinguish tail truncation from an honest
    shorter history; callers that anchor the head hash (the store does)
    pass it as *expected_head* to close that gap.
    """
    prev = GENESIS_HASH
    for index, entry in enumerate(entries):
        if entry.sequence != index:
            return False
        if entry.prev_hash != prev:
            return False
        if entry.compute_hash() != entry.entry_hash:
            return False
        prev = entry.entry_hash
    if expected_head is not None:
        return prev == expected_head
    return True


def export_ledger(entries: list[AuditEntry]) -> str:
    """Newline-delimited canonical JSON, one entry per line."""
    from .canonical import canonical_json

    return "\n".join(canonical_json(e.to_document()) for e in entries)
