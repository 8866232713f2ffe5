"""Platform Identity Manager: the PII vault.

Holds the user profile (drawer-partitioned field values), per-app nonce
counters, revocation records, and the audit ledger, persisted together
in one encrypted-at-rest file. Extraction is token-gated: signature,
expiry, nonce, and revocation are validated in that order before any
value leaves the vault. All mutations are serialized by the gateway's
enforcement queue; this class adds its own lock so direct harness use
is safe too.
"""

import json
import os
import threading
from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import ledger as ledger_mod
from . import tokens
from .canonical import canonical_bytes
from .clock import Clock
from .errors import (
    AuthorizationRevokedError,
    FatalBootError,
    ReplayDetectedError,
    TokenExpiredError,
)
from .ledger import AuditEntry, append_entry, entry_from_document
from .schema import PiiField, parse_field, scope_names
from .tokens import ScopeToken

PROFILE_VALUE_MAX_BYTES = 64


@dataclass(frozen=True)
class RevocationRecord:
    app_id: str
    revoked_at: int
    active: bool


class PimStore:
    """Vault state with optional encrypted single-file persistence.

    With a path and key, every mutation rewrites the file (nonce +
    AES-256-GCM over the canonical JSON state). With path=None the
    store is memory-only, which the simulation harness uses for speed
    and determinism.
    """

    def __init__(self, path: str | None = None, store_key: bytes | None = None):
        if (path is None) != (store_key is None):
            raise ValueError("path and store_key must be provided together")
        self._path = path
        self._key = store_key
        self._lock = threading.RLock()
        self.lock = self._lock
        self.profile: dict[PiiField, str] = {}
        self.issued_nonces: dict[str, int] = {}
        self.consumed_nonces: dict[str, int] = {}
        self.revocations: dict[str, RevocationRecord] = {}
        self.entries: list[AuditEntry] = []
        self.chain_head: str = ledger_mod.GENESIS_HASH
        if path is not None and os.path.exists(path):
            self._load()

    # -- persistence ----------------------------------------------------

    def _state_document(self) -> dict:
        return {
            "chainHead": self.chain_head,
            "consumedNonces": self.consumed_nonces,
            "issuedNonces": self.issued_nonces,
            "ledger": [e.to_document() for e in self.entries],
            "profile": {f.value: v for f, v in self.profile.items()},
            "revocations": {
                app: {"appId": r.app_id, "revokedAt": r.revoked_at, "active": r.active}
                for app, r in self.revocations.items()
            },
        }

    def _save(self) -> None:
        if self._path is None:
            return
        nonce = os.urandom(12)
        blob = AESGCM(self._key).encrypt(
            nonce, canonical_bytes(self._state_document()), None
        )
        tmp = self._path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(nonce + blob)
        os.replace(tmp, self._path)

    def _load(self) -> None:
        try:
            with open(self._path, "rb") as fh:
                raw = fh.read()
            plaintext = AESGCM(self._key).decrypt(raw[:12], raw[12:], None)
            doc = json.loads(plaintext.decode("utf-8"))
        except Exception as exc:
            raise FatalBootError(f"vault store is unreadable: {exc}") from exc
        self.profile = {parse_field(k): v for k, v in doc["profile"].items()}
        self.issued_nonces = dict(doc["issuedNonces"])
        self.consumed_nonces = dict(doc["consumedNonces"])
        self.revocations = {
            app: RevocationRecord(r["appId"], r["revokedAt"], r["active"])
            for app, r in doc["revocations"].items()
        }
        self.entries = [entry_from_document(e) for e in doc["ledger"]]
        self.chain_head = doc["chainHead"]

    # -- profile --------------------------------------------------------

    def set_profile_value(self, field: PiiField, value: str) -> None:
        if len(value.encode("utf-8")) > PROFILE_VALUE_MAX_BYTES:
            raise ValueError(
                f"profile value for {field.value} exceeds "
                f"{PROFILE_VALUE_MAX_BYTES} bytes"
            )
        with self._lock:
            self.profile[field] = value
            self._save()

    def load_profile(self, values: dict[PiiField, str]) -> None:
        with self._lock:
            for field, value in values.items():
                if len(value.encode("utf-8")) > PROFILE_VALUE_MAX_BYTES:
                    raise ValueError(f"profile value for {field.value} too long")
            self.profile.update(values)
            self._save()

    # -- ledger ---------------------------------------------------------

    def append(
        self,
        timestamp: int,
        app_id: str,
        context: str | None,
        requested: list[str],
        authorized: list[str],
        outcome: str,
        absent: list[str] | None = None,
    ) -> AuditEntry:
        with self._lock:
            entry = append_entry(
                self.entries,
                timestamp,
                app_id,
                context,
                requested,
                authorized,
                outcome,
                absent,
            )
            self.chain_head = entry.entry_hash
            self._save()
            return entry

    def verify_ledger(self) -> bool:
        with self._lock:
            return ledger_mod.verify_chain(list(self.entries), self.chain_head)

    def export_ledger(self) -> str:
        with self._lock:
            return ledger_mod.export_ledger(list(self.entries))

    # -- nonces ---------------------------------------------------------

    def next_issue_nonce(self, app_id: str) -> int:
        with self._lock:
            nonce = self.issued_nonces.get(app_id, 0) + 1
            self.issued_nonces[app_id] = nonce
            self._save()
            return nonce

    # -- revocation -----------------------------------------------------

    def is_revoked(self, app_id: str) -> bool:
        record = self.revocations.get(app_id)
        return record is not None and record.active

    def revoke(self, app_id: str, clock: Clock) -> RevocationRecord:
        with self._lock:
            record = RevocationRecord(app_id=app_id, revoked_at=clock.now(), active=True)
            self.revocations[app_id] = record
            self.append(
                clock.now(), app_id, None, [], [], ledger_mod.OUTCOME_REVOKED
            )
            return record

    def re_consent(self, app_id: str, clock: Clock) -> None:
        with self._lock:
            record = self.revocations.get(app_id)
            if record is not None:
                self.revocations[app_id] = RevocationRecord(
                    app_id=app_id, revoked_at=record.revoked_at, active=False
                )
            self.append(
                clock.now(), app_id, None, [], [], ledger_mod.OUTCOME_RECONSENTED
            )

    # -- purge ----------------------------------------------------------

    def purge(self, clock: Clock) -> None:
        """Erase every drawer value; the ledger chain stays intact."""
        with self._lock:
            self.profile.clear()
            self.append(clock.now(), "", None, [], [], ledger_mod.OUTCOME_PURGED)


def extract(
    store: PimStore,
    token: ScopeToken,
    clock: Clock,
    current_epoch: int,
    epoch_public_key: Ed25519PublicKey,
    context: str | None = None,
    requested_scopes: list[str] | None = None,
) -> dict[PiiField, str]:
    """Token-gated drawer extraction.

    Validation order: signature (current epoch), expiry (inclusive of
    expiresAt), nonce (strictly greater than the last consumed for this
    app, then consumed), revocation. Requested-but-absent profile
    fields are omitted from the payload and noted per-field in the
    audit entry. Every presentation appends exactly one entry.

    The gateway passes the wire-visible *context* and raw
    *requested_scopes* so the entry reflects the original request;
    direct presentations (e.g. replay drills) default to the token's
    own scope list.
    """
    with store._lock:
        now = clock.now()
        requested = requested_scopes or scope_names(token.authorized_scopes)

        def log_error(code: int) -> None:
            store.append(
                now,
                token.app_id,
                context,
                requested,
                [],
                ledger_mod.outcome_error(code),
            )

        try:
            tokens.verify_signature(token, current_epoch, epoch_public_key)
        except Exception:
            log_error(4000)
            raise
        if now > token.expires_at:
            log_error(4005)
            raise TokenExpiredError(
                f"token expired at {token.expires_at}, now {now}"
            )
        last = store.consumed_nonces.get(token.app_id, 0)
        if token.nonce <= last:
            log_error(4006)
            raise ReplayDetectedError(
                f"nonce {token.nonce} already consumed (last {last})"
            )
        store.consumed_nonces[token.app_id] = token.nonce
        if store.is_revoked(token.app_id):
            log_error(4004)
            raise AuthorizationRevokedError(
                f"authorization revoked for {token.app_id!r}"
            )
        payload: dict[PiiField, str] = {}
        absent: list[str] = []
        for field in token.authorized_scopes:
            if field in store.profile:
                payload[field] = store.profile[field]
            else:
                absent.append(field.value)
        store.append(
            now,
            token.app_id,
            context,
            requested,
            scope_names(payload.keys()),
            ledger_mod.OUTCOME_GRANTED,
            sorted(absent),
        )
        return payload
