"""Key lifecycle and the fulfillment envelope.

The envelope is how authorized PII leaves the trust boundary: a
transaction-scoped AES-256-GCM session key encrypts the payload, the
session key is wrapped to the receiving app's manifest X25519 key
(ephemeral ECDH + HKDF), and the whole envelope is signed by the
current gateway key epoch. The session key is erased before seal
returns.

Wire form (canonical JSON, binary parts base64):

    {"authTag": ..., "ciphertext": ..., "header": {"appId", "enc":
     "AES-256-GCM", "keyEpoch", "sig": "Ed25519"}, "nonce": ...,
     "signature": ..., "wrappedKey": ...}

The serialized envelope stays under ENVELOPE_MAX_BYTES: per-value
length caps bound the payload, and seal refuses (PayloadTooLarge) the
residual adversarial cases the caps alone cannot exclude. With the
sizes below, any payload whose values total <= ~580 bytes always fits.
"""

import base64
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .canonical import canonical_bytes
from .clock import Clock
from .errors import (
    CiphertextTamperedError,
    EmptyPayloadError,
    KeyUnwrapFailureError,
    PayloadTooLargeError,
    SignatureInvalidError,
)
from .manifest import ManifestEntry
from .schema import FIELD_INDEX, FIELD_ORDER, PiiField

ENVELOPE_MAX_BYTES = 1200
#: Hard cap on each payload value, in UTF-8 bytes.
VALUE_MAX_BYTES = 64

ENC_ALGORITHM = "AES-256-GCM"
SIG_ALGORITHM = "Ed25519"

_WRAP_INFO = b"udss-envelope-key-wrap-v1"
#: The wrap key is derived fresh per envelope, so a fixed nonce is safe.
_WRAP_NONCE = bytes(12)
_PAYLOAD_VERSION = 1


@dataclass
class GatewayKeyEpoch:
    """Signing key epoch. Exactly one epoch is current at a time."""

    epoch: int
    signing_key: Ed25519PrivateKey
    created_at: int

    def public_key(self) -> Ed25519PublicKey:
        return self.signing_key.public_key()


def new_epoch(epoch: int, created_at: int) -> GatewayKeyEpoch:
    return GatewayKeyEpoch(
        epoch=epoch, signing_key=Ed25519PrivateKey.generate(), created_at=created_at
    )


def rotate_keys(current: GatewayKeyEpoch, clock: Clock) -> GatewayKeyEpoch:
    """Retire the current epoch and mint its successor.

    Outstanding tokens are at most 30s old, so no verification grace
    window carries across the rotation; they simply stop validating.
    """
    return new_epoch(current.epoch + 1, clock.now())


class SessionKey:
    """Transaction-scoped AES key held in erasable storage."""

    def __init__(self):
        self._material = bytearray(os.urandom(32))
        self.destroyed = False

    def material(self) -> bytes:
        if self.destroyed:
            raise RuntimeError("session key already destroyed")
        return bytes(self._material)

    def destroy(self) -> None:
        for i in range(len(self._material)):
            self._material[i] = 0
        self.destroyed = True


@dataclass(frozen=True)
class FulfillmentEnvelope:
    app_id: str
    key_epoch: int
    wrapped_key: bytes
    nonce: bytes
    ciphertext: bytes
    auth_tag: bytes
    signature: bytes

    def header(self) -> dict:
        return {
            "appId": self.app_id,
            "enc": ENC_ALGORITHM,
            "keyEpoch": self.key_epoch,
            "sig": SIG_ALGORITHM,
        }

    def signed_payload(self) -> bytes:
        return canonical_bytes(
            {
                "authTag": _b64(self.auth_tag),
                "ciphertext": _b64(self.ciphertext),
                "header": self.header(),
                "nonce": _b64(self.nonce),
                "wrappedKey": _b64(self.wrapped_key),
            }
        )

    def to_document(self) -> dict:
        return {
            "authTag": _b64(self.auth_tag),
            "ciphertext": _b64(self.ciphertext),
            "header": self.header(),
            "nonce": _b64(self.nonce),
            "signature": _b64(self.signature),
            "wrappedKey": _b64(self.wrapped_key),
        }

    def to_bytes(self) -> bytes:
        return canonical_bytes(self.to_document())


def _b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def _b64_size(raw_len: int) -> int:
    return 4 * ((raw_len + 2) // 3)


def envelope_size(payload: dict[PiiField, str], app_id: str, key_epoch: int) -> int:
    """Exact serialized size an envelope for *payload* will have.

    Every binary part has a fixed length except the ciphertext, so the
    size is computable without doing any cryptography; the gateway uses
    this to reject oversized transactions before touching the vault.
    """
    ct_len = 1 + sum(2 + len(v.encode("utf-8")) for v in payload.values())
    placeholder = {
        "authTag": "A" * _b64_size(16),
        "ciphertext": "A" * _b64_size(ct_len),
        "header": {
            "appId": app_id,
            "enc": ENC_ALGORITHM,
            "keyEpoch": key_epoch,
            "sig": SIG_ALGORITHM,
        },
        "nonce": "A" * _b64_size(12),
        "signature": "A" * _b64_size(64),
        "wrappedKey": "A" * _b64_size(32 + 32 + 16),
    }
    return len(canonical_bytes(placeholder))


def envelope_from_document(doc: dict) -> FulfillmentEnvelope:
    header = doc["header"]
    return FulfillmentEnvelope(
        app_id=header["appId"],
        key_epoch=header["keyEpoch"],
        wrapped_key=base64.b64decode(doc["wrappedKey"]),
        nonce=base64.b64decode(doc["nonce"]),
        ciphertext=base64.b64decode(doc["ciphertext"]),
        auth_tag=base64.b64decode(doc["authTag"]),
        signature=base64.b64decode(doc["signature"]),
    )


def _encode_payload(payload: dict[PiiField, str]) -> bytes:
    """Compact canonical encoding: version byte, then per field in
    schema order: field index, value length, UTF-8 value bytes."""
    parts = [bytes([_PAYLOAD_VERSION])]
    for field in sorted(payload, key=lambda f: FIELD_INDEX[f]):
        value = payload[field].encode("utf-8")
        parts.append(bytes([FIELD_INDEX[field], len(value)]))
        parts.append(value)
    return b"".join(parts)


def _decode_payload(raw: bytes) -> dict[PiiField, str]:
    if not raw or raw[0] != _PAYLOAD_VERSION:
        raise CiphertextTamperedError("unknown payload encoding version")
    payload: dict[PiiField, str] = {}
    i = 1
    while i < len(raw):
        if i + 2 > len(raw):
            raise CiphertextTamperedError("truncated payload encoding")
        index, length = raw[i], raw[i + 1]
        i += 2
        if index >= len(FIELD_ORDER) or i + length > len(raw):
            raise CiphertextTamperedError("malformed payload encoding")
        payload[FIELD_ORDER[index]] = raw[i : i + length].decode("utf-8")
        i += length
    return payload


def _wrap_session_key(session: SessionKey, app_public_key: X25519PublicKey) -> bytes:
    ephemeral = X25519PrivateKey.generate()
    shared = ephemeral.exchange(app_public_key)
    wrap_key = HKDF(
        algorithm=SHA256(), length=32, salt=None, info=_WRAP_INFO
    ).derive(shared)
    wrapped = AESGCM(wrap_key).encrypt(_WRAP_NONCE, session.material(), None)
    return ephemeral.public_key().public_bytes_raw() + wrapped


def _unwrap_session_key(wrapped: bytes, app_private_key: X25519PrivateKey) -> bytes:
    if len(wrapped) != 32 + 32 + 16:
        raise KeyUnwrapFailureError("wrapped key has unexpected length")
    ephemeral_pub = X25519PublicKey.from_public_bytes(wrapped[:32])
    shared = app_private_key.exchange(ephemeral_pub)
    wrap_key = HKDF(
        algorithm=SHA256(), length=32, salt=None, info=_WRAP_INFO
    ).derive(shared)
    try:
        return AESGCM(wrap_key).decrypt(_WRAP_NONCE, wrapped[32:], None)
    except InvalidTag:
        raise KeyUnwrapFailureError(
            "session key does not unwrap under this private key"
        ) from None


def seal(
    payload: dict[PiiField, str],
    app_entry: ManifestEntry,
    epoch: GatewayKeyEpoch,
) -> FulfillmentEnvelope:
    """Encrypt and sign a payload for one app.

    The header is bound into the AEAD as associated data, so header,
    ciphertext, and tag mutations all fail authentication. The session
    key is erased before return regardless of outcome.
    """
    if not payload:
        raise EmptyPayloadError("refusing to seal an empty payload")
    for field, value in payload.items():
        if field not in FIELD_INDEX:
            raise ValueError(f"payload field outside the schema: {field!r}")
        if len(value.encode("utf-8")) > VALUE_MAX_BYTES:
            raise PayloadTooLargeError(
                f"value for {field.value} exceeds {VALUE_MAX_BYTES} bytes"
            )
    size = envelope_size(payload, app_entry.app_id, epoch.epoch)
    if size >= ENVELOPE_MAX_BYTES:
        raise PayloadTooLargeError(
            f"serialized envelope would be {size} bytes (cap {ENVELOPE_MAX_BYTES})"
        )
    header = {
        "appId": app_entry.app_id,
        "enc": ENC_ALGORITHM,
        "keyEpoch": epoch.epoch,
        "sig": SIG_ALGORITHM,
    }
    session = SessionKey()
    try:
        wrapped_key = _wrap_session_key(
            session, X25519PublicKey.from_public_bytes(app_entry.app_public_key)
        )
        nonce = os.urandom(12)
        sealed = AESGCM(session.material()).encrypt(
            nonce, _encode_payload(payload), canonical_bytes(header)
        )
    finally:
        session.destroy()
    ciphertext, auth_tag = sealed[:-16], sealed[-16:]
    unsigned = {
        "authTag": _b64(auth_tag),
        "ciphertext": _b64(ciphertext),
        "header": header,
        "nonce": _b64(nonce),
        "wrappedKey": _b64(wrapped_key),
    }
    signature = epoch.signing_key.sign(canonical_bytes(unsigned))
    return FulfillmentEnvelope(
        app_id=app_entry.app_id,
        key_epoch=epoch.epoch,
        wrapped_key=wrapped_key,
        nonce=nonce,
        ciphertext=ciphertext,
        auth_tag=auth_tag,
        signature=signature,
    )


def open_envelope(
    envelope: FulfillmentEnvelope,
    app_private_key: X25519PrivateKey,
    epoch_public_key: Ed25519PublicKey,
) -> dict[PiiField, str]:
    """Unwrap, authenticate, and decode an envelope.

    Checks run unwrap -> AEAD -> signature so each failure mode reports
    its own error; nothing decrypted is returned unless every check
    passes.
    """
    session_key = _unwrap_session_key(envelope.wrapped_key, app_private_key)
    try:
        plaintext = AESGCM(session_key).decrypt(
            envelope.nonce,
            envelope.ciphertext + envelope.auth_tag,
            canonical_bytes(envelope.header()),
        )
    except InvalidTag:
        raise CiphertextTamperedError(
            "envelope fails authenticated decryption"
        ) from None
    try:
        epoch_public_key.verify(envelope.signature, envelope.signed_payload())
    except InvalidSignature:
        raise SignatureInvalidError("envelope signature does not verify") from None
    return _decode_payload(plaintext)
