"""Wire message formats and framing.

Transport is a local stream socket carrying length-prefixed frames:
a 4-byte big-endian length followed by a UTF-8 canonical JSON body.
Frames above MAX_FRAME_BYTES are rejected before the body is read.

Two channels share the codec: the app channel (identity requests in,
fulfillments or errors out) and the authenticated operator channel
(consent events out; decisions, revocations, profile edits, and ledger
queries in). Error frames carry exactly {code, name, transactionId}:
no free text, no payload values.
"""

import json
import struct
from dataclasses import dataclass

from .canonical import canonical_bytes
from .errors import ProtocolError, ScopeViolationError, UdssError
from .gateway import IdentityRequest
from .schema import parse_context, parse_scopes

MAX_FRAME_BYTES = 64 * 1024
_HEADER = struct.Struct("!I")

MSG_IDENTITY_REQUEST = "identity.request"
MSG_IDENTITY_FULFILLMENT = "identity.fulfillment"
MSG_ERROR = "error"
MSG_OPERATOR_ATTACH = "operator.attach"
MSG_OPERATOR_ATTACHED = "operator.attached"
MSG_OPERATOR_DENIED = "operator.attach.denied"
MSG_CONSENT_EVENT = "consent.event"
MSG_CONSENT_DECISION = "consent.decision"
MSG_CONSENT_ACK = "consent.ack"
MSG_LEDGER_EXPORT = "ledger.export"
MSG_LEDGER_ENTRIES = "ledger.entries"
MSG_LEDGER_VERIFY = "ledger.verify"
MSG_LEDGER_STATUS = "ledger.status"
MSG_REVOKE_SET = "revoke.set"
MSG_REVOKE_ACK = "revoke.ack"
MSG_APPS_LIST = "apps.list"
MSG_APPS_STATE = "apps.state"
MSG_PROFILE_GET = "profile.get"
MSG_PROFILE_STATE = "profile.state"
MSG_PROFILE_SET = "profile.set"
MSG_PROFILE_PURGE = "profile.purge"
MSG_PROFILE_ACK = "profile.ack"
MSG_SCHEMA_TABLE = "schema.table"
MSG_SCHEMA_STATE = "schema.state"

_KNOWN_TYPES = {
    MSG_IDENTITY_REQUEST,
    MSG_IDENTITY_FULFILLMENT,
    MSG_ERROR,
    MSG_OPERATOR_ATTACH,
    MSG_OPERATOR_ATTACHED,
    MSG_OPERATOR_DENIED,
    MSG_CONSENT_EVENT,
    MSG_CONSENT_DECISION,
    MSG_CONSENT_ACK,
    MSG_LEDGER_EXPORT,
    MSG_LEDGER_ENTRIES,
    MSG_LEDGER_VERIFY,
    MSG_LEDGER_STATUS,
    MSG_REVOKE_SET,
    MSG_REVOKE_ACK,
    MSG_APPS_LIST,
    MSG_APPS_STATE,
    MSG_PROFILE_GET,
    MSG_PROFILE_STATE,
    MSG_PROFILE_SET,
    MSG_PROFILE_PURGE,
    MSG_PROFILE_ACK,
    MSG_SCHEMA_TABLE,
    MSG_SCHEMA_STATE,
}


def encode(message: dict) -> bytes:
    """Frame a message: length prefix plus canonical JSON body."""
    if not isinstance(message, dict) or "messageType" not in message:
        raise ProtocolError("message requires a messageType")
    if message["messageType"] not in _KNOWN_TYPES:
        raise ProtocolError(f"unknown messageType: {message['messageType']!r}")
    body = canonical_bytes(message)
    if len(body) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame body of {len(body)} bytes exceeds cap")
    return _HEADER.pack(len(body)) + body


def decode(frame: bytes) -> dict:
    """Inverse of encode for a complete frame."""
    if len(frame) < _HEADER.size:
        raise ProtocolError("short frame header")
    (length,) = _HEADER.unpack(frame[: _HEADER.size])
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared frame length {length} exceeds cap")
    body = frame[_HEADER.size :]
    if len(body) != length:
        raise ProtocolError("frame length mismatch")
    return decode_body(body)


def decode_body(body: bytes) -> dict:
    try:
        message = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ProtocolError("frame body is not valid JSON") from None
    if not isinstance(message, dict):
        raise ProtocolError("frame body must be a JSON object")
    message_type = message.get("messageType")
    if message_type not in _KNOWN_TYPES:
        raise ProtocolError(f"unknown messageType: {message_type!r}")
    return message


def read_frame(reader) -> dict | None:
    """Read one frame from a file-like socket reader.

    Returns None on clean EOF. The length cap is checked before the
    body is read, so a hostile length prefix never drives allocation.
    """
    header = reader.read(_HEADER.size)
    if not header:
        return None
    if len(header) < _HEADER.size:
        raise ProtocolError("truncated frame header")
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared frame length {length} exceeds cap")
    body = reader.read(length)
    if len(body) < length:
        raise ProtocolError("truncated frame body")
    return decode_body(body)


def error_frame(exc: UdssError, transaction_id: str | None) -> dict:
    code = exc.code if exc.code is not None else 4000
    return {
        "messageType": MSG_ERROR,
        "code": code,
        "name": exc.name,
        "transactionId": transaction_id,
    }


@dataclass(frozen=True)
class ParsedRequest:
    request: IdentityRequest
    transaction_id: str


def parse_identity_request(message: dict) -> ParsedRequest:
    """Validate an identity.request message against the schema.

    Field identifiers and context literals must match exactly; a near
    miss (e.g. "Email") is a scope violation, not a silent fixup.
    """
    for key in ("appId", "requestContext", "requestedScopes", "transactionId"):
        if key not in message:
            raise ProtocolError(f"identity.request is missing {key!r}")
    if not isinstance(message["appId"], str) or not message["appId"]:
        raise ProtocolError("appId must be a non-empty string")
    if not isinstance(message["transactionId"], str) or not message["transactionId"]:
        raise ProtocolError("transactionId must be a non-empty string")
    scopes_raw = message["requestedScopes"]
    if not isinstance(scopes_raw, list) or not all(
        isinstance(s, str) for s in scopes_raw
    ):
        raise ProtocolError("requestedScopes must be a list of strings")
    if not scopes_raw:
        raise ScopeViolationError("requestedScopes must be non-empty")
    context = parse_context(message["requestContext"])
    scopes = parse_scopes(scopes_raw)
    return ParsedRequest(
        request=IdentityRequest(
            app_id=message["appId"], context=context, requested_scopes=scopes
        ),
        transaction_id=message["transactionId"],
    )
