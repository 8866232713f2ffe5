"""Scope tokens: short-lived signed capabilities.

A token authorizes one extraction of a specific scope set. It carries a
per-app monotonic nonce and expires 30 seconds after issue; the PII
vault validates signature, expiry, nonce, and revocation before any
drawer opens. Tokens move only between gateway and vault; they are
never released to applications.
"""

from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import canonical_bytes
from .errors import EpochMismatchError, SignatureInvalidError
from .schema import ScopeSet, parse_scopes, scope_names

#: Validity window in seconds; expiry is inclusive (valid through
#: issuedAt + TOKEN_TTL_SECONDS).
TOKEN_TTL_SECONDS = 30


@dataclass(frozen=True)
class ScopeToken:
    app_id: str
    authorized_scopes: ScopeSet
    nonce: int
    issued_at: int
    expires_at: int
    key_epoch: int
    signature: bytes

    def __post_init__(self):
        if self.expires_at - self.issued_at != TOKEN_TTL_SECONDS:
            raise ValueError(
                f"token validity must be exactly {TOKEN_TTL_SECONDS}s"
            )

    def body(self) -> dict:
        return {
            "appId": self.app_id,
            "authorizedScopes": scope_names(self.authorized_scopes),
            "expiresAt": self.expires_at,
            "issuedAt": self.issued_at,
            "keyEpoch": self.key_epoch,
            "nonce": self.nonce,
        }

    def signed_payload(self) -> bytes:
        return canonical_bytes(self.body())


def issue(
    app_id: str,
    scopes: ScopeSet,
    nonce: int,
    issued_at: int,
    key_epoch: int,
    signing_key: Ed25519PrivateKey,
) -> ScopeToken:
    body = {
        "appId": app_id,
        "authorizedScopes": scope_names(scopes),
        "expiresAt": issued_at + TOKEN_TTL_SECONDS,
        "issuedAt": issued_at,
        "keyEpoch": key_epoch,
        "nonce": nonce,
    }
    signature = signing_key.sign(canonical_bytes(body))
    return ScopeToken(
        app_id=app_id,
        authorized_scopes=parse_scopes(body["authorizedScopes"]),
        nonce=nonce,
        issued_at=issued_at,
        expires_at=body["expiresAt"],
        key_epoch=key_epoch,
        signature=signature,
    )


def verify_signature(
    token: ScopeToken, current_epoch: int, epoch_public_key: Ed25519PublicKey
) -> None:
    """Raise unless the token was signed by the current epoch key."""
    if token.key_epoch != current_epoch:
        raise EpochMismatchError(
            f"token epoch {token.key_epoch} != current epoch {current_epoch}"
        )
    try:
        epoch_public_key.verify(token.signature, token.signed_payload())
    except InvalidSignature:
        raise SignatureInvalidError("scope token signature does not verify") from None
