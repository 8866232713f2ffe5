import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from udss import tokens
from udss.errors import EpochMismatchError, SignatureInvalidError
from udss.schema import PiiField
from udss.tokens import TOKEN_TTL_SECONDS, ScopeToken


@pytest.fixture
def signing_key():
    return Ed25519PrivateKey.generate()


def test_expiry_is_exactly_thirty_seconds(signing_key):
    token = tokens.issue(
        "app.a", frozenset({PiiField.EMAIL}), 1, 1000, 1, signing_key
    )
    assert token.issued_at == 1000
    assert token.expires_at == 1030
    assert token.expires_at - token.issued_at == TOKEN_TTL_SECONDS


def test_signature_verifies_under_issuing_epoch(signing_key):
    token = tokens.issue(
        "app.a", frozenset({PiiField.EMAIL}), 1, 1000, 3, signing_key
    )
    tokens.verify_signature(token, 3, signing_key.public_key())


def test_altered_body_fails_verification(signing_key):
    token = tokens.issue(
        "app.a", frozenset({PiiField.EMAIL}), 1, 1000, 1, signing_key
    )
    forged = ScopeToken(
        app_id=token.app_id,
        authorized_scopes=frozenset({PiiField.EMAIL, PiiField.GENDER}),
        nonce=token.nonce,
        issued_at=token.issued_at,
        expires_at=token.expires_at,
        key_epoch=token.key_epoch,
        signature=token.signature,
    )
    with pytest.raises(SignatureInvalidError):
        tokens.verify_signature(forged, 1, signing_key.public_key())


def test_non_current_epoch_rejected(signing_key):
    token = tokens.issue(
        "app.a", frozenset({PiiField.EMAIL}), 1, 1000, 1, signing_key
    )
    with pytest.raises(EpochMismatchError):
        tokens.verify_signature(token, 2, signing_key.public_key())


def test_wrong_validity_window_rejected_at_construction():
    with pytest.raises(ValueError):
        ScopeToken(
            app_id="app.a",
            authorized_scopes=frozenset({PiiField.EMAIL}),
            nonce=1,
            issued_at=1000,
            expires_at=1060,
            key_epoch=1,
            signature=b"",
        )
